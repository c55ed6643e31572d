import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def random_plant(rng, n_z, n_y, nonlinear=False):
    from sporadic_observer import PlantModel
    A = rng.normal(size=(n_z, n_z))
    C = rng.normal(size=(n_y, n_z))
    N = rng.normal(size=(n_z, 1))
    Cp = rng.normal(size=(1, n_z))
    if not nonlinear:
        return PlantModel.linear(A=A, C=C, N=N, Cp=Cp)
    return PlantModel(A=A, B=rng.normal(size=(n_z, 1)), S=rng.normal(size=(1, n_z)), N=N, C=C, Cp=Cp,
                      lipschitz_ell=1.5, psi=lambda v: 1.5 * np.sin(v))


def random_certificate(rng, n_z, n_y, linear=True):
    from sporadic_observer import Certificate

    def spd(n):
        R = rng.normal(size=(n, n))
        return R @ R.T + 0.1 * np.eye(n)

    return Certificate(P1=spd(n_z), P2=spd(n_y), delta=float(rng.uniform(0.1, 5)),
                       chi=0.0 if linear else float(rng.uniform(0.1, 2)), lambda_t=float(rng.uniform(0.01, 1)),
                       gamma=float(rng.uniform(0.5, 5)), T2=float(rng.uniform(0.05, 1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
