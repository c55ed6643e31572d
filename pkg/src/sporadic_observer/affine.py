"""Matrices affine in scalar decision variables, and the LMI problem container.

An :class:`Affine` is ``const + sum_k x_k * coef_k`` with a sparse map
``k -> coef_k``.  Builders declare matrix variables on a :class:`VarSpace`,
combine them with constant matrices, and hand finished blocks to
:class:`LmiProblem` as constraints ``G(x) <= 0`` (negative semidefinite).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SYM_TOL = 1e-12


@dataclass(frozen=True)
class VarId:
    index: int
    label: str


class Affine:
    __slots__ = ("const", "terms")
    __array_ufunc__ = None  # ndarray (op) Affine defers to the reflected Affine method

    def __init__(self, const, terms: dict[int, np.ndarray] | None = None):
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        self.terms = terms if terms is not None else {}

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @property
    def T(self) -> "Affine":
        return Affine(self.const.T, {k: v.T for k, v in self.terms.items()})

    def _combine(self, other, sign: float) -> "Affine":
        if not isinstance(other, Affine):
            return Affine(self.const + sign * np.asarray(other, dtype=float), dict(self.terms))
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + sign * v if k in terms else sign * v
        return Affine(self.const + sign * other.const, terms)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __radd__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        scalar = float(scalar)
        return Affine(self.const * scalar, {k: v * scalar for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, mat):
        if isinstance(mat, Affine):
            raise TypeError("product of two affine expressions is not affine")
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        return Affine(self.const @ mat, {k: v @ mat for k, v in self.terms.items()})

    def __rmatmul__(self, mat):
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        return Affine(mat @ self.const, {k: mat @ v for k, v in self.terms.items()})

    def value(self, x: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for k, v in self.terms.items():
            out += x[k] * v
        return out

    def variables(self) -> set[int]:
        return {k for k, v in self.terms.items() if np.any(v)}


def as_affine(x) -> Affine:
    return x if isinstance(x, Affine) else Affine(x)


def times(scalar, mat) -> Affine | np.ndarray:
    """Scalar (float or 1x1 Affine) times a constant matrix."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if not isinstance(scalar, Affine):
        return float(scalar) * mat
    if scalar.shape != (1, 1):
        raise ValueError("times() expects a 1x1 affine scalar")
    return Affine(scalar.const[0, 0] * mat, {k: v[0, 0] * mat for k, v in scalar.terms.items()})


def he(x):
    """He(X) = X + X^T."""
    return x + x.T


def block(rows: Sequence[Sequence]) -> Affine:
    """Assemble a block matrix from Affine / ndarray / None (zero) entries."""
    heights = []
    for row in rows:
        h = None
        for item in row:
            if item is not None:
                h = np.atleast_2d(item.const if isinstance(item, Affine) else np.asarray(item)).shape[0]
                break
        if h is None:
            raise ValueError("a block row has no sized entry")
        heights.append(h)
    widths = []
    for j in range(len(rows[0])):
        w = None
        for row in rows:
            item = row[j]
            if item is not None:
                w = np.atleast_2d(item.const if isinstance(item, Affine) else np.asarray(item)).shape[1]
                break
        if w is None:
            raise ValueError("a block column has no sized entry")
        widths.append(w)
    r0 = np.concatenate([[0], np.cumsum(heights)])
    c0 = np.concatenate([[0], np.cumsum(widths)])
    const = np.zeros((r0[-1], c0[-1]))
    terms: dict[int, np.ndarray] = {}
    for i, row in enumerate(rows):
        for j, item in enumerate(row):
            if item is None:
                continue
            a = as_affine(item)
            if a.shape != (heights[i], widths[j]):
                raise ValueError(f"block ({i},{j}) has shape {a.shape}, expected {(heights[i], widths[j])}")
            const[r0[i]:r0[i + 1], c0[j]:c0[j + 1]] += a.const
            for k, v in a.terms.items():
                if k not in terms:
                    terms[k] = np.zeros_like(const)
                terms[k][r0[i]:r0[i + 1], c0[j]:c0[j + 1]] += v
    return Affine(const, terms)


def select(expr: Affine, keep: np.ndarray) -> Affine:
    """Principal submatrix on the index list ``keep``."""
    ix = np.ix_(keep, keep)
    return Affine(expr.const[ix], {k: v[ix] for k, v in expr.terms.items()})


class VarSpace:
    """Allocates scalar decision variables and hands back matrix-shaped views."""

    def __init__(self):
        self.vars: list[VarId] = []
        self.matrices: dict[str, np.ndarray] = {}
        self.symmetric: set[str] = set()

    def _new(self, label: str) -> int:
        idx = len(self.vars)
        self.vars.append(VarId(idx, label))
        return idx

    def scalar(self, name: str) -> Affine:
        idx = self._new(name)
        self.matrices[name] = np.array([[idx]])
        return Affine(np.zeros((1, 1)), {idx: np.ones((1, 1))})

    def full(self, name: str, rows: int, cols: int) -> Affine:
        index = np.empty((rows, cols), dtype=int)
        terms = {}
        for i in range(rows):
            for j in range(cols):
                idx = self._new(f"{name}[{i}][{j}]")
                index[i, j] = idx
                e = np.zeros((rows, cols))
                e[i, j] = 1.0
                terms[idx] = e
        self.matrices[name] = index
        return Affine(np.zeros((rows, cols)), terms)

    def sym(self, name: str, n: int) -> Affine:
        index = np.empty((n, n), dtype=int)
        terms = {}
        for i in range(n):
            for j in range(i, n):
                idx = self._new(f"{name}[{i}][{j}]")
                index[i, j] = index[j, i] = idx
                e = np.zeros((n, n))
                e[i, j] = e[j, i] = 1.0
                terms[idx] = e
        self.matrices[name] = index
        self.symmetric.add(name)
        return Affine(np.zeros((n, n)), terms)


@dataclass(frozen=True)
class AffineSymMatrix:
    """Symmetric ``constant + sum x_k * coef_k``; a constraint means this is <= 0."""

    dimension: int
    constant: np.ndarray
    terms: tuple[tuple[VarId, np.ndarray], ...]
    name: str = ""

    def __post_init__(self):
        d = self.dimension
        mats = [self.constant] + [m for _, m in self.terms]
        for m in mats:
            if m.shape != (d, d):
                raise ValueError(f"{self.name}: matrix of shape {m.shape} in a {d}x{d} constraint")
            if np.max(np.abs(m - m.T), initial=0.0) > SYM_TOL * (1 + np.max(np.abs(m), initial=0.0)):
                raise ValueError(f"{self.name}: non-symmetric coefficient")

    @classmethod
    def from_affine(cls, expr: Affine, variables: Sequence[VarId], name: str = "") -> "AffineSymMatrix":
        for m in [expr.const, *expr.terms.values()]:
            if np.max(np.abs(m - m.T), initial=0.0) > 1e-10 * (1 + np.max(np.abs(m), initial=0.0)):
                raise ValueError(f"{name}: assembled block is not symmetric")
        const = 0.5 * (expr.const + expr.const.T)
        terms = []
        for k in sorted(expr.terms):
            v = expr.terms[k]
            if np.any(v):
                terms.append((variables[k], 0.5 * (v + v.T)))
        return cls(expr.shape[0], const, tuple(terms), name)

    def value(self, x: np.ndarray) -> np.ndarray:
        out = self.constant.copy()
        for var, m in self.terms:
            out += x[var.index] * m
        return out

    def coefficient_tensor(self, n_vars: int) -> np.ndarray:
        out = np.zeros((n_vars, self.dimension, self.dimension))
        for var, m in self.terms:
            out[var.index] += m
        return out

    def scale(self) -> float:
        mats = [self.constant] + [m for _, m in self.terms]
        return max(float(np.max(np.abs(m), initial=0.0)) for m in mats)


@dataclass(frozen=True)
class PsdVariable:
    """A symmetric matrix variable required to satisfy ``P >= eps_pd * I``."""

    name: str
    index: np.ndarray  # (dim, dim) VarId indices, mirrored
    eps_pd: float

    @property
    def dimension(self) -> int:
        return self.index.shape[0]

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.index]

    def as_constraint(self, variables: Sequence[VarId]) -> AffineSymMatrix:
        """eps_pd * I - P <= 0."""
        d = self.dimension
        terms = []
        for i in range(d):
            for j in range(i, d):
                e = np.zeros((d, d))
                e[i, j] = e[j, i] = -1.0
                terms.append((variables[int(self.index[i, j])], e))
        return AffineSymMatrix(d, self.eps_pd * np.eye(d), tuple(terms), f"{self.name}>0")


@dataclass(frozen=True)
class LmiProblem:
    variables: tuple[VarId, ...]
    constraints: tuple[AffineSymMatrix, ...]
    psd_variables: tuple[PsdVariable, ...] = ()
    objective: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    matrices: dict = field(default_factory=dict)  # name -> VarId index layout

    def __post_init__(self):
        labels = [v.label for v in self.variables]
        if len(set(labels)) != len(labels):
            raise ValueError("variable labels must be unique")
        if [v.index for v in self.variables] != list(range(len(self.variables))):
            raise ValueError("variable indices must be dense from 0")
        known = set(self.variables)
        for c in self.constraints:
            for var, _ in c.terms:
                if var not in known:
                    raise ValueError(f"constraint {c.name} uses unknown variable {var}")
        if self.objective is not None and len(self.objective) != len(self.variables):
            raise ValueError("objective length does not match the variable count")

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def all_constraints(self) -> list[AffineSymMatrix]:
        """Constraints followed by the positive-definiteness blocks, all as ``<= 0``."""
        return list(self.constraints) + [p.as_constraint(self.variables) for p in self.psd_variables]

    def var_index(self, label: str) -> int:
        for v in self.variables:
            if v.label == label:
                return v.index
        raise KeyError(label)

    def matrix_value(self, name: str, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.matrices[name]]


def make_problem(space: VarSpace, constraints: Iterable[tuple[str, Affine]], psd: Iterable[tuple[str, float]] = (),
                 objective: dict[str, float] | None = None, metadata: dict | None = None) -> LmiProblem:
    variables = tuple(space.vars)
    cons = tuple(AffineSymMatrix.from_affine(expr, variables, name) for name, expr in constraints)
    psd_vars = tuple(PsdVariable(name, space.matrices[name], eps) for name, eps in psd)
    c = None
    if objective:
        c = np.zeros(len(variables))
        for name, weight in objective.items():
            c[int(space.matrices[name][0, 0])] = weight
    return LmiProblem(variables, cons, psd_vars, c, dict(metadata or {}), dict(space.matrices))
