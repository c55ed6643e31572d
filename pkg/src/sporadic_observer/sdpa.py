"""SDPA sparse (.dat-s) exchange for :class:`LmiProblem`.

SDPA states problems as ``sum_i x_i F_i - F_0 >= 0``.  A constraint
``C_0 + sum_i x_i C_i <= 0`` maps to ``F_0 = C_0`` and ``F_i = -C_i``.
Positive-definite variable blocks are emitted as ordinary blocks so the file is
self-contained for an external solver.  Labels, block names and the matrix
layout travel in ``*`` comment lines, which SDPA readers skip; floats are
written with ``repr`` so parsing reproduces them bit for bit.
"""

from __future__ import annotations

import json

import numpy as np

from .affine import AffineSymMatrix, LmiProblem, PsdVariable, VarId


class SdpaFormatError(ValueError):
    pass


def _is_diagonal(mats) -> bool:
    return all(not np.any(m - np.diag(np.diag(m))) for m in mats)


def export_sdpa(problem: LmiProblem) -> str:
    if not problem.constraints and not problem.psd_variables:
        raise SdpaFormatError("SDPA needs at least one block; the problem has no constraints")
    lines = [f"* var {v.index} {v.label}" for v in problem.variables]
    blocks = []
    for c in problem.constraints:
        lines.append(f"* block {len(blocks) + 1} constraint {c.name}")
        blocks.append(c)
    for p in problem.psd_variables:
        lines.append(f"* block {len(blocks) + 1} psd {float(p.eps_pd)!r} {p.name}")
        blocks.append(p.as_constraint(problem.variables))
    lines.append("* objective " + ("none" if problem.objective is None else "given"))
    lines.append("* meta " + json.dumps(problem.metadata, sort_keys=True))
    lines.append("* matrices " + json.dumps({k: np.asarray(v).tolist() for k, v in problem.matrices.items()},
                                            sort_keys=True))
    sizes = []
    for b in blocks:
        mats = [b.constant] + [m for _, m in b.terms]
        sizes.append(-b.dimension if b.dimension > 1 and _is_diagonal(mats) else b.dimension)
    c = np.zeros(problem.n_vars) if problem.objective is None else np.asarray(problem.objective, dtype=float)
    lines.append(str(problem.n_vars))
    lines.append(str(len(blocks)))
    lines.append(" ".join(str(s) for s in sizes))
    lines.append(" ".join(repr(float(v)) for v in c) if problem.n_vars else "")

    def entries(mat_no, blk_no, m, sign):
        d = m.shape[0]
        for i in range(d):
            for j in range(i, d):
                if m[i, j] != 0.0:
                    lines.append(f"{mat_no} {blk_no} {i + 1} {j + 1} {float(sign * m[i, j])!r}")

    for k, b in enumerate(blocks, start=1):
        entries(0, k, b.constant, 1.0)
    for var in problem.variables:
        for k, b in enumerate(blocks, start=1):
            for v, m in b.terms:
                if v == var:
                    entries(var.index + 1, k, m, -1.0)
    return "\n".join(lines) + "\n"


def parse_sdpa(text: str) -> LmiProblem:
    """Inverse of :func:`export_sdpa` (requires its comment lines for labels and block roles)."""
    labels, roles, meta, layout, objective_given = {}, {}, {}, {}, True
    data = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("*") or line.startswith('"'):
            parts = line[1:].strip().split(" ", 1)
            key, rest = parts[0], parts[1] if len(parts) > 1 else ""
            if key == "var":
                idx, label = rest.split(" ", 1)
                labels[int(idx)] = label
            elif key == "block":
                no, kind, rest2 = rest.split(" ", 2)
                if kind == "psd":
                    eps, name = rest2.split(" ", 1)
                    roles[int(no)] = ("psd", name, float(eps))
                else:
                    roles[int(no)] = ("constraint", rest2, None)
            elif key == "objective":
                objective_given = rest.strip() != "none"
            elif key == "meta":
                meta = json.loads(rest)
            elif key == "matrices":
                layout = {k: np.asarray(v, dtype=int) for k, v in json.loads(rest).items()}
            continue
        data.append(line)
    if len(data) < 3:
        raise SdpaFormatError("truncated SDPA file")
    try:
        m = int(data[0].split()[0])
        n_blocks = int(data[1].split()[0])
        sizes = [abs(int(s)) for s in data[2].replace(",", " ").replace("{", " ").replace("}", " ").split()]
    except ValueError as exc:
        raise SdpaFormatError(f"bad header: {exc}") from None
    if len(sizes) != n_blocks or n_blocks < 1:
        raise SdpaFormatError("block structure does not match the block count")
    rest = data[3:]
    if m:
        c = np.array([float(v) for v in rest[0].replace(",", " ").split()])
        rest = rest[1:]
    else:
        c = np.zeros(0)
        # an empty objective line is dropped by the blank-line filter
    if len(c) != m:
        raise SdpaFormatError(f"objective has {len(c)} entries for {m} variables")
    mats = [[np.zeros((d, d)) for d in sizes] for _ in range(m + 1)]
    for line in rest:
        f = line.split()
        if len(f) != 5:
            raise SdpaFormatError(f"bad entry line {line!r}")
        k, b, i, j = (int(v) for v in f[:4])
        val = float(f[4])
        if not (0 <= k <= m and 1 <= b <= n_blocks):
            raise SdpaFormatError(f"entry out of range: {line!r}")
        M = mats[k][b - 1]
        M[i - 1, j - 1] = M[j - 1, i - 1] = val
    variables = tuple(VarId(i, labels.get(i, f"x{i + 1}")) for i in range(m))
    constraints, psd = [], []
    for b in range(1, n_blocks + 1):
        kind, name, eps = roles.get(b, ("constraint", f"block{b}", None))
        if kind == "psd":
            psd.append(PsdVariable(name, layout[name], eps))
            continue
        terms = tuple((variables[k - 1], -mats[k][b - 1]) for k in range(1, m + 1) if np.any(mats[k][b - 1]))
        constraints.append(AffineSymMatrix(sizes[b - 1], mats[0][b - 1], terms, name))
    return LmiProblem(variables, tuple(constraints), tuple(psd), c if objective_given else None, meta, layout)


def parse_solution(text: str, problem: LmiProblem) -> np.ndarray:
    """Point vector from whitespace-separated ``label value`` lines covering every variable."""
    values = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        f = line.split()
        if len(f) != 2:
            raise SdpaFormatError(f"expected 'label value', got {line!r}")
        values[f[0]] = float(f[1])
    known = {v.label for v in problem.variables}
    extra = set(values) - known
    if extra:
        raise SdpaFormatError(f"unknown variables in solution: {sorted(extra)[:5]}")
    missing = known - set(values)
    if missing:
        raise SdpaFormatError(f"solution misses variables: {sorted(missing)[:5]}")
    return np.array([values[v.label] for v in problem.variables])


def format_solution(problem: LmiProblem, x) -> str:
    return "".join(f"{v.label} {float(x[v.index])!r}\n" for v in problem.variables)
