"""Block-structured Hermitian semidefinite programming.

The public surface works with complex Hermitian PSD variable blocks,
free real scalars, and linear constraints over trace inner products.
Internally each Hermitian block is realized through the real symmetric
embedding ``[[Re X, -Im X], [Im X, Re X]]`` and handed to the
interior-point core in :mod:`crbeam._ipm`; the structured subspace is
maintained by projection, so the cone machinery stays purely real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import _ipm
from .errors import DimensionMismatch
from .numerics import assert_hermitian, hermitize

SENSES = ("==", ">=", "<=")


@dataclass
class LinearConstraint:
    """sum_b tr(C_b X_b) + sum_s a_s t_s  (sense)  rhs, with Hermitian C_b."""

    block_coeffs: Dict[str, np.ndarray] = field(default_factory=dict)
    scalar_coeffs: Dict[str, float] = field(default_factory=dict)
    sense: str = "=="
    rhs: float = 0.0
    name: str = ""


@dataclass
class SdpProblem:
    """Linear objective + linear trace constraints over Hermitian PSD blocks."""

    blocks: List[tuple] = field(default_factory=list)          # (name, dim)
    free_scalars: List[str] = field(default_factory=list)
    objective_blocks: Dict[str, np.ndarray] = field(default_factory=dict)
    objective_scalars: Dict[str, float] = field(default_factory=dict)
    constraints: List[LinearConstraint] = field(default_factory=list)

    def add_block(self, name: str, dim: int) -> None:
        if any(n == name for n, _ in self.blocks):
            raise ValueError(f"duplicate block {name!r}")
        self.blocks.append((name, dim))

    def add_free_scalar(self, name: str) -> None:
        if name in self.free_scalars:
            raise ValueError(f"duplicate scalar {name!r}")
        self.free_scalars.append(name)

    def set_objective(self, block_coeffs=None, scalar_coeffs=None) -> None:
        self.objective_blocks = dict(block_coeffs or {})
        self.objective_scalars = dict(scalar_coeffs or {})

    def add_constraint(self, block_coeffs=None, scalar_coeffs=None, sense="==", rhs=0.0, name="") -> None:
        self.constraints.append(
            LinearConstraint(dict(block_coeffs or {}), dict(scalar_coeffs or {}), sense, float(rhs), name)
        )

    def block_dim(self, name: str) -> int:
        for n, d in self.blocks:
            if n == name:
                return d
        raise KeyError(name)

    def validate(self) -> None:
        names = [n for n, _ in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names")
        for where, coeffs in [("objective", self.objective_blocks)] + [
            (c.name or f"constraint {i}", c.block_coeffs) for i, c in enumerate(self.constraints)
        ]:
            for bname, mat in coeffs.items():
                dim = self.block_dim(bname)
                mat = np.asarray(mat)
                if mat.shape != (dim, dim):
                    raise DimensionMismatch(f"{where}: coefficient for {bname!r} has shape {mat.shape}, want {(dim, dim)}")
                assert_hermitian(mat, what=f"{where} coefficient for {bname!r}")
        for c in self.constraints:
            if c.sense not in SENSES:
                raise ValueError(f"unknown sense {c.sense!r}")
            for s in list(c.scalar_coeffs) + list(self.objective_scalars):
                if s not in self.free_scalars:
                    raise KeyError(f"unknown scalar {s!r}")


@dataclass
class SolveOptions:
    tol: float = 1e-7
    max_iter: int = 120
    target_tol: float = 1e-10


@dataclass
class SdpSolution:
    status: str
    primal_blocks: Dict[str, np.ndarray]
    scalars: Dict[str, float]
    dual_multipliers: np.ndarray
    dual_blocks: Dict[str, np.ndarray]
    pobj: float
    dobj: float
    residuals: Dict[str, float]
    iterations: int
    history: List[dict] = field(default_factory=list)
    certificate: Optional[dict] = None

    @property
    def is_optimal(self) -> bool:
        return self.status == "Optimal"


def elem_re(n: int, i: int, j: int) -> np.ndarray:
    """Hermitian C with <C, X> = Re X[i, j] for Hermitian X."""
    c = np.zeros((n, n), dtype=complex)
    c[i, j] += 0.5
    c[j, i] += 0.5
    return c


def elem_im(n: int, i: int, j: int) -> np.ndarray:
    """Hermitian C with <C, X> = Im X[i, j] for Hermitian X (i != j)."""
    c = np.zeros((n, n), dtype=complex)
    c[i, j] += 0.5j
    c[j, i] += -0.5j
    return c


def embed_hermitian(m: np.ndarray) -> np.ndarray:
    """Real symmetric 2n x 2n embedding of a Hermitian matrix."""
    re, im = np.real(m), np.imag(m)
    return np.block([[re, -im], [im, re]])


def unembed_hermitian(m: np.ndarray) -> np.ndarray:
    n = m.shape[0] // 2
    re = (m[:n, :n] + m[n:, n:]) / 2
    im = (m[n:, :n] - m[:n, n:]) / 2
    return hermitize(re + 1j * im)


def _build_cone_program(p: SdpProblem):
    p.validate()
    block_names = [n for n, _ in p.blocks]
    block_index = {n: j for j, n in enumerate(block_names)}
    ineq_rows = [i for i, c in enumerate(p.constraints) if c.sense != "=="]
    slack_of_row = {r: s for s, r in enumerate(ineq_rows)}
    n_slack = len(ineq_rows)
    scalar_index = {s: j for j, s in enumerate(p.free_scalars)}
    n_free = len(p.free_scalars)
    m = len(p.constraints)

    blocks = [
        _ipm.Block(_ipm.PSD, 2 * dim, embed_dim=dim) for _, dim in p.blocks
    ]
    c = [embed_hermitian(np.asarray(p.objective_blocks.get(name, np.zeros((dim, dim))), dtype=complex)) / 2
         for name, dim in p.blocks]
    rows_per_block = [[] for _ in p.blocks]
    coeff_per_block = [[] for _ in p.blocks]
    for i, con in enumerate(p.constraints):
        for bname, mat in con.block_coeffs.items():
            j = block_index[bname]
            rows_per_block[j].append(i)
            coeff_per_block[j].append(embed_hermitian(np.asarray(mat, dtype=complex)) / 2)

    a_rows = []
    a_coeff = []
    for j, (name, dim) in enumerate(p.blocks):
        if rows_per_block[j]:
            a_rows.append(np.array(rows_per_block[j], dtype=int))
            a_coeff.append(np.array(coeff_per_block[j]))
        else:
            a_rows.append(None)
            a_coeff.append(None)

    if n_slack:
        blocks.append(_ipm.Block(_ipm.NONNEG, n_slack))
        c.append(np.zeros(n_slack))
        srows = np.array(ineq_rows, dtype=int)
        scoef = np.zeros((n_slack, n_slack))
        for s, r in enumerate(ineq_rows):
            scoef[s, s] = -1.0 if p.constraints[r].sense == ">=" else 1.0
        a_rows.append(srows)
        a_coeff.append(scoef)

    if n_free:
        blocks.append(_ipm.Block(_ipm.FREE, n_free))
        cf = np.zeros(n_free)
        for s, v in p.objective_scalars.items():
            cf[scalar_index[s]] = v
        c.append(cf)
        frows = []
        fcoef = []
        for i, con in enumerate(p.constraints):
            if con.scalar_coeffs:
                row = np.zeros(n_free)
                for s, v in con.scalar_coeffs.items():
                    row[scalar_index[s]] = v
                frows.append(i)
                fcoef.append(row)
        a_rows.append(np.array(frows, dtype=int) if frows else None)
        a_coeff.append(np.array(fcoef) if fcoef else None)

    b = np.array([con.rhs for con in p.constraints], dtype=float)
    prog = _ipm.ConeProgram(blocks=blocks, c=c, a_rows=a_rows, a_coeff=a_coeff, b=b)
    return prog, block_names, n_slack, n_free


def solve(p: SdpProblem, opts: Optional[SolveOptions] = None) -> SdpSolution:
    """Solve the SDP; status Optimal guarantees residuals below ``opts.tol``."""
    opts = opts or SolveOptions()
    prog, block_names, n_slack, n_free = _build_cone_program(p)
    res = _ipm.solve_cone_program(
        prog, tol=opts.tol, max_iter=opts.max_iter, target_tol=opts.target_tol
    )
    primal = {}
    duals = {}
    for j, name in enumerate(block_names):
        primal[name] = unembed_hermitian(res.x[j])
        duals[name] = 2.0 * unembed_hermitian(res.z[j])
    scalars = {}
    if n_free:
        xf = res.x[len(block_names) + (1 if n_slack else 0)]
        for j, s in enumerate(p.free_scalars):
            scalars[s] = float(xf[j])
    return SdpSolution(
        status=res.status,
        primal_blocks=primal,
        scalars=scalars,
        dual_multipliers=res.y,
        dual_blocks=duals,
        pobj=res.pobj,
        dobj=res.dobj,
        residuals={"primal": res.res_primal, "dual": res.res_dual, "gap": res.gap_rel},
        iterations=res.iterations,
        history=res.history,
        certificate=res.certificate,
    )


def constraint_value(con: LinearConstraint, primal_blocks, scalars) -> float:
    v = 0.0
    for bname, mat in con.block_coeffs.items():
        v += float(np.real(np.trace(np.asarray(mat) @ primal_blocks[bname])))
    for s, coef in con.scalar_coeffs.items():
        v += coef * scalars[s]
    return v


def check_certificate(p: SdpProblem, s: SdpSolution) -> Dict[str, float]:
    """Recompute primal/dual/gap residuals from problem data alone.

    Independent of solver internals: dual slacks are rebuilt from the
    multipliers, so this validates the reported solution rather than the
    solver's bookkeeping.
    """
    b = np.array([c.rhs for c in p.constraints])
    scale_b = 1.0 + float(np.max(np.abs(b))) if b.size else 1.0

    viol = 0.0
    for con in p.constraints:
        v = constraint_value(con, s.primal_blocks, s.scalars)
        if con.sense == "==":
            viol = max(viol, abs(v - con.rhs))
        elif con.sense == ">=":
            viol = max(viol, max(0.0, con.rhs - v))
        else:
            viol = max(viol, max(0.0, v - con.rhs))
    cone = 0.0
    for name, _ in p.blocks:
        x = s.primal_blocks[name]
        w = np.linalg.eigvalsh(hermitize(x))
        cone = max(cone, max(0.0, -float(w[0])) / (1.0 + float(np.abs(w).max(initial=0.0))))
    primal_res = viol / scale_b + cone

    y = s.dual_multipliers
    dual_cone = 0.0
    dual_lin = 0.0
    scale_c = 1.0
    for name, dim in p.blocks:
        cmat = np.asarray(p.objective_blocks.get(name, np.zeros((dim, dim))), dtype=complex)
        zmat = cmat.astype(complex).copy()
        for i, con in enumerate(p.constraints):
            if name in con.block_coeffs:
                zmat -= y[i] * np.asarray(con.block_coeffs[name], dtype=complex)
        scale_c = max(scale_c, float(np.linalg.norm(cmat)))
        w = np.linalg.eigvalsh(hermitize(zmat))
        dual_cone = max(dual_cone, max(0.0, -float(w[0])) / (1.0 + float(np.abs(w).max(initial=0.0))))
    for sname in p.free_scalars:
        cs = p.objective_scalars.get(sname, 0.0)
        acc = cs - sum(
            y[i] * con.scalar_coeffs.get(sname, 0.0) for i, con in enumerate(p.constraints)
        )
        dual_lin = max(dual_lin, abs(acc))
    sign_viol = 0.0
    for i, con in enumerate(p.constraints):
        if con.sense == ">=":
            sign_viol = max(sign_viol, max(0.0, -y[i]))
        elif con.sense == "<=":
            sign_viol = max(sign_viol, max(0.0, y[i]))
    dual_res = dual_cone + (dual_lin + sign_viol) / scale_c

    pobj = sum(
        float(np.real(np.trace(np.asarray(mat) @ s.primal_blocks[name])))
        for name, mat in p.objective_blocks.items()
    ) + sum(v * s.scalars[k] for k, v in p.objective_scalars.items())
    dobj = float(y @ b) if b.size else 0.0
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return {
        "primal": primal_res,
        "dual": dual_res,
        "gap": gap,
        "pobj": pobj,
        "dobj": dobj,
        "constraint_violation": viol,
        "cone_violation": cone,
    }


def dump_conic(p: SdpProblem) -> str:
    """Plain-text dump (block sizes + constraint triplets) for external cross-checks."""
    lines = [f"blocks {len(p.blocks)}"]
    for name, dim in p.blocks:
        lines.append(f"psdblock {name} {dim}")
    for s in p.free_scalars:
        lines.append(f"free {s}")
    def fmt_terms(block_coeffs, scalar_coeffs):
        out = []
        for bname in sorted(block_coeffs):
            mat = np.asarray(block_coeffs[bname], dtype=complex)
            for i, j in zip(*np.nonzero(np.abs(mat) > 0)):
                if j < i:
                    continue
                out.append(f"{bname}[{i},{j}] {mat[i, j].real:.17g} {mat[i, j].imag:.17g}")
        for sname in sorted(scalar_coeffs):
            out.append(f"{sname} {scalar_coeffs[sname]:.17g}")
        return out
    lines.append("objective " + "; ".join(fmt_terms(p.objective_blocks, p.objective_scalars)))
    for k, con in enumerate(p.constraints):
        lines.append(
            f"constraint {k} {con.sense} {con.rhs:.17g} : " + "; ".join(fmt_terms(con.block_coeffs, con.scalar_coeffs))
        )
    return "\n".join(lines) + "\n"
