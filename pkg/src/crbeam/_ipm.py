"""Primal-dual interior-point core for small dense conic programs.

Solves

    minimize    <c, x>
    subject to  A x = b,   x in K,

where ``K`` is a product of real symmetric PSD blocks, a nonnegative
vector block and a free vector block.  The method is path following with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step; free
variables enter the Newton system through an augmented Schur complement.

Complex Hermitian blocks are handled one layer up (:mod:`crbeam.sdp`)
through the real symmetric embedding ``[[Re X, -Im X], [Im X, Re X]]``.
Blocks carrying ``embed_dim`` metadata are kept on that structured
subspace by an orthogonal projection each iteration, which plays the
role of explicit skew-symmetry equality constraints without enlarging
the Newton system.

Constraint coefficient matrices are mostly elementary (a few nonzero
entries coupling block entries), so the Schur complement is assembled
through a per-block sparse representation rather than dense triple
products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

PSD, NONNEG, FREE = "psd", "nonneg", "free"

_DENSE_ROW_NNZ = 16  # rows with more nonzeros than this use dense matmuls


@dataclass(frozen=True)
class Block:
    kind: str
    dim: int
    embed_dim: Optional[int] = None  # complex dimension when this PSD block is an embedding

    def __post_init__(self):
        if self.kind not in (PSD, NONNEG, FREE):
            raise ValueError(f"unknown block kind {self.kind}")
        if self.kind == PSD and self.embed_dim is not None and 2 * self.embed_dim != self.dim:
            raise ValueError("embedded PSD block must have dim = 2 * embed_dim")


@dataclass
class ConeProgram:
    """Block-structured conic program in equality standard form."""

    blocks: List[Block]
    c: List[np.ndarray]                       # objective per block (matrix or vector)
    a_rows: List[Optional[np.ndarray]]        # per block: row indices with a nonzero coefficient
    a_coeff: List[Optional[np.ndarray]]       # per block: (r, n, n) or (r, n) coefficient stack
    b: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    def barrier_degree(self) -> int:
        return sum(blk.dim for blk in self.blocks if blk.kind in (PSD, NONNEG))


@dataclass
class IpmResult:
    status: str                              # Optimal | Infeasible | Unbounded | MaxIter
    x: List[np.ndarray]
    y: np.ndarray
    z: List[np.ndarray]
    pobj: float
    dobj: float
    res_primal: float
    res_dual: float
    gap_rel: float
    iterations: int
    history: List[dict] = field(default_factory=list)
    certificate: Optional[dict] = None       # dual/primal improving ray when infeasible/unbounded


def _sym(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2


def _embed_project(m: np.ndarray, nc: int) -> np.ndarray:
    """Project a symmetric 2nc x 2nc matrix onto the complex-structure subspace.

    The subspace is {[[A, -B], [B, A]] : A symmetric, B skew}; the projection
    averages the two diagonal blocks and takes the skew part of the
    off-diagonal block, i.e. (S + J S J^T) / 2 with J the symplectic form.
    """
    a = (m[:nc, :nc] + m[nc:, nc:]) / 2
    a = (a + a.T) / 2
    b = (m[nc:, :nc] - m[nc:, :nc].T) / 2
    out = np.empty_like(m)
    out[:nc, :nc] = a
    out[nc:, nc:] = a
    out[nc:, :nc] = b
    out[:nc, nc:] = -b
    return out


class _BlockA:
    """Constraint coefficients for one cone block, in flat sparse form."""

    def __init__(self, blk: Block, rows: np.ndarray, coeff: np.ndarray):
        self.rows = rows
        self.is_psd = blk.kind == PSD
        n_local = rows.shape[0]
        flat = coeff.reshape(n_local, -1)
        self.mat = sp.csr_matrix(flat)
        self.mat_t = self.mat.T.tocsr()
        self.n = blk.dim
        if self.is_psd:
            nnz_per_row = np.diff(self.mat.indptr)
            self.dense_idx = np.nonzero(nnz_per_row > _DENSE_ROW_NNZ)[0]
            self.sparse_idx = np.nonzero(nnz_per_row <= _DENSE_ROW_NNZ)[0]
            self.dense_stack = coeff[self.dense_idx] if self.dense_idx.size else None
            self.pad_v = None
            if self.sparse_idx.size:
                sub = self.mat[self.sparse_idx].tocsr()
                nmax = int(np.max(np.diff(sub.indptr))) if sub.nnz else 0
                if nmax:
                    r_s = self.sparse_idx.size
                    self.pad_i = np.zeros((r_s, nmax), dtype=int)
                    self.pad_j = np.zeros((r_s, nmax), dtype=int)
                    self.pad_v = np.zeros((r_s, nmax))
                    for r in range(r_s):
                        lo, hi = sub.indptr[r], sub.indptr[r + 1]
                        cols = sub.indices[lo:hi]
                        self.pad_i[r, : hi - lo], self.pad_j[r, : hi - lo] = np.unravel_index(
                            cols, (self.n, self.n)
                        )
                        self.pad_v[r, : hi - lo] = sub.data[lo:hi]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """A_block(x): one inner product per local row."""
        return self.mat @ x.ravel()

    def apply_t(self, y_local: np.ndarray) -> np.ndarray:
        out = self.mat_t @ y_local
        return out.reshape(self.n, self.n) if self.is_psd else out

    def gram(self, w: np.ndarray) -> np.ndarray:
        """M_local = [tr(C_r W C_s W)]_{rs} for the NT matrix ``w`` (PSD blocks).

        Elementary rows (the common case: subblock-coupling constraints)
        are handled as padded batched rank-one updates W C W = sum_t v_t
        (W e_i)(W e_j)^T, avoiding dense triple products.
        """
        n_local = self.rows.shape[0]
        if not hasattr(self, "_u_buf"):
            self._u_buf = np.zeros((n_local, self.n * self.n))
        u = self._u_buf
        if self.dense_stack is not None:
            u[self.dense_idx] = (w @ self.dense_stack @ w).reshape(self.dense_idx.size, -1)
        if self.pad_v is not None:
            r_s, nmax = self.pad_v.shape
            # w is symmetric: row gathers give the needed columns contiguously
            left = w[self.pad_i.ravel()].reshape(r_s, nmax, self.n) * self.pad_v[:, :, None]
            right = w[self.pad_j.ravel()].reshape(r_s, nmax, self.n)
            u[self.sparse_idx] = np.matmul(left.transpose(0, 2, 1), right).reshape(r_s, -1)
        m_local = self.mat @ u.T
        return _sym(np.asarray(m_local))


def _apply_a(ops, prog: ConeProgram, x: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros(prog.n_rows)
    for j, op in enumerate(ops):
        if op is not None:
            out[op.rows] += op.apply(x[j])
    return out


def _apply_at(ops, prog: ConeProgram, y: np.ndarray) -> List[np.ndarray]:
    out = []
    for j, blk in enumerate(prog.blocks):
        op = ops[j]
        if op is None:
            out.append(np.zeros((blk.dim, blk.dim)) if blk.kind == PSD else np.zeros(blk.dim))
        else:
            out.append(op.apply_t(y[op.rows]))
    return out


def _inner(u: Sequence[np.ndarray], v: Sequence[np.ndarray]) -> float:
    return float(sum(np.sum(a * b) for a, b in zip(u, v)))


def _max_step_psd(x: np.ndarray, dx: np.ndarray) -> float:
    """sup {alpha : x + alpha dx >= 0} for PD x."""
    try:
        lx = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        lx = np.linalg.cholesky(x + 1e-14 * max(np.trace(x), 1.0) * np.eye(x.shape[0]))
    m = sla.solve_triangular(lx, dx, lower=True)
    m = sla.solve_triangular(lx, m.T, lower=True)
    lam_min = float(np.linalg.eigvalsh(_sym(m))[0])
    if lam_min >= 0:
        return np.inf
    return -1.0 / lam_min


def _max_step_nonneg(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


class _NTScaling:
    """Per-block NT scaling data for one iteration."""

    def __init__(self, blocks, x, z):
        self.w = []        # NT matrix (psd) or w^2 vector (nonneg)
        self.g = []        # factor G with W = G G^T
        self.ginv = []
        self.lam = []      # scaled-point spectrum
        for blk, xb, zb in zip(blocks, x, z):
            if blk.kind == PSD:
                lx = np.linalg.cholesky(xb)
                lz = np.linalg.cholesky(zb)
                u, s, vt = np.linalg.svd(lz.T @ lx)
                s = np.maximum(s, 1e-300)
                g = lx @ vt.T / np.sqrt(s)
                ginv = (vt.T * np.sqrt(s)).T @ sla.solve_triangular(lx, np.eye(blk.dim), lower=True)
                self.g.append(g)
                self.ginv.append(ginv)
                self.w.append(_sym(g @ g.T))
                self.lam.append(s)
            elif blk.kind == NONNEG:
                self.g.append(np.sqrt(xb / zb))
                self.ginv.append(None)
                self.w.append(xb / zb)
                self.lam.append(np.sqrt(xb * zb))
            else:
                self.g.append(None)
                self.ginv.append(None)
                self.w.append(None)
                self.lam.append(None)

    def apply(self, j: int, v: np.ndarray, blocks) -> np.ndarray:
        """H_j(v) = W v W for PSD, w^2 * v for nonneg."""
        if blocks[j].kind == PSD:
            return self.w[j] @ v @ self.w[j]
        return self.w[j] * v


def _schur(ops, prog: ConeProgram, nt: _NTScaling) -> np.ndarray:
    m = np.zeros((prog.n_rows, prog.n_rows))
    for j, blk in enumerate(prog.blocks):
        op = ops[j]
        if op is None or blk.kind == FREE:
            continue
        if blk.kind == PSD:
            m[np.ix_(op.rows, op.rows)] += op.gram(nt.w[j])
        else:
            dense = op.mat.multiply(nt.w[j][np.newaxis, :]) @ op.mat.T
            m[np.ix_(op.rows, op.rows)] += np.asarray(dense.todense())
    return _sym(m)


def _free_block(prog: ConeProgram) -> Optional[Tuple[int, np.ndarray]]:
    for j, blk in enumerate(prog.blocks):
        if blk.kind == FREE:
            af = np.zeros((prog.n_rows, blk.dim))
            rows, coeff = prog.a_rows[j], prog.a_coeff[j]
            if rows is not None and rows.size:
                af[rows, :] = coeff
            return j, af
    return None


class _SchurSolver:
    """Factorization of [[M, A_f], [A_f^T, 0]] with one step of iterative refinement."""

    def __init__(self, m: np.ndarray, af: Optional[np.ndarray]):
        self.m = m
        self.af = af
        jitter = 0.0
        base = max(np.trace(m) / max(1, m.shape[0]), 1.0)
        for _ in range(8):
            try:
                self.chol = sla.cho_factor(m + jitter * np.eye(m.shape[0]), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 100.0, 1e-14 * base)
        else:
            raise np.linalg.LinAlgError("Schur complement factorization failed")
        if af is not None:
            self.t = sla.cho_solve(self.chol, af)
            s = af.T @ self.t
            self.s = _sym(s) + 1e-300 * np.eye(s.shape[0])

    def _solve_once(self, rhs: np.ndarray, rhs_free: Optional[np.ndarray]):
        u = sla.cho_solve(self.chol, rhs)
        if self.af is None:
            return u, None
        dxf = np.linalg.solve(self.s, self.af.T @ u - rhs_free)
        return u - self.t @ dxf, dxf

    def solve(self, rhs: np.ndarray, rhs_free: Optional[np.ndarray]):
        dy, dxf = self._solve_once(rhs, rhs_free)
        # one refinement pass against the augmented system
        r1 = rhs - self.m @ dy - (self.af @ dxf if self.af is not None else 0.0)
        r2 = rhs_free - self.af.T @ dy if self.af is not None else None
        e1, e2 = self._solve_once(r1, r2)
        dy = dy + e1
        if self.af is not None:
            dxf = dxf + e2
        return dy, dxf


def solve_cone_program(
    prog: ConeProgram,
    tol: float = 1e-8,
    max_iter: int = 100,
    step_frac: float = 0.99,
    target_tol: float = 1e-10,
    infeas_tol: float = 1e-6,
) -> IpmResult:
    """Run the predictor-corrector NT interior-point method.

    ``tol`` is the acceptance threshold for status Optimal; the iteration
    keeps polishing towards ``target_tol`` while it makes progress, so
    reported residuals are typically well below ``tol``.
    """
    blocks = prog.blocks
    nu = prog.barrier_degree()
    if nu == 0:
        raise ValueError("program has no cone variables")
    m_rows = prog.n_rows

    # -- row equilibration: unit max coefficient norm per constraint --------
    row_scale = np.zeros(m_rows)
    for j, blk in enumerate(prog.blocks):
        rows, coeff = prog.a_rows[j], prog.a_coeff[j]
        if rows is None or rows.size == 0:
            continue
        axes = (1, 2) if blk.kind == PSD else 1
        np.maximum.at(row_scale, rows, np.sqrt(np.sum(coeff**2, axis=axes)))
    row_scale = np.maximum(row_scale, 1e-12)
    prog = ConeProgram(
        blocks=prog.blocks,
        c=prog.c,
        a_rows=prog.a_rows,
        a_coeff=[
            (coeff / row_scale[rows].reshape((-1,) + (1,) * (coeff.ndim - 1)) if rows is not None and rows.size else coeff)
            for rows, coeff in zip(prog.a_rows, prog.a_coeff)
        ],
        b=prog.b / row_scale,
    )

    # -- free-column equilibration: balances t-like variables against blocks --
    free_col_scale = None
    for j, blk in enumerate(prog.blocks):
        if blk.kind != FREE:
            continue
        rows, coeff = prog.a_rows[j], prog.a_coeff[j]
        scale = np.ones(blk.dim)
        if rows is not None and rows.size:
            scale = np.maximum(np.max(np.abs(coeff), axis=0), 1e-12)
            coeff = coeff / scale[np.newaxis, :]
        free_col_scale = (j, scale)
        cj = prog.c[j] / scale
        prog = ConeProgram(
            blocks=prog.blocks,
            c=[cj if i == j else cb for i, cb in enumerate(prog.c)],
            a_rows=prog.a_rows,
            a_coeff=[coeff if i == j else cb for i, cb in enumerate(prog.a_coeff)],
            b=prog.b,
        )

    ops = [
        _BlockA(blk, rows, coeff) if (rows is not None and rows.size) else None
        for blk, rows, coeff in zip(prog.blocks, prog.a_rows, prog.a_coeff)
    ]

    # -- scaling of the data ------------------------------------------------
    norm_b = max(1.0, float(np.max(np.abs(prog.b))) if m_rows else 1.0)
    norm_c = max(1.0, max(float(np.max(np.abs(cb))) if cb.size else 0.0 for cb in prog.c))
    c_s = [cb / norm_c for cb in prog.c]
    b_s = prog.b / norm_b

    free_info = _free_block(prog)
    free_j, af = (free_info if free_info is not None else (None, None))

    x = []
    z = []
    for blk in blocks:
        if blk.kind == PSD:
            x.append(np.eye(blk.dim))
            z.append(np.eye(blk.dim))
        elif blk.kind == NONNEG:
            x.append(np.ones(blk.dim))
            z.append(np.ones(blk.dim))
        else:
            x.append(np.zeros(blk.dim))
            z.append(np.zeros(blk.dim))
    y = np.zeros(m_rows)

    history: List[dict] = []
    best = None
    stall = 0

    def residuals(x, y, z):
        rp = b_s - _apply_a(ops, prog, x)
        aty = _apply_at(ops, prog, y)
        rd = []
        for j, blk in enumerate(blocks):
            rd.append(c_s[j] - aty[j] - (z[j] if blk.kind != FREE else 0.0))
        pobj = _inner(c_s, x)
        dobj = float(b_s @ y)
        res_p = float(np.linalg.norm(rp)) / (1.0 + float(np.linalg.norm(b_s)))
        res_d = float(np.sqrt(sum(np.sum(r * r) for r in rd))) / (
            1.0 + float(np.sqrt(sum(np.sum(cb * cb) for cb in c_s)))
        )
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return rp, rd, pobj, dobj, res_p, res_d, gap

    def record_best(metric, x, y, z):
        nonlocal best
        if best is None or metric < best[0]:
            best = (metric, [xb.copy() for xb in x], y.copy(), [zb.copy() for zb in z])

    def check_infeasible(yv):
        """Dual improving ray: b^T y > 0 while -A^T y lies in the dual cone."""
        ny = float(np.linalg.norm(yv))
        if ny < 1e-12:
            return None
        yn = yv / ny
        improvement = float(b_s @ yn)
        if improvement < infeas_tol:
            return None
        aty = _apply_at(ops, prog, yn)
        viol = 0.0
        scale = 1.0
        for j, blk in enumerate(blocks):
            zj = -aty[j]
            if blk.kind == PSD:
                scale = max(scale, float(np.linalg.norm(zj)))
                viol = max(viol, max(0.0, -float(np.linalg.eigvalsh(_sym(zj))[0])))
            elif blk.kind == NONNEG:
                scale = max(scale, float(np.max(np.abs(zj))) if zj.size else 0.0)
                viol = max(viol, max(0.0, -float(np.min(zj))) if zj.size else 0.0)
            else:
                viol = max(viol, float(np.max(np.abs(zj))) if zj.size else 0.0)
        if viol <= 1e-9 * scale:
            return {"kind": "dual_ray", "y": yn, "improvement": improvement, "cone_violation": viol}
        return None

    def check_unbounded(xv):
        nx = float(np.sqrt(sum(np.sum(b * b) for b in xv)))
        if nx < 1e-12:
            return None
        xr = [b / nx for b in xv]
        if _inner(c_s, xr) > -infeas_tol:
            return None
        if float(np.linalg.norm(_apply_a(ops, prog, xr))) <= 1e-9:
            return {"kind": "primal_ray", "x": xr, "objective_rate": _inner(c_s, xr)}
        return None

    status = "MaxIter"
    certificate = None
    it = 0
    no_progress = 0
    for it in range(1, max_iter + 1):
        rp, rd, pobj, dobj, res_p, res_d, gap = residuals(x, y, z)
        mu = _inner(
            [xb for xb, blk in zip(x, blocks) if blk.kind != FREE],
            [zb for zb, blk in zip(z, blocks) if blk.kind != FREE],
        ) / nu
        # at large objective magnitudes gap_rel bottoms out on cancellation noise;
        # mu is then the sharper complementarity measure
        mu_rel = abs(mu) * nu / (1.0 + abs(pobj) + abs(dobj))
        metric = max(res_p, res_d, min(gap, mu_rel))
        if best is not None and metric > 0.9 * best[0]:
            no_progress += 1
        else:
            no_progress = 0
        record_best(metric, x, y, z)
        history.append(
            {
                "iter": it - 1,
                "pobj": pobj * norm_b * norm_c,
                "dobj": dobj * norm_b * norm_c,
                "res_primal": res_p,
                "res_dual": res_d,
                "gap_rel": gap,
                "mu": mu,
            }
        )
        if metric <= target_tol:
            status = "Optimal"
            break
        if best[0] <= tol and (no_progress >= 3 or stall >= 2):
            status = "Optimal"
            break

        # divergence-based certificates
        if res_p > 1e3 * tol and it > 5:
            cert = check_infeasible(y)
            if cert is not None:
                status, certificate = "Infeasible", cert
                break
        if it > 5:
            cert = check_unbounded(x)
            if cert is not None:
                status, certificate = "Unbounded", cert
                break

        try:
            nt = _NTScaling(blocks, x, z)
            solver = _SchurSolver(_schur(ops, prog, nt), af)
        except np.linalg.LinAlgError:
            break

        def newton(rc_blocks):
            rhs = rp.copy()
            for j, blk in enumerate(blocks):
                op = ops[j]
                if op is None or blk.kind == FREE:
                    continue
                hv = nt.apply(j, rd[j], blocks)
                rhs[op.rows] -= op.apply(rc_blocks[j] - hv)
            rhs_free = rd[free_j] if free_j is not None else None
            dy, dxf = solver.solve(rhs, rhs_free)
            aty = _apply_at(ops, prog, dy)
            dx, dz = [], []
            for j, blk in enumerate(blocks):
                if blk.kind == FREE:
                    dz.append(np.zeros(blk.dim))
                    dx.append(dxf if dxf is not None else np.zeros(blk.dim))
                    continue
                dzj = rd[j] - aty[j]
                if blk.kind == PSD:
                    dzj = _sym(dzj)
                dxj = rc_blocks[j] - nt.apply(j, dzj, blocks)
                if blk.kind == PSD:
                    dxj = _sym(dxj)
                dz.append(dzj)
                dx.append(dxj)
            return dx, dy, dz

        def max_steps(dx, dz):
            ap = ad = np.inf
            for j, blk in enumerate(blocks):
                if blk.kind == PSD:
                    ap = min(ap, _max_step_psd(x[j], dx[j]))
                    ad = min(ad, _max_step_psd(z[j], dz[j]))
                elif blk.kind == NONNEG:
                    ap = min(ap, _max_step_nonneg(x[j], dx[j]))
                    ad = min(ad, _max_step_nonneg(z[j], dz[j]))
            return ap, ad

        # predictor (affine) step
        rc_aff = [(-x[j] if blocks[j].kind != FREE else None) for j in range(len(blocks))]
        dx_a, dy_a, dz_a = newton(rc_aff)
        ap_a, ad_a = max_steps(dx_a, dz_a)
        ap_a, ad_a = min(1.0, step_frac * ap_a), min(1.0, step_frac * ad_a)
        gap_now = mu * nu
        gap_aff = 0.0
        for j, blk in enumerate(blocks):
            if blk.kind == FREE:
                continue
            gap_aff += float(np.sum((x[j] + ap_a * dx_a[j]) * (z[j] + ad_a * dz_a[j])))
        sigma = min(0.99, max(1e-10, (max(gap_aff, 0.0) / gap_now) ** 3))

        # corrector: scaled-space Mehrotra second-order term
        rc = []
        for j, blk in enumerate(blocks):
            if blk.kind == FREE:
                rc.append(None)
            elif blk.kind == PSD:
                g, ginv, lam = nt.g[j], nt.ginv[j], nt.lam[j]
                d_x = ginv @ dx_a[j] @ ginv.T
                d_z = g.T @ dz_a[j] @ g
                nmat = -np.diag(lam**2) - _sym(d_x @ d_z)
                nmat[np.diag_indices_from(nmat)] += sigma * mu
                rc_s = 2.0 * nmat / np.add.outer(lam, lam)
                rc.append(_sym(g @ rc_s @ g.T))
            else:
                rc.append((sigma * mu - x[j] * z[j] - dx_a[j] * dz_a[j]) / z[j])
        dx, dy, dz = newton(rc)
        if any(not np.all(np.isfinite(d)) for d in dx) or not np.all(np.isfinite(dy)):
            break
        ap, ad = max_steps(dx, dz)
        ap, ad = min(1.0, step_frac * ap), min(1.0, step_frac * ad)
        if min(ap, ad) < 1e-8:
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0

        for j, blk in enumerate(blocks):
            x[j] = x[j] + ap * dx[j]
            if blk.kind == FREE:
                continue
            z[j] = z[j] + ad * dz[j]
            if blk.kind == PSD:
                x[j] = _sym(x[j])
                z[j] = _sym(z[j])
                if blk.embed_dim is not None:
                    x[j] = _embed_project(x[j], blk.embed_dim)
                    z[j] = _embed_project(z[j], blk.embed_dim)
        y = y + ad * dy

    if status in ("MaxIter", "Optimal") and best is not None:
        # report the best iterate seen (current one, unless we stalled past it)
        _, bx, by, bz = best
        rp, rd, pobj, dobj, res_p, res_d, gap = residuals(bx, by, bz)
        metric = max(res_p, res_d, gap)
        if status != "Optimal" and metric <= tol:
            status = "Optimal"
        x, y, z = bx, by, bz
    else:
        rp, rd, pobj, dobj, res_p, res_d, gap = residuals(x, y, z)

    # undo data scaling (row equilibration folds into the multipliers)
    x_out = [xb * norm_b for xb in x]
    if free_col_scale is not None:
        jf, col_scale = free_col_scale
        x_out[jf] = x_out[jf] / col_scale
    y_out = y * norm_c / row_scale
    z_out = [zb * norm_c for zb in z]
    if certificate is not None and "y" in certificate:
        certificate = dict(certificate)
        certificate["y"] = certificate["y"] / row_scale
    return IpmResult(
        status=status,
        x=x_out,
        y=y_out,
        z=z_out,
        pobj=pobj * norm_b * norm_c,
        dobj=dobj * norm_b * norm_c,
        res_primal=res_p,
        res_dual=res_d,
        gap_rel=gap,
        iterations=it,
        history=history,
        certificate=certificate,
    )
