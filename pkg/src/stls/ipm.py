"""Dense primal-dual interior-point engine for standard-form SDPs.

Solves   min C . X   s.t.  A_i . X = b_i (i = 1..M),  X psd
and its dual  max b'y  s.t.  S = C - sum_i y_i A_i psd.

Nesterov-Todd scaling with a Mehrotra predictor-corrector, computed in the
scaled space where X and S share a diagonal scaling point. Constraint
matrices are stored sparse as rows of an (M, N^2) CSR matrix over vec
indices; the Schur complement is formed by chunked congruence products
(two full-size GEMMs per chunk) plus a closed-form gather path for rows
with very few nonzeros (the 2x2-minor constraints of the lifted problem).

Redundant constraint sets are expected: a one-time pivoted Cholesky of the
constraint Gram matrix selects a maximal independent subset, the Schur
system is solved on that subset every iteration, and dropped rows report
zero multipliers. The subset is invariant under the W-congruence, so the
presolve never has to be repeated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg.lapack import dpstrf

_SPARSE_ROW_NNZ = 4        # rows at most this sparse use the gather path
_SPARSE_PATH_MIN_ROWS = 256
_CHUNK_BYTES = 6.4e7


@dataclass
class IpmResult:
    X: np.ndarray
    y: np.ndarray
    S: np.ndarray
    primal_value: float
    dual_value: float
    status: str            # optimal | max_iter | infeasible | numerical_failure
    iterations: int
    rel_primal_infeas: float
    rel_dual_infeas: float
    rel_gap: float


def _sym(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


class _SchurBuilder:
    """Forms M_S[i, j] = A_i . (W A_j W) for a fixed row subset."""

    def __init__(self, a_rows: sp.csr_matrix, big_n: int):
        self.a_rows = a_rows
        self.big_n = big_n
        self.m_rows = a_rows.shape[0]
        row_nnz = np.diff(a_rows.indptr)
        sparse_mask = row_nnz <= _SPARSE_ROW_NNZ
        if sparse_mask.sum() >= _SPARSE_PATH_MIN_ROWS:
            self.sparse_idx = np.nonzero(sparse_mask)[0]
            self.dense_idx = np.nonzero(~sparse_mask)[0]
            coo = a_rows[self.sparse_idx].tocoo()
            width = _SPARSE_ROW_NNZ
            count = self.sparse_idx.shape[0]
            self.g_rows = np.zeros((count, width), dtype=np.int64)
            self.g_cols = np.zeros((count, width), dtype=np.int64)
            self.g_vals = np.zeros((count, width))
            slot = np.zeros(count, dtype=np.int64)
            for r, c, v in zip(coo.row, coo.col, coo.data):
                j = slot[r]
                self.g_rows[r, j] = c // big_n
                self.g_cols[r, j] = c % big_n
                self.g_vals[r, j] = v
                slot[r] = j + 1
        else:
            self.sparse_idx = np.zeros(0, dtype=np.int64)
            self.dense_idx = np.arange(self.m_rows)
        self.chunk = max(16, int(_CHUNK_BYTES / (8 * big_n * big_n)))

    def build(self, w_mat: np.ndarray, out: np.ndarray) -> None:
        n = self.big_n
        a = self.a_rows
        out[:] = 0.0
        # dense path: columns for every non-sparse row via W A_j W
        for lo in range(0, self.dense_idx.shape[0], self.chunk):
            idx = self.dense_idx[lo : lo + self.chunk]
            t = a[idx].toarray().reshape(idx.shape[0], n, n)
            c = idx.shape[0]
            right = (t.reshape(c * n, n) @ w_mat).reshape(c, n, n)
            left = (w_mat @ right.transpose(1, 0, 2).reshape(n, c * n)).reshape(n, c, n)
            k = left.transpose(1, 0, 2).reshape(c, n * n)
            out[:, idx] = a @ k.T
        # gather path: the sparse-sparse block
        si = self.sparse_idx
        if si.shape[0]:
            block = np.zeros((si.shape[0], si.shape[0]))
            for e1 in range(_SPARSE_ROW_NNZ):
                r1 = self.g_rows[:, e1]
                c1 = self.g_cols[:, e1]
                v1 = self.g_vals[:, e1]
                for e2 in range(_SPARSE_ROW_NNZ):
                    r2 = self.g_rows[:, e2]
                    c2 = self.g_cols[:, e2]
                    v2 = self.g_vals[:, e2]
                    # A . (W B W) = sum over entries a_rc b_r'c' W[r, r'] W[c', c]
                    block += (
                        np.outer(v1, v2)
                        * w_mat[np.ix_(r1, r2)]
                        * w_mat[np.ix_(c2, c1)].T
                    )
            out[np.ix_(si, si)] = block
            # mirror the rectangle filled by the dense path
            di = self.dense_idx
            out[np.ix_(di, si)] = out[np.ix_(si, di)].T


def _select_independent(builder: _SchurBuilder, m_rows: int) -> np.ndarray:
    """Maximal independent row subset via pivoted Cholesky of the Gram matrix."""
    gram = np.empty((m_rows, m_rows))
    builder.build(np.eye(builder.big_n), gram)
    scale = max(np.max(np.diag(gram)), 1e-300)
    _, piv, rank, _ = dpstrf(gram, tol=1e-11 * scale, lower=1, overwrite_a=1)
    return np.sort(piv[:rank] - 1)


def _chol_with_ridge(m_s: np.ndarray):
    """Cholesky factor with an escalating diagonal ridge on failure."""
    scale = max(float(np.mean(np.diag(m_s))), 1e-300)
    ridge = 0.0
    for _ in range(12):
        try:
            factor = sla.cho_factor(
                m_s if ridge == 0.0 else m_s + ridge * scale * np.eye(m_s.shape[0]),
                lower=True,
                check_finite=False,
            )
            return factor, ridge
        except np.linalg.LinAlgError:
            ridge = 1e-14 if ridge == 0.0 else ridge * 100.0
            if ridge > 1e-4:
                break
    return None, ridge


def _max_step(d: np.ndarray, delta_hat: np.ndarray) -> float:
    """sup alpha with diag(d) + alpha * delta_hat psd, in scaled coordinates."""
    scale = 1.0 / np.sqrt(d)
    lam = np.linalg.eigvalsh(delta_hat * np.outer(scale, scale))
    lam_min = lam[0]
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


def solve_sdp(
    c_mat: np.ndarray,
    a_rows: sp.csr_matrix,
    b: np.ndarray,
    feas_tol: float = 1e-8,
    gap_tol: float = 1e-8,
    max_iter: int = 200,
) -> IpmResult:
    """Solve the standard-form SDP given by (C, {A_i}, b).

    a_rows holds vec(A_i) (row-major, both triangles) as its rows.
    """
    n = c_mat.shape[0]
    m_rows = a_rows.shape[0]
    c_mat = _sym(np.asarray(c_mat, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)

    builder = _SchurBuilder(a_rows, n)
    keep = _select_independent(builder, m_rows)
    a_sel = a_rows[keep] if keep.shape[0] < m_rows else a_rows
    sel_builder = _SchurBuilder(a_sel, n) if keep.shape[0] < m_rows else builder
    b_sel = b[keep]

    x_mat = np.eye(n)
    s_mat = np.eye(n)
    y_sel = np.zeros(keep.shape[0])

    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(c_mat)
    m_s = np.empty((keep.shape[0], keep.shape[0]))

    best = None
    best_merit = np.inf
    status = "max_iter"
    it = 0
    relp_hist: list[float] = []

    def operator_a(mat: np.ndarray) -> np.ndarray:
        return a_sel @ mat.reshape(-1)

    def operator_at(w: np.ndarray) -> np.ndarray:
        return (a_sel.T @ w).reshape(n, n)

    def metrics():
        pv = float(np.tensordot(c_mat, x_mat))
        dv = float(b_sel @ y_sel)
        r_p = b - a_rows @ x_mat.reshape(-1)
        r_d = c_mat - operator_at(y_sel) - s_mat
        relp = np.linalg.norm(r_p) / norm_b
        reld = np.linalg.norm(r_d, "fro") / norm_c
        relg = abs(pv - dv) / (1.0 + abs(pv) + abs(dv))
        return pv, dv, r_p, r_d, relp, reld, relg

    for it in range(1, max_iter + 1):
        pv, dv, r_p, r_d, relp, reld, relg = metrics()
        mu = float(np.tensordot(x_mat, s_mat)) / n
        merit = max(relp, reld, relg)
        if merit < best_merit:
            best_merit = merit
            best = (x_mat.copy(), y_sel.copy(), s_mat.copy(), pv, dv, relp, reld, relg)
        if relp <= feas_tol and reld <= feas_tol and relg <= gap_tol:
            status = "optimal"
            break
        relp_hist.append(relp)
        # complementarity resolved on the independent subset but the full
        # residual is stuck: the dropped rows are inconsistent with the rest
        if (
            len(relp_hist) >= 16
            and relp > 1e3 * feas_tol
            and relp > 0.9 * relp_hist[-16]
            and mu < 1e-7
        ):
            status = "infeasible"
            break

        try:
            l_x = sla.cholesky(x_mat, lower=True, check_finite=False)
            l_s = sla.cholesky(s_mat, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            status = "numerical_failure"
            break
        u_svd, d, vt_svd = sla.svd(l_s.T @ l_x, check_finite=False)
        if d[-1] <= 0:
            status = "numerical_failure"
            break
        g = l_x @ (vt_svd.T / np.sqrt(d))
        w_mat = g @ g.T

        sel_builder.build(w_mat, m_s)
        factor, _ = _chol_with_ridge(m_s)
        if factor is None:
            status = "numerical_failure"
            break

        def schur_solve(rhs: np.ndarray) -> np.ndarray:
            sol = sla.cho_solve(factor, rhs, check_finite=False)
            sol += sla.cho_solve(factor, rhs - m_s @ sol, check_finite=False)
            return sol

        r_d_hat = g.T @ r_d @ g
        r_p_sel = b_sel - operator_a(x_mat)
        t_had = 2.0 / np.add.outer(d, d)

        def direction(r_c_hat: np.ndarray):
            rhs = r_p_sel + operator_a(g @ (r_d_hat - r_c_hat) @ g.T)
            dy = schur_solve(rhs)
            ds = _sym(r_d - operator_at(dy))
            ds_hat = g.T @ ds @ g
            dx_hat = r_c_hat - ds_hat
            dx = _sym(g @ dx_hat @ g.T)
            return dx, dy, ds, dx_hat, ds_hat

        # predictor (affine scaling): the Hadamard weights collapse -D^2 to -D
        r_c_aff = np.diag(-d)
        dx_a, _, ds_a, dxh_a, dsh_a = direction(r_c_aff)
        alpha_p_max = _max_step(d, dxh_a)
        alpha_d_max = _max_step(d, dsh_a)
        ap = min(1.0, 0.99 * alpha_p_max)
        ad = min(1.0, 0.99 * alpha_d_max)
        mu_aff = float(np.tensordot(x_mat + ap * dx_a, s_mat + ad * ds_a)) / n
        sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** 3, 1e-8))

        # corrector with the Monteiro-Zhang second-order term
        second = _sym(dxh_a @ dsh_a)
        r_c = t_had * (sigma * mu * np.eye(n) - np.diag(d * d) - second)
        dx, dy, ds, dxh, dsh = direction(r_c)
        alpha_p_max = _max_step(d, dxh)
        alpha_d_max = _max_step(d, dsh)
        ap = min(1.0, 0.99 * alpha_p_max)
        ad = min(1.0, 0.99 * alpha_d_max)
        if ap < 1e-10 and ad < 1e-10:
            status = "numerical_failure"
            break

        x_mat = _sym(x_mat + ap * dx)
        y_sel = y_sel + ad * dy
        s_mat = _sym(s_mat + ad * ds)

    if status in ("max_iter", "numerical_failure", "infeasible") and best is not None:
        x_mat, y_sel, s_mat, pv, dv, relp, reld, relg = best
    else:
        pv, dv, _, _, relp, reld, relg = metrics()

    y_full = np.zeros(m_rows)
    y_full[keep] = y_sel
    return IpmResult(
        X=x_mat,
        y=y_full,
        S=s_mat,
        primal_value=pv,
        dual_value=dv,
        status=status,
        iterations=it,
        rel_primal_infeas=relp,
        rel_dual_infeas=reld,
        rel_gap=relg,
    )
