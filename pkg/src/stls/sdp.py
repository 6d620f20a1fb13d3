"""Semidefinite relaxation of the lifted rank-deficiency problem.

Assembles the primal SDP over the lifted matrix variable X (trace
normalization on the leading block, the lifted linear constraints, and the
block-symmetry constraints), solves it with an internal dense interior-point
engine behind a pluggable interface, and provides the dual certificate
checks plus the naive one-hop relaxation used as a regression oracle.

Constraint matrices are kept sparse as rows of an (M, N^2) matrix over
vec indices; materializing them densely one at a time is supported for
inspection but never required by the solve path.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
import scipy.sparse as sp

from . import ipm
from .lift import LiftedProblem, block_sym, build_lifted
from .structure import ProblemInstance, WeightSpec


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    solver_kind: str = "internal"
    external_solver: Callable[["SdpProblem"], tuple[np.ndarray, np.ndarray]] | None = None

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.solver_kind not in ("internal", "external-plugin"):
            raise ValueError(f"unknown solver_kind {self.solver_kind!r}")
        if self.solver_kind == "external-plugin" and self.external_solver is None:
            raise ValueError("external-plugin requires an external_solver callback")


@dataclass
class SdpProblem:
    """Standard-form SDP data for one lifted instance.

    Equality constraints are stored as rows of ``a_rows`` (vec of each
    symmetric matrix, both triangles), ordered: the trace constraint,
    then the n*N lifted constraints (structured-matrix column outer,
    position inner), then the block-symmetry constraints in minor-set
    order. ``eq_constraints()`` yields them densely one at a time.
    """

    dim: int
    objective: np.ndarray
    a_rows: sp.csr_matrix
    rhs: np.ndarray
    block_size: int
    num_cols: int

    def __post_init__(self):
        n_big = self.dim
        if self.objective.shape != (n_big, n_big):
            raise ValueError("objective shape mismatch")
        if self.a_rows.shape[1] != n_big * n_big:
            raise ValueError("constraint row length mismatch")
        if n_big % self.block_size != 0:
            raise ValueError("dim must be a multiple of block_size")
        kk = n_big // self.block_size
        m = self.block_size
        expected = 1 + self.num_cols * n_big + (kk * (kk - 1) // 2) * (m * (m - 1) // 2)
        if self.a_rows.shape[0] != expected or self.rhs.shape[0] != expected:
            raise ValueError("constraint count does not match lifted layout")

    @property
    def num_constraints(self) -> int:
        return self.a_rows.shape[0]

    @property
    def num_lifted(self) -> int:
        return self.num_cols * self.dim

    @property
    def num_minors(self) -> int:
        return self.num_constraints - 1 - self.num_lifted

    def constraint(self, idx: int) -> tuple[np.ndarray, float]:
        if not 0 <= idx < self.num_constraints:
            raise IndexError(idx)
        mat = self.a_rows[idx].toarray().reshape(self.dim, self.dim)
        return mat, float(self.rhs[idx])

    def eq_constraints(self) -> Iterator[tuple[np.ndarray, float]]:
        for idx in range(self.num_constraints):
            yield self.constraint(idx)


@dataclass
class SdpSolution:
    X: np.ndarray
    gamma: float
    mu: np.ndarray
    Sigma: np.ndarray
    primal_value: float
    dual_value: float
    status: str
    iterations: int
    y: np.ndarray
    rel_gap: float
    rel_primal_infeas: float
    rel_dual_infeas: float


def _trace_row(n_big: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    pos = np.arange(m)
    return pos * n_big + pos, np.ones(m)


def assemble_primal(lifted: LiftedProblem, weight: WeightSpec | None = None) -> SdpProblem:
    """Build the primal SDP for one lifted instance.

    Objective: zero on the leading z block, W kron I_m on the rest.
    Constraint order: trace, lifted (column outer, position inner), minors.
    """
    m, n, k = lifted.m, lifted.n, lifted.k
    n_big = lifted.N
    if weight is None:
        weight = WeightSpec.identity(k)
    if weight.dim != k:
        raise ValueError(f"weight dimension {weight.dim} does not match k={k}")

    c_mat = np.zeros((n_big, n_big))
    c_mat[m:, m:] = np.kron(weight.full_matrix(), np.eye(m))

    rows: list[np.ndarray] = []
    flats: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    tr_flat, tr_val = _trace_row(n_big, m)
    rows.append(np.zeros(m, dtype=np.int64))
    flats.append(tr_flat)
    vals.append(tr_val)

    # lifted rows: block_sym(s e_j^T) has four entry families per nonzero of s
    j_arr = np.arange(n_big)[:, None]
    bj = j_arr // m
    jo = j_arr % m
    for i in range(n):
        s = lifted.s_vectors[:, i]
        nz = np.nonzero(s)[0][None, :]
        a_r = nz // m
        p_r = nz % m
        f1 = nz * n_big + j_arr
        f2 = j_arr * n_big + nz
        f3 = (a_r * m + jo) * n_big + (bj * m + p_r)
        f4 = (bj * m + p_r) * n_big + (a_r * m + jo)
        val = np.broadcast_to(s[nz] / 4.0, f1.shape)
        row = np.broadcast_to(1 + i * n_big + j_arr, f1.shape)
        for f in (f1, f2, f3, f4):
            rows.append(row.ravel())
            flats.append(f.ravel())
            vals.append(val.ravel())

    minors = lifted.minor_set
    if minors.shape[0]:
        base = 1 + n * n_big + np.arange(minors.shape[0], dtype=np.int64)
        a, b, c, d = minors[:, 0], minors[:, 1], minors[:, 2], minors[:, 3]
        rows.append(np.repeat(base, 4))
        flats.append(
            np.stack([a * n_big + b, b * n_big + a, c * n_big + d, d * n_big + c], axis=1).ravel()
        )
        vals.append(np.tile([0.5, 0.5, -0.5, -0.5], minors.shape[0]))

    m_total = 1 + n * n_big + minors.shape[0]
    a_rows = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(flats))),
        shape=(m_total, n_big * n_big),
    ).tocsr()
    rhs = np.zeros(m_total)
    rhs[0] = 1.0
    return SdpProblem(
        dim=n_big,
        objective=c_mat,
        a_rows=a_rows,
        rhs=rhs,
        block_size=m,
        num_cols=n,
    )


def _unpack_dual(problem: SdpProblem, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    n_big = problem.dim
    n_lift = problem.num_lifted
    gamma = float(y[0])
    mu = y[1 : 1 + n_lift].reshape(problem.num_cols, n_big)
    sigma = (problem.a_rows[1 + n_lift :].T @ y[1 + n_lift :]).reshape(n_big, n_big)
    return gamma, mu, sigma


def _external_result(problem: SdpProblem, config: SolverConfig) -> ipm.IpmResult:
    x_mat, y = config.external_solver(problem)
    x_mat = np.asarray(x_mat, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x_mat.shape != (problem.dim, problem.dim) or y.shape[0] != problem.num_constraints:
        raise ValueError("external solver returned wrong shapes")
    s_mat = problem.objective - (problem.a_rows.T @ y).reshape(problem.dim, problem.dim)
    pv = float(np.tensordot(problem.objective, x_mat))
    dv = float(problem.rhs @ y)
    relp = np.linalg.norm(problem.rhs - problem.a_rows @ x_mat.reshape(-1)) / (
        1.0 + np.linalg.norm(problem.rhs)
    )
    relg = abs(pv - dv) / (1.0 + abs(pv) + abs(dv))
    ok = relp <= config.feas_tol and relg <= config.gap_tol
    return ipm.IpmResult(
        X=x_mat,
        y=y,
        S=s_mat,
        primal_value=pv,
        dual_value=dv,
        status="optimal" if ok else "max_iter",
        iterations=0,
        rel_primal_infeas=relp,
        rel_dual_infeas=0.0,
        rel_gap=relg,
    )


def solve(problem: SdpProblem, config: SolverConfig | None = None) -> SdpSolution:
    if config is None:
        config = SolverConfig()
    if config.solver_kind == "internal":
        res = ipm.solve_sdp(
            problem.objective,
            problem.a_rows,
            problem.rhs,
            feas_tol=config.feas_tol,
            gap_tol=config.gap_tol,
            max_iter=config.max_iter,
        )
    else:
        res = _external_result(problem, config)
    gamma, mu, sigma = _unpack_dual(problem, res.y)
    return SdpSolution(
        X=res.X,
        gamma=gamma,
        mu=mu,
        Sigma=sigma,
        primal_value=res.primal_value,
        dual_value=res.dual_value,
        status=res.status,
        iterations=res.iterations,
        y=res.y,
        rel_gap=res.rel_gap,
        rel_primal_infeas=res.rel_primal_infeas,
        rel_dual_infeas=res.rel_dual_infeas,
    )


@dataclass(frozen=True)
class CertificateCheck:
    valid: bool
    reason: str | None
    bound: float


def verify_certificate(
    lifted: LiftedProblem,
    weight: WeightSpec | None,
    gamma: float,
    mu: np.ndarray,
    sigma: np.ndarray,
    tol: float = 1e-6,
) -> CertificateCheck:
    """Check a dual triple and return the certified lower bound.

    Valid means Sigma is block skew-symmetric and the reassembled dual
    slack matrix is positive semidefinite, both to tol (relative).
    """
    problem = assemble_primal(lifted, weight)
    n_big, m = problem.dim, problem.block_size
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mu.shape != (lifted.n, n_big) or sigma.shape != (n_big, n_big):
        return CertificateCheck(False, "dimension mismatch", float(gamma))

    bs = block_sym(sigma, m)
    if np.max(np.abs(bs)) > tol * (1.0 + np.max(np.abs(sigma))):
        return CertificateCheck(False, "Sigma is not block skew-symmetric", float(gamma))

    y = np.zeros(problem.num_constraints)
    y[0] = gamma
    y[1 : 1 + problem.num_lifted] = mu.reshape(-1)
    slack = (
        problem.objective
        - (problem.a_rows[: 1 + problem.num_lifted].T @ y[: 1 + problem.num_lifted]).reshape(
            n_big, n_big
        )
        - sigma
    )
    lam = np.linalg.eigvalsh(0.5 * (slack + slack.T))
    if lam[0] < -tol * (1.0 + abs(lam[-1])):
        return CertificateCheck(False, "dual slack matrix is not PSD", float(gamma))
    return CertificateCheck(True, None, float(gamma))


def _naive_problem(instance: ProblemInstance) -> tuple[np.ndarray, sp.csr_matrix, np.ndarray]:
    """Shor relaxation of the kernel representation on (t, z, v)."""
    structure = instance.structure
    m, n, k = structure.m, structure.n, structure.k
    dim = 1 + m + k
    base = structure.base + np.tensordot(instance.theta, structure.direction_tensor(), axes=1)
    dirs = structure.direction_tensor()

    c_mat = np.zeros((dim, dim))
    c_mat[1 + m :, 1 + m :] = instance.weight.full_matrix()

    rows, cols_r, cols_c, vals = [], [], [], []

    def add(row, r, c, v):
        rows.append(row)
        cols_r.append(r)
        cols_c.append(c)
        vals.append(v)

    add(0, 0, 0, 1.0)
    for p in range(m):
        add(1, 1 + p, 1 + p, 1.0)
    for i in range(n):
        row = 2 + i
        for p in range(m):
            if base[p, i] != 0.0:
                add(row, 0, 1 + p, base[p, i] / 2.0)
                add(row, 1 + p, 0, base[p, i] / 2.0)
            for j in range(k):
                v = dirs[j, p, i]
                if v != 0.0:
                    add(row, 1 + p, 1 + m + j, v / 2.0)
                    add(row, 1 + m + j, 1 + p, v / 2.0)

    flat = np.asarray(cols_r) * dim + np.asarray(cols_c)
    a_rows = sp.coo_matrix(
        (np.asarray(vals), (np.asarray(rows), flat)), shape=(2 + n, dim * dim)
    ).tocsr()
    b = np.zeros(2 + n)
    b[0] = 1.0
    b[1] = 1.0
    return c_mat, a_rows, b


def naive_relaxation_value(
    instance: ProblemInstance, config: SolverConfig | None = None
) -> float:
    """Optimal value of the one-hop relaxation (zero for any theta)."""
    if config is None:
        config = SolverConfig()
    c_mat, a_rows, b = _naive_problem(instance)
    res = ipm.solve_sdp(
        c_mat, a_rows, b, feas_tol=config.feas_tol, gap_tol=config.gap_tol,
        max_iter=config.max_iter,
    )
    return res.primal_value


def export_problem(problem: SdpProblem, fp: io.TextIOBase) -> None:
    """Write (C, A_i, b_i) as sparse text for external cross-checking.

    One line per nonzero: constraint-index, row, col, value. Index 0 is
    the objective, indices 1..M the constraints (upper triangle only);
    a line with row = col = -1 carries b_i. Deterministic ordering.
    """
    n_big = problem.dim
    for r, c in zip(*np.nonzero(np.triu(problem.objective))):
        fp.write(f"0 {r} {c} {problem.objective[r, c]:.17g}\n")
    coo = problem.a_rows.tocoo()
    order = np.lexsort((coo.col % n_big, coo.col // n_big, coo.row))
    for idx in order:
        r, c = divmod(int(coo.col[idx]), n_big)
        if r > c:
            continue
        fp.write(f"{coo.row[idx] + 1} {r} {c} {coo.data[idx]:.17g}\n")
    for i, b_i in enumerate(problem.rhs):
        if b_i != 0.0:
            fp.write(f"{i + 1} -1 -1 {b_i:.17g}\n")


def relaxation_for_instance(instance: ProblemInstance) -> SdpProblem:
    """Convenience: lift an instance and assemble its SDP."""
    lifted = build_lifted(instance)
    return assemble_primal(lifted, instance.weight)
