"""Local-optimization baseline: variable projection plus Levenberg-Marquardt.

Works on the kernel representation directly: for a fixed unit vector z the
constraint z' S_theta(v) = 0 is linear in v, so the inner minimum of
v' W v is a weighted least-norm problem solved through its KKT system. The
outer problem over z is optimized by a Levenberg-Marquardt iteration in a
tangent basis of the unit sphere, with the Jacobian of the projected
residual obtained by implicit differentiation of the KKT system.

This mirrors the local methods the relaxation is compared against; it
converges to local minimizers and carries no optimality certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .structure import ProblemInstance, evaluate, spline_complete


@dataclass(frozen=True)
class LocalConfig:
    max_iter: int = 500
    grad_tol: float = 1e-10
    damping_init: float = 1e-3
    init_kind: str = "smallest-singular-vector"
    z0: np.ndarray | None = None

    def __post_init__(self):
        if self.grad_tol <= 0 or self.damping_init <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.init_kind not in ("smallest-singular-vector", "user-supplied"):
            raise ValueError(f"unknown init_kind {self.init_kind!r}")
        if self.init_kind == "user-supplied" and self.z0 is None:
            raise ValueError("user-supplied init needs z0")


def init_smallest_singular(instance: ProblemInstance) -> np.ndarray:
    """Left singular vector of S(theta) for the smallest singular value.

    Missing coordinates (diagonal-01 weight) are spline-completed first so
    the starting point ignores whatever placeholder values they carry.
    """
    theta = instance.theta
    observed = instance.weight.observed_mask()
    if not np.all(observed):
        theta = spline_complete(theta, observed)
    u_svd, _, _ = np.linalg.svd(evaluate(instance.structure, theta))
    z0 = u_svd[:, -1]
    pivot = np.argmax(np.abs(z0))
    return z0 if z0[pivot] >= 0 else -z0


class _Projected:
    """Inner solve of the eliminated v-problem and its derivative for fixed z.

    With n <= k (all the application structures) the constraint system is
    underdetermined and the weighted least-norm solution comes from its KKT
    system, which also supports the 0/1 seminorm. With n > k the system is
    overdetermined; the minimum-norm least-squares solution is used instead
    and requires a nonsingular weight.
    """

    def __init__(self, instance: ProblemInstance):
        self.structure = instance.structure
        self.theta = instance.theta
        self.dirs = instance.structure.direction_tensor()
        self.a_theta = evaluate(instance.structure, instance.theta)
        k = instance.structure.k
        n = instance.structure.n
        self.overdetermined = n > k
        weight = instance.weight
        if weight.kind == "identity":
            self.w_mat = np.eye(k)
            self.factor = None
            self.inv_factor = None
        elif weight.kind == "diagonal-01":
            if self.overdetermined:
                raise ValueError("0/1 seminorm needs an underdetermined structure (n <= k)")
            self.w_mat = np.diag(weight.matrix)
            self.factor = weight.matrix  # 0/1 vector; its own square root
            self.inv_factor = None
        else:
            self.w_mat = weight.full_matrix()
            try:
                chol = sla.cholesky(self.w_mat, lower=True)
            except np.linalg.LinAlgError as exc:
                raise ValueError(
                    "dense weight must be positive definite for the local baseline"
                ) from exc
            self.factor = chol.T
            self.inv_factor = sla.solve_triangular(chol, np.eye(k), lower=True).T

    def residual_of(self, v: np.ndarray) -> np.ndarray:
        if self.factor is None:
            return v
        if self.factor.ndim == 1:
            return self.factor * v
        return self.factor @ v

    def _constraint_data(self, z: np.ndarray):
        m_con = np.tensordot(z, self.dirs, axes=(0, 1)).T  # (n, k)
        c = self.a_theta.T @ z
        return m_con, c

    def solve(self, z: np.ndarray):
        """Returns (v, objective, residual, state) or None if singular."""
        if self.overdetermined:
            return self._solve_lsq(z)
        return self._solve_kkt(z)

    def _solve_kkt(self, z: np.ndarray):
        k = self.structure.k
        n = self.structure.n
        m_con, c = self._constraint_data(z)
        kkt = np.zeros((k + n, k + n))
        kkt[:k, :k] = self.w_mat
        kkt[:k, k:] = m_con.T
        kkt[k:, :k] = m_con
        rhs = np.concatenate([np.zeros(k), -c])
        try:
            lu = sla.lu_factor(kkt)
            sol = sla.lu_solve(lu, rhs)
        except (np.linalg.LinAlgError, ValueError):
            return None
        if not np.all(np.isfinite(sol)):
            return None
        v = sol[:k]
        mult = sol[k:]
        r = self.residual_of(v)
        return v, float(r @ r), r, ("kkt", mult, lu)

    def _solve_lsq(self, z: np.ndarray):
        m_con, c = self._constraint_data(z)
        g = m_con if self.inv_factor is None else m_con @ self.inv_factor
        try:
            gram = sla.cho_factor(g.T @ g)
            w = sla.cho_solve(gram, -(g.T @ c))
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(w)):
            return None
        rho = g @ w + c
        # overdetermined system: z is feasible only if the equations are
        # consistent; elsewhere the projected objective is +inf
        if np.linalg.norm(rho) > 1e-9 * (1.0 + np.linalg.norm(c)):
            return None
        v = w if self.inv_factor is None else self.inv_factor @ w
        return v, float(w @ w), w, ("lsq", g, c, w, rho, gram)

    def jacobian(self, v, state):
        if state[0] == "kkt":
            return self._jacobian_kkt(v, state[1], state[2])
        return self._jacobian_lsq(state)

    def _jacobian_kkt(self, v, mult, lu):
        """d(residual)/dz by implicit differentiation of the KKT system."""
        k = self.structure.k
        top = -(self.dirs @ mult)  # (k, m): column p is -M_p' mult
        bottom = -evaluate(self.structure, self.theta + v).T  # (n, m)
        rhs = np.vstack([top, bottom])
        sol = sla.lu_solve(lu, rhs)
        dv = sol[:k, :]
        if self.factor is None:
            return dv
        if self.factor.ndim == 1:
            return self.factor[:, None] * dv
        return self.factor @ dv

    def _jacobian_lsq(self, state):
        """Derivative of the full-column-rank least-squares solution."""
        _, g, c, w, rho, gram = state
        dg = self.dirs.transpose(1, 2, 0)  # (m, n, k): slice p is dM_p
        if self.inv_factor is not None:
            dg = dg @ self.inv_factor
        term1 = np.einsum("pnk,n->pk", dg, rho)
        inner = np.einsum("pnk,k->pn", dg, w) + self.a_theta  # dG_p w + dc_p
        term2 = inner @ g
        return -sla.cho_solve(gram, (term1 + term2).T)


def _tangent_basis(z: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(z.reshape(-1, 1), mode="complete")
    return q[:, 1:]


def local_solve(
    instance: ProblemInstance,
    config: LocalConfig | None = None,
    trace: list | None = None,
) -> tuple[np.ndarray, float, bool]:
    """Local minimizer of the structured distance via projected LM.

    Returns (u, objective, converged). When trace is a list, the accepted
    objective value is appended once per outer iteration.
    """
    if config is None:
        config = LocalConfig()
    if config.init_kind == "user-supplied":
        z = np.asarray(config.z0, dtype=float).reshape(-1)
        if z.shape[0] != instance.structure.m:
            raise ValueError("z0 has wrong length")
        z = z / np.linalg.norm(z)
    else:
        z = init_smallest_singular(instance)

    proj = _Projected(instance)
    state = proj.solve(z)
    if state is None:
        # singular start: nudge deterministically
        z = np.roll(z, 1)
        state = proj.solve(z)
        if state is None:
            return instance.theta.copy(), np.inf, False
    v, obj, r, inner_state = state
    if trace is not None:
        trace.append(obj)

    damping = config.damping_init
    converged = False
    m = instance.structure.m
    for _ in range(config.max_iter):
        jac = proj.jacobian(v, inner_state)
        q_tan = _tangent_basis(z)
        j_t = jac @ q_tan
        grad = 2.0 * (j_t.T @ r)
        if np.linalg.norm(grad) <= config.grad_tol * (1.0 + obj):
            converged = True
            break
        h = j_t.T @ j_t
        accepted = False
        for _ in range(40):
            try:
                delta = sla.solve(
                    h + damping * np.eye(m - 1), -(j_t.T @ r), assume_a="pos"
                )
            except np.linalg.LinAlgError:
                damping *= 4.0
                continue
            z_try = z + q_tan @ delta
            z_try /= np.linalg.norm(z_try)
            state = proj.solve(z_try)
            if state is None or not np.isfinite(state[1]):
                damping *= 4.0
                continue
            if state[1] < obj:
                z = z_try
                v, obj, r, inner_state = state
                damping = max(damping / 3.0, 1e-12)
                accepted = True
                break
            damping *= 4.0
            if damping > 1e14:
                break
        if trace is not None:
            trace.append(obj)
        if not accepted:
            # no decreasing step at any damping: numerically stationary
            converged = np.linalg.norm(grad) <= 1e-6 * (1.0 + obj)
            break

    return instance.theta + v, obj, converged
