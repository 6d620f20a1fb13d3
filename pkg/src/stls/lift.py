"""Lifting of the kernel-representation QCQP.

The unknowns (z, v) with ||z|| = 1 and z' S_theta(v) = 0 are lifted to
x = (1 || v) (x) z in R^N, N = (k+1) m, with z varying fastest: coordinate
(i, j) of x sits at index i*m + j and equals v~_i z_j. Rank-one feasibility
of x x' is encoded by the vanishing of all 2x2 minors of the (k+1) x m
reshape of x, and the structure constraints become quadratic forms in the
block-symmetrized outer products of the s-vectors with coordinate vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stls.structure import ProblemInstance, evaluate


@dataclass(frozen=True)
class LiftedProblem:
    m: int
    n: int
    k: int
    s_vectors: np.ndarray  # N x n, column i is s_i (A_theta and directions stacked)
    minor_set: np.ndarray  # (|L|, 4) linear indices (a, b, c, d): x_a x_b = x_c x_d
    theta: np.ndarray

    @property
    def N(self) -> int:
        return (self.k + 1) * self.m


def build_lifted(instance: ProblemInstance) -> LiftedProblem:
    """Stack the s-vectors and enumerate the minor index set."""
    s = instance.structure
    a_theta = evaluate(s, instance.theta)
    stacked = np.vstack([a_theta] + list(s.directions))
    stacked.flags.writeable = False

    quads = []
    for i1 in range(s.k + 1):
        for i2 in range(i1 + 1, s.k + 1):
            for j1 in range(s.m):
                for j2 in range(j1 + 1, s.m):
                    quads.append(
                        (i1 * s.m + j1, i2 * s.m + j2, i1 * s.m + j2, i2 * s.m + j1)
                    )
    minor_set = np.array(quads, dtype=np.int64).reshape(len(quads), 4)
    minor_set.flags.writeable = False
    return LiftedProblem(
        m=s.m, n=s.n, k=s.k, s_vectors=stacked, minor_set=minor_set, theta=instance.theta
    )


def block_sym(mat: np.ndarray, m: int) -> np.ndarray:
    """Orthogonal projection onto symmetric matrices with symmetric m x m blocks."""
    mat = np.asarray(mat, dtype=float)
    n_mat = mat.shape[0]
    if mat.ndim != 2 or mat.shape[1] != n_mat:
        raise ValueError(f"need a square matrix, got {mat.shape}")
    if n_mat % m != 0:
        raise ValueError(f"block size {m} does not divide {n_mat}")
    kk = n_mat // m
    sym = 0.5 * (mat + mat.T)
    blocks = sym.reshape(kk, m, kk, m)
    blocks = 0.5 * (blocks + blocks.transpose(0, 3, 2, 1))
    return blocks.reshape(n_mat, n_mat)


def constraint_matrix(lifted: LiftedProblem, i: int, j: int) -> np.ndarray:
    """The N x N matrix of the (i, j) lifted constraint, block_sym(s_i e_j')."""
    if not 0 <= i < lifted.n:
        raise IndexError(f"column index {i} out of range [0, {lifted.n})")
    if not 0 <= j < lifted.N:
        raise IndexError(f"coordinate index {j} out of range [0, {lifted.N})")
    outer = np.zeros((lifted.N, lifted.N))
    outer[:, j] = lifted.s_vectors[:, i]
    return block_sym(outer, lifted.m)


def qcqp_residuals(
    lifted: LiftedProblem, x: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact residuals of every lifted constraint at the point x.

    Returns (h0, h_lift, h_minor): the sphere constraint z'z - 1, the n x N
    values x' block_sym(s_i e_j') x, and the |L| minor gaps x_a x_b - x_c x_d.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != lifted.N:
        raise ValueError(f"x has length {x.shape[0]}, expected {lifted.N}")
    z = x[: lifted.m]
    h0 = float(z @ z) - 1.0
    # self-adjointness: Sym(s e_j') . xx' = (s e_j') . block_sym(xx')
    proj = block_sym(np.outer(x, x), lifted.m)
    h_lift = lifted.s_vectors.T @ proj
    q = lifted.minor_set
    h_minor = x[q[:, 0]] * x[q[:, 1]] - x[q[:, 2]] * x[q[:, 3]]
    return h0, h_lift, h_minor
