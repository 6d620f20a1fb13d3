"""Affine matrix structures and the application instance builders.

A structure is the affine map S(u) = base + sum_j u_j * directions[j] from
R^k to m x n matrices with m <= n. The solvers in this package look for the
nearest u (in a weighted l2 sense) whose matrix S(u) is rank deficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class AffineStructure:
    """The map S: R^k -> R^{m x n}, stored as a base matrix plus k directions."""

    base: np.ndarray
    directions: tuple[np.ndarray, ...]

    def __init__(self, base: np.ndarray, directions: Sequence[np.ndarray]):
        base = _freeze(np.asarray(base))
        if base.ndim != 2:
            raise ValueError(f"base must be a matrix, got shape {base.shape}")
        m, n = base.shape
        if m > n:
            raise ValueError(f"need m <= n, got {m} x {n}")
        dirs = []
        for j, d in enumerate(directions):
            d = _freeze(np.asarray(d))
            if d.shape != (m, n):
                raise ValueError(
                    f"direction {j} has shape {d.shape}, expected {(m, n)}"
                )
            dirs.append(d)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "directions", tuple(dirs))

    @property
    def m(self) -> int:
        return self.base.shape[0]

    @property
    def n(self) -> int:
        return self.base.shape[1]

    @property
    def k(self) -> int:
        return len(self.directions)

    def direction_tensor(self) -> np.ndarray:
        """All directions stacked as a (k, m, n) array."""
        return np.stack(self.directions, axis=0) if self.directions else np.zeros((0, self.m, self.n))


@dataclass(frozen=True)
class WeightSpec:
    """Weight of the (semi)norm ||u - theta||_W^2.

    kind is one of "identity", "dense-psd" (symmetric PSD matrix), or
    "diagonal-01" (0/1 mask; zero marks a missing coordinate that the
    objective ignores).
    """

    kind: str
    dim: int
    matrix: np.ndarray | None = field(default=None)

    @staticmethod
    def identity(dim: int) -> "WeightSpec":
        return WeightSpec(kind="identity", dim=int(dim))

    @staticmethod
    def dense(matrix: np.ndarray) -> "WeightSpec":
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"weight matrix must be square, got {mat.shape}")
        if np.max(np.abs(mat - mat.T)) > 1e-10 * (1 + np.max(np.abs(mat))):
            raise ValueError("weight matrix must be symmetric")
        if np.linalg.eigvalsh(mat)[0] < -1e-10:
            raise ValueError("weight matrix must be positive semidefinite")
        return WeightSpec(kind="dense-psd", dim=mat.shape[0], matrix=_freeze(0.5 * (mat + mat.T)))

    @staticmethod
    def diagonal01(mask: np.ndarray) -> "WeightSpec":
        mask = np.asarray(mask, dtype=float).reshape(-1)
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ValueError("diagonal-01 weight entries must be 0 or 1")
        return WeightSpec(kind="diagonal-01", dim=mask.shape[0], matrix=_freeze(mask))

    def full_matrix(self) -> np.ndarray:
        """The weight as a dense k x k matrix."""
        if self.kind == "identity":
            return np.eye(self.dim)
        if self.kind == "diagonal-01":
            return np.diag(self.matrix)
        return np.array(self.matrix)

    def observed_mask(self) -> np.ndarray:
        """Boolean mask of coordinates the objective actually measures."""
        if self.kind == "diagonal-01":
            return self.matrix > 0.5
        return np.ones(self.dim, dtype=bool)


@dataclass(frozen=True)
class ProblemInstance:
    """A structure, the data point theta, and the objective weight."""

    structure: AffineStructure
    theta: np.ndarray
    weight: WeightSpec = None

    def __post_init__(self):
        theta = _freeze(np.asarray(self.theta).reshape(-1))
        if theta.shape[0] != self.structure.k:
            raise ValueError(
                f"theta has length {theta.shape[0]}, structure has k = {self.structure.k}"
            )
        weight = self.weight if self.weight is not None else WeightSpec.identity(self.structure.k)
        if weight.dim != self.structure.k:
            raise ValueError(
                f"weight has dimension {weight.dim}, structure has k = {self.structure.k}"
            )
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "weight", weight)


def spline_complete(theta: np.ndarray, observed: np.ndarray) -> np.ndarray:
    """Fill unobserved coordinates of a parameter series by cubic spline.

    Treats theta as samples on the index grid 0..k-1, interpolates through
    the observed entries, and replaces only the unobserved ones. Values at
    unobserved positions in the input are ignored, so the fill depends
    solely on the observed data.
    """
    from scipy.interpolate import CubicSpline

    theta = np.asarray(theta, dtype=float).reshape(-1)
    observed = np.asarray(observed, dtype=bool).reshape(-1)
    if observed.shape[0] != theta.shape[0]:
        raise ValueError("observed mask length must match theta")
    if np.all(observed):
        return theta.copy()
    idx = np.nonzero(observed)[0]
    if idx.shape[0] < 2:
        raise ValueError("need at least 2 observed coordinates to complete")
    missing = np.nonzero(~observed)[0]
    out = theta.copy()
    if idx.shape[0] < 4:
        out[missing] = np.interp(missing, idx, theta[idx])
    else:
        out[missing] = CubicSpline(idx, theta[idx])(missing)
    return out


def evaluate(structure: AffineStructure, u: np.ndarray) -> np.ndarray:
    """S(u) = base + sum_j u_j * directions[j]."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != structure.k:
        raise ValueError(f"u has length {u.shape[0]}, expected {structure.k}")
    out = structure.base.copy()
    for uj, d in zip(u, structure.directions):
        out += uj * d
    return out


def hankel_structure(m: int, n: int) -> AffineStructure:
    """m x n Hankel structure: entry (i, j) of S(u) is u_{i+j} (0-based)."""
    if not (2 <= m <= n):
        raise ValueError(f"need 2 <= m <= n, got {m} x {n}")
    k = m + n - 1
    dirs = np.zeros((k, m, n))
    for i in range(m):
        for j in range(n):
            dirs[i + j, i, j] = 1.0
    return AffineStructure(base=np.zeros((m, n)), directions=list(dirs))


def sylvester_structure(n1: int, n2: int, d: int) -> AffineStructure:
    """Sylvester-type structure for polynomials of degrees n1, n2.

    Variables are the k = n1 + n2 + 2 coefficients (f highest-degree first,
    then g). The (k-2d) x (k-d-1) matrix is rank deficient exactly when
    deg gcd(f, g) >= d. d = 1 gives the classical square Sylvester matrix.
    """
    if d < 1 or d > min(n1, n2):
        raise ValueError(f"need 1 <= d <= min(n1, n2), got d={d}")
    k = n1 + n2 + 2
    m = k - 2 * d
    n = k - d - 1
    if m > n:
        raise ValueError(f"degenerate size {m} x {n}")
    dirs = np.zeros((k, m, n))
    rows_f = n2 - d + 1
    for r in range(rows_f):
        for j in range(n1 + 1):
            dirs[j, r, r + j] = 1.0
    for r in range(n1 - d + 1):
        for j in range(n2 + 1):
            dirs[n1 + 1 + j, rows_f + r, r + j] = 1.0
    return AffineStructure(base=np.zeros((m, n)), directions=list(dirs))


def fractional_structure(a: np.ndarray, b: np.ndarray) -> AffineStructure:
    """Structure with column i equal to u_i * b_i - a_i.

    z in the left kernel of S(u) encodes u_i = (a_i . z) / (b_i . z): the
    cleared-denominator form of componentwise fractional programs.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape != b.shape:
        raise ValueError(f"a and b must be equal-shape (k, m) arrays, got {a.shape} and {b.shape}")
    k, m = a.shape
    if k < m:
        raise ValueError(f"need k >= m for an m <= n structure, got k={k}, m={m}")
    base = -a.T
    dirs = np.zeros((k, m, k))
    for i in range(k):
        dirs[i, :, i] = b[i]
    return AffineStructure(base=base, directions=list(dirs))


def triangulation_structure(cameras: Sequence[np.ndarray]) -> AffineStructure:
    """Multiview triangulation: m = 4, k = 2 * (number of cameras).

    Image coordinates of a camera P are (y1/y0, y2/y0) with y = P x. Each
    camera contributes two fractional columns: numerators are rows 2 and 3
    of P, the shared denominator is row 1.
    """
    cameras = [np.asarray(p, dtype=float) for p in cameras]
    if len(cameras) < 2:
        raise ValueError("need at least 2 cameras")
    a_rows = []
    b_rows = []
    for p in cameras:
        if p.shape != (3, 4):
            raise ValueError(f"camera must be 3 x 4, got {p.shape}")
        a_rows.extend([p[1], p[2]])
        b_rows.extend([p[0], p[0]])
    return fractional_structure(np.array(a_rows), np.array(b_rows))


def resectioning_structure(points: Sequence[np.ndarray]) -> AffineStructure:
    """Camera resectioning: the unknown kernel vector is vec(P), row-major.

    m = 12, k = 2 * (number of points); needs at least 6 points.
    """
    points = [np.asarray(x, dtype=float) for x in points]
    if len(points) < 6:
        raise ValueError("need at least 6 points")
    a_rows = []
    b_rows = []
    for x in points:
        if x.shape != (4,):
            raise ValueError(f"points must be homogeneous 4-vectors, got shape {x.shape}")
        row1 = np.concatenate([x, np.zeros(8)])
        row2 = np.concatenate([np.zeros(4), x, np.zeros(4)])
        row3 = np.concatenate([np.zeros(8), x])
        a_rows.extend([row2, row3])
        b_rows.extend([row1, row1])
    return fractional_structure(np.array(a_rows), np.array(b_rows))


def _realify(u: np.ndarray) -> np.ndarray:
    return np.block([[u.real, -u.imag], [u.imag, u.real]])


def complex_to_real(
    base: np.ndarray, directions: Sequence[np.ndarray], theta: np.ndarray
) -> tuple[AffineStructure, np.ndarray]:
    """Real 2m x 2n structure equivalent to a complex one.

    A complex U is rank deficient iff [[Re U, -Im U], [Im U, Re U]] is. Each
    complex variable u_j = p_j + i q_j becomes two real variables; the real
    theta stacks Re(theta) then Im(theta), preserving the objective norm.
    """
    base = np.asarray(base, dtype=complex)
    theta = np.asarray(theta, dtype=complex).reshape(-1)
    dirs = [np.asarray(d, dtype=complex) for d in directions]
    if len(dirs) != theta.shape[0]:
        raise ValueError("theta length must match the number of directions")
    real_dirs = [_realify(d) for d in dirs] + [_realify(1j * d) for d in dirs]
    struct = AffineStructure(base=_realify(base), directions=real_dirs)
    theta_real = np.concatenate([theta.real, theta.imag])
    return struct, theta_real


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def structure_from_descriptor(desc: dict) -> AffineStructure:
    """Build a structure from its JSON descriptor (matrices row-major)."""
    kind = desc.get("type")
    if kind == "hankel":
        return hankel_structure(int(desc["m"]), int(desc["n"]))
    if kind == "sylvester":
        return sylvester_structure(int(desc["n1"]), int(desc["n2"]), int(desc["d"]))
    if kind == "fractional":
        return fractional_structure(np.array(desc["a"], dtype=float), np.array(desc["b"], dtype=float))
    if kind == "triangulation":
        return triangulation_structure([np.array(p, dtype=float) for p in desc["cameras"]])
    if kind == "resectioning":
        return resectioning_structure([np.array(x, dtype=float) for x in desc["points"]])
    if kind == "generic":
        return AffineStructure(
            base=np.array(desc["base"], dtype=float),
            directions=[np.array(d, dtype=float) for d in desc["directions"]],
        )
    raise ValueError(f"unknown structure type: {kind!r}")


def weight_from_descriptor(desc: dict | None, k: int) -> WeightSpec:
    if desc is None:
        return WeightSpec.identity(k)
    kind = desc.get("kind")
    if kind == "identity":
        return WeightSpec.identity(k)
    if kind == "dense-psd":
        return WeightSpec.dense(np.array(desc["matrix"], dtype=float))
    if kind == "diagonal-01":
        return WeightSpec.diagonal01(np.array(desc["mask"], dtype=float))
    raise ValueError(f"unknown weight kind: {kind!r}")


def instance_from_descriptor(desc: dict) -> ProblemInstance:
    """Build a full problem instance: structure descriptor plus theta/weight.

    Null (or NaN) theta entries are allowed only at coordinates a
    diagonal-01 weight marks unobserved; they are spline-completed, which
    leaves the optimization problem unchanged because the objective never
    measures those coordinates.
    """
    structure = structure_from_descriptor(desc)
    if "theta" not in desc:
        raise ValueError("instance descriptor needs a 'theta' entry")
    theta = np.array(
        [np.nan if t is None else float(t) for t in desc["theta"]], dtype=float
    )
    weight = weight_from_descriptor(desc.get("weight"), structure.k)
    nan_mask = np.isnan(theta)
    if np.any(nan_mask):
        if np.any(nan_mask & weight.observed_mask()):
            raise ValueError("missing theta entries must be unobserved in the weight")
        theta = spline_complete(theta, ~nan_mask)
    return ProblemInstance(structure=structure, theta=theta, weight=weight)
