"""Structure builders: frozen oracle values and invariants.

Expected values below are derived independently of the implementation:
classical Hankel/Sylvester layouts, resultants of small polynomials done by
hand, and direct substitution identities.
"""

import numpy as np
import pytest

from stls.structure import (
    AffineStructure,
    ProblemInstance,
    WeightSpec,
    complex_to_real,
    evaluate,
    fractional_structure,
    hankel_structure,
    instance_from_descriptor,
    resectioning_structure,
    structure_from_descriptor,
    sylvester_structure,
    triangulation_structure,
)


def example_31_structure() -> AffineStructure:
    # S(u) = [[1, u], [u, u]]: base [[1,0],[0,0]], one direction [[0,1],[1,1]]
    base = np.array([[1.0, 0.0], [0.0, 0.0]])
    b1 = np.array([[0.0, 1.0], [1.0, 1.0]])
    return AffineStructure(base=base, directions=[b1])


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def test_evaluate_hankel_33():
    s = hankel_structure(3, 3)
    out = evaluate(s, np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
    expected = np.array([[1.0, 2, 3], [2, 3, 4], [3, 4, 5]])
    assert np.array_equal(out, expected)


def test_evaluate_example_31():
    s = example_31_structure()
    out = evaluate(s, np.array([0.5]))
    assert np.allclose(out, [[1.0, 0.5], [0.5, 0.5]], atol=0)


def test_evaluate_zero_gives_base():
    rng = np.random.default_rng(7)
    base = rng.standard_normal((2, 4))
    dirs = [rng.standard_normal((2, 4)) for _ in range(3)]
    s = AffineStructure(base=base, directions=dirs)
    assert np.array_equal(evaluate(s, np.zeros(3)), base)


def test_evaluate_dimension_mismatch():
    s = hankel_structure(3, 3)
    with pytest.raises(ValueError):
        evaluate(s, np.arange(4.0))


def test_evaluate_is_affine():
    rng = np.random.default_rng(11)
    s = hankel_structure(3, 5)
    # exact-zero check on integer inputs (closed under float addition)
    for _ in range(20):
        u = rng.integers(-100, 100, size=s.k).astype(float)
        v = rng.integers(-100, 100, size=s.k).astype(float)
        lhs = evaluate(s, u + v) - evaluate(s, u) - evaluate(s, v) + evaluate(s, np.zeros(s.k))
        assert np.array_equal(lhs, np.zeros_like(lhs))
    # float inputs only up to rounding of u + v
    for _ in range(20):
        u = rng.standard_normal(s.k)
        v = rng.standard_normal(s.k)
        lhs = evaluate(s, u + v) - evaluate(s, u) - evaluate(s, v) + evaluate(s, np.zeros(s.k))
        assert np.max(np.abs(lhs)) < 1e-14


# ---------------------------------------------------------------------------
# hankel
# ---------------------------------------------------------------------------

def test_hankel_33_directions():
    s = hankel_structure(3, 3)
    assert s.k == 5
    assert np.array_equal(s.base, np.zeros((3, 3)))
    # first parameter hits only the top-left corner
    b1 = np.zeros((3, 3))
    b1[0, 0] = 1.0
    assert np.array_equal(s.directions[0], b1)
    # each direction is an antidiagonal indicator
    for t, b in enumerate(s.directions):
        i, j = np.nonzero(b)
        assert np.all(i + j == t)


def test_hankel_sizes():
    assert hankel_structure(3, 4).k == 6
    s = hankel_structure(3, 40)
    assert s.k == 42 and s.m == 3 and s.n == 40


def test_hankel_rejects_m_above_n():
    with pytest.raises(ValueError):
        hankel_structure(4, 3)
    with pytest.raises(ValueError):
        hankel_structure(1, 3)


def test_hankel_constant_antidiagonals():
    rng = np.random.default_rng(3)
    s = hankel_structure(4, 6)
    u = rng.standard_normal(s.k)
    h = evaluate(s, u)
    for i in range(4):
        for j in range(6):
            assert h[i, j] == u[i + j]


# ---------------------------------------------------------------------------
# sylvester
# ---------------------------------------------------------------------------

def test_sylvester_linear_pair():
    # d=1, two linear polynomials: classical 2x2 Sylvester, det = f0 g1 - f1 g0
    s = sylvester_structure(1, 1, 1)
    assert (s.m, s.n, s.k) == (2, 2, 4)
    mat = evaluate(s, np.array([1.0, -1.0, 1.0, -1.0]))  # f = g = t - 1
    assert np.allclose(mat, [[1.0, -1.0], [1.0, -1.0]])
    assert np.linalg.matrix_rank(mat) == 1


def test_sylvester_classical_layout():
    # f = t^2 - 3t + 2, g = t - 1 share the root t = 1: resultant 0.
    # Hand layout (highest-degree first, f-rows then g-rows):
    #   [1 -3  2]
    #   [1 -1  0]
    #   [0  1 -1]
    s = sylvester_structure(2, 1, 1)
    u = np.array([1.0, -3.0, 2.0, 1.0, -1.0])
    mat = evaluate(s, u)
    expected = np.array([[1.0, -3, 2], [1, -1, 0], [0, 1, -1]])
    assert np.allclose(mat, expected)
    assert abs(np.linalg.det(mat)) < 1e-12


def test_sylvester_resultant_oracle_d1():
    # On random degree <= 3 pairs, det of the d=1 matrix vanishes iff the
    # polynomials share a root (resultant computed from the roots directly).
    rng = np.random.default_rng(5)
    for trial in range(20):
        roots_f = rng.standard_normal(3)
        roots_g = rng.standard_normal(2)
        if trial % 2 == 0:
            roots_g[0] = roots_f[0]  # plant a common root
        f = np.poly(roots_f)
        g = np.poly(roots_g)
        s = sylvester_structure(3, 2, 1)
        mat = evaluate(s, np.concatenate([f, g]))
        resultant = np.prod([rf - rg for rf in roots_f for rg in roots_g])
        sing = np.linalg.svd(mat, compute_uv=False)[-1]
        if abs(resultant) > 1e-6:
            assert sing > 1e-10
        else:
            assert sing < 1e-8


def test_sylvester_gcd_example_size():
    s = sylvester_structure(6, 5, 2)
    assert (s.m, s.n) == (9, 10)
    assert s.k == 13


def test_sylvester_gcd_example_rank_deficient():
    # f = (t^2-2)(t^4+2) = t^6 - 2 t^4 + 2 t^2 - 4
    # g = (t^2-2)(t^3-1) = t^5 - 2 t^3 - t^2 + 2
    # gcd has degree 2, so the d=2 matrix is rank deficient.
    f = np.array([1.0, 0.0, -2.0, 0.0, 2.0, 0.0, -4.0])
    g = np.array([1.0, 0.0, -2.0, -1.0, 0.0, 2.0])
    f /= np.linalg.norm(f)
    g /= np.linalg.norm(g)
    s = sylvester_structure(6, 5, 2)
    mat = evaluate(s, np.concatenate([f, g]))
    sv = np.linalg.svd(mat, compute_uv=False)
    assert sv[-1] <= 1e-10


def test_sylvester_rejects_bad_d():
    with pytest.raises(ValueError):
        sylvester_structure(3, 2, 0)
    with pytest.raises(ValueError):
        sylvester_structure(3, 2, 3)


# ---------------------------------------------------------------------------
# fractional
# ---------------------------------------------------------------------------

def test_fractional_scalar():
    s = fractional_structure(np.array([[2.0]]), np.array([[1.0]]))
    assert (s.m, s.n, s.k) == (1, 1, 1)
    assert np.allclose(evaluate(s, np.array([2.0])), [[0.0]])
    assert np.allclose(evaluate(s, np.array([5.0])), [[3.0]])


def test_fractional_rejects_k_below_m():
    a = np.zeros((2, 3))
    b = np.ones((2, 3))
    with pytest.raises(ValueError):
        fractional_structure(a, b)


def test_fractional_ratio_substitution():
    # With u_i = a_i.z / b_i.z the vector z lies in the left kernel.
    rng = np.random.default_rng(13)
    for _ in range(10):
        m, k = 3, 5
        a = rng.standard_normal((k, m))
        b = rng.standard_normal((k, m))
        z = rng.standard_normal(m)
        bz = b @ z
        if np.any(np.abs(bz) < 1e-3):
            continue
        u = (a @ z) / bz
        s = fractional_structure(a, b)
        assert np.max(np.abs(z @ evaluate(s, u))) < 1e-10


# ---------------------------------------------------------------------------
# triangulation / resectioning
# ---------------------------------------------------------------------------

def _toy_cameras(count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cams = []
    for _ in range(count):
        c = rng.standard_normal(3)
        c *= 2.0 / np.linalg.norm(c)
        w = -c / np.linalg.norm(c)
        ref = np.array([0.0, 0.0, 1.0]) if abs(w[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        p = ref - np.dot(ref, w) * w
        p /= np.linalg.norm(p)
        q = np.cross(w, p)
        r = np.vstack([w, p, q])
        cams.append(np.hstack([r, -(r @ c)[:, None]]))
    return np.array(cams)


def test_triangulation_sizes():
    cams = _toy_cameras(3)
    s = triangulation_structure(cams)
    assert (s.m, s.n, s.k) == (4, 6, 6)
    s7 = triangulation_structure(_toy_cameras(7))
    assert (s7.m, s7.n) == (4, 14)


def test_triangulation_rejects_single_camera():
    with pytest.raises(ValueError):
        triangulation_structure(_toy_cameras(1))


def test_triangulation_exact_point_in_kernel():
    rng = np.random.default_rng(21)
    cams = _toy_cameras(3, seed=4)
    x = rng.uniform(-0.5, 0.5, size=3)
    xh = np.append(x, 1.0)
    theta = []
    for p in cams:
        y = p @ xh
        theta.extend([y[1] / y[0], y[2] / y[0]])
    s = triangulation_structure(cams)
    mat = evaluate(s, np.array(theta))
    assert np.max(np.abs(xh @ mat)) < 1e-12
    sv = np.linalg.svd(mat, compute_uv=False)
    assert sv[-1] / sv[0] <= 1e-10


def test_resectioning_sizes():
    rng = np.random.default_rng(2)
    pts = np.hstack([rng.uniform(-0.5, 0.5, size=(6, 3)), np.ones((6, 1))])
    s = resectioning_structure(pts)
    assert (s.m, s.n, s.k) == (12, 12, 12)
    pts15 = np.hstack([rng.uniform(-0.5, 0.5, size=(15, 3)), np.ones((15, 1))])
    assert resectioning_structure(pts15).n == 30


def test_resectioning_rejects_few_points():
    pts = np.zeros((5, 4))
    with pytest.raises(ValueError):
        resectioning_structure(pts)


def test_resectioning_exact_camera_in_kernel():
    rng = np.random.default_rng(31)
    cam = _toy_cameras(1, seed=9)[0]
    pts = np.hstack([rng.uniform(-0.5, 0.5, size=(6, 3)), np.ones((6, 1))])
    theta = []
    for xh in pts:
        y = cam @ xh
        theta.extend([y[1] / y[0], y[2] / y[0]])
    s = resectioning_structure(pts)
    mat = evaluate(s, np.array(theta))
    z = cam.reshape(-1)  # vec(P), row-major
    assert np.max(np.abs(z @ mat)) < 1e-12
    sv = np.linalg.svd(mat, compute_uv=False)
    assert sv[-1] / sv[0] <= 1e-10


# ---------------------------------------------------------------------------
# complex embedding
# ---------------------------------------------------------------------------

def test_complex_to_real_scalar_i():
    # U = u * [[1]] at u = i maps to [[0,-1],[1,0]], which has rank 2.
    base = np.zeros((1, 1), dtype=complex)
    dirs = [np.ones((1, 1), dtype=complex)]
    s, theta_r = complex_to_real(base, dirs, np.array([1j]))
    assert (s.m, s.n, s.k) == (2, 2, 2)
    assert np.array_equal(theta_r, [0.0, 1.0])
    mat = evaluate(s, theta_r)
    assert np.allclose(mat, [[0.0, -1.0], [1.0, 0.0]])
    assert np.linalg.matrix_rank(mat) == 2
    # u = 0 gives the zero matrix, rank deficient
    assert np.allclose(evaluate(s, np.zeros(2)), np.zeros((2, 2)))


def test_complex_to_real_real_only_input():
    rng = np.random.default_rng(17)
    base = rng.standard_normal((2, 3)) + 0j
    dirs = [rng.standard_normal((2, 3)) + 0j for _ in range(2)]
    theta = rng.standard_normal(2) + 0j
    s, theta_r = complex_to_real(base, dirs, theta)
    mat = evaluate(s, theta_r)
    # block-diagonal doubling: off-diagonal blocks vanish
    assert np.allclose(mat[:2, 3:], 0) and np.allclose(mat[2:, :3], 0)
    assert np.allclose(mat[:2, :3], mat[2:, 3:])


def test_complex_to_real_singular_matches_complex_svd():
    rng = np.random.default_rng(23)
    for _ in range(5):
        # random singular complex 3x4 via a rank-2 product
        u = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        v = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        target = u @ v
        # generic structure: one complex variable per entry
        dirs = []
        for i in range(3):
            for j in range(4):
                e = np.zeros((3, 4), dtype=complex)
                e[i, j] = 1.0
                dirs.append(e)
        theta = target.reshape(-1)
        s, theta_r = complex_to_real(np.zeros((3, 4), dtype=complex), dirs, theta)
        mat = evaluate(s, theta_r)
        sv = np.linalg.svd(mat, compute_uv=False)
        assert sv[-1] <= 1e-10
        # norms agree: |u - 0|^2 complex vs stacked real
        assert np.isclose(np.linalg.norm(theta) ** 2, np.linalg.norm(theta_r) ** 2)


# ---------------------------------------------------------------------------
# weights and instances
# ---------------------------------------------------------------------------

def test_weight_identity_matrix():
    w = WeightSpec.identity(4)
    assert np.array_equal(w.full_matrix(), np.eye(4))


def test_weight_dense_requires_symmetric_psd():
    with pytest.raises(ValueError):
        WeightSpec.dense(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        WeightSpec.dense(np.array([[1.0, 0.0], [0.0, -1.0]]))
    w = WeightSpec.dense(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert w.kind == "dense-psd"


def test_weight_diagonal01():
    w = WeightSpec.diagonal01(np.array([1, 0, 1, 1]))
    assert np.array_equal(w.full_matrix(), np.diag([1.0, 0, 1, 1]))
    with pytest.raises(ValueError):
        WeightSpec.diagonal01(np.array([1, 2, 0]))


def test_instance_validation():
    s = hankel_structure(3, 3)
    inst = ProblemInstance(structure=s, theta=np.ones(5))
    assert inst.weight.kind == "identity"
    with pytest.raises(ValueError):
        ProblemInstance(structure=s, theta=np.ones(4))
    with pytest.raises(ValueError):
        ProblemInstance(structure=s, theta=np.ones(5), weight=WeightSpec.identity(4))


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def test_descriptor_hankel():
    s = structure_from_descriptor({"type": "hankel", "m": 3, "n": 5})
    assert (s.m, s.n, s.k) == (3, 5, 7)


def test_descriptor_sylvester():
    s = structure_from_descriptor({"type": "sylvester", "n1": 6, "n2": 5, "d": 2})
    assert (s.m, s.n) == (9, 10)


def test_descriptor_fractional_and_generic():
    s = structure_from_descriptor(
        {"type": "fractional", "a": [[2.0]], "b": [[1.0]]}
    )
    assert (s.m, s.k) == (1, 1)
    g = structure_from_descriptor(
        {
            "type": "generic",
            "base": [[1.0, 0.0], [0.0, 0.0]],
            "directions": [[[0.0, 1.0], [1.0, 1.0]]],
        }
    )
    assert (g.m, g.n, g.k) == (2, 2, 1)


def test_descriptor_rejects_unknown_type():
    with pytest.raises(ValueError):
        structure_from_descriptor({"type": "toeplitz", "m": 2, "n": 2})


def test_instance_from_descriptor_with_weight():
    d = {
        "type": "hankel",
        "m": 3,
        "n": 3,
        "theta": [1.0, 1.0, 1.0, 1.0, 1.0],
        "weight": {"kind": "diagonal-01", "mask": [1, 1, 0, 1, 1]},
    }
    inst = instance_from_descriptor(d)
    assert inst.weight.kind == "diagonal-01"
    assert inst.theta.shape == (5,)
