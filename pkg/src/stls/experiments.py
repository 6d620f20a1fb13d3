"""Benchmark suites: seeded instance samplers and a success-rate harness.

Each suite draws random problem instances at a given size and noise level,
solves them through the semidefinite pipeline, and reports the percentage
that come back certified exact, optionally next to the local baseline.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from stls.baseline import LocalConfig, local_solve
from stls.extract import solve_instance
from stls.structure import (
    ProblemInstance,
    WeightSpec,
    evaluate,
    hankel_structure,
    resectioning_structure,
    spline_complete,
    sylvester_structure,
    triangulation_structure,
)

SUITES = (
    "hankel-random",
    "realization",
    "realization-missing",
    "gcd",
    "triangulation",
    "resectioning",
)

MISSING_PATTERNS = ("mod5", "mod10")
CAMERA_LAYOUTS = ("sphere", "line")

# agreement threshold between the local objective and a certified SDP value
AGREEMENT_TOL = 1e-6

CSV_COLUMNS = (
    "suite",
    "m",
    "size",
    "noise",
    "trials",
    "sdp_exact_pct",
    "baseline_pct",
    "mean_runtime_ms",
)

# per-suite desk-scale defaults; flags override
SUITE_DEFAULTS = {
    "hankel-random": {"trials": 50, "sizes": (3, 4, 5, 6), "noise_levels": (0.0,)},
    "realization": {"trials": 20, "sizes": (20,), "noise_levels": (0.0, 0.1, 0.2)},
    "realization-missing": {"trials": 20, "sizes": (20,), "noise_levels": (0.0, 0.1, 0.2)},
    "gcd": {"trials": 20, "sizes": (10,), "noise_levels": (0.0, 0.05, 0.1)},
    "triangulation": {"trials": 20, "sizes": (3,), "noise_levels": (0.0, 0.1, 0.2)},
    "resectioning": {"trials": 20, "sizes": (6,), "noise_levels": (0.0, 0.05, 0.1)},
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark run: a suite swept over sizes and noise levels."""

    suite: str
    trials: int
    seed: int = 0
    noise_levels: tuple = (0.0,)
    sizes: tuple = ()
    m: int = 3
    pattern: str = "mod5"
    camera_layout: str = "sphere"
    baseline: bool = False

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(s < 0 for s in self.noise_levels) or not self.noise_levels:
            raise ValueError("noise levels must be nonnegative and nonempty")
        if not self.sizes:
            raise ValueError("sizes must be nonempty")
        if self.pattern not in MISSING_PATTERNS:
            raise ValueError(f"unknown missing pattern {self.pattern!r}")
        if self.camera_layout not in CAMERA_LAYOUTS:
            raise ValueError(f"unknown camera layout {self.camera_layout!r}")
        if self.suite == "hankel-random" and (self.m < 2 or min(self.sizes) < self.m):
            raise ValueError("hankel sizes must satisfy n >= m >= 2")
        if self.suite in ("realization", "realization-missing") and min(self.sizes) < 3:
            raise ValueError("realization needs n >= 3")
        if self.suite == "triangulation" and min(self.sizes) < 2:
            raise ValueError("triangulation needs at least 2 cameras")
        if self.suite == "resectioning" and min(self.sizes) < 6:
            raise ValueError("resectioning needs at least 6 points")


def default_spec(suite: str, **overrides) -> ExperimentSpec:
    """Experiment spec with the suite's desk-scale defaults filled in."""
    if suite not in SUITE_DEFAULTS:
        raise ValueError(f"unknown suite {suite!r}")
    kwargs = dict(SUITE_DEFAULTS[suite])
    kwargs.update(overrides)
    return ExperimentSpec(suite=suite, **kwargs)


def impulse_response(length: int) -> np.ndarray:
    """First samples of a fixed order-2 linear system's impulse response.

    The underlying sequence satisfies y[t] = 1.6 y[t-1] - 0.8 y[t-2], so
    every Hankel matrix with 3+ rows built from it has rank exactly 2.
    """
    y = np.zeros(length)
    y[0] = 1.0
    if length > 1:
        y[1] = 0.6
    for t in range(2, length):
        y[t] = 1.6 * y[t - 1] - 0.8 * y[t - 2]
    return y


def missing_mask(length: int, pattern: str) -> np.ndarray:
    """0/1 observation mask over 1-based sample indices.

    mod5 drops the 3rd and 5th entry of every block of five; mod10 keeps
    only the first two entries of every block of ten.
    """
    idx = np.arange(1, length + 1)
    if pattern == "mod5":
        mask = ~np.isin(idx % 5, (3, 0))
    elif pattern == "mod10":
        mask = np.isin(idx % 10, (1, 2))
    else:
        raise ValueError(f"unknown missing pattern {pattern!r}")
    return mask.astype(float)


def gcd_polynomials() -> tuple:
    """Fixed degree-(6, 5) pair with common divisor t^2 - 2."""
    c = np.array([1.0, 0.0, -2.0])
    f = np.convolve(c, np.array([1.0, 0.0, 0.0, 0.0, 2.0]))
    g = np.convolve(c, np.array([1.0, 0.0, 0.0, -1.0]))
    return f, g


def camera_matrix(center: np.ndarray) -> np.ndarray:
    """3x4 camera at `center` looking at the origin.

    Points are homogeneous with the constant coordinate first, so column 0
    holds the translation. Row 0 is the viewing direction (the divider of
    the projection); rows 1-2 are a deterministic orthonormal completion.
    """
    center = np.asarray(center, dtype=float)
    d = -center / np.linalg.norm(center)
    up = np.array([0.0, 0.0, 1.0])
    if abs(d @ up) > 0.9:
        up = np.array([1.0, 0.0, 0.0])
    r1 = up - (up @ d) * d
    r1 /= np.linalg.norm(r1)
    r2 = np.cross(d, r1)
    rot = np.vstack([d, r1, r2])
    return np.column_stack([-rot @ center, rot])


def project_point(camera: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Image coordinates of the 3-vector x under a 3x4 camera."""
    y = camera @ np.concatenate([[1.0], x])
    return y[1:] / y[0]


def _sample_cameras(layout: str, count: int, rng) -> list:
    centers = []
    for _ in range(count):
        if layout == "sphere":
            c = rng.standard_normal(3)
            c *= 2.0 / np.linalg.norm(c)
        else:
            c = np.array([2.0, 0.0, rng.uniform(0.0, 1.0)])
        centers.append(c)
    return [camera_matrix(c) for c in centers]


def sample_instance(spec: ExperimentSpec, size: int, noise: float, rng) -> ProblemInstance:
    """Draw one random instance of `spec.suite` at (size, noise)."""
    if spec.suite == "hankel-random":
        st = hankel_structure(spec.m, size)
        theta = rng.standard_normal(st.k)
        theta /= np.linalg.norm(theta)
        if noise > 0.0:
            theta = theta + noise * rng.standard_normal(st.k)
        return ProblemInstance(st, theta)

    if spec.suite == "realization":
        st = hankel_structure(3, size)
        theta = impulse_response(st.k) + noise * rng.standard_normal(st.k)
        return ProblemInstance(st, theta)

    if spec.suite == "realization-missing":
        st = hankel_structure(3, size)
        mask = missing_mask(st.k, spec.pattern)
        observed = mask.astype(bool)
        y = impulse_response(st.k) + noise * rng.standard_normal(st.k)
        theta = spline_complete(np.where(observed, y, 0.0), observed)
        return ProblemInstance(st, theta, WeightSpec.diagonal01(mask))

    if spec.suite == "gcd":
        f, g = gcd_polynomials()
        st = sylvester_structure(len(f) - 1, len(g) - 1, 2)
        theta = np.concatenate([f / np.linalg.norm(f), g / np.linalg.norm(g)])
        theta = theta + noise * rng.standard_normal(st.k)
        return ProblemInstance(st, theta)

    if spec.suite == "triangulation":
        cameras = _sample_cameras(spec.camera_layout, size, rng)
        st = triangulation_structure(cameras)
        x = rng.uniform(-0.5, 0.5, size=3)
        theta = np.concatenate([project_point(p, x) for p in cameras])
        theta = theta + noise * rng.standard_normal(st.k)
        return ProblemInstance(st, theta)

    if spec.suite == "resectioning":
        camera = _sample_cameras("sphere", 1, rng)[0]
        points = rng.uniform(-0.5, 0.5, size=(size, 3))
        st = resectioning_structure([np.concatenate([[1.0], x]) for x in points])
        theta = np.concatenate([project_point(camera, x) for x in points])
        theta = theta + noise * rng.standard_normal(st.k)
        return ProblemInstance(st, theta)

    raise ValueError(f"unknown suite {spec.suite!r}")


@dataclass
class CellResult:
    """Aggregated trial outcomes for one (size, noise) cell."""

    suite: str
    m: int
    size: int
    noise: float
    exact: list = field(default_factory=list)
    baseline_hits: list = field(default_factory=list)
    duality_ok: list = field(default_factory=list)
    runtimes_ms: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.exact)

    @property
    def sdp_exact_pct(self) -> float:
        return 100.0 * sum(self.exact) / self.trials

    @property
    def baseline_pct(self):
        if not self.baseline_hits:
            return None
        return 100.0 * sum(self.baseline_hits) / self.trials

    @property
    def mean_runtime_ms(self) -> float:
        return float(np.mean(self.runtimes_ms))


def _structure_rows(spec: ExperimentSpec, size: int) -> int:
    if spec.suite == "hankel-random":
        return spec.m
    if spec.suite in ("realization", "realization-missing"):
        return 3
    if spec.suite == "gcd":
        return 9
    if spec.suite == "triangulation":
        return 4
    return 12


def _feasible_objective(instance: ProblemInstance, sol) -> float:
    """Objective of a feasible point, for the per-trial weak-duality check.

    A certified solution already sits on the variety to certificate accuracy,
    so its own objective qualifies. Otherwise the extracted point may be
    infeasible and its raw distance can undercut the lower bound; refine it
    with the local solver instead, whose inner step enforces the kernel
    constraint exactly, so the value it reports is attained by a feasible
    point whatever the convergence flag says.
    """
    if sol.certified:
        return sol.objective
    kernel = np.linalg.svd(evaluate(instance.structure, sol.u_star))[0][:, -1]
    _, local_obj, _ = local_solve(
        instance, LocalConfig(init_kind="user-supplied", z0=kernel)
    )
    return local_obj


def run_cell(spec: ExperimentSpec, size: int, noise: float, cell_index: int, log=None) -> CellResult:
    """Run all trials of one cell with per-trial derived seeds."""
    cell = CellResult(spec.suite, _structure_rows(spec, size), size, noise)
    for trial in range(spec.trials):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, cell_index, trial]))
        instance = sample_instance(spec, size, noise, rng)
        start = time.perf_counter()
        try:
            sol = solve_instance(instance)
        except Exception as exc:  # count solver failures as non-exact
            cell.runtimes_ms.append(1e3 * (time.perf_counter() - start))
            cell.exact.append(False)
            cell.duality_ok.append(True)
            if spec.baseline:
                cell.baseline_hits.append(False)
            message = f"{spec.suite} size={size} noise={noise} trial={trial}: {exc}"
            cell.errors.append(message)
            if log is not None:
                print(f"trial failed: {message}", file=log)
            continue
        cell.runtimes_ms.append(1e3 * (time.perf_counter() - start))
        cell.exact.append(sol.certified)
        feas_obj = _feasible_objective(instance, sol)
        ok = sol.gamma <= feas_obj + AGREEMENT_TOL * (1.0 + abs(feas_obj))
        if spec.baseline:
            _, local_obj, _ = local_solve(instance)
            ok = ok and local_obj >= sol.gamma - AGREEMENT_TOL
            hit = sol.certified and abs(local_obj - sol.objective) <= AGREEMENT_TOL * (
                1.0 + sol.objective
            )
            cell.baseline_hits.append(hit)
        cell.duality_ok.append(ok)
        if not ok and log is not None:
            print(
                f"weak duality violated: {spec.suite} size={size} noise={noise} trial={trial}",
                file=log,
            )
    return cell


def run_bench(spec: ExperimentSpec, log=None) -> list:
    """Run every (size, noise) cell; returns one CellResult per cell."""
    cells = []
    cell_index = 0
    for size in spec.sizes:
        for noise in spec.noise_levels:
            cell = run_cell(spec, size, noise, cell_index, log=log)
            cells.append(cell)
            if log is not None:
                base = "" if cell.baseline_pct is None else f" baseline {cell.baseline_pct:.1f}%"
                print(
                    f"{spec.suite} size={size} noise={noise}: "
                    f"{sum(cell.exact)}/{cell.trials} exact{base} "
                    f"({cell.mean_runtime_ms:.0f} ms/trial)",
                    file=log,
                )
            cell_index += 1
    return cells


def _cell_fields(cell: CellResult) -> list:
    base = "" if cell.baseline_pct is None else f"{cell.baseline_pct:.1f}"
    return [
        cell.suite,
        str(cell.m),
        str(cell.size),
        str(cell.noise),
        str(cell.trials),
        f"{cell.sdp_exact_pct:.1f}",
        base,
        f"{cell.mean_runtime_ms:.1f}",
    ]


def format_csv(cells: list) -> str:
    """CSV table; byte-deterministic given spec+seed except the runtime column."""
    lines = [",".join(CSV_COLUMNS)]
    for cell in cells:
        lines.append(",".join(_cell_fields(cell)))
    return "\n".join(lines) + "\n"


def format_table(cells: list) -> str:
    """Aligned text table of the same rows as the CSV."""
    rows = [list(CSV_COLUMNS)] + [_cell_fields(c) for c in cells]
    widths = [max(len(r[j]) for r in rows) for j in range(len(CSV_COLUMNS))]
    out = []
    for row in rows:
        cells_txt = [row[0].ljust(widths[0])] + [
            row[j].rjust(widths[j]) for j in range(1, len(row))
        ]
        out.append("  ".join(cells_txt).rstrip())
    return "\n".join(out) + "\n"
