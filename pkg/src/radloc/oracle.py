"""Brute-force checks that do not share code paths with the ascent kernel.

* exhaustive evaluation of the concentrated objective on a barycentric
  lattice over the open hull, with a census of lattice-local maxima;
* central finite differences of the log-likelihood;
* a randomized sweep asking whether the noise-free objective ever has more
  than one maximum inside the hull.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from radloc import geometry
from radloc.errors import ContractError, SingularityError
from radloc.geometry import as_point
from radloc.likelihood import (
    LikelihoodContext,
    concentrated_gradient,
    concentrated_gradient_many,
    log_likelihood,
    profit,
    profit_many,
)
from radloc.model import SourceParams, noise_free_measurement


@dataclass(frozen=True)
class GridSpec:
    """Barycentric lattice: weights margin + (1 - (N+1) margin) m_i / resolution."""

    resolution: int
    margin: float = 1e-3

    def __post_init__(self):
        if int(self.resolution) < 8:
            raise ContractError("grid resolution must be at least 8")
        if not 0 <= self.margin < 0.25:
            raise ContractError("margin must lie in [0, 0.25)")


@dataclass
class Lattice:
    """Lattice points of a simplex plus their neighbor table."""

    points: np.ndarray  # (m, N) coordinates
    indices: np.ndarray  # (m, N+1) integer compositions of the resolution
    neighbors: np.ndarray  # (m, N(N+1)) row indices, -1 where off-lattice
    spacing: float


def build_lattice(array, grid):
    n = array.dim + 1
    R = int(grid.resolution)
    axes = np.meshgrid(*([np.arange(R + 1)] * array.dim), indexing="ij")
    head = np.stack([a.ravel() for a in axes], axis=1)
    head = head[head.sum(axis=1) <= R]
    comp = np.column_stack([head, R - head.sum(axis=1)])
    scale = 1.0 - n * grid.margin
    weights = grid.margin + scale * comp / R
    points = weights @ array.sensors

    # dense lookup over the first N integer coordinates
    lookup = np.full((R + 1,) * array.dim, -1, dtype=np.int64)
    lookup[tuple(head.T)] = np.arange(head.shape[0])
    moves = []
    for i in range(n):
        for j in range(n):
            if i != j:
                step = np.zeros(n, dtype=np.int64)
                step[i] += 1
                step[j] -= 1
                moves.append(step)
    nbrs = np.full((head.shape[0], len(moves)), -1, dtype=np.int64)
    for c, step in enumerate(moves):
        cand = comp + step
        valid = np.all(cand >= 0, axis=1)
        idx = np.full(head.shape[0], -1, dtype=np.int64)
        idx[valid] = lookup[tuple(cand[valid, :-1].T)]
        nbrs[:, c] = idx
    spacing = scale * array.diameter / R
    return Lattice(points, comp, nbrs, spacing)


@dataclass
class StationaryCensus:
    """Lattice census of J, optionally followed by local refinement.

    ``lattice_maxima`` are lattice points beating all their neighbors.  On a
    narrow ridge several such points can belong to one continuous maximum,
    so each is refined by a continuous local ascent and limits closer than
    ``merge_tolerance`` are merged; ``local_maxima_count`` counts the merged
    limits (or the raw lattice maxima when refinement is off).
    """

    global_argmax: np.ndarray
    global_max: float
    local_maxima_count: int
    local_maxima: np.ndarray
    lattice_maxima_count: int
    lattice_maxima: np.ndarray
    stationary_points: np.ndarray
    plateau_ties: int
    lattice_spacing: float
    n_points: int
    refined: bool = False

    @property
    def lattice_argmax(self):
        return self.lattice_maxima[0] if self.lattice_maxima.shape[0] else self.global_argmax

    def to_dict(self):
        d = asdict(self)
        for key in ("global_argmax", "local_maxima", "lattice_maxima", "stationary_points"):
            d[key] = np.asarray(d[key]).tolist()
        return d


def _census_from_values(lattice, J, grad=None):
    J = np.where(np.isnan(J), -np.inf, J)
    m = J.shape[0]
    rows = np.arange(m)
    nb = lattice.neighbors
    valid = nb >= 0
    nbJ = np.where(valid, J[np.where(valid, nb, 0)], -np.inf)
    # ties go to the lexicographically smaller lattice index
    beats = (J[:, None] > nbJ) | ((J[:, None] == nbJ) & (rows[:, None] < nb))
    beats |= ~valid
    is_max = np.all(beats, axis=1) & np.isfinite(J)
    ties = int(np.sum(valid & (J[:, None] == nbJ)) // 2)
    best = int(np.argmax(J))

    stationary = np.empty((0, lattice.points.shape[1]))
    if grad is not None:
        # every gradient component changes sign within the point's neighborhood
        gnb = np.where(valid[:, :, None], grad[np.where(valid, nb, 0)], grad[:, None, :])
        allg = np.concatenate([grad[:, None, :], gnb], axis=1)
        flips = np.all((allg.min(axis=1) <= 0) & (allg.max(axis=1) >= 0), axis=1)
        stationary = lattice.points[flips]

    order = np.flatnonzero(is_max)
    order = order[np.argsort(-J[order], kind="stable")]
    maxima = lattice.points[order].copy()
    return StationaryCensus(
        global_argmax=lattice.points[best].copy(),
        global_max=float(J[best]),
        local_maxima_count=int(order.shape[0]),
        local_maxima=maxima,
        lattice_maxima_count=int(order.shape[0]),
        lattice_maxima=maxima,
        stationary_points=stationary,
        plateau_ties=ties,
        lattice_spacing=float(lattice.spacing),
        n_points=int(m),
    )


def refine_maximum(ctx, y0):
    """Continuous local maximization of J from ``y0`` (scipy BFGS).

    Returns the limit point; evaluations within a sensor guard radius count
    as infinitely bad.
    """
    scale = max(ctx.measurement.total, 1.0)

    def fun(y):
        try:
            return -profit(ctx, y) / scale
        except SingularityError:
            return np.inf

    def jac(y):
        try:
            return -concentrated_gradient(ctx, y) / scale
        except SingularityError:
            return np.zeros_like(y)

    res = minimize(fun, np.asarray(y0, dtype=np.float64), jac=jac, method="BFGS",
                   options={"gtol": 1e-10, "maxiter": 2000})
    return res.x if np.isfinite(res.fun) and res.fun <= fun(y0) else np.asarray(y0, dtype=np.float64)


def _merge(points, tol):
    reps = []
    for p in points:
        if not any(np.linalg.norm(p - q) <= tol for q in reps):
            reps.append(p)
    return np.array(reps).reshape(-1, points.shape[1] if len(points) else 0)


def grid_argmax(ctx, grid, lattice=None, with_gradient=True, refine=True, merge_tolerance=None):
    """Evaluate J on the barycentric lattice and census its local maxima.

    A lattice point is a local maximum when its value beats every in-lattice
    neighbor (moves m + e_i - e_j).  With ``refine`` each lattice maximum
    is polished by ``refine_maximum`` and coincident limits are merged
    (default tolerance 1e-3 x hull diameter).
    """
    if lattice is None:
        lattice = build_lattice(ctx.array, grid)
    J = profit_many(ctx, lattice.points)
    grad = concentrated_gradient_many(ctx, lattice.points) if with_gradient else None
    census = _census_from_values(lattice, J, grad)
    if not refine:
        return census
    if merge_tolerance is None:
        merge_tolerance = 1e-3 * ctx.array.diameter
    limits = np.array([refine_maximum(ctx, p) for p in census.lattice_maxima])
    merged = _merge(limits, merge_tolerance)
    values = np.array([profit(ctx, p) for p in merged])
    order = np.argsort(-values, kind="stable")
    census.local_maxima = merged[order]
    census.local_maxima_count = int(merged.shape[0])
    census.global_argmax = merged[order[0]].copy()
    census.global_max = float(values[order[0]])
    census.refined = True
    return census


def central_difference(f, y, step):
    """Central-difference gradient of scalar ``f`` at ``y``."""
    y = np.asarray(y, dtype=np.float64)
    g = np.empty_like(y)
    for k in range(y.shape[0]):
        e = np.zeros_like(y)
        e[k] = step
        g[k] = (f(y + e) - f(y - e)) / (2.0 * step)
    return g


def finite_difference_gradient(ctx, y, A, step):
    """Central differences of L(A, .) at ``y`` with intensity held fixed."""
    y = as_point(y, ctx.array.dim)
    reach = np.linalg.norm(ctx.array.sensors - y, axis=1).min() - step
    if reach <= ctx.array.guard_radius:
        raise SingularityError("finite-difference stencil reaches a sensor guard radius")
    return central_difference(lambda p: log_likelihood(ctx, A, p), y, step)


@dataclass
class TrialResult:
    trial: int
    dim: int
    seed: int
    spawn_key: list
    sensors: list
    source: list
    attenuation: float
    local_maxima_count: int
    lattice_maxima_count: int
    argmax_error: float
    lattice_argmax_error: float
    lattice_spacing: float
    stationary_count: int
    passed: bool


@dataclass
class UniquenessReport:
    resolution: int
    margin: float
    trials: list = field(default_factory=list)

    @property
    def passed(self):
        return all(t.passed for t in self.trials)

    @property
    def max_local_maxima(self):
        return max((t.local_maxima_count for t in self.trials), default=0)

    @property
    def violations(self):
        return [t for t in self.trials if not t.passed]

    def to_dict(self):
        return {
            "resolution": self.resolution,
            "margin": self.margin,
            "passed": self.passed,
            "trials_run": len(self.trials),
            "max_local_maxima": self.max_local_maxima,
            "violations": [asdict(t) for t in self.violations],
            "trials": [asdict(t) for t in self.trials],
        }


def random_source(array, rng, intensity=5e7, attenuation_range=(0.0, 0.01), min_weight=0.05):
    """Interior source whose barycentric weights all exceed ``min_weight``."""
    n = array.dim + 1
    while True:
        w = rng.dirichlet(np.ones(n))
        if w.min() >= min_weight:
            break
    alpha = rng.uniform(*attenuation_range)
    return SourceParams(w @ array.sensors, intensity, alpha)


def check_configuration(array, source, grid, lattice=None):
    """Census of the noise-free objective for one (array, source) pair."""
    ctx = LikelihoodContext(array, source.attenuation, noise_free_measurement(source, array))
    census = grid_argmax(ctx, grid, lattice=lattice)
    err = float(np.linalg.norm(census.global_argmax - source.location))
    return census, err


def _check_trial(args):
    t, key, seed, grid, arr, src = args
    census, err = check_configuration(arr, src, grid)
    return TrialResult(
        trial=t,
        dim=arr.dim,
        seed=int(seed),
        spawn_key=key,
        sensors=arr.sensors.tolist(),
        source=src.location.tolist(),
        attenuation=src.attenuation,
        local_maxima_count=census.local_maxima_count,
        lattice_maxima_count=census.lattice_maxima_count,
        argmax_error=err,
        lattice_argmax_error=float(np.linalg.norm(census.lattice_argmax - src.location)),
        lattice_spacing=census.lattice_spacing,
        stationary_count=int(census.stationary_points.shape[0]),
        passed=census.local_maxima_count == 1 and err <= census.lattice_spacing,
    )


def verify_uniqueness(dim, grid, trials, seed=0, array=None, source=None, jobs=1):
    """Randomized sweep of noise-free configurations in ``dim`` dimensions.

    Trial t draws a well-shaped array and an interior source from the
    generator seeded by SeedSequence(seed, spawn_key=(dim, t)).  If ``array``
    and ``source`` are given they are checked first as trial -1.  A trial
    passes when the census finds exactly one local maximum and it lies within
    one lattice spacing of the source.  ``jobs`` > 1 spreads trials over
    worker processes without changing the report.
    """
    report = UniquenessReport(resolution=int(grid.resolution), margin=float(grid.margin))
    configs = []
    if array is not None:
        if source is None:
            raise ContractError("a fixed array needs a source")
        source.check_against(array)
        if not geometry.contains_open(array, source.location):
            raise ContractError("source must lie in the open hull of the array")
        configs.append((-1, [], int(seed), grid, array, source))
    for t in range(int(trials)):
        key = [int(dim), t]
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
        arr = geometry.random_array(dim, rng)
        configs.append((t, key, int(seed), grid, arr, random_source(arr, rng)))
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            report.trials.extend(pool.map(_check_trial, configs, chunksize=max(1, len(configs) // (4 * jobs))))
    else:
        report.trials.extend(_check_trial(c) for c in configs)
    return report
