"""Simplex geometry for an array of N+1 sensors in R^N (N = 1, 2, 3).

Points are plain 1-D float64 numpy arrays.  Hull membership is judged on
barycentric weights: a point is in the *open* hull when every weight exceeds
``HULL_EPS``.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from radloc._backend import kernel
from radloc.errors import ContractError, DegenerateArrayError

# minimum barycentric weight for open-hull membership
HULL_EPS = 1e-9
# |det(edges)| / scale**N below this rejects an array as degenerate
DEGENERACY_TOL = 1e-9
# evaluations closer than this fraction of the diameter to a sensor are singular
GUARD_FRACTION = 1e-6


def as_point(p, dim=None):
    """Validate and convert ``p`` to a finite float64 vector."""
    arr = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if arr.ndim != 1 or not 1 <= arr.shape[0] <= 3:
        raise ContractError(f"point must have 1 to 3 coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"point has non-finite coordinates: {arr}")
    if dim is not None and arr.shape[0] != dim:
        raise ContractError(f"point has dimension {arr.shape[0]}, expected {dim}")
    return arr


@dataclass(frozen=True, eq=False)
class SensorArray:
    """N+1 sensor positions spanning a non-degenerate simplex in R^N."""

    sensors: np.ndarray
    dim: int = field(init=False)
    diameter: float = field(init=False, repr=False)
    # inverse of the edge matrix [x_1 - x_{N+1}, ..., x_N - x_{N+1}]
    edge_inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.array(self.sensors, dtype=np.float64, ndmin=2)
        if X.ndim != 2:
            raise ContractError("sensors must be a list of points")
        if X.shape[0] == 1 and X.shape[1] == 2:
            # a bare 1-D pair such as [0, 1]
            X = X.T
        n, dim = X.shape
        if not 1 <= dim <= 3:
            raise ContractError(f"dimension must be 1, 2 or 3, got {dim}")
        if n != dim + 1:
            raise ContractError(f"need exactly {dim + 1} sensors in R^{dim}, got {n}")
        if not np.all(np.isfinite(X)):
            raise ContractError("sensor coordinates must be finite")
        edges = (X[:-1] - X[-1]).T
        diameter = max(float(np.linalg.norm(a - b)) for a, b in combinations(X, 2))
        if diameter == 0.0 or abs(np.linalg.det(edges)) <= DEGENERACY_TOL * diameter**dim:
            raise DegenerateArrayError(
                f"sensors lie on a {dim - 1}-dimensional hyperplane; "
                f"{dim + 1} affinely independent positions are required"
            )
        X.setflags(write=False)
        inv = np.ascontiguousarray(np.linalg.inv(edges))
        inv.setflags(write=False)
        object.__setattr__(self, "sensors", np.ascontiguousarray(X))
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "diameter", diameter)
        object.__setattr__(self, "edge_inverse", inv)

    def __len__(self):
        return self.sensors.shape[0]

    @property
    def guard_radius(self):
        return GUARD_FRACTION * self.diameter

    @property
    def centroid(self):
        return self.sensors.mean(axis=0)

    def __eq__(self, other):
        if not isinstance(other, SensorArray):
            return NotImplemented
        return np.array_equal(self.sensors, other.sensors)

    def __hash__(self):
        return hash(self.sensors.tobytes())


def barycentric(array, p):
    """Barycentric weights of ``p`` with respect to the sensor simplex.

    Solves the N x N edge system with the last sensor as base vertex; the
    weights sum to one.  Points outside the hull get negative weights.
    """
    p = as_point(p, array.dim)
    X = array.sensors
    edges = (X[:-1] - X[-1]).T
    head = np.linalg.solve(edges, p - X[-1])
    return np.append(head, 1.0 - head.sum())


def barycentric_many(array, points):
    """Vectorized ``barycentric`` for an (m, N) block of points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, array.dim)
    head = (pts - array.sensors[-1]) @ array.edge_inverse.T
    return np.column_stack([head, 1.0 - head.sum(axis=1)])


def from_barycentric(array, weights):
    return np.asarray(weights, dtype=np.float64) @ array.sensors


def contains_open(array, p):
    """True iff ``p`` lies in the open convex hull of the sensors."""
    return bool(barycentric(array, p).min() > HULL_EPS)


def sample_interior(array, rng):
    """Random open-hull point with flat-Dirichlet barycentric weights.

    Draws are rejected when a weight falls below ``HULL_EPS`` or the point is
    inside the sensor guard radius.
    """
    return kernel.sample_interior(
        rng, array.sensors, array.edge_inverse, HULL_EPS, array.guard_radius
    )


def halfspace_margin(y, y_star, eta):
    """Both forms of the bisector test for ``eta``; (quadratic, linear).

    quadratic = |eta - y*|^2 - |eta - y|^2, linear = 2 eta.(y - y*) - y.y + y*.y*.
    The two are algebraically identical; ``eta`` is at least as close to ``y``
    as to ``y*`` iff they are >= 0.
    """
    y, y_star, eta = (np.asarray(v, dtype=np.float64) for v in (y, y_star, eta))
    quad = float(np.sum((eta - y_star) ** 2) - np.sum((eta - y) ** 2))
    lin = float(2.0 * eta @ (y - y_star) - y @ y + y_star @ y_star)
    return quad, lin


def halfspace_closer(y, y_star, eta, strict=False):
    """Is ``eta`` closer to ``y`` than to ``y_star``?

    The non-strict form (default) includes the bisecting hyperplane.
    """
    y = as_point(y)
    y_star = as_point(y_star, y.shape[0])
    eta = as_point(eta, y.shape[0])
    if np.array_equal(y, y_star):
        raise ContractError("y and y_star must differ")
    d_y = np.linalg.norm(eta - y)
    d_star = np.linalg.norm(eta - y_star)
    return bool(d_y < d_star) if strict else bool(d_y <= d_star)


def count_closer(array, y, y_star):
    """Number of sensors strictly closer to ``y`` than to ``y_star``."""
    y = as_point(y, array.dim)
    y_star = as_point(y_star, array.dim)
    d_y = np.linalg.norm(array.sensors - y, axis=1)
    d_star = np.linalg.norm(array.sensors - y_star, axis=1)
    return int(np.sum(d_y < d_star))


def closer_pair_exists(array, y, y_star):
    """Does the bisector of (y, y_star) separate the sensors?

    True when some sensor x_i is strictly closer to ``y`` and some x_j is
    strictly closer to ``y_star``.  For ``y`` and ``y_star`` both in the open
    hull this always holds, which is what rules out every sensor being
    farther from a spurious stationary point than from the source.
    """
    y = as_point(y, array.dim)
    y_star = as_point(y_star, array.dim)
    if np.array_equal(y, y_star):
        raise ContractError("y and y_star must differ")
    d_y = np.linalg.norm(array.sensors - y, axis=1)
    d_star = np.linalg.norm(array.sensors - y_star, axis=1)
    return bool(np.any(d_y < d_star) and np.any(d_star < d_y))


def random_array(dim, rng, scale=200.0, min_quality=0.2, max_tries=10_000):
    """Random well-shaped sensor simplex with vertices in [0, scale]^dim.

    Quality is the simplex volume relative to a regular simplex of the same
    diameter; slivers below ``min_quality`` are redrawn.
    """
    from math import factorial, sqrt

    for _ in range(max_tries):
        X = rng.uniform(0.0, scale, size=(dim + 1, dim))
        try:
            arr = SensorArray(X)
        except DegenerateArrayError:
            continue
        vol = abs(np.linalg.det((X[:-1] - X[-1]).T)) / factorial(dim)
        regular = arr.diameter**dim * sqrt(dim + 1) / (factorial(dim) * 2 ** (dim / 2))
        if vol / regular >= min_quality:
            return arr
    raise RuntimeError("could not draw a well-shaped simplex")
