"""Projection-augmented gradient ascent on the concentrated likelihood.

Each iteration evaluates J and its gradient at the current point (after
drawing a fresh measurement when resampling), then steps uphill either by a
fixed multiple of the gradient or by a backtracking (Armijo) line search.  A
candidate that leaves the open hull is discarded and replaced by a fresh
flat-Dirichlet interior point.
"""

import csv
import enum
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from radloc import geometry
from radloc._backend import get_kernel
from radloc.errors import ContractError
from radloc.geometry import HULL_EPS, SensorArray, as_point
from radloc.likelihood import LikelihoodContext
from radloc.model import Measurement, NoiseParams, SourceParams, measurement_means


class TerminationReason(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    DEGENERATE_MEASUREMENT = "degenerate_measurement"


_REASONS = {
    0: TerminationReason.CONVERGED,
    1: TerminationReason.MAX_ITERATIONS,
    2: TerminationReason.DEGENERATE_MEASUREMENT,
}


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning of one ascent run.

    ``step_size=None`` selects the backtracking line search (initial
    displacement ``initial_step_fraction`` x hull diameter, shrink factor
    ``backtrack``, sufficient-increase constant ``armijo``); a positive
    value runs plain fixed-step ascent y <- y + step_size * grad J.  When
    measurements are redrawn every iteration the initial displacement of
    update k shrinks by (k + 1)**-gain_exponent.

    The run stops when |grad J| * diameter < gradient_tolerance * |J|, when
    an accepted step moves less than step_tolerance * diameter, or after
    ``max_iterations`` updates.
    """

    step_size: float | None = None
    max_iterations: int = 500
    gradient_tolerance: float = 1e-10
    step_tolerance: float = 1e-9
    resample_each_iteration: bool = True
    seed: int = 0
    initial_step_fraction: float = 0.1
    gain_exponent: float = 0.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    report: str = "final"

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ContractError("step_size must be positive (or None for line search)")
        if int(self.max_iterations) < 1:
            raise ContractError("max_iterations must be at least 1")
        if self.gradient_tolerance < 0 or self.step_tolerance < 0:
            raise ContractError("tolerances must be nonnegative")
        if not 0 < self.backtrack < 1:
            raise ContractError("backtrack factor must lie in (0, 1)")
        if not 0 <= self.armijo < 1:
            raise ContractError("armijo constant must lie in [0, 1)")
        if not self.initial_step_fraction > 0:
            raise ContractError("initial_step_fraction must be positive")
        if not 0 <= self.gain_exponent <= 1:
            raise ContractError("gain_exponent must lie in [0, 1]")
        if self.report not in ("final", "best"):
            raise ContractError("report must be 'final' or 'best'")
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must be an unsigned 64-bit integer")

    @property
    def adaptive_step(self):
        return self.step_size is None

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class MeasurementStream:
    """Measurements drawn live from the model: count_i ~ Poisson(lambda_i + w_i)."""

    source: SourceParams
    array: SensorArray
    noise: NoiseParams

    def __post_init__(self):
        object.__setattr__(self, "_means", measurement_means(self.source, self.array, self.noise))

    @property
    def means(self):
        return self._means

    @property
    def attenuation(self):
        return self.source.attenuation


class Iterate(NamedTuple):
    k: int
    y: np.ndarray
    profit: float
    grad_norm: float
    escaped: bool


@dataclass(frozen=True, eq=False)
class EstimateTrace:
    """Full iterate history of one ascent run.

    Row k holds y[k], J(y[k]), A_hat(y[k]) and |grad J(y[k])| under the
    measurement in force at iteration k; ``escaped[k]`` marks iterates that
    replaced a candidate which left the hull.  Row 0 is the start point.
    """

    positions: np.ndarray
    profit: np.ndarray
    intensity: np.ndarray
    grad_norm: np.ndarray
    escaped: np.ndarray
    termination_reason: TerminationReason
    final_estimate: np.ndarray
    final_intensity: float

    @property
    def updates(self):
        return self.positions.shape[0] - 1

    @property
    def escape_count(self):
        return int(self.escaped.sum())

    @property
    def iterates(self):
        return [
            Iterate(k, self.positions[k], float(self.profit[k]), float(self.grad_norm[k]), bool(self.escaped[k]))
            for k in range(self.positions.shape[0])
        ]

    def write_csv(self, fh):
        dim = self.positions.shape[1]
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k"] + [f"y{j}" for j in range(dim)] + ["J", "grad_norm", "escaped"])
        for k in range(self.positions.shape[0]):
            writer.writerow(
                [k]
                + [repr(float(v)) for v in self.positions[k]]
                + [repr(float(self.profit[k])), repr(float(self.grad_norm[k])), int(self.escaped[k])]
            )

    def to_csv(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def read_trace_csv(fh):
    """Parse a trace CSV into (k, positions, J, grad_norm, escaped) arrays."""
    rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    dim = sum(1 for h in header if h.startswith("y"))
    data = np.array([[float(v) for v in r] for r in body]).reshape(-1, len(header))
    return (
        data[:, 0].astype(int),
        data[:, 1 : 1 + dim],
        data[:, 1 + dim],
        data[:, 2 + dim],
        data[:, 3 + dim].astype(bool),
    )


def project_if_escaped(array, candidate, rng):
    """Return (candidate, False) if inside the open hull, else a fresh interior point and True."""
    candidate = as_point(candidate, array.dim)
    if geometry.barycentric_many(array, candidate)[0].min() > HULL_EPS:
        return candidate, False
    return geometry.sample_interior(array, rng), True


def ascend(provider, config, y0, rng=None, backend=None):
    """Run projection-augmented gradient ascent from ``y0``.

    ``provider`` is either a LikelihoodContext (one fixed measurement) or a
    MeasurementStream (counts drawn from the model; redrawn before every
    gradient evaluation when ``config.resample_each_iteration``).  ``rng`` is
    consumed by measurement draws and hull re-projections; it defaults to a
    generator seeded with ``config.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if not isinstance(provider, (LikelihoodContext, MeasurementStream)):
        raise TypeError(f"unsupported measurement provider {type(provider).__name__}")
    array = provider.array
    y0 = as_point(y0, array.dim)
    if not geometry.contains_open(array, y0):
        raise ContractError(f"start point {y0} is not in the open hull of the sensors")
    if np.any(np.linalg.norm(array.sensors - y0, axis=1) <= array.guard_radius):
        raise ContractError("start point is within the guard radius of a sensor")

    if isinstance(provider, LikelihoodContext):
        if config.resample_each_iteration:
            raise ContractError(
                "a fixed measurement cannot be resampled; set resample_each_iteration=False"
            )
        counts = np.ascontiguousarray(provider.counts)
        means = None
    elif isinstance(provider, MeasurementStream):
        counts = None
        means = provider.means

    kern = get_kernel(backend)
    ys, Js, As, gns, escs, code = kern.ascend(
        array.sensors,
        array.edge_inverse,
        float(provider.attenuation),
        counts,
        means,
        bool(config.resample_each_iteration),
        float(config.step_size or 0.0),
        float(config.initial_step_fraction),
        float(config.gain_exponent),
        float(config.armijo),
        float(config.backtrack),
        int(config.max_backtracks),
        int(config.max_iterations),
        float(config.gradient_tolerance),
        float(config.step_tolerance),
        float(array.diameter),
        float(array.guard_radius),
        HULL_EPS,
        np.ascontiguousarray(y0),
        rng,
    )
    escs = escs.astype(bool)
    pick = ys.shape[0] - 1
    if config.report == "best" and np.any(np.isfinite(Js)):
        pick = int(np.nanargmax(Js))
    return EstimateTrace(
        positions=ys,
        profit=Js,
        intensity=As,
        grad_norm=gns,
        escaped=escs,
        termination_reason=_REASONS[code],
        final_estimate=ys[pick].copy(),
        final_intensity=float(As[pick]),
    )


def estimate_once(source, array, noise, config, rng=None, backend=None):
    """One Monte-Carlo run: random interior start, live measurements, ascent."""
    source.check_against(array)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    y0 = geometry.sample_interior(array, rng)
    stream = MeasurementStream(source, array, noise)
    return ascend(stream, config, y0, rng=rng, backend=backend)


def estimate_from_measurement(array, attenuation, measurement, config, y0=None, rng=None, backend=None):
    """Localize from one observed measurement (no resampling)."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    ctx = LikelihoodContext(array, attenuation, measurement if isinstance(measurement, Measurement) else Measurement(measurement))
    if y0 is None:
        y0 = geometry.sample_interior(array, rng)
    return ascend(ctx, config.replace(resample_each_iteration=False), y0, rng=rng, backend=backend)
