"""Monte-Carlo experiments: RMSE against SNR, RMSE against iteration, mean
estimates and hull-escape rates.

Run r at SNR point p uses the generator
``Generator(PCG64(SeedSequence(master_seed, spawn_key=(p, r))))``, so every
run is reproducible on its own and results do not depend on how runs are
spread over worker processes.
"""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from radloc.errors import ContractError, RadlocError
from radloc.estimator import EstimatorConfig, TerminationReason, estimate_once
from radloc.geometry import SensorArray, contains_open
from radloc.model import NoiseParams, SourceParams, signal_sum

log = logging.getLogger(__name__)

DEFAULT_SNR_GRID = tuple(float(v) for v in range(-10, 21, 3))
# an experiment point is rejected when more runs than this fail
MAX_FAILURE_FRACTION = 0.01


class ExperimentError(RadlocError):
    pass


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    name: str
    array: SensorArray
    source: SourceParams
    snr_points: tuple = DEFAULT_SNR_GRID
    runs_per_point: int = 1000
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    master_seed: int = 0
    curve_snr_db: float | None = 16.5

    def __post_init__(self):
        if int(self.runs_per_point) < 1:
            raise ContractError("runs_per_point must be at least 1")
        if len(self.snr_points) == 0:
            raise ContractError("snr_points must not be empty")
        if not all(math.isfinite(v) for v in self.snr_points):
            raise ContractError("snr_points must be finite")
        object.__setattr__(self, "snr_points", tuple(float(v) for v in self.snr_points))
        self.source.check_against(self.array)
        if not contains_open(self.array, self.source.location):
            raise ContractError("the source must lie in the open hull of the sensors")

    @property
    def dim(self):
        return self.array.dim


@dataclass
class PointResult:
    snr_db: float
    rmse: float
    mean_estimate: list
    escape_fraction: float
    runs: int
    failures: int
    background_per_sensor: float


@dataclass
class ExperimentResult:
    name: str
    points: list
    curve_snr_db: float | None = None
    curve: list = field(default_factory=list)

    def to_dict(self):
        return {
            "name": self.name,
            "points": [asdict(p) for p in self.points],
            "curve_snr_db": self.curve_snr_db,
            "curve": [[int(k), float(v), float(e)] for k, v, e in self.curve],
        }

    def write_json(self, fh):
        json.dump(self.to_dict(), fh, indent=2)
        fh.write("\n")

    def write_points_csv(self, fh):
        dim = len(self.points[0].mean_estimate) if self.points else 0
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["snr_db", "rmse"]
            + [f"mean_y{j}" for j in range(dim)]
            + ["escape_fraction", "runs", "failures", "background_per_sensor"]
        )
        for p in self.points:
            writer.writerow(
                [repr(p.snr_db), repr(p.rmse)]
                + [repr(v) for v in p.mean_estimate]
                + [repr(p.escape_fraction), p.runs, p.failures, repr(p.background_per_sensor)]
            )

    def write_curve_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "rmse", "stderr"])
        for k, v, e in self.curve:
            writer.writerow([int(k), repr(float(v)), repr(float(e))])


def solve_noise_for_snr(array, source, target_db):
    """Homogeneous background giving the requested SNR.

    sum_i w_i = (total noise-free rate) * 10**(-target_db / 10), split evenly.
    """
    if not math.isfinite(target_db):
        raise ContractError("target SNR must be finite")
    total = signal_sum(source, array) * 10.0 ** (-target_db / 10.0)
    return NoiseParams.homogeneous(total / len(array), len(array))


def run_seed(master_seed, point_index, run_index):
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(point_index), int(run_index)))


@dataclass
class _Batch:
    finals: np.ndarray
    escapes: int
    updates: int
    failed: np.ndarray
    paths: np.ndarray | None


def _run_batch(spec, point_index, noise, runs, keep_paths):
    dim = spec.dim
    K = spec.estimator.max_iterations
    finals = np.empty((len(runs), dim))
    failed = np.zeros(len(runs), dtype=bool)
    paths = np.empty((len(runs), K + 1, dim)) if keep_paths else None
    escapes = 0
    updates = 0
    for i, r in enumerate(runs):
        rng = np.random.Generator(np.random.PCG64(run_seed(spec.master_seed, point_index, r)))
        trace = estimate_once(spec.source, spec.array, noise, spec.estimator, rng=rng)
        finals[i] = trace.final_estimate
        failed[i] = trace.termination_reason is TerminationReason.DEGENERATE_MEASUREMENT
        escapes += trace.escape_count
        updates += trace.updates
        if keep_paths:
            n = trace.positions.shape[0]
            paths[i, :n] = trace.positions
            # runs that stopped early hold their final iterate
            paths[i, n:] = trace.positions[-1]
    return _Batch(finals, escapes, updates, failed, paths)


def _run_batch_args(args):
    return _run_batch(*args)


def _run_point(spec, point_index, noise, keep_paths=False, jobs=1):
    runs = list(range(int(spec.runs_per_point)))
    if jobs <= 1 or len(runs) < 2:
        batches = [_run_batch(spec, point_index, noise, runs, keep_paths)]
    else:
        chunk = max(1, math.ceil(len(runs) / (4 * jobs)))
        parts = [runs[i : i + chunk] for i in range(0, len(runs), chunk)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(
                pool.map(_run_batch_args, [(spec, point_index, noise, p, keep_paths) for p in parts])
            )
    finals = np.concatenate([b.finals for b in batches])
    failed = np.concatenate([b.failed for b in batches])
    paths = np.concatenate([b.paths for b in batches]) if keep_paths else None
    escapes = sum(b.escapes for b in batches)
    updates = sum(b.updates for b in batches)
    return finals, failed, escapes, updates, paths


def _summarize(spec, snr, noise, finals, failed, escapes, updates):
    ok = ~failed
    n_fail = int(failed.sum())
    if n_fail > MAX_FAILURE_FRACTION * failed.shape[0]:
        raise ExperimentError(
            f"{n_fail} of {failed.shape[0]} runs at {snr} dB hit degenerate measurements"
        )
    good = finals[ok]
    err2 = np.sum((good - spec.source.location) ** 2, axis=1)
    return PointResult(
        snr_db=float(snr),
        rmse=float(np.sqrt(err2.mean())),
        mean_estimate=[float(v) for v in good.mean(axis=0)],
        escape_fraction=float(escapes / updates) if updates else 0.0,
        runs=int(ok.sum()),
        failures=n_fail,
        background_per_sensor=float(noise.background_means[0]),
    )


def rmse_by_iteration(paths, truth):
    """RMSE across runs at every iteration index, with its standard error.

    ``paths`` is (runs, K+1, N).  The standard error comes from the delta
    method, sd(e^2) / (2 rmse sqrt(runs)); it is zero for a single run.
    """
    err2 = np.sum((paths - np.asarray(truth)) ** 2, axis=2)
    rmse = np.sqrt(err2.mean(axis=0))
    n = err2.shape[0]
    if n < 2:
        return rmse, np.zeros_like(rmse)
    with np.errstate(invalid="ignore", divide="ignore"):
        se = err2.std(axis=0, ddof=1) / (2.0 * rmse * np.sqrt(n))
    return rmse, np.where(rmse > 0, se, 0.0)


def run_experiment(spec, jobs=1):
    """Execute every SNR point of ``spec`` plus the designated convergence curve."""
    points = []
    curve = []
    curve_idx = None
    if spec.curve_snr_db is not None and spec.curve_snr_db in spec.snr_points:
        curve_idx = spec.snr_points.index(spec.curve_snr_db)
    for p, snr in enumerate(spec.snr_points):
        noise = solve_noise_for_snr(spec.array, spec.source, snr)
        keep = p == curve_idx
        finals, failed, escapes, updates, paths = _run_point(spec, p, noise, keep, jobs)
        points.append(_summarize(spec, snr, noise, finals, failed, escapes, updates))
        log.debug("%s: %.1f dB rmse=%.4g escapes=%d/%d", spec.name, snr, points[-1].rmse, escapes, updates)
        if keep:
            curve = _curve_from_paths(paths[~failed], spec.source.location)
    if spec.curve_snr_db is not None and curve_idx is None:
        curve = convergence_curve(spec, spec.curve_snr_db, jobs=jobs)
    return ExperimentResult(spec.name, points, spec.curve_snr_db, curve)


def _curve_from_paths(paths, truth):
    rmse, se = rmse_by_iteration(paths, truth)
    return [(k, float(v), float(e)) for k, (v, e) in enumerate(zip(rmse, se))]


def convergence_curve(spec, snr_db_value, jobs=1):
    """(k, rmse_k, stderr_k) for k = 0 .. max_iterations at one SNR.

    Uses the seeds of the matching SNR point when it is on the grid, else
    point index len(snr_points).
    """
    if snr_db_value in spec.snr_points:
        p = spec.snr_points.index(snr_db_value)
    else:
        p = len(spec.snr_points)
    noise = solve_noise_for_snr(spec.array, spec.source, snr_db_value)
    _, failed, _, _, paths = _run_point(spec, p, noise, True, jobs)
    return _curve_from_paths(paths[~failed], spec.source.location)


def windowed_medians(values, window=50):
    """Medians of consecutive ``window``-long blocks (a short tail block is kept)."""
    values = np.asarray(values, dtype=np.float64)
    return np.array([np.median(values[i : i + window]) for i in range(0, values.shape[0], window)])


def spearman(x, y):
    """Spearman rank correlation (average ranks for ties)."""
    from scipy.stats import spearmanr

    return float(spearmanr(x, y)[0])
