"""Command-line interface.

    radloc simulate      --config sim.json  --out DIR   -> measurement.json
    radloc estimate      --config est.json  --out DIR   -> trace.csv, summary.json
    radloc experiment    --config exp.json  --out DIR   -> results.json, rmse_vs_snr.csv, convergence.csv
    radloc verify-unique --config uniq.json --out DIR   -> uniqueness.json

Exit status: 0 on success, 1 when a verification or run fails, 2 for
usage and configuration errors.  Configuration messages have the form
``path:line: field: problem``.
"""

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from radloc import __version__
from radloc.errors import RadlocError
from radloc.estimator import EstimatorConfig, MeasurementStream, ascend
from radloc.geometry import SensorArray, contains_open, sample_interior
from radloc.harness import ExperimentSpec, run_experiment, solve_noise_for_snr
from radloc.likelihood import LikelihoodContext
from radloc.model import (
    Measurement,
    NoiseParams,
    SourceParams,
    measurement_means,
    mean_rates,
    noise_free_measurement,
    sample_measurement,
    snr_db,
)
from radloc.oracle import GridSpec, verify_uniqueness

log = logging.getLogger("radloc")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

DEFAULT_RESOLUTION = {1: 10_000, 2: 150, 3: 60}
DEFAULT_TRIALS = {1: 100, 2: 100, 3: 50}


class ConfigError(Exception):
    """A configuration problem, already formatted for the user."""


# --- config loading -------------------------------------------------------


def load_schema(kind):
    text = resources.files("radloc").joinpath("schemas", f"{kind}.schema.json").read_text()
    return json.loads(text)


def _skip_ws(text, i):
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i


def locate(text, path):
    """Character offset of the value at ``path`` inside JSON ``text``.

    Walks as far down the path as the document goes, so a missing key
    resolves to the object that should have held it.
    """
    dec = json.JSONDecoder()
    pos = _skip_ws(text, 0)
    for part in path:
        if pos >= len(text):
            break
        if text[pos] == "{":
            i = _skip_ws(text, pos + 1)
            found = None
            while i < len(text) and text[i] != "}":
                key, i = dec.raw_decode(text, i)
                i = _skip_ws(text, _skip_ws(text, i) + 1)  # past ':'
                if key == part:
                    found = i
                    break
                _, i = dec.raw_decode(text, i)
                i = _skip_ws(text, i)
                if text[i] == ",":
                    i = _skip_ws(text, i + 1)
            if found is None:
                break
            pos = found
        elif text[pos] == "[" and isinstance(part, int):
            i = _skip_ws(text, pos + 1)
            idx = 0
            found = None
            while i < len(text) and text[i] != "]":
                if idx == part:
                    found = i
                    break
                _, i = dec.raw_decode(text, i)
                i = _skip_ws(text, i)
                if text[i] == ",":
                    i = _skip_ws(text, i + 1)
                idx += 1
            if found is None:
                break
            pos = found
        else:
            break
    return pos


def line_of(text, path):
    return text.count("\n", 0, locate(text, list(path))) + 1


class Config:
    """A parsed config document that can point back into its source text."""

    def __init__(self, path, text, data):
        self.path = Path(path)
        self.text = text
        self.data = data

    def error(self, field, message):
        path = [field] if isinstance(field, (str, int)) else list(field)
        line = line_of(self.text, path)
        name = ".".join(str(p) for p in path) or "<root>"
        return ConfigError(f"{self.path}:{line}: {name}: {message}")

    def get(self, key, default=None):
        return self.data.get(key, default)

    def __contains__(self, key):
        return key in self.data


def load_config(path, kind):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: <json>: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(load_schema(kind))
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        cfg = Config(path, text, data)
        field = list(err.absolute_path)
        msg = err.message
        if err.validator == "required" and isinstance(err.validator_value, list):
            missing = [k for k in err.validator_value if k not in err.instance]
            if missing:
                field = field + [missing[0]]
                msg = "required field is missing"
        raise cfg.error(field, msg)
    return Config(path, text, data)


# --- builders from validated configs ----------------------------------------


def _guard(cfg, field, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except RadlocError as exc:
        raise cfg.error(field, str(exc)) from None


def build_array(cfg, key="sensors"):
    return _guard(cfg, key, SensorArray, cfg.get(key))


def build_source(cfg, array, key="source"):
    s = cfg.get(key)
    src = _guard(cfg, key, SourceParams, s["location"], s["intensity"], s["attenuation"])
    _guard(cfg, [key, "location"], src.check_against, array)
    if not contains_open(array, src.location):
        raise cfg.error([key, "location"], "source must lie strictly inside the convex hull of the sensors")
    return src


def build_noise(cfg, array, source, key="noise"):
    spec = cfg.get(key)
    if spec is None:
        return NoiseParams.none(len(array))
    if ("background" in spec) == ("snr_db" in spec):
        raise cfg.error(key, "give exactly one of 'background' or 'snr_db'")
    if "snr_db" in spec:
        return solve_noise_for_snr(array, source, float(spec["snr_db"]))
    w = spec["background"]
    if isinstance(w, list):
        if len(w) != len(array):
            raise cfg.error([key, "background"], f"{len(w)} background means for {len(array)} sensors")
        return NoiseParams(w)
    return NoiseParams.homogeneous(w, len(array))


def build_estimator(cfg, seed, key="estimator"):
    kwargs = dict(cfg.get(key) or {})
    kwargs["seed"] = seed
    return _guard(cfg, key, EstimatorConfig, **kwargs)


def resolve_seed(args, cfg, key="seed"):
    if args.seed is not None:
        return args.seed
    return int(cfg.get(key, 0))


# --- output helpers -------------------------------------------------------


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _floats(a):
    return [float(v) for v in np.atleast_1d(a)]


def _source_dict(src):
    return {"location": _floats(src.location), "intensity": src.intensity, "attenuation": src.attenuation}


# --- subcommands ------------------------------------------------------------


def cmd_simulate(args, out):
    cfg = load_config(args.config, "simulate")
    seed = resolve_seed(args, cfg)
    array = build_array(cfg)
    source = build_source(cfg, array)
    noise = build_noise(cfg, array, source)
    rng = np.random.default_rng(seed)
    meas = _guard(cfg, "noise", sample_measurement, source, array, noise, rng)
    doc = {
        "format": "radloc.measurement/1",
        "seed": seed,
        "dim": array.dim,
        "sensors": array.sensors.tolist(),
        "attenuation": source.attenuation,
    }
    if cfg.get("echo_source", True):
        doc["source"] = _source_dict(source)
    doc["background_means"] = _floats(noise.background_means)
    doc["snr_db"] = snr_db(source, array, noise) if noise.total > 0 else None
    doc["noise_free_means"] = _floats(mean_rates(source, array))
    doc["means"] = _floats(measurement_means(source, array, noise))
    doc["counts"] = meas.tolist()
    write_json(out / "measurement.json", doc)
    log.info("counts %s", doc["counts"])
    return EXIT_OK


def _measurement_from_file(cfg):
    rel = Path(cfg.get("measurement_file"))
    path = rel if rel.is_absolute() else cfg.path.parent / rel
    try:
        doc = json.loads(path.read_text())
        return doc["counts"], doc.get("attenuation")
    except (OSError, ValueError, KeyError) as exc:
        raise cfg.error("measurement_file", f"cannot read counts from {path}: {exc}") from None


def cmd_estimate(args, out):
    cfg = load_config(args.config, "estimate")
    seed = resolve_seed(args, cfg)
    modes = [k for k in ("measurement", "measurement_file", "source") if k in cfg]
    if len(modes) != 1:
        raise cfg.error(modes[1] if len(modes) > 1 else [], "give exactly one of 'measurement', 'measurement_file' or 'source'")
    array = build_array(cfg)
    config = build_estimator(cfg, seed)
    rng = np.random.default_rng(seed)

    if "source" in cfg:
        source = build_source(cfg, array)
        if cfg.get("noise_free", False):
            if "noise" in cfg:
                raise cfg.error("noise", "noise cannot be combined with noise_free")
            provider = LikelihoodContext(array, source.attenuation, noise_free_measurement(source, array))
            config = config.replace(resample_each_iteration=False)
        else:
            noise = build_noise(cfg, array, source)
            provider = _guard(cfg, "noise", MeasurementStream, source, array, noise)
    else:
        if "noise" in cfg or "noise_free" in cfg:
            raise cfg.error("noise" if "noise" in cfg else "noise_free", "only meaningful together with 'source'")
        if "measurement" in cfg:
            counts, alpha = cfg.get("measurement")["counts"], cfg.get("attenuation")
            field = ["measurement", "counts"]
        else:
            counts, alpha = _measurement_from_file(cfg)
            alpha = cfg.get("attenuation", alpha)
            field = "measurement_file"
        if alpha is None:
            raise cfg.error("attenuation", "required field is missing")
        if len(counts) != len(array):
            raise cfg.error(field, f"{len(counts)} counts for {len(array)} sensors")
        if sum(counts) <= 0:
            raise cfg.error(field, "all counts are zero; the intensity estimate is undefined")
        provider = LikelihoodContext(array, alpha, Measurement(counts))
        config = config.replace(resample_each_iteration=False)

    if "y0" in cfg:
        y0 = np.atleast_1d(np.asarray(cfg.get("y0"), dtype=np.float64))
        if y0.shape != (array.dim,):
            raise cfg.error("y0", f"start point must have {array.dim} coordinates")
        if not contains_open(array, y0):
            raise cfg.error("y0", "start point must lie strictly inside the convex hull of the sensors")
        if np.any(np.linalg.norm(array.sensors - y0, axis=1) <= array.guard_radius):
            raise cfg.error("y0", "start point is too close to a sensor")
    else:
        y0 = sample_interior(array, rng)
    trace = _guard(cfg, [], ascend, provider, config, y0, rng)

    with open(out / "trace.csv", "w", newline="\n") as fh:
        trace.write_csv(fh)
    summary = {
        "format": "radloc.estimate-summary/1",
        "seed": seed,
        "y0": _floats(y0),
        "final_estimate": _floats(trace.final_estimate),
        "final_intensity": trace.final_intensity,
        "termination_reason": trace.termination_reason.value,
        "iterations": trace.updates,
        "escapes": trace.escape_count,
        "report": config.report,
        "resampled": config.resample_each_iteration,
    }
    write_json(out / "summary.json", summary)
    log.info("estimate %s (%s after %d updates)", summary["final_estimate"], summary["termination_reason"], trace.updates)
    return EXIT_OK


def cmd_experiment(args, out):
    cfg = load_config(args.config, "experiment")
    seed = resolve_seed(args, cfg, "master_seed")
    array = build_array(cfg)
    source = build_source(cfg, array)
    kwargs = {}
    for key in ("snr_points", "runs_per_point", "curve_snr_db"):
        if key in cfg:
            kwargs[key] = cfg.get(key)
    if "snr_points" in kwargs:
        kwargs["snr_points"] = tuple(kwargs["snr_points"])
    spec = _guard(
        cfg,
        [],
        ExperimentSpec,
        cfg.get("name", Path(args.config).stem),
        array,
        source,
        estimator=build_estimator(cfg, seed),
        master_seed=seed,
        **kwargs,
    )
    result = run_experiment(spec, jobs=args.jobs)
    doc = {"format": "radloc.experiment/1", "master_seed": seed, "sensors": array.sensors.tolist(), "source": _source_dict(source)}
    doc.update(result.to_dict())
    write_json(out / "results.json", doc)
    with open(out / "rmse_vs_snr.csv", "w", newline="\n") as fh:
        result.write_points_csv(fh)
    with open(out / "convergence.csv", "w", newline="\n") as fh:
        result.write_curve_csv(fh)
    for p in result.points:
        log.info("%6.1f dB  rmse %.4g  escapes %.3g", p.snr_db, p.rmse, p.escape_fraction)
    return EXIT_OK


def cmd_verify_unique(args, out):
    cfg = load_config(args.config, "verify_unique")
    seed = resolve_seed(args, cfg)
    dim = int(cfg.get("dim"))
    grid = _guard(cfg, "resolution", GridSpec, cfg.get("resolution", DEFAULT_RESOLUTION[dim]), cfg.get("margin", 1e-3))
    array = source = None
    if "sensors" in cfg:
        array = build_array(cfg)
        if array.dim != dim:
            raise cfg.error("sensors", f"array is {array.dim}-D but dim is {dim}")
        source = build_source(cfg, array)
    trials = int(cfg.get("trials", DEFAULT_TRIALS[dim]))
    report = verify_uniqueness(dim, grid, trials, seed=seed, array=array, source=source, jobs=args.jobs)
    doc = {"format": "radloc.uniqueness/1", "dim": dim, "seed": seed}
    doc.update(report.to_dict())
    write_json(out / "uniqueness.json", doc)
    if report.passed:
        log.info("%d configurations, each with a single maximum", len(report.trials))
        return EXIT_OK
    for t in report.violations:
        log.warning(
            "trial %d (seed %d, spawn key %s): %d maxima, argmax error %.3g",
            t.trial, t.seed, t.spawn_key, t.local_maxima_count, t.argmax_error,
        )
    return EXIT_FAILED


COMMANDS = {
    "simulate": (cmd_simulate, "draw one Poisson measurement from a source model"),
    "estimate": (cmd_estimate, "localize a source by gradient ascent"),
    "experiment": (cmd_experiment, "Monte-Carlo RMSE against SNR and iteration"),
    "verify-unique": (cmd_verify_unique, "grid census of noise-free maxima over random configurations"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="radloc", description="Radiation source localization with N+1 sensors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON config file")
        p.add_argument("--out", default=".", metavar="DIR", help="output directory (created if needed)")
        p.add_argument("--seed", type=_u64, default=None, metavar="U64", help="override the config seed")
        p.add_argument("--jobs", type=_positive_int, default=1, metavar="N", help="worker processes")
        p.add_argument("--quiet", action="store_true", help="only report errors")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.quiet:
        level = logging.ERROR
    else:
        level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    func = COMMANDS[args.command][0]
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return func(args, out)
    except ConfigError as exc:
        print(f"radloc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RadlocError as exc:
        print(f"radloc: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
