"""Compare the compiled and pure-Python kernels on the hot loops.

    python benchmarks/bench_kernels.py [--repeat 5] [--runs 50]

Each case is timed with timeit (best of --repeat) for every available
backend; the last column is the speed-up of the compiled kernel.
"""

import argparse
import timeit

import numpy as np

from radloc import _backend
from radloc.estimator import EstimatorConfig, estimate_once
from radloc.geometry import HULL_EPS, SensorArray
from radloc.harness import solve_noise_for_snr
from radloc.model import SourceParams

SENSORS_3D = [[0.0, 0.0, 0.0], [200.0, 0.0, 0.0], [0.0, 200.0, 0.0], [0.0, 0.0, 100.0]]
SOURCE_3D = [10.0, 20.0, 10.0]


def cases(runs):
    arr = SensorArray(SENSORS_3D)
    src = SourceParams(SOURCE_3D, 5e7, 0.0068)
    noise = solve_noise_for_snr(arr, src, 16.5)
    cfg = EstimatorConfig(max_iterations=500)

    def poisson(lam):
        return lambda kern: kern.poisson_array(np.random.default_rng(0), lam, 20_000)

    def interior(kern):
        rng = np.random.default_rng(0)
        for _ in range(5_000):
            kern.sample_interior(rng, arr.sensors, arr.edge_inverse, HULL_EPS, arr.guard_radius)

    def ascent(kern):
        name = "python" if kern is _backend.get_kernel("python") else "cython"
        for r in range(runs):
            estimate_once(src, arr, noise, cfg, rng=np.random.default_rng(r), backend=name)

    return [
        ("poisson, mean 5 (20k draws)", poisson(5.0)),
        ("poisson, mean 3000 (20k draws)", poisson(3000.0)),
        ("interior sampling (5k points, 3-D)", interior),
        (f"ascent, 3-D at 16.5 dB ({runs} runs x 500 it)", ascent),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--runs", type=int, default=20, help="ascent runs per timing")
    args = parser.parse_args(argv)

    backends = ["python"] + (["cython"] if _backend.compiled is not None else [])
    if len(backends) == 1:
        print("compiled kernel not built; timing the Python kernel only")
    print(f"{'case':44s}" + "".join(f"{b:>12s}" for b in backends) + ("   speed-up" if len(backends) > 1 else ""))
    for label, fn in cases(args.runs):
        times = []
        for b in backends:
            kern = _backend.get_kernel(b)
            times.append(min(timeit.repeat(lambda: fn(kern), number=1, repeat=args.repeat)))
        row = f"{label:44s}" + "".join(f"{t:11.4f}s" for t in times)
        if len(times) > 1:
            row += f"   {times[0] / times[1]:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
