"""Compare the compiled and pure-numpy split-step kernels on a device-sized problem.

    python benchmarks/bench_kernel.py [--steps N] [--columns K] [--repeat R]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from cziswap.dynamics import _kernel
from cziswap.dynamics.params import DeviceParams
from cziswap.dynamics.propagate import Propagator


def problem(steps: int, columns: int, seed: int = 0):
    prop = Propagator(DeviceParams.table1())
    exps = prop._static_exps(prop.dt)
    levels = prop.model.coupler_occupation
    rng = np.random.default_rng(seed)
    thetas = 1e-3 * rng.standard_normal((steps, 3))
    psi = np.asfortranarray(prop.model.dressed_vectors[:, :columns].astype(complex))
    return exps, levels, thetas, psi


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--columns", type=int, default=9)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    exps, levels, thetas, psi = problem(args.steps, args.columns)
    kernels = {"python": _kernel.split_steps_python}
    if _kernel.split_steps_compiled is not None:
        kernels["cython"] = _kernel.split_steps_compiled
    print(f"selected backend: {_kernel.BACKEND}; {args.steps} steps x {args.columns} columns "
          f"of a {psi.shape[0]}-level state")
    results, times = {}, {}
    for name, fn in kernels.items():
        results[name] = fn(*exps, levels, thetas, psi)
        times[name] = min(timeit.repeat(lambda fn=fn: fn(*exps, levels, thetas, psi),
                                        number=1, repeat=args.repeat))
        print(f"{name:7s} {times[name] * 1e3:9.1f} ms  ({times[name] / args.steps * 1e6:.2f} us/step)")
    if "cython" in results:
        dev = float(np.abs(results["cython"] - results["python"]).max())
        print(f"max |cython - python| = {dev:.2e}; speed-up x{times['python'] / times['cython']:.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
