"""Compare the compiled and pure-Python likelihood kernels.

    python3 benchmarks/bench_kernels.py [--n 4000] [--repeat 50]

Prints per-call timings of both backends on the same random inputs, checks
that they agree, and times one full Mar-Co fit under each backend.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from scoreline import _pykernels

try:
    from scoreline import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _inputs(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    loglam = rng.normal(0.3, 0.3, n)
    logmu = rng.normal(0.1, 0.3, n)
    x = rng.poisson(np.exp(loglam)).astype(float)
    y = rng.poisson(np.exp(logmu)).astype(float)
    w = np.exp(-0.002 * rng.integers(0, 1000, n))
    return x, y, loglam, logmu, w


def _time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _fit_time(backend_module, repeat: int) -> float:
    from scoreline import estimation, kernels
    from scoreline.simulate import SimScenario, generate

    ds, _ = generate(SimScenario(m=20, seasons=5, model="marco", theta=(0, 1, -0.08), seed=1))
    saved = kernels.marco_loglik_grad, kernels.dc_loglik_grad
    kernels.marco_loglik_grad = backend_module.marco_loglik_grad
    kernels.dc_loglik_grad = backend_module.dc_loglik_grad
    try:
        return _time(lambda: estimation.fit(ds, estimation.FitConfig(model="marco")), repeat)
    finally:
        kernels.marco_loglik_grad, kernels.dc_loglik_grad = saved


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4000, help="matches per kernel call")
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args(argv)
    x, y, ll, lm, w = _inputs(args.n)
    theta = (0.05, 0.95, -0.08)

    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{args.n} matches, best of {args.repeat}")
    timings = {}
    for name, mod in backends:
        t_dc = _time(lambda: mod.dc_loglik_grad(x, y, ll, lm, w, -0.05), args.repeat)
        t_mc = _time(lambda: mod.marco_loglik_grad(x, y, ll, lm, w, *theta), args.repeat)
        t_fit = _fit_time(mod, max(3, args.repeat // 10))
        timings[name] = (t_dc, t_mc, t_fit)
        print(f"  {name:<7} dc {t_dc * 1e3:8.3f} ms   marco {t_mc * 1e3:8.3f} ms   "
              f"marco fit {t_fit:7.3f} s")
    if _ckernels is None:
        print("  compiled extension not available; only the Python backend was timed")
        return
    a = _pykernels.marco_loglik_grad(x, y, ll, lm, w, *theta)
    b = _ckernels.marco_loglik_grad(x, y, ll, lm, w, *theta)
    diff = max(abs(a[0] - b[0]) / abs(a[0]), np.max(np.abs(a[1] - b[1])), np.max(np.abs(a[3] - b[3])))
    py, cy = timings["python"], timings["cython"]
    print(f"  speed-up: dc x{py[0] / cy[0]:.1f}, marco x{py[1] / cy[1]:.1f}, fit x{py[2] / cy[2]:.1f}; "
          f"max discrepancy {diff:.2e}")


if __name__ == "__main__":
    main()
