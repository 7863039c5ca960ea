"""Compare the compiled kernels with the NumPy fallback.

Times the four backend kernels directly, then the full objective + gradient
evaluation in two child processes (one per backend, selected through
MODEKIT_PURE_PYTHON). Run with ``python3 benchmarks/bench_kernels.py``.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np


def best_of(func, repeat, number):
    return min(timeit.repeat(func, repeat=repeat, number=number)) / number


def kernel_timings(repeat):
    from modekit import _fallback

    try:
        from modekit import _kernels
    except ImportError:
        _kernels = None

    rng = np.random.default_rng(0)
    theta = np.ascontiguousarray(0.9 * np.exp(1j * rng.uniform(0, 1, 8)))
    g = np.ascontiguousarray(rng.standard_normal((8, 200)) + 1j * rng.standard_normal((8, 200)))
    q, _ = np.linalg.qr(rng.standard_normal((100, 40)) + 1j * rng.standard_normal((100, 40)))
    stacked = np.ascontiguousarray(q)
    offsets = np.arange(0, 41, 2, dtype=np.int64)
    cases = {
        "vandermonde (r=8, tau=200)": lambda m: m.vandermonde(theta, 200),
        "vandermonde_deriv_rows": lambda m: m.vandermonde_deriv_rows(theta, 200),
        "contract_vandermonde_deriv": lambda m: m.contract_vandermonde_deriv(g, theta),
        "projection_gram (n=20, r=2, p=100)": lambda m: m.projection_gram(stacked, offsets),
    }
    rows = []
    for name, call in cases.items():
        py = best_of(lambda: call(_fallback), repeat, 200)
        cy = best_of(lambda: call(_kernels), repeat, 200) if _kernels else float("nan")
        rows.append((name, py, cy))
    return rows


def objective_timing(repeat):
    """Seconds per objective + gradient evaluation for whichever backend imported."""
    from modekit import KERNEL_BACKEND, optimizer
    from modekit.workbench.synth import SynthConfig, gen_synthetic

    data = gen_synthetic(SynthConfig(n=20, tau=100, image_side=10))
    cfg = optimizer.FitConfig(r=2, alpha=0.6)
    thetas = optimizer.initial_thetas(data, cfg)
    seconds = best_of(lambda: optimizer._value_and_deriv(data, thetas, cfg), repeat, 3)
    return {"backend": KERNEL_BACKEND, "seconds": seconds}


def child(pure, repeat):
    env = dict(os.environ)
    env.pop("MODEKIT_PURE_PYTHON", None)
    if pure:
        env["MODEKIT_PURE_PYTHON"] = "1"
    out = subprocess.run(
        [sys.executable, __file__, "--objective-only", "--repeat", str(repeat)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--objective-only", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    if args.objective_only:
        print(json.dumps(objective_timing(args.repeat)))
        return

    print(f"{'kernel':40s} {'numpy (us)':>12s} {'cython (us)':>12s} {'speedup':>8s}")
    for name, py, cy in kernel_timings(args.repeat):
        print(f"{name:40s} {py * 1e6:12.1f} {cy * 1e6:12.1f} {py / cy:8.1f}")

    print("\nobjective + gradient, n=20, p=100, tau=100, r=2, alpha=0.6")
    for pure in (True, False):
        res = child(pure, args.repeat)
        print(f"  {res['backend']:8s} {res['seconds'] * 1e3:8.1f} ms")


if __name__ == "__main__":
    main()
