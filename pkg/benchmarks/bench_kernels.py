#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends.

Part 1 times each pointwise kernel on both backends in this process.
Part 2 times whole Strang steps in two subprocesses, one with
FINLS_DISABLE_NUMBA=1, since the solver picks its backend at import.

    python3 benchmarks/bench_kernels.py [--sizes 128 256 512] [--repeat 20]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from finls import _kernels

STEP_SNIPPET = """
import json, time
from finls import _kernels
from finls.spectral import Grid
from finls.model import ModelParams, WeightField
from finls.ground_state import default_initial_guess
from finls.dynamics import EvolveControls, evolve
g = Grid(2, {M}, 16.0)
P = ModelParams(2, 0.8, 0.4, 3.0, "focusing")
w = WeightField.build(g, P.b)
u0 = default_initial_guess(g) * 0.5
ctl = EvolveControls(dt=1e-3, t_end={steps} * 1e-3, snapshot_stride=10**6, scattering_samples=0, boundary_tol=1e9)
evolve(u0, P, ctl, weight=w)  # warm-up, includes JIT compilation
t0 = time.perf_counter()
evolve(u0, P, ctl, weight=w)
print(json.dumps({{"backend": _kernels.BACKEND, "ms_per_step": 1e3 * (time.perf_counter() - t0) / {steps}}}))
"""


def _inputs(M, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    w = rng.uniform(0.5, 2.0, size=(M, M))
    return u, w, u.real.copy()


def time_kernels(sizes, repeat):
    backends = [b for b in (_kernels.numba_backend, _kernels.numpy_backend) if b is not None]
    rows = []
    for M in sizes:
        u, w, q = _inputs(M)
        calls = {
            "nonlinear_phase": lambda b: b.nonlinear_phase(u, w, 1e-3, 2.0),
            "weighted_abs_power_sum": lambda b: b.weighted_abs_power_sum(u, w, 4.0),
            "abs_max": lambda b: b.abs_max(u),
            "power_source": lambda b: b.power_source(q, w, 3.0),
        }
        for name, call in calls.items():
            for b in backends:
                call(b)  # warm-up
                best = min(timeit.repeat(lambda: call(b), number=1, repeat=repeat))
                rows.append((M, name, b.name, 1e3 * best))
    return rows


def time_steps(M, steps):
    out = []
    for disable in ("0", "1"):
        env = dict(os.environ, FINLS_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(M=M, steps=steps)],
                             env=env, capture_output=True, text=True, check=True)
        out.append(json.loads(res.stdout.strip().splitlines()[-1]))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()

    print(f"numba available: {_kernels.numba_backend is not None}")
    print(f"{'M':>5} {'kernel':<24} {'backend':<7} {'best ms':>9}")
    for M, name, backend, ms in time_kernels(args.sizes, args.repeat):
        print(f"{M:>5} {name:<24} {backend:<7} {ms:>9.3f}")

    print()
    print(f"{'M':>5} {'backend':<7} {'ms/step':>9}")
    for M in args.sizes:
        for r in time_steps(M, args.steps):
            print(f"{M:>5} {r['backend']:<7} {r['ms_per_step']:>9.3f}")


if __name__ == "__main__":
    main()
