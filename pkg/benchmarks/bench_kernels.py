"""Compare the compiled and pure-numpy spectral-radius kernels.

Times rho_pairs throughput and a representative stable_mask region scan for
each stage count.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--n 200000]
"""

import argparse
import time

import numpy as np

from imexpeer import builtin_tableau
from imexpeer.coeffs import assemble
from imexpeer.kernels import available_backends


def bench(n):
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; showing the python backend only")
    rng = np.random.default_rng(0)
    z0 = -3.0 * rng.random(n) + 2j * rng.random(n)
    z1 = -np.abs(rng.normal(1.0, 10.0, n)) + 0j
    z1_scan = -np.geomspace(1e-3, 1e6, 61) + 0j
    z0_scan = (-3.0 * rng.random(40000) + 2j * rng.random(40000))

    header = f"{'method':14s} {'backend':8s} {'rho_pairs':>12s} {'stable_mask':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name in ("2sve", "3sv", "4sve"):
        tab = builtin_tableau(name)
        co = assemble(tab, 1.0)
        mats = (tab.P, co.Q, co.Qhat, tab.R, co.Rhat)
        base = {}
        for bname, mod in backends.items():
            t0 = time.perf_counter()
            r = mod.rho_pairs(*mats, z0, z1)
            t_rho = time.perf_counter() - t0
            t0 = time.perf_counter()
            m = mod.stable_mask(*mats, z0_scan, z1_scan, 1 + 1e-10)
            t_mask = time.perf_counter() - t0
            base[bname] = t_rho + t_mask
            rel = base["python"] / base[bname] if "python" in base else float("nan")
            print(f"{tab.name:14s} {bname:8s} {t_rho:10.3f} s {t_mask:10.3f} s "
                  f"{rel:7.2f}x")
            del r, m


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200000)
    bench(ap.parse_args().n)
