"""Compiled vs numpy Wigner-d recurrence, and end-to-end assembly time.

Run: python3 benchmarks/bench_kernels.py [--jmax 96] [--repeat 5]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from zeromodes.kernels import backends


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_table(jmax: int, repeat: int):
    impls = backends()
    beta = np.arccos(np.polynomial.legendre.leggauss(jmax + 2)[0])
    cases = [(0, 0), (1, -1), (jmax // 2 + 1, 1), (-jmax, 4)]
    ref = {}
    print(f"wigner_d_rows, j_max={jmax}, {beta.size} angles, best of {repeat}")
    print(f"{'(2m, 2m_)':>12} " + " ".join(f"{n:>10}" for n in impls) + "   speedup   max|diff|")
    for two_m, two_mp in cases:
        times = {}
        for name, fn in impls.items():
            times[name] = best_of(lambda: fn(two_m, two_mp, 2 * jmax, beta), repeat)
            ref[name] = fn(two_m, two_mp, 2 * jmax, beta)
        diff = np.abs(ref["python"] - ref.get("cython", ref["python"])).max()
        sp = times["python"] / times["cython"] if "cython" in times else float("nan")
        cols = " ".join(f"{times[n] * 1e3:9.3f}ms" for n in impls)
        print(f"{str((two_m, two_mp)):>12} {cols}   {sp:7.1f}x   {diff:.1e}")


def assembly_time(k: int):
    # a fresh interpreter per backend so the module-level choice applies
    code = (
        "import time, zeromodes as z\n"
        "from zeromodes.sphere import SphereScalar\n"
        "b = SphereScalar.constant(0.5, 1) + SphereScalar.coordinate(3, 1.0)\n"
        "pot = z.hodge_gauge(b, 1)\n"
        "t0 = time.perf_counter()\n"
        f"fam = z.build_family({k}, pot, 64)\n"
        "fam.at(%d)\n" % k
        + "print(z.BACKEND, time.perf_counter() - t0)\n"
    )
    for forced in ("", "python"):
        env = dict(os.environ, ZEROMODES_KERNELS=forced)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, secs = out.stdout.split()
        print(f"build_family(k={k}, n_max=64) + diagonalize [{name}]: {float(secs):.3f}s")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--jmax", type=int, default=96)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--k", type=int, default=8)
    ns = ap.parse_args()
    kernel_table(ns.jmax, ns.repeat)
    print()
    assembly_time(ns.k)


if __name__ == "__main__":
    main()
