"""Compare the compiled and pure-Python integration kernels.

Usage: python3 benchmarks/bench_kernel.py [--periods N]
"""

import argparse
import time

import numpy as np

from resetfreq.casestudies import build_tpci_pid
from resetfreq.hosidf_open import SinusoidSpec
from resetfreq.hybridsim import KERNELS, SimConfig, simulate


def run(backend, periods):
    w = 2 * np.pi * 100
    sys_ = build_tpci_pid(omega=w)
    cfg = SimConfig(steps_per_period=4096, periods=periods, transient_periods=periods - 1,
                    auto_transient=False)
    t0 = time.perf_counter()
    tr = simulate(sys_, SinusoidSpec(1e-7, w), cfg, backend=backend)
    return time.perf_counter() - t0, tr


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--periods", type=int, default=5)
    args = ap.parse_args()
    steps = args.periods * 4096
    results = {}
    for name in sorted(KERNELS):
        dt, tr = run(name, args.periods)
        results[name] = tr
        print(f"{name:>9}: {dt:8.3f} s  ({steps / dt / 1e6:7.3f} Msteps/s, "
              f"{len(tr.events)} events)")
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        print(f"max |x_compiled - x_python| = {np.max(np.abs(a.x - b.x)):.3e}")


if __name__ == "__main__":
    main()
