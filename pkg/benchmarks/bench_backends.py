"""Timing comparison of the compiled and numpy simulation backends.

Runs the coupled functional sweep (the Monte Carlo hot loop) on each backend
over the same paths and reports wall time and speedup.  Results are checked
to agree before timing is trusted.

Usage: python benchmarks/bench_backends.py [m_paths] [n_ref]
"""
import sys
import time

import numpy as np

from pathsum.backends import pykernels
from pathsum.models import (BrownianMotion, LocallyStableSDE, StableProcess,
                            DriftSpec, TailSpec)
from pathsum.stable import StableParams

try:
    from pathsum.backends import _ckernels
except ImportError:
    print("compiled kernels not built; run `python setup.py build_ext "
          "--inplace` first")
    sys.exit(1)


def bench(name, plan, m, n_ref, strides=(4, 16, 64)):
    rows = []
    out = {}
    for label, mod in (("python", pykernels), ("cython", _ckernels)):
        t0 = time.perf_counter()
        out[label] = mod.functional_batch(plan, 0.3, 1.0, n_ref,
                                          list(strides), 1, 0.0, 0.0,
                                          7, 0, m)
        rows.append((label, time.perf_counter() - t0))
    same = all(
        np.allclose(a, b, rtol=1e-12, atol=1e-14)
        for a, b in zip(out["python"], out["cython"]))
    t_py, t_cy = rows[0][1], rows[1][1]
    print("%-14s  python %8.3fs   cython %8.3fs   speedup %5.1fx   "
          "agree=%s" % (name, t_py, t_cy, t_py / t_cy, same))
    return same


def main():
    m = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    n_ref = int(sys.argv[2]) if len(sys.argv) > 2 else 4096
    print("m_paths=%d  n_ref=%d" % (m, n_ref))
    ok = True
    ok &= bench("brownian", BrownianMotion(1.0).kernel_plan(), m, n_ref)
    ok &= bench("stable a=1.5",
                StableProcess(StableParams(1.5, 1.0, 1.0, 1.0)).kernel_plan(),
                m, n_ref)
    sde = LocallyStableSDE(DriftSpec.tanh(0.5, 1.0),
                           StableParams(0.75, 1.0, 1.0, 1.0),
                           TailSpec.tempered(1.0))
    ok &= bench("sde tempered", sde.kernel_plan(), m // 4, n_ref // 4)
    if not ok:
        print("BACKENDS DISAGREE - timings not meaningful")
        sys.exit(1)


if __name__ == "__main__":
    main()
