"""Monte Carlo driver: chunked path sweeps over an optional process pool.

Workers receive contiguous path ranges; every path owns a counter-based
stream keyed by (seed, index), and chunk results are written back by index,
so the assembled arrays are identical for any worker count.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .backends import kernels_for
from .functionals import FunctionalSpec


@dataclass(frozen=True)
class SweepResult:
    """Per-path coupled functionals from one Monte Carlo sweep."""

    i_ref: np.ndarray        # (m,)
    i_coarse: np.ndarray     # (m, len(n_list))
    x_t: np.ndarray          # (m,)
    n_list: tuple
    n_ref: int


def _indicator_chunk(plan, x0, t_final, n_ref, strides, h_args, seed, lo, hi):
    kern = kernels_for(plan)
    h_kind, h0, h1 = h_args
    return kern.functional_batch(plan, x0, t_final, n_ref, strides,
                                 h_kind, h0, h1, seed, lo, hi)


def _smooth_chunk(plan, x0, t_final, n_ref, strides, h, seed, lo, hi):
    kern = kernels_for(plan)
    m = hi - lo
    i_ref = np.empty(m)
    i_coarse = np.empty((m, len(strides)))
    x_t = np.empty(m)
    dt_ref = t_final / n_ref
    for j in range(m):
        states = kern.simulate_states(plan, x0, t_final, n_ref, seed, lo + j)
        vals = h(states)
        x_t[j] = states[-1]
        i_ref[j] = dt_ref * vals[:-1].sum()
        for s_idx, stride in enumerate(strides):
            n_c = n_ref // stride
            i_coarse[j, s_idx] = (t_final / n_c) * vals[0:n_ref:stride].sum()
    return i_ref, i_coarse, x_t


def _run_chunk(args):
    mode, payload = args
    if mode == "ind":
        return _indicator_chunk(*payload)
    return _smooth_chunk(*payload)


def sweep_functionals(model, x0: float, t_final: float, h: FunctionalSpec,
                      n_list, n_paths: int, seed: int,
                      ref_multiplier: int = 64, workers: int = 1) -> SweepResult:
    """Coupled functionals for all coarse levels from one fine path per draw."""
    n_list = tuple(sorted(int(n) for n in n_list))
    if len(set(n_list)) != len(n_list):
        raise ValueError("duplicate entries in n_list")
    if n_list[0] < 2:
        raise ValueError("coarse levels must be at least 2")
    n_ref = ref_multiplier * n_list[-1]
    for n in n_list:
        if n_ref % n != 0:
            raise ValueError("each coarse level must divide the reference grid")
    strides = np.array([n_ref // n for n in n_list], dtype=np.int64)
    plan = model.kernel_plan()

    if h.kernel_args is not None:
        make = lambda lo, hi: ("ind", (plan, x0, t_final, n_ref, strides,
                                       h.kernel_args, seed, lo, hi))
    else:
        make = lambda lo, hi: ("smooth", (plan, x0, t_final, n_ref, strides,
                                          h, seed, lo, hi))

    chunk = max(64, min(4096, -(-n_paths // max(1, 4 * workers))))
    bounds = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    tasks = [make(lo, hi) for lo, hi in bounds]

    i_ref = np.empty(n_paths)
    i_coarse = np.empty((n_paths, len(n_list)))
    x_t = np.empty(n_paths)
    if workers <= 1 or len(tasks) == 1:
        results = map(_run_chunk, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        try:
            results = list(pool.map(_run_chunk, tasks))
        finally:
            pool.shutdown()
    for (lo, hi), (r, c, xt) in zip(bounds, results):
        i_ref[lo:hi] = r
        i_coarse[lo:hi] = c
        x_t[lo:hi] = xt
    return SweepResult(i_ref=i_ref, i_coarse=i_coarse, x_t=x_t,
                       n_list=n_list, n_ref=n_ref)
