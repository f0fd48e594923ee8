"""Reference (numpy) simulation kernels.

The draw schedule per path is part of the backend contract; the compiled
kernels replay it request-for-request against the same Philox streams:

* Brownian:     one standard-normal block of length n.
* Stable:       one uniform block, then one exponential block, length n each.
* SDE:          uniform + exponential blocks of length n*r_euler for the base
                stable noise, then (jump stream, role 1) per correction part:
                a Knuth-Poisson count sweep over substeps followed by
                rejection-sampled jump sizes in substep order.
"""
from __future__ import annotations

import math

import numpy as np

from ..streams import path_generator, ROLE_BASE, ROLE_JUMPS
from ..stable import _cms_transform
from ..models import (KIND_BROWNIAN, KIND_STABLE, KIND_SDE,
                      DRIFT_LINEAR, DRIFT_TANH, TAIL_TEMPERED, TAIL_TRUNCATED)

H_NONE = 0
H_BELOW = 1
H_INTERVAL = 2
H_SCALED_BELOW = 3


class _Cursor:
    """Sequential uniform reader; block-buffered but order-identical to
    scalar draws."""

    __slots__ = ("gen", "buf", "i")

    def __init__(self, gen):
        self.gen = gen
        self.buf = gen.random(256)
        self.i = 0

    def take(self) -> float:
        if self.i >= len(self.buf):
            self.buf = self.gen.random(1024)
            self.i = 0
        v = self.buf[self.i]
        self.i += 1
        return v


def _sde_jump_corrections(mp, n_sub: int, dsub: float, gen_jumps) -> np.ndarray:
    """Signed compound-Poisson corrections per substep (zeros if no parts)."""
    alpha = mp[0]
    tail_kind = int(mp[8])
    lam_t = mp[9]
    parts = (
        (mp[12], +1.0, -1.0, mp[10]),   # remove spurious +side stable tail
        (mp[13], -1.0, -1.0, mp[11]),   # remove spurious -side stable tail
        (mp[14], +1.0, +1.0, mp[10]),   # add +side excess of the model tail
        (mp[15], -1.0, +1.0, mp[11]),   # add -side excess of the model tail
    )
    out = np.zeros(n_sub)
    if all(p[0] == 0.0 for p in parts):
        return out
    cur = _Cursor(gen_jumps)
    inv_alpha = 1.0 / alpha
    for lam, side, sgn, c_side in parts:
        if lam <= 0.0:
            continue
        thresh = math.exp(-lam * dsub)
        counts = np.zeros(n_sub, dtype=np.int64)
        for k in range(n_sub):
            p = 1.0
            while True:
                p *= cur.take()
                if p <= thresh:
                    break
                counts[k] += 1
        if not counts.any():
            continue
        for k in np.nonzero(counts)[0]:
            for _ in range(counts[k]):
                while True:
                    u1 = max(cur.take(), 1e-300)
                    v = u1 ** (-inv_alpha)
                    u2 = cur.take()
                    if tail_kind == TAIL_TRUNCATED:
                        break
                    if sgn < 0:   # minus part: (c_side - e^{-lam(v-1)})+ / c_side
                        ratio = max(c_side - math.exp(-lam_t * (v - 1.0)), 0.0) / c_side
                    else:         # plus part: (e^{-lam(v-1)} - c_side)+ / (1 - c_side)
                        ratio = max(math.exp(-lam_t * (v - 1.0)) - c_side, 0.0) / (1.0 - c_side)
                    if u2 <= ratio:
                        break
                out[k] += sgn * side * v
    return out


def _drift_scalar(mp, drift_fn, x: float) -> float:
    kind = int(mp[4])
    if kind == DRIFT_LINEAR:
        v = mp[5] * x + mp[6]
        return min(max(v, -mp[7]), mp[7])
    if kind == DRIFT_TANH:
        return mp[5] * math.tanh(mp[6] * x)
    return float(drift_fn(x))


def _raw_states(plan, x0: float, t_final: float, n: int, seed: int, idx: int) -> np.ndarray:
    mp = plan.mp
    gen = path_generator(seed, idx, ROLE_BASE)
    if plan.kind == KIND_BROWNIAN:
        dt = t_final / n
        z = gen.standard_normal(n)
        inc = math.sqrt(2.0 * mp[0] * dt) * z
    elif plan.kind == KIND_STABLE:
        alpha, skew, weight, c = mp[0], mp[1], mp[2], mp[3]
        dt = t_final / n
        u = gen.random(n)
        w = gen.standard_exponential(n)
        sigma = (weight * dt) ** (1.0 / alpha)
        inc = sigma * _cms_transform(alpha, skew, u, w)
        if c != 0.0:
            inc = inc + c * dt
    elif plan.kind == KIND_SDE:
        alpha, skew, weight = mp[0], mp[1], mp[2]
        r = int(mp[3])
        n_sub = n * r
        dsub = t_final / n_sub
        u = gen.random(n_sub)
        w = gen.standard_exponential(n_sub)
        sigma = (weight * dsub) ** (1.0 / alpha)
        noise = sigma * _cms_transform(alpha, skew, u, w)
        noise += _sde_jump_corrections(mp, n_sub, dsub, path_generator(seed, idx, ROLE_JUMPS))
        states = np.empty(n + 1)
        states[0] = x = x0
        for k in range(n_sub):
            x = x + _drift_scalar(mp, plan.drift_fn, x) * dsub + noise[k]
            if (k + 1) % r == 0:
                states[(k + 1) // r] = x
        return states
    else:
        raise ValueError("unknown model kind %r" % plan.kind)
    states = np.empty(n + 1)
    states[0] = x0
    np.cumsum(inc, out=states[1:])
    states[1:] += x0
    return states


def simulate_states(plan, x0: float, t_final: float, n: int,
                    seed: int, path_index: int) -> np.ndarray:
    """States of path `path_index` on the n-step grid."""
    return _raw_states(plan, x0, t_final, n, seed, path_index)


def _h_indicator(states: np.ndarray, h_kind: int, h0: float, h1: float) -> np.ndarray:
    if h_kind in (H_BELOW, H_SCALED_BELOW):
        return states <= h0
    if h_kind == H_INTERVAL:
        return (states >= h0) & (states <= h1)
    raise ValueError("kernel functional must be an indicator kind")


def functional_batch(plan, x0: float, t_final: float, n_ref: int, strides,
                     h_kind: int, h0: float, h1: float,
                     seed: int, lo: int, hi: int):
    """Coupled Riemann functionals for paths [lo, hi).

    Returns (i_ref, i_coarse, x_t): reference left-endpoint sum on the fine
    grid, coarse sums on each subsampled grid, and the terminal state.
    Indicator sums accumulate integer counts, so they are exact in either
    backend.
    """
    strides = np.asarray(strides, dtype=np.int64)
    m = hi - lo
    i_ref = np.empty(m)
    i_coarse = np.empty((m, len(strides)))
    x_t = np.empty(m)
    coef = h1 if h_kind == H_SCALED_BELOW else 1.0
    dt_ref = t_final / n_ref
    for j in range(m):
        states = _raw_states(plan, x0, t_final, n_ref, seed, lo + j)
        x_t[j] = states[-1]
        if h_kind == H_NONE:
            i_ref[j] = 0.0
            i_coarse[j] = 0.0
            continue
        hv = _h_indicator(states, h_kind, h0, h1)
        i_ref[j] = coef * dt_ref * float(np.count_nonzero(hv[:-1]))
        for s_idx, stride in enumerate(strides):
            n_c = n_ref // stride
            cnt = float(np.count_nonzero(hv[0:n_ref:stride]))
            i_coarse[j, s_idx] = coef * (t_final / n_c) * cnt
    return i_ref, i_coarse, x_t
