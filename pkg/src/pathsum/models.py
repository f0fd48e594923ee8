"""Process models on a uniform time grid.

Four model families share one simulation contract: exact Gaussian increments,
exact stable increments (with or without constant drift), and an Euler scheme
for SDEs driven by locally stable noise whose big-jump tail may be pure
stable, exponentially tempered, or truncated.  Every path draws from streams
that are a pure function of (seed, path_index), so output never depends on
worker scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .stable import StableParams

KIND_BROWNIAN = 0
KIND_STABLE = 1
KIND_SDE = 2

DRIFT_LINEAR = 0
DRIFT_TANH = 1
DRIFT_CUSTOM = 2

TAIL_PURE = 0
TAIL_TEMPERED = 1
TAIL_TRUNCATED = 2


@dataclass(frozen=True)
class DriftSpec:
    """Bounded Lipschitz drift coefficient."""

    kind: int
    p0: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    fn: Optional[Callable] = None
    lip: float = 0.0
    sup: float = 0.0

    @staticmethod
    def linear(a: float, bias: float = 0.0, bound: float = 50.0) -> "DriftSpec":
        """b(x) = clip(a x + bias, -bound, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return DriftSpec(DRIFT_LINEAR, a, bias, bound,
                         lip=abs(a), sup=bound)

    @staticmethod
    def tanh(amp: float, rate: float = 1.0) -> "DriftSpec":
        """b(x) = amp * tanh(rate x)."""
        return DriftSpec(DRIFT_TANH, amp, rate,
                         lip=abs(amp * rate), sup=abs(amp))

    @staticmethod
    def custom(fn: Callable, lipschitz: float, sup_bound: float,
               check_width: float = 50.0) -> "DriftSpec":
        """User drift; the stated bounds are soft-checked on a sampling grid."""
        xs = np.linspace(-check_width, check_width, 2001)
        vals = np.asarray(fn(xs), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("custom drift returns non-finite values")
        if np.max(np.abs(vals)) > sup_bound * (1.0 + 1e-9):
            raise ValueError("custom drift exceeds its stated sup bound")
        slopes = np.abs(np.diff(vals) / np.diff(xs))
        if np.max(slopes) > lipschitz * (1.0 + 1e-6):
            raise ValueError("custom drift exceeds its stated Lipschitz bound")
        return DriftSpec(DRIFT_CUSTOM, fn=fn, lip=lipschitz, sup=sup_bound)

    @staticmethod
    def zero() -> "DriftSpec":
        return DriftSpec(DRIFT_LINEAR, 0.0, 0.0, 1e-12, lip=0.0, sup=0.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == DRIFT_LINEAR:
            return np.clip(self.p0 * x + self.p1, -self.p2, self.p2)
        if self.kind == DRIFT_TANH:
            return self.p0 * np.tanh(self.p1 * x)
        return np.asarray(self.fn(x), dtype=float)

    @property
    def is_zero(self) -> bool:
        return self.kind == DRIFT_LINEAR and self.p0 == 0.0 and self.p1 == 0.0


@dataclass(frozen=True)
class TailSpec:
    """Jump density on |u| >= 1, relative to the stable one-sided weights."""

    kind: int
    lam: float = 0.0

    @staticmethod
    def pure_stable() -> "TailSpec":
        return TailSpec(TAIL_PURE)

    @staticmethod
    def tempered(lam: float) -> "TailSpec":
        if lam <= 0:
            raise ValueError("tempering rate must be positive")
        return TailSpec(TAIL_TEMPERED, lam)

    @staticmethod
    def truncated() -> "TailSpec":
        return TailSpec(TAIL_TRUNCATED)

    def density(self, u, alpha: float, c_plus: float, c_minus: float):
        """m(u) for |u| >= 1 (raw weights, before normalisation)."""
        u = np.asarray(u, dtype=float)
        au = np.abs(u)
        out = np.zeros_like(u)
        live = au >= 1.0
        if self.kind == TAIL_PURE:
            cw = np.where(u > 0, c_plus, c_minus)
            out[live] = (cw * au ** (-1.0 - alpha))[live]
        elif self.kind == TAIL_TEMPERED:
            out[live] = (au ** (-1.0 - alpha) * np.exp(-self.lam * (au - 1.0)))[live]
        return out


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BrownianMotion:
    """Gaussian endpoint: Var(X_t - x0) = 2 * diffusion * t."""

    diffusion: float = 1.0

    def __post_init__(self):
        if self.diffusion <= 0:
            raise ValueError("diffusion must be positive")

    def kernel_plan(self) -> "KernelPlan":
        return KernelPlan(KIND_BROWNIAN, np.array([self.diffusion]), None)


@dataclass(frozen=True)
class StableProcess:
    """Exact alpha-stable increments."""

    params: StableParams

    def kernel_plan(self) -> "KernelPlan":
        p = self.params
        return KernelPlan(KIND_STABLE,
                          np.array([p.alpha, p.skew, p.weight, 0.0]), None)


@dataclass(frozen=True)
class StableWithDrift:
    """X_t = x0 + c t + Z_t with exact stable Z."""

    params: StableParams
    drift: float

    def kernel_plan(self) -> "KernelPlan":
        p = self.params
        return KernelPlan(KIND_STABLE,
                          np.array([p.alpha, p.skew, p.weight, self.drift]), None)


def _stable_norm_const(alpha: float) -> float:
    """c_alpha: raw one-sided jump integral over canonical exponent."""
    return 2.0 * math.gamma(1.0 - alpha) * math.cos(math.pi * alpha / 2.0) / alpha


@dataclass(frozen=True)
class LocallyStableSDE:
    """dX = b(X) dt + dZ, Z locally stable (alpha < 1) with a chosen big-jump tail.

    Simulation: Euler with r_euler substeps per exposed cell; each substep adds
    an exact stable increment plus signed compound-Poisson corrections whose
    intensity is the positive/negative part of (m - m_stable) on |u| >= 1.
    The correction vanishes identically for the pure-stable tail.
    """

    drift: DriftSpec
    params: StableParams
    tail: TailSpec = field(default_factory=TailSpec.pure_stable)
    r_euler: int = 8

    def __post_init__(self):
        if not (0.0 < self.params.alpha < 1.0):
            raise ValueError("locally stable SDE requires alpha in (0, 1)")
        if self.r_euler < 1:
            raise ValueError("r_euler must be at least 1")

    def correction_intensities(self):
        """(lam_minus_plusside, lam_minus_minusside, lam_plus_plusside,
        lam_plus_minusside): compound-Poisson rates of the tail difference."""
        p, tail = self.params, self.tail
        a = p.alpha
        q_s = p.scale / _stable_norm_const(a)
        out = []
        for part in ("minus", "plus"):
            for c_side in (p.c_plus, p.c_minus):
                if tail.kind == TAIL_PURE:
                    out.append(0.0)
                elif tail.kind == TAIL_TRUNCATED:
                    out.append(q_s * c_side / a if part == "minus" else 0.0)
                else:
                    lam = tail.lam
                    if part == "minus":
                        f = lambda u: max(c_side - math.exp(-lam * (u - 1.0)), 0.0) * u ** (-1 - a)
                    else:
                        f = lambda u: max(math.exp(-lam * (u - 1.0)) - c_side, 0.0) * u ** (-1 - a)
                    val = integrate.quad(f, 1.0, np.inf, limit=200)[0]
                    out.append(q_s * val)
        return tuple(out)

    def kernel_plan(self) -> "KernelPlan":
        p, d, tail = self.params, self.drift, self.tail
        lam_mp, lam_mm, lam_pp, lam_pm = self.correction_intensities()
        mp = np.array([
            p.alpha, p.skew, p.weight, float(self.r_euler),
            float(d.kind), d.p0, d.p1, d.p2,
            float(tail.kind), tail.lam, p.c_plus, p.c_minus,
            lam_mp, lam_mm, lam_pp, lam_pm,
        ])
        fn = d.fn if d.kind == DRIFT_CUSTOM else None
        return KernelPlan(KIND_SDE, mp, fn)


@dataclass(frozen=True)
class KernelPlan:
    """Flat model description consumed by the simulation backends."""

    kind: int
    mp: np.ndarray
    drift_fn: Optional[Callable]

    @property
    def needs_python(self) -> bool:
        return self.drift_fn is not None


ProcessModel = (BrownianMotion, StableProcess, StableWithDrift, LocallyStableSDE)


# ---------------------------------------------------------------------------
# path container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathGrid:
    """States of one path on the uniform grid k T / n, k = 0..n."""

    t_final: float
    n_steps: int
    x0: float
    states: np.ndarray

    def __post_init__(self):
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if len(self.states) != self.n_steps + 1:
            raise ValueError("states must hold n_steps + 1 entries")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


def simulate_grid(model, x0: float, t_final: float, n_steps: int,
                  seed: int, path_index: int = 0) -> PathGrid:
    """One path of the model on the uniform grid, from its own stream."""
    from .backends import kernels_for
    plan = model.kernel_plan()
    kern = kernels_for(plan)
    states = kern.simulate_states(plan, x0, t_final, n_steps, seed, path_index)
    return PathGrid(t_final=t_final, n_steps=n_steps, x0=x0, states=states)


# ---------------------------------------------------------------------------
# deterministic flows
# ---------------------------------------------------------------------------

def _rk4_fixed(b: Callable, y: np.ndarray, t: float, n: int) -> np.ndarray:
    h = t / n
    for _ in range(n):
        k1 = b(y)
        k2 = b(y + 0.5 * h * k1)
        k3 = b(y + 0.5 * h * k2)
        k4 = b(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def integrate_flow(b: Callable, y0, t: float, rtol: float = 1e-11,
                   max_halvings: int = 14):
    """Solve y' = b(y) over [0, t], vectorised over initial points.

    Classic fourth-order steps with step-doubling control: the step count is
    doubled until two successive solutions agree to rtol.
    """
    y0 = np.asarray(y0, dtype=float)
    scalar = y0.ndim == 0
    y0 = np.atleast_1d(y0)
    if t == 0.0:
        return float(y0[0]) if scalar else y0.copy()
    n = 16
    prev = _rk4_fixed(b, y0, t, n)
    for _ in range(max_halvings):
        n *= 2
        cur = _rk4_fixed(b, y0, t, n)
        err = np.max(np.abs(cur - prev) / np.maximum(1.0, np.abs(cur)))
        prev = cur
        if err < rtol:
            break
    return float(prev[0]) if scalar else prev


def flow_chi(drift: DriftSpec, x, t: float):
    """Forward flow: chi' = b(chi), chi_0 = x."""
    return integrate_flow(drift, x, t)


def flow_theta(drift: DriftSpec, y, t: float):
    """Reverse flow: theta' = -b(theta), theta_0 = y; inverse of chi."""
    return integrate_flow(lambda v: -drift(v), y, t)
