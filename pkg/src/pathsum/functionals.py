"""Time-integral functionals and their Riemann-sum approximations.

The object of study is I_T(h) = int_0^T h(X_s) ds and its left-endpoint
discretisation I_{T,n}(h) = (T/n) sum_{k=0}^{n-1} h(X_{kT/n}); note the final
node is excluded.  Reference values come from the same path simulated on a
finer grid (coupled estimator), never from an independent run.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .models import PathGrid, simulate_grid
from .backends.pykernels import H_BELOW, H_INTERVAL, H_SCALED_BELOW

H_SMOOTH = -1


@dataclass(frozen=True)
class FunctionalSpec:
    """Bounded measurable h with a known sup norm."""

    kind: int
    p0: float = 0.0
    p1: float = 0.0
    fn: Optional[Callable] = None
    sup: float = 1.0

    @staticmethod
    def below(level: float) -> "FunctionalSpec":
        """h(x) = 1{x <= level}."""
        return FunctionalSpec(H_BELOW, level, 0.0, sup=1.0)

    @staticmethod
    def interval(lo: float, hi: float) -> "FunctionalSpec":
        """h(x) = 1{lo <= x <= hi}."""
        if hi < lo:
            raise ValueError("interval upper end below lower end")
        return FunctionalSpec(H_INTERVAL, lo, hi, sup=1.0)

    @staticmethod
    def scaled_below(coef: float, level: float) -> "FunctionalSpec":
        """h(x) = coef * 1{x <= level} (occupation-time payoff weight)."""
        return FunctionalSpec(H_SCALED_BELOW, level, coef, sup=abs(coef))

    @staticmethod
    def smooth(fn: Callable, sup_norm: float) -> "FunctionalSpec":
        """Bounded smooth h given as a vectorised callable."""
        if sup_norm <= 0:
            raise ValueError("sup_norm must be positive")
        return FunctionalSpec(H_SMOOTH, fn=fn, sup=sup_norm)

    @staticmethod
    def one() -> "FunctionalSpec":
        """Constant 1 (weight f in weak-error estimands)."""
        return FunctionalSpec(H_SMOOTH, fn=lambda x: np.ones_like(np.asarray(x, float)),
                              sup=1.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == H_BELOW:
            return (x <= self.p0).astype(float)
        if self.kind == H_INTERVAL:
            return ((x >= self.p0) & (x <= self.p1)).astype(float)
        if self.kind == H_SCALED_BELOW:
            return self.p1 * (x <= self.p0).astype(float)
        return np.asarray(self.fn(x), dtype=float)

    @property
    def kernel_args(self):
        """(h_kind, h0, h1) when the compiled kernels can evaluate h."""
        if self.kind == H_SMOOTH:
            return None
        return (self.kind, self.p0, self.p1)


def riemann_functional(path: PathGrid, h: FunctionalSpec) -> float:
    """Left-endpoint Riemann sum of h along the path (final node excluded)."""
    vals = h(path.states[:-1])
    return float(path.dt * vals.sum())


def reference_functional(model, x0: float, t_final: float, h: FunctionalSpec,
                         n_ref: int, seed: int, path_index: int = 0):
    """High-resolution proxy for I_T(h): (value, fine PathGrid)."""
    path = simulate_grid(model, x0, t_final, n_ref, seed, path_index)
    return riemann_functional(path, h), path


def subsample(path: PathGrid, n: int) -> PathGrid:
    """Restriction of a fine path to the coarser n-step grid."""
    if path.n_steps % n != 0:
        raise ValueError("coarse step count must divide the fine one")
    stride = path.n_steps // n
    return PathGrid(t_final=path.t_final, n_steps=n, x0=path.x0,
                    states=path.states[::stride].copy())


def path_error(model, x0: float, t_final: float, h: FunctionalSpec, n: int,
               seed: int, path_index: int = 0, ref_multiplier: int = 64) -> float:
    """Signed coupled difference I_ref - I_{T,n} from one fine path."""
    if ref_multiplier < 2:
        raise ValueError("ref_multiplier must be at least 2")
    n_ref = n * ref_multiplier
    i_ref, fine = reference_functional(model, x0, t_final, h, n_ref, seed, path_index)
    i_n = riemann_functional(subsample(fine, n), h)
    return i_ref - i_n
