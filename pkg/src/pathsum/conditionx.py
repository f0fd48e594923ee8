"""Transition-density time-derivative diagnostics.

For a model with transition density p_t(x, y) this module computes p and
its time derivative, measures N(t) = integral of |dp/dt| over y, and fits
N(t) ~ B t^(-beta).  For the shifted-stable family the derivative comes
from the exact chain rule through the scaling form

    p_t(x, y) = sigma^(-1) g((y - x - c t) / sigma),   sigma = (A t)^(1/alpha)

and the finite-difference route exists to cross-validate less explicit
densities (table-built ones expose `density_slice`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .models import BrownianMotion, StableProcess, StableWithDrift
from .stable import (StableParams, density_table, integrate_with_tails,
                     stable_density)


def _stable_form(model):
    """(params, drift) of the closed-form shifted-stable density, if any."""
    if isinstance(model, BrownianMotion):
        return StableParams(alpha=2.0, scale=model.diffusion), 0.0
    if isinstance(model, StableProcess):
        return model.params, 0.0
    if isinstance(model, StableWithDrift):
        return model.params, model.drift
    return None


def density_stable_drift(alpha: float, c: float, t: float, x, y,
                         c_plus: float = 1.0, c_minus: float = 1.0,
                         scale: float = 1.0, order: int = 0):
    """Closed-form p_t(x,y) (or a y-derivative) for X_t = x + c t + Z_t."""
    p = StableParams(alpha=alpha, c_plus=c_plus, c_minus=c_minus, scale=scale)
    return stable_density(p, t, np.asarray(y, dtype=float) - x - c * t, order)


def default_y_grid(center: float, sigma: float, width: float = 1e4,
                   n_core: int = 201, per_decade: int = 26) -> np.ndarray:
    """Symmetric grid: linear core within +-6 sigma, log wings to width*sigma.

    The default width reaches w = 1e4 so that the fitted power-tail
    completion carries only the truly asymptotic mass (heavy tails at small
    alpha keep >10% of the mass beyond 50 sigma).
    """
    core = np.linspace(-6.0, 6.0, n_core)
    n_wing = max(12, int(per_decade * math.log10(width / 6.0)))
    wing = np.geomspace(6.0, width, n_wing + 1)[1:]
    w = np.concatenate([-wing[::-1], core, wing])
    return center + sigma * w


@dataclass(frozen=True)
class DensityField:
    """One (t, x) slice: density and its time derivative on a y grid."""

    t: float
    x: float
    y_grid: np.ndarray
    p_values: np.ndarray
    dp_dt_values: np.ndarray
    mass: float                 # integral of p with tail completion
    dp_mass: float              # signed integral of dp/dt (should be ~0)
    dp_abs: float               # N(t): integral of |dp/dt|
    fd_noise: float = 0.0       # relative finite-difference noise estimate

    def validate(self, mass_tol: float = 1e-4):
        if not math.isfinite(self.mass) or abs(self.mass - 1.0) > mass_tol:
            raise ValueError("density mass %r is off 1 by more than %g"
                             % (self.mass, mass_tol))
        if np.min(self.p_values) < -1e-10 * max(1.0, float(np.max(self.p_values))):
            raise ValueError("density has significantly negative values")
        return self


def _closed_form_arrays(params: StableParams, c: float, t: float, x: float,
                        y_grid: np.ndarray, use_quad: bool):
    """(p, dp_dt) on y_grid via the chain rule through the scaling form."""
    alpha = params.alpha
    sigma = params.sigma(t)
    w = (y_grid - x - c * t) / sigma
    if use_quad:
        g = stable_density(params, t, y_grid - x - c * t, 0) * sigma
        g1 = stable_density(params, t, y_grid - x - c * t, 1) * sigma ** 2
    else:
        tab = density_table(alpha, params.skew)
        g = tab(w, 0)
        g1 = tab(w, 1)
    p = g / sigma
    dp = -(g + w * g1) / (alpha * t * sigma) - c * g1 / sigma ** 2
    return p, dp


def _fd_from_slices(p_lo2, p_lo, p_hi, p_hi2, h: float):
    """Richardson-extrapolated central difference from a 4-point t stencil."""
    d_h = (p_hi2 - p_lo2) / (2.0 * h)
    d_h2 = (p_hi - p_lo) / h
    rich = (4.0 * d_h2 - d_h) / 3.0
    noise = float(np.max(np.abs(d_h2 - d_h))) / 3.0
    return rich, noise


def _closed_form_slice(params, c, t, x, y_grid, use_quad):
    if use_quad:
        return stable_density(params, t, y_grid - x - c * t, 0)
    sigma = params.sigma(t)
    return density_table(params.alpha, params.skew)((y_grid - x - c * t) / sigma, 0) / sigma


def dt_density(model, t: float, x: float, y_grid=None,
               method: str = "auto", h_frac: float = 0.01,
               use_quad: bool = False) -> DensityField:
    """Density slice with time derivative.

    method: "analytic" (chain rule; closed-form models only), "fd"
    (Richardson central differences with step h_frac*t), or "auto"
    (analytic when closed-form, else fd).  Models without a closed form
    must expose density_slice(t, y_grid) and attributes alpha, center(t).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    form = _stable_form(model)
    if method == "auto":
        method = "analytic" if form is not None else "fd"
    h = h_frac * t

    if form is not None:
        params, c = form
        alpha = params.alpha
        if c != 0.0:
            # drift translates the peak by c*h per step; keep that shift
            # well inside the peak width or the difference quotient is junk
            h = min(h, 0.005 * params.sigma(t) / abs(c))
        if y_grid is None:
            y_grid = default_y_grid(x + c * t, params.sigma(t))
        y_grid = np.asarray(y_grid, dtype=float)
        p, _ = _closed_form_arrays(params, c, t, x, y_grid, use_quad)
        if method == "analytic":
            _, dp = _closed_form_arrays(params, c, t, x, y_grid, use_quad)
            noise = 0.0
        elif method == "fd":
            slices = [_closed_form_slice(params, c, tt, x, y_grid, use_quad)
                      for tt in (t - h, t - h / 2, t + h / 2, t + h)]
            dp, noise = _fd_from_slices(*slices, h=h)
        else:
            raise ValueError("unknown method %r" % method)
        center = x + c * t
    else:
        if not hasattr(model, "density_slice"):
            raise TypeError("model has no closed form and no density_slice")
        if method != "fd":
            raise ValueError("tabulated densities support only the fd method")
        alpha = model.alpha
        if hasattr(model, "fd_step"):
            h = min(h, model.fd_step(t))
        if y_grid is None:
            y_grid = model.default_y_grid(t)
        y_grid = np.asarray(y_grid, dtype=float)
        p = model.density_slice(t, y_grid)
        slices = [model.density_slice(tt, y_grid)
                  for tt in (t - h, t - h / 2, t + h / 2, t + h)]
        dp, noise = _fd_from_slices(*slices, h=h)
        center = model.center(t) if hasattr(model, "center") else float(
            y_grid[np.argmax(p)])

    mass = integrate_with_tails(y_grid - center, p, alpha)[0]
    dp_mass = integrate_with_tails(y_grid - center, dp, alpha)[0]
    dp_abs = integrate_with_tails(y_grid - center, np.abs(dp), alpha)[0]
    scale_dp = float(np.max(np.abs(dp)))
    rel_noise = noise / scale_dp if scale_dp > 0 else 0.0
    if method == "fd" and rel_noise > 0.01:
        raise ValueError("finite-difference noise %.2e exceeds 1%% of the "
                         "derivative scale; reduce h_frac or refine the density"
                         % rel_noise)
    return DensityField(t=float(t), x=float(x), y_grid=y_grid, p_values=p,
                        dp_dt_values=dp, mass=float(mass),
                        dp_mass=float(dp_mass), dp_abs=float(dp_abs),
                        fd_noise=rel_noise)


def fd_vs_analytic_gap(model, t: float, x: float = 0.0, y_grid=None,
                       use_quad: bool = True) -> float:
    """max |fd - analytic| / max |analytic| over the grid (closed form only)."""
    if _stable_form(model) is None:
        raise TypeError("cross-validation needs a closed-form model")
    if y_grid is None:
        params, c = _stable_form(model)
        y_grid = default_y_grid(x + c * t, params.sigma(t), width=100.0,
                                n_core=41, per_decade=10)
    fa = dt_density(model, t, x, y_grid, method="analytic", use_quad=use_quad)
    ff = dt_density(model, t, x, y_grid, method="fd", use_quad=use_quad)
    scale = float(np.max(np.abs(fa.dp_dt_values)))
    return float(np.max(np.abs(ff.dp_dt_values - fa.dp_dt_values))) / scale


@dataclass(frozen=True)
class BetaReport:
    """Fit of N(t) = integral |dp/dt| dy against B t^(-beta)."""

    beta_hat: float
    b_hat: float
    slope_ci: float
    t_values: np.ndarray
    n_values: np.ndarray
    mass_worst: float           # worst |mass - 1| over the t slices

    def __iter__(self):
        return iter((self.beta_hat, self.b_hat))


def estimate_beta(model, t_list=None, x: float = 0.0,
                  t_final: float = 1.0) -> BetaReport:
    """Estimate the blow-up order of the time derivative of p_t(x, .).

    Fits log N(t) vs log t by least squares over t_list (default: 13
    log-spaced points across [1e-4, 1e-1] * t_final); beta_hat is minus the
    slope and b_hat = max N(t) t^beta_hat over the list.
    """
    if t_list is None:
        if _stable_form(model) is not None:
            t_list = t_final * np.logspace(-4.0, -1.0, 13)
        else:
            t_list = model.interior_times()
    t_list = np.asarray(t_list, dtype=float)
    if t_list.max() / t_list.min() < 99.0:
        raise ValueError("t_list must span at least two decades")
    fields = [dt_density(model, t, x) for t in t_list]
    n_vals = np.array([f.dp_abs for f in fields])
    res = stats.linregress(np.log(t_list), np.log(n_vals))
    dof = len(t_list) - 2
    ci = stats.t.ppf(0.975, dof) * res.stderr if dof > 0 else math.inf
    beta_hat = -float(res.slope)
    b_hat = float(np.max(n_vals * t_list ** beta_hat))
    mass_worst = max(abs(f.mass - 1.0) for f in fields)
    return BetaReport(beta_hat=beta_hat, b_hat=b_hat, slope_ci=float(ci),
                      t_values=t_list, n_values=n_vals,
                      mass_worst=float(mass_worst))
