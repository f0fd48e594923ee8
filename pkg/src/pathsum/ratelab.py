"""Convergence-rate laboratory.

Strong errors are (E|I_ref - I_{T,n}|^p)^(1/p) from coupled paths; weak
errors are |E[(I_ref^k - I_{T,n}^k) f(X_T)]|.  Both are compared against the
theoretical envelope built from the rate function

    D(n) = log(n)/n                              (beta = 1)
    D(n) = max(1, T^(1-beta)/(beta-1)) n^(-1/beta)   (beta > 1)

where beta is the blow-up order of the time derivative of the transition
density.  n = 1 is excluded throughout (D would vanish there).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .functionals import FunctionalSpec
from .mc import sweep_functionals, SweepResult
from .models import BrownianMotion, StableProcess, StableWithDrift, LocallyStableSDE

Z95 = 1.959963984540054


def rate_D(beta: float, t_final: float, n: int) -> float:
    """Discretisation rate function D_{T,beta}(n)."""
    if beta < 1.0:
        raise ValueError("beta must be at least 1")
    if n < 2:
        raise ValueError("n must be at least 2")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    if beta == 1.0:
        return math.log(n) / n
    return max(1.0, t_final ** (1.0 - beta) / (beta - 1.0)) * n ** (-1.0 / beta)


def const_C(t_final: float, p: float, b_const: float) -> float:
    """Strong-error envelope constant C_{T,p}."""
    if p <= 0:
        raise ValueError("p must be positive")
    if b_const <= 0:
        raise ValueError("the density-derivative constant must be positive")
    if p >= 2.0:
        return math.sqrt(14.0 * p * (p - 1.0) * b_const) * t_final
    return math.sqrt(28.0 * b_const) * t_final


def const_weak(k: int, t_final: float, beta: float, b_const: float,
               h_norm: float, f_norm: float = 1.0) -> float:
    """Weak-error envelope constant, with the sharper k = 1, f == 1 form."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k == 1 and f_norm == 1.0:
        return 5.0 * b_const * t_final * h_norm
    return (2.0 ** max(beta, 2.0) * k * k * b_const
            * t_final ** (k + 1) * h_norm ** k * f_norm)


def model_beta(model) -> float:
    """Blow-up order implied by the model class."""
    if isinstance(model, BrownianMotion):
        return 1.0
    if isinstance(model, StableProcess):
        return 1.0
    if isinstance(model, StableWithDrift):
        if model.drift == 0.0:
            return 1.0
        return max(1.0, 1.0 / model.params.alpha)
    if isinstance(model, LocallyStableSDE):
        return 1.0 / model.params.alpha
    raise TypeError("unknown model type %r" % type(model))


def fit_rate(n_values, errors):
    """OLS slope of log error against log n with a 95% slope interval."""
    n_values = np.asarray(n_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    if keep.sum() < 3:
        raise ValueError("need at least three positive rows to fit a rate")
    x = np.log(n_values[keep])
    y = np.log(errors[keep])
    res = stats.linregress(x, y)
    dof = keep.sum() - 2
    half = stats.t.ppf(0.975, dof) * res.stderr if dof > 0 else math.inf
    return float(res.slope), float(res.intercept), float(half)


@dataclass(frozen=True)
class RateConfig:
    """One convergence experiment."""

    model: object
    x0: float
    t_final: float
    h: FunctionalSpec
    n_list: tuple
    n_paths: int
    seed: int
    ref_multiplier: int = 64
    workers: int = 1
    b_guess: float = 1.0
    beta: Optional[float] = None

    def resolved_beta(self) -> float:
        return self.beta if self.beta is not None else model_beta(self.model)


@dataclass(frozen=True)
class RateReport:
    """Measured errors with envelope columns and a fitted rate."""

    n_list: tuple
    errors: np.ndarray
    cis: np.ndarray
    theory: np.ndarray
    slope: float
    intercept: float
    slope_ci: float
    beta: float
    kind: str                       # "strong" or "weak"
    order: float                    # p (strong) or k (weak)
    excluded: tuple = ()            # rows dropped from the fit (weak signal)
    n_paths: int = 0

    def rows(self):
        for i, n in enumerate(self.n_list):
            yield n, self.errors[i], self.cis[i], self.theory[i]


def _strong_stats(diff: np.ndarray, p: float):
    """(E|J|^p)^(1/p) with a delta-method confidence halfwidth."""
    a = np.abs(diff) ** p
    m = float(a.mean())
    if m == 0.0:
        return 0.0, 0.0
    se = float(a.std(ddof=1)) / math.sqrt(len(a))
    err = m ** (1.0 / p)
    ci = Z95 * se * err / (p * m)
    return err, ci


def strong_error(cfg: RateConfig, p: float = 2.0,
                 sweep: Optional[SweepResult] = None) -> RateReport:
    """Strong L^p error against n, from one coupled sweep."""
    if p <= 0:
        raise ValueError("p must be positive")
    if sweep is None:
        sweep = sweep_functionals(cfg.model, cfg.x0, cfg.t_final, cfg.h,
                                  cfg.n_list, cfg.n_paths, cfg.seed,
                                  cfg.ref_multiplier, cfg.workers)
    beta = cfg.resolved_beta()
    errs, cis, theo = [], [], []
    c_env = const_C(cfg.t_final, p, cfg.b_guess) * cfg.h.sup
    for j, n in enumerate(sweep.n_list):
        diff = sweep.i_ref - sweep.i_coarse[:, j]
        e, ci = _strong_stats(diff, p)
        errs.append(e)
        cis.append(ci)
        theo.append(c_env * math.sqrt(rate_D(beta, cfg.t_final, n)))
    slope, inter, half = fit_rate(sweep.n_list, errs)
    return RateReport(n_list=sweep.n_list, errors=np.array(errs), cis=np.array(cis),
                      theory=np.array(theo), slope=slope, intercept=inter,
                      slope_ci=half, beta=beta, kind="strong", order=p,
                      n_paths=len(sweep.i_ref))


def weak_error(cfg: RateConfig, k: int = 1,
               f: Optional[FunctionalSpec] = None,
               signal_factor: float = 3.0,
               sweep: Optional[SweepResult] = None) -> RateReport:
    """Weak error of the k-th moment weighted by f(X_T).

    Rows whose signal is below `signal_factor` times the Monte Carlo
    halfwidth are excluded from the rate fit and listed in the report.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if f is None:
        f = FunctionalSpec.one()
    if sweep is None:
        sweep = sweep_functionals(cfg.model, cfg.x0, cfg.t_final, cfg.h,
                                  cfg.n_list, cfg.n_paths, cfg.seed,
                                  cfg.ref_multiplier, cfg.workers)
    beta = cfg.resolved_beta()
    fw = f(sweep.x_t)
    f_norm = f.sup
    c_env = const_weak(k, cfg.t_final, beta, cfg.b_guess, cfg.h.sup, f_norm)
    errs, cis, theo = [], [], []
    for j, n in enumerate(sweep.n_list):
        d = (sweep.i_ref ** k - sweep.i_coarse[:, j] ** k) * fw
        errs.append(abs(float(d.mean())))
        cis.append(Z95 * float(d.std(ddof=1)) / math.sqrt(len(d)))
        theo.append(c_env * rate_D(beta, cfg.t_final, n))
    errs, cis = np.array(errs), np.array(cis)
    strong_rows = errs > signal_factor * cis
    excluded = tuple(n for n, keep in zip(sweep.n_list, strong_rows) if not keep)
    if strong_rows.sum() >= 3:
        slope, inter, half = fit_rate(np.array(sweep.n_list)[strong_rows],
                                      errs[strong_rows])
    else:
        slope = inter = half = math.nan
    return RateReport(n_list=sweep.n_list, errors=errs, cis=cis,
                      theory=np.array(theo), slope=slope, intercept=inter,
                      slope_ci=half, beta=beta, kind="weak", order=float(k),
                      excluded=excluded, n_paths=len(sweep.i_ref))


@dataclass(frozen=True)
class AnalyticPhi:
    """Entire-series test function phi(x) = sum a_j x^j with |a_j| <= d_phi / r_phi^j."""

    fn: object
    d_phi: float
    r_phi: float

    def __post_init__(self):
        if self.d_phi <= 0 or self.r_phi <= 0:
            raise ValueError("series envelope constants must be positive")


def analytic_weak_bound(phi: AnalyticPhi, cfg: RateConfig, n: int,
                        f_norm: float = 1.0) -> float:
    """Envelope for |E phi(I_ref) f - E phi(I_{T,n}) f| with analytic phi.

    Valid only while T ||h|| < r_phi; raises otherwise.
    """
    beta = cfg.resolved_beta()
    th = cfg.t_final * cfg.h.sup
    rho = th / phi.r_phi
    if rho >= 1.0:
        raise ValueError("analytic envelope needs T * sup|h| < r_phi")
    c = (2.0 ** max(beta, 2.0) * phi.d_phi * cfg.b_guess * cfg.t_final
         * th * (1.0 + rho) / (1.0 - rho) ** 3 / phi.r_phi)
    return c * rate_D(beta, cfg.t_final, n) * f_norm


def analytic_weak_error(phi: AnalyticPhi, cfg: RateConfig,
                        f: Optional[FunctionalSpec] = None,
                        sweep: Optional[SweepResult] = None):
    """Measured |E phi(I_ref) f - E phi(I_n) f| per n with envelope columns."""
    if f is None:
        f = FunctionalSpec.one()
    if sweep is None:
        sweep = sweep_functionals(cfg.model, cfg.x0, cfg.t_final, cfg.h,
                                  cfg.n_list, cfg.n_paths, cfg.seed,
                                  cfg.ref_multiplier, cfg.workers)
    fw = f(sweep.x_t)
    ref = phi.fn(sweep.i_ref) * fw
    errs, cis, theo = [], [], []
    for j, n in enumerate(sweep.n_list):
        d = ref - phi.fn(sweep.i_coarse[:, j]) * fw
        errs.append(abs(float(d.mean())))
        cis.append(Z95 * float(d.std(ddof=1)) / math.sqrt(len(d)))
        theo.append(analytic_weak_bound(phi, cfg, n, f.sup))
    return np.array(errs), np.array(cis), np.array(theo), sweep
