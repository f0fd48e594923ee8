"""Experiment driver: every laboratory module behind one command.

Subcommands read one section of a line-based config file
(``[section]`` headers, ``key = value`` pairs, ``#`` comments,
comma-separated arrays), run the experiment, and write a CSV plus a
JSON run-manifest holding the fully resolved configuration, the seed
and the package version, so artifacts are reproducible byte for byte.
The worker count is excluded from the manifest: it may change wall
time, never output.

Exit codes: 0 success, 2 configuration error, 3 numerical-budget
failure (quadrature or finite-difference flags, series truncation,
noisy moment estimates), 4 assertion failure when ``--assert`` is
given.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys

import numpy as np

from . import __version__
from .functionals import FunctionalSpec
from .models import (BrownianMotion, DriftSpec, LocallyStableSDE,
                     StableProcess, StableWithDrift, TailSpec, simulate_grid)
from .stable import StableParams
from .ratelab import (AnalyticPhi, RateConfig, analytic_weak_error,
                      strong_error, weak_error)
from .conditionx import estimate_beta, fd_vs_analytic_gap
from .parametrix import (ParametrixConfig, SeriesTruncationError,
                         build_parametrix_density, check_dt_bound,
                         density_ratio_bound, kernel_mass)
from .option import (OptionSpec, estimate_g_lambda, price_table)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ASSERT = 4

SCHEMA = "pathsum-csv v1"

_REQUIRED = object()


class ConfigError(Exception):
    """Invalid or missing configuration; maps to exit code 2."""


class BudgetError(Exception):
    """A declared numerical budget was exceeded; maps to exit code 3."""


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

class _Section:
    """Typed, consuming view of one config section.

    Every key must be taken exactly once; leftovers are unknown keys and
    rejected, so typos fail before any computation starts.
    """

    def __init__(self, name: str, mapping):
        self.name = name
        self.raw = dict(mapping)
        self.resolved = {}

    def _fail(self, key, msg):
        raise ConfigError("[%s] %s: %s" % (self.name, key, msg))

    def _take(self, key, default, cast, check=None):
        if key in self.raw:
            text = self.raw.pop(key)
            try:
                value = cast(text)
            except (TypeError, ValueError):
                self._fail(key, "cannot parse %r" % text)
        elif default is _REQUIRED:
            self._fail(key, "required key missing")
        else:
            value = default
        if check is not None and value is not None:
            err = check(value)
            if err:
                self._fail(key, err)
        self.resolved[key] = value
        return value

    def take_str(self, key, default=_REQUIRED, choices=None):
        def check(v):
            if choices is not None and v not in choices:
                return "must be one of %s" % (sorted(choices),)
        return self._take(key, default, lambda s: str(s).strip(), check)

    def take_float(self, key, default=_REQUIRED, lo=None, hi=None,
                   strict_lo=False):
        def check(v):
            if not math.isfinite(v):
                return "must be finite"
            if lo is not None and (v <= lo if strict_lo else v < lo):
                return "must be %s %r" % (">" if strict_lo else ">=", lo)
            if hi is not None and v > hi:
                return "must be <= %r" % hi
        return self._take(key, default, float, check)

    def take_int(self, key, default=_REQUIRED, lo=None):
        def check(v):
            if lo is not None and v < lo:
                return "must be >= %r" % lo
        return self._take(key, default, lambda s: int(str(s), 10), check)

    def take_bool(self, key, default=_REQUIRED):
        def cast(s):
            t = str(s).strip().lower()
            if t in ("1", "true", "yes", "on"):
                return True
            if t in ("0", "false", "no", "off"):
                return False
            raise ValueError(t)
        return self._take(key, default, cast)

    def take_int_list(self, key, default=_REQUIRED, lo=None):
        def cast(s):
            if isinstance(s, (list, tuple)):
                return tuple(s)
            items = [p.strip() for p in str(s).split(",") if p.strip()]
            return tuple(int(p, 10) for p in items)

        def check(vs):
            if not vs:
                return "must hold at least one entry"
            if lo is not None and min(vs) < lo:
                return "entries must be >= %r" % lo
            if len(set(vs)) != len(vs):
                return "duplicate entries"
        return self._take(key, default, cast, check)

    def take_float_list(self, key, default=_REQUIRED):
        def cast(s):
            if isinstance(s, (list, tuple)):
                return tuple(s)
            items = [p.strip() for p in str(s).split(",") if p.strip()]
            return tuple(float(p) for p in items)
        return self._take(key, default, cast,
                          lambda vs: None if vs else "must hold entries")

    def done(self):
        if self.raw:
            raise ConfigError("[%s] unknown key(s): %s"
                              % (self.name, ", ".join(sorted(self.raw))))


def _load_section(config_path: str, name: str) -> _Section:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                   interpolation=None)
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (config_path, exc))
    except configparser.Error as exc:
        raise ConfigError("config parse error: %s" % exc)
    if not cp.has_section(name):
        raise ConfigError("config is missing the [%s] section" % name)
    return _Section(name, cp[name])


# ---------------------------------------------------------------------------
# shared spec builders
# ---------------------------------------------------------------------------

def _build_model(sec: _Section):
    kind = sec.take_str("model", choices={"brownian", "stable",
                                          "stable-drift", "sde"})
    if kind == "brownian":
        return BrownianMotion(diffusion=sec.take_float(
            "diffusion", 1.0, lo=0.0, strict_lo=True))
    alpha = sec.take_float("alpha", _REQUIRED, lo=0.0, hi=2.0,
                           strict_lo=True)
    params = StableParams(
        alpha,
        c_plus=sec.take_float("c_plus", 1.0, lo=0.0),
        c_minus=sec.take_float("c_minus", 1.0, lo=0.0),
        scale=sec.take_float("scale", 1.0, lo=0.0, strict_lo=True))
    if kind == "stable":
        return StableProcess(params)
    if kind == "stable-drift":
        return StableWithDrift(params, drift=sec.take_float("drift"))
    drift_kind = sec.take_str("drift_kind", "tanh",
                              choices={"tanh", "linear"})
    a = sec.take_float("drift_a", _REQUIRED)
    b = sec.take_float("drift_b", 1.0)
    drift = (DriftSpec.tanh(a, b) if drift_kind == "tanh"
             else DriftSpec.linear(a, b))
    tail_kind = sec.take_str("tail", "tempered",
                             choices={"pure", "tempered", "truncated"})
    if tail_kind == "tempered":
        tail = TailSpec.tempered(sec.take_float("tail_lambda", _REQUIRED,
                                                lo=0.0, strict_lo=True))
    elif tail_kind == "truncated":
        tail = TailSpec.truncated()
    else:
        tail = TailSpec.pure_stable()
    return LocallyStableSDE(drift, params, tail)


def _build_h(sec: _Section) -> FunctionalSpec:
    kind = sec.take_str("h", "below",
                        choices={"below", "interval", "scaled-below"})
    if kind == "below":
        return FunctionalSpec.below(sec.take_float("h_level"))
    if kind == "interval":
        lo = sec.take_float("h_lo")
        hi = sec.take_float("h_hi")
        if hi < lo:
            raise ConfigError("[%s] h_hi: must be >= h_lo" % sec.name)
        return FunctionalSpec.interval(lo, hi)
    return FunctionalSpec.scaled_below(sec.take_float("h_coef"),
                                       sec.take_float("h_level"))


def _rate_config(sec: _Section, model, h, args) -> RateConfig:
    n_list = sec.take_int_list("n_list", lo=2)
    if len(n_list) < 3:
        raise ConfigError("[%s] n_list: need at least 3 levels to fit a rate"
                          % sec.name)
    return RateConfig(
        model=model, x0=sec.take_float("x0", 0.0),
        t_final=sec.take_float("t_final", 1.0, lo=0.0, strict_lo=True),
        h=h, n_list=n_list,
        n_paths=sec.take_int("m_paths", _REQUIRED, lo=8),
        seed=_seed(sec, args),
        ref_multiplier=sec.take_int("ref_multiplier", 64, lo=2),
        workers=max(1, args.workers),
        b_guess=sec.take_float("b_const", 1.0, lo=0.0, strict_lo=True),
        beta=sec.take_float("beta", None, lo=1.0))


def _seed(sec: _Section, args) -> int:
    seed = sec.take_int("seed", 0, lo=0)
    if args.seed is not None:
        seed = args.seed
        sec.resolved["seed"] = seed
    return seed


def _out_path(sec: _Section, args, default_name: str) -> str:
    out = sec.take_str("out", default_name)
    if args.out is not None:
        out = args.out
        sec.resolved["out"] = out
    return out


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path, subcommand, columns, rows, footers=()):
    lines = ["# %s %s" % (SCHEMA, subcommand), ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    for foot in footers:
        lines.append("# " + ",".join("%s=%s" % (k, _fmt(v))
                                     for k, v in foot))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_manifest(path, subcommand, sec: _Section):
    resolved = {k: (_fmt(v) if isinstance(v, (int, float, np.integer))
                    else v if isinstance(v, str)
                    else ",".join(_fmt(x) for x in v) if v is not None
                    else "")
                for k, v in sorted(sec.resolved.items())}
    doc = {"schema": SCHEMA, "subcommand": subcommand,
           "version": __version__, "section": sec.name,
           "resolved": resolved}
    with open(path + ".manifest", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Checks:
    """Collected assertion outcomes for the --assert gate."""

    def __init__(self):
        self.records = []

    def add(self, name, ok, detail):
        self.records.append((name, bool(ok), detail))
        print("  [%s] %s: %s" % ("pass" if ok else "FAIL", name, detail))

    @property
    def all_ok(self):
        return all(ok for _, ok, _ in self.records)


# ---------------------------------------------------------------------------
# subcommand runners; each returns (csv_path, checks)
# ---------------------------------------------------------------------------

def _report_rows(rep):
    return [(n, e, ci, th) for n, e, ci, th in rep.rows()]


def _rate_asserts(sec: _Section, rep, checks: _Checks):
    slope_min = sec.take_float("assert_slope_min", None)
    slope_max = sec.take_float("assert_slope_max", None)
    ratio_max = sec.take_float("assert_ratio_max", None, lo=0.0)
    monotone = sec.take_bool("assert_decreasing", False)
    if slope_min is not None:
        checks.add("slope >= %g" % slope_min, rep.slope >= slope_min,
                   "slope=%.4f" % rep.slope)
    if slope_max is not None:
        checks.add("slope <= %g" % slope_max, rep.slope <= slope_max,
                   "slope=%.4f" % rep.slope)
    if ratio_max is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = rep.errors / rep.theory
        r = r[np.isfinite(r) & (rep.errors > 0)]
        spread = float(r.max() / r.min()) if r.size else math.inf
        checks.add("whitened spread <= %g" % ratio_max, spread <= ratio_max,
                   "max/min=%.3f" % spread)
    if monotone:
        dec = bool(np.all(np.diff(rep.errors) < 0))
        checks.add("errors strictly decreasing", dec,
                   "errors=%s" % np.array2string(rep.errors, precision=3))


def run_strong_rate(sec: _Section, args):
    model = _build_model(sec)
    h = _build_h(sec)
    cfg = _rate_config(sec, model, h, args)
    p = sec.take_float("p", 2.0, lo=0.0, strict_lo=True)
    out = _out_path(sec, args, "strong_rate.csv")
    checks = _Checks()
    rep = strong_error(cfg, p=p)
    _rate_asserts(sec, rep, checks)
    sec.done()
    foot = [[("kind", rep.kind), ("order", rep.order), ("beta", rep.beta),
             ("slope", rep.slope), ("slope_ci", rep.slope_ci),
             ("intercept", rep.intercept), ("m_paths", rep.n_paths)]]
    _write_csv(out, "strong-rate", ("n", "error", "ci", "theory"),
               _report_rows(rep), foot)
    return out, sec, checks


def run_weak_rate(sec: _Section, args):
    model = _build_model(sec)
    h = _build_h(sec)
    cfg = _rate_config(sec, model, h, args)
    k = sec.take_int("k", 1, lo=1)
    signal = sec.take_float("signal_factor", 3.0, lo=0.0)
    out = _out_path(sec, args, "weak_rate.csv")
    checks = _Checks()
    rep = weak_error(cfg, k=k, signal_factor=signal)
    _rate_asserts(sec, rep, checks)
    sec.done()
    foot = [[("kind", rep.kind), ("order", rep.order), ("beta", rep.beta),
             ("slope", rep.slope), ("slope_ci", rep.slope_ci),
             ("intercept", rep.intercept), ("m_paths", rep.n_paths),
             ("excluded", ";".join(str(n) for n in rep.excluded))]]
    _write_csv(out, "weak-rate", ("n", "error", "ci", "theory"),
               _report_rows(rep), foot)
    return out, sec, checks


def run_analytic_weak(sec: _Section, args):
    model = _build_model(sec)
    h = _build_h(sec)
    cfg = _rate_config(sec, model, h, args)
    r_phi = sec.take_float("r_phi", _REQUIRED, lo=0.0, strict_lo=True)
    coef = sec.take_float("phi_coef", 1.0)
    kind = sec.take_str("phi", "exp", choices={"exp", "sin"})
    if kind == "exp":
        phi = AnalyticPhi(fn=lambda x: np.exp(coef * np.asarray(x)),
                          d_phi=math.exp(abs(coef) * r_phi), r_phi=r_phi)
    else:
        phi = AnalyticPhi(fn=lambda x: np.sin(coef * np.asarray(x)),
                          d_phi=math.exp(abs(coef) * r_phi), r_phi=r_phi)
    if cfg.t_final * h.sup >= r_phi:
        raise ConfigError("[%s] r_phi: analytic envelope needs "
                          "T * sup|h| < r_phi" % sec.name)
    within = sec.take_bool("assert_within_bound", False)
    out = _out_path(sec, args, "analytic_weak.csv")
    checks = _Checks()
    errs, cis, theo, _ = analytic_weak_error(phi, cfg)
    if within:
        ok = bool(np.all(errs <= theo + 2.0 * cis))
        checks.add("errors within analytic envelope", ok,
                   "max excess=%.3g" % float(np.max(errs - theo)))
    sec.done()
    rows = [(n, errs[i], cis[i], theo[i]) for i, n in enumerate(cfg.n_list)]
    _write_csv(out, "analytic-weak", ("n", "error", "ci", "bound"), rows)
    return out, sec, checks


def run_verify_x(sec: _Section, args):
    model = _build_model(sec)
    if isinstance(model, LocallyStableSDE):
        raise ConfigError("[%s] model: the derivative verification needs a "
                          "closed-form density (brownian, stable or "
                          "stable-drift); use the parametrix subcommand for "
                          "the sde model" % sec.name)
    x = sec.take_float("x", 0.0)
    t_final = sec.take_float("t_final", 1.0, lo=0.0, strict_lo=True)
    t_lo = sec.take_float("t_lo_frac", 1e-4, lo=0.0, strict_lo=True)
    t_hi = sec.take_float("t_hi_frac", 1e-1, lo=0.0, strict_lo=True)
    pts = sec.take_int("t_points", 13, lo=3)
    if t_hi <= t_lo:
        raise ConfigError("[%s] t_hi_frac: must exceed t_lo_frac" % sec.name)
    fd_t = sec.take_float("fd_check_t", None, lo=0.0, strict_lo=True)
    fd_budget = sec.take_float("fd_budget", None, lo=0.0, strict_lo=True)
    beta_min = sec.take_float("assert_beta_min", None)
    beta_max = sec.take_float("assert_beta_max", None)
    _seed(sec, args)                       # accepted for uniformity; unused
    out = _out_path(sec, args, "verify_x.csv")
    sec.done()
    checks = _Checks()
    t_list = t_final * np.logspace(math.log10(t_lo), math.log10(t_hi), pts)
    rep = estimate_beta(model, t_list=t_list, x=x, t_final=t_final)
    fd_gap = None
    if fd_t is not None:
        try:
            fd_gap = fd_vs_analytic_gap(model, fd_t, x=x)
        except TypeError as exc:
            raise ConfigError("[%s] fd_check_t: %s" % (sec.name, exc))
    if beta_min is not None:
        checks.add("beta_hat >= %g" % beta_min, rep.beta_hat >= beta_min,
                   "beta_hat=%.4f" % rep.beta_hat)
    if beta_max is not None:
        checks.add("beta_hat <= %g" % beta_max, rep.beta_hat <= beta_max,
                   "beta_hat=%.4f" % rep.beta_hat)
    rows = list(zip(rep.t_values, rep.n_values))
    foot = [("beta_hat", rep.beta_hat), ("b_hat", rep.b_hat),
            ("slope_ci", rep.slope_ci), ("mass_worst", rep.mass_worst)]
    if fd_gap is not None:
        foot.append(("fd_gap", fd_gap))
    _write_csv(out, "verify-x", ("t", "dp_dt_abs_integral"), rows, [foot])
    if fd_budget is not None and fd_gap is not None and fd_gap > fd_budget:
        raise BudgetError("finite-difference cross-check gap %.3g exceeds "
                          "budget %.3g" % (fd_gap, fd_budget))
    return out, sec, checks


def run_parametrix(sec: _Section, args):
    model = _build_model(sec)
    if not isinstance(model, LocallyStableSDE):
        raise ConfigError("[%s] model: the density construction needs the "
                          "sde model" % sec.name)
    x0 = sec.take_float("x0", 0.0)
    t_max = sec.take_float("t_max", 1.0, lo=0.0, strict_lo=True)
    defaults = ParametrixConfig()
    cfg = ParametrixConfig(
        n_t=sec.take_int("n_t", defaults.n_t, lo=6),
        n_eta=sec.take_int("n_eta", defaults.n_eta, lo=21),
        eta_max=sec.take_float("eta_max", defaults.eta_max, lo=1.0),
        n_s=sec.take_int("n_s", defaults.n_s, lo=4),
        k_max=sec.take_int("k_max", defaults.k_max, lo=2),
        tau_series=sec.take_float("tau_series", defaults.tau_series,
                                  lo=0.0, strict_lo=True),
        t_min_frac=sec.take_float("t_min_frac", defaults.t_min_frac,
                                  lo=0.0, strict_lo=True))
    mass_times = sec.take_float_list("mass_times", (0.1, 0.5, 1.0))
    fit_t_max = sec.take_float("fit_t_max", None, lo=0.0, strict_lo=True)
    mass_tol = sec.take_float("assert_mass_tol", None, lo=0.0,
                              strict_lo=True)
    beta_min = sec.take_float("assert_beta_min", None)
    beta_max = sec.take_float("assert_beta_max", None)
    _seed(sec, args)
    out = _out_path(sec, args, "parametrix.csv")
    sec.done()
    checks = _Checks()
    try:
        state = build_parametrix_density(model, x0=x0, t_max=t_max,
                                         config=cfg)
    except SeriesTruncationError as exc:
        raise BudgetError("series truncation: %s" % exc)
    rows = []
    worst = 0.0
    for t in mass_times:
        m = kernel_mass(state, t)
        worst = max(worst, abs(m - 1.0))
        rows.append((t, m))
    dt_rep = check_dt_bound(state, fit_t_max=fit_t_max)
    c_bound, _ = density_ratio_bound(state)
    if mass_tol is not None:
        checks.add("mass within %g" % mass_tol, worst <= mass_tol,
                   "worst |mass-1|=%.2e" % worst)
    if beta_min is not None:
        checks.add("beta_hat >= %g" % beta_min,
                   dt_rep.beta_hat >= beta_min,
                   "beta_hat=%.4f" % dt_rep.beta_hat)
    if beta_max is not None:
        checks.add("beta_hat <= %g" % beta_max,
                   dt_rep.beta_hat <= beta_max,
                   "beta_hat=%.4f" % dt_rep.beta_hat)
    foot = [[("beta_hat", dt_rep.beta_hat), ("b_hat", dt_rep.b_hat),
             ("slope_ci", dt_rep.slope_ci), ("sup_ratio", dt_rep.sup_ratio),
             ("density_ratio_bound", c_bound),
             ("series_tail", state.tail_bound), ("k_max", state.k_max)]]
    _write_csv(out, "parametrix", ("t", "mass"), rows, foot)
    return out, sec, checks


def run_price_option(sec: _Section, args):
    model = _build_model(sec)
    opt = OptionSpec(
        s0=sec.take_float("s0", _REQUIRED, lo=0.0, strict_lo=True),
        strike=sec.take_float("strike", _REQUIRED, lo=0.0, strict_lo=True),
        barrier=sec.take_float("barrier", _REQUIRED, lo=0.0,
                               strict_lo=True),
        rho=sec.take_float("rho", _REQUIRED, lo=0.0),
        rate=sec.take_float("rate", 0.0),
        t_final=sec.take_float("t_final", 1.0, lo=0.0, strict_lo=True),
        lambda_moment=sec.take_float("lambda_moment", 2.0, lo=1.0,
                                     strict_lo=True))
    n_list = sec.take_int_list("n_list", lo=2)
    m_paths = sec.take_int("m_paths", _REQUIRED, lo=8)
    seed = _seed(sec, args)
    ref_mult = sec.take_int("ref_multiplier", 64, lo=2)
    beta = sec.take_float("beta", None, lo=1.0)
    b_const = sec.take_float("b_const", None, lo=0.0, strict_lo=True)
    g_mode = sec.take_str("g_lambda", "estimate")
    g_paths = sec.take_int("g_paths", 100_000, lo=8)
    g_steps = sec.take_int("g_steps", 64, lo=2)
    gap_dec = sec.take_bool("assert_gap_decreasing", False)
    within = sec.take_bool("assert_within_bounds", False)
    out = _out_path(sec, args, "price_option.csv")
    sec.done()
    checks = _Checks()
    workers = max(1, args.workers)
    g_val = None
    if beta is not None and b_const is not None:
        if g_mode == "estimate":
            try:
                g_est = estimate_g_lambda(opt, model, m_paths=g_paths,
                                          n_steps=g_steps, seed=seed + 1,
                                          workers=workers)
            except ValueError as exc:
                raise ConfigError("[%s] model: %s" % (sec.name, exc))
            if g_est.flagged:
                raise BudgetError(
                    "G(lambda) estimate %.4g has CI %.3g beyond 25%%"
                    % (g_est.value, g_est.ci))
            g_val = g_est.value
        else:
            try:
                g_val = float(g_mode)
            except ValueError:
                raise ConfigError("[%s] g_lambda: must be 'estimate' or a "
                                  "number" % sec.name)
    rows = price_table(opt, model, n_list, m_paths, seed=seed,
                       ref_multiplier=ref_mult, workers=workers,
                       beta=beta, b_const=b_const, g_lambda=g_val)
    if gap_dec:
        gaps = [abs(r.gap) for r in rows]
        ok = all(b < a for a, b in zip(gaps, gaps[1:]))
        checks.add("coupled |gap| decreasing", ok,
                   "gaps=%s" % ["%.2e" % g for g in gaps])
    if within and g_val is not None:
        ok = all(abs(r.gap) <= min(r.bound41, r.bound42) + 2.0 * r.gap_ci
                 for r in rows)
        checks.add("gaps within budgets", ok, "rows=%d" % len(rows))
    csv_rows = [(r.n, r.price, r.ci, r.ref_price, r.ref_ci, r.gap,
                 r.bound41, r.bound42) for r in rows]
    foot = [[("g_lambda", g_val if g_val is not None else math.nan),
             ("m_paths", m_paths)]]
    _write_csv(out, "price-option",
               ("n", "price", "ci", "ref_price", "ref_ci", "gap",
                "bound41", "bound42"), csv_rows, foot)
    return out, sec, checks


def run_simulate(sec: _Section, args):
    model = _build_model(sec)
    x0 = sec.take_float("x0", 0.0)
    t_final = sec.take_float("t_final", 1.0, lo=0.0, strict_lo=True)
    n_steps = sec.take_int("n_steps", _REQUIRED, lo=1)
    m_paths = sec.take_int("m_paths", 1, lo=1)
    seed = _seed(sec, args)
    out = _out_path(sec, args, "paths.csv")
    sec.done()
    rows = []
    dt = t_final / n_steps
    for j in range(m_paths):
        path = simulate_grid(model, x0, t_final, n_steps, seed, j)
        for k, v in enumerate(path.states):
            rows.append((j, k, k * dt, v))
    _write_csv(out, "simulate", ("path", "k", "t", "x"), rows)
    return out, sec, _Checks()


RUNNERS = {
    "strong-rate": run_strong_rate,
    "weak-rate": run_weak_rate,
    "analytic-weak": run_analytic_weak,
    "verify-x": run_verify_x,
    "parametrix": run_parametrix,
    "price-option": run_price_option,
    "simulate": run_simulate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathsum",
        description="Riemann-sum approximation laboratory driver")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name, help="run the %s experiment" % name)
        p.add_argument("--config", required=True,
                       help="path to the experiment config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--workers", type=int, default=1,
                       help="process count (never changes results)")
        p.add_argument("--out", default=None,
                       help="override the output CSV path")
        p.add_argument("--assert", dest="enforce", action="store_true",
                       help="exit 4 when a configured assertion fails")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    name = args.subcommand
    try:
        sec = _load_section(args.config, name)
        out, sec, checks = RUNNERS[name](sec, args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print("numerical budget failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC
    _write_manifest(out, name, sec)
    print("wrote %s (+ manifest)" % out)
    if args.enforce and not checks.all_ok:
        print("assertion failure: %d check(s) failed"
              % sum(1 for _, ok, _ in checks.records if not ok),
              file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
