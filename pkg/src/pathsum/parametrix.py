"""Transition-density construction for drifted locally stable SDEs.

The density of ``dX = b(X) dt + dZ`` (Z locally alpha-stable, alpha < 1) is
built as a series: a zero-order kernel transports the driving stable density
along the reverse drift flow, and a correction kernel — drift variation plus
big-jump tail difference — is convolved against it in space-time, repeatedly,
until the fitted factorial envelope says the dropped remainder is below
budget.  All kernels are tabulated on a (log time) x (stretched space) grid
from one fixed start point; every constant reported by the check functions is
an on-grid certificate, not a proof.

Layout of a kernel table: rows are time slices, columns are the fixed
stretched-space nodes eta; the spatial node of slice i at column j is
``chi(t_i) + sigma(t_i) * sinh(eta_j)``, which tracks both the drifting
center and the self-similar spread of the driver.  Tables store
``sigma(t) * kernel`` so that every row has comparable magnitude.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats
from scipy.interpolate import PchipInterpolator, RectBivariateSpline

from .models import (TAIL_PURE, DriftSpec, LocallyStableSDE, TailSpec,
                     _stable_norm_const, flow_chi, flow_theta)
from .stable import StableParams, density_table, integrate_with_tails

__all__ = [
    "ParametrixConfig", "ParametrixState", "ParametrixDensity",
    "SeriesTruncationError", "build_parametrix_density", "density_slice",
    "kernel_mass", "kernel_matrix", "parametrix_p0", "parametrix_phi",
    "density_ratio_bound", "phi_ratio_bound", "check_dt_bound",
    "DtBoundReport", "check_flow_equivalence", "FlowReport",
    "check_q_normalization", "check_subconvolution", "chapman_kolmogorov_gap",
    "SpaceTimeKernel", "stable_kernel", "spatial_convolution",
    "convolve_space_time", "star_kernel",
]


class SeriesTruncationError(RuntimeError):
    """The fitted envelope says the dropped series tail exceeds the budget."""


@dataclass(frozen=True)
class ParametrixConfig:
    """Desk-scale resolution knobs for the density construction."""

    n_t: int = 25                 # log-spaced time slices in [t_min, t_max]
    t_min_frac: float = 1e-3      # first slice as a fraction of t_max
    n_eta: int = 229              # stretched-space nodes per slice (odd keeps 0)
    eta_max: float = 6.05         # half width in asinh units (~210 scale units)
    n_s: int = 14                 # quadrature nodes per half time interval
    time_warp: float = 3.0        # node clustering exponent at the endpoints
    k_max: int = 4                # series truncation order
    tau_series: float = 1e-3      # budget for the fitted series remainder
    w_core_half: float = 8.0      # spatial quadrature: linear core half width
    n_w_core: int = 49
    w_max: float = 400.0          # spatial quadrature: wing reach (scale units)
    n_w_wing: int = 22
    jump_reach: float = 240.0     # absolute reach of tail-difference nodes
    n_jump: int = 47

    def __post_init__(self):
        if self.n_t < 6:
            raise ValueError("need at least 6 time slices")
        if self.k_max < 2:
            raise ValueError("series order must be at least 2")
        if not (0.0 < self.t_min_frac < 0.1):
            raise ValueError("t_min_frac must lie in (0, 0.1)")

    def refined(self, factor: int = 2) -> "ParametrixConfig":
        """Same box, finer spatial resolution (node spacing / factor)."""
        return replace(self, n_eta=factor * (self.n_eta - 1) + 1)


@dataclass
class ParametrixState:
    """Built kernel tables plus the series-control certificates."""

    model: LocallyStableSDE
    x0: float
    t_max: float
    config: ParametrixConfig
    t_grid: np.ndarray            # (n_t,)
    eta_grid: np.ndarray          # (n_eta,)
    chi: np.ndarray               # (n_t,) forward flow of x0
    sigma: np.ndarray             # (n_t,) driver scale per slice
    y_slices: np.ndarray          # (n_t, n_eta) spatial nodes per slice
    theta_slices: np.ndarray      # (n_t, n_eta) reverse flow of the nodes
    s_nodes: np.ndarray           # (n_t, n_s) time-quadrature nodes per slice
    p0_table: np.ndarray          # scaled zero-order kernel
    q_tables: List[np.ndarray]    # scaled series terms (k >= 1)
    r_tables: List[np.ndarray]    # scaled k-fold correction kernels (k >= 1)
    psi_table: np.ndarray         # sum of the r tables
    p_slices: np.ndarray          # density values on the slice nodes
    k_max: int
    tail_bound: float             # fitted estimate of the dropped remainder
    env_c0: float                 # fitted envelope constants: leading ...
    env_c: float                  # ... and per-order growth factor
    env_ratios: np.ndarray        # (k_max,) whitened k-fold kernel maxima
    term_maxima: np.ndarray       # (k_max,) raw maxima of the k-fold kernels
    exact_reduction: bool         # constant drift + matching tail: no series
    diagnostics: Dict[str, float] = field(default_factory=dict)
    _q_splines: list = field(default_factory=list, repr=False)
    _r_splines: list = field(default_factory=list, repr=False)

    @property
    def alpha(self) -> float:
        return self.model.params.alpha


@dataclass(frozen=True)
class DtBoundReport:
    """Certificate for |dp/dt| <= const * t^(-1/alpha) * envelope."""

    sup_ratio: float              # max over the grid of the whitened ratio
    ratios: np.ndarray            # per-slice whitened maxima
    t_values: np.ndarray          # interior slice times
    n_values: np.ndarray          # integral of |dp/dt| per slice
    beta_hat: float               # minus the fitted slope of log N vs log t
    b_hat: float                  # max of N(t) t^beta_hat over the fit window
    slope_ci: float               # 95% half width of the slope
    fit_t_max: float              # upper end of the fit window


@dataclass(frozen=True)
class FlowReport:
    """Two-sided comparability of |y - chi_t(x0)| and |theta_t(y) - x0|."""

    c_lower: float
    c_upper: float

    def finite(self) -> bool:
        return self.c_lower > 0.0 and math.isfinite(self.c_upper)


# ---------------------------------------------------------------------------
# internal builder
# ---------------------------------------------------------------------------

@dataclass
class _ConvNode:
    """One time-quadrature node of the half-interval split.

    The lower-order kernel is evaluated at time tau_low (center chi_low,
    scale sig_low); the correction kernel acts over time s_ker and is
    resolved around u_nodes = theta_{s_ker}(y) with width sig_ker.

    mode selects the quadrature strategy by the scale ratio
    sig_low / sig_ker: "resolved" (both scales on a union grid),
    "mass_lump" (the lower kernel is a near-delta: its mass times a point
    evaluation of the correction kernel) or "kernel_lump" (the correction
    kernel acts through its short-time local limit: minus the drift
    gradient times the lower kernel, plus the jump-difference
    convolution).  Without the lumping, the trapezoid rule would bridge a
    heavy-tailed spike into the coarse grid and destroy the integral.
    """

    weight: float
    tau_low: float
    s_ker: float
    sig_ker: float
    chi_low: float
    sig_low: float
    u_nodes: np.ndarray
    b_u: np.ndarray
    f2: Optional["_F2Kernel"]
    use_jump_nodes: bool
    mode: str
    bprime_u: Optional[np.ndarray] = None


class _F2Kernel:
    """Tabulated tail-difference correction at one kernel time."""

    def __init__(self, builder: "_Builder", sig: float):
        self.builder = builder
        self.sig = sig
        d_pos = builder._f2_d_positive(sig)
        d_grid = np.concatenate([-d_pos[::-1], d_pos[1:]])
        vals = builder._f2_direct(sig, d_grid)
        self.d_hi = d_grid[-1]
        self.interp = PchipInterpolator(d_grid, vals, extrapolate=False)

    def __call__(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        out = np.empty_like(d)
        inside = np.abs(d) <= self.d_hi
        out[inside] = self.interp(d[inside])
        far = ~inside
        if np.any(far):
            # beyond the table the kernel is the raw jump-density
            # difference: the smoothing corrections and the mass term
            # cancel each other at this distance
            b = self.builder
            out[far] = b.q_jump * b._tail_delta(d[far])
        return out


# scale-ratio thresholds selecting the per-node quadrature strategy
_RATIO_MASS_LUMP = 0.008
_RATIO_KERNEL_LUMP = 150.0


class _Q0Kernel:
    """Zero-order lower kernel: tabulated above the first slice, the
    linearized reverse flow below it.  Mass is exactly one."""

    kind = "q0"

    def __init__(self, builder: "_Builder"):
        self.builder = builder

    def __call__(self, nd: _ConvNode, z: np.ndarray) -> np.ndarray:
        b = self.builder
        if nd.tau_low >= b.t_grid[0]:
            return b._rbs_eval(b.spl_p0, math.log(nd.tau_low),
                               nd.chi_low, nd.sig_low, z)
        th = z - nd.tau_low * b.b(z)
        return b.tab.eval_scaled(th - b.x0, nd.sig_low)

    def mass(self, tau: float) -> float:
        return 1.0


class _TableKernel:
    """Series-term lower kernel: spline over its table, power-law
    closure below the first slice, tabulated signed mass.  kind "phi"
    marks the first correction kernel, whose short-time limit is an
    operator action rather than a point mass."""

    def __init__(self, builder: "_Builder", table: np.ndarray,
                 small_t_power: float,
                 exact_small: Optional[Callable] = None):
        self.kind = "phi" if exact_small is not None else "table"
        self.builder = builder
        self.spl = RectBivariateSpline(builder.log_t, builder.eta, table)
        self.power = small_t_power
        self.exact_small = exact_small
        masses = np.empty(builder.cfg.n_t)
        for i in range(builder.cfg.n_t):
            dy = builder.sigma[i] * builder.sinh_eta
            vals = table[i] / builder.sigma[i]
            masses[i] = integrate_with_tails(dy, vals, builder.alpha)[0]
        self.mass_interp = PchipInterpolator(builder.log_t, masses)
        self.mass0 = float(masses[0])

    def __call__(self, nd: _ConvNode, z: np.ndarray) -> np.ndarray:
        b = self.builder
        lo = b.t_grid[0]
        if nd.tau_low >= lo:
            return b._rbs_eval(self.spl, math.log(nd.tau_low),
                               nd.chi_low, nd.sig_low, z)
        if self.exact_small is not None:
            return self.exact_small(nd, z)
        amp = (nd.tau_low / lo) ** self.power
        return b._rbs_eval(self.spl, b.log_t[0], nd.chi_low, nd.sig_low, z,
                           amp=amp)

    def mass(self, tau: float) -> float:
        lo = self.builder.t_grid[0]
        if tau >= lo:
            return float(self.mass_interp(math.log(tau)))
        return self.mass0 * (tau / lo) ** self.power


class _Builder:
    def __init__(self, model: LocallyStableSDE, x0: float, t_max: float,
                 cfg: ParametrixConfig):
        if not isinstance(model, LocallyStableSDE):
            raise TypeError("the construction needs a LocallyStableSDE model")
        if t_max <= 0:
            raise ValueError("t_max must be positive")
        self.model = model
        self.cfg = cfg
        self.x0 = float(x0)
        self.t_max = float(t_max)
        p = model.params
        self.p = p
        self.alpha = p.alpha
        self.b = model.drift
        self.b_x0 = float(model.drift(np.array(self.x0)))
        self.tail = model.tail
        self.tab = density_table(p.alpha, p.skew)
        self.env_tab = density_table(p.alpha, 0.0)
        self.a_weight = p.weight
        self.a_env = p.scale          # symmetric peer with unit side weights
        self.q_jump = p.scale / _stable_norm_const(p.alpha)
        self.pure = TailSpec.pure_stable()
        self.has_tail_diff = self.tail.kind != TAIL_PURE
        self.exact_reduction = (not self.has_tail_diff) and self.b.lip == 0.0

        # grids
        self.t_grid = np.geomspace(cfg.t_min_frac * t_max, t_max, cfg.n_t)
        self.log_t = np.log(self.t_grid)
        self.eta = np.linspace(-cfg.eta_max, cfg.eta_max, cfg.n_eta)
        self.sinh_eta = np.sinh(self.eta)
        self.sinh_hi = math.sinh(cfg.eta_max)
        self.sigma = self._scale(self.t_grid)
        self.chi = np.array([flow_chi(self.b, self.x0, t)
                             for t in self.t_grid])
        self.y_slices = (self.chi[:, None]
                         + self.sigma[:, None] * self.sinh_eta[None, :])
        self.theta_slices = np.array([
            flow_theta(self.b, self.y_slices[i], t)
            for i, t in enumerate(self.t_grid)])

        # spatial quadrature master nodes (local scale units)
        core = np.linspace(-cfg.w_core_half, cfg.w_core_half, cfg.n_w_core)
        wing = np.geomspace(cfg.w_core_half, cfg.w_max, cfg.n_w_wing + 1)[1:]
        self.w_nodes = np.concatenate([-wing[::-1], core, wing])
        self.jump_nodes = None
        if self.has_tail_diff:
            pos = np.geomspace(1.0, cfg.jump_reach, cfg.n_jump)
            self.jump_nodes = np.concatenate([-pos[::-1], pos])

        # tail-difference bookkeeping
        if self.has_tail_diff:
            if self.tail.kind == TAIL_PURE:
                v_hi = 2.0
            elif self.tail.lam > 0.0:
                v_hi = 1.0 + 50.0 / self.tail.lam
            else:
                v_hi = 4.0 * cfg.jump_reach
            self.v_max = max(60.0, v_hi)
            self.v_ladder = np.geomspace(1.0, self.v_max, 72)
            self.w_sub = np.linspace(-12.0, 12.0, 73)
            self.rel_win = np.linspace(-0.06, 0.06, 81)
            # largest displacement the correction kernel is queried at:
            # slice reach plus the widest union-grid wing
            self.f2_reach = max(1.5 * cfg.jump_reach,
                                1.05 * (math.sinh(cfg.eta_max) + cfg.w_max)
                                * self._scale(t_max))
            # jump ladder for the local-limit branches: must span from the
            # smallest jump to past the farthest slice node
            v_top = max(150.0, 1.1 * math.sinh(cfg.eta_max)
                        * float(self._scale(t_max)))
            n_v = int(49.0 * math.log(v_top) / math.log(150.0)) + 1
            self.v_lump = np.geomspace(1.0, v_top, n_v)
            both = lambda u: float(self._tail_delta(np.array([u]))[0]
                                   + self._tail_delta(np.array([-u]))[0])
            self.delta_mass = integrate.quad(both, 1.0, np.inf, limit=200)[0]
        else:
            self.delta_mass = 0.0
        self.spike_reach = max(60.0, 1.05 * math.sinh(cfg.eta_max)
                               * float(self._scale(t_max)))
        self.lin_win = np.linspace(-12.0, 12.0, 25)
        self.bprime_x0 = float(self._bprime(np.array([self.x0]))[0])

        # time quadrature template on (0, 1/2], clustered at both endpoints
        xg, wg = np.polynomial.legendre.leggauss(cfg.n_s)
        xi = 0.5 * (xg + 1.0)
        g = cfg.time_warp
        self.s_frac = 0.5 * xi ** g
        self.s_frac_w = 0.5 * wg * 0.5 * g * xi ** (g - 1.0)

        self.nodes: List[List[_ConvNode]] = []
        self.s_nodes = self.t_grid[:, None] * self.s_frac[None, :]

    # -- elementary quantities ---------------------------------------------

    def _scale(self, t):
        return (self.a_weight * np.asarray(t, dtype=float)) ** (1.0 / self.alpha)

    def _env_scale(self, t):
        return (self.a_env * t) ** (1.0 / self.alpha)

    def _tail_delta(self, v):
        """Jump-density difference (actual minus stable), canonical units."""
        return (self.tail.density(v, self.alpha, self.p.c_plus, self.p.c_minus)
                - self.pure.density(v, self.alpha, self.p.c_plus,
                                    self.p.c_minus))

    def _levy_density(self, w):
        """Model jump intensity in real units: stable inside the unit
        ball, the configured tail outside."""
        aw = np.abs(np.asarray(w, dtype=float))
        c_side = np.where(np.asarray(w) >= 0, self.p.c_plus, self.p.c_minus)
        inner = c_side * np.where(aw > 0, aw, 1.0) ** (-1.0 - self.alpha)
        outer = self.tail.density(w, self.alpha, self.p.c_plus,
                                  self.p.c_minus)
        return self.q_jump * np.where(aw < 1.0, inner, outer)

    def envelope(self, t: float, dy: np.ndarray) -> np.ndarray:
        """Symmetric two-time comparison kernel at displacement dy."""
        s1 = self._env_scale(t + 1.0)
        s0 = self._env_scale(t)
        return (self.env_tab.eval_scaled(dy, s1)
                + self.env_tab.eval_scaled(dy, s0))

    # -- tail-difference kernel --------------------------------------------

    def _f2_d_positive(self, sig: float) -> np.ndarray:
        pieces = [sig * np.linspace(0.0, 8.0, 17)]
        lo = max(8.0 * sig, 0.04)
        if lo < 1.6:
            pieces.append(np.geomspace(lo, 1.6, 16))
        if sig < 0.15:
            # boundary layer around the jump-size cutoff
            pieces.append(np.clip(1.0 + sig * np.linspace(-6.0, 6.0, 13),
                                  0.5, 2.0))
        hi0 = max(1.6, lo * 1.05)
        pieces.append(np.geomspace(hi0, max(self.f2_reach, 4.0 * hi0), 30))
        return np.unique(np.concatenate(pieces))

    def _f2_direct(self, sig: float, d) -> np.ndarray:
        """Correction kernel value: smoothed tail difference minus its mass."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        total = np.zeros_like(d)
        d_top = float(np.max(np.abs(d))) if d.size else 0.0
        if 1.3 * d_top > self.v_max:
            # the jump ladder must reach past the farthest displacement so
            # the pure-stable part of the tail difference is not cut off
            v_hi = 1.3 * d_top
            n_lad = int(72 * math.log(v_hi) / math.log(self.v_max)) + 1
            ladder = np.geomspace(1.0, v_hi, n_lad)
        else:
            v_hi, ladder = self.v_max, self.v_ladder
        for side in (1.0, -1.0):
            sd = side * d[:, None]
            win = np.clip(sd + sig * self.w_sub[None, :], 1.0, v_hi)
            # proportional window: keeps the spike's power tails resolved
            # even where the geometric ladder is coarser than sigma
            rel = np.clip(sd * (1.0 + self.rel_win[None, :]), 1.0, v_hi)
            base = np.broadcast_to(ladder, (d.size, ladder.size))
            v = np.concatenate([base, win, rel], axis=1)
            v.sort(axis=1)
            gvals = self.tab.eval_scaled(d[:, None] - side * v, sig)
            total += np.trapezoid(gvals * self._tail_delta(side * v), v, axis=1)
        total -= self.tab.eval_scaled(d, sig) * self.delta_mass
        return self.q_jump * total

    # -- correction kernel and node preparation ----------------------------

    def _bprime(self, u: np.ndarray) -> np.ndarray:
        eps = 1e-5 * (1.0 + np.abs(u))
        return (self.b(u + eps) - self.b(u - eps)) / (2.0 * eps)

    def _make_node(self, t: float, s_ker: float, tau_low: float,
                   weight: float, y_row: np.ndarray) -> _ConvNode:
        sig_ker = float(self._scale(s_ker))
        sig_low = float(self._scale(tau_low))
        ratio = sig_low / sig_ker
        if ratio < _RATIO_MASS_LUMP:
            mode = "mass_lump"
        elif ratio > _RATIO_KERNEL_LUMP:
            mode = "kernel_lump"
        else:
            mode = "resolved"
        u_nodes = flow_theta(self.b, y_row, s_ker)
        f2 = None
        if self.has_tail_diff and mode != "kernel_lump":
            f2 = _F2Kernel(self, sig_ker)
        use_jump = (self.jump_nodes is not None
                    and sig_ker * self.cfg.w_max < 1.3 * self.cfg.jump_reach)
        bp = self._bprime(u_nodes) if mode == "kernel_lump" else None
        return _ConvNode(weight=float(weight), tau_low=float(tau_low),
                         s_ker=float(s_ker), sig_ker=sig_ker,
                         chi_low=float(flow_chi(self.b, self.x0, tau_low)),
                         sig_low=sig_low,
                         u_nodes=u_nodes, b_u=np.asarray(self.b(u_nodes)),
                         f2=f2, use_jump_nodes=use_jump, mode=mode,
                         bprime_u=bp)

    def _prepare_nodes(self):
        for i, t in enumerate(self.t_grid):
            row = []
            y_row = self.y_slices[i]
            for j in range(self.cfg.n_s):
                s = t * self.s_frac[j]
                w = t * self.s_frac_w[j]
                # near half: correction kernel acts over the short time s
                row.append(self._make_node(t, s, t - s, w, y_row))
                # far half: the lower-order kernel carries the short time
                row.append(self._make_node(t, t - s, s, w, y_row))
            self.nodes.append(row)

    # -- kernel evaluators ---------------------------------------------------

    def _rbs_eval(self, spl, log_tau: float, chi_c: float, sig_c: float,
                  z: np.ndarray, amp: float = 1.0) -> np.ndarray:
        eta = np.arcsinh((z - chi_c) / sig_c)
        ae = np.abs(eta)
        eta_cl = np.clip(eta, -self.cfg.eta_max, self.cfg.eta_max)
        v = spl.ev(np.full(z.size, log_tau), eta_cl.ravel()).reshape(z.shape)
        over = ae > self.cfg.eta_max
        if np.any(over):
            v[over] *= (np.sinh(ae[over]) / self.sinh_hi) ** (-1.0 - self.alpha)
        return (amp / sig_c) * v

    def _r1_exact_small(self, nd: _ConvNode, z: np.ndarray) -> np.ndarray:
        th = z - nd.tau_low * self.b(z)
        d = th - self.x0
        sig = nd.sig_low
        out = (self.b(th) - self.b_x0) * self.tab(d / sig, 1) / sig ** 2
        if self.has_tail_diff:
            out = out + self._f2_direct(sig, d.ravel()).reshape(d.shape)
        return out

    # -- one convolution pass ------------------------------------------------

    def _phi_at(self, nd: _ConvNode, z) -> np.ndarray:
        """Correction kernel at intermediate points z against the node's
        evaluation row (u_nodes broadcast on the first axis)."""
        z = np.asarray(z, dtype=float)
        u = nd.u_nodes if z.ndim == 1 else nd.u_nodes[:, None]
        b_u = nd.b_u if z.ndim == 1 else nd.b_u[:, None]
        d = u - z
        out = (b_u - self.b(z)) * self.tab(d / nd.sig_ker, 1) / nd.sig_ker ** 2
        if nd.f2 is not None:
            out = out + nd.f2(d)
        return out

    def _spike_tail_correction(self, nd: _ConvNode,
                               phi_pt: np.ndarray) -> np.ndarray:
        """Per unit time: the lower kernel's jump tail acting on the
        variation of the correction kernel around the lump point."""
        lo = 8.0 * nd.sig_low
        hi = self.spike_reach
        if lo >= hi:
            return np.zeros_like(phi_pt)
        n_row = nd.u_nodes.size
        wstar = nd.u_nodes - nd.chi_low
        acc = np.zeros(n_row)
        # dense from the kernel scale up; the decades far below it carry
        # integrand mass ~ w^(1-alpha) and a few nodes suffice
        mid = min(max(nd.sig_ker / 4.0, 2.0 * lo), hi / 2.0)
        n_hi = int(40.0 * math.log(hi) / math.log(60.0)) + 1
        base = np.unique(np.concatenate([
            np.geomspace(lo, mid, 8), np.geomspace(mid, hi, n_hi)]))
        for side in (1.0, -1.0):
            win = np.clip(side * wstar[:, None]
                          + nd.sig_ker * self.lin_win[None, :], lo, hi)
            v = np.concatenate(
                [np.broadcast_to(base, (n_row, base.size)), win], axis=1)
            v.sort(axis=1)
            w = side * v
            dphi = self._phi_at(nd, nd.chi_low + w) - phi_pt[:, None]
            acc += np.trapezoid(self._levy_density(w) * dphi, v, axis=1)
        return acc

    def _adjoint_kernel_lump(self, nd: _ConvNode,
                             phi_pt: np.ndarray) -> np.ndarray:
        """Short-time limit of the first correction kernel acting from
        the left: drift-gradient term plus jump-difference action."""
        out = -self.bprime_x0 * phi_pt
        if self.has_tail_diff:
            acc = -phi_pt * self.delta_mass
            v_top = self.v_lump[-1]
            n_row = nd.u_nodes.size
            base = np.broadcast_to(self.v_lump, (n_row, self.v_lump.size))
            for side in (1.0, -1.0):
                # jump sizes that move the start point onto the kernel's
                # own spike need their own resolution scale
                vstar = side * (nd.u_nodes[:, None] - self.x0)
                win = np.clip(vstar + nd.sig_low * self.w_sub[None, :],
                              1.0, v_top)
                rel = np.clip(vstar * (1.0 + self.rel_win[None, :]),
                              1.0, v_top)
                v = np.concatenate([base, win, rel], axis=1)
                v.sort(axis=1)
                phi_v = self._phi_at(nd, self.x0 + side * v)
                acc += np.trapezoid(phi_v * self._tail_delta(side * v),
                                    v, axis=1)
            out = out + self.q_jump * acc
        return out

    def _node_term(self, nd: _ConvNode, eval_lower) -> np.ndarray:
        if nd.mode == "mass_lump":
            # the lower kernel concentrates at chi_low: point evaluation
            # of the correction kernel, weighted by the lower mass, plus
            # the heavy-tail correction where it matters
            phi_pt = self._phi_at(nd, np.full_like(nd.u_nodes, nd.chi_low))
            kind = getattr(eval_lower, "kind", "table")
            if kind == "q0":
                return phi_pt + nd.tau_low * self._spike_tail_correction(
                    nd, phi_pt)
            if kind == "phi":
                return self._adjoint_kernel_lump(nd, phi_pt)
            return eval_lower.mass(nd.tau_low) * phi_pt

        if nd.mode == "kernel_lump":
            # short-time local limit of the correction kernel acting on the
            # lower kernel: drift-gradient term plus jump-difference part
            u = nd.u_nodes
            q_u = eval_lower(nd, u[:, None])[:, 0]
            out = -nd.bprime_u * q_u
            if self.has_tail_diff:
                acc = -q_u * self.delta_mass
                v_top = self.v_lump[-1]
                base = np.broadcast_to(self.v_lump, (u.size, self.v_lump.size))
                for side in (1.0, -1.0):
                    # jump sizes landing on the lower kernel's core need
                    # their own resolution scale
                    vstar = side * (u[:, None] - nd.chi_low)
                    win = np.clip(vstar + nd.sig_low * self.w_sub[None, :],
                                  1.0, v_top)
                    rel = np.clip(vstar * (1.0 + self.rel_win[None, :]),
                                  1.0, v_top)
                    v = np.concatenate([base, win, rel], axis=1)
                    v.sort(axis=1)
                    vals = eval_lower(nd, u[:, None] - side * v) \
                        * self._tail_delta(side * v)
                    acc += np.trapezoid(vals, v, axis=1)
                out = out + self.q_jump * acc
            return out

        u = nd.u_nodes[:, None]
        n_row = u.shape[0]
        parts = [u - nd.sig_ker * self.w_nodes[None, :],
                 np.broadcast_to(nd.chi_low + nd.sig_low * self.w_nodes,
                                 (n_row, self.w_nodes.size))]
        if nd.use_jump_nodes:
            parts.append(u - self.jump_nodes[None, :])
        z = np.concatenate(parts, axis=1)
        z.sort(axis=1)
        q_low = eval_lower(nd, z)
        d = u - z
        phi = (nd.b_u[:, None] - self.b(z)) \
            * self.tab(d / nd.sig_ker, 1) / nd.sig_ker ** 2
        if nd.f2 is not None:
            phi = phi + nd.f2(d)
        return np.trapezoid(q_low * phi, z, axis=1)

    def _conv_pass(self, eval_lower) -> np.ndarray:
        out = np.zeros((self.cfg.n_t, self.cfg.n_eta))
        for i in range(self.cfg.n_t):
            acc = np.zeros(self.cfg.n_eta)
            for nd in self.nodes[i]:
                acc += nd.weight * self._node_term(nd, eval_lower)
            out[i] = acc * self.sigma[i]
        return out

    # -- direct slice tables -------------------------------------------------

    def _p0_table(self) -> np.ndarray:
        out = np.empty((self.cfg.n_t, self.cfg.n_eta))
        for i in range(self.cfg.n_t):
            arg = self.theta_slices[i] - self.x0
            out[i] = self.sigma[i] * self.tab.eval_scaled(arg, self.sigma[i])
        return out

    def _phi_table(self) -> np.ndarray:
        out = np.empty((self.cfg.n_t, self.cfg.n_eta))
        for i in range(self.cfg.n_t):
            th = self.theta_slices[i]
            d = th - self.x0
            sig = self.sigma[i]
            row = (self.b(th) - self.b_x0) * self.tab(d / sig, 1) / sig ** 2
            if self.has_tail_diff:
                row = row + self._f2_direct(sig, d)
            out[i] = sig * row
        return out

    # -- envelope fit --------------------------------------------------------

    def _fit_envelope(self, r_tables: List[np.ndarray]):
        """Whiten the k-fold maxima by envelope * t^(k-1) / k! and fit
        a geometric growth law through them."""
        k_max = len(r_tables)
        upper = self.t_grid >= 0.1 * self.t_max   # noise-free fit window
        a_k = np.zeros(k_max)
        m_k = np.zeros(k_max)
        for k in range(1, k_max + 1):
            tab = r_tables[k - 1]
            m_k[k - 1] = float(np.max(np.abs(tab / self.sigma[:, None])))
            best = 0.0
            for i in np.nonzero(upper)[0]:
                vals = np.abs(tab[i] / self.sigma[i])
                env = self.envelope(self.t_grid[i],
                                    self.theta_slices[i] - self.x0)
                ratio = float(np.max(vals / env))
                ratio *= math.factorial(k) / self.t_grid[i] ** (k - 1)
                best = max(best, ratio)
            a_k[k - 1] = best
        if np.any(a_k <= 0.0):
            return 0.0, 0.0, a_k, m_k, 0.0
        ks = np.arange(k_max, dtype=float)
        slope, inter = np.polyfit(ks, np.log(a_k), 1)
        c_growth = math.exp(slope)
        c_lead = math.exp(inter)
        tail = 0.0
        for k in range(k_max + 1, k_max + 60):
            tail += (c_lead * (c_growth * self.t_max) ** (k - 1)
                     / math.factorial(k))
        return c_lead, c_growth, a_k, m_k, tail

    # -- driver --------------------------------------------------------------

    def run(self, strict: bool = True) -> ParametrixState:
        t_start = time.perf_counter()
        cfg = self.cfg
        v0 = self._p0_table()
        self.spl_p0 = RectBivariateSpline(self.log_t, self.eta, v0)

        q_tables: List[np.ndarray] = []
        r_tables: List[np.ndarray] = []
        q_splines: list = []
        r_splines: list = []

        if self.exact_reduction:
            zero = np.zeros_like(v0)
            q_tables = [zero.copy() for _ in range(cfg.k_max)]
            r_tables = [zero.copy() for _ in range(cfg.k_max)]
            c_lead = c_growth = tail = 0.0
            a_k = np.zeros(cfg.k_max)
            m_k = np.zeros(cfg.k_max)
        else:
            self._prepare_nodes()
            eval_q = _Q0Kernel(self)
            for k in range(1, cfg.k_max + 1):
                table = self._conv_pass(eval_q)
                q_tables.append(table)
                eval_q = _TableKernel(self, table, float(k))
                q_splines.append(eval_q.spl)
            r_tables.append(self._phi_table())
            eval_r = _TableKernel(self, r_tables[0], 0.0,
                                  exact_small=self._r1_exact_small)
            r_splines.append(eval_r.spl)
            for k in range(2, cfg.k_max + 1):
                table = self._conv_pass(eval_r)
                r_tables.append(table)
                eval_r = _TableKernel(self, table, float(k - 1))
                r_splines.append(eval_r.spl)
            c_lead, c_growth, a_k, m_k, tail = self._fit_envelope(r_tables)

        p_slices = (v0 + sum(q_tables)) / self.sigma[:, None]
        psi = sum(r_tables) if r_tables else np.zeros_like(v0)

        state = ParametrixState(
            model=self.model, x0=self.x0, t_max=self.t_max, config=cfg,
            t_grid=self.t_grid, eta_grid=self.eta, chi=self.chi,
            sigma=self.sigma, y_slices=self.y_slices,
            theta_slices=self.theta_slices, s_nodes=self.s_nodes,
            p0_table=v0, q_tables=q_tables, r_tables=r_tables,
            psi_table=psi, p_slices=p_slices, k_max=cfg.k_max,
            tail_bound=float(tail), env_c0=float(c_lead),
            env_c=float(c_growth), env_ratios=a_k, term_maxima=m_k,
            exact_reduction=self.exact_reduction,
            diagnostics={"build_seconds": time.perf_counter() - t_start},
            _q_splines=q_splines, _r_splines=r_splines,
        )
        if not np.all(np.isfinite(p_slices)):
            raise ArithmeticError("non-finite values in the density tables")
        if strict and tail > cfg.tau_series:
            err = SeriesTruncationError(
                "fitted series remainder %.3e exceeds the budget %.1e; "
                "raise k_max (currently %d)" % (tail, cfg.tau_series,
                                                cfg.k_max))
            err.state = state
            raise err
        return state


def build_parametrix_density(model: LocallyStableSDE, x0: float = 0.0,
                             t_max: float = 1.0,
                             config: Optional[ParametrixConfig] = None,
                             strict: bool = True) -> ParametrixState:
    """Build the tabulated transition density from the start point x0.

    Raises SeriesTruncationError (with the partial state attached) when the
    fitted factorial envelope puts the dropped series remainder above the
    configured budget; raising k_max in the config is the fix.
    """
    return _Builder(model, x0, t_max, config or ParametrixConfig()).run(strict)


# ---------------------------------------------------------------------------
# evaluation of a built state
# ---------------------------------------------------------------------------

def _state_tabs(state: ParametrixState):
    p = state.model.params
    return density_table(p.alpha, p.skew), density_table(p.alpha, 0.0)


def _continued_eval(spl, log_t: float, chi_c: float, sig_c: float,
                    y: np.ndarray, eta_max: float, alpha: float) -> np.ndarray:
    eta = np.arcsinh((y - chi_c) / sig_c)
    ae = np.abs(eta)
    eta_cl = np.clip(eta, -eta_max, eta_max)
    v = spl.ev(np.full(y.size, log_t), eta_cl.ravel()).reshape(y.shape)
    over = ae > eta_max
    if np.any(over):
        v[over] *= (np.sinh(ae[over]) / math.sinh(eta_max)) ** (-1.0 - alpha)
    return v / sig_c


def density_slice(state: ParametrixState, t: float, y_grid) -> np.ndarray:
    """Density values p_t(x0, y): exact zero-order part plus tabulated
    corrections.  t must lie within [first slice, t_max]."""
    t0 = state.t_grid[0]
    if not (t0 * (1.0 - 1e-12) <= t <= state.t_max * (1.0 + 1e-9)):
        raise ValueError("t=%g outside the built range [%g, %g]"
                         % (t, t0, state.t_max))
    y = np.asarray(y_grid, dtype=float)
    tab, _ = _state_tabs(state)
    b = state.model.drift
    sig = (state.model.params.weight * t) ** (1.0 / state.alpha)
    th = flow_theta(b, y, t)
    p = tab.eval_scaled(th - state.x0, sig)
    if not state.exact_reduction:
        chi_t = flow_chi(b, state.x0, t)
        log_t = math.log(t)
        for spl in state._q_splines:
            p = p + _continued_eval(spl, log_t, chi_t, sig, y,
                                    state.config.eta_max, state.alpha)
    return p


def default_slice_grid(state: ParametrixState, t: float,
                       oversample: int = 2) -> np.ndarray:
    """Spatial grid matching the table geometry at an arbitrary time."""
    chi_t = flow_chi(state.model.drift, state.x0, t)
    sig = (state.model.params.weight * t) ** (1.0 / state.alpha)
    n = oversample * (state.config.n_eta - 1) + 1
    eta = np.linspace(-state.config.eta_max, state.config.eta_max, n)
    return chi_t + sig * np.sinh(eta)


def kernel_mass(state: ParametrixState, t: float) -> float:
    """Total mass of the built density at time t (tail-completed)."""
    y = default_slice_grid(state, t)
    p = density_slice(state, t, y)
    chi_t = flow_chi(state.model.drift, state.x0, t)
    return float(integrate_with_tails(y - chi_t, p, state.alpha)[0])


def parametrix_p0(state: ParametrixState, t: float, x: float, y) -> np.ndarray:
    """Zero-order kernel from an arbitrary start: the driving density
    evaluated at the reverse-flowed displacement."""
    if t <= 0:
        raise ValueError("t must be positive")
    y = np.asarray(y, dtype=float)
    tab, _ = _state_tabs(state)
    sig = (state.model.params.weight * t) ** (1.0 / state.alpha)
    th = flow_theta(state.model.drift, y, t)
    return tab.eval_scaled(th - x, sig)


def parametrix_phi(state: ParametrixState, t: float, x: float,
                   y) -> np.ndarray:
    """Correction kernel: drift-variation term plus tail-difference term."""
    if t <= 0:
        raise ValueError("t must be positive")
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    tab, _ = _state_tabs(state)
    b = state.model.drift
    sig = (state.model.params.weight * t) ** (1.0 / state.alpha)
    th = flow_theta(b, y, t)
    d = th - x
    out = (b(th) - float(b(np.array(x)))) * tab(d / sig, 1) / sig ** 2
    builder = _phi_builder(state)
    if builder.has_tail_diff:
        out = out + builder._f2_direct(sig, d)
    return float(out[0]) if scalar else out


_PHI_CACHE: Dict[int, _Builder] = {}


def _phi_builder(state: ParametrixState) -> _Builder:
    """Lightweight builder reuse for pointwise kernel evaluation."""
    key = id(state)
    if key not in _PHI_CACHE:
        _PHI_CACHE.clear()
        cfg = replace(state.config, n_t=6, n_eta=11)
        _PHI_CACHE[key] = _Builder(state.model, state.x0, state.t_max, cfg)
    return _PHI_CACHE[key]


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def _envelope_values(state: ParametrixState, t: float,
                     dy: np.ndarray) -> np.ndarray:
    _, env_tab = _state_tabs(state)
    a_env = state.model.params.scale
    s1 = (a_env * (t + 1.0)) ** (1.0 / state.alpha)
    s0 = (a_env * t) ** (1.0 / state.alpha)
    return env_tab.eval_scaled(dy, s1) + env_tab.eval_scaled(dy, s0)


def density_ratio_bound(state: ParametrixState) -> Tuple[float, np.ndarray]:
    """Max of p over the comparison kernel (forward-flow displacement).

    Returns (overall max, per-slice maxima); finiteness and refinement
    stability of the max are the certificate.
    """
    per_slice = np.empty(len(state.t_grid))
    for i, t in enumerate(state.t_grid):
        dy = state.sigma[i] * np.sinh(state.eta_grid)
        env = _envelope_values(state, t, dy)
        per_slice[i] = float(np.max(np.maximum(state.p_slices[i], 0.0) / env))
    return float(np.max(per_slice)), per_slice


def phi_ratio_bound(state: ParametrixState) -> Tuple[float, np.ndarray]:
    """Max of |correction kernel| over the comparison kernel
    (reverse-flow displacement)."""
    per_slice = np.empty(len(state.t_grid))
    for i, t in enumerate(state.t_grid):
        vals = np.abs(state.r_tables[0][i] / state.sigma[i])
        env = _envelope_values(state, t, state.theta_slices[i] - state.x0)
        per_slice[i] = float(np.max(vals / env))
    return float(np.max(per_slice)), per_slice


def check_q_normalization(state: ParametrixState) -> float:
    """Worst deviation from 1 of the halved comparison-kernel mass."""
    worst = 0.0
    for i, t in enumerate(state.t_grid):
        dy = state.sigma[i] * np.sinh(state.eta_grid)
        vals = 0.5 * _envelope_values(state, t, dy)
        total = integrate_with_tails(dy, vals, state.alpha)[0]
        worst = max(worst, abs(total - 1.0))
    return worst


def check_flow_equivalence(state: ParametrixState) -> FlowReport:
    """Grid bounds c, C with c|theta_t(y)-x0| <= |y-chi_t(x0)| <= C|...|."""
    lo, hi = math.inf, 0.0
    for i in range(len(state.t_grid)):
        num = np.abs(state.y_slices[i] - state.chi[i])
        den = np.abs(state.theta_slices[i] - state.x0)
        keep = den > 1e-300
        r = num[keep] / den[keep]
        if r.size:
            lo = min(lo, float(np.min(r)))
            hi = max(hi, float(np.max(r)))
    return FlowReport(c_lower=lo, c_upper=hi)


def check_dt_bound(state: ParametrixState,
                   fit_t_max: Optional[float] = None) -> DtBoundReport:
    """Certificate for the time-derivative bound.

    Central differences across neighbouring time slices give dp/dt on each
    interior slice; the report carries the whitened sup ratio
    |dp/dt| * t^(1/alpha) / envelope and the fitted decay order of
    N(t) = integral of |dp/dt|, restricted to small times where the
    singular regime dominates.
    """
    t = state.t_grid
    n_t = len(t)
    ratios = np.empty(n_t - 2)
    n_vals = np.empty(n_t - 2)
    inv_alpha = 1.0 / state.alpha
    for i in range(1, n_t - 1):
        y = state.y_slices[i]
        p_lo = density_slice(state, t[i - 1], y)
        p_mid = state.p_slices[i]
        p_hi = density_slice(state, t[i + 1], y)
        h_lo = t[i] - t[i - 1]
        h_hi = t[i + 1] - t[i]
        dp = (h_lo ** 2 * p_hi + (h_hi ** 2 - h_lo ** 2) * p_mid
              - h_hi ** 2 * p_lo) / (h_lo * h_hi * (h_lo + h_hi))
        dy = state.sigma[i] * np.sinh(state.eta_grid)
        env = _envelope_values(state, t[i], dy)
        ratios[i - 1] = float(np.max(np.abs(dp) * t[i] ** inv_alpha / env))
        n_vals[i - 1] = integrate_with_tails(dy, np.abs(dp), state.alpha)[0]
    t_int = t[1:-1]
    if fit_t_max is None:
        fit_t_max = state.t_max / 32.0
    win = t_int <= fit_t_max
    if win.sum() < 3:
        raise ValueError("fit window holds fewer than 3 slices")
    res = stats.linregress(np.log(t_int[win]), np.log(n_vals[win]))
    dof = int(win.sum()) - 2
    ci = stats.t.ppf(0.975, dof) * res.stderr if dof > 0 else math.inf
    beta_hat = -float(res.slope)
    b_hat = float(np.max(n_vals[win] * t_int[win] ** beta_hat))
    return DtBoundReport(sup_ratio=float(np.max(ratios)), ratios=ratios,
                         t_values=t_int, n_values=n_vals, beta_hat=beta_hat,
                         b_hat=b_hat, slope_ci=float(ci),
                         fit_t_max=float(fit_t_max))


def check_subconvolution(state: ParametrixState, t: float,
                         s_frac: float = 0.5, n_w: int = 61,
                         n_y: int = 41) -> float:
    """Empirical constant of the two-time comparison-kernel convolution
    inequality over z, maximized on a moderate y window."""
    s = s_frac * t
    ts = t - s
    b = state.model.drift
    _, env_tab = _state_tabs(state)
    a_env = state.model.params.scale
    sc = lambda u: (a_env * u) ** (1.0 / state.alpha)
    w = np.concatenate([np.linspace(-8.0, 8.0, n_w),
                        np.geomspace(8.0, 120.0, 12)[1:],
                        -np.geomspace(8.0, 120.0, 12)[1:]])
    y = flow_chi(b, state.x0, t) + sc(t) * np.sinh(
        np.linspace(-3.5, 3.5, n_y))
    th_s_y = flow_theta(b, y, s)
    chi_ts = flow_chi(b, state.x0, ts)
    z = np.sort(np.concatenate([
        np.broadcast_to(chi_ts + sc(ts) * w, (n_y, w.size)),
        th_s_y[:, None] - sc(s) * w[None, :]], axis=1), axis=1)
    th_ts_z = flow_theta(b, z, ts)
    inner = env_tab.eval_scaled(th_ts_z - state.x0, sc(ts)) \
        * env_tab.eval_scaled(th_s_y[:, None] - z, sc(s))
    lhs = np.trapezoid(inner, z, axis=1)
    th_t_y = flow_theta(b, y, t)
    rhs = env_tab.eval_scaled(th_t_y - state.x0, sc(t))
    return float(np.max(lhs / rhs))


def chapman_kolmogorov_gap(state: ParametrixState, t: float = 0.5,
                           s: float = 0.25,
                           n_z: int = 33, z_reach: float = 120.0,
                           n_y: int = 33, y_reach: float = 2.5,
                           config: Optional[ParametrixConfig] = None
                           ) -> float:
    """Max relative gap of the two-step density composition (slow).

    Rebuilds a coarse density from every intermediate point z, integrates
    p_s(x0, z) p_{t-s}(z, y) over z and compares against p_t(x0, y) on an
    interior y window, relative to the peak value.
    """
    cfg = config or replace(state.config, n_t=10, n_eta=121, n_s=8,
                            k_max=max(3, state.k_max - 2))
    b = state.model.drift
    sig_s = (state.model.params.weight * s) ** (1.0 / state.alpha)
    chi_s = flow_chi(b, state.x0, s)
    z_nodes = chi_s + sig_s * np.sinh(
        np.linspace(-math.asinh(z_reach), math.asinh(z_reach), n_z))
    chi_t = flow_chi(b, state.x0, t)
    sig_t = (state.model.params.weight * t) ** (1.0 / state.alpha)
    y_nodes = chi_t + sig_t * np.sinh(np.linspace(-y_reach, y_reach, n_y))
    p_first = density_slice(state, s, z_nodes)
    rows = np.empty((n_z, n_y))
    for kz, z in enumerate(z_nodes):
        sub = build_parametrix_density(state.model, x0=float(z), t_max=t - s,
                                       config=cfg, strict=False)
        rows[kz] = density_slice(sub, t - s, y_nodes)
    composed = np.trapezoid(p_first[:, None] * rows, z_nodes, axis=0)
    direct = density_slice(state, t, y_nodes)
    return float(np.max(np.abs(composed - direct)) / np.max(direct))


# ---------------------------------------------------------------------------
# kernel export
# ---------------------------------------------------------------------------

def kernel_matrix(state: ParametrixState, kind: str = "p",
                  k: Optional[int] = None,
                  y_grid: Optional[np.ndarray] = None):
    """Evaluate a kernel on a fixed spatial grid for every time slice.

    kind: "p" (density), "p0" (zero-order), "phi" (correction), "phi_k"
    (k-fold correction, needs k), or "psi" (summed corrections).
    Returns (t_grid, y_grid, matrix)."""
    if y_grid is None:
        y_grid = state.y_slices[-1]
    y_grid = np.asarray(y_grid, dtype=float)
    n_t = len(state.t_grid)
    out = np.empty((n_t, y_grid.size))
    if kind == "phi_k" and (k is None or not 1 <= k <= state.k_max):
        raise ValueError("phi_k export needs 1 <= k <= k_max")
    for i, t in enumerate(state.t_grid):
        if kind == "p":
            out[i] = density_slice(state, t, y_grid)
        elif kind == "p0":
            out[i] = parametrix_p0(state, t, state.x0, y_grid)
        elif kind in ("phi", "phi_k", "psi"):
            if kind == "phi":
                table = state.r_tables[0]
            elif kind == "phi_k":
                table = state.r_tables[k - 1]
            else:
                table = state.psi_table
            spl = RectBivariateSpline(np.log(state.t_grid), state.eta_grid,
                                      table)
            out[i] = _continued_eval(spl, math.log(t), state.chi[i],
                                     state.sigma[i], y_grid,
                                     state.config.eta_max, state.alpha)
        else:
            raise ValueError("unknown kernel kind %r" % kind)
    return state.t_grid, y_grid, out


# ---------------------------------------------------------------------------
# adapter for the derivative-condition verifier
# ---------------------------------------------------------------------------

class ParametrixDensity:
    """Tabulated-density view consumed by the derivative-condition tools.

    Exposes density_slice/center/fd_step/default_y_grid/interior_times in
    the shape the slice-based finite-difference verifier expects.
    """

    def __init__(self, state: ParametrixState):
        self.state = state
        self.alpha = state.alpha

    def density_slice(self, t: float, y_grid) -> np.ndarray:
        return density_slice(self.state, t, y_grid)

    def center(self, t: float) -> float:
        return float(flow_chi(self.state.model.drift, self.state.x0, t))

    def fd_step(self, t: float) -> float:
        sig = (self.state.model.params.weight * t) ** (1.0 / self.alpha)
        speed = abs(float(self.state.model.drift(np.array(self.center(t)))))
        guard = 0.005 * sig / speed if speed > 0 else math.inf
        return min(t / 100.0, guard)

    def default_y_grid(self, t: float) -> np.ndarray:
        return default_slice_grid(self.state, t)

    def interior_times(self) -> np.ndarray:
        t = self.state.t_grid
        lo = 1
        hi = lo
        while hi < len(t) - 2 and t[hi] / t[lo] < 99.0:
            hi += 1
        if t[hi] / t[lo] < 99.0:
            raise ValueError("built time range spans fewer than two decades")
        return t[lo:hi + 1]


# ---------------------------------------------------------------------------
# translation-invariant space-time convolution utilities
# ---------------------------------------------------------------------------

@dataclass
class SpaceTimeKernel:
    """Tabulated kernel f_t(d) depending on the displacement only."""

    t_grid: np.ndarray
    d_grid: np.ndarray
    values: np.ndarray            # (n_t, n_d)
    alpha: float                  # far-field decay exponent
    scale_fn: Callable[[float], float]

    def __post_init__(self):
        self._spl = RectBivariateSpline(
            np.log(self.t_grid), np.arcsinh(self.d_grid), self.values)

    def __call__(self, t: float, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        lo, hi = self.t_grid[0], self.t_grid[-1]
        if not (lo * (1 - 1e-12) <= t <= hi * (1 + 1e-12)):
            raise ValueError("t=%g outside the tabulated range" % t)
        q = np.arcsinh(d)
        q_hi = math.asinh(self.d_grid[-1])
        q_lo = math.asinh(self.d_grid[0])
        qc = np.clip(q, q_lo, q_hi)
        v = self._spl.ev(np.full(d.size, math.log(t)), qc.ravel())
        v = v.reshape(d.shape)
        over = (q > q_hi) | (q < q_lo)
        if np.any(over):
            edge = np.where(q[over] > 0, self.d_grid[-1], -self.d_grid[0])
            v[over] *= (np.abs(d[over]) / np.abs(edge)) ** (-1.0 - self.alpha)
        return v

    def mass(self, t: float) -> float:
        vals = self(t, self.d_grid)
        return float(integrate_with_tails(self.d_grid, vals, self.alpha)[0])


def stable_kernel(params: StableParams, t_grid, n_d: int = 161,
                  reach: float = 60.0) -> SpaceTimeKernel:
    """Stable density as a translation-invariant tabulated kernel."""
    t_grid = np.asarray(t_grid, dtype=float)
    tab = density_table(params.alpha, params.skew)
    sc = lambda u: float(params.sigma(u))
    d_grid = sc(t_grid[-1]) * np.sinh(
        np.linspace(-math.asinh(reach), math.asinh(reach), n_d))
    vals = np.array([tab.eval_scaled(d_grid, sc(t)) for t in t_grid])
    return SpaceTimeKernel(t_grid=t_grid, d_grid=d_grid, values=vals,
                           alpha=params.alpha, scale_fn=sc)


def spatial_convolution(f: SpaceTimeKernel, g: SpaceTimeKernel,
                        t_f: float, t_g: float,
                        d_out: np.ndarray) -> np.ndarray:
    """(f_{t_f} * g_{t_g})(d_out) by union-grid quadrature."""
    sf = max(f.scale_fn(t_f), 1e-12)
    sg = max(g.scale_fn(t_g), 1e-12)
    w = np.concatenate([np.linspace(-8.0, 8.0, 49),
                        np.geomspace(8.0, 80.0, 10)[1:],
                        -np.geomspace(8.0, 80.0, 10)[1:]])
    d = np.asarray(d_out, dtype=float)
    e = np.concatenate([np.broadcast_to(sg * w, (d.size, w.size)),
                        d[:, None] - sf * w[None, :]], axis=1)
    e.sort(axis=1)
    vals = f(t_f, d[:, None] - e) * g(t_g, e)
    return np.trapezoid(vals, e, axis=1)


def convolve_space_time(f: SpaceTimeKernel, g: SpaceTimeKernel, t: float,
                        d_out: Optional[np.ndarray] = None,
                        n_s: int = 10, warp: float = 3.0) -> np.ndarray:
    """Space-time convolution at time t via the symmetric half split.

    Integrates (f_{t-s} * g_s) over s in (0, t/2] and adds the mirrored
    half (f_s * g_{t-s}); returns values on d_out (default: a stretched
    grid sized by the larger kernel scale).  Use star_kernel to tabulate
    the result across a time grid.
    """
    if d_out is None:
        reach = math.asinh(60.0)
        sc = max(f.scale_fn(t), g.scale_fn(t))
        d_out = sc * np.sinh(np.linspace(-reach, reach, 121))
    d_out = np.asarray(d_out, dtype=float)
    xg, wg = np.polynomial.legendre.leggauss(n_s)
    xi = 0.5 * (xg + 1.0)
    s_nodes = 0.5 * t * xi ** warp
    s_wts = 0.5 * wg * 0.5 * t * warp * xi ** (warp - 1.0)
    acc = np.zeros_like(d_out)
    for s, w in zip(s_nodes, s_wts):
        acc += w * spatial_convolution(f, g, t - s, s, d_out)
        acc += w * spatial_convolution(f, g, s, t - s, d_out)
    return acc


def star_kernel(f: SpaceTimeKernel, g: SpaceTimeKernel,
                t_grid=None, n_s: int = 10) -> SpaceTimeKernel:
    """Tabulate the space-time convolution across a time grid."""
    if t_grid is None:
        t_grid = f.t_grid
    t_grid = np.asarray(t_grid, dtype=float)
    reach = math.asinh(60.0)
    sc_top = max(f.scale_fn(t_grid[-1]), g.scale_fn(t_grid[-1]))
    d_grid = sc_top * np.sinh(np.linspace(-reach, reach, 121))
    vals = np.array([convolve_space_time(f, g, t, d_grid, n_s=n_s)
                     for t in t_grid])
    alpha = min(f.alpha, g.alpha)
    sc = lambda u: max(f.scale_fn(u), g.scale_fn(u))
    return SpaceTimeKernel(t_grid=t_grid, d_grid=d_grid, values=vals,
                           alpha=alpha, scale_fn=sc)
