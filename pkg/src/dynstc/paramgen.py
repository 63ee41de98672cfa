"""Parameter-family synthesis for the scalar example plant.

Each set comes from three steps.  A closed-form minimal ``gamma`` makes the
state storage inequality hold for both extreme uncertainty values.  A
vectorised line search then picks the Riccati initial values.  Finally an
independent grid check of the storage inequalities is run over X x E.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError
from .model import ExamplePlant, PlantModel
from .phi import aligned_step, default_step, rk4_step, t_max_result
from .storage import ParameterCore, ParameterSet, StorageBundle, from_assumption1
from .trigger import TriggerConfig

log = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_EPS_GRID",
    "Infeasible",
    "PhiChoice",
    "PhiSearchFailed",
    "Violation",
    "FamilyResult",
    "gamma_min",
    "scalar_core",
    "synthesize_scalar",
    "find_phi0",
    "synthesize_family",
    "build_family",
    "validate_condition1",
]

DEFAULT_EPS_GRID = (0.01, 0.005, 0.0, -0.01, -0.05, -0.1, -0.25, -0.5, -1.0, -1.5, -2.0, -3.0,
                    -4.0, -6.0, -8.0, -10.0, -14.0, -18.0, -24.0, -32.0, -40.0, -50.0)
TARGETS = ("balanced", "max_tmax", "feasible")
_CHECK_EVERY = 4096


@dataclass(frozen=True)
class Infeasible:
    eps: float
    reason: str = ""

    def __bool__(self):
        return False


@dataclass(frozen=True)
class PhiChoice:
    phi0_init: float
    phi1_init: float
    t_max: float
    c_u: float


@dataclass(frozen=True)
class PhiSearchFailed:
    reason: str

    def __bool__(self):
        return False


def gamma_min(eps, v_coeff=0.505, a3_bound=37.0):
    """Smallest ``gamma`` for ``V = v x^2``, ``f = -x - a3 e``, ``H = |x|``; ``None`` if infeasible.

    The storage inequality reduces to ``-c x^2 + b |x||e| - gamma^2 e^2 <= 0``
    with ``c = 2v - 1 - v eps`` and ``b = 2 v a3_bound``.
    """
    c = 2.0 * v_coeff - 1.0 - v_coeff * eps
    if not c > 0:
        return None
    return 2.0 * v_coeff * a3_bound / (2.0 * math.sqrt(c))


def scalar_core(eps, lam, v_coeff=0.505, a3_bound=37.0) -> Union[ParameterCore, Infeasible]:
    g = gamma_min(eps, v_coeff, a3_bound)
    if g is None:
        return Infeasible(float(eps), "storage inequality has no solution (c <= 0)")
    return from_assumption1(g, a3_bound, eps, lam)


# --------------------------------------------------------------------------
# Riccati initial values


def _search_step(core, tau_mad, step):
    if step is None:
        step = min(default_step(tau_mad, core.l0, core.gamma0),
                   default_step(tau_mad, core.l1, core.gamma1))
    return aligned_step(tau_mad, step)


def _max_phi0(core, a, h, n_mad, iters=60):
    """Largest ``phi0(0)`` per candidate keeping ``gamma1 phi1 >= gamma0 phi0`` on the prefix."""
    eps, g0, g1 = core.eps, core.gamma0, core.gamma1
    p1 = np.empty((n_mad + 1, a.size))
    p1[0] = a
    for i in range(n_mad):
        p1[i + 1] = rk4_step(p1[i], h, eps, g1, core.l1)
    upper = g1 * p1
    lo = np.zeros_like(a)
    hi = g1 * a / g0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        phi = mid.copy()
        ok = g0 * phi <= upper[0]
        for i in range(n_mad):
            phi = rk4_step(phi, h, eps, g0, core.l0)
            ok &= g0 * phi <= upper[i + 1]
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    positive = np.all(upper > 0, axis=0)
    return lo, positive


def _coarse_tmax(core, b, thr, h, n_mad, horizon_cap):
    """Grid-resolution ``T_max`` per candidate (0 when the prefix fails)."""
    eps, g0, l0 = core.eps, core.gamma0, core.l0
    n = b.size
    out = np.full(n, np.nan)
    phi = b.copy()
    active = np.ones(n, dtype=bool)
    quad = 2.0 * l0 + eps
    disc = quad * quad - 4.0 * g0 * g0
    roots = None
    if quad < 0 and disc >= 0:
        roots = ((-quad - math.sqrt(disc)) / (2 * g0), (-quad + math.sqrt(disc)) / (2 * g0))
    n_cap = int(math.floor(horizon_cap / h))
    i = 0
    while True:
        below = active & ~(g0 * phi >= thr)
        if np.any(below):
            out[below] = 0.0 if i <= n_mad else (i - 1) * h
            active &= ~below
        if not active.any():
            break
        if i >= n_cap:
            out[active] = horizon_cap
            break
        if roots is not None and i >= n_mad and (i - n_mad) % _CHECK_EVERY == 0:
            settled = active & (phi >= roots[0]) & (g0 * np.minimum(phi, roots[1]) >= thr)
            out[settled] = horizon_cap
            active &= ~settled
            if not active.any():
                break
        phi = rk4_step(phi, h, eps, g0, l0)
        i += 1
    return out


def find_phi0(core: ParameterCore, lam, tau_mad, c_u=None, target="max_tmax", n_grid=200,
              phi1_upper=50.0, horizon_cap=10.0, step=None) -> Union[PhiChoice, PhiSearchFailed]:
    """Line search for ``(phi0(0), phi1(0))``.

    ``phi1(0)`` runs over ``n_grid`` log-spaced values in ``[lam, phi1_upper]``.
    For each value ``phi0(0)`` is the largest start keeping the mode ordering
    over ``[0, tau_mad]``.  With ``c_u=None`` the set is the reference set and
    its own ``gamma1 phi1(0)`` is the threshold constant.

    Targets: ``max_tmax`` maximises the set's ``T_max`` (``max_tmin`` is an
    alias); ``balanced`` maximises ``T_max / c_u`` and only makes sense for the
    reference set; ``feasible`` takes the smallest qualifying ``phi1(0)``.
    Ties go to the smaller ``phi1(0)``.
    """
    if target == "max_tmin":
        target = "max_tmax"
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    if target == "balanced" and c_u is not None:
        raise ValueError("target 'balanced' applies to the reference set only")
    h, n_mad = _search_step(core, tau_mad, step)
    a = np.geomspace(lam, phi1_upper, n_grid)
    b, positive = _max_phi0(core, a, h, n_mad)
    own_cu = core.gamma1 * a
    cu = own_cu if c_u is None else np.full_like(a, float(c_u))
    coarse = _coarse_tmax(core, b, lam * lam * cu, h, n_mad, horizon_cap)
    ok = positive & (b > 0) & (coarse >= tau_mad)
    if not ok.any():
        return PhiSearchFailed("no candidate keeps the threshold up to tau_mad")
    if target == "feasible":
        order = np.nonzero(ok)[0]
    else:
        score = coarse / cu if target == "balanced" else coarse
        score = np.where(ok, score, -np.inf)
        # stable sort on the negated score keeps smaller phi1(0) first among ties
        order = [i for i in np.argsort(-score, kind="stable") if ok[i]]
    for idx in order:
        p = core.with_phi(b[idx], a[idx])
        res = t_max_result(p, lam, float(cu[idx]), tau_mad, horizon_cap, step)
        if res.value >= tau_mad:
            return PhiChoice(float(b[idx]), float(a[idx]), res.value, float(cu[idx]))
    return PhiSearchFailed("refined T_max fell below tau_mad for every candidate")


def synthesize_scalar(eps, lam, tau_mad=4e-4, c_u=None, target="max_tmax", v_coeff=0.505,
                      a3_bound=37.0, **search) -> Union[ParameterSet, Infeasible]:
    """Full parameter set for one ``eps``; infeasibility is returned, not raised."""
    core = scalar_core(eps, lam, v_coeff, a3_bound)
    if not core:
        return core
    choice = find_phi0(core, lam, tau_mad, c_u=c_u, target=target, **search)
    if not choice:
        return Infeasible(float(eps), choice.reason)
    return core.with_phi(choice.phi0_init, choice.phi1_init)


@dataclass(frozen=True)
class FamilyResult:
    config: TriggerConfig
    discarded: tuple = field(default=())


def synthesize_family(eps_list: Sequence[float] = DEFAULT_EPS_GRID, lam=0.2, tau_mad=4e-4,
                      c_x=4.55, m=30, p1_target="balanced", v_coeff=0.505, a3_bound=37.0,
                      horizon_cap=10.0, phi_step=None, n_grid=200) -> FamilyResult:
    """Synthesize, order and freeze a family; the largest workable ``eps > 0`` becomes P1."""
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"lambda must lie in (0, 1), got {lam}")
    search = dict(n_grid=n_grid, horizon_cap=horizon_cap, step=phi_step)
    discarded = []
    cores = []
    for eps in sorted({float(v) for v in eps_list}, reverse=True):
        core = scalar_core(eps, lam, v_coeff, a3_bound)
        if core:
            cores.append(core)
        else:
            discarded.append((eps, core.reason))
    p1 = None
    for core in [c for c in cores if c.eps > 0]:
        choice = find_phi0(core, lam, tau_mad, c_u=None, target=p1_target, **search)
        if choice:
            p1 = core.with_phi(choice.phi0_init, choice.phi1_init)
            break
        discarded.append((core.eps, f"reference search failed: {choice.reason}"))
    if p1 is None:
        raise ConfigError("no feasible parameter set with eps > 0 satisfies T_max >= tau_mad; "
                          f"discarded: {discarded}")
    c_u = p1.gamma1 * p1.phi1_init
    sets = [p1]
    for core in cores:
        if core.eps == p1.eps:
            continue
        choice = find_phi0(core, lam, tau_mad, c_u=c_u, target="max_tmax", **search)
        if choice:
            sets.append(core.with_phi(choice.phi0_init, choice.phi1_init))
        else:
            discarded.append((core.eps, choice.reason))
    for eps, reason in discarded:
        log.info("discarded eps=%g: %s", eps, reason)
    cfg = TriggerConfig.build(lam, c_x, m, tau_mad, sets, horizon_cap=horizon_cap,
                              phi_step=phi_step)
    return FamilyResult(cfg, tuple(discarded))


def build_family(eps_list: Sequence[float] = DEFAULT_EPS_GRID, lam=0.2, tau_mad=4e-4, c_x=4.55,
                 m=30, **kwargs) -> TriggerConfig:
    return synthesize_family(eps_list, lam, tau_mad, c_x, m, **kwargs).config


# --------------------------------------------------------------------------
# Condition-1 grid validation


@dataclass(frozen=True)
class Violation:
    check: str
    set_index: int  # 1-based, 0 for set-independent checks
    ell: int
    x: float
    e: float
    s: float
    lhs: float
    rhs: float
    form: str = ""

    @property
    def excess(self):
        return self.lhs - self.rhs


def _abs_dir(z, g):
    """One-sided derivative of ``|z|`` along ``g``."""
    return np.where(z == 0.0, np.abs(g), np.sign(z) * g)


def _w_directional(lam_scale, e, s, g, kink_tol):
    """Upper one-sided derivative of ``max(k|e|, |e+s|)`` along ``de = g``.

    Branches that are active within ``kink_tol`` all count, which covers the
    kink by the max of the one-sided branch derivatives.
    """
    a = lam_scale * np.abs(e)
    b = np.abs(e + s)
    da = lam_scale * _abs_dir(e, g)
    db = _abs_dir(e + s, g)
    w = np.maximum(a, b)
    d = np.where(a >= b - kink_tol, da, -np.inf)
    d = np.maximum(d, np.where(b >= a - kink_tol, db, -np.inf))
    return w, d


def _flows(plant: PlantModel, xg, eg):
    """Drift samples to check: the true drift plus the embedded extremes when known."""
    forms = [("true", plant.f(xg[..., None], eg[..., None])[..., 0])]
    if isinstance(plant, ExamplePlant):
        for a3 in (-plant.a3_bound, plant.a3_bound):
            forms.append((f"a3={a3:g}", -xg - a3 * eg))
    return forms


def validate_condition1(cfg: TriggerConfig, bundle: StorageBundle, plant: PlantModel,
                        grid_n: int = 100, tol: float = 1e-9, s_n: int = 21,
                        kink_tol: float = 1e-6, max_report: int = 1000) -> list:
    """Grid check of the flow and jump inequalities for every set.

    Checks ``<grad V, f> <= -eps V - H^2 + gamma_l^2 W^2`` and
    ``<dW/de, g> <= L_l W + H`` over X x E, with the error grid refined
    log-uniformly towards zero, for ``s`` on a grid over E plus the
    worst cases ``s = -e`` and ``s = e``, and both jump inequalities of ``W``.
    Scalar plants only.  Returns the violations (empty list when all hold).
    """
    if not (0.0 < cfg.lam < 1.0 and 0.0 < bundle.lam < 1.0):
        raise ConfigError("lambda must lie in (0, 1)")
    if grid_n < 50:
        raise ValueError("grid_n must be at least 50")
    if plant.state_dim != 1:
        raise ValueError("validate_condition1 supports scalar plants only")
    lam = bundle.lam
    xs = np.linspace(plant.x_box.lower[0], plant.x_box.upper[0], grid_n)
    es = np.linspace(plant.e_box.lower[0], plant.e_box.upper[0], grid_n)
    # the storage inequality binds at |e| << |x|; a uniform grid never gets there
    e_max = max(abs(plant.e_box.lower[0]), abs(plant.e_box.upper[0]))
    fine = np.geomspace(1e-6 * e_max, e_max, grid_n)
    es = np.unique(np.concatenate([es, fine, -fine]))
    es = es[(es >= plant.e_box.lower[0]) & (es <= plant.e_box.upper[0])]
    xg, eg = np.meshgrid(xs, es, indexing="ij")
    s_grid = np.linspace(plant.e_box.lower[0], plant.e_box.upper[0], s_n)
    s_all = np.concatenate([np.broadcast_to(s_grid, eg.shape + (s_n,)),
                            -eg[..., None], eg[..., None]], axis=-1)
    e_all = np.broadcast_to(eg[..., None], s_all.shape)
    x_all = np.broadcast_to(xg[..., None], s_all.shape)
    v = bundle.v_tilde(xg[..., None])
    dv_forms = [(name, bundle.v_grad(xg[..., None])[..., 0] * f) for name, f in _flows(plant, xg, eg)]
    hx = bundle.h(xg[..., None], eg[..., None])
    out = []

    def record(check, idx, ell, mask, lhs, rhs, form=""):
        for k in zip(*np.nonzero(mask)):
            if len(out) >= max_report:
                return
            out.append(Violation(check, idx, ell, float(x_all[k]), float(e_all[k]), float(s_all[k]),
                                 float(lhs[k]), float(rhs[k]), form))

    for idx, p in enumerate(cfg.sets, start=1):
        for ell in (0, 1):
            w = bundle.w_tilde(ell, e_all[..., None], s_all[..., None])
            gamma, l_const = p.gamma(ell), p.l_const(ell)
            rhs_v = (-p.eps * v - hx * hx)[..., None] + gamma * gamma * w * w
            for name, dv in dv_forms:
                lhs = np.broadcast_to(dv[..., None], rhs_v.shape)
                record("V_dec", idx, ell, lhs > rhs_v + tol, lhs, rhs_v, name)
            scale = lam if ell else 1.0
            for name, f in _flows(plant, xg, eg):
                g = np.broadcast_to((-f)[..., None], s_all.shape)
                w2, d = _w_directional(scale, e_all, s_all, g, kink_tol)
                rhs_w = l_const * w2 + hx[..., None]
                record("W_dec", idx, ell, d > rhs_w + tol, d, rhs_w, name)
    w0 = bundle.w_tilde(0, e_all[..., None], s_all[..., None])
    w1 = bundle.w_tilde(1, e_all[..., None], s_all[..., None])
    j1 = bundle.w_tilde(1, e_all[..., None], -e_all[..., None])
    j2 = bundle.w_tilde(0, (s_all + e_all)[..., None], -(s_all + e_all)[..., None])
    record("jump_sample", 0, 0, j1 > lam * w0 + tol, j1, lam * w0)
    record("jump_update", 0, 1, j2 > w1 + tol, j2, w1)
    return out
