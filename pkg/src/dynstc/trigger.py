"""Sampling-interval selection and the sliding window of past Lyapunov values."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, OutOfRegionError
from .phi import integrate_phi, t_max_result
from .storage import ParameterSet, StorageBundle, window_terms

log = logging.getLogger(__name__)

__all__ = ["TriggerConfig", "TriggerDecision", "gamma_trigger", "update_eta",
           "periodic_trigger"]


@dataclass(frozen=True)
class TriggerConfig:
    """Frozen trigger configuration; ``sets[0]`` is the reference set.

    Build instances with :meth:`build`, which derives ``c_u``, the per-set
    maximum intervals and ``t_min`` and checks that the reference set is usable
    as a periodic fallback.
    """

    lam: float
    c_x: float
    m: int
    tau_mad: float
    sets: tuple
    c_u: float
    t_min: float
    t_max_per_set: tuple
    capped: tuple = ()
    horizon_cap: float = 10.0
    phi_step: Optional[float] = None

    @classmethod
    def build(cls, lam, c_x, m, tau_mad, sets: Sequence[ParameterSet], horizon_cap=10.0,
              phi_step=None) -> "TriggerConfig":
        if not 0.0 < lam < 1.0:
            raise ConfigError(f"lambda must lie in (0, 1), got {lam}")
        if not c_x > 0:
            raise ConfigError("c_x must be positive")
        if int(m) != m or m < 1:
            raise ConfigError(f"window length m must be a positive integer, got {m}")
        if not tau_mad > 0:
            raise ConfigError("tau_mad must be positive")
        sets = tuple(sets)
        if not sets:
            raise ConfigError("at least one parameter set is required")
        p1 = sets[0]
        c_u = p1.gamma1 * p1.phi1_init
        results = [t_max_result(p, lam, c_u, tau_mad, horizon_cap, phi_step) for p in sets]
        t_min = results[0].value
        if not p1.eps > 0:
            raise ConfigError(f"reference set needs eps > 0, got eps={p1.eps}")
        if t_min < tau_mad:
            raise ConfigError(
                f"reference set violates T_max >= tau_mad: T_max={t_min:.6g} s "
                f"({results[0].reason or 'threshold'}), tau_mad={tau_mad:.6g} s")
        for i, r in enumerate(results):
            if r.capped:
                log.info("set %d: T_max capped at %.6g s", i + 1, r.value)
        return cls(lam=float(lam), c_x=float(c_x), m=int(m), tau_mad=float(tau_mad), sets=sets,
                   c_u=float(c_u), t_min=float(t_min),
                   t_max_per_set=tuple(float(r.value) for r in results),
                   capped=tuple(bool(r.capped) for r in results),
                   horizon_cap=float(horizon_cap), phi_step=phi_step)

    @property
    def n_sets(self):
        return len(self.sets)

    @property
    def t_max_overall(self):
        return max(self.t_max_per_set)

    @property
    def reference(self) -> ParameterSet:
        return self.sets[0]

    def phi_step_for(self, p: ParameterSet):
        from .phi import aligned_step, default_step
        step = self.phi_step
        if step is None:
            step = min(default_step(self.tau_mad, p.l0, p.gamma0),
                       default_step(self.tau_mad, p.l1, p.gamma1))
        return aligned_step(self.tau_mad, step)[0]

    @cached_property
    def phi_tables(self) -> tuple:
        """Per set ``(phi0, phi1)`` tables; ``phi0`` covers every admissible interval."""
        horizon0 = max(self.t_max_overall, self.tau_mad) * 1.001
        tables = []
        for p in self.sets:
            h = self.phi_step_for(p)
            hz0 = max(horizon0, 10 * h)
            hz1 = max(self.tau_mad, 10 * h)
            tables.append((integrate_phi(p.eps, p.gamma0, p.l0, p.phi0_init, hz0, h),
                           integrate_phi(p.eps, p.gamma1, p.l1, p.phi1_init, hz1, h)))
        return tuple(tables)

    def phi_eval(self, p_index, ell, tau):
        """``phi_{ell,p}(tau)`` for a 1-based set index."""
        t0, t1 = self.phi_tables[p_index - 1]
        return (t1 if ell else t0)(tau)

    def same_as(self, other: "TriggerConfig") -> bool:
        names = ("lam", "c_x", "m", "tau_mad", "sets", "c_u", "t_min", "t_max_per_set")
        return all(getattr(self, n) == getattr(other, n) for n in names)


@dataclass(frozen=True)
class TriggerDecision:
    tau_max: float
    chosen_p: int  # 1-based
    fallback: bool
    certified: bool = True
    u_plus: float = field(default=float("nan"), compare=False)
    c_value: float = field(default=float("nan"), compare=False)


def _u_plus(bundle, p, x, e):
    v, w2 = window_terms(bundle, x, e)
    return v + (p.gamma1 * p.phi1_init) * w2


def gamma_trigger(cfg: TriggerConfig, bundle: StorageBundle, x, e, eta,
                  strict: bool = True) -> TriggerDecision:
    """Pick the next sampling interval from the current sample.

    Probes every set but the reference one for the largest interval that keeps
    the windowed decrease, falling back to ``t_min`` with the reference set.
    With ``strict=False`` a fallback outside the certified level set is
    returned flagged ``certified=False`` instead of raising.
    """
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.size != cfg.m - 1:
        raise ValueError(f"eta must have length m-1={cfg.m - 1}, got {eta.size}")
    if not np.all(np.isfinite(np.asarray(x, dtype=float))):
        raise ValueError("x must be finite")
    p1 = cfg.reference
    v, w2 = window_terms(bundle, x, e)
    u1 = v + cfg.c_u * w2
    c_val = min(cfg.c_x, (u1 + float(eta.sum())) / cfg.m)
    best_tau, best_p, best_u = -math.inf, 1, float("nan")
    for idx in range(2, cfg.n_sets + 1):
        p = cfg.sets[idx - 1]
        t_cap = cfg.t_max_per_set[idx - 1]
        if t_cap <= 0:
            continue
        u_p = v + (p.gamma1 * p.phi1_init) * w2
        if u_p > c_val or u_p > cfg.c_x:
            continue
        rate = p1.eps - p.eps
        if u_p == 0.0 or rate <= 0:
            tau_p = t_cap
        else:
            tau_p = min((math.log(c_val) - math.log(u_p)) / rate, t_cap)
        if max(1.0, math.exp(-p.eps * tau_p)) * u_p >= cfg.c_x:
            continue
        if tau_p > best_tau:
            best_tau, best_p, best_u = tau_p, idx, u_p
    if best_tau >= cfg.t_min:
        return TriggerDecision(best_tau, best_p, False, True, best_u, c_val)
    if u1 >= cfg.c_x:
        if strict:
            raise OutOfRegionError(
                f"reference value {u1:.6g} >= c_x={cfg.c_x:.6g}: state outside the certified region",
                x=np.asarray(x, dtype=float), e=np.asarray(e, dtype=float), value=u1)
        return TriggerDecision(cfg.t_min, 1, True, False, u1, c_val)
    return TriggerDecision(cfg.t_min, 1, True, True, u1, c_val)


def periodic_trigger(period: float):
    """Replacement trigger for the periodic baseline; always reports the reference set."""

    def trigger(cfg, bundle, x, e, eta, strict=True):
        u1 = _u_plus(bundle, cfg.reference, x, e)
        certified = u1 < cfg.c_x
        if strict and not certified:
            raise OutOfRegionError(f"reference value {u1:.6g} >= c_x={cfg.c_x:.6g}", value=u1)
        return TriggerDecision(float(period), 1, True, certified, u1, float("nan"))

    return trigger


def update_eta(cfg: TriggerConfig, bundle: StorageBundle, eta, x, e) -> np.ndarray:
    """Shift the window left and append the current post-sampling reference value."""
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.size != cfg.m - 1:
        raise ValueError(f"eta must have length m-1={cfg.m - 1}, got {eta.size}")
    if eta.size == 0:
        return eta.copy()
    return np.append(eta[1:], _u_plus(bundle, cfg.reference, x, e))
