"""Riccati timers and the maximum certified inter-sampling time.

Both timers obey

    dphi/dtau = -2 (L + eps/2) phi - gamma (phi**2 + 1)

with the constants of the respective mode.  Integration is classical fixed-step
RK4 so results are bit-reproducible; threshold crossings are refined by
bisection on a single RK4 sub-step taken from the last grid sample.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError
from .storage import ParameterSet

log = logging.getLogger(__name__)

__all__ = [
    "PhiTable",
    "TmaxResult",
    "riccati_rhs",
    "rk4_step",
    "default_step",
    "aligned_step",
    "integrate_phi",
    "t_max",
    "t_max_result",
]

BLOW_DOWN = -1e6
REFINE_TOL = 1e-9


def riccati_rhs(phi, eps, gamma, l):
    return -2.0 * (l + 0.5 * eps) * phi - gamma * (phi * phi + 1.0)


def rk4_step(phi, h, eps, gamma, l):
    """One RK4 step; ``phi`` and ``h`` may be arrays (broadcast)."""
    k1 = riccati_rhs(phi, eps, gamma, l)
    k2 = riccati_rhs(phi + 0.5 * h * k1, eps, gamma, l)
    k3 = riccati_rhs(phi + 0.5 * h * k2, eps, gamma, l)
    k4 = riccati_rhs(phi + h * k3, eps, gamma, l)
    return phi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def default_step(tau_mad, l, gamma):
    return min(tau_mad / 50.0, 1e-4 * max(1.0, 1.0 / (abs(l) + gamma)))


def aligned_step(tau_mad, step):
    """Shrink ``step`` so that ``tau_mad`` is an exact grid point."""
    n = max(1, math.ceil(tau_mad / step - 1e-9))
    return tau_mad / n, n


@dataclass(frozen=True)
class PhiTable:
    """Dense RK4 tabulation of one timer on ``[0, taus[-1]]``."""

    taus: np.ndarray
    values: np.ndarray
    step: float
    eps: float
    gamma: float
    l: float
    phi_init: float
    truncated: bool = False

    @property
    def horizon(self):
        return float(self.taus[-1])

    def __call__(self, tau):
        """Evaluate by one RK4 sub-step from the preceding grid sample; NaN past the table."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0):
            raise ValueError("tau must be nonnegative")
        idx = np.clip(np.searchsorted(self.taus, tau, side="right") - 1, 0, self.taus.size - 1)
        delta = tau - self.taus[idx]
        out = rk4_step(self.values[idx], delta, self.eps, self.gamma, self.l)
        beyond = tau > self.horizon * (1 + 1e-12) + 1e-15
        if np.any(beyond):
            out = np.where(beyond, np.nan, out)
        return out

    def first_crossing(self, threshold):
        """First grid index with ``values < threshold``, or ``None``."""
        below = np.nonzero(self.values < threshold)[0]
        return int(below[0]) if below.size else None


def integrate_phi(eps, gamma, l, phi0, horizon, step) -> PhiTable:
    """Tabulate the timer from ``phi0`` over ``[0, horizon]``.

    The grid is uniform with a final shortened step landing on ``horizon``.
    The table stops early once the solution drops below ``-1e6``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not (horizon > 0 and step > 0):
        raise ValueError("horizon and step must be positive")
    if step > horizon / 10.0 * (1 + 1e-12):
        raise ValueError(f"step {step} exceeds horizon/10")
    n_full = int(math.floor(horizon / step + 1e-9))
    taus = [i * step for i in range(n_full + 1)]
    if horizon - taus[-1] > 1e-12 * horizon:
        taus.append(horizon)
    vals = np.empty(len(taus))
    phi = float(phi0)
    vals[0] = phi
    truncated = False
    n = 1
    for i in range(1, len(taus)):
        phi = rk4_step(phi, taus[i] - taus[i - 1], eps, gamma, l)
        if not math.isfinite(phi):
            raise IntegrationError(f"timer diverged at tau={taus[i]:.6g}")
        vals[i] = phi
        n = i + 1
        if phi < BLOW_DOWN:
            truncated = True
            break
    return PhiTable(np.asarray(taus[:n]), vals[:n], step, float(eps), float(gamma), float(l),
                    float(phi0), truncated)


@dataclass(frozen=True)
class TmaxResult:
    value: float
    capped: bool
    step: float
    reason: str = ""


def _stays_above(phi, eps, gamma, l, threshold):
    """True when the timer provably never drops below ``threshold`` from ``phi``."""
    a = 2.0 * l + eps
    disc = a * a - 4.0 * gamma * gamma
    if a >= 0 or disc < 0:
        return False
    r_lo = (-a - math.sqrt(disc)) / (2.0 * gamma)
    r_hi = (-a + math.sqrt(disc)) / (2.0 * gamma)
    return phi >= r_lo and gamma * min(phi, r_hi) >= threshold


def _refine(phi_i, h, eps, gamma, l, threshold):
    lo, hi = 0.0, h
    while hi - lo > REFINE_TOL:
        mid = 0.5 * (lo + hi)
        if gamma * rk4_step(phi_i, mid, eps, gamma, l) >= threshold:
            lo = mid
        else:
            hi = mid
    return lo


def t_max_result(p: ParameterSet, lam, c_u, tau_mad, horizon_cap=10.0, step=None) -> TmaxResult:
    if horizon_cap < tau_mad:
        raise ValueError("horizon_cap must be at least tau_mad")
    if step is None:
        step = min(default_step(tau_mad, p.l0, p.gamma0), default_step(tau_mad, p.l1, p.gamma1))
    h, n_mad = aligned_step(tau_mad, step)
    eps, g0, g1 = p.eps, p.gamma0, p.gamma1
    threshold = lam * lam * c_u
    phi0, phi1 = p.phi0_init, p.phi1_init
    for i in range(n_mad + 1):
        if not (g1 * phi1 >= g0 * phi0 > 0.0):
            return TmaxResult(0.0, False, h, "mode ordering fails before tau_mad")
        if g0 * phi0 < threshold:
            return TmaxResult(0.0, False, h, "threshold crossed before tau_mad")
        if i < n_mad:
            phi0 = rk4_step(phi0, h, eps, g0, p.l0)
            phi1 = rk4_step(phi1, h, eps, g1, p.l1)
            if not (math.isfinite(phi0) and math.isfinite(phi1)):
                raise IntegrationError("timer diverged before tau_mad")
    i = n_mad
    while True:
        if i % 4096 == n_mad % 4096 and _stays_above(phi0, eps, g0, p.l0, threshold):
            return TmaxResult(float(horizon_cap), True, h, "timer settles above threshold")
        nxt = rk4_step(phi0, h, eps, g0, p.l0)
        if not math.isfinite(nxt):
            raise IntegrationError(f"timer diverged at tau={(i + 1) * h:.6g}")
        if g0 * nxt < threshold:
            delta = _refine(phi0, h, eps, g0, p.l0, threshold)
            value = max(tau_mad, i * h + delta - REFINE_TOL)
            if value >= horizon_cap:
                return TmaxResult(float(horizon_cap), True, h, "cap")
            return TmaxResult(value, False, h)
        phi0 = nxt
        i += 1
        if i * h >= horizon_cap:
            return TmaxResult(float(horizon_cap), True, h, "cap")


def t_max(p: ParameterSet, lam, c_u, tau_mad, horizon_cap=10.0, step=None) -> float:
    """Largest certified sampling interval of ``p``; 0 when the set is unusable."""
    res = t_max_result(p, lam, c_u, tau_mad, horizon_cap, step)
    if res.capped:
        log.info("T_max capped at %.6g s (%s)", res.value, res.reason)
    return res.value
