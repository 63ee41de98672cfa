"""Storage functions and the per-parameter-set hybrid Lyapunov function.

The hybrid Lyapunov function of a parameter set is

    U(xi) = V(x) + gamma_ell * phi_ell(tau) * W(ell, e, s)**2

with the max-form error storage ``W`` built from ``|e|``.  The squared ``W``
is used everywhere, including the window value and the region of attraction.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, InvalidPhiError

__all__ = [
    "ParameterCore",
    "ParameterSet",
    "StorageBundle",
    "quadratic_bundle",
    "from_assumption1",
    "u_value",
    "window_value",
    "window_terms",
    "c_window",
    "in_region_of_attraction",
    "roa_radius",
]


def _norm(z):
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        return np.abs(z)
    return np.linalg.norm(z, axis=-1)


@dataclass(frozen=True)
class ParameterCore:
    """Flow and jump constants of one parameter set, before the Riccati initial values are fixed."""

    eps: float
    gamma0: float
    gamma1: float
    l0: float
    l1: float

    def with_phi(self, phi0_init, phi1_init) -> "ParameterSet":
        return ParameterSet(self.eps, self.gamma0, self.gamma1, self.l0, self.l1,
                            float(phi0_init), float(phi1_init))


@dataclass(frozen=True)
class ParameterSet:
    eps: float
    gamma0: float
    gamma1: float
    l0: float
    l1: float
    phi0_init: float
    phi1_init: float

    def __post_init__(self):
        if not (self.gamma0 > 0 and self.gamma1 > 0):
            raise ConfigError(f"gamma0, gamma1 must be positive, got {self.gamma0}, {self.gamma1}")
        if not (self.phi0_init > 0 and self.phi1_init > 0):
            raise ConfigError(
                f"phi initial values must be positive, got {self.phi0_init}, {self.phi1_init}")
        for name in ("eps", "gamma0", "gamma1", "l0", "l1", "phi0_init", "phi1_init"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def core(self) -> ParameterCore:
        return ParameterCore(self.eps, self.gamma0, self.gamma1, self.l0, self.l1)

    def gamma(self, ell):
        return self.gamma1 if ell else self.gamma0

    def l_const(self, ell):
        return self.l1 if ell else self.l0

    def phi_init(self, ell):
        return self.phi1_init if ell else self.phi0_init

    def replace(self, **changes) -> "ParameterSet":
        return replace(self, **changes)


@dataclass(frozen=True)
class StorageBundle:
    """State storage ``V``, its gradient, the coupling term ``H`` and ``lambda``.

    ``v_tilde``, ``v_grad`` and ``h`` operate on arrays whose last axis is the
    state axis.  ``W`` is the max-form error storage for ``W(e) = |e|``.
    """

    v_tilde: Callable[[np.ndarray], np.ndarray]
    v_grad: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lam: float
    v_coeff: Optional[float] = None  # set for quadratic storage

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ConfigError(f"lambda must lie in (0, 1), got {self.lam}")

    def w_tilde(self, ell, e, s):
        ne = _norm(e)
        nes = _norm(np.asarray(e, dtype=float) + np.asarray(s, dtype=float))
        scale = np.where(np.asarray(ell) == 1, self.lam, 1.0)
        return np.maximum(scale * ne, nes)


def quadratic_bundle(v_coeff: float, lam: float) -> StorageBundle:
    """``V(x) = v_coeff |x|^2`` with ``H(x, e) = |x|``."""

    def v_tilde(x):
        x = np.asarray(x, dtype=float)
        return v_coeff * (x * x).sum(axis=-1) if x.ndim else v_coeff * x * x

    def v_grad(x):
        return 2.0 * v_coeff * np.asarray(x, dtype=float)

    def h(x, e):
        return _norm(x)

    return StorageBundle(v_tilde=v_tilde, v_grad=v_grad, h=h, lam=lam, v_coeff=float(v_coeff))


def from_assumption1(gamma: float, l: float, eps: float, lam: float) -> ParameterCore:
    """Map ``(gamma, L, eps)`` for the plain storage ``|e|`` to the hybrid constants.

    ``gamma0 = gamma``, ``gamma1 = gamma / lam``, ``L0 = L``, ``L1 = L / lam``.
    """
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"lambda must lie in (0, 1), got {lam}")
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    return ParameterCore(eps=float(eps), gamma0=float(gamma), gamma1=gamma / lam,
                         l0=float(l), l1=l / lam)


def u_value(bundle: StorageBundle, p: ParameterSet, phi_ell_at_tau, ell, x, e, s):
    """Hybrid Lyapunov function of set ``p`` given ``phi_ell(tau)``."""
    phi = np.asarray(phi_ell_at_tau, dtype=float)
    if np.any(phi < 0) or np.any(np.isnan(phi)):
        raise InvalidPhiError("phi evaluated beyond its valid horizon")
    gamma = np.where(np.asarray(ell) == 1, p.gamma1, p.gamma0)
    w = bundle.w_tilde(ell, e, s)
    return bundle.v_tilde(x) + gamma * phi * w * w


def window_value(bundle: StorageBundle, p1: ParameterSet, x, e):
    """Value of the reference function right after a sampling jump.

    Equals ``V(x) + gamma_{1,1} phi_{1,1}(0) W(1, e, -e)**2``.
    """
    e = np.asarray(e, dtype=float)
    w = bundle.w_tilde(1, e, -e)
    return bundle.v_tilde(x) + (p1.gamma1 * p1.phi1_init) * (w * w)


def window_terms(bundle: StorageBundle, x, e):
    """``(V(x), W(1, e, -e)**2)`` so that every set's window value is ``V + coeff * W2``."""
    e = np.asarray(e, dtype=float)
    w = bundle.w_tilde(1, e, -e)
    return float(bundle.v_tilde(x)), float(w * w)


def c_window(bundle, p1, x, e, eta, c_x, m):
    if m < 1:
        raise ConfigError("window length m must be a positive integer")
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.size != m - 1:
        raise ValueError(f"eta must have length m-1={m - 1}, got {eta.size}")
    avg = (float(window_value(bundle, p1, x, e)) + float(eta.sum())) / m
    return min(float(c_x), avg)


def in_region_of_attraction(bundle, p1, x, c_x) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(window_value(bundle, p1, x, -x) < c_x)


def roa_radius(bundle, p1, c_x) -> float:
    """Radius of the region of attraction for a quadratic bundle."""
    if bundle.v_coeff is None:
        raise ValueError("roa_radius needs a quadratic storage bundle")
    coeff = bundle.v_coeff + p1.gamma1 * p1.phi1_init * bundle.lam ** 2
    return float(np.sqrt(c_x / coeff))
