"""Plant models in sampled-error coordinates.

A plant is described by its closed-loop drift ``f(x, e)`` where ``e`` is the
hold error ``xhat - x``; the error obeys ``de/dt = g(x, e) = -f(x, e)`` between
input updates.  ``f`` must accept arrays whose last axis is the state axis so
that grid checks can be vectorised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from .errors import DomainError

__all__ = [
    "Box",
    "PlantModel",
    "ExamplePlant",
    "eval_f",
    "eval_g",
    "example_plant",
    "register_plant",
    "get_plant",
    "rk4_hold_segment",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lower <= z <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must have equal shape and lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, radius, dim=1):
        r = np.broadcast_to(np.asarray(radius, dtype=float), (dim,))
        return cls(-r, r.copy())

    @property
    def dim(self):
        return self.lower.size

    def contains(self, z, rtol=0.0):
        """Membership test along the last axis; ``rtol`` widens the box."""
        z = np.asarray(z, dtype=float)
        pad = rtol * np.maximum(np.abs(self.lower), np.abs(self.upper))
        return np.all((z >= self.lower - pad) & (z <= self.upper + pad), axis=-1)

    def grid(self, n):
        """Tensor grid with ``n`` points per axis, shape ``(n**dim, dim)``."""
        axes = [np.linspace(lo, hi, n) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class PlantModel:
    """Closed-loop plant ``dx/dt = f(x, e)`` with declared sets X and E.

    ``hold_flow`` is an optional compiled integrator with the signature of
    :func:`rk4_hold_segment`; when it is missing the simulator falls back to a
    pure numpy RK4 loop over ``f``.
    """

    name: str
    state_dim: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x_box: Box
    e_box: Box
    hold_flow: Optional[Callable] = field(default=None, compare=False, repr=False)

    def x_set_check(self, x):
        return self.x_box.contains(x)

    def e_set_check(self, e):
        return self.e_box.contains(e)


def _as_state(plant, z):
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1)
    if z.shape[-1] != plant.state_dim:
        raise ValueError(f"expected last axis of size {plant.state_dim}, got {z.shape}")
    return z


def eval_f(plant: PlantModel, x, e) -> np.ndarray:
    """Closed-loop drift; raises :class:`DomainError` on non-finite output."""
    x = _as_state(plant, x)
    e = _as_state(plant, e)
    out = np.asarray(plant.f(x, e), dtype=float)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"plant {plant.name!r} returned a non-finite drift")
    return out


def eval_g(plant: PlantModel, x, e) -> np.ndarray:
    return -eval_f(plant, x, e)


# --------------------------------------------------------------------------
# Example plant: dx/dt = -x sin^2(x^2) + uhat cos(x^2), u = -x cos(x^2)


def _example_f(x, e):
    xh = x + e
    uhat = -xh * np.cos(xh * xh)
    return -x * np.sin(x * x) ** 2 + uhat * np.cos(x * x)


@numba.njit(cache=True)
def _example_rhs(x, e):
    xh = x + e
    uhat = -xh * math.cos(xh * xh)
    s = math.sin(x * x)
    return -x * s * s + uhat * math.cos(x * x)


@numba.njit(cache=True)
def _example_hold_flow(x0, e0, h, n_full, h_last):
    n_rows = n_full + 1 + (1 if h_last > 0.0 else 0)
    xs = np.empty((n_rows, 1))
    es = np.empty((n_rows, 1))
    x = x0[0]
    e = e0[0]
    xs[0, 0] = x
    es[0, 0] = e
    for i in range(n_rows - 1):
        dt = h if i < n_full else h_last
        k1 = _example_rhs(x, e)
        k2 = _example_rhs(x + 0.5 * dt * k1, e - 0.5 * dt * k1)
        k3 = _example_rhs(x + 0.5 * dt * k2, e - 0.5 * dt * k2)
        k4 = _example_rhs(x + dt * k3, e - dt * k3)
        incr = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x = x + incr
        e = e - incr
        xs[i + 1, 0] = x
        es[i + 1, 0] = e
    return xs, es


def rk4_hold_segment(f, x0, e0, h, n_full, h_last):
    """Integrate ``(x, e)`` under a held input with classical RK4.

    Takes ``n_full`` steps of size ``h`` followed by one step of ``h_last``
    when ``h_last > 0``.  Returns the states at every step, initial row
    included.  Since ``de/dt = -dx/dt`` every stage increment of ``e`` is the
    negated increment of ``x``, which keeps ``x + e`` constant.
    """
    x = np.array(x0, dtype=float)
    e = np.array(e0, dtype=float)
    n_rows = n_full + 1 + (1 if h_last > 0.0 else 0)
    xs = np.empty((n_rows, x.size))
    es = np.empty((n_rows, x.size))
    xs[0], es[0] = x, e
    for i in range(n_rows - 1):
        dt = h if i < n_full else h_last
        k1 = f(x, e)
        k2 = f(x + 0.5 * dt * k1, e - 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2, e - 0.5 * dt * k2)
        k4 = f(x + dt * k3, e - dt * k3)
        incr = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x = x + incr
        e = e - incr
        xs[i + 1], es[i + 1] = x, e
    return xs, es


@dataclass(frozen=True)
class ExamplePlant(PlantModel):
    """Scalar benchmark plant with quadratic storage ``v_coeff * x**2``.

    For ``x`` in [-3, 3] and ``e`` in [-6, 6] the drift can be written as
    ``-x - a3(x, e) e`` with ``|a3| <= a3_bound``.
    """

    v_coeff: float = 0.505
    a3_bound: float = 37.0

    def effective_uncertainty(self, x, e):
        """``a3(x, e) = -(f(x, e) + x) / e``; NaN where ``e == 0``."""
        x = np.asarray(x, dtype=float)
        e = np.asarray(e, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            a3 = -(_example_f(x, e) + x) / e
        return np.where(e == 0.0, np.nan, a3)


def example_plant(x_radius=3.0, e_radius=6.0) -> ExamplePlant:
    return ExamplePlant(
        name="example_scalar",
        state_dim=1,
        f=_example_f,
        x_box=Box.symmetric(x_radius),
        e_box=Box.symmetric(e_radius),
        hold_flow=_example_hold_flow,
    )


_REGISTRY: dict[str, Callable[[], PlantModel]] = {"example_scalar": example_plant}


def register_plant(name: str, factory: Callable[[], PlantModel]) -> None:
    if name in _REGISTRY:
        raise ValueError(f"plant {name!r} is already registered")
    _REGISTRY[name] = factory


def get_plant(name: str) -> PlantModel:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown plant {name!r}; known: {sorted(_REGISTRY)}") from None
