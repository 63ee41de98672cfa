"""Simulation of the sampled, delayed closed loop as a hybrid automaton.

The state is ``xi = (x, e, s, eta, tau, tau_max, ell)``.  During flow ``x`` and
the hold error ``e`` evolve with ``de/dt = -dx/dt`` and ``tau`` counts time
since the last sample.  A sampling jump (``ell = 0 -> 1``) stores ``-e`` in
``s``, shifts the window ``eta`` and asks the trigger for the next interval.
An update jump (``ell = 1 -> 0``) fires after the transmission delay and makes
the held input the sampled one.

Jumps are counted from ``j = 0``; the initial state is right after the
first sample, so the first event is the update jump ``j = 0 -> 1``.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, IntegrationError, OutOfRegionError
from .model import PlantModel, rk4_hold_segment
from .storage import StorageBundle, in_region_of_attraction, window_value
from .trigger import TriggerConfig, TriggerDecision, gamma_trigger, update_eta

log = logging.getLogger(__name__)

__all__ = [
    "DelayModel",
    "HybridState",
    "HybridTime",
    "Event",
    "Decision",
    "SolutionTrace",
    "InvariantViolation",
    "initial_state",
    "flow_step",
    "jump",
    "simulate",
    "check_invariants",
    "write_trace_csv",
    "write_events_csv",
]


# --------------------------------------------------------------------------
# Delays


@dataclass(frozen=True)
class DelayModel:
    """Transmission delay source: ``zero``, ``constant``, ``uniform`` or ``sequence``.

    Sequences repeat cyclically.  ``file:<path>`` specs load a sequence of
    whitespace or comma separated delays.
    """

    kind: str = "zero"
    value: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    seed: int = 0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "uniform", "sequence"):
            raise ConfigError(f"unknown delay kind {self.kind!r}")
        if self.kind == "constant" and not self.value >= 0:
            raise ConfigError("constant delay must be nonnegative")
        if self.kind == "uniform" and not 0 <= self.lo <= self.hi:
            raise ConfigError("uniform delay needs 0 <= lo <= hi")
        if self.kind == "sequence" and (not self.values or min(self.values) < 0):
            raise ConfigError("delay sequence must be nonempty and nonnegative")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, d):
        return cls("constant", value=float(d))

    @classmethod
    def uniform(cls, lo, hi, seed=0):
        return cls("uniform", lo=float(lo), hi=float(hi), seed=int(seed))

    @classmethod
    def sequence(cls, values):
        return cls("sequence", values=tuple(float(v) for v in values))

    @classmethod
    def parse(cls, spec: str) -> "DelayModel":
        """Parse ``zero | constant:<d> | uniform:<lo>:<hi>:<seed> | file:<path>``."""
        head, _, rest = spec.strip().partition(":")
        try:
            if head == "zero" and not rest:
                return cls.zero()
            if head == "constant":
                return cls.constant(float(rest))
            if head == "uniform":
                lo, hi, seed = rest.split(":")
                return cls.uniform(float(lo), float(hi), int(seed))
            if head == "sequence":
                return cls.sequence(float(v) for v in rest.split(","))
            if head == "file":
                text = Path(rest).read_text(encoding="utf-8").replace(",", " ")
                return cls.sequence(float(v) for v in text.split())
        except (ValueError, OSError) as exc:
            raise ConfigError(f"bad delay spec {spec!r}: {exc}") from exc
        raise ConfigError(f"bad delay spec {spec!r}")

    def spec(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "constant":
            return f"constant:{self.value!r}"
        if self.kind == "uniform":
            return f"uniform:{self.lo!r}:{self.hi!r}:{self.seed}"
        return "sequence:" + ",".join(repr(v) for v in self.values)

    def sampler(self, tau_mad: float) -> Callable[[], float]:
        """Fresh, seeded draw function; every draw is checked against ``tau_mad``."""
        if self.kind == "zero":
            gen = lambda: 0.0  # noqa: E731
        elif self.kind == "constant":
            gen = lambda: self.value  # noqa: E731
        elif self.kind == "uniform":
            rng = np.random.default_rng(self.seed)
            gen = lambda: float(rng.uniform(self.lo, self.hi))  # noqa: E731
        else:
            it = iter(())
            vals = self.values

            def gen():
                nonlocal it
                try:
                    return next(it)
                except StopIteration:
                    it = iter(vals)
                    return next(it)

        def draw():
            d = gen()
            if not 0.0 <= d <= tau_mad * (1 + 1e-12):
                raise ConfigError(f"delay {d} outside [0, tau_mad={tau_mad}]")
            return min(d, tau_mad)

        return draw


# --------------------------------------------------------------------------
# State and trace types


@dataclass(frozen=True, order=True)
class HybridTime:
    t: float
    j: int


@dataclass(frozen=True)
class HybridState:
    x: np.ndarray
    e: np.ndarray
    s: np.ndarray
    eta: np.ndarray
    tau: float
    tau_max: float
    ell: int

    def __post_init__(self):
        for name in ("x", "e", "s", "eta"):
            arr = np.atleast_1d(np.array(getattr(self, name), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.ell not in (0, 1):
            raise ValueError("ell must be 0 or 1")

    def in_flow_set(self, tau_mad, rtol=1e-12):
        limit = self.tau_max if self.ell == 0 else tau_mad
        return 0.0 <= self.tau <= limit * (1 + rtol)

    def norm(self):
        return float(np.sqrt(sum(float(np.dot(v, v)) for v in (self.x, self.e, self.s, self.eta))))


@dataclass(frozen=True)
class Event:
    k: int  # jump counter j before the jump
    t: float
    kind: str  # "sample" or "update"
    value: float  # new tau_max for samples, the delay for updates
    chosen_p: int
    fallback: bool


@dataclass
class Decision:
    """Trigger outcome at one sampling instant plus the trace rows of its interval."""

    t: float
    tau_max: float
    chosen_p: int
    fallback: bool
    certified: bool
    u1_plus: float
    u_chosen_plus: float
    eta_sum: float
    row_post: int
    row_update_pre: int = -1
    row_update_post: int = -1
    row_end: int = -1
    t_end: float = float("nan")


@dataclass
class SolutionTrace:
    """Trajectory samples as column arrays, plus event and decision logs."""

    t: np.ndarray
    j: np.ndarray
    ell: np.ndarray
    x: np.ndarray
    e: np.ndarray
    s: np.ndarray
    tau: np.ndarray
    tau_max: np.ndarray
    u1: np.ndarray
    u_chosen: np.ndarray
    chosen_p: np.ndarray
    eta_norm: np.ndarray
    events: list
    decisions: list
    final_state: Optional[HybridState] = None
    error: Optional[BaseException] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    @property
    def sample_times(self):
        return np.array([d.t for d in self.decisions])

    @property
    def intervals(self):
        """Completed inter-sampling times ``t_{k+2} - t_k``."""
        return np.array([d.t_end - d.t for d in self.decisions if d.row_end >= 0])

    @property
    def n_samples(self):
        return len(self.decisions)

    def raise_if_error(self):
        if self.error is not None:
            raise self.error

    def copy(self) -> "SolutionTrace":
        arrays = {n: getattr(self, n).copy() for n in _COLUMNS}
        return replace(self, **arrays, events=list(self.events),
                       decisions=[replace(d) for d in self.decisions], meta=dict(self.meta))


_COLUMNS = ("t", "j", "ell", "x", "e", "s", "tau", "tau_max", "u1", "u_chosen", "chosen_p",
            "eta_norm")
_RAW = tuple(n for n in _COLUMNS if n not in ("u1", "u_chosen"))


class _Recorder:
    def __init__(self, n_x):
        self.n_x = n_x
        self.chunks = {n: [] for n in _RAW}
        self.rows = 0

    def add(self, **cols):
        n = len(cols["t"])
        for name in _RAW:
            self.chunks[name].append(np.asarray(cols[name]))
        self.rows += n
        return self.rows - 1

    def finish(self, cfg, bundle, events, decisions, final_state, error, meta) -> SolutionTrace:
        def cat(name, shape_tail=()):
            parts = self.chunks[name]
            if not parts:
                return np.empty((0,) + shape_tail)
            return np.concatenate(parts, axis=0)

        cols = dict(t=cat("t"), j=cat("j").astype(np.int64), ell=cat("ell").astype(np.int8),
                    x=cat("x", (self.n_x,)), e=cat("e", (self.n_x,)), s=cat("s", (self.n_x,)),
                    tau=cat("tau"), tau_max=cat("tau_max"),
                    chosen_p=cat("chosen_p").astype(np.int64), eta_norm=cat("eta_norm"))
        cols["u1"], cols["u_chosen"] = _u_columns(cfg, bundle, cols)
        return SolutionTrace(**cols, events=events, decisions=decisions,
                             final_state=final_state, error=error, meta=meta)


# --------------------------------------------------------------------------
# Lyapunov values along the trace


def _u_along(cfg: TriggerConfig, bundle: StorageBundle, p_index, ell, x, e, s, tau):
    """``U_p`` for rows sharing ``ell`` and ``s``; NaN where the timer is invalid."""
    p = cfg.sets[p_index - 1]
    phi = np.asarray(cfg.phi_eval(p_index, ell, np.asarray(tau, dtype=float)), dtype=float)
    phi = np.where(phi >= 0, phi, np.nan)
    w = bundle.w_tilde(ell, e, s)
    return bundle.v_tilde(x) + p.gamma(ell) * phi * w * w


def _u_columns(cfg, bundle, cols):
    """``U_1`` and ``U_chosen`` for every row, evaluated per (set, mode) group."""
    n = cols["t"].size
    u1 = np.empty(n)
    up = np.empty(n)
    ell = cols["ell"]
    for mode in (0, 1):
        rows = np.nonzero(ell == mode)[0]
        if rows.size:
            u1[rows] = _u_along(cfg, bundle, 1, mode, cols["x"][rows], cols["e"][rows],
                                cols["s"][rows], cols["tau"][rows])
    up[:] = u1
    for p_index in np.unique(cols["chosen_p"]):
        if p_index == 1:
            continue
        for mode in (0, 1):
            rows = np.nonzero((cols["chosen_p"] == p_index) & (ell == mode))[0]
            if rows.size:
                up[rows] = _u_along(cfg, bundle, int(p_index), mode, cols["x"][rows],
                                    cols["e"][rows], cols["s"][rows], cols["tau"][rows])
    return u1, up


# --------------------------------------------------------------------------
# Single-step operations


TriggerFn = Callable[..., TriggerDecision]


def _check_region(plant: PlantModel, x, e, t):
    if not (bool(np.all(plant.x_box.contains(x))) and bool(np.all(plant.e_box.contains(e)))):
        raise OutOfRegionError(f"state left X x E at t={t:.6g}", t=t, x=np.asarray(x),
                               e=np.asarray(e))


def initial_state(plant: PlantModel, cfg: TriggerConfig, bundle: StorageBundle, x0, eta0=None,
                  strict=True, trigger: TriggerFn = gamma_trigger):
    """Initial hybrid state right after the first sample; returns ``(state, decision)``.

    ``eta0`` defaults to the reference value ``U_1`` of that state in every slot.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (plant.state_dim,):
        raise ValueError(f"x0 must have {plant.state_dim} components")
    if not in_region_of_attraction(bundle, cfg.reference, x0, cfg.c_x):
        msg = f"x0={x0.tolist()} is outside the certified region of attraction"
        log.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    e0 = -x0
    if eta0 is None:
        eta0 = np.full(cfg.m - 1, float(window_value(bundle, cfg.reference, x0, e0)))
    eta0 = np.asarray(eta0, dtype=float).ravel()
    if eta0.size != cfg.m - 1:
        raise ValueError(f"eta0 must have length m-1={cfg.m - 1}")
    if not strict:
        _check_region(plant, x0, e0, 0.0)
    dec = trigger(cfg, bundle, x0, e0, eta0, strict=strict)
    return HybridState(x0, e0, x0.copy(), eta0, 0.0, dec.tau_max, 1), dec


def flow_step(plant: PlantModel, xi: HybridState, h: float) -> HybridState:
    """One RK4 step of the flow map; ``s``, ``eta``, ``tau_max`` and ``ell`` are unchanged."""
    if not h > 0:
        raise ValueError("step must be positive")
    xs, es = _integrate(plant, xi.x, xi.e, h, 1, 0.0)
    x1, e1 = xs[-1], es[-1]
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(e1))):
        raise IntegrationError("non-finite state during flow")
    return replace(xi, x=x1, e=e1, tau=xi.tau + h)


def _integrate(plant, x, e, h, n_full, h_last):
    if plant.hold_flow is not None:
        return plant.hold_flow(np.ascontiguousarray(x, dtype=float),
                               np.ascontiguousarray(e, dtype=float), float(h), int(n_full),
                               float(h_last))
    return rk4_hold_segment(lambda a, b: np.asarray(plant.f(a, b), dtype=float), x, e, h, n_full,
                            h_last)


def jump(cfg: TriggerConfig, bundle: StorageBundle, plant: PlantModel, xi: HybridState,
         strict: bool = True, trigger: TriggerFn = gamma_trigger, t: float = float("nan")):
    """Apply the jump map; returns ``(state, decision-or-None)``.

    Sampling jumps (``ell = 0``) call the trigger with the pre-jump window and
    return its decision; update jumps return ``None``.
    """
    if xi.ell == 0:
        if not strict:
            _check_region(plant, xi.x, xi.e, t)
        dec = trigger(cfg, bundle, xi.x, xi.e, xi.eta, strict=strict)
        eta = update_eta(cfg, bundle, xi.eta, xi.x, xi.e)
        return HybridState(xi.x, xi.e, -xi.e, eta, 0.0, dec.tau_max, 1), dec
    held = xi.s + xi.e
    return HybridState(xi.x, held, -held, xi.eta, xi.tau, xi.tau_max, 0), None


# --------------------------------------------------------------------------
# Simulation


def simulate(plant: PlantModel, cfg: TriggerConfig, bundle: StorageBundle, x0, horizon: float,
             delay: DelayModel = DelayModel.zero(), flow_step_size: Optional[float] = None,
             eta0=None, strict: bool = True, decimate: int = 1,
             trigger: TriggerFn = gamma_trigger) -> SolutionTrace:
    """Run the hybrid system until ``t >= horizon``.

    Flow uses fixed RK4 steps (default ``t_min / 200``) and lands exactly on
    every jump time.  Rows are kept for every ``decimate``-th flow step and for
    both sides of every jump.  With ``strict=True`` leaving the certified
    level set raises; otherwise the run continues while the state stays in
    X x E and uncertified fallbacks are flagged.  Errors are attached to the
    returned trace, which holds everything up to the failure.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    h = cfg.t_min / 200.0 if flow_step_size is None else float(flow_step_size)
    if not h > 0:
        raise ValueError("flow step must be positive")
    draw = delay.sampler(cfg.tau_mad)
    rec = _Recorder(plant.state_dim)
    events: list = []
    decisions: list = []
    meta = dict(horizon=float(horizon), flow_step=h, delay=delay.spec(), strict=strict,
                decimate=decimate, x0=np.atleast_1d(np.asarray(x0, dtype=float)).tolist())
    xi = None
    error = None
    try:
        xi, dec = initial_state(plant, cfg, bundle, x0, eta0, strict, trigger)
        t, j = 0.0, 0
        t_k = 0.0
        row = _record_rows(rec, [t], j, xi, xi.x[None], xi.e[None], [0.0], dec.chosen_p)
        cur = Decision(t, dec.tau_max, dec.chosen_p, dec.fallback, dec.certified,
                       float(window_value(bundle, cfg.reference, xi.x, xi.e)),
                       float(window_value(bundle, cfg.sets[dec.chosen_p - 1], xi.x, xi.e)),
                       float(np.sum(xi.eta)), row)
        decisions.append(cur)
        eta_sum = float(np.sum(xi.eta))  # window seen by the next sampling jump
        pending_delay = draw()
        while True:
            target_tau = pending_delay if xi.ell == 1 else xi.tau_max
            t_jump = t_k + target_tau
            stop_at_horizon = t_jump >= horizon
            seg_end_tau = (horizon - t_k) if stop_at_horizon else target_tau
            if seg_end_tau > xi.tau:
                xi, t, row = _flow_segment(plant, cfg, bundle, rec, xi, t_k, j, seg_end_tau, h,
                                           decimate, cur.chosen_p, strict)
            if stop_at_horizon:
                break
            # jump
            t = t_jump
            pre_row = row
            kind = "sample" if xi.ell == 0 else "update"
            xi, new_dec = jump(cfg, bundle, plant, xi, strict, trigger, t)
            if kind == "update":
                events.append(Event(j, t, kind, pending_delay, cur.chosen_p, cur.fallback))
                j += 1
                row = _record_rows(rec, [t], j, xi, xi.x[None], xi.e[None], [xi.tau],
                                   cur.chosen_p)
                cur.row_update_pre, cur.row_update_post = pre_row, row
            else:
                cur.row_end, cur.t_end = pre_row, t
                events.append(Event(j, t, kind, new_dec.tau_max, new_dec.chosen_p,
                                    new_dec.fallback))
                j += 1
                t_k = t
                row = _record_rows(rec, [t], j, xi, xi.x[None], xi.e[None], [0.0],
                                   new_dec.chosen_p)
                cur = Decision(t, new_dec.tau_max, new_dec.chosen_p, new_dec.fallback,
                               new_dec.certified,
                               float(window_value(bundle, cfg.reference, xi.x, xi.e)),
                               float(window_value(bundle, cfg.sets[new_dec.chosen_p - 1], xi.x,
                                                  xi.e)),
                               eta_sum, row)
                decisions.append(cur)
                eta_sum = float(np.sum(xi.eta))
                pending_delay = draw()
    except (OutOfRegionError, IntegrationError, ConfigError, ValueError, ArithmeticError) as exc:
        log.error("simulation stopped: %s", exc)
        error = exc
    meta["j_convention"] = "j counts jumps from 0; initial update is jump 0->1; one-based index = j+1"
    return rec.finish(cfg, bundle, events, decisions, xi, error, meta)


def _record_rows(rec, ts, j, xi, xs, es, taus, chosen_p):
    n = len(ts)
    return rec.add(t=np.asarray(ts, dtype=float), j=np.full(n, j), ell=np.full(n, xi.ell),
                   x=xs, e=es, s=np.broadcast_to(xi.s, (n, xi.s.size)), tau=np.asarray(taus),
                   tau_max=np.full(n, xi.tau_max),
                   chosen_p=np.full(n, chosen_p),
                   eta_norm=np.full(n, float(np.linalg.norm(xi.eta))))


def _within(z, box):
    return bool(np.all(z.min(axis=0) >= box.lower) and np.all(z.max(axis=0) <= box.upper))


def _flow_segment(plant, cfg, bundle, rec, xi, t_k, j, end_tau, h, decimate, chosen_p, strict):
    """Flow from ``xi.tau`` to ``end_tau``; records rows and returns the new state."""
    span = end_tau - xi.tau
    n_full = int(math.floor(span / h))
    h_last = span - n_full * h
    if n_full == 0:
        h_last = span
    elif h_last <= 1e-9 * h:
        h_last = 0.0  # merge a sliver into the last full step
    xs, es = _integrate(plant, xi.x, xi.e, h, n_full, h_last)
    if not (np.all(np.isfinite(xs[-1])) and np.all(np.isfinite(es[-1]))):
        bad = int(np.argmax(~np.all(np.isfinite(xs), axis=1)))
        raise IntegrationError(f"non-finite state at t={t_k + xi.tau + bad * h:.6g}")
    n_rows = xs.shape[0]
    taus = xi.tau + h * np.arange(n_rows, dtype=float)
    taus[-1] = end_tau
    keep = np.arange(decimate, n_rows - 1, decimate)
    keep = np.append(keep, n_rows - 1)
    if not strict and not (_within(xs, plant.x_box) and _within(es, plant.e_box)):
        first = int(np.argmin(plant.x_box.contains(xs) & plant.e_box.contains(es)))
        raise OutOfRegionError(f"state left X x E at t={t_k + taus[first]:.6g}",
                               t=t_k + taus[first], x=xs[first], e=es[first])
    xk, ek, tk = xs[keep], es[keep], taus[keep]
    row = _record_rows(rec, t_k + tk, j, xi, xk, ek, tk, chosen_p)
    new = replace(xi, x=xs[-1], e=es[-1], tau=float(end_tau))
    return new, t_k + float(end_tau), row


# --------------------------------------------------------------------------
# Invariant checks


@dataclass(frozen=True)
class InvariantViolation:
    check: str
    interval: int
    row: int
    t: float
    lhs: float
    rhs: float

    def __str__(self):
        return (f"{self.check} at interval {self.interval} (row {self.row}, t={self.t:.6g}): "
                f"{self.lhs:.10g} > {self.rhs:.10g}")


def check_invariants(trace: SolutionTrace, cfg: TriggerConfig, bundle: StorageBundle,
                     tol: float = 1e-6) -> list:
    """Check the per-interval decrease chain on a finished trace.

    For each completed interval ``[t_k, t_{k+2}]`` with chosen set ``p``:

    * ``U_p`` decays at least like ``exp(-eps_p (t - t_k))`` from its post-sample value;
    * ``U_p`` does not increase across the update jump;
    * the next post-sample reference value obeys the same exponential bound;
    * the windowed average decreases (plain exponential bound after a fallback);
    * ``|eta|`` is constant along the interval.

    Reference values at sampling instants come from the decision log, all
    others from the trace rows.  All comparisons are relative with ``tol``.
    """
    out = []
    decs = trace.decisions
    m = cfg.m

    def bound(v):
        return v * (1.0 + tol)

    for k, d in enumerate(decs):
        if d.row_end < 0:
            continue
        p = cfg.sets[d.chosen_p - 1]
        rows = np.arange(d.row_post, d.row_end + 1)
        dt = trace.t[rows] - d.t
        env = bound(np.exp(-p.eps * dt) * d.u_chosen_plus)
        u = trace.u_chosen[rows]
        bad = ~(u <= env)
        for r in rows[bad]:
            out.append(InvariantViolation("U_decay", k, int(r), float(trace.t[r]),
                                          float(trace.u_chosen[r]),
                                          float(env[r - d.row_post])))
        if d.row_update_pre >= 0:
            a, b = trace.u_chosen[d.row_update_post], trace.u_chosen[d.row_update_pre]
            if not a <= bound(b):
                out.append(InvariantViolation("update_jump", k, d.row_update_post,
                                              float(trace.t[d.row_update_post]), float(a),
                                              float(bound(b))))
        eta_rows = trace.eta_norm[rows]
        if not np.all(np.abs(eta_rows - eta_rows[0]) <= tol * max(abs(eta_rows[0]), 1e-300)):
            r = int(rows[np.argmax(np.abs(eta_rows - eta_rows[0]))])
            out.append(InvariantViolation("eta_constant", k, r, float(trace.t[r]),
                                          float(trace.eta_norm[r]), float(eta_rows[0])))
        if k + 1 >= len(decs):
            continue
        nxt = decs[k + 1]
        delta = nxt.t - d.t
        rhs = bound(math.exp(-p.eps * delta) * d.u_chosen_plus)
        if not nxt.u1_plus <= rhs:
            out.append(InvariantViolation("U_dec2", k, nxt.row_post, nxt.t, nxt.u1_plus, rhs))
        e1 = cfg.reference.eps
        if d.fallback:
            rhs = bound(math.exp(-e1 * delta) * d.u1_plus)
            name = "window_fallback"
        else:
            rhs = bound(math.exp(-e1 * delta) * (d.u1_plus + d.eta_sum) / m)
            name = "window_decrease"
        if not nxt.u1_plus <= rhs:
            out.append(InvariantViolation(name, k, nxt.row_post, nxt.t, nxt.u1_plus, rhs))
    return out


# --------------------------------------------------------------------------
# CSV output


def write_trace_csv(trace: SolutionTrace, path) -> None:
    n_x = trace.x.shape[1] if trace.x.ndim == 2 else 1
    header = (["t", "j", "ell"] + [f"x{i}" for i in range(n_x)] + [f"e{i}" for i in range(n_x)]
              + [f"s{i}" for i in range(n_x)]
              + ["tau", "tau_max", "U1", "U_chosen", "chosen_p"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {trace.meta.get('j_convention', '')}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(trace)):
            w.writerow([repr(float(trace.t[i])), int(trace.j[i]), int(trace.ell[i])]
                       + [repr(float(v)) for v in trace.x[i]]
                       + [repr(float(v)) for v in trace.e[i]]
                       + [repr(float(v)) for v in trace.s[i]]
                       + [repr(float(trace.tau[i])), repr(float(trace.tau_max[i])),
                          repr(float(trace.u1[i])), repr(float(trace.u_chosen[i])),
                          int(trace.chosen_p[i])])


def write_events_csv(trace: SolutionTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t_k", "kind", "value", "chosen_p", "fallback"])
        for ev in trace.events:
            w.writerow([ev.k, repr(float(ev.t)), ev.kind, repr(float(ev.value)), ev.chosen_p,
                        int(ev.fallback)])
