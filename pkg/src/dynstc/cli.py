"""Command line entry point: ``stc``."""
from __future__ import annotations

import csv
import json
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .config import LoadedConfig, read_config, write_config
from .errors import ConfigError, OutOfRegionError
from .model import example_plant
from .paramgen import DEFAULT_EPS_GRID, synthesize_family, validate_condition1
from .phi import integrate_phi, t_max_result
from .sim import (DelayModel, check_invariants, simulate, write_events_csv, write_trace_csv)
from .storage import ParameterSet, quadratic_bundle
from .trigger import TriggerConfig, periodic_trigger

log = logging.getLogger("dynstc")

EXIT_CONFIG = 2
EXIT_REGION = 3
EXIT_VIOLATIONS = 4

# published reference figures for the example scenario, printed for comparison only
REFERENCE_SAMPLES = 117
REFERENCE_T_MIN = 0.0123
REFERENCE_FINAL_INTERVAL = 0.095


def _setup_logging():
    level = os.environ.get("STC_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def _load(config_path, m=None) -> LoadedConfig:
    if config_path:
        loaded = read_config(config_path)
    else:
        log.info("no config given, synthesizing the default family")
        cfg = synthesize_family().config
        loaded = LoadedConfig(cfg, example_plant(), quadratic_bundle(0.505, cfg.lam),
                              "example_scalar")
    if m is not None and m != loaded.trigger.m:
        c = loaded.trigger
        cfg = TriggerConfig.build(c.lam, c.c_x, m, c.tau_mad, c.sets, c.horizon_cap, c.phi_step)
        loaded = replace(loaded, trigger=cfg)
    return loaded


def _summary(trace, violations):
    iv = trace.intervals
    fin = trace.final_state
    out = {
        "samples": trace.n_samples,
        "interval_min": float(iv.min()) if iv.size else None,
        "interval_mean": float(iv.mean()) if iv.size else None,
        "interval_max": float(iv.max()) if iv.size else None,
        "interval_final": float(iv[-1]) if iv.size else None,
        "fallbacks": sum(1 for d in trace.decisions if d.fallback),
        "uncertified": sum(1 for d in trace.decisions if not d.certified),
        "violations": len(violations),
        "final_state_norm": fin.norm() if fin is not None else None,
        "error": None if trace.error is None else f"{type(trace.error).__name__}: {trace.error}",
    }
    return out


def _exit_code(trace, violations):
    if isinstance(trace.error, ConfigError):
        return EXIT_CONFIG
    if isinstance(trace.error, OutOfRegionError):
        return EXIT_REGION
    if trace.error is not None:
        return 1
    return EXIT_VIOLATIONS if violations else 0


def _run(loaded, x0, horizon, delay, strict, step, decimate, check, trigger=None):
    plant, cfg, bundle = loaded.plant, loaded.trigger, loaded.bundle
    x0 = np.asarray(x0, dtype=float)
    kwargs = dict(delay=delay, flow_step_size=step, strict=strict, decimate=decimate)
    if trigger is not None:
        kwargs["trigger"] = trigger
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        trace = simulate(plant, cfg, bundle, x0, horizon, **kwargs)
    violations = check_invariants(trace, cfg, bundle) if check else []
    return trace, violations


def _print_summary(title, summary):
    click.echo(f"[{title}]")
    for k, v in summary.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        click.echo(f"  {k}: {v}")


_common = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 help="Family config written by `stc paramgen` (default: synthesize)."),
    click.option("--x0", multiple=True, type=float, required=True,
                 help="Initial plant state; repeat for each component."),
    click.option("--horizon", type=float, default=10.0, show_default=True),
    click.option("--delay", "delay_spec", default="zero", show_default=True,
                 help="zero | constant:<d> | uniform:<lo>:<hi>:<seed> | file:<path>"),
    click.option("--m", type=int, default=None, help="Override the window length."),
    click.option("--strict/--region", default=False, show_default=True,
                 help="Strict: abort when the state leaves the certified level set. "
                      "Region: abort only when it leaves X x E."),
    click.option("--step", type=float, default=None, help="Flow step (default t_min/200)."),
    click.option("--decimate", type=int, default=1, show_default=True),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Dynamic self-triggered control: synthesis, simulation and checks."""
    _setup_logging()


@main.command("simulate")
@common_options
@click.option("--out", "out_prefix", default="stc", show_default=True,
              help="Prefix for <prefix>_trace.csv, <prefix>_events.csv, <prefix>_summary.json.")
@click.option("--no-check", is_flag=True, help="Skip the invariant checker.")
def cmd_simulate(config_path, x0, horizon, delay_spec, m, strict, step, decimate, out_prefix,
                 no_check):
    """Run one self-triggered simulation and check its invariants."""
    try:
        loaded = _load(config_path, m)
        delay = DelayModel.parse(delay_spec)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    trace, violations = _run(loaded, x0, horizon, delay, strict, step, decimate, not no_check)
    write_trace_csv(trace, f"{out_prefix}_trace.csv")
    write_events_csv(trace, f"{out_prefix}_events.csv")
    summary = _summary(trace, violations)
    summary["t_min"] = loaded.trigger.t_min
    Path(f"{out_prefix}_summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                                  encoding="utf-8")
    _print_summary("stc", summary)
    for v in violations[:20]:
        click.echo(f"  violation: {v}", err=True)
    if trace.error is not None:
        click.echo(f"error: {trace.error}", err=True)
    sys.exit(_exit_code(trace, violations))


@main.command("compare")
@common_options
@click.option("--no-check", is_flag=True, help="Skip the invariant checker.")
def cmd_compare(config_path, x0, horizon, delay_spec, m, strict, step, decimate, no_check):
    """Compare the sample count against periodic sampling with period t_min."""
    try:
        loaded = _load(config_path, m)
        delay = DelayModel.parse(delay_spec)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    cfg = loaded.trigger
    stc, v_stc = _run(loaded, x0, horizon, delay, strict, step, decimate, not no_check)
    per, v_per = _run(loaded, x0, horizon, delay, strict, step, decimate, not no_check,
                      trigger=periodic_trigger(cfg.t_min))
    s1, s2 = _summary(stc, v_stc), _summary(per, v_per)
    _print_summary("stc", s1)
    _print_summary("periodic", s2)
    ratio = stc.n_samples / per.n_samples if per.n_samples else float("nan")
    click.echo(f"t_min: {cfg.t_min:.6g} s (reference: {REFERENCE_T_MIN} s)")
    click.echo(f"ratio stc/periodic: {ratio:.6g}")
    if s1["interval_final"]:
        click.echo(f"final interval / t_min: {s1['interval_final'] / cfg.t_min:.6g}")
    click.echo(f"reference: {REFERENCE_SAMPLES} samples, final interval about "
               f"{REFERENCE_FINAL_INTERVAL} s")
    code = max(_exit_code(stc, v_stc), _exit_code(per, v_per), key=lambda c: (c != 0, c))
    sys.exit(code)


@main.command("paramgen")
@click.option("--out", "out_path", default="family.toml", show_default=True)
@click.option("--eps", "eps_list", default=None,
              help="Comma separated eps values (default: the built-in 22-value grid).")
@click.option("--lambda", "lam", type=float, default=0.2, show_default=True)
@click.option("--tau-mad", type=float, default=4e-4, show_default=True)
@click.option("--c-x", type=float, default=4.55, show_default=True)
@click.option("--m", type=int, default=30, show_default=True)
@click.option("--p1-target", type=click.Choice(["balanced", "max_tmin", "feasible"]),
              default="balanced", show_default=True,
              help="Objective for the reference set's timer initial values.")
@click.option("--grid", "n_grid", type=int, default=200, show_default=True)
def cmd_paramgen(out_path, eps_list, lam, tau_mad, c_x, m, p1_target, n_grid):
    """Synthesize the parameter family and write it as a config file."""
    try:
        eps = DEFAULT_EPS_GRID if eps_list is None else [float(v) for v in eps_list.split(",")]
        res = synthesize_family(eps, lam, tau_mad, c_x, m, p1_target=p1_target, n_grid=n_grid)
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    cfg = res.config
    write_config(out_path, cfg)
    click.echo(f"{'p':>3} {'eps':>8} {'gamma0':>10} {'phi0(0)':>10} {'phi1(0)':>10} {'T_max':>10}")
    for i, (p, t) in enumerate(zip(cfg.sets, cfg.t_max_per_set), start=1):
        click.echo(f"{i:>3} {p.eps:>8g} {p.gamma0:>10.4g} {p.phi0_init:>10.4g} "
                   f"{p.phi1_init:>10.4g} {t:>10.5g}")
    for e, reason in res.discarded:
        click.echo(f"discarded eps={e:g}: {reason}", err=True)
    click.echo(f"c_u={cfg.c_u:.6g} t_min={cfg.t_min:.6g} s -> {out_path}")


@main.command("tmax")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "set_index", type=int, default=1, show_default=True,
              help="1-based set index when reading a config.")
@click.option("--eps", type=float)
@click.option("--gamma0", type=float)
@click.option("--gamma1", type=float)
@click.option("--l0", type=float)
@click.option("--l1", type=float)
@click.option("--phi0", type=float)
@click.option("--phi1", type=float)
@click.option("--lambda", "lam", type=float)
@click.option("--c-u", type=float)
@click.option("--tau-mad", type=float)
@click.option("--horizon-cap", type=float, default=10.0, show_default=True)
@click.option("--out", "out_path", default="-", show_default=True, help="CSV path or '-'.")
def cmd_tmax(config_path, set_index, eps, gamma0, gamma1, l0, l1, phi0, phi1, lam, c_u, tau_mad,
             horizon_cap, out_path):
    """Print T_max of one set and its timer trace as CSV (tau, phi0, phi1)."""
    try:
        if config_path:
            cfg = read_config(config_path).trigger
            if not 1 <= set_index <= cfg.n_sets:
                raise ConfigError(f"set index must lie in 1..{cfg.n_sets}")
            p = cfg.sets[set_index - 1]
            lam, c_u, tau_mad = cfg.lam, cfg.c_u, cfg.tau_mad
            horizon_cap = cfg.horizon_cap
        else:
            vals = (eps, gamma0, gamma1, l0, l1, phi0, phi1, lam, c_u, tau_mad)
            if any(v is None for v in vals):
                raise ConfigError("give --config or all of --eps --gamma0 --gamma1 --l0 --l1 "
                                  "--phi0 --phi1 --lambda --c-u --tau-mad")
            p = ParameterSet(eps, gamma0, gamma1, l0, l1, phi0, phi1)
        res = t_max_result(p, lam, c_u, tau_mad, horizon_cap)
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    horizon = max(res.value, tau_mad)
    h = res.step if horizon / res.step >= 10 else horizon / 10
    t0 = integrate_phi(p.eps, p.gamma0, p.l0, p.phi0_init, horizon, h)
    t1 = integrate_phi(p.eps, p.gamma1, p.l1, p.phi1_init, horizon, h)
    fh = sys.stdout if out_path == "-" else open(out_path, "w", newline="", encoding="utf-8")
    try:
        fh.write(f"# t_max={res.value!r} capped={res.capped}\n")
        w = csv.writer(fh)
        w.writerow(["tau", "phi0", "phi1"])
        for i, tau in enumerate(t0.taus):
            v1 = t1.values[i] if i < t1.values.size else float("nan")
            w.writerow([repr(float(tau)), repr(float(t0.values[i])), repr(float(v1))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    click.echo(f"T_max = {res.value:.12g} s", err=True)


@main.command("validate")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--grid-n", type=int, default=100, show_default=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
def cmd_validate(config_path, grid_n, tol):
    """Grid-check the storage inequalities for every set of a family."""
    try:
        loaded = _load(config_path)
        violations = validate_condition1(loaded.trigger, loaded.bundle, loaded.plant, grid_n, tol)
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    for v in violations[:20]:
        click.echo(f"  {v}", err=True)
    click.echo(f"sets: {loaded.trigger.n_sets}, violations: {len(violations)}")
    sys.exit(EXIT_VIOLATIONS if violations else 0)


def _sweep_one(args):
    config_path, x0, horizon, delay_spec, strict, decimate = args
    loaded = _load(config_path)
    trace, violations = _run(loaded, [x0], horizon, DelayModel.parse(delay_spec), strict, None,
                             decimate, True)
    s = _summary(trace, violations)
    return x0, s


@main.command("sweep")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--x0-min", type=float, required=True)
@click.option("--x0-max", type=float, required=True)
@click.option("--n", type=int, default=10, show_default=True)
@click.option("--horizon", type=float, default=10.0, show_default=True)
@click.option("--delay", "delay_spec", default="zero", show_default=True)
@click.option("--strict/--region", default=False, show_default=True)
@click.option("--decimate", type=int, default=50, show_default=True)
@click.option("--jobs", type=int, default=None, help="Worker processes (default: CPU count).")
@click.option("--out", "out_path", default="sweep.csv", show_default=True)
def cmd_sweep(config_path, x0_min, x0_max, n, horizon, delay_spec, strict, decimate, jobs,
              out_path):
    """Run independent scalar simulations over a grid of initial states."""
    grid = np.linspace(x0_min, x0_max, n)
    args = [(config_path, float(x), horizon, delay_spec, strict, decimate) for x in grid]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_sweep_one, args))
    keys = list(results[0][1]) if results else []
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x0"] + keys)
        for x0, s in results:
            w.writerow([repr(x0)] + [s[k] for k in keys])
    bad = sum(1 for _, s in results if s["violations"] or s["error"])
    click.echo(f"{len(results)} runs, {bad} with violations or errors -> {out_path}")
    sys.exit(EXIT_VIOLATIONS if bad else 0)


if __name__ == "__main__":
    main()
