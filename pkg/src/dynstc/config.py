"""TOML config files holding a frozen parameter family."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import ConfigError
from .model import PlantModel, get_plant
from .storage import ParameterSet, StorageBundle, quadratic_bundle
from .trigger import TriggerConfig

__all__ = ["LoadedConfig", "dump_config", "write_config", "read_config", "check_sublevel_box"]

FORMAT_VERSION = 1


@dataclass(frozen=True)
class LoadedConfig:
    trigger: TriggerConfig
    plant: PlantModel
    bundle: StorageBundle
    plant_name: str


def dump_config(cfg: TriggerConfig, plant_name="example_scalar", v_coeff=0.505) -> str:
    doc = {
        "format": FORMAT_VERSION,
        "plant": plant_name,
        "v_coeff": float(v_coeff),
        "lambda": cfg.lam,
        "c_x": cfg.c_x,
        "m": cfg.m,
        "tau_mad": cfg.tau_mad,
        "horizon_cap": cfg.horizon_cap,
        "c_u": cfg.c_u,
        "t_min": cfg.t_min,
    }
    if cfg.phi_step is not None:
        doc["phi_step"] = float(cfg.phi_step)
    doc["set"] = [
        {"eps": p.eps, "gamma0": p.gamma0, "gamma1": p.gamma1, "l0": p.l0, "l1": p.l1,
         "phi0_0": p.phi0_init, "phi1_0": p.phi1_init, "tmax": t}
        for p, t in zip(cfg.sets, cfg.t_max_per_set)
    ]
    return tomli_w.dumps(doc)


def write_config(path, cfg: TriggerConfig, plant_name="example_scalar", v_coeff=0.505) -> None:
    Path(path).write_text(dump_config(cfg, plant_name, v_coeff), encoding="utf-8")


def _num(doc, key, kind=float):
    try:
        val = doc[key]
    except KeyError:
        raise ConfigError(f"missing key {key!r}") from None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"key {key!r} must be numeric")
    if kind is int:
        if int(val) != val:
            raise ConfigError(f"key {key!r} must be an integer")
        return int(val)
    return float(val)


def check_sublevel_box(plant: PlantModel, bundle: StorageBundle, c_x, rtol=1e-3, n=2001) -> None:
    """Require the box X to contain ``{V < c_x}`` up to ``rtol`` (sampled)."""
    if bundle.v_coeff is not None and plant.state_dim == 1:
        r = math.sqrt(c_x / bundle.v_coeff)
        pts = np.linspace(-r, r, n)[:, None]
    else:
        pts = plant.x_box.grid(max(3, int(round(n ** (1 / plant.state_dim)))))
        scale = 4.0 * np.maximum(np.abs(plant.x_box.lower), np.abs(plant.x_box.upper))
        pts = pts / np.maximum(np.abs(plant.x_box.lower), np.abs(plant.x_box.upper)) * scale
        pts = pts[np.asarray(bundle.v_tilde(pts)) < c_x]
    if not np.all(plant.x_box.contains(pts, rtol=rtol)):
        raise ConfigError(f"X does not contain the sublevel set V < c_x={c_x}")


def read_config(path, check_stored=True) -> LoadedConfig:
    """Parse a config file and rebuild the frozen trigger configuration.

    Stored ``tmax`` values are compared with the recomputed ones when
    ``check_stored`` is set.
    """
    try:
        doc = tomli.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    name = doc.get("plant", "example_scalar")
    try:
        plant = get_plant(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    lam = _num(doc, "lambda")
    v_coeff = _num(doc, "v_coeff") if "v_coeff" in doc else getattr(plant, "v_coeff", None)
    if v_coeff is None:
        raise ConfigError("v_coeff is required for this plant")
    bundle = quadratic_bundle(v_coeff, lam)
    raw_sets = doc.get("set")
    if not isinstance(raw_sets, list) or not raw_sets:
        raise ConfigError("config needs at least one [[set]] table")
    sets = []
    for i, t in enumerate(raw_sets, start=1):
        try:
            sets.append(ParameterSet(_num(t, "eps"), _num(t, "gamma0"), _num(t, "gamma1"),
                                     _num(t, "l0"), _num(t, "l1"), _num(t, "phi0_0"),
                                     _num(t, "phi1_0")))
        except ConfigError as exc:
            raise ConfigError(f"set {i}: {exc}") from None
    c_x = _num(doc, "c_x")
    cfg = TriggerConfig.build(lam, c_x, _num(doc, "m", int), _num(doc, "tau_mad"), sets,
                              horizon_cap=_num(doc, "horizon_cap") if "horizon_cap" in doc else 10.0,
                              phi_step=_num(doc, "phi_step") if "phi_step" in doc else None)
    if check_stored:
        for i, (t, got) in enumerate(zip(raw_sets, cfg.t_max_per_set), start=1):
            if "tmax" in t and not math.isclose(float(t["tmax"]), got, rel_tol=1e-9, abs_tol=1e-12):
                raise ConfigError(f"set {i}: stored tmax {t['tmax']} differs from recomputed {got}")
    check_sublevel_box(plant, bundle, c_x)
    return LoadedConfig(cfg, plant, bundle, name)
