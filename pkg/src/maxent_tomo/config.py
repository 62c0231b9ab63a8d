"""Run configuration (JSON) with command-line overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .grid import GridSpec, PhysicalConstants, iodine_constants, make_grid
from .maxent import OptimizerOptions
from .synth import PRESETS, StateRecipe


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "grid": {"n_points": 51, "x_min": 8.0, "x_max": 30.0, "v_center": 4.3},
    "constants": {"mass": "reduced"},
    "times": [2.0, 3.0, 4.0, 5.0],
    "preset": "paper-two-component",
    "recipe": None,
    "counts": None,
    "seed": 0,
    "optimizer": {},
    "wigner_time": None,
    "paths": {"out_dir": "."},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        raw = copy.deepcopy(DEFAULTS)
        base = Path.cwd()
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file not found: {p}")
            try:
                user = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
            if not isinstance(user, dict):
                raise ConfigError(f"{p}: top level must be an object")
            unknown = set(user) - set(DEFAULTS)
            if unknown:
                raise ConfigError(f"{p}: unknown field(s) {sorted(unknown)}")
            raw = _merge(raw, user)
            base = p.resolve().parent
        if overrides:
            raw = _merge(raw, overrides)
        cfg = cls(raw, base)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        times = self.times
        if not times:
            raise ConfigError("field 'times' must be non-empty")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError(f"field 'times' must be strictly increasing, got {times}")
        self.constants()
        self.grid()
        self.optimizer()
        c = self.raw.get("counts")
        if c is not None and (not isinstance(c, int) or c < 0):
            raise ConfigError(f"field 'counts' must be a non-negative integer, got {c!r}")
        if self.raw.get("recipe") is None and self.raw.get("preset") not in PRESETS:
            raise ConfigError(f"field 'preset' must be one of {sorted(PRESETS)}, got {self.raw.get('preset')!r}")

    @property
    def times(self) -> list[float]:
        try:
            return [float(t) for t in self.raw["times"]]
        except (TypeError, ValueError):
            raise ConfigError(f"field 'times' must be a list of numbers, got {self.raw['times']!r}") from None

    def constants(self) -> PhysicalConstants:
        c = self.raw.get("constants") or {}
        try:
            base = iodine_constants(c.get("mass", "reduced"))
            hbar = float(c.get("hbar", base.hbar))
            return PhysicalConstants(hbar=hbar, mass=base.mass)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field 'constants' invalid: {exc}") from None

    def grid(self) -> GridSpec:
        g = self.raw["grid"]
        try:
            if "k_center" in g:
                kc = float(g["k_center"])
            else:
                kc = float(self.constants().velocity_to_k(float(g.get("v_center", 0.0))))
            return make_grid(int(g["n_points"]), float(g["x_min"]), float(g["x_max"]), kc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"field 'grid' invalid: {exc}") from None

    def optimizer(self) -> OptimizerOptions:
        o = dict(self.raw.get("optimizer") or {})
        if "seed" not in o and self.raw.get("seed") is not None:
            o["seed"] = int(self.raw["seed"])
        try:
            return OptimizerOptions(**o)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field 'optimizer' invalid: {exc}") from None

    def recipe(self) -> StateRecipe:
        r = self.raw.get("recipe")
        try:
            if r is not None:
                return StateRecipe(tuple(r["components"]), float(r.get("t_ref", 0.0)))
            return PRESETS[self.raw["preset"]]()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"field 'recipe' invalid: {exc}") from None

    def path(self, key: str, default: str | None = None) -> Path | None:
        v = (self.raw.get("paths") or {}).get(key, default)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else self.base_dir / p
