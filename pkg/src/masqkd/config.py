"""Experiment configuration: JSON schema, defaults, validation, round trip.

Config file (JSON object)::

    {
      "protocol": "base" | "improved" | "krawec",
      "n": 1000,                      # rounds = 8 n
      "seed": 7,                      # 0 <= seed < 2**64
      "attack": null | {"kind": ..., "location": ..., "params": {...}},
      "threshold": 0.02,
      "disclosure_fraction": 0.5,
      "efficiency_convention": "final_over_prepared" | "raw_over_prepared",
      "output_path": null
    }

Attack params by kind (complex numbers as ``[re, im]``):

* ``intercept_resend``: ``{"basis": "Z" | "X"}``
* ``collective_s1``: ``{"u": [c, c], "w": [c, c]}`` or ``{"theta": t}``
  for ``u = (cos t, 0)``, ``w = (0, sin t)``
* ``collective_s2``: ``{"v0": [c]*4, "v1": ..., "w0": ..., "w1": ...}`` or
  ``{"undetectable": true, "v0": ..., "v1": ...}`` (sets w0 = v1, w1 = v0)

The seed may be overridden by ``MASQKD_SEED``; an explicit override passed
by the caller (the CLI ``--seed`` flag) wins over both.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import adversary as adv
from .kinds import AttackKind, EfficiencyConvention, Location, ProtocolKind

SEED_ENV = "MASQKD_SEED"
DEFAULT_THRESHOLD = 0.02
DEFAULT_DISCLOSURE = 0.5
_KEYS = (
    "protocol",
    "n",
    "seed",
    "attack",
    "threshold",
    "disclosure_fraction",
    "efficiency_convention",
    "output_path",
)


class ConfigError(ValueError):
    def __init__(self, message: str, errors: list[str] | None = None):
        super().__init__(message)
        self.errors = errors or [message]


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: ProtocolKind = ProtocolKind.BASE
    n: int = 1
    seed: int = 0
    attack: adv.AttackModel = field(default_factory=adv.AttackModel.none)
    threshold: float = DEFAULT_THRESHOLD
    disclosure_fraction: float = DEFAULT_DISCLOSURE
    efficiency_convention: EfficiencyConvention = EfficiencyConvention.FINAL_OVER_PREPARED
    output_path: str | None = None

    def __post_init__(self):
        errors = []
        try:
            object.__setattr__(self, "protocol", ProtocolKind(self.protocol))
        except ValueError:
            errors.append(f"protocol: unknown value {self.protocol!r}")
        try:
            object.__setattr__(self, "efficiency_convention", EfficiencyConvention(self.efficiency_convention))
        except ValueError:
            errors.append(f"efficiency_convention: unknown value {self.efficiency_convention!r}")
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool) or self.n < 1:
            errors.append(f"n: must be an integer >= 1, got {self.n!r}")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            errors.append(f"seed: must be an unsigned 64-bit integer, got {self.seed!r}")
        for name, lo, hi in (("threshold", 0.0, 1.0), ("disclosure_fraction", 0.0, 1.0)):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or not lo <= v <= hi:
                errors.append(f"{name}: must be a finite number in [{lo}, {hi}], got {v!r}")
        if not errors:
            errors += [f"attack: {v}" for v in adv.validate_attack(self.attack, self.protocol)]
        if errors:
            raise ConfigError("invalid config: " + "; ".join(errors), errors)

    @property
    def rounds(self) -> int:
        return 8 * int(self.n)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol.value,
            "n": int(self.n),
            "seed": int(self.seed),
            "attack": attack_to_dict(self.attack),
            "threshold": float(self.threshold),
            "disclosure_fraction": float(self.disclosure_fraction),
            "efficiency_convention": self.efficiency_convention.value,
            "output_path": self.output_path,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------- attacks


def _complex(x, where: str) -> complex:
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(float(x), 0.0)
    raise ConfigError(f"{where}: complex numbers must be [re, im] pairs, got {x!r}")


def _cvec(params: Mapping, name: str, dim: int) -> list[complex]:
    if name not in params:
        raise ConfigError(f"attack.params.{name}: missing")
    raw = params[name]
    if not isinstance(raw, list) or len(raw) != dim:
        raise ConfigError(f"attack.params.{name}: expected {dim} complex entries")
    return [_complex(x, f"attack.params.{name}[{i}]") for i, x in enumerate(raw)]


def attack_from_dict(data: Mapping | None) -> adv.AttackModel:
    if data is None:
        return adv.AttackModel.none()
    if not isinstance(data, Mapping):
        raise ConfigError("attack: must be an object or null")
    try:
        kind = AttackKind(data.get("kind", "none"))
    except ValueError:
        raise ConfigError(f"attack.kind: unknown value {data.get('kind')!r}") from None
    if kind is AttackKind.NONE:
        return adv.AttackModel.none()
    default_loc = {
        AttackKind.INTERCEPT_RESEND: Location.ALICE_TO_BOB,
        AttackKind.COLLECTIVE_S1: Location.TP_TO_ALICE,
        AttackKind.COLLECTIVE_S2: Location.ALICE_TO_BOB,
    }[kind]
    try:
        loc = Location(data.get("location", default_loc))
    except ValueError:
        raise ConfigError(f"attack.location: unknown value {data.get('location')!r}") from None
    params = data.get("params", {}) or {}
    try:
        if kind is AttackKind.INTERCEPT_RESEND:
            return adv.AttackModel.intercept_resend(loc, params.get("basis", "Z"))
        if kind is AttackKind.COLLECTIVE_S1:
            if "theta" in params:
                t = float(params["theta"])
                return adv.AttackModel.collective_s1([math.cos(t), 0.0], [0.0, math.sin(t)], loc)
            return adv.AttackModel.collective_s1(_cvec(params, "u", 2), _cvec(params, "w", 2), loc)
        if params.get("undetectable"):
            return adv.make_undetectable_s2(_cvec(params, "v0", 4), _cvec(params, "v1", 4), loc)
        return adv.AttackModel.collective_s2(*(_cvec(params, k, 4) for k in ("v0", "v1", "w0", "w1")), loc)
    except adv.AttackConfigError as exc:
        raise ConfigError(f"attack: {exc}", [f"attack: {v}" for v in exc.violations] or None) from None


def attack_to_dict(attack: adv.AttackModel) -> dict | None:
    if attack.kind is AttackKind.NONE:
        return None
    if attack.kind is AttackKind.INTERCEPT_RESEND:
        params = {"basis": attack.basis}
    else:
        params = {k: [[v.real, v.imag] for v in vec] for k, vec in attack.arrays().items()}
    return {"kind": attack.kind.value, "location": attack.location.value, "params": params}


# ---------------------------------------------------------------- loading


def config_from_dict(data: Mapping, seed_override: int | None = None, env: Mapping | None = None) -> ExperimentConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in ("protocol", "n") if k not in data]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    kw = {k: data[k] for k in _KEYS if k in data and k != "attack"}
    kw["attack"] = attack_from_dict(data.get("attack"))
    env = os.environ if env is None else env
    if seed_override is not None:
        kw["seed"] = seed_override
    elif env.get(SEED_ENV):
        try:
            kw["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: not an integer: {env[SEED_ENV]!r}") from None
    kw.setdefault("seed", 0)
    for key in ("threshold", "disclosure_fraction"):
        if isinstance(kw.get(key), int) and not isinstance(kw.get(key), bool):
            kw[key] = float(kw[key])
    return ExperimentConfig(**kw)


def load_config(path: str | os.PathLike, seed_override: int | None = None, env: Mapping | None = None) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data, seed_override=seed_override, env=env)
