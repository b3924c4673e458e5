"""Experiment configuration: flat ``key = value`` files plus overrides.

Precedence is command-line flag, then config-file key, then the built-in
default. Everything is validated against the model objects before a run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .genomics import ENCODINGS, ReadErrorProfile
from .matchline import (CALIBRATED_BETA, CALIBRATED_TAU_REF, LAW_KINDS, DischargeLaw,
                        MatchlineParams, ModelError)
from .variation import CORNERS, VariationSpec


class ConfigError(ValueError):
    pass


_FRACTION_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?\d+)?)\s*[xX*]\s*VDD\s*$", re.IGNORECASE)


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    parts = [p for p in re.split(r"[,\s]+", str(text).strip()) if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p) for p in parts)


@dataclass(frozen=True)
class ExperimentConfig:
    word_bits: int = 256
    v_dd: float = 1.2
    v_eval: float = 0.60
    v_evalth: str = "0.60xVDD"
    t_eval_ns: float = 1.0
    precharge_ns: float = 1.0
    corner: str = "TT"
    sigma_g: float = 0.1
    sigma_t_ps: float = 0.0
    trials: int = 1000
    seed: int = 0
    d_min: int = 0
    d_max: int = -1  # -1: up to word_bits
    law: str = "stretched_exponential"
    tau_ref_ns: float = CALIBRATED_TAU_REF * 1e9
    beta: float = CALIBRATED_BETA
    v_eval_ref: float = 0.60
    slope_s: float = 0.12
    cap_ref_bits: int = 256
    k: int = 64
    encoding: str = "OneHot4"
    dedup: bool = True
    reads: int = 1000
    sub_rate: float = 0.036
    ins_rate: float = 0.002
    del_rate: float = 0.002
    thresholds: tuple[int, ...] = (0, 2, 4, 8, 12, 16)
    matcher: str = "ideal"
    threads: int = 1
    out: str = ""
    format: str = "csv"

    def v_evalth_volts(self) -> float:
        text = str(self.v_evalth)
        m = _FRACTION_RE.match(text)
        if m:
            return float(m.group(1)) * self.v_dd
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"v_evalth must be volts or '<fraction>xVDD', got {text!r}") from None

    def discharge_law(self) -> DischargeLaw:
        return DischargeLaw(kind=self.law, tau_ref=self.tau_ref_ns * 1e-9, beta=self.beta,
                            v_eval_ref=self.v_eval_ref, slope_s=self.slope_s,
                            cap_ref_bits=self.cap_ref_bits)

    def matchline_params(self) -> MatchlineParams:
        return MatchlineParams(v_eval=self.v_eval, v_evalth=self.v_evalth_volts(), v_dd=self.v_dd,
                               t_eval=self.t_eval_ns * 1e-9, precharge_time=self.precharge_ns * 1e-9,
                               word_bits=self.word_bits, law=self.discharge_law())

    def variation_spec(self) -> VariationSpec:
        return VariationSpec(corner=CORNERS[self.corner], sigma_g=self.sigma_g,
                             sigma_t=self.sigma_t_ps * 1e-12, seed=self.seed, trials=self.trials)

    def read_profile(self) -> ReadErrorProfile:
        return ReadErrorProfile(self.sub_rate, self.ins_rate, self.del_rate)

    def d_range(self) -> range:
        hi = self.word_bits if self.d_max < 0 else self.d_max
        return range(self.d_min, hi + 1)

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigError on any invariant violation; return self."""
        if self.corner not in CORNERS:
            raise ConfigError(f"corner must be one of {sorted(CORNERS)}, got {self.corner!r}")
        if self.law not in LAW_KINDS:
            raise ConfigError(f"law must be one of {list(LAW_KINDS)}, got {self.law!r}")
        if self.law == "user_table":
            raise ConfigError("user_table law is only available through the library API")
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {sorted(ENCODINGS)}, got {self.encoding!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.matcher not in ("ideal", "analog"):
            raise ConfigError(f"matcher must be ideal or analog, got {self.matcher!r}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.k < 1 or self.reads < 0:
            raise ConfigError("k must be positive and reads non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        try:
            params = self.matchline_params()
            self.variation_spec()
            self.read_profile()
        except (ModelError, ValueError) as e:
            raise ConfigError(str(e)) from None
        d = self.d_range()
        if len(d) == 0 or d.start < 0 or d.stop - 1 > params.word_bits:
            raise ConfigError(f"distance range [{self.d_min}, {self.d_max}] is empty or exceeds word_bits")
        if any(t < 0 or t > self.k for t in self.thresholds):
            raise ConfigError(f"thresholds must lie in [0, k={self.k}]")
        return self


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _convert(key: str, value: Any) -> Any:
    f = _FIELDS[key]
    typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    conv = {"int": int, "float": float, "str": str, "bool": _bool,
            "tuple[int, ...]": _int_list}[typ]
    try:
        return conv(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value for {key}: {value!r} ({e})") from None


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Defaults, then file keys, then non-None overrides; validated."""
    values: dict[str, Any] = {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
        values.update(parse_config_text(text, str(path)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _convert(key, value)
    return replace(ExperimentConfig(), **values).validate()
