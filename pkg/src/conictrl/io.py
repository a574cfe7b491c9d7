"""Run configuration, deterministic JSON and CSV with reproducibility headers."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from . import __version__
from .config import DEFAULT_TOLERANCES, Tolerances
from .models import EnantioParams, JCParams, build_counterexample, build_enantio, build_jc
from .system import ControlledHamiltonian

MODELS = ("counterexample", "enantio", "jc")
_MODEL_KEYS = {
    "counterexample": (),
    "enantio": ("E1", "E2", "E3", "sign"),
    "jc": ("omega", "Omega", "N_trunc"),
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [pad + _emit(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    return json.dumps(obj)


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with sorted keys and floats at 17 significant digits; non-finite floats become null."""
    return _emit(_plain(obj), indent, 0) + "\n"


def write_json(path: str | os.PathLike, obj: Any) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


@dataclass
class RunConfig:
    """Model selection, its parameters, command options and reproducibility settings."""

    model: str = "enantio"
    params: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    out_dir: str = "out"
    timestamp: str = ""

    def tol(self) -> Tolerances:
        try:
            return DEFAULT_TOLERANCES.override(**self.tolerances)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def resolved(self) -> dict:
        return {
            "model": self.model,
            **{k: self.params[k] for k in sorted(self.params)},
            "options": dict(self.options),
            "seed": self.seed,
            "tolerances": self.tol().as_dict(),
            "out_dir": self.out_dir,
        }


def load_config(path: str | os.PathLike) -> dict:
    """Read a YAML or JSON mapping."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def config_from_mapping(data: dict) -> RunConfig:
    data = dict(data)
    model = str(data.pop("model", "enantio"))
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    params = {k: data.pop(k) for k in _MODEL_KEYS[model] if k in data}
    for other, keys in _MODEL_KEYS.items():
        if other != model:
            stray = [k for k in keys if k in data and k not in _MODEL_KEYS[model]]
            if stray:
                raise ConfigError(f"keys {stray} belong to model {other!r}, not {model!r}")
    cfg = RunConfig(
        model=model,
        params=params,
        seed=int(data.pop("seed", 0)),
        tolerances=dict(data.pop("tolerances", {}) or {}),
        out_dir=str(data.pop("out_dir", "out")),
        timestamp=str(data.pop("timestamp", "") or ""),
    )
    cfg.options = data
    cfg.tol()
    return cfg


def build_model(cfg: RunConfig) -> ControlledHamiltonian:
    p = cfg.params
    try:
        if cfg.model == "counterexample":
            return build_counterexample()
        if cfg.model == "enantio":
            E = (float(p.get("E1", -1.5)), float(p.get("E2", 0.5)), float(p.get("E3", 1.0)))
            return build_enantio(EnantioParams(E, str(p.get("sign", "+"))))
        return build_jc(
            JCParams(float(p.get("omega", 0.4)), float(p.get("Omega", math.sqrt(2))), int(p.get("N_trunc", 40)))
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cfg.model} parameters: {exc}") from exc


def header_lines(cfg: RunConfig) -> list[str]:
    return [
        f"tool: conictrl {__version__}",
        "config: " + json.dumps(_plain(cfg.resolved()), sort_keys=True, separators=(",", ":")),
        f"seed: {cfg.seed}",
        "tolerances: " + json.dumps(_plain(cfg.tol().as_dict()), sort_keys=True, separators=(",", ":")),
    ]


def write_csv(
    path: str | os.PathLike,
    columns: Sequence[str],
    rows: Iterable[Sequence[float]],
    comments: Sequence[str] = (),
) -> Path:
    """Comma-separated table; floats at 17 significant digits, ``#`` comment lines first."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt_float(x) for x in row) + "\n")
    return path


def read_csv(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    """Inverse of :func:`write_csv`; comment lines are skipped."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path} has no header")
    cols = [c.strip() for c in lines[0].split(",")]
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]], dtype=float)
    return cols, data.reshape(-1, len(cols))


def read_schedule(path: str | os.PathLike):
    """Control schedule with header ``t_start,t_end,u1,u2[,u3]``; intervals must be contiguous from 0."""
    from .propagate import PiecewiseControl

    cols, data = read_csv(path)
    if cols[:2] != ["t_start", "t_end"] or len(cols) < 3:
        raise ConfigError(f"schedule header must start with t_start,t_end,u1,...; got {cols}")
    expected = [f"u{k + 1}" for k in range(len(cols) - 2)]
    if cols[2:] != expected:
        raise ConfigError(f"control columns must be {expected}, got {cols[2:]}")
    if len(data) == 0:
        raise ConfigError("schedule has no intervals")
    starts, ends = data[:, 0], data[:, 1]
    if starts[0] != 0.0:
        raise ConfigError("schedule must start at t = 0")
    if np.any(starts[1:] != ends[:-1]):
        raise ConfigError("schedule intervals must be contiguous")
    try:
        return PiecewiseControl(np.concatenate([[0.0], ends]), data[:, 2:])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
