"""Flat key=value run configuration: parsing and up-front validation.

Configs are INI-style text with fixed sections (no interpolation, no
includes), so an experiment's provenance is a short diffable file.  Every
numeric field is validated before any work starts; violations raise
:class:`ConfigError`, which the CLI maps to exit code 3.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

SCENARIO_NAMES = (
    "gaussian_blob",
    "random_bandlimited",
    "peakon_pair",
    "symbol_audit",
    "conjugation_audit",
    "consistency",
)

TIME_SCENARIOS = ("gaussian_blob", "random_bandlimited", "peakon_pair", "consistency")


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or violates a guard."""


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment description."""

    dimension: int
    points: int
    length: float
    metric_kind: str  # sobolev | custom-table
    s: Optional[float]
    table_path: Optional[Path]
    dt: float
    t_end: float
    cadence: int
    scenario: str
    scenario_params: dict = field(default_factory=dict)
    seed: int = 0
    blowup_threshold: Optional[float] = None  # None = scale-aware default
    norms: tuple[float, ...] = ()
    output: Path = Path("out")


def _get(parser: configparser.ConfigParser, section: str, key: str, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"missing required key [{section}] {key}")
        return default
    return parser.get(section, key)


def _as_float(raw: str, where: str, positive: bool = False) -> float:
    try:
        val = float(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: not a number: {raw!r}") from exc
    if positive and not val > 0:
        raise ConfigError(f"{where}: must be positive, got {val}")
    return val


def _as_int(raw: str, where: str, minimum: Optional[int] = None) -> int:
    try:
        val = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: not an integer: {raw!r}") from exc
    if minimum is not None and val < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {val}")
    return val


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    for section in ("grid", "scenario"):
        if not parser.has_section(section):
            raise ConfigError(f"missing [{section}] section")

    dimension = _as_int(_get(parser, "grid", "dimension", required=True), "[grid] dimension")
    if dimension not in (1, 2, 3):
        raise ConfigError(f"[grid] dimension must be 1, 2 or 3, got {dimension}")
    points = _as_int(_get(parser, "grid", "points", required=True), "[grid] points", minimum=8)
    if points & (points - 1) != 0:
        raise ConfigError(f"[grid] points must be a power of two, got {points}")
    length = _as_float(_get(parser, "grid", "length", "1.0"), "[grid] length", positive=True)

    metric_kind = _get(parser, "metric", "kind", "sobolev")
    if metric_kind not in ("sobolev", "custom-table"):
        raise ConfigError(f"[metric] kind must be sobolev or custom-table, got {metric_kind!r}")
    s = None
    table_path = None
    if metric_kind == "sobolev":
        s = _as_float(_get(parser, "metric", "s", required=True), "[metric] s")
        if s < 0:
            raise ConfigError(f"[metric] s must be >= 0, got {s}")
    else:
        raw = _get(parser, "metric", "table", required=True)
        table_path = Path(raw)
        if not table_path.is_absolute():
            table_path = path.parent / table_path
        if not table_path.is_file():
            raise ConfigError(f"[metric] table file not found: {table_path}")

    scenario = _get(parser, "scenario", "name", required=True)
    if scenario not in SCENARIO_NAMES:
        raise ConfigError(
            f"unknown scenario {scenario!r}; choose one of {', '.join(SCENARIO_NAMES)}"
        )
    scenario_params = {
        k: v for k, v in parser.items("scenario") if k != "name"
    }

    dt = t_end = 1.0
    cadence = 1
    if scenario in TIME_SCENARIOS:
        if not parser.has_section("integrator"):
            raise ConfigError(f"scenario {scenario!r} needs an [integrator] section")
        dt = _as_float(_get(parser, "integrator", "dt", required=True), "[integrator] dt", positive=True)
        t_end = _as_float(_get(parser, "integrator", "t_end", required=True), "[integrator] t_end", positive=True)
        cadence = _as_int(_get(parser, "integrator", "cadence", "1"), "[integrator] cadence", minimum=1)
        n_steps = t_end / dt
        if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
            raise ConfigError("[integrator] t_end must be an integer multiple of dt")

    seed = _as_int(_get(parser, "run", "seed", "0"), "[run] seed", minimum=0)
    thr_raw = _get(parser, "run", "blowup_threshold", "auto")
    blowup_threshold = None if thr_raw == "auto" else _as_float(
        thr_raw, "[run] blowup_threshold", positive=True
    )
    norms_raw = _get(parser, "run", "norms", "")
    norms = tuple(
        _as_float(tok.strip(), "[run] norms") for tok in norms_raw.split(",") if tok.strip()
    )
    output = Path(_get(parser, "run", "output", "out"))

    return RunConfig(
        dimension=dimension,
        points=points,
        length=length,
        metric_kind=metric_kind,
        s=s,
        table_path=table_path,
        dt=dt,
        t_end=t_end,
        cadence=cadence,
        scenario=scenario,
        scenario_params=scenario_params,
        seed=seed,
        blowup_threshold=blowup_threshold,
        norms=norms,
        output=output,
    )


def param_float(cfg: RunConfig, key: str, default: float, positive: bool = True) -> float:
    raw = cfg.scenario_params.get(key)
    if raw is None:
        return default
    return _as_float(raw, f"[scenario] {key}", positive=positive)


def param_int(cfg: RunConfig, key: str, default: int, minimum: int = 0) -> int:
    raw = cfg.scenario_params.get(key)
    if raw is None:
        return default
    return _as_int(raw, f"[scenario] {key}", minimum=minimum)
