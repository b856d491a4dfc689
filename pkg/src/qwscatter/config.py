"""Experiment configuration: defaults, seed descriptors, key=value files.

Config files are flat `key = value` lines; `#` starts a comment, blank
lines are skipped, list values are comma separated.  Parsing collects
every violation before failing so a bad file is fixed in one pass.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

__all__ = [
    "ConfigError",
    "SeedSpec",
    "ExperimentConfig",
    "parse_seed",
    "seed_to_text",
    "parse_config",
    "config_to_text",
    "build_config",
    "default_config",
]

_SEED_KINDS = ("single-site", "two-site", "filtered")
_CHIRALITIES = ("up", "down", "sym")

_FLOAT_KEYS = ("a_mod", "a_arg", "b_arg", "delta", "g", "eps", "tail_tol")
_INT_KEYS = ("t_max", "k_grid", "threads")
_LIST_KEYS = ("gamma",)
_STR_KEYS = ("seed_state", "out")
_ALL_KEYS = _FLOAT_KEYS + _INT_KEYS + _LIST_KEYS + _STR_KEYS


class ConfigError(ValueError):
    """Invalid configuration; .violations lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class SeedSpec:
    """Initial-state descriptor.

    kind "single-site": one lattice site, chirality up / down / sym
      (sym = (e1 + i e2)/sqrt(2)).
    kind "two-site": (|x-1, up> + |x+1, down>)/sqrt(2) around the site.
    kind "filtered": a Gaussian profile of the given width, passed through
      the velocity filter so the slow modes are removed, then renormalized.
      The default width 10 matches the filter's velocity resolution (a
      packet must be ~1/eps sites wide to resolve the pass band cleanly).
    """

    kind: str = "filtered"
    site: int = 0
    chirality: str = "sym"
    width: float = 10.0


def parse_seed(text: str) -> SeedSpec:
    spec, violations = _parse_seed_collect(text)
    if violations:
        raise ConfigError(violations)
    return spec


def _parse_seed_collect(text: str):
    violations = []
    parts = [p.strip() for p in str(text).strip().split(":")]
    head = parts[0]
    site = 0
    if "@" in head:
        head, _, site_text = head.partition("@")
        try:
            site = int(site_text)
        except ValueError:
            violations.append(f"seed_state: bad site {site_text!r}")
    kind = {"two-site-symmetric": "two-site"}.get(head, head)
    if kind not in _SEED_KINDS:
        violations.append(
            f"seed_state: unknown kind {head!r} (expected one of {', '.join(_SEED_KINDS)})"
        )
        kind = "filtered"
    chirality = "sym"
    width = 10.0
    for p in parts[1:]:
        if not p:
            continue
        if p in _CHIRALITIES:
            chirality = p
        elif p.startswith("width="):
            try:
                width = float(p[len("width="):])
                if not (width > 0 and math.isfinite(width)):
                    raise ValueError
            except ValueError:
                violations.append(f"seed_state: bad width in {p!r}")
        else:
            violations.append(f"seed_state: unrecognized token {p!r}")
    return SeedSpec(kind, site, chirality, width), violations


def seed_to_text(seed: SeedSpec) -> str:
    text = seed.kind
    if seed.site != 0:
        text += f"@{seed.site}"
    if seed.chirality != "sym":
        text += f":{seed.chirality}"
    if seed.kind == "filtered" and seed.width != 10.0:
        text += f":width={seed.width!r}"
    return text


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a coin, a list of decay exponents, time horizon, outputs."""

    a_mod: float = 1.0 / math.sqrt(2.0)
    a_arg: float = 0.0
    b_arg: float = 0.0
    delta: float = math.pi
    g: float = 1.0
    gammas: tuple = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    eps: float = 0.1
    seed: SeedSpec = field(default_factory=SeedSpec)
    t_max: int = 256
    k_grid: int | None = None
    threads: int | None = None
    tail_tol: float = 1e-10
    out: str = "qwscatter-out"

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return self.threads
        return max(1, os.cpu_count() or 1)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _validate(cfg: ExperimentConfig, violations):
    if not (math.isfinite(cfg.a_mod) and 0.0 <= cfg.a_mod <= 1.0):
        violations.append(f"a_mod must lie in [0, 1], got {cfg.a_mod!r}")
    for key in ("a_arg", "b_arg", "delta"):
        if not math.isfinite(getattr(cfg, key)):
            violations.append(f"{key} must be finite, got {getattr(cfg, key)!r}")
    if not (math.isfinite(cfg.g) and 0.0 <= cfg.g <= 1.0):
        violations.append(f"g must lie in [0, 1], got {cfg.g!r}")
    if not cfg.gammas:
        violations.append("gamma list must be nonempty")
    for gm in cfg.gammas:
        if not (math.isfinite(gm) and gm > 0.0):
            violations.append(f"gamma values must be positive, got {gm!r}")
    if cfg.a_mod < 1.0 and not (0.0 < cfg.eps < cfg.a_mod / 6.0):
        violations.append(
            f"eps must satisfy 0 < eps < a_mod/6 = {cfg.a_mod / 6.0:.6g}, got {cfg.eps!r}"
        )
    if cfg.t_max < 8:
        violations.append(f"t_max must be >= 8, got {cfg.t_max!r}")
    if cfg.k_grid is not None and cfg.k_grid < 16:
        violations.append(f"k_grid must be >= 16, got {cfg.k_grid!r}")
    if cfg.threads is not None and cfg.threads < 1:
        violations.append(f"threads must be >= 1, got {cfg.threads!r}")
    if not (0.0 < cfg.tail_tol <= 1e-6):
        violations.append(f"tail_tol must lie in (0, 1e-6], got {cfg.tail_tol!r}")
    if cfg.seed.kind == "filtered" and cfg.a_mod == 1.0:
        violations.append("filtered seed needs a_mod < 1 (no slow modes to remove otherwise)")
    if not cfg.out:
        violations.append("out must be a nonempty path")


def build_config(base: ExperimentConfig | None = None, **overrides) -> ExperimentConfig:
    """Apply overrides to a config (default one if None) and validate.

    Raises ConfigError listing every violation.  `seed` may be given as a
    SeedSpec or a descriptor string; `gammas` as any iterable of floats.
    """
    cfg = base if base is not None else default_config()
    violations = []
    if "seed" in overrides and isinstance(overrides["seed"], str):
        spec, vio = _parse_seed_collect(overrides["seed"])
        overrides["seed"] = spec
        violations.extend(vio)
    if "gammas" in overrides:
        overrides["gammas"] = tuple(float(g) for g in overrides["gammas"])
    unknown = set(overrides) - {f.name for f in cfg.__dataclass_fields__.values()}
    if unknown:
        violations.append(f"unknown config fields: {', '.join(sorted(unknown))}")
        for k in unknown:
            overrides.pop(k)
    cfg = replace(cfg, **overrides)
    _validate(cfg, violations)
    if violations:
        raise ConfigError(violations)
    return cfg


def _parse_value(key, raw, violations):
    if key in _FLOAT_KEYS:
        try:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        except ValueError:
            violations.append(f"{key}: expected a finite number, got {raw!r}")
            return None
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            violations.append(f"{key}: expected an integer, got {raw!r}")
            return None
    if key in _LIST_KEYS:
        vals = []
        ok = True
        for part in raw.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                vals.append(float(part))
            except ValueError:
                violations.append(f"{key}: expected comma-separated numbers, got {part!r}")
                ok = False
        return tuple(vals) if ok else None
    return raw


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse `key = value` lines into a config; collect all violations."""
    violations = []
    overrides = {}
    for lineno, line in enumerate(str(text).splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            violations.append(f"line {lineno}: expected key = value, got {line!r}")
            continue
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _ALL_KEYS:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in overrides or (key == "gamma" and "gammas" in overrides):
            violations.append(f"line {lineno}: duplicate key {key!r}")
            continue
        val = _parse_value(key, raw, violations)
        if val is None:
            continue
        if key == "gamma":
            overrides["gammas"] = val
        elif key == "seed_state":
            spec, vio = _parse_seed_collect(val)
            violations.extend(vio)
            overrides["seed"] = spec
        else:
            overrides[key] = val

    cfg = base if base is not None else default_config()
    cfg = replace(cfg, **overrides)
    _validate(cfg, violations)
    if violations:
        raise ConfigError(violations)
    return cfg


def config_to_text(cfg: ExperimentConfig) -> str:
    """Serialize a config so parse_config round-trips it exactly."""
    lines = [
        "# quantum walk experiment configuration",
        f"a_mod = {cfg.a_mod!r}",
        f"a_arg = {cfg.a_arg!r}",
        f"b_arg = {cfg.b_arg!r}",
        f"delta = {cfg.delta!r}",
        f"g = {cfg.g!r}",
        "gamma = " + ", ".join(repr(gm) for gm in cfg.gammas),
        f"eps = {cfg.eps!r}",
        f"seed_state = {seed_to_text(cfg.seed)}",
        f"t_max = {cfg.t_max}",
        f"tail_tol = {cfg.tail_tol!r}",
        f"out = {cfg.out}",
    ]
    if cfg.k_grid is not None:
        lines.append(f"k_grid = {cfg.k_grid}")
    if cfg.threads is not None:
        lines.append(f"threads = {cfg.threads}")
    return "\n".join(lines) + "\n"
