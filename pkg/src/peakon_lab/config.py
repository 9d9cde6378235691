"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .gridfn import DEFAULT_L, DEFAULT_N, DEFAULT_RATIO, FAMILIES, MIN_HALF_WIDTH, InitialDatumSpec, format_float

SCENARIOS = ("identities", "linear", "nonlinear", "instability", "blowup", "oracle_compare")


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "identities"
    # grid
    L: float = DEFAULT_L
    N: int = DEFAULT_N
    ratio: float = DEFAULT_RATIO
    # time control
    dt: float = 0.01
    t_end: float = 2.0
    record_interval: float = 0.1
    # initial datum
    family: str = "peaked_exponential"
    amplitude: float = 0.0
    beta: float = 1.5
    slope_right: float = 0.0
    slope_left: float = 0.0
    sigma: float = 1.0
    center: float = 0.0
    target_h1: float = 0.0
    # thresholds
    slope_blowup_threshold: float = 1e6
    jacobian_threshold: float = 1e-8
    # analysis constants and tolerances
    eps: float = 0.05
    c0: float = 50.0
    c_const: float = 1.0
    fit_lo: float = 1e-3
    fit_hi: float = 1e-1
    rate_tol: float = 0.1
    r2_min: float = 0.99
    e_tol: float = 1e-3
    f_tol: float = 3e-3
    h1_tol: float = 1e-4
    identity_tol: float = 1e-6
    refinement_factor: float = 3.0
    roundoff_floor: float = 1e-12
    riccati_tol: float = 0.1
    convergence_tol: float = 0.01
    max_reruns: int = 3
    extra_slope_right: float = 0.0
    # direct solver
    oracle_cells: int = 8000
    oracle_order: int = 5
    oracle_nu: float = 0.0
    oracle_tol: float = 1e-2
    oracle_refine: bool = True
    # bookkeeping
    n_random: int = 5
    seed: int = 0
    output_dir: str = "peakon_out"

    def datum_spec(self) -> InitialDatumSpec:
        return InitialDatumSpec(
            self.family, self.amplitude, self.beta, self.slope_right, self.slope_left, self.sigma, self.center
        )

    def with_overrides(self, **kw) -> ExperimentConfig:
        cfg = replace(self, **{k: v for k, v in kw.items() if v is not None})
        validate(cfg)
        return cfg


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_POSITIVE = (
    "dt t_end record_interval beta sigma slope_blowup_threshold jacobian_threshold eps c0 c_const fit_lo fit_hi "
    "rate_tol r2_min e_tol f_tol h1_tol identity_tol refinement_factor roundoff_floor riccati_tol "
    "convergence_tol oracle_tol"
).split()
_NON_NEGATIVE = "target_h1 oracle_nu n_random seed max_reruns".split()


def _convert(name: str, raw: str, lineno: int):
    kind = _TYPES[name]
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError("expected true or false")
            return low == "true"
        if kind == "int":
            return int(raw)
        if kind == "float":
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError("must be finite")
            return val
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {name!r}: {raw!r} ({exc})") from None


def validate(cfg: ExperimentConfig) -> None:
    def bad(name, why):
        raise ConfigError(f"{name}: {why} (got {getattr(cfg, name)!r})")

    if cfg.scenario not in SCENARIOS:
        bad("scenario", f"must be one of {', '.join(SCENARIOS)}")
    if cfg.family not in FAMILIES:
        bad("family", f"must be one of {', '.join(FAMILIES)}")
    if cfg.L < MIN_HALF_WIDTH:
        bad("L", f"must be >= {MIN_HALF_WIDTH:g}")
    if cfg.N < 2:
        bad("N", "must be >= 2")
    if cfg.ratio < 1.0:
        bad("ratio", "must be >= 1")
    for name in _POSITIVE:
        if not getattr(cfg, name) > 0:
            bad(name, "must be positive")
    for name in _NON_NEGATIVE:
        if getattr(cfg, name) < 0:
            bad(name, "must be non-negative")
    if cfg.fit_lo >= cfg.fit_hi:
        bad("fit_lo", "must be below fit_hi")
    if cfg.scenario == "blowup" and not cfg.eps < 1.0 / 12.0:
        bad("eps", "must lie in (0, 1/12) for the blow-up comparison")
    if cfg.oracle_order not in (1, 3, 5):
        bad("oracle_order", "must be 1, 3 or 5")
    if cfg.oracle_cells < 4 or cfg.oracle_cells % 2:
        bad("oracle_cells", "must be an even number >= 4")
    if not cfg.output_dir:
        bad("output_dir", "must not be empty")


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown or repeated keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        values[key] = _convert(key, raw, lineno)
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def serialize(cfg: ExperimentConfig) -> str:
    """Every field in declaration order, one ``key = value`` line each."""
    return "".join(f"{f.name} = {_render(getattr(cfg, f.name))}\n" for f in fields(cfg))


def normalize(text: str) -> str:
    return serialize(parse_config(text))
