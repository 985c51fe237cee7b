"""Run configuration: a JSON document validated by pydantic, unknown keys rejected."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError, OscSpectraError

COMMANDS = ("spectrum", "projections", "bari-markus", "hilbert", "weights", "counterexample", "katsnelson", "decay")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    kind: Literal["auto", "gauss-hermite-modified", "composite-legendre"] = "auto"
    Q: int | None = Field(None, ge=8, le=1 << 16)
    panels: int | None = Field(None, ge=1, le=1 << 16)
    order: int = Field(16, ge=2, le=64)
    interval: tuple[float, float] | None = None


class ContourConfig(_Strict):
    M: int = Field(64, ge=16, le=4096, multiple_of=2)
    radius_projection: float = Field(0.5, gt=0.0625, lt=1.0)
    radius_deviation: float = Field(0.25, gt=0.0625, lt=1.0)
    radius_analytic: float = Field(1.0, gt=0.0625, lt=2.0)
    panel_order: int = Field(16, ge=4, le=64)
    rtol: float = Field(1e-9, gt=0, lt=1)


class ScanConfig(_Strict):
    samples: int = Field(200, ge=1, le=100_000)
    analytic_ns: int = Field(5, ge=0, le=100)


class VectorConfig(_Strict):
    """Test vector f: a Hermite mode, or a seeded random unit vector."""

    kind: Literal["hermite", "random", "random-trusted"] = "hermite"
    index: int = Field(0, ge=0)


class HilbertConfig(_Strict):
    truncation: int = Field(2048, ge=2, le=8192)
    difference_truncation: int = Field(1024, ge=2, le=8192)
    shift_bound: float = Field(1.0 / 16.0, gt=0, le=1.0 / 16.0)
    complex_shifts: bool = False
    columns: int = Field(16, ge=1, le=256)
    weight: Literal["flat", "power", "dyadic"] = "flat"
    alpha: float = Field(0.5, ge=-0.99, le=0.99)
    method: Literal["power", "svd"] = "power"


class WeightsConfig(_Strict):
    psi: Literal["linear", "exponential", "profile"] = "linear"
    R: float = Field(3.0, gt=2.0, le=100.0)
    K_max: int = Field(100_000, ge=16, le=10_000_000)
    r_sum_N: int = Field(1000, ge=1)
    a2_scan: int = Field(4096, ge=1)
    profile_K: int = Field(400, ge=8, le=20_000)

    @model_validator(mode="after")
    def _within_window(self):
        if self.r_sum_N >= self.K_max:
            raise ValueError("r_sum_N must be below K_max")
        if self.a2_scan > self.K_max:
            raise ValueError("a2_scan must not exceed K_max")
        return self


class BlocksConfig(_Strict):
    t: float = Field(0.5, gt=0, lt=1)
    m_max: int = Field(8, ge=0, le=60)
    k_sequence: list[float] | None = None
    sweep: int = Field(10, ge=0, le=200)


class KatsnelsonConfig(_Strict):
    window: int = Field(256, ge=2, le=20_000)
    rho: list[float] = Field(default_factory=lambda: [0.1, 0.3, 0.5, 0.9])

    @field_validator("rho")
    @classmethod
    def _rho_range(cls, v):
        for r in v:
            if not 0 <= r < 1:
                raise ValueError(f"shift rho must lie in [0, 1), got {r}")
        if not v:
            raise ValueError("at least one rho is needed")
        return v


class DecayConfig(_Strict):
    K: int = Field(400, ge=16, le=20_000)
    n_min: int = Field(100, ge=0)
    n_max: int = Field(400, ge=8)
    exponents: list[float] = Field(default_factory=lambda: [2.0, 3.0, 8.0])

    @model_validator(mode="after")
    def _window(self):
        if not self.n_min + 8 <= self.n_max <= self.K:
            raise ValueError("need n_min + 8 <= n_max <= K")
        return self


class RunConfig(_Strict):
    command: Literal["spectrum", "projections", "bari-markus", "hilbert", "weights", "counterexample",
                     "katsnelson", "decay"]
    potential: dict = Field(default_factory=lambda: {"kind": "analytic-formula", "name": "constant", "value": 0.0})
    N: int = Field(64, ge=2, le=4096)
    grid: GridConfig = GridConfig()
    certify_trust: bool = True
    contour: ContourConfig = ContourConfig()
    scan: ScanConfig = ScanConfig()
    vectors: list[VectorConfig] = Field(default_factory=lambda: [VectorConfig()])
    hilbert: HilbertConfig = HilbertConfig()
    weights: WeightsConfig = WeightsConfig()
    blocks: BlocksConfig = BlocksConfig()
    katsnelson: KatsnelsonConfig = KatsnelsonConfig()
    decay: DecayConfig = DecayConfig()
    seed: int = Field(0, ge=0, lt=1 << 64)
    out: str = "out"
    plots: bool = True

    @field_validator("potential")
    @classmethod
    def _potential_parses(cls, v):
        from .potential import Potential

        try:
            Potential.from_config(v)
        except OscSpectraError as exc:
            raise ValueError(str(exc)) from None
        return v

    def build_potential(self):
        from .potential import Potential

        return Potential.from_config(self.potential)

    def to_json(self):
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def _field_path(err):
    loc = ".".join(str(p) for p in err["loc"])
    return f"{loc}: {err['msg']}" if loc else err["msg"]


def parse_config(data, **overrides):
    """RunConfig from a mapping; errors name the offending field path."""
    data = {**dict(data), **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError("; ".join(_field_path(e) for e in exc.errors())) from None


def load_config(path, **overrides):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    cmd = overrides.get("command")
    if cmd is not None and data.get("command", cmd) != cmd:
        raise ConfigurationError(f"command: config says {data['command']!r}, command line says {cmd!r}")
    return parse_config(data, **overrides)
