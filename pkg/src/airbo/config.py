"""Declarative run configuration (INI file with sections).

Defaults encode the published experiment constants: chain length 1200
(satellite profile) or 2000 (station profile) with burn-in 200, 100
prior samples, 10 or 5 random initial placements per profile, seed 13,
noise variance 1e-06 and the eta proposal widths. Every value can be
overridden per key; CLI flags override the file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError
from .kernels import KernelSpec, get_spec
from .mcmc import ProposalWidths

_PROFILES = {
    "satellite": {"h": 1200, "n_init": 10},
    "station": {"h": 2000, "n_init": 5},
}


@dataclass
class McmcConfig:
    h: int = 1200
    burn_in: int = 200
    b: int = 5
    seed: int = 13
    widths: ProposalWidths = field(default_factory=ProposalWidths)


@dataclass
class BoBlockConfig:
    m: int = 100
    n_init: int = 10
    n_iter: int = 50
    seed: int = 13


@dataclass
class BaselineConfig:
    n_runs: int = 100
    seed: int = 13


@dataclass
class DataConfig:
    source: str = "bundle"  # bundle | grid | station
    path: str = ""
    cell_size_km: float = 7.0
    min_readings: int = 40
    classification: str = "Roadside"
    tuning_count: int = 10


@dataclass
class SynthConfig:
    grid_size: int = 16
    n_snapshots: int = 20
    cell_size_km: float = 7.0
    seed: int = 13
    tuning_count: int | None = None  # default: half the snapshots
    log_shift: float = 0.0
    theta: dict[str, float] = field(default_factory=dict)
    gamma: float | None = None


@dataclass
class RunConfig:
    kernel: str = "rbf_rbf"
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    bo: BoBlockConfig = field(default_factory=BoBlockConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    out_dir: str = "out"

    @property
    def spec(self) -> KernelSpec:
        return get_spec(self.kernel)

    def validate(self) -> None:
        self.spec  # raises on unknown kernel
        checks = {
            "mcmc.h": self.mcmc.h,
            "mcmc.b": self.mcmc.b,
            "bo.m": self.bo.m,
            "bo.n_init": self.bo.n_init,
            "bo.n_iter": self.bo.n_iter,
            "baseline.n_runs": self.baseline.n_runs,
            "synth.grid_size": self.synth.grid_size,
            "synth.n_snapshots": self.synth.n_snapshots,
        }
        for key, value in checks.items():
            if value < 1:
                raise InputError(f"config {key} must be >= 1, got {value}")
        if self.mcmc.burn_in < 0 or self.mcmc.burn_in >= self.mcmc.h:
            raise InputError(
                f"config mcmc.burn_in must satisfy 0 <= burn_in < h, "
                f"got burn_in={self.mcmc.burn_in} h={self.mcmc.h}"
            )
        if self.bo.n_iter < self.bo.n_init:
            raise InputError(
                f"config bo.n_iter={self.bo.n_iter} must be >= bo.n_init={self.bo.n_init}"
            )
        if self.data.source not in ("bundle", "grid", "station"):
            raise InputError(f"config data.source must be bundle/grid/station, got {self.data.source!r}")


def _get(parser, section, key, cast, default, path):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except ValueError as exc:
        raise InputError(f"{path}: [{section}] {key} = {raw!r}: {exc}") from exc


def load_config(path) -> RunConfig:
    """Parse an INI run configuration."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from exc

    cfg = RunConfig()
    cfg.kernel = _get(parser, "model", "kernel", str, cfg.kernel, path)
    profile = _get(parser, "model", "profile", str, "satellite", path)
    if profile not in _PROFILES:
        raise InputError(f"{path}: unknown profile {profile!r}; valid: satellite, station")
    cfg.mcmc.h = _PROFILES[profile]["h"]
    cfg.bo.n_init = _PROFILES[profile]["n_init"]

    m = cfg.mcmc
    m.h = _get(parser, "mcmc", "h", int, m.h, path)
    m.burn_in = _get(parser, "mcmc", "burn_in", int, m.burn_in, path)
    m.b = _get(parser, "mcmc", "b", int, m.b, path)
    m.seed = _get(parser, "mcmc", "seed", int, m.seed, path)
    w = m.widths
    w.shape_lengthscale = _get(parser, "mcmc", "width_shape_lengthscale", float, w.shape_lengthscale, path)
    w.scale_lengthscale = _get(parser, "mcmc", "width_scale_lengthscale", float, w.scale_lengthscale, path)
    w.shape_amplitude = _get(parser, "mcmc", "width_shape_amplitude", float, w.shape_amplitude, path)
    w.scale_amplitude = _get(parser, "mcmc", "width_scale_amplitude", float, w.scale_amplitude, path)

    b = cfg.bo
    b.m = _get(parser, "bo", "m", int, b.m, path)
    b.n_init = _get(parser, "bo", "n_init", int, b.n_init, path)
    b.n_iter = _get(parser, "bo", "n_iter", int, b.n_iter, path)
    b.seed = _get(parser, "bo", "seed", int, b.seed, path)

    cfg.baseline.n_runs = _get(parser, "baseline", "n_runs", int, cfg.baseline.n_runs, path)
    cfg.baseline.seed = _get(parser, "baseline", "seed", int, cfg.baseline.seed, path)

    d = cfg.data
    d.source = _get(parser, "data", "source", str, d.source, path)
    d.path = _get(parser, "data", "path", str, d.path, path)
    d.cell_size_km = _get(parser, "data", "cell_size_km", float, d.cell_size_km, path)
    d.min_readings = _get(parser, "data", "min_readings", int, d.min_readings, path)
    d.classification = _get(parser, "data", "classification", str, d.classification, path)
    d.tuning_count = _get(parser, "data", "tuning_count", int, d.tuning_count, path)

    s = cfg.synth
    s.grid_size = _get(parser, "synth", "grid_size", int, s.grid_size, path)
    s.n_snapshots = _get(parser, "synth", "n_snapshots", int, s.n_snapshots, path)
    s.cell_size_km = _get(parser, "synth", "cell_size_km", float, s.cell_size_km, path)
    s.seed = _get(parser, "synth", "seed", int, s.seed, path)
    s.tuning_count = _get(parser, "synth", "tuning_count", int, s.tuning_count, path)
    s.log_shift = _get(parser, "synth", "log_shift", float, s.log_shift, path)
    if parser.has_section("synth_theta"):
        for key in parser.options("synth_theta"):
            value = _get(parser, "synth_theta", key, float, None, path)
            if key == "gamma":
                s.gamma = value
            else:
                s.theta[key] = value

    cfg.out_dir = _get(parser, "output", "dir", str, cfg.out_dir, path)
    cfg.validate()
    return cfg
