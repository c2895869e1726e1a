"""INI run configuration mapped onto dataclasses.

Unknown sections or keys are errors, so typos do not silently fall back to
defaults.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .core import Grid, PairPotential, TrapPotential
from .flow import FlowParams
from .nelson import SdeParams

DEFAULT_CONFIG = Path(__file__).with_name("default.ini")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


@dataclass(frozen=True)
class ModelConfig:
    d: int = 1
    L: float = 5.0
    n: int = 49

    def grid(self) -> Grid:
        return Grid(self.d, self.L, self.n)


@dataclass(frozen=True)
class PotentialConfig:
    trap: str = "harmonic"
    trap_params: tuple = (1.0,)
    trap_file: str = ""
    pair: str = "bump"
    pair_coupling: float = 1.0
    pair_radius: float = 2.0
    nls_coupling: str = "limit"  # "limit" = half the pair coupling, or a number

    def trap_potential(self) -> TrapPotential:
        params = self.trap_params
        if self.trap == "tabulated" and self.trap_file:
            params = tuple(np.loadtxt(self.trap_file, dtype=np.float64).ravel())
        return TrapPotential(self.trap, params)

    def pair_potential(self, dim: int = 1) -> PairPotential:
        if self.pair == "zero" or self.pair_coupling == 0:
            return PairPotential.zero(dim)
        return PairPotential.with_coupling(self.pair, self.pair_coupling, self.pair_radius, dim)

    def nls_g(self) -> float:
        """Coupling of the limiting nlS functional.

        The pair sum over i < j of v_N converges per particle to
        (1/2) g int rho^2, so the limit coupling is g / 2 unless overridden.
        """
        if self.nls_coupling == "limit":
            return 0.5 * self.pair_coupling if self.pair != "zero" else 0.0
        return float(self.nls_coupling)

    def describe(self) -> dict:
        out = {"trap": self.trap_potential().describe(), "pair": self.pair,
               "pair_coupling": self.pair_coupling, "pair_radius": self.pair_radius,
               "nls_coupling": self.nls_g()}
        return out


@dataclass(frozen=True)
class SweepConfig:
    N: tuple = (2, 3, 4)
    beta: tuple = (0.0, 0.5)
    lam: tuple = (0.5, 1.0, 1.5)
    t: float = 1.0


@dataclass(frozen=True)
class SdeConfig:
    dt: float = 1e-3
    T: float = 1.0
    M: int = 10_000
    seed: int = 20240611
    records: int = 100

    def params(self, seed: int | None = None) -> SdeParams:
        return SdeParams(self.dt, self.T, self.M, self.seed if seed is None else seed,
                         self.records)


@dataclass(frozen=True)
class SolverConfig:
    tau: str = "auto"
    max_iterations: int = 200_000
    energy_tol: float = 1e-13
    residual_tol: float = 1e-8
    stencil_order: int = 4
    symmetrize_every: int = 1
    budget: int = 10_000_000

    def flow(self) -> FlowParams:
        tau = None if self.tau == "auto" else float(self.tau)
        return FlowParams(tau, self.max_iterations, self.energy_tol, self.residual_tol,
                          self.stencil_order, self.symmetrize_every)


@dataclass(frozen=True)
class ScatteringConfig:
    profile: str = "bump"
    coupling: float = 1.0
    radius: float = 1.0
    beta: float = 0.5
    Ns: tuple = (2, 8, 32, 128)

    def potential(self) -> PairPotential:
        return PairPotential.with_coupling(self.profile, self.coupling, self.radius, 3)


@dataclass(frozen=True)
class VerifyConfig:
    N: tuple = (2, 3)
    M: int = 4000
    instances: int = 10_000


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    potentials: PotentialConfig = field(default_factory=PotentialConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    sde: SdeConfig = field(default_factory=SdeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    scattering: ScatteringConfig = field(default_factory=ScatteringConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def describe(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_CLASSES = {"model": ModelConfig, "potentials": PotentialConfig, "sweep": SweepConfig,
            "sde": SdeConfig, "solver": SolverConfig, "scattering": ScatteringConfig,
            "verify": VerifyConfig, "output": OutputConfig}
_KEY_ALIASES = {("sweep", "lambda"): "lam"}


def _convert(cls, name: str, raw: str):
    default = getattr(cls(), name)
    if isinstance(default, tuple):
        if default and isinstance(default[0], str):
            return tuple(t for t in raw.replace(",", " ").split())
        if default and isinstance(default[0], int) and not isinstance(default[0], bool):
            return tuple(_ints(raw))
        return tuple(_floats(raw))
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def parse_config(text: str, base_dir: str | os.PathLike = ".") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    parts = {}
    for section in parser.sections():
        if section not in _CLASSES:
            raise ConfigError(f"unknown section [{section}]")
        cls = _CLASSES[section]
        known = {f.name for f in fields(cls)}
        values = {}
        for key, raw in parser.items(section):
            name = _KEY_ALIASES.get((section, key), key)
            if name not in known:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                values[name] = _convert(cls, name, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
        parts[section] = cls(**values)
    cfg = RunConfig(**parts)
    if cfg.potentials.trap_file:
        path = Path(base_dir) / cfg.potentials.trap_file
        if not path.is_file():
            raise ConfigError(f"trap table {path} does not exist")
        cfg = replace(cfg, potentials=replace(cfg.potentials, trap_file=str(path)))
    validate(cfg)
    return cfg


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    path = Path(path) if path is not None else DEFAULT_CONFIG
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def validate(cfg: RunConfig) -> None:
    """Construct every object once so range errors surface as config errors."""
    try:
        grid = cfg.model.grid()
        cfg.potentials.trap_potential()
        cfg.potentials.pair_potential(grid.d)
        if cfg.potentials.nls_g() < 0:
            raise ValueError("nlS coupling must be non-negative")
        cfg.solver.flow()
        cfg.sde.params()
        cfg.scattering.potential()
        for N in cfg.sweep.N + cfg.verify.N:
            if not 2 <= N <= 4:
                raise ValueError(f"sweep N must lie in [2, 4], got {N}")
        for b in cfg.sweep.beta:
            if not 0 <= b < 1:
                raise ValueError(f"beta must lie in [0, 1), got {b}")
        for lam in cfg.sweep.lam:
            if not lam > 0:
                raise ValueError("lambda values must be positive")
        if cfg.sweep.t < 0:
            raise ValueError("t must be non-negative")
        if not 0 < cfg.scattering.beta < 1:
            raise ValueError("scattering beta must lie in (0, 1)")
        bad = set(cfg.output.formats) - {"csv", "json"}
        if bad:
            raise ValueError(f"unknown output formats {sorted(bad)}")
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
