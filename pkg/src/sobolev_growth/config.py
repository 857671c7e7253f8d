"""Experiment configuration: defaults, JSON loading and validation.

Every command validates its configuration before computing anything.  A
violated inequality raises :class:`ConfigError` whose message names it, and
the command line turns that into exit status 2.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import mourre

COMMANDS = ("simulate", "effective", "resonance-audit", "normalform-verify", "mourre-check", "make-data")
DATA_KINDS = ("wellprepared", "planewave", "random", "zero", "file")


class ConfigError(ValueError):
    """A configuration violates one of the documented inequalities."""


@dataclass
class ExperimentConfig:
    """Parameters shared by all commands, with the desk-scale defaults.

    ``K`` is the truncation used for data, simulation and the commutator
    checks.  ``K_effective`` is the larger truncation of the effective growth
    run, where the transport carries the data modes far above ``K``.
    ``rho = None`` means twice the smallest amplitude with ``A(0) > eps^(3 - 3 theta)``.
    """

    alpha: float = 0.5
    epsilon: float = 0.5
    theta: float = 0.05
    s: float = 7.0
    s0: float = 2.0
    rho1: float = 0.6
    rho_m1: float = 0.6
    rho: float | None = None
    K: int = 256
    M: int | None = None
    dt: float = 1e-3
    T: float | None = None
    seed: int = 0
    # simulate
    equation: str = "renormalized"
    data: str = "wellprepared"
    data_file: str | None = None
    planewave_mode: int = 3
    planewave_amplitude: float = 0.1
    random_norm: float = 0.1
    stride: int = 100
    snapshot_stride: int = 0
    # effective
    K_effective: int = 4096
    effective_dt: float = 0.01
    control: bool = False
    # resonance-audit
    J: int = 300
    alpha_sweep: list = field(default_factory=list)
    projection_J: int = 50
    # normalform-verify
    nf_K: int = 128
    nf_rho: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    nf_field: dict = field(default_factory=lambda: {"1": [1.0, 0.0], "-1": [0.5, 0.0]})
    transport_fields: int = 20
    transport_K: int = 64
    strong_K: int = 8
    # mourre-check
    epsilon_sweep: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path | None) -> "ExperimentConfig":
        if path is None:
            return cls()
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # derived quantities -------------------------------------------------
    @property
    def R(self) -> float:
        return mourre.radius(self.epsilon, self.theta, self.alpha)

    @property
    def theta_star(self) -> float:
        return min((self.s - 3 * self.s0) / (2 * self.s - self.s0), 0.2)

    @property
    def nu0(self) -> float:
        return mourre.nu0_of(self.rho1, self.rho_m1)

    @property
    def T_max(self) -> float:
        return mourre.horizon(self.epsilon, self.nu0)

    @property
    def z1(self) -> float:
        return self.epsilon * self.rho1

    @property
    def zm1(self) -> float:
        return self.epsilon * self.rho_m1

    # validation ---------------------------------------------------------
    def validate(self, command: str) -> None:
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        checks = [
            (0 < self.alpha < 1, "0 < alpha < 1"),
            (self.s0 > 1.5, "s0 > 3/2"),
            (self.s > 3 * self.s0, "s > 3 s0"),
            (self.dt > 0, "dt > 0"),
            (self.K >= 1, "K >= 1"),
            (self.stride >= 1, "stride >= 1"),
        ]
        for ok, name in checks:
            if not ok:
                raise ConfigError(f"violated: {name}")
        if command in ("simulate", "effective", "mourre-check", "make-data"):
            if not 0 < self.epsilon < 1:
                raise ConfigError("violated: 0 < epsilon < 1")
            if not 0 < self.theta < self.theta_star:
                raise ConfigError(f"violated: 0 < theta < min((s - 3 s0)/(2 s - s0), 1/5) = {self.theta_star:.6g}")
        needs_data = command in ("effective", "mourre-check", "make-data") or (
            command == "simulate" and self.data == "wellprepared")
        if needs_data:
            if self.rho1 ** 2 + self.rho_m1 ** 2 > 1:
                raise ConfigError("violated: rho1^2 + rho_m1^2 <= 1")
            if command != "mourre-check" and self.nu0 <= 0:
                raise ConfigError(f"violated: nu0 = 2 rho1 rho_m1 - (rho1^2 + rho_m1^2)/2 > 0 (got {self.nu0:.6g})")
            Kmin = mourre.minimal_K(self.R)
            K = self.K_effective if command == "effective" else self.K
            if K < Kmin:
                raise ConfigError(f"violated: K >= 3 ceil(R) + 10 = {Kmin} (got K = {K}, R = {self.R:.6g})")
            if self.M is not None and self.M < 4 * K + 4:
                raise ConfigError(f"violated: M >= 4 K + 4 = {4 * K + 4}")
        if command == "effective":
            if self.effective_dt <= 0:
                raise ConfigError("violated: effective_dt > 0")
            if self.T is not None and self.T > self.T_max * (1 + 1e-12):
                raise ConfigError(f"violated: T <= (T0/eps^2) log(1/eps) = {self.T_max:.6g}")
        if command == "simulate":
            if self.equation not in ("main", "renormalized"):
                raise ConfigError("violated: equation in {main, renormalized}")
            if self.data not in DATA_KINDS:
                raise ConfigError(f"violated: data in {set(DATA_KINDS)}")
            if self.data == "file" and not self.data_file:
                raise ConfigError("violated: data = file requires data_file")
            if self.data == "planewave" and not abs(self.planewave_mode) <= self.K:
                raise ConfigError("violated: |planewave_mode| <= K")
            if self.T is not None and self.T < 0:
                raise ConfigError("violated: T >= 0")
        if command == "resonance-audit":
            if self.J < 1 or self.projection_J < 1:
                raise ConfigError("violated: J >= 1")
            if any(not 0 < a < 1 for a in self.alpha_sweep):
                raise ConfigError("violated: every swept alpha in (0, 1)")
        if command == "normalform-verify":
            if self.nf_K < 4 or self.transport_K < 4:
                raise ConfigError("violated: nf_K >= 4 and transport_K >= 4")
            if any(r <= 0 for r in self.nf_rho):
                raise ConfigError("violated: every rho > 0")
            if self.strong_K >= 10:
                raise ConfigError("violated: strong_K < 10 (window where the paralinearization is trivial)")
        if command == "mourre-check":
            for e in self.epsilon_sweep:
                if not 0 < e < 1:
                    raise ConfigError("violated: every swept epsilon in (0, 1)")
                if mourre.minimal_K(mourre.radius(e, self.theta, self.alpha)) > 2048:
                    raise ConfigError(f"violated: swept epsilon {e} needs K > 2048")
        if not math.isfinite(self.dt):
            raise ConfigError("violated: dt finite")
