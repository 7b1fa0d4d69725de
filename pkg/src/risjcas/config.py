"""Experiment configuration: parsing, validation, and system assembly.

Configs are YAML (comments survive in the file; values round-trip
losslessly). Angles are written in degrees and powers in dBm/dB; both are
converted once at parse time, and the manifest records raw and linear
values side by side.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import yaml

from .channels import GeometryLayout, MultipathSpec, build_channel_set, colocated_bs_layout
from .coupling import (
    CONVENTIONAL,
    PHYSICALLY_CONSISTENT,
    CouplingMatrix,
    ScatteringMatrix,
    coupling_for,
    scattering_from_coupling,
)
from .errors import ConfigError
from .geometry import UlaSpec, UpaSpec
from .metrics import BISTATIC, MONOSTATIC, SensingScene, build_sensing_matrices
from .optimizer import DEFAULT_ALPHA_GRID, OptimizerConfig

SPEED_OF_LIGHT = 299_792_458.0

MODEL_ALIASES = {
    "pc": PHYSICALLY_CONSISTENT,
    "physically_consistent": PHYSICALLY_CONSISTENT,
    "conv": CONVENTIONAL,
    "conventional": CONVENTIONAL,
}
MODE_ALIASES = {"mono": MONOSTATIC, "monostatic": MONOSTATIC,
                "bi": BISTATIC, "bistatic": BISTATIC}


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass
class QuantizationConfig:
    noise_grid: List[float] = field(
        default_factory=lambda: [10.0 ** e for e in range(-6, -1)])
    bits: List[int] = field(default_factory=lambda: [1, 3, 4, 8])
    batch_size: int = 256
    batch_seeds: int = 3
    design_alpha: float = 1.0


@dataclass
class ExperimentConfig:
    """All knobs of a run; every physical quantity in its customary unit."""

    mode: str = MONOSTATIC
    model: str = PHYSICALLY_CONSISTENT
    n_tx: int = 4
    n_rx: int = 4
    ris_side: int = 8
    ris_spacing_wavelengths: float = 0.5
    bs_spacing_wavelengths: float = 0.5
    frequency_hz: float = 3.0e9
    power_dbm: float = 30.0
    pathloss_ref_db: float = -20.0
    # NOTE: 50 dBm is the published communication noise figure; it is almost
    # certainly a sign typo (100 W of noise). Kept as the shipped default for
    # fidelity; override comm_noise_dbm (e.g. -50) for meaningful SNR.
    comm_noise_dbm: float = 50.0
    sensing_noise_var: float = 1.0e-4
    bs_ris_distance_m: float = 25.0
    ris_user_distance_m: float = 20.0
    bs_user_distance_m: float = 60.0
    pathloss_exp_bs_ris: float = 2.2
    pathloss_exp_ris_user: float = 2.2
    pathloss_exp_bs_user: float = 3.2
    n_paths: int = 15
    reciprocal_ris_links: bool = False
    target_angle_deg: float = 0.0
    azimuth_deg: float = 0.0
    aod_deg: float = 120.0          # bistatic departure angle (2*pi/3 preset; 108 = 3*pi/5)
    bi_rx_angle_deg: float = 30.0
    bi_ris_angle_deg: float = 0.0
    bi_rx_ris_angle_deg: float = 45.0
    # round-trip reflection coefficients; free-space transmit-receive
    # leakage dominates returns of this size, as in a real monostatic rig
    gamma_bs: float = 1.0e-3
    gamma_ris: float = 1.0e-3
    alpha_grid: List[float] = field(default_factory=lambda: list(DEFAULT_ALPHA_GRID))
    step_size: float = 0.1
    outer_iters: int = 30
    inner_cov_iters: int = 150
    backtracking: bool = True
    backtrack_shrink: float = 0.5
    max_backtracks: int = 10
    objective_tol: float = 1.0e-6
    seeds: int = 2
    quantization: QuantizationConfig = field(default_factory=QuantizationConfig)

    # ---- unit conversions (linear scale) -------------------------------
    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    @property
    def power_watts(self) -> float:
        return dbm_to_watts(self.power_dbm)

    @property
    def comm_noise_watts(self) -> float:
        return dbm_to_watts(self.comm_noise_dbm)

    @property
    def n_ris(self) -> int:
        return self.ris_side ** 2

    # ---- component builders --------------------------------------------
    def tx_spec(self) -> UlaSpec:
        return UlaSpec(self.n_tx, self.bs_spacing_wavelengths * self.wavelength,
                       self.wavelength)

    def rx_spec(self) -> UlaSpec:
        return UlaSpec(self.n_rx, self.bs_spacing_wavelengths * self.wavelength,
                       self.wavelength)

    def ris_spec(self) -> UpaSpec:
        return UpaSpec(self.ris_side, self.ris_spacing_wavelengths * self.wavelength,
                       self.wavelength)

    def layout(self) -> GeometryLayout:
        return colocated_bs_layout(self.n_tx, self.n_rx,
                                   self.bs_spacing_wavelengths * self.wavelength)

    def scene(self) -> SensingScene:
        rad = math.radians
        common = dict(
            gamma_bs=complex(self.gamma_bs),
            gamma_ris=complex(self.gamma_ris),
            noise_var_sensing=self.sensing_noise_var,
            noise_var_comm=self.comm_noise_watts,
            azimuth=rad(self.azimuth_deg),
        )
        if self.mode == MONOSTATIC:
            return SensingScene(mode=MONOSTATIC,
                                angle_bs=rad(self.target_angle_deg),
                                angle_ris=rad(self.target_angle_deg),
                                **common)
        return SensingScene(mode=BISTATIC,
                            angle_tx=rad(self.aod_deg),
                            angle_rx=rad(self.bi_rx_angle_deg),
                            angle_ris=rad(self.bi_ris_angle_deg),
                            angle_rx_ris=rad(self.bi_rx_ris_angle_deg),
                            **common)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            alpha_grid=tuple(self.alpha_grid),
            step_size=self.step_size,
            outer_iters=self.outer_iters,
            inner_cov_iters=self.inner_cov_iters,
            backtracking=self.backtracking,
            backtrack_shrink=self.backtrack_shrink,
            max_backtracks=self.max_backtracks,
            objective_tol=self.objective_tol,
        )

    def multipath(self, distance: float, exponent: float) -> MultipathSpec:
        return MultipathSpec(distance=distance, n_paths=self.n_paths,
                             pathloss_ref_db=self.pathloss_ref_db,
                             pathloss_exponent=exponent)

    def channels(self, seed: int):
        return build_channel_set(
            self.tx_spec(), self.rx_spec(), self.ris_spec(), self.layout(),
            br=self.multipath(self.bs_ris_distance_m, self.pathloss_exp_bs_ris),
            ru=self.multipath(self.ris_user_distance_m, self.pathloss_exp_ris_user),
            bu=self.multipath(self.bs_user_distance_m, self.pathloss_exp_bs_user),
            seed=seed,
            reciprocal_ris_links=self.reciprocal_ris_links,
        )

    def scattering(self, cache_path=None) -> ScatteringMatrix:
        if self.model == CONVENTIONAL:
            return ScatteringMatrix.zero(self.n_ris)
        b = coupling_for(self.ris_spec(), cache_path=cache_path)
        return scattering_from_coupling(b)

    def sensing_matrices(self):
        return build_sensing_matrices(self.scene(), self.tx_spec(), self.rx_spec(),
                                      self.ris_spec())

    # ---- (de)serialization ----------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "mode" in data:
            data["mode"] = MODE_ALIASES.get(str(data["mode"]).lower(), data["mode"])
        if "model" in data:
            data["model"] = MODEL_ALIASES.get(str(data["model"]).lower(), data["model"])
        if isinstance(data.get("quantization"), dict):
            known = set(QuantizationConfig.__dataclass_fields__)
            extra = set(data["quantization"]) - known
            if extra:
                raise ConfigError(f"unknown quantization fields: {sorted(extra)}")
            data["quantization"] = QuantizationConfig(**data["quantization"])
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad config structure: {exc}") from exc

    def linear_echo(self) -> dict:
        """Derived linear-scale values recorded alongside the raw config."""
        return {
            "wavelength_m": self.wavelength,
            "power_watts": self.power_watts,
            "comm_noise_watts": self.comm_noise_watts,
            "pathloss_ref_linear": db_to_linear(self.pathloss_ref_db),
            "n_ris": self.n_ris,
            "ris_spacing_m": self.ris_spacing_wavelengths * self.wavelength,
            "target_angle_rad": math.radians(self.target_angle_deg),
            "aod_rad": math.radians(self.aod_deg),
        }

    def validate(self) -> List[str]:
        """Dry-run checks; returns a list of problems naming the fields."""
        problems = []
        if self.mode not in (MONOSTATIC, BISTATIC):
            problems.append(f"mode: unknown value {self.mode!r}")
        if self.model not in (PHYSICALLY_CONSISTENT, CONVENTIONAL):
            problems.append(f"model: unknown value {self.model!r}")
        for name in ("n_tx", "n_rx", "ris_side", "n_paths", "seeds",
                     "outer_iters", "inner_cov_iters"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name}: must be >= 1, got {getattr(self, name)}")
        for name in ("ris_spacing_wavelengths", "bs_spacing_wavelengths",
                     "frequency_hz", "sensing_noise_var", "bs_ris_distance_m",
                     "ris_user_distance_m", "bs_user_distance_m", "step_size",
                     "objective_tol"):
            if not float(getattr(self, name)) > 0:
                problems.append(f"{name}: must be positive, got {getattr(self, name)}")
        if not self.alpha_grid:
            problems.append("alpha_grid: must not be empty")
        else:
            if any(not 0.0 <= a <= 1.0 for a in self.alpha_grid):
                problems.append("alpha_grid: values must lie in [0, 1]")
            if sorted(set(self.alpha_grid)) != list(self.alpha_grid):
                problems.append("alpha_grid: must be sorted and distinct")
        if not self.quantization.bits:
            problems.append("quantization.bits: must not be empty")
        if any(not 1 <= b <= 16 for b in self.quantization.bits):
            problems.append("quantization.bits: resolutions must lie in 1..16")
        if any(not v > 0 for v in self.quantization.noise_grid):
            problems.append("quantization.noise_grid: variances must be positive")
        return problems

    def content_hash(self, version: str) -> str:
        payload = json.dumps({"config": self.to_dict(), "version": version},
                             sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    return ExperimentConfig.from_dict(data)


def save_config(path, config: ExperimentConfig):
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)
