"""Scenario configuration and seeded multipath sampling.

Path gains are circularly-symmetric complex Gaussians whose variances follow
a distance power law: ``var = ref_loss * (distance / ref_distance)^-exponent``
per link side.  All angles are drawn uniformly from [-pi/2, pi/2].  dB and
dBm quantities are converted to linear form exactly once, when the config is
constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import AnglePair, FimGeometry, InboundPath, OutboundPath, PathBundle

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "sample_scenario",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
]


class ConfigError(ValueError):
    """A scenario or run configuration failed validation."""


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def watts_to_dbm(value_watts: float) -> float:
    return 10.0 * math.log10(value_watts) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Deployment and sampling parameters of one simulated link.

    ``d_max = None`` resolves to three wavelengths.  ``noise_power_dbm`` is
    carried as scenario metadata only; nothing downstream consumes it.
    """

    bs_fim_distance: float = 50.0
    fim_ue_distance: float = 5.0
    ref_loss_db: float = -25.0
    ref_distance: float = 1.0
    bs_fim_exponent: float = 3.5
    fim_ue_exponent: float = 2.0
    wavelength: float = 0.01
    noise_power_dbm: float = -80.0
    tx_power_dbm: float = 15.0
    inbound_paths: int = 3
    outbound_paths: int = 3
    bs_antennas: int = 1
    n_y: int = 2
    n_z: int = 2
    d_max: float | None = None

    # linear-domain values, fixed at construction
    inbound_gain_var: float = field(init=False, repr=False)
    outbound_gain_var: float = field(init=False, repr=False)
    tx_power_watts: float = field(init=False, repr=False)
    noise_power_watts: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.d_max is None:
            object.__setattr__(self, "d_max", 3.0 * self.wavelength)
        for name in ("bs_fim_distance", "fim_ue_distance", "ref_distance", "wavelength"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")
        for name in ("inbound_paths", "outbound_paths", "bs_antennas", "n_y", "n_z"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.d_max < 0.0:
            raise ConfigError("d_max must be >= 0")
        for f_ in fields(self):
            value = getattr(self, f_.name)
            if isinstance(value, float) and not math.isfinite(value):
                raise ConfigError(f"{f_.name} must be finite")

        ref = db_to_linear(self.ref_loss_db)
        object.__setattr__(
            self,
            "inbound_gain_var",
            ref * (self.bs_fim_distance / self.ref_distance) ** -self.bs_fim_exponent,
        )
        object.__setattr__(
            self,
            "outbound_gain_var",
            ref * (self.fim_ue_distance / self.ref_distance) ** -self.fim_ue_exponent,
        )
        object.__setattr__(self, "tx_power_watts", dbm_to_watts(self.tx_power_dbm))
        object.__setattr__(self, "noise_power_watts", dbm_to_watts(self.noise_power_dbm))

    @property
    def n_elements(self) -> int:
        return self.n_y * self.n_z

    def geometry(self, d_max: float | None = None) -> FimGeometry:
        """Geometry of this scenario, optionally at an overridden morphing
        bound (used when sweeping d_max over a fixed deployment)."""
        bound = self.d_max if d_max is None else d_max
        return FimGeometry(self.n_y, self.n_z, self.wavelength, bound)


def _cscg(rng: np.random.Generator, count: int, variance: float) -> np.ndarray:
    draws = rng.standard_normal((count, 2))
    return math.sqrt(variance / 2.0) * (draws[:, 0] + 1j * draws[:, 1])


def sample_scenario(cfg: ScenarioConfig, seed: int) -> PathBundle:
    """Draw one channel realization; identical for identical seeds.

    Inbound draws come first (gains, then angle blocks), then outbound.
    """
    rng = np.random.default_rng(seed)
    half_pi = math.pi / 2.0

    r = cfg.inbound_paths
    in_gains = _cscg(rng, r, cfg.inbound_gain_var)
    in_theta = rng.uniform(-half_pi, half_pi, r)
    in_phi = rng.uniform(-half_pi, half_pi, r)
    departures = rng.uniform(-half_pi, half_pi, r)

    k = cfg.outbound_paths
    out_gains = _cscg(rng, k, cfg.outbound_gain_var)
    out_theta = rng.uniform(-half_pi, half_pi, k)
    out_phi = rng.uniform(-half_pi, half_pi, k)

    inbound = tuple(
        InboundPath(
            gain=complex(in_gains[i]),
            angles=AnglePair(float(in_theta[i]), float(in_phi[i])),
            bs_departure=float(departures[i]),
        )
        for i in range(r)
    )
    outbound = tuple(
        OutboundPath(
            gain=complex(out_gains[i]),
            angles=AnglePair(float(out_theta[i]), float(out_phi[i])),
        )
        for i in range(k)
    )
    return PathBundle(inbound=inbound, outbound=outbound)
