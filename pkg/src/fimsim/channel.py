"""Steering vectors and cascaded channels for a deformable planar array.

The surface is an ``n_y``-by-``n_z`` uniform planar array (UPA) with
half-wavelength spacing whose elements each translate perpendicular to the
substrate by a deformation distance ``d_n``, bounded by ``|d_n| <= d_max``.
A plane wave from azimuth ``theta`` / elevation ``phi`` sees the rigid UPA
response multiplied elementwise by the phase advance of each displaced
element; the two faces of the surface see opposite displacements.

Flat element index ``n`` maps to grid coordinates
``(n // n_z, n % n_z)``, matching the Kronecker order of
:func:`upa_steering` (y-axis factor first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FimGeometry",
    "AnglePair",
    "InboundPath",
    "OutboundPath",
    "PathBundle",
    "SurfaceShape",
    "ula_steering",
    "upa_steering",
    "deformation_response",
    "effective_steering",
    "bs_fim_channel",
    "fim_ue_channel",
    "bs_fim_channel_matrix",
]


@dataclass(frozen=True)
class FimGeometry:
    """Array layout plus the per-element morphing bound.

    ``d_max`` is the largest admissible |deformation| in meters; ``d_max = 0``
    describes a rigid surface (phase control only).
    """

    n_y: int
    n_z: int
    wavelength: float
    d_max: float = 0.0

    def __post_init__(self):
        if self.n_y < 1 or self.n_z < 1:
            raise ValueError("element counts must be >= 1")
        if not (self.wavelength > 0.0) or not math.isfinite(self.wavelength):
            raise ValueError("wavelength must be positive and finite")
        if self.d_max < 0.0 or not math.isfinite(self.d_max):
            raise ValueError("d_max must be >= 0 and finite")

    @property
    def n(self) -> int:
        """Total element count."""
        return self.n_y * self.n_z

    @property
    def wavenumber(self) -> float:
        """2*pi / wavelength, derived on access."""
        return 2.0 * math.pi / self.wavelength

    def grid_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-element (y-index, z-index) arrays in flat-index order."""
        flat = np.arange(self.n)
        return flat // self.n_z, flat % self.n_z


@dataclass(frozen=True)
class AnglePair:
    """Azimuth/elevation pair in radians. Any finite value is accepted."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("angles must be finite")


@dataclass(frozen=True)
class InboundPath:
    """One BS-to-surface propagation path.

    ``bs_departure`` is the departure angle at the BS array; it is only
    needed when the BS has multiple antennas and may be left ``None`` for
    single-antenna scenarios.
    """

    gain: complex
    angles: AnglePair
    bs_departure: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.gain.real) and math.isfinite(self.gain.imag)):
            raise ValueError("path gain must be finite")
        if self.bs_departure is not None and not math.isfinite(self.bs_departure):
            raise ValueError("bs_departure must be finite")


@dataclass(frozen=True)
class OutboundPath:
    """One surface-to-UE propagation path."""

    gain: complex
    angles: AnglePair

    def __post_init__(self):
        if not (math.isfinite(self.gain.real) and math.isfinite(self.gain.imag)):
            raise ValueError("path gain must be finite")


@dataclass(frozen=True)
class PathBundle:
    """All propagation paths of one channel realization.

    Zero-gain paths are allowed (they contribute nothing); empty path lists
    are rejected because they would make the end-to-end channel identically
    zero.
    """

    inbound: tuple[InboundPath, ...]
    outbound: tuple[OutboundPath, ...]

    def __post_init__(self):
        object.__setattr__(self, "inbound", tuple(self.inbound))
        object.__setattr__(self, "outbound", tuple(self.outbound))
        if len(self.inbound) < 1:
            raise ValueError("at least one inbound path is required")
        if len(self.outbound) < 1:
            raise ValueError("at least one outbound path is required")

    def has_bs_departures(self) -> bool:
        return all(p.bs_departure is not None for p in self.inbound)


@dataclass(frozen=True)
class SurfaceShape:
    """Per-element deformation distances in meters (length-N real vector)."""

    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float).reshape(-1))

    @classmethod
    def zeros(cls, geom: FimGeometry) -> "SurfaceShape":
        return cls(np.zeros(geom.n))

    def validate_for(self, geom: FimGeometry) -> None:
        """Raise if the vector does not fit the geometry or breaks the bound."""
        _check_shape(self, geom)
        if np.any(np.abs(self.d) > geom.d_max):
            raise ValueError("deformation exceeds the morphing bound d_max")

    def __len__(self) -> int:
        return self.d.size


def _check_shape(shape: SurfaceShape, geom: FimGeometry) -> None:
    if shape.d.size != geom.n:
        raise ValueError(
            f"shape has {shape.d.size} entries, geometry expects {geom.n}"
        )


def ula_steering(gamma: float, m: int) -> np.ndarray:
    """Half-wavelength ULA response for departure angle ``gamma``.

    Element ``i`` equals ``exp(j*pi*i*sin(gamma))``; the first entry is 1.
    """
    if m < 1:
        raise ValueError("antenna count must be >= 1")
    return np.exp(1j * np.pi * np.arange(m) * np.sin(gamma))


def upa_steering(angles: AnglePair, geom: FimGeometry) -> np.ndarray:
    """Rigid UPA response ``a_y(theta, phi) kron a_z(phi)``.

    ``a_y[i] = exp(j*pi*i*sin(theta)*cos(phi))`` and
    ``a_z[i] = exp(j*pi*i*sin(phi))``; every entry has unit modulus.
    """
    ay = np.exp(
        1j * np.pi * np.arange(geom.n_y) * (np.sin(angles.theta) * np.cos(angles.phi))
    )
    az = np.exp(1j * np.pi * np.arange(geom.n_z) * np.sin(angles.phi))
    return np.kron(ay, az)


def deformation_response(
    angles: AnglePair, shape: SurfaceShape, geom: FimGeometry
) -> np.ndarray:
    """Extra per-element phase from displacing each element by ``d_n``.

    Element ``n`` equals ``exp(j*kappa*d_n*cos(theta)*cos(phi))`` with
    ``kappa = 2*pi/wavelength``.
    """
    _check_shape(shape, geom)
    scale = geom.wavenumber * np.cos(angles.theta) * np.cos(angles.phi)
    return np.exp(1j * scale * shape.d)


def effective_steering(
    angles: AnglePair, shape: SurfaceShape, geom: FimGeometry
) -> np.ndarray:
    """Steering vector of the morphed surface: UPA response times the
    deformation response (Hadamard product)."""
    return upa_steering(angles, geom) * deformation_response(angles, shape, geom)


def bs_fim_channel(
    paths: PathBundle, shape: SurfaceShape, geom: FimGeometry
) -> np.ndarray:
    """Baseband channel from the BS to the surface: the gain-weighted sum of
    effective steering vectors over all inbound paths."""
    _check_shape(shape, geom)
    acc = np.zeros(geom.n, dtype=complex)
    for path in paths.inbound:
        acc += path.gain * effective_steering(path.angles, shape, geom)
    return acc


def fim_ue_channel(
    paths: PathBundle, shape: SurfaceShape, geom: FimGeometry
) -> np.ndarray:
    """Baseband channel from the surface to the UE.

    The far face of the surface sees the opposite displacement, so the
    deformation vector enters negated.
    """
    _check_shape(shape, geom)
    flipped = SurfaceShape(-shape.d)
    acc = np.zeros(geom.n, dtype=complex)
    for path in paths.outbound:
        acc += path.gain * effective_steering(path.angles, flipped, geom)
    return acc


def bs_fim_channel_matrix(
    paths: PathBundle, shape: SurfaceShape, geom: FimGeometry, m: int
) -> np.ndarray:
    """N-by-M channel matrix from an M-antenna BS (half-wavelength ULA) to
    the surface: sum of rank-one products ``a(path) * a_ula(gamma)^H``."""
    if m < 1:
        raise ValueError("antenna count must be >= 1")
    _check_shape(shape, geom)
    acc = np.zeros((geom.n, m), dtype=complex)
    for path in paths.inbound:
        if path.bs_departure is None:
            raise ValueError("inbound path is missing its BS departure angle")
        steer = effective_steering(path.angles, shape, geom)
        acc += path.gain * np.outer(steer, np.conj(ula_steering(path.bs_departure, m)))
    return acc
