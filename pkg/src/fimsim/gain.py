"""Cascaded channel gains, optimal phase profiles, and the per-element
decomposition that splits the surface-shaping problem into independent 1-D
problems.

With inbound channel ``g(d)`` and outbound channel ``h(d)``, the link gain
for a phase profile ``s`` is ``|s^H v(d)|^2`` where
``v(d) = diag(h(d)^H) g(d)``.  Each ``v_n`` depends on the deformation
vector only through its own entry ``d_n``, so maximizing the aligned gain
``(sum_n |v_n|)^2`` reduces to N scalar problems ``max |v_n(d_n)|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    FimGeometry,
    PathBundle,
    SurfaceShape,
    bs_fim_channel,
    bs_fim_channel_matrix,
    fim_ue_channel,
    ula_steering,
)

__all__ = [
    "PhaseProfile",
    "element_coefficients",
    "per_element_coefficient",
    "cascaded_gain_siso",
    "optimal_phases_siso",
    "PerElementObjective",
    "ElementObjectives",
    "per_element_gain",
    "per_element_gain_closed_form",
    "miso_element_coefficients",
    "cascaded_gain_miso",
    "optimal_phases_miso",
    "beamformed_paths",
    "per_element_gain_miso",
]

_TWO_PI = 2.0 * math.pi


def _wrap_two_pi(angles: np.ndarray) -> np.ndarray:
    wrapped = np.mod(angles, _TWO_PI)
    # np.mod can round a tiny negative input up to exactly 2*pi.
    return np.where(wrapped >= _TWO_PI, 0.0, wrapped)


@dataclass(frozen=True)
class PhaseProfile:
    """Unit-modulus configuration of the surface, stored as phases in
    ``[0, 2*pi)``; entry ``n`` of :attr:`vector` is ``exp(j*phases[n])``."""

    phases: np.ndarray

    def __post_init__(self):
        canonical = _wrap_two_pi(np.asarray(self.phases, dtype=float).reshape(-1))
        object.__setattr__(self, "phases", canonical)

    @classmethod
    def from_coefficients(cls, coefficients: np.ndarray) -> "PhaseProfile":
        """Profile aligned with the given complex coefficients.

        Entry ``n`` gets phase ``arg(c_n)``; zero coefficients get phase 0
        (any phase is optimal there).
        """
        return cls(np.angle(np.asarray(coefficients, dtype=complex)))

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "PhaseProfile":
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        if np.any(np.abs(np.abs(vec) - 1.0) > 1e-12):
            raise ValueError("phase profile entries must have unit modulus")
        return cls(np.angle(vec))

    @property
    def vector(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def __len__(self) -> int:
        return self.phases.size


def element_coefficients(
    paths: PathBundle, shape: SurfaceShape, geom: FimGeometry
) -> np.ndarray:
    """Per-element cascaded coefficients ``v = diag(h^H) g``."""
    return np.conj(fim_ue_channel(paths, shape, geom)) * bs_fim_channel(
        paths, shape, geom
    )


def per_element_coefficient(
    paths: PathBundle, shape: SurfaceShape, geom: FimGeometry, n: int
) -> complex:
    """Coefficient ``v_n = conj(h_n) * g_n``; depends on ``d`` only through
    ``d_n``."""
    if not 0 <= n < geom.n:
        raise IndexError(f"element index {n} out of range for N={geom.n}")
    return complex(element_coefficients(paths, shape, geom)[n])


def _profile_gain(phases: PhaseProfile, coefficients: np.ndarray) -> float:
    if len(phases) != coefficients.size:
        raise ValueError("phase profile length does not match element count")
    total = np.vdot(phases.vector, coefficients)
    return float(total.real**2 + total.imag**2)


def cascaded_gain_siso(
    paths: PathBundle,
    shape: SurfaceShape,
    phases: PhaseProfile,
    geom: FimGeometry,
) -> float:
    """End-to-end SISO link gain ``|s^H v(d)|^2``."""
    return _profile_gain(phases, element_coefficients(paths, shape, geom))


def optimal_phases_siso(
    paths: PathBundle, shape: SurfaceShape, geom: FimGeometry
) -> PhaseProfile:
    """Profile aligning every ``v_n``, achieving ``(sum_n |v_n|)^2``."""
    return PhaseProfile.from_coefficients(element_coefficients(paths, shape, geom))


def _path_factors(paths: PathBundle, geom: FimGeometry):
    """Factorize both channels per element.

    Returns ``(a_static, in_slopes, b_static, out_slopes)`` such that

        g_n(d) = sum_r a_static[n, r] * exp( 1j * in_slopes[r]  * d)
        h_n(d) = sum_k b_static[n, k] * exp(-1j * out_slopes[k] * d)

    ``*_static`` absorbs the path gain and the rigid-UPA phase of element n;
    the slopes are ``kappa*cos(theta)*cos(phi)`` per path.
    """
    iy, iz = geom.grid_indices()
    kappa = geom.wavenumber

    def factors(path_list):
        gains = np.array([p.gain for p in path_list], dtype=complex)
        theta = np.array([p.angles.theta for p in path_list])
        phi = np.array([p.angles.phi for p in path_list])
        sy = np.sin(theta) * np.cos(phi)
        sz = np.sin(phi)
        static = gains[None, :] * np.exp(
            1j * np.pi * (np.outer(iy, sy) + np.outer(iz, sz))
        )
        return static, kappa * np.cos(theta) * np.cos(phi)

    a_static, in_slopes = factors(paths.inbound)
    b_static, out_slopes = factors(paths.outbound)
    return a_static, in_slopes, b_static, out_slopes


class ElementObjectives:
    """Vectorized evaluation of every element's coefficient/gain at once.

    ``coefficients`` and ``gains`` accept deformations of shape ``(N,)`` or
    ``(N, S)`` (one row of candidate values per element) and return the same
    shape.
    """

    def __init__(self, paths: PathBundle, geom: FimGeometry):
        self.paths = paths
        self.geom = geom
        self._a, self._win, b, self._wout = _path_factors(paths, geom)
        self._b_conj = np.conj(b)

    def coefficients(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if d.shape[0] != self.geom.n:
            raise ValueError("first axis must index the elements")
        flat = d.ndim == 1
        cols = d[:, None] if flat else d  # (N, S)
        inbound = np.einsum(
            "nsr,nr->ns", np.exp(1j * cols[:, :, None] * self._win), self._a
        )
        conj_out = np.einsum(
            "nsk,nk->ns", np.exp(1j * cols[:, :, None] * self._wout), self._b_conj
        )
        v = conj_out * inbound
        return v[:, 0] if flat else v

    def gains(self, d: np.ndarray) -> np.ndarray:
        v = self.coefficients(d)
        return v.real**2 + v.imag**2

    def element(self, n: int) -> "PerElementObjective":
        return PerElementObjective(self.paths, self.geom, n)


class PerElementObjective:
    """Gain contribution ``z_n(d_n) = |v_n(d_n)|^2`` of a single element as a
    function of its own deformation; evaluable on scalars or arrays inside
    ``[-d_max, d_max]``."""

    def __init__(self, paths: PathBundle, geom: FimGeometry, n: int):
        if not 0 <= n < geom.n:
            raise IndexError(f"element index {n} out of range for N={geom.n}")
        self.paths = paths
        self.geom = geom
        self.n = n
        self.d_max = geom.d_max
        a, self._win, b, self._wout = _path_factors(paths, geom)
        self._a = a[n]
        self._b_conj = np.conj(b[n])

    def _check_bounds(self, d: np.ndarray) -> None:
        if np.any(np.abs(d) > self.d_max):
            raise ValueError("deformation exceeds the morphing bound d_max")

    def coefficient(self, d):
        d = np.asarray(d, dtype=float)
        self._check_bounds(d)
        inbound = np.exp(1j * np.multiply.outer(d, self._win)) @ self._a
        conj_out = np.exp(1j * np.multiply.outer(d, self._wout)) @ self._b_conj
        return conj_out * inbound

    def __call__(self, d):
        v = self.coefficient(d)
        return v.real**2 + v.imag**2


def per_element_gain(obj: PerElementObjective, d_n):
    """Direct evaluation of ``z_n(d_n) = |v_n(d_n)|^2`` (the authoritative
    objective for all optimizers)."""
    return obj(d_n)


def per_element_gain_closed_form(
    obj: PerElementObjective, d_n, swap_axes: bool = False
):
    """``z_n`` as an explicit sum of ``2*K^2*R^2`` cosines.

    Only valid for real, nonnegative path gains; complex-gain scenarios must
    use :func:`per_element_gain`.  ``swap_axes`` attaches the y-axis index to
    the elevation-sine differences and the z-axis index to the
    azimuth-projection differences (the transposed layout); the default
    attachment is the one consistent with the steering-vector construction.
    """
    paths, geom, n = obj.paths, obj.geom, obj.n
    a = np.array([p.gain for p in paths.inbound], dtype=complex)
    b = np.array([p.gain for p in paths.outbound], dtype=complex)
    for gains in (a, b):
        if np.any(gains.imag != 0.0) or np.any(gains.real < 0.0):
            raise ValueError("closed form requires real nonnegative path gains")
    a = a.real
    b = b.real

    iy, iz = divmod(n, geom.n_z)
    if swap_axes:
        iy, iz = iz, iy

    def phase_terms(path_list, sign):
        theta = np.array([p.angles.theta for p in path_list])
        phi = np.array([p.angles.phi for p in path_list])
        sy = np.sin(theta) * np.cos(phi)
        sz = np.sin(phi)
        slope = sign * geom.wavenumber * np.cos(theta) * np.cos(phi)
        offset = np.pi * (iy * sy + iz * sz)
        return (
            slope[:, None] - slope[None, :],
            offset[:, None] - offset[None, :],
        )

    f_slope, f_offset = phase_terms(paths.inbound, +1.0)
    t_slope, t_offset = phase_terms(paths.outbound, -1.0)

    d = np.asarray(d_n, dtype=float)
    obj._check_bounds(d)
    f = d[..., None, None] * f_slope + f_offset  # (..., R, R)
    t = d[..., None, None] * t_slope + t_offset  # (..., K, K)
    fr = f[..., :, :, None, None]
    tk = t[..., None, None, :, :]
    coeff = np.einsum("r,s,k,l->rskl", a, a, b, b)
    total = np.einsum(
        "rskl,...rskl->...", coeff, np.cos(fr + tk) + np.cos(fr - tk)
    )
    return 0.5 * total


def miso_element_coefficients(
    paths: PathBundle, shape: SurfaceShape, w: np.ndarray, geom: FimGeometry
) -> np.ndarray:
    """Per-element coefficients ``u = diag(h^H) G w`` seen by a beamformed
    multi-antenna transmitter."""
    w = np.asarray(w, dtype=complex).reshape(-1)
    g_mat = bs_fim_channel_matrix(paths, shape, geom, w.size)
    return np.conj(fim_ue_channel(paths, shape, geom)) * (g_mat @ w)


def cascaded_gain_miso(
    paths: PathBundle,
    shape: SurfaceShape,
    phases: PhaseProfile,
    w: np.ndarray,
    geom: FimGeometry,
) -> float:
    """End-to-end MISO link gain ``|s^H u(d, w)|^2`` = ``|h^H S G w|^2``."""
    return _profile_gain(phases, miso_element_coefficients(paths, shape, w, geom))


def optimal_phases_miso(
    paths: PathBundle, shape: SurfaceShape, w: np.ndarray, geom: FimGeometry
) -> PhaseProfile:
    """Profile aligning every ``u_n``, achieving ``(sum_n |u_n|)^2``."""
    return PhaseProfile.from_coefficients(
        miso_element_coefficients(paths, shape, w, geom)
    )


def beamformed_paths(paths: PathBundle, w: np.ndarray) -> PathBundle:
    """Fold a transmit beamformer into the inbound path gains.

    Path r's gain is scaled by ``a_ula(gamma_r)^H w``, after which the
    multi-antenna channel ``G w`` equals the single-antenna channel of the
    returned bundle.  Requires every inbound path to carry its BS departure
    angle.
    """
    w = np.asarray(w, dtype=complex).reshape(-1)
    scaled = []
    for path in paths.inbound:
        if path.bs_departure is None:
            raise ValueError("inbound path is missing its BS departure angle")
        weight = np.vdot(ula_steering(path.bs_departure, w.size), w)
        scaled.append(
            type(path)(
                gain=complex(path.gain * weight),
                angles=path.angles,
                bs_departure=path.bs_departure,
            )
        )
    return PathBundle(inbound=tuple(scaled), outbound=paths.outbound)


def per_element_gain_miso(obj: PerElementObjective, d_n, w: np.ndarray):
    """Beamformed per-element gain ``o_n(d_n, w) = |u_n(d_n)|^2``."""
    scaled = PerElementObjective(beamformed_paths(obj.paths, w), obj.geom, obj.n)
    return scaled(d_n)
