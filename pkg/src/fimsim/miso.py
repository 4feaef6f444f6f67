"""Transmit beamforming and the alternating optimization of the MISO link.

The joint problem over (beamformer, deformations, phases) is solved by
alternating two exact sub-steps: matched (full-power) beamforming for the
current surface, and the per-element deformation/phase update for the
current beamformer.  Both sub-steps never lower the gain, so the recorded
gain trace is non-decreasing and the loop stops once the per-iteration
increase falls below an absolute threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    FimGeometry,
    PathBundle,
    SurfaceShape,
    bs_fim_channel_matrix,
    fim_ue_channel,
)
from .gain import (
    ElementObjectives,
    PhaseProfile,
    beamformed_paths,
    cascaded_gain_miso,
    element_coefficients,
)
from .optimizers import default_config, element_seed, solve_elements

__all__ = [
    "DegenerateScenarioError",
    "Beamformer",
    "AlternatingConfig",
    "AlternatingResult",
    "mrt_weights",
    "mrt",
    "alternating_optimize",
]


class DegenerateScenarioError(RuntimeError):
    """The effective channel vanished; no beamforming direction exists."""


@dataclass(frozen=True)
class Beamformer:
    """Transmit weight vector with its power budget; ``||w||^2 <= power``."""

    w: np.ndarray
    power: float

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=complex).reshape(-1))
        used = float(np.vdot(self.w, self.w).real)
        if used > self.power * (1.0 + 1e-9):
            raise ValueError("beamformer exceeds the power budget")


@dataclass(frozen=True)
class AlternatingConfig:
    """Outer-loop controls plus the inner 1-D solver.

    ``epsilon`` is compared against the absolute (not relative) gain
    increase per outer iteration.  ``inner`` defaults to the chosen
    method's stock configuration; its seed is superseded by ``seed``.
    """

    max_iterations: int = 1000
    epsilon: float = 1e-4
    inner_method: str = "pso"
    inner: object = None
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("need at least one outer iteration")
        if self.inner is None:
            object.__setattr__(self, "inner", default_config(self.inner_method))


@dataclass(frozen=True)
class AlternatingResult:
    beamformer: Beamformer
    shape: SurfaceShape
    phases: PhaseProfile
    gain: float
    trace: np.ndarray
    iterations: int
    converged: bool


def mrt_weights(effective_row: np.ndarray, power: float) -> Beamformer:
    """Matched full-power weights for a row channel ``c``:
    ``w = sqrt(P) * c^H / ||c||``."""
    row = np.asarray(effective_row, dtype=complex).reshape(-1)
    norm = float(np.linalg.norm(row))
    if norm == 0.0:
        raise DegenerateScenarioError("effective channel is zero")
    return Beamformer(w=math.sqrt(power) * np.conj(row) / norm, power=power)


def mrt(
    paths: PathBundle,
    shape: SurfaceShape,
    phases: PhaseProfile,
    geom: FimGeometry,
    m: int,
    power: float,
) -> Beamformer:
    """Maximal ratio transmission for the current surface configuration.

    Achieves gain ``power * ||c||^2`` for the effective row channel
    ``c = h^H S G`` and always transmits at full power.
    """
    g_mat = bs_fim_channel_matrix(paths, shape, geom, m)
    h = fim_ue_channel(paths, shape, geom)
    row = (np.conj(phases.vector) * np.conj(h)) @ g_mat
    return mrt_weights(row, power)


def _shape_step(
    paths: PathBundle,
    geom: FimGeometry,
    w: np.ndarray,
    cfg: AlternatingConfig,
    round_: int,
) -> tuple[SurfaceShape, PhaseProfile]:
    """Optimize deformations and phases for a fixed beamformer.

    Folding the beamformer into the inbound path gains reduces each
    element's beamformed gain to the plain per-element objective of the
    folded bundle.
    """
    folded = beamformed_paths(paths, w)
    seeds = [element_seed(cfg.seed, n, round_) for n in range(geom.n)]
    d, _, _ = solve_elements(
        ElementObjectives(folded, geom), cfg.inner_method, cfg.inner, seeds
    )
    shape = SurfaceShape(d)
    # Aligning to the folded coefficients is the beamformed phase update:
    # the folded bundle's v equals u = diag(h^H) G w.
    phases = PhaseProfile.from_coefficients(element_coefficients(folded, shape, geom))
    return shape, phases


def alternating_optimize(
    paths: PathBundle,
    geom: FimGeometry,
    m: int,
    power: float,
    cfg: AlternatingConfig | None = None,
) -> AlternatingResult:
    """Jointly optimize beamformer, deformations, and phases.

    Starts from the unmorphed surface with phases aligned at d = 0, so the
    first trace entry is the rigid-surface matched-beamforming baseline and
    the improvement from morphing can be read directly off the trace.  If a
    stochastic inner solve happens to produce a worse surface than the
    current iterate, the current one is retained, keeping the trace
    monotone.
    """
    if not paths.has_bs_departures():
        raise ValueError("MISO optimization needs BS departure angles on all paths")
    cfg = cfg or AlternatingConfig()

    shape = SurfaceShape.zeros(geom)
    phases = PhaseProfile.from_coefficients(element_coefficients(paths, shape, geom))
    beam = mrt(paths, shape, phases, geom, m, power)
    gain = cascaded_gain_miso(paths, shape, phases, beam.w, geom)
    trace = [gain]

    iterations = 0
    converged = False
    for it in range(cfg.max_iterations):
        cand_shape, cand_phases = _shape_step(paths, geom, beam.w, cfg, round_=it)
        cand_gain = cascaded_gain_miso(paths, cand_shape, cand_phases, beam.w, geom)
        if cand_gain >= cascaded_gain_miso(paths, shape, phases, beam.w, geom):
            shape, phases = cand_shape, cand_phases
        beam = mrt(paths, shape, phases, geom, m, power)
        new_gain = cascaded_gain_miso(paths, shape, phases, beam.w, geom)
        trace.append(new_gain)
        iterations = it + 1
        if new_gain - gain < cfg.epsilon:
            gain = new_gain
            converged = True
            break
        gain = new_gain

    return AlternatingResult(
        beamformer=beam,
        shape=shape,
        phases=phases,
        gain=gain,
        trace=np.array(trace),
        iterations=iterations,
        converged=converged,
    )
