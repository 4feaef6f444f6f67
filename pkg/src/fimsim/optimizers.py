"""1-D deformation solvers and the whole-surface driver.

Three interchangeable solvers for ``max z(d)`` on ``[-d_max, d_max]``:
a bounded particle swarm, interval-partitioned gradient ascent, and a dense
grid reference.  All of them additionally evaluate ``d = 0`` and keep it when
it beats their own result, so an optimized morphing surface never scores
below the rigid (phase-only) configuration.

The N per-element problems of a surface are independent; the batch engines
run them side by side with one seeded random stream per element
(seed = base ^ element index), which keeps serial, batched, and parallel
execution bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import FimGeometry, PathBundle, SurfaceShape
from .gain import (
    ElementObjectives,
    PhaseProfile,
    cascaded_gain_siso,
    element_coefficients,
)

__all__ = [
    "PsoConfig",
    "MigdConfig",
    "GridConfig",
    "ScalarOptimum",
    "OptimizationResult",
    "element_seed",
    "pso_1d",
    "migd_1d",
    "grid_oracle",
    "optimize_surface_siso",
]

_MASK64 = (1 << 64) - 1
_ROUND_STRIDE = 0x9E3779B97F4A7C15  # one golden-ratio step per solver round


def element_seed(base: int, index: int, round_: int = 0) -> int:
    """Seed of the random stream owned by one element's 1-D solve.

    Round 0 is the plain ``base ^ index`` stream; later rounds (used by the
    alternating MISO loop) shift the base so streams never repeat.
    """
    mixed = (base + _ROUND_STRIDE * round_) & _MASK64
    return mixed ^ index


@dataclass(frozen=True)
class PsoConfig:
    """Swarm hyperparameters.

    ``cognitive`` scales the pull toward the swarm-wide best position and
    ``social`` the pull toward the particle's own best.  Velocities are
    clamped to ``|q| <= d_max`` to keep the swarm bounded on flat objectives.
    """

    particles: int = 20
    inertia: float = 0.8
    cognitive: float = 2.0
    social: float = 2.0
    iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.particles < 2:
            raise ValueError("need at least 2 particles")
        if self.iterations < 1:
            raise ValueError("need at least 1 iteration")
        if self.cognitive < 0.0 or self.social < 0.0:
            raise ValueError("acceleration coefficients must be nonnegative")


@dataclass(frozen=True)
class MigdConfig:
    """Multi-interval gradient-ascent hyperparameters.

    The search interval is split into ``intervals`` equal sub-intervals and
    each is climbed from its midpoint.  ``step_size`` is a length (default:
    one tenth of the sub-interval); moves go in the sign of the
    forward-difference gradient and the step halves whenever a move fails to
    improve.  ``probe`` is the finite-difference offset (default relative to
    d_max; geometry-aware callers pass wavelength * 1e-6).  ``seed`` is
    unused (the method is deterministic) and kept for config symmetry.
    """

    intervals: int = 50
    steps: int = 60
    step_size: float | None = None
    probe: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.intervals < 1:
            raise ValueError("need at least 1 interval")
        if self.steps < 1:
            raise ValueError("need at least 1 gradient step")
        if self.step_size is not None and self.step_size <= 0.0:
            raise ValueError("step_size must be positive")
        if self.probe is not None and self.probe <= 0.0:
            raise ValueError("probe must be positive")


@dataclass(frozen=True)
class GridConfig:
    points: int = 10_001

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("need at least 2 grid points")


@dataclass(frozen=True)
class ScalarOptimum:
    """Result of one 1-D solve: best position, its value, and the
    best-so-far history."""

    d: float
    value: float
    trace: np.ndarray


@dataclass(frozen=True)
class OptimizationResult:
    """Optimized surface: deformations, aligned phases, and the gain."""

    shape: SurfaceShape
    phases: PhaseProfile
    gain: float
    per_element_gains: np.ndarray
    trace: np.ndarray


def _inject_zero(evaluate, d_best, value_best):
    """Keep d = 0 wherever it beats the solver's candidate."""
    batch = d_best.shape[0]
    zero_val = evaluate(np.zeros((batch, 1)))[:, 0]
    take = zero_val > value_best
    return np.where(take, 0.0, d_best), np.where(take, zero_val, value_best)


def _pso_batch(evaluate, d_max, cfg: PsoConfig, seeds):
    """Particle swarm over a batch of independent 1-D problems.

    ``evaluate`` maps positions of shape (batch, particles) to values of the
    same shape.  Per-problem randomness comes from its own seeded stream so
    the batch is equivalent to solving the problems one at a time.
    """
    batch = len(seeds)
    if d_max < 0.0:
        raise ValueError("d_max must be >= 0")
    if d_max == 0.0:
        value = evaluate(np.zeros((batch, 1)))[:, 0]
        return np.zeros(batch), value, value[:, None].copy()

    q, t_max = cfg.particles, cfg.iterations
    rngs = [np.random.default_rng(s) for s in seeds]
    x = np.stack([r.uniform(-d_max, d_max, q) for r in rngs])
    vel = np.stack([r.uniform(-d_max / 2.0, d_max / 2.0, q) for r in rngs])
    rand = np.stack([r.random((t_max, 2, q)) for r in rngs])  # (batch, T, 2, Q)

    rows = np.arange(batch)
    fit = evaluate(x)
    own_x = x.copy()
    own_f = fit.copy()
    lead = np.argmax(fit, axis=1)
    best_x = x[rows, lead]
    best_f = fit[rows, lead]

    hist = np.empty((batch, t_max + 1))
    hist[:, 0] = best_f

    for t in range(t_max):
        r1 = rand[:, t, 0]
        r2 = rand[:, t, 1]
        vel = (
            cfg.inertia * vel
            + cfg.cognitive * r1 * (best_x[:, None] - x)
            + cfg.social * r2 * (own_x - x)
        )
        np.clip(vel, -d_max, d_max, out=vel)
        x = x + vel
        np.clip(x, -d_max, d_max, out=x)
        fit = evaluate(x)

        improved = fit > own_f
        own_f = np.where(improved, fit, own_f)
        own_x = np.where(improved, x, own_x)
        lead = np.argmax(own_f, axis=1)
        lead_f = own_f[rows, lead]
        better = lead_f > best_f
        best_f = np.where(better, lead_f, best_f)
        best_x = np.where(better, own_x[rows, lead], best_x)
        hist[:, t + 1] = best_f

    best_x, best_f = _inject_zero(evaluate, best_x, best_f)
    hist[:, -1] = best_f
    return best_x, best_f, hist


def _migd_batch(evaluate, d_max, cfg: MigdConfig, batch):
    """Per-interval hill climb over a batch of independent 1-D problems.

    Deterministic: every interval starts at its midpoint, moves by
    sign-of-gradient steps, and halves its step after a failed move.
    """
    if d_max < 0.0:
        raise ValueError("d_max must be >= 0")
    if d_max == 0.0:
        value = evaluate(np.zeros((batch, 1)))[:, 0]
        return np.zeros(batch), value, value[:, None].copy()

    delta = cfg.intervals
    edges = np.linspace(-d_max, d_max, delta + 1)
    lo, hi = edges[:-1], edges[1:]
    length = 2.0 * d_max / delta
    eta = cfg.step_size if cfg.step_size is not None else length / 10.0
    xi = cfg.probe if cfg.probe is not None else d_max * 1e-6

    x = np.broadcast_to((lo + hi) / 2.0, (batch, delta)).copy()
    f = evaluate(x)
    step = np.full((batch, delta), eta)
    rows = np.arange(batch)

    hist = np.empty((batch, cfg.steps + 1))
    hist[:, 0] = f.max(axis=1)

    for t in range(cfg.steps):
        # Forward difference; flips to backward at the global upper bound.
        probe_hi = np.minimum(x + xi, d_max)
        grad = (evaluate(probe_hi) - evaluate(probe_hi - xi)) / xi
        cand = np.clip(x + step * np.sign(grad), lo, hi)
        cand_f = evaluate(cand)
        accept = cand_f > f
        x = np.where(accept, cand, x)
        f = np.where(accept, cand_f, f)
        step = np.where(accept, step, step / 2.0)
        hist[:, t + 1] = f.max(axis=1)

    lead = np.argmax(f, axis=1)  # first max: ties resolve to the smaller d
    best_x = x[rows, lead]
    best_f = f[rows, lead]
    best_x, best_f = _inject_zero(evaluate, best_x, best_f)
    hist[:, -1] = best_f
    return best_x, best_f, hist


def _grid_batch(evaluate, d_max, points, batch, chunk=1 << 14):
    """Best point of a uniform grid (both endpoints included), evaluated in
    slabs to bound memory; ties resolve to the smallest d."""
    grid = np.linspace(-d_max, d_max, points)
    best_d = np.full(batch, grid[0])
    best_f = np.full(batch, -np.inf)
    rows = np.arange(batch)
    for start in range(0, points, chunk):
        block = grid[start : start + chunk]
        vals = evaluate(np.broadcast_to(block, (batch, block.size)))
        lead = np.argmax(vals, axis=1)
        lead_f = vals[rows, lead]
        better = lead_f > best_f
        best_d = np.where(better, block[lead], best_d)
        best_f = np.where(better, lead_f, best_f)
    return best_d, best_f


def _as_batch(objective):
    """Adapt a vectorized scalar objective f((S,)) to the (1, S) batch form."""

    def evaluate(d):
        return np.asarray(objective(d[0]))[None, :]

    return evaluate


def pso_1d(objective, d_max: float, cfg: PsoConfig | None = None) -> ScalarOptimum:
    """Swarm-search ``objective`` on ``[-d_max, d_max]``.

    ``objective`` must accept a 1-D array of positions and return the values
    elementwise.  Deterministic for a fixed ``cfg.seed``.
    """
    cfg = cfg or PsoConfig()
    d, value, hist = _pso_batch(_as_batch(objective), d_max, cfg, [cfg.seed])
    return ScalarOptimum(float(d[0]), float(value[0]), hist[0])


def migd_1d(objective, d_max: float, cfg: MigdConfig | None = None) -> ScalarOptimum:
    """Interval-partitioned gradient ascent on ``[-d_max, d_max]``; returns
    the best of the per-interval optima."""
    cfg = cfg or MigdConfig()
    d, value, hist = _migd_batch(_as_batch(objective), d_max, cfg, 1)
    return ScalarOptimum(float(d[0]), float(value[0]), hist[0])


def grid_oracle(objective, d_max: float, points: int) -> ScalarOptimum:
    """Exhaustive-search reference on a ``points``-long uniform grid
    including both endpoints; ties break toward the smallest d."""
    if points < 2:
        raise ValueError("need at least 2 grid points")
    grid = np.linspace(-d_max, d_max, points)
    vals = np.asarray(objective(grid))
    idx = int(np.argmax(vals))  # first max: smallest d wins ties
    return ScalarOptimum(float(grid[idx]), float(vals[idx]), np.maximum.accumulate(vals))


def default_config(method: str):
    if method == "pso":
        return PsoConfig()
    if method == "migd":
        return MigdConfig()
    if method == "grid":
        return GridConfig()
    raise ValueError(f"unknown method {method!r}")


def _resolve_migd(cfg: MigdConfig, geom: FimGeometry) -> MigdConfig:
    if cfg.probe is None:
        cfg = replace(cfg, probe=geom.wavelength * 1e-6)
    return cfg


def solve_elements(
    objectives: ElementObjectives,
    method: str,
    cfg,
    seeds,
):
    """Run one 1-D solver over every element of a surface.

    Returns ``(d, values, history)`` with one row per element; ``seeds``
    supplies the per-element random streams (ignored by the deterministic
    methods).
    """
    geom = objectives.geom
    evaluate = objectives.gains
    if method == "pso":
        return _pso_batch(evaluate, geom.d_max, cfg, seeds)
    if method == "migd":
        return _migd_batch(evaluate, geom.d_max, _resolve_migd(cfg, geom), geom.n)
    if method == "grid":
        d, value = _grid_batch(evaluate, geom.d_max, cfg.points, geom.n)
        d, value = _inject_zero(evaluate, d, value)
        return d, value, value[:, None].copy()
    raise ValueError(f"unknown method {method!r}")


def optimize_surface_siso(
    paths: PathBundle,
    geom: FimGeometry,
    method: str = "pso",
    cfg=None,
) -> OptimizationResult:
    """Maximize the SISO link gain over deformations and phases.

    Solves the N per-element problems independently with the chosen 1-D
    method, then aligns the phases to the optimized coefficients.  The
    returned gain never falls below the rigid-surface gain because every
    solver keeps the d = 0 candidate when it wins.
    """
    cfg = cfg if cfg is not None else default_config(method)
    base_seed = getattr(cfg, "seed", 0)
    seeds = [element_seed(base_seed, n) for n in range(geom.n)]
    objectives = ElementObjectives(paths, geom)
    d, values, hist = solve_elements(objectives, method, cfg, seeds)

    shape = SurfaceShape(d)
    coeffs = element_coefficients(paths, shape, geom)
    phases = PhaseProfile.from_coefficients(coeffs)
    gain = cascaded_gain_siso(paths, shape, phases, geom)
    trace = np.sqrt(hist).sum(axis=0) ** 2
    return OptimizationResult(
        shape=shape,
        phases=phases,
        gain=gain,
        per_element_gains=values,
        trace=trace,
    )
