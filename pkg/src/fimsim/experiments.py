"""Monte Carlo campaigns over sampled scenarios, with reproducible tables.

Every campaign is a pure function of (config, base seed): trial i uses seed
``base + i``, the same channel realization is reused across compared arms
(morphing ranges, methods, rigid baseline), and trials merge in seed order,
so output bytes do not depend on the worker count.
"""

from __future__ import annotations

import functools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .channel import SurfaceShape
from .gain import ElementObjectives, cascaded_gain_siso, optimal_phases_siso
from .miso import AlternatingConfig, DegenerateScenarioError, alternating_optimize
from .optimizers import (
    GridConfig,
    MigdConfig,
    PsoConfig,
    element_seed,
    optimize_surface_siso,
    solve_elements,
)
from .scenarios import ScenarioConfig, sample_scenario
from .version import __version__

__all__ = [
    "OptimizerConfig",
    "TrialRecord",
    "Table",
    "HyperSweep",
    "run_trial",
    "run_trials",
    "run_element_landscape",
    "run_gain_vs_dmax",
    "run_gain_vs_paths",
    "run_hyperparameter_sweep",
    "run_convergence_traces",
    "write_csv",
    "write_json",
    "write_table",
    "render_table",
]

_MASK64 = (1 << 64) - 1
# Keeps optimizer streams disjoint from the channel-sampling stream of the
# same trial seed (element 0's stream would otherwise replay the sampler's).
_OPT_SEED_OFFSET = 0x5DEECE66D


def _optimizer_seed(trial_seed: int) -> int:
    return (trial_seed + _OPT_SEED_OFFSET) & _MASK64


@dataclass(frozen=True)
class OptimizerConfig:
    """All solver settings of a campaign in one place."""

    pso: PsoConfig = PsoConfig()
    migd: MigdConfig = MigdConfig()
    grid: GridConfig = GridConfig()
    max_outer_iterations: int = 1000
    epsilon: float = 1e-4

    def for_method(self, method: str):
        if method == "pso":
            return self.pso
        if method == "migd":
            return self.migd
        if method == "grid":
            return self.grid
        raise ValueError(f"unknown method {method!r}")


def _seeded(cfg, seed: int):
    return replace(cfg, seed=seed) if hasattr(cfg, "seed") else cfg


def _alternating_config(opt: OptimizerConfig, method: str, seed: int) -> AlternatingConfig:
    return AlternatingConfig(
        max_iterations=opt.max_outer_iterations,
        epsilon=opt.epsilon,
        inner_method=method,
        inner=_seeded(opt.for_method(method), seed),
        seed=seed,
    )


@dataclass
class TrialRecord:
    """One channel realization, optimized every way we compare."""

    seed: int
    d_max: float
    gains: dict
    iterations: dict
    wall_time: float


def run_trial(
    cfg: ScenarioConfig,
    seed: int,
    methods=("pso", "migd", "grid"),
    opt: OptimizerConfig | None = None,
) -> TrialRecord:
    """Optimize one sampled scenario with every requested method plus the
    rigid (d_max = 0) baseline, reusing the same realization throughout."""
    opt = opt or OptimizerConfig()
    start = time.perf_counter()
    bundle = sample_scenario(cfg, seed)
    opt_seed = _optimizer_seed(seed)

    gains = {}
    iterations = {}
    geom0 = cfg.geometry(0.0)
    flat = SurfaceShape.zeros(geom0)
    gains["rigid"] = cascaded_gain_siso(
        bundle, flat, optimal_phases_siso(bundle, flat, geom0), geom0
    )
    iterations["rigid"] = 0
    for method in methods:
        res = optimize_surface_siso(
            bundle, cfg.geometry(), method, _seeded(opt.for_method(method), opt_seed)
        )
        gains[method] = res.gain
        iterations[method] = len(res.trace) - 1
    return TrialRecord(
        seed=seed,
        d_max=cfg.d_max,
        gains=gains,
        iterations=iterations,
        wall_time=time.perf_counter() - start,
    )


def run_trials(fn, seeds, workers: int = 1) -> list:
    """Map a trial function over seeds, serially or on a process pool;
    results always come back in seed order."""
    if workers <= 1:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))


# ---------------------------------------------------------------------------
# tables


@dataclass
class Table:
    columns: tuple
    rows: list
    metadata: dict


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _json_value(value):
    if isinstance(value, float):
        return float(f"{value:.12g}")
    return value


def write_csv(table: Table, stream) -> None:
    for key, value in table.metadata.items():
        stream.write(f"# {key}: {_fmt(value)}\n")
    stream.write(",".join(table.columns) + "\n")
    for row in table.rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(table: Table, stream) -> None:
    doc = {
        "metadata": {k: _json_value(v) for k, v in table.metadata.items()},
        "columns": list(table.columns),
        "rows": [[_json_value(v) for v in row] for row in table.rows],
    }
    json.dump(doc, stream, indent=2)
    stream.write("\n")


def render_table(table: Table, fmt: str = "csv") -> str:
    import io

    buf = io.StringIO()
    if fmt == "csv":
        write_csv(table, buf)
    elif fmt == "json":
        write_json(table, buf)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return buf.getvalue()


def write_table(table: Table, fmt: str = "csv", path=None) -> None:
    text = render_table(table, fmt)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _metadata(command: str, cfg: ScenarioConfig, seed: int, **extra) -> dict:
    md = {"tool": f"fimsim {__version__}", "command": command, "seed": seed}
    md.update(extra)
    for f_ in fields(cfg):
        if f_.init:
            md[f_.name] = getattr(cfg, f_.name)
    return md


# ---------------------------------------------------------------------------
# campaigns


def run_element_landscape(
    cfg: ScenarioConfig,
    seed: int = 0,
    points: int = 401,
    opt: OptimizerConfig | None = None,
) -> Table:
    """Tabulate every element's gain over a deformation grid and mark each
    solver's optimum alongside."""
    opt = opt or OptimizerConfig()
    bundle = sample_scenario(cfg, seed)
    geom = cfg.geometry()
    objectives = ElementObjectives(bundle, geom)
    opt_seed = _optimizer_seed(seed)
    seeds = [element_seed(opt_seed, n) for n in range(geom.n)]

    grid = np.linspace(-geom.d_max, geom.d_max, points)
    curve = objectives.gains(np.broadcast_to(grid, (geom.n, points)))
    marks = {
        method: solve_elements(
            objectives, method, _seeded(opt.for_method(method), opt_seed), seeds
        )
        for method in ("pso", "migd", "grid")
    }

    rows = []
    for n in range(geom.n):
        for i in range(points):
            rows.append(
                (
                    n,
                    float(grid[i]),
                    float(curve[n, i]),
                    float(marks["pso"][0][n]),
                    float(marks["pso"][1][n]),
                    float(marks["migd"][0][n]),
                    float(marks["migd"][1][n]),
                    float(marks["grid"][0][n]),
                    float(marks["grid"][1][n]),
                )
            )
    columns = (
        "element",
        "d",
        "gain",
        "pso_d",
        "pso_gain",
        "migd_d",
        "migd_gain",
        "grid_d",
        "grid_gain",
    )
    md = _metadata("landscape", cfg, seed, points=points, oracle_points=opt.grid.points)
    return Table(columns=columns, rows=rows, metadata=md)


def _dmax_trial(seed, cfg, dmax_values, methods, opt, strict):
    bundle = sample_scenario(cfg, seed)
    opt_seed = _optimizer_seed(seed)
    gains = {}
    for d_max in dmax_values:
        geom = cfg.geometry(d_max)
        for method in methods:
            mcfg = _seeded(opt.for_method(method), opt_seed)
            res = optimize_surface_siso(bundle, geom, method, mcfg)
            gains[(d_max, method, "siso")] = res.gain
            if cfg.bs_antennas > 1:
                try:
                    ares = alternating_optimize(
                        bundle,
                        geom,
                        cfg.bs_antennas,
                        cfg.tx_power_watts,
                        _alternating_config(opt, method, opt_seed),
                    )
                    gains[(d_max, method, "miso")] = ares.gain / cfg.tx_power_watts
                except DegenerateScenarioError:
                    if strict:
                        raise
                    gains[(d_max, method, "miso")] = 0.0
    return gains


def _summary_rows(per_trial, keys):
    rows = []
    for key, label in keys:
        values = np.array([t[key] for t in per_trial])
        rows.append((*label, float(values.mean()), float(values.std()), len(values)))
    return rows


def run_gain_vs_dmax(
    cfg: ScenarioConfig,
    trials: int,
    dmax_grid=None,
    methods=("pso",),
    seed: int = 0,
    workers: int = 1,
    opt: OptimizerConfig | None = None,
    strict: bool = False,
) -> Table:
    """Mean optimized gain versus morphing range, paired across arms.

    The grid always contains d_max = 0 (the rigid baseline anchor).  When the
    scenario has several BS antennas, a beamformed arm is run as well and its
    gain is reported divided by the transmit power.
    """
    opt = opt or OptimizerConfig()
    if dmax_grid is None:
        dmax_grid = [i * 0.5 * cfg.wavelength for i in range(7)]
    dmax_values = tuple(float(d) for d in dmax_grid)
    if not any(d == 0.0 for d in dmax_values):
        dmax_values = (0.0,) + dmax_values

    fn = functools.partial(
        _dmax_trial,
        cfg=cfg,
        dmax_values=dmax_values,
        methods=tuple(methods),
        opt=opt,
        strict=strict,
    )
    seeds = [seed + i for i in range(trials)]
    per_trial = run_trials(fn, seeds, workers)

    links = ("siso", "miso") if cfg.bs_antennas > 1 else ("siso",)
    keys = [
        ((d, m, link), (d, m, link))
        for d in dmax_values
        for m in methods
        for link in links
    ]
    rows = _summary_rows(per_trial, keys)
    columns = ("d_max", "method", "link", "mean_gain", "std_gain", "trials")
    md = _metadata(
        "gain-vs-dmax",
        cfg,
        seed,
        trials=trials,
        trial_seeds=f"{seed}..{seed + trials - 1}",
        methods=",".join(methods),
        workers=workers,
    )
    return Table(columns=columns, rows=rows, metadata=md)


def _paths_trial(seed, cfg, r_values, method, opt, strict):
    opt_seed = _optimizer_seed(seed)
    gains = {}
    for r in r_values:
        cfg_r = replace(cfg, inbound_paths=r)
        bundle = sample_scenario(cfg_r, seed)
        geom = cfg_r.geometry()
        res = optimize_surface_siso(
            bundle, geom, method, _seeded(opt.for_method(method), opt_seed)
        )
        gains[(r, "siso")] = res.gain
        if cfg.bs_antennas > 1:
            try:
                ares = alternating_optimize(
                    bundle,
                    geom,
                    cfg.bs_antennas,
                    cfg.tx_power_watts,
                    _alternating_config(opt, method, opt_seed),
                )
                gains[(r, "miso")] = ares.gain / cfg.tx_power_watts
            except DegenerateScenarioError:
                if strict:
                    raise
                gains[(r, "miso")] = 0.0
    return gains


def run_gain_vs_paths(
    cfg: ScenarioConfig,
    trials: int,
    r_grid=(1, 2, 3, 4, 5),
    method: str = "pso",
    seed: int = 0,
    workers: int = 1,
    opt: OptimizerConfig | None = None,
    strict: bool = False,
) -> Table:
    """Mean optimized gain versus the inbound path count, other parameters
    fixed; the same trial seeds are reused for every count."""
    opt = opt or OptimizerConfig()
    r_values = tuple(int(r) for r in r_grid)

    import functools

    fn = functools.partial(
        _paths_trial,
        cfg=cfg,
        r_values=r_values,
        method=method,
        opt=opt,
        strict=strict,
    )
    seeds = [seed + i for i in range(trials)]
    per_trial = run_trials(fn, seeds, workers)

    links = ("siso", "miso") if cfg.bs_antennas > 1 else ("siso",)
    keys = [((r, link), (r, method, link)) for r in r_values for link in links]
    rows = _summary_rows(per_trial, keys)
    columns = ("paths_in", "method", "link", "mean_gain", "std_gain", "trials")
    md = _metadata(
        "gain-vs-paths",
        cfg,
        seed,
        trials=trials,
        trial_seeds=f"{seed}..{seed + trials - 1}",
        method=method,
        workers=workers,
    )
    return Table(columns=columns, rows=rows, metadata=md)


@dataclass(frozen=True)
class HyperSweep:
    """Sweep spec: which solver knob to grow, over which morphing ranges.

    ``parameter`` is ``migd-intervals`` or ``pso-particles``.  A setting is
    sufficient at a morphing range when at least ``success_fraction`` of the
    sampled per-element problems reach the grid-oracle value within
    ``tolerance`` (relative).
    """

    parameter: str
    values: tuple
    dmax_grid: tuple
    tolerance: float = 1e-3
    elements: int = 100
    success_fraction: float = 0.95

    def __post_init__(self):
        if self.parameter not in ("migd-intervals", "pso-particles"):
            raise ValueError("parameter must be migd-intervals or pso-particles")
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        object.__setattr__(self, "dmax_grid", tuple(float(d) for d in self.dmax_grid))


def _sweep_solver_cfg(sweep: HyperSweep, opt: OptimizerConfig, value: int, seed: int):
    if sweep.parameter == "migd-intervals":
        return "migd", replace(opt.migd, intervals=value, seed=seed)
    return "pso", replace(opt.pso, particles=value, seed=seed)


def run_hyperparameter_sweep(
    cfg: ScenarioConfig,
    sweep: HyperSweep,
    seed: int = 0,
    opt: OptimizerConfig | None = None,
) -> Table:
    """Smallest solver setting that still matches the grid oracle, per
    morphing range.  ``minimal_value`` is -1 when no swept value suffices."""
    opt = opt or OptimizerConfig()
    rows = []
    for d_max in sweep.dmax_grid:
        geom = cfg.geometry(d_max)
        scenario_count = math.ceil(sweep.elements / geom.n)

        objective_sets = []
        oracle_vals = []
        for j in range(scenario_count):
            bundle = sample_scenario(cfg, seed + j)
            objectives = ElementObjectives(bundle, geom)
            _, oracle, _ = solve_elements(objectives, "grid", opt.grid, None)
            objective_sets.append(objectives)
            oracle_vals.append(oracle)
        oracle_vals = np.concatenate(oracle_vals)[: sweep.elements]

        minimal = -1
        rate_at_minimal = 0.0
        for value in sorted(sweep.values):
            achieved = []
            for j, objectives in enumerate(objective_sets):
                base = _optimizer_seed(seed + j)
                method, mcfg = _sweep_solver_cfg(sweep, opt, value, base)
                seeds = [element_seed(base, n) for n in range(geom.n)]
                _, vals, _ = solve_elements(objectives, method, mcfg, seeds)
                achieved.append(vals)
            achieved = np.concatenate(achieved)[: sweep.elements]
            if math.isinf(sweep.tolerance):
                hit = np.ones_like(achieved, dtype=bool)
            else:
                hit = achieved >= oracle_vals * (1.0 - sweep.tolerance)
            rate = float(hit.mean())
            rate_at_minimal = rate
            if rate >= sweep.success_fraction:
                minimal = value
                break
        rows.append((sweep.parameter, float(d_max), minimal, rate_at_minimal))

    columns = ("parameter", "d_max", "minimal_value", "success_rate")
    md = _metadata(
        "hyperparam",
        cfg,
        seed,
        parameter=sweep.parameter,
        values=",".join(str(v) for v in sweep.values),
        tolerance=sweep.tolerance,
        elements=sweep.elements,
        success_fraction=sweep.success_fraction,
        oracle_points=opt.grid.points,
    )
    return Table(columns=columns, rows=rows, metadata=md)


def run_convergence_traces(
    cfg: ScenarioConfig,
    trials: int,
    seed: int = 0,
    method: str = "pso",
    opt: OptimizerConfig | None = None,
    strict: bool = False,
) -> Table:
    """Per-iteration gain traces of the alternating MISO optimizer, one
    block of rows per trial seed."""
    opt = opt or OptimizerConfig()
    rows = []
    for i in range(trials):
        trial_seed = seed + i
        bundle = sample_scenario(cfg, trial_seed)
        try:
            res = alternating_optimize(
                bundle,
                cfg.geometry(),
                cfg.bs_antennas,
                cfg.tx_power_watts,
                _alternating_config(opt, method, _optimizer_seed(trial_seed)),
            )
        except DegenerateScenarioError:
            if strict:
                raise
            rows.append((trial_seed, 0, 0.0, 0))
            continue
        for it, gain in enumerate(res.trace):
            rows.append((trial_seed, it, float(gain), int(res.converged)))
    columns = ("seed", "iteration", "gain", "converged")
    md = _metadata(
        "converge",
        cfg,
        seed,
        trials=trials,
        trial_seeds=f"{seed}..{seed + trials - 1}",
        method=method,
        epsilon=opt.epsilon,
        max_outer_iterations=opt.max_outer_iterations,
    )
    return Table(columns=columns, rows=rows, metadata=md)
