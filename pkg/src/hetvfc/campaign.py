"""Seeded multi-seed, multi-slot experiment campaigns and their CSV output."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import (
    BaselineResult,
    EsConfig,
    SwarmConfig,
    cmaes_optimize,
    grid_oracle,
    lc_baseline,
    pso_optimize,
    rbmm_method,
)
from .channel import build_channel_state
from .config import SWEEP_ALIASES, ExperimentConfig, get_field, sweep_points
from .convex_core import OffloadInstance
from .phy import aggregate_rates, assign_subchannels
from .scenario import EmptySlot, SlotScenario, draw_tasks, generate_vehicles, step_mobility

__all__ = [
    "ResultRow",
    "PartitionRow",
    "TraceRow",
    "CampaignResult",
    "slot_sequence",
    "build_slot",
    "slot_instance",
    "run_method",
    "run_campaign",
    "emit_csv",
    "write_outputs",
]

log = logging.getLogger(__name__)
NAN = float("nan")


@dataclass
class ResultRow:
    seed: int
    slot: int
    method: str
    sweep: dict  # field -> value, one CSV column per field
    U: int
    V: int
    avg_tpd: float
    max_tpd: float
    avg_lc_delay: float
    avg_offload_delay: float
    avg_local_share: float
    iterations: int
    status: str


@dataclass
class PartitionRow:
    seed: int
    slot: int
    method: str
    sweep: dict
    tv: int
    local_share: float
    offload_share: float
    branches: int  # number of SVs with a positive share
    tpd: float


@dataclass
class TraceRow:
    seed: int
    slot: int
    method: str
    sweep: dict
    iteration: int
    avg_tpd: float
    max_tpd: float
    avg_lc_delay: float
    avg_offload_delay: float
    residual_sum: float
    objective: float
    status: str


@dataclass
class CampaignResult:
    results: list[ResultRow] = field(default_factory=list)
    partitions: list[PartitionRow] = field(default_factory=list)
    traces: list[TraceRow] = field(default_factory=list)

    def extend(self, other: "CampaignResult") -> None:
        self.results += other.results
        self.partitions += other.partitions
        self.traces += other.traces


# -- one slot --------------------------------------------------------------

def slot_sequence(cfg: ExperimentConfig, seed: int):
    """Vehicle lists of consecutive slots; mobility runs on a ring road between them."""
    sc = cfg.scenario
    idm = sc.idm.params()
    vehicles = generate_vehicles(sc.lanes, sc.road_length, sc.density, seed, lane_width=sc.lane_width,
                                 width=sc.width, length=sc.length, compute=sc.compute, idm=idm)
    steps = max(1, round(sc.slot_length / sc.mobility_dt))
    dt = sc.slot_length / steps
    for slot in range(sc.slots):
        yield slot, vehicles
        for _ in range(steps):
            vehicles = step_mobility(vehicles, dt, idm, ring_length=sc.road_length)


def build_slot(cfg: ExperimentConfig, vehicles, seed: int, slot: int):
    """Scenario and aggregate link rates of one slot."""
    sc = cfg.scenario
    scenario = draw_tasks(vehicles, sc.arrival_rate, sc.slot_length, sc.size_range_bits, sc.intensity, seed, slot)
    phy = cfg.phy.params()
    cs = build_channel_state(scenario, cfg.channel.params(), n_rf=phy.n_rf)
    rates = aggregate_rates(assign_subchannels(cs, scenario, phy), cs)
    return scenario, rates


def slot_instance(cfg: ExperimentConfig, scenario: SlotScenario, rate) -> OffloadInstance:
    """Optimizer input for one slot; without a deadline the slot length is infinite."""
    lam = scenario.slot_length if cfg.solver.deadline else math.inf
    return OffloadInstance(scenario.rho, scenario.kappa, scenario.tv_compute, scenario.sv_compute, rate, lam)


def run_method(method: str, cfg: ExperimentConfig, scenario: SlotScenario, rates, seed: int) -> BaselineResult:
    solver = cfg.solver.params()
    bl = cfg.baselines
    inst = slot_instance(cfg, scenario, rates.total)
    if method == "rbmm":
        return rbmm_method(inst, None, solver)
    if method == "vlc_only":
        return rbmm_method(slot_instance(cfg, scenario, rates.R), None, solver, "vlc_only")
    if method == "rf_only":
        return rbmm_method(slot_instance(cfg, scenario, rates.S), None, solver, "rf_only")
    if method == "lc":
        return lc_baseline(inst)
    if method == "pso":
        conf = SwarmConfig(bl.pso_particles, bl.pso_iterations, bl.pso_inertia, bl.pso_cognitive, bl.pso_social,
                           temperature=bl.temperature, seed=seed, start_from_init=bl.start_from_init)
        return pso_optimize(inst, None, conf)
    if method == "cmaes":
        conf = EsConfig(bl.cmaes_population, bl.cmaes_sigma0, bl.cmaes_evaluations, temperature=bl.temperature,
                        seed=seed, start_from_init=bl.start_from_init)
        return cmaes_optimize(inst, None, conf)
    if method == "oracle":
        try:
            return grid_oracle(inst, None, bl.oracle_resolution, refine=True)
        except ValueError as exc:
            log.info("oracle skipped: %s", exc)
            return BaselineResult("oracle", None, None, None, 0.0, "skipped")
    raise ValueError(f"unknown method {method!r}")


def _slot_rows(cfg, sweep: dict, seed: int, slot: int, vehicles) -> CampaignResult:
    out = CampaignResult()
    try:
        scenario, rates = build_slot(cfg, vehicles, seed, slot)
    except EmptySlot:
        for m in cfg.methods:
            out.results.append(ResultRow(seed, slot, m, sweep, 0, 0, NAN, NAN, NAN, NAN, NAN, 0, "empty"))
        return out
    inst = slot_instance(cfg, scenario, rates.total)
    try:
        inst.check_structure()
        structural = ""
    except ValueError as exc:
        structural = str(exc)
    for m in cfg.methods:
        if structural and m != "lc":
            log.info("seed %d slot %d: %s", seed, slot, structural)
            res = BaselineResult(m, None, None, None, 0.0, "infeasible")
        else:
            res = run_method(m, cfg, scenario, rates, seed)
        rep = res.report
        if rep is None:
            out.results.append(ResultRow(seed, slot, m, sweep, scenario.U, scenario.V, NAN, NAN, NAN, NAN, NAN,
                                         res.iterations, res.status))
        else:
            local = res.M[scenario.V]
            out.results.append(ResultRow(seed, slot, m, sweep, scenario.U, scenario.V, rep.avg_tpd, rep.max_tpd,
                                         rep.avg_lc_delay, rep.avg_offload_delay, float(local.mean()),
                                         res.iterations, res.status))
            for j, u in enumerate(scenario.tvs):
                out.partitions.append(PartitionRow(seed, slot, m, sweep, u, float(local[j]), float(1 - local[j]),
                                                   int((res.M[: scenario.V, j] > 1e-6).sum()), float(rep.tpd[j])))
        trace = res.extra.get("trace")
        if trace is not None:
            for r in trace.rows():
                out.traces.append(TraceRow(seed, slot, m, sweep, r["iteration"], r["avg_tpd"], r["max_tpd"],
                                           r["avg_lc_delay"], r["avg_offload_delay"], r["residual_sum"],
                                           r["objective"], r["status"]))
    return out


def _unit(args) -> CampaignResult:
    cfg, sweep, seed = args
    out = CampaignResult()
    for slot, vehicles in slot_sequence(cfg, seed):
        out.extend(_slot_rows(cfg, sweep, seed, slot, vehicles))
    return out


def run_campaign(cfg: ExperimentConfig, jobs: int | None = None) -> CampaignResult:
    """Every method on every (sweep point, seed, slot); rows in that order."""
    units = []
    for _, point in sweep_points(cfg):
        sweep = {axis.field: value for axis, value in zip(cfg.sweep, _axis_values(cfg, point))}
        units += [(point, sweep, seed) for seed in cfg.seeds]
    jobs = cfg.jobs if jobs is None else jobs
    out = CampaignResult()
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_unit, units))  # map keeps submission order
    else:
        parts = [_unit(u) for u in units]
    for p in parts:
        out.extend(p)
    return out


def _axis_values(cfg: ExperimentConfig, point: ExperimentConfig) -> list[float]:
    return [float(get_field(point, SWEEP_ALIASES.get(axis.field, (axis.field,))[0])) for axis in cfg.sweep]


# -- CSV -------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else f"{float(value):.9f}"
    return str(value)


def emit_csv(rows, path: str | Path) -> Path:
    """Header plus one line per row with a fixed column order and fixed decimals.

    Dict-valued fields (the sweep point) expand into one column per key.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("emit_csv needs at least one row")
    names = [f.name for f in dataclasses.fields(rows[0])]
    header, getters = [], []
    for name in names:
        first = getattr(rows[0], name)
        if isinstance(first, dict):
            for key in first:
                header.append(key)
                getters.append(lambda r, n=name, k=key: getattr(r, n)[k])
        else:
            header.append(name)
            getters.append(lambda r, n=name: getattr(r, n))
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(g(r)) for g in getters])
    return path


def write_outputs(result: CampaignResult, out_dir: str | Path) -> list[Path]:
    """``results.csv`` plus ``partitions.csv`` and ``trace.csv`` when non-empty."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [emit_csv(result.results, out_dir / "results.csv")]
    if result.partitions:
        written.append(emit_csv(result.partitions, out_dir / "partitions.csv"))
    if result.traces:
        written.append(emit_csv(result.traces, out_dir / "trace.csv"))
    return written
