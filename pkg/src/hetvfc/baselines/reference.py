"""Local computing and single-medium offloading."""

from __future__ import annotations

import time

import numpy as np

from ..convex_core import OffloadInstance
from ..phy import RateTable
from ..rbmm import RbmmConfig, evaluate, run_instance
from .common import BaselineResult, as_instance

__all__ = ["lc_baseline", "single_medium_baseline", "rbmm_method"]


def lc_baseline(scenario) -> BaselineResult:
    """Every TV computes its whole task itself; links play no role."""
    t = time.perf_counter()
    if isinstance(scenario, OffloadInstance):
        inst = scenario
    else:
        inst = OffloadInstance(scenario.rho, scenario.kappa, scenario.tv_compute, scenario.sv_compute,
                               np.zeros((scenario.V, scenario.U)), scenario.slot_length)
    M = np.zeros((inst.V + 1, inst.U))
    M[inst.V] = 1.0
    F = np.zeros((inst.V, inst.U))
    report = evaluate(inst, M, F)
    status = "ok" if (report.tpd <= inst.slot_length).all() else "late"
    return BaselineResult("lc", M, F, report, time.perf_counter() - t, status)


def rbmm_method(scenario, rates: RateTable, config: RbmmConfig = RbmmConfig(), method: str = "rbmm") -> BaselineResult:
    t = time.perf_counter()
    inst = as_instance(scenario, rates)
    res = run_instance(inst, config)
    report = evaluate(inst, res.M, res.F) if res.feasible else None
    return BaselineResult(method, res.M, res.F, report, time.perf_counter() - t, res.status, res.iterations,
                          {"trace": res.trace, "violated": res.violated, "raw": res.raw})


def single_medium_baseline(scenario, rates: RateTable, medium: str, config: RbmmConfig = RbmmConfig()) -> BaselineResult:
    """The full optimizer with the other medium's links switched off."""
    return rbmm_method(scenario, rates.only(medium), config, f"{medium}_only")
