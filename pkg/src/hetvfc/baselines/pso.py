"""Global-best particle swarm optimization on the box encoding."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..phy import RateTable
from ..rbmm import evaluate, initialize
from .common import BaselineResult, BoxEncoding, as_instance

__all__ = ["SwarmConfig", "pso_minimize", "pso_optimize"]


@dataclass(frozen=True)
class SwarmConfig:
    particles: int = 60
    iterations: int = 200
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    v_max: float = 0.5  # per coordinate, box is [0, 1]
    temperature: float = 0.1
    seed: int = 0
    start_from_init: bool = True  # one particle starts at the optimizer's initial point

    def __post_init__(self):
        if self.particles < 2:
            raise ValueError("swarm needs at least two particles")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


def pso_minimize(fun, n: int, config: SwarmConfig = SwarmConfig(), starts=None):
    """Minimize a batch objective over ``[0, 1]^n``; returns ``(x, f, evaluations)``.

    ``starts`` (rows in the box) replace the first random particles.
    """
    rng = np.random.default_rng(config.seed)
    X = rng.random((config.particles, n))
    if starts is not None:
        starts = np.atleast_2d(starts)[: config.particles]
        X[: len(starts)] = np.clip(starts, 0.0, 1.0)
    Vel = np.zeros_like(X)
    fx = fun(X)
    pbest, pval = X.copy(), fx.copy()
    g = int(np.argmin(pval))
    evals = config.particles
    for _ in range(config.iterations):
        r1 = rng.random(X.shape)
        r2 = rng.random(X.shape)
        Vel = (config.inertia * Vel + config.cognitive * r1 * (pbest - X)
               + config.social * r2 * (pbest[g] - X))
        Vel = np.clip(Vel, -config.v_max, config.v_max)
        X = np.clip(X + Vel, 0.0, 1.0)
        fx = fun(X)
        evals += config.particles
        better = fx < pval
        pbest[better], pval[better] = X[better], fx[better]
        g = int(np.argmin(pval))
    return pbest[g].copy(), float(pval[g]), evals


def pso_optimize(scenario, rates: RateTable | None = None, config: SwarmConfig = SwarmConfig()) -> BaselineResult:
    t = time.perf_counter()
    inst = as_instance(scenario, rates)
    enc = BoxEncoding(inst, config.temperature)
    starts = enc.encode(*initialize(inst)) if config.start_from_init else None
    x, fval, evals = pso_minimize(enc.fitness, enc.n, config, starts)
    M, F = enc.decode(x[None], repair=True)
    report = evaluate(inst, M[0], F[0])
    status = "ok" if (report.tpd <= inst.slot_length * (1 + 1e-9)).all() else "late"
    return BaselineResult("pso", M[0], F[0], report, time.perf_counter() - t, status, config.iterations,
                          {"fitness": fval, "evaluations": evals})
