"""A compact (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu updates."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..phy import RateTable
from ..rbmm import evaluate, initialize
from .common import BaselineResult, BoxEncoding, as_instance

__all__ = ["EsConfig", "cmaes_minimize", "cmaes_optimize"]


@dataclass(frozen=True)
class EsConfig:
    population: int | None = None  # default 4 + floor(3 ln n)
    sigma0: float = 0.3
    max_evaluations: int = 5000
    max_generations: int | None = None
    tol_fun: float = 0.0  # stop once the best value is at or below this
    box_penalty: float = 1e3  # per squared unit outside the box
    temperature: float = 0.1
    seed: int = 0
    start_from_init: bool = True  # mean starts at the optimizer's initial point, else the box centre

    def __post_init__(self):
        if self.population is not None and self.population < 4:
            raise ValueError("population must be at least 4")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")


def cmaes_minimize(fun, x0, config: EsConfig = EsConfig(), bounds=None):
    """Minimize a batch objective from ``x0``; returns ``(x, f, evaluations, generations)``.

    With ``bounds=(lo, hi)`` candidates are clipped into the box before
    evaluation and pay ``box_penalty`` times their squared distance to it.
    """
    rng = np.random.default_rng(config.seed)
    mean = np.asarray(x0, dtype=float).copy()
    n = mean.size
    lam = config.population or 4 + int(3 * math.log(n))
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / (w @ w)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chin = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

    sigma = config.sigma0
    pc = np.zeros(n)
    ps = np.zeros(n)
    B = np.eye(n)
    D = np.ones(n)
    C = np.eye(n)
    eigen_gen = 0
    lo, hi = (None, None) if bounds is None else (np.broadcast_to(bounds[0], n), np.broadcast_to(bounds[1], n))

    def evaluate_batch(X):
        if lo is None:
            return fun(X)
        Xc = np.clip(X, lo, hi)
        return fun(Xc) + config.box_penalty * ((X - Xc) ** 2).sum(axis=1)

    best_x, best_f = mean.copy(), float(evaluate_batch(mean[None])[0])
    evals, gen = 1, 0
    while evals + lam <= config.max_evaluations:
        if config.max_generations is not None and gen >= config.max_generations:
            break
        gen += 1
        Zs = rng.standard_normal((lam, n))
        Y = (Zs * D) @ B.T
        X = mean + sigma * Y
        f = evaluate_batch(X)
        evals += lam
        order = np.argsort(f, kind="stable")
        if f[order[0]] < best_f:
            best_f = float(f[order[0]])
            best_x = X[order[0]].copy() if lo is None else np.clip(X[order[0]], lo, hi)
        if best_f <= config.tol_fun:
            break
        Ysel = Y[order[:mu]]
        yw = w @ Ysel
        mean = mean + sigma * yw
        # C^{-1/2} yw
        cinv_yw = B @ ((B.T @ yw) / D)
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * cinv_yw
        hsig = np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * gen)) / chin < 1.4 + 2 / (n + 1)
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * yw
        C = ((1 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * C)
             + cmu * (Ysel.T * w) @ Ysel)
        # step-size change capped at a factor e per generation
        sigma *= math.exp(min(1.0, (cs / damps) * (np.linalg.norm(ps) / chin - 1)))
        if gen - eigen_gen > lam / (c1 + cmu) / n / 10:
            eigen_gen = gen
            C = np.triu(C) + np.triu(C, 1).T
            vals, B = np.linalg.eigh(C)
            D = np.sqrt(np.maximum(vals, 1e-300))
        # stop once the search distribution has collapsed or is ill-conditioned
        if not np.isfinite(sigma) or sigma * D.max() < 1e-14 or D.max() > 1e7 * D.min():
            break
    return best_x, best_f, evals, gen


def cmaes_optimize(scenario, rates: RateTable | None = None, config: EsConfig = EsConfig()) -> BaselineResult:
    t = time.perf_counter()
    inst = as_instance(scenario, rates)
    enc = BoxEncoding(inst, config.temperature)
    x0 = enc.encode(*initialize(inst)) if config.start_from_init else np.full(enc.n, 0.5)
    x, fval, evals, gens = cmaes_minimize(enc.fitness, x0, config, bounds=(0.0, 1.0))
    M, F = enc.decode(x[None], repair=True)
    report = evaluate(inst, M[0], F[0])
    status = "ok" if (report.tpd <= inst.slot_length * (1 + 1e-9)).all() else "late"
    return BaselineResult("cmaes", M[0], F[0], report, time.perf_counter() - t, status, gens,
                          {"fitness": fval, "evaluations": evals})
