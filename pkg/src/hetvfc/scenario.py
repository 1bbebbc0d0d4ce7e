"""Multi-lane road scenario: vehicle placement, IDM mobility and task draws.

Vehicles carry centre coordinates ``(x, y)``; ``x`` runs along the road and
``y`` is the lane centre line.  A slot designates every vehicle with at least
one task arrival as a task vehicle (TV) and every other vehicle as a service
vehicle (SV).  Local computing is addressed as the virtual SV that follows
the real ones (index ``V`` in zero-based arrays).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "ScenarioError",
    "EmptySlot",
    "IdmParams",
    "Vehicle",
    "Task",
    "SlotScenario",
    "slot_rng",
    "generate_vehicles",
    "idm_acceleration",
    "equilibrium_speed",
    "step_mobility",
    "draw_tasks",
    "dump_vehicles",
]

# Independent random streams derived from (seed, slot, stream id).
_STREAMS = {"placement": 11, "tasks": 23, "rf": 37}


class ScenarioError(ValueError):
    """Raised for invalid scenario parameters or geometry."""


class EmptySlot(ScenarioError):
    """No vehicle has a task arrival in this slot; callers skip the slot."""


@dataclass(frozen=True)
class IdmParams:
    desired_speed: float = 20.0  # v0 [m/s]
    time_headway: float = 1.5  # T [s]
    max_accel: float = 1.0  # a [m/s^2]
    comfort_decel: float = 2.0  # b [m/s^2]
    jam_distance: float = 2.0  # s0 [m]
    exponent: float = 4.0  # delta


@dataclass(frozen=True)
class Vehicle:
    id: int
    lane: int
    x: float
    y: float
    speed: float = 0.0
    width: float = 2.2  # D1 [m]
    length: float = 4.0  # D2 [m]
    compute: float = 2e9  # C_n [cycles/s]

    def __post_init__(self):
        if self.width <= 0 or self.length <= 0:
            raise ScenarioError(f"vehicle {self.id}: dimensions must be positive")
        if self.compute <= 0:
            raise ScenarioError(f"vehicle {self.id}: compute must be positive")


@dataclass(frozen=True)
class Task:
    owner: int
    size: float  # rho [bits]
    intensity: float  # kappa [cycles/bit]

    def __post_init__(self):
        if self.size <= 0 or self.intensity <= 0:
            raise ScenarioError(f"task of vehicle {self.owner}: size and intensity must be positive")


@dataclass
class SlotScenario:
    """One quasi-static slot: TV/SV designation plus one task per TV."""

    slot_length: float
    vehicles: list[Vehicle]
    tvs: list[int]
    svs: list[int]
    tasks: list[Task]
    seed: int = 0
    slot: int = 0
    _by_id: dict[int, Vehicle] = field(init=False, repr=False)

    def __post_init__(self):
        self._by_id = {v.id: v for v in self.vehicles}
        if not self.tvs:
            raise EmptySlot("slot has no task vehicles")
        if set(self.tvs) & set(self.svs):
            raise ScenarioError("TV and SV sets overlap")
        if [t.owner for t in self.tasks] != list(self.tvs):
            raise ScenarioError("every TV needs exactly one task, in TV order")
        missing = [i for i in (*self.tvs, *self.svs) if i not in self._by_id]
        if missing:
            raise ScenarioError(f"unknown vehicle ids {missing}")
        if self.slot_length <= 0:
            raise ScenarioError("slot length must be positive")

    @property
    def U(self) -> int:
        return len(self.tvs)

    @property
    def V(self) -> int:
        return len(self.svs)

    @property
    def local_index(self) -> int:
        """Row of the virtual SV (local computing) in ``(V+1, U)`` arrays."""
        return self.V

    def vehicle(self, vid: int) -> Vehicle:
        return self._by_id[vid]

    @property
    def rho(self) -> np.ndarray:
        return np.array([t.size for t in self.tasks], dtype=float)

    @property
    def kappa(self) -> np.ndarray:
        return np.array([t.intensity for t in self.tasks], dtype=float)

    @property
    def tv_compute(self) -> np.ndarray:
        return np.array([self._by_id[i].compute for i in self.tvs], dtype=float)

    @property
    def sv_compute(self) -> np.ndarray:
        return np.array([self._by_id[i].compute for i in self.svs], dtype=float)

    @classmethod
    def synthetic(
        cls,
        rho: Sequence[float],
        kappa: Sequence[float] | float,
        tv_compute: Sequence[float] | float,
        sv_compute: Sequence[float] | float = (),
        slot_length: float = 1.0,
    ) -> "SlotScenario":
        """Build a slot directly from task and compute figures.

        Vehicle positions are placeholders; use this for instances whose link
        rates are specified by hand.
        """
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        U = rho.size
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (U,))
        tv_c = np.broadcast_to(np.asarray(tv_compute, dtype=float), (U,))
        sv_c = np.atleast_1d(np.asarray(sv_compute, dtype=float))
        vehicles = [Vehicle(i, 0, 10.0 * i, 0.0, compute=float(c)) for i, c in enumerate(tv_c)]
        vehicles += [Vehicle(U + j, 1, 10.0 * j, 3.5, compute=float(c)) for j, c in enumerate(sv_c)]
        tasks = [Task(i, float(r), float(k)) for i, (r, k) in enumerate(zip(rho, kappa))]
        return cls(slot_length, vehicles, list(range(U)), list(range(U, U + sv_c.size)), tasks)


def slot_rng(seed: int, slot: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(slot), _STREAMS[stream]]))


def equilibrium_speed(gap: float, idm: IdmParams = IdmParams()) -> float:
    """Speed at which IDM acceleration vanishes behind an equal-speed leader."""
    if gap <= idm.jam_distance:
        return 0.0

    def accel(v):
        return 1 - (v / idm.desired_speed) ** idm.exponent - ((idm.jam_distance + v * idm.time_headway) / gap) ** 2

    return brentq(accel, 0.0, idm.desired_speed, xtol=1e-14, rtol=1e-15)


def generate_vehicles(
    lanes: int,
    road_length: float,
    density: float,
    seed: int,
    *,
    lane_width: float = 3.5,
    width: float = 2.2,
    length: float = 4.0,
    compute: float = 2e9,
    idm: IdmParams = IdmParams(),
) -> list[Vehicle]:
    """Place vehicles lane by lane as a hard-core Poisson renewal process.

    Centre-to-centre spacing is ``length + Exp`` with mean ``1/density`` so the
    expected count per lane is ``density * road_length`` and bodies never
    overlap, including across the wrap-around of the (periodic) road.
    Initial speeds are IDM equilibrium speeds for each vehicle's gap.
    """
    if lanes < 1 or road_length <= 0 or density <= 0:
        raise ScenarioError("lanes >= 1, road_length > 0 and density > 0 required")
    rng = slot_rng(seed, 0, "placement")
    vehicles: list[Vehicle] = []
    for lane in range(lanes):
        extra = 1.0 / density - length
        if extra <= 0:
            raise ScenarioError(
                f"lane {lane}: density {density:g}/m needs mean spacing {1 / density:.3g} m "
                f"below the vehicle length {length:g} m"
            )
        xs = []
        x = rng.exponential(extra)
        while x < road_length:
            xs.append(x)
            x += length + rng.exponential(extra)
        # Keep the wrap-around gap non-negative.
        while len(xs) > 1 and (road_length - xs[-1]) + xs[0] < length:
            xs.pop()
        n = len(xs)
        for i, x in enumerate(xs):
            if n == 1:
                gap = road_length - length
            else:
                lead = xs[(i + 1) % n] + (road_length if i == n - 1 else 0.0)
                gap = lead - x - length
            vehicles.append(
                Vehicle(
                    id=len(vehicles),
                    lane=lane,
                    x=float(x),
                    y=lane * lane_width,
                    speed=equilibrium_speed(gap, idm),
                    width=width,
                    length=length,
                    compute=compute,
                )
            )
    return vehicles


def idm_acceleration(v, gap, dv, idm: IdmParams = IdmParams()):
    """IDM acceleration; ``gap=None``/``inf`` entries use the free-flow term only."""
    v = np.asarray(v, dtype=float)
    free = 1 - (v / idm.desired_speed) ** idm.exponent
    if gap is None:
        return idm.max_accel * free
    gap = np.maximum(np.asarray(gap, dtype=float), 1e-3)
    s_star = idm.jam_distance + np.maximum(
        0.0, v * idm.time_headway + v * np.asarray(dv) / (2 * math.sqrt(idm.max_accel * idm.comfort_decel))
    )
    interaction = np.where(np.isfinite(gap), (s_star / gap) ** 2, 0.0)
    return idm.max_accel * (free - interaction)


def step_mobility(
    vehicles: Iterable[Vehicle],
    dt: float,
    idm: IdmParams = IdmParams(),
    ring_length: float | None = None,
) -> list[Vehicle]:
    """Advance every vehicle by one explicit-Euler IDM step (no lane changes).

    With ``ring_length`` the road is periodic and the front vehicle of a lane
    follows the rear one; otherwise the front vehicle drives freely.
    """
    if dt <= 0:
        raise ScenarioError("dt must be positive")
    vehicles = list(vehicles)
    out: dict[int, Vehicle] = {}
    for lane in sorted({v.lane for v in vehicles}):
        group = sorted((v for v in vehicles if v.lane == lane), key=lambda v: v.x)
        x = np.array([v.x for v in group])
        v = np.array([v.speed for v in group])
        half = np.array([v.length for v in group]) / 2
        lead_x = np.roll(x, -1)
        lead_v = np.roll(v, -1)
        lead_half = np.roll(half, -1)
        gap = lead_x - x - half - lead_half
        if ring_length is None:
            gap[-1] = np.inf
        else:
            gap[-1] += ring_length
        acc = idm_acceleration(v, gap, v - lead_v, idm)
        x_new = x + v * dt
        if ring_length is not None:
            x_new = np.mod(x_new, ring_length)
        v_new = np.maximum(v + acc * dt, 0.0)
        for veh, xn, vn in zip(group, x_new, v_new):
            out[veh.id] = replace(veh, x=float(xn), speed=float(vn))
    return [out[v.id] for v in vehicles]


def draw_tasks(
    vehicles: Sequence[Vehicle],
    arrival_rate: float,
    slot_length: float,
    size_range: tuple[float, float],
    intensity: float,
    seed: int,
    slot: int = 0,
) -> SlotScenario:
    """Designate TVs by Poisson arrivals and give each TV one aggregated task.

    A vehicle is a TV when its Poisson(``arrival_rate * slot_length``) count is
    at least one.  Several arrivals collapse into one task whose size is a
    single uniform draw from ``size_range`` (bits).
    """
    lo, hi = size_range
    if arrival_rate <= 0 or not lo <= hi or lo <= 0:
        raise ScenarioError("arrival_rate > 0 and a positive, non-empty size range required")
    rng = slot_rng(seed, slot, "tasks")
    counts = rng.poisson(arrival_rate * slot_length, len(vehicles))
    sizes = rng.uniform(lo, hi, len(vehicles))
    tvs = [veh.id for veh, c in zip(vehicles, counts) if c >= 1]
    if not tvs:
        raise EmptySlot(f"slot {slot}: no task arrivals")
    svs = [veh.id for veh, c in zip(vehicles, counts) if c == 0]
    tasks = [Task(veh.id, float(s), float(intensity)) for veh, c, s in zip(vehicles, counts, sizes) if c >= 1]
    return SlotScenario(slot_length, list(vehicles), tvs, svs, tasks, seed=seed, slot=slot)


def dump_vehicles(vehicles: Iterable[Vehicle], path: str | Path) -> None:
    """Write one CSV record per vehicle."""
    cols = ["id", "lane", "x", "y", "speed", "width", "length", "compute"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for v in vehicles:
            w.writerow([v.id, v.lane, f"{v.x:.6f}", f"{v.y:.6f}", f"{v.speed:.6f}", v.width, v.length, f"{v.compute:.6g}"])
