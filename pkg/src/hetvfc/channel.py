"""VLC and RF channel gains between task vehicles and service vehicles.

VLC links are line-of-sight: a TV's headlamp reaches the rear photodiode of a
vehicle ahead (forward gain ``h1``) and its taillight reaches the front
photodiode of a vehicle behind (backward gain ``h2``).  A generalized
Lambertian emitter is used and any third vehicle body crossing the LoS
segment zeroes the gain.  RF gains follow log-distance path loss with
Rayleigh block fading drawn from a keyed hash, so every entry is a pure
function of ``(seed, slot, tx, rx, subchannel)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .scenario import SlotScenario, Vehicle

__all__ = [
    "ChannelError",
    "ChannelParams",
    "VlcLinkGain",
    "RfLinkGain",
    "ChannelState",
    "keyed_uniform",
    "segment_hits_rectangles",
    "vlc_gain",
    "rf_path_loss",
    "rf_gain",
    "build_channel_state",
]


class ChannelError(ValueError):
    """Degenerate link geometry."""


@dataclass(frozen=True)
class ChannelParams:
    half_power_angle_deg: float = 30.0
    pd_area: float = 1e-4  # [m^2]
    responsivity: float = 0.54  # [A/W]
    fov_deg: float = 60.0
    vlc_max_range: float = 100.0  # [m]
    pl_exponent: float = 2.5
    pl_ref_db: float = -60.0
    ref_distance: float = 1.0  # [m]

    @property
    def lambertian_order(self) -> float:
        return -math.log(2) / math.log(math.cos(math.radians(self.half_power_angle_deg)))

    @property
    def pl_ref(self) -> float:
        return 10 ** (self.pl_ref_db / 10)


@dataclass(frozen=True)
class VlcLinkGain:
    h1: float
    h2: float
    blocked: bool


@dataclass(frozen=True)
class RfLinkGain:
    power: float  # |g|^2

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.power)


@dataclass
class ChannelState:
    """Per-slot gain tables indexed ``[sv, tv]`` (RF additionally by subchannel)."""

    tvs: list[int]
    svs: list[int]
    h1: np.ndarray  # (V, U)
    h2: np.ndarray  # (V, U)
    blocked: np.ndarray  # (V, U) bool
    g2: np.ndarray  # (V, U, L) power gains

    @property
    def h(self) -> np.ndarray:
        """Stacked ``(2, V, U)`` VLC gains, forward first."""
        return np.stack([self.h1, self.h2])

    def dump_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            L = self.g2.shape[2]
            w.writerow(["tv", "sv", "h1", "h2", "blocked"] + [f"g2_{l}" for l in range(L)])
            for j, u in enumerate(self.tvs):
                for i, v in enumerate(self.svs):
                    w.writerow(
                        [u, v, f"{self.h1[i, j]:.9e}", f"{self.h2[i, j]:.9e}", int(self.blocked[i, j])]
                        + [f"{x:.9e}" for x in self.g2[i, j]]
                    )


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def keyed_uniform(*keys) -> np.ndarray:
    """Uniform(0, 1) values that depend only on the (broadcast) integer keys."""
    arrays = np.broadcast_arrays(*[np.atleast_1d(np.asarray(k, dtype=np.int64)) for k in keys])
    with np.errstate(over="ignore"):
        h = np.full(arrays[0].shape, np.uint64(0x243F6A8885A308D3))
        for k in arrays:
            h = _splitmix(h + _GOLDEN + k.astype(np.uint64))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) / float(2**53)


def segment_hits_rectangles(p0, p1, centers, half_sizes) -> np.ndarray:
    """Whether segment ``p0 -> p1`` passes through the interior of each box.

    ``centers`` and ``half_sizes`` are ``(n, 2)``; boxes are axis aligned.
    Touching an edge or corner does not count.
    """
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    centers = np.atleast_2d(centers)
    lo = centers - half_sizes
    hi = centers + half_sizes
    t0 = np.zeros(len(centers))
    t1 = np.ones(len(centers))
    inside = np.ones(len(centers), dtype=bool)
    for ax in range(2):
        if d[ax] == 0.0:
            inside &= (p0[ax] > lo[:, ax]) & (p0[ax] < hi[:, ax])
            continue
        ta = (lo[:, ax] - p0[ax]) / d[ax]
        tb = (hi[:, ax] - p0[ax]) / d[ax]
        t0 = np.maximum(t0, np.minimum(ta, tb))
        t1 = np.minimum(t1, np.maximum(ta, tb))
    return inside & (t1 - t0 > 1e-12)


def _lambertian(d, cos_phi, cos_psi, params: ChannelParams) -> float:
    m = params.lambertian_order
    return (m + 1) * params.pd_area * params.responsivity / (2 * math.pi * d**2) * cos_phi**m * cos_psi


def vlc_gain(tx: Vehicle, rx: Vehicle, all_vehicles: Sequence[Vehicle], params: ChannelParams = ChannelParams()) -> VlcLinkGain:
    """Forward/backward LoS gain from ``tx`` to ``rx``; at most one is nonzero."""
    if tx.id == rx.id:
        raise ChannelError("transmitter and receiver must differ")
    if tx.x == rx.x and tx.y == rx.y:
        raise ChannelError(f"vehicles {tx.id} and {rx.id} share a position")
    if rx.x == tx.x:
        return VlcLinkGain(0.0, 0.0, False)
    forward = rx.x > tx.x
    sign = 1.0 if forward else -1.0
    emitter = (tx.x + sign * tx.length / 2, tx.y)
    detector = (rx.x - sign * rx.length / 2, rx.y)
    along = sign * (detector[0] - emitter[0])
    if along <= 0:
        return VlcLinkGain(0.0, 0.0, False)
    d = math.hypot(along, detector[1] - emitter[1])
    # Emitter and detector normals are both parallel to the road.
    cos_angle = along / d
    gain = 0.0
    if d <= params.vlc_max_range and math.degrees(math.acos(min(cos_angle, 1.0))) <= params.fov_deg:
        gain = _lambertian(d, cos_angle, cos_angle, params)
    others = [v for v in all_vehicles if v.id not in (tx.id, rx.id)]
    blocked = False
    if others:
        centers = np.array([(v.x, v.y) for v in others])
        halves = np.array([(v.length / 2, v.width / 2) for v in others])
        blocked = bool(segment_hits_rectangles(emitter, detector, centers, halves).any())
    if blocked:
        gain = 0.0
    return VlcLinkGain(gain if forward else 0.0, 0.0 if forward else gain, blocked)


def rf_path_loss(d, params: ChannelParams = ChannelParams()):
    d = np.maximum(np.asarray(d, dtype=float), params.ref_distance)
    return params.pl_ref * (d / params.ref_distance) ** (-params.pl_exponent)


def _fading(seed, slot, tx_id, rx_id, l):
    return -np.log(keyed_uniform(seed, slot, tx_id, rx_id, l))


def rf_gain(tx: Vehicle, rx: Vehicle, subchannel: int, seed: int, slot: int = 0, params: ChannelParams = ChannelParams()) -> RfLinkGain:
    """Rayleigh-faded power gain ``PL(d) * X`` with unit-mean exponential ``X``."""
    if tx.id == rx.id:
        raise ChannelError("transmitter and receiver must differ")
    d = math.hypot(rx.x - tx.x, rx.y - tx.y)
    x = _fading(seed, slot, tx.id, rx.id, subchannel)[0]
    return RfLinkGain(float(rf_path_loss(d, params) * x))


def build_channel_state(scenario: SlotScenario, params: ChannelParams = ChannelParams(), n_rf: int = 8) -> ChannelState:
    """Dense VLC and RF gain tables for every (SV, TV) pair of the slot."""
    tvs, svs = list(scenario.tvs), list(scenario.svs)
    U, V = len(tvs), len(svs)
    h1 = np.zeros((V, U))
    h2 = np.zeros((V, U))
    blocked = np.zeros((V, U), dtype=bool)
    vehicles = scenario.vehicles
    for j, u in enumerate(tvs):
        tx = scenario.vehicle(u)
        for i, v in enumerate(svs):
            link = vlc_gain(tx, scenario.vehicle(v), vehicles, params)
            h1[i, j], h2[i, j], blocked[i, j] = link.h1, link.h2, link.blocked
    g2 = np.zeros((V, U, n_rf))
    if U and V:
        tx_pos = np.array([(scenario.vehicle(u).x, scenario.vehicle(u).y) for u in tvs])
        rx_pos = np.array([(scenario.vehicle(v).x, scenario.vehicle(v).y) for v in svs])
        d = np.linalg.norm(rx_pos[:, None, :] - tx_pos[None, :, :], axis=-1)
        fade = _fading(
            scenario.seed,
            scenario.slot,
            np.array(tvs)[None, :, None],
            np.array(svs)[:, None, None],
            np.arange(n_rf)[None, None, :],
        )
        g2 = rf_path_loss(d, params)[:, :, None] * fade
    return ChannelState(tvs, svs, h1, h2, blocked, g2)
