"""Mobile-sink stop-point planning from the neuron-grid slot bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .clustering import Cluster
from .core import NetworkConfig


class ZeroRate(ValueError):
    pass


class Infeasible(RuntimeError):
    pass


@dataclass
class Stop:
    point: tuple[float, float]
    dwell_slots: int
    served_chs: list[tuple[int, int]] = field(default_factory=list)  # (ch id, slots)


@dataclass
class SinkPlan:
    stops: list[Stop]
    total_time: float
    max_time: float
    travel_time: float = 0.0

    @property
    def total_slots(self) -> int:
        return sum(s.dwell_slots for s in self.stops)

    def service_windows(self, slot_time: float, start: float, origin, speed: float = 0.0):
        """Yield ``(ch_id, stop_point, t_begin, t_end)`` for every head's service in tour order."""
        t = start
        here = origin
        for stop in self.stops:
            if speed > 0:
                t += math.dist(here, stop.point) / speed
            here = stop.point
            for ch_id, slots in stop.served_chs:
                yield ch_id, stop.point, t, t + slots * slot_time
                t += slots * slot_time


def phi(xi: float, t_dc: float, d_s: float) -> float:
    return xi * t_dc * d_s


def _count(c) -> int:
    return len(c.member_ids) if isinstance(c, Cluster) else int(c)


def max_collection_time(clusters: Sequence, phi_bits: float, rates: Sequence[float]) -> float:
    total = 0.0
    for c, r in zip(clusters, rates, strict=True):
        if r <= 0:
            raise ZeroRate("every cluster head needs a positive data rate")
        total += _count(c) / r
    return phi_bits * total


def active_neurons(phi_bits: float, c_i: int, slot_time: float, rate: float) -> int:
    if c_i <= 0:
        return 0
    q = (phi_bits * c_i) / (slot_time * rate)
    # guard against 2.0000000000000004 style round-off turning into an extra slot
    return max(1, math.ceil(q - 1e-9 * max(1.0, q)))


def total_neurons(neuron_on: int, k: int, m: int) -> int:
    return neuron_on * k * m


def candidate_points(config: NetworkConfig) -> list[tuple[float, float]]:
    k = config.stop_points_k
    rows = max(1, math.isqrt(k))
    cols = math.ceil(k / rows)
    pts = []
    for r in range(rows):
        for c in range(cols):
            if len(pts) == k:
                break
            pts.append(((c + 0.5) * config.field_width / cols,
                        (r + 0.5) * config.field_height / rows))
    return pts


def plan_sink_tour(clusters: Sequence[Cluster], config: NetworkConfig,
                   positions: Mapping[int, tuple[float, float]],
                   start: tuple[float, float] | None = None,
                   loads: Mapping[int, int] | None = None,
                   rates: Mapping[int, float] | None = None,
                   deadline: float | None = None,
                   points: Sequence[tuple[float, float]] | None = None) -> SinkPlan:
    """Assign each head its slots at the nearest in-range stop and order the stops.

    ``loads`` overrides the per-head member count used in the slot arithmetic
    (heads listed only in ``loads`` are served as well, e.g. leftover buffers).
    A stop holds at most ``dwell_units_s`` slots; a head whose nearest stop is
    full spills to its next-nearest in-range stop. Raises ``Infeasible`` when a
    head has no stop in range, capacity runs out, or the plan overruns the
    collection deadline.
    """
    start = start or (config.field_width / 2.0, config.field_height / 2.0)
    points = list(points) if points is not None else candidate_points(config)
    if not points:
        raise Infeasible("no candidate stop points")
    demand: dict[int, int] = {c.ch_id: len(c.member_ids) for c in clusters}
    if loads:
        for ch, load in loads.items():
            demand[ch] = int(load)
    heads = sorted(ch for ch, load in demand.items() if load > 0)
    phi_bits = phi(config.aggregation_xi, config.t_dc, config.data_rate_ds)
    rate_of = {ch: (rates or {}).get(ch, config.ch_data_rate) for ch in heads}
    t_max = max_collection_time([demand[h] for h in heads], phi_bits, [rate_of[h] for h in heads])
    T = config.slot_time_T
    cap = [config.dwell_units_s] * len(points)
    served: list[list[tuple[int, int]]] = [[] for _ in points]
    reach = config.tx_range_max
    for ch in heads:
        need = active_neurons(phi_bits, demand[ch], T, rate_of[ch])
        pos = positions[ch]
        order = sorted((math.dist(pos, p), i) for i, p in enumerate(points))
        in_range = [i for d, i in order if d <= reach]
        if not in_range:
            raise Infeasible(f"no stop point within range of head {ch}")
        for i in in_range:
            if need == 0:
                break
            take = min(need, cap[i])
            if take:
                served[i].append((ch, take))
                cap[i] -= take
                need -= take
        if need:
            raise Infeasible(f"stop capacity exhausted while serving head {ch}")
    total_slots = sum(slots for lst in served for _, slots in lst)
    total_time = total_slots * T
    if deadline is None:
        # ceiling rounding costs each head strictly less than one slot
        deadline = t_max + len(heads) * T
    if total_time > deadline + 1e-12:
        raise Infeasible(f"plan needs {total_time:.6g}s, deadline is {deadline:.6g}s")

    # nearest-neighbour tour over the stops that have work
    pending = [i for i in range(len(points)) if served[i]]
    stops, here, travel = [], start, 0.0
    while pending:
        nxt = min(pending, key=lambda i: (math.dist(here, points[i]), i))
        pending.remove(nxt)
        travel += math.dist(here, points[nxt])
        here = points[nxt]
        lst = sorted(served[nxt])
        stops.append(Stop(point=points[nxt], dwell_slots=sum(s for _, s in lst), served_chs=lst))
    travel_time = travel / config.sink_speed if config.sink_speed > 0 else 0.0
    return SinkPlan(stops=stops, total_time=total_time, max_time=t_max, travel_time=travel_time)
