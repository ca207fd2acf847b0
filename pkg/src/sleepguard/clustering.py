"""LEACH cluster-head election and firefly-intensity cluster membership."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import NetworkConfig, SensorNode


class NoAliveNodes(RuntimeError):
    pass


@dataclass
class Cluster:
    ch_id: int
    member_ids: list[int] = field(default_factory=list)
    tdma_order: list[int] = field(default_factory=list)


@dataclass
class FireflyState:
    positions: list[tuple[float, float]]
    intensities: list[float]


def rotation_period(z: float) -> int:
    return math.ceil(1.0 / z - 1e-12)


def leach_threshold(z: float, q: int, eligible: bool) -> float:
    if not eligible:
        return 0.0
    denom = 1.0 - z * (q % rotation_period(z))
    if denom <= 0.0:
        return 1.0
    return min(max(z / denom, 0.0), 1.0)


@dataclass
class ElectionState:
    """Tracks which nodes are out of the candidate set G and why."""

    z: float
    excluded_until: dict[int, int] = field(default_factory=dict)
    banned: set[int] = field(default_factory=set)

    def eligible(self, node_id: int, round_index: int) -> bool:
        if node_id in self.banned:
            return False
        return self.excluded_until.get(node_id, -1) <= round_index

    def mark_elected(self, node_id: int, round_index: int) -> None:
        # a full rotation period, so no node heads twice in any p consecutive rounds
        self.excluded_until[node_id] = round_index + rotation_period(self.z)


def elect_cluster_heads(nodes: Sequence[SensorNode], round_index: int, z: float,
                        rng: np.random.Generator, state: ElectionState | None = None,
                        draws: np.ndarray | None = None) -> set[int]:
    """Elect this round's heads.

    One uniform draw is taken per node id (alive or not) so the draw a node
    sees depends only on the generator and its id. If nobody is elected, the
    alive node with the most residual energy is forced in, eligible or not.
    """
    state = state or ElectionState(z)
    alive = [n for n in nodes if n.alive and n.id not in state.banned]
    if not alive:
        raise NoAliveNodes("no alive nodes left to elect")
    if draws is None:
        draws = rng.random(max(n.id for n in nodes) + 1)
    elected = set()
    for node in alive:
        t = leach_threshold(z, round_index, state.eligible(node.id, round_index))
        if draws[node.id] < t:
            elected.add(node.id)
    if not elected:
        fallback = max(alive, key=lambda n: (n.residual_energy, -n.id))
        elected.add(fallback.id)
    for node_id in elected:
        state.mark_elected(node_id, round_index)
    return elected


def intensity(i0: float, gamma: float, s: float) -> float:
    return i0 / (1.0 + gamma * s * s)


def firefly_step(pos_i, pos_j, beta: float, gamma: float, alpha: float,
                 rng: np.random.Generator | None = None, noise=None) -> tuple[float, float]:
    """Move ``pos_i`` toward ``pos_j``; ``noise`` overrides the ``rand - 1/2`` draws."""
    xi, yi = pos_i
    xj, yj = pos_j
    r2 = (xj - xi) ** 2 + (yj - yi) ** 2
    att = beta * math.exp(-gamma * r2)
    if noise is None:
        noise = (rng.random(2) - 0.5) if (rng is not None and alpha) else (0.0, 0.0)
    return (xi + att * (xj - xi) + alpha * noise[0],
            yi + att * (yj - yi) + alpha * noise[1])


def firefly_noise(rng: np.random.Generator, n_ids: int) -> np.ndarray:
    """``rand - 1/2`` offsets for every (node id, head id) pair, shape (n, n, 2)."""
    return rng.random((n_ids, n_ids, 2)) - 0.5


def form_clusters(nodes: Sequence[SensorNode], ch_ids, config: NetworkConfig,
                  rng: np.random.Generator | None = None, noise: np.ndarray | None = None,
                  excluded: set[int] | frozenset = frozenset()) -> list[Cluster]:
    """Attach every alive non-head node to its brightest reachable head.

    ``noise`` is indexed by (node id, head id); when omitted it is drawn from
    ``rng`` (or zero when ``firefly_alpha`` is 0). Nodes in ``excluded`` stay
    unclustered, as do nodes out of range of every head.
    """
    heads = sorted(ch_ids)
    if not heads:
        raise ValueError("form_clusters needs at least one cluster head")
    by_id = {n.id: n for n in nodes}
    n_ids = max(by_id) + 1
    if noise is None:
        if config.firefly_alpha and rng is not None:
            noise = firefly_noise(rng, n_ids)
        else:
            noise = np.zeros((n_ids, n_ids, 2))
    head_set = set(heads)
    ids = sorted(by_id)
    xs = np.array([by_id[i].position[0] for i in ids])
    ys = np.array([by_id[i].position[1] for i in ids])
    eligible = np.array([by_id[i].alive and i not in head_set and i not in excluded for i in ids],
                        dtype=np.uint8)
    hx = np.array([by_id[h].position[0] for h in heads])
    hy = np.array([by_id[h].position[1] for h in heads])
    sub_noise = noise[np.ix_(ids, heads)]
    choice, _ = kernels.assign_members(
        xs, ys, eligible, hx, hy, sub_noise,
        config.firefly_beta, config.firefly_gamma, config.firefly_i0,
        config.firefly_alpha, config.tx_range_max,
    )
    clusters = {h: Cluster(ch_id=h) for h in heads}
    for idx, node_id in enumerate(ids):
        j = int(choice[idx])
        if j >= 0:
            clusters[heads[j]].member_ids.append(node_id)
    out = []
    for h in heads:
        c = clusters[h]
        c.member_ids.sort()
        c.tdma_order = list(c.member_ids)
        out.append(c)
    return out


def firefly_state(node: SensorNode, heads: Sequence[SensorNode], config: NetworkConfig,
                  noise=None) -> FireflyState:
    """Per-head moved positions and intensities as seen by ``node`` (diagnostics)."""
    positions, values = [], []
    for k, head in enumerate(heads):
        nz = None if noise is None else noise[k]
        p = firefly_step(head.position, node.position, config.firefly_beta,
                         config.firefly_gamma, config.firefly_alpha, noise=nz if nz is not None else (0.0, 0.0))
        positions.append(p)
        values.append(intensity(config.firefly_i0, config.firefly_gamma, node.distance_to(p)))
    return FireflyState(positions, values)
