import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sleepguard.clustering import (
    ElectionState, NoAliveNodes, elect_cluster_heads, firefly_step, form_clusters, intensity,
    leach_threshold, rotation_period,
)
from sleepguard.core import NetworkConfig, SensorNode


def _nodes(points, energy=45.0):
    return [SensorNode(i, tuple(p), residual_energy=energy, tx_range=250.0) for i, p in enumerate(points)]


def test_threshold_examples():
    assert leach_threshold(0.1, 0, True) == pytest.approx(0.1)
    assert leach_threshold(0.1, 9, True) == pytest.approx(1.0)
    assert leach_threshold(0.3, 5, False) == 0.0
    assert rotation_period(0.1) == 10 and rotation_period(0.3) == 4


def test_last_round_of_rotation_elects_everyone():
    nodes = _nodes(np.random.default_rng(0).uniform(0, 90, (50, 2)))
    heads = elect_cluster_heads(nodes, 9, 0.1, np.random.default_rng(1))
    assert heads == set(range(50))


def test_forced_fallback_picks_richest_lowest_id():
    nodes = _nodes([(0, 0), (1, 1), (2, 2), (3, 3)])
    nodes[1].residual_energy = nodes[3].residual_energy = 50.0
    heads = elect_cluster_heads(nodes, 0, 0.1, None, draws=np.ones(4))
    assert heads == {1}


def test_no_alive_nodes():
    nodes = _nodes([(0, 0)])
    nodes[0].alive = False
    with pytest.raises(NoAliveNodes):
        elect_cluster_heads(nodes, 0, 0.1, np.random.default_rng(0))


def test_banned_nodes_never_elected():
    nodes = _nodes(np.random.default_rng(2).uniform(0, 90, (40, 2)))
    st_ = ElectionState(0.1, banned={0, 1, 2})
    for q in range(30):
        heads = elect_cluster_heads(nodes, q, 0.1, np.random.default_rng(q), state=st_)
        assert not heads & {0, 1, 2}


@given(seed=st.integers(0, 10**6), z=st.sampled_from([0.05, 0.1, 0.2, 0.3]))
def test_no_repeat_within_rotation(seed, z):
    rng = np.random.default_rng(seed)
    nodes = _nodes(rng.uniform(0, 90, (60, 2)))
    state = ElectionState(z)
    p = rotation_period(z)
    last: dict[int, int] = {}
    for q in range(3 * p):
        draws = rng.random(60)
        heads = elect_cluster_heads(nodes, q, z, None, state=state, draws=draws)
        eligible = [n.id for n in nodes if state.excluded_until.get(n.id, -1) <= q]
        forced = len(heads) == 1 and not any(draws[i] < leach_threshold(z, q, True) for i in eligible)
        for h in heads:
            if h in last and not forced:
                assert q - last[h] >= p
            last[h] = q


def test_firefly_step_examples():
    assert firefly_step((3.0, 4.0), (3.0, 4.0), 1.0, 0.5, 0.0) == (3.0, 4.0)
    assert firefly_step((0.0, 0.0), (1.0, 0.0), 1.0, 0.0, 0.0) == (1.0, 0.0)
    x, y = firefly_step((0.0, 0.0), (10.0, 0.0), 1.0, 1e6, 0.0)
    assert (x, y) == pytest.approx((0.0, 0.0))
    assert firefly_step((0.0, 0.0), (0.0, 0.0), 1.0, 0.0, 2.0, noise=(0.25, -0.5)) == (0.5, -1.0)


def test_intensity_examples():
    assert intensity(1.7, 0.3, 0.0) == 1.7
    assert intensity(2.0, 1.0, 1.0) == 1.0
    assert intensity(2.0, 0.0, 123.0) == 2.0


def test_single_head_takes_everyone():
    nodes = _nodes(np.random.default_rng(3).uniform(0, 90, (30, 2)))
    (cl,) = form_clusters(nodes, {7}, NetworkConfig(), rng=np.random.default_rng(0))
    assert cl.ch_id == 7 and cl.member_ids == [i for i in range(30) if i != 7]
    assert cl.tdma_order == cl.member_ids


def _nearest_oracle(nodes, heads):
    out = {}
    for n in nodes:
        if n.id in heads:
            continue
        best = min(heads, key=lambda h: (math.dist(n.position, nodes[h].position), h))
        out[n.id] = best
    return out


def test_nearest_head_on_random_layouts():
    cfg = NetworkConfig(firefly_alpha=0.0)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        nodes = _nodes(rng.uniform(0, 90, (40, 2)))
        heads = sorted(rng.choice(40, 2, replace=False).tolist())
        got = {m: c.ch_id for c in form_clusters(nodes, heads, cfg) for m in c.member_ids}
        assert got == _nearest_oracle(nodes, heads)


def test_equidistant_tie_goes_to_lower_id():
    pts = [(0, 0)] * 8
    pts[3], pts[7], pts[0] = (10, 0), (-10, 0), (0, 0)
    nodes = _nodes(pts)
    for i in (1, 2, 4, 5, 6):
        nodes[i].alive = False
    clusters = form_clusters(nodes, [7, 3], NetworkConfig(firefly_alpha=0.0))
    assert {c.ch_id: c.member_ids for c in clusters} == {3: [0], 7: []}


@given(seed=st.integers(0, 10**6), scale=st.floats(0.01, 100))
def test_intensity_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    nodes = _nodes(rng.uniform(0, 90, (25, 2)))
    heads = sorted(rng.choice(25, 3, replace=False).tolist())
    a = form_clusters(nodes, heads, NetworkConfig(firefly_alpha=0.0))
    b = form_clusters(nodes, heads, NetworkConfig(firefly_alpha=0.0, firefly_i0=scale))
    assert [c.member_ids for c in a] == [c.member_ids for c in b]


@given(seed=st.integers(0, 10**6), rng_m=st.floats(10, 120))
def test_membership_partition_and_range(seed, rng_m):
    rng = np.random.default_rng(seed)
    nodes = _nodes(rng.uniform(0, 90, (30, 2)))
    heads = sorted(rng.choice(30, 4, replace=False).tolist())
    nodes[heads[0] - 1 if heads[0] else 29].alive = False
    cfg = NetworkConfig(tx_range_min=min(rng_m, 100.0), tx_range_max=rng_m)
    clusters = form_clusters(nodes, heads, cfg, rng=np.random.default_rng(seed))
    seen = list(itertools.chain.from_iterable(c.member_ids for c in clusters))
    assert len(seen) == len(set(seen))
    for c in clusters:
        assert c.ch_id not in c.member_ids and sorted(c.tdma_order) == sorted(c.member_ids)
        for m in c.member_ids:
            assert math.dist(nodes[m].position, nodes[c.ch_id].position) <= rng_m
    for n in nodes:
        reachable = any(math.dist(n.position, nodes[h].position) <= rng_m for h in heads)
        if n.alive and n.id not in heads and reachable:
            assert n.id in seen
        if not n.alive:
            assert n.id not in seen


def test_excluded_nodes_stay_out():
    nodes = _nodes(np.random.default_rng(4).uniform(0, 90, (20, 2)))
    clusters = form_clusters(nodes, [0], NetworkConfig(), excluded={5, 6})
    assert 5 not in clusters[0].member_ids and 6 not in clusters[0].member_ids
