import numpy as np
import pytest
from hypothesis import given, strategies as st

from sleepguard import kernels
from sleepguard.core import NetworkConfig, Packet, PacketKind
from sleepguard.security import ChAuthState, SyncVerdict, check_sync_packet

IMPLS = kernels.backends()
needs_ext = pytest.mark.skipif("cython" not in IMPLS, reason="compiled kernels not built")


def test_backend_flag_matches_import():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in IMPLS


@needs_ext
@given(seed=st.integers(0, 10**6), n=st.integers(1, 40), m=st.integers(1, 8),
       alpha=st.sampled_from([0.0, 0.1, 3.0]), rng_range=st.floats(5, 200))
def test_assign_members_backends_agree(seed, n, m, alpha, rng_range):
    rng = np.random.default_rng(seed)
    xs, ys = rng.uniform(0, 90, n), rng.uniform(0, 90, n)
    hx, hy = rng.uniform(0, 90, m), rng.uniform(0, 90, m)
    elig = (rng.random(n) < 0.8).astype(np.uint8)
    noise = rng.random((n, m, 2)) - 0.5
    args = (xs, ys, elig, hx, hy, noise, 1.0, 1 / 250**2, 1.0, alpha, rng_range)
    c1, b1 = kernels.assign_members(*args, impl=IMPLS["python"])
    c2, b2 = kernels.assign_members(*args, impl=IMPLS["cython"])
    assert np.array_equal(c1, c2)
    assert np.array_equal(b1, b2)


traces = st.lists(st.tuples(st.floats(0, 5, allow_nan=False), st.integers(0, 4)), max_size=60)


def _trace(items):
    items = sorted(items)
    return np.array([t for t, _ in items], dtype=float), np.array([k for _, k in items], dtype=np.int64)


@needs_ext
@given(items=traces, thr=st.integers(1, 6), gap=st.sampled_from([0.0, 0.05, 0.1, 0.5]))
def test_scan_threshold_backends_agree(items, thr, gap):
    t, k = _trace(items)
    a = kernels.scan_threshold(t, k, 5, thr, gap, 1.0, impl=IMPLS["python"])
    b = kernels.scan_threshold(t, k, 5, thr, gap, 1.0, impl=IMPLS["cython"])
    assert a == b


@given(items=traces, thr=st.integers(1, 6), gap=st.sampled_from([0.0, 0.05, 0.1, 0.5]))
def test_scan_threshold_matches_sync_vetting(items, thr, gap):
    # the head's packet-by-packet state machine trips on the same packet index
    t, k = _trace(items)
    cfg = NetworkConfig(sync_count_threshold=thr, sync_interval_threshold=gap)
    state = ChAuthState.for_cluster(99, range(5), cfg)
    hit = -1
    for i, (ti, ki) in enumerate(zip(t, k)):
        v = check_sync_packet(state, Packet(PacketKind.SYNC, int(ki), 99, 16, float(ti)), float(ti), cfg)
        if v is SyncVerdict.ENTER_AUTH_MODE:
            hit = i
            break
    assert kernels.scan_threshold(t, k, 5, thr, gap, cfg.duty_period) == hit


def _wake_oracle(times, accept, bs, be, extend, lo, hi):
    """Quadratic re-derivation: awake if inside a base window or any earlier extension."""
    ext = []
    got = []
    for t, a in zip(times, accept):
        if not lo <= t < hi:
            got.append(0)
            continue
        awake = any(s <= t < e for s, e in zip(bs, be)) or any(s <= t < e for s, e in ext)
        got.append(int(awake))
        if awake and a:
            ext.append((t, min(t + extend, hi)))
    grid = np.arange(lo, hi, 1e-4) + 5e-5
    on = np.zeros(grid.size, dtype=bool)
    for s, e in list(zip(bs, be)) + ext:
        on |= (grid >= s) & (grid < e)
    return np.array(got, dtype=np.uint8), on.sum() * 1e-4


@given(seed=st.integers(0, 10**6), n=st.integers(0, 40), n_base=st.integers(0, 4),
       extend=st.floats(0.01, 0.6))
def test_wake_scan_matches_oracle(seed, n, n_base, extend):
    rng = np.random.default_rng(seed)
    lo, hi = 0.0, 2.0
    times = np.sort(rng.uniform(-0.2, 2.2, n))
    accept = (rng.random(n) < 0.6).astype(np.uint8)
    starts = np.sort(rng.choice(np.arange(0, 2, 0.25), n_base, replace=False)) if n_base else np.empty(0)
    ends = starts + 0.1
    got, awake = kernels.wake_scan(times, accept, starts, ends, extend, lo, hi)
    want, awake_ref = _wake_oracle(times, accept, starts, ends, extend, lo, hi)
    assert np.array_equal(got, want)
    assert awake == pytest.approx(awake_ref, abs=2e-3)
    for impl in IMPLS.values():
        g2, a2 = kernels.wake_scan(times, accept, starts, ends, extend, lo, hi, impl=impl)
        assert np.array_equal(g2, got) and a2 == awake


def test_wake_scan_chain_keeps_radio_up():
    # packets every 0.05 s with a 0.5 s extension keep the radio awake from the first one heard
    times = np.arange(0.0, 2.0, 0.05)
    got, awake = kernels.wake_scan(times, np.ones(times.size), [0.0], [0.1], 0.5, 0.0, 2.0)
    assert got.all() and awake == pytest.approx(2.0)
    got, awake = kernels.wake_scan(times, np.zeros(times.size), [0.0], [0.1], 0.5, 0.0, 2.0)
    assert got.sum() == 2 and awake == pytest.approx(0.1)
