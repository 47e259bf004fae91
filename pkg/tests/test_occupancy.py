"""Occupancy fusion vs. a brute-force replay oracle."""

import random

import pytest

from sbsim.building import KIND_UNITS, Reading
from sbsim.errors import RoomUnknown
from sbsim.occupancy import (AbsenceInterval, OccupancyTracker, PresenceSighting)

LEASE = 300_000
MAC_A = "AA:BB:CC:DD:EE:01"
MAC_B = "AA:BB:CC:DD:EE:02"


def counter(ts, delta, node="counter-1"):
    return Reading(None, ts, node, "people-counter", float(delta),
                   KIND_UNITS["people-counter"])


def make_tracker(rooms=("lab",)):
    tr = OccupancyTracker(rooms, lease_ms=LEASE)
    for room in rooms:
        tr.bind_node(f"counter-{room}", room)
    return tr


def oracle_estimate(events, at, lease=LEASE):
    """Full re-scan of the trace: clamped counter cumsum + live MAC count."""
    cum = 0
    for ts, kind, arg in events:
        if kind == "counter" and ts <= at:
            cum = max(0, cum + arg)
    seen = {}
    for ts, kind, arg in events:
        if kind == "mac" and ts <= at:
            seen[arg] = max(seen.get(arg, 0), ts)
    live = sum(1 for ts in seen.values() if at < ts + lease)
    return max(cum, live), cum, live


def test_counter_plus_one_from_empty():
    tr = make_tracker()
    est = tr.update(counter(1000, +1), room_id="lab")
    assert est.count == 1 and est.confidence == "High"  # |1 - 0| <= 1


def test_counter_clamps_at_zero():
    tr = make_tracker()
    est = tr.update(counter(1000, -1), room_id="lab")
    assert est.count == 0
    # clamped state means a later +1 lands on 0, not -1
    est = tr.update(counter(2000, +1), room_id="lab")
    assert est.count == 1


def test_two_macs_cumulative_zero_is_low_confidence():
    tr = make_tracker()
    tr.update(PresenceSighting(MAC_A, "lab", 1000, -60))
    est = tr.update(PresenceSighting(MAC_B, "lab", 1500, -58))
    assert est.count == 2
    assert est.confidence == "Low"  # gap of 2 between counter and macs
    assert est.known_macs == frozenset({MAC_A, MAC_B})


def test_lease_expiry():
    tr = make_tracker()
    tr.update(PresenceSighting(MAC_A, "lab", 1000, -60))
    assert tr.current_estimate("lab", 1000 + LEASE - 1).count == 1
    assert tr.current_estimate("lab", 1000 + LEASE + 1).count == 0
    assert tr.present_macs("lab", 1000 + LEASE + 1) == frozenset()


def test_refresh_within_lease_keeps_mac_alive():
    tr = make_tracker()
    tr.update(PresenceSighting(MAC_A, "lab", 1000, -60))
    tr.update(PresenceSighting(MAC_A, "lab", 1000 + LEASE // 2, -61))
    at = 1000 + LEASE + LEASE // 4
    assert tr.present_macs("lab", at) == frozenset({MAC_A})


def test_unknown_room_raises():
    tr = make_tracker()
    with pytest.raises(RoomUnknown):
        tr.current_estimate("attic", 0)
    with pytest.raises(RoomUnknown):
        tr.update(PresenceSighting(MAC_A, "attic", 0, -60))


def test_plus_then_minus_restores_prior():
    tr = make_tracker()
    tr.update(counter(1000, +1), room_id="lab")
    tr.update(counter(2000, +1), room_id="lab")
    before = tr.current_estimate("lab", 2000).count
    tr.update(counter(3000, +1), room_id="lab")
    tr.update(counter(3000, -1), room_id="lab")
    assert tr.current_estimate("lab", 3000).count == before


def random_trace(rng, n_events, horizon=3_600_000):
    events = []
    t = 0
    for _ in range(n_events):
        t += rng.randint(1, horizon // max(n_events, 1))
        if rng.random() < 0.5:
            events.append((t, "counter", rng.choice([1, 1, 1, -1, -1])))
        else:
            events.append((t, "mac", rng.choice([MAC_A, MAC_B, "AA:BB:CC:DD:EE:03"])))
    return events


def replay(tr, events, room="lab"):
    for ts, kind, arg in events:
        if kind == "counter":
            tr.update(counter(ts, arg), room_id=room)
        else:
            tr.update(PresenceSighting(arg, room, ts, -60))


def test_incremental_equals_batch_oracle_random_traces():
    rng = random.Random(1234)
    for trial in range(25):
        events = random_trace(rng, rng.randint(1, 300))
        tr = make_tracker()
        replay(tr, events)
        end = events[-1][0] + LEASE * 2
        for _ in range(20):
            at = rng.randint(0, end)
            want_count, want_cum, want_live = oracle_estimate(events, at)
            est = tr.current_estimate("lab", at)
            assert est.count == want_count, (trial, at)
            assert len(est.known_macs) == want_live


def test_absence_always_occupied_is_empty():
    tr = make_tracker()
    tr.update(counter(0, +1), room_id="lab")
    assert tr.absence_intervals("lab", 0, 10_000_000, 60_000) == []


def test_absence_single_gap():
    tr = make_tracker()
    tr.update(counter(0, +1), room_id="lab")
    tr.update(counter(1_000_000, -1), room_id="lab")
    tr.update(counter(2_000_000, +1), room_id="lab")
    got = tr.absence_intervals("lab", 0, 3_000_000, 600_000)
    assert got == [AbsenceInterval("lab", 1_000_000, 2_000_000)]


def test_absence_short_gap_not_reported():
    tr = make_tracker()
    tr.update(counter(0, +1), room_id="lab")
    tr.update(counter(1_000_000, -1), room_id="lab")
    tr.update(counter(1_400_000, +1), room_id="lab")
    assert tr.absence_intervals("lab", 0, 3_000_000, 600_000) == []


def test_absence_open_interval_at_range_end():
    tr = make_tracker()
    tr.update(counter(0, +1), room_id="lab")
    tr.update(counter(500_000, -1), room_id="lab")
    got = tr.absence_intervals("lab", 0, 2_000_000, 600_000)
    assert got == [AbsenceInterval("lab", 500_000, None)]


def test_absence_respects_mac_lease_boundary():
    tr = make_tracker()
    tr.update(PresenceSighting(MAC_A, "lab", 100_000, -60))
    got = tr.absence_intervals("lab", 0, 2_000_000, 60_000)
    # empty before the sighting, occupied during lease, empty after expiry
    assert got == [AbsenceInterval("lab", 0, 100_000),
                   AbsenceInterval("lab", 100_000 + LEASE, None)]


def test_duality_tiling_random_traces():
    # absence intervals + positive spans + sub-min_gap zero spans tile the range
    rng = random.Random(777)
    for _ in range(15):
        events = random_trace(rng, rng.randint(1, 120))
        tr = make_tracker()
        replay(tr, events)
        lo, hi = 0, events[-1][0] + LEASE
        min_gap = 120_000
        intervals = tr.absence_intervals("lab", lo, hi, min_gap)
        for iv in intervals:
            end = hi if iv.end_ms is None else iv.end_ms
            assert end - iv.start_ms >= min_gap
            # zero throughout (probe interior points)
            for frac in (0.0, 0.5, 0.99):
                at = iv.start_ms + int((end - 1 - iv.start_ms) * frac)
                assert oracle_estimate(events, at)[0] == 0
        # intervals are disjoint and ordered
        for a, b in zip(intervals, intervals[1:]):
            assert (a.end_ms or hi) <= b.start_ms
        # complement contains no zero-run of >= min_gap (checked via oracle scan)
        bounds = sorted({ts for ts, _, _ in events} | {ts + LEASE for ts, k, _ in events if k == "mac"}
                        | {lo, hi})
        bounds = [b for b in bounds if lo <= b <= hi]
        run_start = None
        oracle_runs = []
        for i, b in enumerate(bounds[:-1]):
            zero = oracle_estimate(events, b)[0] == 0
            if zero and run_start is None:
                run_start = b
            if not zero and run_start is not None:
                oracle_runs.append((run_start, b))
                run_start = None
        if run_start is not None:
            oracle_runs.append((run_start, hi))
        long_runs = [(a, b) for a, b in oracle_runs if b - a >= min_gap]
        got = [(iv.start_ms, hi if iv.end_ms is None else iv.end_ms) for iv in intervals]
        assert got == long_runs


def test_equal_timestamp_sightings_order_independent():
    tr1 = make_tracker()
    tr1.update(PresenceSighting(MAC_A, "lab", 1000, -60))
    tr1.update(PresenceSighting(MAC_B, "lab", 1000, -55))
    tr2 = make_tracker()
    tr2.update(PresenceSighting(MAC_B, "lab", 1000, -55))
    tr2.update(PresenceSighting(MAC_A, "lab", 1000, -60))
    for at in (1000, 1000 + LEASE - 1, 1000 + LEASE):
        assert tr1.present_macs("lab", at) == tr2.present_macs("lab", at)
        assert tr1.current_estimate("lab", at) == tr2.current_estimate("lab", at)
