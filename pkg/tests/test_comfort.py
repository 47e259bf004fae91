"""Feedback log and the preferred-temperature estimator."""

import numpy as np
import pytest

from sbsim.apps.comfort import (ComfortApp, ComfortFeedback, FeedbackLog,
                                estimate_preference)
from sbsim.bus import Bus
from sbsim.clock import LogicalClock
from sbsim.errors import VoteOutOfRange


def fb(user="u1", room="lab", ts=0, thermal=0, humidity=0, temp=22.0):
    return ComfortFeedback(user, room, ts, thermal, humidity, temp)


def test_first_vote_counts_one():
    log = FeedbackLog()
    assert log.add(fb()) == 1
    assert log.add(fb()) == 2
    assert log.add(fb(user="u2")) == 1


def test_vote_out_of_range():
    with pytest.raises(VoteOutOfRange):
        fb(thermal=3)
    with pytest.raises(VoteOutOfRange):
        fb(humidity=-3)
    with pytest.raises(VoteOutOfRange):
        fb(temp=float("nan"))


def test_per_room_user_counts():
    log = FeedbackLog()
    votes = [("u1", "lab"), ("u1", "lab"), ("u2", "lab"), ("u1", "den"),
             ("u3", "den"), ("u3", "den"), ("u3", "den"), ("u2", "lab"),
             ("u2", "lab"), ("u1", "lab")]
    for user, room in votes:
        log.add(fb(user=user, room=room))
    assert log.count("lab", "u1") == 3
    assert log.count("lab", "u2") == 3
    assert log.count("den", "u3") == 3
    assert log.count("den", "u1") == 1
    assert len(log) == 10


def test_exact_linear_data_recovers_zero_crossing():
    # value forced by the fallback (3 votes, neutral median) and by the fit alike
    assert estimate_preference([(20, -2), (22, 0), (24, 2)]) == 22.0


def test_all_zero_votes_fall_back_to_median():
    assert estimate_preference([(21, 0), (22, 0), (23, 0)]) == 22.0


def test_insufficient_when_nothing_usable():
    assert estimate_preference([]) is None
    assert estimate_preference([(21, 1), (22, 1)]) is None  # no zero votes, no fit


def test_single_temperature_cannot_fit():
    votes = [(22.0, v) for v in (-1, 0, 1, 0, -1)]
    assert estimate_preference(votes) == 22.0  # falls back to neutral median


def test_negative_slope_rejected():
    # colder rooms voted warmer: slope < 0, not a valid comfort model
    votes = [(18, 2), (20, 1), (22, 0), (24, -1), (26, -2)]
    assert estimate_preference(votes) == 22.0  # fallback median of neutral votes


def test_noise_free_fit_is_exact_to_1e9():
    t_pref, a = 22.0, 0.5
    votes = [(t, a * (t - t_pref)) for t in (18.0, 20.0, 22.0, 24.0, 26.0)]
    assert abs(estimate_preference(votes) - t_pref) < 1e-9


def test_planted_preference_recovered_within_half_degree():
    # oracle: closed-form least squares (numpy polyfit) on the same sample
    rng = np.random.default_rng(2024)
    t_pref, a, sigma = 23.0, 0.8, 0.3
    hits = 0
    for _ in range(100):
        temps = rng.uniform(18, 26, size=50)
        votes = a * (temps - t_pref) + rng.normal(0, sigma, size=50)
        est = estimate_preference(list(zip(temps, votes)))
        slope, intercept = np.polyfit(temps, votes, 1)
        oracle = -intercept / slope
        assert abs(est - oracle) < 1e-9  # same least-squares answer
        if abs(est - t_pref) <= 0.5:
            hits += 1
    assert hits >= 95


def test_app_submit_and_preference_over_bus():
    clock = LogicalClock()
    bus = Bus(clock)
    app = ComfortApp(bus)
    bus.publish("readings.lab.temperature",
                {"ts": 0, "tick": 0, "node": "tag-1", "room": "lab",
                 "kind": "temperature", "value": 21.0, "unit": "celsius"})
    reply = bus.request("comfort", "submit",
                        {"user": "u1", "room": "lab", "ts": 1000,
                         "thermal_vote": 0, "humidity_vote": 0}, timeout_ticks=5)
    assert reply.ok and reply.value["count"] == 1
    assert reply.value["t_pref"] == 21.0  # neutral vote at the room's latest temp
    for i, (temp, vote) in enumerate([(18.0, -2), (20.0, -1), (22.0, 1), (24.0, 2)]):
        bus.request("comfort", "submit",
                    {"user": "u1", "room": "lab", "ts": 2000 + i,
                     "thermal_vote": vote, "humidity_vote": 0, "temp_c": temp},
                    timeout_ticks=5)
    pref = bus.request("comfort", "preference", {"room": "lab"}, timeout_ticks=5)
    assert pref.ok and pref.value["t_pref"] is not None
    by_user = bus.request("comfort", "preference", {"user": "u1"}, timeout_ticks=5)
    assert by_user.ok


def test_app_rejects_out_of_range_via_fault():
    clock = LogicalClock()
    bus = Bus(clock)
    ComfortApp(bus)
    reply = bus.request("comfort", "submit",
                        {"user": "u1", "room": "lab", "ts": 0, "thermal_vote": 9,
                         "humidity_vote": 0, "temp_c": 21.0}, timeout_ticks=5)
    assert reply.fault is not None and reply.fault.code == "HandlerFault"
