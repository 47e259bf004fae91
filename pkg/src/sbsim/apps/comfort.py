"""Comfort/hospitality app: feedback votes and preferred-temperature fits.

The preference model is a least-squares line vote = a * (temp - T_pref)
with a > 0; T_pref is its zero crossing. With fewer than 5 votes, fewer
than 2 distinct temperatures, or a non-positive fitted slope, it falls
back to the median temperature among neutral (vote 0) ballots, and
reports Insufficient (None) when even that is empty.
"""

import statistics
from dataclasses import dataclass
from typing import Optional, Sequence

from ..bus import Bus
from ..errors import VoteOutOfRange

MIN_VOTES_FOR_FIT = 5


@dataclass(frozen=True)
class ComfortFeedback:
    user: str
    room_id: str
    ts_ms: int
    thermal_vote: int
    humidity_vote: int
    temp_at_vote_c: float

    def __post_init__(self):
        for name, vote in (("thermal_vote", self.thermal_vote),
                           ("humidity_vote", self.humidity_vote)):
            if not isinstance(vote, int) or isinstance(vote, bool) or not -2 <= vote <= 2:
                raise VoteOutOfRange(f"{name}={vote!r} not an integer in [-2, 2]")
        if not isinstance(self.temp_at_vote_c, (int, float)) \
                or self.temp_at_vote_c != self.temp_at_vote_c:
            raise VoteOutOfRange(f"temp_at_vote_c={self.temp_at_vote_c!r} not finite")


def estimate_preference(samples: Sequence[tuple[float, float]]) -> Optional[float]:
    """T_pref from (temperature, vote) pairs; None when insufficient.

    Closed form: with a = Cov(T, v)/Var(T),
        T_pref = mean(T) - mean(v)/a = mean(T) - mean(v) * Var(T)/Cov(T, v).
    """
    fitted = _fit(samples)
    if fitted is not None:
        return fitted
    neutral = [t for t, v in samples if v == 0]
    if neutral:
        return float(statistics.median(neutral))
    return None


def _fit(samples: Sequence[tuple[float, float]]) -> Optional[float]:
    n = len(samples)
    if n < MIN_VOTES_FOR_FIT:
        return None
    temps = [t for t, _ in samples]
    votes = [v for _, v in samples]
    if len(set(temps)) < 2:
        return None
    mean_t = sum(temps) / n
    mean_v = sum(votes) / n
    var_t = sum((t - mean_t) ** 2 for t in temps)
    cov = sum((t - mean_t) * (v - mean_v) for t, v in samples)
    if cov <= 0:  # slope a = cov/var must be positive (warmer => warmer votes)
        return None
    return mean_t - mean_v * var_t / cov


class FeedbackLog:
    """Votes keyed by (room, user); kept apart from the sensor store."""

    def __init__(self):
        self._votes: list[ComfortFeedback] = []
        self._counts: dict[tuple[str, str], int] = {}

    def add(self, fb: ComfortFeedback) -> int:
        self._votes.append(fb)
        key = (fb.room_id, fb.user)
        self._counts[key] = self._counts.get(key, 0) + 1
        return self._counts[key]

    def count(self, room_id: str, user: str) -> int:
        return self._counts.get((room_id, user), 0)

    def for_room(self, room_id: str) -> list[ComfortFeedback]:
        return [fb for fb in self._votes if fb.room_id == room_id]

    def for_user(self, user: str) -> list[ComfortFeedback]:
        return [fb for fb in self._votes if fb.user == user]

    def __len__(self) -> int:
        return len(self._votes)


class ComfortApp:
    """Bus service 'comfort': record votes, serve preference estimates."""

    name = "comfort"

    def __init__(self, bus: Bus):
        self.bus = bus
        self.log = FeedbackLog()
        self.latest_temp: dict[str, float] = {}
        self._sub = bus.subscribe("readings.*", self._on_reading)
        self._reg = bus.register(self.name, {"submit", "preference"}, self._handle)

    def close(self) -> None:
        self._sub.close()
        self._reg.close()

    def _on_reading(self, topic: str, payload) -> None:
        if payload.get("kind") == "temperature" and "room" in payload:
            self.latest_temp[payload["room"]] = payload["value"]

    def preference_for_room(self, room_id: str) -> Optional[float]:
        votes = self.log.for_room(room_id)
        return estimate_preference([(fb.temp_at_vote_c, fb.thermal_vote) for fb in votes])

    def preference_for_user(self, user: str) -> Optional[float]:
        votes = self.log.for_user(user)
        return estimate_preference([(fb.temp_at_vote_c, fb.thermal_vote) for fb in votes])

    def _handle(self, operation: str, payload):
        payload = payload or {}
        if operation == "preference":
            if "user" in payload:
                return {"t_pref": self.preference_for_user(payload["user"])}
            return {"t_pref": self.preference_for_room(payload["room"])}
        temp = payload.get("temp_c")
        if temp is None:
            temp = self.latest_temp.get(payload["room"])
        if temp is None:
            raise VoteOutOfRange(f"no temperature known for room {payload.get('room')!r}; "
                                 "pass temp_c explicitly")
        fb = ComfortFeedback(
            user=payload["user"], room_id=payload["room"], ts_ms=payload["ts"],
            thermal_vote=payload["thermal_vote"], humidity_vote=payload["humidity_vote"],
            temp_at_vote_c=float(temp),
        )
        count = self.log.add(fb)
        return {"count": count, "t_pref": self.preference_for_room(fb.room_id)}
