"""State, update and evaluation functions for the three trust metrics.

Every function here is pure: states are frozen dataclasses and an update
returns a new state.

=========  ==========================  ==========================  ==========
metric     stored state                update                      reputation
=========  ==========================  ==========================  ==========
simple     one float ``trust``          ``a*trust + (1-a)*xi``      ``trust``
wtm        FIFO of at most ``k``        append, drop oldest         sum r /
           ratings                                                 sum |r|
wses       pair ``(p1, p2)``            smooth p1 on r > 0,         (p1-p2) /
                                        p2 on r < 0                 (p1+p2)
=========  ==========================  ==========================  ==========
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Optional, Union

SIMPLE = "simple"
WTM = "wtm"
WSES = "wses"
METRIC_KINDS = (SIMPLE, WTM, WSES)

DEFAULT_ALPHA = 0.5
DEFAULT_CAPACITY = 10
INITIAL_TRUST = 0.5


class MetricError(ValueError):
    """Base class for rejected metric inputs."""


class OutOfRangeError(MetricError):
    pass


class NoTrafficError(MetricError):
    """Raised when a delivery rate is requested for a round with nothing sent."""


class InvalidCountError(MetricError):
    """Raised when more packets were delivered than sent."""


@dataclass(frozen=True)
class RatingRange:
    low: float
    high: float
    low_open: bool = False

    def __contains__(self, value: float) -> bool:
        if self.low_open:
            return self.low < value <= self.high
        return self.low <= value <= self.high

    def __str__(self) -> str:
        return f"{'(' if self.low_open else '['}{self.low:g},{self.high:g}]"


# Ratings the Simple metric treats as evidence (a delivery rate of 0 is still
# accepted by simple_update, it is just never a "good" rating).
SIMPLE_RATINGS = RatingRange(0.0, 1.0, low_open=True)
DELIVERY_RATES = RatingRange(0.0, 1.0)
SIGNED_RATINGS = RatingRange(-1.0, 1.0)


def rating_range(kind: str) -> RatingRange:
    if kind == SIMPLE:
        return SIMPLE_RATINGS
    if kind in (WTM, WSES):
        return SIGNED_RATINGS
    raise ValueError(f"unknown metric kind: {kind!r}")


def _check_rating(value: float, allowed: RatingRange) -> float:
    if value not in allowed:
        raise OutOfRangeError(f"rating {value!r} outside {allowed}")
    return float(value)


@dataclass(frozen=True)
class MetricParams:
    alpha: float = DEFAULT_ALPHA
    capacity: int = DEFAULT_CAPACITY

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie strictly between 0 and 1, got {self.alpha!r}")
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise ValueError(f"capacity must be a positive integer, got {self.capacity!r}")


@dataclass(frozen=True)
class SimpleState:
    trust: float = INITIAL_TRUST
    round: int = 0


@dataclass(frozen=True)
class WtmState:
    ratings: tuple[float, ...] = ()
    capacity: int = DEFAULT_CAPACITY


@dataclass(frozen=True)
class WsesState:
    p1: float = 0.0
    p2: float = 0.0


MetricState = Union[SimpleState, WtmState, WsesState]


class Classification(str, enum.Enum):
    GOOD = "good"
    BAD = "bad"
    NEUTRAL = "neutral"


# --- Simple -----------------------------------------------------------------


def simple_init() -> SimpleState:
    return SimpleState(trust=INITIAL_TRUST, round=0)


def delivery_rate(delivered: int, sent: int) -> float:
    """Fraction of the packets sent in a round that reached the root."""
    if sent < 0 or delivered < 0:
        raise InvalidCountError(f"negative packet count (delivered={delivered}, sent={sent})")
    if sent == 0:
        raise NoTrafficError("no packets were sent in this round")
    if delivered > sent:
        raise InvalidCountError(f"delivered={delivered} exceeds sent={sent}")
    return delivered / sent


def simple_update(
    state: SimpleState, xi: float, params: MetricParams, is_parent: bool = True
) -> SimpleState:
    """Advance one trust round.

    Only the current parent is smoothed towards ``xi``; every other
    candidate keeps its trust and just moves to the next round.
    """
    xi = _check_rating(xi, DELIVERY_RATES)
    if not is_parent:
        return SimpleState(trust=state.trust, round=state.round + 1)
    alpha = params.alpha
    return SimpleState(trust=alpha * state.trust + (1 - alpha) * xi, round=state.round + 1)


def simple_reputation(state: SimpleState) -> float:
    return state.trust


# --- WTM --------------------------------------------------------------------


def wtm_init(capacity: int = DEFAULT_CAPACITY) -> WtmState:
    return WtmState(ratings=(), capacity=capacity)


def wtm_update(state: WtmState, r: float) -> WtmState:
    r = _check_rating(r, SIGNED_RATINGS)
    ratings = state.ratings + (r,)
    if len(ratings) > state.capacity:
        ratings = ratings[len(ratings) - state.capacity:]
    return WtmState(ratings=ratings, capacity=state.capacity)


def wtm_reputation(state: WtmState) -> float:
    strength = sum(abs(r) for r in state.ratings)
    if strength == 0:
        return 0.0
    return sum(state.ratings) / strength


# --- WSES -------------------------------------------------------------------


def wses_init() -> WsesState:
    return WsesState(0.0, 0.0)


def wses_update(state: WsesState, r: float, params: MetricParams) -> WsesState:
    r = _check_rating(r, SIGNED_RATINGS)
    alpha = params.alpha
    if r > 0:
        return WsesState(state.p1 * alpha + (1 - alpha) * r, state.p2 * alpha)
    if r < 0:
        return WsesState(state.p1 * alpha, state.p2 * alpha - (1 - alpha) * r)
    return state


def wses_reputation(state: WsesState) -> float:
    total = state.p1 + state.p2
    if total == 0:
        return 0.0
    return (state.p1 - state.p2) / total


# --- generic dispatch -------------------------------------------------------


def classify_rating(kind: str, r: float, previous: Optional[float] = None) -> Classification:
    """Good/bad/neutral relative to the metric's threshold.

    The Simple metric compares against the previous trust value, the signed
    metrics against 0. Comparisons are exact.
    """
    if kind == SIMPLE:
        if previous is None:
            raise ValueError("the simple metric classifies relative to the previous trust value")
        threshold = previous
    elif kind in (WTM, WSES):
        threshold = 0.0
    else:
        raise ValueError(f"unknown metric kind: {kind!r}")
    if r > threshold:
        return Classification.GOOD
    if r < threshold:
        return Classification.BAD
    return Classification.NEUTRAL


def initial_state(kind: str, params: MetricParams) -> MetricState:
    if kind == SIMPLE:
        return simple_init()
    if kind == WTM:
        return wtm_init(params.capacity)
    if kind == WSES:
        return wses_init()
    raise ValueError(f"unknown metric kind: {kind!r}")


def update(kind: str, state: MetricState, r: float, params: MetricParams) -> MetricState:
    """Add one rating; the Simple metric is updated as the current parent."""
    if kind == SIMPLE:
        return simple_update(state, r, params, is_parent=True)
    if kind == WTM:
        return wtm_update(state, r)
    if kind == WSES:
        return wses_update(state, r, params)
    raise ValueError(f"unknown metric kind: {kind!r}")


def reputation(state: MetricState) -> float:
    if isinstance(state, SimpleState):
        return simple_reputation(state)
    if isinstance(state, WtmState):
        return wtm_reputation(state)
    if isinstance(state, WsesState):
        return wses_reputation(state)
    raise TypeError(f"not a metric state: {state!r}")


def previous_reputation_context(state: MetricState) -> Optional[float]:
    """Threshold context for classify_rating (only the Simple metric needs one)."""
    return state.trust if isinstance(state, SimpleState) else None


def state_to_dict(state: MetricState) -> dict[str, Any]:
    if isinstance(state, SimpleState):
        return {"trust": state.trust, "round": state.round}
    if isinstance(state, WtmState):
        return {"ratings": list(state.ratings), "capacity": state.capacity}
    if isinstance(state, WsesState):
        return {"p1": state.p1, "p2": state.p2}
    raise TypeError(f"not a metric state: {state!r}")


def state_from_dict(kind: str, data: dict[str, Any]) -> MetricState:
    if kind == SIMPLE:
        return SimpleState(trust=float(data["trust"]), round=int(data.get("round", 0)))
    if kind == WTM:
        return WtmState(ratings=tuple(float(r) for r in data["ratings"]), capacity=int(data["capacity"]))
    if kind == WSES:
        return WsesState(float(data["p1"]), float(data["p2"]))
    raise ValueError(f"unknown metric kind: {kind!r}")
