"""Executable forms of the two trust-metric requirements.

R1
    For two good ratings ``r1 > r2`` added to the same state, the reputation
    after ``r1`` is strictly greater than after ``r2``, unless the ``r2``
    branch already evaluates to exactly 1.
R2
    A good rating strictly increases the reputation, unless it already is
    exactly 1.

"Good" is metric specific: strictly above the previous trust for the Simple
metric, strictly above 0 for WTM and WSES. Candidates that fail this
precondition are discarded and never counted as trials.

Counterexamples are searched either on an exhaustive rating grid or by seeded
random sampling; every reported witness can be re-checked with :func:`replay`.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

from e2etrust import metrics
from e2etrust.metrics import (
    SIMPLE,
    WSES,
    WTM,
    Classification,
    MetricParams,
    MetricState,
)

GRID = "grid"
RANDOMIZED = "randomized"
SEARCH_MODES = (GRID, RANDOMIZED)

DEFAULT_STEP = 0.1
DEFAULT_DEPTH = 3
MAX_WSES_HISTORY = 8
ATTEMPTS_PER_TRIAL = 1000


class Requirement(str, enum.Enum):
    R1 = "R1"
    R2 = "R2"

    @classmethod
    def parse(cls, text: str) -> "Requirement":
        try:
            return cls(text.upper())
        except ValueError:
            raise ValueError(f"unknown requirement: {text!r}") from None


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    VIOLATED = "violated"


class InvalidTrialError(ValueError):
    """The candidate ratings do not satisfy the requirement's precondition."""


class CorruptCounterexampleError(ValueError):
    """Recorded reputations do not match a recomputation."""


@dataclass(frozen=True)
class MetricUnderTest:
    kind: str
    params: MetricParams = field(default_factory=MetricParams)

    def __post_init__(self):
        if self.kind not in metrics.METRIC_KINDS:
            raise ValueError(f"unknown metric kind: {self.kind!r}")

    def params_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {}
        if self.kind in (SIMPLE, WSES):
            data["alpha"] = self.params.alpha
        if self.kind == WTM:
            data["k"] = self.params.capacity
        return data


@dataclass(frozen=True)
class SearchConfig:
    mode: str = RANDOMIZED
    trials: int = 1000
    seed: int = 0
    step: float = DEFAULT_STEP
    depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        if self.mode not in SEARCH_MODES:
            raise ValueError(f"unknown search mode: {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.step > 0 or 2.0 / self.step < 1:
            raise ValueError("grid step must split [-1, 1] into at least two points")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")

    def to_dict(self) -> dict[str, Any]:
        return {"mode": self.mode, "trials": self.trials, "seed": self.seed,
                "step": self.step, "depth": self.depth}


@dataclass(frozen=True)
class Counterexample:
    state: MetricState
    ratings: tuple[float, ...]
    reputations: dict[str, float]

    @property
    def requirement(self) -> Requirement:
        return Requirement.R1 if len(self.ratings) == 2 else Requirement.R2

    def to_dict(self) -> dict[str, Any]:
        return {
            "state": metrics.state_to_dict(self.state),
            "ratings": list(self.ratings),
            "reputations": dict(self.reputations),
        }

    @classmethod
    def from_dict(cls, kind: str, data: dict[str, Any]) -> "Counterexample":
        return cls(
            state=metrics.state_from_dict(kind, data["state"]),
            ratings=tuple(float(r) for r in data["ratings"]),
            reputations={k: float(v) for k, v in data["reputations"].items()},
        )


@dataclass
class SearchReport:
    metric: MetricUnderTest
    requirement: Requirement
    config: SearchConfig
    trials_run: int = 0
    violations: list[Counterexample] = field(default_factory=list)

    @property
    def fulfilled(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric.kind,
            "params": self.metric.params_dict(),
            "requirement": self.requirement.value,
            "config": self.config.to_dict(),
            "trials_run": self.trials_run,
            "violations": [v.to_dict() for v in self.violations],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SearchReport":
        kind = data["metric"]
        params = data.get("params", {})
        metric = MetricUnderTest(kind, MetricParams(
            alpha=params.get("alpha", metrics.DEFAULT_ALPHA),
            capacity=params.get("k", metrics.DEFAULT_CAPACITY),
        ))
        return cls(
            metric=metric,
            requirement=Requirement.parse(data["requirement"]),
            config=SearchConfig(**data["config"]),
            trials_run=int(data["trials_run"]),
            violations=[Counterexample.from_dict(kind, v) for v in data["violations"]],
        )


def is_good(metric: MetricUnderTest, state: MetricState, r: float) -> bool:
    threshold = state.trust if metric.kind == SIMPLE else 0.0
    # cheap rejection first; classify_rating stays the authority
    if not r > threshold or r not in metrics.rating_range(metric.kind):
        return False
    context = metrics.previous_reputation_context(state)
    return metrics.classify_rating(metric.kind, r, context) is Classification.GOOD


def precondition_holds(metric: MetricUnderTest, state: MetricState, ratings: tuple[float, ...]) -> bool:
    if len(ratings) == 2:
        r1, r2 = ratings
        return r1 > r2 and is_good(metric, state, r2) and is_good(metric, state, r1)
    return len(ratings) == 1 and is_good(metric, state, ratings[0])


def _r1_outcome(metric, state, r1, r2) -> tuple[bool, dict[str, float]]:
    if not r1 > r2:
        raise InvalidTrialError(f"R1 needs r1 > r2, got r1={r1!r}, r2={r2!r}")
    if not (is_good(metric, state, r2) and is_good(metric, state, r1)):
        raise InvalidTrialError(f"R1 needs two good ratings, got {r1!r} and {r2!r}")
    return _evaluate(metric, state, (r1, r2))


def _r2_outcome(metric, state, r) -> tuple[bool, dict[str, float]]:
    if not is_good(metric, state, r):
        raise InvalidTrialError(f"R2 needs a good rating, got {r!r}")
    return _evaluate(metric, state, (r,))


def _evaluate(metric, state, ratings) -> tuple[bool, dict[str, float]]:
    before = metrics.reputation(state)
    if len(ratings) == 2:
        r1, r2 = ratings
        tau1 = metrics.reputation(metrics.update(metric.kind, state, r1, metric.params))
        tau2 = metrics.reputation(metrics.update(metric.kind, state, r2, metric.params))
        reputations = {"before": before, "after_r1": tau1, "after_r2": tau2}
        return tau1 > tau2 or tau2 == 1.0, reputations
    after = metrics.reputation(metrics.update(metric.kind, state, ratings[0], metric.params))
    return after > before or before == 1.0, {"before": before, "after": after}


def _verdict(holds: bool) -> Verdict:
    return Verdict.HOLDS if holds else Verdict.VIOLATED


def check_r1_once(metric: MetricUnderTest, state: MetricState, r1: float, r2: float) -> Verdict:
    return _verdict(_r1_outcome(metric, state, r1, r2)[0])


def check_r2_once(metric: MetricUnderTest, state: MetricState, r: float) -> Verdict:
    return _verdict(_r2_outcome(metric, state, r)[0])


def _outcome(metric, state, ratings) -> tuple[bool, dict[str, float]]:
    if len(ratings) == 2:
        return _r1_outcome(metric, state, *ratings)
    if len(ratings) == 1:
        return _r2_outcome(metric, state, ratings[0])
    raise CorruptCounterexampleError(f"expected one or two ratings, got {len(ratings)}")


def replay(counterexample: Counterexample, metric: MetricUnderTest) -> Verdict:
    """Recompute a recorded trial and return its verdict.

    Raises CorruptCounterexampleError when the stored reputations differ
    from the recomputed ones, or when the ratings no longer pass the
    precondition.
    """
    try:
        holds, reputations = _outcome(metric, counterexample.state, counterexample.ratings)
    except InvalidTrialError as exc:
        raise CorruptCounterexampleError(str(exc)) from exc
    if reputations != counterexample.reputations:
        raise CorruptCounterexampleError(
            f"recorded reputations {counterexample.reputations} do not match {reputations}"
        )
    return _verdict(holds)


# --- candidate generation ---------------------------------------------------


def rating_grid(step: float) -> list[float]:
    """Evenly spaced points over [-1, 1], rounded so 0.1-steps are exact decimals."""
    n = int(round(2.0 / step))
    points = sorted({round(-1.0 + i * step, 12) for i in range(n + 1)} | {1.0})
    return [0.0 if p == 0 else p for p in points if -1.0 <= p <= 1.0]


def reachable_states(metric: MetricUnderTest, ratings: list[float], depth: int) -> list[MetricState]:
    """All states reachable from the initial state by at most ``depth`` ratings."""
    start = metrics.initial_state(metric.kind, metric.params)
    seen = {start}
    order = [start]
    frontier = [start]
    for _ in range(depth):
        nxt = []
        for state in frontier:
            for r in ratings:
                new = metrics.update(metric.kind, state, r, metric.params)
                if new not in seen:
                    seen.add(new)
                    order.append(new)
                    nxt.append(new)
        frontier = nxt
    return order


def _grid_states(metric: MetricUnderTest, config: SearchConfig) -> list[MetricState]:
    grid = rating_grid(config.step)
    legal = [r for r in grid if r in metrics.rating_range(metric.kind)]
    states = reachable_states(metric, legal, config.depth)
    if metric.kind == SIMPLE:
        # Every trust value in [0, 1] is a legal state, not only reachable ones.
        known = set(states)
        for t in grid:
            if t >= 0 and metrics.SimpleState(trust=t) not in known:
                states.append(metrics.SimpleState(trust=t))
    return states


def _grid_candidates(metric, requirement, config) -> Iterator[tuple[MetricState, tuple[float, ...]]]:
    legal = [r for r in rating_grid(config.step) if r in metrics.rating_range(metric.kind)]
    for state in _grid_states(metric, config):
        good = [r for r in legal if is_good(metric, state, r)]
        if requirement is Requirement.R2:
            for r in good:
                yield state, (r,)
        else:
            for i, r1 in enumerate(good):
                for r2 in good[:i]:
                    yield state, (r1, r2)


def _random_rating(kind: str, rng: random.Random) -> float:
    if kind == SIMPLE:
        return 1.0 - rng.random()
    return rng.uniform(-1.0, 1.0)


def _random_ratings(kind: str, rng: random.Random, count: int) -> tuple[float, ...]:
    if count == 1:
        return (_random_rating(kind, rng),)
    a, b = _random_rating(kind, rng), _random_rating(kind, rng)
    return (a, b) if a >= b else (b, a)


def _random_state(metric: MetricUnderTest, rng: random.Random) -> MetricState:
    if metric.kind == SIMPLE:
        return metrics.SimpleState(trust=rng.random())
    if metric.kind == WTM:
        history = rng.randint(0, 2 * metric.params.capacity)
    else:
        history = rng.randint(0, MAX_WSES_HISTORY)
    state = metrics.initial_state(metric.kind, metric.params)
    for _ in range(history):
        state = metrics.update(metric.kind, state, rng.uniform(-1.0, 1.0), metric.params)
    return state


def _random_candidates(metric, requirement, config) -> Iterator[tuple[MetricState, tuple[float, ...]]]:
    rng = random.Random(config.seed)
    wanted = 2 if requirement is Requirement.R1 else 1
    simple = metric.kind == SIMPLE
    for _ in range(config.trials * ATTEMPTS_PER_TRIAL):
        if simple:
            # Draw the trust value bare so hopeless candidates cost no state object.
            trust = rng.random()
            ratings = _random_ratings(metric.kind, rng, wanted)
            if ratings[-1] <= trust:
                continue
            yield metrics.SimpleState(trust=trust), ratings
        else:
            state = _random_state(metric, rng)
            yield state, _random_ratings(metric.kind, rng, wanted)


def search_counterexamples(
    metric: MetricUnderTest, requirement: Requirement, config: SearchConfig
) -> SearchReport:
    """Run every candidate trial and collect the violations.

    In randomized mode the search stops once ``config.trials`` candidates
    have passed the precondition; grid mode ignores ``trials`` and runs the
    full enumeration.
    """
    requirement = Requirement(requirement)
    report = SearchReport(metric=metric, requirement=requirement, config=config)
    if config.mode == GRID:
        candidates = _grid_candidates(metric, requirement, config)
    else:
        candidates = _random_candidates(metric, requirement, config)
    for state, ratings in candidates:
        if not precondition_holds(metric, state, ratings):
            continue
        holds, reputations = _evaluate(metric, state, ratings)
        report.trials_run += 1
        if not holds:
            report.violations.append(Counterexample(state, ratings, reputations))
        if config.mode == RANDOMIZED and report.trials_run >= config.trials:
            break
    return report


def find_witness(report: SearchReport, state: MetricState, ratings: tuple[float, ...]) -> Optional[Counterexample]:
    for violation in report.violations:
        if violation.state == state and violation.ratings == tuple(ratings):
            return violation
    return None
