"""Domain types and estimation primitives shared by all designs.

Dose levels are indexed 1..m throughout the public API. Internally the
per-level vectors are plain tuples/arrays addressed 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np


class NoDataError(ValueError):
    """Raised when an operation needs at least one observed outcome."""


class DesignKindError(ValueError):
    """Raised when a rule is invoked with a spec of the wrong kind."""


@dataclass(frozen=True)
class ToxScenario:
    """A true dose-toxicity curve on m ordered levels plus the target rate."""

    f: Tuple[float, ...]
    p: float
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(float(v) for v in self.f))
        if self.m < 2:
            raise ValueError("scenario needs at least 2 dose levels")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"target p={self.p} must lie in (0,1)")
        for u, v in enumerate(self.f, start=1):
            if not 0.0 < v < 1.0:
                raise ValueError(f"f[{u}]={v} must lie strictly in (0,1)")
        for u in range(self.m - 1):
            if not self.f[u] < self.f[u + 1]:
                raise ValueError(
                    f"f must be strictly increasing: f[{u + 1}]={self.f[u]} "
                    f">= f[{u + 2}]={self.f[u + 1]}"
                )

    @property
    def m(self) -> int:
        return len(self.f)


@dataclass(frozen=True)
class TrialState:
    """Full allocation/outcome history with per-level running counts."""

    m: int
    n: Tuple[int, ...]
    tox: Tuple[int, ...]
    current: int
    history: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        if not 1 <= self.current <= self.m:
            raise ValueError(f"current={self.current} outside 1..{self.m}")
        if len(self.n) != self.m or len(self.tox) != self.m:
            raise ValueError("count vectors must have length m")
        for u in range(self.m):
            if not 0 <= self.tox[u] <= self.n[u]:
                raise ValueError(f"tox[{u + 1}]={self.tox[u]} outside 0..n[{u + 1}]={self.n[u]}")
        if sum(self.n) != len(self.history):
            raise ValueError("sum of n must equal history length")

    @classmethod
    def empty(cls, m: int, start: int = 1) -> "TrialState":
        return cls(m=m, n=(0,) * m, tox=(0,) * m, current=start, history=())

    @classmethod
    def from_history(cls, m: int, history: Sequence[Tuple[int, int]], current: Optional[int] = None) -> "TrialState":
        """Rebuild counts by folding an ordered (dose, outcome) history."""
        n = [0] * m
        tox = [0] * m
        for dose, y in history:
            if not 1 <= dose <= m:
                raise ValueError(f"dose {dose} outside 1..{m}")
            if y not in (0, 1):
                raise ValueError(f"outcome {y} must be 0 or 1")
            n[dose - 1] += 1
            tox[dose - 1] += y
        if current is None:
            current = history[-1][0] if history else 1
        return cls(m=m, n=tuple(n), tox=tuple(tox), current=current, history=tuple(history))

    def with_outcomes(self, dose: int, outcomes: Sequence[int], next_current: Optional[int] = None) -> "TrialState":
        """Return a new state with one cohort of outcomes appended at `dose`."""
        if not 1 <= dose <= self.m:
            raise ValueError(f"dose {dose} outside 1..{self.m}")
        n = list(self.n)
        tox = list(self.tox)
        hist = list(self.history)
        for y in outcomes:
            if y not in (0, 1):
                raise ValueError(f"outcome {y} must be 0 or 1")
            n[dose - 1] += 1
            tox[dose - 1] += y
            hist.append((dose, int(y)))
        return TrialState(
            m=self.m,
            n=tuple(n),
            tox=tuple(tox),
            current=next_current if next_current is not None else dose,
            history=tuple(hist),
        )

    @property
    def total(self) -> int:
        return len(self.history)

    def raw_estimate(self, u: int) -> Optional[Fraction]:
        """Exact cumulative toxicity frequency at level u, or None if unvisited."""
        if self.n[u - 1] == 0:
            return None
        return Fraction(self.tox[u - 1], self.n[u - 1])


@dataclass(frozen=True)
class EstimateVector:
    """Per-level toxicity estimates; NaN marks levels with no data."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.int64))
        if self.values.shape != self.weights.shape:
            raise ValueError("values and weights must have equal length")

    @property
    def m(self) -> int:
        return len(self.values)

    def defined(self) -> np.ndarray:
        return self.weights > 0

    def value_at(self, u: int) -> Optional[float]:
        return None if self.weights[u - 1] == 0 else float(self.values[u - 1])


def fhat(state: TrialState) -> EstimateVector:
    """Cumulative per-level toxicity frequencies (binomial point estimates)."""
    n = np.asarray(state.n, dtype=np.int64)
    tox = np.asarray(state.tox, dtype=np.float64)
    values = np.full(state.m, np.nan)
    visited = n > 0
    values[visited] = tox[visited] / n[visited]
    return EstimateVector(values=values, weights=n)


def pava(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted pool-adjacent-violators fit of a non-decreasing vector.

    Minimizes sum(w * (x - v)^2) over non-decreasing x. Inputs must be
    dense (no gaps); gap handling lives in `monotonize`.
    """
    k = len(values)
    level = np.empty(k)
    weight = np.empty(k)
    size = np.empty(k, dtype=np.int64)
    nblocks = 0
    for i in range(k):
        level[nblocks] = values[i]
        weight[nblocks] = weights[i]
        size[nblocks] = 1
        nblocks += 1
        while nblocks > 1 and level[nblocks - 2] > level[nblocks - 1]:
            w = weight[nblocks - 2] + weight[nblocks - 1]
            level[nblocks - 2] = (
                level[nblocks - 2] * weight[nblocks - 2]
                + level[nblocks - 1] * weight[nblocks - 1]
            ) / w
            weight[nblocks - 2] = w
            size[nblocks - 2] += size[nblocks - 1]
            nblocks -= 1
    out = np.empty(k)
    pos = 0
    for b in range(nblocks):
        out[pos : pos + size[b]] = level[b]
        pos += size[b]
    return out


def monotonize(est: EstimateVector) -> EstimateVector:
    """Isotonic (non-decreasing) correction of the defined estimates.

    Adjacency is taken over the defined entries only; unvisited levels stay
    undefined and do not participate in pooling.
    """
    mask = est.defined()
    if not mask.any():
        raise NoDataError("no data to monotonize")
    fitted = pava(est.values[mask], est.weights[mask].astype(float))
    values = np.full(est.m, np.nan)
    values[mask] = fitted
    return EstimateVector(values=values, weights=est.weights)


def mtd_index(scenario: ToxScenario) -> int:
    """Level whose true toxicity rate is closest to target (ties go low)."""
    best = 1
    best_dist = abs(scenario.f[0] - scenario.p)
    for u in range(2, scenario.m + 1):
        d = abs(scenario.f[u - 1] - scenario.p)
        if d < best_dist:
            best, best_dist = u, d
    return best


def exact_bound(x: float | str | Fraction) -> Fraction:
    """Exact rational value of a bound given in decimal notation.

    Floats are interpreted through their shortest decimal repr, so 0.3
    means 3/10, not the nearest binary double. Needed because interval
    membership distinguishes open vs closed endpoints exactly.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"bound {x} is not finite")
        return Fraction(repr(x))
    return Fraction(x)
