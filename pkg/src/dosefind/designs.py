"""Sequential allocation rules: interval (CCD), point, and one-parameter CRM."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from dosefind.model import (
    DesignKindError,
    EstimateVector,
    NoDataError,
    TrialState,
    exact_bound,
    fhat,
    monotonize,
)

INTERVAL = "interval"
POINT = "point"
CRM = "crm"

_INV_GOLDEN = 2.0 / (1.0 + math.sqrt(5.0))


@dataclass(frozen=True)
class DesignSpec:
    """Parameters of one allocation rule plus the common trial settings.

    `kind` selects the rule; only the matching parameter group is read.
    Interval bounds are kept as exact rationals of the decimal inputs so
    that boundary estimates (e.g. 1/5 vs p-dp1=0.2) compare exactly.
    """

    kind: str
    p: float
    m: int
    cohort: int = 1
    start: int = 1
    # interval rule
    dp1: Optional[float] = None
    dp2: Optional[float] = None
    use_monotonized: bool = False
    # CRM rule
    skeleton: Optional[Tuple[float, ...]] = None
    theta_lo: float = -10.0
    theta_hi: float = 10.0
    no_skip: bool = False

    def __post_init__(self):
        if self.kind not in (INTERVAL, POINT, CRM):
            raise ValueError(f"unknown design kind {self.kind!r}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"target p={self.p} must lie in (0,1)")
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.cohort < 1:
            raise ValueError("cohort size must be >= 1")
        if not 1 <= self.start <= self.m:
            raise ValueError(f"start={self.start} outside 1..{self.m}")
        if self.kind == INTERVAL:
            if self.dp1 is None or self.dp2 is None:
                raise ValueError("interval design requires dp1 and dp2")
            if self.dp1 <= 0 or self.dp2 <= 0:
                raise ValueError("dp1 and dp2 must be positive")
            if self.interval_lo <= 0 or self.interval_hi >= 1:
                raise ValueError("interval (p-dp1, p+dp2) must sit inside (0,1)")
        if self.kind == CRM:
            if self.skeleton is None:
                raise ValueError("CRM design requires a skeleton")
            object.__setattr__(self, "skeleton", tuple(float(s) for s in self.skeleton))
            if len(self.skeleton) != self.m:
                raise ValueError("skeleton length must equal m")
            for u, s in enumerate(self.skeleton, start=1):
                if not 0.0 < s < 1.0:
                    raise ValueError(f"skeleton[{u}]={s} must lie in (0,1)")
            for u in range(self.m - 1):
                if not self.skeleton[u] < self.skeleton[u + 1]:
                    raise ValueError("skeleton must be strictly increasing")
            if not self.theta_lo < 0.0 < self.theta_hi:
                raise ValueError("theta bounds must satisfy theta_lo < 0 < theta_hi")

    @property
    def interval_lo(self) -> Fraction:
        return exact_bound(self.p) - exact_bound(self.dp1)

    @property
    def interval_hi(self) -> Fraction:
        return exact_bound(self.p) + exact_bound(self.dp2)


def interval_next_dose(state: TrialState, spec: DesignSpec) -> int:
    dose, _ = interval_next_dose_with_reason(state, spec)
    return dose


def interval_next_dose_with_reason(state: TrialState, spec: DesignSpec) -> Tuple[int, str]:
    """Repeat / escalate / de-escalate one level from the current dose.

    The rule reads only the estimate at the currently administered dose:
    inside the open interval -> repeat; at or below the lower endpoint ->
    step up (clamped at m); at or above the upper endpoint -> step down
    (clamped at 1).
    """
    if spec.kind != INTERVAL:
        raise DesignKindError(f"interval rule called with kind={spec.kind!r}")
    u = state.current
    if state.n[u - 1] == 0:
        return u, f"no data at current level {u}: allocate it first"
    lo, hi = spec.interval_lo, spec.interval_hi
    if spec.use_monotonized:
        q: Fraction | float = monotonize(fhat(state)).values[u - 1]
        q_text = f"{q:.4f} (monotonized)"
    else:
        q = state.raw_estimate(u)
        q_text = f"{q.numerator}/{q.denominator}={float(q):.4f}"
    if q <= lo:
        dose = min(u + 1, state.m)
        verb = "escalate to" if dose != u else "stay at top level"
        return dose, f"estimate {q_text} <= p-dp1={float(lo):.4f}: {verb} {dose}"
    if q >= hi:
        dose = max(u - 1, 1)
        verb = "de-escalate to" if dose != u else "stay at bottom level"
        return dose, f"estimate {q_text} >= p+dp2={float(hi):.4f}: {verb} {dose}"
    return u, f"estimate {q_text} inside ({float(lo):.4f}, {float(hi):.4f}): repeat {u}"


def point_next_dose(state: TrialState, spec: DesignSpec) -> int:
    dose, _ = point_next_dose_with_reason(state, spec)
    return dose


def point_next_dose_with_reason(state: TrialState, spec: DesignSpec) -> Tuple[int, str]:
    """Allocate the level whose monotonized estimate is closest to target.

    Boundary overrides: if even the highest level with data estimates
    below target, escalate one level past it (and symmetrically below).
    """
    if spec.kind != POINT:
        raise DesignKindError(f"point rule called with kind={spec.kind!r}")
    if state.total == 0:
        raise NoDataError("point design requires at least one observation")
    est = monotonize(fhat(state))
    defined = [u for u in range(1, state.m + 1) if est.weights[u - 1] > 0]
    h, l = defined[-1], defined[0]
    p = spec.p
    if est.values[h - 1] < p:
        dose = min(h + 1, state.m)
        return dose, (
            f"highest observed level {h} estimates {est.values[h - 1]:.4f} < p={p}: "
            f"escalate to {dose}"
        )
    if est.values[l - 1] > p:
        dose = max(l - 1, 1)
        return dose, (
            f"lowest observed level {l} estimates {est.values[l - 1]:.4f} > p={p}: "
            f"de-escalate to {dose}"
        )
    best = defined[0]
    best_dist = abs(est.values[best - 1] - p)
    for u in defined[1:]:
        d = abs(est.values[u - 1] - p)
        if d < best_dist:
            best, best_dist = u, d
    return best, f"monotonized estimate {est.values[best - 1]:.4f} at level {best} closest to p={p}"


def crm_log_likelihood(theta: float, state: TrialState, spec: DesignSpec) -> float:
    """Bernoulli log-likelihood of the power model skeleton^exp(theta)."""
    phi = math.exp(theta)
    ll = 0.0
    for u in range(state.m):
        if state.n[u] == 0:
            continue
        # log(g) directly, since skeleton^phi underflows for large theta
        log_g = phi * math.log(spec.skeleton[u])
        t, n = state.tox[u], state.n[u]
        if t > 0:
            ll += t * log_g
        if n - t > 0:
            g = math.exp(log_g)
            ll += (n - t) * (math.log1p(-g) if g < 1.0 else -math.inf)
    return ll


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-8) -> float:
    """Argmax of a unimodal function on [lo, hi] by golden-section search."""
    x1 = hi - _INV_GOLDEN * (hi - lo)
    x2 = lo + _INV_GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 > f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_GOLDEN * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def crm_fit_theta(state: TrialState, spec: DesignSpec) -> float:
    """Bounded MLE of the power-model exponent parameter.

    Degenerate data have a monotone likelihood: all-toxic pushes the model
    to its most toxic member (theta_lo), all-non-toxic to its least toxic
    (theta_hi). A coarse pre-scan brackets the mode before golden-section
    refinement to 1e-8.
    """
    if spec.kind != CRM:
        raise DesignKindError(f"CRM fit called with kind={spec.kind!r}")
    if state.total == 0:
        raise NoDataError("CRM fit requires at least one observation")
    total_tox = sum(state.tox)
    if total_tox == state.total:
        return spec.theta_lo
    if total_tox == 0:
        return spec.theta_hi
    ll = lambda th: crm_log_likelihood(th, state, spec)
    grid = np.linspace(spec.theta_lo, spec.theta_hi, 65)
    vals = [ll(t) for t in grid]
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    return golden_section_max(ll, float(lo), float(hi), tol=1e-8)


def crm_next_dose(state: TrialState, spec: DesignSpec) -> int:
    dose, _ = crm_next_dose_with_reason(state, spec)
    return dose


def crm_next_dose_with_reason(state: TrialState, spec: DesignSpec) -> Tuple[int, str]:
    """Allocate the level where the fitted power model is closest to target."""
    if spec.kind != CRM:
        raise DesignKindError(f"CRM rule called with kind={spec.kind!r}")
    if state.total == 0:
        return state.current, f"no data: allocate start level {state.current}"
    theta = crm_fit_theta(state, spec)
    phi = math.exp(theta)
    model = [s ** phi for s in spec.skeleton]
    best = 1
    best_dist = abs(model[0] - spec.p)
    for u in range(2, state.m + 1):
        d = abs(model[u - 1] - spec.p)
        if d < best_dist:
            best, best_dist = u, d
    reason = (
        f"theta={theta:.4f}: fitted rate {model[best - 1]:.4f} at level {best} "
        f"closest to p={spec.p}"
    )
    if spec.no_skip:
        clamped = min(max(best, state.current - 1), state.current + 1)
        clamped = min(max(clamped, 1), state.m)
        if clamped != best:
            reason += f"; no-skipping clamps {best} -> {clamped}"
        best = clamped
    return best, reason


def next_dose_with_reason(state: TrialState, spec: DesignSpec) -> Tuple[int, str]:
    """Dispatch to the rule selected by spec.kind.

    With no data yet, every design allocates the current (start) dose.
    """
    if state.total == 0:
        return state.current, f"no data: allocate start level {state.current}"
    if spec.kind == INTERVAL:
        return interval_next_dose_with_reason(state, spec)
    if spec.kind == POINT:
        return point_next_dose_with_reason(state, spec)
    return crm_next_dose_with_reason(state, spec)


def next_dose(state: TrialState, spec: DesignSpec) -> int:
    return next_dose_with_reason(state, spec)[0]


def recommend_mtd(state: TrialState, spec: DesignSpec) -> int:
    """Recommended MTD: the dose the rule would allocate to the next cohort."""
    return next_dose(state, spec)
