"""Deterministic convergence classification from a known dose-toxicity curve.

Interval (CCD) designs are classified by counting levels inside the target
interval; CRM designs by the nomination construction: pin the one-parameter
power model to the truth at each level in turn and record which level the
pinned model would select.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, Optional, Sequence, Tuple

import numpy as np

from dosefind.model import ToxScenario, exact_bound, mtd_index

CCD_YES = "Yes"
CCD_NO0 = "No: 0"
CCD_NO2PLUS = "No: 2+"
CCD_CLASSES = (CCD_NO0, CCD_NO2PLUS, CCD_YES)

CRM_YES = "Yes"
CRM_NO0 = "No: 0"
CRM_NO2PLUS = "No: 2+"
CRM_FUNNELING = "Funneling"
CRM_NOFUNNELING = "No Funneling"
CRM_CLASSES = (CRM_NO0, CRM_NO2PLUS, CRM_FUNNELING, CRM_NOFUNNELING, CRM_YES)


@dataclass(frozen=True)
class CcdVerdict:
    klass: str
    levels_in_interval: FrozenSet[int]
    oscillation_pair: Optional[Tuple[int, int]] = None
    boundary_case: bool = False
    note: Optional[str] = None


@dataclass(frozen=True)
class NominationTable:
    """Per-level pinned parameters and the level each one nominates."""

    theta: Tuple[float, ...]
    nominee: Tuple[int, ...]


@dataclass(frozen=True)
class CrmVerdict:
    klass: str
    self_nominators: FrozenSet[int]


def ccd_classify(scenario: ToxScenario, dp1: float, dp2: float) -> CcdVerdict:
    """Interval-design asymptotic behavior for a known curve.

    Guaranteed convergence ("Yes") needs the MTD to be the only level in
    the closed interval [p-dp1, p+dp2] and to sit strictly inside the open
    one, or the whole curve to lie above/below the interval (boundary
    case). Two or more levels in the closed interval -> "No: 2+"; an empty
    interval straddled by the curve -> "No: 0" with the oscillation pair.
    """
    p = exact_bound(scenario.p)
    lo = p - exact_bound(dp1)
    hi = p + exact_bound(dp2)
    if lo <= 0 or hi >= 1:
        raise ValueError(f"interval [{float(lo)}, {float(hi)}] must sit inside (0,1)")
    # decimal semantics for the curve too, so f=0.4 meets an endpoint at 0.4
    f = tuple(exact_bound(x) for x in scenario.f)
    m = scenario.m
    in_closed = frozenset(u for u in range(1, m + 1) if lo <= f[u - 1] <= hi)
    boundary = f[0] >= hi or f[m - 1] <= lo
    if len(in_closed) >= 2:
        return CcdVerdict(klass=CCD_NO2PLUS, levels_in_interval=in_closed)
    if boundary:
        return CcdVerdict(klass=CCD_YES, levels_in_interval=in_closed, boundary_case=True)
    if len(in_closed) == 1:
        (u,) = in_closed
        in_open = lo < f[u - 1] < hi
        if in_open and u == mtd_index(scenario):
            return CcdVerdict(klass=CCD_YES, levels_in_interval=in_closed)
        note = (
            "sole interval level sits exactly on an endpoint (open membership fails)"
            if not in_open
            else "sole interval level is not the MTD (asymmetric interval)"
        )
        return CcdVerdict(klass=CCD_NO0, levels_in_interval=in_closed, note=note)
    below = [u for u in range(1, m + 1) if f[u - 1] < lo]
    pair = (below[-1], below[-1] + 1) if below else None
    return CcdVerdict(klass=CCD_NO0, levels_in_interval=in_closed, oscillation_pair=pair)


def _nominee(skeleton: Sequence[float], phi: float, p: float) -> int:
    best = 1
    best_dist = abs(skeleton[0] ** phi - p)
    for v in range(2, len(skeleton) + 1):
        d = abs(skeleton[v - 1] ** phi - p)
        if d < best_dist:
            best, best_dist = v, d
    return best


def crm_nominations(scenario: ToxScenario, skeleton: Sequence[float]) -> NominationTable:
    """Pin the power model to the truth at each level and record its pick.

    For skeleton^exp(theta) the pinning parameter has the closed form
    theta_u = ln(ln f_u / ln s_u).
    """
    if len(skeleton) != scenario.m:
        raise ValueError("skeleton length must equal scenario.m")
    theta = []
    nominee = []
    for u in range(1, scenario.m + 1):
        th = math.log(math.log(scenario.f[u - 1]) / math.log(skeleton[u - 1]))
        theta.append(th)
        nominee.append(_nominee(skeleton, math.exp(th), scenario.p))
    return NominationTable(theta=tuple(theta), nominee=tuple(nominee))


def crm_classify(table: NominationTable, u_star: int) -> CrmVerdict:
    """Shen-O'Quigley / funneling classification of a nomination table.

    Precedence: all levels nominate the MTD -> Yes; MTD fails to
    self-nominate -> No: 0; another level self-nominates -> No: 2+; the
    funneling pattern (below-MTD levels nominate upward, above-MTD levels
    downward) -> Funneling; anything else -> No Funneling.
    """
    m = len(table.nominee)
    selfnom = frozenset(u for u in range(1, m + 1) if table.nominee[u - 1] == u)
    if all(v == u_star for v in table.nominee):
        return CrmVerdict(klass=CRM_YES, self_nominators=selfnom)
    if table.nominee[u_star - 1] != u_star:
        return CrmVerdict(klass=CRM_NO0, self_nominators=selfnom)
    if any(u != u_star for u in selfnom):
        return CrmVerdict(klass=CRM_NO2PLUS, self_nominators=selfnom)
    funneled = all(
        table.nominee[u - 1] > u if u < u_star else table.nominee[u - 1] < u
        for u in range(1, m + 1)
        if u != u_star
    )
    if funneled:
        return CrmVerdict(klass=CRM_FUNNELING, self_nominators=selfnom)
    return CrmVerdict(klass=CRM_NOFUNNELING, self_nominators=selfnom)


def misspec_distance(scenario: ToxScenario, skeleton: Sequence[float], u_star: int) -> float:
    """Sup-distance between the truth and the model pinned at the MTD."""
    th = math.log(math.log(scenario.f[u_star - 1]) / math.log(skeleton[u_star - 1]))
    phi = math.exp(th)
    return max(abs(scenario.f[u - 1] - skeleton[u - 1] ** phi) for u in range(1, scenario.m + 1))
