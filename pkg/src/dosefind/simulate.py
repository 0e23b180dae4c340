"""Seeded Monte Carlo trial execution and empirical convergence diagnostics.

Reproducibility contract: replication r of scenario s under master seed S
draws its uniforms from PCG64 seeded with SeedSequence(S, spawn_key=(s, r)),
one uniform per subject in treatment order. Aggregations are plain counts,
so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from dosefind import kernels
from dosefind.convergence import (
    CCD_CLASSES,
    CCD_NO0,
    CCD_NO2PLUS,
    CCD_YES,
    CRM_CLASSES,
    CcdVerdict,
    ccd_classify,
    crm_classify,
    crm_nominations,
)
from dosefind.designs import INTERVAL, POINT, DesignSpec, next_dose
from dosefind.model import ToxScenario, TrialState, mtd_index

REPLICATION_CHUNK = 20_000


def trial_rng(master_seed: int, scenario_id: int, replication_id: int) -> np.random.Generator:
    """Independent sub-stream for one (scenario, replication) task."""
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(scenario_id, replication_id))
    )


@dataclass(frozen=True)
class TrialTrace:
    """One seeded realization of a trial."""

    scenario_label: Optional[str]
    spec: DesignSpec
    seed: object
    doses: Tuple[int, ...]
    outcomes: Tuple[int, ...]
    final_state: TrialState
    recommended: int


@dataclass(frozen=True)
class LimitSetEstimate:
    s1: int
    s2: int
    settled: bool
    tail_fraction: float


class _RunningState:
    """Mutable stand-in for TrialState during simulation (same read API)."""

    def __init__(self, m: int, start: int):
        self.m = m
        self.n = [0] * m
        self.tox = [0] * m
        self.current = start
        self.total = 0

    def raw_estimate(self, u: int) -> Optional[Fraction]:
        if self.n[u - 1] == 0:
            return None
        return Fraction(self.tox[u - 1], self.n[u - 1])


def run_trial(scenario: ToxScenario, spec: DesignSpec, n: int, seed) -> TrialTrace:
    """Run one trial of n subjects; one uniform draw per subject in order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if scenario.m != spec.m:
        raise ValueError("scenario and spec disagree on m")
    rng = np.random.default_rng(seed)
    us = rng.random(n)
    state = _RunningState(scenario.m, spec.start)
    doses: List[int] = []
    outcomes: List[int] = []
    i = 0
    while i < n:
        csize = min(spec.cohort, n - i)
        cur = state.current
        for _ in range(csize):
            y = 1 if us[i] < scenario.f[cur - 1] else 0
            doses.append(cur)
            outcomes.append(y)
            state.n[cur - 1] += 1
            state.tox[cur - 1] += y
            state.total += 1
            i += 1
        state.current = next_dose(state, spec)
    final = TrialState.from_history(scenario.m, list(zip(doses, outcomes)), current=state.current)
    return TrialTrace(
        scenario_label=scenario.label,
        spec=spec,
        seed=seed,
        doses=tuple(doses),
        outcomes=tuple(outcomes),
        final_state=final,
        recommended=state.current,
    )


def estimate_limit_set(trace: TrialTrace, tail_fraction: float = 0.1) -> LimitSetEstimate:
    """Min/max level visited in the final tail window of the trace."""
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    n = len(trace.doses)
    tail = trace.doses[n - math.ceil(tail_fraction * n):]
    s1, s2 = min(tail), max(tail)
    return LimitSetEstimate(s1=s1, s2=s2, settled=s1 == s2, tail_fraction=tail_fraction)


def estimation_errors(trace: TrialTrace, scenario: ToxScenario, threshold: int = 50) -> Dict[int, float]:
    """Per-level |F-hat - F| for levels with at least `threshold` subjects."""
    errors = {}
    st = trace.final_state
    for u in range(1, scenario.m + 1):
        if st.n[u - 1] >= threshold:
            errors[u] = abs(st.tox[u - 1] / st.n[u - 1] - scenario.f[u - 1])
    return errors


def _uniform_matrix(master_seed: int, scenario_id: int, rep_lo: int, rep_hi: int, n: int) -> np.ndarray:
    us = np.empty((rep_hi - rep_lo, n))
    for r in range(rep_lo, rep_hi):
        us[r - rep_lo] = trial_rng(master_seed, scenario_id, r).random(n)
    return us


@dataclass(frozen=True)
class IntervalBatchResult:
    """Per-replication tail limit sets and final counts for one scenario."""

    s1: np.ndarray
    s2: np.ndarray
    recommended: np.ndarray
    n_counts: np.ndarray
    tox_counts: np.ndarray

    @property
    def replications(self) -> int:
        return len(self.s1)


def simulate_interval_batch(
    scenario: ToxScenario,
    spec: DesignSpec,
    n: int,
    replications: int,
    seed: int,
    scenario_id: int = 0,
    tail_fraction: float = 0.1,
) -> IntervalBatchResult:
    """Replicated interval-design trials via the compiled kernel."""
    if spec.kind != INTERVAL:
        raise ValueError("simulate_interval_batch requires an interval spec")
    lo, hi = spec.interval_lo, spec.interval_hi
    f = np.asarray(scenario.f)
    tail_start = n - math.ceil(tail_fraction * n)
    s1 = np.empty(replications, dtype=np.int64)
    s2 = np.empty(replications, dtype=np.int64)
    final = np.empty(replications, dtype=np.int64)
    ncnt = np.empty((replications, scenario.m), dtype=np.int64)
    tcnt = np.empty((replications, scenario.m), dtype=np.int64)
    chunk = max(1, REPLICATION_CHUNK // max(n // 1000, 1))
    for r0 in range(0, replications, chunk):
        r1 = min(r0 + chunk, replications)
        us = _uniform_matrix(seed, scenario_id, r0, r1, n)
        kernels.interval_batch(
            f, spec.start, spec.cohort, n,
            lo.numerator, lo.denominator, hi.numerator, hi.denominator,
            us, tail_start,
            s1[r0:r1], s2[r0:r1], ncnt[r0:r1], tcnt[r0:r1], final[r0:r1],
        )
    return IntervalBatchResult(s1=s1, s2=s2, recommended=final, n_counts=ncnt, tox_counts=tcnt)


@dataclass(frozen=True)
class CounterexampleResult:
    trap_frequency: float
    lower_bound: float
    replications: int
    mc_standard_error: float


def counterexample_point(
    scenario: ToxScenario,
    spec: DesignSpec,
    n: int,
    replications: int,
    seed: int,
    scenario_id: int = 0,
) -> CounterexampleResult:
    """Frequency of the point design permanently abandoning the MTD.

    A replication counts as trapped when the MTD receives exactly one
    cohort, all toxic (so its estimate is pinned at 1 and no isotonic
    correction can move it), and is never allocated again through subject
    n. The analytic lower bound is the probability of the canonical path:
    all-non-toxic first cohorts straight up from the start dose, then an
    all-toxic first cohort at the MTD.
    """
    if spec.kind != POINT:
        raise ValueError("counterexample_point requires a point spec")
    if not scenario.p < 0.5:
        raise ValueError("trap argument requires p < 1/2")
    u_star = mtd_index(scenario)
    if u_star > 1 and not scenario.f[u_star - 2] < scenario.p:
        raise ValueError("trap argument requires f[u*-1] < p")
    lower = scenario.f[u_star - 1] ** spec.cohort
    for u in range(spec.start, u_star):
        lower *= (1.0 - scenario.f[u - 1]) ** spec.cohort
    if spec.start > u_star:
        lower = 0.0
    f = np.asarray(scenario.f)
    trapped = 0
    chunk = max(1, (REPLICATION_CHUNK * 20) // max(n // 100, 1))
    for r0 in range(0, replications, chunk):
        r1 = min(r0 + chunk, replications)
        us = _uniform_matrix(seed, scenario_id, r0, r1, n)
        reps = r1 - r0
        cohorts = np.empty(reps, dtype=np.int64)
        n_at = np.empty(reps, dtype=np.int64)
        tox_at = np.empty(reps, dtype=np.int64)
        final = np.empty(reps, dtype=np.int64)
        kernels.point_batch(
            f, spec.p, spec.start, spec.cohort, n, us, u_star, cohorts, n_at, tox_at, final
        )
        trapped += int(np.sum((cohorts == 1) & (n_at > 0) & (tox_at == n_at)))
    freq = trapped / replications
    se = math.sqrt(max(freq * (1 - freq), 1e-12) / replications)
    return CounterexampleResult(
        trap_frequency=freq, lower_bound=lower, replications=replications, mc_standard_error=se
    )


@dataclass(frozen=True)
class ScenarioEmpirics:
    """Settling statistics for one scenario under an interval design."""

    scenario_id: int
    verdict: CcdVerdict
    mtd: int
    frac_settled_at_mtd: float
    frac_oscillation_match: float
    frac_settled_in_interval: float


def convergence_empirics(
    ensemble: Sequence[ToxScenario],
    spec: DesignSpec,
    n: int,
    replications: int,
    seed: int,
    tail_fraction: float = 0.1,
) -> List[ScenarioEmpirics]:
    """Replicated settling diagnostics per scenario, for the interval rule."""
    out = []
    for sid, scenario in enumerate(ensemble):
        verdict = ccd_classify(scenario, spec.dp1, spec.dp2)
        u_star = mtd_index(scenario)
        res = simulate_interval_batch(
            scenario, spec, n, replications, seed, scenario_id=sid, tail_fraction=tail_fraction
        )
        settled = res.s1 == res.s2
        at_mtd = settled & (res.s1 == u_star)
        if verdict.oscillation_pair is not None:
            o1, o2 = verdict.oscillation_pair
            osc = (res.s1 == o1) & (res.s2 == o2)
        else:
            osc = np.zeros(replications, dtype=bool)
        if verdict.levels_in_interval:
            inside = settled & np.isin(res.s1, sorted(verdict.levels_in_interval))
        else:
            inside = np.zeros(replications, dtype=bool)
        out.append(
            ScenarioEmpirics(
                scenario_id=sid,
                verdict=verdict,
                mtd=u_star,
                frac_settled_at_mtd=float(np.mean(at_mtd)),
                frac_oscillation_match=float(np.mean(osc)),
                frac_settled_in_interval=float(np.mean(inside)),
            )
        )
    return out


@dataclass(frozen=True)
class CrossTab:
    """Joint CRM-by-CCD convergence-class percentages for an ensemble."""

    m: int
    p: float
    total: int
    ccd_configs: Tuple[Tuple[float, float], ...]
    joint: Dict[Tuple[float, float], Dict[Tuple[str, str], int]]
    crm_counts: Dict[str, int]

    def crm_margin(self, klass: str) -> float:
        return 100.0 * self.crm_counts[klass] / self.total

    def ccd_margin(self, config: Tuple[float, float], klass: str) -> float:
        cells = self.joint[config]
        return 100.0 * sum(v for (crm, ccd), v in cells.items() if ccd == klass) / self.total

    def cell(self, config: Tuple[float, float], crm: str, ccd: str) -> float:
        return 100.0 * self.joint[config].get((crm, ccd), 0) / self.total

    def render(self) -> str:
        lines = [f"m={self.m}, p={self.p}, scenarios={self.total}"]
        header = f"{'':>16}"
        for dp1, dp2 in self.ccd_configs:
            header += f"  | CCD interval -{dp1:g}/+{dp2:g}" + " " * 4
        lines.append(header)
        sub = f"{'CRM':>16}"
        for _ in self.ccd_configs:
            sub += "  | " + "".join(f"{k:>9}" for k in CCD_CLASSES)
        lines.append(sub)
        margins = f"{'CCD margins':>16}"
        for cfg in self.ccd_configs:
            margins += "  | " + "".join(f"{self.ccd_margin(cfg, k):>9.1f}" for k in CCD_CLASSES)
        lines.append(margins)
        for crm in CRM_CLASSES:
            row = f"{crm:>10} {self.crm_margin(crm):>5.1f}"
            for cfg in self.ccd_configs:
                row += "  | " + "".join(f"{self.cell(cfg, crm, k):>9.1f}" for k in CCD_CLASSES)
            lines.append(row)
        return "\n".join(lines)


def table1_crosstab(
    ensemble: Sequence[ToxScenario],
    ccd_configs: Sequence[Tuple[float, float]],
    crm_skeleton: Sequence[float],
) -> CrossTab:
    """Cross-tabulate deterministic CRM and CCD convergence classes."""
    if not ensemble:
        raise ValueError("ensemble must be nonempty")
    m = ensemble[0].m
    p = ensemble[0].p
    configs = tuple((float(a), float(b)) for a, b in ccd_configs)
    joint: Dict[Tuple[float, float], Dict[Tuple[str, str], int]] = {c: {} for c in configs}
    crm_counts = {k: 0 for k in CRM_CLASSES}
    for scenario in ensemble:
        u_star = mtd_index(scenario)
        crm_v = crm_classify(crm_nominations(scenario, crm_skeleton), u_star)
        crm_counts[crm_v.klass] += 1
        for cfg in configs:
            ccd_v = ccd_classify(scenario, cfg[0], cfg[1])
            key = (crm_v.klass, ccd_v.klass)
            joint[cfg][key] = joint[cfg].get(key, 0) + 1
    return CrossTab(
        m=m, p=p, total=len(ensemble), ccd_configs=configs, joint=joint, crm_counts=crm_counts
    )
