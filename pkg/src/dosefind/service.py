"""HTTP trial-session service.

The service owns no decision logic: every recommendation is the pure
allocation rule replayed over the session's event log. Sessions persist
as append-only JSONL event logs keyed by session id; state is always
derived by replay, never stored authoritatively.
"""

from __future__ import annotations

import json
import math
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from dosefind.designs import CRM, DesignSpec, crm_fit_theta, next_dose_with_reason
from dosefind.model import NoDataError, ToxScenario, TrialState, fhat, monotonize


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class SpecBody(BaseModel):
    kind: str
    p: float
    m: int
    cohort: int = 1
    start: int = 1
    dp1: Optional[float] = None
    dp2: Optional[float] = None
    use_monotonized: bool = False
    skeleton: Optional[List[float]] = None
    theta_lo: float = -10.0
    theta_hi: float = 10.0
    no_skip: bool = False

    def to_spec(self) -> DesignSpec:
        return DesignSpec(
            kind=self.kind,
            p=self.p,
            m=self.m,
            cohort=self.cohort,
            start=self.start,
            dp1=self.dp1,
            dp2=self.dp2,
            use_monotonized=self.use_monotonized,
            skeleton=tuple(self.skeleton) if self.skeleton is not None else None,
            theta_lo=self.theta_lo,
            theta_hi=self.theta_hi,
            no_skip=self.no_skip,
        )


class ScenarioBody(BaseModel):
    f: List[float]
    p: float
    label: Optional[str] = None


class CreateBody(BaseModel):
    spec: SpecBody
    scenario: Optional[ScenarioBody] = None
    seed: Optional[int] = None


class OutcomesBody(BaseModel):
    # dose may be omitted to mean "the dose the design just recommended"
    dose: Optional[int] = None
    outcomes: Optional[List[int]] = None


@dataclass
class SessionState:
    spec: DesignSpec
    scenario: Optional[ToxScenario]
    seed: Optional[int]
    created: str
    state: TrialState
    status: str
    audit: List[dict]
    next_dose: int
    decision_reason: str


class SessionStore:
    """Append-only event-log persistence with derived in-memory state."""

    def __init__(self, data_dir: str | Path):
        self.dir = Path(data_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict = {}
        self._locks_guard = threading.Lock()

    def _lock(self, sid: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(sid, threading.Lock())

    def _path(self, sid: str) -> Path:
        return self.dir / f"{sid}.jsonl"

    def _append(self, sid: str, event: dict) -> None:
        with open(self._path(sid), "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _events(self, sid: str) -> List[dict]:
        path = self._path(sid)
        if not path.exists():
            raise KeyError(sid)
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def replay(self, sid: str) -> SessionState:
        events = self._events(sid)
        head = events[0]
        assert head["type"] == "create"
        spec = SpecBody(**head["spec"]).to_spec()
        scenario = (
            ToxScenario(f=tuple(head["scenario"]["f"]), p=head["scenario"]["p"],
                        label=head["scenario"].get("label"))
            if head.get("scenario")
            else None
        )
        state = TrialState.empty(spec.m, start=spec.start)
        status = "active"
        audit = []
        reason = f"no data: allocate start level {spec.start}"
        for ev in events[1:]:
            if ev["type"] == "outcomes":
                state = state.with_outcomes(ev["dose"], ev["outcomes"])
                dose, reason = next_dose_with_reason(state, spec)
                state = TrialState(
                    m=state.m, n=state.n, tox=state.tox, current=dose, history=state.history
                )
                audit.append({"ts": ev["ts"], "dose": ev["dose"], "outcomes": ev["outcomes"]})
            elif ev["type"] == "close":
                status = "closed"
                audit.append({"ts": ev["ts"], "event": "close"})
        return SessionState(
            spec=spec,
            scenario=scenario,
            seed=head.get("seed"),
            created=head["ts"],
            state=state,
            status=status,
            audit=audit,
            next_dose=state.current,
            decision_reason=reason,
        )

    def create(self, body: CreateBody) -> str:
        sid = uuid.uuid4().hex
        event = {
            "type": "create",
            "ts": _now(),
            "spec": body.spec.model_dump(),
            "scenario": body.scenario.model_dump() if body.scenario else None,
            "seed": body.seed,
        }
        with self._lock(sid):
            self._append(sid, event)
        return sid

    def submit(self, sid: str, dose: Optional[int], outcomes: Optional[List[int]]) -> SessionState:
        with self._lock(sid):
            ss = self.replay(sid)
            if ss.status == "closed":
                raise ClosedError(sid)
            if dose is None:
                dose = ss.next_dose
            if dose != ss.next_dose:
                raise WrongDoseError(expected=ss.next_dose, got=dose)
            if outcomes is None:
                outcomes = self.draw_outcomes(ss, dose)
            if len(outcomes) != ss.spec.cohort:
                raise ArityError(expected=ss.spec.cohort, got=len(outcomes))
            if any(y not in (0, 1) for y in outcomes):
                raise ArityError(expected=ss.spec.cohort, got=len(outcomes))
            self._append(sid, {"type": "outcomes", "ts": _now(), "dose": dose, "outcomes": outcomes})
            return self.replay(sid)

    def draw_outcomes(self, ss: SessionState, dose: int) -> List[int]:
        """Simulation-assist draws: deterministic in (session seed, subjects so far)."""
        if ss.scenario is None or ss.seed is None:
            raise NoDataError("session has no scenario/seed for simulation-assist draws")
        rng = np.random.default_rng(np.random.SeedSequence(ss.seed, spawn_key=(ss.state.total,)))
        us = rng.random(ss.spec.cohort)
        return [int(u < ss.scenario.f[dose - 1]) for u in us]

    def close(self, sid: str) -> SessionState:
        with self._lock(sid):
            ss = self.replay(sid)
            if ss.status == "closed":
                return ss
            self._append(sid, {"type": "close", "ts": _now()})
            return self.replay(sid)


class ClosedError(Exception):
    pass


class WrongDoseError(Exception):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got


class ArityError(Exception):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got


def _per_level_table(ss: SessionState) -> List[dict]:
    st = ss.state
    est = fhat(st)
    mono = monotonize(est) if st.total > 0 else None
    model = None
    if ss.spec.kind == CRM and st.total > 0:
        theta = crm_fit_theta(st, ss.spec)
        model = [s ** math.exp(theta) for s in ss.spec.skeleton]
    table = []
    for u in range(1, st.m + 1):
        n_u = st.n[u - 1]
        row = {
            "level": u,
            "n": n_u,
            "tox": st.tox[u - 1],
            "raw": None if n_u == 0 else st.tox[u - 1] / n_u,
            "raw_ratio": None if n_u == 0 else f"{st.tox[u - 1]}/{n_u}",
            "monotonized": None
            if mono is None or n_u == 0
            else float(mono.values[u - 1]),
        }
        if model is not None:
            row["model"] = model[u - 1]
        if ss.spec.kind == CRM:
            row["skeleton"] = ss.spec.skeleton[u - 1]
        table.append(row)
    return table


def _session_json(sid: str, ss: SessionState) -> dict:
    out = {
        "id": sid,
        "created": ss.created,
        "status": ss.status,
        "spec": {
            "kind": ss.spec.kind,
            "p": ss.spec.p,
            "m": ss.spec.m,
            "cohort": ss.spec.cohort,
            "start": ss.spec.start,
            "dp1": ss.spec.dp1,
            "dp2": ss.spec.dp2,
            "use_monotonized": ss.spec.use_monotonized,
            "skeleton": list(ss.spec.skeleton) if ss.spec.skeleton else None,
            "theta_lo": ss.spec.theta_lo,
            "theta_hi": ss.spec.theta_hi,
            "no_skip": ss.spec.no_skip,
        },
        "simulation_assist": ss.scenario is not None,
        "levels": _per_level_table(ss),
        "history": [list(h) for h in ss.state.history],
        "audit": ss.audit,
        "next_dose": ss.next_dose,
        "decision_reason": ss.decision_reason,
    }
    if ss.spec.kind == "interval":
        out["band"] = {
            "lo": float(ss.spec.interval_lo),
            "hi": float(ss.spec.interval_hi),
        }
    return out


def create_app(data_dir: str | Path, static_dir: Optional[str | Path] = None) -> FastAPI:
    app = FastAPI(title="dosefind trial sessions")
    store = SessionStore(data_dir)
    app.state.store = store

    def _get(sid: str) -> SessionState:
        try:
            return store.replay(sid)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {sid}")

    @app.post("/sessions")
    def create_session(body: CreateBody):
        try:
            body.spec.to_spec()
            if body.scenario is not None:
                ToxScenario(f=tuple(body.scenario.f), p=body.scenario.p, label=body.scenario.label)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        sid = store.create(body)
        ss = _get(sid)
        return {"id": sid, "next_dose": ss.next_dose, "decision_reason": ss.decision_reason}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _session_json(sid, _get(sid))

    @app.post("/sessions/{sid}/outcomes")
    def submit_outcomes(sid: str, body: OutcomesBody):
        ss = _get(sid)
        try:
            ss = store.submit(sid, body.dose, body.outcomes)
        except NoDataError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except ClosedError:
            raise HTTPException(status_code=409, detail="session is closed")
        except WrongDoseError as exc:
            raise HTTPException(
                status_code=409,
                detail={
                    "error": f"expected outcomes for dose {exc.expected}, got dose {exc.got}",
                    "expected_dose": exc.expected,
                    "got_dose": exc.got,
                },
            )
        except ArityError as exc:
            raise HTTPException(
                status_code=400,
                detail=f"cohort size is {exc.expected}; got {exc.got} valid outcomes",
            )
        return {
            "next_dose": ss.next_dose,
            "decision_reason": ss.decision_reason,
            "outcomes_recorded": list(ss.audit[-1]["outcomes"]),
            "estimates": _per_level_table(ss),
        }

    @app.get("/sessions/{sid}/recommendation")
    def recommendation(sid: str):
        ss = _get(sid)
        return {
            "next_dose": ss.next_dose,
            "decision_reason": ss.decision_reason,
            "levels": _per_level_table(ss),
        }

    @app.post("/sessions/{sid}/close")
    def close_session(sid: str):
        _get(sid)
        ss = store.close(sid)
        return {"recommended_mtd": ss.next_dose, "status": ss.status}

    if static_dir is not None:
        # mounted last so the API routes above keep precedence
        app.mount("/", StaticFiles(directory=Path(static_dir), html=True), name="ui")

    return app
