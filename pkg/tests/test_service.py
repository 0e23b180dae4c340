import threading

import pytest
from fastapi.testclient import TestClient

from dosefind.service import create_app


@pytest.fixture()
def client(tmp_path):
    return TestClient(create_app(str(tmp_path)))


INTERVAL_SPEC = {"kind": "interval", "p": 0.3, "m": 5, "dp1": 0.1, "dp2": 0.1}
CRM_SPEC = {"kind": "crm", "p": 0.3, "m": 5, "skeleton": [0.05, 0.1, 0.2, 0.4, 0.8]}


def make_session(client, spec=None, **extra):
    body = {"spec": spec or INTERVAL_SPEC}
    body.update(extra)
    r = client.post("/sessions", json=body)
    assert r.status_code == 200
    return r.json()


class TestCreate:
    def test_new_session_allocates_start(self, client):
        made = make_session(client)
        assert made["next_dose"] == 1
        assert "start" in made["decision_reason"]

    def test_custom_start(self, client):
        made = make_session(client, spec={**INTERVAL_SPEC, "start": 3})
        assert made["next_dose"] == 3

    def test_invalid_spec_rejected(self, client):
        r = client.post("/sessions", json={"spec": {**INTERVAL_SPEC, "dp1": -0.1}})
        assert r.status_code == 400

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404


class TestOutcomes:
    def test_escalation_flow(self, client):
        sid = make_session(client)["id"]
        r = client.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0]})
        assert r.status_code == 200
        body = r.json()
        assert body["next_dose"] == 2
        assert "escalate" in body["decision_reason"]

    def test_deescalation_flow(self, client):
        sid = make_session(client, spec={**INTERVAL_SPEC, "start": 3})["id"]
        body = client.post(f"/sessions/{sid}/outcomes", json={"dose": 3, "outcomes": [1]}).json()
        assert body["next_dose"] == 2
        assert "de-escalate" in body["decision_reason"]

    def test_wrong_dose_conflict(self, client):
        sid = make_session(client)["id"]
        r = client.post(f"/sessions/{sid}/outcomes", json={"dose": 4, "outcomes": [0]})
        assert r.status_code == 409
        assert r.json()["detail"]["expected_dose"] == 1

    def test_cohort_arity_enforced(self, client):
        sid = make_session(client, spec={**INTERVAL_SPEC, "cohort": 3})["id"]
        r = client.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0]})
        assert r.status_code == 400

    def test_per_level_table_updates(self, client):
        sid = make_session(client)["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0]})
        levels = client.get(f"/sessions/{sid}").json()["levels"]
        assert levels[0]["n"] == 1
        assert levels[0]["raw_ratio"] == "0/1"
        assert levels[1]["raw"] is None

    def test_crm_reports_model_curve(self, client):
        sid = make_session(client, spec={**CRM_SPEC, "cohort": 3})["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0, 1, 0]})
        levels = client.get(f"/sessions/{sid}").json()["levels"]
        assert all("model" in lv and lv["model"] is not None for lv in levels)


class TestSimulationAssist:
    def test_server_side_draws(self, client):
        made = make_session(
            client, scenario={"f": [0.05, 0.1, 0.3, 0.5, 0.7], "p": 0.3}, seed=42
        )
        sid = made["id"]
        r = client.post(f"/sessions/{sid}/outcomes", json={"dose": 1})
        assert r.status_code == 200
        assert r.json()["outcomes_recorded"] in ([0], [1])

    def test_assist_reproducible(self, client, tmp_path):
        drawn = []
        for _ in range(2):
            made = make_session(
                client, scenario={"f": [0.3, 0.5, 0.7], "p": 0.3}, seed=7,
                spec={"kind": "interval", "p": 0.3, "m": 3, "dp1": 0.1, "dp2": 0.1},
            )
            sid = made["id"]
            seq = []
            for _ in range(5):
                body = client.post(f"/sessions/{sid}/outcomes", json={"dose": None}).json()
                seq.extend(body["outcomes_recorded"])
            drawn.append(seq)
        assert drawn[0] == drawn[1]

    def test_assist_requires_scenario(self, client):
        sid = make_session(client)["id"]
        r = client.post(f"/sessions/{sid}/outcomes", json={"dose": 1})
        assert r.status_code == 400


class TestLifecycle:
    def test_close_returns_recommendation(self, client):
        sid = make_session(client)["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0]})
        r = client.post(f"/sessions/{sid}/close")
        assert r.status_code == 200
        assert r.json() == {"recommended_mtd": 2, "status": "closed"}

    def test_no_submissions_after_close(self, client):
        sid = make_session(client)["id"]
        client.post(f"/sessions/{sid}/close")
        r = client.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0]})
        assert r.status_code == 409

    def test_recommendation_endpoint(self, client):
        sid = make_session(client)["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0]})
        body = client.get(f"/sessions/{sid}/recommendation").json()
        assert body["next_dose"] == 2
        assert len(body["levels"]) == 5

    def test_restart_replays_event_log(self, tmp_path):
        c1 = TestClient(create_app(str(tmp_path)))
        sid = make_session(c1)["id"]
        c1.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0]})
        c1.post(f"/sessions/{sid}/outcomes", json={"dose": 2, "outcomes": [1]})
        c2 = TestClient(create_app(str(tmp_path)))
        body = c2.get(f"/sessions/{sid}").json()
        assert body["history"] == [[1, 0], [2, 1]]
        assert body["next_dose"] == 1

    def test_audit_trail_is_append_only(self, client):
        sid = make_session(client)["id"]
        client.post(f"/sessions/{sid}/outcomes", json={"dose": 1, "outcomes": [0]})
        client.post(f"/sessions/{sid}/outcomes", json={"dose": 2, "outcomes": [0]})
        audit = client.get(f"/sessions/{sid}").json()["audit"]
        assert [a["dose"] for a in audit] == [1, 2]


class TestConcurrency:
    def test_parallel_submissions_keep_state_consistent(self, client):
        sid = make_session(
            client, scenario={"f": [0.05, 0.1, 0.3, 0.5, 0.7], "p": 0.3}, seed=3
        )["id"]
        errors = []

        def push():
            for _ in range(10):
                r = client.post(f"/sessions/{sid}/outcomes", json={"dose": None})
                if r.status_code not in (200, 409):
                    errors.append(r.status_code)

        threads = [threading.Thread(target=push) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        body = client.get(f"/sessions/{sid}").json()
        total = sum(lv["n"] for lv in body["levels"])
        assert total == len(body["history"]) == 40
