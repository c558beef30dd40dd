from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from planlens.config import ServiceConfig
from planlens.service import create_app


@pytest.fixture()
def service(tmp_path, fixtures_dir, demo_history):
    cfg = ServiceConfig(data_dir=str(tmp_path / "data"),
                        example_bank=str(fixtures_dir / "banks" / "examples.jsonl"))
    app = create_app(cfg, history=demo_history)
    with TestClient(app) as client:
        yield client, cfg


def _upload_demo(client: TestClient, demo_dir) -> str:
    response = client.post("/datasets", files={
        "network": ("network.json", (demo_dir / "network.json").read_bytes()),
        "demand": ("demand.csv", (demo_dir / "demand.csv").read_bytes()),
    })
    assert response.status_code == 200, response.text
    return response.json()["dataset_id"]


def _make_session(client: TestClient, demo_dir) -> str:
    dataset_id = _upload_demo(client, demo_dir)
    response = client.post("/sessions", json={"dataset_id": dataset_id})
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["baseline"]["total_cost"] == pytest.approx(342.0)
    return body["session_id"]


def test_health(service):
    client, _ = service
    assert client.get("/health").json() == {"status": "ok"}


def test_supported_questions(service):
    client, _ = service
    questions = client.get("/supported-questions").json()["questions"]
    assert any("tariff" in q.lower() for q in questions)


def test_upload_rejects_bad_dataset(service):
    client, _ = service
    response = client.post("/datasets", files={
        "network": ("network.json", b"{not json"),
        "demand": ("demand.csv", b"id\n"),
    })
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "bad_dataset"


def test_session_unknown_dataset(service):
    client, _ = service
    response = client.post("/sessions", json={"dataset_id": "nope"})
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "unknown_dataset"


def test_ask_what_if(service, demo_dir):
    client, _ = service
    session_id = _make_session(client, demo_dir)
    response = client.post(f"/sessions/{session_id}/ask", json={
        "question": "What would be the additional cost if the overall product demand "
                    "increases by 15%?"})
    assert response.status_code == 200
    body = response.json()
    assert body["kind"] == "what-if"
    assert body["structured"]["delta_total"] == pytest.approx(51.3)
    assert body["dsl"] == "SCALE DEMAND ALL BY 1.15"


def test_ask_empty_question_422(service, demo_dir):
    client, _ = service
    session_id = _make_session(client, demo_dir)
    response = client.post(f"/sessions/{session_id}/ask", json={"question": "  "})
    assert response.status_code == 422
    assert response.json()["error"]["code"] == "empty_question"


def test_ask_unknown_session_404(service):
    client, _ = service
    response = client.post("/sessions/deadbeef/ask", json={"question": "hello"})
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "unknown_session"


def test_ask_fallback_still_200(service, demo_dir):
    client, _ = service
    session_id = _make_session(client, demo_dir)
    response = client.post(f"/sessions/{session_id}/ask",
                           json={"question": "What is the meaning of life?"})
    assert response.status_code == 200
    assert response.json()["kind"] == "fallback"


def test_scenario_direct_dsl(service, demo_dir):
    client, _ = service
    session_id = _make_session(client, demo_dir)
    response = client.post(f"/sessions/{session_id}/scenario",
                           json={"dsl": "DISABLE SUPPLIER S2"})
    assert response.status_code == 200
    assert response.json()["diff"]["delta_total"] == pytest.approx(0.0)

    response = client.post(f"/sessions/{session_id}/scenario",
                           json={"dsl": "DISABLE FACTORY F2"})
    assert response.json()["diff"]["delta_total"] == pytest.approx(948.0)
    assert response.json()["diff"]["delta_lost"] == {"D2": 10.0}


def test_scenario_unresolved_reference_400(service, demo_dir):
    client, _ = service
    session_id = _make_session(client, demo_dir)
    response = client.post(f"/sessions/{session_id}/scenario",
                           json={"dsl": "DISABLE FACTORY F9"})
    assert response.status_code == 400
    body = response.json()["error"]
    assert body["code"] == "scenario_error"
    assert "F9" in body["message"]


def test_scenario_parse_error_diagnostics(service, demo_dir):
    client, _ = service
    session_id = _make_session(client, demo_dir)
    response = client.post(f"/sessions/{session_id}/scenario",
                           json={"dsl": "FROB THE KNOB"})
    assert response.status_code == 400
    body = response.json()["error"]
    assert body["code"] == "parse_error"
    assert body["line"] == 1 and body["column"] == 1
    assert "SCALE" in body["expected"]


def test_get_plan(service, demo_dir):
    client, _ = service
    session_id = _make_session(client, demo_dir)
    plan = client.get(f"/sessions/{session_id}/plan").json()
    assert plan["total_cost"] == pytest.approx(342.0)
    assert plan["status"] == "optimal"
    assert client.get("/sessions/nope/plan").status_code == 404


def test_ask_does_not_change_plan(service, demo_dir):
    client, _ = service
    session_id = _make_session(client, demo_dir)
    before = client.get(f"/sessions/{session_id}/plan").text
    client.post(f"/sessions/{session_id}/ask", json={
        "question": "Can we still fulfill all demand if we shut down factory F2?"})
    assert client.get(f"/sessions/{session_id}/plan").text == before


def test_drift_endpoint(service, fixtures_dir):
    client, _ = service
    response = client.post("/drift", files={
        "a": ("plan_a.csv", (fixtures_dir / "drift" / "plan_a.csv").read_bytes()),
        "b": ("plan_b.csv", (fixtures_dir / "drift" / "plan_b.csv").read_bytes()),
    })
    assert response.status_code == 200
    body = response.json()
    golden = (fixtures_dir / "drift" / "golden_report.md").read_text(encoding="utf-8")
    assert body["rendered"] == golden
    assert body["report"]["counts"]["modified"] == 6


def test_drift_bad_snapshot_400(service):
    client, _ = service
    response = client.post("/drift", files={
        "a": ("a.csv", b"id,retailer\n"), "b": ("b.csv", b"id,retailer\n")})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "bad_snapshot"


def test_eval_endpoint(service, demo_dir, fixtures_dir, tmp_path):
    client, _ = service
    dataset_id = _upload_demo(client, demo_dir)
    response = client.post("/eval", json={
        "bank_path": str(fixtures_dir / "banks" / "eval_bank.jsonl"),
        "dataset_id": dataset_id, "backend": "offline"})
    assert response.status_code == 200
    body = response.json()
    assert body["report"]["counts"]["incorrect"] == 0
    assert body["report"]["total"] == 60
    saved = json.loads(open(body["saved_to"]).read())
    assert saved["total"] == 60


def test_dataset_history_travels_with_upload(tmp_path, fixtures_dir, demo_dir):
    # no app-level history: the history file uploaded with the dataset must serve queries
    cfg = ServiceConfig(data_dir=str(tmp_path / "data"),
                        example_bank=str(fixtures_dir / "banks" / "examples.jsonl"))
    with TestClient(create_app(cfg)) as client:
        response = client.post("/datasets", files={
            "network": ("network.json", (demo_dir / "network.json").read_bytes()),
            "demand": ("demand.csv", (demo_dir / "demand.csv").read_bytes()),
            "history": ("history.jsonl", (demo_dir / "history.jsonl").read_bytes()),
        })
        dataset_id = response.json()["dataset_id"]
        session_id = client.post("/sessions",
                                 json={"dataset_id": dataset_id}).json()["session_id"]
        asked = client.post(f"/sessions/{session_id}/ask", json={
            "question": "Which was the most productive factory last week?"}).json()
        assert asked["kind"] == "insight"
        assert asked["structured"]["value"] == "F2"


def test_eval_missing_bank_400(service, demo_dir):
    client, _ = service
    dataset_id = _upload_demo(client, demo_dir)
    response = client.post("/eval", json={"bank_path": "/does/not/exist",
                                          "dataset_id": dataset_id})
    assert response.status_code == 400


def test_restart_reloads_datasets(tmp_path, fixtures_dir, demo_dir, demo_history):
    cfg = ServiceConfig(data_dir=str(tmp_path / "data"),
                        example_bank=str(fixtures_dir / "banks" / "examples.jsonl"))
    with TestClient(create_app(cfg, history=demo_history)) as client:
        dataset_id = _upload_demo(client, demo_dir)
    # sessions are ephemeral; datasets must survive a restart byte-for-byte
    with TestClient(create_app(cfg, history=demo_history)) as client:
        response = client.post("/sessions", json={"dataset_id": dataset_id})
        assert response.status_code == 200
        assert response.json()["baseline"]["total_cost"] == pytest.approx(342.0)


def test_static_bearer_token(tmp_path, fixtures_dir, demo_history, monkeypatch):
    monkeypatch.setenv("PLANLENS_TEST_TOKEN", "sesame")
    cfg = ServiceConfig(data_dir=str(tmp_path / "data"),
                        example_bank=str(fixtures_dir / "banks" / "examples.jsonl"),
                        service_token_env="PLANLENS_TEST_TOKEN")
    with TestClient(create_app(cfg, history=demo_history)) as client:
        assert client.get("/health").status_code == 200  # health stays open
        assert client.get("/supported-questions").status_code == 401
        ok = client.get("/supported-questions",
                        headers={"Authorization": "Bearer sesame"})
        assert ok.status_code == 200
