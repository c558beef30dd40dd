"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion lines.
"""

from __future__ import annotations

import random
import string
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import httpx
import pytest

from planlens import dsl
from planlens.config import ServiceConfig
from planlens.drift import compute_drift, render_report
from planlens.evaluation import FaultInjectingBackend, load_eval_bank, run_eval
from planlens.model import load_demand
from planlens.oracle import oracle_solve
from planlens.pipeline import (
    OfflineTranslator,
    RecordingStubBackend,
    answer,
    open_session,
)
from planlens.service import create_app
from planlens.solver import solve

from .helpers import (
    check_plan_invariants,
    independent_optimum,
    numeric_renderings,
    random_instance,
    random_restricting_script,
    random_script,
    random_snapshot_pair,
    sentinel_dataset,
)


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"FAIL  {name}")
        raise
    print(f"PASS  {name}")


def test_oracle_equivalence_on_random_instances():
    with criterion("oracle equivalence: 200 random instances within 1e-6, under 60 s"):
        rng = random.Random(0xA11CE)
        started = time.monotonic()
        for i in range(200):
            network, demand = random_instance(rng)
            plan = solve(network, demand)
            expected = oracle_solve(network, demand)
            assert abs(plan.total_cost - expected.total_cost) <= 1e-6, f"instance {i}"
            check_plan_invariants(network, demand, plan)
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


LEDGER = [
    ("What would be the additional cost if the overall product demand increases by 15%?",
     "SCALE DEMAND ALL BY 1.15", 51.3, None),
    ("Can we still fulfill all demand if we shut down factory F2?",
     "DISABLE FACTORY F2", 948.0, 10.0),
    ("What would be the cost reduction if raw material of type M at supplier S1 is $1 "
     "cheaper per unit?", "ADJUST PRICE MATERIAL M AT S1 BY -1", -70.0, None),
    ("What would be the additional cost if retailer R2 can use products only from "
     "factory F1?", "RESTRICT RETAILER R2 TO [F1]", 22.0, None),
    ("What is the cost increase if we dock demand D2 a week earlier?",
     "SHIFT DUE DATE RECORD D2 BY -7", 42.0, None),
]


def test_demo_net_ledger(demo, example_bank, demo_history):
    with criterion("demo-net ledger: oracle-confirmed deltas reproduced through ask(), "
                   "under 5 s"):
        started = time.monotonic()
        network, demand = demo

        base_expected = independent_optimum(network, demand, scale=0.1)
        assert abs(base_expected - 342.0) <= 1e-6

        session = open_session(network, demand, OfflineTranslator(), example_bank,
                               history=demo_history)
        assert abs(session.baseline.total_cost - base_expected) <= 1e-6

        for question, script_text, stated_delta, stated_lost in LEDGER:
            alt_net, alt_dem, _ = dsl.apply(dsl.parse(script_text), network, demand)
            oracle_delta = independent_optimum(alt_net, alt_dem, scale=0.1) - base_expected
            assert abs(oracle_delta - stated_delta) <= 1e-6, script_text

            result = answer(session, question)
            assert result.kind == "what-if", question
            assert result.dsl == script_text
            assert abs(result.structured.delta_total - stated_delta) <= 1e-6, question
            if stated_lost is not None:
                lost = sum(result.structured.delta_lost.values())
                assert abs(lost - stated_lost) <= 1e-6

        elapsed = time.monotonic() - started
        assert elapsed < 5.0, f"took {elapsed:.1f}s"


def test_restriction_monotonicity():
    with criterion("restriction monotonicity: 100 restricting scenarios never cut cost"):
        rng = random.Random(0xBEEF)
        applied = 0
        while applied < 100:
            network, demand = random_instance(rng)
            script_text = random_restricting_script(rng, network, demand)
            if script_text is None:
                continue
            base = solve(network, demand)
            modified_net, modified_dem, _ = dsl.apply(
                dsl.parse(script_text), network, demand)
            alt = solve(modified_net, modified_dem)
            assert alt.total_cost >= base.total_cost - 1e-9, script_text
            applied += 1


def test_dsl_roundtrip_and_fuzz():
    with criterion("DSL round-trip: 1000 generated scripts; fuzzed parse never panics"):
        rng = random.Random(0xD51)
        for _ in range(1000):
            script = random_script(rng)
            assert dsl.parse(dsl.render(script)) == script

        charset = string.printable + "äöüßéλ→;[]\"'"
        for _ in range(500):
            text = "".join(rng.choices(charset, k=rng.randint(0, 120)))
            try:
                dsl.parse(text)
            except dsl.ScenarioParseError:
                pass  # the only acceptable failure mode


def test_privacy_scan(demo, example_bank, fixtures_dir):
    with criterion("privacy: no numeric dataset value reaches the backend, any bank "
                   "question"):
        network, demand = demo
        sentinel_net, sentinel_dem, sentinels = sentinel_dataset(network, demand)
        backend = RecordingStubBackend()
        session = open_session(sentinel_net, sentinel_dem, backend, example_bank)
        bank = load_eval_bank(fixtures_dir / "banks" / "eval_bank.jsonl")
        for item in bank:
            try:
                answer(session, item.question)
            except Exception:
                pass  # only the outbound byte stream matters here
        assert len(backend.prompts) >= len(bank)
        renderings = [r for v in sentinels for r in numeric_renderings(v)]
        for prompt in backend.prompts:
            for rendering in renderings:
                assert rendering not in prompt, rendering


def test_eval_metric_fidelity(demo, example_bank, demo_history, fixtures_dir):
    with criterion("eval fidelity: offline accuracy 1.0 on supported subset; fault "
                   "injection lands at 0.9 +- 0.05"):
        network, demand = demo
        bank = load_eval_bank(fixtures_dir / "banks" / "eval_bank.jsonl")
        assert len(bank) == 60

        def offline_template():
            return open_session(network, demand, OfflineTranslator(), example_bank,
                                history=demo_history)

        supported = [i for i in bank
                     if not i.expects_kind("fallback") and not i.expects_kind("clarification")]
        clean = run_eval(supported, offline_template)
        assert clean.accuracy == 1.0
        assert clean.counts["incorrect"] == 0

        full = run_eval(bank, offline_template)
        assert full.counts["incorrect"] == 0
        assert full.counts["fallback"] == sum(1 for i in bank if i.expects_kind("fallback"))

        repeated = [supported[i % len(supported)] for i in range(200)]
        faulty = FaultInjectingBackend(OfflineTranslator(), every=10)

        def faulty_template():
            return open_session(network, demand, faulty, example_bank,
                                history=demo_history)

        injected = run_eval(repeated, faulty_template)
        assert abs(injected.accuracy - 0.9) <= 0.05, injected.accuracy


def test_drift_golden_and_properties(fixtures_dir):
    with criterion("drift: golden report byte-identical; identity empty; antisymmetry "
                   "on 50 random pairs"):
        plan_a = load_demand(fixtures_dir / "drift" / "plan_a.csv")
        plan_b = load_demand(fixtures_dir / "drift" / "plan_b.csv")
        golden = (fixtures_dir / "drift" / "golden_report.md").read_text(encoding="utf-8")
        assert render_report(compute_drift(plan_a, plan_b), "markdown") == golden

        identity = compute_drift(plan_a, plan_a)
        assert identity.changes == ()
        assert identity.total_delta == 0

        rng = random.Random(0xD21F7)
        for _ in range(50):
            a, b = random_snapshot_pair(rng)
            forward = compute_drift(a, b)
            backward = compute_drift(b, a)
            fwd = {c.record_id: c.qty_delta for c in forward.changes}
            bwd = {c.record_id: c.qty_delta for c in backward.changes}
            assert set(fwd) == set(bwd)
            for rid in fwd:
                assert abs(fwd[rid] + bwd[rid]) <= 1e-9
            assert ({c.record_id for c in forward.changes if c.kind == "added"}
                    == {c.record_id for c in backward.changes if c.kind == "removed"})


@pytest.fixture(scope="module")
def live_server(tmp_path_factory):
    import uvicorn

    root = tmp_path_factory.mktemp("service")
    fixtures = __import__("tests.conftest", fromlist=["FIXTURES"]).FIXTURES
    from planlens.insights import load_history

    cfg = ServiceConfig(data_dir=str(root / "data"),
                        example_bank=str(fixtures / "banks" / "examples.jsonl"))
    app = create_app(cfg, history=load_history(fixtures / "demo_net" / "history.jsonl"))
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_service_contract_live(live_server, demo_dir, fixtures_dir):
    with criterion("service contract: endpoint suite incl. 400/404/422; 16 concurrent "
                   "sessions keep stable baselines"):
        base = live_server
        with httpx.Client(base_url=base, timeout=30.0) as client:
            assert client.get("/health").json() == {"status": "ok"}

            upload = client.post("/datasets", files={
                "network": ("network.json", (demo_dir / "network.json").read_bytes()),
                "demand": ("demand.csv", (demo_dir / "demand.csv").read_bytes()),
            })
            assert upload.status_code == 200
            dataset_id = upload.json()["dataset_id"]

            # error paths
            assert client.post("/sessions", json={"dataset_id": "missing"}).status_code == 404
            assert client.post("/sessions/nope/ask",
                               json={"question": "hi"}).status_code == 404

            made = client.post("/sessions", json={"dataset_id": dataset_id}).json()
            session_id = made["session_id"]
            assert client.post(f"/sessions/{session_id}/ask",
                               json={"question": ""}).status_code == 422
            bad = client.post(f"/sessions/{session_id}/scenario",
                              json={"dsl": "NONSENSE HERE"})
            assert bad.status_code == 400
            assert bad.json()["error"]["code"] == "parse_error"

            # happy paths
            asked = client.post(f"/sessions/{session_id}/ask", json={
                "question": "What would be the additional cost if the overall product "
                            "demand increases by 15%?"}).json()
            assert asked["kind"] == "what-if"
            assert abs(asked["structured"]["delta_total"] - 51.3) <= 1e-6

            ran = client.post(f"/sessions/{session_id}/scenario",
                              json={"dsl": "DISABLE FACTORY F2"}).json()
            assert abs(ran["diff"]["delta_total"] - 948.0) <= 1e-6

            plan = client.get(f"/sessions/{session_id}/plan").json()
            assert abs(plan["total_cost"] - 342.0) <= 1e-6

            drift = client.post("/drift", files={
                "a": ("plan_a.csv", (fixtures_dir / "drift" / "plan_a.csv").read_bytes()),
                "b": ("plan_b.csv", (fixtures_dir / "drift" / "plan_b.csv").read_bytes()),
            })
            assert drift.status_code == 200
            golden = (fixtures_dir / "drift" / "golden_report.md").read_text()
            assert drift.json()["rendered"] == golden

            evaluated = client.post("/eval", json={
                "bank_path": str(fixtures_dir / "banks" / "eval_bank.jsonl"),
                "dataset_id": dataset_id, "backend": "offline"})
            assert evaluated.status_code == 200
            assert evaluated.json()["report"]["counts"]["incorrect"] == 0

            # 16 concurrent sessions with interleaved asks
            session_ids = [client.post("/sessions",
                                       json={"dataset_id": dataset_id}).json()["session_id"]
                           for _ in range(16)]
            hashes_before = {sid: client.get(f"/sessions/{sid}/plan").text
                             for sid in session_ids}

        questions = [
            "Can we still fulfill all demand if we shut down factory F2?",
            "How much raw material of type M does supplier S1 have today?",
            "What would be the additional cost if the overall product demand increases "
            "by 15%?",
            "What is the cost increase if we dock demand D2 a week earlier?",
            "What is the meaning of life?",
        ]

        def worker(sid: str) -> list[str]:
            kinds = []
            with httpx.Client(base_url=base, timeout=30.0) as worker_client:
                for question in questions:
                    response = worker_client.post(f"/sessions/{sid}/ask",
                                                  json={"question": question})
                    assert response.status_code == 200
                    kinds.append(response.json()["kind"])
            return kinds

        with ThreadPoolExecutor(max_workers=16) as pool:
            results = list(pool.map(worker, session_ids))
        assert all(kinds == ["what-if", "insight", "what-if", "what-if", "fallback"]
                   for kinds in results)

        with httpx.Client(base_url=base, timeout=30.0) as client:
            for sid in session_ids:
                assert client.get(f"/sessions/{sid}/plan").text == hashes_before[sid]
