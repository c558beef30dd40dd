"""HTTP service: datasets, sessions, ask/scenario/plan/drift/eval endpoints."""

from __future__ import annotations

import hashlib
import io
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import dsl
from .config import ServiceConfig, make_backend, service_token
from .drift import DriftConfig, compute_drift, render_report, report_to_dict
from .evaluation import load_eval_bank, report_to_dict as eval_report_to_dict, run_eval
from .insights import PlanHistory, load_history
from .model import DatasetError, DemandPlan, SupplyNetwork, load_dataset, load_demand, validate
from .pipeline import (
    BackendUnavailableError,
    ExampleEntry,
    OfflineTranslator,
    PlannerSession,
    answer,
    answer_to_dict,
    load_example_bank,
    open_session,
    supported_question_catalog,
)
from .solver import SolverInputError, diff_plans, diff_to_dict, plan_to_dict, solve


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message, **extra}})


class DatasetStore:
    """Content-addressed dataset files under data_dir; identical uploads reload identically."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def put(self, network_bytes: bytes, demand_bytes: bytes,
            history_bytes: bytes | None = None) -> str:
        blob = network_bytes + b"\x00" + demand_bytes
        if history_bytes:
            blob += b"\x00" + history_bytes
        digest = hashlib.sha256(blob).hexdigest()[:16]
        with self._lock:
            target = self.root / digest
            if not target.exists():
                target.mkdir(parents=True)
                (target / "network.json").write_bytes(network_bytes)
                (target / "demand.csv").write_bytes(demand_bytes)
                if history_bytes:
                    (target / "history.jsonl").write_bytes(history_bytes)
        return digest

    def load(self, dataset_id: str) -> tuple[SupplyNetwork, DemandPlan] | None:
        target = self.root / dataset_id
        if not (target / "network.json").exists():
            return None
        return load_dataset(target / "network.json", target / "demand.csv")

    def load_dataset_history(self, dataset_id: str) -> PlanHistory | None:
        path = self.root / dataset_id / "history.jsonl"
        return load_history(path) if path.exists() else None


@dataclass
class ServiceSession:
    session: PlannerSession
    dataset_id: str
    created_at: float
    lock: threading.Lock


def create_app(config: ServiceConfig, bank: tuple[ExampleEntry, ...] | None = None,
               history: PlanHistory | None = None) -> FastAPI:
    app = FastAPI(title="planlens", version="0.1.0")

    data_dir = Path(config.data_dir)
    store = DatasetStore(data_dir / "datasets")
    logs_dir = data_dir / "logs"
    logs_dir.mkdir(parents=True, exist_ok=True)
    reports_dir = data_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)

    if bank is None:
        bank = load_example_bank(config.example_bank) if config.example_bank else ()
    if history is None:
        history_path = data_dir / "history.jsonl"
        history = load_history(history_path) if history_path.exists() else None

    sessions: dict[str, ServiceSession] = {}
    sessions_lock = threading.Lock()
    token = service_token(config)

    app.state.store = store
    app.state.sessions = sessions

    @app.middleware("http")
    async def auth_middleware(request: Request, call_next):
        if token and request.url.path != "/health":
            supplied = request.headers.get("Authorization", "")
            if supplied != f"Bearer {token}":
                return _error(401, "unauthorized", "missing or invalid bearer token")
        return await call_next(request)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(422, "validation_error", str(exc.errors()[:1]))

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/supported-questions")
    def supported_questions():
        return {"questions": supported_question_catalog()}

    @app.post("/datasets")
    def upload_dataset(network: UploadFile = File(...), demand: UploadFile = File(...),
                       history: UploadFile | None = File(None)):
        network_bytes = network.file.read()
        demand_bytes = demand.file.read()
        history_bytes = history.file.read() if history is not None else None
        try:
            net, dem = load_dataset(io.BytesIO(network_bytes), io.BytesIO(demand_bytes))
        except DatasetError as exc:
            return _error(400, "bad_dataset", str(exc))
        issues = validate(net, dem)
        errors = [i for i in issues if i.severity == "error"]
        if errors:
            return _error(400, "bad_dataset", errors[0].message,
                          issues=[vars(i) for i in errors])
        dataset_id = store.put(network_bytes, demand_bytes, history_bytes)
        return {"dataset_id": dataset_id,
                "warnings": [vars(i) for i in issues if i.severity == "warning"]}

    @app.post("/sessions")
    def create_session(body: dict):
        dataset_id = (body or {}).get("dataset_id", "")
        loaded = store.load(dataset_id) if dataset_id else None
        if loaded is None:
            return _error(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        net, dem = loaded
        session_history = store.load_dataset_history(dataset_id) or history
        try:
            session = open_session(
                net, dem, make_backend(config), bank, k=config.example_count,
                history=session_history, paraphrase_enabled=config.paraphrase,
                log_path=logs_dir / "interactions.jsonl")
        except SolverInputError as exc:
            return _error(400, "unsolvable_dataset", str(exc))
        with sessions_lock:
            sessions[session.session_id] = ServiceSession(
                session=session, dataset_id=dataset_id, created_at=time.time(),
                lock=threading.Lock())
        return {"session_id": session.session_id,
                "dataset_id": dataset_id,
                "baseline": plan_to_dict(session.baseline)}

    def _session(session_id: str) -> ServiceSession | None:
        with sessions_lock:
            return sessions.get(session_id)

    @app.post("/sessions/{session_id}/ask")
    def ask(session_id: str, body: dict):
        entry = _session(session_id)
        if entry is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        question = ((body or {}).get("question") or "").strip()
        if not question:
            return _error(422, "empty_question", "question must be a non-empty string")
        with entry.lock:
            try:
                result = answer(entry.session, question)
            except BackendUnavailableError as exc:
                return _error(503, "backend_unavailable", str(exc))
        return answer_to_dict(result)

    @app.post("/sessions/{session_id}/scenario")
    def scenario(session_id: str, body: dict):
        entry = _session(session_id)
        if entry is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        text = ((body or {}).get("dsl") or "").strip()
        if not text:
            return _error(400, "empty_scenario", "dsl must be a non-empty script")
        try:
            script = dsl.parse(text)
        except dsl.ScenarioParseError as exc:
            return _error(400, "parse_error", str(exc),
                          line=exc.line, column=exc.column, expected=list(exc.expected))
        with entry.lock:
            session = entry.session
            try:
                alt_net, alt_dem, apply_log = dsl.apply(script, session.network, session.demand)
                alt_plan = solve(alt_net, alt_dem)
            except dsl.ScenarioError as exc:
                return _error(400, "scenario_error", str(exc))
            diff = diff_plans(session.baseline, alt_plan)
        return {"diff": diff_to_dict(diff),
                "dsl": dsl.render(script),
                "applied": [{"statement": e.statement, "touched": list(e.touched)}
                            for e in apply_log]}

    @app.get("/sessions/{session_id}/plan")
    def plan(session_id: str):
        entry = _session(session_id)
        if entry is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        return plan_to_dict(entry.session.baseline)

    @app.post("/drift")
    def drift(a: UploadFile = File(...), b: UploadFile = File(...),
              format: str = "markdown"):
        if format not in ("markdown", "email-text"):
            return _error(400, "bad_format", f"unknown format {format!r}")
        try:
            plan_a = load_demand(io.BytesIO(a.file.read()),
                                 snapshot_id=Path(a.filename or "a").stem)
            plan_b = load_demand(io.BytesIO(b.file.read()),
                                 snapshot_id=Path(b.filename or "b").stem)
            report = compute_drift(
                plan_a, plan_b,
                DriftConfig(large_swing_fraction=config.drift_large_swing_fraction))
        except DatasetError as exc:
            return _error(400, "bad_snapshot", str(exc))
        return {"report": report_to_dict(report),
                "rendered": render_report(report, format)}

    @app.post("/eval")
    def eval_endpoint(body: dict):
        body = body or {}
        bank_path = body.get("bank_path", "")
        if not bank_path or not Path(bank_path).exists():
            return _error(400, "bank_not_found", f"no bank at {bank_path!r}")
        dataset_id = body.get("dataset_id", "")
        loaded = store.load(dataset_id) if dataset_id else None
        if loaded is None:
            return _error(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        net, dem = loaded
        backend_kind = body.get("backend", config.backend)
        if backend_kind not in ("offline", "remote"):
            return _error(400, "bad_backend", f"unknown backend {backend_kind!r}")
        try:
            eval_bank = load_eval_bank(bank_path)
        except Exception as exc:
            return _error(400, "bank_format", str(exc))
        if backend_kind == "remote" and not (config.remote.base_url and config.remote.model):
            return _error(400, "bad_backend", "remote backend is not configured")
        eval_history = store.load_dataset_history(dataset_id) or history

        def template() -> PlannerSession:
            if backend_kind == "offline":
                backend = OfflineTranslator()
            else:
                backend = make_backend(config)
            return open_session(net, dem, backend, bank, k=config.example_count,
                                history=eval_history)

        report = run_eval(eval_bank, template)
        doc = eval_report_to_dict(report)
        out_path = reports_dir / f"eval-{int(time.time() * 1000)}.json"
        out_path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
        return {"report": doc, "saved_to": str(out_path)}

    return app


__all__ = ["create_app", "DatasetStore", "ServiceSession"]
