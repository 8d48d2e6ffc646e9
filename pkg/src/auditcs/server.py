"""HTTP session service for live audit sessions.

Thin JSON layer over the engine: every number in a response comes straight
from the session state (full double precision, no rounding). Concurrent
requests are fine across sessions; mutations of one session are serialized
through a per-session lock so the draw/observe order is unambiguous.

With a persistence directory every mutation snapshots the session document;
on startup the store restores all snapshots, and restored sessions continue
bit-identically (engine replayability).
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .engine import (
    AuditSession,
    SessionConfig,
    create_session,
    restore_session,
    save_session,
)
from .errors import AuditError, SequencingError, ValidationError
from .population import Population, parse_population_csv, save_population_csv
from .sampling import SamplingStrategy

_STATUS_BY_KIND = {
    "validation": 400,
    "format": 400,
    "configuration": 400,
    "degenerate_distribution": 400,
    "not_found": 404,
    "sequencing": 409,
    "range": 422,
    "invariant": 500,
}


class NotFoundError(AuditError):
    kind = "not_found"


class RangeError(AuditError):
    """Observed fraction outside [0, 1]; the one 422 case in the contract."""

    kind = "range"


class SessionStore:
    """Populations and sessions, with optional JSON/CSV persistence."""

    def __init__(self, store_dir=None):
        self.populations: dict[str, Population] = {}
        self.sessions: dict[str, AuditSession] = {}
        self._session_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self.store_dir = Path(store_dir) if store_dir else None
        if self.store_dir is not None:
            self._load()

    # -- persistence ---------------------------------------------------------

    def _population_dir(self) -> Path:
        return self.store_dir / "populations"

    def _session_dir(self) -> Path:
        return self.store_dir / "sessions"

    def _load(self) -> None:
        pop_dir = self._population_dir()
        if pop_dir.is_dir():
            for path in sorted(pop_dir.glob("*.csv")):
                with open(path, encoding="utf-8") as fh:
                    self.populations[path.stem] = parse_population_csv(
                        fh.read(), source=str(path)
                    )
        ses_dir = self._session_dir()
        if ses_dir.is_dir():
            for path in sorted(ses_dir.glob("*.json")):
                with open(path, encoding="utf-8") as fh:
                    session = restore_session(json.load(fh))
                self.sessions[session.id] = session
                self._session_locks[session.id] = threading.Lock()

    def _persist_population(self, pop_id: str, population: Population) -> None:
        if self.store_dir is None:
            return
        self._population_dir().mkdir(parents=True, exist_ok=True)
        save_population_csv(population, self._population_dir() / f"{pop_id}.csv")

    def persist_session(self, session: AuditSession) -> None:
        if self.store_dir is None:
            return
        self._session_dir().mkdir(parents=True, exist_ok=True)
        path = self._session_dir() / f"{session.id}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(save_session(session), fh)
            fh.write("\n")

    # -- registry --------------------------------------------------------------

    def add_population(self, population: Population) -> str:
        pop_id = uuid.uuid4().hex
        with self._registry_lock:
            self.populations[pop_id] = population
        self._persist_population(pop_id, population)
        return pop_id

    def get_population(self, pop_id: str) -> Population:
        try:
            return self.populations[pop_id]
        except KeyError:
            raise NotFoundError(f"unknown population {pop_id!r}") from None

    def add_session(self, session: AuditSession) -> None:
        with self._registry_lock:
            self.sessions[session.id] = session
            self._session_locks[session.id] = threading.Lock()
        self.persist_session(session)

    def get_session(self, session_id: str) -> AuditSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise NotFoundError(f"unknown session {session_id!r}") from None

    def lock_for(self, session_id: str) -> threading.Lock:
        try:
            return self._session_locks[session_id]
        except KeyError:
            raise NotFoundError(f"unknown session {session_id!r}") from None


def _interval_pair(interval) -> list:
    return [interval.lo, interval.hi]


def _session_view(session: AuditSession) -> dict:
    combined = session.intervals.combined
    pending = None
    if session.has_pending():
        pending = [
            {
                "index": p.index,
                "id": session.population.ids[p.index],
                "reported_value": float(session.population.reported[p.index]),
                "weight": p.weight,
            }
            for p in session._pending
        ]
    return {
        "session_id": session.id,
        "t": session.t,
        "interval": _interval_pair(combined),
        "width": combined.width,
        "empty": combined.empty,
        "status": session.status,
        "stopped_at": session.stopped_at,
        "audited": [
            {"index": obs.index, "f": obs.f_obs}
            for obs in session.history.observations
        ],
        "pending": pending,
        "config": session.config.to_dict(),
        "population": {
            "n": session.population.n,
            "total_value": session.population.total_reported,
        },
        "remaining_weight": session.history.remaining_weight(),
    }


def _require(payload: dict, key: str):
    if key not in payload:
        raise ValidationError(f"missing required field {key!r}")
    return payload[key]


def _config_from_payload(payload: dict) -> SessionConfig:
    strategy = SamplingStrategy(
        kind=str(_require(payload, "strategy")),
        rel_accuracy=payload.get("rel_accuracy"),
    )
    try:
        epsilon = float(_require(payload, "epsilon"))
        delta = float(_require(payload, "delta"))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"epsilon/delta must be numbers: {exc}") from exc
    kwargs = dict(
        epsilon=epsilon,
        delta=delta,
        strategy=strategy,
        cs_family=str(payload.get("cs_family", "betting")),
        control_variates=bool(payload.get("control_variates", False)),
        batch_size=int(payload.get("batch_size", 1)),
        seed=payload.get("seed"),
        use_logical=bool(payload.get("use_logical", True)),
    )
    if "grid_size" in payload:
        kwargs["grid_size"] = int(payload["grid_size"])
    return SessionConfig(**kwargs)


def create_app(store_dir=None) -> FastAPI:
    """Build the application; store_dir enables snapshot persistence."""
    app = FastAPI(title="auditcs", openapi_url=None)
    store = SessionStore(store_dir)
    app.state.store = store

    @app.exception_handler(AuditError)
    async def _audit_error(request: Request, exc: AuditError):
        status = _STATUS_BY_KIND.get(exc.kind, 400)
        return JSONResponse(
            status_code=status,
            content={"error": {"kind": exc.kind, "detail": str(exc)}},
        )

    @app.exception_handler(RequestValidationError)
    async def _request_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": {"kind": "validation", "detail": str(exc.errors())}},
        )

    @app.post("/populations")
    def upload_population(file: UploadFile = File(...)):
        raw = file.file.read()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValidationError(f"population CSV is not UTF-8: {exc}") from exc
        population = parse_population_csv(text, source=file.filename or "upload")
        pop_id = store.add_population(population)
        return {
            "population_id": pop_id,
            "n": population.n,
            "total_value": population.total_reported,
        }

    @app.post("/sessions")
    def create_session_endpoint(payload: dict):
        population = store.get_population(str(_require(payload, "population_id")))
        config = _config_from_payload(payload)
        session = create_session(population, config)
        store.add_session(session)
        return {
            "session_id": session.id,
            "interval": _interval_pair(session.intervals.combined),
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_view(store.get_session(session_id))

    @app.post("/sessions/{session_id}/draw")
    def draw(session_id: str):
        session = store.get_session(session_id)
        with store.lock_for(session_id):
            indices = session.next_draw()
            store.persist_session(session)
        # t names the audit step these indices belong to (observe reports it back).
        return {"indices": indices, "t": session.t + 1}

    @app.post("/sessions/{session_id}/observe")
    def observe(session_id: str, payload: dict):
        session = store.get_session(session_id)
        rows = _require(payload, "observations")
        if not isinstance(rows, list) or not rows:
            raise ValidationError("observations must be a non-empty list")
        by_index = {}
        for row in rows:
            if not isinstance(row, dict) or "index" not in row or "f" not in row:
                raise ValidationError("each observation needs index and f")
            try:
                idx = int(row["index"])
                f = float(row["f"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"malformed observation {row!r}") from exc
            if not (0.0 <= f <= 1.0):
                raise RangeError(f"f for index {idx} must lie in [0, 1], got {f!r}")
            if idx in by_index:
                raise ValidationError(f"duplicate observation for index {idx}")
            by_index[idx] = f
        with store.lock_for(session_id):
            if not session.has_pending():
                raise SequencingError("no draw is pending; call draw first")
            pending = session.pending_indices()
            if sorted(by_index) != sorted(pending):
                raise ValidationError(
                    f"observations must cover exactly the pending indices {pending}"
                )
            result = session.record_observation([by_index[i] for i in pending])
            store.persist_session(session)
        return {
            "interval": list(result.interval),
            "width": result.width,
            "stopped": result.stopped_at is not None,
            "t": result.t,
            "status": result.status,
            "stopped_at": result.stopped_at,
        }

    @app.get("/sessions/{session_id}/trace")
    def trace(session_id: str):
        session = store.get_session(session_id)
        return {"trace": session.trace}

    @app.get("/sessions/{session_id}/remaining")
    def remaining(session_id: str):
        session = store.get_session(session_id)
        lo, hi = session.remaining_fraction_interval()
        return {"interval": [lo, hi], "t": session.t}

    @app.get("/sessions/{session_id}/test")
    def test_assertion(session_id: str, epsilon: float):
        session = store.get_session(session_id)
        return {"decision": session.test_assertion(epsilon), "t": session.t}

    return app
