"""HTTP session service: create live surrogate sessions, set motors, step
predictions, ask the controller for a suggestion, run GA/RL jobs off the
request path, and stream per-step state as server-sent events.

Checkpoints are immutable shared state; each session is single-writer
(steps serialize on a per-session lock, sessions step concurrently); jobs
run on a background worker thread, FIFO.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse

from . import ga as ga_mod
from .control import (
    Controller,
    ControllerConfig,
    ControlState,
    centre_contrast,
    controller_forward,
    extract_features,
    load_controller,
    save_controller,
    train_controller,
    write_reward_history_csv,
)
from .errors import InvalidDataError
from .grid import N_CELLS
from .model import load_checkpoint, restore_model
from .model.transformer import SurrogateTransformer
from .synth import SynthConfig, synth_experiment
from .tensorfile import read_tensors

SEED_MODES = ("zeros", "synth")
JOB_KINDS = ("ga", "rl-train")


class ModelStore:
    """Named, immutable trained models plus their controllers."""

    def __init__(self):
        self.models: dict[str, SurrogateTransformer] = {}
        self.controllers: dict[tuple[str, str], Controller] = {}

    def register_model(self, name: str, model: SurrogateTransformer) -> None:
        model.eval()
        self.models[name] = model

    def register_controller(self, model_id: str, objective: str, controller: Controller) -> None:
        controller.eval()
        self.controllers[(model_id, objective)] = controller

    @classmethod
    def from_dir(cls, path) -> "ModelStore":
        """Load every *.ckpt under `path`; transformer checkpoints register
        under their file stem, controller checkpoints under their stored
        model_id + objective."""
        store = cls()
        controllers = []
        for p in sorted(Path(path).glob("*.ckpt")):
            try:
                meta, _ = read_tensors(p)
            except InvalidDataError:
                continue
            if meta.get("kind") == "transformer":
                store.register_model(p.stem, restore_model(load_checkpoint(p)))
            elif meta.get("kind") == "controller":
                controllers.append((p, meta))
        for p, meta in controllers:
            controller, cfg = load_controller(p)
            model_id = meta.get("model_id") or p.stem.split("--")[0]
            store.register_controller(model_id, cfg.objective, controller)
        return store


@dataclass
class Session:
    id: str
    model_id: str
    state: ControlState
    objective: str | None = None
    t: int = 0
    created_at: float = field(default_factory=time.time)
    pending_motor: np.ndarray = field(default_factory=lambda: np.zeros(N_CELLS, dtype=np.float32))
    lock: threading.Lock = field(default_factory=threading.Lock)
    events: list[dict] = field(default_factory=list)
    cond: threading.Condition = field(default_factory=threading.Condition)
    closed: bool = False

    def snapshot_event(self) -> dict:
        return {
            "t": self.t,
            "chem": [float(v) for v in self.state.chem_window[-1]],
            "motors": [float(v) for v in self.pending_motor],
            "reward": None,
        }

    def emit(self, event: dict) -> None:
        with self.cond:
            self.events.append(event)
            self.cond.notify_all()

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify_all()


@dataclass
class JobRecord:
    id: str
    kind: str
    status: str = "queued"  # queued -> running -> done | failed
    progress: float = 0.0
    result_path: str | None = None
    error: str | None = None

    def public(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


class JobManager:
    """One background worker executing jobs FIFO."""

    def __init__(self, store: ModelStore, results_dir):
        self.store = store
        self.results_dir = Path(results_dir)
        self.records: dict[str, JobRecord] = {}
        self.queue: queue.Queue = queue.Queue()
        self.lock = threading.Lock()
        self.worker = threading.Thread(target=self._run, daemon=True)
        self.worker.start()

    def submit(self, kind: str, model_id: str, config: dict) -> JobRecord:
        record = JobRecord(id=uuid.uuid4().hex[:12], kind=kind)
        with self.lock:
            self.records[record.id] = record
        self.queue.put((record, model_id, config))
        return record

    def get(self, job_id: str) -> JobRecord | None:
        with self.lock:
            return self.records.get(job_id)

    def _run(self) -> None:
        while True:
            record, model_id, config = self.queue.get()
            record.status = "running"
            try:
                out_dir = self.results_dir / record.id
                out_dir.mkdir(parents=True, exist_ok=True)
                if record.kind == "ga":
                    self._run_ga(record, model_id, config, out_dir)
                else:
                    self._run_rl(record, model_id, config, out_dir)
                record.progress = 1.0
                record.result_path = str(out_dir)
                record.status = "done"
            except Exception as exc:  # jobs must never kill the worker
                record.error = f"{type(exc).__name__}: {exc}"
                record.status = "failed"

    def _run_ga(self, record: JobRecord, model_id: str, config: dict, out_dir: Path) -> None:
        model = self.store.models[model_id]
        cfg = ga_mod.GAConfig(**config)
        sim = ga_mod.RolloutSimulator(model)
        chem_seed = np.zeros((model.config.seq_len, N_CELLS), dtype=np.float32)

        def on_gen(stats):
            record.progress = stats.generation / cfg.n_generations

        result = ga_mod.run_ga(sim, chem_seed, cfg, progress=on_gen)
        ga_mod.write_ga_history_csv(result.history, out_dir / "ga_history.csv")
        ga_mod.write_best_genome_json(result, out_dir / "best_genome.json")

    def _run_rl(self, record: JobRecord, model_id: str, config: dict, out_dir: Path) -> None:
        model = self.store.models[model_id]
        cfg = ControllerConfig(**config)
        states = [ControlState.zeros(model.config.seq_len)]
        controller, history = train_controller(model, cfg, states)
        write_reward_history_csv(history, out_dir / "rl_history.csv")
        ctrl_path = out_dir / f"{model_id}--{cfg.objective}.ckpt"
        save_controller(controller, cfg, ctrl_path, model_id=model_id)
        self.store.register_controller(model_id, cfg.objective, controller)


def _error(status: int, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail=message)


def _parse_motors(value) -> np.ndarray:
    if not isinstance(value, list) or len(value) != N_CELLS:
        raise _error(422, f"motors must be a list of {N_CELLS} numbers")
    try:
        arr = np.array([float(v) for v in value], dtype=np.float32)
    except (TypeError, ValueError):
        raise _error(422, "motors must be numeric")
    if np.any(np.abs(arr) > 1.0):
        raise _error(422, "motor speeds must lie in [-1, 1]")
    return arr


def create_app(store: ModelStore, results_dir=None, synth_cfg: SynthConfig | None = None) -> FastAPI:
    app = FastAPI(title="osclab session service")
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    jobs = JobManager(store, results_dir or Path("job-results"))
    app.state.store = store
    app.state.jobs = jobs

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code, content={"error": str(exc.detail)})

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"error": str(exc.errors())})

    def get_session(session_id: str) -> Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise _error(404, "session not found")
        return session

    def seed_state(model: SurrogateTransformer, mode: str, seed: int) -> ControlState:
        seq_len = model.config.seq_len
        if mode == "zeros":
            return ControlState.zeros(seq_len)
        cfg = synth_cfg or SynthConfig()
        cfg = SynthConfig(**{**cfg.__dict__, "steps": 2 * seq_len, "seed": seed if seed != 0 else 1})
        rec = synth_experiment(cfg, np.zeros((cfg.steps, N_CELLS)))
        return ControlState(np.zeros((seq_len, N_CELLS)), rec.chem[-seq_len:])

    @app.get("/models")
    def list_models():
        return {"models": sorted(store.models)}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        model_id = body.get("model")
        if model_id not in store.models:
            raise _error(404, "model not found")
        mode = body.get("seed", "zeros")
        if mode not in SEED_MODES:
            raise _error(422, f"seed must be one of {SEED_MODES}")
        objective = body.get("objective")
        if objective is not None and objective not in ("maximize", "minimize"):
            raise _error(422, "objective must be maximize or minimize")
        session = Session(
            id=uuid.uuid4().hex[:12],
            model_id=model_id,
            state=seed_state(store.models[model_id], mode, int(body.get("seed_value", 1))),
            objective=objective,
        )
        with sessions_lock:
            sessions[session.id] = session
        return {"id": session.id, "model": model_id, "t": session.t, "objective": objective}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        s = get_session(session_id)
        with s.lock:
            return {
                "id": s.id,
                "model": s.model_id,
                "t": s.t,
                "objective": s.objective,
                "motors": [float(v) for v in s.pending_motor],
                "chem": [float(v) for v in s.state.chem_window[-1]],
            }

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        s = get_session(session_id)
        with sessions_lock:
            sessions.pop(session_id, None)
        s.close()
        return {"ok": True}

    @app.post("/sessions/{session_id}/motors")
    def set_motors(session_id: str, body: dict):
        s = get_session(session_id)
        motors = _parse_motors(body.get("motors"))
        with s.lock:
            s.pending_motor = motors
        return {"ok": True}

    @app.post("/sessions/{session_id}/step")
    def step_session(session_id: str, body: dict | None = None):
        body = body or {}
        n = body.get("n", 1)
        if not isinstance(n, int) or n < 1:
            raise _error(422, "n must be a positive integer")
        s = get_session(session_id)
        model = store.models[s.model_id]
        frames = []
        with s.lock:
            for _ in range(n):
                motors = torch.from_numpy(
                    np.vstack([s.state.motor_window[1:], s.pending_motor[None]])
                ).unsqueeze(0)
                chem = torch.from_numpy(s.state.chem_window).unsqueeze(0)
                with torch.no_grad():
                    pred = model(motors, chem).prediction[0, -1].numpy()
                reward = None
                if s.objective is not None:
                    contrast = float(pred[N_CELLS // 2] - np.delete(pred, N_CELLS // 2).mean())
                    reward = contrast if s.objective == "maximize" else -contrast
                s.state.push(s.pending_motor, pred)
                s.t += 1
                frame = [float(v) for v in s.state.chem_window[-1]]
                frames.append(frame)
                s.emit(
                    {
                        "t": s.t,
                        "chem": frame,
                        "motors": [float(v) for v in s.pending_motor],
                        "reward": reward,
                    }
                )
            t_now = s.t
        return {"frames": frames, "t": t_now}

    @app.post("/sessions/{session_id}/suggest")
    def suggest_action(session_id: str, body: dict | None = None):
        body = body or {}
        s = get_session(session_id)
        objective = body.get("objective") or s.objective
        if objective is None:
            raise _error(422, "no objective given and none set on the session")
        controller = store.controllers.get((s.model_id, objective))
        if controller is None:
            raise _error(409, f"no controller trained for objective {objective!r}")
        model = store.models[s.model_id]
        with s.lock:
            feats = extract_features(
                model, s.state, "hidden" if controller.feat_dim == model.config.d_model else "hidden_attention"
            )
        with torch.no_grad():
            motors = controller_forward(feats, controller)
        return {"motors": [float(v) for v in motors], "objective": objective}

    @app.post("/jobs", status_code=201)
    def submit_job(body: dict):
        kind = body.get("kind")
        if kind not in JOB_KINDS:
            raise _error(422, f"kind must be one of {JOB_KINDS}")
        model_id = body.get("model")
        if model_id not in store.models:
            raise _error(404, "model not found")
        config = body.get("config", {})
        if not isinstance(config, dict):
            raise _error(422, "config must be an object")
        try:
            if kind == "ga":
                ga_mod.GAConfig(**config)
            else:
                ControllerConfig(**config)
        except (TypeError, ValueError) as exc:
            raise _error(422, f"invalid config: {exc}")
        record = jobs.submit(kind, model_id, config)
        return record.public()

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        record = jobs.get(job_id)
        if record is None:
            raise _error(404, "job not found")
        return record.public()

    @app.get("/sessions/{session_id}/stream")
    def stream_session(session_id: str):
        s = get_session(session_id)

        def gen() -> Iterator[str]:
            with s.cond:
                cursor = len(s.events)
            yield _sse(s.snapshot_event())
            while True:
                with s.cond:
                    if cursor >= len(s.events) and not s.closed:
                        s.cond.wait(timeout=0.25)
                    if s.closed and cursor >= len(s.events):
                        return
                    batch = s.events[cursor:]
                    cursor = len(s.events)
                if batch:
                    for event in batch:
                        yield _sse(event)
                else:
                    # keep-alive comment; also the yield point where a client
                    # disconnect can actually stop this generator
                    yield ": keep-alive\n\n"

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app


def _sse(event: dict) -> str:
    return f"data: {json.dumps(event)}\n\n"
