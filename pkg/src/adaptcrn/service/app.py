"""FastAPI application wrapping the enhancement engine.

The app serves one model (built at startup by the caller).  Accounting and
verification endpoints work without a model; enhancement, analysis, and
stream sessions require one and answer 409 otherwise.
"""

import threading
import uuid
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import JSONResponse

from .. import verify as verify_mod
from ..accounting import attention_trace, count_report
from ..config import ModelConfig, adaptive_layer_names
from ..errors import AdaptcrnError
from ..frontend import HOP, SAMPLE_RATE
from ..model import Model, StreamSession, enhance_offline, enhance_streaming
from ..weights import init_random
from . import schemas


def _as_samples(values, what: str = "samples") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.size and not np.isfinite(arr).all():
        raise HTTPException(status_code=400, detail=f"{what} must be finite")
    return arr


def create_app(model: Optional[Model] = None) -> FastAPI:
    app = FastAPI(title="adaptcrn", version="1.0.0",
                  description="Streaming speech enhancement service")
    sessions: dict = {}
    sessions_lock = threading.Lock()

    @app.exception_handler(AdaptcrnError)
    async def _domain_error(_, exc: AdaptcrnError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def require_model() -> Model:
        if model is None:
            raise HTTPException(status_code=409,
                                detail="no model loaded; start the server "
                                       "with a weight file")
        return model

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok",
                                      model_loaded=model is not None)

    @app.get("/config", response_model=schemas.ConfigResponse)
    def config():
        return schemas.ConfigResponse(config=require_model().config.to_dict())

    @app.get("/layers", response_model=schemas.LayersResponse)
    def layers():
        m = require_model()
        return schemas.LayersResponse(
            layers=list(adaptive_layer_names(m.config, m.plan)))

    @app.post("/enhance", response_model=schemas.EnhanceResponse)
    def enhance(req: schemas.EnhanceRequest):
        m = require_model()
        x = _as_samples(req.samples)
        run = enhance_streaming if req.streaming else enhance_offline
        y = run(m, x)
        return schemas.EnhanceResponse(samples=y.tolist(),
                                       sample_rate=SAMPLE_RATE,
                                       n_samples=len(y))

    @app.post("/count", response_model=schemas.CountResponse)
    def count(req: schemas.CountRequest):
        cfg = ModelConfig.from_dict(req.config)
        return schemas.CountResponse(**count_report(cfg).to_json())

    @app.post("/analyze", response_model=schemas.AnalyzeResponse)
    def analyze(req: schemas.AnalyzeRequest):
        m = require_model()
        trace = attention_trace(m, _as_samples(req.samples), req.layer)
        return schemas.AnalyzeResponse(**trace.to_json())

    @app.post("/init-weights")
    def init_weights(req: schemas.InitWeightsRequest):
        cfg = ModelConfig.from_dict(req.config)
        store = init_random(cfg, req.seed)
        return Response(content=store.serialize(),
                        media_type="application/octet-stream",
                        headers={"X-Manifest-Hash": store.manifest_hash()})

    @app.post("/verify", response_model=schemas.VerifyResponse)
    def run_verify(req: schemas.VerifyRequest):
        results = verify_mod.run_all(seed=req.seed, cases=req.cases,
                                     suites=req.suites)
        return schemas.VerifyResponse(
            passed=all(r.passed for r in results),
            results=[schemas.SuiteResultModel(**r.to_json())
                     for r in results])

    @app.post("/session", response_model=schemas.SessionCreateResponse,
              status_code=201)
    def create_session():
        session = StreamSession(require_model())
        session_id = uuid.uuid4().hex
        with sessions_lock:
            sessions[session_id] = session
        return schemas.SessionCreateResponse(
            session_id=session_id,
            latency_samples=session.latency_samples,
            hop=HOP)

    def get_session(session_id: str) -> StreamSession:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404,
                                detail=f"no session {session_id!r}")
        return session

    @app.post("/session/{session_id}/push", response_model=schemas.PushResponse)
    def push(session_id: str, req: schemas.PushRequest):
        session = get_session(session_id)
        with sessions_lock:
            out = session.push(_as_samples(req.samples, "hop"))
        return schemas.PushResponse(samples=out.tolist())

    @app.post("/session/{session_id}/reset")
    def reset(session_id: str):
        session = get_session(session_id)
        with sessions_lock:
            session.reset()
        return {"status": "reset"}

    @app.delete("/session/{session_id}")
    def close(session_id: str):
        with sessions_lock:
            if sessions.pop(session_id, None) is None:
                raise HTTPException(status_code=404,
                                    detail=f"no session {session_id!r}")
        return {"status": "closed"}

    return app
