"""Request/response bodies for the HTTP service."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    model_loaded: bool


class ConfigResponse(BaseModel):
    config: Dict[str, Any]


class EnhanceRequest(BaseModel):
    samples: List[float] = Field(description="16 kHz mono samples in [-1, 1]")
    streaming: bool = Field(
        default=False,
        description="process hop-by-hop through a stream session instead of "
                    "the offline path")


class EnhanceResponse(BaseModel):
    samples: List[float]
    sample_rate: int
    n_samples: int


class CountRequest(BaseModel):
    config: Dict[str, Any] = Field(
        default_factory=dict,
        description="model configuration overrides; omitted fields keep "
                    "their defaults")


class CountRow(BaseModel):
    name: str
    params: int
    macs_per_frame: int


class CountResponse(BaseModel):
    rows: List[CountRow]
    total_params: int
    total_macs_per_frame: int
    macs_per_second: float


class LayersResponse(BaseModel):
    layers: List[str]


class AnalyzeRequest(BaseModel):
    samples: List[float]
    layer: str = Field(description="adaptive layer to trace, e.g. encoder.0.dw")


class AnalyzeResponse(BaseModel):
    layer: str
    n_frames: int
    n_speech_frames: int
    weights: List[List[float]]
    dominant: List[int]
    energy_db: List[float]
    vad: List[bool]
    speech_proportions: List[float]
    nonspeech_proportions: List[float]


class InitWeightsRequest(BaseModel):
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0


class VerifyRequest(BaseModel):
    seed: int = 0
    cases: Optional[int] = Field(
        default=None, ge=1,
        description="case count applied to every suite; omit for the "
                    "per-suite defaults")
    suites: Optional[List[str]] = None


class SuiteResultModel(BaseModel):
    name: str
    cases: int
    max_error: float
    tolerance: float
    passed: bool
    seconds: float
    detail: str


class VerifyResponse(BaseModel):
    passed: bool
    results: List[SuiteResultModel]


class SessionCreateResponse(BaseModel):
    session_id: str
    latency_samples: int
    hop: int


class PushRequest(BaseModel):
    samples: List[float] = Field(description="exactly one 256-sample hop")


class PushResponse(BaseModel):
    samples: List[float]
