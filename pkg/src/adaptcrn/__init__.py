"""Streaming speech enhancement with frame-adaptive convolutions.

A pure-numpy inference engine: causal adaptive convolutions (per-frame kernel
attention over a bank of candidate kernels), an encoder/decoder CRN with
grouped dual-path recurrence, an ERB-compressed STFT front end, analytic
parameter/MAC accounting, a self-verification suite, a FastAPI service, and a
CLI.
"""

__version__ = "0.1.0"

from .accounting import (
    attention_trace,
    count_macs,
    count_params,
    count_report,
    loss_total,
    si_snr,
)
from .config import ModelConfig
from .errors import AdaptcrnError, ConfigurationError, FormatError, UnsupportedModeError
from .model import Model, StreamSession, build_model, enhance_offline, enhance_streaming
from .weights import WeightStore, init_random, load, save

__all__ = [
    "AdaptcrnError",
    "ConfigurationError",
    "FormatError",
    "Model",
    "ModelConfig",
    "StreamSession",
    "UnsupportedModeError",
    "WeightStore",
    "__version__",
    "attention_trace",
    "build_model",
    "count_macs",
    "count_params",
    "count_report",
    "enhance_offline",
    "enhance_streaming",
    "init_random",
    "load",
    "loss_total",
    "save",
    "si_snr",
]
