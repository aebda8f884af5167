"""WAV file input/output, restricted to RIFF PCM 16-bit mono 16 kHz."""

import wave

import numpy as np

from .errors import FormatError
from .frontend import SAMPLE_RATE

_SCALE = 32768.0


def read_wav(path) -> np.ndarray:
    """Read a 16-bit PCM mono 16 kHz WAV file into float32 samples in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise FormatError(f"{path}: compressed WAV not supported")
            if wf.getnchannels() != 1:
                raise FormatError(
                    f"{path}: expected mono audio, got {wf.getnchannels()} channels"
                )
            if wf.getsampwidth() != 2:
                raise FormatError(
                    f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit"
                )
            if wf.getframerate() != SAMPLE_RATE:
                raise FormatError(
                    f"{path}: expected sample rate {SAMPLE_RATE}, got {wf.getframerate()}"
                )
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a valid WAV file ({exc})") from exc
    except EOFError as exc:
        raise FormatError(f"{path}: truncated WAV file") from exc
    return np.frombuffer(raw, dtype="<i2").astype(np.float32) / _SCALE


def write_wav(path, samples) -> None:
    """Write float32 samples (clipped to [-1, 1)) as 16-bit PCM mono 16 kHz."""
    samples = np.asarray(samples, dtype=np.float32).reshape(-1)
    clipped = np.clip(samples, -1.0, (_SCALE - 1.0) / _SCALE)
    ints = np.round(clipped * _SCALE).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes(ints.tobytes())
