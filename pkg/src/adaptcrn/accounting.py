"""Analytic parameter/MAC accounting, waveform losses, and attention analysis.

Counting conventions (documented because published model-size tables rarely
state theirs; the comparison tolerances absorb the differences):

* Parameters are summed from the weight manifest, so `count_params` can never
  drift from what `init_random` emits.
* MACs are multiply-accumulates per STFT frame, scaled by 62.5 frames/s
  (16 kHz / 256 hop) for the per-second figure.
* Convolutions count C_out * (C_in/groups) * K_t * K_f per output position;
  transposed frequency convolutions count C * K_f per *input* position.
* Recurrences count 3 * (H*D_in + H^2) per step (gate matmuls), affine layers
  D_out * D_in per position.
* Adaptive layers add: power pooling (C*F), the channel model, the attention
  head, and kernel aggregation (K * kernel size) per frame.
* Elementwise work (activations, normalization scaling, masking, bias adds)
  and the FFTs are excluded.
"""

import json
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import frontend
from .config import (
    BlockPlan,
    ModelConfig,
    adaptive_layer_names,
    head_width,
    layer_plan,
    tensor_manifest,
)
from .errors import ConfigurationError
from .model import Model, enhance_offline

__all__ = [
    "AttentionTrace", "CountReport", "CountRow", "FRAMES_PER_SECOND",
    "affine_params", "attention_trace", "conv_macs", "conv_params",
    "count_macs", "count_params", "count_report", "gru_macs", "gru_params",
    "loss_total", "LossBreakdown", "si_snr",
]

FRAMES_PER_SECOND = frontend.SAMPLE_RATE / frontend.HOP  # 62.5

SI_SNR_CAP_DB = 100.0          # residual below 1e-20 of target -> cap
SI_SNR_FLOOR_DB = -100.0       # zero projection (orthogonal/silent estimate)
LOSS_SI_SNR_CAP = -10.0        # loss term is -log10(ratio), capped below
LAMBDA_SI_SNR = 0.01
LAMBDA_MAG = 0.7
LAMBDA_COMPLEX = 0.3
MAG_POWER = 0.3                # compressed-magnitude exponent
NORM_POWER = 0.7               # own-magnitude normalization exponent
VAD_DROP_DB = 40.0             # speech = within 40 dB of the loudest frame
VAD_SILENCE_FLOOR = 1e-12      # mean-square power below this is never speech


# ---------------------------------------------------------------------------
# closed-form layer counts
# ---------------------------------------------------------------------------

def conv_params(k: int, c_out: int, c_in_g: int, k_t: int, k_f: int) -> int:
    """Bank of k candidate kernels plus one shared bias."""
    return k * c_out * c_in_g * k_t * k_f + c_out


def conv_macs(c_out: int, c_in_g: int, k_t: int, k_f: int, f_out: int) -> int:
    """Per-frame MACs of one convolution evaluated at f_out positions."""
    return c_out * c_in_g * k_t * k_f * f_out


def affine_params(d_out: int, d_in: int) -> int:
    return d_out * d_in + d_out


def gru_params(hidden: int, d_in: int) -> int:
    return 3 * (hidden * d_in + hidden * hidden + 2 * hidden)


def gru_macs(hidden: int, d_in: int) -> int:
    """Per-step gate matmul MACs."""
    return 3 * (hidden * d_in + hidden * hidden)


# ---------------------------------------------------------------------------
# whole-model report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CountRow:
    name: str
    params: int
    macs_per_frame: int


@dataclass(frozen=True)
class CountReport:
    rows: Tuple[CountRow, ...]

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_macs_per_frame(self) -> int:
        return sum(r.macs_per_frame for r in self.rows)

    @property
    def macs_per_second(self) -> float:
        return self.total_macs_per_frame * FRAMES_PER_SECOND

    def to_json(self) -> dict:
        return {
            "rows": [{"name": r.name, "params": r.params,
                      "macs_per_frame": r.macs_per_frame} for r in self.rows],
            "total_params": self.total_params,
            "total_macs_per_frame": self.total_macs_per_frame,
            "macs_per_second": self.macs_per_second,
        }


def _bank_size(b: BlockPlan, sub: str) -> int:
    """Weights per single candidate kernel of one block sub-layer."""
    if sub == "dw":
        return b.c_in * b.kernel[0] * b.kernel[1]
    if sub == "pw1":
        return b.hidden * b.c_in
    return b.c_out * b.hidden


def _block_conv_macs(b: BlockPlan) -> int:
    if b.transposed:
        dw = b.c_in * b.kernel[1] * b.f_in  # scatter at input positions
    else:
        dw = conv_macs(b.c_in, 1, b.kernel[0], b.kernel[1], b.f_out)
    pw1 = conv_macs(b.hidden, b.c_in, 1, 1, b.f_out)
    pw2 = conv_macs(b.c_out, b.hidden, 1, 1, b.f_out)
    return dw + pw1 + pw2


def _block_adaptive_macs(cfg: ModelConfig, b: BlockPlan) -> int:
    """Pooling + channel model + head + kernel aggregation per frame."""
    if not cfg.adaptive:
        return 0
    h = cfg.attention_hidden
    pool = b.c_in * b.f_in
    if cfg.attention_mode in ("single_frame", "global_utterance"):
        channel_model = h * b.c_in
    elif cfg.attention_mode == "multi_frame":
        channel_model = h * b.c_in * cfg.attention_conv_kernel
    else:  # temporal
        channel_model = gru_macs(h, b.c_in)
    head = head_width(cfg, b) * h
    aggregation = cfg.n_kernels * sum(
        _bank_size(b, sub) for sub in ("dw", "pw1", "pw2"))
    return pool + channel_model + head + aggregation


def _dprnn_macs(cfg: ModelConfig, d) -> int:
    cg = d.group_channels
    intra = 2 * d.groups * d.f * gru_macs(d.intra_group_hidden, cg)
    intra += d.f * d.channels * 2 * d.intra_hidden  # shared affine
    inter = d.groups * d.f * gru_macs(d.inter_group_hidden, cg)
    inter += d.f * d.channels * d.inter_hidden
    return intra + inter


def _param_rows(cfg: ModelConfig) -> Dict[str, int]:
    """Manifest sizes grouped per layer, preserving manifest order."""
    rows: Dict[str, int] = {}
    for spec in tensor_manifest(cfg):
        parts = spec.name.split(".")
        key = parts[0] if parts[0] == "mask" else ".".join(parts[:2])
        rows[key] = rows.get(key, 0) + spec.size
    return rows


def count_report(cfg: ModelConfig) -> CountReport:
    """Joint per-layer parameter and MAC report for one configuration."""
    plan = layer_plan(cfg)
    params = _param_rows(cfg)
    macs: Dict[str, int] = {}
    for b in list(plan.encoder) + list(plan.decoder):
        macs[b.name] = _block_conv_macs(b) + _block_adaptive_macs(cfg, b)
    for d in plan.dprnn:
        macs[d.name] = _dprnn_macs(cfg, d)
    # ERB compression: three (T,257)@(257,129) matmuls per frame; expansion
    # of the mask back to 257 bins is one (129->257) matmul
    n_bands, n_bins = frontend.N_BANDS, frontend.N_BINS
    macs["erb.compress"] = 3 * n_bins * n_bands
    macs["erb.decompress"] = n_bands * n_bins

    names = list(params) + ["erb.compress", "erb.decompress"]
    rows = tuple(CountRow(n, params.get(n, 0), macs.get(n, 0)) for n in names)
    return CountReport(rows)


def count_params(cfg: ModelConfig) -> CountReport:
    """Per-layer parameter counts; the total equals the manifest size."""
    return count_report(cfg)


def count_macs(cfg: ModelConfig) -> CountReport:
    """Per-layer MACs per frame; per-second figures scale by 62.5."""
    return count_report(cfg)


# ---------------------------------------------------------------------------
# losses and metrics
# ---------------------------------------------------------------------------

def _projection_energies(est, ref) -> Tuple[float, float]:
    """Energies of the scaled reference and the residual (float64)."""
    est = np.asarray(est, dtype=np.float64).reshape(-1)
    ref = np.asarray(ref, dtype=np.float64).reshape(-1)
    if est.shape != ref.shape:
        raise ConfigurationError(
            f"signal lengths differ: {est.shape[0]} vs {ref.shape[0]}")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ConfigurationError(
            "reference signal is identically zero; the scale-invariant "
            "projection is undefined")
    target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - target
    return float(np.dot(target, target)), float(np.dot(residual, residual))


def si_snr(est, ref) -> float:
    """Scale-invariant SNR in dB: 10*log10(||s_t||^2 / ||e||^2).

    Capped at +100 dB when the residual energy drops below 1e-20 of the
    target energy; floored at -100 dB when the estimate has no component
    along the reference.
    """
    target, residual = _projection_energies(est, ref)
    if target == 0.0:
        return SI_SNR_FLOOR_DB
    if residual < 1e-20 * target:
        return SI_SNR_CAP_DB
    return float(10.0 * np.log10(target / residual))


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    si_snr_term: float     # -log10(energy ratio), capped at -10
    magnitude: float
    real: float
    imag: float

    def to_json(self) -> dict:
        return {"total": self.total, "si_snr_term": self.si_snr_term,
                "magnitude": self.magnitude, "real": self.real,
                "imag": self.imag}


def _compressed_spectra(wave) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(|X|^0.3, real/|X|^0.7, imag/|X|^0.7) in float64, clamped at 1e-8."""
    spec = frontend.stft(wave).astype(np.complex128)
    mag = np.abs(spec)
    denom = np.power(np.maximum(mag, frontend.MAG_CLAMP), NORM_POWER)
    return np.power(mag, MAG_POWER), spec.real / denom, spec.imag / denom


def loss_total(est, ref) -> LossBreakdown:
    """Training objective: 0.01*L_si-snr + 0.7*L_mag + 0.3*(L_real+L_imag).

    The SI-SNR term is the plain -log10 of the projection energy ratio
    (no factor 10), capped at -10; spectral terms are mean-squared errors on
    0.3-power magnitudes and 0.7-power-normalized real/imag parts over all
    257 bins.
    """
    target, residual = _projection_energies(est, ref)
    if target == 0.0:
        l_sisnr = -np.log10(1e-10)  # silent estimate: ratio floored at 1e-10
    elif residual < 1e-20 * target:
        l_sisnr = LOSS_SI_SNR_CAP
    else:
        l_sisnr = max(-float(np.log10(target / residual)), LOSS_SI_SNR_CAP)

    est_mag, est_r, est_i = _compressed_spectra(est)
    ref_mag, ref_r, ref_i = _compressed_spectra(ref)
    l_mag = float(np.mean((est_mag - ref_mag) ** 2))
    l_real = float(np.mean((est_r - ref_r) ** 2))
    l_imag = float(np.mean((est_i - ref_i) ** 2))
    total = (LAMBDA_SI_SNR * l_sisnr + LAMBDA_MAG * l_mag
             + LAMBDA_COMPLEX * (l_real + l_imag))
    return LossBreakdown(total=float(total), si_snr_term=float(l_sisnr),
                         magnitude=l_mag, real=l_real, imag=l_imag)


# ---------------------------------------------------------------------------
# kernel-attention analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttentionTrace:
    layer: str
    weights: np.ndarray             # (T, K) per-frame kernel attention
    dominant: np.ndarray            # (T,) argmax index, ties -> lowest
    energy_db: np.ndarray           # (T,) frame energy, dB
    vad: np.ndarray                 # (T,) bool, True = speech
    speech_proportions: np.ndarray     # (K,) zeros when no speech frames
    nonspeech_proportions: np.ndarray  # (K,)

    def to_json(self) -> dict:
        return {
            "layer": self.layer,
            "n_frames": int(len(self.dominant)),
            "n_speech_frames": int(self.vad.sum()),
            "weights": [[float(v) for v in row] for row in self.weights],
            "dominant": [int(v) for v in self.dominant],
            "energy_db": [float(v) for v in self.energy_db],
            "vad": [bool(v) for v in self.vad],
            "speech_proportions": [float(v) for v in self.speech_proportions],
            "nonspeech_proportions": [
                float(v) for v in self.nonspeech_proportions],
        }


def _frame_energies(samples: np.ndarray) -> np.ndarray:
    """Mean-square power of each analysis frame (same framing as the STFT)."""
    t_frames = frontend.frame_count(len(samples))
    padded = np.zeros(frontend.HOP * (t_frames - 1) + frontend.N_FFT,
                      dtype=np.float64)
    padded[:len(samples)] = samples
    frames = np.lib.stride_tricks.sliding_window_view(
        padded, frontend.N_FFT)[::frontend.HOP]
    return np.mean(frames ** 2, axis=1)


def _class_proportions(dominant: np.ndarray, mask: np.ndarray,
                       k: int) -> np.ndarray:
    if not mask.any():
        return np.zeros(k, dtype=np.float64)
    counts = np.bincount(dominant[mask], minlength=k).astype(np.float64)
    return counts / counts.sum()


def attention_trace(model: Model, samples, layer: str) -> AttentionTrace:
    """Trace per-frame kernel-attention weights of one adaptive layer.

    Runs offline inference with a capture hook, then classifies frames by
    an energy VAD (within 40 dB of the loudest frame and above an absolute
    silence floor) and reports dominant-kernel proportions per class.
    """
    valid = adaptive_layer_names(model.config)
    if layer not in valid:
        hint = ", ".join(valid) if valid else "none (static model)"
        raise ConfigurationError(
            f"unknown adaptive layer {layer!r}; valid layers: {hint}")
    block_name, sub = layer.rsplit(".", 1)
    sub_index = {"dw": 0, "pw1": 1, "pw2": 2}[sub]

    captured = {}

    def grab(name, attn):
        if name == block_name:
            captured["weights"] = np.asarray(attn.kernel[sub_index],
                                             dtype=np.float64)

    samples = np.asarray(samples, dtype=np.float32).reshape(-1)
    if samples.size == 0:
        raise ConfigurationError("cannot trace attention over empty audio")
    enhance_offline(model, samples, capture=grab)
    weights = captured["weights"]                      # (T, K)

    dominant = np.argmax(weights, axis=1)
    energy = _frame_energies(samples)
    peak = energy.max()
    with np.errstate(divide="ignore"):
        energy_db = 10.0 * np.log10(np.maximum(energy, 1e-20))
    vad = (energy >= peak * 10.0 ** (-VAD_DROP_DB / 10.0)) \
        & (energy > VAD_SILENCE_FLOOR)

    k = weights.shape[1]
    return AttentionTrace(
        layer=layer,
        weights=weights,
        dominant=dominant,
        energy_db=energy_db,
        vad=vad,
        speech_proportions=_class_proportions(dominant, vad, k),
        nonspeech_proportions=_class_proportions(dominant, ~vad, k),
    )
