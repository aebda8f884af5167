"""Tests for parameter/MAC accounting, SI-SNR, losses, and attention traces."""

from dataclasses import replace

import numpy as np
import pytest

from adaptcrn import accounting, frontend
from adaptcrn.accounting import (
    AttentionTrace,
    affine_params,
    attention_trace,
    conv_macs,
    conv_params,
    count_macs,
    count_params,
    count_report,
    gru_macs,
    gru_params,
    loss_total,
    si_snr,
)
from adaptcrn.config import ModelConfig
from adaptcrn.errors import ConfigurationError
from adaptcrn.model import build_model
from adaptcrn.weights import init_random

CFG = ModelConfig()


# ---------------------------------------------------------------------------
# closed forms and golden totals
# ---------------------------------------------------------------------------

def test_conv_formula_examples():
    assert conv_params(8, 16, 16, 1, 1) == 8 * 256 + 16 == 2064
    assert conv_macs(16, 16, 1, 1, 33) == 8448
    assert 8 * (16 * 16) == 2048  # aggregation term for the same layer
    assert affine_params(16, 16) == 272
    assert gru_params(4, 8) == 3 * (32 + 16 + 8)
    assert gru_macs(8, 8) == 384


def test_default_totals_match_published_sizes():
    rep = count_report(CFG)
    assert rep.total_params == 135237
    assert abs(rep.total_params - 134510) / 134510 < 0.10
    assert rep.total_macs_per_frame == 598614
    assert rep.macs_per_second == 598614 * 62.5
    assert abs(rep.macs_per_second - 40.80e6) / 40.80e6 < 0.15


def test_static_variant_totals():
    rep = count_report(replace(CFG, adaptive=False))
    assert rep.total_params == 30164
    assert abs(rep.total_params - 29440) / 29440 < 0.10
    assert rep.total_macs_per_frame == 483349
    assert abs(rep.macs_per_second - 33.67e6) / 33.67e6 < 0.15


def test_channel_maps_off_total():
    assert count_params(replace(CFG, channel_attention=False)).total_params \
        == 125403


def test_totals_equal_column_sums():
    rep = count_report(CFG)
    assert rep.total_params == sum(r.params for r in rep.rows)
    assert rep.total_macs_per_frame == sum(r.macs_per_frame for r in rep.rows)
    assert all(isinstance(r.params, int) and isinstance(r.macs_per_frame, int)
               for r in rep.rows)


@pytest.mark.parametrize("variant", [
    {},
    {"adaptive": False},
    {"n_kernels": 4},
    {"attention_mode": "single_frame"},
    {"attention_mode": "multi_frame"},
    {"channel_attention": False},
])
def test_params_equal_initialized_reals(variant):
    cfg = ModelConfig.from_dict({**CFG.to_dict(), **variant})
    assert count_params(cfg).total_params == init_random(cfg, 0).n_values()


def test_macs_monotone_in_adaptivity_and_k():
    base = count_report(CFG).total_macs_per_frame
    assert base > count_report(replace(CFG, adaptive=False)).total_macs_per_frame
    assert count_report(replace(CFG, n_kernels=16)).total_macs_per_frame > base
    assert count_report(replace(CFG, n_kernels=4)).total_macs_per_frame < base


def test_report_json_is_stable():
    j = count_report(CFG).to_json()
    assert list(j) == ["rows", "total_params", "total_macs_per_frame",
                      "macs_per_second"]
    names = [r["name"] for r in j["rows"]]
    assert names[:5] == [f"encoder.{i}" for i in range(5)]
    assert "mask" in names and "erb.compress" in names
    mask_row = next(r for r in j["rows"] if r["name"] == "mask")
    assert mask_row["params"] == 257 and mask_row["macs_per_frame"] == 0


# ---------------------------------------------------------------------------
# SI-SNR metric
# ---------------------------------------------------------------------------

def sine(n=4000, f=440.0, amp=0.5):
    t = np.arange(n) / frontend.SAMPLE_RATE
    return (amp * np.sin(2 * np.pi * f * t)).astype(np.float32)


def test_si_snr_perfect_and_scaled_estimates_hit_cap():
    x = sine()
    assert si_snr(x, x) == 100.0
    assert si_snr(2.0 * x, x) == 100.0


def test_si_snr_orthogonal_equal_energy_noise_is_zero_db():
    r = np.random.default_rng(0)
    ref = r.standard_normal(4000)
    n = r.standard_normal(4000)
    n -= (np.dot(n, ref) / np.dot(ref, ref)) * ref
    n *= np.sqrt(np.dot(ref, ref) / np.dot(n, n))
    assert abs(si_snr(ref + n, ref)) < 1e-6


def test_si_snr_invariant_to_reference_scale():
    r = np.random.default_rng(1)
    est, ref = r.standard_normal(3000), r.standard_normal(3000)
    base = si_snr(est, ref)
    for beta in [1e-3, 0.5, 7.0, 1e4]:
        assert abs(si_snr(est, beta * ref) - base) < 1e-6


def test_si_snr_error_cases():
    x = sine()
    with pytest.raises(ConfigurationError, match="zero"):
        si_snr(x, np.zeros_like(x))
    with pytest.raises(ConfigurationError, match="lengths"):
        si_snr(x[:-1], x)
    assert si_snr(np.zeros_like(x), x) == -100.0


# ---------------------------------------------------------------------------
# training objective
# ---------------------------------------------------------------------------

def oracle_spectra(wave):
    """Frame-by-frame reference STFT, built independently of the library."""
    wave = np.asarray(wave, dtype=np.float64)
    n = len(wave)
    t_frames = -(-n // 256)
    padded = np.zeros(256 * (t_frames - 1) + 512)
    padded[:n] = wave
    w = np.sqrt(0.5 - 0.5 * np.cos(2 * np.pi * np.arange(512) / 512))
    return np.stack([np.fft.rfft(padded[i * 256:i * 256 + 512] * w)
                     for i in range(t_frames)])


def test_loss_identical_signals_hits_si_snr_cap():
    x = sine()
    br = loss_total(x, x)
    assert br.si_snr_term == -10.0
    assert br.magnitude == br.real == br.imag == 0.0
    assert abs(br.total - (-0.1)) < 1e-12


def test_loss_silent_estimate_magnitude_term():
    x = sine()
    br = loss_total(np.zeros_like(x), x)
    mag = np.abs(oracle_spectra(x))
    assert abs(br.magnitude - np.mean(mag ** 0.6)) / np.mean(mag ** 0.6) < 1e-5


def test_loss_components_match_spectral_oracle():
    r = np.random.default_rng(2)
    ref = (0.3 * r.standard_normal(5000)).astype(np.float32)
    est = (ref + 0.1 * r.standard_normal(5000)).astype(np.float32)
    br = loss_total(est, ref)

    se, sr = oracle_spectra(est), oracle_spectra(ref)
    def comp(s):
        mag = np.abs(s)
        d = np.maximum(mag, 1e-8) ** 0.7
        return mag ** 0.3, s.real / d, s.imag / d
    em, er, ei = comp(se)
    rm, rr, ri = comp(sr)
    assert abs(br.magnitude - np.mean((em - rm) ** 2)) / br.magnitude < 1e-5
    assert abs(br.real - np.mean((er - rr) ** 2)) / br.real < 1e-5
    assert abs(br.imag - np.mean((ei - ri) ** 2)) / br.imag < 1e-5
    expected_sisnr = -si_snr(est, ref) / 10.0
    assert abs(br.si_snr_term - expected_sisnr) < 1e-9
    assert br.total == pytest.approx(
        0.01 * br.si_snr_term + 0.7 * br.magnitude + 0.3 * (br.real + br.imag))
    assert all(v >= 0 for v in (br.magnitude, br.real, br.imag))


# ---------------------------------------------------------------------------
# attention traces
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def model():
    return build_model(CFG, init_random(CFG, seed=31))


def half_silent_audio():
    r = np.random.default_rng(3)
    n = 8 * 256
    x = np.zeros(2 * n, np.float32)
    t = np.arange(n) / frontend.SAMPLE_RATE
    x[n:] = (0.5 * np.sin(2 * np.pi * 300 * t)
             + 0.05 * r.standard_normal(n)).astype(np.float32)
    return x


def test_trace_rows_and_classes(model):
    x = half_silent_audio()
    tr = attention_trace(model, x, "encoder.2.pw1")
    t_frames = frontend.frame_count(len(x))
    assert tr.weights.shape == (t_frames, 8)
    np.testing.assert_allclose(tr.weights.sum(axis=1), 1.0, atol=1e-6)
    np.testing.assert_array_equal(tr.dominant, np.argmax(tr.weights, axis=1))
    assert tr.vad.any() and not tr.vad.all()
    assert not tr.vad[0]          # leading silence
    assert tr.vad[t_frames // 2 + 2]  # loud half
    assert abs(tr.speech_proportions.sum() - 1.0) < 1e-9
    assert abs(tr.nonspeech_proportions.sum() - 1.0) < 1e-9


def test_trace_silence_only_has_no_speech_frames(model):
    tr = attention_trace(model, np.zeros(6 * 256, np.float32), "decoder.4.dw")
    assert not tr.vad.any()
    np.testing.assert_array_equal(tr.speech_proportions, np.zeros(8))
    assert abs(tr.nonspeech_proportions.sum() - 1.0) < 1e-9


def test_trace_layer_validation(model):
    x = half_silent_audio()
    with pytest.raises(ConfigurationError, match="encoder.3.pw9"):
        attention_trace(model, x, "encoder.3.pw9")
    with pytest.raises(ConfigurationError, match="empty"):
        attention_trace(model, np.zeros(0), "encoder.0.dw")
    static_cfg = replace(CFG, adaptive=False)
    static = build_model(static_cfg, init_random(static_cfg, 0))
    with pytest.raises(ConfigurationError, match="static"):
        attention_trace(static, x, "encoder.0.dw")


def test_trace_json_round_trips(model):
    import json
    tr = attention_trace(model, half_silent_audio(), "encoder.0.dw")
    j = json.loads(json.dumps(tr.to_json()))
    assert j["layer"] == "encoder.0.dw"
    assert j["n_frames"] == len(j["dominant"]) == len(j["vad"])
    assert len(j["speech_proportions"]) == 8
