"""End-to-end model tests: assembly validation, offline and streaming paths."""

from dataclasses import replace

import numpy as np
import pytest

from adaptcrn import frontend, model as model_mod
from adaptcrn.config import ModelConfig
from adaptcrn.errors import ConfigurationError, UnsupportedModeError
from adaptcrn.model import (
    StreamSession,
    build_model,
    enhance_offline,
    enhance_streaming,
)
from adaptcrn.weights import WeightStore, init_random

HOP = frontend.HOP


@pytest.fixture(scope="module")
def cfg():
    return ModelConfig()


@pytest.fixture(scope="module")
def store(cfg):
    return init_random(cfg, seed=11)


@pytest.fixture(scope="module")
def default_model(cfg, store):
    return build_model(cfg, store)


def speech_like(n, seed=0):
    r = np.random.default_rng(seed)
    t = np.arange(n) / frontend.SAMPLE_RATE
    x = (0.4 * np.sin(2 * np.pi * 220 * t) * np.sin(2 * np.pi * 3 * t)
         + 0.1 * r.standard_normal(n))
    return x.astype(np.float32)


# ---------------------------------------------------------------------------
# assembly validation
# ---------------------------------------------------------------------------

def test_build_validates_default_weights(default_model, cfg):
    m = default_model
    assert len(m.encoder) == len(m.decoder) == 5
    assert len(m.dprnn) == cfg.n_dprnn
    assert m.erb_bank.shape == (129, 257)
    assert m.mask_alpha.shape == (257,)
    assert m.encoder[0].attention is not None
    assert m.decoder[4].dw.transposed


def test_build_reports_missing_tensor(cfg, store):
    trimmed = WeightStore((n, a) for n, a in store.items()
                          if n != "encoder.2.pw1.weight")
    with pytest.raises(ConfigurationError, match="encoder.2.pw1.weight"):
        build_model(cfg, trimmed)


def test_build_reports_shape_conflict(cfg, store):
    tensors = dict(store.items())
    tensors["dprnn.1.inter.fc.bias"] = np.zeros(7, np.float32)
    with pytest.raises(ConfigurationError,
                       match=r"dprnn.1.inter.fc.bias.*\(7,\).*\(16,\)"):
        build_model(cfg, WeightStore(tensors))


def test_build_rejects_unknown_tensor(cfg, store):
    tensors = dict(store.items())
    tensors["rogue.weight"] = np.ones(3, np.float32)
    with pytest.raises(ConfigurationError, match="rogue.weight"):
        build_model(cfg, WeightStore(tensors))


def test_static_variant_uses_smaller_weight_set(cfg):
    basic_cfg = replace(cfg, adaptive=False)
    basic_store = init_random(basic_cfg, seed=11)
    assert not any(".attn." in n for n in basic_store)
    assert basic_store.n_values() < init_random(cfg, 11).n_values()
    m = build_model(basic_cfg, basic_store)
    assert all(p.attention is None for p in m.encoder + m.decoder)
    out = enhance_offline(m, speech_like(HOP * 8))
    assert out.shape == (HOP * 8,)
    # and the adaptive store is rejected outright
    with pytest.raises(ConfigurationError):
        build_model(basic_cfg, init_random(cfg, 11))


# ---------------------------------------------------------------------------
# offline path
# ---------------------------------------------------------------------------

def test_offline_empty_and_zero_inputs(default_model):
    assert enhance_offline(default_model, np.zeros(0)).shape == (0,)
    out = enhance_offline(default_model, np.zeros(4 * HOP, np.float32))
    np.testing.assert_array_equal(out, np.zeros(4 * HOP, np.float32))


def test_offline_output_finite_and_length_preserving(default_model):
    for n in [1, 100, HOP, 3 * HOP + 17, 16000]:
        out = enhance_offline(default_model, speech_like(n))
        assert out.shape == (n,)
        assert np.isfinite(out).all()


def test_offline_is_deterministic(default_model):
    x = speech_like(5000, seed=4)
    np.testing.assert_array_equal(enhance_offline(default_model, x),
                                  enhance_offline(default_model, x))


def passthrough_model(cfg, seed=5):
    """Weights forcing the final mask to 1: zero final block + tuned alpha."""
    tensors = dict(init_random(cfg, seed).items())
    for sub in ["dw", "pw1", "pw2"]:
        for part in ["weight", "bias"]:
            name = f"decoder.4.{sub}.{part}"
            tensors[name] = np.zeros_like(tensors[name])
    tensors["decoder.4.bn2.beta"] = np.ones(1, np.float32)
    # zero head -> the final channel-out gate is exactly sigmoid(0) = 0.5
    for part in ["weight", "bias"]:
        name = f"decoder.4.attn.head.{part}"
        tensors[name] = np.zeros_like(tensors[name])
    # decoder output is constant 0.5, so pre-sigmoid bin b reads
    # 0.5*colsum(b); alpha = 2*log(5)/colsum makes beta*sigmoid(.) == 1
    colsums = frontend.build_erb_bank().sum(axis=0)
    tensors["mask.alpha"] = (2.0 * np.log(5.0) / colsums).astype(np.float32)
    return build_model(cfg, WeightStore(tensors))


def test_saturated_mask_passes_input_through(cfg):
    m = passthrough_model(cfg)
    x = speech_like(16000, seed=6)
    out = enhance_offline(m, x)
    assert np.abs(out[512:-512] - x[512:-512]).max() < 1e-5


def test_offline_strategies_agree(default_model):
    x = speech_like(4 * HOP, seed=7)
    a = enhance_offline(default_model, x, strategy="grouped_unfold")
    b = enhance_offline(default_model, x, strategy="per_frame")
    assert np.abs(a - b).max() < 1e-5


def test_capture_visits_every_block(default_model):
    seen = []
    enhance_offline(default_model, speech_like(3 * HOP),
                    capture=lambda name, attn: seen.append((name, attn)))
    names = [n for n, _ in seen]
    assert names == [f"encoder.{i}" for i in range(5)] \
        + [f"decoder.{i}" for i in range(5)]
    for _, attn in seen:
        assert attn.kernel.shape[0] == 3
        assert np.allclose(attn.kernel.sum(axis=2), 1.0, atol=1e-6)


# ---------------------------------------------------------------------------
# streaming path
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["temporal", "single_frame", "multi_frame"])
def test_streaming_matches_offline(cfg, mode):
    c = replace(cfg, attention_mode=mode)
    m = build_model(c, init_random(c, seed=21))
    x = speech_like(12000, seed=8)
    off = enhance_offline(m, x)
    stream = enhance_streaming(m, x)
    assert stream.shape == off.shape
    assert np.abs(stream - off).max() < 1e-5


def test_streaming_matches_offline_static_variant(cfg):
    c = replace(cfg, adaptive=False)
    m = build_model(c, init_random(c, seed=22))
    x = speech_like(9000, seed=9)
    assert np.abs(enhance_streaming(m, x) - enhance_offline(m, x)).max() < 1e-5


def test_push_validates_block_size(default_model):
    session = StreamSession(default_model)
    with pytest.raises(ConfigurationError, match="256"):
        session.push(np.zeros(255, np.float32))
    with pytest.raises(ConfigurationError, match="256"):
        session.push(np.zeros(512, np.float32))


def test_first_push_emits_silence(default_model):
    session = StreamSession(default_model)
    out = session.push(speech_like(HOP))
    np.testing.assert_array_equal(out, np.zeros(HOP, np.float32))


def test_two_sessions_are_bit_identical(default_model):
    x = speech_like(6 * HOP, seed=10)
    s1, s2 = StreamSession(default_model), StreamSession(default_model)
    for b in range(6):
        hop = x[b * HOP:(b + 1) * HOP]
        np.testing.assert_array_equal(s1.push(hop), s2.push(hop))


def test_reset_replays_bit_identically(default_model):
    x = speech_like(5 * HOP, seed=12)
    session = StreamSession(default_model)
    first = [session.push(x[b * HOP:(b + 1) * HOP]).copy() for b in range(5)]
    session.reset()
    second = [session.push(x[b * HOP:(b + 1) * HOP]) for b in range(5)]
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


def test_streaming_is_causal(default_model):
    """Perturbing the input changes no output emitted more than one window
    earlier: hops completed before the perturbed hop arrives stay bitwise
    identical."""
    x = speech_like(8 * HOP, seed=13)
    x2 = x.copy()
    x2[5 * HOP:] += 0.125

    def run(inp):
        session = StreamSession(default_model)
        return [session.push(inp[b * HOP:(b + 1) * HOP]) for b in range(8)]

    a, b = run(x), run(x2)
    for hop_a, hop_b in zip(a[:5], b[:5]):
        np.testing.assert_array_equal(hop_a, hop_b)
    assert any(not np.array_equal(p, q) for p, q in zip(a[5:], b[5:]))


def test_streaming_rejects_whole_utterance_attention(cfg):
    c = replace(cfg, attention_mode="global_utterance")
    m = build_model(c, init_random(c, seed=23))
    with pytest.raises(UnsupportedModeError, match="frame"):
        StreamSession(m)
    # the offline path still supports it
    out = enhance_offline(m, speech_like(3 * HOP))
    assert np.isfinite(out).all()


def test_latency_is_one_window(default_model):
    assert StreamSession(default_model).latency_samples == 512
