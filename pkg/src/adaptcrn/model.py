"""Model assembly plus the offline and streaming inference drivers.

build_model binds a WeightStore to the architecture derived from a
ModelConfig, validating every tensor name and shape.  enhance_offline runs
the whole utterance through the batched path; StreamSession consumes
256-sample hops and emits enhanced hops with one analysis window (512
samples, 32 ms) of algorithmic latency.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import frontend
from .adaptive import AttentionParams, KernelBank
from .blocks import (
    BlockParams,
    BlockState,
    BnParams,
    DprnnParams,
    DprnnState,
    adaptive_block_step,
    block_forward,
    grouped_dprnn_forward,
    grouped_dprnn_step,
)
from .config import BlockPlan, DprnnPlan, ModelConfig, ModelPlan, layer_plan, tensor_manifest
from .errors import ConfigurationError, UnsupportedModeError
from .ops import GruParams
from .weights import WeightStore

__all__ = ["Model", "StreamSession", "build_model", "enhance_offline",
           "enhance_streaming"]

# capture callbacks receive (block name, AttentionOutputs) per adaptive block
CaptureFn = Callable[[str, object], None]


@dataclass(frozen=True)
class Model:
    """Immutable bound model: geometry, weights, and the compression bank."""
    config: ModelConfig
    plan: ModelPlan
    erb_bank: np.ndarray                  # (129, 257)
    encoder: Tuple[BlockParams, ...]
    dprnn: Tuple[DprnnParams, ...]
    decoder: Tuple[BlockParams, ...]
    mask_alpha: np.ndarray                # (257,)


def _gru(store: WeightStore, prefix: str) -> GruParams:
    return GruParams(store[f"{prefix}.w_ih"], store[f"{prefix}.w_hh"],
                     store[f"{prefix}.b_ih"], store[f"{prefix}.b_hh"])


def _attention(cfg: ModelConfig, store: WeightStore,
               b: BlockPlan) -> AttentionParams:
    kw = dict(
        mode=cfg.attention_mode, normalization=cfg.attention_norm,
        n_layers=b.n_sublayers, k=cfg.n_kernels,
        map_c_in=b.c_in if cfg.channel_attention else 0,
        map_c_out=b.c_out if cfg.channel_attention else 0,
        map_spatial=b.kernel[0] * b.kernel[1] if cfg.spatial_attention else 0,
        head_w=store[f"{b.name}.attn.head.weight"],
        head_b=store[f"{b.name}.attn.head.bias"],
    )
    if cfg.attention_mode in ("single_frame", "global_utterance"):
        kw.update(fc1_w=store[f"{b.name}.attn.fc1.weight"],
                  fc1_b=store[f"{b.name}.attn.fc1.bias"])
    elif cfg.attention_mode == "multi_frame":
        kw.update(conv_w=store[f"{b.name}.attn.conv.weight"],
                  conv_b=store[f"{b.name}.attn.conv.bias"])
    else:
        kw.update(gru=_gru(store, f"{b.name}.attn.gru"))
    return AttentionParams(**kw)


def _bank(cfg: ModelConfig, store: WeightStore, b: BlockPlan, sub: str, *,
          stride_f: int = 1, pad_f: int = 0, groups: int = 1,
          transposed: bool = False) -> KernelBank:
    w = store[f"{b.name}.{sub}.weight"]
    if not cfg.adaptive:
        w = w[None]  # single-candidate bank
    return KernelBank(w, store[f"{b.name}.{sub}.bias"], stride_f=stride_f,
                      pad_f=pad_f, groups=groups, transposed=transposed)


def _bn(store: WeightStore, prefix: str) -> BnParams:
    return BnParams(store[f"{prefix}.mean"], store[f"{prefix}.var"],
                    store[f"{prefix}.gamma"], store[f"{prefix}.beta"])


def _block(cfg: ModelConfig, store: WeightStore, b: BlockPlan) -> BlockParams:
    return BlockParams(
        plan=b,
        ln_gamma=store[f"{b.name}.ln.gamma"],
        ln_beta=store[f"{b.name}.ln.beta"],
        dw=_bank(cfg, store, b, "dw", stride_f=b.stride_f, pad_f=b.pad_f,
                 groups=b.c_in, transposed=b.transposed),
        pw1=_bank(cfg, store, b, "pw1"),
        pw2=_bank(cfg, store, b, "pw2"),
        bn1=_bn(store, f"{b.name}.bn1"),
        bn2=_bn(store, f"{b.name}.bn2"),
        prelu1=store[f"{b.name}.prelu1.alpha"],
        prelu2=store[f"{b.name}.prelu2.alpha"],
        attention=_attention(cfg, store, b) if cfg.adaptive else None,
        star=cfg.star_op,
    )


def _dprnn(store: WeightStore, d: DprnnPlan) -> DprnnParams:
    groups = range(d.groups)
    return DprnnParams(
        plan=d,
        intra_fwd=tuple(_gru(store, f"{d.name}.intra.g{g}.fwd") for g in groups),
        intra_bwd=tuple(_gru(store, f"{d.name}.intra.g{g}.bwd") for g in groups),
        intra_fc_w=store[f"{d.name}.intra.fc.weight"],
        intra_fc_b=store[f"{d.name}.intra.fc.bias"],
        intra_ln_gamma=store[f"{d.name}.intra.ln.gamma"],
        intra_ln_beta=store[f"{d.name}.intra.ln.beta"],
        inter=tuple(_gru(store, f"{d.name}.inter.g{g}") for g in groups),
        inter_fc_w=store[f"{d.name}.inter.fc.weight"],
        inter_fc_b=store[f"{d.name}.inter.fc.bias"],
        inter_ln_gamma=store[f"{d.name}.inter.ln.gamma"],
        inter_ln_beta=store[f"{d.name}.inter.ln.beta"],
    )


def build_model(cfg: ModelConfig, store: WeightStore) -> Model:
    """Bind weights to the architecture, validating names and shapes."""
    plan = layer_plan(cfg)
    manifest = tensor_manifest(cfg)

    missing = [s.name for s in manifest if s.name not in store]
    if missing:
        shown = ", ".join(repr(n) for n in missing[:5])
        more = f" (and {len(missing) - 5} more)" if len(missing) > 5 else ""
        raise ConfigurationError(f"weight store is missing tensor {shown}{more}")
    expected_names = {s.name for s in manifest}
    extra = [n for n in store if n not in expected_names]
    if extra:
        raise ConfigurationError(
            f"weight store holds unexpected tensor {extra[0]!r} "
            f"not part of this architecture")
    for s in manifest:
        actual = store[s.name].shape
        if actual != s.shape:
            raise ConfigurationError(
                f"tensor {s.name!r} has shape {actual}, expected {s.shape}")

    for enc_idx, dec_idx in plan.skip_pairs:
        e, d = plan.encoder[enc_idx], plan.decoder[dec_idx]
        if (e.c_out, e.f_out) != (d.c_in, d.f_in):
            raise ConfigurationError(
                f"skip {e.name} -> {d.name} mismatches: "
                f"{(e.c_out, e.f_out)} vs {(d.c_in, d.f_in)}")

    return Model(
        config=cfg,
        plan=plan,
        erb_bank=frontend.build_erb_bank(),
        encoder=tuple(_block(cfg, store, b) for b in plan.encoder),
        dprnn=tuple(_dprnn(store, d) for d in plan.dprnn),
        decoder=tuple(_block(cfg, store, b) for b in plan.decoder),
        mask_alpha=store["mask.alpha"],
    )


def _capture_for(capture: Optional[CaptureFn], name: str):
    if capture is None:
        return None
    return lambda attn: capture(name, attn)


def enhance_offline(model: Model, samples, *, strategy: str = "grouped_unfold",
                    capture: Optional[CaptureFn] = None) -> np.ndarray:
    """Enhance a whole utterance; output length equals input length."""
    samples = np.asarray(samples, dtype=np.float32).reshape(-1)
    if samples.size == 0:
        return np.zeros(0, dtype=np.float32)
    spec = frontend.stft(samples)
    feats = frontend.compress(spec, model.erb_bank)
    x = frontend.sfe(feats, model.config.sfe_kernel)

    skips: List[np.ndarray] = []
    for p in model.encoder:
        x = block_forward(x, p, strategy=strategy,
                          capture=_capture_for(capture, p.plan.name))
        skips.append(x)
    for p in model.dprnn:
        x = grouped_dprnn_forward(x, p)
    skip_for = {dec: enc for enc, dec in model.plan.skip_pairs}
    for j, p in enumerate(model.decoder):
        if j in skip_for:
            x = x + skips[skip_for[j]]
        x = block_forward(x, p, strategy=strategy,
                          capture=_capture_for(capture, p.plan.name))

    mask = frontend.decompress_mask(x[0], model.erb_bank, model.mask_alpha)
    masked = frontend.apply_mask(mask, spec)
    return frontend.istft(masked, length=len(samples))


class StreamSession:
    """Frame-synchronous streaming over a shared immutable model.

    Each push consumes one 256-sample hop and emits one enhanced hop; the
    first emitted hop is silence (the analysis window is still filling), so
    output sample 256 + i corresponds to input sample i.  One trailing
    zero-hop push drains the final frame.
    """

    def __init__(self, model: Model):
        cfg = model.config
        if cfg.adaptive and cfg.attention_mode == "global_utterance":
            raise UnsupportedModeError(
                "global_utterance attention pools the entire utterance and "
                "cannot run frame-by-frame; use enhance_offline")
        self.model = model
        self._window = frontend.sqrt_hann_window()
        self._skip_for = {dec: enc for enc, dec in model.plan.skip_pairs}
        self.reset()

    @property
    def latency_samples(self) -> int:
        return frontend.N_FFT

    def reset(self) -> None:
        """Restore the all-zero initial state."""
        self._ring = np.zeros(frontend.N_FFT, dtype=np.float32)
        self._tail = np.zeros(frontend.HOP, dtype=np.float64)
        self._primed = False
        self._enc_states = [BlockState() for _ in self.model.encoder]
        self._dprnn_states = [DprnnState() for _ in self.model.dprnn]
        self._dec_states = [BlockState() for _ in self.model.decoder]

    def push(self, block) -> np.ndarray:
        """Consume one 256-sample hop, return one enhanced 256-sample hop."""
        block = np.asarray(block, dtype=np.float32).reshape(-1)
        if block.shape != (frontend.HOP,):
            raise ConfigurationError(
                f"push expects exactly {frontend.HOP} samples, got {block.size}")
        self._ring = np.concatenate([self._ring[frontend.HOP:], block])
        if not self._primed:
            self._primed = True
            return np.zeros(frontend.HOP, dtype=np.float32)
        return self._process_frame()

    def _process_frame(self) -> np.ndarray:
        m = self.model
        spec_t = np.fft.rfft(self._ring * self._window)[None].astype(np.complex64)
        feats = frontend.compress(spec_t, m.erb_bank)
        x = frontend.sfe(feats, m.config.sfe_kernel)

        skips = []
        for p, st in zip(m.encoder, self._enc_states):
            x = adaptive_block_step(x, p, st)
            skips.append(x)
        for p, st in zip(m.dprnn, self._dprnn_states):
            x = grouped_dprnn_step(x, p, st)
        for j, (p, st) in enumerate(zip(m.decoder, self._dec_states)):
            if j in self._skip_for:
                x = x + skips[self._skip_for[j]]
            x = adaptive_block_step(x, p, st)

        mask = frontend.decompress_mask(x[0], m.erb_bank, m.mask_alpha)
        masked = frontend.apply_mask(mask, spec_t)
        y = np.fft.irfft(masked[0], n=frontend.N_FFT) * self._window
        out = (self._tail + y[:frontend.HOP]).astype(np.float32)
        self._tail = y[frontend.HOP:].copy()
        return out


def enhance_streaming(model: Model, samples) -> np.ndarray:
    """Run an utterance hop-by-hop through a fresh session.

    Returns the latency-aligned result with the same length as the input;
    matches enhance_offline within streaming tolerance.
    """
    samples = np.asarray(samples, dtype=np.float32).reshape(-1)
    if samples.size == 0:
        return np.zeros(0, dtype=np.float32)
    session = StreamSession(model)
    n_blocks = frontend.frame_count(len(samples))
    padded = np.zeros(n_blocks * frontend.HOP, dtype=np.float32)
    padded[:len(samples)] = samples
    hops = [session.push(padded[b * frontend.HOP:(b + 1) * frontend.HOP])
            for b in range(n_blocks)]
    hops.append(session.push(np.zeros(frontend.HOP, dtype=np.float32)))
    return np.concatenate(hops)[frontend.HOP:frontend.HOP + len(samples)]
