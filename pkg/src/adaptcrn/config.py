"""Model configuration plus the derived layer plan and tensor manifest.

ModelConfig is a frozen record of every architecture hyperparameter.  From it,
layer_plan() derives the per-block geometry (channels, kernels, frequency
chain, skip pairing) and tensor_manifest() the exact ordered list of named
tensors the model owns.  Weight initialization, weight-file validation, model
building, and parameter counting all consume the same manifest, so they can
never disagree about what a configuration contains.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Tuple

from .adaptive import ATTENTION_MODES, NORMALIZATIONS
from .errors import ConfigurationError
from .frontend import N_BANDS, N_BINS

__all__ = [
    "ModelConfig", "BlockPlan", "DprnnPlan", "ModelPlan", "TensorSpec",
    "layer_plan", "tensor_manifest", "adaptive_layer_names", "replace",
]


@dataclass(frozen=True)
class ModelConfig:
    """Complete hyperparameter record; defaults give the standard model.

    Attention flags: `adaptive` switches kernel attention on/off entirely,
    `channel_attention` adds the per-frame input/output channel maps, and
    `spatial_attention` adds a per-frame map over the depthwise kernel taps.
    `attention_mode` selects how frames are contextualized (single_frame,
    multi_frame, temporal, global_utterance), `attention_norm` how kernel
    logits become weights (softmax or prelu_direct).
    """

    n_kernels: int = 8
    adaptive: bool = True
    attention_mode: str = "temporal"
    attention_norm: str = "softmax"
    attention_hidden: int = 32
    attention_conv_kernel: int = 3
    channel_attention: bool = True
    spatial_attention: bool = False
    star_op: bool = False
    sfe_kernel: int = 3
    encoder_kernels: Tuple[Tuple[int, int], ...] = (
        (1, 5), (1, 5), (3, 3), (3, 3), (3, 3))
    encoder_strides: Tuple[int, ...] = (2, 2, 1, 1, 1)
    encoder_channels: Tuple[int, ...] = (9, 16, 16, 16, 16, 16)
    block_hidden: int = 16
    final_block_hidden: int = 4
    n_dprnn: int = 2
    dprnn_groups: int = 2
    dprnn_intra_hidden: int = 8
    dprnn_inter_hidden: int = 16

    def __post_init__(self):
        if self.attention_mode not in ATTENTION_MODES:
            raise ConfigurationError(
                f"attention_mode must be one of {ATTENTION_MODES}, "
                f"got {self.attention_mode!r}"
            )
        if self.attention_norm not in NORMALIZATIONS:
            raise ConfigurationError(
                f"attention_norm must be one of {NORMALIZATIONS}, "
                f"got {self.attention_norm!r}"
            )
        for name in ("n_kernels", "attention_hidden", "attention_conv_kernel",
                     "sfe_kernel", "block_hidden", "final_block_hidden",
                     "dprnn_groups", "dprnn_intra_hidden", "dprnn_inter_hidden"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.n_dprnn < 0:
            raise ConfigurationError("n_dprnn must be >= 0")
        if self.sfe_kernel % 2 == 0:
            raise ConfigurationError("sfe_kernel must be odd")
        n = len(self.encoder_kernels)
        if n < 1 or len(self.encoder_strides) != n \
                or len(self.encoder_channels) != n + 1:
            raise ConfigurationError(
                "encoder specs inconsistent: need N kernels, N strides, "
                f"N+1 channels; got {n} kernels, {len(self.encoder_strides)} "
                f"strides, {len(self.encoder_channels)} channels"
            )
        for k_t, k_f in self.encoder_kernels:
            if k_t < 1 or k_f < 1 or k_f % 2 == 0:
                raise ConfigurationError(
                    f"block kernels need k_t >= 1 and odd k_f, got ({k_t}, {k_f})"
                )
        if any(s < 1 for s in self.encoder_strides):
            raise ConfigurationError("strides must be >= 1")
        if any(c < 1 for c in self.encoder_channels):
            raise ConfigurationError("channel counts must be >= 1")
        if self.encoder_channels[0] != 3 * self.sfe_kernel:
            raise ConfigurationError(
                f"first encoder channel count must equal 3 * sfe_kernel = "
                f"{3 * self.sfe_kernel}, got {self.encoder_channels[0]}"
            )
        c = self.encoder_channels[-1]
        for name, v in (("channels", c),
                        ("dprnn_intra_hidden", self.dprnn_intra_hidden),
                        ("dprnn_inter_hidden", self.dprnn_inter_hidden)):
            if v % self.dprnn_groups != 0:
                raise ConfigurationError(
                    f"{name} ({v}) not divisible by dprnn_groups "
                    f"({self.dprnn_groups})"
                )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_kernels"] = [list(k) for k in self.encoder_kernels]
        d["encoder_strides"] = list(self.encoder_strides)
        d["encoder_channels"] = list(self.encoder_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        kw = dict(d)
        if "encoder_kernels" in kw:
            try:
                kw["encoder_kernels"] = tuple(
                    (int(k[0]), int(k[1])) for k in kw["encoder_kernels"])
            except (TypeError, ValueError, IndexError) as e:
                raise ConfigurationError(
                    f"encoder_kernels must be pairs of ints: {e}"
                ) from e
        for key in ("encoder_strides", "encoder_channels"):
            if key in kw:
                kw[key] = tuple(int(v) for v in kw[key])
        return cls(**kw)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True,
                             separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# layer plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockPlan:
    """Geometry of one encoder/decoder block."""
    name: str
    c_in: int
    c_out: int
    hidden: int
    kernel: Tuple[int, int]
    stride_f: int
    pad_f: int
    transposed: bool
    f_in: int
    f_out: int
    inner_skip: bool  # identity residual around the whole block

    @property
    def n_sublayers(self) -> int:
        return 3  # depthwise + two pointwise convolutions


@dataclass(frozen=True)
class DprnnPlan:
    """Geometry of one grouped dual-path module."""
    name: str
    channels: int
    f: int
    groups: int
    intra_hidden: int  # total across groups, per direction
    inter_hidden: int  # total across groups

    @property
    def intra_group_hidden(self) -> int:
        return self.intra_hidden // self.groups

    @property
    def inter_group_hidden(self) -> int:
        return self.inter_hidden // self.groups

    @property
    def group_channels(self) -> int:
        return self.channels // self.groups


@dataclass(frozen=True)
class ModelPlan:
    encoder: Tuple[BlockPlan, ...]
    dprnn: Tuple[DprnnPlan, ...]
    decoder: Tuple[BlockPlan, ...]
    # (encoder index, decoder index) pairs whose activations are added
    skip_pairs: Tuple[Tuple[int, int], ...]


def _conv_f_out(f_in: int, k_f: int, stride: int, pad: int) -> int:
    return (f_in + 2 * pad - k_f) // stride + 1


def _tconv_f_out(f_in: int, k_f: int, stride: int, pad: int) -> int:
    return (f_in - 1) * stride - 2 * pad + k_f


def layer_plan(cfg: ModelConfig) -> ModelPlan:
    """Derive block geometry: encoder chain, dual-path modules, mirrored decoder."""
    chans = cfg.encoder_channels
    n = len(cfg.encoder_kernels)
    encoder = []
    f = N_BANDS
    for i, ((k_t, k_f), s) in enumerate(zip(cfg.encoder_kernels,
                                            cfg.encoder_strides)):
        pad = (k_f - 1) // 2
        f_out = _conv_f_out(f, k_f, s, pad)
        if f_out < 1:
            raise ConfigurationError(
                f"encoder layer {i} collapses the frequency axis "
                f"({f} -> {f_out})"
            )
        c_in, c_out = chans[i], chans[i + 1]
        encoder.append(BlockPlan(
            name=f"encoder.{i}", c_in=c_in, c_out=c_out, hidden=cfg.block_hidden,
            kernel=(k_t, k_f), stride_f=s, pad_f=pad, transposed=False,
            f_in=f, f_out=f_out,
            inner_skip=(s == 1 and c_in == c_out),
        ))
        f = f_out

    c = chans[-1]
    dprnn = tuple(
        DprnnPlan(name=f"dprnn.{m}", channels=c, f=f, groups=cfg.dprnn_groups,
                  intra_hidden=cfg.dprnn_intra_hidden,
                  inter_hidden=cfg.dprnn_inter_hidden)
        for m in range(cfg.n_dprnn)
    )

    # decoder mirrors the encoder: reversed kernel/stride order, strided
    # layers become depthwise transposed upsamplers, final block emits 1 channel
    decoder = []
    for j in range(n):
        k_t, k_f = cfg.encoder_kernels[n - 1 - j]
        s = cfg.encoder_strides[n - 1 - j]
        pad = (k_f - 1) // 2
        transposed = s > 1
        last = j == n - 1
        c_in = c
        c_out = 1 if last else c
        hidden = cfg.final_block_hidden if last else cfg.block_hidden
        if transposed:
            f_out = _tconv_f_out(f, k_f, s, pad)
            kernel = (1, k_f)  # depthwise frequency upsampler carries no time taps
        else:
            f_out = _conv_f_out(f, k_f, s, pad)
            kernel = (k_t, k_f)
        decoder.append(BlockPlan(
            name=f"decoder.{j}", c_in=c_in, c_out=c_out, hidden=hidden,
            kernel=kernel, stride_f=s, pad_f=pad, transposed=transposed,
            f_in=f, f_out=f_out,
            inner_skip=(s == 1 and c_in == c_out and not transposed),
        ))
        f = f_out
    if f != N_BANDS:
        raise ConfigurationError(
            f"decoder does not restore the {N_BANDS}-band axis (got {f}); "
            "check kernels/strides"
        )

    skip_pairs = tuple(
        (i, n - 1 - i) for i in range(n)
        if encoder[i].c_out == decoder[n - 1 - i].c_in
        and encoder[i].f_out == decoder[n - 1 - i].f_in
    )
    return ModelPlan(encoder=tuple(encoder), dprnn=dprnn,
                     decoder=tuple(decoder), skip_pairs=skip_pairs)


def head_width(cfg: ModelConfig, block: BlockPlan) -> int:
    """Output width of a block's joint attention head."""
    w = block.n_sublayers * cfg.n_kernels
    if cfg.channel_attention:
        w += block.c_in + block.c_out
    if cfg.spatial_attention:
        w += block.kernel[0] * block.kernel[1]
    return w


# ---------------------------------------------------------------------------
# tensor manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorSpec:
    """One named tensor: shape plus its deterministic initialization.

    init is ("uniform", a) for uniform(-a, a), ("zeros",), ("ones",) or
    ("const", v).
    """
    name: str
    shape: Tuple[int, ...]
    init: tuple

    @property
    def size(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


def _uniform(fan_in: int, fan_out: int) -> tuple:
    return ("uniform", (6.0 / (fan_in + fan_out)) ** 0.5)


def _bank_shape(cfg: ModelConfig, c_out: int, c_in_g: int,
                k_t: int, k_f: int) -> Tuple[int, ...]:
    base = (c_out, c_in_g, k_t, k_f)
    return (cfg.n_kernels,) + base if cfg.adaptive else base


def _block_tensors(cfg: ModelConfig, b: BlockPlan) -> list:
    k_t, k_f = b.kernel
    h = cfg.attention_hidden
    out = [
        TensorSpec(f"{b.name}.ln.gamma", (b.c_in, b.f_in), ("ones",)),
        TensorSpec(f"{b.name}.ln.beta", (b.c_in, b.f_in), ("zeros",)),
    ]
    if cfg.adaptive:
        if cfg.attention_mode in ("single_frame", "global_utterance"):
            out += [
                TensorSpec(f"{b.name}.attn.fc1.weight", (h, b.c_in),
                           _uniform(b.c_in, h)),
                TensorSpec(f"{b.name}.attn.fc1.bias", (h,), ("zeros",)),
            ]
        elif cfg.attention_mode == "multi_frame":
            ck = cfg.attention_conv_kernel
            out += [
                TensorSpec(f"{b.name}.attn.conv.weight", (h, b.c_in, ck),
                           _uniform(b.c_in * ck, h * ck)),
                TensorSpec(f"{b.name}.attn.conv.bias", (h,), ("zeros",)),
            ]
        else:  # temporal
            out += [
                TensorSpec(f"{b.name}.attn.gru.w_ih", (3 * h, b.c_in),
                           _uniform(b.c_in, 3 * h)),
                TensorSpec(f"{b.name}.attn.gru.w_hh", (3 * h, h),
                           _uniform(h, 3 * h)),
                TensorSpec(f"{b.name}.attn.gru.b_ih", (3 * h,), ("zeros",)),
                TensorSpec(f"{b.name}.attn.gru.b_hh", (3 * h,), ("zeros",)),
            ]
        n_out = head_width(cfg, b)
        out += [
            TensorSpec(f"{b.name}.attn.head.weight", (n_out, h),
                       _uniform(h, n_out)),
            TensorSpec(f"{b.name}.attn.head.bias", (n_out,), ("zeros",)),
        ]
    out += [
        TensorSpec(f"{b.name}.dw.weight",
                   _bank_shape(cfg, b.c_in, 1, k_t, k_f),
                   _uniform(k_t * k_f, k_t * k_f)),
        TensorSpec(f"{b.name}.dw.bias", (b.c_in,), ("zeros",)),
        TensorSpec(f"{b.name}.bn1.gamma", (b.c_in,), ("ones",)),
        TensorSpec(f"{b.name}.bn1.beta", (b.c_in,), ("zeros",)),
        TensorSpec(f"{b.name}.bn1.mean", (b.c_in,), ("zeros",)),
        TensorSpec(f"{b.name}.bn1.var", (b.c_in,), ("ones",)),
        TensorSpec(f"{b.name}.prelu1.alpha", (b.c_in,), ("const", 0.25)),
        TensorSpec(f"{b.name}.pw1.weight",
                   _bank_shape(cfg, b.hidden, b.c_in, 1, 1),
                   _uniform(b.c_in, b.hidden)),
        TensorSpec(f"{b.name}.pw1.bias", (b.hidden,), ("zeros",)),
        TensorSpec(f"{b.name}.pw2.weight",
                   _bank_shape(cfg, b.c_out, b.hidden, 1, 1),
                   _uniform(b.hidden, b.c_out)),
        TensorSpec(f"{b.name}.pw2.bias", (b.c_out,), ("zeros",)),
        TensorSpec(f"{b.name}.bn2.gamma", (b.c_out,), ("ones",)),
        TensorSpec(f"{b.name}.bn2.beta", (b.c_out,), ("zeros",)),
        TensorSpec(f"{b.name}.bn2.mean", (b.c_out,), ("zeros",)),
        TensorSpec(f"{b.name}.bn2.var", (b.c_out,), ("ones",)),
        TensorSpec(f"{b.name}.prelu2.alpha", (b.c_out,), ("const", 0.25)),
    ]
    return out


def _gru_tensors(prefix: str, d_in: int, hidden: int) -> list:
    return [
        TensorSpec(f"{prefix}.w_ih", (3 * hidden, d_in),
                   _uniform(d_in, 3 * hidden)),
        TensorSpec(f"{prefix}.w_hh", (3 * hidden, hidden),
                   _uniform(hidden, 3 * hidden)),
        TensorSpec(f"{prefix}.b_ih", (3 * hidden,), ("zeros",)),
        TensorSpec(f"{prefix}.b_hh", (3 * hidden,), ("zeros",)),
    ]


def _dprnn_tensors(p: DprnnPlan) -> list:
    c, f = p.channels, p.f
    out = []
    for g in range(p.groups):
        out += _gru_tensors(f"{p.name}.intra.g{g}.fwd", p.group_channels,
                            p.intra_group_hidden)
        out += _gru_tensors(f"{p.name}.intra.g{g}.bwd", p.group_channels,
                            p.intra_group_hidden)
    out += [
        TensorSpec(f"{p.name}.intra.fc.weight", (c, 2 * p.intra_hidden),
                   _uniform(2 * p.intra_hidden, c)),
        TensorSpec(f"{p.name}.intra.fc.bias", (c,), ("zeros",)),
        TensorSpec(f"{p.name}.intra.ln.gamma", (c, f), ("ones",)),
        TensorSpec(f"{p.name}.intra.ln.beta", (c, f), ("zeros",)),
    ]
    for g in range(p.groups):
        out += _gru_tensors(f"{p.name}.inter.g{g}", p.group_channels,
                            p.inter_group_hidden)
    out += [
        TensorSpec(f"{p.name}.inter.fc.weight", (c, p.inter_hidden),
                   _uniform(p.inter_hidden, c)),
        TensorSpec(f"{p.name}.inter.fc.bias", (c,), ("zeros",)),
        TensorSpec(f"{p.name}.inter.ln.gamma", (c, f), ("ones",)),
        TensorSpec(f"{p.name}.inter.ln.beta", (c, f), ("zeros",)),
    ]
    return out


def tensor_manifest(cfg: ModelConfig,
                    plan: Optional[ModelPlan] = None) -> Tuple[TensorSpec, ...]:
    """Every tensor the model owns, in canonical order."""
    plan = plan or layer_plan(cfg)
    out = []
    for b in plan.encoder:
        out += _block_tensors(cfg, b)
    for p in plan.dprnn:
        out += _dprnn_tensors(p)
    for b in plan.decoder:
        out += _block_tensors(cfg, b)
    out.append(TensorSpec("mask.alpha", (N_BINS,), ("const", 1.0)))
    names = [t.name for t in out]
    if len(set(names)) != len(names):
        raise ConfigurationError("duplicate tensor names in manifest")
    return tuple(out)


def adaptive_layer_names(cfg: ModelConfig,
                         plan: Optional[ModelPlan] = None) -> Tuple[str, ...]:
    """Traceable adaptive sub-layers, e.g. 'encoder.0.dw'."""
    if not cfg.adaptive:
        return ()
    plan = plan or layer_plan(cfg)
    names = []
    for b in list(plan.encoder) + list(plan.decoder):
        for sub in ("dw", "pw1", "pw2"):
            names.append(f"{b.name}.{sub}")
    return tuple(names)
