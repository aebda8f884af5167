"""Frame-adaptive convolution: kernel attention over a bank of candidates.

An adaptive layer stores K candidate kernels W_k and a single static bias.
Per frame t an attention vector a(t) (softmax over K) mixes the candidates,
W(t) = sum_k a_k(t) * W_k, optionally modulated by shared per-frame channel
and spatial maps, and the mixed kernel convolves the causal window ending
at t.  Three execution strategies compute the same result:

  per_frame      - assemble W(t) and convolve frame by frame (streaming order)
  output_agg     - K static convolutions, then a per-frame weighted sum of
                   their outputs (valid because convolution is linear in the
                   kernel)
  grouped_unfold - unfold the K_t-frame windows and batch one matrix product
                   per frame against the stacked per-frame kernels

The attention front end pools each frame's energy per channel, runs a small
causal channel model (FC stack, causal 1-D conv, or GRU), and a single affine
head emits kernel logits for every sub-layer sharing the front end plus
optional channel/spatial map logits.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import ops
from .errors import ConfigurationError

ATTENTION_MODES = ("single_frame", "multi_frame", "temporal", "global_utterance")
NORMALIZATIONS = ("softmax", "prelu_direct")
STRATEGIES = ("per_frame", "output_agg", "grouped_unfold")


# ---------------------------------------------------------------------------
# kernel bank
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelBank:
    """K candidate kernels plus one static bias for one adaptive layer.

    weights: (K, C_out, C_in/groups, K_t, K_f).  transposed=True marks a
    depthwise transposed frequency convolution (requires K_t=1, groups=C).
    """
    weights: np.ndarray
    bias: np.ndarray
    stride_f: int = 1
    pad_f: int = 0
    groups: int = 1
    transposed: bool = False

    def __post_init__(self):
        if self.weights.ndim != 5:
            raise ConfigurationError(
                f"bank weights must be (K, C_out, C_in/groups, K_t, K_f), "
                f"got shape {self.weights.shape}"
            )
        if self.k < 1:
            raise ConfigurationError("bank needs at least one candidate kernel")
        if self.bias.shape != (self.c_out,):
            raise ConfigurationError(
                f"bias shape {self.bias.shape} does not match C_out={self.c_out}"
            )
        if self.transposed:
            if self.k_t != 1 or self.weights.shape[2] != 1 or self.groups != self.c_out:
                raise ConfigurationError(
                    "transposed banks must be depthwise (groups == C) with K_t=1, "
                    f"got kernel shape {self.weights.shape[1:]} and groups={self.groups}"
                )

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def c_out(self) -> int:
        return self.weights.shape[1]

    @property
    def k_t(self) -> int:
        return self.weights.shape[3]

    @property
    def k_f(self) -> int:
        return self.weights.shape[4]

    @property
    def d(self) -> int:
        """Flattened kernel size C_out * (C_in/groups) * K_t * K_f."""
        return int(np.prod(self.weights.shape[1:]))

    @property
    def pointwise(self) -> bool:
        return self.k_t == 1 and self.k_f == 1 and not self.transposed


# ---------------------------------------------------------------------------
# attention front end
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttentionParams:
    """Channel-model weights plus the shared multi-head affine layer.

    The head emits n_layers*K kernel logits followed by optional channel-in
    (map_c_in wide), channel-out (map_c_out) and spatial (map_spatial) logits.
    """
    mode: str
    normalization: str
    n_layers: int
    k: int
    map_c_in: int = 0
    map_c_out: int = 0
    map_spatial: int = 0
    fc1_w: Optional[np.ndarray] = None   # single_frame / global_utterance
    fc1_b: Optional[np.ndarray] = None
    conv_w: Optional[np.ndarray] = None  # multi_frame: (hidden, C, kernel)
    conv_b: Optional[np.ndarray] = None
    gru: Optional[ops.GruParams] = None  # temporal
    head_w: Optional[np.ndarray] = None  # (n_out, hidden)
    head_b: Optional[np.ndarray] = None
    prelu_slope: float = 0.25

    def __post_init__(self):
        if self.mode not in ATTENTION_MODES:
            raise ConfigurationError(f"unknown attention mode {self.mode!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigurationError(
                f"unknown attention normalization {self.normalization!r}"
            )
        if self.head_w is not None and self.head_w.shape[0] != self.n_out:
            raise ConfigurationError(
                f"head emits {self.head_w.shape[0]} logits, expected {self.n_out}"
            )

    @property
    def n_out(self) -> int:
        return self.n_layers * self.k + self.map_c_in + self.map_c_out + self.map_spatial

    @property
    def hidden(self) -> int:
        return self.head_w.shape[1]


@dataclass(frozen=True)
class AttentionOutputs:
    """Per-frame attention: kernel weights per sub-layer plus optional maps."""
    kernel: np.ndarray                       # (N, T, K)
    channel_in: Optional[np.ndarray] = None  # (T, C_in)
    channel_out: Optional[np.ndarray] = None # (T, C_out)
    spatial: Optional[np.ndarray] = None     # (T, K_t*K_f)


@dataclass
class AttentionState:
    """Streaming memory of one attention front end."""
    gru_h: Optional[np.ndarray] = None   # (hidden,) for temporal mode
    ring: Optional[np.ndarray] = None    # (C, kernel-1) left context, multi_frame


def power_pool(y) -> np.ndarray:
    """Per-frame energy descriptor: P(c,t) = mean_f y(c,t,f)^2."""
    y = np.asarray(y, dtype=np.float32)
    if y.ndim != 3 or y.shape[2] < 1:
        raise ConfigurationError(f"power_pool expects (C, T, F), got {y.shape}")
    return np.mean(np.square(y, dtype=np.float64), axis=2).astype(np.float32)


def global_power_pool(y) -> np.ndarray:
    """Whole-utterance energy descriptor: mean over (t, f) per channel."""
    y = np.asarray(y, dtype=np.float32)
    return np.mean(np.square(y, dtype=np.float64), axis=(1, 2)).astype(np.float32)


def channel_model(p_feat, params: AttentionParams, state: AttentionState | None = None
                  ) -> np.ndarray:
    """Causal hidden features (T, hidden) from the pooled descriptor (C, T).

    single_frame sees only frame t; multi_frame sees kernel-1 frames of left
    context; temporal carries a GRU state across the stream (primed from
    `state` when given, which is then updated in place).
    """
    p_feat = np.asarray(p_feat, dtype=np.float32)
    if p_feat.ndim != 2:
        raise ConfigurationError(f"channel model expects (C, T), got {p_feat.shape}")
    pt = p_feat.T  # (T, C)
    mode = params.mode
    if mode in ("single_frame", "global_utterance"):
        if params.fc1_w is None:
            raise ConfigurationError(f"mode {mode} needs fc weights")
        return ops.relu(ops.linear(pt, params.fc1_w, params.fc1_b))
    if mode == "multi_frame":
        if params.conv_w is None:
            raise ConfigurationError("multi_frame mode needs conv1d weights")
        hidden, c, kern = params.conv_w.shape
        left = state.ring if state is not None else None
        if left is None:
            left = np.zeros((c, kern - 1), np.float32)
        padded = np.concatenate([left, p_feat], axis=1)
        win = np.lib.stride_tricks.sliding_window_view(padded, kern, axis=1)
        cols = win.transpose(1, 0, 2).reshape(p_feat.shape[1], c * kern)
        out = ops.relu(cols @ params.conv_w.reshape(hidden, c * kern).T + params.conv_b)
        if state is not None:
            state.ring = padded[:, padded.shape[1] - (kern - 1):].copy()
        return out.astype(np.float32)
    if mode == "temporal":
        if params.gru is None:
            raise ConfigurationError("temporal mode needs GRU weights")
        h0 = state.gru_h if state is not None else None
        out = ops.gru_seq(pt, params.gru, h0)
        if state is not None:
            state.gru_h = out[-1].copy() if len(out) else state.gru_h
        return out
    raise ConfigurationError(f"unknown attention mode {mode!r}")


def attention_heads(h, params: AttentionParams) -> AttentionOutputs:
    """Affine head over hidden features (T, hidden) -> per-frame attention."""
    h = np.asarray(h, dtype=np.float32)
    logits = ops.linear(h, params.head_w, params.head_b)  # (T, n_out)
    n, k = params.n_layers, params.k
    kern = logits[:, :n * k].reshape(-1, n, k).transpose(1, 0, 2)  # (N, T, K)
    if params.normalization == "softmax":
        kern = ops.softmax(kern, axis=-1)
    else:
        kern = ops.prelu(kern, np.float32(params.prelu_slope))
    pos = n * k
    c_in = c_out = spatial = None
    if params.map_c_in:
        c_in = ops.sigmoid(logits[:, pos:pos + params.map_c_in])
        pos += params.map_c_in
    if params.map_c_out:
        c_out = ops.sigmoid(logits[:, pos:pos + params.map_c_out])
        pos += params.map_c_out
    if params.map_spatial:
        spatial = ops.sigmoid(logits[:, pos:pos + params.map_spatial])
    return AttentionOutputs(kernel=np.ascontiguousarray(kern),
                            channel_in=c_in, channel_out=c_out, spatial=spatial)


def compute_attention(y, params: AttentionParams,
                      state: AttentionState | None = None) -> AttentionOutputs:
    """Full front end: power pooling -> channel model -> heads.

    global_utterance pools over the whole spectrogram and broadcasts one
    attention vector to every frame (offline only).
    """
    if params.mode == "global_utterance":
        p_glob = global_power_pool(y)[:, None]  # (C, 1)
        out = attention_heads(channel_model(p_glob, params), params)
        t_len = np.asarray(y).shape[1]
        return AttentionOutputs(
            kernel=np.ascontiguousarray(np.repeat(out.kernel, t_len, axis=1)),
            channel_in=None if out.channel_in is None else np.repeat(out.channel_in, t_len, 0),
            channel_out=None if out.channel_out is None else np.repeat(out.channel_out, t_len, 0),
            spatial=None if out.spatial is None else np.repeat(out.spatial, t_len, 0),
        )
    return attention_heads(channel_model(power_pool(y), params, state), params)


# ---------------------------------------------------------------------------
# kernel aggregation and the three strategies
# ---------------------------------------------------------------------------

def aggregate_kernel(bank: KernelBank, a, spatial=None, channel_in=None,
                     channel_out=None) -> np.ndarray:
    """Mix candidates with weights a (K,), then apply broadcast maps.

    channel_in spans the kernel's input axis (C_in/groups), channel_out its
    output axis, spatial its K_t*K_f taps.
    """
    a = np.asarray(a, dtype=np.float32)
    if a.shape != (bank.k,):
        raise ConfigurationError(f"attention length {a.shape} != K={bank.k}")
    w = np.tensordot(a, bank.weights, axes=(0, 0)).astype(np.float32)
    if channel_out is not None:
        w = w * np.asarray(channel_out, np.float32)[:, None, None, None]
    if channel_in is not None:
        w = w * np.asarray(channel_in, np.float32)[None, :, None, None]
    if spatial is not None:
        w = w * np.asarray(spatial, np.float32).reshape(bank.k_t, bank.k_f)
    return w


def _check_attention(bank: KernelBank, attn) -> np.ndarray:
    attn = np.asarray(attn, dtype=np.float32)
    if attn.ndim != 2 or attn.shape[1] != bank.k:
        raise ConfigurationError(
            f"kernel attention must be (T, K={bank.k}), got {attn.shape}"
        )
    return attn


def _map_or_none(m, t_len, width, name):
    if m is None:
        return None
    m = np.asarray(m, dtype=np.float32)
    if m.shape != (t_len, width):
        raise ConfigurationError(f"{name} map must be ({t_len}, {width}), got {m.shape}")
    return m


def _conv_window(bank: KernelBank, x):
    """Padded sliding windows (C_in, T, F_out, K_t, K_f) for a forward conv."""
    xp = np.pad(x, ((0, 0), (bank.k_t - 1, 0), (bank.pad_f, bank.pad_f)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (bank.k_t, bank.k_f), axis=(1, 2))
    return win[:, :, ::bank.stride_f]


def _per_frame_kernels(bank: KernelBank, attn, channel_in, channel_out, spatial):
    """Stacked aggregated kernels (T, C_out, C_in/g, K_t, K_f) with maps applied."""
    kt = np.tensordot(attn, bank.weights.reshape(bank.k, -1), axes=(1, 0))
    kt = kt.reshape((attn.shape[0],) + bank.weights.shape[1:]).astype(np.float32)
    if channel_out is not None:
        kt *= channel_out[:, :, None, None, None]
    if channel_in is not None:
        kt *= channel_in[:, None, :, None, None]
    if spatial is not None:
        kt *= spatial.reshape(attn.shape[0], 1, 1, bank.k_t, bank.k_f)
    return kt


def _single_position_conv(win_f, w_t, bank: KernelBank) -> np.ndarray:
    """Convolve one frame's windows (C_in, F_out, K_t, K_f) with kernel w_t."""
    if bank.transposed:
        # win_f is (C, 1, F) here: the raw frame
        return ops.conv2d_transpose_freq(win_f, w_t, stride_f=bank.stride_f,
                                         pad_f=bank.pad_f)[:, 0, :]
    f_out = win_f.shape[1]
    c_in_g = bank.weights.shape[2]
    if c_in_g == 1 and bank.groups == bank.c_out:
        # depthwise: batched matmul with the same reduction order as the
        # static conv's fast path, keeping K=1 bit-identical to conv2d
        cols = np.ascontiguousarray(
            win_f.reshape(bank.c_out, f_out, bank.k_t * bank.k_f))
        w = w_t.reshape(bank.c_out, bank.k_t * bank.k_f, 1)
        return np.matmul(cols, w)[:, :, 0]
    co_g = bank.c_out // bank.groups
    res = np.empty((bank.c_out, f_out), dtype=np.float32)
    for g in range(bank.groups):
        cols = win_f[g * c_in_g:(g + 1) * c_in_g]
        cols = cols.transpose(1, 0, 2, 3).reshape(f_out, -1)
        wg = w_t[g * co_g:(g + 1) * co_g].reshape(co_g, -1)
        res[g * co_g:(g + 1) * co_g] = (cols @ wg.T).T
    return res


def _forward_per_frame(x, bank: KernelBank, attn, channel_in, channel_out, spatial):
    t_len = x.shape[1]
    w2d = bank.weights.reshape(bank.k, -1)
    w_buf = np.empty(w2d.shape[1], dtype=np.float32)
    w_view = w_buf.reshape(bank.weights.shape[1:])
    any_map = channel_in is not None or channel_out is not None or spatial is not None
    if bank.transposed:
        f_out = (x.shape[2] - 1) * bank.stride_f - 2 * bank.pad_f + bank.k_f
        win = None
    else:
        win = _conv_window(bank, x)  # (C_in, T, F_out, K_t, K_f)
        f_out = win.shape[2]
    out = np.empty((bank.c_out, t_len, f_out), dtype=np.float32)
    for t in range(t_len):
        np.dot(attn[t], w2d, out=w_buf)
        w_t = w_view
        if any_map:
            w_t = _apply_maps_frame(w_t, bank, channel_in, channel_out, spatial, t)
        frame = x[:, t:t + 1, :] if bank.transposed else win[:, t]
        out[:, t, :] = _single_position_conv(frame, w_t, bank)
    out += bank.bias[:, None, None]
    return out


def _apply_maps_frame(w_t, bank, channel_in, channel_out, spatial, t):
    w_t = w_t.copy()
    if channel_out is not None:
        w_t *= channel_out[t][:, None, None, None]
    if channel_in is not None:
        w_t *= channel_in[t][None, :, None, None]
    if spatial is not None:
        w_t *= spatial[t].reshape(bank.k_t, bank.k_f)
    return w_t


def _forward_output_agg(x, bank: KernelBank, attn, channel_in, channel_out, spatial):
    # the K-static-convolutions identity holds for kernel mixing; time-varying
    # maps fold in only where they commute with the convolution
    if spatial is not None and bank.k_t * bank.k_f != 1:
        raise ConfigurationError(
            "output_agg cannot apply a spatial map to a kernel with spatial "
            "extent; use per_frame or grouped_unfold"
        )
    if channel_in is not None and bank.k_t != 1:
        raise ConfigurationError(
            "output_agg can fold a channel-in map only for K_t=1 kernels; "
            "use per_frame or grouped_unfold"
        )
    if channel_in is not None:
        scale = np.tile(channel_in, (1, bank.groups)).T[:, :, None]  # (C_in, T, 1)
        x = x * scale
    t_len = x.shape[1]
    outs = []
    for k in range(bank.k):
        if bank.transposed:
            z = ops.conv2d_transpose_freq(x, bank.weights[k],
                                          stride_f=bank.stride_f, pad_f=bank.pad_f)
        else:
            z = ops.conv2d(x, bank.weights[k], stride_f=bank.stride_f,
                           pad_f=bank.pad_f, groups=bank.groups)
        outs.append(z)
    stacked = np.stack(outs)  # (K, C_out, T, F_out)
    out = np.einsum("tk,kotf->otf", attn, stacked, optimize=True).astype(np.float32)
    if channel_out is not None:
        out *= channel_out.T[:, :, None]
    if spatial is not None:
        out *= spatial.reshape(1, t_len, 1)
    out += bank.bias[:, None, None]
    return out


def _forward_grouped_unfold(x, bank: KernelBank, attn, channel_in, channel_out, spatial):
    t_len = x.shape[1]
    kt = _per_frame_kernels(bank, attn, channel_in, channel_out, spatial)
    if bank.transposed:
        c = bank.c_out
        taps = kt[:, :, 0, 0, :].transpose(1, 0, 2)  # (C, T, K_f)
        full_len = (x.shape[2] - 1) * bank.stride_f + bank.k_f
        full = np.zeros((c, t_len, full_len), dtype=np.float32)
        for q in range(bank.k_f):
            full[:, :, q:q + (x.shape[2] - 1) * bank.stride_f + 1:bank.stride_f] += \
                taps[:, :, q][:, :, None] * x
        out = full[:, :, bank.pad_f:full_len - bank.pad_f]
        return np.ascontiguousarray(out) + bank.bias[:, None, None]

    win = _conv_window(bank, x)  # (C_in, T, F_out, K_t, K_f)
    f_out = win.shape[2]
    c_in_g = bank.weights.shape[2]
    co_g = bank.c_out // bank.groups
    out = np.empty((bank.c_out, t_len, f_out), dtype=np.float32)
    for g in range(bank.groups):
        cols = win[g * c_in_g:(g + 1) * c_in_g]
        # (T, C_in/g * K_t * K_f, F_out)
        cols = np.ascontiguousarray(cols.transpose(1, 0, 3, 4, 2)).reshape(t_len, -1, f_out)
        wg = kt[:, g * co_g:(g + 1) * co_g].reshape(t_len, co_g, -1)
        out[g * co_g:(g + 1) * co_g] = np.matmul(wg, cols).transpose(1, 0, 2)
    out += bank.bias[:, None, None]
    return out


def adaptive_conv_forward(x, bank: KernelBank, attn, *, channel_in=None,
                          channel_out=None, spatial=None,
                          strategy: str = "per_frame") -> np.ndarray:
    """Adaptive convolution of (C_in, T, F) with per-frame kernel attention.

    attn: (T, K) kernel weights; optional maps channel_in (T, C_in/groups),
    channel_out (T, C_out), spatial (T, K_t*K_f).  All strategies return the
    same values up to float32 rounding.
    """
    x = np.ascontiguousarray(x, dtype=np.float32)
    attn = _check_attention(bank, attn)
    t_len = x.shape[1]
    if attn.shape[0] != t_len:
        raise ConfigurationError(
            f"attention covers {attn.shape[0]} frames, input has {t_len}"
        )
    channel_in = _map_or_none(channel_in, t_len, bank.weights.shape[2], "channel-in")
    channel_out = _map_or_none(channel_out, t_len, bank.c_out, "channel-out")
    spatial = _map_or_none(spatial, t_len, bank.k_t * bank.k_f, "spatial")
    if strategy == "per_frame":
        return _forward_per_frame(x, bank, attn, channel_in, channel_out, spatial)
    if strategy == "output_agg":
        return _forward_output_agg(x, bank, attn, channel_in, channel_out, spatial)
    if strategy == "grouped_unfold":
        return _forward_grouped_unfold(x, bank, attn, channel_in, channel_out, spatial)
    raise ConfigurationError(f"unknown strategy {strategy!r}")


def adaptive_conv_step(window, bank: KernelBank, a, *, channel_in=None,
                       channel_out=None, spatial=None) -> np.ndarray:
    """One streaming step: window (C_in, K_t, F) holds the causal context
    (oldest frame first, current frame last); returns (C_out, F_out).

    Shares the single-position conv with the per_frame strategy, so a stream
    of steps reproduces adaptive_conv_forward(..., strategy="per_frame")
    exactly.
    """
    window = np.ascontiguousarray(window, dtype=np.float32)
    if window.shape[1] != bank.k_t:
        raise ConfigurationError(
            f"window holds {window.shape[1]} frames, kernel needs {bank.k_t}"
        )
    a = np.asarray(a, dtype=np.float32)
    if a.shape != (bank.k,):
        raise ConfigurationError(f"attention length {a.shape} != K={bank.k}")
    # mirror _forward_per_frame's aggregation op for op so a stream of steps
    # is bit-identical to the offline per_frame strategy
    w_t = np.dot(a, bank.weights.reshape(bank.k, -1)).reshape(bank.weights.shape[1:])
    if channel_out is not None:
        w_t = w_t * np.asarray(channel_out, np.float32)[:, None, None, None]
    if channel_in is not None:
        w_t = w_t * np.asarray(channel_in, np.float32)[None, :, None, None]
    if spatial is not None:
        w_t = w_t * np.asarray(spatial, np.float32).reshape(bank.k_t, bank.k_f)
    if bank.transposed:
        frame = window  # (C, 1, F)
    else:
        wp = np.pad(window, ((0, 0), (0, 0), (bank.pad_f, bank.pad_f)))
        swv = np.lib.stride_tricks.sliding_window_view(wp, bank.k_f, axis=2)
        # (C_in, K_t, F_pos, K_f) -> strided -> (C_in, F_out, K_t, K_f)
        frame = swv[:, :, ::bank.stride_f].transpose(0, 2, 1, 3)
    return _single_position_conv(frame, w_t, bank) + bank.bias[:, None]


def global_dynconv_forward(x, bank: KernelBank, a, *, channel_in=None,
                           channel_out=None, spatial=None) -> np.ndarray:
    """Whole-utterance dynamic convolution: one aggregated kernel for all frames."""
    w = aggregate_kernel(bank, a, spatial=spatial, channel_in=channel_in,
                         channel_out=channel_out)
    if bank.transposed:
        return ops.conv2d_transpose_freq(x, w, bank.bias,
                                         stride_f=bank.stride_f, pad_f=bank.pad_f)
    return ops.conv2d(x, w, bank.bias, stride_f=bank.stride_f,
                      pad_f=bank.pad_f, groups=bank.groups)


# ---------------------------------------------------------------------------
# pointwise reparameterization
# ---------------------------------------------------------------------------

def _require_pointwise(bank: KernelBank, which: str):
    if not bank.pointwise or bank.groups != 1 or bank.stride_f != 1 or bank.pad_f != 0:
        raise ConfigurationError(
            f"{which} bank must be a plain pointwise convolution "
            f"(K_t=K_f=1, groups=1, stride 1, no padding)"
        )


def reparam_pw_pair(bank1: KernelBank, bank2: KernelBank) -> KernelBank:
    """Collapse two adaptive pointwise layers into one with K1*K2 candidates.

    Candidate (j, i) is the channel-matrix product W2_j @ W1_i; combine
    attentions with reparam_attention and add reparam_dynamic_bias for the
    first layer's bias pushed through the second layer.  The returned bank
    carries only the second layer's static bias.
    """
    _require_pointwise(bank1, "first")
    _require_pointwise(bank2, "second")
    if bank2.weights.shape[2] != bank1.c_out:
        raise ConfigurationError(
            f"cannot compose: first layer outputs {bank1.c_out} channels, "
            f"second expects {bank2.weights.shape[2]}"
        )
    w1 = bank1.weights[:, :, :, 0, 0]  # (K1, C_mid, C_in)
    w2 = bank2.weights[:, :, :, 0, 0]  # (K2, C_out, C_mid)
    comb = np.einsum("jom,imc->jioc", w2, w1, optimize=True)
    k2, k1, c_out, c_in = comb.shape
    weights = comb.reshape(k2 * k1, c_out, c_in, 1, 1).astype(np.float32)
    return KernelBank(weights=weights, bias=bank2.bias.copy())


def reparam_attention(a1, a2) -> np.ndarray:
    """Combined attention a_comb[j*K1 + i](t) = a2_j(t) * a1_i(t)."""
    a1 = np.asarray(a1, dtype=np.float32)
    a2 = np.asarray(a2, dtype=np.float32)
    if a1.shape[0] != a2.shape[0]:
        raise ConfigurationError("attention frame counts differ")
    return np.einsum("tj,ti->tji", a2, a1).reshape(a1.shape[0], -1)


def reparam_dynamic_bias(bank2: KernelBank, a2, bias1) -> np.ndarray:
    """Per-frame bias W2(t) @ b1 contributed by the first layer's bias."""
    w2 = bank2.weights[:, :, :, 0, 0]  # (K2, C_out, C_mid)
    return np.einsum("tj,jom,m->to", np.asarray(a2, np.float32), w2,
                     np.asarray(bias1, np.float32)).astype(np.float32)


def reparam_forward(x, bank1: KernelBank, bank2: KernelBank, a1, a2,
                    strategy: str = "per_frame") -> np.ndarray:
    """Single-layer forward that is equivalent to layer2(layer1(x))."""
    comb = reparam_pw_pair(bank1, bank2)
    out = adaptive_conv_forward(x, comb, reparam_attention(a1, a2),
                                strategy=strategy)
    dyn = reparam_dynamic_bias(bank2, a2, bank1.bias)  # (T, C_out)
    return out + dyn.T[:, :, None]
