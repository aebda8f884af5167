"""Composite layers: encoder/decoder blocks and the grouped dual-path module.

A block runs LN -> (joint attention) -> depthwise conv -> BN+PReLU ->
pointwise -> GELU (or star) -> pointwise -> BN+PReLU -> (output channel map)
-> optional identity skip.  The adaptive variant draws all three convolution
kernels per frame from candidate banks via one shared attention front end; the
basic variant uses static kernels and no attention.

The dual-path module runs a bidirectional grouped GRU along frequency within
each frame and a causal grouped GRU along time per frequency bin, each
followed by a shared affine projection, LN, and a residual add.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import adaptive, ops
from .adaptive import AttentionOutputs, AttentionParams, AttentionState, KernelBank
from .config import BlockPlan, DprnnPlan
from .errors import ConfigurationError

__all__ = [
    "BnParams", "BlockParams", "BlockState", "DprnnParams", "DprnnState",
    "adaptive_block_forward", "adaptive_block_step", "basic_block_forward",
    "grouped_dprnn_forward", "grouped_dprnn_step",
]


@dataclass(frozen=True)
class BnParams:
    mean: np.ndarray
    var: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class BlockParams:
    plan: BlockPlan
    ln_gamma: np.ndarray
    ln_beta: np.ndarray
    dw: KernelBank
    pw1: KernelBank
    pw2: KernelBank
    bn1: BnParams
    bn2: BnParams
    prelu1: np.ndarray
    prelu2: np.ndarray
    attention: Optional[AttentionParams] = None  # None = basic block
    star: bool = False


@dataclass
class BlockState:
    """Streaming memory of one block: attention state + depthwise frame ring."""
    attn: AttentionState = field(default_factory=AttentionState)
    ring: Optional[np.ndarray] = None  # (C_in, K_t - 1, F_in)


@dataclass(frozen=True)
class DprnnParams:
    plan: DprnnPlan
    intra_fwd: tuple  # GruParams per group
    intra_bwd: tuple
    intra_fc_w: np.ndarray
    intra_fc_b: np.ndarray
    intra_ln_gamma: np.ndarray
    intra_ln_beta: np.ndarray
    inter: tuple      # GruParams per group
    inter_fc_w: np.ndarray
    inter_fc_b: np.ndarray
    inter_ln_gamma: np.ndarray
    inter_ln_beta: np.ndarray


@dataclass
class DprnnState:
    """Per-bin causal hidden state of the inter-frame path, one per group."""
    inter_h: Optional[List[np.ndarray]] = None  # each (F, hidden_per_group)


# ---------------------------------------------------------------------------
# encoder/decoder blocks
# ---------------------------------------------------------------------------

def _conv_tail(z, p: BlockParams, attn: Optional[AttentionOutputs], x,
               strategy: str):
    """PW1 -> activation -> PW2 -> BN2+PReLU2 -> channel-out map -> skip."""
    if attn is None:
        z = ops.conv2d(z, p.pw1.weights[0], p.pw1.bias)
    else:
        z = adaptive.adaptive_conv_forward(z, p.pw1, attn.kernel[1],
                                           strategy=strategy)
    z = ops.star(z) if p.star else ops.gelu(z)
    if attn is None:
        z = ops.conv2d(z, p.pw2.weights[0], p.pw2.bias)
    else:
        z = adaptive.adaptive_conv_forward(z, p.pw2, attn.kernel[2],
                                           strategy=strategy)
    z = ops.prelu(ops.batch_norm_infer(z, p.bn2.mean, p.bn2.var,
                                       p.bn2.gamma, p.bn2.beta),
                  p.prelu2[:, None, None])
    if attn is not None and attn.channel_out is not None:
        z = z * attn.channel_out.T[:, :, None]
    if p.plan.inner_skip:
        z = z + x
    return z


def adaptive_block_forward(x, p: BlockParams, state: Optional[BlockState] = None,
                           strategy: str = "grouped_unfold",
                           capture: Optional[Callable] = None) -> np.ndarray:
    """Whole-sequence adaptive block: x (C_in, T, F_in) -> (C_out, T, F_out)."""
    if p.attention is None:
        raise ConfigurationError(
            f"{p.plan.name} has no attention parameters; use basic_block_forward"
        )
    x = np.ascontiguousarray(x, dtype=np.float32)
    y = ops.layer_norm_cf(x, p.ln_gamma, p.ln_beta)
    attn = adaptive.compute_attention(y, p.attention,
                                      state.attn if state is not None else None)
    if capture is not None:
        capture(attn)
    if attn.channel_in is not None:
        y = y * attn.channel_in.T[:, :, None]
    z = adaptive.adaptive_conv_forward(y, p.dw, attn.kernel[0],
                                       spatial=attn.spatial, strategy=strategy)
    z = ops.prelu(ops.batch_norm_infer(z, p.bn1.mean, p.bn1.var,
                                       p.bn1.gamma, p.bn1.beta),
                  p.prelu1[:, None, None])
    return _conv_tail(z, p, attn, x, strategy)


def basic_block_forward(x, p: BlockParams,
                        state: Optional[BlockState] = None) -> np.ndarray:
    """Static-kernel block; identical pipeline without attention."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    y = ops.layer_norm_cf(x, p.ln_gamma, p.ln_beta)
    dw_w = p.dw.weights[0]
    if p.dw.transposed:
        z = ops.conv2d_transpose_freq(y, dw_w, p.dw.bias,
                                      stride_f=p.dw.stride_f, pad_f=p.dw.pad_f)
    else:
        z = ops.conv2d(y, dw_w, p.dw.bias, stride_f=p.dw.stride_f,
                       pad_f=p.dw.pad_f, groups=p.dw.groups)
    z = ops.prelu(ops.batch_norm_infer(z, p.bn1.mean, p.bn1.var,
                                       p.bn1.gamma, p.bn1.beta),
                  p.prelu1[:, None, None])
    return _conv_tail(z, p, None, x, "per_frame")


def block_forward(x, p: BlockParams, state: Optional[BlockState] = None,
                  strategy: str = "grouped_unfold",
                  capture: Optional[Callable] = None) -> np.ndarray:
    if p.attention is None:
        return basic_block_forward(x, p, state)
    return adaptive_block_forward(x, p, state, strategy, capture)


def _dw_window(x_t, p: BlockParams, state: BlockState):
    """Assemble the (C_in, K_t, F_in) causal window and advance the ring."""
    k_t = p.dw.k_t
    if k_t == 1:
        return x_t
    if state.ring is None:
        state.ring = np.zeros((x_t.shape[0], k_t - 1, x_t.shape[2]), np.float32)
    window = np.concatenate([state.ring, x_t], axis=1)
    state.ring = window[:, 1:].copy()
    return window


def adaptive_block_step(x_t, p: BlockParams, state: BlockState) -> np.ndarray:
    """One streaming frame: x_t (C_in, 1, F_in) -> (C_out, 1, F_out).

    A stream of steps matches adaptive_block_forward with the per_frame
    strategy up to float32 reassociation (the offline path batches its
    normalization and attention math across frames); the depthwise ring
    supplies the K_t - 1 frames of left context.
    """
    x_t = np.ascontiguousarray(x_t, dtype=np.float32)
    y = ops.layer_norm_cf(x_t, p.ln_gamma, p.ln_beta)
    if p.attention is not None:
        attn = adaptive.compute_attention(y, p.attention, state.attn)
        if attn.channel_in is not None:
            y = y * attn.channel_in.T[:, :, None]
        window = _dw_window(y, p, state)
        z = adaptive.adaptive_conv_step(
            window, p.dw, attn.kernel[0, 0],
            spatial=None if attn.spatial is None else attn.spatial[0],
        )[:, None, :]
    else:
        attn = None
        window = _dw_window(y, p, state)
        dw_w = p.dw.weights[0]
        if p.dw.transposed:
            z = ops.conv2d_transpose_freq(window, dw_w, stride_f=p.dw.stride_f,
                                          pad_f=p.dw.pad_f)
            z = z + p.dw.bias[:, None, None]
        else:
            z = ops.conv2d(window, dw_w, p.dw.bias, stride_f=p.dw.stride_f,
                           pad_f=p.dw.pad_f, groups=p.dw.groups)[:, -1:, :]
    z = ops.prelu(ops.batch_norm_infer(z, p.bn1.mean, p.bn1.var,
                                       p.bn1.gamma, p.bn1.beta),
                  p.prelu1[:, None, None])
    return _conv_tail(z, p, attn, x_t, "per_frame")


# ---------------------------------------------------------------------------
# grouped dual-path module
# ---------------------------------------------------------------------------

def _group_slices(c: int, groups: int):
    cg = c // groups
    return [slice(g * cg, (g + 1) * cg) for g in range(groups)]


def intra_recurrent_features(x, p: DprnnParams) -> np.ndarray:
    """Pre-affine intra-path features (T, F, 2 * intra_hidden).

    Per group: forward and backward GRU along the frequency axis, batched
    over frames; concatenation order g0.fwd, g0.bwd, g1.fwd, ...
    """
    outs = []
    for g, sl in enumerate(_group_slices(x.shape[0], p.plan.groups)):
        seq = np.ascontiguousarray(x[sl].transpose(1, 2, 0))  # (T, F, cg)
        fwd = ops.gru_seq_batch(seq, p.intra_fwd[g])
        bwd = ops.gru_seq_batch(seq[:, ::-1], p.intra_bwd[g])[:, ::-1]
        outs.extend([fwd, bwd])
    return np.concatenate(outs, axis=2)


def inter_recurrent_features(x, p: DprnnParams,
                             state: Optional[DprnnState] = None) -> np.ndarray:
    """Pre-affine inter-path features (F, T, inter_hidden), causal in time."""
    outs = []
    for g, sl in enumerate(_group_slices(x.shape[0], p.plan.groups)):
        seq = np.ascontiguousarray(x[sl].transpose(2, 1, 0))  # (F, T, cg)
        h0 = state.inter_h[g] if state is not None and state.inter_h else None
        h = ops.gru_seq_batch(seq, p.inter[g], h0)
        if state is not None:
            if state.inter_h is None:
                state.inter_h = [None] * p.plan.groups
            state.inter_h[g] = h[:, -1].copy()
        outs.append(h)
    return np.concatenate(outs, axis=2)


def grouped_dprnn_forward(x, p: DprnnParams,
                          state: Optional[DprnnState] = None) -> np.ndarray:
    """Dual-path module: x (C, T, F) -> (C, T, F), causal along time."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    c = x.shape[0]
    if c != p.plan.channels or c % p.plan.groups != 0:
        raise ConfigurationError(
            f"{p.plan.name} expects {p.plan.channels} channels divisible by "
            f"{p.plan.groups} groups, got {c}"
        )
    cat = intra_recurrent_features(x, p)                      # (T, F, 2Hi)
    y = ops.linear(cat, p.intra_fc_w, p.intra_fc_b).transpose(2, 0, 1)
    x = x + ops.layer_norm_cf(y, p.intra_ln_gamma, p.intra_ln_beta)

    cat = inter_recurrent_features(x, p, state)               # (F, T, Ht)
    y = ops.linear(cat, p.inter_fc_w, p.inter_fc_b).transpose(2, 1, 0)
    return x + ops.layer_norm_cf(y, p.inter_ln_gamma, p.inter_ln_beta)


def grouped_dprnn_step(x_t, p: DprnnParams, state: DprnnState) -> np.ndarray:
    """One streaming frame (C, 1, F); carries the inter-frame hidden state."""
    return grouped_dprnn_forward(x_t, p, state)
