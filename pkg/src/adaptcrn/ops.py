"""Dense-tensor primitives: convolution, recurrence, normalization, activations.

All feature maps are numpy float32 arrays laid out as (channels, time, frequency).
Convolutions are causal in time: the input is left-padded with K_t - 1 zero
frames, so output frame t reads input frames t - K_t + 1 .. t only.  The
frequency axis uses symmetric zero padding and optional striding.

Everything here is a pure function of its inputs; outputs are fresh arrays.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "conv2d",
    "conv2d_transpose_freq",
    "linear",
    "GruParams",
    "gru_seq",
    "gru_seq_batch",
    "gru_step",
    "relu",
    "relu6",
    "prelu",
    "sigmoid",
    "gelu",
    "star",
    "softmax",
    "activation",
    "layer_norm_cf",
    "batch_norm_infer",
]


def _as_f32(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float32)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def conv_out_freq(f: int, k_f: int, stride_f: int, pad_f: int) -> int:
    """Output width of a strided frequency convolution."""
    if f + 2 * pad_f < k_f:
        raise ConfigurationError(
            f"frequency axis too short: F={f} with pad {pad_f} cannot fit kernel {k_f}"
        )
    return (f + 2 * pad_f - k_f) // stride_f + 1


def _conv2d_dense(win: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """im2col matmul for an ungrouped convolution.

    win: (C_in, T, F_out, K_t, K_f) sliding windows, weight: (C_out, C_in, K_t, K_f).
    """
    c_in, t, f_out, k_t, k_f = win.shape
    c_out = weight.shape[0]
    # batch the frame axis so every GEMM is (F_out, K) @ (K, C_out) — the same
    # call shape the single-frame streaming path issues, which keeps offline
    # and streamed outputs bit-identical
    cols = np.ascontiguousarray(
        win.transpose(1, 2, 0, 3, 4).reshape(t, f_out, c_in * k_t * k_f))
    out = np.matmul(cols, weight.reshape(c_out, -1).T)
    return out.transpose(2, 0, 1)


def conv2d(x, weight, bias=None, *, stride_f: int = 1, pad_f: int = 0,
           groups: int = 1) -> np.ndarray:
    """Causal 2-D convolution over (time, frequency).

    Args:
        x: input features (C_in, T, F).
        weight: kernel (C_out, C_in // groups, K_t, K_f); cross-correlation
            orientation, weight[..., K_t - 1, :] is the current-frame tap.
        bias: optional (C_out,) added to every output position.
        stride_f: frequency stride.
        pad_f: symmetric zero padding per frequency side.
        groups: channel groups; C_in and C_out must both be divisible.

    Returns:
        (C_out, T, F_out) with F_out = floor((F + 2*pad_f - K_f)/stride_f) + 1.
    """
    x = _as_f32(x)
    weight = _as_f32(weight)
    if x.ndim != 3 or weight.ndim != 4:
        raise ConfigurationError(
            f"conv2d expects x rank 3 and weight rank 4, got {x.ndim} and {weight.ndim}"
        )
    c_in, t, f = x.shape
    c_out, c_in_g, k_t, k_f = weight.shape
    if groups < 1 or c_in % groups or c_out % groups:
        raise ConfigurationError(
            f"groups={groups} must divide C_in={c_in} and C_out={c_out}"
        )
    if c_in_g != c_in // groups:
        raise ConfigurationError(
            f"kernel expects C_in/groups={c_in_g}, input has C_in={c_in} with groups={groups}"
        )
    f_out = conv_out_freq(f, k_f, stride_f, pad_f)

    xp = np.pad(x, ((0, 0), (k_t - 1, 0), (pad_f, pad_f)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k_t, k_f), axis=(1, 2))
    win = win[:, :, ::stride_f]  # (C_in, T, F_out, K_t, K_f)

    if groups == 1:
        out = _conv2d_dense(win, weight)
    elif c_in_g == 1 and c_out == groups:
        # depthwise fast path: (C, T) batch of (F_out, K) @ (K, 1) matmuls,
        # the same call shape as the dense path and the single-frame path
        cols = np.ascontiguousarray(win.reshape(c_in, t, f_out, k_t * k_f))
        out = np.matmul(cols, weight.reshape(c_out, 1, k_t * k_f, 1))[..., 0]
    else:
        co_g = c_out // groups
        parts = []
        for g in range(groups):
            wg = weight[g * co_g:(g + 1) * co_g]
            parts.append(_conv2d_dense(win[g * c_in_g:(g + 1) * c_in_g], wg))
        out = np.concatenate(parts, axis=0)

    out = np.ascontiguousarray(out, dtype=np.float32)
    if bias is not None:
        out += _as_f32(bias)[:, None, None]
    return out


def conv2d_transpose_freq(x, weight, bias=None, *, stride_f: int,
                          pad_f: int) -> np.ndarray:
    """Depthwise transposed convolution along frequency (time kernel = 1).

    Scatter form: out[c, t, f*stride + q - pad] += weight[c, q] * x[c, t, f].
    This is the linear adjoint of conv2d with the same kernel, stride and pad.

    weight: (C, 1, 1, K_f).  Returns (C, T, F_out) with
    F_out = (F - 1)*stride_f - 2*pad_f + K_f.
    """
    x = _as_f32(x)
    weight = _as_f32(weight)
    if weight.ndim != 4 or weight.shape[1] != 1 or weight.shape[2] != 1:
        raise ConfigurationError(
            f"transposed conv is depthwise with K_t=1; got kernel shape {weight.shape}"
        )
    c, t, f = x.shape
    if weight.shape[0] != c:
        raise ConfigurationError(
            f"kernel has {weight.shape[0]} channels, input has {c}"
        )
    k_f = weight.shape[3]
    full_len = (f - 1) * stride_f + k_f
    f_out = full_len - 2 * pad_f
    if f_out <= 0:
        raise ConfigurationError(
            f"transposed conv output width {f_out} is not positive"
        )
    full = np.zeros((c, t, full_len), dtype=np.float32)
    for q in range(k_f):
        full[:, :, q:q + (f - 1) * stride_f + 1:stride_f] += weight[:, 0, 0, q][:, None, None] * x
    out = full[:, :, pad_f:pad_f + f_out]
    out = np.ascontiguousarray(out)
    if bias is not None:
        out += _as_f32(bias)[:, None, None]
    return out


def linear(x, weight, bias=None) -> np.ndarray:
    """Affine map over the trailing axis, broadcast over leading axes."""
    x = np.asarray(x, dtype=np.float32)
    weight = _as_f32(weight)
    if x.shape[-1] != weight.shape[1]:
        raise ConfigurationError(
            f"linear expects trailing dim {weight.shape[1]}, got {x.shape[-1]}"
        )
    out = x @ weight.T
    if bias is not None:
        out = out + _as_f32(bias)
    return out.astype(np.float32, copy=False)


# ---------------------------------------------------------------------------
# recurrence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GruParams:
    """GRU weights with gate order (update z, reset r, candidate n).

    w_ih: (3H, D_in), w_hh: (3H, H), b_ih and b_hh: (3H,).  The candidate
    gate keeps its recurrent bias inside the reset product:
    n = tanh(W_n x + b_n_in + r * (U_n h + b_n_rec)).
    """
    w_ih: np.ndarray
    w_hh: np.ndarray
    b_ih: np.ndarray
    b_hh: np.ndarray

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[1]

    def __post_init__(self):
        h = self.w_hh.shape[1]
        if self.w_ih.shape[0] != 3 * h or self.w_hh.shape[0] != 3 * h \
                or self.b_ih.shape != (3 * h,) or self.b_hh.shape != (3 * h,):
            raise ConfigurationError(
                f"inconsistent GRU shapes: w_ih {self.w_ih.shape}, "
                f"w_hh {self.w_hh.shape}, b_ih {self.b_ih.shape}, b_hh {self.b_hh.shape}"
            )


def _gru_recur(gi: np.ndarray, p: GruParams, h: np.ndarray) -> np.ndarray:
    """Run the recurrence given precomputed input projections gi (N, T, 3H)."""
    n_batch, t_len, _ = gi.shape
    hsz = p.hidden
    out = np.empty((n_batch, t_len, hsz), dtype=np.float32)
    w_hh_t = p.w_hh.T
    b_hh = p.b_hh
    for t in range(t_len):
        gh = h @ w_hh_t + b_hh
        z = sigmoid(gi[:, t, :hsz] + gh[:, :hsz])
        r = sigmoid(gi[:, t, hsz:2 * hsz] + gh[:, hsz:2 * hsz])
        n = np.tanh(gi[:, t, 2 * hsz:] + r * gh[:, 2 * hsz:])
        h = (1.0 - z) * n + z * h
        out[:, t] = h
    return out


def gru_seq_batch(x, p: GruParams, h0=None) -> np.ndarray:
    """Batched GRU over time: x (N, T, D_in) -> (N, T, H)."""
    x = np.asarray(x, dtype=np.float32)
    if h0 is None:
        h0 = np.zeros((x.shape[0], p.hidden), dtype=np.float32)
    gi = x @ p.w_ih.T + p.b_ih
    return _gru_recur(gi.astype(np.float32, copy=False), p, _as_f32(h0))


def gru_seq(x, p: GruParams, h0=None) -> np.ndarray:
    """GRU over a single sequence: x (T, D_in) -> (T, H); strictly causal."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2:
        raise ConfigurationError(f"gru_seq expects (T, D_in), got shape {x.shape}")
    h0b = None if h0 is None else np.asarray(h0, dtype=np.float32)[None]
    return gru_seq_batch(x[None], p, h0b)[0]


def gru_step(x, h, p: GruParams) -> np.ndarray:
    """Single recurrence step: x (D_in,), h (H,) -> new hidden (H,)."""
    x = np.asarray(x, dtype=np.float32)
    gi = (x @ p.w_ih.T + p.b_ih)[None, None]
    return _gru_recur(gi.astype(np.float32, copy=False), p, _as_f32(h)[None])[0, 0]


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0)


def relu6(x):
    return np.clip(x, 0, 6)


def prelu(x, alpha):
    """Parametric ReLU; alpha broadcasts against x (per-channel: shape (C, 1, 1))."""
    x = np.asarray(x)
    return np.where(x >= 0, x, alpha * x).astype(np.float32, copy=False)


def sigmoid(x):
    # split positive/negative branches to stay finite in float32
    x = np.asarray(x, dtype=np.float32)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_GELU_C = np.float32(np.sqrt(2.0 / np.pi))


def gelu(x):
    """tanh-approximated GELU: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3)))."""
    x = np.asarray(x, dtype=np.float32)
    return (0.5 * x * (1.0 + np.tanh(_GELU_C * (x + np.float32(0.044715) * x * x * x)))
            ).astype(np.float32, copy=False)


def star(x):
    """Star operation: relu6(x) * x."""
    x = np.asarray(x, dtype=np.float32)
    return (relu6(x) * x).astype(np.float32, copy=False)


def softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float32)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


_ACTIVATIONS = {
    "relu": relu,
    "relu6": relu6,
    "sigmoid": sigmoid,
    "gelu": gelu,
    "star": star,
}


def activation(kind: str, x, **kwargs):
    """Dispatch by name; prelu takes alpha=..., softmax takes axis=...."""
    if kind == "prelu":
        return prelu(x, kwargs["alpha"])
    if kind == "softmax":
        return softmax(x, axis=kwargs.get("axis", -1))
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ConfigurationError(f"unknown activation kind {kind!r}") from None
    return fn(x)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def layer_norm_cf(x, gamma, beta, eps: float = 1e-5) -> np.ndarray:
    """Layer norm over (channel, frequency) per time frame, elementwise affine.

    x: (C, T, F); gamma, beta: (C, F).
    """
    x = np.asarray(x, dtype=np.float32)
    mean = x.mean(axis=(0, 2), keepdims=True)
    var = x.var(axis=(0, 2), keepdims=True)
    normed = (x - mean) / np.sqrt(var + np.float32(eps))
    return (normed * _as_f32(gamma)[:, None, :] + _as_f32(beta)[:, None, :]
            ).astype(np.float32, copy=False)


def batch_norm_infer(x, mean, var, gamma, beta, eps: float = 1e-5) -> np.ndarray:
    """Inference-time batch norm: per-channel affine from frozen statistics."""
    x = np.asarray(x, dtype=np.float32)
    scale = _as_f32(gamma) / np.sqrt(_as_f32(var) + np.float32(eps))
    shift = _as_f32(beta) - _as_f32(mean) * scale
    return (x * scale[:, None, None] + shift[:, None, None]).astype(np.float32, copy=False)
