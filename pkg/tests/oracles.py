"""Independent reference implementations used as test oracles.

Everything here is written as plain nested loops / direct formulas in float64,
deliberately sharing no code with the package under test.
"""

import math

import numpy as np


def conv2d_oracle(x, w, bias=None, stride_f=1, pad_f=0, groups=1):
    """Causal 2-D convolution by explicit index loops (float64)."""
    c_in, t_len, f_len = x.shape
    c_out, c_in_g, k_t, k_f = w.shape
    f_out = (f_len + 2 * pad_f - k_f) // stride_f + 1
    co_g = c_out // groups
    out = np.zeros((c_out, t_len, f_out), dtype=np.float64)
    for o in range(c_out):
        g = o // co_g
        for t in range(t_len):
            for fo in range(f_out):
                acc = 0.0
                for ci in range(c_in_g):
                    c = g * c_in_g + ci
                    for j in range(k_t):
                        ti = t - (k_t - 1) + j
                        if ti < 0:
                            continue
                        for q in range(k_f):
                            fi = fo * stride_f + q - pad_f
                            if 0 <= fi < f_len:
                                acc += float(w[o, ci, j, q]) * float(x[c, ti, fi])
                if bias is not None:
                    acc += float(bias[o])
                out[o, t, fo] = acc
    return out


def conv_transpose_freq_oracle(x, w, bias=None, stride_f=1, pad_f=0):
    """Depthwise frequency-transposed convolution by scatter loops (float64)."""
    c, t_len, f_len = x.shape
    k_f = w.shape[3]
    f_out = (f_len - 1) * stride_f - 2 * pad_f + k_f
    out = np.zeros((c, t_len, f_out), dtype=np.float64)
    for ch in range(c):
        for t in range(t_len):
            for f in range(f_len):
                for q in range(k_f):
                    fo = f * stride_f + q - pad_f
                    if 0 <= fo < f_out:
                        out[ch, t, fo] += float(w[ch, 0, 0, q]) * float(x[ch, t, f])
            if bias is not None:
                out[ch, t] += float(bias[ch])
    return out


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def gru_oracle(x, w_ih, w_hh, b_ih, b_hh, h0=None):
    """Scalar-by-scalar GRU with gate order (z, r, n) and the candidate
    recurrent bias inside the reset product."""
    t_len, d_in = x.shape
    h_sz = w_hh.shape[1]
    h = [0.0] * h_sz if h0 is None else [float(v) for v in h0]
    out = np.zeros((t_len, h_sz), dtype=np.float64)
    for t in range(t_len):
        gi = [sum(float(w_ih[k, d]) * float(x[t, d]) for d in range(d_in)) + float(b_ih[k])
              for k in range(3 * h_sz)]
        gh = [sum(float(w_hh[k, m]) * h[m] for m in range(h_sz)) + float(b_hh[k])
              for k in range(3 * h_sz)]
        new_h = []
        for i in range(h_sz):
            z = _sig(gi[i] + gh[i])
            r = _sig(gi[h_sz + i] + gh[h_sz + i])
            n = math.tanh(gi[2 * h_sz + i] + r * gh[2 * h_sz + i])
            new_h.append((1.0 - z) * n + z * h[i])
        h = new_h
        out[t] = h
    return out


def layer_norm_oracle(x, gamma, beta, eps=1e-5):
    """Two-pass mean/variance normalization over (C, F) per frame."""
    c, t_len, f = x.shape
    out = np.zeros_like(x, dtype=np.float64)
    for t in range(t_len):
        frame = x[:, t, :].astype(np.float64)
        mu = frame.sum() / (c * f)
        var = ((frame - mu) ** 2).sum() / (c * f)
        out[:, t, :] = (frame - mu) / math.sqrt(var + eps) * gamma + beta
    return out


def frame_dft_energy(frame, bins):
    """Energy of selected DFT bins of a real frame, via direct summation."""
    n = len(frame)
    total = 0.0
    for k in bins:
        re = sum(frame[i] * math.cos(2 * math.pi * k * i / n) for i in range(n))
        im = -sum(frame[i] * math.sin(2 * math.pi * k * i / n) for i in range(n))
        total += re * re + im * im
    return total


def si_snr_oracle(est, ref):
    """Projection-based SI-SNR in dB (no cap)."""
    est = est.astype(np.float64)
    ref = ref.astype(np.float64)
    target = (est @ ref) / (ref @ ref) * ref
    noise = est - target
    return 10.0 * math.log10((target @ target) / (noise @ noise))
