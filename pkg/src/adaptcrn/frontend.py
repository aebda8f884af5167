"""Spectral front end: STFT analysis/synthesis, ERB compression, SFE, masking.

Fixed format: 16 kHz mono, 512-sample square-root Hann window, hop 256,
257 retained bins.  Frame t covers samples [t*256, t*256+512) with no centering
pad; the analysis is therefore causal with one window (32 ms) of latency.

The square-root Hann window at 50% overlap satisfies w^2(n) + w^2(n+256) = 1
exactly, so overlap-add reconstruction needs no normalization and interior
samples round-trip to float precision.
"""

import numpy as np

from .errors import ConfigurationError

N_FFT = 512
HOP = 256
N_BINS = 257          # N_FFT // 2 + 1
SAMPLE_RATE = 16000
N_BANDS = 129         # compressed frequency axis
ERB_KEEP = 65         # bins below 2 kHz pass through unaltered
ERB_LOW_HZ = 2000.0
ERB_HIGH_HZ = 8000.0
MAG_CLAMP = 1e-8      # floor before log / power-law division
MASK_BETA = 1.2       # learnable-sigmoid output ceiling


def sqrt_hann_window(n: int = N_FFT) -> np.ndarray:
    """Periodic square-root Hann window; equals sin(pi*k/n)."""
    k = np.arange(n)
    return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)).astype(np.float32)


_WINDOW = sqrt_hann_window()


def frame_count(n_samples: int) -> int:
    """Number of STFT frames for a signal of n_samples (ceil over the hop)."""
    if n_samples <= 0:
        return 0
    return -(-n_samples // HOP)


def stft(wave) -> np.ndarray:
    """Short-time Fourier transform -> complex64 spectrogram (T, 257).

    The tail is zero-padded so that ceil(len/256) frames are produced; this is
    exactly the frame schedule of the streaming path.
    """
    wave = np.asarray(wave, dtype=np.float32).reshape(-1)
    t_frames = frame_count(len(wave))
    if t_frames == 0:
        return np.zeros((0, N_BINS), dtype=np.complex64)
    padded = np.zeros(HOP * (t_frames - 1) + N_FFT, dtype=np.float32)
    padded[:len(wave)] = wave
    frames = np.lib.stride_tricks.sliding_window_view(padded, N_FFT)[::HOP]
    spec = np.fft.rfft(frames * _WINDOW, axis=1)  # computed in float64
    return spec.astype(np.complex64)


def istft(spec, length: int | None = None) -> np.ndarray:
    """Inverse STFT by windowed overlap-add.

    Returns HOP*(T-1) + N_FFT samples, or exactly `length` samples
    (zero-padded / truncated) when given.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != N_BINS:
        raise ConfigurationError(f"expected spectrogram (T, {N_BINS}), got {spec.shape}")
    t_frames = spec.shape[0]
    if t_frames == 0:
        return np.zeros(0 if length is None else length, dtype=np.float32)
    frames = np.fft.irfft(spec, n=N_FFT, axis=1) * _WINDOW  # float64
    out = np.zeros(HOP * (t_frames - 1) + N_FFT, dtype=np.float64)
    for t in range(t_frames):
        out[t * HOP:t * HOP + N_FFT] += frames[t]
    out32 = out.astype(np.float32)
    if length is None:
        return out32
    if length <= len(out32):
        return out32[:length]
    return np.pad(out32, (0, length - len(out32)))


# ---------------------------------------------------------------------------
# ERB compression
# ---------------------------------------------------------------------------

def erb_rate(hz):
    """ERB-rate scale: 21.4 * log10(1 + 4.37 * f_kHz)."""
    return 21.4 * np.log10(1.0 + 0.00437 * np.asarray(hz, dtype=np.float64))


def erb_rate_inv(e):
    return (np.power(10.0, np.asarray(e, dtype=np.float64) / 21.4) - 1.0) / 0.00437


def erb_centers_hz(n_bands: int = N_BANDS - ERB_KEEP) -> np.ndarray:
    """Triangle center frequencies, equally spaced on the ERB-rate scale
    between 2 kHz and 8 kHz inclusive (float64)."""
    return erb_rate_inv(np.linspace(erb_rate(ERB_LOW_HZ), erb_rate(ERB_HIGH_HZ), n_bands))


def build_erb_bank() -> np.ndarray:
    """129x257 compression matrix.

    Rows 0-64 are one-hot on bins 0-64 (below 2 kHz unaltered).  Rows 65-128
    are triangular filters over bins 65-256, linear in Hz between neighboring
    centers, each row normalized to unit sum.
    """
    bank = np.zeros((N_BANDS, N_BINS), dtype=np.float64)
    bank[:ERB_KEEP, :ERB_KEEP] = np.eye(ERB_KEEP)

    centers = erb_centers_hz()
    bin_hz = np.arange(N_BINS) * (SAMPLE_RATE / N_FFT)
    high = bin_hz[ERB_KEEP:]
    for i, c in enumerate(centers):
        left = centers[i - 1] if i > 0 else ERB_LOW_HZ
        right = centers[i + 1] if i < len(centers) - 1 else ERB_HIGH_HZ
        w = np.zeros_like(high)
        if c > left:
            rising = (high > left) & (high <= c)
            w[rising] = (high[rising] - left) / (c - left)
        if right > c:
            falling = (high > c) & (high < right)
            w[falling] = (right - high[falling]) / (right - c)
        bank[ERB_KEEP + i, ERB_KEEP:] = w
    sums = bank[ERB_KEEP:].sum(axis=1, keepdims=True)
    bank[ERB_KEEP:] /= sums
    return bank.astype(np.float32)


def compress(spec, bank) -> np.ndarray:
    """Spectral compression to model input features (3, T, 129).

    Channel 0: log10 of the ERB-averaged magnitude (clamped at 1e-8).
    Channels 1-2: real/imag parts divided by |X|^0.7 (clamped), ERB-averaged.
    """
    spec = np.asarray(spec)
    mag = np.abs(spec).astype(np.float32)
    bank_t = np.asarray(bank, dtype=np.float32).T  # (257, 129)
    mag_c = np.log10(np.maximum(mag @ bank_t, np.float32(MAG_CLAMP)))
    denom = np.power(np.maximum(mag, np.float32(MAG_CLAMP)), np.float32(0.7))
    r_c = (spec.real.astype(np.float32) / denom) @ bank_t
    i_c = (spec.imag.astype(np.float32) / denom) @ bank_t
    return np.stack([mag_c, r_c, i_c]).astype(np.float32)


def sfe(features, kernel: int = 3) -> np.ndarray:
    """Subband feature extraction: unfold adjacent bands into channels.

    Output channel c*kernel + j at band f equals input channel c at band
    f + j - kernel//2 (zero padding at the edges); 3 channels become 9.
    """
    features = np.asarray(features, dtype=np.float32)
    if kernel % 2 == 0:
        raise ConfigurationError(f"sfe kernel must be odd, got {kernel}")
    c, t, f = features.shape
    pad = kernel // 2
    fp = np.pad(features, ((0, 0), (0, 0), (pad, pad)))
    out = np.empty((c * kernel, t, f), dtype=np.float32)
    for ci in range(c):
        for j in range(kernel):
            out[ci * kernel + j] = fp[ci, :, j:j + f]
    return out


def decompress_mask(decoder_out, bank, alpha, beta: float = MASK_BETA) -> np.ndarray:
    """Expand the decoder's band-domain output to a 257-bin magnitude mask.

    m = beta * sigmoid(alpha_f * (bank^T @ y)); output strictly inside (0, beta).
    """
    decoder_out = np.asarray(decoder_out, dtype=np.float32)
    lin = decoder_out @ np.asarray(bank, dtype=np.float32)  # (T, 257)
    z = np.asarray(alpha, dtype=np.float32) * lin
    # stable sigmoid
    mask = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    return (np.float32(beta) * mask).astype(np.float32)


def apply_mask(mask, spec) -> np.ndarray:
    """Scale the complex spectrum by the magnitude mask (phase preserved)."""
    mask = np.asarray(mask, dtype=np.float32)
    spec = np.asarray(spec)
    if mask.shape != spec.shape:
        raise ConfigurationError(
            f"mask shape {mask.shape} does not match spectrogram {spec.shape}"
        )
    return (mask * spec).astype(np.complex64)
