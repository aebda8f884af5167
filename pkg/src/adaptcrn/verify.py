"""Randomized self-verification suites for the enhancement engine.

Five independent property suites back the engine's numerical claims:

* ``strategy_equivalence`` — the three adaptive-convolution strategies
  compute the same outputs on randomized banks, maps, and inputs.
* ``reparameterization`` — two stacked adaptive pointwise layers match the
  collapsed single layer with the product kernel bank.
* ``streaming_vs_offline`` — frame-by-frame streaming reproduces offline
  enhancement after latency alignment, and every captured kernel-attention
  row sums to one.
* ``causality`` — perturbing the input after sample t leaves every output
  sample at or before t - 512 bit-identical.
* ``stft_roundtrip`` — analysis/synthesis reconstructs interior samples and
  conserves windowed energy (Parseval).

``run_all`` drives the suites from per-suite seeded generators, so a fixed
seed reproduces the exact same cases.  The ``inject`` hook deliberately
mis-weights the kernel aggregation of one strategy; a healthy harness must
turn that into a reported failure, which keeps the pass path trustworthy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import frontend
from .adaptive import KernelBank, adaptive_conv_forward, reparam_forward
from .config import ModelConfig
from .errors import ConfigurationError
from .model import build_model, enhance_offline, enhance_streaming
from .ops import softmax
from .weights import init_random

SUITE_NAMES: Tuple[str, ...] = (
    "strategy_equivalence",
    "reparameterization",
    "streaming_vs_offline",
    "causality",
    "stft_roundtrip",
)

DEFAULT_CASES: Dict[str, int] = {
    "strategy_equivalence": 1000,
    "reparameterization": 200,
    "streaming_vs_offline": 20,
    "causality": 20,
    "stft_roundtrip": 100,
}

INJECT_MODES = ("break-aggregation",)

# attention modes that admit frame-by-frame evaluation
_STREAMABLE_MODES = ("temporal", "single_frame", "multi_frame")


@dataclass(frozen=True)
class SuiteResult:
    """Outcome of one property suite."""

    name: str
    cases: int
    max_error: float
    tolerance: float
    passed: bool
    seconds: float
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "cases": self.cases,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "detail": self.detail,
        }


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / (np.abs(b).max() + 1e-12))


def _suite_rng(seed: int, suite: str) -> np.random.Generator:
    return np.random.default_rng([seed, SUITE_NAMES.index(suite)])


# ---------------------------------------------------------------------------
# suite 1: strategy equivalence
# ---------------------------------------------------------------------------

def _random_case(r: np.random.Generator):
    """One randomized adaptive-convolution setup within the documented ranges
    (K <= 8, C <= 16, T <= 32, F <= 33)."""
    k = int(r.integers(1, 9))
    t_len = int(r.integers(1, 33))
    f_in = int(r.integers(1, 34))
    k_t = int(r.integers(1, 4))
    k_f = int(r.choice([1, 3, 5]))
    layout = r.random()
    if layout < 0.15:  # transposed depthwise (decoder upsampler shape)
        c_in = c_out = int(r.integers(1, 17))
        k_t = 1
        bank = KernelBank(
            weights=r.standard_normal((k, c_out, 1, 1, k_f)).astype(np.float32),
            bias=r.standard_normal(c_out).astype(np.float32),
            stride_f=int(r.integers(1, 3)), pad_f=(k_f - 1) // 2,
            groups=c_in, transposed=True)
    elif layout < 0.35:  # depthwise
        c_in = c_out = int(r.integers(1, 17))
        bank = KernelBank(
            weights=r.standard_normal((k, c_out, 1, k_t, k_f)).astype(np.float32),
            bias=r.standard_normal(c_out).astype(np.float32),
            stride_f=int(r.integers(1, 3)), pad_f=(k_f - 1) // 2,
            groups=c_in)
    else:  # dense (pointwise when k_t = k_f = 1)
        c_in = int(r.integers(1, 17))
        c_out = int(r.integers(1, 17))
        bank = KernelBank(
            weights=r.standard_normal((k, c_out, c_in, k_t, k_f)).astype(np.float32),
            bias=r.standard_normal(c_out).astype(np.float32),
            stride_f=int(r.integers(1, 3)), pad_f=(k_f - 1) // 2)
    x = r.standard_normal((c_in, t_len, f_in)).astype(np.float32)
    attn = softmax(r.standard_normal((t_len, k)).astype(np.float32), axis=-1)
    maps = {}
    if r.random() < 0.5:
        maps["channel_in"] = r.random((t_len, bank.weights.shape[2])).astype(np.float32)
    if r.random() < 0.5:
        maps["channel_out"] = r.random((t_len, c_out)).astype(np.float32)
    if r.random() < 0.5:
        maps["spatial"] = r.random((t_len, k_t * k_f)).astype(np.float32)
    return x, bank, attn, maps


def strategy_equivalence(seed: int = 0, cases: int = 1000,
                         inject: Optional[str] = None) -> SuiteResult:
    r = _suite_rng(seed, "strategy_equivalence")
    start = time.perf_counter()
    worst = 0.0
    tol = 1e-4
    for _ in range(cases):
        x, bank, attn, maps = _random_case(r)
        attn_pf = attn
        if inject == "break-aggregation":
            # skew the convex combination fed to one strategy; the suite must
            # notice that the paths no longer agree
            attn_pf = attn * np.float32(1.003)
        outs = [
            adaptive_conv_forward(x, bank, attn_pf, strategy="per_frame", **maps),
            adaptive_conv_forward(x, bank, attn, strategy="grouped_unfold", **maps),
        ]
        # output_agg folds per-frame maps into the K static convolutions only
        # where they commute: no tap-wise map on a spatially extended kernel,
        # and no input-channel map across a multi-frame kernel
        agg_ok = ("spatial" not in maps or bank.k_t * bank.k_f == 1) and \
                 ("channel_in" not in maps or bank.k_t == 1)
        if agg_ok:
            outs.append(
                adaptive_conv_forward(x, bank, attn, strategy="output_agg", **maps))
        for j in range(len(outs)):
            for l in range(j + 1, len(outs)):
                worst = max(worst, _rel_err(outs[j], outs[l]))
    return SuiteResult("strategy_equivalence", cases, worst, tol, worst < tol,
                       time.perf_counter() - start)


# ---------------------------------------------------------------------------
# suite 2: pointwise reparameterization
# ---------------------------------------------------------------------------

def reparameterization(seed: int = 0, cases: int = 200) -> SuiteResult:
    r = _suite_rng(seed, "reparameterization")
    start = time.perf_counter()
    worst = 0.0
    tol = 1e-5
    for i in range(cases):
        k1, k2 = int(r.integers(1, 5)), int(r.integers(1, 5))
        c_in, c_mid, c_out = (int(r.integers(1, 13)) for _ in range(3))
        t_len, f_in = int(r.integers(1, 33)), int(r.integers(1, 34))
        scale = np.float32(0.5)
        b1 = KernelBank(
            weights=(scale * r.standard_normal((k1, c_mid, c_in, 1, 1))).astype(np.float32),
            bias=r.standard_normal(c_mid).astype(np.float32))
        b2 = KernelBank(
            weights=(scale * r.standard_normal((k2, c_out, c_mid, 1, 1))).astype(np.float32),
            bias=r.standard_normal(c_out).astype(np.float32))
        x = r.standard_normal((c_in, t_len, f_in)).astype(np.float32)
        a1 = softmax(r.standard_normal((t_len, k1)).astype(np.float32), axis=-1)
        a2 = softmax(r.standard_normal((t_len, k2)).astype(np.float32), axis=-1)
        strategy = ("per_frame", "output_agg", "grouped_unfold")[i % 3]
        two = adaptive_conv_forward(
            adaptive_conv_forward(x, b1, a1, strategy=strategy),
            b2, a2, strategy=strategy)
        one = reparam_forward(x, b1, b2, a1, a2, strategy=strategy)
        worst = max(worst, float(np.abs(two - one).max()))
    return SuiteResult("reparameterization", cases, worst, tol, worst < tol,
                       time.perf_counter() - start)


# ---------------------------------------------------------------------------
# suites 3 & 4: whole-model properties
# ---------------------------------------------------------------------------

def _variant_config(i: int) -> ModelConfig:
    """Cycle through streamable model variants; every fourth is non-adaptive."""
    cfg = ModelConfig()
    if i % 4 == 3:
        return replace(cfg, adaptive=False)
    mode = _STREAMABLE_MODES[i % len(_STREAMABLE_MODES)]
    return replace(
        cfg,
        attention_mode=mode,
        n_kernels=(8, 4)[i % 2],
        channel_attention=(i % 3 != 1),
        spatial_attention=(i % 5 == 2),
    )


def _case_model(seed: int, i: int):
    cfg = _variant_config(i)
    store = init_random(cfg, seed=seed * 1000 + i)
    return build_model(cfg, store)


def streaming_vs_offline(seed: int = 0, cases: int = 20, *,
                         samples: int = 32000) -> SuiteResult:
    r = _suite_rng(seed, "streaming_vs_offline")
    start = time.perf_counter()
    worst = 0.0
    worst_rowsum = 0.0
    tol = 1e-5
    for i in range(cases):
        model = _case_model(seed, i)
        x = (0.3 * r.standard_normal(samples)).astype(np.float32)
        rows = []
        offline = enhance_offline(model, x,
                                  capture=lambda _, a: rows.append(a.kernel))
        streamed = enhance_streaming(model, x)
        worst = max(worst, float(np.abs(offline - streamed).max()))
        for kernel in rows:
            worst_rowsum = max(
                worst_rowsum, float(np.abs(kernel.sum(axis=-1) - 1.0).max()))
    ok = worst < tol and worst_rowsum < 1e-6
    return SuiteResult(
        "streaming_vs_offline", cases, worst, tol, ok,
        time.perf_counter() - start,
        detail=f"attention row sums off by {worst_rowsum:.1e} (tol 1e-06)")


def causality(seed: int = 0, cases: int = 20, *,
              samples: int = 16000) -> SuiteResult:
    r = _suite_rng(seed, "causality")
    start = time.perf_counter()
    worst = 0.0
    latency = frontend.N_FFT  # matches StreamSession.latency_samples
    for i in range(cases):
        model = _case_model(seed, i)
        x1 = (0.3 * r.standard_normal(samples)).astype(np.float32)
        t_cut = int(r.integers(samples // 4, 3 * samples // 4))
        x2 = x1.copy()
        x2[t_cut:] = (0.3 * r.standard_normal(samples - t_cut)).astype(np.float32)
        y1 = enhance_offline(model, x1)
        y2 = enhance_offline(model, x2)
        keep = t_cut - latency + 1  # samples at indices <= t_cut - latency
        worst = max(worst, float(np.abs(y1[:keep] - y2[:keep]).max()))
    return SuiteResult("causality", cases, worst, 0.0, worst == 0.0,
                       time.perf_counter() - start,
                       detail=f"{latency}-sample horizon, exact match required")


# ---------------------------------------------------------------------------
# suite 5: analysis/synthesis round trip
# ---------------------------------------------------------------------------

def stft_roundtrip(seed: int = 0, cases: int = 100, *,
                   samples: int = 16000) -> SuiteResult:
    r = _suite_rng(seed, "stft_roundtrip")
    start = time.perf_counter()
    worst = 0.0
    worst_parseval = 0.0
    tol = 1e-6
    window_sq = frontend.sqrt_hann_window().astype(np.float64) ** 2
    for _ in range(cases):
        x = (0.5 * r.standard_normal(samples)).astype(np.float32)
        spec = frontend.stft(x)
        back = frontend.istft(spec, length=samples)
        interior = slice(frontend.N_FFT, samples - frontend.N_FFT)
        worst = max(worst, float(np.abs(back[interior] - x[interior]).max()))

        # Parseval: summed windowed-frame energy == spectral energy / N_FFT,
        # with bins 1..255 counted twice (conjugate halves of the real FFT)
        t_frames = spec.shape[0]
        padded = np.zeros(frontend.HOP * (t_frames - 1) + frontend.N_FFT)
        padded[:samples] = x
        time_energy = sum(
            float((padded[b * frontend.HOP:b * frontend.HOP + frontend.N_FFT] ** 2
                   * window_sq).sum())
            for b in range(t_frames))
        weights = np.full(frontend.N_BINS, 2.0)
        weights[0] = weights[-1] = 1.0
        spec_energy = float(
            (np.abs(spec.astype(np.complex128)) ** 2 * weights).sum()) / frontend.N_FFT
        worst_parseval = max(
            worst_parseval, abs(spec_energy - time_energy) / time_energy)
    ok = worst < tol and worst_parseval < 1e-4
    return SuiteResult(
        "stft_roundtrip", cases, worst, tol, ok,
        time.perf_counter() - start,
        detail=f"parseval relative error {worst_parseval:.1e} (tol 1e-04)")


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def run_all(seed: int = 0, cases: Optional[int] = None,
            inject: Optional[str] = None,
            suites: Optional[Sequence[str]] = None) -> Tuple[SuiteResult, ...]:
    """Run the requested suites (all five by default) and return their results.

    ``cases`` overrides every suite's case count; ``None`` keeps the per-suite
    defaults.  ``inject`` must be None or one of INJECT_MODES.
    """
    if inject is not None and inject not in INJECT_MODES:
        raise ConfigurationError(
            f"unknown fault injection {inject!r}; choose from {INJECT_MODES}")
    chosen = tuple(suites) if suites is not None else SUITE_NAMES
    for name in chosen:
        if name not in SUITE_NAMES:
            raise ConfigurationError(
                f"unknown suite {name!r}; choose from {SUITE_NAMES}")
    results = []
    for name in chosen:
        n = cases if cases is not None else DEFAULT_CASES[name]
        if name == "strategy_equivalence":
            results.append(strategy_equivalence(seed, n, inject=inject))
        elif name == "reparameterization":
            results.append(reparameterization(seed, n))
        elif name == "streaming_vs_offline":
            results.append(streaming_vs_offline(seed, n))
        elif name == "causality":
            results.append(causality(seed, n))
        else:
            results.append(stft_roundtrip(seed, n))
    return tuple(results)


def render(results: Sequence[SuiteResult]) -> str:
    """Fixed-width pass/fail table for terminal output."""
    lines = []
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        line = (f"{status}  {res.name:<24} cases={res.cases:<5d} "
                f"max_err={res.max_error:.3e}  tol={res.tolerance:.0e}  "
                f"[{res.seconds:6.2f}s]")
        if res.detail:
            line += f"  ({res.detail})"
        lines.append(line)
    n_fail = sum(not r.passed for r in results)
    lines.append("all suites passed" if n_fail == 0
                 else f"{n_fail} suite(s) FAILED")
    return "\n".join(lines)
