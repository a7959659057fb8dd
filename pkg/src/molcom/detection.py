"""Receiver-side noise models and detectors for on-off keyed molecular links.

The received signal in slot k is r_k = sum_j a_{k-j} c_j + w_k where c_j is
the count contributed by one on-symbol j slots ago (M molecules times tap
p_j).  All functions accept either one frame (shape (K,)) or a batch of
independent frames (shape (F, K)); every frame starts from silence.

Coherent detectors know the taps (genie CSI).  The memory length I sets the
trellis size for MAP, the observation window for MMSE and the number of
past decisions the DFF cancels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import TapVector

NOISE_MODELS = ("binomial", "gaussian_approx", "awgn_drift")
MAX_MAP_MEMORY = 16
VARIANCE_FLOOR = 0.25  # counts are integers; keeps the noiseless limit finite
RIDGE_CONDITION = 1e12
RIDGE_SCALE = 1e-9
MAX_MOLECULES = 2**53  # counts stay exact in float64


@dataclass(frozen=True)
class ReceivedFrame:
    """Per-slot observations of one or more frames."""

    counts: np.ndarray = field(repr=False)
    noise_model: str
    taps: TapVector
    molecules: int
    awgn_variance: float = 0.0

    def __post_init__(self):
        if self.noise_model not in NOISE_MODELS:
            raise ValueError(f"noise_model must be one of {NOISE_MODELS}")
        if self.molecules < 1:
            raise ValueError("molecules per on-symbol must be >= 1")
        if self.awgn_variance < 0:
            raise ValueError("awgn_variance must be >= 0")
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=float))

    @property
    def n_slots(self) -> int:
        return self.counts.shape[-1]

    @property
    def gains(self) -> np.ndarray:
        """Expected count per on-symbol at each lag."""
        return self.molecules * self.taps.taps


@dataclass(frozen=True)
class DetectorConfig:
    memory_length: int = 1
    csi: TapVector | None = None
    difference_threshold: float = 0.0

    def __post_init__(self):
        if self.memory_length < 0:
            raise ValueError(f"memory_length must be >= 0, got {self.memory_length}")

    def require_csi(self, frame: ReceivedFrame) -> np.ndarray:
        if self.csi is None:
            raise ValueError("coherent detectors need channel taps (csi)")
        return frame.molecules * self.csi.taps


def clean_means(bits, taps: TapVector, molecules: int) -> np.ndarray:
    """Noise-free expected counts per slot; the frame length equals len(bits)."""
    bits = np.asarray(bits, dtype=float)
    g = molecules * taps.taps
    K = bits.shape[-1]
    out = np.zeros(bits.shape)
    for j, gj in enumerate(g[:K]):
        out[..., j:] += gj * bits[..., : K - j]
    return out


def apply_noise(bits, taps: TapVector, molecules: int, model: str, rng, awgn_variance: float = 0.0) -> ReceivedFrame:
    """Draw received counts for transmitted on-off bits.

    ``binomial`` releases M molecules per on-symbol and lets each land in at
    most one slot (a multinomial over the taps, so each slot's contribution
    is marginally Binomial(M, p_j)).  ``gaussian_approx`` replaces each
    contribution with a moment-matched normal.  ``awgn_drift`` adds i.i.d.
    normal noise of variance ``awgn_variance`` to the clean means.
    """
    if model not in NOISE_MODELS:
        raise ValueError(f"noise model must be one of {NOISE_MODELS}")
    if model == "awgn_drift" and not awgn_variance > 0:
        raise ValueError("awgn_drift needs awgn_variance > 0")
    if model != "awgn_drift" and awgn_variance != 0:
        raise ValueError("awgn_variance only applies to the awgn_drift model")
    bits = np.asarray(bits, dtype=np.int64)
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    p = taps.taps
    K = bits.shape[-1]
    L = min(p.size, K)
    if model == "binomial":
        pvals = np.append(p[:L], max(0.0, 1.0 - p[:L].sum()))
        draws = rng.multinomial(molecules, pvals, size=bits.shape)[..., :L] * bits[..., None]
        counts = np.zeros(bits.shape)
        for j in range(L):
            counts[..., j:] += draws[..., : K - j, j]
    elif model == "gaussian_approx":
        mean = clean_means(bits, taps, molecules)
        var = clean_means(bits, TapVector(taps.symbol_period, p * (1 - p)), molecules)
        counts = mean + np.sqrt(var) * rng.standard_normal(bits.shape)
    else:
        counts = clean_means(bits, taps, molecules) + math.sqrt(awgn_variance) * rng.standard_normal(bits.shape)
    return ReceivedFrame(counts, model, taps, molecules, awgn_variance)


def snr(taps: TapVector, molecules: int, noise_variance: float | None = None) -> float:
    """Peak signal power over noise variance in dB.

    The default noise is the binomial arrival noise M p_peak (1 - p_peak).
    """
    p_peak = float(np.max(taps.taps))
    assert p_peak == taps.peak
    if noise_variance is None:
        noise_variance = molecules * p_peak * (1 - p_peak)
    if not noise_variance > 0:
        raise ValueError("noise variance must be > 0")
    return 10.0 * math.log10((molecules * p_peak) ** 2 / noise_variance)


def molecules_for_snr(taps: TapVector, snr_db: float) -> int:
    """Smallest M whose binomial-noise SNR reaches ``snr_db``."""
    p = taps.peak
    need = 10 ** (snr_db / 10.0) * (1 - p) / p if p > 0 else math.inf
    if need > MAX_MOLECULES:
        raise ValueError(
            f"peak tap {p:.3g} is too small: {snr_db:g} dB would need about {need:.3g} molecules per bit "
            "(the channel delivers almost nothing within the tap window)"
        )
    return max(1, math.ceil(need))


def _noise_terms(frame: ReceivedFrame, g):
    """Per-lag variance of one on-symbol's contribution, plus the additive part."""
    p = g / frame.molecules
    if frame.noise_model == "awgn_drift":
        return np.zeros_like(g), frame.awgn_variance
    return g * (1 - p), frame.awgn_variance


def _as_batch(counts):
    counts = np.asarray(counts, dtype=float)
    return counts[None, :] if counts.ndim == 1 else counts, counts.ndim == 1


def map_detect(frame: ReceivedFrame, cfg: DetectorConfig, chunk: int = 32) -> np.ndarray:
    """Viterbi sequence detection over the 2^I most-recent-bit states.

    Branch metrics are Gaussian log-likelihoods whose variance depends on the
    hypothesised bits (signal-dependent noise).  ISI from bits older than I
    is cancelled per survivor using that survivor's own decisions, so the
    trellis size sets the complexity while the full tap vector is used.
    """
    g = cfg.require_csi(frame)
    I = cfg.memory_length
    if I > MAX_MAP_MEMORY:
        raise ValueError(f"memory_length {I} exceeds the MAP guard of {MAX_MAP_MEMORY}")
    counts, single = _as_batch(frame.counts)
    var_g, awgn = _noise_terms(frame, g)
    S = 2**I
    K = counts.shape[1]
    H = max(g.size - 1, I)  # survivor history length, lag 1 first
    gh = np.zeros(H)
    vh = np.zeros(H)
    gh[: g.size - 1], vh[: g.size - 1] = g[1:], var_g[1:]
    # Sources of each destination state: (s, b) pairs with ((s << 1) | b) & mask == dest.
    dest = ((np.arange(S)[:, None] << 1) | np.arange(2)) & (S - 1)
    src = np.argsort(dest.ravel(), kind="stable").reshape(S, -1)
    out = np.empty(counts.shape, dtype=np.uint8)
    for c0 in range(0, counts.shape[0], chunk):
        r = counts[c0 : c0 + chunk]
        F = r.shape[0]
        metric = np.full((F, S), -np.inf)
        metric[:, 0] = 0.0
        hist = np.zeros((F, S, H))
        back = np.empty((K, F, S), dtype=np.int32)
        for k in range(K):
            mu0 = hist @ gh
            var0 = hist @ vh + awgn
            mu = mu0[..., None] + np.array([0.0, g[0]])
            var = np.maximum(var0[..., None] + np.array([0.0, var_g[0]]), VARIANCE_FLOOR)
            ll = -0.5 * (r[:, k, None, None] - mu) ** 2 / var - 0.5 * np.log(var)
            vals = (metric[:, :, None] + ll).reshape(F, -1)[:, src]  # (F, S, n_src)
            pick = vals.argmax(-1)
            metric = np.take_along_axis(vals, pick[..., None], -1)[..., 0]
            chosen = src[np.arange(S), pick]  # (F, S) flat (s, b)
            prev = np.take_along_axis(hist, (chosen // 2)[..., None], 1)
            hist = np.concatenate([(chosen % 2)[..., None].astype(float), prev[..., :-1]], axis=-1)
            back[k] = chosen
        state = metric.argmax(1)
        rows = np.arange(F)
        for k in range(K - 1, -1, -1):
            flat_idx = back[k, rows, state]
            out[c0 : c0 + F, k] = flat_idx % 2
            state = flat_idx // 2
    return out[0] if single else out


def _decision_delay(g) -> int:
    return int(np.argmax(g))


def mmse_equalize(frame: ReceivedFrame, cfg: DetectorConfig, window: int | None = None, report=None) -> np.ndarray:
    """Decision-directed linear MMSE estimate of each bit, then threshold at 1/2.

    Bit a_k is estimated from r_k .. r_{k+W-1} (W = max(I, delay+1) by
    default).  Bits decided in the last I slots are known; later bits and
    bits older than I are fair coins.  The observation covariance is rebuilt
    at every step from the decisions so far.  ``report``, if a dict, receives
    the number of ridge-regularised steps.
    """
    g = cfg.require_csi(frame)
    I = cfg.memory_length
    counts, single = _as_batch(frame.counts)
    var_g, awgn = _noise_terms(frame, g)
    F, K = counts.shape
    W = window or max(I, _decision_delay(g) + 1, 1)
    L = g.size
    dec = np.zeros((F, K))
    ridged = 0
    rows = np.arange(W)
    for k in range(K):
        m_rows = rows[k + rows < K]
        Wk = m_rows.size
        mean = np.zeros((F, Wk))
        noise = np.full((F, Wk), awgn)
        H = np.zeros((Wk, Wk))
        for m in m_rows:
            for lag in range(L):
                idx = k + m - lag
                if idx < 0:
                    break
                if idx >= k:
                    H[m, idx - k] = g[lag]
                    noise[:, m] += 0.5 * var_g[lag]
                else:
                    a = dec[:, idx]
                    mean[:, m] += a * g[lag]
                    noise[:, m] += a * var_g[lag]
        mean += 0.5 * H.sum(1)
        noise = np.maximum(noise, VARIANCE_FLOOR)
        cov = 0.25 * (H @ H.T)[None] + noise[:, :, None] * np.eye(Wk)
        assert np.allclose(cov, np.swapaxes(cov, 1, 2))
        diag_mean = np.einsum("fii->f", cov) / Wk
        if Wk > 1 and np.max(np.linalg.cond(cov)) > RIDGE_CONDITION:
            cov = cov + (RIDGE_SCALE * diag_mean)[:, None, None] * np.eye(Wk)
            ridged += 1
        chol = np.linalg.cholesky(cov)  # raises if not positive definite
        resid = counts[:, k + m_rows] - mean
        z = np.linalg.solve(np.swapaxes(chol, 1, 2), np.linalg.solve(chol, resid[..., None]))[..., 0]
        est = 0.5 + 0.25 * z @ H[:, 0]
        dec[:, k] = est > 0.5
    if isinstance(report, dict):
        report["ridged_steps"] = ridged
    out = dec.astype(np.uint8)
    return out[0] if single else out


def dff_detect(frame: ReceivedFrame, cfg: DetectorConfig) -> np.ndarray:
    """Decision feedback: cancel ISI of the last I decisions, then threshold.

    Bit a_k is read at slot k + delay, the lag of the strongest tap.  Bits
    sent after a_k but before the read slot, and bits older than I, are
    replaced by their mean.  The threshold is half the main-tap gain.
    """
    g = cfg.require_csi(frame)
    I = cfg.memory_length
    counts, single = _as_batch(frame.counts)
    F, K = counts.shape
    delta = _decision_delay(g)
    dec = np.zeros((F, K))
    for k in range(K):
        obs = min(k + delta, K - 1)
        lag0 = obs - k
        est = counts[:, obs].copy()
        for lag in range(g.size):
            idx = obs - lag
            if idx < 0:
                break
            if lag == lag0:
                continue
            if idx > k or idx < k - I:
                est -= 0.5 * g[lag]
            else:
                est -= dec[:, idx] * g[lag]
        dec[:, k] = est > 0.5 * g[lag0]
    out = dec.astype(np.uint8)
    return out[0] if single else out


def diff_detect(frame: ReceivedFrame, cfg: DetectorConfig) -> np.ndarray:
    """Non-coherent rule: bit k is 1 iff r_k - r_{k-1} > threshold, r_{-1} = 0."""
    r = np.asarray(frame.counts, dtype=float)
    prev = np.concatenate([np.zeros(r.shape[:-1] + (1,)), r[..., :-1]], axis=-1)
    return ((r - prev) > cfg.difference_threshold).astype(np.uint8)


DETECTORS = {"map": map_detect, "mmse": mmse_equalize, "dff": dff_detect, "diff": diff_detect}
