"""Transposition channel for PPM-style codes and the MoCo distance.

Bits leave the transmitter one slot apart and arrive after a random 1-D
first-passage delay, so their order at the receiver can differ from the
order they were sent in.  Two receiver models are provided:

``order``
    every bit is a molecule whose type carries the bit value; the receiver
    reads types in arrival order.  This is the model under which ISI-free
    codes are transposition-proof up to their crossover level.
``slot``
    only bit 1 releases a molecule; arrivals are re-binned into slots by
    arrival time and a slot reads 1 if anything landed in it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..particles import first_passage_sample_1d
from .codebook import Codebook, all_words, bits_to_int, int_to_bits

MODES = ("order", "slot")
MAX_SEARCH_SUBSETS = 5_000_000


class TranspositionModel:
    """Source of codeword transition probabilities Pr{x_j | x_i}."""

    def transition_matrix(self, n: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class DriftTranspositionModel(TranspositionModel):
    """Random-walk channel with drift; transitions estimated by Monte Carlo.

    Each codeword is sent between ``context`` random neighbouring bits on
    either side, so inter-codeword crossovers enter the estimate.  Counts are
    add-one smoothed over the 2^n outcomes so no distance is infinite.
    """

    distance: float
    diffusivity: float
    drift: float
    symbol_period: float = 1.0
    trials: int = 20_000
    seed: int = 0
    mode: str = "order"
    context: int | None = None
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.trials < 1:
            raise ValueError("transition estimate needs at least one trial")

    def delays(self, rng, size):
        return first_passage_sample_1d(self.distance, self.diffusivity, self.drift, rng, size)

    def transition_counts(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, n]))
        ctx = n if self.context is None else self.context
        words = all_words(n)
        counts = np.zeros((2**n, 2**n), dtype=np.int64)
        width = n + 2 * ctx
        for i, w in enumerate(words):
            stream = rng.integers(0, 2, (self.trials, width), dtype=np.uint8)
            stream[:, ctx : ctx + n] = w
            delays = self.delays(rng, stream.shape)
            received = _receive(stream, delays, self.symbol_period, self.mode)
            np.add.at(counts[i], bits_to_int(received[:, ctx : ctx + n]), 1)
        return counts

    def transition_matrix(self, n: int) -> np.ndarray:
        if n not in self._cache:
            counts = self.transition_counts(n)
            self._cache[n] = (counts + 1.0) / (self.trials + 2**n)
        return self._cache[n]


@dataclass(frozen=True)
class AdjacentSwapModel(TranspositionModel):
    """Toy channel: each adjacent pair swaps with probability q, applied left to right."""

    q: float

    def transition_matrix(self, n: int) -> np.ndarray:
        return _swap_matrix(n, self.q)


@lru_cache(maxsize=32)
def _swap_matrix(n, q):
    P = np.zeros((2**n, 2**n))
    for i, w in enumerate(all_words(n)):
        for pattern in itertools.product((0, 1), repeat=n - 1):
            x = w.copy()
            for b, s in enumerate(pattern):
                if s:
                    x[b], x[b + 1] = x[b + 1], x[b]
            k = sum(pattern)
            P[i, bits_to_int(x)] += q**k * (1 - q) ** (n - 1 - k)
    return P


@dataclass(frozen=True)
class BitFlipModel(TranspositionModel):
    """Memoryless bit flips with probability p (the additive-noise regime)."""

    p: float

    def transition_matrix(self, n: int) -> np.ndarray:
        words = all_words(n).astype(np.int64)
        dist = (words[:, None, :] != words[None, :, :]).sum(-1)
        return self.p**dist * (1 - self.p) ** (n - dist)


def moco_distance(x_i, x_j, model: TranspositionModel) -> float:
    """-log Pr{x_j | x_i}."""
    x_i, x_j = np.asarray(x_i), np.asarray(x_j)
    if x_i.shape != x_j.shape:
        raise ValueError("codewords must have equal length")
    P = model.transition_matrix(x_i.size)
    p = P[bits_to_int(x_i), bits_to_int(x_j)]
    return math.inf if p <= 0 else -math.log(p)


def moco_distance_matrix(model: TranspositionModel, n: int) -> np.ndarray:
    P = model.transition_matrix(n)
    with np.errstate(divide="ignore"):
        return -np.log(P)


def moco_objective(codebook: Codebook, model: TranspositionModel) -> float:
    """Minimum MoCo distance over ordered pairs of distinct codewords."""
    dist = moco_distance_matrix(model, codebook.n)
    idx = bits_to_int(codebook.codewords)
    sub = dist[np.ix_(idx, idx)]
    np.fill_diagonal(sub, np.inf)
    return float(sub.min())


def moco_search(n: int, M: int, model: TranspositionModel, max_subsets: int = MAX_SEARCH_SUBSETS) -> Codebook:
    """Exhaustive max-min MoCo-distance codebook.

    Subsets are scanned in lexicographic order of codeword indices and the
    first one attaining the optimum is kept.
    """
    if not 1 <= M <= 2**n:
        raise ValueError(f"need 1 <= M <= 2^n, got M={M}, n={n}")
    if n > 6 or math.comb(2**n, M) > max_subsets:
        raise ValueError(f"search space C(2^{n}, {M}) exceeds the exhaustive-search guard")
    if M == 2**n:
        return Codebook(all_words(n), n, "moco")
    dist = moco_distance_matrix(model, n)
    sym = np.minimum(dist, dist.T)
    best_val, best = -np.inf, None
    combos = itertools.combinations(range(2**n), M)
    pairs = list(itertools.combinations(range(M), 2))
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    while True:
        chunk = np.array(list(itertools.islice(combos, 65536)), dtype=np.int64)
        if chunk.size == 0:
            break
        vals = sym[chunk[:, a], chunk[:, b]].min(1) if pairs else np.full(len(chunk), np.inf)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best = vals[j], chunk[j]
    k = int(math.log2(M)) if M & (M - 1) == 0 else None
    return Codebook(all_words(n)[best], k, "moco")


def moco_decode(received, codebook: Codebook, model: TranspositionModel) -> np.ndarray:
    """Maximum-likelihood decoding under the model's transition matrix."""
    with np.errstate(divide="ignore"):
        logP = np.log(model.transition_matrix(codebook.n))
    rows = bits_to_int(codebook.codewords)
    y = np.atleast_1d(bits_to_int(np.asarray(received)))
    return logP[np.ix_(rows, y)].argmax(0)


# Fixed n=4, M=4 MoCo code used as the baseline; moco_search gives the model-specific optimum.
REFERENCE_MOCO_CODEBOOK = Codebook(np.array([[0, 0, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [1, 1, 1, 0]]), 2, "moco-reference")


def _receive(stream, delays, t_s, mode):
    """Apply per-bit delays to streams laid out along the last axis."""
    stream = np.asarray(stream, dtype=np.uint8)
    n = stream.shape[-1]
    arrival = np.arange(n) * t_s + delays
    if mode == "order":
        order = np.argsort(arrival, axis=-1, kind="stable")
        return np.take_along_axis(stream, order, axis=-1)
    if mode == "slot":
        slot = np.floor(arrival / t_s).astype(np.int64)
        live = (stream == 1) & (slot < n)
        out = np.zeros_like(stream)
        flat = out.reshape(-1, n)
        rows = np.broadcast_to(np.arange(flat.shape[0])[:, None], (flat.shape[0], n))
        flat[rows[live.reshape(-1, n)], slot.reshape(-1, n)[live.reshape(-1, n)]] = 1
        return flat.reshape(stream.shape)
    raise ValueError(f"unknown mode {mode!r}")


def transposition_channel(stream, model: DriftTranspositionModel, rng, mode: str | None = None, delays=None):
    """Send a bit stream through the random-delay channel.

    ``delays`` may be supplied (one per bit) to reuse pre-drawn first-passage
    times; otherwise they are drawn from ``model``.
    """
    stream = np.asarray(stream, dtype=np.uint8).ravel()
    if delays is None:
        delays = model.delays(rng, stream.size)
    return _receive(stream, np.asarray(delays, dtype=float), model.symbol_period, mode or model.mode)
