"""Codebook container, Hamming-distance helpers and minimum-energy code search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def as_bits(x) -> np.ndarray:
    """Coerce a '0101' string or 0/1 sequence to a uint8 array."""
    if isinstance(x, str):
        x = [int(c) for c in x.strip()]
    arr = np.asarray(x, dtype=np.uint8)
    if np.any(arr > 1):
        raise ValueError("bits must be 0 or 1")
    return arr


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in np.asarray(bits).ravel())


def int_to_bits(value, width: int) -> np.ndarray:
    value = np.asarray(value, dtype=np.int64)
    return ((value[..., None] >> np.arange(width)[::-1]) & 1).astype(np.uint8)


def bits_to_int(bits) -> np.ndarray | int:
    bits = np.asarray(bits, dtype=np.int64)
    out = bits @ (1 << np.arange(bits.shape[-1])[::-1])
    return int(out) if np.ndim(out) == 0 else out


def all_words(n: int) -> np.ndarray:
    """All 2^n words in lexicographic order."""
    return int_to_bits(np.arange(2**n), n)


def pairwise_hamming(words) -> np.ndarray:
    w = np.asarray(words, dtype=np.int64)
    return (w[:, None, :] != w[None, :, :]).sum(-1)


def min_distance(words) -> int:
    w = np.asarray(words)
    if len(w) < 2:
        return w.shape[1] if w.ndim == 2 else 0
    dist = pairwise_hamming(w)
    np.fill_diagonal(dist, dist.max() + 1)
    return int(dist.min())


@dataclass(frozen=True)
class Codebook:
    codewords: np.ndarray = field(repr=False)
    message_length: int | None = None
    name: str = ""

    def __post_init__(self):
        cw = np.atleast_2d(np.asarray(self.codewords, dtype=np.uint8))
        if cw.size == 0:
            raise ValueError("codebook must contain at least one codeword")
        if np.any(cw > 1):
            raise ValueError("codewords must be binary")
        if len({bits_to_str(c) for c in cw}) != len(cw):
            raise ValueError("codewords must be distinct")
        if self.message_length is not None and len(cw) != 2**self.message_length:
            raise ValueError(f"structured code needs 2^k = {2**self.message_length} codewords, got {len(cw)}")
        object.__setattr__(self, "codewords", cw)

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    def __len__(self):
        return self.size

    @property
    def min_hamming_distance(self) -> int:
        return min_distance(self.codewords)

    @property
    def weights(self) -> np.ndarray:
        return self.codewords.sum(1).astype(np.int64)

    @property
    def average_weight(self) -> float:
        return float(self.weights.mean())

    @property
    def rate(self) -> float:
        return math.log2(self.size) / self.n

    def words(self) -> list[str]:
        return [bits_to_str(c) for c in self.codewords]

    def encode(self, message) -> np.ndarray:
        """Message bits (..., k) -> codewords (..., n) by message index."""
        if self.message_length is None:
            raise ValueError("codebook has no message length")
        return self.codewords[bits_to_int(message)]

    def to_text(self) -> str:
        lines = [f"{self.n} {self.size} {self.min_hamming_distance}"] + self.words()
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, name: str = "") -> "Codebook":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        n, M, d_min = (int(x) for x in lines[0].split())
        words = np.array([as_bits(ln) for ln in lines[1:]])
        if words.shape != (M, n):
            raise ValueError(f"header says {M} codewords of length {n}, body has shape {words.shape}")
        k = int(math.log2(M)) if M & (M - 1) == 0 else None
        cb = cls(words, k, name)
        if cb.min_hamming_distance != d_min:
            raise ValueError(f"header d_min {d_min} disagrees with recomputed {cb.min_hamming_distance}")
        return cb


# -- minimum-energy codes -----------------------------------------------------------


@lru_cache(maxsize=None)
def _constant_weight_bound(n: int, half_d: int, w: int) -> int:
    """Johnson upper bound on a length-n, weight-w code with distance >= 2*half_d."""
    if w < 0 or w > n:
        return 0
    w = min(w, n - w)
    if w < half_d:
        return 1
    return (n * _constant_weight_bound(n - 1, half_d, w - 1)) // w


@dataclass
class MinEnergyResult:
    codebook: Codebook
    optimal: bool
    lower_bound: float
    nodes: int


def _weight_lower_bound(weights, n, half_d, picked_per_weight, need):
    """Sum of the ``need`` lightest weights respecting per-weight-class capacity."""
    total = 0
    for w in range(n + 1):
        if need <= 0:
            break
        avail = int(np.count_nonzero(weights == w))
        if half_d > 0:
            avail = min(avail, _constant_weight_bound(n, half_d, w) - picked_per_weight[w])
        take = min(max(avail, 0), need)
        total += take * w
        need -= take
    return total if need <= 0 else math.inf


def min_energy_search(n: int, M: int, d_min: int, node_limit: int = 500_000) -> MinEnergyResult:
    """Size-M code with pairwise distance >= d_min and least average weight.

    Exhaustive branch and bound for n <= 8 (words tried lightest first,
    pruned by a per-weight-class Johnson capacity bound); beyond that, or
    when ``node_limit`` is hit, the lightest-first greedy code is returned
    with ``optimal=False`` and the bound it was measured against.
    """
    if n < 1 or M < 1 or M > 2**n:
        raise ValueError(f"infeasible parameters n={n}, M={M}")
    if d_min < 1 or d_min > n:
        raise ValueError(f"d_min must be in [1, n], got {d_min}")
    words = all_words(n)
    # Lightest first; within a weight, left-packed words first (1000 before 0001).
    order = np.lexsort((-np.arange(2**n), words.sum(1)))
    words = words[order]
    weights = words.sum(1).astype(np.int64)
    # Same-weight words are an even distance apart.
    half_d = (d_min + 1) // 2 if d_min > 1 else 0
    root_bound = _weight_lower_bound(weights, n, half_d, [0] * (n + 1), M)
    if root_bound == math.inf:
        raise ValueError(f"no ({n}, {M}, {d_min}) code exists")

    if d_min <= 1:
        return MinEnergyResult(Codebook(words[:M], _k_or_none(M), "min-energy"), True, root_bound / M, 0)

    dist = pairwise_hamming(words)
    compat = dist >= d_min

    greedy = []
    for i in range(len(words)):
        if all(compat[i, j] for j in greedy):
            greedy.append(i)
            if len(greedy) == M:
                break
    best = list(greedy) if len(greedy) == M else None
    best_cost = weights[best].sum() if best else math.inf

    if n > 8:
        if best is None:
            raise ValueError(f"greedy search found no ({n}, {M}, {d_min}) code")
        return MinEnergyResult(Codebook(words[best], _k_or_none(M), "min-energy"), False, root_bound / M, 0)

    nodes = 0
    exhausted = True
    picked = [0] * (n + 1)

    def dfs(chosen, cands, cost):
        nonlocal best, best_cost, nodes, exhausted
        nodes += 1
        if nodes > node_limit:
            exhausted = False
            return
        need = M - len(chosen)
        if need == 0:
            if cost < best_cost:
                best, best_cost = list(chosen), cost
            return
        if len(cands) < need:
            return
        if cost + _weight_lower_bound(weights[cands], n, half_d, picked, need) >= best_cost:
            return
        for pos, i in enumerate(cands):
            if len(cands) - pos < need:
                break
            if cost + weights[i] * need >= best_cost:
                break
            rest = cands[pos + 1 :]
            rest = rest[compat[i, rest]]
            chosen.append(i)
            picked[weights[i]] += 1
            dfs(chosen, rest, cost + weights[i])
            picked[weights[i]] -= 1
            chosen.pop()
            if not exhausted:
                return

    dfs([], np.arange(len(words)), 0)
    if best is None:
        if exhausted:
            raise ValueError(f"no ({n}, {M}, {d_min}) code exists")
        raise ValueError(f"search budget exhausted before any ({n}, {M}, {d_min}) code was found")
    cb = Codebook(words[sorted(best)], _k_or_none(M), "min-energy")
    return MinEnergyResult(cb, exhausted, best_cost / M if exhausted else root_bound / M, nodes)


def min_energy_codebook(n: int, M: int, d_min: int) -> Codebook:
    return min_energy_search(n, M, d_min).codebook


def _k_or_none(M: int):
    return int(math.log2(M)) if M & (M - 1) == 0 else None
