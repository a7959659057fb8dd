"""Weight-based codes for transposition channels: distinct-Hamming-weight
(DHW) codes and stateful (n, k, l) ISI-free codes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook, as_bits, bits_to_int, bits_to_str, int_to_bits


def dhw_codebook(n: int, size: int | None = None) -> Codebook:
    """Left-packed words 1^w 0^(n-w) for w = 0 .. size-1 (all n+1 by default)."""
    if n < 1:
        raise ValueError("block length must be >= 1")
    size = n + 1 if size is None else size
    if not 1 <= size <= n + 1:
        raise ValueError(f"a DHW code of length {n} has at most {n + 1} codewords")
    words = (np.arange(n)[None, :] < np.arange(size)[:, None]).astype(np.uint8)
    k = int(math.log2(size)) if size & (size - 1) == 0 else None
    return Codebook(words, k, f"dhw({n})")


def dhw_max_rate(n: int) -> float:
    return math.log2(n + 1) / n


def nearest_weight(received, weights) -> np.ndarray:
    """Index of the codeword whose weight is nearest; ties go to the lower weight."""
    w = np.asarray(received, dtype=np.int64).sum(-1)
    cw = np.asarray(weights, dtype=np.int64)
    gap = np.abs(w[..., None] - cw)
    # Break ties toward lower weight by ranking on (gap, weight).
    key = gap * (cw.max() + 1) + cw
    return key.argmin(-1)


def dhw_encode(message, codebook: Codebook) -> np.ndarray:
    return codebook.encode(message)


def dhw_decode(received, codebook: Codebook) -> np.ndarray:
    """Decode to codeword indices by weight alone."""
    return nearest_weight(received, codebook.weights)


@dataclass(frozen=True)
class IsiFreeTable:
    """(n, k, l) ISI-free assignment: ``assignment[message, state]`` is a codeword.

    The state is the last bit of the previously sent codeword.
    """

    n: int
    k: int
    l: int
    assignment: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.uint8)
        if a.shape != (2**self.k, 2, self.n):
            raise ValueError(f"assignment must have shape {(2**self.k, 2, self.n)}, got {a.shape}")
        object.__setattr__(self, "assignment", a)
        self.validate()

    def validate(self):
        if self.l != 1:
            raise ValueError("only crossover level l = 1 tables are supported")
        a = self.assignment
        for state in (0, 1):
            col = a[:, state]
            w = col.sum(1)
            if len(set(w.tolist())) != len(w):
                raise ValueError(f"state-{state} codewords must have distinct weights")
            # Every codeword in this column can follow any codeword ending in `state`.
            if np.any(col[:, : self.l] != state):
                raise ValueError(f"state-{state} codewords must start with {state}")

    def column(self, state: int) -> np.ndarray:
        return self.assignment[:, state]

    def to_text(self) -> str:
        lines = [f"{self.n} {self.k} {self.l}"]
        for m in range(2**self.k):
            msg = bits_to_str(int_to_bits(m, self.k))
            lines.append(f"{msg} {bits_to_str(self.assignment[m, 0])} {bits_to_str(self.assignment[m, 1])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "IsiFreeTable":
        lines = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        n, k, l = (int(x) for x in lines[0])
        rows = sorted(lines[1:], key=lambda r: int(r[0], 2))
        assignment = np.array([[as_bits(r[1]), as_bits(r[2])] for r in rows])
        return cls(n, k, l, assignment)


def isifree_table(n: int, k: int, l: int = 1) -> IsiFreeTable:
    """Staircase ISI-free table for l = 1.

    State 0 sends 0^(n-w) 1^w and state 1 sends 1^w 0^(n-w), message m using
    weight m, except that message 0 in state 1 uses the all-ones word.
    """
    if l != 1:
        raise ValueError("only l = 1 is constructed")
    if 2**k > n:
        raise ValueError(f"an (n, k, 1) staircase table needs 2^k <= n, got n={n}, k={k}")
    a = np.zeros((2**k, 2, n), dtype=np.uint8)
    for m in range(2**k):
        a[m, 0, n - m :] = 1
        a[m, 1, : (n if m == 0 else m)] = 1
    return IsiFreeTable(n, k, l, a)


TABLE_421 = isifree_table(4, 2, 1)


def _message_indices(messages, k):
    m = np.asarray(messages)
    if m.ndim >= 1 and m.shape[-1] == k and m.dtype != object and m.max(initial=0) <= 1 and m.ndim == 2:
        return np.atleast_1d(bits_to_int(m))
    return np.asarray(m, dtype=np.int64).ravel()


def isifree_encode(messages, table: IsiFreeTable = TABLE_421, initial_state: int = 0) -> np.ndarray:
    """Encode a message stream (rows of k bits, or integer indices) to a bit stream."""
    if initial_state not in (0, 1):
        raise ValueError(f"unknown state {initial_state}")
    idx = _message_indices(messages, table.k)
    if np.any((idx < 0) | (idx >= 2**table.k)):
        raise ValueError("message index out of range")
    out = np.empty((idx.size, table.n), dtype=np.uint8)
    state = initial_state
    for i, m in enumerate(idx):
        out[i] = table.assignment[m, state]
        state = int(out[i, -1])
    return out.ravel()


def isifree_decode(stream, table: IsiFreeTable = TABLE_421, initial_state: int = 0) -> np.ndarray:
    """Decode a bit stream to message indices using weight plus tracked state."""
    if initial_state not in (0, 1):
        raise ValueError(f"unknown state {initial_state}")
    blocks = np.asarray(stream, dtype=np.int64).reshape(-1, table.n)
    col_weights = [table.column(s).sum(1).astype(np.int64) for s in (0, 1)]
    received_w = blocks.sum(1)
    out = np.empty(len(blocks), dtype=np.int64)
    state = initial_state
    for i, w in enumerate(received_w):
        cw = col_weights[state]
        j = int(np.argmin(np.abs(w - cw) * (table.n + 1) + cw))
        out[i] = j
        state = int(table.assignment[j, state, -1])
    return out
