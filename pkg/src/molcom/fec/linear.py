"""Systematic Hamming codes and the first-order Reed-Muller (8,4) code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .codebook import Codebook, all_words, bits_to_int, int_to_bits


@lru_cache(maxsize=None)
def hamming_matrices(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Generator G = [I_k | P] and parity-check H = [P^T | I_m] for n = 2^m - 1."""
    if m < 2:
        raise ValueError(f"need at least 2 parity bits, got {m}")
    n = 2**m - 1
    cols = [c for c in range(1, n + 1) if c & (c - 1)]  # non-unit syndromes
    P = int_to_bits(np.array(cols), m)
    k = n - m
    G = np.hstack([np.eye(k, dtype=np.uint8), P])
    H = np.hstack([P.T, np.eye(m, dtype=np.uint8)])
    G.setflags(write=False)
    H.setflags(write=False)
    return G, H


def _blocks(x, n):
    x = np.asarray(x, dtype=np.int64)
    if x.shape[-1] != n:
        raise ValueError(f"expected length {n}, got {x.shape[-1]}")
    return x


def hamming_encode(message, m: int = 3) -> np.ndarray:
    G, _ = hamming_matrices(m)
    msg = _blocks(message, G.shape[0])
    return (msg @ G % 2).astype(np.uint8)


def hamming_syndrome(received, m: int = 3) -> np.ndarray:
    G, H = hamming_matrices(m)
    r = _blocks(received, G.shape[1])
    return (r @ H.T % 2).astype(np.uint8)


def hamming_detect(received, m: int = 3):
    """True where a nonzero syndrome flags an error (catches every 1- or 2-bit error)."""
    return np.any(hamming_syndrome(received, m) != 0, axis=-1)


def hamming_decode(received, m: int = 3) -> np.ndarray:
    """Correct up to one flipped bit and return the k message bits."""
    G, H = hamming_matrices(m)
    r = _blocks(received, G.shape[1]).copy()
    syn = bits_to_int(hamming_syndrome(r, m))
    col_index = {bits_to_int(H[:, j]): j for j in range(H.shape[1])}
    lookup = np.full(2 ** H.shape[0], -1)
    for s, j in col_index.items():
        lookup[s] = j
    pos = lookup[syn]
    flat = r.reshape(-1, r.shape[-1])
    fpos = np.atleast_1d(pos).ravel()
    rows = np.flatnonzero(fpos >= 0)
    flat[rows, fpos[rows]] ^= 1
    return flat.reshape(r.shape)[..., : G.shape[0]].astype(np.uint8)


def hamming_codebook(m: int = 3) -> Codebook:
    G, _ = hamming_matrices(m)
    k = G.shape[0]
    return Codebook(hamming_encode(all_words(k), m), k, f"hamming({G.shape[1]},{k})")


@lru_cache(maxsize=None)
def rm84_generator() -> np.ndarray:
    # Rows: all-ones, then the three coordinate functions over points 0..7.
    pts = all_words(3)
    G = np.vstack([np.ones(8, dtype=np.uint8), pts.T])
    G.setflags(write=False)
    return G


def rm84_encode(message) -> np.ndarray:
    msg = _blocks(message, 4)
    return (msg @ rm84_generator() % 2).astype(np.uint8)


def rm84_codebook() -> Codebook:
    return Codebook(rm84_encode(all_words(4)), 4, "rm(8,4)")


def rm84_decode(received) -> np.ndarray:
    """Minimum-distance decoding; ties go to the lowest message index."""
    r = _blocks(received, 8)
    cw = rm84_codebook().codewords.astype(np.int64)
    dist = (r[..., None, :] != cw).sum(-1)
    return int_to_bits(dist.argmin(-1), 4)
