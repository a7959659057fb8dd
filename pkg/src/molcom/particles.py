"""Particle-level random-walk engine with absorbing receivers.

Each molecule takes Gaussian steps of variance 2 D dt per axis (plus drift
toward the receiver).  A step that ends outside the receiver can still have
touched it in between; that event is resolved with the Brownian-bridge
crossing probability given both endpoints, so absorption times are exact in
law on the step grid.  Molecules carry exponential lifetimes drawn once at
emission; the step in which a lifetime runs out is shortened to end exactly
at the degradation instant.

The 1-D receiver sits at the origin with the transmitter at +d.  The 3-D
receiver is a sphere of radius r_r centred at the origin and the transmitter
starts at distance r_r + d from its centre.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams

DEFAULT_PARTITION_SIZE = 250_000


@dataclass(frozen=True)
class SimConfig:
    time_step: float
    max_time: float
    particle_count: int
    rng_seed: int = 0
    allow_coarse_step: bool = False
    partitions: int | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.time_step > 0:
            raise ValueError(f"time_step must be > 0, got {self.time_step}")
        if not self.max_time > 0:
            raise ValueError(f"max_time must be > 0, got {self.max_time}")
        if self.particle_count < 1:
            raise ValueError(f"particle_count must be >= 1, got {self.particle_count}")
        if self.partitions is not None and self.partitions < 1:
            raise ValueError("partitions must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.max_time / self.time_step - 1e-9))

    def partition_sizes(self) -> list[int]:
        n_parts = self.partitions or math.ceil(self.particle_count / DEFAULT_PARTITION_SIZE)
        n_parts = min(n_parts, self.particle_count)
        base, extra = divmod(self.particle_count, n_parts)
        return [base + (i < extra) for i in range(n_parts)]


def max_stable_step(params: ChannelParams) -> float:
    """Default step-size ceiling d^2 / (100 D)."""
    return params.distance**2 / (100.0 * params.diffusivity)


def check_step(params: ChannelParams, cfg: SimConfig):
    limit = max_stable_step(params)
    if cfg.time_step > limit * (1 + 1e-12) and not cfg.allow_coarse_step:
        raise ValueError(
            f"time_step {cfg.time_step:.4g} s exceeds d^2/(100 D) = {limit:.4g} s; "
            "pass allow_coarse_step=True to override"
        )


@dataclass
class ArrivalRecord:
    """Absorption outcome per emitted molecule (NaN = not absorbed)."""

    absorption_times: np.ndarray = field(repr=False)
    degraded_count: int
    emitted_count: int
    max_time: float

    @property
    def absorbed_count(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.absorption_times)))

    @property
    def surviving_count(self) -> int:
        return self.emitted_count - self.absorbed_count - self.degraded_count

    def sorted_times(self) -> np.ndarray:
        t = self.absorption_times
        return np.sort(t[~np.isnan(t)])

    def histogram(self, edges) -> np.ndarray:
        edges = np.asarray(edges, dtype=float)
        # Right-closed bins, matching empirical_cdf's "<= t" convention.
        t = self.sorted_times()
        cum = np.searchsorted(t, edges, side="right")
        return np.diff(cum)

    def write_histogram_csv(self, path, edges):
        edges = np.asarray(edges, dtype=float)
        counts = self.histogram(edges)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_start_s", "bin_end_s", "count"])
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def empirical_cdf(record: ArrivalRecord, t):
    """Fraction of emitted molecules absorbed at or before ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("time must be >= 0")
    times = record.sorted_times()
    # Step-grid times are sums of floats; absorb a few ulps of rounding.
    counts = np.searchsorted(times, t_arr * (1 + 1e-12), side="right")
    out = counts / record.emitted_count
    return float(out) if out.ndim == 0 else out


def first_passage_sample_1d(d: float, D: float, v: float, rng: np.random.Generator, size=None):
    """Sample 1-D first-passage times to a point at distance ``d``.

    With drift toward the target the law is inverse Gaussian with mean d/v and
    shape d^2/(2D); without drift it is the Levy law d^2 / (2 D Z^2).
    """
    if not (d > 0 and D > 0 and v >= 0):
        raise ValueError("need d > 0, D > 0, v >= 0")
    if v == 0:
        z = rng.standard_normal(size)
        return d * d / (2.0 * D * z * z)
    return rng.wald(d / v, d * d / (2.0 * D), size)


def _bridge_hit_1d(x0, x1, Dh):
    p = np.exp(-np.maximum(x0, 0.0) * np.maximum(x1, 0.0) / Dh)
    return np.where(x1 <= 0.0, 1.0, p)


def _bridge_hit_sphere(r0, r1, R, Dh):
    # Killed vs. free radial transition densities of 3-D Brownian motion
    # (method of images on u = r p); their ratio is the survival probability.
    a = np.exp(-np.maximum(r0 - R, 0.0) * np.maximum(r1 - R, 0.0) / Dh)
    b = np.exp(-r0 * r1 / Dh)
    p = (a - b) / (1.0 - b)
    return np.where(r1 <= R, 1.0, np.clip(p, 0.0, 1.0))


def _radial_step(r0, s, rng):
    z = rng.standard_normal(r0.size)
    e = rng.exponential(1.0, r0.size)
    # |x0 + s Z| for a 3-vector: the two transverse components give s^2 chi^2_2 = 2 s^2 Exp(1).
    return np.sqrt((r0 + s * z) ** 2 + 2.0 * s * s * e)


def _simulate_partition(params: ChannelParams, cfg: SimConfig, n: int, seed_seq) -> tuple[np.ndarray, int]:
    rng = np.random.default_rng(seed_seq)
    D = params.diffusivity
    lam = params.degradation_rate
    lifetimes = rng.exponential(1.0 / lam, n) if lam > 0 else np.full(n, np.inf)
    times = np.full(n, np.nan)
    degraded = 0

    mode = "1d"
    if params.dimension == 3:
        mode = "radial" if params.drift == 0 else "vector"
    R = params.receiver_radius or 0.0
    start = params.distance + R
    if mode == "vector":
        pos = np.zeros((n, 3))
        pos[:, 0] = start
    else:
        pos = np.full(n, float(start))

    active = np.arange(n)
    dt, T = cfg.time_step, cfg.max_time
    for k in range(cfg.n_steps):
        if active.size == 0:
            break
        t0 = k * dt
        t1 = min((k + 1) * dt, T)
        life = lifetimes[active]
        h = np.minimum(t1, life) - t0
        s = np.sqrt(2.0 * D * h)
        Dh = D * h
        if mode == "1d":
            x0 = pos[active]
            x1 = x0 - params.drift * h + s * rng.standard_normal(active.size)
            p_hit = _bridge_hit_1d(x0, x1, Dh)
        elif mode == "radial":
            x0 = pos[active]
            x1 = _radial_step(x0, s, rng)
            p_hit = _bridge_hit_sphere(x0, x1, R, Dh)
        else:
            v0 = pos[active]
            x1 = v0 + s[:, None] * rng.standard_normal((active.size, 3))
            # Drift points from the transmitter toward the receiver centre (-x axis).
            x1[:, 0] -= params.drift * h
            p_hit = _bridge_hit_sphere(np.linalg.norm(v0, axis=1), np.linalg.norm(x1, axis=1), R, Dh)
        hit = rng.random(active.size) < p_hit
        times[active[hit]] = t0 + h[hit]
        expired = ~hit & (t0 + h >= life)
        degraded += int(np.count_nonzero(expired))
        pos[active] = x1
        active = active[~(hit | expired)]
    return times, degraded


def simulate(params: ChannelParams, cfg: SimConfig) -> ArrivalRecord:
    """Release ``cfg.particle_count`` molecules at t=0 and record absorptions.

    Particles are split into fixed partitions, each with its own spawned seed
    stream, so the result depends only on (params, cfg) and not on
    ``cfg.workers``.
    """
    check_step(params, cfg)
    sizes = cfg.partition_sizes()
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(len(sizes))
    jobs = list(zip(sizes, seeds))
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda j: _simulate_partition(params, cfg, *j), jobs))
    else:
        parts = [_simulate_partition(params, cfg, *j) for j in jobs]
    times = np.concatenate([p[0] for p in parts])
    degraded = sum(p[1] for p in parts)
    return ArrivalRecord(times, degraded, cfg.particle_count, cfg.max_time)


def coupled_refinement(params: ChannelParams, cfg: SimConfig, t: float) -> tuple[float, float]:
    """Empirical CDF at ``t`` for step sizes 2*dt and dt along shared paths.

    The fine chain is simulated; the coarse chain sees every other position
    (exact for a Markov walk) and its bridge decision reuses the fine chain's
    uniform, so the two estimates differ only through particles whose
    absorption depends on the step size.  Used as the step-size convergence
    check; only drift-free 3-D and 1-D channels without degradation.
    """
    if params.degradation_rate > 0 or (params.dimension == 3 and params.drift > 0):
        raise ValueError("coupled refinement supports undegraded 1-D or drift-free 3-D channels")
    rng = np.random.default_rng(cfg.rng_seed)
    n, D, h = cfg.particle_count, params.diffusivity, cfg.time_step
    pairs = math.ceil(t / (2 * h) - 1e-9)
    R = params.receiver_radius or 0.0
    x = np.full(n, params.distance + R)
    fine_hit = np.zeros(n, bool)
    coarse_hit = np.zeros(n, bool)
    s = math.sqrt(2 * D * h)
    for _ in range(pairs):
        if params.dimension == 1:
            xm = x - params.drift * h + s * rng.standard_normal(n)
            x2 = xm - params.drift * h + s * rng.standard_normal(n)
            p1, p2 = _bridge_hit_1d(x, xm, D * h), _bridge_hit_1d(xm, x2, D * h)
            pc = _bridge_hit_1d(x, x2, 2 * D * h)
        else:
            xm = _radial_step(x, s, rng)
            x2 = _radial_step(xm, s, rng)
            p1, p2 = _bridge_hit_sphere(x, xm, R, D * h), _bridge_hit_sphere(xm, x2, R, D * h)
            pc = _bridge_hit_sphere(x, x2, R, 2 * D * h)
        u = rng.random(n)
        fine_hit |= u < 1.0 - (1.0 - p1) * (1.0 - p2)
        coarse_hit |= u < pc
        x = x2
    return coarse_hit.mean(), fine_hit.mean()
