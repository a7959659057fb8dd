"""Closed-form diffusion channel: hitting/first-passage densities, cumulative
absorption, first-order degradation, pathloss measures and channel taps.

Units follow the rest of the package: lengths in micrometres, diffusivity in
um^2/s, times in seconds.  For a 3-D channel ``distance`` is measured from
the transmitter to the receiver *surface*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate
from scipy.special import erfc, erfcx

SPEED_OF_LIGHT = 299_792_458.0  # m/s
QUAD_TOL = 1e-9
TAIL_TOL = 1e-12


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class ChannelParams:
    """Physical description of a point-to-point diffusion channel."""

    distance: float
    diffusivity: float
    receiver_radius: float | None = None
    drift: float = 0.0
    dimension: int = 1
    degradation_rate: float = 0.0

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"distance must be > 0, got {self.distance}")
        if not self.diffusivity > 0:
            raise ValueError(f"diffusivity must be > 0, got {self.diffusivity}")
        if self.dimension not in (1, 3):
            raise ValueError(f"dimension must be 1 or 3, got {self.dimension}")
        if self.dimension == 3 and not (self.receiver_radius and self.receiver_radius > 0):
            raise ValueError("receiver_radius must be > 0 for a 3-D channel")
        if not self.degradation_rate >= 0:
            raise ValueError(f"degradation_rate must be >= 0, got {self.degradation_rate}")
        if not self.drift >= 0:
            raise ValueError(f"drift must be >= 0, got {self.drift}")

    @property
    def half_life(self) -> float:
        if self.degradation_rate == 0:
            return math.inf
        return math.log(2) / self.degradation_rate

    def with_half_life(self, half_life: float) -> "ChannelParams":
        return replace(self, degradation_rate=rate_from_half_life(half_life))

    @property
    def capture_fraction(self) -> float:
        """Geometric factor r_r/(d + r_r); 1 for the 1-D channel."""
        if self.dimension == 1:
            return 1.0
        return self.receiver_radius / (self.distance + self.receiver_radius)

    @property
    def peak_time(self) -> float:
        return self.distance**2 / (6.0 * self.diffusivity)


def rate_from_half_life(half_life: float) -> float:
    if not half_life > 0:
        raise ValueError(f"half-life must be > 0, got {half_life}")
    if math.isinf(half_life):
        return 0.0
    return math.log(2) / half_life


def half_life_from_rate(rate: float) -> float:
    if rate < 0:
        raise ValueError(f"degradation rate must be >= 0, got {rate}")
    return math.inf if rate == 0 else math.log(2) / rate


def _positive_times(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("time must be strictly positive")
    return t


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def hitting_pdf(params: ChannelParams, t):
    """Point-source hitting density (4 pi D t)^(-a/2) exp(-d^2 / 4Dt), a = dimension."""
    t = _positive_times(t)
    d, D = params.distance, params.diffusivity
    a = params.dimension
    out = (4.0 * np.pi * D * t) ** (-a / 2.0) * np.exp(-(d**2) / (4.0 * D * t))
    return _scalar_or_array(out)


def absorb_rate(params: ChannelParams, t, distance=None):
    """First-passage density of an absorbing receiver (molecules/s per emitted molecule).

    Drift only enters the 1-D model, where it shifts the exponent to
    (d - v t)^2.  The 3-D absorbing sphere is drift-free.  ``distance``
    overrides ``params.distance`` and broadcasts against ``t``.
    """
    t = _positive_times(t)
    d = params.distance if distance is None else np.asarray(distance, dtype=float)
    D = params.diffusivity
    v = params.drift if params.dimension == 1 else 0.0
    geom = 1.0 if params.dimension == 1 else params.receiver_radius / (d + params.receiver_radius)
    out = geom * d / np.sqrt(4.0 * np.pi * D * t**3) * np.exp(-((d - v * t) ** 2) / (4.0 * D * t))
    return _scalar_or_array(out)


def absorb_cdf(params: ChannelParams, t):
    """Probability that a molecule is absorbed by time ``t`` (no degradation)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be >= 0")
    d, D = params.distance, params.diffusivity
    v = params.drift if params.dimension == 1 else 0.0
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    root = np.sqrt(4.0 * D * tp)
    cdf = erfc(d / root)
    if v > 0:
        # Inverse-Gaussian form; the e^{vd/D} term is folded into erfcx to avoid overflow.
        x1 = (d - v * tp) / root
        x2 = (d + v * tp) / root
        cdf = 0.5 * erfc(x1) + 0.5 * np.exp(v * d / D - x2**2) * erfcx(x2)
    out[pos] = params.capture_fraction * cdf
    return _scalar_or_array(out)


def _breakpoints(params: ChannelParams, upper: float) -> list[float]:
    # Integrand peaks near d^2/6D and decays like t^-3/2; split on a log grid.
    pts = [0.0]
    b = params.peak_time
    while b < upper:
        pts.append(b)
        b *= 4.0
    pts.append(upper)
    return pts


def _integrate_degraded(params: ChannelParams, lo: float, hi: float, tol: float) -> float:
    lam = params.degradation_rate

    def integrand(u):
        if u <= 0:
            return 0.0
        return absorb_rate(params, u) * math.exp(-lam * u)

    pts = [p for p in _breakpoints(params, hi) if p > lo]
    edges = [lo] + pts
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, err, info = integrate.quad(
            integrand, a, b, epsabs=tol * 1e-3, epsrel=tol, limit=200, full_output=1
        )[:3]
        if err > max(tol, tol * abs(val)) * 10:
            raise QuadratureError(
                f"quadrature on [{a:.6g}, {b:.6g}] did not converge: "
                f"estimate {val:.12g}, error {err:.3g}, tolerance {tol:.1g}"
            )
        total += val
    return total


def absorb_cdf_degraded(params: ChannelParams, t, tol: float = QUAD_TOL):
    """Absorption probability by ``t`` for molecules with exponential lifetimes.

    Integrates absorb_rate(u) * exp(-lambda u) over [0, t].  With a zero
    degradation rate this is exactly :func:`absorb_cdf`.
    """
    if params.degradation_rate == 0:
        return absorb_cdf(params, t)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("time must be >= 0")
    flat = [_integrate_degraded(params, 0.0, float(x), tol) if x > 0 else 0.0 for x in t_arr.ravel()]
    out = np.array(flat).reshape(t_arr.shape)
    return _scalar_or_array(out)


def tail_bound(params: ChannelParams, T: float) -> float:
    """Upper bound on the integral of absorb_rate * exp(-lambda u) over [T, inf)."""
    d, D, lam = params.distance, params.diffusivity, params.degradation_rate
    return params.capture_fraction * d / math.sqrt(4.0 * math.pi * D) * 2.0 * math.exp(-lam * T) / math.sqrt(T)


def truncation_time(params: ChannelParams, tol: float = TAIL_TOL) -> float:
    """Smallest doubling of the peak time whose analytic tail bound is below ``tol``."""
    if params.degradation_rate == 0:
        raise ValueError("tail never truncates without degradation; use absorb_cdf")
    T = params.peak_time
    while tail_bound(params, T) >= tol:
        T *= 2.0
    return T


def degraded_total(params: ChannelParams, tol: float = QUAD_TOL) -> float:
    """Limit of :func:`absorb_cdf_degraded` as t -> infinity."""
    if params.degradation_rate == 0:
        return params.capture_fraction
    return _integrate_degraded(params, 0.0, truncation_time(params), tol)


def sir(params: ChannelParams, t_s: float, tol: float = QUAD_TOL) -> float:
    """Signal-to-interference ratio of the first symbol slot.

    Molecules absorbed within ``t_s`` over those absorbed afterwards.  The
    interference term is integrated directly over [t_s, T_max] rather than
    formed as a difference, so it does not cancel catastrophically.
    """
    if not t_s > 0:
        raise ValueError(f"symbol period must be > 0, got {t_s}")
    signal = absorb_cdf_degraded(params, t_s, tol)
    if params.degradation_rate == 0:
        d, D = params.distance, params.diffusivity
        if params.dimension == 1 and params.drift > 0:
            interference = params.capture_fraction - signal
        else:
            interference = params.capture_fraction * math.erf(d / math.sqrt(4.0 * D * t_s))
    else:
        T = truncation_time(params)
        interference = _integrate_degraded(params, t_s, T, tol) if T > t_s else 0.0
    if interference <= 0.0:
        return math.inf
    return signal / interference


def transfer_gain(d: float, D: float, s):
    """Laplace-domain channel gain exp(-d sqrt(s/D)) on the principal branch."""
    s = np.asarray(s, dtype=complex)
    if np.any(s.real < 0):
        raise ValueError("transfer gain is defined for Re(s) >= 0")
    out = np.exp(-d * np.sqrt(s / D))
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PathlossReport:
    peak_time: float
    peak_hitting_amplitude: float
    peak_absorbing_amplitude: float
    total_hitting_response: float
    total_fraction: float
    em_pathloss: float
    em_arrival_time: float


def pathloss_report(params: ChannelParams, em_frequency: float) -> PathlossReport:
    """Molecular vs. electromagnetic free-space loss at the channel distance.

    Peak values are the densities evaluated at tau = d^2/6D.  The hitting
    amplitude uses the free-space (3-D) point kernel; the absorbing
    amplitude uses the channel's own absorbing receiver.  The EM terms take
    the distance in metres.
    """
    if not em_frequency > 0:
        raise ValueError("em_frequency must be > 0")
    tau = params.peak_time
    d, D = params.distance, params.diffusivity
    free_space = replace(params, dimension=3, receiver_radius=params.receiver_radius or 1.0)
    d_m = d * 1e-6
    return PathlossReport(
        peak_time=tau,
        peak_hitting_amplitude=hitting_pdf(free_space, tau),
        peak_absorbing_amplitude=absorb_rate(params, tau),
        total_hitting_response=1.0 / (4.0 * math.pi * D * d),
        total_fraction=degraded_total(params),
        em_pathloss=(4.0 * math.pi * em_frequency * d_m / SPEED_OF_LIGHT) ** -2,
        em_arrival_time=d_m / SPEED_OF_LIGHT,
    )


@dataclass(frozen=True)
class TapVector:
    """Per-slot absorption probabilities for a molecule released at slot start."""

    symbol_period: float
    taps: np.ndarray = field(repr=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim != 1 or taps.size == 0:
            raise ValueError("taps must be a non-empty 1-D sequence")
        if np.any(taps < 0) or np.any(taps > 1) or taps.sum() > 1 + 1e-12:
            raise ValueError("taps must be probabilities with sum <= 1")
        object.__setattr__(self, "taps", taps)

    def __len__(self):
        return self.taps.size

    @property
    def peak(self) -> float:
        return float(self.taps.max())


def channel_taps(params: ChannelParams, t_s: float, K: int) -> TapVector:
    if not t_s > 0:
        raise ValueError(f"symbol period must be > 0, got {t_s}")
    if K < 1:
        raise ValueError(f"tap count must be >= 1, got {K}")
    edges = np.arange(K + 1) * t_s
    cdf = np.asarray(absorb_cdf_degraded(params, edges))
    return TapVector(t_s, np.clip(np.diff(cdf), 0.0, None))
