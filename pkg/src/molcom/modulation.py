"""Bit-to-emission mapping for baseband schemes, transmit pulse shaping and
the oscillating-transmitter passband model."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import fftconvolve

from .channel import ChannelParams, absorb_cdf, absorb_rate

SCHEMES = ("BCSK", "MCSK_M_ary", "PPM", "FSK", "MoSK", "MCSK2", "MTSK")
FSK_SAMPLES_PER_CYCLE = 20
_TWO_TYPE_SCHEMES = ("MoSK", "MCSK2", "MTSK")


@dataclass(frozen=True)
class Frame:
    symbol_period: float
    molecules_per_symbol: int

    def __post_init__(self):
        if not self.symbol_period > 0:
            raise ValueError(f"symbol_period must be > 0, got {self.symbol_period}")
        if self.molecules_per_symbol < 0:
            raise ValueError("molecules_per_symbol must be >= 0")


@dataclass(frozen=True)
class Emission:
    time: float
    molecule_type: str
    count: int


@dataclass
class EmissionSchedule:
    events: list[Emission]
    frame: Frame
    alphabet: tuple[str, ...] = ("A",)

    def __post_init__(self):
        prev = 0.0
        for ev in self.events:
            if ev.time < 0 or ev.time < prev:
                raise ValueError("emission times must be nonnegative and nondecreasing")
            if ev.count < 0:
                raise ValueError("emission counts must be >= 0")
            if ev.molecule_type not in self.alphabet:
                raise ValueError(f"molecule type {ev.molecule_type!r} not in alphabet {self.alphabet}")
            prev = ev.time

    def __len__(self):
        return len(self.events)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events])

    @property
    def types(self) -> list[str]:
        return [e.molecule_type for e in self.events]

    def slot_counts(self, n_slots: int) -> dict[str, np.ndarray]:
        """Molecules emitted per slot, by molecule type."""
        out = {a: np.zeros(n_slots, dtype=np.int64) for a in self.alphabet}
        ts = self.frame.symbol_period
        for ev in self.events:
            k = int(math.floor(ev.time / ts + 1e-9))
            if k < n_slots:
                out[ev.molecule_type][k] += ev.count
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_s", "type", "count"])
            for ev in self.events:
                w.writerow([repr(float(ev.time)), ev.molecule_type, int(ev.count)])

    @classmethod
    def from_csv(cls, path, frame: Frame, alphabet=None) -> "EmissionSchedule":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        events = [Emission(float(r["time_s"]), r["type"], int(r["count"])) for r in rows]
        if alphabet is None:
            alphabet = tuple(dict.fromkeys(e.molecule_type for e in events)) or ("A",)
        return cls(events, frame, tuple(alphabet))


def _check_bits(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size == 0:
        raise ValueError("bit sequence must be non-empty")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    return bits


def modulate(
    scheme: str,
    bits,
    frame: Frame,
    *,
    alphabet: tuple[str, ...] = ("A", "B"),
    ppm_delay: float | None = None,
    fsk_frequency: float | None = None,
    levels: int = 4,
) -> EmissionSchedule:
    """Map ``bits`` to an emission schedule under ``scheme``.

    Args:
        scheme: one of ``SCHEMES``.
        bits: 0/1 sequence.
        frame: symbol period and molecules per on-symbol.
        alphabet: molecule types; two-type schemes use the first two entries.
        ppm_delay: PPM offset T for bit 1 (bit 0 is sent at slot start).
            Must satisfy T <= t_s/2 so slots can be demapped.
        fsk_frequency: burst frequency f for bit 1 under FSK; bit 0 is f=0,
            i.e. silence.  Requires f * t_s >= 1.
        levels: number of amplitude levels for M-ary CSK (a power of two).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    bits = _check_bits(bits)
    alphabet = tuple(alphabet)
    if scheme in _TWO_TYPE_SCHEMES and len(alphabet) < 2:
        raise ValueError(f"{scheme} needs at least two molecule types, got {alphabet}")
    if not alphabet:
        raise ValueError("alphabet must contain at least one molecule type")
    ts, M = frame.symbol_period, frame.molecules_per_symbol
    a, b = alphabet[0], alphabet[1] if len(alphabet) > 1 else alphabet[0]
    events: list[Emission] = []

    if scheme == "BCSK":
        events = [Emission(k * ts, a, M) for k in np.flatnonzero(bits)]
    elif scheme == "MCSK_M_ary":
        width = int(round(math.log2(levels)))
        if levels < 2 or 2**width != levels:
            raise ValueError(f"levels must be a power of two >= 2, got {levels}")
        if bits.size % width:
            raise ValueError(f"{levels}-ary CSK needs a multiple of {width} bits")
        symbols = bits.reshape(-1, width) @ (1 << np.arange(width)[::-1])
        for k, s in enumerate(symbols):
            count = int(round(s * M / (levels - 1)))
            if count:
                events.append(Emission(k * ts, a, count))
    elif scheme == "PPM":
        if ppm_delay is None or not 0 < ppm_delay <= ts / 2:
            raise ValueError("PPM needs 0 < ppm_delay <= symbol_period / 2")
        events = [Emission(k * ts + bit * ppm_delay, a, M) for k, bit in enumerate(bits)]
    elif scheme == "FSK":
        if fsk_frequency is None or fsk_frequency * ts < 1:
            raise ValueError("FSK needs fsk_frequency with at least one cycle per symbol")
        events = _fsk_events(bits, ts, M, fsk_frequency, a)
    elif scheme == "MoSK":
        events = [Emission(k * ts, b if bit else a, M) for k, bit in enumerate(bits)]
    elif scheme == "MCSK2":
        # Slots are numbered from 1: odd slots use the first type.
        events = [Emission(k * ts, a if k % 2 == 0 else b, M) for k in np.flatnonzero(bits)]
    elif scheme == "MTSK":
        for k in np.flatnonzero(bits):
            last_of_run = k + 1 < bits.size and bits[k + 1] == 0
            events.append(Emission(k * ts, b if last_of_run else a, M))
    return EmissionSchedule(events, frame, alphabet)


def _fsk_events(bits, ts, M, f, molecule_type):
    dt = 1.0 / (FSK_SAMPLES_PER_CYCLE * f)
    offsets = np.arange(0.0, ts - 1e-12, dt)
    shape = np.clip(np.sin(2.0 * np.pi * f * offsets), 0.0, None)
    # Total per on-symbol is capped at M; floor keeps counts integral.
    counts = np.floor(M * shape / shape.sum()).astype(np.int64)
    events = []
    for k in np.flatnonzero(bits):
        events += [Emission(k * ts + o, molecule_type, int(c)) for o, c in zip(offsets, counts) if c > 0]
    return events


def demodulate(scheme: str, schedule: EmissionSchedule, n_bits: int, *, ppm_delay: float | None = None) -> np.ndarray:
    """Noiseless demapper: recover bits from the emissions observed per slot."""
    ts = schedule.frame.symbol_period
    alphabet = schedule.alphabet
    if scheme == "MCSK_M_ary":
        raise ValueError("use demodulate_mary for M-ary CSK")
    if scheme == "PPM":
        if ppm_delay is None:
            raise ValueError("PPM demapping needs ppm_delay")
        bits = np.zeros(n_bits, dtype=np.int64)
        for ev in schedule.events:
            k = int(math.floor(ev.time / ts + 1e-9))
            offset = ev.time - k * ts
            bits[k] = int(offset > ppm_delay / 2)
        return bits
    if scheme == "MoSK":
        counts = schedule.slot_counts(n_bits)
        return (counts[alphabet[1]] > 0).astype(np.int64)
    counts = schedule.slot_counts(n_bits)
    total = sum(counts.values())
    return (total > 0).astype(np.int64)


def demodulate_mary(schedule: EmissionSchedule, n_bits: int, levels: int = 4) -> np.ndarray:
    width = int(round(math.log2(levels)))
    n_sym = n_bits // width
    counts = sum(schedule.slot_counts(n_sym).values())
    M = schedule.frame.molecules_per_symbol
    symbols = np.rint(counts * (levels - 1) / M).astype(np.int64)
    return ((symbols[:, None] >> np.arange(width)[::-1]) & 1).ravel()


# -- transmit-side pulse shaping ----------------------------------------------


def poison_tail(d: float, D: float, t):
    """Negative tail -(d / sqrt(D)) t^(-3/2) of the channel-inverting pulse."""
    t = np.asarray(t, dtype=float)
    out = -(d / math.sqrt(D)) * t**-1.5
    return float(out) if out.ndim == 0 else out


@dataclass
class ShapedPulse:
    """Sampled transmit pulse as per-bin molecule masses.

    ``information`` holds the unit impulse (first bin); ``poison`` holds the
    magnitude of the negative tail, emitted as a separate molecule type.
    """

    times: np.ndarray = field(repr=False)
    information: np.ndarray = field(repr=False)
    poison: np.ndarray = field(repr=False)
    cutoff: float = 0.0
    information_type: str = "A"
    poison_type: str = "poison"

    @property
    def net(self) -> np.ndarray:
        return self.information - self.poison


def shaped_pulse(d: float, D: float, grid, cutoff: float) -> ShapedPulse:
    if not cutoff > 0:
        raise ValueError("cutoff must be > 0: the pulse tail diverges at t = 0")
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("grid must be an increasing 1-D time grid starting at or after 0")
    dt = np.diff(t, append=t[-1] + (t[-1] - t[-2]))
    info = np.zeros_like(t)
    info[0] = 1.0
    poison = np.zeros_like(t)
    on = t >= cutoff
    poison[on] = -poison_tail(d, D, t[on]) * dt[on]
    return ShapedPulse(t, info, poison, cutoff)


def default_cutoff(symbol_period: float) -> float:
    return symbol_period / 100.0


def pulse_response(params: ChannelParams, pulse: ShapedPulse) -> tuple[np.ndarray, np.ndarray]:
    """Receiver-side arrival rate for the information and poison species.

    Each species is the sampled channel impulse response convolved with its
    emitted masses on the pulse grid (uniform spacing assumed).
    """
    t = pulse.times
    h = np.zeros_like(t)
    h[t > 0] = absorb_rate(params, t[t > 0])
    n = t.size
    return fftconvolve(pulse.information, h)[:n], fftconvolve(pulse.poison, h)[:n]


def annihilated_response(params: ChannelParams, pulse: ShapedPulse) -> np.ndarray:
    """Net information rate after 1:1 annihilation with poison molecules."""
    info, poison = pulse_response(params, pulse)
    return np.clip(info - poison, 0.0, None)


# -- passband ---------------------------------------------------------------------


@dataclass(frozen=True)
class CarrierConfig:
    base_distance: float
    amplitude: float
    carrier_frequencies: tuple[float, ...]
    emission_rate: float

    def __post_init__(self):
        if not 0 <= self.amplitude < self.base_distance:
            raise ValueError("need 0 <= amplitude < base_distance")
        freqs = tuple(self.carrier_frequencies)
        if not freqs or any(f <= 0 for f in freqs):
            raise ValueError("carrier frequencies must be positive")
        if len(set(freqs)) != len(freqs):
            raise ValueError("carrier frequencies must be distinct")
        if self.emission_rate < 0:
            raise ValueError("emission_rate must be >= 0")


def passband_signal(cfg: CarrierConfig, params: ChannelParams, duration: float, sample_rate: float):
    """Received molecule-arrival rate from N oscillating transmitters.

    Stream i sits at distance d0 - A sin(2 pi f_i t).  A molecule keeps the
    distance it was emitted at for its whole flight (quasi-static).  Emissions
    are lumped at the sample instants and arrivals are averaged over each
    sample interval, so the kernel is the absorption probability per interval
    (CDF differences) rather than the point rate, which would badly
    undersample impulse responses narrower than 1/sample_rate.

    Returns ``(times, rate)``.
    """
    if sample_rate <= 4.0 * max(cfg.carrier_frequencies):
        raise ValueError("sample_rate must exceed 4 x the highest carrier frequency")
    n = int(round(duration * sample_rate))
    if n < 2:
        raise ValueError("duration too short for the sample rate")
    t = np.arange(n) / sample_rate
    edges = np.arange(n) / sample_rate
    idx = np.arange(n)
    rate = np.zeros(n)
    for f in cfg.carrier_frequencies:
        dist = cfg.base_distance - cfg.amplitude * np.sin(2.0 * np.pi * f * t)
        # kernel[m, L-1]: fraction of sample m's molecules absorbed in interval L.
        kernel = np.empty((n, n - 1))
        for m, d in enumerate(dist):
            kernel[m] = np.diff(absorb_cdf(replace(params, distance=float(d)), edges))
        for m_lag in range(1, n):
            rate[m_lag:] += cfg.emission_rate * kernel[idx[: n - m_lag], m_lag - 1]
    return t, rate


@dataclass
class Spectrum:
    frequencies: np.ndarray = field(repr=False)
    magnitude: np.ndarray = field(repr=False)
    n_samples: int = 0

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0]) if self.frequencies.size > 1 else math.inf

    def energy(self) -> float:
        """Time-domain energy recovered from the one-sided spectrum (Parseval)."""
        w = np.full(self.magnitude.size, 2.0)
        w[0] = 1.0
        if self.n_samples % 2 == 0:
            w[-1] = 1.0
        return float(np.sum(w * self.magnitude**2) / self.n_samples)

    def local_maxima(self) -> np.ndarray:
        m = self.magnitude
        inner = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] > m[2:])) + 1
        return self.frequencies[inner]


def spectrum(trace, sample_rate: float = 1.0) -> Spectrum:
    """One-sided DFT magnitude, DC bin first."""
    x = np.asarray(trace, dtype=float)
    if x.size == 0:
        raise ValueError("empty trace")
    return Spectrum(np.fft.rfftfreq(x.size, 1.0 / sample_rate), np.abs(np.fft.rfft(x)), x.size)


def bandpass(trace, sample_rate: float, low: float, high: float) -> np.ndarray:
    """Ideal FFT-mask bandpass keeping components in [low, high] Hz."""
    x = np.asarray(trace, dtype=float)
    X = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    X[(f < low) | (f > high)] = 0.0
    return np.fft.irfft(X, n=x.size)
