"""Experiment runners.  Each takes a validated config and returns a ResultTable.

Randomness is drawn from generators seeded by ``SeedSequence([seed, ...])``
with a fixed key per sweep point and series, so a table depends only on the
config (including its seed).
"""

from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np
from scipy.integrate import trapezoid

from ..channel import channel_taps, pathloss_report, sir
from ..detection import (
    DetectorConfig,
    apply_noise,
    dff_detect,
    diff_detect,
    map_detect,
    mmse_equalize,
    molecules_for_snr,
    snr,
)
from ..fec import (
    REFERENCE_MOCO_CODEBOOK,
    TABLE_421,
    Codebook,
    DriftTranspositionModel,
    dhw_codebook,
    dhw_decode,
    isifree_decode,
    isifree_encode,
    moco_decode,
    moco_objective,
    moco_search,
    rm84_codebook,
    rm84_decode,
    transposition_channel,
)
from ..modulation import CarrierConfig, annihilated_response, passband_signal, pulse_response, shaped_pulse, spectrum
from ..particles import SimConfig, max_stable_step, simulate
from .config import config_hash
from .results import ResultTable, batch_stderr, git_describe


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def _metadata(cfg, started, **extra):
    meta = {
        "experiment": cfg.experiment,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "git_describe": git_describe(),
        "runtime_s": time.perf_counter() - started,
    }
    meta.update(extra)
    return meta


def half_life_label(half_life: float) -> str:
    return "lambda0" if math.isinf(half_life) else f"halflife{half_life:g}s"


# -- SIR vs symbol period -------------------------------------------------------------


def run_sir_sweep(cfg) -> ResultTable:
    started = time.perf_counter()
    ts = np.array(cfg.symbol_periods_s)
    table = ResultTable("t_s_s", ts)
    base = cfg.channel.params()
    for h in cfg.half_lives_s:
        params = base.with_half_life(h)
        table.add(half_life_label(h), "sir", [sir(params, t) for t in ts])
    if cfg.monte_carlo_particles:
        for j, h in enumerate(cfg.half_lives_s):
            params = base.with_half_life(h)
            dt = cfg.monte_carlo_time_step_s or max_stable_step(params)
            sim = SimConfig(dt, float(ts.max()), cfg.monte_carlo_particles, rng_seed=cfg.seed * 1000 + j)
            rec = simulate(params, sim)
            times = rec.absorption_times
            vals, errs = [], []
            for t in ts:
                hit = (times <= t * (1 + 1e-12)).astype(float)
                vals.append(hit.mean())
                errs.append(batch_stderr(hit, cfg.batches))
            table.add("mc_" + half_life_label(h), "signal", vals, errs)
    table.metadata = _metadata(cfg, started, half_lives_s=[repr(h) for h in cfg.half_lives_s])
    return table


# -- coding over the transposition channel ---------------------------------------------


def _fec_errors(code, cfg, rng, model, codebooks):
    """Block-error indicator per codeword, one contiguous stream per batch."""
    n_cw = cfg.codewords_per_point
    sizes = [len(b) for b in np.array_split(np.arange(n_cw), cfg.batches)]
    out = []
    for size in sizes:
        if size == 0:
            continue
        if code == "rm84":
            msg = rng.integers(0, 2, (size, 4), dtype=np.uint8)
            stream = rm84_codebook().encode(msg).ravel()
            rx = transposition_channel(stream, model, rng).reshape(-1, 8)
            out.append(np.any(rm84_decode(rx) != msg, axis=1))
        elif code in ("dhw", "moco", "moco_search", "moco_noguard"):
            cb = codebooks[code]
            m = rng.integers(0, cb.size, size)
            rx = transposition_channel(cb.codewords[m].ravel(), model, rng).reshape(-1, cb.n)
            dec = dhw_decode(rx, cb) if code == "dhw" else moco_decode(rx, cb, model)
            out.append(dec != m)
        elif code == "isifree":
            m = rng.integers(0, 2**TABLE_421.k, size)
            rx = transposition_channel(isifree_encode(m, TABLE_421), model, rng)
            out.append(isifree_decode(rx, TABLE_421) != m)
        else:
            raise ValueError(f"unknown code {code!r}")
    return np.concatenate(out)


# Reference MoCo code with its trailing 0 set to 1, to measure what that bit buys.
NOGUARD_MOCO_CODEBOOK = Codebook(REFERENCE_MOCO_CODEBOOK.codewords | np.array([0, 0, 0, 1], dtype=np.uint8), 2, "moco-noguard")


def run_fec_vs_drift(cfg) -> ResultTable:
    started = time.perf_counter()
    v_axis = np.array(cfg.drifts_um_per_s)
    table = ResultTable("v_um_per_s", v_axis)
    rates = {c: [] for c in cfg.codes}
    errs = {c: [] for c in cfg.codes}
    searched = {}
    d, D = cfg.channel.distance_um, cfg.channel.diffusivity_um2_per_s
    for i, v in enumerate(v_axis):
        model = DriftTranspositionModel(
            d, D, float(v), cfg.symbol_period_s, cfg.moco_trials, seed=cfg.seed * 7919 + i, mode=cfg.receiver_mode
        )
        codebooks = {"dhw": dhw_codebook(4, size=4), "moco": REFERENCE_MOCO_CODEBOOK, "moco_noguard": NOGUARD_MOCO_CODEBOOK}
        if "moco_search" in cfg.codes:
            found = moco_search(4, 4, model)
            codebooks["moco_search"] = found
            searched[repr(float(v))] = {
                "codebook": found.words(),
                "objective": moco_objective(found, model),
                "reference_objective": moco_objective(REFERENCE_MOCO_CODEBOOK, model),
                "matches_reference": sorted(found.words()) == sorted(REFERENCE_MOCO_CODEBOOK.words()),
            }
        for j, code in enumerate(cfg.codes):
            e = _fec_errors(code, cfg, _rng(cfg.seed, 1, i, j), model, codebooks).astype(float)
            rates[code].append(e.mean())
            errs[code].append(batch_stderr(e, cfg.batches))
    for code in cfg.codes:
        table.add(code, "block_error", rates[code], errs[code])
    table.metadata = _metadata(cfg, started, reference_moco=REFERENCE_MOCO_CODEBOOK.words(), moco_search=searched)
    return table


# -- detector comparison ---------------------------------------------------------------


def detector_labels(cfg) -> list[tuple[str, str, int]]:
    """(label, detector, memory) for every series of a detector comparison."""
    out = []
    for det in cfg.detectors:
        if det == "diff":
            out.append(("diff", "diff", 0))
        else:
            out += [(f"{det}_I{I}", det, I) for I in cfg.memory_lengths]
    return out


_DETECT = {"map": map_detect, "mmse": mmse_equalize, "dff": dff_detect, "diff": diff_detect}


def detector_errors(cfg):
    """Per-bit error indicators for every detector at every SNR point.

    Bits and noise draws are shared across detectors (paired) and the same
    noise generator state is reused at every SNR point (common random
    numbers).  Returns ``(taps, molecules, errors)`` where ``errors[label]`` has
    shape (n_snr, bits).
    """
    params = cfg.channel.params()
    taps = channel_taps(params, cfg.symbol_period_s, cfg.tap_count)
    n_frames = math.ceil(cfg.bits_per_point / cfg.frame_length)
    bits = _rng(cfg.seed, 2, 0).integers(0, 2, (n_frames, cfg.frame_length))
    labels = detector_labels(cfg)
    errors = {lab: np.zeros((len(cfg.snr_db), cfg.bits_per_point), dtype=bool) for lab, _, _ in labels}
    molecules = []
    for p, s in enumerate(cfg.snr_db):
        M = molecules_for_snr(taps, s)
        molecules.append(M)
        frame = apply_noise(bits, taps, M, cfg.noise_model, _rng(cfg.seed, 2, 1), cfg.awgn_variance)
        for lab, det, I in labels:
            dcfg = DetectorConfig(I, taps, cfg.difference_threshold_fraction * M * taps.peak)
            decided = _DETECT[det](frame, dcfg)
            errors[lab][p] = (decided != bits).ravel()[: cfg.bits_per_point]
    return taps, molecules, errors


def run_detector_comparison(cfg) -> ResultTable:
    started = time.perf_counter()
    taps, molecules, errors = detector_errors(cfg)
    table = ResultTable("snr_db", cfg.snr_db)
    for lab, e in errors.items():
        table.add(lab, "ber", e.mean(1), [batch_stderr(row, cfg.batches) for row in e])
    claim = {}
    if "diff" in errors:
        for lab in errors:
            if lab != "diff" and lab.endswith("_I10"):
                better = [repr(float(s)) for s, a, b in zip(cfg.snr_db, errors["diff"].mean(1), errors[lab].mean(1)) if a < b]
                claim[f"diff_below_{lab}_at_snr_db"] = better
    table.metadata = _metadata(
        cfg,
        started,
        molecules_per_bit=molecules,
        achieved_snr_db=[snr(taps, M) for M in molecules],
        taps=taps.taps,
        noncoherent_claim=claim,
    )
    return table


# -- passband spectrum -----------------------------------------------------------------


def carrier_peaks(spec, carriers):
    """For each carrier, the nearest spectral local maximum and its offset in bins."""
    maxima = spec.local_maxima()
    out = []
    for f in carriers:
        j = int(np.argmin(np.abs(maxima - f))) if maxima.size else None
        peak = float(maxima[j]) if j is not None else math.nan
        out.append({"carrier_hz": f, "peak_hz": peak, "offset_bins": abs(peak - f) / spec.resolution})
    return out


def run_passband_spectrum(cfg) -> ResultTable:
    started = time.perf_counter()
    params = cfg.channel.params()
    carrier = CarrierConfig(cfg.channel.distance_um, cfg.amplitude_um, tuple(cfg.carrier_frequencies_hz), cfg.emission_rate_per_s)
    t, rate = passband_signal(carrier, params, cfg.duration_s, cfg.sample_rate_hz)
    trace = rate[t >= cfg.warmup_s]
    spec = spectrum(trace, cfg.sample_rate_hz)
    table = ResultTable("frequency_hz", spec.frequencies)
    table.add("rx", "magnitude", spec.magnitude)
    table.metadata = _metadata(
        cfg, started, bin_width_hz=spec.resolution, carrier_peaks=carrier_peaks(spec, cfg.carrier_frequencies_hz)
    )
    return table


# -- pathloss ------------------------------------------------------------------------------


PATHLOSS_FIELDS = (
    "peak_time",
    "peak_hitting_amplitude",
    "peak_absorbing_amplitude",
    "total_hitting_response",
    "total_fraction",
    "em_pathloss",
    "em_arrival_time",
)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def run_pathloss_table(cfg) -> ResultTable:
    started = time.perf_counter()
    d_axis = np.array(cfg.distances_um)
    base = cfg.channel.params()
    reports = [pathloss_report(replace(base, distance=float(d)), cfg.em_frequency_hz) for d in d_axis]
    table = ResultTable("d_um", d_axis)
    slopes = {}
    for name in PATHLOSS_FIELDS:
        vals = np.array([getattr(r, name) for r in reports])
        table.add(name, "value", vals)
        if np.all(vals > 0) and d_axis.size > 1:
            slopes[name] = loglog_slope(d_axis, vals)
    table.metadata = _metadata(cfg, started, loglog_slopes=slopes)
    return table


# -- pulse shaping -------------------------------------------------------------------------


def pulse_tail_reduction(params, symbol_period, cutoff_fraction=0.01, horizon=1.0, samples_per_feature=20):
    """Post-peak tail integral of the unshaped vs shaped (annihilated) response."""
    eps = cutoff_fraction * symbol_period
    dt = min(eps, params.peak_time) / samples_per_feature
    n = int(round(horizon / dt)) + 1
    grid = np.arange(n) * dt
    pulse = shaped_pulse(params.distance, params.diffusivity, grid, eps)
    info, _ = pulse_response(params, pulse)
    net = annihilated_response(params, pulse)
    k = int(np.argmax(info))
    tail_info = float(trapezoid(info[k:], grid[k:]))
    tail_net = float(trapezoid(net[k:], grid[k:]))
    return {
        "tail_unshaped": tail_info,
        "tail_shaped": tail_net,
        "reduction": 1.0 - tail_net / tail_info,
        "peak_ratio": float(net[k] / info[k]),
    }


def run_pulse_shaping(cfg) -> ResultTable:
    started = time.perf_counter()
    ts = np.array(cfg.symbol_periods_s)
    params = cfg.channel.params()
    rows = [pulse_tail_reduction(params, t, cfg.cutoff_fraction, cfg.horizon_s, cfg.samples_per_feature) for t in ts]
    table = ResultTable("t_s_s", ts)
    for key in ("tail_unshaped", "tail_shaped", "reduction", "peak_ratio"):
        table.add(key, "value", [r[key] for r in rows])
    table.metadata = _metadata(cfg, started)
    return table


RUNNERS = {
    "sir_sweep": run_sir_sweep,
    "fec_vs_drift": run_fec_vs_drift,
    "detector_comparison": run_detector_comparison,
    "passband_spectrum": run_passband_spectrum,
    "pathloss_table": run_pathloss_table,
    "pulse_shaping": run_pulse_shaping,
}


def run_experiment(cfg) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg)
