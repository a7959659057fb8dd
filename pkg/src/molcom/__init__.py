"""Diffusion-based molecular communication: channel models, a particle
simulator, modulation, channel codes and receivers."""

from .channel import (
    ChannelParams,
    PathlossReport,
    TapVector,
    absorb_cdf,
    absorb_cdf_degraded,
    absorb_rate,
    channel_taps,
    half_life_from_rate,
    hitting_pdf,
    pathloss_report,
    rate_from_half_life,
    sir,
    transfer_gain,
)
from .detection import (
    DetectorConfig,
    ReceivedFrame,
    apply_noise,
    dff_detect,
    diff_detect,
    map_detect,
    mmse_equalize,
    snr,
)
from .particles import ArrivalRecord, SimConfig, empirical_cdf, simulate

__version__ = "0.1.0"
