"""RF link budget: line-of-sight, free-space path loss, SNR, Shannon rate, delays.

All dB/dBm quantities live in the parameter set and are converted to linear
scale inside the formulas. A blocked geometry yields infinite path loss, zero
SNR, and no transfer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .orbital import EARTH, BodyConstants, EciPosition


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(ratio: float) -> float:
    if ratio <= 0:
        raise ValueError("dB conversion needs a positive ratio")
    return 10.0 * math.log10(ratio)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class LinkParams:
    """Radio parameters shared by every link in a run.

    `fixed_rate` selects the rate mode: a prescribed bit rate when set, the
    Shannon capacity of the link when None.
    """

    tx_power_dbm: float = 40.0
    tx_gain_dbi: float = 6.98
    rx_gain_dbi: float = 6.98
    carrier_freq: float = 2.4e9          # Hz
    noise_temp: float = 354.81           # K
    bandwidth: float = 1.0e6             # Hz
    boltzmann: float = 1.380649e-23      # J/K
    fixed_rate: float | None = 16.0e6    # bits/s, None -> Shannon mode
    proc_delay_tx: float = 0.010         # s
    proc_delay_rx: float = 0.010         # s
    earth_clearance: float = 0.0         # m added to the grazing radius

    def __post_init__(self) -> None:
        for name in ("carrier_freq", "noise_temp", "bandwidth", "boltzmann"):
            if getattr(self, name) <= 0:
                raise ValueError(f"LinkParams.{name} must be strictly positive")
        if self.fixed_rate is not None and self.fixed_rate <= 0:
            raise ValueError("fixed_rate must be positive or None")
        if self.proc_delay_tx < 0 or self.proc_delay_rx < 0:
            raise ValueError("processing delays must be non-negative")
        if self.earth_clearance < 0:
            raise ValueError("earth_clearance must be non-negative")

    @property
    def proc_delay_total(self) -> float:
        return self.proc_delay_tx + self.proc_delay_rx


def line_of_sight(a: EciPosition, b: EciPosition,
                  constants: BodyConstants = EARTH,
                  clearance: float = 0.0) -> bool:
    """True iff segment [a, b] clears the sphere of radius R_E + clearance.

    The grazing case (closest approach exactly at the clearance radius) counts
    as visible.
    """
    pa = a.as_array()
    pb = b.as_array()
    d = pb - pa
    seg_len2 = float(np.dot(d, d))
    if seg_len2 == 0.0:
        raise ValueError("line of sight between coincident points is undefined")
    # closest point of the segment to the Earth's center (origin)
    s = -float(np.dot(pa, d)) / seg_len2
    s = min(1.0, max(0.0, s))
    closest = pa + s * d
    # grazing counts as visible; the epsilon absorbs rounding for endpoints
    # sitting exactly on the grazing sphere (e.g. a ground station)
    threshold = (constants.earth_radius + clearance) * (1.0 - 1e-12)
    return float(np.linalg.norm(closest)) >= threshold


def free_space_path_loss(a: EciPosition, b: EciPosition, freq: float,
                         constants: BodyConstants = EARTH,
                         clearance: float = 0.0) -> float:
    """Linear free-space path loss (4*pi*d*f/c)^2; math.inf when blocked."""
    dist = a.distance_to(b)
    if dist == 0.0:
        raise ValueError("path loss between coincident points is undefined")
    if not line_of_sight(a, b, constants, clearance):
        return math.inf
    return (4.0 * math.pi * dist * freq / constants.light_speed) ** 2


def snr(params: LinkParams, a: EciPosition, b: EciPosition,
        constants: BodyConstants = EARTH) -> float:
    """Linear signal-to-noise ratio of the a->b link; 0 when blocked."""
    loss = free_space_path_loss(a, b, params.carrier_freq, constants,
                                params.earth_clearance)
    if math.isinf(loss):
        return 0.0
    p_tx = dbm_to_watts(params.tx_power_dbm)
    gain = db_to_linear(params.tx_gain_dbi) * db_to_linear(params.rx_gain_dbi)
    noise = params.boltzmann * params.noise_temp * params.bandwidth
    return p_tx * gain / (noise * loss)


def shannon_rate(bandwidth: float, snr_linear: float) -> float:
    """Shannon capacity B * log2(1 + SNR) in bits/s."""
    if snr_linear < 0:
        raise ValueError("SNR must be non-negative")
    return bandwidth * math.log2(1.0 + snr_linear)


def link_rate(params: LinkParams, a: EciPosition, b: EciPosition,
              constants: BodyConstants = EARTH) -> float:
    """Data rate in bits/s: the prescribed rate, or Shannon capacity."""
    if params.fixed_rate is not None:
        return params.fixed_rate
    return shannon_rate(params.bandwidth, snr(params, a, b, constants))


def transfer_delay(params: LinkParams, a: EciPosition, b: EciPosition,
                   payload_bits: float,
                   constants: BodyConstants = EARTH) -> float | None:
    """Total delay of moving `payload_bits` from a to b, or None when blocked.

    Composes transmission (payload/rate), propagation (distance/c), and the
    per-endpoint processing delays. A fixed-rate override never applies to a
    blocked geometry.
    """
    if payload_bits <= 0:
        raise ValueError("payload must be positive")
    if not line_of_sight(a, b, constants, params.earth_clearance):
        return None
    rate = link_rate(params, a, b, constants)
    if rate <= 0:
        return None
    t_t = payload_bits / rate
    t_p = a.distance_to(b) / constants.light_speed
    return t_t + t_p + params.proc_delay_total


def great_circle_distance(a: EciPosition, b: EciPosition) -> float:
    """Arc length between a and b along the sphere of their mean radius."""
    pa = a.as_array()
    pb = b.as_array()
    angle = math.atan2(float(np.linalg.norm(np.cross(pa, pb))),
                       float(np.dot(pa, pb)))
    return angle * 0.5 * (a.norm() + b.norm())


def ring_transfer_delay(params: LinkParams, a: EciPosition, b: EciPosition,
                        payload_bits: float,
                        constants: BodyConstants = EARTH) -> float:
    """Delay on the platform-ring backbone between neighboring platforms.

    The ring is an ideal backbone: no horizon test, propagation along the
    great circle instead of the chord. Transmission and processing delays
    follow the regular delay composition.
    """
    if payload_bits <= 0:
        raise ValueError("payload must be positive")
    if params.fixed_rate is not None:
        rate = params.fixed_rate
    else:
        dist = a.distance_to(b)
        loss = (4.0 * math.pi * dist * params.carrier_freq
                / constants.light_speed) ** 2
        p_tx = dbm_to_watts(params.tx_power_dbm)
        gain = db_to_linear(params.tx_gain_dbi) * db_to_linear(params.rx_gain_dbi)
        noise = params.boltzmann * params.noise_temp * params.bandwidth
        rate = shannon_rate(params.bandwidth, p_tx * gain / (noise * loss))
    t_t = payload_bits / rate
    t_p = great_circle_distance(a, b) / constants.light_speed
    return t_t + t_p + params.proc_delay_total
