"""Wireless link model: path loss, Rayleigh block fading, and the
finite-blocklength achievable rate.

All quantities are handled in linear SI units (W, Hz, m). Decibel values
appear only where the quantity is defined on a dB scale (path loss) or at
configuration boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

_SQRT_PI_HALF = math.sqrt(math.pi) / 2.0
_LN2 = math.log(2.0)
_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class LinkParams:
    """Static link budget of one sensor-to-controller link.

    noise_psd : noise power spectral density N0 in W/Hz (linear).
    bandwidth : system bandwidth W in Hz.
    distance  : sensor-controller distance in m.
    p_max     : per-sensor transmit power budget in W.
    epsilon   : target decoding error probability, in (0, 0.5].
    """

    noise_psd: float
    bandwidth: float
    distance: float
    p_max: float
    epsilon: float

    def __post_init__(self):
        if self.noise_psd <= 0.0:
            raise ValueError("noise_psd must be positive (linear W/Hz)")
        if self.bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")
        if self.distance <= 0.0:
            raise ValueError("distance must be positive")
        if self.p_max <= 0.0:
            raise ValueError("p_max must be positive")
        if not 0.0 < self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in (0, 0.5]")

    @property
    def noise_power(self) -> float:
        """Total noise power N0*W in W."""
        return self.noise_psd * self.bandwidth


@dataclass
class ChannelDraw:
    """One block-fading realization for a scheduled transmission.

    gain combines path loss and fading (linear power gain), snr_at_pmax is
    the SNR obtained at full power, and decode_success is the Bernoulli
    decode outcome (set once the transmission actually happens).
    """

    gain: float
    snr_at_pmax: float
    decode_success: int = 1

    def __post_init__(self):
        if self.gain <= 0.0:
            raise ValueError("channel gain must be positive")
        if self.decode_success not in (0, 1):
            raise ValueError("decode_success must be 0 or 1")


def path_loss_db(distance_m: float) -> float:
    """Indoor-factory path loss in dB at the 2.625 GHz carrier.

    Evaluates ``33 log10(x) + 20 log10(2.625) + 32`` for a distance of
    x meters.
    """
    if distance_m <= 0.0:
        raise ValueError("distance must be positive")
    return 33.0 * math.log10(distance_m) + 20.0 * math.log10(2.625) + 32.0


def sample_channel_gain(rng: np.random.Generator, pl_db: float) -> float:
    """Draw one block-fading channel power gain.

    Rayleigh fading with unit variance gives an exponential power gain with
    unit mean; the mean gain therefore equals the path gain 10^(-pl/10).
    The draw is held constant within a transmission (block fading).
    """
    if not math.isfinite(pl_db):
        raise ValueError("path loss must be finite")
    return 10.0 ** (-pl_db / 10.0) * rng.exponential(1.0)


def erfc_inv(y: float) -> float:
    """Inverse complementary error function on (0, 2).

    A rational initial guess (via the standard normal quantile) is refined
    with Newton steps on ``erfc``; accurate to well below 1e-12 relative.
    """
    if not 0.0 < y < 2.0:
        raise ValueError("erfc_inv requires y in (0, 2)")
    if y == 1.0:
        return 0.0
    # erfc(z) = 2*Phi(-z*sqrt(2)) so z = -Phi^{-1}(y/2)/sqrt(2)
    z = -_STD_NORMAL.inv_cdf(y / 2.0) / math.sqrt(2.0)
    for _ in range(3):
        zz = z * z
        if zz > 650.0:  # e^{z^2} would overflow; guess is already exact here
            break
        step = (math.erfc(z) - y) * _SQRT_PI_HALF * math.exp(zz)
        z += step
        if abs(step) <= 1e-16 * (1.0 + abs(z)):
            break
    return z


def fb_rate(snr: float, blocklength: float, epsilon: float) -> float:
    """Finite-blocklength achievable rate in bits per channel use.

    Shannon capacity minus the dispersion penalty:

        log2(1+g) - sqrt(2 g (g+2)) * erfc_inv(2 eps) / (sqrt(L) (1+g) ln 2)

    The value may be negative at low SNR / short blocklength; callers treat
    a negative rate as infeasible. ``blocklength`` may be fractional (the
    optimizer works on the relaxed problem).
    """
    if snr <= 0.0:
        raise ValueError("snr must be positive")
    if blocklength < 1.0:
        raise ValueError("blocklength must be >= 1")
    if not 0.0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 0.5]")
    capacity = math.log2(1.0 + snr)
    if epsilon == 0.5:
        return capacity
    penalty = (
        math.sqrt(2.0 * snr * (snr + 2.0))
        * erfc_inv(2.0 * epsilon)
        / (math.sqrt(blocklength) * (1.0 + snr) * _LN2)
    )
    return capacity - penalty


def dispersion_coefficient(epsilon: float) -> float:
    """sqrt(2) * erfc_inv(2 eps) / ln 2, the rate-penalty prefactor."""
    if not 0.0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 0.5]")
    return math.sqrt(2.0) * erfc_inv(2.0 * epsilon) / _LN2


def sample_decode(rng: np.random.Generator, epsilon: float) -> int:
    """Bernoulli decode outcome: 1 with probability 1-eps, else 0.

    Drawn once per transmission, for the scheduled sensor only.
    """
    if not 0.0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 0.5]")
    return 1 if rng.random() >= epsilon else 0
