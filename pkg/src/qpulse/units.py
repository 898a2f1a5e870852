"""Unit constants and pulse-normalization helpers.

Internally every time is in seconds and every frequency is angular (rad/s).
"""

from __future__ import annotations

import math

FS = 1e-15
PS = 1e-12
NS = 1e-9
S = 1.0

HZ = 2.0 * math.pi
MHZ = 2.0 * math.pi * 1e6
GHZ = 2.0 * math.pi * 1e9
THZ = 2.0 * math.pi * 1e12

TIME_UNITS = {"s": S, "ns": NS, "ps": PS, "fs": FS}
FREQ_UNITS = {"Hz": HZ, "MHz": MHZ, "GHz": GHZ, "THz": THZ, "rad/s": 1.0}
RATE_UNITS = {"1/s": 1.0, "1/ns": 1.0 / NS, "1/ps": 1.0 / PS, "1/fs": 1.0 / FS}

LN2 = math.log(2.0)


def tl_sigma(tau0: float) -> float:
    """Amplitude standard width T of a TL Gaussian with intensity FWHM ``tau0``.

    |Omega(t)|^2 = exp(-t^2/T^2), so T^2 = tau0^2 / (4 ln 2).
    """
    return tau0 / (2.0 * math.sqrt(LN2))


def spectral_fwhm(tau0: float) -> float:
    """Angular spectral-intensity FWHM Gamma0 of the TL pulse, rad/s.

    Equals 4 ln2 / tau0, i.e. 2*pi * 0.4413 / tau0.
    """
    return 4.0 * LN2 / tau0


def chirped_fwhm(tau0: float, alpha: float) -> float:
    """Intensity FWHM of a linearly chirped Gaussian with spectral chirp ``alpha``."""
    return tau0 * math.sqrt(1.0 + (4.0 * LN2 * alpha / tau0**2) ** 2)


def alpha_from_norm(alpha_norm: float, tau0: float) -> float:
    return alpha_norm * tau0**2


def delta_from_norm(delta_norm: float, tau0: float) -> float:
    return delta_norm * spectral_fwhm(tau0)
