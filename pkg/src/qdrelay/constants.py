"""Physical constants and the single place where unit conversion happens.

Internal units: time in picoseconds, energy in micro-electronvolts.
"""

import math

HBAR_EV_S = 6.582119569e-16
PLANCK_EV_S = 2.0 * math.pi * HBAR_EV_S

_UEV_PER_EV = 1e6
_PS_PER_S = 1e12

#: reduced Planck constant in ueV * ps
HBAR = HBAR_EV_S * _UEV_PER_EV * _PS_PER_S
#: Planck constant in ueV * ps
PLANCK = PLANCK_EV_S * _UEV_PER_EV * _PS_PER_S

PS_PER_NS = 1e3
PS_PER_S = _PS_PER_S


def phase_rate(fss):
    """Angular rate (rad/ps) of the two-photon phase for a splitting in ueV."""
    return fss / HBAR


def beat_period(fss):
    """Period in ps over which the two-photon phase advances by 2*pi."""
    return PLANCK / fss


def rate_per_ps(counts_per_s):
    return counts_per_s / PS_PER_S
