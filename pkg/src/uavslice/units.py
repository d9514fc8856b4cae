"""Unit conventions shared by every module.

Power is carried in mW, bandwidth in Hz and rates in Mbps.  The noise
power spectral density is therefore expressed in mW/Hz so that
``p_mw * gain / (n0_mw_per_hz * w_hz)`` is dimensionless.
"""

import math

MBPS = 1e6          # bit/s per Mbps
MHZ = 1e6           # Hz per MHz
KM = 1000.0         # m per km
SPEED_OF_LIGHT = 299_792_458.0
LN2 = math.log(2.0)


def db_to_lin(db):
    return 10.0 ** (db / 10.0)


def lin_to_db(lin):
    return 10.0 * math.log10(lin)


def dbm_per_hz_to_mw_per_hz(dbm_hz):
    """-174 dBm/Hz -> 3.98e-18 mW/Hz."""
    return 10.0 ** (dbm_hz / 10.0)


def bps_to_mbps(rate_bps):
    return rate_bps / MBPS


def positive_part(x):
    """[x]^+ for scalars or numpy arrays."""
    try:
        return x.clip(min=0.0)
    except AttributeError:
        return max(x, 0.0)
