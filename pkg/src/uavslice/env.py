"""Synthetic urban radio ground truth.

Buildings follow the ITU statistical city model (built-up ratio alpha,
beta buildings per km^2, Rayleigh heights).  Links are LoS when the 3-D
segment cuts no building.  Path loss is the 3GPP TR 38.901 urban-macro
model; the BS uses the 38.901 element pattern with a vertical ULA.
Fading has unit mean power: Rayleigh for NLoS, Rician for LoS.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .units import SPEED_OF_LIGHT, db_to_lin


@dataclass(frozen=True)
class ItuParams:
    alpha: float = 0.3          # built-up land ratio
    beta: float = 300.0         # buildings per km^2
    sigma: float = 30.0         # Rayleigh scale of heights, m


@dataclass
class BuildingMap:
    boxes: np.ndarray                     # (n, 5): x0, y0, x1, y1, height
    area: tuple
    itu: ItuParams = field(default_factory=ItuParams)
    height_cap: float = 40.0

    def __len__(self):
        return self.boxes.shape[0]

    def to_json(self):
        return json.dumps({
            "area_m": list(self.area),
            "height_cap_m": self.height_cap,
            "itu": {"alpha": self.itu.alpha, "beta": self.itu.beta,
                    "sigma": self.itu.sigma},
            "buildings": [{"x0": b[0], "y0": b[1], "x1": b[2], "y1": b[3],
                           "height": b[4]} for b in self.boxes.tolist()],
        }, indent=1)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        rows = [[b["x0"], b["y0"], b["x1"], b["y1"], b["height"]]
                for b in d["buildings"]]
        return cls(np.asarray(rows, dtype=np.float64).reshape(-1, 5),
                   tuple(d["area_m"]), ItuParams(**d["itu"]), d["height_cap_m"])


@dataclass(frozen=True)
class RadioParams:
    carrier_hz: float = 2e9
    noise_psd_dbm_hz: float = -235.0
    rician_k_db: float = 15.0
    bs_pos_3d: tuple = (25.0, 37.5, 25.0)
    bs_array_elements: int = 8
    bs_beamwidth_deg: float = 65.0
    bs_azimuth_deg: float = 45.0      # boresight, pointing into the area
    bs_downtilt_deg: float = 0.0
    bs_element_gain_dbi: float = 8.0
    uav_gain_dbi: float = 1.0
    rx_gain_dbi: float = 1.0

    def __post_init__(self):
        if not self.carrier_hz > 0:
            raise ValueError("carrier_hz must be positive")
        if self.bs_array_elements < 1:
            raise ValueError("need at least one array element")

    @property
    def n0_mw_per_hz(self):
        return 10.0 ** (self.noise_psd_dbm_hz / 10.0)


@dataclass
class TrueChannelSample:
    gain: float
    coeff: float
    los: bool
    distance_m: float


def generate_buildings(itu, area, seed, height_cap=40.0):
    """Square footprints on a jittered grid; count ~ Poisson(beta * km^2)."""
    width, height = float(area[0]), float(area[1])
    if width <= 0 or height <= 0:
        raise ValueError("area dimensions must be positive")
    if not (0.0 < itu.alpha < 1.0 and itu.beta > 0 and itu.sigma > 0):
        raise ValueError("need alpha in (0,1), beta > 0, sigma > 0")
    rng = np.random.default_rng(seed)
    area_m2 = width * height
    n = int(rng.poisson(itu.beta * area_m2 / 1e6))
    if n == 0:
        return BuildingMap(np.zeros((0, 5)), (width, height), itu, height_cap)
    gx = max(1, int(math.ceil(math.sqrt(n * width / height))))
    gy = max(1, int(math.ceil(n / gx)))
    cw, ch = width / gx, height / gy
    side = min(math.sqrt(itu.alpha * area_m2 / n), 0.999 * min(cw, ch))
    cells = rng.choice(gx * gy, size=n, replace=False)
    cx, cy = cells % gx, cells // gx
    x0 = cx * cw + rng.uniform(0.0, cw - side, size=n)
    y0 = cy * ch + rng.uniform(0.0, ch - side, size=n)
    heights = np.minimum(rng.rayleigh(itu.sigma, size=n), height_cap)
    heights = np.maximum(heights, 1e-3)
    boxes = np.column_stack([x0, y0, x0 + side, y0 + side, heights])
    return BuildingMap(boxes, (width, height), itu, height_cap)


def is_los(bmap, p1, p2):
    """True iff the segment p1-p2 cuts no building volume."""
    return not bool(_kernels.segments_blocked(np.asarray(p1)[None], np.asarray(p2)[None],
                                              bmap.boxes)[0])


def is_los_many(bmap, p1, p2):
    """Vectorised is_los for row-aligned point arrays (m, 3)."""
    return ~_kernels.segments_blocked(p1, p2, bmap.boxes)


def path_loss_db(params, d_m, los, heights):
    """3GPP UMa path loss in dB for 3-D distance ``d_m``.

    ``heights`` = (h_bs, h_ut), the transmitter and receiver heights in m.
    LoS uses the dual-slope model with breakpoint 4 h'_bs h'_ut f_c / c;
    NLoS is max(LoS, 13.54 + 39.08 log d + 20 log f - 0.6 (h_ut - 1.5)).
    The UT height in the NLoS correction is held inside the model's
    1.5-22.5 m validity range.
    """
    d = np.asarray(d_m, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    h_bs, h_ut = float(heights[0]), float(heights[1])
    fc_ghz = params.carrier_hz / 1e9
    dh = h_bs - h_ut
    d2d = np.sqrt(np.maximum(d * d - dh * dh, 0.0))
    h_e = 1.0
    d_bp = 4.0 * max(h_bs - h_e, 1e-3) * max(h_ut - h_e, 1e-3) * params.carrier_hz / SPEED_OF_LIGHT
    pl1 = 28.0 + 22.0 * np.log10(d) + 20.0 * math.log10(fc_ghz)
    pl2 = (28.0 + 40.0 * np.log10(d) + 20.0 * math.log10(fc_ghz)
           - 9.0 * math.log10(d_bp ** 2 + dh ** 2))
    pl_los = np.where(d2d <= d_bp, pl1, pl2)
    if np.all(los):
        out = pl_los
    else:
        h_corr = min(max(h_ut, 1.5), 22.5)
        pl_nlos_raw = (13.54 + 39.08 * np.log10(d) + 20.0 * math.log10(fc_ghz)
                       - 0.6 * (h_corr - 1.5))
        out = np.where(los, pl_los, np.maximum(pl_los, pl_nlos_raw))
    return float(out) if np.ndim(out) == 0 else out


def element_gain_db(params, zenith_deg, azimuth_deg):
    """38.901 single-element pattern (dBi) at zenith/azimuth (deg)."""
    bw = params.bs_beamwidth_deg
    a_v = -np.minimum(12.0 * ((zenith_deg - 90.0) / bw) ** 2, 30.0)
    a_h = -np.minimum(12.0 * (azimuth_deg / bw) ** 2, 30.0)
    return params.bs_element_gain_dbi - np.minimum(-(a_v + a_h), 30.0)


def array_factor(params, zenith_deg):
    """Power gain of the vertical half-wavelength ULA (peak = N)."""
    n = params.bs_array_elements
    steer = math.radians(90.0 + params.bs_downtilt_deg)
    phase = math.pi * (np.cos(np.radians(zenith_deg)) - math.cos(steer))
    k = np.arange(n)
    af = np.exp(1j * np.multiply.outer(phase, k)).sum(axis=-1)
    return np.abs(af) ** 2 / n


def bs_antenna_gain(params, uav_pos_3d):
    """Linear BS transmit gain towards a 3-D point."""
    v = np.asarray(uav_pos_3d, dtype=np.float64) - np.asarray(params.bs_pos_3d)
    dist = np.linalg.norm(v)
    if dist == 0:
        raise ValueError("target coincides with the BS")
    zenith = math.degrees(math.acos(v[2] / dist))
    az = math.degrees(math.atan2(v[1], v[0])) - params.bs_azimuth_deg
    az = (az + 180.0) % 360.0 - 180.0
    return float(db_to_lin(element_gain_db(params, zenith, az)) * array_factor(params, zenith))


def fading_power(los, rng, k_db):
    """|f|^2 with unit mean: Rician(K) if LoS else Rayleigh."""
    los = np.asarray(los, dtype=bool)
    n1 = rng.standard_normal(los.shape)
    n2 = rng.standard_normal(los.shape)
    k = db_to_lin(k_db)
    spec = math.sqrt(k / (k + 1.0))
    s_los = math.sqrt(1.0 / (2.0 * (k + 1.0)))
    re = np.where(los, spec + s_los * n1, n1 / math.sqrt(2.0))
    im = np.where(los, s_los * n2, n2 / math.sqrt(2.0))
    out = re * re + im * im
    return float(out) if out.ndim == 0 else out


def link_gains(kind, tx_pos, rx_pos, bmap, params, rng, n_avg=1, los=None):
    """Batched channel draw for row-aligned tx/rx arrays (m, 3).

    Returns (gain, coeff, los, distance).  ``n_avg`` > 1 averages that many
    independent fading draws, which is how a measurement averaged over
    reference signals sees the link.
    """
    tx = np.atleast_2d(np.asarray(tx_pos, dtype=np.float64))
    rx = np.atleast_2d(np.asarray(rx_pos, dtype=np.float64))
    dist = np.linalg.norm(rx - tx, axis=1)
    if np.any(dist <= 0):
        raise ValueError("link endpoints coincide")
    if los is None:
        los = is_los_many(bmap, tx, rx)
    los = np.asarray(los, dtype=bool)
    if kind == "BtU":
        g_tx = np.array([bs_antenna_gain(params, r) for r in rx])
        g_rx = db_to_lin(params.rx_gain_dbi)
    elif kind == "UtG":
        g_tx = db_to_lin(params.uav_gain_dbi)
        g_rx = db_to_lin(params.rx_gain_dbi)
    else:
        raise ValueError(f"unknown link kind {kind!r}")
    pl = np.empty(dist.shape)
    for k in range(dist.size):
        pl[k] = path_loss_db(params, dist[k], bool(los[k]), (tx[k, 2], rx[k, 2]))
    fad = np.zeros(dist.shape)
    for _ in range(n_avg):
        fad += fading_power(los, rng, params.rician_k_db)
    fad /= n_avg
    gain = g_tx * g_rx * 10.0 ** (-pl / 10.0) * fad
    return gain, gain * dist ** 2, los, dist


def sample_true_channel(kind, tx_pos, rx_pos, bmap, params, rng):
    """One fresh channel realisation for a single link."""
    gain, coeff, los, dist = link_gains(kind, tx_pos, rx_pos, bmap, params, rng)
    return TrueChannelSample(float(gain[0]), float(coeff[0]), bool(los[0]), float(dist[0]))
