"""Experiment configuration.

A scenario file is a YAML mapping grouped into sections, for example::

    run:
      seed: 3
      algorithm: re2fs
      horizon: 500
    geometry:
      n_users: 16
      n_uavs: 3

Every key belongs to exactly one section (see ``SECTIONS``); unknown keys
are rejected.  Omitted keys keep the defaults below, which reproduce the
published simulation setup.
"""

import dataclasses
from dataclasses import dataclass

import yaml

ALGORITHMS = ("re2fs", "suav", "cct")


@dataclass
class Scenario:
    # run
    seed: int = 0
    algorithm: str = "re2fs"
    horizon: int = 500
    # geometry and mobility
    n_users: int = 16
    n_uavs: int = 3
    area_m: tuple = (1000.0, 1000.0)
    uav_altitude_m: float = 50.0
    user_height_m: float = 1.8
    slot_seconds: float = 200.0
    trace_path: str = None
    beacon_period: int = 1
    coverage_radius_m: float = 500.0
    rate_classes_mbps: tuple = (1.0, 2.0, 4.0)
    # radio environment
    carrier_hz: float = 2e9
    noise_psd_dbm_hz: float = -235.0
    rician_k_db: float = 15.0
    bs_pos_m: tuple = (25.0, 37.5, 25.0)
    bs_array_elements: int = 8
    bs_beamwidth_deg: float = 65.0
    uav_gain_dbi: float = 1.0
    rx_gain_dbi: float = 1.0
    itu_alpha: float = 0.3
    itu_beta: float = 300.0
    itu_sigma_m: float = 30.0
    building_height_cap_m: float = 40.0
    # URLLC slice
    w_tot_hz: float = 10e6
    urllc_tau_s: float = 5e-3
    urllc_eps: float = 1e-7
    urllc_bits: float = 160.0
    p_bs_max_mw: float = 50000.0
    urllc_tol_hz: float = 1.0
    # MBB slices and UAVs
    p_circuit_mw: float = 20.0
    p_hat_mw: float = 1650.0
    p_tilde_mw: float = 1500.0
    e_max_m: float = 50.0
    d_min_m: float = 5.0
    alt_max_iters: int = 1000
    alt_rel_tol: float = 1e-5
    cct_speed_mps: float = 10.0
    # learning
    esn_q: int = 6
    esn_k: int = 10
    esn_reservoir: int = 300
    esn_xi: float = 1e-3
    esn_lam: float = 1.0
    esn_eta: float = 1.0
    esn_r_max: int = 100
    esn_spectral_radius: float = 0.9
    esn_pretrain_slots: int = 150
    cg_hidden: tuple = (512, 256)
    cg_lr: float = 1e-3
    cg_batch: int = 64
    cg_capacity: int = 1_000_000
    cg_pretrain_btu: int = 3000
    cg_pretrain_utg: int = 1000
    cg_measure_avg: int = 8
    # Lyapunov
    V: float = 2.0
    rho: float = 0.01

    def __post_init__(self):
        self.area_m = tuple(float(v) for v in self.area_m)
        self.bs_pos_m = tuple(float(v) for v in self.bs_pos_m)
        self.rate_classes_mbps = tuple(float(v) for v in self.rate_classes_mbps)
        self.cg_hidden = tuple(int(v) for v in self.cg_hidden)
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.horizon < 1 or self.n_users < 1 or self.n_uavs < 1:
            raise ValueError("horizon, n_users and n_uavs must be positive")
        if min(self.area_m) <= 0:
            raise ValueError("area dimensions must be positive")
        if not self.p_circuit_mw < self.p_tilde_mw <= self.p_hat_mw:
            raise ValueError("need p_c < p_tilde <= p_hat")
        if self.e_max_m <= 0 or self.d_min_m < 0:
            raise ValueError("need e_max > 0 and d_min >= 0")
        if self.esn_k < 1 or self.esn_q < 2:
            raise ValueError("need K >= 1 and Q >= 2")
        if self.w_tot_hz <= 0 or self.slot_seconds <= 0:
            raise ValueError("bandwidth and slot length must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = {}
        for section, keys in SECTIONS.items():
            out[section] = {}
            for k in keys:
                v = getattr(self, k)
                out[section][k] = list(v) if isinstance(v, tuple) else v
        return out


SECTIONS = {
    "run": ["seed", "algorithm", "horizon"],
    "geometry": ["n_users", "n_uavs", "area_m", "uav_altitude_m", "user_height_m",
                 "slot_seconds", "trace_path", "beacon_period", "coverage_radius_m",
                 "rate_classes_mbps"],
    "radio": ["carrier_hz", "noise_psd_dbm_hz", "rician_k_db", "bs_pos_m",
              "bs_array_elements", "bs_beamwidth_deg", "uav_gain_dbi", "rx_gain_dbi",
              "itu_alpha", "itu_beta", "itu_sigma_m", "building_height_cap_m"],
    "urllc": ["w_tot_hz", "urllc_tau_s", "urllc_eps", "urllc_bits", "p_bs_max_mw",
              "urllc_tol_hz"],
    "mbb": ["p_circuit_mw", "p_hat_mw", "p_tilde_mw", "e_max_m", "d_min_m",
            "alt_max_iters", "alt_rel_tol", "cct_speed_mps"],
    "learning": ["esn_q", "esn_k", "esn_reservoir", "esn_xi", "esn_lam", "esn_eta",
                 "esn_r_max", "esn_spectral_radius", "esn_pretrain_slots", "cg_hidden",
                 "cg_lr", "cg_batch", "cg_capacity", "cg_pretrain_btu", "cg_pretrain_utg",
                 "cg_measure_avg"],
    "lyapunov": ["V", "rho"],
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(Scenario)}


def default_scenario(**overrides):
    return Scenario(**overrides)


def from_dict(doc):
    """Build a Scenario from the sectioned mapping of a scenario file."""
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ValueError("scenario document must be a mapping of sections")
    flat = {}
    for section, values in doc.items():
        if section not in SECTIONS:
            raise ValueError(f"unknown scenario section {section!r}")
        if values is None:
            continue
        for k, v in values.items():
            if k not in SECTIONS[section]:
                raise ValueError(f"unknown key {section}.{k}")
            flat[k] = v
    return Scenario(**flat)


def load_scenario(path):
    with open(path) as fh:
        return from_dict(yaml.safe_load(fh))


def dump_scenario(scn, path):
    with open(path, "w") as fh:
        yaml.safe_dump(scn.to_dict(), fh, sort_keys=False)


def coerce(key, text):
    """Parse a command-line override ``key=text`` into the field's type."""
    if key not in _FIELD_TYPES:
        raise ValueError(f"unknown scenario key {key!r}")
    current = getattr(Scenario(), key)
    if isinstance(current, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, tuple):
        kind = type(current[0]) if current else float
        return tuple(kind(v) for v in text.split(":"))
    if current is None:
        return text
    return text
