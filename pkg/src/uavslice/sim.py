"""End-to-end slot simulation: RE2FS and the hovering / circular baselines.

Timeline.  The trace is split into ``pre`` ESN pre-roll slots, ``K``
warm-up slots and ``T`` controlled slots.  Iteration t = 1..T runs at the
physical slot c = pre + t - 1 and decides slot c + K from predicted user
positions; that decision is then scored with fresh true channels at
c + K and fed to the queues.  During the pre-roll and warm-up the UAVs hover
at their initial deployment and no MBB traffic is served.

Units: metres, mW, Hz, Mbps.  ESN positions are handled in km.
"""

import copy
import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import cgnet, env, esn, lyap, mbbopt, mobility, urllc
from .units import KM

POWER_START_FLOOR = 0.01

_STREAMS = ("buildings", "traces", "deploy", "reservoir", "cg_init", "pretrain",
            "measure", "realize", "minibatch")


def _streams(seed):
    kids = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(k) for name, k in zip(_STREAMS, kids)}


# ---------------------------------------------------------------------------
# static world
# ---------------------------------------------------------------------------

@dataclass
class World:
    scn: object
    bmap: env.BuildingMap
    radio: env.RadioParams
    traces: list
    init_pos: np.ndarray          # (J, 2) random deployment
    pre: int
    n_slots: int

    @property
    def K(self):
        return self.scn.esn_k


def radio_params(scn):
    return env.RadioParams(carrier_hz=scn.carrier_hz, noise_psd_dbm_hz=scn.noise_psd_dbm_hz,
                           rician_k_db=scn.rician_k_db, bs_pos_3d=scn.bs_pos_m,
                           bs_array_elements=scn.bs_array_elements,
                           bs_beamwidth_deg=scn.bs_beamwidth_deg,
                           uav_gain_dbi=scn.uav_gain_dbi, rx_gain_dbi=scn.rx_gain_dbi)


def deploy_random(n_uavs, area, d_min, rng, max_tries=10_000):
    """Uniform positions with pairwise separation of at least d_min."""
    area = np.asarray(area, dtype=np.float64)
    pos = []
    for _ in range(max_tries):
        cand = rng.uniform(0.0, 1.0, size=2) * area
        if all(np.linalg.norm(cand - p) >= d_min for p in pos):
            pos.append(cand)
            if len(pos) == n_uavs:
                return np.array(pos)
    raise RuntimeError("could not place UAVs with the requested separation")


def cct_track(n_uavs, area, n_slots, slot_seconds, speed, e_max):
    """Circular trajectories around the area centre, (n_slots, J, 2).

    UAV k starts on the horizontal line through the centre at radius
    (2k+1)/(4J) of the area width, so neighbours are 1/(2J) apart.  The arc
    flown per slot is speed * slot_seconds capped at e_max.
    """
    area = np.asarray(area, dtype=np.float64)
    centre = area / 2.0
    radii = (2.0 * np.arange(n_uavs) + 1.0) / (4.0 * n_uavs) * area[0]
    step = min(speed * slot_seconds, e_max)
    omega = step / radii                                   # rad per slot
    ang = np.outer(np.arange(n_slots), omega)
    x = centre[0] + radii[None, :] * np.cos(ang)
    y = centre[1] + radii[None, :] * np.sin(ang)
    return np.stack([x, y], axis=2)


def build_world(scn, streams=None):
    streams = streams or _streams(scn.seed)
    itu = env.ItuParams(scn.itu_alpha, scn.itu_beta, scn.itu_sigma_m)
    b_seed = int(streams["buildings"].integers(2 ** 63))
    bmap = env.generate_buildings(itu, scn.area_m, b_seed, scn.building_height_cap_m)
    pre = scn.esn_pretrain_slots
    n_slots = pre + scn.esn_k + scn.horizon + 1
    rng_tr = streams["traces"]
    classes = rng_tr.choice(scn.rate_classes_mbps, size=scn.n_users)
    if scn.trace_path:
        traces = mobility.load_traces(scn.trace_path, scn.area_m, scn.n_users,
                                      scn.slot_seconds, n_slots=n_slots, rate_classes=classes)
    else:
        traces = mobility.synthetic_traces(scn.n_users, n_slots, scn.area_m, rng_tr,
                                           slot_seconds=scn.slot_seconds, rate_classes=classes)
    for tr in traces:
        tr.height_m = scn.user_height_m
    init = deploy_random(scn.n_uavs, scn.area_m, scn.d_min_m, streams["deploy"])
    return World(scn, bmap, radio_params(scn), traces, init, pre, n_slots)


def to3d(xy, z):
    xy = np.atleast_2d(xy)
    return np.column_stack([xy, np.full(xy.shape[0], z)])


# ---------------------------------------------------------------------------
# location prediction
# ---------------------------------------------------------------------------

class EsnPredictor:
    """Beacon logs, per-user consensus readouts and K-slot rollouts."""

    def __init__(self, hyper, n_users, n_uavs, rng, area_m, coverage_m, period):
        self.hyper = hyper
        self.n_users = n_users
        self.res = esn.make_reservoir(hyper, rng)
        self.log = mobility.BeaconLog(n_uavs, hyper.Q + 1)
        self.area_km = np.asarray(area_m, dtype=np.float64) / KM
        self.coverage_km = coverage_m / KM
        self.period = period
        self.weights = {}
        self.anchor = {}              # user -> (t_last, x_last_km)
        self.cold = np.ones(n_users, dtype=bool)
        self.diverged = 0

    def observe(self, uav_pos_m, user_pos_m, slot):
        mobility.beacon_refresh(self.log, np.asarray(uav_pos_m) / KM,
                                np.asarray(user_pos_m) / KM, slot, self.period,
                                self.coverage_km)

    def train_user(self, user):
        locals_, best = [], None
        for j in range(self.log.n_uavs):
            samples = self.log.samples(j, user)
            sys_ = esn.build_local_system(samples, self.res, self.hyper)
            if sys_ is None:
                continue
            X, Y, q_last = sys_
            locals_.append((X, Y))
            t_last, x_last = samples[-1]
            if best is None or t_last > best[0]:
                best = (t_last, x_last, q_last)
        if not locals_:
            self.cold[user] = True
            return
        w = esn.train_consensus(locals_, self.hyper, init=self.weights.get(user))
        if not np.all(np.isfinite(w.w_hat)):
            self.diverged += 1
            self.weights.pop(user, None)
            self.cold[user] = True
            return
        self.weights[user] = w
        self.res.state_per_user[user] = best[2]
        self.anchor[user] = (best[0], best[1])
        self.cold[user] = False

    def train_all(self):
        for i in range(self.n_users):
            self.train_user(i)

    def predict(self, target_slot):
        """(N, 2) metres; cold users fall back to their newest beacon or the centre."""
        out = np.empty((self.n_users, 2))
        for i in range(self.n_users):
            latest = self.log.latest(i)
            if self.cold[i] or i not in self.anchor:
                out[i] = latest[1] if latest is not None else self.area_km / 2.0
                continue
            t_last, x_last = self.anchor[i]
            steps = target_slot - t_last
            if steps < 1:
                out[i] = x_last
                continue
            roll = esn.predict_k(self.res, self.weights[i].w_hat, i, x_last, steps,
                                 area_km=self.area_km)
            out[i] = roll[-1]
        return out * KM


# ---------------------------------------------------------------------------
# channel learning
# ---------------------------------------------------------------------------

class ChannelLearner:
    """One BtU net (at the BS) and one UtG net per UAV."""

    def __init__(self, scn, world, rng_init):
        kw = dict(hidden=scn.cg_hidden, lr=scn.cg_lr, capacity=scn.cg_capacity,
                  batch_size=scn.cg_batch, area=scn.area_m)
        J = scn.n_uavs
        self.btu = [cgnet.make_cgnet(rng_init, **kw) for _ in range(J)]
        self.utg = [cgnet.make_cgnet(rng_init, **kw) for _ in range(J)]
        self.world = world
        self.n_avg = scn.cg_measure_avg
        self.alt = scn.uav_altitude_m
        self.user_h = scn.user_height_m
        self.bs = np.asarray(scn.bs_pos_m, dtype=np.float64)

    def measure_btu(self, uav3d, rng, train_rng=None):
        w = self.world
        n = uav3d.shape[0]
        _, coeff, los, _ = env.link_gains("BtU", np.tile(self.bs, (n, 1)), uav3d, w.bmap,
                                          w.radio, rng, n_avg=self.n_avg)
        losses = []
        for j in range(n):
            cgnet.observe(self.btu[j], cgnet.link_input(uav3d[j], self.bs, los[j]), coeff[j])
            if train_rng is not None:
                losses.append(cgnet.train_step(self.btu[j], train_rng))
        return losses

    def measure_utg(self, j, uav3d_j, users3d, rng, train_rng=None):
        w = self.world
        n = users3d.shape[0]
        _, coeff, los, _ = env.link_gains("UtG", np.tile(uav3d_j, (n, 1)), users3d, w.bmap,
                                          w.radio, rng, n_avg=self.n_avg)
        net = self.utg[j]
        for k in range(n):
            cgnet.observe(net, cgnet.link_input(users3d[k], uav3d_j, los[k]), coeff[k])
        if train_rng is not None:
            return cgnet.train_step(net, train_rng)
        return None

    def pretrain(self, n_btu, n_utg, rng, train_rng):
        area = np.asarray(self.world.scn.area_m)
        J = len(self.btu)
        for _ in range(n_btu):
            uav = to3d(rng.uniform(0.0, 1.0, size=(J, 2)) * area, self.alt)
            self.measure_btu(uav, rng, train_rng)
        for _ in range(n_utg):
            for j in range(J):
                uav = to3d(rng.uniform(0.0, 1.0, size=2) * area, self.alt)[0]
                user = to3d(rng.uniform(0.0, 1.0, size=2) * area, self.user_h)
                self.measure_utg(j, uav, user, rng, train_rng)

    def estimate_theta(self, users_xy, uav_xy):
        """Controller view: (N, J) UtG coefficients and (J,) BtU gains."""
        users3d = to3d(users_xy, self.user_h)
        uav3d = to3d(uav_xy, self.alt)
        N, J = users3d.shape[0], uav3d.shape[0]
        bmap = self.world.bmap
        theta = np.empty((N, J))
        for j in range(J):
            tile = np.tile(uav3d[j], (N, 1))
            los = env.is_los_many(bmap, tile, users3d)
            theta[:, j] = np.atleast_1d(cgnet.forward(self.utg[j],
                                                      cgnet.link_input(users3d, tile, los)))
        bs = np.tile(self.bs, (J, 1))
        los_b = env.is_los_many(bmap, bs, uav3d)
        h_b = np.empty(J)
        for j in range(J):
            d = np.linalg.norm(uav3d[j] - self.bs)
            h_b[j] = cgnet.estimate_gain(self.btu[j], cgnet.link_input(uav3d[j], self.bs,
                                                                        los_b[j]), d)
        return theta, h_b


_PRETRAIN_CACHE = {}


def _pretrain_key(scn):
    fields = ("seed", "n_uavs", "area_m", "uav_altitude_m", "user_height_m", "carrier_hz",
              "rician_k_db", "bs_pos_m", "bs_array_elements", "bs_beamwidth_deg",
              "uav_gain_dbi", "rx_gain_dbi", "itu_alpha", "itu_beta", "itu_sigma_m",
              "building_height_cap_m", "cg_hidden", "cg_lr", "cg_batch", "cg_capacity",
              "cg_pretrain_btu", "cg_pretrain_utg", "cg_measure_avg")
    return tuple(getattr(scn, f) for f in fields)


def pretrained_learner(scn, world, streams, use_cache=True):
    """Channel learner after the offline episodes.

    Pre-training depends only on the seed, the environment and the learner
    settings, so identical configurations reuse one result (deep-copied) and
    paired baseline runs start from the same nets.
    """
    key = _pretrain_key(scn)
    if use_cache and key in _PRETRAIN_CACHE:
        learner, state = _PRETRAIN_CACHE[key]
        learner = copy.deepcopy(learner)
        learner.world = world
        streams["minibatch"].bit_generator.state = copy.deepcopy(state)
        return learner
    learner = ChannelLearner(scn, world, streams["cg_init"])
    learner.pretrain(scn.cg_pretrain_btu, scn.cg_pretrain_utg, streams["pretrain"],
                     streams["minibatch"])
    if use_cache:
        saved = copy.deepcopy(learner)
        saved.world = None
        _PRETRAIN_CACHE[key] = (saved, copy.deepcopy(streams["minibatch"].bit_generator.state))
    return learner


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def jain_index(rates):
    """(sum u)^2 / (n sum u^2); all-zero rates give 0 (flagged by callers)."""
    u = np.asarray(rates, dtype=np.float64)
    den = u.size * float(np.sum(u * u))
    if den == 0.0:
        return 0.0
    return float(np.sum(u)) ** 2 / den


def energy_efficiency(u_bar, p_tot_bar, rho):
    """sum log2(1 + u_bar) - rho * sum p_tot_bar (Mbps, mW)."""
    return lyap.utility(u_bar) - rho * float(np.sum(p_tot_bar))


@dataclass
class RunMetrics:
    scenario: object
    rows: list = field(default_factory=list)
    queue_rows: list = field(default_factory=list)
    track_rows: list = field(default_factory=list)
    gamma_rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    rates: np.ndarray = None          # (T, N) realised Mbps
    p_tot: np.ndarray = None          # (T, J) mW
    decisions: list = field(default_factory=list)


def summarise(metrics, scn):
    u_bar = metrics.rates.mean(axis=0)
    p_bar = metrics.p_tot.mean(axis=0)
    rows = metrics.rows
    s = {
        "algorithm": scn.algorithm,
        "seed": scn.seed,
        "n_users": scn.n_users,
        "n_uavs": scn.n_uavs,
        "horizon": scn.horizon,
        "energy_efficiency": energy_efficiency(u_bar, p_bar, scn.rho),
        "utility": lyap.utility(u_bar),
        "jain_index": jain_index(u_bar),
        "jain_all_zero": bool(np.all(u_bar == 0)),
        "mean_rate_mbps": u_bar.tolist(),
        "mean_power_mw": p_bar.tolist(),
        "urllc_infeasible_slots": int(sum(1 for r in rows if not r["urllc_feasible"])),
        "urllc_controller_violations": int(sum(r["urllc_ctrl_violations"] for r in rows)),
        "urllc_true_violation_fraction": float(np.mean([r["urllc_true_violations"]
                                                        for r in rows]) / scn.n_uavs),
        "constraint_violations": int(sum(r["violations"] for r in rows)),
        "solver_fallbacks": int(sum(r["fallbacks"] for r in rows)),
        "esn_mse_km2": float(np.mean([r["esn_mse_km2"] for r in rows])),
        "final_s_q": rows[-1]["s_q"],
        "final_s_z": rows[-1]["s_z"],
        "final_s_h": rows[-1]["s_h"],
    }
    return s


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------

def _mbb_problem(scn, world, users_pred, theta, queues, w_e, prev_pos, slot_one):
    gap2 = (scn.uav_altitude_m - scn.user_height_m) ** 2
    J = scn.n_uavs
    return mbbopt.SlotProblem(
        user_pos=users_pred, theta=theta, height_gap2=np.full(theta.shape, gap2),
        weights=lyap.positive_part(queues.q) + lyap.positive_part(queues.z),
        h_pen=lyap.positive_part(queues.h), V=scn.V, rho=scn.rho,
        n0=world.radio.n0_mw_per_hz, w_e=w_e,
        p_max=np.full(J, scn.p_hat_mw - scn.p_circuit_mw), prev_pos=prev_pos,
        e_max=scn.e_max_m, d_min=scn.d_min_m, area=scn.area_m, slot_one=slot_one)


def realised_rates(world, accept, uav_xy, powers, users_xy, w_e, rng):
    """True Shannon rates (Mbps) with one fresh fading draw per link."""
    scn = world.scn
    N, J = accept.shape
    users3d = to3d(users_xy, scn.user_height_m)
    uav3d = to3d(uav_xy, scn.uav_altitude_m)
    tx = np.repeat(uav3d, N, axis=0)
    rx = np.tile(users3d, (J, 1))
    gain, _, _, _ = env.link_gains("UtG", tx, rx, world.bmap, world.radio, rng)
    g = gain.reshape(J, N).T
    if w_e <= 0:
        return np.zeros(N), g
    rx_pow = g * powers[None, :]
    interf = rx_pow @ (np.ones((J, J)) - np.eye(J))
    sinr = rx_pow / (world.radio.n0_mw_per_hz * w_e + interf)
    rates = (w_e / 1e6) * np.log2(1.0 + sinr)
    return (accept * rates).sum(axis=1), g


def run(scn, world=None, keep_decisions=False, use_cache=True, progress=None):
    """Simulate one scenario; returns RunMetrics."""
    t_start = time.perf_counter()
    streams = _streams(scn.seed)
    world = world or build_world(scn, streams)
    J, N, K, T = scn.n_uavs, scn.n_users, scn.esn_k, scn.horizon
    pre = world.pre
    alt = scn.uav_altitude_m
    radio = world.radio
    n0 = radio.n0_mw_per_hz
    req = urllc.UrllcSliceReq(scn.urllc_tau_s, scn.urllc_eps, scn.urllc_bits)
    params = lyap.LyapParams(V=scn.V, rho=scn.rho,
                             c_th=np.array([tr.rate_class for tr in world.traces]),
                             p_tilde=np.full(J, scn.p_tilde_mw), p_hat=np.full(J, scn.p_hat_mw),
                             p_c=np.full(J, scn.p_circuit_mw))
    hyper = esn.EsnHyper(Q=scn.esn_q, K=K, xi=scn.esn_xi, lam=scn.esn_lam, eta=scn.esn_eta,
                         r_max=scn.esn_r_max, spectral_radius=scn.esn_spectral_radius,
                         n_reservoir=scn.esn_reservoir)
    predictor = EsnPredictor(hyper, N, J, streams["reservoir"], scn.area_m,
                             scn.coverage_radius_m, scn.beacon_period)
    learner = pretrained_learner(scn, world, streams, use_cache=use_cache)
    rng_meas, rng_real, rng_mb = streams["measure"], streams["realize"], streams["minibatch"]

    # UAV positions per physical slot; slots before pre + K hover at deployment
    if scn.algorithm == "cct":
        track = cct_track(J, scn.area_m, world.n_slots, scn.slot_seconds,
                          scn.cct_speed_mps, scn.e_max_m)
    else:
        track = np.repeat(world.init_pos[None], world.n_slots, axis=0)
    positions = lambda c: mobility.positions_at(world.traces, c)  # noqa: E731

    # ESN pre-roll over the trace history
    for c in range(pre):
        predictor.observe(track[c], positions(c), c)
        predictor.train_all()

    queues = lyap.QueueState.zeros(N, J)
    p_max = np.full(J, scn.p_hat_mw - scn.p_circuit_mw)
    prev_P = p_max.copy()
    metrics = RunMetrics(scn)
    rates_hist = np.zeros((T, N))
    ptot_hist = np.zeros((T, J))
    loss_btu = loss_utg = float("nan")

    for t in range(1, T + 1):
        c = pre + t - 1
        target = c + K
        uav_now = track[c]
        users_now = positions(c)
        predictor.observe(uav_now, users_now, c)
        predictor.train_all()
        users_pred = predictor.predict(target)
        users_true = positions(target)
        esn_mse = float(np.mean(np.sum(((users_pred - users_true) / KM) ** 2, axis=1)))

        prev_pos = track[target - 1]
        anchor = prev_pos if scn.algorithm == "re2fs" else track[target]
        theta, h_b = learner.estimate_theta(users_pred, anchor)
        gap = scn.uav_altitude_m - scn.user_height_m
        u_max = lyap.u_max_approx(theta, scn.w_tot_hz, scn.p_hat_mw, scn.p_circuit_mw, n0, gap)
        gamma = lyap.solve_gamma(queues.z, u_max, scn.V)
        alloc = urllc.min_bandwidth(h_b, req, n0, scn.p_bs_max_mw, scn.w_tot_hz,
                                    tol=scn.urllc_tol_hz)
        w_e = scn.w_tot_hz - alloc.w_u if alloc.feasible else 0.0

        if w_e > 0:
            prob = _mbb_problem(scn, world, users_pred, theta, queues, w_e,
                                prev_pos if scn.algorithm == "re2fs" else track[target],
                                slot_one=(t == 1))
            # a zero-power start makes every matching weight zero, so the
            # warm start is floored at a small share of the power budget
            start_P = np.maximum(prev_P, POWER_START_FLOOR * p_max)
            dec = mbbopt.alternate(prob, anchor, start_P, r_max=scn.alt_max_iters,
                                   rel_tol=scn.alt_rel_tol, move=(scn.algorithm == "re2fs"))
        else:
            dec = mbbopt.SlotDecision(accept=np.zeros((N, J), dtype=np.int8),
                                      uav_pos=anchor.copy(), powers=np.zeros(J))
        dec.w_e, dec.w_u, dec.gamma = w_e, alloc.w_u, gamma
        bad = mbbopt.validate(dec, prev_pos, p_max, scn.e_max_m, scn.d_min_m, scn.w_tot_hz,
                              area=scn.area_m) if w_e > 0 else []
        track[target] = dec.uav_pos
        if w_e > 0:
            prev_P = dec.powers.copy()

        # URLLC closure with controller and with true BtU gains
        ctrl_viol = true_viol = 0
        if alloc.feasible:
            need = req.b_req / req.tau_req
            w_j = alloc.w_u / J
            ctrl = urllc.fbl_rate(h_b, alloc.p_b, w_j, req, n0)
            ctrl_viol = int(np.sum(ctrl < need * (1 - 1e-9)))
            uav3d = to3d(dec.uav_pos, alt)
            g_true, _, _, _ = env.link_gains("BtU", np.tile(learner.bs, (J, 1)), uav3d,
                                             world.bmap, radio, rng_real)
            true_viol = int(np.sum(urllc.fbl_rate(g_true, alloc.p_b, w_j, req, n0) < need))

        # realised service at the target slot
        u, _ = realised_rates(world, dec.accept, dec.uav_pos, dec.powers, users_true, w_e,
                              rng_real)
        p_tot = dec.powers + scn.p_circuit_mw
        queues = lyap.update_queues(queues, u, gamma, p_tot, params)
        s_q, s_z, s_h = lyap.stability_metrics(queues)
        rates_hist[t - 1] = u
        ptot_hist[t - 1] = p_tot

        # online learning from measurements taken at the current slot
        uav3d_now = to3d(uav_now, alt)
        users3d_now = to3d(users_now, scn.user_height_m)
        lb = learner.measure_btu(uav3d_now, rng_meas, rng_mb)
        lu = [learner.measure_utg(j, uav3d_now[j], users3d_now, rng_meas, rng_mb)
              for j in range(J)]
        lb = [v for v in lb if v is not None]
        lu = [v for v in lu if v is not None]
        loss_btu = float(np.mean(lb)) if lb else float("nan")
        loss_utg = float(np.mean(lu)) if lu else float("nan")

        merit = dec.merit_trace[-1] if dec.merit_trace else 0.0
        row = {"t": t, "slot": target, "w_u_hz": alloc.w_u, "w_e_hz": w_e,
               "urllc_feasible": int(alloc.feasible), "urllc_ctrl_violations": ctrl_viol,
               "urllc_true_violations": true_viol, "merit": merit,
               "sum_rate_mbps": float(u.sum()), "served": int(dec.accept.sum()),
               "s_q": s_q, "s_z": s_z, "s_h": s_h, "alt_iters": dec.iterations,
               "fallbacks": dec.fallbacks, "violations": len(bad),
               "esn_mse_km2": esn_mse, "esn_cold": int(predictor.cold.sum()),
               "cg_loss_btu": loss_btu, "cg_loss_utg": loss_utg}
        row.update({f"u_{i}": float(u[i]) for i in range(N)})
        row.update({f"p_{j}": float(dec.powers[j]) for j in range(J)})
        metrics.rows.append(row)
        qrow = {"t": t, "s_q": s_q, "s_z": s_z, "s_h": s_h}
        qrow.update({f"q_{i}": float(queues.q[i]) for i in range(N)})
        qrow.update({f"z_{i}": float(queues.z[i]) for i in range(N)})
        qrow.update({f"h_{j}": float(queues.h[j]) for j in range(J)})
        metrics.queue_rows.append(qrow)
        for j in range(J):
            metrics.track_rows.append({"t": t, "slot": target, "uav": j,
                                       "x_m": float(dec.uav_pos[j, 0]),
                                       "y_m": float(dec.uav_pos[j, 1])})
        for r, g in enumerate(dec.merit_trace, start=1):
            metrics.gamma_rows.append({"t": t, "iteration": r, "merit": g})
        if keep_decisions:
            metrics.decisions.append(dec)
        if progress is not None:
            progress(t, row)

    metrics.rates = rates_hist
    metrics.p_tot = ptot_hist
    metrics.summary = summarise(metrics, scn)
    metrics.summary["esn_diverged"] = predictor.diverged
    metrics.summary["runtime_s"] = time.perf_counter() - t_start
    return metrics


def run_baseline_suav(scn, **kw):
    return run(scn.replace(algorithm="suav"), **kw)


def run_baseline_cct(scn, **kw):
    return run(scn.replace(algorithm="cct"), **kw)


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, rows):
    if not rows:
        open(path, "w").close()
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in keys])


def write_outputs(metrics, out_dir, gamma_trace=True):
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "metrics.csv"), metrics.rows)
    _write_csv(os.path.join(out_dir, "queues.csv"), metrics.queue_rows)
    _write_csv(os.path.join(out_dir, "uav_tracks.csv"), metrics.track_rows)
    if gamma_trace:
        _write_csv(os.path.join(out_dir, "gamma_trace.csv"), metrics.gamma_rows)
    summary = dict(metrics.summary)
    summary["scenario"] = metrics.scenario.to_dict()
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)

