"""Brute-force forward rollouts of the two-car system.

A collision witness is an open-loop, piecewise-constant control schedule for
both vehicles that makes the footprints overlap before the ego, braking after
its reaction delay, comes to rest. This is the independent check on the zone:
it integrates the world-frame car model directly and never touches the grid,
the relative dynamics, or the Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .config import ZoneParams
from .dynamics import VehicleState

MAX_SEGMENTS = 4
COARSE_SWITCH_FRACTIONS = (0.25, 0.5, 0.75)
CHUNK = 1024


@dataclass(frozen=True)
class RolloutPolicy:
    """Controls held for ``switch_interval`` seconds per segment; the last segment
    runs until the end. Ego acceleration entries only apply during the reaction
    delay; afterwards the ego brakes at ``a_brake``."""

    switch_interval: float
    ego: tuple[tuple[float, float], ...]
    contender: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.switch_interval <= 0:
            raise ValueError("switch interval must be positive")
        if not 1 <= len(self.ego) <= MAX_SEGMENTS or len(self.ego) != len(self.contender):
            raise ValueError(f"need 1..{MAX_SEGMENTS} segments for each agent")

    def validate(self, params: ZoneParams):
        s = params.steering_limit + 1e-12
        for delta, a in self.ego:
            lo, hi = params.ego_reaction_accel
            if abs(delta) > s or not lo - 1e-12 <= a <= hi + 1e-12:
                raise ValueError("ego control outside its bounds")
        for delta, a in self.contender:
            lo, hi = params.contender_accel
            if abs(delta) > s or not lo - 1e-12 <= a <= hi + 1e-12:
                raise ValueError("contender control outside its bounds")

    def arrays(self):
        pad = MAX_SEGMENTS - len(self.ego)
        ego = list(self.ego) + [self.ego[-1]] * pad
        con = list(self.contender) + [self.contender[-1]] * pad
        return (np.array([self.switch_interval]), np.array([ego], dtype=float),
                np.array([con], dtype=float))

    def to_dict(self) -> dict:
        return {"switch_interval": self.switch_interval,
                "ego": [list(u) for u in self.ego],
                "contender": [list(u) for u in self.contender]}

    @classmethod
    def from_dict(cls, d: dict) -> "RolloutPolicy":
        return cls(float(d["switch_interval"]),
                   tuple((float(a), float(b)) for a, b in d["ego"]),
                   tuple((float(a), float(b)) for a, b in d["contender"]))


@njit(cache=True, inline="always")
def _car_rate(psi, v, delta, a, inv_d, v_max):
    if (v <= 0.0 and a < 0.0) or (v >= v_max and a > 0.0):
        a = 0.0
    return v * math.cos(psi), v * math.sin(psi), v * inv_d * math.tan(delta), a


@njit(cache=True)
def _overlap(ex, ey, epsi, cx, cy, cpsi, length, width, off):
    # footprints are centred ``off`` ahead of the rear axle
    ce, se = math.cos(epsi), math.sin(epsi)
    cc, sc = math.cos(cpsi), math.sin(cpsi)
    dx = (cx + off * cc) - (ex + off * ce)
    dy = (cy + off * sc) - (ey + off * se)
    hl = 0.5 * length
    hw = 0.5 * width
    for k in range(4):
        if k == 0:
            nx, ny = ce, se
        elif k == 1:
            nx, ny = -se, ce
        elif k == 2:
            nx, ny = cc, sc
        else:
            nx, ny = -sc, cc
        ra = hl * abs(ce * nx + se * ny) + hw * abs(-se * nx + ce * ny)
        rb = hl * abs(cc * nx + sc * ny) + hw * abs(-sc * nx + cc * ny)
        if abs(dx * nx + dy * ny) - ra - rb >= 0.0:
            return False
    return True


@njit(cache=True)
def _simulate(ego0, con0, s, eu, cu, consts, dt, max_steps):
    length, width, inv_d, off, v_max, react, a_brake = (
        consts[0], consts[1], consts[2], consts[3], consts[4], consts[5], consts[6])
    nseg = eu.shape[0]
    e = ego0.copy()
    c = con0.copy()
    for k in range(max_steps + 1):
        t = k * dt
        if _overlap(e[0], e[1], e[2], c[0], c[1], c[2], length, width, off):
            return True, t
        braking = t >= react - 1e-9
        if braking and e[3] <= 0.0:
            return False, t
        seg = min(int((t + 1e-9) / s), nseg - 1)
        de = eu[seg, 0]
        ae = a_brake if braking else eu[seg, 1]
        dc = cu[seg, 0]
        ac = cu[seg, 1]
        # classical RK4 on both cars, controls held over the step
        k1 = _car_rate(e[2], e[3], de, ae, inv_d, v_max)
        m1 = _car_rate(c[2], c[3], dc, ac, inv_d, v_max)
        k2 = _car_rate(e[2] + 0.5 * dt * k1[2], e[3] + 0.5 * dt * k1[3], de, ae, inv_d, v_max)
        m2 = _car_rate(c[2] + 0.5 * dt * m1[2], c[3] + 0.5 * dt * m1[3], dc, ac, inv_d, v_max)
        k3 = _car_rate(e[2] + 0.5 * dt * k2[2], e[3] + 0.5 * dt * k2[3], de, ae, inv_d, v_max)
        m3 = _car_rate(c[2] + 0.5 * dt * m2[2], c[3] + 0.5 * dt * m2[3], dc, ac, inv_d, v_max)
        k4 = _car_rate(e[2] + dt * k3[2], e[3] + dt * k3[3], de, ae, inv_d, v_max)
        m4 = _car_rate(c[2] + dt * m3[2], c[3] + dt * m3[3], dc, ac, inv_d, v_max)
        for i in range(4):
            e[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            c[i] += dt / 6.0 * (m1[i] + 2.0 * m2[i] + 2.0 * m3[i] + m4[i])
        e[3] = min(max(e[3], 0.0), v_max)
        c[3] = min(max(c[3], 0.0), v_max)
    return False, max_steps * dt


@njit(parallel=True, cache=True)
def _simulate_batch(ego0, con0, switch, eu, cu, consts, dt, max_steps, hit, t_hit):
    for b in prange(switch.shape[0]):
        h, t = _simulate(ego0, con0, switch[b], eu[b], cu[b], consts, dt, max_steps)
        hit[b] = h
        t_hit[b] = t


def _consts(params: ZoneParams) -> np.ndarray:
    g = params.geometry()
    return np.array([g.length, g.width, 1.0 / g.axle_distance, g.center_offset, g.v_max,
                     params.reaction_time, params.a_brake])


def _max_steps(params: ZoneParams, dt: float) -> int:
    return int(math.ceil((params.reaction_time + params.stop_horizon()) / dt)) + 2


def rollout_batch(ego: VehicleState, contender: VehicleState, switch, ego_u, con_u,
                  params: ZoneParams, dt_sim: float = 0.02):
    switch = np.ascontiguousarray(switch, dtype=np.float64)
    hit = np.zeros(len(switch), dtype=np.bool_)
    t_hit = np.zeros(len(switch))
    _simulate_batch(np.array(ego, dtype=float), np.array(contender, dtype=float), switch,
                    np.ascontiguousarray(ego_u, dtype=np.float64),
                    np.ascontiguousarray(con_u, dtype=np.float64),
                    _consts(params), float(dt_sim), _max_steps(params, dt_sim), hit, t_hit)
    return hit, t_hit


def rollout(ego: VehicleState, contender: VehicleState, policy: RolloutPolicy,
            params: ZoneParams | None = None, dt_sim: float = 0.02):
    """Returns ``(collided, first_collision_time or None)``."""
    params = params or ZoneParams()
    policy.validate(params)
    hit, t = rollout_batch(ego, contender, *policy.arrays(), params, dt_sim)
    return bool(hit[0]), (float(t[0]) if hit[0] else None)


def policy_horizon(ego: VehicleState, params: ZoneParams) -> float:
    """Latest time the ego can still be moving."""
    v_react = min(ego.v + max(params.ego_reaction_accel[1], 0.0) * params.reaction_time,
                  params.v_max)
    return params.reaction_time + v_react / abs(params.a_brake)


def _vertices(params: ZoneParams, accel):
    s = params.steering_limit
    return [(d, a) for d in (-s, 0.0, s) for a in accel]


def coarse_policies(ego: VehicleState, params: ZoneParams):
    """Constant schedules, then one-switch schedules over vertex controls."""
    horizon = policy_horizon(ego, params)
    ev = _vertices(params, params.ego_reaction_accel)
    cv = _vertices(params, params.contender_accel)
    switch, eus, cus = [], [], []
    for e in ev:
        for c in cv:
            switch.append(horizon)
            eus.append([e] * MAX_SEGMENTS)
            cus.append([c] * MAX_SEGMENTS)
    for frac in COARSE_SWITCH_FRACTIONS:
        for e1 in ev:
            for c1 in cv:
                for e2 in ev:
                    for c2 in cv:
                        switch.append(frac * horizon)
                        eus.append([e1] + [e2] * (MAX_SEGMENTS - 1))
                        cus.append([c1] + [c2] * (MAX_SEGMENTS - 1))
    return np.array(switch), np.array(eus, dtype=float), np.array(cus, dtype=float)


def random_policies(ego: VehicleState, params: ZoneParams, n: int, rng: np.random.Generator):
    horizon = policy_horizon(ego, params)
    s = params.steering_limit
    nseg = rng.integers(2, MAX_SEGMENTS + 1, size=n)
    switch = rng.uniform(0.05, 1.0, size=n) * horizon / (nseg - 1)

    def draw(accel):
        delta = rng.choice([-s, 0.0, s], size=(n, MAX_SEGMENTS))
        a = rng.choice(np.array(accel, dtype=float), size=(n, MAX_SEGMENTS))
        soft = rng.random((n, MAX_SEGMENTS)) < 0.2
        delta = np.where(soft, rng.uniform(-s, s, size=(n, MAX_SEGMENTS)), delta)
        soft = rng.random((n, MAX_SEGMENTS)) < 0.2
        a = np.where(soft, rng.uniform(accel[0], accel[1], size=(n, MAX_SEGMENTS)), a)
        return np.stack([delta, a], axis=-1)

    eu = draw(params.ego_reaction_accel)
    cu = draw(params.contender_accel)
    # segments past nseg repeat the last active one
    seg = np.minimum(np.arange(MAX_SEGMENTS)[None, :], (nseg - 1)[:, None])
    rows = np.arange(n)[:, None]
    return switch, eu[rows, seg], cu[rows, seg]


def _policy_at(switch, eu, cu, i) -> RolloutPolicy:
    ego = [tuple(map(float, u)) for u in eu[i]]
    con = [tuple(map(float, u)) for u in cu[i]]
    # drop trailing repeats
    while len(ego) > 1 and ego[-1] == ego[-2] and con[-1] == con[-2]:
        ego.pop()
        con.pop()
    return RolloutPolicy(float(switch[i]), tuple(ego), tuple(con))


def search_collision(ego: VehicleState, contender: VehicleState, budget: int = 10_000,
                     seed: int = 0, params: ZoneParams | None = None, dt_sim: float = 0.02):
    """Look for a colliding schedule among ``budget`` candidates.

    Candidates are enumerated in a fixed order (coarse vertex schedules first,
    then seeded random ones) and the first colliding one in that order is
    returned, so the result does not depend on how the batch is executed.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    params = params or ZoneParams()
    switch, eu, cu = coarse_policies(ego, params)
    if budget > len(switch):
        rng = np.random.default_rng(seed)
        rs, re, rc = random_policies(ego, params, budget - len(switch), rng)
        switch = np.concatenate([switch, rs])
        eu = np.concatenate([eu, re])
        cu = np.concatenate([cu, rc])
    switch, eu, cu = switch[:budget], eu[:budget], cu[:budget]
    for start in range(0, budget, CHUNK):
        sl = slice(start, start + CHUNK)
        hit, _ = rollout_batch(ego, contender, switch[sl], eu[sl], cu[sl], params, dt_sim)
        if hit.any():
            i = start + int(np.argmax(hit))
            return True, _policy_at(switch, eu, cu, i)
    return False, None
