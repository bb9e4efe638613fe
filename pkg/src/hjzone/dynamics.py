"""Extended simple-car dynamics for the ego/contender pair.

World-frame state per vehicle is ``[x, y, psi, v]`` with ``(x, y)`` the rear
axle midpoint. The relative state ``z = [x_rel, y_rel, psi_rel, v_e, v_c]``
expresses the contender's rear axle in the ego body frame.

Speeds are held inside ``[0, v_max]`` by zeroing the acceleration whenever it
would push a speed across a bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .grid import GridSpec


class VehicleState(NamedTuple):
    x: float
    y: float
    psi: float
    v: float


class RelativeState(NamedTuple):
    x_rel: float
    y_rel: float
    psi_rel: float
    v_e: float
    v_c: float


@dataclass(frozen=True)
class VehicleGeometry:
    length: float = 4.5
    width: float = 2.5
    axle_distance: float = 3.0
    v_max: float = 20.0

    def __post_init__(self):
        if min(self.length, self.width, self.axle_distance, self.v_max) <= 0:
            raise ValueError("vehicle dimensions and v_max must be positive")
        if self.axle_distance > self.length:
            raise ValueError("axle distance cannot exceed vehicle length")

    @property
    def center_offset(self) -> float:
        """Distance from the rear-axle point forward to the footprint centre."""
        return self.length / 2 - self.axle_distance / 2


@dataclass(frozen=True)
class ControlBounds:
    steer: tuple[float, float]
    accel: tuple[float, float]
    fixed_accel: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "steer", tuple(float(s) for s in self.steer))
        object.__setattr__(self, "accel", tuple(float(a) for a in self.accel))
        if self.steer[0] > self.steer[1] or self.accel[0] > self.accel[1]:
            raise ValueError("control interval must satisfy lo <= hi")
        if max(abs(s) for s in self.steer) >= math.pi / 2:
            raise ValueError("steering must stay inside (-pi/2, pi/2)")

    @property
    def accel_interval(self) -> tuple[float, float]:
        if self.fixed_accel is not None:
            return (float(self.fixed_accel), float(self.fixed_accel))
        return self.accel

    @property
    def tan_steer(self) -> tuple[float, float]:
        # tan is increasing on (-pi/2, pi/2), so endpoints map to endpoints
        return (math.tan(self.steer[0]), math.tan(self.steer[1]))


@dataclass(frozen=True)
class PhaseSpec:
    ego: ControlBounds
    contender: ControlBounds
    label: str

    def __post_init__(self):
        if self.label not in ("reaction", "braking"):
            raise ValueError(f"unknown phase label {self.label!r}")
        if self.label == "braking" and self.ego.fixed_accel is None:
            raise ValueError("braking phase needs a fixed ego deceleration")

    def constants(self, geom: VehicleGeometry) -> np.ndarray:
        """Packed float64 constants consumed by the compiled kernels."""
        te = self.ego.tan_steer
        tc = self.contender.tan_steer
        ae = self.ego.accel_interval
        ac = self.contender.accel_interval
        return np.array([te[0], te[1], ae[0], ae[1], tc[0], tc[1], ac[0], ac[1],
                         1.0 / geom.axle_distance, 0.0, geom.v_max])


def wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def to_relative(ego: VehicleState, contender: VehicleState) -> RelativeState:
    dx = contender.x - ego.x
    dy = contender.y - ego.y
    c, s = math.cos(ego.psi), math.sin(ego.psi)
    return RelativeState(c * dx + s * dy, -s * dx + c * dy,
                         wrap(contender.psi - ego.psi), ego.v, contender.v)


def from_relative(ego: VehicleState, z: RelativeState) -> VehicleState:
    """World pose of the contender given the ego pose; inverse of :func:`to_relative`."""
    c, s = math.cos(ego.psi), math.sin(ego.psi)
    return VehicleState(ego.x + c * z[0] - s * z[1], ego.y + s * z[0] + c * z[1],
                        wrap(ego.psi + z[2]), z[4])


def _clamped_accel(v, a, v_max):
    stuck = ((v <= 0) & (a < 0)) | ((v >= v_max) & (a > 0))
    return np.where(stuck, 0.0, a)


def vehicle_flow(w, u, geom: VehicleGeometry):
    """Rates of a single vehicle; ``w`` and ``u`` broadcast over leading axes."""
    _, _, psi, v = (np.asarray(c, dtype=float) for c in w)
    delta, a = u
    return np.stack(np.broadcast_arrays(v * np.cos(psi), v * np.sin(psi),
                                        v / geom.axle_distance * np.tan(delta),
                                        _clamped_accel(v, a, geom.v_max)))


def joint_flow(ego, contender, u_e, u_c, geom: VehicleGeometry):
    return vehicle_flow(ego, u_e, geom), vehicle_flow(contender, u_c, geom)


def relative_flow(z, u_e, u_c, geom: VehicleGeometry) -> np.ndarray:
    """Relative-state rates. Inputs may be arrays; output has shape (5, ...)."""
    x, y, psi, ve, vc = (np.asarray(c, dtype=float) for c in z)
    de, ae = u_e
    dc, ac = u_c
    te = np.tan(de)
    tc = np.tan(dc)
    k = 1.0 / geom.axle_distance
    out = np.broadcast_arrays(
        vc * np.cos(psi) - ve + y * ve * k * te,
        vc * np.sin(psi) - x * ve * k * te,
        vc * k * tc - ve * k * te,
        _clamped_accel(ve, ae, geom.v_max),
        _clamped_accel(vc, ac, geom.v_max),
    )
    return np.stack(out)


@njit(cache=True)
def hamiltonian_min(x, y, psi, ve, vc, px, py, pp, pve, pvc, c):
    """min over both control boxes of p . f(z, u_e, u_c); ``c`` from PhaseSpec.constants."""
    inv_d = c[8]
    ae_lo, ae_hi = c[2], c[3]
    ac_lo, ac_hi = c[6], c[7]
    if ve <= c[9]:
        ae_lo, ae_hi = max(ae_lo, 0.0), max(ae_hi, 0.0)
    elif ve >= c[10]:
        ae_lo, ae_hi = min(ae_lo, 0.0), min(ae_hi, 0.0)
    if vc <= c[9]:
        ac_lo, ac_hi = max(ac_lo, 0.0), max(ac_hi, 0.0)
    elif vc >= c[10]:
        ac_lo, ac_hi = min(ac_lo, 0.0), min(ac_hi, 0.0)
    h = px * (vc * math.cos(psi) - ve) + py * vc * math.sin(psi)
    ce = ve * inv_d * (px * y - py * x - pp)
    h += min(ce * c[0], ce * c[1])
    cc = vc * inv_d * pp
    h += min(cc * c[4], cc * c[5])
    h += min(pve * ae_lo, pve * ae_hi)
    h += min(pvc * ac_lo, pvc * ac_hi)
    return h


def hamiltonian(z, p, phase: PhaseSpec, geom: VehicleGeometry) -> float:
    z = [float(v) for v in z]
    p = [float(v) for v in p]
    return float(hamiltonian_min(*z, *p, phase.constants(geom)))


def dissipation_bounds(phase: PhaseSpec, geom: VehicleGeometry, spec: GridSpec) -> np.ndarray:
    """Per-axis bound on |f_i| over the whole grid box and both control sets."""
    te = max(abs(t) for t in phase.ego.tan_steer)
    tc = max(abs(t) for t in phase.contender.tan_steer)
    x_max = max(abs(spec.lo[0]), abs(spec.hi[0]))
    y_max = max(abs(spec.lo[1]), abs(spec.hi[1]))
    ve_max = max(abs(spec.lo[3]), abs(spec.hi[3]))
    vc_max = max(abs(spec.lo[4]), abs(spec.hi[4]))
    d = geom.axle_distance
    return np.array([
        vc_max + ve_max * (1 + y_max * te / d),
        vc_max + x_max * ve_max * te / d,
        (vc_max * tc + ve_max * te) / d,
        max(abs(a) for a in phase.ego.accel_interval),
        max(abs(a) for a in phase.contender.accel_interval),
    ])
