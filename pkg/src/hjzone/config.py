"""Physical and evaluation parameters for the safety-zone computation.

Defaults reproduce the parameter table used for the vehicle false-positive
requirement: 0.5 s reaction delay followed by a 3.5 m/s^2 stop.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

from .dynamics import ControlBounds, PhaseSpec, VehicleGeometry

VEHICLE_LABELS = ("car", "truck", "bus", "trailer", "construction_vehicle", "vehicle")


@dataclass(frozen=True)
class ZoneParams:
    score_threshold: float = 0.3
    iou_threshold: float = 0.5
    v_max: float = 20.0
    a_brake: float = -3.5
    contender_accel: tuple[float, float] = (-4.5, 4.5)
    # Ego bounds during the reaction delay; the source table only says "any".
    ego_reaction_accel: tuple[float, float] = (-4.5, 4.5)
    steering_limit_deg: float = 10.0
    length: float = 4.5
    width: float = 2.5
    axle_distance: float = 3.0
    reaction_time: float = 0.5
    agent_class: str = "vehicle"
    eval_labels: tuple[str, ...] = field(default=VEHICLE_LABELS)

    def __post_init__(self):
        for name in ("contender_accel", "ego_reaction_accel", "eval_labels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must lie in [0, 1]")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must lie in (0, 1]")
        if self.a_brake >= 0:
            raise ValueError("a_brake must be negative")
        for lo, hi in (self.contender_accel, self.ego_reaction_accel):
            if lo > hi:
                raise ValueError("acceleration interval must satisfy lo <= hi")
        if not 0.0 < self.steering_limit_deg < 90.0:
            raise ValueError("steering_limit_deg must lie in (0, 90)")
        if self.reaction_time < 0:
            raise ValueError("reaction_time must be non-negative")
        # VehicleGeometry validates the rest
        self.geometry()

    @property
    def steering_limit(self) -> float:
        return math.radians(self.steering_limit_deg)

    def geometry(self) -> VehicleGeometry:
        return VehicleGeometry(self.length, self.width, self.axle_distance, self.v_max)

    def contender_bounds(self) -> ControlBounds:
        s = self.steering_limit
        return ControlBounds((-s, s), self.contender_accel)

    def reaction_phase(self) -> PhaseSpec:
        s = self.steering_limit
        return PhaseSpec(ControlBounds((-s, s), self.ego_reaction_accel),
                         self.contender_bounds(), "reaction")

    def braking_phase(self) -> PhaseSpec:
        s = self.steering_limit
        ego = ControlBounds((-s, s), (self.a_brake, self.a_brake), fixed_accel=self.a_brake)
        return PhaseSpec(ego, self.contender_bounds(), "braking")

    def stop_horizon(self) -> float:
        """Braking time from top speed."""
        return self.v_max / abs(self.a_brake)

    def max_closing_displacement(self) -> float:
        """Upper bound on how far apart (state points) two vehicles can start and still touch.

        Ego covers at most v_max*reaction + v_max^2/(2|a_brake|) before stopping;
        the contender covers at most v_max over the whole horizon; each footprint
        reaches at most its farthest corner from the rear-axle point.
        """
        ego = self.v_max * self.reaction_time + self.v_max ** 2 / (2 * abs(self.a_brake))
        contender = self.v_max * (self.reaction_time + self.stop_horizon())
        front = self.length / 2 + self.axle_distance / 2
        corner = math.hypot(front, self.width / 2)
        return ego + contender + 2 * corner

    def to_dict(self) -> dict:
        d = asdict(self)
        d["contender_accel"] = list(self.contender_accel)
        d["ego_reaction_accel"] = list(self.ego_reaction_accel)
        d["eval_labels"] = list(self.eval_labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ZoneParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**d)
