"""Zone completeness against the rollout oracle.

Random relative states are drawn around the ego; whenever the oracle finds a
colliding schedule, the zone value at that state should be below one
position-cell diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import VehicleState
from .grid import interpolate
from .oracle import search_collision

# Sampling box for relative positions. Wide enough to contain every state
# the oracle can witness from the default speed range in practice, narrow
# enough that a useful share of samples collide.
DEFAULT_HALF_EXTENT = (80.0, 50.0)


@dataclass
class CompletenessSample:
    state: tuple
    witnessed: bool
    value: float


@dataclass
class CompletenessReport:
    epsilon: float
    samples: list = field(default_factory=list)

    @property
    def witnessed(self) -> int:
        return sum(s.witnessed for s in self.samples)

    @property
    def violations(self) -> list:
        return [s for s in self.samples if s.witnessed and s.value >= self.epsilon]

    @property
    def violation_rate(self) -> float:
        w = self.witnessed
        return len(self.violations) / w if w else 0.0

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "samples": len(self.samples),
                "witnessed": self.witnessed, "violations": len(self.violations),
                "violation_rate": self.violation_rate,
                "violating_states": [list(s.state) for s in self.violations]}


def sample_state(rng: np.random.Generator, spec, half_extent=DEFAULT_HALF_EXTENT) -> tuple:
    hx = min(half_extent[0], spec.hi[0], -spec.lo[0])
    hy = min(half_extent[1], spec.hi[1], -spec.lo[1])
    return (float(rng.uniform(-hx, hx)), float(rng.uniform(-hy, hy)),
            float(rng.uniform(-math.pi, math.pi)),
            float(rng.uniform(spec.lo[3], spec.hi[3])),
            float(rng.uniform(spec.lo[4], spec.hi[4])))


def completeness_check(art, samples: int = 100, seed: int = 0, budget: int = 10_000,
                       min_witnessed: int = 0, max_samples: int | None = None,
                       half_extent=DEFAULT_HALF_EXTENT, dt_sim: float = 0.02) -> CompletenessReport:
    """Draw ``samples`` states, continuing until ``min_witnessed`` collide
    (capped at ``max_samples``), and record the zone value at each."""
    spec = art.spec
    report = CompletenessReport(spec.position_cell_diagonal())
    rng = np.random.default_rng(seed)
    cap = max_samples if max_samples is not None else max(samples, 20 * min_witnessed)
    i = 0
    while i < samples or (report.witnessed < min_witnessed and i < cap):
        z = sample_state(rng, spec, half_extent)
        ego = VehicleState(0.0, 0.0, 0.0, z[3])
        contender = VehicleState(z[0], z[1], z[2], z[4])
        found, _ = search_collision(ego, contender, budget, seed=seed * 1_000_003 + i,
                                    params=art.params, dt_sim=dt_sim)
        report.samples.append(CompletenessSample(z, bool(found), interpolate(art.field, z)))
        i += 1
    return report
