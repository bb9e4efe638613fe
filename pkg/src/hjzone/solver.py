"""Explicit level-set solver for the frozen backward reachability PDE.

Every scheme advances ``V <- V + dt * min(0, H_num)``, so the sub-zero set
only grows and a reachable set becomes a tube.

``eno2`` (default)
    Second-order ENO one-sided differences with a two-stage TVD Runge-Kutta
    step. ``H_num`` is the exact minimum over both control boxes of the
    upwinded sum ``f_i * D_i`` (``D+`` where the rate is positive, ``D-``
    otherwise).
``upwind``
    The same control minimisation on first-order differences, explicit Euler.
``lf-local`` / ``lf-global``
    Lax-Friedrichs: the analytic Hamiltonian at the central-difference
    gradient plus ``sum_i alpha_i (D+ V - D- V) / 2`` with node-local or
    domain-wide ``alpha``. Stable but strongly diffusive at the default
    resolution.
"""

from __future__ import annotations

import logging
import sys
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from ._kernels import eno2_rate, euler_update, heun_combine, lf_step, upwind_step
from .config import ZoneParams
from .dynamics import PhaseSpec, VehicleGeometry, dissipation_bounds
from .grid import GridSpec, ScalarField
from .terminal import reaction_initial, terminal_field

log = logging.getLogger(__name__)


SCHEMES = ("eno2", "upwind", "lf-local", "lf-global")


class CFLError(ValueError):
    pass


class SolverInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    phase: PhaseSpec
    geometry: VehicleGeometry
    horizon: float
    cfl: float = 0.8
    checkpoint_interval: float = 0.1
    scheme: str = "eno2"
    # keep every checkpoint, or only t=0 and the final slice
    keep_checkpoints: bool = True

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise ValueError(f"CFL number must lie in (0, 1), got {self.cfl}")
        if self.checkpoint_interval <= 0:
            raise ValueError("checkpoint interval must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass
class ValueFunction:
    spec: GridSpec
    times: list[float] = field(default_factory=list)
    fields: list[ScalarField] = field(default_factory=list)

    def append(self, t: float, f: ScalarField):
        if self.times and not t < self.times[-1]:
            raise ValueError("checkpoint times must strictly decrease")
        self.times.append(float(t))
        self.fields.append(f)

    @property
    def final(self) -> ScalarField:
        return self.fields[-1]

    def monotonicity_violations(self) -> int:
        """Node count where a later checkpoint exceeds its predecessor."""
        return int(sum(np.count_nonzero(b.values > a.values)
                       for a, b in zip(self.fields, self.fields[1:])))


def set_workers(workers: int | None):
    if workers is None:
        workers = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS)))


def cfl_rate(spec: GridSpec, alpha) -> float:
    """sum_i alpha_i / dx_i; a step is admissible when dt * rate <= CFL."""
    return float(np.sum(np.asarray(alpha) / spec.spacing))


def _step_values(values: np.ndarray, out: np.ndarray, spec: GridSpec, dt: float,
                 consts: np.ndarray, alpha: np.ndarray, scheme: str, work=None):
    axes = [np.ascontiguousarray(a, dtype=np.float64) for a in spec.axes()]
    h = spec.spacing.astype(np.float64)
    if scheme == "eno2":
        # two-stage TVD Runge-Kutta; every stage only lowers values
        rate, stage = work if work is not None else (np.empty_like(values), np.empty_like(values))
        eno2_rate(values, rate, *axes, h, spec.periodic[2], consts)
        euler_update(values, rate, stage, float(dt))
        eno2_rate(stage, rate, *axes, h, spec.periodic[2], consts)
        heun_combine(values, stage, rate, out, float(dt))
    elif scheme == "upwind":
        upwind_step(values, out, *axes, h, spec.periodic[2], consts, float(dt))
    else:
        lf_step(values, out, *axes, h, spec.periodic[2], consts,
                np.asarray(alpha, dtype=np.float64), scheme == "lf-local", float(dt))


def step(field: ScalarField, dt: float, phase: PhaseSpec, alpha, geom: VehicleGeometry,
         scheme: str = "eno2", cfl: float = 1.0) -> ScalarField:
    """One backward step of size ``dt`` (> 0)."""
    spec = field.spec
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt * cfl_rate(spec, alpha) > cfl + 1e-12:
        raise CFLError(f"dt={dt:g} violates CFL bound {cfl}")
    out = np.empty(spec.shape, dtype=np.float32)
    _step_values(np.ascontiguousarray(field.values), out, spec, dt, phase.constants(geom),
                 alpha, scheme)
    return ScalarField(spec, out)


def solve_phase(initial: ScalarField, config: SolveConfig, progress: bool = False,
                label: str = "") -> ValueFunction:
    """Integrate from t=0 back to t=-horizon with the largest admissible step."""
    spec = initial.spec
    alpha = dissipation_bounds(config.phase, config.geometry, spec)
    dt_max = config.cfl / cfl_rate(spec, alpha)
    consts = config.phase.constants(config.geometry)

    vf = ValueFunction(spec)
    vf.append(0.0, initial)
    cur = np.array(initial.values, dtype=np.float32, order="C")
    nxt = np.empty_like(cur)
    work = (np.empty_like(cur), np.empty_like(cur)) if config.scheme == "eno2" else None
    horizon = config.horizon
    # checkpoints on a fixed lattice of the interval, plus the horizon itself
    n_ck = int(np.floor(horizon / config.checkpoint_interval + 1e-9))
    marks = [k * config.checkpoint_interval for k in range(1, n_ck + 1)]
    if not marks or horizon - marks[-1] > 1e-9:
        marks.append(horizon)
    else:
        marks[-1] = horizon

    elapsed = 0.0
    n_steps = 0
    started = time.perf_counter()
    for k, mark in enumerate(marks):
        while mark - elapsed > 1e-12:
            dt = min(dt_max, mark - elapsed)
            _step_values(cur, nxt, spec, dt, consts, alpha, config.scheme, work)
            cur, nxt = nxt, cur
            elapsed = mark if mark - elapsed - dt <= 1e-12 else elapsed + dt
            n_steps += 1
        if not np.all(np.isfinite(cur)):
            raise SolverInstabilityError(
                f"non-finite values after {n_steps} steps at t=-{elapsed:.4f}s ({label})")
        if config.keep_checkpoints or k == len(marks) - 1:
            vf.append(-elapsed, ScalarField(spec, cur.copy()))
        if progress:
            print(f"[{label}] t=-{elapsed:.3f}s steps={n_steps} "
                  f"wall={time.perf_counter() - started:.1f}s", file=sys.stderr, flush=True)
    log.debug("%s: %d steps, dt_max=%.5f", label, n_steps, dt_max)
    return vf


@dataclass
class TwoPhaseResult:
    braking: ValueFunction
    reaction: ValueFunction
    terminal: ScalarField

    @property
    def final(self) -> ScalarField:
        return self.reaction.final


def solve_two_phase(spec: GridSpec, params: ZoneParams, cfl: float = 0.8,
                    checkpoint_interval: float = 0.1, scheme: str = "eno2",
                    workers: int | None = None, progress: bool = False) -> TwoPhaseResult:
    """Braking tube from the collision target, then the reaction tube from its hand-off."""
    set_workers(workers)
    geom = params.geometry()
    target = terminal_field(spec, geom)
    braking_cfg = SolveConfig(params.braking_phase(), geom, params.stop_horizon(), cfl,
                              checkpoint_interval, scheme)
    braking = solve_phase(target, braking_cfg, progress, "braking")
    start = reaction_initial(braking, spec, params.a_brake)
    if params.reaction_time > 0:
        reaction_cfg = SolveConfig(params.reaction_phase(), geom, params.reaction_time, cfl,
                                   params.reaction_time, scheme, keep_checkpoints=False)
        reaction = solve_phase(start, reaction_cfg, progress, "reaction")
    else:
        reaction = ValueFunction(spec, [0.0], [start])
    return TwoPhaseResult(braking, reaction, target)
