"""Collision target and the braking-to-reaction hand-off.

The terminal value is the signed distance between the two footprints. The
reaction phase starts from the braking tube sampled at each node's own
stopping time.
"""

from __future__ import annotations

import numpy as np

from .dynamics import VehicleGeometry
from .geometry import OrientedBox, signed_distance, signed_distance_arrays  # noqa: F401
from .grid import GridSpec, ScalarField


def stop_time(v_e, a_brake: float):
    if a_brake == 0:
        raise ValueError("a_brake must be non-zero")
    return v_e / abs(a_brake)


def pose_signed_distance(x_rel, y_rel, psi_rel, geom: VehicleGeometry) -> np.ndarray:
    """Signed distance for relative rear-axle poses; ego sits at the origin facing +x."""
    off = geom.center_offset
    x_rel, y_rel, psi_rel = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                                  for v in (x_rel, y_rel, psi_rel)))
    ego = (off, 0.0, 0.0, geom.length, geom.width)
    other = (x_rel + off * np.cos(psi_rel), y_rel + off * np.sin(psi_rel), psi_rel,
             geom.length, geom.width)
    return signed_distance_arrays(ego, other)


def terminal_field(spec: GridSpec, geom: VehicleGeometry) -> ScalarField:
    x, y, psi = np.meshgrid(spec.axis(0), spec.axis(1), spec.axis(2), indexing="ij")
    sd = pose_signed_distance(x, y, psi, geom)
    values = np.broadcast_to(sd[:, :, :, None, None], spec.shape)
    return ScalarField(spec, values)


def reaction_initial(v_brake, spec: GridSpec, a_brake: float) -> ScalarField:
    """Braking tube read at t = -stop_time(v_e), linear in time between checkpoints."""
    times = np.asarray(v_brake.times)
    out = np.empty(spec.shape, dtype=np.float32)
    for j, ve in enumerate(spec.axis(3)):
        t = -stop_time(float(ve), a_brake)
        if t < times[-1] - 1e-9 or t > times[0] + 1e-9:
            raise ValueError(f"stopping time {-t:.3f}s outside stored braking span")
        # times are decreasing from 0
        k = int(np.searchsorted(-times, -t, side="right")) - 1
        k = min(max(k, 0), len(times) - 2)
        t0, t1 = times[k], times[k + 1]
        w = (t0 - t) / (t0 - t1)
        w = min(max(w, 0.0), 1.0)
        v0 = v_brake.fields[k].values[:, :, :, j, :].astype(np.float64)
        v1 = v_brake.fields[k + 1].values[:, :, :, j, :].astype(np.float64)
        out[:, :, :, j, :] = ((1 - w) * v0 + w * v1).astype(np.float32)
    return ScalarField(spec, out)
