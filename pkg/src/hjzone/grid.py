"""Rectilinear 5D grid over the relative state with one periodic heading axis.

Nodes sit at cell centres, ``lo + (i + 0.5) * (hi - lo) / n``. Fields are
float32 arrays in C (axis-major) order, so the flat layout matches the
on-disk payload.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

NDIM = 5
PERIODIC_AXIS = 2
AXIS_NAMES = ("x_rel", "y_rel", "psi_rel", "v_e", "v_c")


class OutOfDomainError(ValueError):
    """Query point lies outside a non-periodic axis range."""


@dataclass(frozen=True)
class GridSpec:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]
    periodic: tuple[bool, ...] = (False, False, True, False, False)

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "counts", tuple(int(v) for v in self.counts))
        object.__setattr__(self, "periodic", tuple(bool(v) for v in self.periodic))
        if not (len(self.lo) == len(self.hi) == len(self.counts) == len(self.periodic) == NDIM):
            raise ValueError("grid spec needs exactly 5 axes")
        for i in range(NDIM):
            if not self.lo[i] < self.hi[i]:
                raise ValueError(f"axis {i}: lower bound must be below upper bound")
            if self.counts[i] < 3:
                raise ValueError(f"axis {i}: need at least 3 cells")
            if self.periodic[i]:
                if i != PERIODIC_AXIS:
                    raise ValueError(f"axis {i} cannot be periodic")
                if abs(self.hi[i] - self.lo[i] - 2 * math.pi) > 1e-9:
                    raise ValueError("periodic axis must span 2*pi")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.counts)

    def axis(self, i: int) -> np.ndarray:
        """Node coordinates along axis ``i``."""
        return self.lo[i] + (np.arange(self.counts[i]) + 0.5) * self.spacing[i]

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(NDIM)]

    def position_cell_diagonal(self) -> float:
        dx, dy = self.spacing[:2]
        return float(math.hypot(dx, dy))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi),
                "counts": list(self.counts), "periodic": list(self.periodic)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(d["lo"], d["hi"], d["counts"], d.get("periodic", (False, False, True, False, False)))


def default_spec(counts: Sequence[int] = (40, 40, 20, 15, 15), v_max: float = 20.0) -> GridSpec:
    return GridSpec(lo=(-150.0, -100.0, -math.pi, 0.0, 0.0),
                    hi=(150.0, 100.0, math.pi, v_max, v_max),
                    counts=tuple(counts))


def smoke_spec(v_max: float = 20.0) -> GridSpec:
    return default_spec((10, 10, 8, 5, 5), v_max=v_max)


@dataclass(frozen=True)
class ScalarField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.size != self.spec.size:
            raise ValueError(f"field has {values.size} values, grid needs {self.spec.size}")
        values = values.reshape(self.spec.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> "ScalarField":
        """Sample ``fn(x, y, psi, v_e, v_c)`` (broadcasting) at every node."""
        mesh = np.meshgrid(*spec.axes(), indexing="ij", sparse=True)
        return cls(spec, np.broadcast_to(fn(*mesh), spec.shape))


def wrap_angle(a):
    """Wrap to [-pi, pi)."""
    return (np.asarray(a) + math.pi) % (2 * math.pi) - math.pi


def node_coordinates(spec: GridSpec, index: Sequence[int]) -> tuple[float, ...]:
    if len(index) != NDIM:
        raise IndexError("need a 5-component index")
    out = []
    for i, k in enumerate(index):
        if not 0 <= k < spec.counts[i]:
            raise IndexError(f"index {k} out of range on axis {i}")
        out.append(float(spec.lo[i] + (k + 0.5) * spec.spacing[i]))
    return tuple(out)


def ghost_value(field: ScalarField, index: Sequence[int], axis: int) -> float:
    """Value at an index one step past a non-periodic boundary (linear extrapolation)
    or anywhere along the periodic axis (wrap)."""
    spec = field.spec
    index = list(index)
    for i, k in enumerate(index):
        if i != axis and not 0 <= k < spec.counts[i]:
            raise IndexError(f"index out of range on axis {i}, only axis {axis} may be a ghost")
    n = spec.counts[axis]
    k = index[axis]
    if spec.periodic[axis]:
        index[axis] = k % n
        return float(field.values[tuple(index)])
    if 0 <= k < n:
        return float(field.values[tuple(index)])
    if k == -1:
        a, b = 0, 1
    elif k == n:
        a, b = n - 1, n - 2
    else:
        raise IndexError(f"ghost index {k} is more than one cell outside axis {axis}")
    index[axis] = a
    va = float(field.values[tuple(index)])
    index[axis] = b
    vb = float(field.values[tuple(index)])
    return 2.0 * va - vb


def _axis_weights(spec: GridSpec, points: np.ndarray):
    lo = np.array(spec.lo)
    hi = np.array(spec.hi)
    h = spec.spacing
    i0s, i1s, ws = [], [], []
    for i in range(NDIM):
        q = points[:, i]
        n = spec.counts[i]
        if spec.periodic[i]:
            s = ((q - lo[i]) / h[i] - 0.5) % n
            i0 = np.floor(s).astype(np.intp)
            w = s - i0
            i0 %= n
            i1 = (i0 + 1) % n
        else:
            bad = (q < lo[i]) | (q > hi[i]) | ~np.isfinite(q)
            if np.any(bad):
                raise OutOfDomainError(f"{AXIS_NAMES[i]} outside [{lo[i]}, {hi[i]}]")
            # half-cell borders hold the edge node value
            s = np.clip((q - lo[i]) / h[i] - 0.5, 0.0, n - 1.0)
            i0 = np.minimum(np.floor(s).astype(np.intp), n - 2)
            w = s - i0
            i1 = i0 + 1
        i0s.append(i0)
        i1s.append(i1)
        ws.append(w)
    return i0s, i1s, ws


def interpolate_many(field: ScalarField, points) -> np.ndarray:
    """Multilinear interpolation at an (N, 5) array of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    i0s, i1s, ws = _axis_weights(field.spec, pts)
    vals = field.values
    out = np.zeros(len(pts))
    for corner in product((0, 1), repeat=NDIM):
        idx = tuple(i1s[a] if c else i0s[a] for a, c in enumerate(corner))
        weight = np.ones(len(pts))
        for a, c in enumerate(corner):
            weight *= ws[a] if c else 1.0 - ws[a]
        out += weight * vals[idx]
    return out


def interpolate(field: ScalarField, z) -> float:
    return float(interpolate_many(field, np.asarray(z, dtype=np.float64)[None, :])[0])
