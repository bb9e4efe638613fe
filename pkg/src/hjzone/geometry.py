"""Oriented rectangles: signed distance, overlap tests and polygon clipping.

All array functions broadcast over leading dimensions so the terminal field
and batched rollouts can evaluate thousands of box pairs at once.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np


class OrientedBox(NamedTuple):
    x: float
    y: float
    psi: float
    length: float
    width: float


def box_corners(x, y, psi, length, width) -> np.ndarray:
    """Corners in counter-clockwise order, shape (..., 4, 2)."""
    x, y, psi, length, width = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                                     for v in (x, y, psi, length, width)))
    c, s = np.cos(psi), np.sin(psi)
    hl, hw = length / 2, width / 2
    signs = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
    # local offsets (sl*hl, sw*hw) rotated into the world
    lx = signs[:, 0] * hl[..., None]
    ly = signs[:, 1] * hw[..., None]
    cx = x[..., None] + c[..., None] * lx - s[..., None] * ly
    cy = y[..., None] + s[..., None] * lx + c[..., None] * ly
    return np.stack([cx, cy], axis=-1)


def _axis_separations(a, b):
    """Gap along each of the four SAT axes, shape (..., 4). Positive = separating."""
    ax, ay, apsi, al, aw = a
    bx, by, bpsi, bl, bw = b
    dx = np.asarray(bx) - ax
    dy = np.asarray(by) - ay
    ca, sa = np.cos(apsi), np.sin(apsi)
    cb, sb = np.cos(bpsi), np.sin(bpsi)
    seps = []
    for nx, ny in ((ca, sa), (-sa, ca), (cb, sb), (-sb, cb)):
        ra = al / 2 * np.abs(ca * nx + sa * ny) + aw / 2 * np.abs(-sa * nx + ca * ny)
        rb = bl / 2 * np.abs(cb * nx + sb * ny) + bw / 2 * np.abs(-sb * nx + cb * ny)
        seps.append(np.abs(dx * nx + dy * ny) - ra - rb)
    return np.stack(np.broadcast_arrays(*seps), axis=-1)


def boxes_overlap(a, b) -> np.ndarray:
    """True where interiors intersect (equivalently signed distance < 0)."""
    return np.max(_axis_separations(a, b), axis=-1) < 0


def _point_segment_distance(p, s0, s1):
    d = s1 - s0
    t = np.sum((p - s0) * d, axis=-1) / np.sum(d * d, axis=-1)
    t = np.clip(t, 0.0, 1.0)
    closest = s0 + t[..., None] * d
    return np.hypot(*np.moveaxis(p - closest, -1, 0))


def _polygon_distance(ca, cb):
    """Minimum distance between the boundaries of two quads, (..., 4, 2) each."""
    ea0, ea1 = ca, np.roll(ca, -1, axis=-2)
    eb0, eb1 = cb, np.roll(cb, -1, axis=-2)
    # vertices of one against edges of the other, both ways: (..., 4, 4)
    d1 = _point_segment_distance(ca[..., :, None, :], eb0[..., None, :, :], eb1[..., None, :, :])
    d2 = _point_segment_distance(cb[..., :, None, :], ea0[..., None, :, :], ea1[..., None, :, :])
    return np.minimum(d1.min(axis=(-1, -2)), d2.min(axis=(-1, -2)))


def signed_distance_arrays(a, b) -> np.ndarray:
    """Vectorised signed distance; ``a``/``b`` are (x, y, psi, length, width) tuples.

    Separated boxes give the Euclidean gap. Overlapping boxes give minus the
    minimum-translation depth, which for rectangles is the smallest overlap over
    the four edge normals.
    """
    seps = _axis_separations(a, b)
    worst = seps.max(axis=-1)
    out = np.array(worst, dtype=float, copy=True)
    apart = worst > 0
    if np.any(apart):
        ca = box_corners(*a)
        cb = box_corners(*b)
        ca, cb = np.broadcast_arrays(ca, cb)
        ca = np.broadcast_to(ca, seps.shape[:-1] + (4, 2))
        cb = np.broadcast_to(cb, seps.shape[:-1] + (4, 2))
        out[apart] = _polygon_distance(ca[apart], cb[apart])
    return out


def signed_distance(a: OrientedBox, b: OrientedBox) -> float:
    return float(signed_distance_arrays(tuple(a), tuple(b)))


def box_polygon(box: OrientedBox) -> np.ndarray:
    return box_corners(*box)


def _clip(subject: list, p0, p1) -> list:
    """Keep the part of ``subject`` left of the directed edge p0->p1 (Sutherland-Hodgman)."""
    def side(q):
        return (p1[0] - p0[0]) * (q[1] - p0[1]) - (p1[1] - p0[1]) * (q[0] - p0[0])

    out = []
    n = len(subject)
    for i in range(n):
        cur, nxt = subject[i], subject[(i + 1) % n]
        sc, sn = side(cur), side(nxt)
        if sc >= 0:
            out.append(cur)
        if (sc >= 0) != (sn >= 0):
            t = sc / (sc - sn)
            out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
    return out


def polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    xs = np.array([p[0] for p in poly])
    ys = np.array([p[1] for p in poly])
    return 0.5 * abs(float(np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))))


def intersection_area(a: OrientedBox, b: OrientedBox) -> float:
    poly = [tuple(p) for p in box_polygon(a)]
    clip = [tuple(p) for p in box_polygon(b)]
    for i in range(4):
        if not poly:
            return 0.0
        poly = _clip(poly, clip[i], clip[(i + 1) % 4])
    return polygon_area(poly)


def oriented_iou(a: OrientedBox, b: OrientedBox) -> float:
    inter = intersection_area(a, b)
    union = a.length * a.width + b.length * b.width - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def center_box(x: float, y: float, psi: float, length: float, width: float,
               offset: float) -> OrientedBox:
    """Footprint of a vehicle whose reference point sits ``offset`` behind the box centre."""
    return OrientedBox(x + offset * math.cos(psi), y + offset * math.sin(psi), psi, length, width)
