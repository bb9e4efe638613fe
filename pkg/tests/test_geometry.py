"""Signed distance and oriented IoU against brute-force raster and point-sampling oracles."""

import math

import numpy as np
import pytest

from hjzone.geometry import (OrientedBox, box_corners, boxes_overlap, intersection_area,
                             oriented_iou, signed_distance)


def random_pair(rng, spread=6.0):
    a = OrientedBox(0.0, 0.0, rng.uniform(-math.pi, math.pi), rng.uniform(1, 5), rng.uniform(1, 3))
    b = OrientedBox(*rng.uniform(-spread, spread, 2), rng.uniform(-math.pi, math.pi),
                    rng.uniform(1, 5), rng.uniform(1, 3))
    return a, b


def _inside(box, px, py):
    c, s = math.cos(box.psi), math.sin(box.psi)
    dx, dy = px - box.x, py - box.y
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (np.abs(u) <= box.length / 2) & (np.abs(v) <= box.width / 2)


def raster_iou(a, b, res=0.01):
    ca, cb = box_corners(*a), box_corners(*b)
    pts = np.vstack([ca, cb])
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    xs = np.arange(x0 + res / 2, x1, res)
    ys = np.arange(y0 + res / 2, y1, res)
    X, Y = np.meshgrid(xs, ys)
    ia, ib = _inside(a, X, Y), _inside(b, X, Y)
    inter = np.count_nonzero(ia & ib)
    union = np.count_nonzero(ia | ib)
    return inter / union if union else 0.0


def _boundary(box, res=0.01):
    c = box_corners(*box)
    pts = []
    for i in range(4):
        p, q = c[i], c[(i + 1) % 4]
        n = max(2, int(np.hypot(*(q - p)) / res) + 1)
        t = np.linspace(0, 1, n)[:, None]
        pts.append(p + t * (q - p))
    return np.vstack(pts)


def sampled_signed_distance(a, b, res=0.01):
    """Separation from boundary samples; penetration as the least translation over
    a fine sweep of directions that separates the projections."""
    pa, pb = _boundary(a, res), _boundary(b, res)
    ina = _inside(a, pb[:, 0], pb[:, 1]).any() or _inside(b, pa[:, 0], pa[:, 1]).any()
    if not ina:
        d = np.inf
        for chunk in np.array_split(pa, max(1, len(pa) // 400)):
            d = min(d, np.sqrt(((chunk[:, None, :] - pb[None, :, :]) ** 2).sum(-1)).min())
        return d
    ang = np.linspace(0, math.pi, 3600, endpoint=False)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ca, cb = box_corners(*a), box_corners(*b)
    pa_, pb_ = ca @ dirs.T, cb @ dirs.T
    push = np.minimum(pa_.max(0) - pb_.min(0), pb_.max(0) - pa_.min(0))
    return -push.min()


def test_signed_distance_examples():
    a = OrientedBox(0, 0, 0, 4.5, 2.5)
    assert signed_distance(a, a) == pytest.approx(-2.5)
    assert signed_distance(a, OrientedBox(10, 0, 0, 4.5, 2.5)) == pytest.approx(5.5)
    assert signed_distance(a, OrientedBox(4.5, 0, 0, 4.5, 2.5)) == pytest.approx(0.0, abs=1e-12)
    # corner-to-corner diagonal gap
    assert signed_distance(a, OrientedBox(7.5, 5.5, 0, 4.5, 2.5)) == pytest.approx(math.hypot(3, 3))


def test_signed_distance_raster_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = random_pair(rng)
        assert signed_distance(a, b) == pytest.approx(sampled_signed_distance(a, b), abs=0.02)


def test_signed_distance_symmetry_and_rigid_invariance():
    rng = np.random.default_rng(1)
    for _ in range(300):
        a, b = random_pair(rng)
        d = signed_distance(a, b)
        assert signed_distance(b, a) == pytest.approx(d, abs=1e-9)
        th = rng.uniform(-math.pi, math.pi)
        t = rng.uniform(-100, 100, 2)
        c, s = math.cos(th), math.sin(th)

        def move(bx):
            return OrientedBox(c * bx.x - s * bx.y + t[0], s * bx.x + c * bx.y + t[1],
                               bx.psi + th, bx.length, bx.width)

        assert signed_distance(move(a), move(b)) == pytest.approx(d, abs=1e-9)
        assert bool(boxes_overlap(tuple(a), tuple(b))) == (d < 0)


def test_iou_examples():
    a = OrientedBox(0, 0, 0.3, 4.5, 2.5)
    assert oriented_iou(a, a) == pytest.approx(1.0)
    assert oriented_iou(a, OrientedBox(20, 0, 0, 4.5, 2.5)) == 0.0
    sq = OrientedBox(0, 0, 0, 2, 2)
    assert oriented_iou(sq, OrientedBox(1, 0, 0, 2, 2)) == pytest.approx(1 / 3)
    assert intersection_area(sq, OrientedBox(1, 0, 0, 2, 2)) == pytest.approx(2.0)


def test_iou_raster_oracle():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a, b = random_pair(rng, spread=3.0)
        iou = oriented_iou(a, b)
        assert 0.0 <= iou <= 1.0
        assert oriented_iou(b, a) == pytest.approx(iou, abs=1e-9)
        assert iou == pytest.approx(raster_iou(a, b), abs=0.01)
