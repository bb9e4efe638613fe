import math

import numpy as np
import pytest

from hjzone.config import ZoneParams
from hjzone.geometry import OrientedBox, signed_distance
from hjzone.grid import GridSpec, ScalarField, default_spec, node_coordinates
from hjzone.solver import ValueFunction
from hjzone.terminal import pose_signed_distance, reaction_initial, stop_time, terminal_field

P = ZoneParams()
G = P.geometry()


def test_stop_time():
    assert stop_time(7, -3.5) == pytest.approx(2.0)
    assert stop_time(0, -3.5) == 0
    assert stop_time(20, -3.5) == pytest.approx(5.714, abs=1e-3)
    with pytest.raises(ValueError):
        stop_time(5, 0)


def test_pose_signed_distance_matches_boxes():
    assert float(pose_signed_distance(0, 0, 0, G)) == pytest.approx(-2.5)
    rng = np.random.default_rng(0)
    off = G.center_offset
    for _ in range(100):
        x, y, psi = rng.uniform(-12, 12), rng.uniform(-8, 8), rng.uniform(-math.pi, math.pi)
        ego = OrientedBox(off, 0, 0, 4.5, 2.5)
        con = OrientedBox(x + off * math.cos(psi), y + off * math.sin(psi), psi, 4.5, 2.5)
        assert float(pose_signed_distance(x, y, psi, G)) == pytest.approx(signed_distance(ego, con))


def test_terminal_field_default_grid():
    spec = default_spec()
    f = terminal_field(spec, G)
    v = f.values
    assert np.all(v == v[:, :, :, :1, :1])
    assert int(np.count_nonzero(v < 0)) > 0
    assert v.min() >= -2.5 - 1e-6


def test_terminal_far_field():
    # odd y count puts a node row on y_rel = 0, where the gap is exactly x - 4.5
    spec = GridSpec((-150, -100, -math.pi, 0, 0), (150, 100, math.pi, 20, 20), (40, 41, 20, 3, 3))
    f = terminal_field(spec, G)
    xs, ys = spec.axis(0), spec.axis(1)
    j = int(np.argmin(np.abs(ys)))
    assert ys[j] == pytest.approx(0.0, abs=1e-9)
    # same heading only exists as a cell-centre node on an even psi count at +-pi/20, so use
    # a psi count with a node at 0
    spec2 = GridSpec(spec.lo, spec.hi, (40, 41, 21, 3, 3))
    f2 = terminal_field(spec2, G)
    k = int(np.argmin(np.abs(spec2.axis(2))))
    assert spec2.axis(2)[k] == pytest.approx(0.0, abs=1e-12)
    for i in np.nonzero(xs >= 100)[0]:
        assert f2.values[i, j, k, 0, 0] == pytest.approx(xs[i] - 4.5, abs=0.02)
    assert np.all(f.values[xs >= 100] > 0)


def _toy_tube(spec):
    """V(z, t) = l(z) + 2 t (t <= 0), stored every 0.5 s down to -6 s."""
    base = np.random.default_rng(1).uniform(0, 5, spec.shape)
    vf = ValueFunction(spec)
    for t in np.arange(0, -6.01, -0.5):
        vf.append(t, ScalarField(spec, base + 2 * t))
    return base, vf


def test_reaction_initial_linear_in_time():
    spec = GridSpec((-10, -10, -math.pi, 0, 0), (10, 10, math.pi, 20, 20), (3, 3, 4, 7, 3))
    base, vf = _toy_tube(spec)
    out = reaction_initial(vf, spec, -3.5)
    for j, ve in enumerate(spec.axis(3)):
        expect = base[:, :, :, j, :] - 2 * stop_time(ve, -3.5)
        np.testing.assert_allclose(out.values[:, :, :, j, :], expect, atol=1e-5)
    assert np.all(out.values <= vf.fields[0].values + 1e-6)


def test_reaction_initial_needs_full_span():
    spec = GridSpec((-10, -10, -math.pi, 0, 0), (10, 10, math.pi, 20, 20), (3, 3, 4, 3, 3))
    vf = ValueFunction(spec)
    vf.append(0.0, ScalarField(spec, np.zeros(spec.shape)))
    vf.append(-1.0, ScalarField(spec, np.zeros(spec.shape)))
    with pytest.raises(ValueError):
        reaction_initial(vf, spec, -3.5)


def test_reaction_initial_on_default_solve(default_run):
    r = default_run.result
    start = r.reaction.fields[0].values
    spec = r.final.spec
    # zero stopping time: the braking tube at t = 0 is the target itself (v_E nodes start at
    # a cell centre, so check the node nearest rest against its own stop time instead)
    assert np.all(start <= r.terminal.values + 1e-6)
    # straight-line braking from 10 m/s covers 14.3 m; a parked car 11.25 m ahead (gap
    # 6.75 m) is hit well before the ego stops
    i = int(np.argmin(np.abs(spec.axis(0) - 11.25)))
    j = int(np.argmin(np.abs(spec.axis(1) - 2.5)))
    k = int(np.argmin(np.abs(spec.axis(2) - math.pi / 20)))
    m = int(np.argmin(np.abs(spec.axis(3) - 10.0)))
    z = node_coordinates(spec, (i, j, k, m, 0))
    assert z[3] == pytest.approx(10.0)
    travel = z[3] ** 2 / (2 * 3.5)
    assert travel > z[0] - 4.5
    assert start[i, j, k, m, 0] < 0
