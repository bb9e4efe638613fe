import hashlib
import math

import numpy as np
import pytest

from conftest import SCENE_BEHIND, place

from hjzone.config import ZoneParams
from hjzone.dynamics import VehicleState
from hjzone.grid import GridSpec, OutOfDomainError, ScalarField, interpolate_many
from hjzone.terminal import terminal_field
from hjzone.zone import (MAGIC, BadMagicError, CorruptPayloadError, DigestMismatchError,
                         TruncatedArtifactError, VersionMismatchError, ZoneArtifact,
                         ZoneFormatError, circular_baseline, classify, conservative_margin,
                         from_bytes, load, save, slice_zone, stopping_radius, to_bytes,
                         write_slice_csv, write_slice_svg)

P = ZoneParams()
SPEC = GridSpec((-40, -30, -math.pi, 0, 0), (40, 30, math.pi, 20, 20), (16, 12, 8, 5, 5))


@pytest.fixture(scope="module")
def toy():
    """Terminal field shifted down by the ego speed: cheap, but shaped like a zone."""
    base = terminal_field(SPEC, P.geometry()).values
    ve = SPEC.axis(3)[None, None, None, :, None]
    f = ScalarField(SPEC, base - 0.5 * ve)
    return ZoneArtifact(P, SPEC, f, {"scheme": "test"})


def test_round_trip_bit_identical(toy, tmp_path):
    path = tmp_path / "a.hjz"
    n = save(toy, path)
    assert n == path.stat().st_size
    back = load(path)
    assert back.params == toy.params and back.spec == toy.spec
    assert back.field.values.tobytes() == toy.field.values.tobytes()
    assert back.solver == {"scheme": "test"}
    assert to_bytes(back) == path.read_bytes()


def test_round_trip_with_braking_tube(toy):
    art = ZoneArtifact(P, SPEC, toy.field, {}, [0.0, -0.1], [toy.field, toy.field])
    back = from_bytes(to_bytes(art))
    assert back.braking_times == [0.0, -0.1]
    assert len(back.braking_fields) == 2
    assert np.array_equal(back.braking_fields[1].values, toy.field.values)


def test_parameter_block_records_domain_coverage(toy):
    block = toy.parameter_block()
    assert block["max_closing_displacement"] == pytest.approx(P.max_closing_displacement())
    assert block["domain_covers_closing_bound"] is False
    assert block["horizons"]["reaction"] == 0.5


def _reseal(body: bytes) -> bytes:
    return body + hashlib.sha256(body).digest()


def test_rejects_bad_magic(toy):
    data = to_bytes(toy)
    with pytest.raises(BadMagicError):
        from_bytes(b"NOTAZONE" + data[8:])


def test_rejects_version(toy):
    data = bytearray(to_bytes(toy))
    data[8] = 99
    with pytest.raises(VersionMismatchError):
        from_bytes(bytes(data))


def test_rejects_digest_mismatch(toy):
    data = bytearray(to_bytes(toy))
    # flip a byte inside the parameter block (after magic, version and length)
    data[16 + 5] ^= 0x01
    with pytest.raises(DigestMismatchError):
        from_bytes(_reseal(bytes(data[:-32])))


def test_rejects_truncation(toy):
    data = to_bytes(toy)
    for cut in (4, 20, len(data) // 2, len(data) - 1):
        with pytest.raises(TruncatedArtifactError):
            from_bytes(data[:cut])


def test_rejects_flipped_payload_byte(toy):
    data = bytearray(to_bytes(toy))
    data[len(data) - 32 - 1 - 100] ^= 0x40
    with pytest.raises(CorruptPayloadError):
        from_bytes(bytes(data))
    assert issubclass(CorruptPayloadError, ZoneFormatError)


def test_rejects_trailing_bytes(toy):
    with pytest.raises(ZoneFormatError):
        from_bytes(to_bytes(toy) + b"\x00")
    assert to_bytes(toy).startswith(MAGIC)


def test_stopping_radius_examples():
    assert stopping_radius(5.0, P) == pytest.approx(11.219, abs=1e-3)
    assert stopping_radius(0.0, P) == pytest.approx(5.148, abs=1e-3)
    ego = VehicleState(0, 0, 0, 5.0)
    assert circular_baseline(ego, VehicleState(11.0, 0, 1.0, 3.0), P)
    assert not circular_baseline(ego, VehicleState(11.3, 0, 0, 0), P)


def test_baseline_inclusive_and_radially_symmetric():
    ego = VehicleState(3.0, -2.0, 0.7, 8.0)
    r = stopping_radius(8.0, P)
    for ang in np.linspace(-math.pi, math.pi, 13):
        inner = VehicleState(3.0 + (r - 1e-9) * math.cos(ang), -2.0 + (r - 1e-9) * math.sin(ang), 0, 0)
        outer = VehicleState(3.0 + (r + 1e-6) * math.cos(ang), -2.0 + (r + 1e-6) * math.sin(ang), 0, 0)
        assert circular_baseline(ego, inner, P)
        assert not circular_baseline(ego, outer, P)
    exact = VehicleState(0, 0, 0, 8.0)
    assert circular_baseline(exact, VehicleState(r, 0, 0, 0), P)
    with pytest.raises(ValueError):
        circular_baseline(VehicleState(0, 0, 0, -1.0), VehicleState(1, 0, 0, 0), P)


def test_classify_out_of_domain_is_not_critical(toy):
    ego = VehicleState(0, 0, 0, 10.0)
    c = classify(toy, ego, VehicleState(300.0, 0, 0, 0))
    assert c.safety_critical is False and c.in_domain is False and c.value == math.inf


def test_classify_coincident_is_critical(default_artifact):
    ego = VehicleState(12.0, -7.0, 0.3, 6.0)
    c = classify(default_artifact, ego, VehicleState(12.0, -7.0, 0.3, 6.0))
    assert c.in_domain and c.safety_critical and c.value < 0 and c.baseline


def test_classify_scene_disagrees_with_baseline(default_artifact):
    ego, con = place(VehicleState(0, 0, 0, 0), SCENE_BEHIND)
    c = classify(default_artifact, ego, con)
    assert c.baseline and not c.safety_critical


def test_classify_rigid_invariance(toy):
    rng = np.random.default_rng(5)
    for _ in range(50):
        ego = VehicleState(0.0, 0.0, rng.uniform(-3, 3), rng.uniform(0, 20))
        con = VehicleState(*rng.uniform(-25, 25, 2), rng.uniform(-3, 3), rng.uniform(0, 20))
        th, tx, ty = rng.uniform(-3, 3), *rng.uniform(-1000, 1000, 2)
        c, s = math.cos(th), math.sin(th)

        def move(p):
            return VehicleState(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, p.psi + th, p.v)

        a, b = classify(toy, ego, con), classify(toy, move(ego), move(con))
        assert a.safety_critical == b.safety_critical and a.baseline == b.baseline
        assert b.value == pytest.approx(a.value, abs=1e-4)


def test_margin_only_adds_critical_states(toy):
    rng = np.random.default_rng(6)
    margin = conservative_margin(toy)
    assert margin > 0
    for _ in range(200):
        ego = VehicleState(0, 0, 0, rng.uniform(0, 20))
        con = VehicleState(*rng.uniform(-35, 35, 2), rng.uniform(-3, 3), rng.uniform(0, 20))
        plain = classify(toy, ego, con)
        wide = classify(toy, ego, con, margin=margin)
        assert wide.safety_critical >= plain.safety_critical


def test_slice_matches_interpolation(toy):
    sl = slice_zone(toy, 0.4, 7.0, 3.0, resolution=40)
    assert sl.values.shape == (40, 40)
    X, Y = np.meshgrid(sl.xs, sl.ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, 0.4),
                           np.full(X.size, 7.0), np.full(X.size, 3.0)])
    np.testing.assert_allclose(sl.values.ravel(), interpolate_many(toy.field, pts), atol=1e-6)
    for c in sl.contours:
        assert np.all(np.abs(c[:, 0]) <= 40) and np.all(np.abs(c[:, 1]) <= 30)
    assert sl.sublevel_area() > 0


def test_slice_out_of_domain(toy):
    with pytest.raises(OutOfDomainError):
        slice_zone(toy, 0.0, 25.0, 0.0)
    with pytest.raises(OutOfDomainError):
        slice_zone(toy, math.nan, 5.0, 0.0)


def test_slice_files(toy, tmp_path):
    sl = slice_zone(toy, -math.pi, 5.0, 5.0, resolution=30)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert write_slice_csv(sl, a) == 900
    write_slice_csv(slice_zone(toy, -math.pi, 5.0, 5.0, resolution=30), b)
    lines = a.read_text().splitlines()
    assert lines[0] == "x,y,value" and len(lines) == 901
    assert a.read_bytes() == b.read_bytes()
    svg = tmp_path / "s.svg"
    write_slice_svg(sl, svg, P)
    text = svg.read_text()
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
    assert 'id="ego"' in text
