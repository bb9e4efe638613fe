"""Cached safety zone: binary artifact, online lookup, circular baseline and slices.

Artifact layout (little-endian)::

    magic      8 bytes  b"HJZONE01"
    version    u32
    params     u32 length + UTF-8 JSON (sorted keys)
    digest     32 bytes SHA-256 of the params bytes
    axes       5 x (lo f64, hi f64, count u32, periodic u8)
    field      f32 x prod(counts), axis 0 slowest
    braking    u8 flag; if set: u32 count, count x f64 times, count x field
    footer     32 bytes SHA-256 of every preceding byte
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .config import ZoneParams
from .dynamics import VehicleState, to_relative
from .grid import GridSpec, OutOfDomainError, ScalarField, interpolate_many, wrap_angle

log = logging.getLogger(__name__)

MAGIC = b"HJZONE01"
FORMAT_VERSION = 1
_AXIS = struct.Struct("<ddIB")


class ZoneFormatError(ValueError):
    pass


class BadMagicError(ZoneFormatError):
    pass


class VersionMismatchError(ZoneFormatError):
    pass


class DigestMismatchError(ZoneFormatError):
    pass


class TruncatedArtifactError(ZoneFormatError):
    pass


class CorruptPayloadError(ZoneFormatError):
    pass


@dataclass
class ZoneArtifact:
    params: ZoneParams
    spec: GridSpec
    field: ScalarField
    solver: dict = field(default_factory=dict)
    braking_times: Optional[list] = None
    braking_fields: Optional[list] = None
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.field.spec != self.spec:
            raise ValueError("field grid does not match artifact grid")

    @property
    def closing_bound(self) -> float:
        return self.params.max_closing_displacement()

    def domain_covers_closing_bound(self) -> bool:
        b = self.closing_bound
        return (-self.spec.lo[0] >= b and self.spec.hi[0] >= b
                and -self.spec.lo[1] >= b and self.spec.hi[1] >= b)

    def parameter_block(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "grid": self.spec.to_dict(),
            "solver": self.solver,
            "horizons": {"braking": self.params.stop_horizon(),
                         "reaction": self.params.reaction_time},
            "max_closing_displacement": self.closing_bound,
            "domain_covers_closing_bound": self.domain_covers_closing_bound(),
        }

    def parameter_bytes(self) -> bytes:
        return json.dumps(self.parameter_block(), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")

    @property
    def payload_bytes(self) -> int:
        return self.spec.size * 4

    @classmethod
    def from_solution(cls, result, params: ZoneParams, solver: dict,
                      keep_braking: bool = False) -> "ZoneArtifact":
        spec = result.final.spec
        art = cls(params, spec, result.final, dict(solver))
        if keep_braking:
            art.braking_times = list(result.braking.times)
            art.braking_fields = list(result.braking.fields)
        if not art.domain_covers_closing_bound():
            log.warning("grid extents do not cover the %.1f m closing bound; states beyond "
                        "the grid are reported non-critical", art.closing_bound)
        return art


def to_bytes(art: ZoneArtifact) -> bytes:
    buf = io.BytesIO()
    params = art.parameter_bytes()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", art.version))
    buf.write(struct.pack("<I", len(params)))
    buf.write(params)
    buf.write(hashlib.sha256(params).digest())
    for i in range(5):
        buf.write(_AXIS.pack(art.spec.lo[i], art.spec.hi[i], art.spec.counts[i],
                             int(art.spec.periodic[i])))
    buf.write(art.field.values.astype("<f4").tobytes())
    if art.braking_fields:
        buf.write(b"\x01")
        buf.write(struct.pack("<I", len(art.braking_fields)))
        buf.write(np.asarray(art.braking_times, dtype="<f8").tobytes())
        for f in art.braking_fields:
            buf.write(f.values.astype("<f4").tobytes())
    else:
        buf.write(b"\x00")
    body = buf.getvalue()
    return body + hashlib.sha256(body).digest()


def save(art: ZoneArtifact, destination) -> int:
    data = to_bytes(art)
    Path(destination).write_bytes(data)
    return len(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedArtifactError(f"artifact truncated while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def from_bytes(data: bytes) -> ZoneArtifact:
    r = _Reader(data)
    if r.take(8, "magic") != MAGIC:
        raise BadMagicError("not a zone artifact (bad magic)")
    (version,) = struct.unpack("<I", r.take(4, "version"))
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported artifact version {version}")
    (plen,) = struct.unpack("<I", r.take(4, "parameter length"))
    pbytes = r.take(plen, "parameter block")
    digest = r.take(32, "digest")
    if hashlib.sha256(pbytes).digest() != digest:
        raise DigestMismatchError("parameter block does not match its digest")
    try:
        block = json.loads(pbytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ZoneFormatError(f"unreadable parameter block: {exc}") from exc
    axes = [_AXIS.unpack(r.take(_AXIS.size, "axis table")) for _ in range(5)]
    spec = GridSpec([a[0] for a in axes], [a[1] for a in axes], [a[2] for a in axes],
                    [bool(a[3]) for a in axes])
    if spec != GridSpec.from_dict(block["grid"]):
        raise ZoneFormatError("axis table disagrees with the parameter block")
    n = spec.size
    values = np.frombuffer(r.take(4 * n, "field payload"), dtype="<f4")
    (flag,) = r.take(1, "braking flag")
    times = fields = None
    if flag:
        (count,) = struct.unpack("<I", r.take(4, "braking count"))
        times = np.frombuffer(r.take(8 * count, "braking times"), dtype="<f8").tolist()
        raw = [np.frombuffer(r.take(4 * n, "braking payload"), dtype="<f4") for _ in range(count)]
    body_end = r.pos
    footer = r.take(32, "checksum footer")
    if r.pos != len(data):
        raise ZoneFormatError("trailing bytes after checksum footer")
    if hashlib.sha256(data[:body_end]).digest() != footer:
        raise CorruptPayloadError("checksum footer mismatch: payload corrupted")
    try:
        field_ = ScalarField(spec, values.astype(np.float32))
        if flag:
            fields = [ScalarField(spec, v.astype(np.float32)) for v in raw]
    except ValueError as exc:
        raise CorruptPayloadError(str(exc)) from exc
    return ZoneArtifact(ZoneParams.from_dict(block["params"]), spec, field_,
                        block.get("solver", {}), times, fields, version)


def load(source) -> ZoneArtifact:
    return from_bytes(Path(source).read_bytes())


class Classification(NamedTuple):
    safety_critical: bool
    value: float
    in_domain: bool
    baseline: bool


def stopping_radius(v_e: float, params: ZoneParams) -> float:
    return (v_e * params.reaction_time + v_e ** 2 / (2 * abs(params.a_brake))
            + math.hypot(params.length, params.width))


def circular_baseline(ego: VehicleState, contender: VehicleState, params: ZoneParams) -> bool:
    """Contender within the ego stopping distance plus one vehicle diagonal (inclusive)."""
    if ego.v < 0:
        raise ValueError("ego speed must be non-negative")
    return math.hypot(contender.x - ego.x, contender.y - ego.y) <= stopping_radius(ego.v, params)


def relative_query(art: ZoneArtifact, ego: VehicleState, contender: VehicleState):
    """Relative state with speeds clamped to [0, v_max] and heading wrapped."""
    z = to_relative(ego, contender)
    vmax = art.params.v_max
    return (z.x_rel, z.y_rel, float(wrap_angle(z.psi_rel)),
            min(max(z.v_e, 0.0), vmax), min(max(z.v_c, 0.0), vmax))


def classify(art: ZoneArtifact, ego: VehicleState, contender: VehicleState,
             margin: float = 0.0) -> Classification:
    baseline = circular_baseline(ego, contender, art.params)
    z = relative_query(art, ego, contender)
    spec = art.spec
    if not (spec.lo[0] <= z[0] <= spec.hi[0] and spec.lo[1] <= z[1] <= spec.hi[1]):
        return Classification(False, math.inf, False, baseline)
    value = float(interpolate_many(art.field, np.array([z]))[0])
    return Classification(value < margin, value, True, baseline)


def conservative_margin(art: ZoneArtifact) -> float:
    """One position-cell diagonal times the steepest node-to-node slope."""
    v = art.field.values
    h = art.spec.spacing
    slope = max(float(np.max(np.abs(np.diff(v, axis=a)))) / h[a] for a in (0, 1))
    return slope * art.spec.position_cell_diagonal()


@dataclass
class ZoneSlice:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # shape (len(xs), len(ys))
    contours: list
    psi_rel: float
    v_e: float
    v_c: float

    def sublevel_area(self, level: float = 0.0) -> float:
        dx = self.xs[1] - self.xs[0]
        dy = self.ys[1] - self.ys[0]
        return float(np.count_nonzero(self.values < level) * dx * dy)


def slice_zone(art: ZoneArtifact, psi_rel: float, v_e: float, v_c: float,
               resolution: int = 200) -> ZoneSlice:
    """Sample the final field over (x_rel, y_rel) at cell centres of a
    ``resolution`` x ``resolution`` partition of the position extents."""
    from skimage.measure import find_contours

    spec = art.spec
    for i, val in ((3, v_e), (4, v_c)):
        if not spec.lo[i] <= val <= spec.hi[i] or not math.isfinite(val):
            raise OutOfDomainError(f"slice coordinate {val} outside [{spec.lo[i]}, {spec.hi[i]}]")
    if not math.isfinite(psi_rel):
        raise OutOfDomainError("slice heading must be finite")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    xs = spec.lo[0] + (np.arange(resolution) + 0.5) * (spec.hi[0] - spec.lo[0]) / resolution
    ys = spec.lo[1] + (np.arange(resolution) + 0.5) * (spec.hi[1] - spec.lo[1]) / resolution
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, psi_rel),
                           np.full(X.size, v_e), np.full(X.size, v_c)])
    values = interpolate_many(art.field, pts).reshape(X.shape)
    contours = []
    for c in find_contours(values, 0.0):
        cx = np.interp(c[:, 0], np.arange(resolution), xs)
        cy = np.interp(c[:, 1], np.arange(resolution), ys)
        contours.append(np.column_stack([cx, cy]))
    return ZoneSlice(xs, ys, values, contours, float(psi_rel), float(v_e), float(v_c))


def write_slice_csv(sl: ZoneSlice, path) -> int:
    lines = ["x,y,value"]
    for i, x in enumerate(sl.xs):
        for j, y in enumerate(sl.ys):
            lines.append(f"{x:.6f},{y:.6f},{sl.values[i, j]:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
    return len(lines) - 1


def write_slice_svg(sl: ZoneSlice, path, params: ZoneParams, scale: float = 3.0):
    x0, x1 = sl.xs[0], sl.xs[-1]
    y0, y1 = sl.ys[0], sl.ys[-1]
    dx = sl.xs[1] - sl.xs[0]
    dy = sl.ys[1] - sl.ys[0]
    width = (x1 - x0 + dx) * scale
    height = (y1 - y0 + dy) * scale

    def px(x):
        return (x - x0 + dx / 2) * scale

    def py(y):
        return (y1 + dy / 2 - y) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" height="{height:.1f}" '
           f'viewBox="0 0 {width:.1f} {height:.1f}">',
           f'<rect width="{width:.1f}" height="{height:.1f}" fill="white"/>',
           '<g fill="#d62728" fill-opacity="0.6" stroke="none">']
    neg = sl.values < 0
    for i in range(len(sl.xs)):
        # merge vertical runs per column
        j = 0
        while j < len(sl.ys):
            if neg[i, j]:
                k = j
                while k + 1 < len(sl.ys) and neg[i, k + 1]:
                    k += 1
                out.append(f'<rect x="{px(sl.xs[i]) - dx * scale / 2:.2f}" '
                           f'y="{py(sl.ys[k]) - dy * scale / 2:.2f}" '
                           f'width="{dx * scale:.2f}" height="{(k - j + 1) * dy * scale:.2f}"/>')
                j = k + 1
            else:
                j += 1
    out.append("</g>")
    for c in sl.contours:
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in c)
        out.append(f'<polyline points="{pts}" fill="none" stroke="#8b0000" stroke-width="1"/>')
    # ego footprint: rear axle at the origin, facing +x
    off = params.length / 2 - params.axle_distance / 2
    out.append(f'<rect id="ego" x="{px(off - params.length / 2):.2f}" y="{py(params.width / 2):.2f}" '
               f'width="{params.length * scale:.2f}" height="{params.width * scale:.2f}" '
               f'fill="#2ca02c" stroke="black" stroke-width="0.5"/>')
    out.append(f'<text x="4" y="14" font-size="12" font-family="monospace">psi_rel={sl.psi_rel:.3f} '
               f'v_e={sl.v_e:.2f} v_c={sl.v_c:.2f}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
