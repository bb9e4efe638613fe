"""False-positive evaluation harness.

Reads a detection log, labels each surviving detection as a true or false
positive against ground truth, estimates contender motion from adjacent
frames and asks both the HJ zone and the circular baseline whether each false
positive is safety-critical.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .config import ZoneParams
from .dynamics import VehicleState
from .geometry import OrientedBox, oriented_iou
from .zone import ZoneArtifact, circular_baseline, classify

SCHEMA = "hjzone-log/1"
DISCARDED = "discarded"
FP = "FP"
# cross-frame association radius: 3 m for every 0.5 s of timestamp gap
GATE_PER_SECOND = 3.0 / 0.5

__all__ = ["SCHEMA", "GroundTruth", "Detection", "Frame", "FrameLog", "EvalReport",
           "LogFormatError", "oriented_iou", "match_frame", "estimate_velocity",
           "evaluate", "load_log", "dump_log"]


class LogFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    box: OrientedBox
    label: str
    track_id: str
    velocity: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class Detection:
    box: OrientedBox
    score: float
    label: str
    velocity: Optional[tuple] = None


@dataclass
class Frame:
    timestamp: float
    ego: VehicleState
    ground_truth: list = field(default_factory=list)
    detections: list = field(default_factory=list)


@dataclass
class FrameLog:
    frames: list

    def __post_init__(self):
        ts = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise LogFormatError("frame timestamps must strictly increase")
        for f in self.frames:
            for d in f.detections:
                if not 0.0 <= d.score <= 1.0:
                    raise LogFormatError(f"detection score {d.score} outside [0, 1]")


def _box(d) -> OrientedBox:
    return OrientedBox(float(d["x"]), float(d["y"]), float(d["psi"]),
                       float(d["length"]), float(d["width"]))


def _box_dict(b: OrientedBox) -> dict:
    return {"x": b.x, "y": b.y, "psi": b.psi, "length": b.length, "width": b.width}


def parse_log(doc: dict) -> FrameLog:
    if doc.get("schema") != SCHEMA:
        raise LogFormatError(f"expected schema {SCHEMA!r}, got {doc.get('schema')!r}")
    try:
        frames = []
        for fr in doc["frames"]:
            e = fr["ego"]
            gts = [GroundTruth(_box(g["box"]), g["label"], str(g["track_id"]),
                               tuple(g.get("velocity", (0.0, 0.0))))
                   for g in fr.get("ground_truth", [])]
            dets = [Detection(_box(d["box"]), float(d["score"]), d["label"],
                              tuple(d["velocity"]) if d.get("velocity") is not None else None)
                    for d in fr.get("detections", [])]
            frames.append(Frame(float(fr["timestamp"]),
                                VehicleState(float(e["x"]), float(e["y"]), float(e["psi"]),
                                             float(e["v"])), gts, dets))
    except (KeyError, TypeError, ValueError) as exc:
        raise LogFormatError(f"malformed log: {exc}") from exc
    return FrameLog(frames)


def load_log(path) -> FrameLog:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"log is not valid JSON: {exc}") from exc
    return parse_log(doc)


def dump_log(log: FrameLog) -> dict:
    frames = []
    for f in log.frames:
        frames.append({
            "timestamp": f.timestamp,
            "ego": f.ego._asdict(),
            "ground_truth": [{"box": _box_dict(g.box), "label": g.label,
                              "track_id": g.track_id, "velocity": list(g.velocity)}
                             for g in f.ground_truth],
            "detections": [{"box": _box_dict(d.box), "score": d.score, "label": d.label,
                            "velocity": None if d.velocity is None else list(d.velocity)}
                           for d in f.detections],
        })
    return {"schema": SCHEMA, "frames": frames}


def match_frame(detections, ground_truth, score_threshold: float = 0.3,
                iou_threshold: float = 0.5) -> list:
    """Per-detection label: ``"discarded"``, ``"FP"`` or the matched GT track id.

    Survivors are visited by descending score (ties by input order) and each
    takes the unmatched same-class ground truth with the highest IoU.
    """
    labels = [DISCARDED] * len(detections)
    order = sorted((i for i, d in enumerate(detections) if d.score >= score_threshold),
                   key=lambda i: -detections[i].score)
    taken = set()
    for i in order:
        det = detections[i]
        best, best_iou = None, iou_threshold
        for j, gt in enumerate(ground_truth):
            if j in taken or gt.label != det.label:
                continue
            iou = oriented_iou(det.box, gt.box)
            if iou >= best_iou and (best is None or iou > best_iou):
                best, best_iou = j, iou
        if best is None:
            labels[i] = FP
        else:
            taken.add(best)
            labels[i] = ground_truth[best].track_id
    return labels


def estimate_velocity(log: FrameLog, index: int, detection: Detection,
                      score_threshold: float = 0.0):
    """(speed, heading) of a detection, from its own velocity or a neighbouring frame."""
    if detection.velocity is not None:
        vx, vy = detection.velocity
        speed = math.hypot(vx, vy)
        return speed, (math.atan2(vy, vx) if speed > 0 else detection.box.psi)
    frames = log.frames
    if index + 1 < len(frames):
        other, sign = frames[index + 1], 1.0
    elif index > 0:
        other, sign = frames[index - 1], -1.0
    else:
        return 0.0, detection.box.psi
    gap = abs(other.timestamp - frames[index].timestamp)
    gate = GATE_PER_SECOND * gap
    best, best_d = None, math.inf
    for cand in other.detections:
        if cand.label != detection.label or cand.score < score_threshold:
            continue
        d = math.hypot(cand.box.x - detection.box.x, cand.box.y - detection.box.y)
        if d <= gate and d < best_d:
            best, best_d = cand, d
    if best is None:
        return 0.0, detection.box.psi
    dx = sign * (best.box.x - detection.box.x)
    dy = sign * (best.box.y - detection.box.y)
    speed = math.hypot(dx, dy) / gap
    return speed, (math.atan2(dy, dx) if speed > 0 else detection.box.psi)


def contender_state(det: Detection, speed: float, params: ZoneParams) -> VehicleState:
    """Rear-axle state of a detected vehicle; the box heading is kept as its yaw."""
    off = params.length / 2 - params.axle_distance / 2
    b = det.box
    return VehicleState(b.x - off * math.cos(b.psi), b.y - off * math.sin(b.psi), b.psi, speed)


@dataclass
class FPRecord:
    frame: int
    detection: int
    value: float
    hj_critical: bool
    baseline_critical: bool
    in_domain: bool
    latency_ms: float


@dataclass
class EvalReport:
    frames: int
    total_detections: int
    fp_count: int
    hj_critical: int
    baseline_critical: int
    # agreement[hj][baseline], index 1 = critical
    agreement: list
    latency_ms: dict
    records: list = field(default_factory=list)

    def _rate(self, n):
        return n / self.total_detections if self.total_detections else 0.0

    def _per_frame(self, n):
        return n / self.frames if self.frames else 0.0

    @property
    def fp_rate(self):
        return self._rate(self.fp_count)

    @property
    def fp_per_frame(self):
        return self._per_frame(self.fp_count)

    def summary(self) -> dict:
        rows = {}
        for name, n in (("fp", self.fp_count), ("hj_critical_fp", self.hj_critical),
                        ("baseline_critical_fp", self.baseline_critical)):
            rows[name] = {"count": n, "rate": self._rate(n), "per_frame": self._per_frame(n)}
        return {"frames": self.frames, "total_detections": self.total_detections,
                **rows, "agreement": self.agreement, "latency_ms": self.latency_ms}

    def to_dict(self, with_latency: bool = True) -> dict:
        d = self.summary()
        d["records"] = [asdict(r) for r in self.records]
        if not with_latency:
            d.pop("latency_ms")
            for r in d["records"]:
                r.pop("latency_ms")
        return d

    def table(self) -> str:
        s = self.summary()
        lines = [f"{'':<26}{'count':>8}{'rate':>10}{'per frame':>12}"]
        for key, title in (("fp", "false positives"), ("hj_critical_fp", "HJ safety-critical"),
                           ("baseline_critical_fp", "circular safety-critical")):
            r = s[key]
            lines.append(f"{title:<26}{r['count']:>8d}{100 * r['rate']:>9.2f}%{r['per_frame']:>12.3f}")
        lines.append(f"total detections: {self.total_detections}   frames: {self.frames}")
        lines.append("")
        lines.append(f"{'':<18}{'circular yes':>14}{'circular no':>14}")
        a = self.agreement
        lines.append(f"{'HJ yes':<18}{a[1][1]:>14d}{a[1][0]:>14d}")
        lines.append(f"{'HJ no':<18}{a[0][1]:>14d}{a[0][0]:>14d}")
        if self.latency_ms:
            lat = self.latency_ms
            lines.append("")
            lines.append(f"classification latency (ms): median {lat['median']:.3f}  "
                         f"mean {lat['mean']:.3f}  max {lat['max']:.3f}")
        return "\n".join(lines)


def _frame_records(log: FrameLog, index: int, art: ZoneArtifact, params: ZoneParams):
    frame = log.frames[index]
    labels = set(params.eval_labels)
    dets = [d for d in frame.detections if d.label in labels]
    gts = [g for g in frame.ground_truth if g.label in labels]
    tags = match_frame(dets, gts, params.score_threshold, params.iou_threshold)
    survivors = sum(t != DISCARDED for t in tags)
    out = []
    for i, (det, tag) in enumerate(zip(dets, tags)):
        if tag != FP:
            continue
        speed, _ = estimate_velocity(log, index, det, params.score_threshold)
        t0 = time.perf_counter()
        contender = contender_state(det, speed, params)
        verdict = classify(art, frame.ego, contender)
        ms = 1e3 * (time.perf_counter() - t0)
        out.append(FPRecord(index, i, verdict.value, verdict.safety_critical,
                            circular_baseline(frame.ego, contender, params),
                            verdict.in_domain, ms))
    return survivors, out


def evaluate(log: FrameLog, art: ZoneArtifact, params: Optional[ZoneParams] = None,
             workers: int = 1) -> EvalReport:
    params = params or art.params
    if not log.frames:
        raise LogFormatError("log contains no frames")
    if art.params.agent_class != params.agent_class:
        raise ValueError(f"artifact built for {art.params.agent_class!r}, "
                         f"evaluation targets {params.agent_class!r}")
    idx = range(len(log.frames))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda i: _frame_records(log, i, art, params), idx))
    else:
        results = [_frame_records(log, i, art, params) for i in idx]

    total = 0
    records = []
    for n, recs in results:
        total += n
        records.extend(recs)
    agreement = [[0, 0], [0, 0]]
    for r in records:
        agreement[int(r.hj_critical)][int(r.baseline_critical)] += 1
    lat = [r.latency_ms for r in records]
    latency = ({"median": statistics.median(lat), "mean": statistics.fmean(lat),
                "max": max(lat)} if lat else {})
    return EvalReport(len(log.frames), total, len(records),
                      sum(r.hj_critical for r in records),
                      sum(r.baseline_critical for r in records), agreement, latency, records)
