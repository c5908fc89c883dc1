"""File formats binding the toolkit together.

All real numbers are serialized as decimal with 17 significant digits, so
every finite double round-trips losslessly; NaN (used for undefined metric
values) becomes JSON null. Files are written atomically (temp + rename).

Formats:
    * calibration JSON: cameras (intrinsics + distortion + size) and
      extrinsic edges (frame strings, row-major rotation, translation);
    * detection JSON-lines: a header line declaring the box frame, then
      one record per line, frame ids non-decreasing within a sensor;
    * estimation JSON-lines: {bbox_id, u, v, x, y, z, distance_m, status};
    * trajectory CSV (header t,x,y,z), vanishing-lines CSV (u1,v1,u2,v2),
      control-points CSV (u,v,gx,gz);
    * point clouds: whitespace XYZ text (3 or 4 columns) or raw binary
      float32 x,y,z,intensity quadruplets;
    * masks: PGM rasters (P5 binary or P2 text), nonzero = foreground.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .camera import CameraModel
from .errors import SchemaError
from .estimators import GroundPlane
from .frames import (
    FrameGraph,
    FrameId,
    RigidTransform,
    nearest_rotation,
    orthonormality_defect,
)
from .metrics import Box3D, DetectionRecord, MotionState, ObjectClass, TrajectorySample
from .synth import PRNG_ALGORITHM, NoiseSpec, SceneTarget, SyntheticScene

import logging

logger = logging.getLogger(__name__)

DETECTIONS_SCHEMA = "curbgeom/detections/1"
ESTIMATES_SCHEMA = "curbgeom/estimates/1"
GROUND_TRUTH_SCHEMA = "curbgeom/ground-truth/1"
SCENE_SCHEMA = "curbgeom/scene/1"

# Loading re-orthogonalizes rotations with defects in (1e-9, 1e-6] and
# rejects anything worse.
ROTATION_WARN_DEFECT = 1e-9
ROTATION_REJECT_DEFECT = 1e-6


# -- decimal-exact JSON ---------------------------------------------------

def format_real(x: float) -> str:
    """One real number as a decimal with 17 significant digits."""
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        raise ValueError("cannot serialize infinity")
    return format(float(x), ".17g")


def dumps_json(obj) -> str:
    """JSON text with reals at 17 significant digits and NaN as null."""
    parts: list[str] = []
    _emit(obj, parts)
    return "".join(parts)


def _emit(obj, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif isinstance(obj, bool):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(format_real(float(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                parts.append(", ")
            parts.append(json.dumps(str(k)))
            parts.append(": ")
            _emit(v, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        parts.append("[")
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        for i, v in enumerate(seq):
            if i:
                parts.append(", ")
            _emit(v, parts)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- calibration JSON -----------------------------------------------------

def save_calibration(path, cameras: dict[str, CameraModel], extrinsics: list[RigidTransform]) -> None:
    doc = {
        "cameras": [
            {
                "id": cam_id,
                "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                "k1": cam.k1, "k2": cam.k2, "p1": cam.p1, "p2": cam.p2, "k3": cam.k3,
                "width": cam.width, "height": cam.height,
            }
            for cam_id, cam in sorted(cameras.items())
        ],
        "extrinsics": [
            {
                "from": str(t.from_frame),
                "to": str(t.to_frame),
                "rotation": [float(v) for v in t.rotation.ravel()],
                "translation": [float(v) for v in t.translation],
            }
            for t in extrinsics
        ],
    }
    atomic_write_text(path, dumps_json(doc) + "\n")


def load_calibration(path) -> tuple[dict[str, CameraModel], FrameGraph]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("calibration file must hold a JSON object")
    cameras: dict[str, CameraModel] = {}
    for entry in doc.get("cameras", []):
        try:
            cameras[str(entry["id"])] = CameraModel(
                fx=float(entry["fx"]), fy=float(entry["fy"]),
                cx=float(entry["cx"]), cy=float(entry["cy"]),
                k1=float(entry.get("k1", 0.0)), k2=float(entry.get("k2", 0.0)),
                p1=float(entry.get("p1", 0.0)), p2=float(entry.get("p2", 0.0)),
                k3=float(entry.get("k3", 0.0)),
                width=int(entry["width"]), height=int(entry["height"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"bad camera entry {entry!r}: {exc}") from exc
    graph = FrameGraph()
    for entry in doc.get("extrinsics", []):
        try:
            rotation = np.asarray([float(v) for v in entry["rotation"]]).reshape(3, 3)
            translation = np.asarray([float(v) for v in entry["translation"]]).reshape(3)
            from_frame = FrameId.parse(str(entry["from"]))
            to_frame = FrameId.parse(str(entry["to"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"bad extrinsic entry {entry!r}: {exc}") from exc
        defect = orthonormality_defect(rotation)
        if defect > ROTATION_REJECT_DEFECT:
            raise SchemaError(
                f"extrinsic {entry['from']}->{entry['to']} rotation defect {defect:.3e} "
                f"exceeds {ROTATION_REJECT_DEFECT}"
            )
        if defect > ROTATION_WARN_DEFECT:
            logger.warning(
                "re-orthogonalizing extrinsic %s->%s (defect %.3e)",
                entry["from"], entry["to"], defect,
            )
            rotation = nearest_rotation(rotation)
        graph.add_edge(RigidTransform(rotation, translation, from_frame, to_frame))
    return cameras, graph


def merge_calibration(path, cameras: dict[str, CameraModel], extrinsics: list[RigidTransform]) -> None:
    """Write calibration, merging with an existing file if present.

    New extrinsics replace existing edges between the same frame pair; new
    cameras replace entries with the same id.
    """
    all_cameras: dict[str, CameraModel] = {}
    all_edges: dict[frozenset, RigidTransform] = {}
    if Path(path).exists():
        old_cams, old_graph = load_calibration(path)
        all_cameras.update(old_cams)
        for t in old_graph.edges():
            all_edges[frozenset((str(t.from_frame), str(t.to_frame)))] = t
    all_cameras.update(cameras)
    for t in extrinsics:
        all_edges[frozenset((str(t.from_frame), str(t.to_frame)))] = t
    save_calibration(path, all_cameras, list(all_edges.values()))


# -- detection JSON-lines -------------------------------------------------

def _record_to_dict(r: DetectionRecord) -> dict:
    out: dict = {
        "frame_id": r.frame_id,
        "sensor_id": r.sensor_id,
        "class_name": r.class_name.value,
        "score": r.score,
    }
    if r.bbox2d is not None:
        out["bbox2d"] = list(r.bbox2d)
    if r.box3d is not None:
        b = r.box3d
        out["box3d"] = {
            "x": b.center[0], "y": b.center[1], "z": b.center[2],
            "l": b.length, "w": b.width, "h": b.height, "yaw": b.yaw,
        }
    if r.track_id is not None:
        out["track_id"] = r.track_id
    if r.motion_state is not None:
        out["motion_state"] = r.motion_state.value
    if r.bbox_id:
        out["bbox_id"] = r.bbox_id
    return out


def _record_from_dict(d: dict, line: int) -> DetectionRecord:
    try:
        box3d = None
        if "box3d" in d and d["box3d"] is not None:
            b = d["box3d"]
            box3d = Box3D(
                np.array([float(b["x"]), float(b["y"]), float(b["z"])]),
                float(b["l"]), float(b["w"]), float(b["h"]), float(b["yaw"]),
            )
        return DetectionRecord(
            frame_id=int(d["frame_id"]),
            sensor_id=str(d["sensor_id"]),
            class_name=ObjectClass(d["class_name"]),
            bbox2d=tuple(float(v) for v in d["bbox2d"]) if d.get("bbox2d") is not None else None,
            box3d=box3d,
            score=float(d.get("score", 1.0)),
            track_id=int(d["track_id"]) if d.get("track_id") is not None else None,
            motion_state=MotionState(d["motion_state"]) if d.get("motion_state") else None,
            bbox_id=str(d.get("bbox_id", "")),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"bad detection record: {exc}", line=line) from exc


def write_detections(path, records: list[DetectionRecord], box_frame: str) -> None:
    lines = [dumps_json({"schema": DETECTIONS_SCHEMA, "box_frame": box_frame})]
    lines += [dumps_json(_record_to_dict(r)) for r in records]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_detections(path) -> tuple[str, list[DetectionRecord]]:
    text = Path(path).read_text().splitlines()
    if not text:
        raise SchemaError("empty detection file", line=1)
    header = _parse_json_line(text[0], 1)
    if header.get("schema") != DETECTIONS_SCHEMA:
        raise SchemaError(f"expected header with schema {DETECTIONS_SCHEMA}", line=1)
    records = []
    last_frame: dict[str, int] = {}
    for i, raw in enumerate(text[1:], start=2):
        if not raw.strip():
            continue
        rec = _record_from_dict(_parse_json_line(raw, i), i)
        prev = last_frame.get(rec.sensor_id)
        if prev is not None and rec.frame_id < prev:
            raise SchemaError(
                f"frame_id {rec.frame_id} decreases (previous {prev}) for sensor {rec.sensor_id}",
                line=i,
            )
        last_frame[rec.sensor_id] = rec.frame_id
        records.append(rec)
    return str(header.get("box_frame", "")), records


def _parse_json_line(raw: str, line: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", line=line) from exc
    if not isinstance(obj, dict):
        raise SchemaError("expected a JSON object", line=line)
    return obj


# -- estimation JSON-lines ------------------------------------------------

def write_estimates(path, rows: list[dict], meta: dict | None = None) -> None:
    header = {"schema": ESTIMATES_SCHEMA}
    header.update(meta or {})
    lines = [dumps_json(header)]
    for r in rows:
        lines.append(
            dumps_json(
                {
                    "bbox_id": r["bbox_id"],
                    "u": r["u"],
                    "v": r["v"],
                    "x": r.get("x"),
                    "y": r.get("y"),
                    "z": r.get("z"),
                    "distance_m": r.get("distance_m"),
                    "status": r["status"],
                }
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_estimates(path) -> tuple[dict, list[dict]]:
    text = Path(path).read_text().splitlines()
    if not text:
        raise SchemaError("empty estimates file", line=1)
    header = _parse_json_line(text[0], 1)
    if header.get("schema") != ESTIMATES_SCHEMA:
        raise SchemaError(f"expected header with schema {ESTIMATES_SCHEMA}", line=1)
    rows = []
    for i, raw in enumerate(text[1:], start=2):
        if not raw.strip():
            continue
        d = _parse_json_line(raw, i)
        for key in ("bbox_id", "u", "v", "status"):
            if key not in d:
                raise SchemaError(f"estimate record missing {key!r}", line=i)
        rows.append(d)
    return header, rows


# -- ground-truth JSON-lines ----------------------------------------------

def write_ground_truth(path, rows: list[dict], meta: dict | None = None) -> None:
    header = {"schema": GROUND_TRUTH_SCHEMA}
    header.update(meta or {})
    lines = [dumps_json(header)] + [dumps_json(r) for r in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_ground_truth(path) -> tuple[dict, list[dict]]:
    text = Path(path).read_text().splitlines()
    if not text:
        raise SchemaError("empty ground-truth file", line=1)
    header = _parse_json_line(text[0], 1)
    if header.get("schema") != GROUND_TRUTH_SCHEMA:
        raise SchemaError(f"expected header with schema {GROUND_TRUTH_SCHEMA}", line=1)
    rows = []
    for i, raw in enumerate(text[1:], start=2):
        if raw.strip():
            rows.append(_parse_json_line(raw, i))
    return header, rows


# -- CSV formats ------------------------------------------------------------

def write_trajectory(path, samples: list[TrajectorySample]) -> None:
    lines = ["t,x,y,z"]
    for s in samples:
        lines.append(",".join(format_real(v) for v in (s.t, s.x, s.y, s.z)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trajectory(path) -> list[TrajectorySample]:
    samples = []
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        raw = raw.strip()
        if not raw:
            continue
        if i == 1 and raw.lower().replace(" ", "") == "t,x,y,z":
            continue
        parts = raw.split(",")
        if len(parts) != 4:
            raise SchemaError(f"expected 4 comma-separated values, got {len(parts)}", line=i)
        try:
            t, x, y, z = (float(p) for p in parts)
        except ValueError as exc:
            raise SchemaError(f"bad number: {exc}", line=i) from exc
        samples.append(TrajectorySample(t, x, y, z))
    return samples


def _read_numeric_csv(path, n_cols: int, header: str | None) -> list[tuple[float, ...]]:
    rows = []
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        raw = raw.strip()
        if not raw:
            continue
        if i == 1 and header is not None and raw.lower().replace(" ", "") == header:
            continue
        parts = raw.split(",")
        if len(parts) != n_cols:
            raise SchemaError(f"expected {n_cols} comma-separated values, got {len(parts)}", line=i)
        try:
            rows.append(tuple(float(p) for p in parts))
        except ValueError as exc:
            raise SchemaError(f"bad number: {exc}", line=i) from exc
    return rows


def write_lines_csv(path, lines_uv: list[tuple[float, float, float, float]]) -> None:
    text = "\n".join(",".join(format_real(v) for v in row) for row in lines_uv)
    atomic_write_text(path, text + "\n" if text else "")


def read_lines_csv(path) -> list[tuple[float, float, float, float]]:
    return [tuple(r) for r in _read_numeric_csv(path, 4, "u1,v1,u2,v2")]


def write_control_points(path, points: list[tuple]) -> None:
    lines = ["u,v,gx,gz"]
    for pix, (gx, gz) in points:
        lines.append(",".join(format_real(v) for v in (pix[0], pix[1], gx, gz)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_control_points(path) -> list[tuple[float, float, float, float]]:
    return [tuple(r) for r in _read_numeric_csv(path, 4, "u,v,gx,gz")]


# -- point clouds -----------------------------------------------------------

def write_cloud_xyz(path, points: np.ndarray, intensity: np.ndarray | None = None) -> None:
    lines = []
    for i, p in enumerate(np.asarray(points, dtype=np.float64)):
        vals = [p[0], p[1], p[2]]
        if intensity is not None:
            vals.append(float(intensity[i]))
        lines.append(" ".join(format_real(v) for v in vals))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_cloud(path) -> np.ndarray:
    """Read a cloud: whitespace XYZ text, or float32 quadruplets for .bin."""
    path = Path(path)
    if path.suffix == ".bin":
        raw = np.fromfile(path, dtype=np.float32)
        if raw.size % 4 != 0:
            raise SchemaError(f"{path}: binary cloud size {raw.size} is not a multiple of 4")
        return raw.reshape(-1, 4)[:, :3].astype(np.float64)
    rows = []
    for i, raw in enumerate(path.read_text().splitlines(), start=1):
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        parts = raw.split()
        if len(parts) not in (3, 4):
            raise SchemaError(f"expected 3 or 4 whitespace-separated values", line=i)
        try:
            rows.append([float(p) for p in parts[:3]])
        except ValueError as exc:
            raise SchemaError(f"bad number: {exc}", line=i) from exc
    return np.asarray(rows, dtype=np.float64).reshape(-1, 3)


# -- PGM masks ---------------------------------------------------------------

def write_mask_pgm(path, mask) -> None:
    arr = (np.asarray(mask).astype(bool)).astype(np.uint8) * 255
    h, w = arr.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + arr.tobytes())


def read_mask_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] not in (b"P5", b"P2"):
        raise SchemaError(f"{path}: not a PGM raster (P5 or P2)")
    binary = data[:2] == b"P5"
    # Header: magic, width, height, maxval; comments allowed.
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise SchemaError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise SchemaError(f"{path}: bad PGM header: {exc}") from exc
    if binary:
        pos += 1  # single whitespace after maxval
        if maxval > 255:
            raise SchemaError(f"{path}: 16-bit PGM not supported")
        pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    else:
        pixels = np.array(data[pos:].split(), dtype=np.int64)
        if pixels.size != w * h:
            raise SchemaError(f"{path}: expected {w * h} pixels, got {pixels.size}")
    return (pixels.reshape(h, w) > 0)


# -- scene JSON ---------------------------------------------------------------

def scene_to_dict(scene: SyntheticScene) -> dict:
    cam = scene.camera
    return {
        "schema": SCENE_SCHEMA,
        "prng": PRNG_ALGORITHM,
        "seed": scene.seed,
        "sensor_id": scene.sensor_id,
        "camera": {
            "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
            "k1": cam.k1, "k2": cam.k2, "p1": cam.p1, "p2": cam.p2, "k3": cam.k3,
            "width": cam.width, "height": cam.height,
        },
        "height": scene.height,
        "alpha": scene.alpha,
        "gamma": scene.gamma,
        "plane_breaks": [list(b) for b in scene.plane_breaks],
        "targets": [
            {"x": t.ground_xz[0], "z": t.ground_xz[1], "class_name": t.class_name.value}
            for t in scene.targets
        ],
        "noise": {
            "pixel_sigma": scene.noise.pixel_sigma,
            "control_point_sigma": scene.noise.control_point_sigma,
        },
    }


def scene_from_dict(doc: dict) -> SyntheticScene:
    try:
        c = doc["camera"]
        camera = CameraModel(
            fx=float(c["fx"]), fy=float(c["fy"]), cx=float(c["cx"]), cy=float(c["cy"]),
            k1=float(c["k1"]), k2=float(c["k2"]), p1=float(c["p1"]), p2=float(c["p2"]),
            k3=float(c["k3"]), width=int(c["width"]), height=int(c["height"]),
        )
        return SyntheticScene(
            camera=camera,
            height=float(doc["height"]),
            alpha=float(doc["alpha"]),
            gamma=float(doc["gamma"]),
            plane_breaks=tuple((float(a), float(b)) for a, b in doc["plane_breaks"]),
            targets=tuple(
                SceneTarget((float(t["x"]), float(t["z"])), ObjectClass(t["class_name"]))
                for t in doc["targets"]
            ),
            noise=NoiseSpec(
                float(doc["noise"]["pixel_sigma"]),
                float(doc["noise"]["control_point_sigma"]),
            ),
            seed=int(doc["seed"]),
            sensor_id=str(doc["sensor_id"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"bad scene document: {exc}") from exc


def save_scene(path, scene: SyntheticScene) -> None:
    atomic_write_text(path, dumps_json(scene_to_dict(scene)) + "\n")


def load_scene(path) -> SyntheticScene:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path}: {exc}") from exc
    return scene_from_dict(doc)
