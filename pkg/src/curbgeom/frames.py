"""Named coordinate frames, rigid transforms, and the calibration graph.

Frame conventions:
    * ``map``: global frame anchored at a surveyed origin; x = east,
      y = north, z = up.
    * ``lidar-ego``: sensor frame, x forward, z up.
    * ``lidar-base``: virtual frame at the host pole's ground contact with
      its x-o-y plane in the local ground.
    * ``camera-ego``: optical-center frame with z forward along the view and
      x pointing leftward.
    * ``camera-optical``: the frame all camera math in this package uses
      (x right with pixel u, y down with pixel v, z forward). It relates to
      ``camera-ego`` by a fixed 180-degree rotation about z; see
      :func:`camera_optical_edge`.
    * ``road``: estimator-local ground frame per camera; z' down-road in the
      vertical plane of the optical axis, y' normal to the local ground.

A transform ``T`` with ``from_frame=A, to_frame=B`` maps point coordinates
from A to B: ``p_B = R @ p_A + t``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DuplicateEdgeError, FrameMismatchError, NoPathError

ORTHONORMALITY_TOL = 1e-6
REORTHOGONALIZE_CHAIN_LEN = 8


class FrameKind(Enum):
    CAMERA_EGO = "camera-ego"
    CAMERA_OPTICAL = "camera-optical"
    LIDAR_EGO = "lidar-ego"
    LIDAR_BASE = "lidar-base"
    MAP = "map"
    ROAD = "road"


@dataclass(frozen=True)
class FrameId:
    """A named coordinate frame: a kind plus the owning sensor's id.

    The map frame is unique and carries no sensor id.
    """

    kind: FrameKind
    sensor_id: str = ""

    def __post_init__(self):
        if self.kind is FrameKind.MAP and self.sensor_id:
            raise ValueError("map frame carries no sensor id")
        if self.kind is not FrameKind.MAP and not self.sensor_id:
            raise ValueError(f"{self.kind.value} frame requires a sensor id")

    def __str__(self) -> str:
        if self.kind is FrameKind.MAP:
            return "map"
        return f"{self.kind.value}:{self.sensor_id}"

    @classmethod
    def parse(cls, text: str) -> "FrameId":
        """Parse a frame string like ``camera-ego:cam3`` or ``map``."""
        if text == "map":
            return cls(FrameKind.MAP)
        kind_str, sep, sensor = text.partition(":")
        if not sep or not sensor:
            raise ValueError(f"malformed frame string: {text!r}")
        try:
            kind = FrameKind(kind_str)
        except ValueError:
            raise ValueError(f"unknown frame kind in {text!r}") from None
        if kind is FrameKind.MAP:
            raise ValueError("map frame carries no sensor id")
        return cls(kind, sensor)


def _as_rotation(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {r.shape}")
    defect = orthonormality_defect(r)
    if defect > ORTHONORMALITY_TOL:
        raise ValueError(f"rotation is not orthonormal (defect {defect:.3e})")
    if np.linalg.det(r) < 0:
        raise ValueError("rotation has negative determinant (reflection)")
    return r


def orthonormality_defect(r: np.ndarray) -> float:
    """Frobenius norm of R^T R - I."""
    return float(np.linalg.norm(r.T @ r - np.eye(3)))


def nearest_rotation(r: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix onto SO(3) via SVD."""
    u, _, vt = np.linalg.svd(np.asarray(r, dtype=np.float64))
    out = u @ vt
    if np.linalg.det(out) < 0:
        out = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return out


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) pose mapping points from ``from_frame`` into ``to_frame``."""

    rotation: np.ndarray
    translation: np.ndarray
    from_frame: FrameId
    to_frame: FrameId

    def __post_init__(self):
        r = _as_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, frame: FrameId, to_frame: FrameId | None = None) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), frame, to_frame if to_frame is not None else frame)

    def apply(self, points) -> np.ndarray:
        """Transform one point (3,) or many (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_matrix(cls, m, from_frame: FrameId, to_frame: FrameId) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError("expected a 4x4 homogeneous matrix")
        return cls(m[:3, :3], m[:3, 3], from_frame, to_frame)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Chain two transforms: the result maps b.from_frame to a.to_frame.

    ``b`` is applied first, then ``a``; requires a.from_frame == b.to_frame.
    """
    if a.from_frame != b.to_frame:
        raise FrameMismatchError(
            f"cannot compose {b.from_frame}->{b.to_frame} then {a.from_frame}->{a.to_frame}"
        )
    return RigidTransform(
        a.rotation @ b.rotation,
        a.rotation @ b.translation + a.translation,
        b.from_frame,
        a.to_frame,
    )


def invert(t: RigidTransform) -> RigidTransform:
    """Inverse transform: rotation transposed, translation -R^T t, frames swapped."""
    rt = t.rotation.T
    return RigidTransform(rt, -rt @ t.translation, t.to_frame, t.from_frame)


def rotation_from_pitch_roll(alpha: float, gamma: float) -> np.ndarray:
    """Camera-to-road rotation from pitch ``alpha`` and roll ``gamma``.

    The factor order is roll-about-z times pitch-about-x; the second row of
    the result is the ground-plane normal in the camera frame.
    """
    ca, sa = np.cos(alpha), np.sin(alpha)
    cg, sg = np.cos(gamma), np.sin(gamma)
    roll = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    pitch = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
    return roll @ pitch


def camera_optical_edge(sensor_id: str) -> RigidTransform:
    """Fixed edge between a camera's optical frame and its ego frame.

    The ego frame (x leftward, y up) is the optical frame (x right with u,
    y down with v) rotated 180 degrees about the shared forward z axis.
    """
    rz_pi = np.diag([-1.0, -1.0, 1.0])
    return RigidTransform(
        rz_pi,
        np.zeros(3),
        FrameId(FrameKind.CAMERA_OPTICAL, sensor_id),
        FrameId(FrameKind.CAMERA_EGO, sensor_id),
    )


@dataclass
class FrameGraph:
    """Tree of calibration edges; answers any connected frame-pair query.

    Insertion rejects a second path between two frames, so path lookups are
    unique by construction. Build once, then treat as read-only.
    """

    _edges: dict[tuple[FrameId, FrameId], RigidTransform] = field(default_factory=dict)
    _adjacency: dict[FrameId, list[FrameId]] = field(default_factory=dict)

    def add_edge(self, t: RigidTransform) -> None:
        a, b = t.from_frame, t.to_frame
        if a == b:
            raise DuplicateEdgeError(f"self edge on {a}")
        if (a, b) in self._edges or (b, a) in self._edges:
            raise DuplicateEdgeError(f"edge between {a} and {b} already present")
        if a in self._adjacency and b in self._adjacency and self._find_path(a, b) is not None:
            raise DuplicateEdgeError(f"{a} and {b} are already connected; second path rejected")
        self._edges[(a, b)] = t
        self._adjacency.setdefault(a, []).append(b)
        self._adjacency.setdefault(b, []).append(a)

    def frames(self) -> list[FrameId]:
        return list(self._adjacency)

    def edges(self) -> list[RigidTransform]:
        return list(self._edges.values())

    def _find_path(self, start: FrameId, goal: FrameId) -> list[FrameId] | None:
        if start == goal:
            return [start]
        prev: dict[FrameId, FrameId] = {}
        queue = deque([start])
        seen = {start}
        while queue:
            node = queue.popleft()
            for nxt in self._adjacency.get(node, ()):
                if nxt in seen:
                    continue
                seen.add(nxt)
                prev[nxt] = node
                if nxt == goal:
                    path = [goal]
                    while path[-1] != start:
                        path.append(prev[path[-1]])
                    path.reverse()
                    return path
                queue.append(nxt)
        return None

    def _edge_transform(self, a: FrameId, b: FrameId) -> RigidTransform:
        t = self._edges.get((a, b))
        if t is not None:
            return t
        return invert(self._edges[(b, a)])

    def lookup(self, from_frame: FrameId, to_frame: FrameId) -> RigidTransform:
        """Transform mapping points in ``from_frame`` to ``to_frame``."""
        if from_frame == to_frame:
            return RigidTransform.identity(from_frame)
        if from_frame not in self._adjacency or to_frame not in self._adjacency:
            raise NoPathError(f"no path from {from_frame} to {to_frame}")
        path = self._find_path(from_frame, to_frame)
        if path is None:
            raise NoPathError(f"no path from {from_frame} to {to_frame}")
        out = self._edge_transform(path[0], path[1])
        for i in range(1, len(path) - 1):
            out = compose(self._edge_transform(path[i], path[i + 1]), out)
        if len(path) - 1 > REORTHOGONALIZE_CHAIN_LEN:
            # Long chains accumulate drift; snap back to the nearest rotation.
            out = RigidTransform(
                nearest_rotation(out.rotation), out.translation, out.from_frame, out.to_frame
            )
        return out
