"""Skeleton triangulation, reprojection and colored pose-map rasterization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .camera import Camera, ProjectionError, project
from .errors import ConfigError, ShapeError

DEFAULT_CONF_THRESHOLD = 0.3


class Joint2D(NamedTuple):
    u: float
    v: float
    conf: float


class Bone(NamedTuple):
    a: int
    b: int
    color: tuple  # RGB, 0..255


@dataclass(frozen=True)
class SkeletonTopology:
    joint_names: tuple
    bones: tuple
    joint_colors: tuple | None = None

    def __post_init__(self):
        J = len(self.joint_names)
        for bone in self.bones:
            if not (0 <= bone.a < J and 0 <= bone.b < J):
                raise ConfigError(f"bone {bone} references a joint outside [0, {J})")
        if self.joint_colors is not None and len(self.joint_colors) != J:
            raise ConfigError("joint_colors must have one entry per joint")

    @property
    def J(self) -> int:
        return len(self.joint_names)

    def joint_color(self, j: int) -> tuple:
        if self.joint_colors is not None:
            return tuple(self.joint_colors[j])
        for bone in self.bones:
            if j in (bone.a, bone.b):
                return tuple(bone.color)
        return (255, 255, 255)

    def to_dict(self) -> dict:
        out = {"joints": list(self.joint_names),
               "bones": [{"a": b.a, "b": b.b, "color": list(b.color)} for b in self.bones]}
        if self.joint_colors is not None:
            out["joint_colors"] = [list(c) for c in self.joint_colors]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonTopology":
        bones = tuple(Bone(int(b["a"]), int(b["b"]), tuple(int(c) for c in b["color"]))
                      for b in d["bones"])
        jc = d.get("joint_colors")
        return cls(tuple(d["joints"]), bones,
                   None if jc is None else tuple(tuple(int(c) for c in x) for x in jc))

    @classmethod
    def load(cls, path) -> "SkeletonTopology":
        return cls.from_dict(json.loads(Path(path).read_text()))


_COCO_JOINTS = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)

# one hue family per body part: head, torso, left/right arm, left/right leg
_COCO_BONES = (
    (0, 1, (255, 0, 85)), (0, 2, (255, 0, 170)), (1, 3, (170, 0, 255)), (2, 4, (85, 0, 255)),
    (5, 6, (255, 255, 0)), (5, 11, (255, 200, 0)), (6, 12, (200, 255, 0)),
    (11, 12, (170, 170, 0)),
    (5, 7, (255, 85, 0)), (7, 9, (255, 140, 0)),
    (6, 8, (0, 255, 85)), (8, 10, (0, 255, 170)),
    (11, 13, (0, 85, 255)), (13, 15, (0, 0, 255)),
    (12, 14, (0, 255, 255)), (14, 16, (0, 170, 255)),
)

COCO17 = SkeletonTopology(_COCO_JOINTS, tuple(Bone(a, b, c) for a, b, c in _COCO_BONES))


@dataclass
class Skeleton2D:
    uv: np.ndarray  # (J, 2)
    conf: np.ndarray  # (J,)

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=np.float64).reshape(-1, 2)
        self.conf = np.asarray(self.conf, dtype=np.float64).reshape(-1)
        if len(self.uv) != len(self.conf):
            raise ShapeError("uv and conf must have the same joint count")
        if np.any((self.conf < 0) | (self.conf > 1)):
            raise ConfigError("joint confidences must lie in [0, 1]")

    @property
    def J(self) -> int:
        return len(self.conf)

    @property
    def valid(self) -> np.ndarray:
        return (self.conf > 0) & np.all(np.isfinite(self.uv), axis=1)

    def joints(self) -> list[Joint2D]:
        return [Joint2D(float(u), float(v), float(c)) for (u, v), c in zip(self.uv, self.conf)]

    def to_list(self) -> list[dict]:
        return [{"u": None if not np.isfinite(j.u) else j.u,
                 "v": None if not np.isfinite(j.v) else j.v, "conf": j.conf}
                for j in self.joints()]

    @classmethod
    def from_list(cls, records: Sequence[dict]) -> "Skeleton2D":
        uv = [[np.nan if r["u"] is None else r["u"], np.nan if r["v"] is None else r["v"]]
              for r in records]
        return cls(np.array(uv, dtype=np.float64).reshape(-1, 2), [r["conf"] for r in records])


@dataclass
class Skeleton3D:
    joints: np.ndarray  # (J, 3), NaN where invalid
    valid: np.ndarray  # (J,) bool
    conf3d: np.ndarray  # (J,)
    status: list = field(default_factory=list)  # per joint: ok | low_confidence | degenerate

    @property
    def J(self) -> int:
        return len(self.valid)

    def to_dict(self) -> dict:
        return {"joints": [[float(x) for x in p] if ok else None
                           for p, ok in zip(self.joints, self.valid)],
                "valid": [bool(x) for x in self.valid],
                "conf3d": [float(c) for c in self.conf3d],
                "status": list(self.status)}

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton3D":
        joints = np.array([[np.nan] * 3 if p is None else p for p in d["joints"]], dtype=float)
        return cls(joints.reshape(-1, 3), np.array(d["valid"], dtype=bool),
                   np.array(d["conf3d"], dtype=float), list(d.get("status", [])))


class TriangulatedJoint(NamedTuple):
    point: np.ndarray | None
    conf3d: float
    status: str

    @property
    def valid(self) -> bool:
        return self.status == "ok"


def _rays_parallel(dirs: list[np.ndarray], tol: float = 1e-9) -> bool:
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            if np.linalg.norm(np.cross(dirs[i], dirs[j])) > tol:
                return False
    return True


def triangulate_joint(obs, conf_threshold: float = DEFAULT_CONF_THRESHOLD) -> TriangulatedJoint:
    """Confidence-weighted linear (DLT) triangulation of one joint.

    ``obs`` is a sequence of ``(camera, u, v, conf)``. Observations below the
    threshold are dropped before the system is built, so they cannot influence
    the result at all.
    """
    used = [(cam, float(u), float(v), float(c)) for cam, u, v, c in obs
            if c >= conf_threshold and c > 0 and np.isfinite(u) and np.isfinite(v)]
    if len(used) < 2:
        return TriangulatedJoint(None, 0.0, "low_confidence")

    rows, dirs = [], []
    for cam, u, v, c in used:
        # normalized image coordinates keep the system well conditioned
        xn = (u - cam.cx) / cam.fx
        yn = (v - cam.cy) / cam.fy
        Rt = np.hstack([cam.R, cam.t[:, None]])
        rows.append(c * (xn * Rt[2] - Rt[0]))
        rows.append(c * (yn * Rt[2] - Rt[1]))
        d = cam.R.T @ np.array([xn, yn, 1.0])
        dirs.append(d / np.linalg.norm(d))
    if _rays_parallel(dirs):
        return TriangulatedJoint(None, 0.0, "degenerate")

    _, _, Vt = np.linalg.svd(np.array(rows))
    Xh = Vt[-1]
    if abs(Xh[3]) < 1e-12 * np.linalg.norm(Xh):
        return TriangulatedJoint(None, 0.0, "degenerate")
    return TriangulatedJoint(Xh[:3] / Xh[3], float(np.mean([o[3] for o in used])), "ok")


def triangulate_skeleton(skeletons: Sequence[Skeleton2D], cameras: Sequence[Camera],
                         conf_threshold: float = DEFAULT_CONF_THRESHOLD,
                         topology: SkeletonTopology | None = None) -> Skeleton3D:
    if len(skeletons) != len(cameras):
        raise ConfigError(f"{len(skeletons)} skeletons for {len(cameras)} cameras")
    if topology is not None:
        J = topology.J
    elif skeletons:
        J = skeletons[0].J
    else:
        raise ConfigError("joint count unknown: pass a topology when there are no views")
    if any(s.J != J for s in skeletons):
        raise ConfigError("all views must share one skeleton topology")

    joints = np.full((J, 3), np.nan)
    valid = np.zeros(J, dtype=bool)
    conf3d = np.zeros(J)
    status = []
    for j in range(J):
        obs = [(cam, s.uv[j, 0], s.uv[j, 1], s.conf[j]) for s, cam in zip(skeletons, cameras)]
        res = triangulate_joint(obs, conf_threshold)
        status.append(res.status)
        if res.valid:
            joints[j], valid[j], conf3d[j] = res.point, True, res.conf3d
    return Skeleton3D(joints, valid, conf3d, status)


def project_skeleton(cam: Camera, skel: Skeleton3D) -> Skeleton2D:
    """Joints that are invalid or not in front of the camera come out with conf 0."""
    uv = np.full((skel.J, 2), np.nan)
    conf = np.zeros(skel.J)
    for j in range(skel.J):
        if not skel.valid[j]:
            continue
        try:
            u, v, depth = project(cam, skel.joints[j])
        except ProjectionError:
            continue
        if depth <= 0:
            continue
        uv[j] = (u, v)
        conf[j] = skel.conf3d[j]
    return Skeleton2D(uv, conf)


def _over(canvas: np.ndarray, coverage: np.ndarray, color, alpha: float, y0: int, x0: int):
    """Composite a solid color with per-pixel coverage onto ``canvas`` (straight alpha)."""
    a = alpha * coverage
    h, w = a.shape
    dst = canvas[y0:y0 + h, x0:x0 + w]
    dst_a = dst[..., 3]
    out_a = a + dst_a * (1.0 - a)
    rgb = np.asarray(color, dtype=np.float64) / 255.0
    with np.errstate(invalid="ignore", divide="ignore"):
        out_rgb = (rgb * a[..., None] + dst[..., :3] * (dst_a * (1.0 - a))[..., None]) \
            / out_a[..., None]
    out_rgb = np.where(out_a[..., None] > 0, out_rgb, 0.0)
    dst[..., :3] = out_rgb
    dst[..., 3] = out_a


def _bbox(pts, pad: float, H: int, W: int):
    lo = np.floor(np.min(pts, axis=0) - pad).astype(int)
    hi = np.ceil(np.max(pts, axis=0) + pad).astype(int) + 1
    x0, y0 = max(lo[0], 0), max(lo[1], 0)
    x1, y1 = min(hi[0], W), min(hi[1], H)
    if x0 >= x1 or y0 >= y1:
        return None
    return x0, y0, x1, y1


def segment_coverage(p, q, thickness: float, x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
    """Anti-aliased coverage of a round-capped segment over pixel centers in a box."""
    yy, xx = np.meshgrid(np.arange(y0, y1) + 0.5, np.arange(x0, x1) + 0.5, indexing="ij")
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    d = q - p
    L2 = float(d @ d)
    if L2 == 0.0:
        s = np.zeros_like(xx)
    else:
        s = np.clip(((xx - p[0]) * d[0] + (yy - p[1]) * d[1]) / L2, 0.0, 1.0)
    dist = np.hypot(xx - (p[0] + s * d[0]), yy - (p[1] + s * d[1]))
    return np.clip(thickness / 2.0 + 0.5 - dist, 0.0, 1.0)


def rasterize_skeleton(skel: Skeleton2D, topology: SkeletonTopology, height: int, width: int,
                       thickness: float = 2.0, joint_radius: float | None = None) -> np.ndarray:
    """Float RGBA (straight alpha, values in [0, 1]) of shape (height, width, 4).

    Bones come first, then joints, each composited over what is already drawn.
    A bone's opacity is the lower of its endpoint confidences.
    """
    if skel.J != topology.J:
        raise ConfigError(f"skeleton has {skel.J} joints, topology {topology.J}")
    if joint_radius is None:
        joint_radius = thickness / 2.0
    canvas = np.zeros((height, width, 4))
    valid = skel.valid
    pad = thickness / 2.0 + 1.0
    for bone in topology.bones:
        if not (valid[bone.a] and valid[bone.b]):
            continue
        alpha = min(skel.conf[bone.a], skel.conf[bone.b])
        p, q = skel.uv[bone.a], skel.uv[bone.b]
        box = _bbox(np.stack([p, q]), pad, height, width)
        if box is None:
            continue
        x0, y0, x1, y1 = box
        _over(canvas, segment_coverage(p, q, thickness, x0, y0, x1, y1), bone.color, alpha, y0, x0)
    for j in range(skel.J):
        if not valid[j] or joint_radius <= 0:
            continue
        p = skel.uv[j]
        box = _bbox(p[None], joint_radius + 1.0, height, width)
        if box is None:
            continue
        x0, y0, x1, y1 = box
        cov = segment_coverage(p, p, 2.0 * joint_radius, x0, y0, x1, y1)
        _over(canvas, cov, topology.joint_color(j), skel.conf[j], y0, x0)
    return canvas


def to_rgba8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def save_png(img: np.ndarray, path) -> None:
    from PIL import Image

    arr = to_rgba8(img) if img.dtype != np.uint8 else img
    Image.fromarray(arr, mode="RGBA" if arr.shape[-1] == 4 else None).save(path)


def load_keypoints(path) -> list:
    """Keypoint JSON: ``[frame][view] -> [{u, v, conf} x J]``; a bare ``[view]`` list is one frame."""
    data = json.loads(Path(path).read_text())
    if data and isinstance(data[0], dict):
        data = [[data]]
    elif data and data[0] and isinstance(data[0][0], dict):
        data = [data]
    return [[Skeleton2D.from_list(view) for view in frame] for frame in data]
