"""Pinhole cameras, pixel rays and world-frame Plücker embeddings.

Pixel (i, j) covers the continuous square [i, i+1) x [j, j+1); its center is at
(i + 0.5, j + 0.5). Skeleton rasterization uses the same convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError


class ProjectionError(NumericalError):
    """Point coincides with the camera's principal plane (zero depth)."""


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    R: np.ndarray  # world-to-camera rotation
    t: np.ndarray
    width: int = 1
    height: int = 1

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if not np.allclose(R @ R.T, np.eye(3), rtol=0, atol=1e-9) or \
                abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ConfigError("R must be a proper rotation (orthonormal, det +1)")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def center(self) -> np.ndarray:
        return -self.R.T @ self.t

    @property
    def P(self) -> np.ndarray:
        """3x4 projection matrix K [R | t]."""
        return self.K @ np.hstack([self.R, self.t[:, None]])

    @classmethod
    def look_at(cls, eye, target, up=(0.0, -1.0, 0.0), *, fx=1.0, fy=None, cx=0.0, cy=0.0,
                width=1, height=1) -> "Camera":
        """OpenCV-style camera (x right, y down, z forward) at ``eye`` looking at ``target``."""
        eye = np.asarray(eye, dtype=np.float64)
        z = np.asarray(target, dtype=np.float64) - eye
        z /= np.linalg.norm(z)
        x = np.cross(z, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(x) < 1e-12:
            raise ConfigError("up vector is parallel to the viewing direction")
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.stack([x, y, z])
        return cls(fx, fx if fy is None else fy, cx, cy, R, -R @ eye, width, height)

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height,
                "R": [float(x) for x in self.R.ravel()], "t": [float(x) for x in self.t]}

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        try:
            return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                       np.array(d["R"], dtype=np.float64).reshape(3, 3),
                       np.array(d["t"], dtype=np.float64), int(d["width"]), int(d["height"]))
        except (KeyError, ValueError, TypeError) as e:
            raise ConfigError(f"bad camera record: {e}") from e


def load_cameras(path) -> list[Camera]:
    """Read one camera object or a list of them from JSON."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("cameras", [data])
    return [Camera.from_dict(c) for c in data]


def save_cameras(cameras, path) -> None:
    Path(path).write_text(json.dumps([c.to_dict() for c in cameras], indent=2))


def pixel_ray(cam: Camera, u: float, v: float) -> tuple[np.ndarray, np.ndarray]:
    """World-frame ray through continuous pixel coordinate (u, v)."""
    xn = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
    d = cam.R.T @ xn
    return cam.center, d / np.linalg.norm(d)


def project(cam: Camera, X) -> tuple[float, float, float]:
    """Returns (u, v, depth). Negative depth means the point is behind the camera."""
    xc = cam.R @ np.asarray(X, dtype=np.float64) + cam.t
    depth = float(xc[2])
    if abs(depth) < 1e-12:
        raise ProjectionError(f"point {X} lies in the camera's principal plane")
    return (float(cam.fx * xc[0] / depth + cam.cx), float(cam.fy * xc[1] / depth + cam.cy),
            depth)


def plucker_embed(cam: Camera, height: int | None = None, width: int | None = None) -> np.ndarray:
    """H x W x 6 map of (d, o x d) at pixel centers, world frame, unit directions."""
    H = cam.height if height is None else height
    W = cam.width if width is None else width
    jj, ii = np.meshgrid(np.arange(H) + 0.5, np.arange(W) + 0.5, indexing="ij")
    xn = np.stack([(ii - cam.cx) / cam.fx, (jj - cam.cy) / cam.fy, np.ones_like(ii)], axis=-1)
    d = xn @ cam.R  # rows of xn times R == (R^T xn)^T
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    m = np.cross(np.broadcast_to(cam.center, d.shape), d)
    return np.concatenate([d, m], axis=-1)


def save_map(arr: np.ndarray, path) -> Path:
    """Flat little-endian float32, channel-last, with a ``.json`` sidecar holding the shape."""
    path = Path(path)
    np.asarray(arr).astype("<f4").tofile(path)
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps({"shape": list(arr.shape), "dtype": "<f4", "order": "row-major, channel-last"}))
    return path


def load_map(path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return np.fromfile(path, dtype="<f4").reshape(meta["shape"])
