"""Sample grid, noise schedule and the single-step sampler update.

Latents use the variance-exploding parameterization ``x = x0 + sigma * e``.
A sample's noise level is addressed by its step index ``k``: ``sigma[k]``,
with ``k = D`` meaning clean.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConfigError, SchedulingError, ShapeError


class SampleId(NamedTuple):
    view: int
    time: int


class Role(str, enum.Enum):
    INPUT = "input"
    TARGET = "target"


class Topology(str, enum.Enum):
    CIRCULAR = "circular"
    LINEAR = "linear"


@dataclass(frozen=True)
class NoiseSchedule:
    sigmas: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=np.float64)
        if s.ndim != 1 or len(s) < 3:
            raise ConfigError("schedule needs at least 3 entries (D >= 2)")
        if (len(s) - 1) % 2:
            raise ConfigError(f"D must be even, got {len(s) - 1}")
        if s[-1] != 0.0 or np.any(np.diff(s) >= 0):
            raise ConfigError("sigmas must be strictly decreasing and end at exactly 0")
        s.setflags(write=False)
        object.__setattr__(self, "sigmas", s)

    @property
    def D(self) -> int:
        return len(self.sigmas) - 1

    def to_dict(self) -> dict:
        return {"sigmas": [float(x) for x in self.sigmas]}


def build_schedule(D: int, sigma_max: float, sigma_min: float) -> NoiseSchedule:
    """Geometric spacing from ``sigma_max`` down to ``sigma_min`` over D entries, then 0."""
    if not isinstance(D, (int, np.integer)) or D < 2 or D % 2:
        raise ConfigError(f"D must be an even integer >= 2, got {D!r}")
    if not (sigma_max > sigma_min > 0):
        raise ConfigError(f"need sigma_max > sigma_min > 0, got {sigma_max}, {sigma_min}")
    ratio = np.arange(D) / (D - 1)
    sigmas = sigma_max * (sigma_min / sigma_max) ** ratio
    # pin the endpoints: pow() can be off by an ulp
    sigmas[0], sigmas[-1] = sigma_max, sigma_min
    return NoiseSchedule(np.append(sigmas, 0.0))


def sampler_step(x, x0_hat, sigma_cur: float, sigma_next: float):
    """First-order deterministic update from ``sigma_cur`` to ``sigma_next``."""
    if not sigma_next < sigma_cur:
        raise SchedulingError(f"sigma_next={sigma_next} must be below sigma_cur={sigma_cur}")
    if sigma_next < 0:
        raise SchedulingError("sigma_next must be non-negative")
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if sigma_next == 0.0:
        return x0_hat.copy()
    return x0_hat + (sigma_next / sigma_cur) * (np.asarray(x, dtype=np.float64) - x0_hat)


def sample_seed(master_seed: int, view: int, time: int) -> int:
    """64-bit per-sample seed; a pure function of its coordinates."""
    ss = np.random.SeedSequence([int(master_seed), int(view), int(time)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class SampleState:
    latent: np.ndarray
    role: Role
    k: int
    rng_seed: int


@dataclass
class SampleGrid:
    """V x T lattice of latents. Arrays are indexed ``[view, time]``."""

    latents: np.ndarray  # (V, T, d)
    k: np.ndarray  # (V, T) int
    seeds: np.ndarray  # (V, T) uint64
    input_views: tuple
    schedule: NoiseSchedule
    spatial_topology: Topology = Topology.CIRCULAR
    temporal_topology: Topology = Topology.LINEAR
    master_seed: int = 0

    @property
    def V(self) -> int:
        return self.latents.shape[0]

    @property
    def T(self) -> int:
        return self.latents.shape[1]

    @property
    def d(self) -> int:
        return self.latents.shape[2]

    @property
    def D(self) -> int:
        return self.schedule.D

    @property
    def target_views(self) -> list[int]:
        return [v for v in range(self.V) if v not in self.input_views]

    def is_input(self, sid: SampleId) -> bool:
        return sid.view in self.input_views

    def role(self, sid: SampleId) -> Role:
        return Role.INPUT if self.is_input(sid) else Role.TARGET

    def targets(self) -> list[SampleId]:
        return [SampleId(v, t) for v in self.target_views for t in range(self.T)]

    def inputs(self) -> list[SampleId]:
        return [SampleId(v, t) for v in sorted(self.input_views) for t in range(self.T)]

    def sigma(self, sid: SampleId) -> float:
        return float(self.schedule.sigmas[self.k[sid]])

    def state(self, sid: SampleId) -> SampleState:
        return SampleState(self.latents[sid].copy(), self.role(sid), int(self.k[sid]),
                           int(self.seeds[sid]))

    def target_mask(self) -> np.ndarray:
        mask = np.ones((self.V, self.T), dtype=bool)
        mask[list(self.input_views), :] = False
        return mask

    def copy(self) -> "SampleGrid":
        return SampleGrid(self.latents.copy(), self.k.copy(), self.seeds.copy(),
                          self.input_views, self.schedule, self.spatial_topology,
                          self.temporal_topology, self.master_seed)

    def save(self, directory) -> Path:
        """Write ``manifest.json`` plus ``latents.f32`` (little-endian float32, view-major)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "V": self.V, "T": self.T, "d": self.d,
            "input_views": sorted(int(v) for v in self.input_views),
            "roles": [[self.role(SampleId(v, t)).value for t in range(self.T)]
                      for v in range(self.V)],
            "k": self.k.tolist(),
            "seeds": [[int(s) for s in row] for row in self.seeds],
            "master_seed": int(self.master_seed),
            "schedule": self.schedule.to_dict(),
            "spatial_topology": self.spatial_topology.value,
            "temporal_topology": self.temporal_topology.value,
            "latent_file": "latents.f32",
            "latent_dtype": "<f4",
            "latent_order": "view-major, then time, then channel",
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
        self.latents.astype("<f4").tofile(directory / "latents.f32")
        return directory

    @classmethod
    def load(cls, directory) -> "SampleGrid":
        """Inverse of :meth:`save`. Latents come back at float32 precision."""
        directory = Path(directory)
        m = json.loads((directory / "manifest.json").read_text())
        raw = np.fromfile(directory / m["latent_file"], dtype="<f4")
        latents = raw.astype(np.float64).reshape(m["V"], m["T"], m["d"])
        return cls(latents, np.array(m["k"], dtype=np.int64),
                   np.array(m["seeds"], dtype=np.uint64), tuple(m["input_views"]),
                   NoiseSchedule(np.array(m["schedule"]["sigmas"])),
                   Topology(m["spatial_topology"]), Topology(m["temporal_topology"]),
                   m["master_seed"])


def init_grid(V: int, T: int, input_views: Iterable[int], d: int, master_seed: int,
              schedule: NoiseSchedule, clean: np.ndarray | None = None,
              spatial_topology: Topology = Topology.CIRCULAR,
              temporal_topology: Topology = Topology.LINEAR) -> SampleGrid:
    """Inputs get their clean latents (``clean[v, t]``, zeros if absent) at k = D.

    Targets get ``sigma[0] * N(0, I)`` noise at k = 0, drawn from a generator seeded
    by ``(master_seed, view, time)`` so the result does not depend on construction order.
    """
    if min(V, T, d) < 1:
        raise ConfigError(f"V, T, d must be >= 1, got {V}, {T}, {d}")
    input_views = tuple(sorted(set(int(v) for v in input_views)))
    if not input_views:
        raise ConfigError("at least one input view is required")
    if input_views[0] < 0 or input_views[-1] >= V:
        raise ConfigError(f"input views {input_views} out of range for V={V}")
    if clean is not None and np.shape(clean) != (V, T, d):
        raise ShapeError(f"clean latents must have shape {(V, T, d)}, got {np.shape(clean)}")

    latents = np.zeros((V, T, d))
    k = np.zeros((V, T), dtype=np.int64)
    seeds = np.zeros((V, T), dtype=np.uint64)
    sigma0 = schedule.sigmas[0]
    for v in range(V):
        for t in range(T):
            seeds[v, t] = sample_seed(master_seed, v, t)
            if v in input_views:
                k[v, t] = schedule.D
                if clean is not None:
                    latents[v, t] = clean[v, t]
            else:
                rng = np.random.default_rng(int(seeds[v, t]))
                latents[v, t] = sigma0 * rng.standard_normal(d)
    return SampleGrid(latents, k, seeds, input_views, schedule, Topology(spatial_topology),
                      Topology(temporal_topology), int(master_seed))


@dataclass(frozen=True)
class ChannelLayout:
    image_ch: int = 4
    skeleton_ch: int = 4
    plucker_ch: int = 6
    mask_ch: int = 1

    def __post_init__(self):
        if min(self.image_ch, self.skeleton_ch, self.plucker_ch, self.mask_ch) < 0:
            raise ConfigError("channel counts must be non-negative")

    @property
    def total(self) -> int:
        return self.image_ch + self.skeleton_ch + self.plucker_ch + self.mask_ch


def assemble_channels(image, skeleton, plucker, is_input: bool,
                      layout: ChannelLayout = ChannelLayout()) -> np.ndarray:
    """Concatenate channel-last maps as image | skeleton | plucker | mask."""
    parts = []
    hw = None
    for name, arr, want in (("image", image, layout.image_ch),
                            ("skeleton", skeleton, layout.skeleton_ch),
                            ("plucker", plucker, layout.plucker_ch)):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != want:
            raise ShapeError(f"{name} map must be HxWx{want}, got {arr.shape}")
        if hw is None:
            hw = arr.shape[:2]
        elif arr.shape[:2] != hw:
            raise ShapeError(f"{name} map resolution {arr.shape[:2]} != {hw}")
        parts.append(arr)
    parts.append(np.full(hw + (layout.mask_ch,), 1.0 if is_input else 0.0))
    return np.concatenate(parts, axis=2)
