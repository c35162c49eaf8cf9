"""Denoising plans and their execution.

A plan is an ordered list of window placements. Executing a placement runs
``steps`` sampler updates on its steppable members, querying the denoiser with
the whole window (plus conditioning inputs) before every update. Three plan
families are provided: sliding iterative sweeps (optionally alternating between
the view axis and the time axis), disjoint multi-group denoising and
overlapping windows merged by an elementwise median.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Protocol, Sequence

import numpy as np

from .errors import ConfigError, ContractViolation
from .grid import SampleGrid, SampleId, Topology, sampler_step


class Axis(str, enum.Enum):
    SPATIAL = "spatial"
    TEMPORAL = "temporal"


class WindowSpec(NamedTuple):
    W: int
    S: int
    P: int


@dataclass(frozen=True)
class WindowPlacement:
    axis: Axis
    line: int
    members: tuple
    steppable: tuple
    steps: int
    context_inputs: tuple = ()
    sweep: str = "forward"
    group: int = 0

    def __post_init__(self):
        if len(self.members) != len(self.steppable):
            raise ConfigError("one steppable flag per member")
        if self.steps < 1:
            raise ConfigError("a placement needs at least one step")

    @property
    def stepped(self) -> list:
        return [m for m, s in zip(self.members, self.steppable) if s]

    def to_dict(self) -> dict:
        return {"axis": self.axis.value, "line": self.line, "sweep": self.sweep,
                "group": self.group, "steps": self.steps,
                "members": [list(m) for m in self.members],
                "steppable": list(self.steppable),
                "context_inputs": [list(c) for c in self.context_inputs]}

    @classmethod
    def from_dict(cls, d: dict) -> "WindowPlacement":
        return cls(Axis(d["axis"]), d["line"], tuple(SampleId(*m) for m in d["members"]),
                   tuple(bool(s) for s in d["steppable"]), d["steps"],
                   tuple(SampleId(*c) for c in d["context_inputs"]), d.get("sweep", "forward"),
                   d.get("group", 0))


@dataclass
class DenoisePlan:
    """``mode`` is ``sequential`` (placements share one evolving grid) or
    ``independent`` (each ``group`` starts from the initial grid and overlapping
    results are merged with ``merge``)."""

    placements: list
    D: int
    phase_split: int | None = None
    mode: str = "sequential"
    merge: str | None = None
    name: str = ""

    def phases(self) -> list[list]:
        if self.phase_split is None:
            return [list(self.placements)]
        return [list(self.placements[:self.phase_split]),
                list(self.placements[self.phase_split:])]

    def to_dict(self) -> dict:
        return {"name": self.name, "D": self.D, "phase_split": self.phase_split,
                "mode": self.mode, "merge": self.merge,
                "placements": [p.to_dict() for p in self.placements]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "DenoisePlan":
        return cls([WindowPlacement.from_dict(p) for p in d["placements"]], d["D"],
                   d.get("phase_split"), d.get("mode", "sequential"), d.get("merge"),
                   d.get("name", ""))


# --------------------------------------------------------------------------
# line sweeps


class LineWindow(NamedTuple):
    positions: tuple
    steppable: tuple
    sweep: str


def _window(start: int, W: int, L: int, circular: bool) -> tuple:
    if circular:
        return tuple((start + i) % L for i in range(W))
    return tuple(range(start, start + W))


def _sweep_starts(L: int, W: int, S: int, circular: bool) -> list[int]:
    if circular:
        return list(range(0, L, S))
    starts = []
    s = 0
    while True:
        st = min(s, L - W)
        if not starts or starts[-1] != st:
            starts.append(st)
        if st + W >= L:
            return starts
        s += S


def _line_windows(L: int, circular: bool, W: int, S: int, P: int, budget: int) -> list[LineWindow]:
    """Forward sweep, reverse sweep, then compensation until every position has ``budget``.

    A member is steppable only while the steps it would receive keep it within the
    running cap (``budget/2`` after the forward sweep, ``budget`` after the reverse
    one), so clamped boundary windows never over-count. Remaining deficits get
    extra windows centred on the most deficient position; members already at
    budget ride along as context.
    """
    counts = [0] * L
    out = []
    starts = _sweep_starts(L, W, S, circular)
    half = budget // 2
    for sweep, order, cap in (("forward", starts, half), ("reverse", starts[::-1], budget)):
        for st in order:
            pos = _window(st, W, L, circular)
            step = tuple(counts[p] + P <= cap for p in pos)
            if not any(step):
                continue
            for p, s in zip(pos, step):
                if s:
                    counts[p] += P
            out.append(LineWindow(pos, step, sweep))
    while True:
        deficit = [budget - c for c in counts]
        worst = max(deficit)
        if worst <= 0:
            break
        i = deficit.index(worst)
        steps = min(P, worst)
        st = i - (W - 1) // 2
        st = st % L if circular else min(max(st, 0), L - W)
        pos = _window(st, W, L, circular)
        step = tuple(deficit[p] >= steps for p in pos)
        for p, s in zip(pos, step):
            if s:
                counts[p] += steps
        out.append(LineWindow(pos, step, f"compensation:{steps}"))
    return out


def _check_line(L: int, topology: Topology, W: int, S: int, P: int):
    if not (1 <= S <= W <= L):
        raise ConfigError(f"need 1 <= S <= W <= L, got S={S}, W={W}, L={L}")
    if W % S:
        raise ConfigError(f"stride S={S} must divide window W={W}")
    if Topology(topology) is Topology.CIRCULAR and L % S:
        raise ConfigError(f"on a circular line S={S} must divide L={L}")
    if P < 1:
        raise ConfigError(f"P must be >= 1, got {P}")


def plan_line_sweeps(L: int, topology, W: int, S: int, P: int,
                     axis: Axis = Axis.SPATIAL, line: int = 0) -> list[WindowPlacement]:
    """Placements for one line of length L whose samples are ``SampleId(position, line)``
    (spatial) or ``SampleId(line, position)`` (temporal). Every position ends with 2PW/S steps."""
    _check_line(L, topology, W, S, P)
    circular = Topology(topology) is Topology.CIRCULAR
    ids = [SampleId(p, line) if axis is Axis.SPATIAL else SampleId(line, p) for p in range(L)]
    return [_to_placement(w, ids, P, Axis(axis), line, ()) for w in
            _line_windows(L, circular, W, S, P, 2 * P * W // S)]


def _to_placement(w: LineWindow, ids, P: int, axis: Axis, line: int, context) -> WindowPlacement:
    steps = P
    if w.sweep.startswith("compensation:"):
        steps = int(w.sweep.split(":")[1])
    members = tuple(ids[p] for p in w.positions)
    ctx = context(members) if callable(context) else tuple(context)
    return WindowPlacement(axis, line, members, w.steppable, steps, ctx,
                           w.sweep.split(":")[0])


# --------------------------------------------------------------------------
# conditioning selection


def ring_centers(V: int, radius: float = 1.0) -> np.ndarray:
    """Camera centers of an evenly spaced circular rig, view 0 at angle 0."""
    ang = 2 * np.pi * np.arange(V) / V
    return np.stack([radius * np.cos(ang), radius * np.sin(ang), np.zeros(V)], axis=1)


def _centers(cameras) -> np.ndarray:
    rows = []
    for c in cameras:
        rows.append(c.center if hasattr(c, "center") else np.asarray(c, dtype=np.float64))
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def nearest_input_view(cameras, target_view: int, input_views: Sequence[int]) -> int:
    """Input view whose camera center is closest to the target's; ties go to the lower index.

    ``cameras`` is a sequence of :class:`Camera` objects or raw 3-vector centers,
    indexed by view.
    """
    if not input_views:
        raise ConfigError("no input views to choose from")
    if cameras is None:
        raise ConfigError("camera centers are required to pick the nearest input view")
    centers = _centers(cameras)
    if target_view >= len(centers) or max(input_views) >= len(centers):
        raise ConfigError(f"missing camera for view {max(target_view, max(input_views))}")
    best, best_d = None, np.inf
    for v in sorted(input_views):
        dist = float(np.linalg.norm(centers[v] - centers[target_view]))
        if dist < best_d:
            best, best_d = v, dist
    return best


# --------------------------------------------------------------------------
# plan builders


def _valid_tuples(L: int, topology: Topology, budget: int) -> list[WindowSpec]:
    out = []
    for W in range(1, L + 1):
        for S in range(1, W + 1):
            if W % S or (topology is Topology.CIRCULAR and L % S):
                continue
            if (budget * S) % (2 * W) == 0:
                P = budget * S // (2 * W)
                if P >= 1:
                    out.append(WindowSpec(W, S, P))
    return out


def _spatial_lines(grid: SampleGrid, spec: WindowSpec, budget: int, check: bool) -> list:
    targets = grid.target_views
    L = len(targets)
    W, S, P = spec
    topo = Topology(grid.spatial_topology)
    if check:
        try:
            _check_line(L, topo, W, S, P)
        except ConfigError as e:
            raise ConfigError(f"spatial window: {e}; valid (W,S,P) for budget {budget}: "
                              f"{_valid_tuples(L, topo, budget)}") from e
    windows = _line_windows(L, topo is Topology.CIRCULAR, W, S, P, budget)
    out = []
    for t in range(grid.T):
        ids = [SampleId(v, t) for v in targets]
        ctx = tuple(SampleId(v, t) for v in sorted(grid.input_views))
        out.extend(_to_placement(w, ids, P, Axis.SPATIAL, t, ctx) for w in windows)
    return out


def plan_alternating(grid: SampleGrid, spatial, temporal, D: int | None = None,
                     cameras=None) -> DenoisePlan:
    """Spatial sliding sweeps for D/2 steps, then temporal sweeps for the other D/2.

    Spatial lines run over the target views at one timestamp with that
    timestamp's inputs as context. Temporal lines run over one target view's
    frames with the nearest input view's frames (same time range as the window)
    as context. ``cameras`` defaults to an evenly spaced ring.
    """
    D = grid.D if D is None else D
    if D != grid.D:
        raise ConfigError(f"plan D={D} does not match the grid schedule D={grid.D}")
    if not grid.input_views:
        raise ConfigError("alternating denoising needs at least one input view")
    spatial, temporal = WindowSpec(*spatial), WindowSpec(*temporal)
    half = D // 2
    for name, (W, S, P), L, topo in (
            ("spatial", spatial, len(grid.target_views), Topology(grid.spatial_topology)),
            ("temporal", temporal, grid.T, Topology(grid.temporal_topology))):
        if S < 1 or W < 1 or 2 * P * W != half * S:
            raise ConfigError(f"{name} budget 2*P*W/S = {2 * P * W / max(S, 1):g} must equal "
                              f"D/2 = {half}; valid (W,S,P): {_valid_tuples(L, topo, half)}")
    if not grid.target_views:
        return DenoisePlan([], D, 0, name="sliding")

    placements = _spatial_lines(grid, spatial, half, check=True)
    split = len(placements)

    if cameras is None:
        cameras = ring_centers(grid.V)
    W, S, P = temporal
    topo = Topology(grid.temporal_topology)
    if W > grid.T:
        if topo is Topology.CIRCULAR:
            raise ConfigError(f"temporal window W={W} exceeds T={grid.T}")
        # short clip: shrink the window, compensation restores the budget
        W = grid.T
        S = min(S, W)
    else:
        _check_line(grid.T, topo, W, S, P)
    windows = _line_windows(grid.T, topo is Topology.CIRCULAR, W, S, P, half)
    for v in grid.target_views:
        ref = nearest_input_view(cameras, v, sorted(grid.input_views))
        ids = [SampleId(v, t) for t in range(grid.T)]

        def ctx(members, ref=ref):
            return tuple(SampleId(ref, m.time) for m in members)

        placements.extend(_to_placement(w, ids, P, Axis.TEMPORAL, v, ctx) for w in windows)
    return DenoisePlan(placements, D, split, name="sliding")


def plan_spatial_sliding(grid: SampleGrid, spatial, D: int | None = None) -> DenoisePlan:
    """Single-phase sliding sweeps over the view axis carrying the whole budget D."""
    D = grid.D if D is None else D
    W, S, P = WindowSpec(*spatial)
    if 2 * P * W != D * S:
        raise ConfigError(f"2*P*W/S = {2 * P * W / S:g} must equal D = {D}; valid (W,S,P): "
                          f"{_valid_tuples(len(grid.target_views), Topology(grid.spatial_topology), D)}")
    if not grid.target_views:
        return DenoisePlan([], D, name="sliding")
    return DenoisePlan(_spatial_lines(grid, WindowSpec(W, S, P), D, check=True), D,
                       name="sliding")


def _axis_lines(grid: SampleGrid, axis: Axis, cameras=None):
    """Yield (line index, member ids, context function) for every line of an axis."""
    if axis is Axis.SPATIAL:
        for t in range(grid.T):
            ctx = tuple(SampleId(v, t) for v in sorted(grid.input_views))
            yield t, [SampleId(v, t) for v in grid.target_views], (lambda m, ctx=ctx: ctx)
    else:
        cams = ring_centers(grid.V) if cameras is None else cameras
        for v in grid.target_views:
            ref = nearest_input_view(cams, v, sorted(grid.input_views))
            yield v, [SampleId(v, t) for t in range(grid.T)], \
                (lambda m, ref=ref: tuple(SampleId(ref, x.time) for x in m))


def plan_multigroup(grid: SampleGrid, axis: Axis = Axis.SPATIAL, group_size: int = 6,
                    cameras=None) -> DenoisePlan:
    """Disjoint consecutive groups, each denoised for all D steps in isolation."""
    if group_size < 1:
        raise ConfigError("group_size must be >= 1")
    axis = Axis(axis)
    placements = []
    for line, ids, ctx in _axis_lines(grid, axis, cameras):
        for g, i in enumerate(range(0, len(ids), group_size)):
            members = tuple(ids[i:i + group_size])
            placements.append(WindowPlacement(axis, line, members, (True,) * len(members),
                                              grid.D, ctx(members), "group", g))
    return DenoisePlan(placements, grid.D, name="multigroup")


def median_merge(stack: np.ndarray) -> np.ndarray:
    """Elementwise median over axis 0; an even count averages the two central values."""
    return np.median(stack, axis=0)


def plan_median(grid: SampleGrid, axis: Axis = Axis.SPATIAL, W: int = 6, overlap: int = 2,
                cameras=None) -> tuple[DenoisePlan, Callable]:
    """Overlapping windows at stride W - overlap, each fully denoised from the initial
    noise; samples covered more than once are merged with :func:`median_merge`."""
    axis = Axis(axis)
    if overlap == 0:
        return plan_multigroup(grid, axis, W, cameras), median_merge
    if not 0 < overlap < W:
        raise ConfigError(f"need 0 < overlap < W, got overlap={overlap}, W={W}")
    stride = W - overlap
    circular = Topology(grid.spatial_topology if axis is Axis.SPATIAL
                        else grid.temporal_topology) is Topology.CIRCULAR
    placements = []
    group = 0
    for line, ids, ctx in _axis_lines(grid, axis, cameras):
        L = len(ids)
        w = min(W, L)
        s = 0
        while True:
            st = s if circular else min(s, L - w)
            members = tuple(ids[p] for p in _window(st, w, L, circular))
            placements.append(WindowPlacement(axis, line, members, (True,) * w, grid.D,
                                              ctx(members), "window", group))
            group += 1
            if st + w >= L:
                break
            s += stride
    return DenoisePlan(placements, grid.D, mode="independent", merge="median",
                       name="median"), median_merge


def plan_gold(grid: SampleGrid) -> DenoisePlan:
    """One window holding every target, all inputs as context, run for D steps."""
    targets = tuple(grid.targets())
    if not targets:
        return DenoisePlan([], grid.D, name="gold")
    return DenoisePlan([WindowPlacement(Axis.SPATIAL, 0, targets, (True,) * len(targets),
                                        grid.D, tuple(grid.inputs()), "gold")],
                       grid.D, name="gold")


# --------------------------------------------------------------------------
# audit


@dataclass
class AuditReport:
    counts: np.ndarray  # (V, T) steps accrued by each sample
    phase_counts: list
    ok: bool
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "counts": self.counts.tolist(),
                "phase_counts": [c.tolist() for c in self.phase_counts],
                "failures": self.failures}


def _count(placements, V: int, T: int) -> np.ndarray:
    counts = np.zeros((V, T), dtype=np.int64)
    for p in placements:
        for m, s in zip(p.members, p.steppable):
            if s:
                counts[m] += p.steps
    return counts


def audit(plan: DenoisePlan, grid: SampleGrid) -> AuditReport:
    """Count steps per sample. Passes iff targets get exactly D (D/2 per phase when the
    plan has two phases) and inputs get none. Never raises on a bad plan."""
    V, T, D = grid.V, grid.T, plan.D
    target = grid.target_mask()
    failures = []

    if plan.mode == "independent":
        groups = sorted({p.group for p in plan.placements})
        per_group = [_count([p for p in plan.placements if p.group == g], V, T) for g in groups]
        counts = np.zeros((V, T), dtype=np.int64)
        covered = np.zeros((V, T), dtype=bool)
        for g, c in zip(groups, per_group):
            touched = np.zeros((V, T), dtype=bool)
            for p in plan.placements:
                if p.group == g:
                    for m in p.members:
                        touched[m] = True
            bad = touched & target & (c != D)
            for v, t in zip(*np.nonzero(bad)):
                failures.append({"sample": [int(v), int(t)], "group": int(g),
                                 "expected": D, "got": int(c[v, t])})
            counts = np.where(touched & target, c, counts)
            covered |= touched
        counts = np.where(target & ~covered, 0, counts)
        total = sum(per_group, np.zeros((V, T), dtype=np.int64))
        counts[~target] = total[~target]
        phase_counts = [counts]
    else:
        phase_counts = [_count(ph, V, T) for ph in plan.phases()]
        counts = sum(phase_counts) if phase_counts else np.zeros((V, T), dtype=np.int64)
        if plan.phase_split is not None:
            for i, pc in enumerate(phase_counts):
                bad = target & (pc != D // 2)
                for v, t in zip(*np.nonzero(bad)):
                    failures.append({"sample": [int(v), int(t)], "phase": i,
                                     "expected": D // 2, "got": int(pc[v, t])})

    bad = target & (counts != D)
    for v, t in zip(*np.nonzero(bad)):
        failures.append({"sample": [int(v), int(t)], "expected": D, "got": int(counts[v, t])})
    for v, t in zip(*np.nonzero(~target & (counts != 0))):
        failures.append({"sample": [int(v), int(t)], "role": "input", "expected": 0,
                         "got": int(counts[v, t])})
    return AuditReport(counts, phase_counts, not failures, failures)


# --------------------------------------------------------------------------
# execution


@dataclass
class DenoiseRequest:
    members: tuple
    latents: np.ndarray  # (n, d) current member latents
    sigmas: np.ndarray  # (n,) per-member noise level, may differ within a window
    steppable: np.ndarray  # (n,) bool
    context_ids: tuple
    context_latents: np.ndarray  # (m, d) clean
    conditional: bool
    conditioning: list | None = None  # per-member bundles, zeroed when unconditional


class Denoiser(Protocol):
    def __call__(self, request: DenoiseRequest) -> np.ndarray:
        """x0 predictions for the steppable members, shape (n_steppable, d)."""


@dataclass(frozen=True)
class GuidanceConfig:
    scale: float = 3.0
    # training-time condition dropout rate; informational at inference
    train_drop_prob: float = 0.1

    def __post_init__(self):
        if not self.scale >= 0:
            raise ConfigError(f"guidance scale must be >= 0, got {self.scale}")


def cfg_combine(x0_cond, x0_uncond, g: float):
    """Classifier-free guidance in x0 space. g = 1 and g = 0 return a branch verbatim."""
    if g == 1:
        return np.array(x0_cond, dtype=np.float64, copy=True)
    if g == 0:
        return np.array(x0_uncond, dtype=np.float64, copy=True)
    x0_uncond = np.asarray(x0_uncond, dtype=np.float64)
    return x0_uncond + g * (np.asarray(x0_cond, dtype=np.float64) - x0_uncond)


class StepRecord(NamedTuple):
    placement: int
    step: int  # update index within the placement
    member: SampleId
    k: int  # step index before the update
    x0_hat: np.ndarray


def _query(denoiser, request: DenoiseRequest, n_out: int, d: int) -> np.ndarray:
    out = np.asarray(denoiser(request), dtype=np.float64)
    if out.shape != (n_out, d):
        raise ContractViolation(f"denoiser returned shape {out.shape}, expected {(n_out, d)}")
    return out


def execute_placement(grid: SampleGrid, placement: WindowPlacement, denoiser,
                      guidance: GuidanceConfig | None = None, conditioning: Mapping | None = None,
                      trace: list | None = None, index: int = 0,
                      context_source: np.ndarray | None = None) -> None:
    """Run one placement in place on ``grid``.

    ``context_source`` lets a caller supply a private snapshot of the clean
    input latents; by default they are read from ``grid``.
    """
    sigmas = grid.schedule.sigmas
    D = grid.D
    members = placement.members
    step_idx = [i for i, s in enumerate(placement.steppable) if s]
    step_mask = np.array(placement.steppable, dtype=bool)
    src = grid.latents if context_source is None else context_source
    ctx_ids = tuple(placement.context_inputs)
    ctx_lat = np.array([src[c] for c in ctx_ids]).reshape(len(ctx_ids), grid.d)
    g = 1.0 if guidance is None else guidance.scale
    bundles = None if conditioning is None else [conditioning.get(m) for m in members]
    null_bundles = None if bundles is None else \
        [None if b is None else np.zeros_like(b) for b in bundles]

    for step in range(placement.steps):
        lat = np.array([grid.latents[m] for m in members])
        ks = np.array([grid.k[m] for m in members])
        for i in step_idx:
            if ks[i] >= D:
                raise ContractViolation(f"sample {tuple(members[i])} would step past k = D = {D}")
        sig = sigmas[ks]
        x0c = x0u = None
        if g != 0:
            x0c = _query(denoiser, DenoiseRequest(members, lat, sig, step_mask, ctx_ids, ctx_lat,
                                                  True, bundles), len(step_idx), grid.d)
        if g != 1:
            x0u = _query(denoiser, DenoiseRequest(members, lat, sig, step_mask, (),
                                                  np.zeros((0, grid.d)), False, null_bundles),
                         len(step_idx), grid.d)
        x0 = cfg_combine(x0c, x0u, g)
        for j, i in enumerate(step_idx):
            m = members[i]
            k = int(ks[i])
            if trace is not None:
                trace.append(StepRecord(index, step, m, k, x0[j].copy()))
            grid.latents[m] = sampler_step(lat[i], x0[j], sig[i], sigmas[k + 1])
            grid.k[m] = k + 1


def _merge_independent(base: SampleGrid, results: list, merge) -> SampleGrid:
    """``results`` is a list of (members, latents) per group in group order."""
    out = base.copy()
    per_sample: dict = {}
    for members, lat in results:
        for m, x in zip(members, lat):
            per_sample.setdefault(m, []).append(x)
    for m, xs in per_sample.items():
        out.latents[m] = merge(np.stack(xs))
        out.k[m] = base.D
    return out


def run_group(base: SampleGrid, placements, denoiser, guidance, conditioning, trace,
              offsets) -> tuple:
    work = base.copy()
    members = []
    for p, idx in zip(placements, offsets):
        execute_placement(work, p, denoiser, guidance, conditioning, trace, idx,
                          context_source=base.latents)
        members.extend(m for m in p.members if m not in members)
    return tuple(members), np.array([work.latents[m] for m in members])


def run_plan(grid: SampleGrid, plan: DenoisePlan, denoiser, guidance: GuidanceConfig | None = None,
             conditioning: Mapping | None = None, trace: list | None = None,
             merge: Callable | None = None) -> SampleGrid:
    """Execute a plan serially and return the denoised copy of ``grid``.

    ``guidance=None`` queries only the conditional branch.
    """
    if plan.D != grid.D:
        raise ContractViolation(f"plan D={plan.D} != grid D={grid.D}")
    if plan.mode == "independent":
        merge = merge or median_merge
        groups: dict = {}
        for i, p in enumerate(plan.placements):
            groups.setdefault(p.group, []).append(i)
        results = [run_group(grid, [plan.placements[i] for i in idx], denoiser, guidance,
                             conditioning, trace, idx) for _, idx in sorted(groups.items())]
        return _merge_independent(grid, results, merge)
    out = grid.copy()
    for i, p in enumerate(plan.placements):
        execute_placement(out, p, denoiser, guidance, conditioning, trace, i)
    return out


def line_key(p: WindowPlacement) -> tuple:
    return (p.axis.value, p.line)
