"""Metrics, mask voting and the toy-world strategy ablation."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
from scipy import stats

from .engine import (Axis, GuidanceConfig, audit, plan_alternating, plan_gold, plan_median,
                     plan_multigroup, plan_spatial_sliding)
from .errors import ConfigError, ShapeError
from .grid import build_schedule, init_grid
from .parallel import execute_parallel
from .toy import MAX_SITES, GaussianPosteriorDenoiser, gen_scene

STRATEGIES = ("gold", "sliding", "multigroup", "median")

CSV_HEADER = ("seed", "strategy", "mse_to_gold", "mse_to_ground_truth", "psnr_db",
              "psnr_infinite", "temporal_jitter", "overlap_variance", "reprediction_variance")


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give ``math.inf``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not peak > 0:
        raise ConfigError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def vote_masks(m1, m2, m3) -> np.ndarray:
    """Pixel-wise majority (at least two of three) of binary masks."""
    masks = [np.asarray(m) for m in (m1, m2, m3)]
    if not masks[0].shape == masks[1].shape == masks[2].shape:
        raise ShapeError(f"mask shapes differ: {[m.shape for m in masks]}")
    for m in masks:
        if not np.all((m == 0) | (m == 1)):
            raise ConfigError("masks must be binary (0/1)")
    votes = sum(m.astype(np.uint8) for m in masks)
    return (votes >= 2).astype(np.uint8)


def temporal_jitter(latents: np.ndarray, target_mask: np.ndarray) -> float:
    """Mean squared difference between consecutive frames, over target views.

    Zero when there is a single frame.
    """
    if latents.shape[1] < 2:
        return 0.0
    rows = [v for v in range(latents.shape[0]) if target_mask[v].all()]
    if not rows:
        return 0.0
    diff = np.diff(latents[rows], axis=1)
    return float(np.mean(diff ** 2))


# --------------------------------------------------------------------------
# configuration

_wsp = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "slidegrid ablation config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "V": {"type": "integer", "minimum": 1},
        "T": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "beta": {"type": "number", "minimum": 0},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "num_inputs": {"type": "integer", "minimum": 1},
        "input_views": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0}},
        "D": {"type": "integer", "minimum": 2},
        "sigma_max": {"type": "number", "exclusiveMinimum": 0},
        "sigma_min": {"type": "number", "exclusiveMinimum": 0},
        "spatial": _wsp,
        "temporal": _wsp,
        "group_size": {"type": "integer", "minimum": 1},
        "median_window": {"type": "integer", "minimum": 2},
        "median_overlap": {"type": "integer", "minimum": 0},
        "guidance_scale": {"type": "number", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "psnr_peak": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "record_timing": {"type": "boolean"},
    },
}


@dataclass
class ExperimentConfig:
    V: int = 12
    T: int = 1
    d: int = 4
    alpha: float = 1.0
    beta: float = 5.0
    seeds: list = field(default_factory=lambda: list(range(50)))
    num_inputs: int = 4
    input_views: list | None = None  # None: evenly spaced
    D: int = 24
    sigma_max: float = 10.0
    sigma_min: float = 0.01
    spatial: list = field(default_factory=lambda: [6, 2, 2])
    temporal: list = field(default_factory=lambda: [4, 2, 3])
    group_size: int = 6
    median_window: int = 6
    median_overlap: int = 2
    guidance_scale: float = 3.0
    workers: int = 1
    output_dir: str = "ablation_out"
    psnr_peak: float | None = None  # None: peak-to-peak range of the ground truth
    record_timing: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ConfigError(f"config: {e.message}") from e
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **overrides) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig.from_dict(d)

    @property
    def inputs(self) -> list[int]:
        if self.input_views is not None:
            return sorted(set(self.input_views))
        M = self.num_inputs
        return sorted({int(round(i * self.V / M)) % self.V for i in range(M)})

    def sliding_plan(self, grid):
        if self.T == 1:
            # no time axis to alternate into: the view sweep carries the whole budget
            W, S, P = self.spatial
            return plan_spatial_sliding(grid, (W, S, 2 * P))
        return plan_alternating(grid, self.spatial, self.temporal)

    def validate(self) -> "ExperimentConfig":
        """Check every module precondition, including plan audits, without running anything."""
        try:
            jsonschema.validate(self.to_dict(), CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ConfigError(f"config: {e.message}") from e
        if self.V * self.T > MAX_SITES:
            raise ConfigError(f"V*T = {self.V * self.T} exceeds {MAX_SITES}")
        inputs = self.inputs
        if not inputs or max(inputs) >= self.V:
            raise ConfigError(f"input views {inputs} invalid for V={self.V}")
        if len(inputs) >= self.V:
            raise ConfigError("no target views left")
        sched = build_schedule(self.D, self.sigma_max, self.sigma_min)
        grid = init_grid(self.V, self.T, inputs, 1, 0, sched)
        plans = {"gold": plan_gold(grid), "sliding": self.sliding_plan(grid),
                 "multigroup": plan_multigroup(grid, Axis.SPATIAL, self.group_size),
                 "median": plan_median(grid, Axis.SPATIAL, self.median_window,
                                       self.median_overlap)[0]}
        for name, plan in plans.items():
            rep = audit(plan, grid)
            if not rep.ok:
                raise ConfigError(f"{name} plan fails its step audit: {rep.failures[:3]}")
        GuidanceConfig(self.guidance_scale)
        return self


# --------------------------------------------------------------------------
# ablation


@dataclass
class MetricsRecord:
    seed: int
    strategy: str
    mse_to_gold: float
    mse_to_ground_truth: float
    psnr_db: float
    temporal_jitter: float
    overlap_variance: float = 0.0
    reprediction_variance: float = 0.0
    wall_time: float = 0.0

    def csv_row(self) -> list:
        inf = math.isinf(self.psnr_db)
        return [self.seed, self.strategy, repr(self.mse_to_gold), repr(self.mse_to_ground_truth),
                "" if inf else repr(self.psnr_db), int(inf), repr(self.temporal_jitter),
                repr(self.overlap_variance), repr(self.reprediction_variance)]

    @classmethod
    def from_csv_row(cls, row: dict) -> "MetricsRecord":
        return cls(int(row["seed"]), row["strategy"], float(row["mse_to_gold"]),
                   float(row["mse_to_ground_truth"]),
                   math.inf if int(row["psnr_infinite"]) else float(row["psnr_db"]),
                   float(row["temporal_jitter"]), float(row["overlap_variance"]),
                   float(row["reprediction_variance"]))


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[MetricsRecord]:
    return [MetricsRecord.from_csv_row(row) for row in csv.DictReader(io.StringIO(text))]


def _reprediction_variance(plan, trace, grid) -> float:
    """Spread of a sample's x0 predictions over the windows of its final sweep."""
    last_phase_start = plan.phase_split or 0
    final = {}
    for r in trace:
        p = plan.placements[r.placement]
        if r.placement < last_phase_start or p.sweep not in ("reverse", "compensation"):
            continue
        final[(r.placement, r.member)] = r.x0_hat  # last step of the placement wins
    per_sample: dict = {}
    for (_, m), x in sorted(final.items()):
        per_sample.setdefault(m, []).append(x)
    vals = [np.var(np.stack(xs), axis=0).mean() for _, xs in sorted(per_sample.items())
            if len(xs) > 1]
    return float(np.mean(vals)) if vals else 0.0


@dataclass
class AblationResult:
    records: list
    summary: dict
    files: dict = field(default_factory=dict)


@contextmanager
def _stage(name):
    """Prefix any escaping error with the stage that raised it."""
    try:
        yield
    except Exception as e:
        if not hasattr(e, "stage"):
            e.stage = name
            e.args = (f"[{name}] {e.args[0] if e.args else e}",) + tuple(e.args[1:])
        raise


def run_seed(config: ExperimentConfig, seed: int) -> list[MetricsRecord]:
    sched = build_schedule(config.D, config.sigma_max, config.sigma_min)
    with _stage(f"scene seed={seed}"):
        scene = gen_scene(config.V, config.T, config.d, config.alpha, config.beta, seed)
        grid = init_grid(config.V, config.T, config.inputs, config.d, seed, sched,
                         scene.ground_truth)
    den = GaussianPosteriorDenoiser(scene)
    guidance = GuidanceConfig(config.guidance_scale)
    tmask = grid.target_mask()
    gt = scene.ground_truth
    peak = config.psnr_peak or float(np.ptp(gt)) or 1.0
    workers = config.workers

    outputs = {}
    extras = {s: {} for s in STRATEGIES}
    timing = {}
    for name in STRATEGIES:
        t0 = time.perf_counter()
        with _stage(f"{name} seed={seed}"):
            if name == "gold":
                out = execute_parallel(grid, plan_gold(grid), den, guidance, workers)
            elif name == "sliding":
                plan = config.sliding_plan(grid)
                trace = []
                out = execute_parallel(grid, plan, den, guidance, workers, trace=trace)
                extras[name]["reprediction_variance"] = _reprediction_variance(plan, trace, grid)
            elif name == "multigroup":
                out = execute_parallel(grid, plan_multigroup(grid, Axis.SPATIAL,
                                                             config.group_size),
                                       den, guidance, workers)
            else:
                plan, merge = plan_median(grid, Axis.SPATIAL, config.median_window,
                                          config.median_overlap)
                spreads = []

                def recording_merge(stack, merge=merge):
                    if len(stack) > 1:
                        spreads.append(float(np.var(stack, axis=0).mean()))
                    return merge(stack)

                out = execute_parallel(grid, plan, den, guidance, workers, merge=recording_merge)
                extras[name]["overlap_variance"] = float(np.mean(spreads)) if spreads else 0.0
        timing[name] = time.perf_counter() - t0
        outputs[name] = out

    gold = outputs["gold"].latents[tmask]
    records = []
    for name in STRATEGIES:
        lat = outputs[name].latents
        records.append(MetricsRecord(
            seed, name,
            float(np.mean((lat[tmask] - gold) ** 2)),
            float(np.mean((lat[tmask] - gt[tmask]) ** 2)),
            psnr(lat[tmask], gt[tmask], peak),
            temporal_jitter(lat, tmask),
            extras[name].get("overlap_variance", 0.0),
            extras[name].get("reprediction_variance", 0.0),
            timing[name]))
    return records


def sign_test(a, b) -> dict:
    """Two-sided sign test of a < b over paired samples; ties are dropped."""
    a, b = np.asarray(a), np.asarray(b)
    wins = int(np.sum(a < b))
    losses = int(np.sum(a > b))
    n = wins + losses
    p = float(stats.binomtest(wins, n, 0.5).pvalue) if n else 1.0
    return {"wins": wins, "losses": losses, "ties": int(len(a) - n), "p_value": p}


def summarize(records, config: ExperimentConfig) -> dict:
    by = {s: [r for r in records if r.strategy == s] for s in STRATEGIES}
    metrics = ("mse_to_gold", "mse_to_ground_truth", "psnr_db", "temporal_jitter",
               "overlap_variance", "reprediction_variance")
    agg = {}
    for s, rs in by.items():
        agg[s] = {}
        for m in metrics:
            vals = np.array([getattr(r, m) for r in rs], dtype=np.float64)
            finite = vals[np.isfinite(vals)]
            agg[s][m] = {"mean": float(finite.mean()) if len(finite) else None,
                         "std": float(finite.std()) if len(finite) else None,
                         "n_infinite": int(len(vals) - len(finite))}
    sl = [r.mse_to_gold for r in by["sliding"]]
    ordering = {
        "sliding_vs_multigroup": sign_test(sl, [r.mse_to_gold for r in by["multigroup"]]),
        "sliding_vs_median": sign_test(sl, [r.mse_to_gold for r in by["median"]]),
    }
    ordering["sliding_below_multigroup"] = bool(
        agg["sliding"]["mse_to_gold"]["mean"] < agg["multigroup"]["mse_to_gold"]["mean"])
    cfg = config.to_dict()
    # outputs must not depend on how the run was executed
    for k in ("workers", "output_dir", "record_timing"):
        cfg.pop(k)
    return {"config": cfg, "input_views": config.inputs, "strategies": agg,
            "ordering": ordering}


def plot_mse(summary: dict, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(STRATEGIES[1:])
    means = [summary["strategies"][s]["mse_to_gold"]["mean"] for s in names]
    stds = [summary["strategies"][s]["mse_to_gold"]["std"] for s in names]
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.bar(names, means, yerr=stds, capsize=4, color=["tab:green", "tab:red", "tab:orange"])
    ax.set_ylabel("MSE to gold run")
    ax.set_title("Toy-world denoising strategies")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def run_ablation(config: ExperimentConfig, write: bool = True) -> AblationResult:
    config.validate()
    records = []
    for seed in config.seeds:
        records.extend(run_seed(config, seed))
    summary = summarize(records, config)
    result = AblationResult(records, summary)
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {"csv": out / "metrics.csv", "json": out / "summary.json",
                 "plot": out / "mse_to_gold.png"}
        files["csv"].write_text(records_to_csv(records))
        files["json"].write_text(json.dumps(summary, indent=2, sort_keys=True))
        plot_mse(summary, files["plot"])
        if config.record_timing:
            files["timing"] = out / "timing.json"
            files["timing"].write_text(json.dumps(
                [{"seed": r.seed, "strategy": r.strategy, "wall_time": r.wall_time}
                 for r in records], indent=2))
        result.files = files
    return result
