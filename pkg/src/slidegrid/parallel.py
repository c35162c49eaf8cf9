"""Fork-join execution of a plan over grid lines.

Within a phase, each line (one timestamp's views in the spatial phase, one
view's frames in the temporal phase) owns a disjoint set of samples, so lines
can run concurrently. A barrier separates phases. The result is bitwise equal
to :func:`slidegrid.engine.run_plan` for any worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .engine import (DenoisePlan, GuidanceConfig, _merge_independent, execute_placement,
                     median_merge, run_group)
from .errors import ContractViolation, SlideGridError
from .grid import SampleGrid


class LineExecutionError(SlideGridError):
    def __init__(self, phase: int, line, cause: BaseException):
        super().__init__(f"phase {phase}, line {line} failed: {cause!r}")
        self.phase = phase
        self.line = line
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)


@dataclass
class LinePartition:
    phase: int
    assignments: dict  # worker -> list of line keys


@dataclass
class ExecutionTrace:
    workers: int
    line_seconds: dict = field(default_factory=dict)  # (phase, line) -> seconds
    writers: dict = field(default_factory=dict)  # (phase, view, time) -> set of workers

    def to_dict(self) -> dict:
        return {
            "workers": self.workers,
            "lines": [{"phase": p, "line": str(l), "seconds": s}
                      for (p, l), s in sorted(self.line_seconds.items(), key=str)],
            "writers": [{"phase": p, "sample": [v, t], "workers": sorted(w)}
                        for (p, v, t), w in sorted(self.writers.items())],
        }


def _line_of(plan: DenoisePlan, placement):
    if plan.mode == "independent":
        return placement.group
    return (placement.axis.value, placement.line)


def _phase_lines(plan: DenoisePlan) -> list[dict]:
    """Per phase: line key -> list of (plan index, placement), in plan order."""
    out = []
    offset = 0
    for ph in plan.phases():
        lines: dict = {}
        for i, p in enumerate(ph):
            lines.setdefault(_line_of(plan, p), []).append((offset + i, p))
        offset += len(ph)
        out.append(lines)
    return out


def partition_lines(plan: DenoisePlan, workers: int) -> list[LinePartition]:
    """Round-robin assignment of each phase's lines, by ascending line key."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    parts = []
    for i, lines in enumerate(_phase_lines(plan)):
        assign = {w: [] for w in range(workers)}
        for j, key in enumerate(sorted(lines)):
            assign[j % workers].append(key)
        parts.append(LinePartition(i, assign))
    return parts


def execute_parallel(grid: SampleGrid, plan: DenoisePlan, denoiser,
                     guidance: GuidanceConfig | None = None, workers: int = 1,
                     conditioning=None, trace: list | None = None,
                     exec_trace: ExecutionTrace | None = None, merge=None,
                     barrier: bool = True) -> SampleGrid:
    """Run ``plan`` with ``workers`` threads. ``barrier=False`` is a test hook that
    drops the phase barrier (later phases are scheduled first); never use it otherwise."""
    if plan.D != grid.D:
        raise ContractViolation(f"plan D={plan.D} != grid D={grid.D}")
    phase_lines = _phase_lines(plan)
    parts = partition_lines(plan, workers)
    exec_trace = exec_trace if exec_trace is not None else ExecutionTrace(workers)
    local_traces: dict = {}

    if plan.mode == "independent":
        lines = phase_lines[0]

        def run_groups(w, keys):
            out = {}
            for key in keys:
                items = lines[key]
                t0 = time.perf_counter()
                buf = [] if trace is not None else None
                try:
                    out[key] = run_group(grid, [p for _, p in items], denoiser, guidance,
                                         conditioning, buf, [i for i, _ in items])
                except Exception as e:
                    raise LineExecutionError(0, key, e) from e
                exec_trace.line_seconds[(0, key)] = time.perf_counter() - t0
                local_traces[(0, key)] = buf
                for m in out[key][0]:
                    exec_trace.writers.setdefault((0, m.view, m.time), set()).add(w)
            return out

        results: dict = {}
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_groups, w, keys) for w, keys in parts[0].assignments.items()]
            for f in futs:
                results.update(f.result())
        _collect(trace, local_traces)
        return _merge_independent(grid, [results[k] for k in sorted(results)],
                                  merge or median_merge)

    work = grid.copy()

    def run_lines(phase, w, keys, snapshot):
        for key in keys:
            t0 = time.perf_counter()
            buf = [] if trace is not None else None
            try:
                for idx, p in phase_lines[phase][key]:
                    execute_placement(work, p, denoiser, guidance, conditioning, buf, idx,
                                      context_source=snapshot)
                    for m in p.stepped:
                        exec_trace.writers.setdefault((phase, m.view, m.time), set()).add(w)
            except Exception as e:
                raise LineExecutionError(phase, key, e) from e
            exec_trace.line_seconds[(phase, key)] = time.perf_counter() - t0
            local_traces[(phase, key)] = buf

    if barrier:
        for part in parts:
            # inputs are never written, so one read-only snapshot per phase suffices
            snapshot = work.latents.copy()
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(run_lines, part.phase, w, keys, snapshot)
                        for w, keys in part.assignments.items() if keys]
                for f in futs:
                    f.result()
    else:
        snapshot = work.latents.copy()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_lines, part.phase, w, keys, snapshot)
                    for part in reversed(parts) for w, keys in part.assignments.items() if keys]
            for f in futs:
                f.result()
    _collect(trace, local_traces)
    return work


def _collect(trace, local_traces):
    if trace is None:
        return
    records = [r for buf in local_traces.values() if buf for r in buf]
    # stable sort restores serial order; member order within a step is already serial
    records.sort(key=lambda r: (r.placement, r.step))
    trace.extend(records)
