"""Sliding iterative denoising over a view x time grid of latents, with a
Gaussian toy world that makes every scheduling strategy checkable against an
exact oracle."""

from .camera import Camera, pixel_ray, plucker_embed, project
from .engine import (Axis, DenoisePlan, DenoiseRequest, GuidanceConfig, WindowPlacement,
                     WindowSpec, audit, cfg_combine, nearest_input_view, plan_alternating,
                     plan_gold, plan_line_sweeps, plan_median, plan_multigroup,
                     plan_spatial_sliding, run_plan)
from .errors import ConfigError, ContractViolation, NumericalError, SchedulingError
from .grid import (ChannelLayout, NoiseSchedule, SampleGrid, SampleId, Topology,
                   assemble_channels, build_schedule, init_grid, sampler_step)
from .parallel import execute_parallel, partition_lines
from .skeleton import (COCO17, Skeleton2D, Skeleton3D, SkeletonTopology, project_skeleton,
                       rasterize_skeleton, triangulate_joint, triangulate_skeleton)
from .toy import GaussianPosteriorDenoiser, ToyScene, gen_scene, gold_run, windowed_posterior

__all__ = [
    "assemble_channels",
    "audit",
    "Axis",
    "build_schedule",
    "Camera",
    "cfg_combine",
    "ChannelLayout",
    "COCO17",
    "ConfigError",
    "ContractViolation",
    "DenoisePlan",
    "DenoiseRequest",
    "execute_parallel",
    "GaussianPosteriorDenoiser",
    "gen_scene",
    "gold_run",
    "GuidanceConfig",
    "init_grid",
    "nearest_input_view",
    "NoiseSchedule",
    "NumericalError",
    "partition_lines",
    "pixel_ray",
    "plan_alternating",
    "plan_gold",
    "plan_line_sweeps",
    "plan_median",
    "plan_multigroup",
    "plan_spatial_sliding",
    "plucker_embed",
    "project",
    "project_skeleton",
    "rasterize_skeleton",
    "run_plan",
    "SampleGrid",
    "SampleId",
    "sampler_step",
    "SchedulingError",
    "Skeleton2D",
    "Skeleton3D",
    "SkeletonTopology",
    "Topology",
    "ToyScene",
    "triangulate_joint",
    "triangulate_skeleton",
    "windowed_posterior",
    "WindowPlacement",
    "WindowSpec",
]

__version__ = "0.1.0"
