"""Gaussian Markov random field over the sample grid with exact windowed posteriors.

Each latent channel is an independent draw from N(mu, inv(Lam)) over the V*T
sites, with ``Lam = alpha * I + beta * Lap`` and ``Lap`` the Laplacian of the
grid graph (circular over views, linear over time). Because everything is
Gaussian, ``E[x0 | noisy window, clean context]`` is available in closed form,
which makes the posterior a drop-in stand-in for a trained denoiser.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .engine import DenoiseRequest, GuidanceConfig, plan_gold, run_plan
from .errors import ConfigError, NumericalError
from .grid import SampleGrid

MAX_SITES = 256
N_HARMONICS = 3


def grid_laplacian(V: int, T: int) -> np.ndarray:
    """Laplacian of the view-circular x time-linear lattice; site index is v * T + t."""
    n = V * T
    A = np.zeros((n, n))

    def link(i, j):
        if i != j:
            A[i, j] = A[j, i] = 1.0

    for v in range(V):
        for t in range(T):
            i = v * T + t
            if V > 1:
                link(i, ((v + 1) % V) * T + t)
            if t + 1 < T:
                link(i, i + 1)
    return np.diag(A.sum(axis=1)) - A


@dataclass(frozen=True)
class ToyScene:
    V: int
    T: int
    d: int
    alpha: float
    beta: float
    seed: int
    mean: np.ndarray  # (V, T, d)
    precision: np.ndarray  # (n, n)
    ground_truth: np.ndarray  # (V, T, d)

    @property
    def n(self) -> int:
        return self.V * self.T

    def site(self, sid) -> int:
        return int(sid[0]) * self.T + int(sid[1])

    @property
    def covariance(self) -> np.ndarray:
        return linalg.cho_solve(linalg.cho_factor(self.precision, lower=True), np.eye(self.n))

    def to_dict(self) -> dict:
        return {"V": self.V, "T": self.T, "d": self.d, "alpha": self.alpha, "beta": self.beta,
                "seed": self.seed}


def mean_field(V: int, T: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth prior mean: a few low Fourier harmonics in view angle and in time."""
    theta = 2 * np.pi * np.arange(V) / V
    tau = np.arange(T) / max(T - 1, 1)
    mu = np.zeros((V, T, d))
    for h in range(N_HARMONICS):
        a_cos, a_sin, b_cos = rng.standard_normal((3, d)) / (h + 1)
        mu += (np.cos(h * theta)[:, None, None] * a_cos
               + np.sin(h * theta)[:, None, None] * a_sin)
        mu += np.cos(np.pi * h * tau)[None, :, None] * b_cos
    return mu


def gen_scene(V: int, T: int, d: int, alpha: float = 1.0, beta: float = 5.0,
              seed: int = 0) -> ToyScene:
    if not alpha > 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    if not beta >= 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    if V * T > MAX_SITES:
        raise ConfigError(f"V*T = {V * T} exceeds the {MAX_SITES}-site limit")
    rng = np.random.default_rng(seed)
    mu = mean_field(V, T, d, rng)
    lam = alpha * np.eye(V * T) + beta * grid_laplacian(V, T)
    try:
        chol = np.linalg.cholesky(lam)
    except np.linalg.LinAlgError as e:
        raise NumericalError("scene precision is not positive definite") from e
    z = rng.standard_normal((V * T, d))
    # x = mu + L^-T z has covariance (L L^T)^-1
    x = linalg.solve_triangular(chol.T, z, lower=False)
    gt = mu + x.reshape(V, T, d)
    for arr in (mu, lam, gt):
        arr.setflags(write=False)
    return ToyScene(V, T, d, float(alpha), float(beta), int(seed), mu, lam, gt)


def windowed_posterior(scene: ToyScene, member_ids, member_latents, member_sigmas,
                       context_ids=(), context_latents=None, conditional: bool = True) -> np.ndarray:
    """E[x0 | observations] for every window member, shape (n_members, d).

    Members are noisy observations ``y = x0 + sigma * e`` (exact when sigma = 0);
    context samples are exact observations in conditional mode and ignored
    otherwise. Every other site is marginalized under the prior.
    """
    member_latents = np.asarray(member_latents, dtype=np.float64).reshape(len(member_ids), -1)
    member_sigmas = np.asarray(member_sigmas, dtype=np.float64).reshape(-1)
    if np.any(member_sigmas < 0):
        raise ConfigError("member sigmas must be non-negative")
    msites = [scene.site(m) for m in member_ids]
    if len(set(msites)) != len(msites):
        raise ConfigError("window members must be distinct")

    exact = {}
    if conditional and len(context_ids):
        ctx = np.asarray(context_latents, dtype=np.float64).reshape(len(context_ids), -1)
        for c, x in zip(context_ids, ctx):
            exact[scene.site(c)] = x
    noisy = []
    for i, (s, sig) in enumerate(zip(msites, member_sigmas)):
        if sig == 0.0:
            exact[s] = member_latents[i]
        else:
            noisy.append(i)

    out = member_latents.copy()
    if not noisy:
        return out

    mu = scene.mean.reshape(scene.n, scene.d)
    lam = scene.precision
    C = sorted(exact)
    R = [s for s in range(scene.n) if s not in exact]
    pos = {s: i for i, s in enumerate(R)}
    A = [pos[msites[i]] for i in noisy]
    try:
        f = linalg.cho_factor(lam[np.ix_(R, R)], lower=True)
        m_R = mu[R]
        if C:
            xc = np.stack([exact[c] for c in C])
            # Schur complement: mean of x_R given x_C
            m_R = m_R - linalg.cho_solve(f, lam[np.ix_(R, C)] @ (xc - mu[C]))
        E = np.zeros((len(R), len(A)))
        E[A, np.arange(len(A))] = 1.0
        S_AA = linalg.cho_solve(f, E)[A]
        y = member_latents[noisy]
        m_A = m_R[A]
        g = linalg.cho_factor(S_AA + np.diag(member_sigmas[noisy] ** 2), lower=True)
        out[noisy] = m_A + S_AA @ linalg.cho_solve(g, y - m_A)
    except (np.linalg.LinAlgError, linalg.LinAlgError) as e:
        raise NumericalError(f"singular conditioning system: {e}") from e
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite posterior mean")
    return out


class GaussianPosteriorDenoiser:
    """Exact denoiser for a :class:`ToyScene`; the request's ``conditional`` flag
    selects whether context samples are seen."""

    def __init__(self, scene: ToyScene):
        self.scene = scene

    def __call__(self, request: DenoiseRequest) -> np.ndarray:
        x0 = windowed_posterior(self.scene, request.members, request.latents, request.sigmas,
                                request.context_ids, request.context_latents,
                                request.conditional)
        return x0[np.asarray(request.steppable, dtype=bool)]


def gold_run(scene: ToyScene, grid: SampleGrid, D: int | None = None,
             guidance: GuidanceConfig | None = None, executor=None) -> SampleGrid:
    """Denoise every target jointly in one window (inputs as context) for all D steps."""
    if (grid.V, grid.T, grid.d) != (scene.V, scene.T, scene.d):
        raise ConfigError("grid and scene dimensions differ")
    if D is not None and D != grid.D:
        raise ConfigError(f"D={D} does not match the grid schedule (D={grid.D})")
    plan = plan_gold(grid)
    den = GaussianPosteriorDenoiser(scene)
    if executor is not None:
        return executor(grid, plan, den, guidance)
    return run_plan(grid, plan, den, guidance)
