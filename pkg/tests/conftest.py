import numpy as np
import pytest

from slidegrid.camera import Camera
from slidegrid.grid import build_schedule, init_grid
from slidegrid.toy import GaussianPosteriorDenoiser, gen_scene


def ring_rig(n, radius=3.0, height=0.3, f=500.0, size=(640, 480), phase=0.0):
    """Cameras on a horizontal circle around the origin, all looking at it."""
    W, H = size
    cams = []
    for i in range(n):
        a = phase + 2 * np.pi * i / n
        eye = (radius * np.cos(a), height, radius * np.sin(a))
        cams.append(Camera.look_at(eye, (0.0, 0.0, 0.0), fx=f, cx=W / 2, cy=H / 2,
                                   width=W, height=H))
    return cams


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def local_denoiser(request):
    """Each member's prediction depends only on its own latent, sigma and branch."""
    scale = 1.0 if request.conditional else 0.8
    x = request.latents[request.steppable]
    s = request.sigmas[request.steppable][:, None]
    return scale * np.tanh(x) / (1.0 + s ** 2) + 0.1 * s


@pytest.fixture
def schedule24():
    return build_schedule(24, 10.0, 0.01)


@pytest.fixture
def toy12(schedule24):
    scene = gen_scene(12, 1, 3, 1.0, 5.0, seed=7)
    grid = init_grid(12, 1, [0, 3, 6, 9], 3, 7, schedule24, scene.ground_truth)
    return scene, grid, GaussianPosteriorDenoiser(scene)
