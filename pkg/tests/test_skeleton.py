import json

import numpy as np
import pytest

from slidegrid.camera import Camera, project
from slidegrid.errors import ConfigError
from slidegrid.skeleton import (COCO17, Bone, Skeleton2D, Skeleton3D, SkeletonTopology,
                                load_keypoints, project_skeleton, rasterize_skeleton, save_png,
                                triangulate_joint, triangulate_skeleton)

from conftest import random_rotation, ring_rig


def observe(cams, X, conf=1.0):
    out = []
    for c in cams:
        u, v, _ = project(c, X)
        out.append((c, u, v, conf))
    return out


def synthetic_people(rng, n=17):
    return rng.uniform([-0.4, -0.9, -0.3], [0.4, 0.9, 0.3], size=(n, 3))


def skel2d_views(cams, joints, conf=None):
    conf = np.ones(len(joints)) if conf is None else conf
    views = []
    for c in cams:
        uv = np.array([project(c, X)[:2] for X in joints])
        views.append(Skeleton2D(uv, conf.copy()))
    return views


class TestTriangulateJoint:
    def test_two_views_exact(self):
        X = np.array([0.1, -0.2, 1.3])
        res = triangulate_joint(observe(ring_rig(4)[:2], X))
        assert res.valid
        np.testing.assert_allclose(res.point, X, atol=1e-9)
        assert res.conf3d == 1.0

    def test_single_view_invalid(self):
        obs = observe(ring_rig(3), np.zeros(3))
        obs[1] = obs[1][:3] + (0.1,)
        obs[2] = obs[2][:3] + (0.0,)
        res = triangulate_joint(obs, 0.3)
        assert not res.valid and res.status == "low_confidence"

    def test_zero_conf_view_is_ignored(self):
        X = np.array([0.05, 0.4, -0.2])
        cams = ring_rig(3)
        two = triangulate_joint(observe(cams[:2], X))
        obs = observe(cams, X)
        # corrupt the third observation and zero its confidence
        obs[2] = (obs[2][0], obs[2][1] + 40.0, obs[2][2] - 13.0, 0.0)
        three = triangulate_joint(obs)
        assert three.point.tobytes() == two.point.tobytes()

    def test_parallel_rays_flagged_degenerate(self):
        # two cameras on the same optical axis see the same point at the image centre
        R = np.eye(3)
        a = Camera(100.0, 100.0, 0.0, 0.0, R, [0.0, 0.0, 0.0])
        b = Camera(100.0, 100.0, 0.0, 0.0, R, [0.0, 0.0, -1.0])
        res = triangulate_joint([(a, 0.0, 0.0, 1.0), (b, 0.0, 0.0, 1.0)])
        assert not res.valid and res.status == "degenerate"

    def test_confidence_is_mean_of_used(self):
        X = np.array([0.0, 0.1, 0.2])
        obs = [o[:3] + (c,) for o, c in zip(observe(ring_rig(3), X), (0.5, 0.9, 0.1))]
        assert triangulate_joint(obs, 0.3).conf3d == pytest.approx(0.7)

    def test_rigid_equivariance(self):
        rng = np.random.default_rng(5)
        cams = ring_rig(4)
        X = np.array([0.2, -0.3, 0.1])
        base = triangulate_joint(observe(cams, X)).point
        for _ in range(10):
            Q = random_rotation(rng)
            s = rng.uniform(-2, 2, 3)
            # world point moves as Q X + s, cameras follow: R' = R Q^T, t' = t - R' s
            moved = [Camera(c.fx, c.fy, c.cx, c.cy, c.R @ Q.T, c.t - (c.R @ Q.T) @ s,
                            c.width, c.height) for c in cams]
            obs = observe(cams, X)
            moved_obs = [(m,) + o[1:] for m, o in zip(moved, obs)]
            np.testing.assert_allclose(triangulate_joint(moved_obs).point, Q @ base + s,
                                       atol=1e-6)


class TestSkeleton:
    def test_all_valid_four_views(self):
        rng = np.random.default_rng(6)
        joints = synthetic_people(rng)
        cams = ring_rig(4)
        sk = triangulate_skeleton(skel2d_views(cams, joints), cams)
        assert sk.valid.all()
        np.testing.assert_allclose(sk.joints, joints, atol=1e-8)

    def test_low_conf_joint_isolated(self):
        rng = np.random.default_rng(7)
        joints = synthetic_people(rng)
        cams = ring_rig(4)
        views = skel2d_views(cams, joints)
        ref = triangulate_skeleton(views, cams)
        for v in views:
            v.conf[5] = 0.1
        sk = triangulate_skeleton(views, cams)
        assert not sk.valid[5] and np.all(np.isnan(sk.joints[5]))
        keep = np.arange(17) != 5
        assert sk.joints[keep].tobytes() == ref.joints[keep].tobytes()

    def test_empty_camera_list(self):
        sk = triangulate_skeleton([], [], topology=COCO17)
        assert sk.J == 17 and not sk.valid.any()

    def test_topology_mismatch(self):
        cams = ring_rig(2)
        with pytest.raises(ConfigError):
            triangulate_skeleton([Skeleton2D(np.zeros((17, 2)), np.ones(17)),
                                  Skeleton2D(np.zeros((5, 2)), np.ones(5))], cams)

    def test_projection_identity(self):
        cam = Camera(10.0, 10.0, 3.0, 4.0, np.eye(3), np.zeros(3))
        sk = Skeleton3D(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]), np.array([True, True]),
                        np.array([0.8, 0.9]))
        p = project_skeleton(cam, sk)
        np.testing.assert_array_equal(p.uv[0], [3.0, 4.0])
        assert p.conf[0] == 0.8 and p.conf[1] == 0.0

    def test_reprojection_roundtrip(self):
        rng = np.random.default_rng(8)
        joints = synthetic_people(rng)
        cams = ring_rig(4)
        views = skel2d_views(cams, joints)
        sk = triangulate_skeleton(views, cams)
        err = [np.linalg.norm(project_skeleton(c, sk).uv - v.uv, axis=1) for c, v in
               zip(cams, views)]
        assert np.mean(err) < 1e-6

    def test_json_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        cams = ring_rig(3)
        views = skel2d_views(cams, synthetic_people(rng))
        views[0].conf[2] = 0.0
        path = tmp_path / "kp.json"
        path.write_text(json.dumps([[v.to_list() for v in views]]))
        back = load_keypoints(path)[0]
        for a, b in zip(views, back):
            np.testing.assert_array_equal(a.uv, b.uv)
            np.testing.assert_array_equal(a.conf, b.conf)
        sk = triangulate_skeleton(views, cams)
        sk.valid[3] = False
        sk.joints[3] = np.nan
        again = Skeleton3D.from_dict(json.loads(json.dumps(sk.to_dict())))
        np.testing.assert_array_equal(again.valid, sk.valid)
        np.testing.assert_array_equal(again.joints[sk.valid], sk.joints[sk.valid])

    def test_topology_json(self, tmp_path):
        (tmp_path / "t.json").write_text(json.dumps(COCO17.to_dict()))
        assert SkeletonTopology.load(tmp_path / "t.json") == COCO17
        with pytest.raises(ConfigError):
            SkeletonTopology(("a", "b"), (Bone(0, 2, (1, 2, 3)),))

    def test_default_palette_distinct(self):
        colors = [b.color for b in COCO17.bones]
        assert len(set(colors)) == len(colors)


def naive_segment(p, q, thickness, H, W):
    """Per-pixel loop: coverage from distance between pixel centre and the segment."""
    out = np.zeros((H, W))
    for y in range(H):
        for x in range(W):
            c = np.array([x + 0.5, y + 0.5])
            d = q - p
            t = 0.0 if not d.any() else min(max(np.dot(c - p, d) / np.dot(d, d), 0.0), 1.0)
            dist = np.linalg.norm(c - (p + t * d))
            out[y, x] = min(max(thickness / 2 + 0.5 - dist, 0.0), 1.0)
    return out


TWO = SkeletonTopology(("a", "b"), (Bone(0, 1, (255, 0, 0)),), ((0, 0, 255), (0, 0, 255)))


class TestRasterize:
    def test_zero_confidence_is_transparent(self):
        sk = Skeleton2D(np.full((17, 2), 5.0), np.zeros(17))
        img = rasterize_skeleton(sk, COCO17, 16, 16)
        assert np.all(img == 0)

    def test_vertical_bone_fills_one_column(self):
        # pixel (2, 2) .. (2, 8), i.e. continuous centres at x = 2.5
        sk = Skeleton2D([[2.5, 2.5], [2.5, 8.5]], [1.0, 1.0])
        img = rasterize_skeleton(sk, TWO, 12, 6, thickness=1.0, joint_radius=0.0)
        alpha = img[..., 3]
        np.testing.assert_array_equal(np.nonzero(alpha.sum(axis=0))[0], [2])
        np.testing.assert_array_equal(np.nonzero(alpha[:, 2])[0], np.arange(2, 9))
        assert np.all(img[2:9, 2, :3] == [1.0, 0.0, 0.0])
        np.testing.assert_allclose(alpha, naive_segment(np.array([2.5, 2.5]),
                                                        np.array([2.5, 8.5]), 1.0, 12, 6),
                                   atol=1e-12)

    def test_diagonal_bone_matches_naive(self):
        p, q = np.array([1.2, 3.7]), np.array([13.9, 9.1])
        sk = Skeleton2D([p, q], [0.6, 0.9])
        img = rasterize_skeleton(sk, TWO, 14, 18, thickness=2.5, joint_radius=0.0)
        np.testing.assert_allclose(img[..., 3], 0.6 * naive_segment(p, q, 2.5, 14, 18),
                                   atol=1e-12)

    def test_invalid_endpoint_skips_bone(self):
        sk = Skeleton2D([[2.5, 2.5], [np.nan, np.nan]], [1.0, 0.0])
        img = rasterize_skeleton(sk, TWO, 12, 6, thickness=1.0, joint_radius=0.0)
        assert np.all(img == 0)

    def test_joints_drawn_over_bones(self):
        sk = Skeleton2D([[2.5, 2.5], [2.5, 8.5]], [1.0, 1.0])
        img = rasterize_skeleton(sk, TWO, 12, 6, thickness=1.0, joint_radius=0.5)
        np.testing.assert_array_equal(img[2, 2], [0, 0, 1, 1])
        np.testing.assert_array_equal(img[5, 2], [1, 0, 0, 1])

    def test_confidence_sets_alpha(self):
        sk = Skeleton2D([[2.5, 2.5], [2.5, 8.5]], [0.4, 0.7])
        img = rasterize_skeleton(sk, TWO, 12, 6, thickness=1.0, joint_radius=0.0)
        assert img[5, 2, 3] == pytest.approx(0.4)

    def test_off_image_is_clipped(self):
        sk = Skeleton2D([[-50.0, -50.0], [-40.0, -45.0]], [1.0, 1.0])
        assert np.all(rasterize_skeleton(sk, TWO, 8, 8) == 0)
        sk = Skeleton2D([[-5.0, 4.5], [20.0, 4.5]], [1.0, 1.0])
        img = rasterize_skeleton(sk, TWO, 8, 8, thickness=1.0, joint_radius=0.0)
        assert np.all(img[4, :, 3] == 1.0)

    def test_deterministic_png(self, tmp_path):
        rng = np.random.default_rng(10)
        cams = ring_rig(4, f=60.0, size=(64, 64))
        sk2 = skel2d_views(cams, synthetic_people(rng), rng.uniform(0.2, 1.0, 17))[1]
        for name in ("a.png", "b.png"):
            save_png(rasterize_skeleton(sk2, COCO17, 64, 64), tmp_path / name)
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
        from PIL import Image
        im = Image.open(tmp_path / "a.png")
        assert im.mode == "RGBA" and im.size == (64, 64)
