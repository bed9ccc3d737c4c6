import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scenepose.errors import EmptyCloud, InvalidRotation, ShapeMismatch, ValidationError
from scenepose.geometry import (
    EPS_EXTENT,
    Aabb,
    CameraModel,
    PointCloud,
    RigidPose,
    Rotation,
    aabb_of,
    backproject,
    backproject_pixels,
    canonical_transform,
    centroid,
    delta_translation,
    geodesic_distance,
    matrix_to_quat,
    quat_to_matrix,
    random_rotations,
    rot_x,
    rot_z,
    volume,
)

quats = arrays(np.float64, 4, elements=st.floats(-1, 1)).filter(lambda q: np.linalg.norm(q) > 0.1)
finite_points = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)), elements=st.floats(-10, 10))


class TestRotation:
    def test_identity_kept_exactly(self):
        assert np.array_equal(Rotation.identity().m, np.eye(3))

    def test_rejects_reflection(self):
        with pytest.raises(InvalidRotation):
            Rotation(np.diag([1.0, 1.0, -1.0]))

    def test_rejects_far_from_orthonormal(self):
        with pytest.raises(InvalidRotation):
            Rotation(np.eye(3) * 1.01)

    def test_snaps_small_drift(self):
        m = rot_z(0.3).m + 5e-5
        r = Rotation(m)
        assert np.allclose(r.m.T @ r.m, np.eye(3), atol=1e-12)
        assert np.linalg.det(r.m) == pytest.approx(1.0, abs=1e-12)

    def test_immutable(self):
        r = Rotation.identity()
        with pytest.raises(AttributeError):
            r.m = np.zeros((3, 3))
        with pytest.raises(ValueError):
            r.m[0, 0] = 2.0

    @given(quats)
    def test_quaternion_round_trip(self, q):
        m = quat_to_matrix(q)
        back = matrix_to_quat(m)
        assert back[0] >= 0
        assert np.allclose(quat_to_matrix(back), m, atol=1e-9)

    def test_inverse_and_compose(self):
        r = rot_x(0.7) @ rot_z(-1.1)
        assert np.allclose((r @ r.inv()).m, np.eye(3), atol=1e-12)


class TestGeodesic:
    def test_identity(self):
        assert geodesic_distance(Rotation.identity(), Rotation.identity()) == 0.0

    def test_half_turn(self):
        assert geodesic_distance(Rotation.identity(), rot_z(np.pi)) == pytest.approx(np.pi, abs=1e-7)

    def test_quarter_turn(self):
        assert geodesic_distance(Rotation.identity(), rot_x(np.pi / 2)) == pytest.approx(np.pi / 2, abs=1e-12)

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1))
    def test_triangle_inequality_and_symmetry(self, seed):
        a, b, c = (Rotation(m) for m in random_rotations(3, np.random.default_rng(seed)))
        ab, bc, ac = geodesic_distance(a, b), geodesic_distance(b, c), geodesic_distance(a, c)
        assert ac <= ab + bc + 1e-6
        assert ab == pytest.approx(geodesic_distance(b, a), abs=1e-12)
        assert 0 <= ab <= np.pi


class TestCentroidAndBoxes:
    def test_centroid_examples(self):
        assert np.array_equal(centroid([[0, 0, 0], [2, 0, 0]]), [1, 0, 0])
        assert np.array_equal(centroid([[0.3, -2, 5]]), [0.3, -2, 5])
        corners = np.array(np.meshgrid([0, 1], [0, 1], [0, 1])).reshape(3, -1).T
        assert np.allclose(centroid(corners), [0.5, 0.5, 0.5])

    def test_empty_cloud(self):
        with pytest.raises(EmptyCloud):
            centroid(np.zeros((0, 3)))
        with pytest.raises(EmptyCloud):
            aabb_of(np.zeros((0, 3)))

    def test_volume_examples(self):
        corners = np.array(np.meshgrid([0, 1], [0, 1], [0, 1])).reshape(3, -1).T
        assert volume(aabb_of(corners)) == 1.0
        flat = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        assert volume(aabb_of(flat)) == EPS_EXTENT
        assert volume(aabb_of([[0, 0, 0], [1, 2, 3]])) == 6.0

    def test_aabb_rejects_inverted(self):
        with pytest.raises(ValidationError):
            Aabb([1, 0, 0], [0, 1, 1])

    @given(finite_points, finite_points)
    def test_volume_permutation_and_monotone(self, a, b):
        v = volume(aabb_of(a))
        assert volume(aabb_of(a[::-1])) == v
        assert volume(aabb_of(np.concatenate([a, b]))) >= v


class TestPose:
    def test_translate_only(self):
        pose = RigidPose([1, 1, 1], Rotation.identity(), 2.0)
        assert np.allclose(canonical_transform([[1, 1, 1]], pose).points, [[0, 0, 0]])

    def test_rotation_maps_x_to_minus_y(self):
        pose = RigidPose(np.zeros(3), rot_z(np.pi / 2), 4.0)
        assert np.allclose(canonical_transform([[2, 0, 0]], pose).points, [[0, -1, 0]], atol=1e-12)

    def test_outside_box_discarded(self):
        pose = RigidPose(np.zeros(3), Rotation.identity(), 2.0)
        pc = PointCloud([[3, 0, 0], [0.5, 0, 0]], colours=[[1, 0, 0], [0, 1, 0]])
        out = canonical_transform(pc, pose)
        assert np.allclose(out.points, [[0.5, 0, 0]])
        assert np.allclose(out.colours, [[0, 1, 0]])

    def test_delta_translation_is_applied(self):
        pose = RigidPose([1, 0, 0], Rotation.identity(), 2.0, deltaT=[0.05, 0, 0])
        assert np.allclose(pose.to_canonical([[1.05, 0, 0]]), [[0, 0, 0]])

    def test_delta_translation_bound(self):
        with pytest.raises(ValidationError):
            RigidPose(np.zeros(3), deltaT=[0.2, 0, 0], t_max=0.1)
        assert np.all(np.abs(delta_translation([100.0, -100.0, 0.3], 0.1)) <= 0.1)

    def test_box_size_positive(self):
        with pytest.raises(ValidationError):
            RigidPose(np.zeros(3), s=0.0)

    @settings(max_examples=30)
    @given(finite_points, st.integers(0, 1000))
    def test_round_trip(self, pts, seed):
        R = Rotation(random_rotations(1, np.random.default_rng(seed))[0])
        c = centroid(pts)
        s = 2 * np.max(np.linalg.norm(pts - c, axis=1)) + 1.0
        pose = RigidPose(c, R, s)
        canon = canonical_transform(pts, pose)
        assert len(canon) == len(pts)
        assert np.allclose(pose.to_world(canon.points), pts, atol=1e-6)


class TestBackprojection:
    def cam(self, **kw):
        return CameraModel(fx=100.0, fy=100.0, cx=10.0, cy=8.0, width=21, height=17, **kw)

    def test_principal_point(self):
        cam = self.cam()
        depth = np.zeros((17, 21))
        depth[8, 10] = 1.0
        assert np.allclose(backproject(depth, None, cam).points, [[0, 0, 1]])

    def test_zero_depth_omitted(self):
        cam = self.cam()
        assert len(backproject(np.zeros((17, 21)), None, cam)) == 0

    def test_unit_tangent(self):
        cam = CameraModel(fx=5.0, fy=5.0, cx=2.0, cy=2.0, width=10, height=5)
        depth = np.zeros((5, 10))
        depth[2, 7] = 2.0
        assert np.allclose(backproject(depth, None, cam).points, [[2, 0, 2]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            backproject(np.ones((3, 3)), None, self.cam())
        with pytest.raises(ShapeMismatch):
            backproject(np.ones((17, 21)), np.ones((17, 20, 3)), self.cam())

    def test_colours_attached(self, rng):
        cam = self.cam()
        depth = rng.uniform(0.5, 2.0, (17, 21))
        depth[0, :] = 0
        rgb = rng.uniform(0, 1, (17, 21, 3))
        pc, pix = backproject_pixels(depth, rgb, cam)
        assert len(pc) == 17 * 21 - 21
        assert np.array_equal(pc.colours, rgb[pix[:, 0], pix[:, 1]])

    def test_reprojection_with_extrinsic(self, rng):
        cam = CameraModel.look_at([0.3, -0.8, 0.6], [0, 0, 0], 120.0, 110.0, 64, 48)
        depth = rng.uniform(0.5, 3.0, (48, 64))
        pc, pix = backproject_pixels(depth, None, cam)
        uv, d = cam.project(pc.points)
        assert np.abs(uv[:, 0] - pix[:, 1]).max() < 1e-4
        assert np.abs(uv[:, 1] - pix[:, 0]).max() < 1e-4
        assert np.allclose(d, depth[pix[:, 0], pix[:, 1]])

    def test_principal_point_inside_image(self):
        with pytest.raises(ValidationError):
            CameraModel(1.0, 1.0, 30.0, 2.0, 10, 10)
