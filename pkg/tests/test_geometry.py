import math

import numpy as np
import pytest
from scipy.optimize import linprog

from scenediff import geometry as geo


def brute_force_inside(hull, p, tol=geo.CONTAIN_TOL):
    """Naive half-space oracle: loop over every facet plane."""
    for n, b in zip(hull.normals, hull.offsets):
        if float(np.dot(n, p)) + b >= -tol:
            return False
    return True


def linprog_inside(points, p):
    """Independent oracle: p is in conv(points) iff a convex combination exists."""
    n = len(points)
    a_eq = np.vstack([points.T, np.ones(n)])
    b_eq = np.append(p, 1.0)
    res = linprog(np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * n,
                  method="highs")
    return res.status == 0


# ------------------------------------------------------------- sampling

def test_unit_cube_sample_mean_near_origin():
    cube = geo.Box([1.0, 1.0, 1.0])
    pts = geo.sample_interior(cube, 10000, seed=0)
    assert np.abs(pts.mean(axis=0)).max() < 0.02


def test_single_sample_is_contained():
    for solid in (geo.Box([0.4, 0.6, 0.2]),
                  geo.Cylinder(0.3, 0.5),
                  geo.Capsule(0.2, 0.4),
                  geo.ExtrudedPolygon([[0, 0], [1, 0], [1, 1], [0, 1]], 0.3)):
        p = geo.sample_interior(solid, 1, seed=5)
        assert solid.contains(p).all()


def test_sampling_deterministic_in_seed():
    solid = geo.Cylinder(0.5, 1.0, geo.Pose([1.0, -2.0, 0.5], yaw=0.7))
    a = geo.sample_interior(solid, 500, seed=123)
    b = geo.sample_interior(solid, 500, seed=123)
    assert np.array_equal(a, b)


def test_degenerate_solid_rejected():
    with pytest.raises(geo.GeometryError):
        geo.sample_interior(geo.Box([1.0, 0.0, 1.0]), 10, seed=0)


def test_all_samples_inside_hull_of_solid():
    solid = geo.Box([0.8, 0.5, 0.3], geo.Pose([0.2, 0.1, 0.4], yaw=0.3))
    pts = geo.sample_interior(solid, 400, seed=2)
    corners = geo.sample_interior(solid, 4000, seed=3)
    hull, _, _ = geo.hull_and_centroid(corners)
    # interior samples of the same solid sit inside the hull of a dense sample
    inside = geo.contains_many(hull, pts, tol=1e-9)
    assert inside.mean() > 0.97  # hull of finite sample slightly shrinks the solid


def test_compound_solid_union_sampling():
    twin = geo.CompoundSolid([
        geo.Box([0.2, 0.2, 0.2], geo.Pose([-0.5, 0, 0])),
        geo.Box([0.2, 0.2, 0.2], geo.Pose([0.5, 0, 0])),
    ])
    pts = geo.sample_interior(twin, 1000, seed=1)
    assert twin.contains(pts).all()
    left = pts[:, 0] < 0
    assert 0.4 < left.mean() < 0.6


def test_solid_round_trip_dict():
    solid = geo.CompoundSolid(
        [geo.Capsule(0.1, 0.5, geo.Pose([0, 0, 0.6])), geo.Box([0.3, 0.2, 0.1])],
        geo.Pose([1, 2, 0], yaw=1.1))
    again = geo.solid_from_dict(solid.to_dict())
    pts = np.random.default_rng(0).uniform(-1, 3, size=(200, 3))
    assert np.array_equal(solid.contains(pts), again.contains(pts))


# ----------------------------------------------------------------- hulls

def test_cube_corner_hull_centroid_and_d0():
    corners = np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5)
                        for z in (-0.5, 0.5)])
    hull, centroid, d0 = geo.hull_and_centroid(corners)
    np.testing.assert_allclose(centroid, [0, 0, 0], atol=1e-15)
    assert d0 == pytest.approx(0.5, abs=1e-12)


def test_regular_tetrahedron_d0():
    verts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    verts /= np.sqrt(3.0)  # circumradius 1
    _, centroid, d0 = geo.hull_and_centroid(verts)
    np.testing.assert_allclose(centroid, [0, 0, 0], atol=1e-15)
    assert d0 == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_every_input_point_on_interior_side_of_every_facet():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(60, 3))
    hull, _, d0 = geo.hull_and_centroid(pts)
    assert d0 > 0
    signed = pts @ hull.normals.T + hull.offsets
    assert signed.max() <= geo.HULL_TOL


def test_coplanar_cloud_rejected():
    rng = np.random.default_rng(1)
    flat = rng.normal(size=(30, 3))
    flat[:, 2] = 2.0
    with pytest.raises(geo.GeometryError, match="degenerate"):
        geo.hull_and_centroid(flat)


def test_contains_cube_cases():
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float)
    hull, _, _ = geo.hull_and_centroid(corners)
    assert geo.contains(hull, [0, 0, 0])
    assert not geo.contains(hull, [2, 0, 0])
    assert not geo.contains(hull, [1.0, 0, 0])  # on the boundary is not interior


def test_contains_matches_brute_force_on_10k_points():
    rng = np.random.default_rng(8)
    cloud = rng.normal(size=(40, 3))
    hull, _, _ = geo.hull_and_centroid(cloud)
    probes = rng.uniform(-2, 2, size=(10000, 3))
    fast = geo.contains_many(hull, probes)
    slow = np.array([brute_force_inside(hull, p) for p in probes])
    assert np.array_equal(fast, slow)


def test_contains_agrees_with_linprog_oracle():
    rng = np.random.default_rng(12)
    cloud = rng.normal(size=(25, 3))
    hull, _, _ = geo.hull_and_centroid(cloud)
    probes = rng.uniform(-1.5, 1.5, size=(40, 3))
    for p in probes:
        lp = linprog_inside(cloud, p)
        fast = geo.contains(hull, p)
        if fast:
            assert lp  # strict interior implies convex-combination feasibility
        if not lp:
            assert not fast


def test_ball_of_radius_d0_inside_hull():
    rng = np.random.default_rng(3)
    for trial in range(5):
        cloud = rng.normal(size=(50, 3))
        hull, centroid, d0 = geo.hull_and_centroid(cloud)
        dirs = rng.normal(size=(100, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        inside_pts = centroid + 0.999 * d0 * dirs
        assert geo.contains_many(hull, inside_pts).all()


# ------------------------------------------------------------ transforms

def test_identity_transform_row():
    p = np.array([0.3, -0.2, 0.9])
    np.testing.assert_array_equal(geo.apply_transform(geo.IDENTITY_TRANSFORM_ROW, p), p)


def test_pure_translation_row():
    row = geo.IDENTITY_TRANSFORM_ROW.copy()
    row[3], row[7], row[11] = 1.0, 2.0, 3.0
    np.testing.assert_array_equal(geo.apply_transform(row, [0, 0, 0]), [1.0, 2.0, 3.0])


def test_random_transform_matches_4x4_product():
    rng = np.random.default_rng(6)
    for _ in range(20):
        row = rng.normal(size=12)
        p = rng.normal(size=3)
        m = np.vstack([row.reshape(3, 4), [0, 0, 0, 1]])
        expected = (m @ np.append(p, 1.0))[:3]
        np.testing.assert_allclose(geo.apply_transform(row, p), expected, atol=1e-12)


def test_transform_composition():
    rng = np.random.default_rng(7)
    f, g = rng.normal(size=12), rng.normal(size=12)
    p = rng.normal(size=3)
    once = geo.apply_transform(g, geo.apply_transform(f, p))
    composed = geo.apply_transform(geo.compose_transform_rows(f, g), p)
    np.testing.assert_allclose(once, composed, atol=1e-12)


# ------------------------------------------------------------------- ICP

def _box_cloud(seed=0, n=400):
    return geo.sample_interior(geo.Box([0.6, 0.4, 0.5]), n, seed=seed)


def test_icp_recovers_pure_translation():
    src = _box_cloud(seed=11)
    tgt = src + np.array([0.3, 0.0, 0.0])
    rep = geo.icp_align_z_locked(src, tgt)
    np.testing.assert_allclose(rep.translation, [0.3, 0.0, 0.0], atol=1e-6)
    assert rep.fitness == 1.0
    assert rep.inlier_mse < 1e-10
    assert rep.theta == pytest.approx(0.0, abs=1e-8)


def test_icp_recovers_z_rotation():
    src = _box_cloud(seed=13)
    ang = math.radians(30.0)
    tgt = src @ geo.rotz(ang).T
    rep = geo.icp_align_z_locked(src, tgt)
    assert math.degrees(rep.theta) == pytest.approx(30.0, abs=0.5)


def test_icp_rotation_matrix_is_exactly_rz():
    src = _box_cloud(seed=17)
    tgt = src @ geo.rotz(0.4).T + np.array([0.05, -0.03, 0.2])
    rep = geo.icp_align_z_locked(src, tgt)
    r = rep.rotation
    assert r[2, 2] == 1.0 and r[0, 2] == 0.0 and r[1, 2] == 0.0
    assert r[2, 0] == 0.0 and r[2, 1] == 0.0
    np.testing.assert_allclose(r[:2, :2] @ r[:2, :2].T, np.eye(2), atol=1e-12)


def test_icp_no_correspondences_reports_zero_fitness():
    src = _box_cloud(seed=19)
    tgt = src + np.array([50.0, 0.0, 0.0])
    rep = geo.icp_align_z_locked(src, tgt, inlier_radius=0.1)
    assert rep.fitness == 0.0
    assert rep.correspondence_pct == 0.0
