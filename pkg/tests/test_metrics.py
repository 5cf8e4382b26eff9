import itertools

import numpy as np
import pytest

from scenediff import geometry as geo
from scenediff import metrics as mx


def emd_permutation_oracle(a, b):
    """Exact EMD by enumerating all |a|! matchings."""
    n = len(a)
    d = np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2))
    best = np.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, d[np.arange(n), perm].sum())
    return best / n


# ---------------------------------------------------------------- chamfer

def test_chamfer_identity_is_zero():
    a = np.random.default_rng(0).normal(size=(30, 3))
    assert mx.chamfer(a, a) == 0.0


def test_chamfer_two_singletons():
    assert mx.chamfer([[0, 0, 0]], [[1, 0, 0]]) == pytest.approx(2.0, abs=1e-15)


def test_chamfer_matches_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(5):
        a = rng.normal(size=(200, 3))
        b = rng.normal(size=(200, 3))
        assert mx.chamfer(a, b) == pytest.approx(mx.chamfer_bruteforce(a, b), abs=1e-12)


def test_chamfer_symmetric():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(50, 3)), rng.normal(size=(70, 3))
    assert mx.chamfer(a, b) == pytest.approx(mx.chamfer(b, a), abs=1e-15)


# -------------------------------------------------------------------- EMD

def test_emd_zero_for_permuted_cloud():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(40, 3))
    b = a[rng.permutation(40)]
    assert mx.emd(a, b) == pytest.approx(0.0, abs=1e-12)


def test_emd_shifted_pair():
    a = np.array([[0, 0, 0], [1, 0, 0]], dtype=float)
    b = a + np.array([0, 1, 0])
    assert mx.emd(a, b) == pytest.approx(1.0, abs=1e-12)


def test_emd_hungarian_matches_permutation_oracle():
    rng = np.random.default_rng(4)
    for _ in range(50):
        a = rng.normal(size=(6, 3))
        b = rng.normal(size=(6, 3))
        assert mx.emd(a, b) == pytest.approx(emd_permutation_oracle(a, b), abs=1e-12)


def test_emd_size_mismatch_rejected():
    with pytest.raises(mx.MetricError):
        mx.emd(np.zeros((3, 3)), np.zeros((4, 3)))


def test_emd_symmetric():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(25, 3)), rng.normal(size=(25, 3))
    assert mx.emd(a, b) == pytest.approx(mx.emd(b, a), abs=1e-12)


def test_emd_auction_close_to_exact_with_small_gap():
    rng = np.random.default_rng(6)
    for _ in range(3):
        a = rng.normal(size=(150, 3))
        b = rng.normal(size=(150, 3))
        exact = mx.emd(a, b, mode="exact")
        approx, gap = mx.emd_auction(a, b)
        assert exact <= approx + 1e-12
        assert gap < 0.05
        assert approx <= exact * 1.05 + 1e-9


# --------------------------------------------------------------------- F1

def test_f1_identical_clouds():
    a = np.random.default_rng(7).normal(size=(20, 3))
    assert mx.f1(a, a, tau=0.05) == 1.0


def test_f1_disjoint_clouds():
    a = np.zeros((10, 3))
    b = np.zeros((10, 3)) + 10 * mx.F1_TAU_DEFAULT
    assert mx.f1(a, b) == 0.0


def test_f1_half_coverage_analytic():
    # Half of a is on top of b; every b point is covered.
    b = np.array([[0, 0, 0], [0.01, 0, 0]])
    a = np.array([[0, 0, 0], [0.01, 0, 0], [5, 5, 5], [6, 6, 6]])
    score = mx.f1(a, b, tau=0.1)
    assert score == pytest.approx(2 * 0.5 * 1.0 / (0.5 + 1.0), abs=1e-15)


def test_f1_monotone_in_tau():
    rng = np.random.default_rng(8)
    a, b = rng.normal(size=(60, 3)), rng.normal(size=(60, 3))
    taus = [0.02, 0.05, 0.1, 0.2, 0.5]
    scores = [mx.f1(a, b, tau=t) for t in taus]
    assert all(s1 <= s2 + 1e-15 for s1, s2 in zip(scores, scores[1:]))


def test_f1_matches_bruteforce():
    rng = np.random.default_rng(9)
    a, b = rng.normal(size=(200, 3)), rng.normal(size=(200, 3))
    for tau in (0.05, 0.15, 0.4):
        assert mx.f1(a, b, tau) == pytest.approx(mx.f1_bruteforce(a, b, tau), abs=1e-12)


# ------------------------------------------------------------ guiding MSE

def test_guiding_mse_at_centroid_is_zero():
    c = np.array([0.5, -1.0, 2.0])
    pts = np.tile(c, (12, 1))
    assert mx.guiding_mse(pts, c) == 0.0


def test_guiding_mse_sphere_radius():
    rng = np.random.default_rng(10)
    c = np.array([1.0, 2.0, 3.0])
    dirs = rng.normal(size=(500, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = 0.7
    assert mx.guiding_mse(c + r * dirs, c) == pytest.approx(r * r, abs=1e-12)


# ------------------------------------------------------------------ 3D IP

def _cube_cloud(center, side=1.0, n=300, seed=0):
    return geo.sample_interior(geo.Box([side] * 3, geo.Pose(center)), n, seed=seed)


def test_ip3d_far_prediction_is_zero():
    scene = [_cube_cloud([0, 0, 0]), _cube_cloud([3, 0, 0], seed=1)]
    pred = _cube_cloud([0, 20, 0], seed=2)
    assert mx.ip_3d(pred, scene) == 0.0


def test_ip3d_fully_inside_is_one():
    entity = _cube_cloud([0, 0, 0], side=2.0, n=2000, seed=3)
    pred = _cube_cloud([0, 0, 0], side=0.5, n=100, seed=4)
    assert mx.ip_3d(pred, [entity]) == 1.0


def test_ip3d_constructed_half_inside():
    entity = _cube_cloud([0, 0, 0], side=2.0, n=2000, seed=5)
    inside = _cube_cloud([0, 0, 0], side=0.5, n=50, seed=6)
    outside = inside + np.array([10.0, 0, 0])
    pred = np.vstack([inside, outside])
    assert mx.ip_3d(pred, [entity]) == pytest.approx(0.5, abs=0)


def test_ip3d_degenerate_entity_skipped_with_warning():
    flat = np.zeros((20, 3))
    flat[:, 0] = np.arange(20)
    pred = np.random.default_rng(11).normal(size=(10, 3))
    with pytest.warns(UserWarning, match="degenerate"):
        val = mx.ip_3d(pred, [flat])
    assert val == 0.0


# ------------------------------------------------------------- normalizing

def test_scene_frame_centers_human_and_scales_to_two():
    human = _cube_cloud([4, 4, 1], seed=12)
    obj = _cube_cloud([6, 4, 0.5], seed=13)
    center, scale = mx.scene_frame([human, obj])
    np.testing.assert_allclose(center, human.mean(axis=0), atol=1e-12)
    moved = [mx.to_frame(c, center, scale) for c in (human, obj)]
    allpts = np.vstack(moved)
    assert (allpts.max(axis=0) - allpts.min(axis=0)).max() == pytest.approx(2.0, abs=1e-9)


def test_frame_round_trip():
    rng = np.random.default_rng(14)
    cloud = rng.normal(size=(50, 3)) * 3 + 1
    center, scale = np.array([0.3, -1, 2.0]), 0.77
    back = mx.from_frame(mx.to_frame(cloud, center, scale), center, scale)
    np.testing.assert_allclose(back, cloud, atol=1e-12)
