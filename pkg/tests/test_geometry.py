import warnings

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import oracles
from splatlab.geometry import (
    DegenerateCorrespondence,
    NearestNeighborIndex,
    RigidTransform,
    chamfer,
    compare_point_clouds,
    crop_aabb,
    d1_mse,
    d2_mse,
    estimate_normals,
    extract_point_cloud,
    fit_rigid,
    hausdorff,
    icp_register,
)
from splatlab.model import GaussianModel, PointCloud, logit


def pc(points, normals=None):
    return PointCloud(np.asarray(points, dtype=float), normals=normals)


def random_rigid(rng, max_deg=30.0, max_t=1.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(0, max_deg))
    t = rng.normal(size=3)
    t *= rng.uniform(0, max_t) / np.linalg.norm(t)
    return RigidTransform(Rotation.from_rotvec(angle * axis).as_matrix(), t)


def rotation_error_deg(Ra, Rb):
    c = (np.trace(Ra.T @ Rb) - 1) / 2
    return np.degrees(np.arccos(np.clip(c, -1, 1)))


def surface_points(rng, n):
    """Points on a bumpy, asymmetric surface patch (no rotational symmetry)."""
    xy = rng.uniform(-1, 1, (n, 2)) * [1.0, 0.7]
    z = 0.3 * np.sin(2 * xy[:, 0]) * np.cos(3 * xy[:, 1]) + 0.2 * xy[:, 0] ** 2
    return np.column_stack([xy, z])


# --------------------------------------------------------------------------- nearest neighbors


@pytest.mark.parametrize("seed", range(20))
def test_index_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(int(rng.integers(1, 400)), 3))
    b = rng.normal(size=(int(rng.integers(1, 400)), 3))
    sq, idx = NearestNeighborIndex(b).query(a)
    sq_ref, _ = oracles.brute_nn(a, b)
    np.testing.assert_array_equal(sq, sq_ref)
    np.testing.assert_array_equal(((a - b[idx]) ** 2).sum(1), sq_ref)


def test_index_k_neighbors_sorted():
    rng = np.random.default_rng(0)
    p = rng.normal(size=(100, 3))
    sq, idx = NearestNeighborIndex(p).query(p, k=5)
    assert sq.shape == idx.shape == (100, 5)
    np.testing.assert_array_equal(idx[:, 0], np.arange(100))
    assert np.all(np.diff(sq, axis=1) >= 0)


def test_empty_index_rejected():
    with pytest.raises(ValueError):
        NearestNeighborIndex(np.zeros((0, 3)))


# --------------------------------------------------------------------------- extraction and cropping


def _model(opacities):
    n = len(opacities)
    return GaussianModel(np.arange(3 * n, dtype=float).reshape(n, 3), np.zeros((n, 3)),
                         np.tile([1.0, 0, 0, 0], (n, 1)), logit(np.asarray(opacities, float)), np.zeros((n, 16, 3)))


def test_extract_all_means():
    m = _model([0.5, 0.1, 0.9])
    out = extract_point_cloud(m, 0.0)
    np.testing.assert_array_equal(out.positions, m.means)
    np.testing.assert_allclose(out.colors, 0.5)


def test_extract_threshold_can_empty():
    assert len(extract_point_cloud(_model([1e-4, 1e-4]), 5e-3)) == 0
    assert len(extract_point_cloud(_model([1e-4, 0.2]), 5e-3)) == 1


def test_crop():
    p = pc([[0.5, 0.5, 0.5], [1.5, 0.5, 0.5]])
    np.testing.assert_array_equal(crop_aabb(p, [0, 0, 0], [1, 1, 1]).positions, [[0.5, 0.5, 0.5]])
    np.testing.assert_array_equal(crop_aabb(p, [-5] * 3, [5] * 3).positions, p.positions)
    np.testing.assert_array_equal(crop_aabb(p, [0.5, 0, 0], [1.5, 1, 1]).positions, p.positions)  # inclusive
    with pytest.raises(ValueError):
        crop_aabb(p, [1, 0, 0], [0, 1, 1])


# --------------------------------------------------------------------------- normals


def test_plane_normals():
    rng = np.random.default_rng(0)
    p = np.column_stack([rng.uniform(size=(50, 2)), np.zeros(50)])
    out = estimate_normals(pc(p), k=8)
    np.testing.assert_allclose(out.normals, np.tile([0, 0, 1.0], (50, 1)), atol=1e-12)


def test_diagonal_plane_normals():
    rng = np.random.default_rng(1)
    u, z = rng.uniform(size=(2, 60))
    p = np.column_stack([u, u, z])
    out = estimate_normals(pc(p), k=8)
    # sign rule: z component is zero, so x is made positive
    np.testing.assert_allclose(out.normals, np.tile([1, -1, 0] / np.sqrt(2), (60, 1)), atol=1e-9)


def test_collinear_points_degenerate():
    p = pc([[0, 0, 0], [1, 0, 0], [2, 0, 0]])
    with pytest.warns(UserWarning, match="degenerate"):
        out, degenerate = estimate_normals(p, k=2, return_degenerate=True)
    assert degenerate.all()
    np.testing.assert_array_equal(out.normals, np.tile([0, 0, 1.0], (3, 1)))


def test_normals_need_enough_points():
    with pytest.raises(ValueError):
        estimate_normals(pc(np.zeros((4, 3))), k=8)


def test_normals_match_pca_oracle():
    rng = np.random.default_rng(2)
    p = surface_points(rng, 300)
    out = estimate_normals(pc(p), k=10)
    for i in rng.choice(300, 20, replace=False):
        d = np.linalg.norm(p - p[i], axis=1)
        nb = p[np.argsort(d, kind="stable")[:10]]
        w, v = np.linalg.eigh(np.cov(nb.T))
        n = v[:, 0] * np.sign(v[2, 0])
        np.testing.assert_allclose(out.normals[i], n, atol=1e-8)
    assert np.all(out.normals[:, 2] > 0)


# --------------------------------------------------------------------------- metrics


def test_metric_examples():
    origin, unit = pc([[0, 0, 0]]), pc([[1, 0, 0]])
    assert d1_mse(origin, unit) == 1.0
    assert chamfer(origin, unit) == 2.0
    assert hausdorff(origin, pc([[0, 0, 0], [1, 0, 0]])) == 1.0
    rng = np.random.default_rng(0)
    a = pc(rng.normal(size=(30, 3)))
    assert d1_mse(a, a) == chamfer(a, a) == hausdorff(a, a) == 0.0


def test_d2_examples():
    ref = pc([[0, 0, 0], [1, 0, 0], [0, 1, 0]], normals=np.tile([0, 0, 1.0], (3, 1)))
    assert d2_mse(pc([[0.1, 0, 0.5]]), ref) == pytest.approx(0.25, abs=1e-15)
    tangential = pc([[0.2, 0.1, 0]])
    assert d2_mse(tangential, ref) == 0.0 and d1_mse(tangential, ref) > 0
    assert d2_mse(ref, ref) == 0.0
    with pytest.raises(ValueError, match="normals"):
        d2_mse(ref, pc(ref.positions))


def test_empty_inputs_rejected():
    empty = pc(np.zeros((0, 3)))
    for f in (d1_mse, hausdorff, chamfer):
        with pytest.raises(ValueError):
            f(empty, pc([[0, 0, 0]]))


def test_directional_and_symmetric():
    a = pc([[0, 0, 0]])
    b = pc([[0, 0, 0], [3, 0, 0]])
    assert d1_mse(a, b) == 0.0 and d1_mse(b, a) == 4.5
    rng = np.random.default_rng(3)
    x, y = pc(rng.normal(size=(40, 3))), pc(rng.normal(size=(55, 3)))
    assert hausdorff(x, y) == hausdorff(y, x)
    assert chamfer(x, y) == pytest.approx(chamfer(y, x), abs=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_metrics_rigid_invariant_and_d2_bound(seed):
    rng = np.random.default_rng(seed)
    ref = estimate_normals(pc(surface_points(rng, 300)), k=8)
    src = pc(ref.positions[:200] + rng.normal(0, 0.02, (200, 3)))
    before = compare_point_clouds(src, ref)
    assert before["d2_mse"] <= before["d1_mse"]
    tf = random_rigid(rng, 180, 5)
    moved_ref = PointCloud(tf.apply(ref.positions), normals=ref.normals @ tf.rotation.T)
    after = compare_point_clouds(pc(tf.apply(src.positions)), moved_ref)
    for k in before:
        assert after[k] == pytest.approx(before[k], abs=1e-9)


def test_compare_estimates_missing_normals():
    rng = np.random.default_rng(4)
    ref = pc(surface_points(rng, 100))
    out = compare_point_clouds(pc(ref.positions + 0.01), ref)
    assert set(out) == {"d1_mse", "d2_mse", "hausdorff", "chamfer"}
    assert out["d2_mse"] <= out["d1_mse"]


# --------------------------------------------------------------------------- registration


def test_rigid_transform_algebra():
    rng = np.random.default_rng(0)
    a, b = random_rigid(rng), random_rigid(rng)
    p = rng.normal(size=(5, 3))
    np.testing.assert_allclose(a.compose(b).apply(p), a.apply(b.apply(p)), atol=1e-14)
    np.testing.assert_allclose(a.inverse().apply(a.apply(p)), p, atol=1e-14)
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1, 1, -1.0]))


def test_fit_rigid_exact_and_reflection_safe():
    rng = np.random.default_rng(1)
    p = rng.normal(size=(50, 3))
    tf = random_rigid(rng, 180)
    got = fit_rigid(p, tf.apply(p))
    np.testing.assert_allclose(got.rotation, tf.rotation, atol=1e-12)
    mirrored = p * [1, 1, -1]
    assert np.linalg.det(fit_rigid(p, mirrored).rotation) == pytest.approx(1.0)


def test_fit_rigid_degenerate():
    line = np.outer(np.arange(5.0), [1, 0, 0])
    with pytest.raises(DegenerateCorrespondence, match="iteration 4"):
        fit_rigid(line, line + 1, iteration=4)


def test_icp_degenerate_names_iteration():
    line = pc(np.outer(np.arange(20.0), [1, 2, 3]))
    with pytest.raises(DegenerateCorrespondence, match="iteration 1"):
        icp_register(line, line)


def test_icp_identity():
    rng = np.random.default_rng(0)
    p = pc(surface_points(rng, 500))
    tf, hist = icp_register(p, p)
    np.testing.assert_allclose(tf.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(tf.translation, 0, atol=1e-12)
    assert len(hist) == 1


@pytest.mark.parametrize("seed", range(5))
def test_icp_exact_recovery(seed):
    rng = np.random.default_rng(seed)
    src = surface_points(rng, 2000)
    truth = random_rigid(rng, 30, 0.2 * PointCloud(src).bbox_diagonal())
    tf, hist = icp_register(pc(src), pc(truth.apply(src)))
    assert rotation_error_deg(tf.rotation, truth.rotation) < np.degrees(1e-6)
    assert np.linalg.norm(tf.translation - truth.translation) < 1e-9
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_icp_with_noise():
    rng = np.random.default_rng(42)
    src = surface_points(rng, 2000)
    diag = PointCloud(src).bbox_diagonal()
    truth = random_rigid(rng, 30, 0.2 * diag)
    ref = truth.apply(src) + rng.normal(0, 1e-3 * diag, src.shape)
    tf, hist = icp_register(pc(src), pc(ref))
    assert rotation_error_deg(tf.rotation, truth.rotation) < 0.5
    assert np.linalg.norm(tf.translation - truth.translation) < 0.01 * diag
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_icp_rejects_far_pairs():
    rng = np.random.default_rng(7)
    src = surface_points(rng, 1500)
    truth = random_rigid(rng, 10, 0.1)
    outliers = rng.uniform(5, 6, (100, 3))
    ref = np.vstack([truth.apply(src), outliers])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tf, _ = icp_register(pc(src), pc(ref))
    assert rotation_error_deg(tf.rotation, truth.rotation) < 0.01
