import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riccati_cascade.analysis import bearing_directions
from riccati_cascade.dynamics import figure_eight_trajectory, simulate_truth
from riccati_cascade.geometry import exp_so3, unit
from riccati_cascade.sensors import (
    BehindCamera,
    CameraRig,
    DegenerateDepth,
    LandmarkMap,
    SingularIntrinsics,
    bearing,
    bearing_from_pixel,
    body_landmark,
    camera_landmark,
    default_landmark_grid,
    load_landmarks,
    measure,
    modified_output,
    pixel_from_point,
    save_landmarks,
)

from conftest import random_rotations

PAPER_OFFSET = np.array([0.02, 0.06, 0.01])


def random_rig(rng):
    K = np.triu(rng.normal(size=(3, 3)) * 50.0)
    K[np.diag_indices(3)] = rng.uniform(100.0, 900.0, 3)
    K[2] = [0.0, 0.0, 1.0]
    return CameraRig(random_rotations(rng, 1)[0], rng.normal(size=3) * 0.1, K)


def test_body_landmark_examples():
    np.testing.assert_array_equal(body_landmark(np.eye(3), np.zeros(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    half_turn = exp_so3([0.0, 0.0, np.pi])
    np.testing.assert_allclose(body_landmark(half_turn, np.zeros(3), [1.0, 0.0, 0.0]), [-1.0, 0.0, 0.0], atol=1e-15)


def test_body_landmark_round_trip():
    rng = np.random.default_rng(0)
    for R in random_rotations(rng, 100):
        p, q = rng.normal(size=3), rng.normal(size=(5, 3))
        np.testing.assert_allclose(body_landmark(R, p, q) @ R.T + p, q, atol=1e-13)


def test_camera_landmark_examples():
    bp = np.array([1.0, 1.0, 1.0])
    np.testing.assert_array_equal(camera_landmark(CameraRig(), bp), bp)
    np.testing.assert_allclose(camera_landmark(CameraRig(p_c=PAPER_OFFSET), bp), [0.98, 0.94, 0.99], atol=1e-15)


def test_camera_landmark_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(100):
        rig = random_rig(rng)
        bp = rng.normal(size=(4, 3))
        np.testing.assert_allclose(camera_landmark(rig, bp) @ rig.R_c.T + rig.p_c, bp, atol=1e-13)


def test_bearing_examples():
    np.testing.assert_array_equal(bearing(CameraRig(), [3.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
    with pytest.raises(DegenerateDepth):
        bearing(CameraRig(p_c=PAPER_OFFSET), PAPER_OFFSET)


@given(st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_bearing_scale_invariance(lam, seed):
    rng = np.random.default_rng(seed)
    rig = random_rig(rng)
    d = unit(rng.normal(size=3))
    z = bearing(rig, rig.p_c + lam * rig.R_c @ d)
    assert abs(np.linalg.norm(z) - 1.0) < 1e-12
    np.testing.assert_allclose(z, d, atol=1e-12)


def test_pixel_examples():
    rig = CameraRig()
    np.testing.assert_array_equal(pixel_from_point(rig, [0.0, 0.0, 1.0]), [0.0, 0.0])
    np.testing.assert_array_equal(pixel_from_point(rig, [2.0, 4.0, 2.0]), [1.0, 2.0])
    K = np.array([[500.0, 0.0, 320.0], [0.0, 500.0, 240.0], [0.0, 0.0, 1.0]])
    np.testing.assert_array_equal(pixel_from_point(CameraRig(K=K), [0.0, 0.0, 5.0]), [320.0, 240.0])
    with pytest.raises(BehindCamera):
        pixel_from_point(rig, [0.0, 0.0, -1.0])


def test_bearing_from_pixel_examples():
    rig = CameraRig()
    np.testing.assert_array_equal(bearing_from_pixel(rig, 0.0, 0.0), [0.0, 0.0, 1.0])
    np.testing.assert_allclose(bearing_from_pixel(rig, 1.0, 0.0), np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0), atol=1e-15)


@pytest.mark.identity_suite
def test_pixel_bearing_round_trip_1000_points():
    rng = np.random.default_rng(2)
    rig = random_rig(rng)
    cp = rng.uniform(-3.0, 3.0, (1000, 3))
    cp[:, 2] = rng.uniform(0.05, 10.0, 1000)
    uv = pixel_from_point(rig, cp)
    z = bearing_from_pixel(rig, uv[:, 0], uv[:, 1])
    assert np.abs(z - unit(cp)).max() < 1e-12
    # composing with the body-frame bearing
    bp = cp @ rig.R_c.T + rig.p_c
    assert np.abs(z - bearing(rig, bp)).max() < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_pixel_bearing_round_trip_random_rigs(seed):
    rng = np.random.default_rng(seed)
    rig = random_rig(rng)
    cp = np.append(rng.uniform(-2.0, 2.0, 2), rng.uniform(0.01, 20.0))
    uv = pixel_from_point(rig, cp)
    assert np.abs(bearing_from_pixel(rig, *uv) - unit(cp)).max() < 1e-12


def test_rig_rejects_bad_intrinsics():
    with pytest.raises(SingularIntrinsics):
        CameraRig(K=np.diag([1.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        CameraRig(K=np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(ValueError):
        CameraRig(R_c=np.diag([1.0, 1.0, -1.0]))


def test_modified_output_without_offset():
    rng = np.random.default_rng(3)
    _, y = modified_output(CameraRig(R_c=random_rotations(rng, 1)[0]), unit(rng.normal(size=(20, 3))))
    np.testing.assert_array_equal(y, 0.0)


def test_modified_output_identities_on_samples():
    rng = np.random.default_rng(4)
    for _ in range(50):
        rig = random_rig(rng)
        bp = rng.normal(size=(10, 3)) * 5.0
        Pi, y = modified_output(rig, bearing(rig, bp))
        assert np.abs(np.einsum("nij,nj->ni", Pi, bp - rig.p_c)).max() < 1e-12
        assert np.abs(np.einsum("nij,nj->ni", Pi, bp) - y).max() < 1e-12
        np.testing.assert_allclose(np.swapaxes(Pi, 1, 2), Pi, atol=0)
        np.testing.assert_allclose(np.linalg.eigvalsh(Pi), np.tile([0.0, 1.0, 1.0], (10, 1)), atol=1e-12)


def test_inertial_bearing_identity_along_trajectory():
    spec = figure_eight_trajectory()
    tr = simulate_truth(spec, 3.0, 1e-2)
    lm = default_landmark_grid()
    rig = CameraRig(exp_so3([0.1, -0.2, 0.3]), PAPER_OFFSET)
    zp = bearing_directions(tr, lm, rig)
    for k in range(0, tr.t.size, 10):
        z = bearing(rig, body_landmark(tr.R[k], tr.p[k], lm.positions))
        np.testing.assert_allclose(z @ rig.R_c.T @ tr.R[k].T, zp[k], atol=1e-10)


def test_measure_with_field_of_view():
    rig = CameraRig()
    bp = np.array([[0.0, 0.0, 5.0], [5.0, 0.0, 0.1], [0.0, 1.0, 1.0]])
    full = measure(rig, 0.0, bp)
    assert full.visible.all()
    culled = measure(rig, 0.0, bp, fov_half_angle=np.pi / 3)
    np.testing.assert_array_equal(culled.visible, [True, False, True])
    np.testing.assert_array_equal(culled.Pi[1], 0.0)
    np.testing.assert_array_equal(culled.y[1], 0.0)
    np.testing.assert_array_equal(culled.Pi[0], full.Pi[0])


def test_default_grid_layout():
    lm = default_landmark_grid()
    assert lm.count == 16 and lm.known_count == 4
    np.testing.assert_array_equal(lm.known, [[-4, -4, 0], [4, -4, 0], [4, 4, 0], [-4, 4, 0]])
    assert len({tuple(q) for q in lm.positions}) == 16
    np.testing.assert_array_equal(lm.positions[:, 2], 0.0)
    assert lm.positions[:, :2].min() == -4.0 and lm.positions[:, :2].max() == 4.0


def test_landmark_map_validation():
    with pytest.raises(ValueError, match="aligned"):
        LandmarkMap(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]], dtype=float), 3)
    with pytest.raises(ValueError):
        LandmarkMap(np.zeros((2, 3)), 2)
    with pytest.raises(ValueError):
        LandmarkMap(np.eye(3), 4)


def test_landmark_file_round_trip(tmp_path):
    lm = default_landmark_grid()
    path = tmp_path / "lm.txt"
    save_landmarks(path, lm)
    back = load_landmarks(path)
    np.testing.assert_array_equal(back.positions, lm.positions)
    assert back.known_count == lm.known_count


@pytest.mark.parametrize(
    "text, match",
    [
        ("0 0 0 1\n1 0 0 1\n0 1 0\n", "expected"),
        ("0 0 0 1\n1 0 0 1\n0 1 0 2\n", "known_flag"),
        ("0 0 0 1\n1 0 0 0\n0 1 0 1\n2 2 0 1\n", "listed first"),
        ("0 0 0 1\n1 x 0 1\n0 1 0 1\n", ":2:"),
    ],
)
def test_landmark_file_errors(tmp_path, text, match):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ValueError, match=match):
        load_landmarks(path)
