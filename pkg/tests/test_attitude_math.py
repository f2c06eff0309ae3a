import numpy as np
import pytest
from hypothesis import given
from scipy.spatial.transform import Rotation

from sdida import attitude_math as am

from .conftest import quat, random_unit, vec3


def test_skew_examples():
    np.testing.assert_array_equal(am.skew([1, 2, 3]), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])
    np.testing.assert_array_equal(am.skew([0, 0, 0]), np.zeros((3, 3)))
    w = np.array([0.3, -1.2, 0.7])
    assert np.max(np.abs(am.skew(w) @ w)) < 1e-15


def test_skew_batched():
    w = np.arange(6.0).reshape(2, 3)
    S = am.skew(w)
    assert S.shape == (2, 3, 3)
    np.testing.assert_array_equal(S[1], am.skew(w[1]))


@given(vec3, vec3)
def test_skew_is_cross_product(w, v):
    np.testing.assert_allclose(am.skew(w) @ v, np.cross(w, v), atol=1e-14)


def test_error_quaternion_examples():
    q = np.array([-0.6533, 0.2706, 0.6533, 0.2706])
    q = q / np.linalg.norm(q)
    np.testing.assert_allclose(am.error_quaternion(q, q), [0, 0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(am.error_quaternion(q, am.IDENTITY_QUATERNION), q, atol=1e-15)


def test_error_quaternion_rejects_non_unit():
    with pytest.raises(ValueError):
        am.error_quaternion(np.array([1.0, 0, 0, 0.1]), am.IDENTITY_QUATERNION)
    with pytest.raises(ValueError):
        am.error_quaternion(am.IDENTITY_QUATERNION, np.array([0.0, 0, 0, 1.01]))


def test_error_quaternion_preserves_norm(rng):
    q, p = random_unit(rng, 1000), random_unit(rng, 1000)
    eps = am.error_quaternion(q, p)
    assert np.max(np.abs(np.linalg.norm(eps, axis=1) - 1.0)) <= 1e-9


@given(quat)
def test_error_quaternion_of_itself_is_identity(q):
    np.testing.assert_allclose(am.error_quaternion(q, q), [0, 0, 0, 1], atol=1e-12)


@given(quat, quat)
def test_product_matches_rotation_composition(a, b):
    # with vector-first storage, a (x) b composes rotations as R(a) R(b)
    ab = am.quat_multiply(a, b)
    Rab = Rotation.from_quat(ab).as_matrix()
    np.testing.assert_allclose(Rab, Rotation.from_quat(a).as_matrix() @ Rotation.from_quat(b).as_matrix(), atol=1e-12)


def test_rpy_reproduces_reference_initial_attitude():
    q = am.rpy_to_quaternion(np.pi / 4, np.pi / 2, np.pi)
    assert np.max(np.abs(q - [-0.6533, 0.2706, 0.6533, 0.2706])) < 1e-3


@given(vec3)
def test_rpy_matches_scipy_zyx(rpy):
    roll, pitch, yaw = rpy
    q = am.rpy_to_quaternion(roll, pitch, yaw)
    ref = Rotation.from_euler("ZYX", [yaw, pitch, roll]).as_quat()
    assert min(np.max(np.abs(q - ref)), np.max(np.abs(q + ref))) < 1e-12


def test_select_sign():
    q = np.array([0.0, 0.6, 0.0, -0.8])
    np.testing.assert_array_equal(am.select_sign(q, None), q)
    np.testing.assert_array_equal(am.select_sign(q, -q), -q)
    np.testing.assert_array_equal(am.select_sign(q, q), q)


def test_vec_kron_examples(rng):
    np.testing.assert_array_equal(am.vec(np.eye(2)), [1, 0, 0, 1])
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    K = am.kron(np.eye(2), B)
    np.testing.assert_array_equal(K[:2, :2], B)
    np.testing.assert_array_equal(K[2:, 2:], B)
    np.testing.assert_array_equal(K[:2, 2:], 0)
    A, b = rng.normal(size=(3, 3)), rng.normal(size=3)
    assert np.max(np.abs(A @ b - am.matvec_operator(b, 3) @ am.vec(A))) < 1e-12
    np.testing.assert_array_equal(am.unvec(am.vec(A), 3), A)


def test_vec_dimension_mismatch():
    with pytest.raises(ValueError):
        am.unvec(np.arange(7.0), 3)
