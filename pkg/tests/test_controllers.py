import numpy as np
import pytest
from hypothesis import given, settings
from scipy.linalg import solve_discrete_are

from sdida import controllers as c
from sdida import dynamics as d
from sdida import matching
from sdida.attitude_math import rpy_to_quaternion
from sdida.simkit import NOMINAL_INERTIA, NOMINAL_RPY

from .conftest import random_state, state

E1 = np.array([1.0, 0, 0, 0, 0, 0, 0])


def test_ct_ida_examples(M):
    np.testing.assert_array_equal(c.u_ct_ida(d.ZETA_STAR, M, np.eye(3)), np.zeros(3))
    np.testing.assert_allclose(c.u_ct_ida(E1, np.eye(3), np.eye(3)), [-0.5, 0, 0])
    np.testing.assert_allclose(c.u_ct_ida(E1, M, np.eye(3)), -0.5 * np.linalg.inv(M)[:, 0], atol=1e-15)


def test_unwinding_safe_examples(M):
    K = np.eye(3)
    np.testing.assert_array_equal(c.u_ct_unwinding_safe(d.ZETA_STAR, M, K), np.zeros(3))
    np.testing.assert_array_equal(c.u_ct_unwinding_safe(-d.ZETA_STAR, M, K), np.zeros(3))
    z = np.array([0.2, 0, 0, 0.5, 0, 0, 0])
    np.testing.assert_allclose(c.u_ct_unwinding_safe(z, np.eye(3), K), [-0.1, 0, 0])


def test_omega_derivatives(rng, M):
    wd, wdd = c.omega_derivatives(d.ZETA_STAR, M)
    np.testing.assert_array_equal(wd, 0)
    np.testing.assert_array_equal(wdd, 0)
    wd, wdd = c.omega_derivatives(E1, np.eye(3))
    np.testing.assert_allclose(wd, [-0.5, 0, 0])
    np.testing.assert_allclose(wdd, 0, atol=1e-15)
    for _ in range(20):
        z = random_state(rng)
        wd, wdd = c.omega_derivatives(z, M)
        np.testing.assert_allclose(wd, d.rhs(z, c.u_es(z, M), M)[4:], atol=1e-14)
        # second derivative along the flow with the torque held at u_es(z)
        u = c.u_es(z, M)
        h = 1e-5
        num = (d.rhs(z + h * d.rhs(z, u, M), u, M)[4:] - d.rhs(z - h * d.rhs(z, u, M), u, M)[4:]) / (2 * h)
        np.testing.assert_allclose(wdd, num, atol=1e-8)


def test_first_order_terms_examples():
    w = 0.6
    z = np.array([0, 0, 0, 1.0, 0, 0, w])
    np.testing.assert_allclose(c.u_es1_term(z, np.eye(3)), [0, 0, -w / 4])
    np.testing.assert_allclose(c.u_di1_term(E1, np.eye(3), np.eye(3)), [0.5, 0, 0])


def test_correction_terms_vanish_at_equilibrium(M, kappa):
    for source in ("solved", "closed"):
        t = c.correction_terms(d.ZETA_STAR, M, kappa, source=source)
        for name in ("u_es1", "u_es2", "u_di1", "u_di2", "omega_dot0", "omega_ddot0", "J1", "J2"):
            assert np.max(np.abs(getattr(t, name))) < 1e-12, name


def test_correction_matrices_skew(rng, M, kappa):
    for _ in range(10):
        t = c.correction_terms(random_state(rng), M, kappa)
        assert np.max(np.abs(t.J1 + t.J1.T)) < 1e-12
        assert np.max(np.abs(t.J2 + t.J2.T)) < 1e-12
        P2 = c.J2_closed(random_state(rng), M)
        assert np.max(np.abs(P2 + P2.T)) < 1e-12


def test_second_order_sources_share_seeded_blocks(rng, M, kappa):
    # the unconstrained (3,3) block of the solved J2 is the closed-form one
    z = random_state(rng)
    solved = c.correction_terms(z, M, kappa).J2
    np.testing.assert_allclose(solved[4:, 4:], c.J2_closed(z, M)[4:, 4:], atol=1e-12)


def test_closed_form_second_order_shaping_loses_an_order(M, kappa):
    # the closed-form u2_es / J2 pair leaves the matching residual at order 2;
    # the solved pair reaches order 3 (see matching tests)
    z = np.array([0.3, -0.5, 0.2, 0.0, 0.4, -0.2, 0.3])
    z[:4] /= np.linalg.norm(z[:4])
    closed = c.correction_terms(z, M, kappa, source="closed")
    solved = c.correction_terms(z, M, kappa)
    deltas = [0.4, 0.2, 0.1, 0.05]

    def slope(t):
        r = [
            np.linalg.norm(matching.dme_residual(z, c.u_es_series(z, M, dl, 2, t), c.Jd_series(z, M, dl, 2, t), dl, M))
            for dl in deltas
        ]
        return matching.loglog_slope(deltas, r)

    assert slope(closed) < 2.5
    assert abs(slope(solved) - 3.0) < 0.3


@settings(max_examples=50, deadline=None)
@given(state)
def test_emulation_is_continuous_law(z):
    K = np.diag([1.1, 0.7, 0.9])
    for dl in (0.1, 1.0, 3.0):
        np.testing.assert_array_equal(c.u_sd_ida(z, NOMINAL_INERTIA, K, dl, 0), c.u_ct_ida(z, NOMINAL_INERTIA, K))


def test_sd_ida_equilibrium_and_orders(M, kappa):
    for p in (0, 1, 2):
        np.testing.assert_array_equal(c.u_sd_ida(d.ZETA_STAR, M, kappa, 1.0, p), np.zeros(3))
    with pytest.raises(ValueError):
        c.u_sd_ida(d.ZETA_STAR, M, kappa, 1.0, 3)


def test_sd_ida_nominal_golden(M, kappa):
    z = np.concatenate([rpy_to_quaternion(*NOMINAL_RPY), np.zeros(3)])
    np.testing.assert_allclose(
        c.u_sd_ida(z, M, kappa, 1.0, 2), [0.17498119426956216, -0.0602225949950233, -0.132565158511989], atol=1e-10
    )
    np.testing.assert_allclose(
        c.u_sd_ida(z, M, kappa, 1.0, 1), [0.1415963016704459, -0.05953816240115774, -0.12479149784533963], atol=1e-12
    )


def test_sd_ida_consistency_as_delta_vanishes(rng, M, kappa):
    states = [random_state(rng) for _ in range(5)]
    for p in (1, 2):
        for z in states:
            t = c.correction_terms(z, M, kappa)
            ratios = [
                np.linalg.norm(c.u_sd_ida(z, M, kappa, dl, p, terms=t) - c.u_ct_ida(z, M, kappa)) / dl
                for dl in (0.1, 0.05, 0.01)
            ]
            assert max(ratios) < 2 * ratios[-1] + 1e-12


def test_series_weights():
    np.testing.assert_allclose(c.series_weights(0.5, 2), [1.0, 0.25, 0.25 / 6])


def test_scalar_dare():
    X, K = c.dare_fixed_point(1.0, 1.0, 1.0, 1.0)
    phi = (1 + np.sqrt(5)) / 2
    assert X[0, 0] == pytest.approx(phi, abs=1e-9)
    assert K[0, 0] == pytest.approx(phi / (1 + phi), abs=1e-9)


def test_dare_matches_scipy(M):
    A, B = c.reduced_linearization(M)
    Ad, Bd = c.zoh_discretize(A, B, 1.0)
    X, _ = c.dare_fixed_point(Ad, Bd, np.eye(6), np.eye(3))
    np.testing.assert_allclose(X, solve_discrete_are(Ad, Bd, np.eye(6), np.eye(3)), atol=1e-8)
    assert c.dare_residual(Ad, Bd, np.eye(6), np.eye(3), X) < 1e-10


def test_dare_divergence_reported():
    # unstabilizable: unstable mode with no input authority
    with pytest.raises(RuntimeError):
        c.dare_fixed_point(np.diag([2.0, 0.5]), np.array([[0.0], [1.0]]), np.eye(2), np.eye(1), max_iter=2000)


def test_reduced_linearization_structure(M):
    A, B = c.reduced_linearization(M)
    Minv = np.linalg.inv(M)
    np.testing.assert_allclose(A[:3, 3:], 0.5 * np.eye(3), atol=1e-9)
    np.testing.assert_allclose(A[:3, :3], 0, atol=1e-9)
    np.testing.assert_allclose(A[3:], 0, atol=1e-9)
    np.testing.assert_allclose(B[3:], Minv, atol=1e-9)


def test_lqr_gain(M):
    K = c.lqr_baseline_gain(M, 1.0)
    assert K.shape == (3, 7)
    np.testing.assert_array_equal(K[:, 3], 0)
    np.testing.assert_array_equal(c.u_lqr(d.ZETA_STAR, K), np.zeros(3))
    A, B = c.reduced_linearization(M)
    Ad, Bd = c.zoh_discretize(A, B, 1.0)
    K6 = np.delete(K, 3, axis=1)
    assert max(abs(np.linalg.eigvals(Ad - Bd @ K6))) < 1


def test_zoh_discretize_scalar():
    Ad, Bd = c.zoh_discretize(np.array([[-1.0]]), np.array([[1.0]]), 0.5)
    assert Ad[0, 0] == pytest.approx(np.exp(-0.5))
    assert Bd[0, 0] == pytest.approx(1 - np.exp(-0.5))


def test_controller_spec_validation():
    with pytest.raises(ValueError):
        c.ControllerSpec("pid")
    with pytest.raises(ValueError):
        c.ControllerSpec("sd-ida", order=3)
    with pytest.raises(ValueError):
        c.ControllerSpec("sd-ida", delta=0.0)
    with pytest.raises(ValueError):
        c.ControllerSpec("ct-ida", kappa_di=-np.eye(3))
    assert c.ControllerSpec("sd-ida", order=2).label == "sd-ida-p2"
    assert c.ControllerSpec("lqr").sampled and not c.ControllerSpec("ct-ida").sampled


@pytest.mark.parametrize("kind", c.KINDS)
def test_every_controller_vanishes_at_equilibrium(kind, M):
    for order in (0, 1, 2) if kind == "sd-ida" else (0,):
        law = c.make_controller(c.ControllerSpec(kind, order=order), M)
        np.testing.assert_array_equal(law(d.ZETA_STAR.copy()), np.zeros(3))


def test_factory_matches_direct_laws(rng, M, kappa):
    z = random_state(rng)
    np.testing.assert_allclose(c.make_controller(c.ControllerSpec("ct-ida"), M)(z), c.u_ct_ida(z, M, kappa), atol=1e-15)
    np.testing.assert_allclose(
        c.make_controller(c.ControllerSpec("ct-ida-unwind"), M)(z), c.u_ct_unwinding_safe(z, M, kappa), atol=1e-15
    )
    spec = c.ControllerSpec("sd-ida", order=2, delta=0.5)
    np.testing.assert_allclose(c.make_controller(spec, M)(z), c.u_sd_ida(z, M, kappa, 0.5, 2), atol=1e-15)
