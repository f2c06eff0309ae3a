import numpy as np
import pytest

from sdida import controllers as c
from sdida import dynamics as d
from sdida import matching as m
from sdida.dynamics import hamiltonian_Hd_momentum
from sdida.flow import zoh_flow

from .conftest import random_state

DELTAS = [0.4, 0.2, 0.1, 0.05]


def _u_es_const(u):
    return lambda _z: u


def test_dme_residual_zero_at_equilibrium(rng, M):
    J = rng.normal(size=(7, 7))
    J = J - J.T
    r = m.dme_residual(d.ZETA_STAR, np.zeros(3), J, 0.7, M)
    assert np.max(np.abs(r)) < 1e-14


def test_loglog_slope():
    assert m.loglog_slope(DELTAS, [3 * x**2 for x in DELTAS]) == pytest.approx(2.0)
    assert np.isnan(m.loglog_slope(DELTAS, [1.0, 0.0, 1.0, 1.0]))


def test_dme_order_study_orders(rng, M, kappa):
    z = random_state(rng)
    t = c.correction_terms(z, M, kappa)
    for p in (0, 1, 2):
        rows = m.dme_order_study(
            z, lambda dl: c.u_es_series(z, M, dl, p, t), lambda dl: c.Jd_series(z, M, dl, p, t), DELTAS, M
        )
        assert len(rows) == len(DELTAS)
        assert abs(rows[0].order_estimate - (p + 1)) < 0.3


def test_conjugate_output_limits(rng, M):
    z = random_state(rng)
    ue = c.u_es(z, M)
    Y = m.conjugate_output(z, np.zeros(3), 0.5, M, _u_es_const(ue))
    assert np.all(np.isfinite(Y))
    # v = 0 contributes nothing beyond the shaping change
    defect = m.energy_balance_defect(z, np.zeros(3), 0.5, M, _u_es_const(ue))
    assert defect == pytest.approx(_shaping_change(z, ue, 0.5, M), abs=1e-14)
    Y_small = m.conjugate_output(z, -0.3 * z[4:], 1e-4, M, _u_es_const(ue))
    np.testing.assert_allclose(Y_small, M @ z[4:], atol=1e-3)


def _shaping_change(z, u, dl, M):
    return float(hamiltonian_Hd_momentum(zoh_flow(z, u, dl, M).zeta_plus, M) - hamiltonian_Hd_momentum(z, M))


def test_energy_balance_is_exact_for_the_damping_part(rng, M, kappa):
    # defect = pure shaping change; the v-dependent part balances exactly
    for _ in range(5):
        z = random_state(rng)
        ue = c.u_es(z, M)
        v = c.u_di(z, kappa)
        for dl in (1.0, 0.3):
            defect = m.energy_balance_defect(z, v, dl, M, _u_es_const(ue))
            assert defect == pytest.approx(_shaping_change(z, ue, dl, M), abs=1e-10)


def test_damping_residual_orders(rng, M, kappa):
    z = random_state(rng)
    t = c.correction_terms(z, M, kappa)
    assert np.max(np.abs(m.damping_residual(d.ZETA_STAR, np.zeros(3), 0.5, M, kappa, _u_es_const(np.zeros(3))))) < 1e-14
    for p in (0, 1, 2):
        r = [
            np.linalg.norm(
                m.damping_residual(
                    z, c.u_di_series(z, M, kappa, dl, p, t), dl, M, kappa, _u_es_const(c.u_es_series(z, M, dl, p, t))
                )
            )
            for dl in DELTAS
        ]
        assert abs(m.loglog_slope(DELTAS, r) - (p + 1)) < 0.3


def test_damping_fixed_point_agrees_with_series(rng, M, kappa):
    z = random_state(rng)
    t = c.correction_terms(z, M, kappa)
    gaps = []
    for dl in (0.2, 0.1):
        ue = c.u_es_series(z, M, dl, 2, t)
        v, it = m.solve_damping_fixed_point(z, dl, M, kappa, _u_es_const(ue))
        assert it <= 50
        assert np.linalg.norm(m.damping_residual(z, v, dl, M, kappa, _u_es_const(ue))) < 1e-9
        gaps.append(np.linalg.norm(v - c.u_di_series(z, M, kappa, dl, 2, t)))
    # the series is third-order accurate
    assert gaps[1] < gaps[0] / 5


def test_damping_terms_match_closed_form_order_one(rng, M, kappa):
    for _ in range(10):
        z = random_state(rng)
        v = m.damping_order_terms(z, M, kappa, [c.u_es(z, M), c.u_es1_term(z, M)], order=2)
        np.testing.assert_allclose(v[0], c.u_di(z, kappa), atol=1e-15)
        np.testing.assert_allclose(v[1], c.u_di1_term(z, M, kappa), atol=1e-9)


def test_solve_order_zero_recovers_continuous_pair(rng, M):
    for _ in range(20):
        z = random_state(rng)
        r = m.solve_order_i(z, M, [], 0, J_seed=d.Jd_matrix(z[4:], M))
        np.testing.assert_allclose(r.u_i, c.u_es(z, M), atol=1e-8)
        np.testing.assert_allclose(r.J_i, d.Jd_matrix(z[4:], M), atol=1e-8)


def test_solve_order_one_matches_closed(rng, M):
    for _ in range(20):
        z = random_state(rng)
        lower = [(c.u_es(z, M), d.Jd_matrix(z[4:], M))]
        r = m.solve_order_i(z, M, lower, 1, J_seed=c.J1_term(z, M))
        np.testing.assert_allclose(r.u_i, c.u_es1_term(z, M), atol=1e-6)


@pytest.mark.parametrize("seeded", [False, True])
def test_solve_self_consistency_and_determinism(rng, M, seeded):
    z = random_state(rng)
    lower = [(c.u_es(z, M), d.Jd_matrix(z[4:], M)), (c.u_es1_term(z, M), c.J1_term(z, M))]
    seed = c.J2_closed(z, M) if seeded else None
    a = m.solve_order_i(z, M, lower, 2, J_seed=seed)
    b = m.solve_order_i(z, M, lower, 2, J_seed=seed)
    assert a.equation_residual < 1e-8
    assert np.max(np.abs(a.J_i + a.J_i.T)) < 1e-12
    np.testing.assert_array_equal(a.u_i, b.u_i)
    np.testing.assert_array_equal(a.J_i, b.J_i)


def test_solve_order_fd_matches_taylor(rng, M):
    z = random_state(rng)
    lower = [(c.u_es(z, M), d.Jd_matrix(z[4:], M)), (c.u_es1_term(z, M), c.J1_term(z, M))]
    a = m.solve_order_i(z, M, lower, 2, J_seed=c.J2_closed(z, M), method="fd")
    b = m.solve_order_i(z, M, lower, 2, J_seed=c.J2_closed(z, M), method="taylor")
    np.testing.assert_allclose(a.u_i, b.u_i, atol=1e-8)


def test_solve_rejects_equilibrium_and_high_order(M):
    with pytest.raises(np.linalg.LinAlgError):
        m.solve_order_i(d.ZETA_STAR, M, [], 0)
    with pytest.raises(ValueError):
        m.solve_order_i(np.array([0.6, 0, 0, 0.8, 0, 0, 0]), M, [(0, 0)] * 3, 3)
    with pytest.raises(ValueError):
        m.ell_rhs(np.array([0.6, 0, 0, 0.8, 0, 0, 0]), M, [], 1)
