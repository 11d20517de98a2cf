"""Perturbative modified dynamics: weak moments, RK4 driver, closed forms, bursts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prepost.qcore import (
    SIGMA_X,
    SIGMA_Z,
    HilbertSpace,
    Ket,
    Operator,
    basis_ket,
    qubits,
    random_ket,
    tensor,
)
from prepost.twostate import TwoState, purity
from prepost import liouville as lv
from prepost import spinbath as sb

QUBIT = qubits(1)


def _sz_env_operator(n, gamma):
    """sum_k gamma_k sigma_z^(k) on an n-spin environment, dense diagonal."""
    z = np.array([1.0, -1.0])
    diag = np.zeros(1)
    for gk in gamma:
        diag = np.add.outer(diag, gk * z).reshape(-1)
    return Operator(qubits(n), np.diag(diag).astype(complex))


def _real_bath_pair(rng):
    th = rng.uniform(0, 2 * np.pi)
    return np.cos(th), np.sin(th)


def _guarded_env(rng, n, min_overlap=0.3):
    while True:
        alpha = np.empty(n, complex)
        beta = np.empty(n, complex)
        alpha_p = np.empty(n, complex)
        beta_p = np.empty(n, complex)
        for k in range(n):
            while True:
                a1, b1 = sb._bloch_pair(rng)
                a2, b2 = sb._bloch_pair(rng)
                if abs(a1 * np.conj(a2) + b1 * np.conj(b2)) >= min_overlap:
                    alpha[k], beta[k], alpha_p[k], beta_p[k] = a1, b1, a2, b2
                    break
        return alpha, beta, alpha_p, beta_p


def _single_channel_spec(lam=0.1, t_final=1.0, e_pair=None, l_op=None):
    env = qubits(1)
    if e_pair is None:
        e1 = Ket(env, np.array([0.8, 0.6]))
        e2 = Ket(env, np.array([0.6, 0.8]))
    else:
        e1, e2 = e_pair
    l = Operator(env, SIGMA_Z if l_op is None else l_op)
    q = Operator(QUBIT, SIGMA_Z)
    return lv.continuous_interaction(lam, [q], [l], e1, e2, t_final=t_final)


def _generic_initial(rng=None):
    rng = rng or np.random.default_rng(42)
    u, v = random_ket(QUBIT, rng), random_ket(QUBIT, rng)
    return TwoState(QUBIT, np.outer(u.amps, v.amps.conj()), 0.0, 1.0, 0.0)


# ---------------------------------------------------------------- weak moments


def test_moments_coinciding_conditions_are_ordinary_statistics():
    rng = np.random.default_rng(0)
    env = qubits(1)
    e = random_ket(env, rng)
    spec = _single_channel_spec(e_pair=(e, e))
    m = lv.weak_moments(spec)
    expectation = np.vdot(e.amps, SIGMA_Z @ e.amps).real
    variance = 1.0 - expectation**2  # sigma_z^2 = 1
    assert m.l_w[0] == pytest.approx(expectation, abs=1e-13)
    assert m.delta[0, 0] == pytest.approx(variance, abs=1e-13)


def test_moments_single_spin_weak_value_one():
    up = basis_ket(qubits(1), 0)
    plus = Ket(qubits(1), np.array([1.0, 1.0]) / np.sqrt(2))
    spec = _single_channel_spec(e_pair=(up, plus))
    m = lv.weak_moments(spec)
    assert m.l_w[0] == pytest.approx(1.0)


def test_moments_match_per_spin_products():
    # dual route: full-space trace vs the per-spin factorized formulas
    rng = np.random.default_rng(1)
    n = 4
    gamma = rng.uniform(0.2, 1.5, n)
    alpha, beta, alpha_p, beta_p = _guarded_env(rng, n)
    e1 = lv.product_env_ket([np.array([alpha[k], beta[k]]) for k in range(n)])
    e2 = lv.product_env_ket([np.array([alpha_p[k], beta_p[k]]) for k in range(n)])
    l = _sz_env_operator(n, gamma)
    q = Operator(QUBIT, SIGMA_Z)
    spec = lv.continuous_interaction(0.1, [q], [l], e1, e2, t_final=1.0)
    m = lv.weak_moments(spec)
    w = (alpha * np.conj(alpha_p) - beta * np.conj(beta_p)) / (
        alpha * np.conj(alpha_p) + beta * np.conj(beta_p)
    )
    assert m.l_w[0] == pytest.approx(complex(np.sum(gamma * w)), abs=1e-12)
    assert m.delta[0, 0] == pytest.approx(complex(np.sum(gamma**2 * (1 - w**2))), abs=1e-12)


def test_burst_moments_product_conditions_diagonal():
    rng = np.random.default_rng(2)
    n = 8
    parts1, parts2, ops = [], [], []
    for _ in range(n):
        a1, b1 = _real_bath_pair(rng)
        a2, b2 = _real_bath_pair(rng)
        if abs(a1 * a2 + b1 * b2) < 0.3:
            a2, b2 = a1, b1
        parts1.append(np.array([a1, b1]))
        parts2.append(np.array([a2, b2]))
        ops.append(SIGMA_Z)
    spec = lv.burst_interaction(0.5, 0.04, ops, lv.product_env_ket(parts1), lv.product_env_ket(parts2))
    m = lv.weak_moments(spec)
    off = m.delta - np.diag(np.diagonal(m.delta))
    assert np.max(np.abs(off)) < 1e-13
    # single-particle weak values
    for k in range(n):
        w = np.vdot(parts2[k], SIGMA_Z @ parts1[k]) / np.vdot(parts2[k], parts1[k])
        assert m.l_w[k] == pytest.approx(w, abs=1e-13)


def test_burst_moments_detect_correlations():
    # entangled final environment condition produces off-diagonal delta
    space = qubits(2)
    e1 = Ket(space, np.array([0.5, 0.5, 0.5, 0.5]))
    e2 = Ket(space, np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2))
    spec = lv.burst_interaction(0.1, 0.1, [SIGMA_Z, SIGMA_Z], e1, e2)
    m = lv.weak_moments(spec)
    assert abs(m.delta[0, 1]) > 0.1


# ---------------------------------------------------------------- continuous RHS


def test_rhs_zero_coupling():
    spec = _single_channel_spec(lam=0.0)
    m = lv.weak_moments(spec)
    mat = _generic_initial().mat
    np.testing.assert_array_equal(lv.modified_liouville_rhs(0.3, mat, spec, m), np.zeros((2, 2)))


def test_rhs_dispersion_free_is_first_order_flow():
    # eigenstate conditions: L_w is the eigenvalue and the weak uncertainty vanishes
    up = basis_ket(qubits(1), 0)
    spec = _single_channel_spec(e_pair=(up, up))
    m = lv.weak_moments(spec)
    assert abs(m.delta[0, 0]) < 1e-14
    mat = _generic_initial().mat
    rhs = lv.modified_liouville_rhs(0.7, mat, spec, m)
    first_order = -1j * spec.lam * m.l_w[0] * (SIGMA_Z @ mat - mat @ SIGMA_Z)
    np.testing.assert_allclose(rhs, first_order, atol=1e-15)


def test_rhs_single_channel_reduces_to_spin_form():
    spec = _single_channel_spec(lam=0.2, t_final=1.3)
    m = lv.weak_moments(spec)
    mat = _generic_initial().mat
    for t in (0.0, 0.4, 1.0, 1.3):
        rhs = lv.modified_liouville_rhs(t, mat, spec, m)
        spin_form = -1j * spec.lam * m.l_w[0] * (SIGMA_Z @ mat - mat @ SIGMA_Z) - spec.lam**2 * m.delta[
            0, 0
        ] * (2 * t - spec.t_final) * (mat - SIGMA_Z @ mat @ SIGMA_Z)
        np.testing.assert_allclose(rhs, spin_form, atol=1e-13)


def test_rhs_kind_mismatch():
    spec = _single_channel_spec()
    m = lv.weak_moments(spec)
    with pytest.raises(ValueError):
        lv.burst_rhs(0.0, np.eye(2, dtype=complex), spec, m)


def test_commutation_requirement_enforced():
    env = qubits(1)
    e1 = Ket(env, np.array([0.8, 0.6]))
    e2 = Ket(env, np.array([0.6, 0.8]))
    h_e = Operator(env, SIGMA_X)
    with pytest.raises(ValueError, match="commute"):
        lv.continuous_interaction(
            0.1, [Operator(QUBIT, SIGMA_Z)], [Operator(env, SIGMA_Z)], e1, e2, h_e=h_e
        )


# ---------------------------------------------------------------- closed form


def test_closed_form_diagonals_and_boundary_magnitude():
    rs0 = _generic_initial()
    l_w, delta_l, lam, big_t = 0.7, 0.9, 0.1, 1.0
    end = lv.closed_form_spin(rs0, l_w, delta_l, lam, big_t, big_t)
    assert end.mat[0, 0] == rs0.mat[0, 0]
    assert end.mat[1, 1] == rs0.mat[1, 1]
    assert abs(end.mat[0, 1]) == pytest.approx(abs(rs0.mat[0, 1]), abs=1e-12)
    assert abs(end.mat[1, 0]) == pytest.approx(abs(rs0.mat[1, 0]), abs=1e-12)


@given(st.floats(-2.0, 2.0), st.floats(0.01, 0.5), st.floats(-1.5, 1.5))
@settings(max_examples=40, deadline=None)
def test_closed_form_recoherence_real_weak_value(l_w, lam, delta_l):
    rs0 = _generic_initial()
    big_t = 1.0
    end = lv.closed_form_spin(rs0, l_w, delta_l, lam, big_t, big_t)
    assert abs(abs(end.mat[0, 1]) - abs(rs0.mat[0, 1])) < 1e-12
    mid = lv.closed_form_spin(rs0, l_w, delta_l, lam, big_t, big_t / 2)
    # midpoint envelope exp(+lam^2 delta T^2 / 2), amplification or damping by sign
    expected = abs(rs0.mat[0, 1]) * np.exp(lam**2 * delta_l * big_t**2 / 2)
    assert abs(mid.mat[0, 1]) == pytest.approx(expected, rel=1e-10)


def test_closed_form_complex_weak_value_magnitude_shift():
    # an imaginary part in L_w rescales the final coherence by exp(2 lam T Im L_w)
    rs0 = _generic_initial()
    lam, big_t = 0.2, 1.0
    l_w = 0.4 + 0.3j
    end = lv.closed_form_spin(rs0, l_w, 0.5, lam, big_t, big_t)
    factor = np.exp(2 * lam * big_t * l_w.imag)
    assert abs(end.mat[0, 1]) == pytest.approx(abs(rs0.mat[0, 1]) * factor, rel=1e-12)


# ---------------------------------------------------------------- integration


def test_integrate_zero_interaction_constant():
    spec = _single_channel_spec(lam=0.0)
    rs0 = _generic_initial()
    traj = lv.integrate(rs0, spec, steps=50)
    for m in (traj.states[0].mat, traj.states[25].mat, traj.states[-1].mat):
        np.testing.assert_array_equal(m, rs0.mat)


def test_integrate_matches_closed_form_everywhere():
    spec = _single_channel_spec(lam=0.1, t_final=1.0)
    m = lv.weak_moments(spec)
    rs0 = _generic_initial()
    traj = lv.integrate(rs0, spec, steps=2000)
    for t, state in zip(traj.times[::100], traj.states[::100]):
        ref = lv.closed_form_spin(rs0, m.l_w[0], m.delta[0, 0], spec.lam, spec.t_final, t)
        np.testing.assert_allclose(state.mat, ref.mat, atol=1e-9)
    # diagonals are constants of motion
    assert abs(traj.states[-1].mat[0, 0] - rs0.mat[0, 0]) < 1e-12
    assert abs(traj.states[-1].mat[1, 1] - rs0.mat[1, 1]) < 1e-12


def test_integrate_step_halving_convergence():
    spec = _single_channel_spec(lam=0.1)
    rs0 = _generic_initial()
    end_full = lv.integrate(rs0, spec, steps=2000).states[-1].mat
    end_half = lv.integrate(rs0, spec, steps=1000).states[-1].mat
    assert np.max(np.abs(end_full - end_half)) < 1e-8


def test_integrate_rejects_tiny_step_count():
    spec = _single_channel_spec()
    with pytest.raises(ValueError):
        lv.integrate(_generic_initial(), spec, steps=5)


def test_integrate_warns_outside_validity():
    spec = _single_channel_spec(lam=2.0, t_final=1.0)
    with pytest.warns(RuntimeWarning, match="weak-coupling"):
        lv.integrate(_generic_initial(), spec, steps=50)


def test_order_of_accuracy_against_exact_model():
    # closed form vs the solvable bath: halving the coupling shrinks the
    # residual by ~8, the third-order signature
    rng = np.random.default_rng(3)
    n = 4
    gamma = rng.uniform(0.3, 1.5, n)
    gamma /= gamma.sum()
    alpha, beta, alpha_p, beta_p = _guarded_env(rng, n)
    a, b = sb._bloch_pair(rng)
    ap, bp = sb._bloch_pair(rng)

    def residual(lam):
        p = sb.SpinBathParams(
            n=n, g=lam * gamma, a=a, b=b,
            alpha=alpha, beta=beta, alpha_post=alpha_p, beta_post=beta_p,
            t_final=1.0, a_post=ap, b_post=bp,
        )
        e1 = lv.product_env_ket([np.array([alpha[k], beta[k]]) for k in range(n)])
        e2 = lv.product_env_ket([np.array([alpha_p[k], beta_p[k]]) for k in range(n)])
        spec = lv.continuous_interaction(
            lam, [Operator(QUBIT, SIGMA_Z)], [_sz_env_operator(n, gamma)], e1, e2, t_final=1.0
        )
        m = lv.weak_moments(spec)
        rs0 = sb.exact_reduced_two_state(p, 0.0)
        err = 0.0
        for t in np.linspace(0.0, 1.0, 41):
            exact = sb.exact_reduced_two_state(p, t).mat
            pert = lv.closed_form_spin(rs0, m.l_w[0], m.delta[0, 0], lam, 1.0, t).mat
            err = max(err, float(np.max(np.abs(exact - pert))))
        return err

    for lam_t in (0.05, 0.15):
        ratio = residual(lam_t) / residual(lam_t / 2)
        assert 5.0 <= ratio <= 12.0


# ---------------------------------------------------------------- burst schedule


def _product_burst(rng, n, lam=0.5, tau=0.04):
    parts1, parts2 = [], []
    for _ in range(n):
        while True:
            a1, b1 = _real_bath_pair(rng)
            a2, b2 = _real_bath_pair(rng)
            if abs(a1 * a2 + b1 * b2) >= 0.3:
                break
        parts1.append(np.array([a1, b1]))
        parts2.append(np.array([a2, b2]))
    return lv.burst_interaction(
        lam, tau, [SIGMA_Z] * n, lv.product_env_ket(parts1), lv.product_env_ket(parts2)
    )


def test_burst_rhs_midpoint_null():
    # at the window midpoint only the first-order term survives (product env)
    rng = np.random.default_rng(4)
    spec = _product_burst(rng, 6)
    m = lv.weak_moments(spec)
    mat = _generic_initial().mat
    for n in range(6):
        t_mid = (n + 0.5) * spec.tau
        rhs = lv.burst_rhs(t_mid, mat, spec, m)
        first = -1j * spec.lam * m.l_w[n] * (SIGMA_Z @ mat - mat @ SIGMA_Z)
        np.testing.assert_allclose(rhs, first, atol=1e-13)


def test_burst_rhs_time_domain_checked():
    rng = np.random.default_rng(5)
    spec = _product_burst(rng, 3)
    m = lv.weak_moments(spec)
    with pytest.raises(ValueError):
        lv.burst_rhs(3 * spec.tau + 1.0, np.eye(2, dtype=complex), spec, m)


def test_burst_integration_matches_windowed_closed_form():
    rng = np.random.default_rng(6)
    n = 10
    spec = _product_burst(rng, n, lam=0.5, tau=0.04)
    m = lv.weak_moments(spec)
    rs0 = _generic_initial()
    traj = lv.integrate(rs0, spec, steps=100 * n)

    def oracle_ud(t):
        k = min(int(np.floor(t / spec.tau + 1e-12)), n - 1)
        val = rs0.mat[0, 1]
        for j in range(k):
            val *= np.exp(-2j * spec.lam * m.l_w[j] * spec.tau)
        s = t - k * spec.tau
        val *= np.exp(-2j * spec.lam * m.l_w[k] * s - 2 * spec.lam**2 * m.delta[k, k] * s * (s - spec.tau))
        return val

    for idx in range(0, len(traj.times), 37):
        t = traj.times[idx]
        assert traj.states[idx].mat[0, 1] == pytest.approx(oracle_ud(t), abs=1e-10)


def test_burst_boundary_recoherence():
    rng = np.random.default_rng(7)
    n = 12
    lam, tau = 0.5, 0.04
    spec = _product_burst(rng, n, lam=lam, tau=tau)
    rs0 = _generic_initial()
    traj = lv.integrate(rs0, spec, steps=100 * n)
    bound = 5 * lam**2 * tau**2
    c0 = traj.coherence[0]
    per_window = len(traj.times) // n
    for k in range(n + 1):
        idx = k * per_window
        assert abs(traj.coherence[idx] - c0) < bound
        assert abs(traj.purity[idx] - 1.0) < bound
