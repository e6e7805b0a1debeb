import numpy as np
import pytest

from fedcet.algorithms import HyperParams
from fedcet.data import gen_data
from fedcet.dynamics import (
    FixedPoint,
    StackedState,
    convergence_error,
    fixed_point_residual,
    initial_stacked_state,
    lyapunov,
    oracle_round,
    oracle_step,
    round_terms,
)
from fedcet.errors import ConfigurationError, InvariantError
from fedcet.lr_search import c_max, search_with_fraction
from fedcet.verification import round_map_deviation, scalar_vs_matrix_deviation


def small_setup(tau=2, seed=9, N=4, n=5):
    problem = gen_data(N, 3, n, -10, 10, seed)
    alpha, report = search_with_fraction(4, 4, tau, 0.01)
    hp = HyperParams(num_clients=N, dim=n, tau=tau, alpha=alpha, c=report.c_max,
                     L=4.0, mu=4.0)
    return problem, hp, FixedPoint.for_problem(problem)


def test_fixed_point_is_stationary_under_steps():
    problem, hp, fp = small_setup()
    s = StackedState(X=fp.Xstar, D=fp.Dstar, t=0)
    for _ in range(2 * hp.tau):
        s = oracle_step(s, problem, hp)
        np.testing.assert_array_equal(s.X, fp.Xstar)
        np.testing.assert_array_equal(s.D, fp.Dstar)


def test_fixed_point_is_stationary_under_round_map():
    problem, hp, fp = small_setup()
    s = oracle_round(StackedState(X=fp.Xstar, D=fp.Dstar, t=0), problem, hp)
    np.testing.assert_allclose(s.X, fp.Xstar, rtol=0, atol=1e-14)
    np.testing.assert_allclose(s.D, fp.Dstar, rtol=0, atol=1e-14)


def test_non_communication_step_structure():
    problem, hp, _ = small_setup(tau=3)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(4, 5))
    D = rng.normal(size=(4, 5))
    D -= D.mean(axis=0, keepdims=True)
    s = StackedState(X=X, D=D, t=0)  # next iteration 1 is not a multiple of 3
    nxt = oracle_step(s, problem, hp)
    np.testing.assert_array_equal(nxt.D, D)
    grads = problem.stacked_gradient(X)
    np.testing.assert_array_equal(nxt.X, X - hp.alpha * grads - hp.alpha * D)


def test_scalar_and_matrix_paths_agree():
    problem, hp, _ = small_setup()
    dev = scalar_vs_matrix_deviation(problem, hp, np.zeros((4, 5)), 200)
    assert dev <= 1e-10


def test_round_map_matches_unrolled_steps():
    for tau in (1, 2, 4):
        problem, hp, _ = small_setup(tau=tau)
        dev = round_map_deviation(problem, hp, np.zeros((4, 5)), rounds=40)
        assert dev <= 1e-10


def test_round_map_tau_one_has_no_correction_terms():
    problem, hp, _ = small_setup(tau=1)
    s = initial_stacked_state(problem, hp, np.zeros((4, 5)))
    A, B, nxt = round_terms(s, problem, hp)
    np.testing.assert_array_equal(A, np.zeros((4, 5)))
    np.testing.assert_array_equal(B, np.zeros((4, 5)))
    np.testing.assert_array_equal(nxt.X, oracle_step(s, problem, hp).X)


def test_round_map_rejects_off_boundary_states():
    problem, hp, _ = small_setup(tau=2)
    s = initial_stacked_state(problem, hp, np.zeros((4, 5)))
    s = oracle_step(s, problem, hp)  # now t = 1, off the round boundary
    with pytest.raises(InvariantError):
        round_terms(s, problem, hp)


def test_fixed_point_residuals():
    problem, hp, fp = small_setup()
    s = StackedState(X=fp.Xstar, D=fp.Dstar, t=0)
    r_cons, r_grad = fixed_point_residual(s, fp)
    assert r_cons <= 1e-12 and r_grad <= 1e-12

    # perturbing client i by delta * e_i scales the consensus residual
    # linearly in delta
    rs = []
    for delta in (1e-3, 1e-2):
        X = fp.Xstar.copy()
        for i in range(X.shape[0]):
            X[i, i % X.shape[1]] += delta
        rs.append(fixed_point_residual(StackedState(X=X, D=fp.Dstar, t=0), fp)[0])
    assert rs[1] / rs[0] == pytest.approx(10.0, rel=1e-6)


def test_lyapunov_at_fixed_point_and_scaling():
    problem, hp, fp = small_setup()
    at_fp = lyapunov(StackedState(X=fp.Xstar, D=fp.Dstar, t=0), fp, hp)
    assert at_fp.V <= 1e-20
    assert at_fp.term_x == 0.0 and at_fp.term_d == 0.0

    rng = np.random.default_rng(1)
    U = rng.normal(size=fp.Xstar.shape)
    v1 = lyapunov(StackedState(X=fp.Xstar + U, D=fp.Dstar, t=0), fp, hp)
    v2 = lyapunov(StackedState(X=fp.Xstar + 2.0 * U, D=fp.Dstar, t=0), fp, hp)
    assert v2.V == pytest.approx(4.0 * v1.V, rel=1e-12)
    assert v1.term_d == 0.0 and v1.V == v1.term_x + v1.term_d


def test_lyapunov_rejects_uncentered_correction():
    problem, hp, fp = small_setup()
    D_bad = fp.Dstar + 1e-6  # constant offset shifts the client mean
    with pytest.raises(InvariantError):
        lyapunov(StackedState(X=fp.Xstar, D=D_bad, t=0), fp, hp)


def test_lyapunov_needs_valid_weights():
    problem, hp, fp = small_setup()
    bad = HyperParams(num_clients=hp.num_clients, dim=hp.dim, tau=hp.tau,
                      alpha=0.124, c=c_max(0.124, 4.0), L=4.0, mu=4.0)
    # tau*mu*alpha = 0.992 < 1 passes construction; push it over by hand
    s = StackedState(X=fp.Xstar, D=fp.Dstar, t=0)
    assert lyapunov(s, fp, bad).V <= 1e-18
    object.__setattr__(bad, "alpha", 0.2)
    with pytest.raises(ConfigurationError):
        lyapunov(s, fp, bad)


def test_convergence_error_cases():
    problem, hp, fp = small_setup()
    assert convergence_error(StackedState(X=fp.Xstar, D=fp.Dstar, t=0), fp.xstar) == 0.0

    # paired +/- v rows cancel in the mean despite disagreement
    v = np.ones(5)
    X = np.stack([fp.xstar + v, fp.xstar - v, fp.xstar + v, fp.xstar - v])
    err = convergence_error(StackedState(X=X, D=fp.Dstar, t=0), fp.xstar)
    assert err <= 1e-14
    r_cons, _ = fixed_point_residual(StackedState(X=X, D=fp.Dstar, t=0), fp)
    assert r_cons > 1.0  # the consensus residual still exposes the spread


def test_stationary_centered_state_is_the_optimum():
    """A protocol-reachable (centered-d) state that is stationary under a
    full round sits at the exact optimum."""
    problem, hp, fp = small_setup()
    s = initial_stacked_state(problem, hp, np.zeros((4, 5)))
    for _ in range(600):
        s = oracle_round(s, problem, hp)
    nxt = oracle_round(s, problem, hp)
    assert np.max(np.abs(nxt.X - s.X)) <= 1e-12  # settled
    r_cons, r_grad = fixed_point_residual(s, fp)
    assert r_cons < 1e-10 and r_grad < 1e-10
    assert np.max(np.abs(s.D.mean(axis=0))) <= 1e-12
    assert convergence_error(s, fp.xstar) < 1e-8


def test_uncentered_pseudo_fixed_point_is_rejected():
    """Consensus rows y with d = -grad(y) are stationary for ANY y, but for
    y != x* that d has a nonzero client mean, which the protocol can never
    produce (d starts at zero and every update is mean-free).  The Lyapunov
    monitor refuses such states."""
    problem, hp, fp = small_setup()
    y = fp.xstar + 0.5
    X = np.tile(y, (4, 1))
    D = -problem.stacked_gradient(X)
    s = StackedState(X=X, D=D, t=0)
    nxt = oracle_step(oracle_step(s, problem, hp), problem, hp)
    assert np.max(np.abs(nxt.X - X)) <= 1e-12
    assert np.max(np.abs(nxt.D - D)) <= 1e-12
    assert np.max(np.abs(D.mean(axis=0))) > 1e-3  # not protocol-reachable
    with pytest.raises(InvariantError):
        lyapunov(s, fp, hp)


def test_initial_stacked_state_matches_protocol_bootstrap():
    problem, hp, _ = small_setup()
    from fedcet.algorithms import fedcet_init, stacked_d, stacked_x

    s = initial_stacked_state(problem, hp, np.zeros((4, 5)))
    states = fedcet_init(problem, hp, np.zeros((4, 5)))
    assert np.max(np.abs(s.X - stacked_x(states))) <= 1e-12
    assert np.max(np.abs(s.D - stacked_d(states, hp.alpha))) <= 1e-12
    assert np.max(np.abs(s.D.mean(axis=0))) <= 1e-13
