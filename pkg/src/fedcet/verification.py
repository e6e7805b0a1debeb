"""Cross-checks between the per-client protocol and the matrix-form
dynamics, and the inequality monitors used by the verification suite.

These run the two implementations side by side and report worst-case
deviations; they are what the `oracle-check` CLI command executes.
"""

from __future__ import annotations

import numpy as np

from . import algorithms as alg
from .dynamics import FixedPoint, initial_stacked_state, oracle_step, round_terms
from .lr_search import growth_factor


def scalar_vs_matrix_deviation(problem, hp, x_init, num_iterations: int) -> float:
    """Max infinity-norm gap between protocol and matrix-form iterates.

    Both paths start from the same initial rows x(-2), run their own
    bootstrap, and advance iteration by iteration for num_iterations
    steps.  The gap covers x(t) at every t and the correction d(t) at
    round boundaries.
    """
    states = alg.fedcet_init(problem, hp, x_init)
    s = initial_stacked_state(problem, hp, x_init)
    dev = max(
        float(np.max(np.abs(alg.stacked_x(states) - s.X))),
        float(np.max(np.abs(alg.stacked_d(states, hp.alpha) - s.D))),
    )
    for _ in range(num_iterations):
        states, _, _ = alg.fedcet_advance(states, problem, hp)
        s = oracle_step(s, problem, hp)
        dev = max(dev, float(np.max(np.abs(alg.stacked_x(states) - s.X))))
        if s.t % hp.tau == 0:
            dev = max(
                dev, float(np.max(np.abs(alg.stacked_d(states, hp.alpha) - s.D)))
            )
    return dev


def round_map_deviation(problem, hp, x_init, rounds: int) -> float:
    """Max gap between the round-level map and tau unrolled iterations.

    Advances along the unrolled path and applies the round map from each
    boundary, comparing both x and d after every round.
    """
    s = initial_stacked_state(problem, hp, x_init)
    dev = 0.0
    for _ in range(rounds):
        _, _, via_round = round_terms(s, problem, hp)
        stepped = s
        for _ in range(hp.tau):
            stepped = oracle_step(stepped, problem, hp)
        dev = max(
            dev,
            float(np.max(np.abs(via_round.X - stepped.X))),
            float(np.max(np.abs(via_round.D - stepped.D))),
        )
        s = stepped
    return dev


def drift_bound_terms(s, problem, hp, fp: FixedPoint):
    """Both sides of the per-round bound on the correction terms.

    The squared (tau*a*I)^-1 norm of A(k) + B(k) is bounded by

        2*a*tau*||d(k+1)-d(k)||^2 + B1*L^4*a^3*||x(k)-x*||^2
                                  + B1*L^2*a^3*||d(k)-d*||^2

    with B1 = tau^3 * (1 + 2/tau)^(2*tau-2).  Returns (lhs, rhs,
    next_state).
    """
    A, B, nxt = round_terms(s, problem, hp)
    alpha, tau = hp.alpha, hp.tau
    lhs = float(np.sum((A + B) ** 2)) / (tau * alpha)
    B1 = tau**3 * growth_factor(tau)
    rhs = (
        2.0 * alpha * tau * float(np.sum((nxt.D - s.D) ** 2))
        + B1 * hp.L**4 * alpha**3 * float(np.sum((s.X - fp.Xstar) ** 2))
        + B1 * hp.L**2 * alpha**3 * float(np.sum((s.D - fp.Dstar) ** 2))
    )
    return lhs, rhs, nxt
