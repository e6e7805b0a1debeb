"""Matrix-form dynamics: the independent verification layer.

The per-client protocol is equivalent to the stacked recursion

    d(t+1) = d(t) + c (I - W(t+1)) { x(t) - a grad(t) - a d(t) }
    x(t+1) = x(t) - a grad(t) - a d(t+1)

where W(t+1) is the averaging matrix (1/N) 11^T at communication
iterations (t+1 a multiple of tau) and the identity otherwise.  This
module implements that recursion, the round-level map with its A(k)/B(k)
correction terms, fixed-point residuals, and the Lyapunov contraction
monitor.  None of it shares code with the per-client protocol path, so
agreement between the two is a real consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvariantError
from .linalg import as_stacked, center_project, frob_norm, row_mean
from .losses import FederatedProblem

# tolerated infinity norm of the client mean of d - d* in the Lyapunov
# evaluation; a violation means the input was not produced by the protocol
_CENTERED_TOL = 1e-9


@dataclass(frozen=True)
class StackedState:
    """Stacked iterates x(t) and correction d(t) at iteration t."""

    X: np.ndarray
    D: np.ndarray
    t: int


@dataclass(frozen=True)
class FixedPoint:
    """Stationary pair: consensus rows x* and d* = -grad(x*)."""

    problem: FederatedProblem
    xstar: np.ndarray
    Xstar: np.ndarray
    Dstar: np.ndarray

    @classmethod
    def for_problem(cls, problem: FederatedProblem, xstar=None) -> "FixedPoint":
        xs = problem.optimum() if xstar is None else np.asarray(xstar, dtype=float)
        Xstar = np.tile(xs, (problem.num_clients, 1))
        Dstar = -problem.stacked_gradient(Xstar)
        return cls(problem=problem, xstar=xs, Xstar=Xstar, Dstar=Dstar)


@dataclass(frozen=True)
class LyapunovSample:
    """Round-indexed value of the contraction function V = term_x + term_d."""

    k: int
    V: float
    term_x: float
    term_d: float


def initial_stacked_state(problem, hp, x_init) -> StackedState:
    """Matrix-form bootstrap from the initial rows x(-2) to (x(0), d(0)).

    x(-1) is one plain gradient step, d(-1) = 0, and the first
    communication produces d(0) and x(0).
    """
    X_m2 = as_stacked(x_init)
    G_m2 = problem.stacked_gradient(X_m2)
    X_m1 = X_m2 - hp.alpha * G_m2
    G_m1 = problem.stacked_gradient(X_m1)
    inner = X_m1 - hp.alpha * G_m1
    D0 = hp.c * center_project(inner)
    X0 = inner - hp.alpha * D0
    return StackedState(X=X0, D=D0, t=0)


def oracle_step(s: StackedState, problem, hp) -> StackedState:
    """One iteration of the stacked recursion.

    On non-communication iterations the correction is unchanged.
    """
    grads = problem.stacked_gradient(s.X)
    inner = s.X - hp.alpha * grads - hp.alpha * s.D
    if (s.t + 1) % hp.tau == 0:
        D_new = s.D + hp.c * center_project(inner)
    else:
        D_new = s.D
    X_new = s.X - hp.alpha * grads - hp.alpha * D_new
    return StackedState(X=X_new, D=D_new, t=s.t + 1)


def round_terms(s: StackedState, problem, hp):
    """Round map from t = tau*k to t = tau*(k+1) with its correction terms.

    A(k) collects the drift of the intermediate gradients relative to the
    round-start gradient; B(k) is (tau-1)*a times the correction change.
    The intermediate gradients are obtained by unrolling the
    non-communication iterations internally.

    Returns (A, B, next_state).
    """
    if hp.tau < 1:
        raise ConfigurationError("tau must be positive")
    if s.t % hp.tau != 0:
        raise InvariantError(f"round map applied off a round boundary, t={s.t}")
    alpha, tau, c = hp.alpha, hp.tau, hp.c
    g0 = problem.stacked_gradient(s.X)

    A = (tau - 1) * alpha * g0
    x_h, g_h = s.X, g0
    for _ in range(1, tau):
        x_h = x_h - alpha * g_h - alpha * s.D
        g_h = problem.stacked_gradient(x_h)
        A = A - alpha * g_h

    D_new = s.D + c * center_project(s.X - tau * alpha * g0 - tau * alpha * s.D + A)
    B = (tau - 1) * alpha * (D_new - s.D)
    X_new = s.X - tau * alpha * g0 - tau * alpha * D_new + A + B
    return A, B, StackedState(X=X_new, D=D_new, t=s.t + tau)


def oracle_round(s: StackedState, problem, hp) -> StackedState:
    """Advance one full round via the round-level recursion."""
    _, _, nxt = round_terms(s, problem, hp)
    return nxt


def fixed_point_residual(s: StackedState, fp: FixedPoint) -> tuple[float, float]:
    """The two stationarity residuals of a stacked state.

    r_consensus = ||center_project(X)||, the disagreement across clients;
    r_gradient  = ||D + grad(X)||, how far the correction is from
    cancelling the stacked gradient.  Both vanish exactly at the fixed
    point.
    """
    r_consensus = frob_norm(center_project(s.X))
    r_gradient = frob_norm(s.D + fp.problem.stacked_gradient(s.X))
    return r_consensus, r_gradient


def lyapunov_weight_d(hp) -> float:
    """Eigenvalue of the correction weight M1 on the centered subspace:
    1/c - a + (1 - tau*mu*a) * tau*a."""
    return 1.0 / hp.c - hp.alpha + (1.0 - hp.tau * hp.mu * hp.alpha) * hp.tau * hp.alpha


def lyapunov(s: StackedState, fp: FixedPoint, hp) -> LyapunovSample:
    """Evaluate the round-level contraction function at a round boundary.

    V = (1 - tau*mu*a) * ||X - X*||^2 / (tau*a)  +  m1 * ||D - D*||^2

    where m1 is the centered-subspace eigenvalue of the correction weight.
    D - D* must have zero client mean (it always does along the protocol),
    which is what lets the weight act as a plain scalar.
    """
    w_x = 1.0 - hp.tau * hp.mu * hp.alpha
    if not w_x > 0:
        raise ConfigurationError(
            f"Lyapunov weights need tau*mu*alpha < 1, got {hp.tau * hp.mu * hp.alpha}"
        )
    Dd = s.D - fp.Dstar
    if np.max(np.abs(row_mean(Dd))) > _CENTERED_TOL:
        raise InvariantError("correction deviation d - d* is not centered")
    term_x = w_x * float(np.sum((s.X - fp.Xstar) ** 2)) / (hp.tau * hp.alpha)
    term_d = lyapunov_weight_d(hp) * float(np.sum(Dd**2))
    return LyapunovSample(k=s.t // hp.tau, V=term_x + term_d, term_x=term_x, term_d=term_d)


def convergence_error(s: StackedState, xstar) -> float:
    """e(k) = || client mean of X - x* ||, the benchmark error metric."""
    return float(np.linalg.norm(row_mean(s.X) - np.asarray(xstar, dtype=float)))
