"""Federated optimization protocols: FedCET, FedAvg, and SCAFFOLD.

FedCET clients keep their current and previous iterates together with the
gradients at both, and exchange a single n-dimensional vector per
communication round:

    payload_i(t) = 2 x_i(t) - x_i(t-1) - a g_i(t) + a g_i(t-1)

Between rounds each client iterates x_i(t+1) = payload_i(t) locally; at a
round boundary the server broadcasts the client average of the payloads
and every client mixes it into its own payload with weight c*a.  The
implicit correction term d(t) = (x(t-1) - x(t))/a - grad(t-1) is never
transmitted; it is reconstructed from the state history when telemetry
needs it.

FedAvg and SCAFFOLD are the reference baselines: FedAvg averages plain
local iterates, SCAFFOLD additionally exchanges control variates (twice
the traffic) to correct client drift.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import StackedState
from .errors import ConfigurationError, DivergenceError, InvariantError
from .linalg import as_stacked
from .losses import ClientLoss, FederatedProblem
from .lr_search import c_max

# iterates beyond this infinity norm abort the run
DIVERGENCE_INF_CAP = 1e12


@dataclass(frozen=True)
class HyperParams:
    """Protocol parameters with the feasibility constraints they must obey."""

    num_clients: int
    dim: int
    tau: int
    alpha: float
    c: float
    L: float
    mu: float

    def __post_init__(self):
        if self.num_clients < 1 or self.dim < 1:
            raise ConfigurationError("num_clients and dim must be positive")
        if self.tau < 1 or int(self.tau) != self.tau:
            raise ConfigurationError(f"tau must be a positive integer, got {self.tau}")
        if not (0 < self.mu <= self.L):
            raise ConfigurationError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if not self.alpha * self.L < 2.0 / self.tau:
            raise ConfigurationError(
                f"alpha*L = {self.alpha * self.L} must stay below 2/tau = {2.0 / self.tau}"
            )
        if not self.alpha * self.mu * self.tau < 1.0:
            raise ConfigurationError(
                f"tau*mu*alpha = {self.tau * self.mu * self.alpha} must stay below 1"
            )
        bound = c_max(self.alpha, self.mu)
        if not (0 < self.c <= bound):
            raise ConfigurationError(
                f"mixing weight c = {self.c} must lie in (0, {bound}]"
            )


@dataclass(frozen=True)
class FedCetClientState:
    """One client's protocol state at iteration t.

    Cached gradients always equal the loss gradient at the matching
    iterate.
    """

    x_curr: np.ndarray
    x_prev: np.ndarray
    g_curr: np.ndarray
    g_prev: np.ndarray
    t: int


@dataclass(frozen=True)
class UplinkMsg:
    """Single n-vector a client sends to the server in one round."""

    client_id: int
    payload: np.ndarray


@dataclass(frozen=True)
class DownlinkMsg:
    """Single n-vector the server broadcasts back: the payload average."""

    payload: np.ndarray


def local_payload(x_curr, x_prev, g_curr, g_prev, alpha: float) -> np.ndarray:
    """2 x(t) - x(t-1) - a g(t) + a g(t-1): both the local update and the
    uplink message."""
    return 2.0 * x_curr - x_prev - alpha * g_curr + alpha * g_prev


def mix_payloads(payload_mean, own_payload, c: float, alpha: float) -> np.ndarray:
    """Communication update: c*a * average + (1 - c*a) * own payload."""
    w = c * alpha
    return w * payload_mean + (1.0 - w) * own_payload


def _payload_mean(payloads) -> np.ndarray:
    # fixed client order 1..N so reductions are reproducible
    return np.add.reduce(payloads, axis=0) / len(payloads)


def fedcet_init(problem: FederatedProblem, hp: HyperParams, x_init) -> list[FedCetClientState]:
    """Bootstrap exchange producing every client's state at t = 0.

    Rows of x_init are the clients' initial points x_i(-2).  Each client
    first takes one plain gradient step to x_i(-1), then all payloads are
    averaged once and mixed exactly like a regular communication round.
    """
    X_m2 = as_stacked(x_init)
    if X_m2.shape != (hp.num_clients, hp.dim):
        raise ConfigurationError(
            f"x_init must be {(hp.num_clients, hp.dim)}, got {X_m2.shape}"
        )
    losses = problem.losses
    g_m2 = [losses[i].gradient(X_m2[i]) for i in range(hp.num_clients)]
    x_m1 = [X_m2[i] - hp.alpha * g_m2[i] for i in range(hp.num_clients)]
    g_m1 = [losses[i].gradient(x_m1[i]) for i in range(hp.num_clients)]
    payloads = [
        local_payload(x_m1[i], X_m2[i], g_m1[i], g_m2[i], hp.alpha)
        for i in range(hp.num_clients)
    ]
    mean = _payload_mean(payloads)
    states = []
    for i in range(hp.num_clients):
        x0 = mix_payloads(mean, payloads[i], hp.c, hp.alpha)
        states.append(
            FedCetClientState(
                x_curr=x0,
                x_prev=x_m1[i],
                g_curr=losses[i].gradient(x0),
                g_prev=g_m1[i],
                t=0,
            )
        )
    return states


def fedcet_local_step(state: FedCetClientState, loss: ClientLoss, alpha: float) -> FedCetClientState:
    """One local training iteration (no communication)."""
    x_next = local_payload(state.x_curr, state.x_prev, state.g_curr, state.g_prev, alpha)
    return FedCetClientState(
        x_curr=x_next,
        x_prev=state.x_curr,
        g_curr=loss.gradient(x_next),
        g_prev=state.g_curr,
        t=state.t + 1,
    )


def fedcet_comm_round(
    states: list[FedCetClientState], problem: FederatedProblem, hp: HyperParams
) -> tuple[list[FedCetClientState], list[UplinkMsg], DownlinkMsg]:
    """Communication iteration: collect payloads, broadcast the average,
    mix.  Valid only when the next iteration index is a multiple of tau."""
    t = states[0].t
    if (t + 1) % hp.tau != 0:
        raise InvariantError(f"communication attempted at iteration {t}, tau={hp.tau}")
    payloads = [
        local_payload(s.x_curr, s.x_prev, s.g_curr, s.g_prev, hp.alpha) for s in states
    ]
    uplinks = [UplinkMsg(client_id=i, payload=p) for i, p in enumerate(payloads)]
    down = DownlinkMsg(payload=_payload_mean(payloads))
    new_states = []
    for i, s in enumerate(states):
        x_next = mix_payloads(down.payload, payloads[i], hp.c, hp.alpha)
        new_states.append(
            FedCetClientState(
                x_curr=x_next,
                x_prev=s.x_curr,
                g_curr=problem.losses[i].gradient(x_next),
                g_prev=s.g_curr,
                t=s.t + 1,
            )
        )
    return new_states, uplinks, down


def fedcet_advance(states, problem, hp):
    """Advance all clients by one iteration, communicating when scheduled.

    Returns (states, uplinks, downlink); the messages are None on local
    iterations.
    """
    t = states[0].t
    if (t + 1) % hp.tau == 0:
        return fedcet_comm_round(states, problem, hp)
    new_states = [
        fedcet_local_step(s, problem.losses[i], hp.alpha) for i, s in enumerate(states)
    ]
    return new_states, None, None


def stacked_x(states) -> np.ndarray:
    return np.stack([s.x_curr for s in states])


def stacked_d(states, alpha: float) -> np.ndarray:
    """Reconstruct the implicit correction d(t) from the state history."""
    return np.stack([(s.x_prev - s.x_curr) / alpha - s.g_prev for s in states])


def _check_divergence(X):
    if np.max(np.abs(X)) > DIVERGENCE_INF_CAP:
        raise DivergenceError(
            f"iterate infinity norm exceeded {DIVERGENCE_INF_CAP:g}"
        )


def fedcet_round(states, problem, hp):
    """Run tau iterations: tau - 1 local steps, then one communication."""
    for _ in range(hp.tau - 1):
        states, _, _ = fedcet_advance(states, problem, hp)
    states, uplinks, down = fedcet_advance(states, problem, hp)
    _check_divergence(stacked_x(states))
    return states, uplinks, down


def fedcet_run(problem, hp, x_init, rounds: int) -> list[StackedState]:
    """Bootstrap plus `rounds` communication rounds.

    Returns the trace of round-boundary snapshots: entry k holds x(tau*k)
    and the reconstructed d(tau*k).
    """
    if rounds < 1:
        raise ConfigurationError(f"rounds must be >= 1, got {rounds}")
    states = fedcet_init(problem, hp, x_init)
    trace = [StackedState(X=stacked_x(states), D=stacked_d(states, hp.alpha), t=0)]
    for _ in range(rounds):
        states, _, _ = fedcet_round(states, problem, hp)
        trace.append(
            StackedState(X=stacked_x(states), D=stacked_d(states, hp.alpha), t=states[0].t)
        )
    return trace


# ---------------------------------------------------------------------------
# FedAvg baseline


def fedavg_round(x, problem: FederatedProblem, tau: int, alpha_local: float):
    """One FedAvg round: broadcast x, tau plain local steps per client,
    average the endpoints.

    Returns (new server model, stacked local endpoints).
    """
    endpoints = np.empty((problem.num_clients, problem.dim))
    for i, loss in enumerate(problem.losses):
        y = np.array(x, dtype=float)
        for _ in range(tau):
            y = y - alpha_local * loss.gradient(y)
        endpoints[i] = y
    x_new = np.add.reduce(endpoints, axis=0) / problem.num_clients
    _check_divergence(x_new)
    return x_new, endpoints


def fedavg_round_map(problem: FederatedProblem, tau: int, alpha_local: float):
    """The affine map x -> Gamma x + v implemented by one FedAvg round.

    Built by probing the round with basis vectors; exact for quadratic
    losses.
    """
    n = problem.dim
    v, _ = fedavg_round(np.zeros(n), problem, tau, alpha_local)
    Gamma = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        col, _ = fedavg_round(e, problem, tau, alpha_local)
        Gamma[:, j] = col - v
    return Gamma, v


def fedavg_fixed_point(problem, tau, alpha_local):
    """Fixed point of the FedAvg round map and the map's spectral radius.

    The fixed point is where FedAvg plateaus; the spectral radius must be
    below one for the plateau to be attracting.
    """
    Gamma, v = fedavg_round_map(problem, tau, alpha_local)
    radius = float(np.max(np.abs(np.linalg.eigvals(Gamma))))
    x_fix = np.linalg.solve(np.eye(problem.dim) - Gamma, v)
    return x_fix, radius


def default_fedavg_lr(L: float, tau: int) -> float:
    """Conventional stable local rate 1/(2 tau L)."""
    return 1.0 / (2.0 * tau * L)


# ---------------------------------------------------------------------------
# SCAFFOLD baseline (control-variate form)


@dataclass(frozen=True)
class ScaffoldState:
    """Server model/control plus per-client controls.

    The client average of the controls equals the server control after
    every round.
    """

    x: np.ndarray
    control: np.ndarray
    client_controls: np.ndarray
    alpha_g: float
    alpha_l: float


def default_scaffold_lrs(L: float, tau: int) -> tuple[float, float]:
    """Baseline global and local rates: alpha_g = 1, alpha_l = 1/(81 tau L)."""
    return 1.0, 1.0 / (81.0 * tau * L)


def scaffold_init(problem: FederatedProblem, tau: int,
                  alpha_g: float | None = None, alpha_l: float | None = None,
                  x0=None) -> ScaffoldState:
    L, _ = problem.constants()
    g_default, l_default = default_scaffold_lrs(L, tau)
    x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
    return ScaffoldState(
        x=x,
        control=np.zeros(problem.dim),
        client_controls=np.zeros((problem.num_clients, problem.dim)),
        alpha_g=g_default if alpha_g is None else float(alpha_g),
        alpha_l=l_default if alpha_l is None else float(alpha_l),
    )


def scaffold_round(state: ScaffoldState, problem: FederatedProblem, tau: int) -> ScaffoldState:
    """One SCAFFOLD round.

    Clients run tau corrected steps y <- y - a_l*(grad_i(y) - c_i + c),
    update controls c_i+ = c_i - c + (x - y)/(tau a_l), and the server
    aggregates x <- x + a_g*mean(dy), c <- c + mean(dc).
    """
    N, n = problem.num_clients, problem.dim
    x, c = state.x, state.control
    a_l = state.alpha_l
    delta_y = np.empty((N, n))
    delta_c = np.empty((N, n))
    new_controls = np.empty((N, n))
    for i, loss in enumerate(problem.losses):
        ci = state.client_controls[i]
        y = np.array(x, dtype=float)
        for _ in range(tau):
            y = y - a_l * (loss.gradient(y) - ci + c)
        ci_plus = ci - c + (x - y) / (tau * a_l)
        delta_y[i] = y - x
        delta_c[i] = ci_plus - ci
        new_controls[i] = ci_plus
    x_new = x + state.alpha_g * (np.add.reduce(delta_y, axis=0) / N)
    c_new = c + np.add.reduce(delta_c, axis=0) / N
    _check_divergence(x_new)
    return replace(state, x=x_new, control=c_new, client_controls=new_controls)
