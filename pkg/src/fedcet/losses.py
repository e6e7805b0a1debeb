"""Client loss functions and the federated problem container.

Every client loss is L-smooth and mu-strongly-convex.  The concrete
instance used by the benchmark experiment is the regularized quadratic
empirical risk

    f_i(x) = (1/n_i) sum_j ||x - b_ij||^2 + ||x||^2

whose gradient is 4x - 2*mean_j(b_ij) and whose smoothness and strong
convexity constants are both 4.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, InputError, InvariantError, UnsupportedLossError
from .linalg import as_stacked, as_vector


class ClientLoss:
    """Base class: a smooth strongly convex local objective.

    Subclasses implement value() and gradient().  The declared constants
    must satisfy 0 < strong_convexity <= smoothness.
    """

    def __init__(self, smoothness: float, strong_convexity: float):
        L, mu = float(smoothness), float(strong_convexity)
        if not (0 < mu <= L):
            raise InvariantError(
                f"need 0 < strong_convexity <= smoothness, got mu={mu}, L={L}"
            )
        self.smoothness = L
        self.strong_convexity = mu

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class CallableLoss(ClientLoss):
    """Loss defined by user-supplied value/gradient callables."""

    def __init__(self, value_fn, gradient_fn, smoothness, strong_convexity):
        super().__init__(smoothness, strong_convexity)
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn

    def value(self, x):
        return float(self._value_fn(as_vector(x)))

    def gradient(self, x):
        return np.asarray(self._gradient_fn(as_vector(x)), dtype=float)


class QuadraticRisk(ClientLoss):
    """Regularized quadratic empirical risk over local targets b_ij.

    targets has shape (n_i, n); row j is one sample.  value and gradient
    are exact, smoothness = strong_convexity = 4.
    """

    def __init__(self, targets):
        B = as_stacked(targets)
        super().__init__(smoothness=4.0, strong_convexity=4.0)
        self.targets = B
        self.target_mean = B.mean(axis=0)
        self.dim = B.shape[1]

    def value(self, x):
        v = as_vector(x)
        if v.size != self.dim:
            raise DimensionError(f"expected dim {self.dim}, got {v.size}")
        fit = np.mean(np.sum((v[None, :] - self.targets) ** 2, axis=1))
        return float(fit + v @ v)

    def gradient(self, x):
        v = as_vector(x)
        if v.size != self.dim:
            raise DimensionError(f"expected dim {self.dim}, got {v.size}")
        return 4.0 * v - 2.0 * self.target_mean


class FederatedProblem:
    """N client losses sharing one decision variable of dimension dim."""

    def __init__(self, losses, dim: int):
        if not losses:
            raise InputError("need at least one client loss")
        self.losses = list(losses)
        self.num_clients = len(self.losses)
        self.dim = int(dim)

    def value(self, x) -> float:
        v = as_vector(x)
        return sum(l.value(v) for l in self.losses) / self.num_clients

    def gradient(self, x) -> np.ndarray:
        """Gradient of the global objective (client average) at a shared x."""
        v = as_vector(x)
        g = np.zeros(self.dim)
        for loss in self.losses:
            g += loss.gradient(v)
        return g / self.num_clients

    def stacked_gradient(self, X) -> np.ndarray:
        """Row i of the result is client i's gradient at row i of X."""
        M = as_stacked(X)
        if M.shape[0] != self.num_clients:
            raise DimensionError(
                f"expected {self.num_clients} rows, got {M.shape[0]}"
            )
        return np.stack([l.gradient(M[i]) for i, l in enumerate(self.losses)])

    def constants(self) -> tuple[float, float]:
        """Global (L, mu): worst smoothness and worst strong convexity."""
        L = max(l.smoothness for l in self.losses)
        mu = min(l.strong_convexity for l in self.losses)
        return L, mu

    def closed_form_optimum(self) -> np.ndarray:
        """Exact minimizer, available when every client is a QuadraticRisk.

        Stationarity of the averaged quadratic gives
        x* = (1/(2N)) sum_i mean_j(b_ij).
        """
        if not all(isinstance(l, QuadraticRisk) for l in self.losses):
            raise UnsupportedLossError(
                "closed-form optimum requires QuadraticRisk on every client"
            )
        acc = np.zeros(self.dim)
        for loss in self.losses:
            acc += loss.target_mean
        return acc / (2.0 * self.num_clients)

    def optimum(self, gd_steps: int = 100_000) -> np.ndarray:
        """Minimizer of the global objective.

        Closed form for all-quadratic problems, otherwise a long plain
        gradient-descent solve.
        """
        try:
            return self.closed_form_optimum()
        except UnsupportedLossError:
            return minimize_by_gradient_descent(self, steps=gd_steps)


def minimize_by_gradient_descent(
    problem: FederatedProblem, steps: int = 100_000, x0=None
) -> np.ndarray:
    """Plain gradient descent on the global objective with step 1/(2L).

    Serves as the generic-loss optimum and as an independent check of the
    closed form on quadratics.
    """
    L, _ = problem.constants()
    step = 1.0 / (2.0 * L)
    x = np.zeros(problem.dim) if x0 is None else as_vector(x0).copy()
    for _ in range(steps):
        x = x - step * problem.gradient(x)
    return x


def finite_difference_gradient(loss: ClientLoss, x, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient, an oracle independent of loss.gradient."""
    v = as_vector(x)
    g = np.empty_like(v)
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = step
        g[k] = (loss.value(v + e) - loss.value(v - e)) / (2.0 * step)
    return g
