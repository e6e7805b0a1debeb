"""Learning-rate search and linear-rate predictors.

The admissible learning rate for the single-variable protocol is found by
a linear scan: start strictly below a closed-form initial bound, increase
by a fixed stepsize h while two scalar feasibility guards hold, and return
the last value that passed.  The guards are algebraically equivalent to
the requirement that both contraction factors of the round-level Lyapunov
analysis stay below one, so the returned rate certifies linear
convergence.

Throughout, E(tau) = (1 + 2/tau)^(2*tau - 2) and B2 = tau^2 * E(tau).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, InputError


def growth_factor(tau: int) -> float:
    """E(tau) = (1 + 2/tau)^(2*tau - 2), the local-drift growth constant."""
    if tau < 1:
        raise InputError(f"tau must be a positive integer, got {tau}")
    return (1.0 + 2.0 / tau) ** (2 * tau - 2)


def initial_bound(mu: float, L: float, tau: int) -> float:
    """Exclusive upper bound for the scan's starting learning rate.

    min of 1/(2 tau L), mu^2/(2 tau E L^3), mu/(5 tau E L^2).
    """
    if mu <= 0 or L <= 0:
        raise InputError(f"constants must be positive, got mu={mu}, L={L}")
    E = growth_factor(tau)
    return min(
        1.0 / (2.0 * tau * L),
        mu**2 / (2.0 * tau * E * L**3),
        mu / (5.0 * tau * E * L**2),
    )


def condition_c1(alpha: float, mu: float, L: float, tau: int) -> bool:
    """First scan guard: 1 - tau*mu*a + tau*L^2*(tau*a - 2/mu)*E*a > 0."""
    E = growth_factor(tau)
    return 1.0 - tau * mu * alpha + tau * L**2 * (tau * alpha - 2.0 / mu) * E * alpha > 0.0


def condition_c2(alpha: float, mu: float, L: float, tau: int) -> bool:
    """Second scan guard:
    (1 - tau*L*a)*tau*mu*a + tau^3*L^4*(tau*a - 2/mu)*E*a^3 > 0.
    """
    E = growth_factor(tau)
    return (
        (1.0 - tau * L * alpha) * tau * mu * alpha
        + tau**3 * L**4 * (tau * alpha - 2.0 / mu) * E * alpha**3
        > 0.0
    )


def c_max(alpha: float, mu: float) -> float:
    """Largest admissible mixing weight: mu / (2*mu*alpha + 8)."""
    if alpha < 0:
        raise InputError(f"alpha must be nonnegative, got {alpha}")
    return mu / (2.0 * mu * alpha + 8.0)


def rho1(alpha: float, mu: float, L: float, tau: int) -> float:
    """Contraction factor of the model-error term of the Lyapunov pair.

    Meaningful as a rate only where 1 - tau*mu*alpha > 0; at any rate
    accepted by the scan this holds automatically.
    """
    B2 = tau**2 * growth_factor(tau)
    s = tau * mu * alpha
    num = 1.0 - (2.0 - tau * alpha * L) * s + (2.0 / s - 1.0) * B2 * tau**2 * alpha**4 * L**4
    return num / (1.0 - s)


def rho2(alpha: float, mu: float, L: float, tau: int, c: float | None = None) -> float:
    """Contraction factor of the correction-error term of the Lyapunov pair.

    Uses lam_max = 1/c - alpha, the eigenvalue of the correction weight on
    the centered subspace.  c defaults to c_max(alpha, mu), matching the
    protocol's default mixing weight.
    """
    if c is None:
        c = c_max(alpha, mu)
    B2 = tau**2 * growth_factor(tau)
    s = tau * mu * alpha
    lam = 1.0 / c - alpha
    num = lam + (2.0 / s - 1.0) * B2 * alpha**2 * L**2 * tau * alpha
    den = lam + (1.0 - s) * tau * alpha
    return num / den


def contraction_margins(alpha: float, mu: float, L: float, tau: int) -> tuple[float, float]:
    """Denominator-free margins of the two linear-rate requirements.

    margin_x > 0 iff the model-error term contracts and margin_d > 0 iff
    the correction-error term contracts; they agree in sign with the scan
    guards everywhere, and with (1 - rho1), (1 - rho2) wherever those
    quotients are valid rates.
    """
    B2 = tau**2 * growth_factor(tau)
    s = tau * mu * alpha
    margin_x = s * (1.0 - tau * L * alpha) - (2.0 / s - 1.0) * B2 * tau**2 * L**4 * alpha**4
    margin_d = (1.0 - s) - (2.0 / s - 1.0) * B2 * L**2 * alpha**2
    return margin_x, margin_d


@dataclass(frozen=True)
class SearchConfig:
    """Inputs of the learning-rate scan.

    h is the absolute scan stepsize.  alpha0 overrides the starting rate
    and must stay strictly below initial_bound(mu, L, tau); by default the
    scan starts at 0.999 times that bound.
    """

    mu: float
    L: float
    tau: int
    h: float
    alpha0: float | None = None

    def __post_init__(self):
        if self.mu <= 0 or self.L <= 0:
            raise ConfigurationError("mu and L must be positive")
        if self.mu > self.L:
            raise ConfigurationError("mu must not exceed L")
        if self.tau < 1 or int(self.tau) != self.tau:
            raise ConfigurationError("tau must be a positive integer")
        if not self.h > 0:
            raise ConfigurationError("search stepsize h must be positive")


@dataclass(frozen=True)
class RateReport:
    """Resolved learning rate with its certified contraction factors."""

    alpha: float
    rho1: float
    rho2: float
    rho: float
    c_max: float


def search(cfg: SearchConfig) -> tuple[float, RateReport]:
    """Run the learning-rate scan and report the certified rate.

    Starting from alpha0, increase by h while both guards hold; return the
    last passing value.  The result satisfies both guards while result + h
    violates at least one.  Deterministic: equal configs give bitwise
    equal outputs.
    """
    bound = initial_bound(cfg.mu, cfg.L, cfg.tau)
    if cfg.h >= bound:
        raise ConfigurationError(
            f"stepsize h={cfg.h} must be smaller than the initial bound {bound}"
        )
    alpha0 = 0.999 * bound if cfg.alpha0 is None else float(cfg.alpha0)
    if not 0 < alpha0 < bound:
        raise ConfigurationError(
            f"starting rate {alpha0} must lie strictly inside (0, {bound})"
        )
    if not (condition_c1(alpha0, cfg.mu, cfg.L, cfg.tau)
            and condition_c2(alpha0, cfg.mu, cfg.L, cfg.tau)):
        raise ConfigurationError(
            f"starting rate {alpha0} already violates a feasibility guard"
        )

    alpha = alpha0
    while (condition_c1(alpha, cfg.mu, cfg.L, cfg.tau)
           and condition_c2(alpha, cfg.mu, cfg.L, cfg.tau)):
        alpha += cfg.h
    alpha -= cfg.h

    r1 = rho1(alpha, cfg.mu, cfg.L, cfg.tau)
    r2 = rho2(alpha, cfg.mu, cfg.L, cfg.tau)
    report = RateReport(
        alpha=alpha,
        rho1=r1,
        rho2=r2,
        rho=max(r1, r2),
        c_max=c_max(alpha, cfg.mu),
    )
    return alpha, report


def search_with_fraction(mu: float, L: float, tau: int, h_frac: float,
                         alpha0: float | None = None) -> tuple[float, RateReport]:
    """Scan with stepsize h = h_frac times the starting rate."""
    bound = initial_bound(mu, L, tau)
    start = 0.999 * bound if alpha0 is None else float(alpha0)
    if not h_frac > 0:
        raise ConfigurationError(f"h_frac must be positive, got {h_frac}")
    cfg = SearchConfig(mu=mu, L=L, tau=tau, h=h_frac * start, alpha0=alpha0)
    return search(cfg)
