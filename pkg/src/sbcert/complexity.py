"""A-priori sample-complexity quantities.

Everything the synthesis pipeline must know before touching data lives here:
the replicate count for the empirical mean, the binomial-tail sample bound
and its minimal-N inversion, the accuracy map epsilon1 -> epsilon2, and the
Lipschitz-constant formulas for linear and nonlinear agents with quadratic
(in monomials) certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InputError

# Tolerant ceiling: Q/(beta1*mu^2) may land on an integer up to roundoff.
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class ConfidenceBudget:
    """Per-agent confidence/accuracy budget driving all sample counts."""

    beta1: float          # confidence share of the empirical-mean step
    beta2: float          # confidence share of the scenario step
    mu: float             # empirical-mean approximation error
    epsilon1: float       # accuracy transferred from scenario to robust program
    Q: float              # user-supplied variance upper bound
    c: int                # decision-variable count of the scenario program
    m: int                # cardinality of the kappa grid
    exponent: int         # state dim + interaction dim

    def __post_init__(self):
        if not (0 < self.beta1 <= 1):
            raise InputError("beta1 must be in (0, 1]")
        if not (0 <= self.beta2 <= 1):
            raise InputError("beta2 must be in [0, 1]")
        if self.mu < 0:
            raise InputError("mu must be >= 0")
        if not (0 <= self.epsilon1 <= 1):
            raise InputError("epsilon1 must be in [0, 1]")
        if self.Q <= 0:
            raise InputError("Q must be positive")
        if self.c < 1 or self.m < 1 or self.exponent < 1:
            raise InputError("c, m and exponent must be positive integers")


@dataclass(frozen=True)
class LipschitzBounds:
    """User-declared bounds feeding the Lipschitz-constant formulas.

    For linear agents provide L_A, L_D (Frobenius-norm bounds on the state
    and interaction matrices); for nonlinear agents L_f, L_x, L_w (bounds on
    the map and its Jacobians).  Shared: P_max bounds the top eigenvalue of
    the certificate's quadratic form, L_alpha/L_rho bound the gain
    coefficients, s and s_prime bound the state and interaction norms.
    """

    P_max: float
    L_alpha: float
    L_rho: float
    s: float
    s_prime: float
    kappa: float
    L_A: float = 0.0
    L_D: float = 0.0
    L_f: float = 0.0
    L_x: float = 0.0
    L_w: float = 0.0

    def __post_init__(self):
        for name in ("P_max", "L_alpha", "L_rho", "s", "s_prime",
                     "L_A", "L_D", "L_f", "L_x", "L_w"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InputError(f"{name} must be finite and >= 0")
        if not (0 < self.kappa < 1):
            raise InputError("kappa must be in (0, 1)")


def empirical_batch_size(Q: float, beta1: float, mu: float) -> int:
    """Replicates needed so the empirical mean is mu-accurate w.p. 1-beta1."""
    if Q <= 0:
        raise InputError("Q must be positive")
    if not (0 < beta1 <= 1):
        raise InputError("beta1 must be in (0, 1]")
    if mu <= 0:
        raise InputError("mu must be positive (mu = 0 needs infinitely many replicates)")
    return max(1, math.ceil(Q / (beta1 * mu * mu) - _CEIL_SLACK))


def log_binomial_tail(N: int, eps_list, c: int) -> float:
    """log of sum_k sum_{j<c} C(N,j) eps_k^j (1-eps_k)^(N-j), term-wise in log space."""
    if N < 0:
        raise InputError("N must be >= 0")
    if c < 1:
        raise InputError("c must be >= 1")
    eps = np.asarray(eps_list, dtype=float)
    if eps.size == 0:
        raise InputError("eps_list must be nonempty")
    if np.any((eps <= 0) | (eps >= 1)):
        raise InputError("each epsilon must lie in (0, 1)")
    j = np.arange(min(c, N + 1))
    log_comb = gammaln(N + 1) - gammaln(j + 1) - gammaln(N - j + 1)
    # terms indexed (k, j)
    log_terms = (log_comb[None, :]
                 + j[None, :] * np.log(eps)[:, None]
                 + (N - j)[None, :] * np.log1p(-eps)[:, None])
    return float(logsumexp(log_terms))


def binomial_tail(N: int, eps_list, c: int) -> float:
    """Scenario-confidence double sum over the kappa grid; at most m since
    each inner binomial tail is at most 1."""
    return math.exp(log_binomial_tail(N, eps_list, c))


def min_samples(eps_list, beta2: float, c: int) -> int:
    """Minimal N with binomial_tail(N, eps_list, c) <= beta2.

    The tail is nonincreasing in N, so we gallop to a feasible N and then
    bisect.  Comparisons run on log values so deep underflow is harmless.
    """
    if not (0 < beta2 <= 1):
        raise InputError("beta2 must be in (0, 1]")
    log_beta2 = math.log(beta2)

    def ok(N: int) -> bool:
        return log_binomial_tail(N, eps_list, c) <= log_beta2

    if ok(0):
        return 0
    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > 10**12:
            raise InputError("min_samples search exceeded 1e12")
    lo = hi // 2 + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def epsilon2(eps1: float, L_g: float, exponent: int) -> float:
    """Constraint-space accuracy (eps1 / L_g) ** (n + p)."""
    if L_g <= 0:
        raise InputError("L_g must be positive")
    if not (0 <= eps1 <= L_g):
        raise InputError("epsilon1 must satisfy 0 <= epsilon1 <= L_g")
    if exponent < 1:
        raise InputError("exponent must be >= 1")
    return (eps1 / L_g) ** exponent


def lipschitz_linear(b: LipschitzBounds) -> float:
    """Lipschitz bound on the residual family for a linear agent."""
    g5x = 2.0 * b.P_max * (b.s * (b.L_A ** 2 + b.kappa) + b.s_prime * b.L_A * b.L_D)
    g5w = (2.0 * b.P_max * (b.s_prime * b.L_D ** 2 + b.s * b.L_A * b.L_D)
           + 2.0 * b.L_rho * b.s_prime)
    return max(2.0 * b.s * (b.P_max + b.L_alpha), math.hypot(g5x, g5w))


def lipschitz_nonlinear(b: LipschitzBounds) -> float:
    """Lipschitz bound on the residual family for a nonlinear agent."""
    g5x = 2.0 * b.P_max * (b.L_f * b.L_x + b.kappa * b.s)
    g5w = 2.0 * b.P_max * b.L_f * b.L_w + 2.0 * b.L_rho * b.s_prime
    return max(2.0 * b.s * (b.P_max + b.L_alpha), math.hypot(g5x, g5w))
