"""Composition of per-agent certificates into network-level risk bounds.

Three routes to a network guarantee:

* small-gain: if the column sums of -Lambda + Delta are all negative and
  sum(lambda_i) > sum(gamma_i), the summed certificates form a network
  barrier certificate and the supermartingale risk bound applies;
* relaxed: per-agent risk deltas combined by a union bound, no gain
  condition needed;
* deterministic: noise-free agents give zero risk up to an explicit horizon
  (or forever under the small-gain condition).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .certificate import (
    DETERMINISTIC_RELAXED,
    DETERMINISTIC_SMALLGAIN,
    STOCHASTIC_RELAXED,
    STOCHASTIC_SMALLGAIN,
    SbcSolution,
)
from .errors import CompositionError, InputError
from .system import NetworkTopology

# pi is chosen a hair above max_i pi_i: the risk bound never worsens as
# kappa = 1 + pi shrinks, so the tightest admissible pi is optimal.
_PI_SHRINK = 1.0 - 1e-9

_SMALLGAIN_MODES = (STOCHASTIC_SMALLGAIN, DETERMINISTIC_SMALLGAIN)


@dataclass(frozen=True)
class GainMatrices:
    """Lambda = diag(1 - kappa_i), Delta_ij = rho_i / alpha_j on edges."""

    Lambda: np.ndarray   # M-vector of diagonal entries 1 - kappa_i
    Delta: np.ndarray    # M x M
    pi: np.ndarray       # column sums of (-Lambda + Delta)


def gain_matrices(solutions: list[SbcSolution],
                  topology: NetworkTopology,
                  all_pairs: bool = False) -> GainMatrices:
    """Assemble the gain matrices; Delta is nonzero only on topology edges
    unless ``all_pairs`` couples every ordered pair."""
    M = len(solutions)
    if topology.M != M:
        raise InputError("one solution per agent required")
    lam_hat = np.array([1.0 - s.kappa for s in solutions])
    Delta = np.zeros((M, M))
    if all_pairs:
        pairs = [(i, j) for i in range(1, M + 1)
                 for j in range(1, M + 1) if i != j]
    else:
        pairs = [(e.reader, e.source) for e in topology.edges]
    for i, j in pairs:
        if solutions[j - 1].alpha <= 0:
            raise CompositionError(
                f"agent {j} has alpha = 0 but its state is read by agent {i}")
        Delta[i - 1, j - 1] = solutions[i - 1].rho / solutions[j - 1].alpha
    pi = Delta.sum(axis=0) - lam_hat
    return GainMatrices(Lambda=lam_hat, Delta=Delta, pi=pi)


def small_gain_check(solutions: list[SbcSolution], topology: NetworkTopology,
                     all_pairs: bool = False) -> tuple[GainMatrices, bool]:
    """Both compositional conditions: sum(lambda) > sum(gamma) and pi < 0."""
    for s in solutions:
        if s.mode not in _SMALLGAIN_MODES:
            raise InputError(f"solution mode {s.mode!r} is not a small-gain mode")
    gains = gain_matrices(solutions, topology, all_pairs=all_pairs)
    level_ok = sum(s.lam for s in solutions) > sum(s.gamma for s in solutions)
    return gains, bool(level_ok and np.all(gains.pi < 0))


def compose(solutions: list[SbcSolution],
            gains: GainMatrices) -> tuple[float, float, float, float]:
    """Composed (gamma, lambda, psi, kappa) under the small-gain condition."""
    bad = np.flatnonzero(gains.pi >= 0)
    if bad.size:
        raise CompositionError(
            "small-gain condition fails at column(s) "
            + ", ".join(str(j + 1) for j in bad)
            + ": pi = " + ", ".join("%.6g" % gains.pi[j] for j in bad))
    gamma = sum(s.gamma for s in solutions)
    lam = sum(s.lam for s in solutions)
    psi = sum(s.psi for s in solutions)
    if lam <= gamma:
        raise CompositionError(
            f"composed level condition fails: lambda = {lam:.6g} <= gamma = {gamma:.6g}")
    pi = _PI_SHRINK * float(gains.pi.max())
    return gamma, lam, psi, 1.0 + pi


def risk_bound(gamma: float, lam: float, psi: float, kappa: float,
               T: int) -> float:
    """Probability bound on reaching the collision level within horizon T."""
    if not (0 < gamma < lam):
        raise InputError("need 0 < gamma < lambda")
    if not (0 < kappa < 1):
        raise InputError("kappa must be in (0, 1)")
    if psi < 0 or T < 0:
        raise InputError("psi and T must be >= 0")
    if lam >= psi / (1.0 - kappa):
        value = 1.0 - (1.0 - gamma / lam) * (1.0 - psi / lam) ** T
    else:
        value = (gamma / lam) * kappa ** T \
            + psi / ((1.0 - kappa) * lam) * (1.0 - kappa ** T)
    return min(1.0, max(0.0, value))


def relaxed_agent_risk(gamma: float, lam: float, rho: float, psi: float,
                       w_inf: float, T: int) -> float:
    """Per-agent risk delta = (gamma + (rho w_inf^2 + psi) T) / lambda."""
    if lam <= 0:
        raise InputError("lambda must be positive")
    if lam <= gamma:
        raise InputError("need lambda > gamma")
    return min(1.0, (gamma + (rho * w_inf ** 2 + psi) * T) / lam)


def relaxed_compose(deltas, betas) -> tuple[float, float]:
    """Union bound over agents: total risk sum(deltas), confidence 1 - sum(betas)."""
    deltas = list(deltas)
    betas = list(betas)
    if len(deltas) != len(betas):
        raise InputError("deltas and betas must have equal length")
    return min(1.0, float(sum(deltas))), max(0.0, 1.0 - float(sum(betas)))


def deterministic_horizon(gamma: float, lam: float, rho: float,
                          w_inf: float) -> float:
    """Largest horizon with guaranteed zero risk: (lambda - gamma)/(rho w_inf^2)."""
    if lam <= gamma:
        raise InputError("need lambda > gamma")
    growth = rho * w_inf ** 2
    if growth == 0.0:
        return math.inf
    return (lam - gamma) / growth


def deterministic_compose(horizons, betas2) -> tuple[float, float]:
    """Network horizon = min over agents; confidence 1 - sum(beta2)."""
    horizons = list(horizons)
    if not horizons:
        raise InputError("need at least one horizon")
    return min(horizons), max(0.0, 1.0 - float(sum(betas2)))


@dataclass(frozen=True)
class RiskCertificate:
    """Network-level guarantee with full confidence accounting."""

    mode: str
    gamma: float
    lam: float
    psi: float
    kappa: float        # 1.0 in relaxed modes (unused by the union bound)
    horizon: float      # may be math.inf for the infinite-horizon result
    bound: float
    confidence: float
    per_agent: tuple[SbcSolution, ...] = ()
    pi_chosen: float | None = None
    collision_event: str = "any-agent"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.bound <= 1.0):
            raise InputError("bound must lie in [0, 1]")
        if not (0.0 <= self.confidence <= 1.0):
            raise InputError("confidence must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "gamma": self.gamma,
            "lambda": self.lam,
            "psi": self.psi,
            "kappa": self.kappa,
            "horizon": "inf" if math.isinf(self.horizon) else self.horizon,
            "bound": self.bound,
            "confidence": self.confidence,
            "pi_chosen": self.pi_chosen,
            "collision_event": self.collision_event,
            "per_agent": [s.to_dict() for s in self.per_agent],
            "provenance": self.provenance,
        }

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "RiskCertificate":
        horizon = d["horizon"]
        return cls(
            mode=d["mode"], gamma=d["gamma"], lam=d["lambda"], psi=d["psi"],
            kappa=d["kappa"],
            horizon=math.inf if horizon == "inf" else float(horizon),
            bound=d["bound"], confidence=d["confidence"],
            per_agent=tuple(SbcSolution.from_dict(s) for s in d["per_agent"]),
            pi_chosen=d.get("pi_chosen"),
            collision_event=d.get("collision_event", "any-agent"),
            provenance=d.get("provenance", {}))


def load_certificate(path: str) -> RiskCertificate:
    with open(path) as f:
        return RiskCertificate.from_dict(json.load(f))


def certify_smallgain(solutions: list[SbcSolution], topology: NetworkTopology,
                      T: int, betas1, betas2,
                      all_pairs: bool = False,
                      provenance: dict | None = None) -> RiskCertificate:
    """Full small-gain route: check, compose, bound the risk over horizon T."""
    gains, ok = small_gain_check(solutions, topology, all_pairs=all_pairs)
    gamma, lam, psi, kappa = compose(solutions, gains)  # raises when not ok
    assert ok
    confidence = max(0.0, 1.0 - float(sum(betas1)) - float(sum(betas2)))
    return RiskCertificate(
        mode=STOCHASTIC_SMALLGAIN, gamma=gamma, lam=lam, psi=psi, kappa=kappa,
        horizon=T, bound=risk_bound(gamma, lam, psi, kappa, T),
        confidence=confidence, per_agent=tuple(solutions),
        pi_chosen=kappa - 1.0, provenance=provenance or {})


def certify_relaxed(solutions: list[SbcSolution], w_infs, T: int, betas,
                    provenance: dict | None = None) -> RiskCertificate:
    """Union-bound route; betas are the per-agent total confidence shares."""
    deltas = [relaxed_agent_risk(s.gamma, s.lam, s.rho, s.psi, w, T)
              for s, w in zip(solutions, w_infs)]
    total, confidence = relaxed_compose(deltas, betas)
    return RiskCertificate(
        mode=STOCHASTIC_RELAXED,
        gamma=sum(s.gamma for s in solutions),
        lam=sum(s.lam for s in solutions),
        psi=sum(s.psi for s in solutions),
        kappa=1.0, horizon=T, bound=total, confidence=confidence,
        per_agent=tuple(solutions), provenance=provenance or {})


def certify_deterministic(solutions: list[SbcSolution], w_infs, betas2,
                          provenance: dict | None = None) -> RiskCertificate:
    """Finite-horizon zero-risk route for noise-free agents."""
    horizons = [deterministic_horizon(s.gamma, s.lam, s.rho, w)
                for s, w in zip(solutions, w_infs)]
    T, confidence = deterministic_compose(horizons, betas2)
    return RiskCertificate(
        mode=DETERMINISTIC_RELAXED,
        gamma=sum(s.gamma for s in solutions),
        lam=sum(s.lam for s in solutions),
        psi=0.0, kappa=1.0, horizon=T, bound=0.0, confidence=confidence,
        per_agent=tuple(solutions), provenance=provenance or {})


def deterministic_infinite(solutions: list[SbcSolution],
                           topology: NetworkTopology, betas2,
                           all_pairs: bool = False,
                           provenance: dict | None = None) -> RiskCertificate:
    """Zero collisions for all time under the small-gain condition."""
    for s in solutions:
        if s.mode != DETERMINISTIC_SMALLGAIN:
            raise InputError("infinite-horizon route needs deterministic "
                             "small-gain solutions")
    gains, _ = small_gain_check(solutions, topology, all_pairs=all_pairs)
    gamma, lam, psi, kappa = compose(solutions, gains)
    return RiskCertificate(
        mode=DETERMINISTIC_SMALLGAIN, gamma=gamma, lam=lam, psi=psi,
        kappa=kappa, horizon=math.inf, bound=0.0,
        confidence=max(0.0, 1.0 - float(sum(betas2))),
        per_agent=tuple(solutions), pi_chosen=kappa - 1.0,
        provenance=provenance or {})
