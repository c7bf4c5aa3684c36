"""Scenario program assembly and the synthesis driver.

For a fixed contraction rate kappa every certificate residual is affine in
the decision tuple (eta, gamma, lambda, psi, alpha, rho, q), so the scenario
program "minimize eta subject to residual - eta <= 0 at every sample" is an
epigraph LP.  ``build_sop`` assembles it (optionally with some of the scalar
parameters pinned to constants), ``synthesize`` solves one LP per grid value
of kappa and issues the feasibility verdict eta* + epsilon1 <= 0 together
with its confidence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .certificate import (
    DETERMINISTIC_RELAXED,
    DETERMINISTIC_SMALLGAIN,
    MODES,
    POSITIVITY_FLOOR,
    STOCHASTIC_RELAXED,
    STOCHASTIC_SMALLGAIN,
    CertificateTemplate,
    RelaxParams,
    SbcSolution,
    active_residuals,
    monomial_matrix,
)
from .complexity import ConfidenceBudget
from .errors import InputError
from .sampling import Dataset
from .simplex import FEAS_TOL, OPTIMAL, LinearProgram, solve_lp

_PARAMS = ("gamma", "lambda", "psi", "alpha", "rho")
_RELAXED_MODES = (STOCHASTIC_RELAXED, DETERMINISTIC_RELAXED)
_STOCHASTIC_MODES = (STOCHASTIC_SMALLGAIN, STOCHASTIC_RELAXED)


@dataclass(frozen=True)
class SopLayout:
    """Maps decision-variable names to LP columns; pinned names are absent."""

    names: tuple[str, ...]
    pinned: dict[str, float]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def value(self, name: str, x: np.ndarray) -> float:
        if name in self.pinned:
            return self.pinned[name]
        return float(x[self.index(name)])


def sop_layout(template: CertificateTemplate,
               fixed: dict[str, float] | None) -> SopLayout:
    fixed = dict(fixed or {})
    for name in fixed:
        if name not in _PARAMS:
            raise InputError(f"cannot pin unknown parameter {name!r}")
    names = ["eta"] + [p for p in _PARAMS if p not in fixed]
    names += [f"q{j}" for j in range(template.size)]
    return SopLayout(names=tuple(names), pinned=fixed)


def build_sop(dataset: Dataset, template: CertificateTemplate, kappa: float,
              fixed: dict[str, float] | None = None, mu: float = 0.0,
              mode: str = STOCHASTIC_SMALLGAIN,
              relax: RelaxParams | None = None) -> tuple[LinearProgram, SopLayout]:
    """Epigraph LP of the scenario program at one kappa value.

    Rows are "residual - eta <= 0", one per (sample, active residual); the
    strict-margin row g6 of the relaxed modes appears once since it is
    sample-independent.  Pinned parameters move to the right-hand side.
    """
    if len(dataset) < 1:
        raise InputError("dataset must be nonempty")
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}")
    if mode in _RELAXED_MODES:
        if kappa != 1.0:
            raise InputError("relaxed modes fix kappa = 1")
        relax = relax or RelaxParams()
    elif not (0 < kappa < 1):
        raise InputError("kappa must be in (0, 1)")
    layout = sop_layout(template, fixed)
    names, pinned = layout.names, layout.pinned
    nvar = len(names)
    r = template.size
    q0 = nvar - r
    col = {name: i for i, name in enumerate(names)}
    active = active_residuals(mode)

    N = len(dataset)
    Phi = monomial_matrix(template, dataset.x_hat)                       # N x r
    succ = dataset.successors
    Phi_next = monomial_matrix(
        template, succ.reshape(-1, succ.shape[2])
    ).reshape(N, succ.shape[1], r).mean(axis=1)                          # N x r
    nx2 = np.einsum("ij,ij->i", dataset.x_hat, dataset.x_hat)
    nw2 = np.einsum("ij,ij->i", dataset.w_hat, dataset.w_hat)

    def rows(count):
        block = np.zeros((count, nvar))
        block[:, col["eta"]] = -1.0
        return block

    blocks, rhss = [], []

    if "g1" in active:
        block = rows(N)
        block[:, q0:] = -Phi
        blocks.append(block)
        rhss.append(np.zeros(N))
    if "g2" in active:
        block = rows(N)
        block[:, q0:] = -Phi
        rhs = np.zeros(N)
        if "alpha" in pinned:
            rhs -= pinned["alpha"] * nx2
        else:
            block[:, col["alpha"]] = nx2
        blocks.append(block)
        rhss.append(rhs)
    if "g3" in active:
        idx = np.flatnonzero(dataset.in_X0)
        if idx.size:
            block = rows(idx.size)
            block[:, q0:] = Phi[idx]
            rhs = np.zeros(idx.size)
            if "gamma" in pinned:
                rhs += pinned["gamma"]
            else:
                block[:, col["gamma"]] = -1.0
            blocks.append(block)
            rhss.append(rhs)
    if "g4" in active:
        idx = np.flatnonzero(dataset.in_Xc)
        if idx.size:
            block = rows(idx.size)
            block[:, q0:] = -Phi[idx]
            rhs = np.zeros(idx.size)
            if "lambda" in pinned:
                rhs -= pinned["lambda"]
            else:
                block[:, col["lambda"]] = 1.0
            blocks.append(block)
            rhss.append(rhs)
    if "g5" in active:
        block = rows(N)
        block[:, q0:] = Phi_next - kappa * Phi
        rhs = np.zeros(N)
        if "rho" in pinned:
            rhs += pinned["rho"] * nw2
        else:
            block[:, col["rho"]] = -nw2
        if mode in _STOCHASTIC_MODES:
            rhs -= mu
            if "psi" in pinned:
                rhs += pinned["psi"]
            else:
                block[:, col["psi"]] = -1.0
        blocks.append(block)
        rhss.append(rhs)
    if "g6" in active:
        block = rows(1)
        rhs = np.array([relax.varrho])
        if "gamma" in pinned:
            rhs -= pinned["gamma"]
        else:
            block[0, col["gamma"]] = 1.0
        if "lambda" in pinned:
            rhs += pinned["lambda"]
        else:
            block[0, col["lambda"]] = -1.0
        if mode == DETERMINISTIC_RELAXED:
            scale = relax.w_inf ** 2 * relax.horizon
            if "rho" in pinned:
                rhs -= pinned["rho"] * scale
            else:
                block[0, col["rho"]] = scale
        blocks.append(block)
        rhss.append(rhs)

    A = np.vstack(blocks)
    b = np.concatenate(rhss)
    bounds: list[tuple[float | None, float | None]] = []
    for name in names:
        if name == "eta":
            bounds.append((None, None))
        elif name in ("gamma", "lambda"):
            bounds.append((POSITIVITY_FLOOR, None))
        elif name in ("psi", "alpha", "rho"):
            bounds.append((0.0, None))
        else:
            j = int(name[1:])
            bounds.append((template.bounds[j, 0], template.bounds[j, 1]))
    objective = np.zeros(nvar)
    objective[col["eta"]] = 1.0
    lp = LinearProgram(objective=objective, A=A,
                       relations=["<="] * len(b), rhs=b, bounds=bounds)
    return lp, layout


def dump_lp(lp: LinearProgram, path: str) -> None:
    """Plain-text canonical form for external cross-checking."""
    with open(path, "w") as f:
        f.write("minimize " + " ".join("%.17g" % v for v in lp.objective) + "\n")
        for a, rel, b in zip(lp.A, lp.relations, lp.rhs):
            f.write(" ".join("%.17g" % v for v in a) + f" {rel} %.17g\n" % b)
        for j, (lo, hi) in enumerate(lp.bounds):
            f.write(f"bound {j} "
                    f"{'-inf' if lo is None else '%.17g' % lo} "
                    f"{'inf' if hi is None else '%.17g' % hi}\n")


@dataclass(frozen=True)
class ScenarioVerdict:
    """Outcome of the per-agent synthesis over the whole kappa grid."""

    solution: SbcSolution | None
    epsilon1: float
    feasible_for_rop: bool
    confidence: float
    kappa_grid: tuple[float, ...]
    per_kappa_eta: tuple[float, ...]
    mode: str
    mu: float
    sample_count_sufficient: bool = True
    feasibility_tolerance: float = FEAS_TOL
    statuses: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "solution": None if self.solution is None else self.solution.to_dict(),
            "epsilon1": self.epsilon1,
            "feasible_for_rop": self.feasible_for_rop,
            "confidence": self.confidence,
            "kappa_grid": list(self.kappa_grid),
            "per_kappa_eta": list(self.per_kappa_eta),
            "mode": self.mode,
            "mu": self.mu,
            "sample_count_sufficient": self.sample_count_sufficient,
            "feasibility_tolerance": self.feasibility_tolerance,
            "statuses": list(self.statuses),
        }


def _free_variable_count(template: CertificateTemplate,
                         fixed: dict[str, float] | None) -> int:
    return len(sop_layout(template, fixed).names)


def synthesize(dataset: Dataset, template: CertificateTemplate,
               kappa_grid, budget: ConfidenceBudget,
               fixed: dict[str, float] | None = None,
               mode: str = STOCHASTIC_SMALLGAIN,
               relax: RelaxParams | None = None,
               required_samples: int | None = None) -> ScenarioVerdict:
    """Solve the scenario program per kappa and test eta* + epsilon1 <= 0.

    The best (lowest eta*) kappa wins.  When gamma is a free variable it is
    tightened after the solve to the smallest value keeping every initial-set
    residual at eta*: the LP itself only ever pushes gamma up, but the
    downstream risk bound improves as gamma shrinks.
    """
    kappa_grid = tuple(float(k) for k in kappa_grid)
    if len(kappa_grid) != budget.m:
        raise InputError(
            f"kappa grid size {len(kappa_grid)} != budget.m = {budget.m}")
    layout = sop_layout(template, fixed)
    if budget.c != len(layout.names):
        raise InputError(
            f"budget.c = {budget.c} but the scenario program has "
            f"{len(layout.names)} free variables: {', '.join(layout.names)}")
    deterministic = mode in (DETERMINISTIC_SMALLGAIN, DETERMINISTIC_RELAXED)
    if deterministic and dataset.n_hat != 1:
        raise InputError("deterministic modes take exactly one successor replicate")
    if not deterministic and dataset.n_hat == 1 and budget.mu > 0:
        warnings.warn("single-replicate dataset with mu > 0: the empirical "
                      "mean is one draw", stacklevel=2)
    sufficient = True
    if required_samples is not None and len(dataset) < required_samples:
        warnings.warn(
            f"dataset has {len(dataset)} samples but {required_samples} are "
            "required: the verdict confidence is void", stacklevel=2)
        sufficient = False

    etas, results = [], []
    for kappa in kappa_grid:
        lp, layout = build_sop(dataset, template, kappa, fixed=fixed,
                               mu=budget.mu, mode=mode, relax=relax)
        res = solve_lp(lp)
        etas.append(res.objective if res.status == OPTIMAL else np.inf)
        results.append(res)

    confidence = (1.0 - budget.beta2 if deterministic
                  else 1.0 - budget.beta1 - budget.beta2)
    confidence = max(0.0, confidence) if sufficient else 0.0
    best = int(np.argmin(etas))
    if not np.isfinite(etas[best]):
        return ScenarioVerdict(
            solution=None, epsilon1=budget.epsilon1, feasible_for_rop=False,
            confidence=confidence, kappa_grid=kappa_grid,
            per_kappa_eta=tuple(etas), mode=mode, mu=budget.mu,
            sample_count_sufficient=sufficient,
            statuses=tuple(r.status for r in results))

    x = results[best].x
    eta_star = float(etas[best])
    q = np.array([layout.value(f"q{j}", x) for j in range(template.size)])
    values = {p: layout.value(p, x) for p in _PARAMS}
    if "gamma" not in layout.pinned and np.any(dataset.in_X0):
        B0 = monomial_matrix(template, dataset.x_hat[dataset.in_X0]) @ q
        values["gamma"] = max(float(B0.max()) - eta_star, POSITIVITY_FLOOR)
    solution = SbcSolution(
        template=template, q=q, gamma=values["gamma"], lam=values["lambda"],
        psi=values["psi"], alpha=values["alpha"], rho=values["rho"],
        kappa=kappa_grid[best], eta_star=eta_star, confidence=confidence,
        mode=mode)
    return ScenarioVerdict(
        solution=solution, epsilon1=budget.epsilon1,
        feasible_for_rop=bool(eta_star + budget.epsilon1 <= 0.0),
        confidence=confidence, kappa_grid=kappa_grid,
        per_kappa_eta=tuple(etas), mode=mode, mu=budget.mu,
        sample_count_sufficient=sufficient,
        statuses=tuple(r.status for r in results))


class SubBarrierEstimator(BaseEstimator):
    """Estimator-style wrapper around ``synthesize``.

    ``fit`` consumes a Dataset and stores the verdict; ``predict`` evaluates
    the fitted certificate at states.  Parameters mirror ``synthesize``.
    """

    def __init__(self, template=None, kappa_grid=(0.9, 0.99), budget=None,
                 fixed=None, mode=STOCHASTIC_SMALLGAIN, relax=None,
                 required_samples=None):
        self.template = template
        self.kappa_grid = kappa_grid
        self.budget = budget
        self.fixed = fixed
        self.mode = mode
        self.relax = relax
        self.required_samples = required_samples

    def fit(self, X: Dataset, y=None):
        if self.template is None or self.budget is None:
            raise InputError("template and budget are required")
        self.verdict_ = synthesize(
            X, self.template, self.kappa_grid, self.budget, fixed=self.fixed,
            mode=self.mode, relax=self.relax,
            required_samples=self.required_samples)
        self.solution_ = self.verdict_.solution
        self.feasible_ = self.verdict_.feasible_for_rop
        return self

    def predict(self, X):
        if getattr(self, "solution_", None) is None:
            raise InputError("estimator is not fitted or synthesis failed")
        return self.solution_.value(np.asarray(X, dtype=float))
