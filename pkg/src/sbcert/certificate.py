"""Certificate templates over monomial bases and residual evaluation.

A candidate certificate is B(q, x) = sum_j q_j * x^(e_j) for user-chosen
exponent vectors e_j.  The residual functions g1..g6 measure by how much a
candidate violates each certificate condition at one sampled point; the
scenario program later minimizes the worst residual over all samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Synthesis / composition modes.
STOCHASTIC_SMALLGAIN = "stochastic-smallgain"
STOCHASTIC_RELAXED = "stochastic-relaxed"
DETERMINISTIC_SMALLGAIN = "deterministic-smallgain"
DETERMINISTIC_RELAXED = "deterministic-relaxed"
MODES = (STOCHASTIC_SMALLGAIN, STOCHASTIC_RELAXED,
         DETERMINISTIC_SMALLGAIN, DETERMINISTIC_RELAXED)

# Strict positivity of gamma, lambda is implemented as >= this floor so the
# scenario program keeps a closed feasible set.
POSITIVITY_FLOOR = 1e-9


@dataclass(frozen=True)
class CertificateTemplate:
    """Monomial basis (exponent vectors, r x n) with per-coefficient boxes."""

    basis: np.ndarray
    bounds: np.ndarray  # r x 2, closed intervals [lo, hi]

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=int)
        bounds = np.asarray(self.bounds, dtype=float)
        if basis.ndim != 2 or basis.shape[0] < 1:
            raise InputError("basis must be a nonempty r x n integer array")
        if np.any(basis < 0):
            raise InputError("exponent vectors must be nonnegative")
        if bounds.shape != (basis.shape[0], 2):
            raise InputError("bounds must be r x 2")
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise InputError("coefficient bounds must satisfy lo <= hi")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "bounds", bounds)

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    @property
    def state_dim(self) -> int:
        return self.basis.shape[1]

    def _half_split(self, e: np.ndarray):
        """Split exponent vector e = u + v with |u| = ceil(|e|/2).

        Coordinates are consumed greedily, so x^2 -> (x, x), x*y -> (x, y)
        and x^4 -> (x^2, x^2): the quadratic-in-monomials structure used for
        the Gerschgorin eigenvalue bound.
        """
        need = (int(e.sum()) + 1) // 2
        u = np.zeros_like(e)
        for d in range(len(e)):
            take = min(int(e[d]), need)
            u[d] = take
            need -= take
            if need == 0:
                break
        return tuple(u), tuple(e - u)

    def gerschgorin_radius(self) -> float:
        """Max Gerschgorin row sum of the induced symmetric form, over the
        coefficient boxes (each |q_j| at its box-corner maximum)."""
        rows: dict[tuple, float] = {}
        qmax = np.abs(self.bounds).max(axis=1)
        for j in range(self.size):
            u, v = self._half_split(self.basis[j])
            if u == v:
                rows[u] = rows.get(u, 0.0) + qmax[j]
            else:
                rows[u] = rows.get(u, 0.0) + qmax[j] / 2.0
                rows[v] = rows.get(v, 0.0) + qmax[j] / 2.0
        return max(rows.values())

    def validate_p_max(self, p_max: float) -> None:
        r = self.gerschgorin_radius()
        if r > p_max + 1e-12:
            raise InputError(
                f"coefficient boxes allow Gerschgorin radius {r:.6g} "
                f"> declared P_max {p_max:.6g}")


def monomial_matrix(template: CertificateTemplate, x) -> np.ndarray:
    """Basis values at x: shape (r,) for a single state, (N, r) for a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != template.state_dim:
        raise InputError("state dimension does not match the template")
    Phi = np.prod(X[:, None, :] ** template.basis[None, :, :], axis=2)
    return Phi[0] if single else Phi


def evaluate(template: CertificateTemplate, q, x):
    """B(q, x) = sum_j q_j x^(e_j); vectorized over rows of x."""
    q = np.asarray(q, dtype=float)
    if q.shape != (template.size,):
        raise InputError("coefficient vector length does not match the basis")
    return monomial_matrix(template, x) @ q


@dataclass(frozen=True)
class Candidate:
    """Decision tuple fed to the residual functions."""

    template: CertificateTemplate
    q: np.ndarray
    gamma: float
    lam: float
    psi: float
    alpha: float
    rho: float
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))


@dataclass(frozen=True)
class RelaxParams:
    """Extra constants of the relaxed modes (strict-margin g6)."""

    varrho: float = -1e-6   # required strict margin, must be < 0
    w_inf: float = 0.0      # sup-norm bound on the interaction signal
    horizon: int = 0        # finite horizon entering the deterministic g6

    def __post_init__(self):
        if self.varrho >= 0:
            raise InputError("varrho must be negative")
        if self.w_inf < 0 or self.horizon < 0:
            raise InputError("w_inf and horizon must be >= 0")


@dataclass(frozen=True)
class SbcSolution:
    """A synthesized sub-barrier certificate with its scenario metadata."""

    template: CertificateTemplate
    q: np.ndarray
    gamma: float
    lam: float
    psi: float
    alpha: float
    rho: float
    kappa: float
    eta_star: float
    confidence: float
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}")
        if self.mode in (STOCHASTIC_RELAXED, DETERMINISTIC_RELAXED):
            if self.kappa != 1.0:
                raise InputError("relaxed modes require kappa = 1 exactly")
        elif not (0 < self.kappa < 1):
            raise InputError("small-gain modes require kappa in (0, 1)")
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))

    def value(self, x):
        return evaluate(self.template, self.q, x)

    def to_dict(self) -> dict:
        return {
            "basis": self.template.basis.tolist(),
            "coefficient_bounds": self.template.bounds.tolist(),
            "q": self.q.tolist(),
            "gamma": self.gamma,
            "lambda": self.lam,
            "psi": self.psi,
            "alpha": self.alpha,
            "rho": self.rho,
            "kappa": self.kappa,
            "eta_star": self.eta_star,
            "confidence": self.confidence,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SbcSolution":
        template = CertificateTemplate(
            basis=np.asarray(d["basis"]),
            bounds=np.asarray(d["coefficient_bounds"]))
        return cls(template=template, q=np.asarray(d["q"]), gamma=d["gamma"],
                   lam=d["lambda"], psi=d["psi"], alpha=d["alpha"],
                   rho=d["rho"], kappa=d["kappa"], eta_star=d["eta_star"],
                   confidence=d["confidence"], mode=d["mode"])


def active_residuals(mode: str) -> tuple[str, ...]:
    if mode == STOCHASTIC_SMALLGAIN:
        return ("g1", "g2", "g3", "g4", "g5")
    if mode == STOCHASTIC_RELAXED:
        return ("g1", "g3", "g4", "g5", "g6")
    if mode == DETERMINISTIC_SMALLGAIN:
        return ("g2", "g3", "g4", "g5")
    if mode == DETERMINISTIC_RELAXED:
        return ("g3", "g4", "g5", "g6")
    raise InputError(f"unknown mode {mode!r}")


def residuals(point, candidate: Candidate, mu: float = 0.0,
              mode: str = STOCHASTIC_SMALLGAIN,
              relax: RelaxParams | None = None) -> dict[str, float]:
    """Residual values of one sample point under one candidate.

    Indicator residuals (g3, g4) evaluate to their parenthesized expression
    when the membership flag is set and to 0 otherwise.  In relaxed modes the
    one-step condition uses kappa = 1 regardless of candidate.kappa.
    """
    if point.successors.shape[0] < 1:
        raise InputError("sample point has no successors")
    tmpl = candidate.template
    B = float(evaluate(tmpl, candidate.q, point.x_hat))
    B_next = float(np.mean(evaluate(tmpl, candidate.q, point.successors)))
    nx2 = float(np.dot(point.x_hat, point.x_hat))
    nw2 = float(np.dot(point.w_hat, point.w_hat))
    kappa = 1.0 if mode in (STOCHASTIC_RELAXED, DETERMINISTIC_RELAXED) \
        else candidate.kappa
    vals = {
        "g1": -B,
        "g2": candidate.alpha * nx2 - B,
        "g3": (B - candidate.gamma) if point.in_X0 else 0.0,
        "g4": (candidate.lam - B) if point.in_Xc else 0.0,
    }
    if mode in (STOCHASTIC_SMALLGAIN, STOCHASTIC_RELAXED):
        vals["g5"] = B_next - kappa * B - candidate.rho * nw2 - candidate.psi + mu
    else:
        vals["g5"] = B_next - kappa * B - candidate.rho * nw2
    if mode == STOCHASTIC_RELAXED:
        relax = relax or RelaxParams()
        vals["g6"] = candidate.gamma - candidate.lam - relax.varrho
    elif mode == DETERMINISTIC_RELAXED:
        relax = relax or RelaxParams()
        vals["g6"] = (candidate.gamma
                      + candidate.rho * relax.w_inf ** 2 * relax.horizon
                      - candidate.lam - relax.varrho)
    return {name: vals[name] for name in active_residuals(mode)}
