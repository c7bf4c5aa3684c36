"""Deterministic dense LP solver.

The scenario programs are epigraph LPs with a huge number of rows and a
handful of columns, so the solver works on the dual: ``min c'x, Ax <= b``
(variable bounds folded into rows) has dual ``min b'y, A'y = -c, y >= 0``
whose basis is only n x n.  The dual is solved by a two-phase revised
simplex (Dantzig pricing with a Bland's-rule anti-cycling fallback); the
primal solution is recovered
from the equality multipliers of the optimal basis.  Everything is plain
deterministic floating-point arithmetic: identical inputs give identical
bases and solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

FEAS_TOL = 1e-9     # single global feasibility tolerance, reported in verdicts
_PIVOT_TOL = 1e-10   # reduced-cost threshold for entering columns
_RATIO_TOL = 1e-9    # positivity threshold in the ratio test
_MAX_ITER = 200_000

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


@dataclass
class LinearProgram:
    """minimize objective @ x subject to rows and variable bounds."""

    objective: np.ndarray
    A: np.ndarray                 # m x n coefficient rows
    relations: list[str]          # '<=' or '>=' per row
    rhs: np.ndarray
    bounds: list[tuple[float | None, float | None]] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.A.shape[0] != self.rhs.shape[0] or self.A.shape[0] != len(self.relations):
            raise InputError("constraint rows, relations and rhs must align")
        for rel in self.relations:
            if rel not in ("<=", ">="):
                raise InputError(f"unsupported relation {rel!r}")
        if not self.bounds:
            self.bounds = [(None, None)] * n
        if len(self.bounds) != n:
            raise InputError("one bound pair per variable required")

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray | None
    objective: float
    status: str
    max_violation: float = 0.0


def _canonical_rows(lp: LinearProgram):
    """All constraints as A x <= b, bounds included as coordinate rows."""
    n = lp.num_vars
    rows = []
    rhs = []
    for a, rel, b in zip(lp.A, lp.relations, lp.rhs):
        if rel == "<=":
            rows.append(a)
            rhs.append(b)
        else:
            rows.append(-a)
            rhs.append(-b)
    for j, (lo, hi) in enumerate(lp.bounds):
        e = np.zeros(n)
        if hi is not None:
            e_hi = e.copy()
            e_hi[j] = 1.0
            rows.append(e_hi)
            rhs.append(hi)
        if lo is not None:
            e_lo = e.copy()
            e_lo[j] = -1.0
            rows.append(e_lo)
            rhs.append(-lo)
    if not rows:
        return np.zeros((0, n)), np.zeros(0)
    return np.array(rows), np.array(rhs)


class _Simplex:
    """Revised simplex for min f'z, Gz = h, z >= 0."""

    def __init__(self, G: np.ndarray, h: np.ndarray):
        # flip rows so h >= 0; remember signs to unflip multipliers later
        self.sign = np.where(h < 0, -1.0, 1.0)
        self.G = G * self.sign[:, None]
        self.h = h * self.sign
        self.nrows, self.ncols = self.G.shape
        self.basis = None
        self.z_basic = None

    def _iterate(self, G, f, basis, allow, z_basic):
        """Run simplex iterations; returns (basis, z_basic, status, y).

        Pricing is Dantzig (most negative reduced cost) and ratio-test ties
        break toward the largest pivot element, which keeps the basis well
        conditioned on heavily degenerate scenario programs.  A long run of
        degenerate (zero-length) steps switches to Bland's rule, whose
        lowest-index discipline rules out cycling, until progress resumes.
        """
        stalled = 0
        bland = False
        for _ in range(_MAX_ITER):
            B = G[:, basis]
            y = np.linalg.solve(B.T, f[basis])
            reduced = f - G.T @ y
            reduced[basis] = 0.0
            eligible = np.flatnonzero((reduced < -_PIVOT_TOL) & allow)
            if eligible.size == 0:
                return basis, z_basic, OPTIMAL, y
            if bland:
                j = int(eligible[0])
            else:
                j = int(eligible[np.argmin(reduced[eligible])])
            u = np.linalg.solve(B, G[:, j])
            pos = np.flatnonzero(u > _RATIO_TOL)
            if pos.size == 0:
                return basis, z_basic, UNBOUNDED, y
            ratios = z_basic[pos] / u[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-9 * (1.0 + abs(best))]
            if bland:
                leave_pos = ties[np.argmin(basis[ties])]
            else:
                leave_pos = ties[np.argmax(u[ties])]
            t = z_basic[leave_pos] / u[leave_pos]
            if t <= _RATIO_TOL:
                stalled += 1
                bland = bland or stalled > 100
            else:
                stalled = 0
                bland = False
            z_basic = z_basic - t * u
            z_basic[leave_pos] = t
            basis = basis.copy()
            basis[leave_pos] = j
            z_basic = np.maximum(z_basic, 0.0)
        raise RuntimeError("simplex iteration limit exceeded")

    def solve(self, f: np.ndarray):
        """Two-phase solve; returns (status, multipliers y, objective)."""
        nr, nc = self.nrows, self.ncols
        if nr == 0:
            return OPTIMAL, np.zeros(0), 0.0
        # phase 1: artificial columns form the initial identity basis
        G1 = np.hstack([self.G, np.eye(nr)])
        f1 = np.concatenate([np.zeros(nc), np.ones(nr)])
        basis = np.arange(nc, nc + nr)
        allow = np.ones(nc + nr, dtype=bool)
        basis, z_basic, status, _ = self._iterate(G1, f1, basis, allow, self.h.copy())
        if status != OPTIMAL or f1[basis] @ z_basic > 1e-7 * max(1.0, self.h.max()):
            return INFEASIBLE, None, np.inf
        # drive zero-level artificials out of the basis; drop redundant rows
        keep_rows = np.ones(nr, dtype=bool)
        for pos in range(nr):
            if basis[pos] < nc:
                continue
            B = G1[:, basis]
            row = np.linalg.solve(B, G1)[pos]
            row[basis] = 0.0
            j = int(np.argmax(np.abs(row[:nc])))  # best-conditioned pivot
            if abs(row[j]) > 1e-8:
                basis[pos] = j
            else:
                keep_rows[pos] = False
        if not keep_rows.all():
            order = np.flatnonzero(keep_rows)
            self.G = self.G[order]
            self.h = self.h[order]
            self.sign = self.sign[order]
            kept = [p for p in range(nr) if keep_rows[p]]
            basis = basis[kept]
            z_basic = z_basic[kept]
            nr = len(kept)
            self.nrows = nr
            G1 = np.hstack([self.G, np.eye(nr)])
        # phase 2 over the real columns only
        f2 = np.concatenate([f, np.zeros(nr)])
        allow = np.concatenate([np.ones(nc, dtype=bool), np.zeros(nr, dtype=bool)])
        z_basic = np.linalg.solve(G1[:, basis], self.h)
        z_basic = np.maximum(z_basic, 0.0)
        basis, z_basic, status, y = self._iterate(G1, f2, basis, allow, z_basic)
        if status == UNBOUNDED:
            return UNBOUNDED, None, -np.inf
        objective = float(f2[basis] @ z_basic)
        return OPTIMAL, y * self.sign, objective


def solve_lp(lp: LinearProgram, _probe: bool = False) -> LpResult:
    """Solve the LP; status is one of optimal / unbounded / infeasible."""
    A, b = _canonical_rows(lp)
    c = lp.objective
    # dual of min c'x s.t. Ax <= b:  min b'y s.t. A'y = -c, y >= 0
    sx = _Simplex(A.T.copy(), -c.copy())
    status, x, dual_obj = sx.solve(b.astype(float))
    if status == OPTIMAL:
        violation = float(max(0.0, (A @ x - b).max())) if len(b) else 0.0
        return LpResult(x=x, objective=float(-dual_obj), status=OPTIMAL,
                        max_violation=violation)
    if status == UNBOUNDED:
        # dual unbounded below means the primal has no feasible point
        return LpResult(x=None, objective=np.inf, status=INFEASIBLE)
    # dual infeasible: primal is unbounded or infeasible; probe feasibility
    if _probe:
        return LpResult(x=None, objective=-np.inf, status=UNBOUNDED)
    aux = LinearProgram(
        objective=np.concatenate([np.zeros(lp.num_vars), [1.0]]),
        A=np.hstack([A, -np.ones((A.shape[0], 1))]),
        relations=["<="] * A.shape[0],
        rhs=b,
        bounds=[(None, None)] * (lp.num_vars + 1),
    )
    probe = solve_lp(aux, _probe=True)
    if probe.status == UNBOUNDED or (probe.status == OPTIMAL
                                     and probe.objective <= FEAS_TOL):
        return LpResult(x=None, objective=-np.inf, status=UNBOUNDED)
    return LpResult(x=None, objective=np.inf, status=INFEASIBLE)
