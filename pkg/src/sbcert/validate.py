"""Empirical validation of certified bounds.

Monte Carlo estimates of the collision probability (with an exact binomial
upper confidence limit, since certified rates sit near zero) and dense grid
spot-checks of the certificate conditions.  Both emit CSV artifacts for
external plotting; no plotting happens here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .certificate import SbcSolution, evaluate
from .errors import InputError
from .streams import as_streams
from .system import LinearAgent, NetworkTopology, RegionSpec, step_batch

ANY_AGENT = "any-agent"
ALL_AGENTS = "all-agents"


@dataclass(frozen=True)
class MonteCarloReport:
    trials: int
    collisions: int
    empirical_rate: float
    upper_99: float        # one-sided exact binomial upper limit at 0.99
    horizon: int
    seed: int
    event: str = ANY_AGENT

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "collisions": self.collisions,
            "empirical_rate": self.empirical_rate,
            "upper_99": self.upper_99,
            "horizon": self.horizon,
            "seed": self.seed,
            "event": self.event,
        }

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


def binomial_upper_limit(collisions: int, trials: int,
                         level: float = 0.99) -> float:
    """Exact (Clopper-Pearson) one-sided upper confidence limit on the rate."""
    if not (0 <= collisions <= trials) or trials < 1:
        raise InputError("need 0 <= collisions <= trials, trials >= 1")
    if collisions == trials:
        return 1.0
    return float(beta_dist.ppf(level, collisions + 1, trials - collisions))


def _advance(agents, slices, topology, X, noises):
    """One synchronous network step for a batch of stacked states X."""
    X_next = np.empty_like(X)
    for i, a in enumerate(agents, start=1):
        w = np.zeros((X.shape[0], a.interaction_dim))
        for e in topology.inputs_of(i):
            src = slices[e.source - 1]
            nj = src.stop - src.start
            w[:, e.offset:e.offset + nj] = X[:, src]
        x = X[:, slices[i - 1]]
        if isinstance(a, LinearAgent):
            X_next[:, slices[i - 1]] = step_batch(a, x, w, noises[i - 1])
        else:
            base = np.array([a.transition(x[t], w[t]) for t in range(len(x))])
            X_next[:, slices[i - 1]] = base + noises[i - 1] @ a.R.T
    return X_next


def monte_carlo_risk(agents, topology: NetworkTopology,
                     regions: list[RegionSpec], T: int, trials: int, rng,
                     event: str = ANY_AGENT) -> MonteCarloReport:
    """Estimate the probability of reaching the collision region by step T-1.

    Initial states are uniform over the product of the X0 boxes; a trial is
    a collision if (depending on ``event``) any agent or every agent sits in
    its collision box at some time index k in [0, T).  All trials advance in
    lock-step so noise comes from the per-(agent, time) counter streams.
    """
    if trials < 1 or T < 0:
        raise InputError("need trials >= 1 and T >= 0")
    if event not in (ANY_AGENT, ALL_AGENTS):
        raise InputError(f"unknown collision event {event!r}")
    streams = as_streams(rng)
    slices, start = [], 0
    for a in agents:
        slices.append(slice(start, start + a.state_dim))
        start += a.state_dim
    g0 = streams.stream(0)
    X = np.empty((trials, start))
    for i, r in enumerate(regions):
        lo, hi = r.X0
        X[:, slices[i]] = lo + (hi - lo) * g0.random((trials, len(lo)))

    collided = np.zeros(trials, dtype=bool)
    for k in range(T):
        in_xc = np.column_stack(
            [regions[i].in_Xc(X[:, slices[i]]) for i in range(len(agents))])
        hit = in_xc.any(axis=1) if event == ANY_AGENT else in_xc.all(axis=1)
        collided |= hit
        noises = [a.noise.draw(streams.stream(i + 1, k, 0), count=trials)
                  for i, a in enumerate(agents)]
        X = _advance(agents, slices, topology, X, noises)

    collisions = int(collided.sum())
    return MonteCarloReport(
        trials=trials, collisions=collisions,
        empirical_rate=collisions / trials,
        upper_99=binomial_upper_limit(collisions, trials),
        horizon=T, seed=streams.seed, event=event)


def _axis_grid(box, per_axis):
    lo, hi = box
    axes = [np.linspace(lo[d], hi[d], per_axis) for d in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def grid_check(solution: SbcSolution, region: RegionSpec, grid_per_axis: int,
               agent, replicates: int, rng, mu: float = 0.0,
               w_grid_per_axis: int | None = None,
               csv_path: str | None = None) -> dict[str, float]:
    """Max residual per condition over uniform grids.

    g1..g4 run on a grid over X (indicator conditions only where the grid
    point lies in X0 / Xc); the one-step condition runs on a grid over
    X x W with ``replicates`` fresh noise draws per point, so it samples the
    empirical-mean surrogate rather than the unobservable expectation.
    """
    if grid_per_axis < 2:
        raise InputError("grid_per_axis must be >= 2")
    streams = as_streams(rng)
    Xg = _axis_grid(region.X, grid_per_axis)
    B = solution.value(Xg)
    nx2 = np.einsum("ij,ij->i", Xg, Xg)
    in_x0 = region.in_X0(Xg)
    in_xc = region.in_Xc(Xg)
    maxima = {
        "g1": float((-B).max()),
        "g2": float((solution.alpha * nx2 - B).max()),
        "g3": float((B[in_x0] - solution.gamma).max()) if in_x0.any() else 0.0,
        "g4": float((solution.lam - B[in_xc]).max()) if in_xc.any() else 0.0,
    }
    Wg = _axis_grid(region.W, w_grid_per_axis or grid_per_axis)
    if not isinstance(agent, LinearAgent):
        raise InputError("grid_check supports built-in linear agents only")
    g5_max = -np.inf
    g = streams.stream(0, 0, 1)
    for w in Wg:
        base = Xg @ agent.A.T + agent.b + agent.D @ w     # G x n
        noise = agent.noise.draw(g, count=replicates)     # rep x dim
        succ = base[:, None, :] + (noise @ agent.R.T)[None, :, :]
        B_next = evaluate(solution.template, solution.q,
                          succ.reshape(-1, succ.shape[2])
                          ).reshape(len(Xg), replicates).mean(axis=1)
        res = (B_next - solution.kappa * B
               - solution.rho * float(w @ w) - solution.psi + mu)
        g5_max = max(g5_max, float(res.max()))
    maxima["g5"] = g5_max
    if csv_path is not None:
        write_grid_csv(csv_path, Xg, B)
    return maxima


def write_grid_csv(path: str, points: np.ndarray, values: np.ndarray) -> None:
    """Residual/certificate surface as rows x0,...,x{n-1},value."""
    n = points.shape[1]
    with open(path, "w") as f:
        f.write(",".join(f"x{d}" for d in range(n)) + ",value\n")
        for p, v in zip(points, values):
            f.write(",".join("%.17g" % c for c in p) + ",%.17g\n" % v)


def write_trajectory_csv(path: str, traj: np.ndarray, agents) -> None:
    """Trajectory as rows k,agent,coord,value for external plotting."""
    slices, start = [], 0
    for a in agents:
        slices.append(slice(start, start + a.state_dim))
        start += a.state_dim
    with open(path, "w") as f:
        f.write("k,agent,coord,value\n")
        for k, x in enumerate(traj):
            for i, s in enumerate(slices, start=1):
                for d, v in enumerate(x[s]):
                    f.write(f"{k},{i},{d},%.17g\n" % v)
