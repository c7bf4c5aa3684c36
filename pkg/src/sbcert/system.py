"""Agent and network dynamics.

Agents are one-step transition oracles: linear closed-loop maps
``x+ = A x + b + D w + R s`` or user-supplied nonlinear maps plus additive
noise ``R s``.  The deployed controller is pre-folded into ``(A, b)`` so the
verifier only ever sees a single closed-loop black box.  Networks are built
from ordered edges "agent i reads the state of agent j", with an embedding
telling which block of w_i receives x_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .streams import RandomStreams, as_streams


@dataclass(frozen=True)
class NoiseSpec:
    """Noise source of the built-in simulators: standard Gaussian or none."""

    kind: str = "standard-gaussian"
    dimension: int = 1

    def __post_init__(self):
        if self.kind not in ("standard-gaussian", "none"):
            raise InputError(f"unknown noise kind: {self.kind!r}")
        if self.dimension < 1:
            raise InputError("noise dimension must be positive")

    @property
    def deterministic(self) -> bool:
        return self.kind == "none"

    def draw(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        shape = (self.dimension,) if count is None else (count, self.dimension)
        if self.deterministic:
            return np.zeros(shape)
        return rng.standard_normal(shape)


@dataclass(frozen=True)
class LinearAgent:
    A: np.ndarray
    b: np.ndarray
    D: np.ndarray
    R: np.ndarray
    noise: NoiseSpec

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        D = np.asarray(self.D, dtype=float)
        R = np.asarray(self.R, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise InputError("A must be square")
        if b.shape != (n,):
            raise InputError("b must be an n-vector")
        if D.ndim != 2 or D.shape[0] != n:
            raise InputError("D must be n x p")
        if R.shape != (n, n):
            raise InputError("R must be n x n")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "R", R)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def interaction_dim(self) -> int:
        return self.D.shape[1]


@dataclass(frozen=True)
class NonlinearAgent:
    """Deterministic oracle (x, w) -> x+ with additive noise R s."""

    transition: callable
    R: np.ndarray
    noise: NoiseSpec
    state_dim: int = 0
    interaction_dim: int = 0

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise InputError("R must be square")
        object.__setattr__(self, "R", R)
        if self.state_dim <= 0:
            object.__setattr__(self, "state_dim", R.shape[0])
        if self.state_dim != R.shape[0]:
            raise InputError("state_dim inconsistent with R")


@dataclass(frozen=True)
class Edge:
    """Agent ``reader`` reads the state of agent ``source`` (1-based labels).

    ``offset`` is the first coordinate of w_reader that receives x_source.
    """

    reader: int
    source: int
    offset: int = 0


@dataclass(frozen=True)
class NetworkTopology:
    M: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.M < 1:
            raise InputError("M must be >= 1")
        edges = tuple(
            e if isinstance(e, Edge) else Edge(*e) for e in self.edges
        )
        for e in edges:
            if e.reader == e.source:
                raise InputError("self-edges are not allowed")
            if not (1 <= e.reader <= self.M and 1 <= e.source <= self.M):
                raise InputError("edge endpoints out of range")
        object.__setattr__(self, "edges", edges)

    def readers_of(self, j: int) -> list[Edge]:
        """Edges through which agent j's state is read by others."""
        return [e for e in self.edges if e.source == j]

    def inputs_of(self, i: int) -> list[Edge]:
        return [e for e in self.edges if e.reader == i]


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned boxes: state set X, initial X0, collision Xc, interaction W.

    Boxes are (lo, hi) arrays.  X0 and Xc must be inside X and disjoint.
    """

    X: tuple[np.ndarray, np.ndarray]
    X0: tuple[np.ndarray, np.ndarray]
    Xc: tuple[np.ndarray, np.ndarray]
    W: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        for name in ("X", "X0", "Xc", "W"):
            lo, hi = getattr(self, name)
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            if lo.shape != hi.shape or lo.ndim != 1:
                raise InputError(f"{name}: lo/hi must be 1-d arrays of equal length")
            if np.any(lo > hi):
                raise InputError(f"{name}: empty box (lo > hi)")
            object.__setattr__(self, name, (lo, hi))
        for name in ("X0", "Xc"):
            lo, hi = getattr(self, name)
            xlo, xhi = self.X
            if np.any(lo < xlo) or np.any(hi > xhi):
                raise InputError(f"{name} must be contained in X")
        lo0, hi0 = self.X0
        loc, hic = self.Xc
        if np.all(np.maximum(lo0, loc) <= np.minimum(hi0, hic)):
            raise InputError("X0 and Xc must be disjoint")

    @staticmethod
    def _contains(box, x) -> np.ndarray:
        lo, hi = box
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all((x >= lo) & (x <= hi), axis=1)

    def in_X(self, x):
        return self._contains(self.X, x)

    def in_X0(self, x):
        return self._contains(self.X0, x)

    def in_Xc(self, x):
        return self._contains(self.Xc, x)


def step(agent, x, w, rng: np.random.Generator) -> np.ndarray:
    """One transition of an agent; noise is drawn from ``rng``."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if isinstance(agent, LinearAgent):
        if x.shape != (agent.state_dim,):
            raise InputError("state dimension mismatch")
        if w.shape != (agent.interaction_dim,):
            raise InputError("interaction dimension mismatch")
        s = agent.noise.draw(rng)
        return agent.A @ x + agent.b + agent.D @ w + agent.R @ s
    if isinstance(agent, NonlinearAgent):
        if x.shape != (agent.state_dim,):
            raise InputError("state dimension mismatch")
        s = agent.noise.draw(rng)
        return np.asarray(agent.transition(x, w), dtype=float) + agent.R @ s
    raise InputError(f"unsupported agent type: {type(agent).__name__}")


def step_batch(agent: LinearAgent, X, W, noise) -> np.ndarray:
    """Vectorized linear step: rows of X, W, noise are independent inputs."""
    return X @ agent.A.T + agent.b + W @ agent.D.T + noise @ agent.R.T


# Closed-loop platoon agent: state x = (relative distance d, velocity v),
# controller u = K x + (0.1, 0) folded into A and b.
_PLATOON_AX = np.array([[1.0, -1.0], [0.0, 1.0]])
_PLATOON_K = np.array([[-0.2, 1.1], [0.01, -0.9]])
_PLATOON_B = np.array([0.1, 0.0])
_PLATOON_R = np.diag([0.03, 0.06])


def build_platoon(M: int, interconnection_degree: float = 0.01,
                  noise_kind: str = "standard-gaussian"):
    """Chain of M identical closed-loop vehicles.

    Agent i (i >= 2) reads the full state of agent i-1 through its
    interaction input; only the distance coordinate is actually coupled
    (D = [[0, w], [0, 0]] with w the interconnection degree).
    """
    if M < 1:
        raise InputError("platoon needs at least one vehicle")
    A = _PLATOON_AX + _PLATOON_K
    D = np.array([[0.0, interconnection_degree], [0.0, 0.0]])
    noise = NoiseSpec(kind=noise_kind, dimension=2)
    agent = LinearAgent(A=A, b=_PLATOON_B, D=D, R=_PLATOON_R, noise=noise)
    agents = [agent] * M
    topology = NetworkTopology(
        M=M, edges=tuple(Edge(reader=i, source=i - 1) for i in range(2, M + 1))
    )
    region = RegionSpec(
        X=(np.array([0.0, -3.55]), np.array([0.7, 0.2])),
        X0=(np.array([0.35, -0.9]), np.array([0.7, 0.2])),
        Xc=(np.array([0.0, -3.55]), np.array([0.3, -2.9])),
        W=(np.array([0.0, -3.55]), np.array([0.7, 0.2])),
    )
    regions = [region] * M
    return agents, topology, regions


def _state_slices(agents):
    slices, start = [], 0
    for a in agents:
        slices.append(slice(start, start + a.state_dim))
        start += a.state_dim
    return slices, start


def interactions(agents, topology: NetworkTopology, x: np.ndarray):
    """Per-agent interaction vectors w_i assembled from neighbor states."""
    slices, total = _state_slices(agents)
    if x.shape[-1] != total:
        raise InputError("stacked state dimension mismatch")
    ws = []
    for i, a in enumerate(agents, start=1):
        w = np.zeros(x.shape[:-1] + (a.interaction_dim,))
        for e in topology.inputs_of(i):
            src = slices[e.source - 1]
            nj = src.stop - src.start
            if e.offset + nj > a.interaction_dim:
                raise InputError("edge embedding exceeds interaction dimension")
            w[..., e.offset:e.offset + nj] = x[..., src]
        ws.append(w)
    return ws


def simulate(agents, topology: NetworkTopology, x0, T: int,
             rng: RandomStreams | int) -> np.ndarray:
    """Trajectory of the interconnected network: (T+1) stacked states.

    Noise for (agent i, time k) comes from the counter-based stream
    (i, k, 0), so runs with equal seeds are bitwise identical.
    """
    streams = as_streams(rng)
    slices, total = _state_slices(agents)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (total,):
        raise InputError("x0 dimension must equal the stacked state dimension")
    traj = np.empty((T + 1, total))
    traj[0] = x0
    for k in range(T):
        ws = interactions(agents, topology, traj[k])
        for i, a in enumerate(agents, start=1):
            g = streams.stream(i, k, 0)
            traj[k + 1, slices[i - 1]] = step(a, traj[k, slices[i - 1]], ws[i - 1], g)
    return traj
