"""Scenario sampling: i.i.d. draws from X x W with noise-replicate successors.

Datasets are persisted as a CSV file (one row per sampled point plus one row
per noise replicate) with a JSON sidecar carrying the metadata needed to
reproduce the draw (seed, region boxes, N, N_hat, agent label).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DatasetParseError, InputError
from .streams import as_streams
from .system import LinearAgent, RegionSpec, step_batch


@dataclass(frozen=True)
class SamplePoint:
    x_hat: np.ndarray
    w_hat: np.ndarray
    successors: np.ndarray  # N_hat x n
    in_X0: bool
    in_Xc: bool


@dataclass
class Dataset:
    x_hat: np.ndarray       # N x n
    w_hat: np.ndarray       # N x p
    successors: np.ndarray  # N x N_hat x n
    in_X0: np.ndarray       # N bools
    in_Xc: np.ndarray       # N bools
    region: RegionSpec
    seed: int
    agent_id: str = "agent"

    def __post_init__(self):
        N = len(self.x_hat)
        if not (len(self.w_hat) == len(self.successors) == len(self.in_X0)
                == len(self.in_Xc) == N):
            raise InputError("dataset arrays must have equal length")

    def __len__(self) -> int:
        return len(self.x_hat)

    @property
    def n_hat(self) -> int:
        return self.successors.shape[1]

    def point(self, l: int) -> SamplePoint:
        return SamplePoint(self.x_hat[l], self.w_hat[l], self.successors[l],
                           bool(self.in_X0[l]), bool(self.in_Xc[l]))

    @property
    def points(self) -> list[SamplePoint]:
        return [self.point(l) for l in range(len(self))]


def _uniform_box(rng, box):
    lo, hi = box
    return lo + (hi - lo) * rng.random(lo.shape)


def draw_dataset(agent, region: RegionSpec, N: int, N_hat: int, rng,
                 agent_id: str = "agent") -> Dataset:
    """Draw N i.i.d. pairs uniform over X x W with N_hat successor replicates.

    Point l consumes exactly the counter-based stream (seed, l): first the
    state/interaction uniforms, then the noise matrix for its replicates.
    """
    if N < 1 or N_hat < 1:
        raise InputError("N and N_hat must be >= 1")
    if agent.noise.deterministic and N_hat != 1:
        raise InputError("deterministic agents take exactly one replicate")
    streams = as_streams(rng)
    n, p = agent.state_dim, agent.interaction_dim
    x_hat = np.empty((N, n))
    w_hat = np.empty((N, p))
    succ = np.empty((N, N_hat, n))
    linear = isinstance(agent, LinearAgent)
    for l in range(N):
        g = streams.stream(l)
        x = _uniform_box(g, region.X)
        w = _uniform_box(g, region.W)
        noise = agent.noise.draw(g, count=N_hat)
        x_hat[l] = x
        w_hat[l] = w
        if linear:
            xs = np.broadcast_to(x, (N_hat, n))
            ws = np.broadcast_to(w, (N_hat, p))
            succ[l] = step_batch(agent, xs, ws, noise)
        else:
            base = np.asarray(agent.transition(x, w), dtype=float)
            succ[l] = base + noise @ agent.R.T
    return Dataset(
        x_hat=x_hat, w_hat=w_hat, successors=succ,
        in_X0=region.in_X0(x_hat), in_Xc=region.in_Xc(x_hat),
        region=region, seed=streams.seed, agent_id=agent_id,
    )


def _fmt(v: float) -> str:
    return "%.17g" % v


def save_dataset(dataset: Dataset, path: str) -> None:
    """Write the CSV + JSON sidecar pair; values at 17 significant digits."""
    N, n = dataset.x_hat.shape
    p = dataset.w_hat.shape[1]
    n_hat = dataset.n_hat
    width = max(n + p + 2, n)
    with open(path, "w") as f:
        f.write("# sbcert dataset v1\n")
        f.write("# point rows: kind,point,replicate, x[0..n), w[0..p), in_X0, in_Xc\n")
        f.write("# succ rows:  kind,point,replicate, x_next[0..n)\n")
        header = ["kind", "point", "replicate"] + [f"v{i}" for i in range(width)]
        f.write(",".join(header) + "\n")
        for l in range(N):
            vals = ([_fmt(v) for v in dataset.x_hat[l]]
                    + [_fmt(v) for v in dataset.w_hat[l]]
                    + [str(int(dataset.in_X0[l])), str(int(dataset.in_Xc[l]))])
            vals += [""] * (width - len(vals))
            f.write(",".join(["point", str(l), ""] + vals) + "\n")
            for j in range(n_hat):
                vals = [_fmt(v) for v in dataset.successors[l, j]]
                vals += [""] * (width - len(vals))
                f.write(",".join(["succ", str(l), str(j)] + vals) + "\n")
    meta = {
        "format": "sbcert-dataset-v1",
        "seed": dataset.seed,
        "agent_id": dataset.agent_id,
        "N": N,
        "N_hat": n_hat,
        "state_dim": n,
        "interaction_dim": p,
        "region": {
            name: [list(getattr(dataset.region, name)[0]),
                   list(getattr(dataset.region, name)[1])]
            for name in ("X", "X0", "Xc", "W")
        },
    }
    with open(_sidecar(path), "w") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")


def _sidecar(path: str) -> str:
    return str(path) + ".meta.json"


def load_dataset(path: str) -> Dataset:
    if not os.path.exists(_sidecar(path)):
        raise DatasetParseError(f"missing sidecar {_sidecar(path)}")
    with open(_sidecar(path)) as f:
        meta = json.load(f)
    if meta.get("format") != "sbcert-dataset-v1":
        raise DatasetParseError("unrecognized dataset format in sidecar")
    N, n_hat = meta["N"], meta["N_hat"]
    n, p = meta["state_dim"], meta["interaction_dim"]
    region = RegionSpec(**{
        name: (np.array(meta["region"][name][0]), np.array(meta["region"][name][1]))
        for name in ("X", "X0", "Xc", "W")
    })
    x_hat = np.empty((N, n))
    w_hat = np.empty((N, p))
    succ = np.empty((N, n_hat, n))
    in_x0 = np.zeros(N, dtype=bool)
    in_xc = np.zeros(N, dtype=bool)
    seen_points = 0
    seen_succ = 0
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#") or line.startswith("kind,"):
                continue
            cells = line.split(",")
            try:
                kind, l = cells[0], int(cells[1])
                if kind == "point":
                    vals = cells[3:3 + n + p + 2]
                    x_hat[l] = [float(v) for v in vals[:n]]
                    w_hat[l] = [float(v) for v in vals[n:n + p]]
                    in_x0[l] = bool(int(vals[n + p]))
                    in_xc[l] = bool(int(vals[n + p + 1]))
                    seen_points += 1
                elif kind == "succ":
                    j = int(cells[2])
                    succ[l, j] = [float(v) for v in cells[3:3 + n]]
                    seen_succ += 1
                else:
                    raise ValueError(f"unknown row kind {kind!r}")
            except (ValueError, IndexError) as exc:
                raise DatasetParseError(str(exc), line=lineno) from None
    if seen_points != N or seen_succ != N * n_hat:
        raise DatasetParseError(
            f"row count mismatch: {seen_points} point rows, {seen_succ} succ rows, "
            f"expected {N} and {N * n_hat}")
    return Dataset(x_hat=x_hat, w_hat=w_hat, successors=succ,
                   in_X0=in_x0, in_Xc=in_xc, region=region,
                   seed=meta["seed"], agent_id=meta["agent_id"])
