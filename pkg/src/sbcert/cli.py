"""Config-driven command-line front end.

Subcommands mirror the synthesis pipeline: ``sample-size`` (a-priori
counts), ``collect`` (draw datasets), ``synthesize`` (per-agent scenario
programs), ``certify`` (compose and bound the risk), ``validate`` (Monte
Carlo check), and ``platoon-demo`` (the whole chain on the built-in vehicle
platoon).  Everything is driven by one JSON config document; reports embed
the config hash, seeds and dataset hashes so results are auditable.

Exit codes: 0 success, 1 infeasible-but-valid-run, 2 config error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import complexity, composition, sampling, scenario, system, validate
from .certificate import (
    DETERMINISTIC_RELAXED,
    DETERMINISTIC_SMALLGAIN,
    STOCHASTIC_RELAXED,
    STOCHASTIC_SMALLGAIN,
    CertificateTemplate,
    RelaxParams,
    SbcSolution,
)
from .errors import CompositionError, DatasetParseError, InputError

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_CONFIG = 2
EXIT_IO = 3

_MODE_ALIASES = {
    "sg": STOCHASTIC_SMALLGAIN,
    "relaxed": STOCHASTIC_RELAXED,
    "det-sg": DETERMINISTIC_SMALLGAIN,
    "det-relaxed": DETERMINISTIC_RELAXED,
}


def _canonical_mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in _MODE_ALIASES.values():
        raise InputError(f"unknown mode {mode!r}")
    return mode


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_config(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def build_agents(config: dict):
    spec = config["agents"]
    if spec.get("builtin") == "platoon":
        return system.build_platoon(
            M=int(spec.get("M", 1)),
            interconnection_degree=float(spec.get("interconnection_degree", 0.01)),
            noise_kind=spec.get("noise", "standard-gaussian"))
    if spec.get("builtin") == "linear":
        noise = system.NoiseSpec(kind=spec.get("noise", "standard-gaussian"),
                                 dimension=len(spec["A"]))
        agent = system.LinearAgent(
            A=np.array(spec["A"]), b=np.array(spec["b"]),
            D=np.array(spec["D"]), R=np.array(spec["R"]), noise=noise)
        M = int(spec.get("M", 1))
        topology = system.NetworkTopology(
            M=M, edges=tuple(tuple(e) for e in spec.get("edges", [])))
        r = config["regions"]
        region = system.RegionSpec(**{
            k: (np.array(r[k][0]), np.array(r[k][1]))
            for k in ("X", "X0", "Xc", "W")})
        return [agent] * M, topology, [region] * M
    raise InputError("agents.builtin must be 'platoon' or 'linear'")


def build_template(config: dict) -> CertificateTemplate:
    t = config["template"]
    return CertificateTemplate(basis=np.array(t["basis"]),
                               bounds=np.array(t["bounds"]))


def build_budget(config: dict, template: CertificateTemplate) -> complexity.ConfidenceBudget:
    b = config["budget"]
    kappa_grid = config["kappa_grid"]
    c = len(scenario.sop_layout(template, config.get("pinned")).names)
    if "c" in b and b["c"] != c:
        free = ", ".join(scenario.sop_layout(template, config.get("pinned")).names)
        raise InputError(
            f"budget.c = {b['c']} inconsistent with the free variables ({free})")
    return complexity.ConfidenceBudget(
        beta1=float(b["beta1"]), beta2=float(b["beta2"]), mu=float(b["mu"]),
        epsilon1=float(b["epsilon1"]), Q=float(b["Q"]), c=c,
        m=len(kappa_grid), exponent=int(b["exponent"]))


def build_lipschitz(config: dict, template: CertificateTemplate,
                    kappa: float) -> complexity.LipschitzBounds:
    lb = dict(config["lipschitz"])
    lb.setdefault("P_max", template.gerschgorin_radius())
    template.validate_p_max(lb["P_max"])
    return complexity.LipschitzBounds(kappa=kappa, **lb)


def region_w_inf(region: system.RegionSpec) -> float:
    lo, hi = region.W
    return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))


def sample_size_info(config: dict) -> dict:
    """L_g and epsilon2 per kappa, then the minimal N and the batch size."""
    template = build_template(config)
    budget = build_budget(config, template)
    kappa_grid = [float(k) for k in config["kappa_grid"]]
    L_g, eps2 = [], []
    for kappa in kappa_grid:
        # relaxed modes run the one-step condition at kappa = 1; the
        # Lipschitz formula needs kappa < 1, so cap just below.
        lb = build_lipschitz(config, template, min(kappa, 1.0 - 1e-9))
        L = (complexity.lipschitz_nonlinear(lb) if config.get("nonlinear")
             else complexity.lipschitz_linear(lb))
        if budget.epsilon1 > L:
            raise InputError(
                f"epsilon1 = {budget.epsilon1} exceeds L_g = {L:.6g} at "
                f"kappa = {kappa}")
        L_g.append(L)
        eps2.append(complexity.epsilon2(budget.epsilon1, L, budget.exponent))
    N = complexity.min_samples(eps2, budget.beta2, budget.c)
    N_hat = complexity.empirical_batch_size(budget.Q, budget.beta1, budget.mu)
    return {"kappa_grid": kappa_grid, "L_g": L_g, "epsilon2": eps2,
            "N": N, "N_hat": N_hat, "c": budget.c, "m": budget.m,
            "epsilon1": budget.epsilon1}


def _write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def _provenance(config: dict, **extra) -> dict:
    prov = {"config_hash": config_hash(config), "seed": config.get("seed", 0)}
    prov.update(extra)
    return prov


def cmd_sample_size(config: dict, out: str) -> int:
    info = sample_size_info(config)
    info["provenance"] = _provenance(config)
    _write_json(os.path.join(out, "sample_size.json"), info)
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_collect(config: dict, out: str) -> int:
    agents, topology, regions = build_agents(config)
    info = sample_size_info(config)
    N = int(config.get("N", info["N"]))
    N_hat = int(config.get("N_hat", info["N_hat"]))
    seed = int(config.get("seed", 0))
    os.makedirs(out, exist_ok=True)
    paths, hashes = [], []
    for i, (agent, region) in enumerate(zip(agents, regions), start=1):
        ds = sampling.draw_dataset(agent, region, N, N_hat, seed + i,
                                   agent_id=f"agent{i}")
        path = os.path.join(out, f"dataset_agent{i}.csv")
        sampling.save_dataset(ds, path)
        paths.append(path)
        hashes.append(file_hash(path))
    manifest = {"datasets": paths, "hashes": hashes, "N": N, "N_hat": N_hat,
                "provenance": _provenance(config)}
    _write_json(os.path.join(out, "manifest.json"), manifest)
    print(f"wrote {len(paths)} dataset(s) to {out}")
    return EXIT_OK


def _relax_params(config: dict) -> RelaxParams:
    _, _, regions = build_agents(config)
    return RelaxParams(
        varrho=float(config.get("varrho", -1e-6)),
        w_inf=region_w_inf(regions[0]),
        horizon=int(config.get("horizon", 0)))


def cmd_synthesize(config: dict, out: str,
                   dataset_paths: list[str] | None = None) -> int:
    mode = _canonical_mode(config["mode"])
    template = build_template(config)
    budget = build_budget(config, template)
    info = sample_size_info(config)
    if dataset_paths is None:
        with open(os.path.join(out, "manifest.json")) as f:
            dataset_paths = json.load(f)["datasets"]
    relax = (_relax_params(config)
             if mode in (STOCHASTIC_RELAXED, DETERMINISTIC_RELAXED) else None)
    all_feasible = True
    for i, path in enumerate(dataset_paths, start=1):
        ds = sampling.load_dataset(path)
        verdict = scenario.synthesize(
            ds, template, config["kappa_grid"], budget,
            fixed=config.get("pinned"), mode=mode, relax=relax,
            required_samples=info["N"])
        payload = verdict.to_dict()
        payload["provenance"] = _provenance(
            config, dataset=path, dataset_hash=file_hash(path))
        _write_json(os.path.join(out, f"verdict_agent{i}.json"), payload)
        all_feasible &= verdict.feasible_for_rop
        eta = verdict.per_kappa_eta[int(np.argmin(verdict.per_kappa_eta))]
        print(f"agent {i}: eta* = {eta:.6g}, eta* + eps1 "
              f"{'<=' if verdict.feasible_for_rop else '>'} 0")
    return EXIT_OK if all_feasible else EXIT_INFEASIBLE


def _load_verdicts(out: str, count: int) -> list[dict]:
    verdicts = []
    for i in range(1, count + 1):
        with open(os.path.join(out, f"verdict_agent{i}.json")) as f:
            verdicts.append(json.load(f))
    return verdicts


def cmd_certify(config: dict, out: str) -> int:
    mode = _canonical_mode(config["mode"])
    agents, topology, regions = build_agents(config)
    budget = build_budget(config, build_template(config))
    verdicts = _load_verdicts(out, len(agents))
    if any(v["solution"] is None for v in verdicts):
        print("cannot certify: at least one agent has no solution")
        return EXIT_INFEASIBLE
    solutions = [SbcSolution.from_dict(v["solution"]) for v in verdicts]
    M = len(agents)
    T = int(config.get("horizon", 0))
    w_infs = [region_w_inf(r) for r in regions]
    prov = _provenance(config, verdicts=[f"verdict_agent{i}.json"
                                         for i in range(1, M + 1)])
    try:
        if mode == STOCHASTIC_SMALLGAIN:
            cert = composition.certify_smallgain(
                solutions, topology, T, [budget.beta1] * M, [budget.beta2] * M,
                all_pairs=bool(config.get("all_pairs_gains")), provenance=prov)
        elif mode == STOCHASTIC_RELAXED:
            cert = composition.certify_relaxed(
                solutions, w_infs, T, [budget.beta1 + budget.beta2] * M,
                provenance=prov)
        elif mode == DETERMINISTIC_RELAXED:
            cert = composition.certify_deterministic(
                solutions, w_infs, [budget.beta2] * M, provenance=prov)
        else:
            cert = composition.deterministic_infinite(
                solutions, topology, [budget.beta2] * M,
                all_pairs=bool(config.get("all_pairs_gains")), provenance=prov)
    except CompositionError as exc:
        if mode == STOCHASTIC_SMALLGAIN and config.get("fallback_relaxed"):
            print(f"small-gain composition failed ({exc}); "
                  "falling back to the union bound")
            relaxed = [SbcSolution.from_dict(dict(v["solution"], kappa=1.0,
                                                  mode=STOCHASTIC_RELAXED))
                       for v in verdicts]
            cert = composition.certify_relaxed(
                relaxed, w_infs, T, [budget.beta1 + budget.beta2] * M,
                provenance=prov)
        else:
            print(f"composition failed: {exc}")
            return EXIT_INFEASIBLE
    cert.save(os.path.join(out, "certificate.json"))
    print(f"risk bound {cert.bound:.6g} over horizon "
          f"{'inf' if math.isinf(cert.horizon) else cert.horizon} "
          f"with confidence {cert.confidence:.6g}")
    return EXIT_OK


def cmd_validate(config: dict, out: str) -> int:
    agents, topology, regions = build_agents(config)
    cert = composition.load_certificate(os.path.join(out, "certificate.json"))
    trials = int(config.get("trials", 10000))
    T = int(config.get("horizon", 0)) if math.isinf(cert.horizon) \
        else int(cert.horizon)
    seed = int(config.get("seed", 0)) + 10_000_019   # distinct from sampling
    report = validate.monte_carlo_risk(
        agents, topology, regions, T, trials, seed,
        event=config.get("collision_event", validate.ANY_AGENT))
    payload = report.to_dict()
    payload["certified_bound"] = cert.bound
    payload["provenance"] = _provenance(config, certificate="certificate.json")
    _write_json(os.path.join(out, "mc_report.json"), payload)
    traj = system.simulate(
        agents, topology,
        np.concatenate([(np.asarray(r.X0[0]) + np.asarray(r.X0[1])) / 2.0
                        for r in regions]),
        T, seed + 1)
    validate.write_trajectory_csv(os.path.join(out, "trajectory.csv"),
                                  traj, agents)
    if cert.per_agent:
        grid = validate.grid_check(
            cert.per_agent[0], regions[0], 41, agents[0], 16, seed + 2,
            w_grid_per_axis=9,
            csv_path=os.path.join(out, "certificate_surface.csv"))
        payload["grid_maxima"] = grid
        _write_json(os.path.join(out, "mc_report.json"), payload)
    print(f"empirical rate {report.empirical_rate:.6g} "
          f"(bound {cert.bound:.6g}, {report.collisions}/{report.trials})")
    return EXIT_OK


def desk_config(M: int = 5, seed: int = 0) -> dict:
    """Desk-scale platoon pipeline config: small enough for a laptop run.

    The accuracy epsilon1 = 0.3 keeps the required N in the tens of
    thousands; lambda, psi, alpha, rho are pinned so the scenario program
    has 8 decision variables (eta, gamma, six coefficients).
    """
    return {
        "mode": STOCHASTIC_SMALLGAIN,
        "agents": {"builtin": "platoon", "M": M,
                   "interconnection_degree": 0.01,
                   "noise": "standard-gaussian"},
        "template": {
            "basis": [[0, 0], [2, 0], [4, 0], [1, 1], [0, 4], [0, 2]],
            "bounds": [[-0.35, 0.35], [-0.001, 0.001], [-0.001, 0.001],
                       [-0.001, 0.001], [-0.14, 0.14], [-0.001, 0.001]],
        },
        "budget": {"beta1": 1e-2, "beta2": 1e-2, "mu": 0.02,
                   "epsilon1": 0.3, "Q": 4.3e-5, "exponent": 3},
        "kappa_grid": [0.9, 0.99],
        "pinned": {"lambda": 9.0, "psi": 0.4, "alpha": 1e-4, "rho": 9e-7},
        "lipschitz": {"L_alpha": 1e-4, "L_rho": 9e-7,
                      "s": 3.6185, "s_prime": 3.6185,
                      "L_A": 0.8125, "L_D": 0.01},
        "horizon": 100,
        "trials": 10000,
        "collision_event": "any-agent",
        "seed": seed,
    }


def full_scale_config(M: int = 100, seed: int = 0) -> dict:
    """Full-size configuration (long-running: N is in the hundreds of
    thousands per agent)."""
    cfg = desk_config(M=M, seed=seed)
    cfg["budget"].update({"beta1": 1e-4, "beta2": 1e-4, "mu": 0.08,
                          "epsilon1": 0.08, "Q": 7.0e-6})
    cfg["pinned"] = {"lambda": 10.0, "psi": 1e-4, "alpha": 1e-4, "rho": 9e-7}
    cfg["template"]["basis"] = [[2, 0], [4, 0], [1, 1], [0, 4], [0, 2]]
    cfg["template"]["bounds"] = [[-0.001, 0.001], [-0.001, 0.001],
                                 [-0.001, 0.001], [-0.14, 0.14],
                                 [-0.001, 0.001]]
    return cfg


def cmd_platoon_demo(M: int, out: str, seed: int, desk: bool = True) -> int:
    config = desk_config(M=M, seed=seed) if desk \
        else full_scale_config(M=M, seed=seed)
    os.makedirs(out, exist_ok=True)
    _write_json(os.path.join(out, "config.json"), config)
    t0 = time.time()
    steps = [
        ("sample-size", lambda: cmd_sample_size(config, out)),
        ("collect", lambda: cmd_collect(config, out)),
        ("synthesize", lambda: cmd_synthesize(config, out)),
        ("certify", lambda: cmd_certify(config, out)),
        ("validate", lambda: cmd_validate(config, out)),
    ]
    for name, fn in steps:
        print(f"== {name} ==")
        code = fn()
        if code != EXIT_OK:
            print(f"{name} returned exit code {code}")
            return code
    summary = {
        "elapsed_seconds": round(time.time() - t0, 3),
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "outputs": sorted(os.listdir(out)),
        "provenance": _provenance(config),
    }
    _write_json(os.path.join(out, "summary.json"), summary)
    print(f"pipeline finished in {summary['elapsed_seconds']} s")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbcert",
        description="Data-driven barrier-certificate synthesis for "
                    "interconnected stochastic agents")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config document")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override config seed")
        p.add_argument("--mode", default=None,
                       choices=sorted(_MODE_ALIASES),
                       help="override config mode")

    for name in ("sample-size", "collect", "synthesize", "certify", "validate"):
        common(sub.add_parser(name))
    demo = sub.add_parser("platoon-demo",
                          help="full pipeline on the built-in platoon")
    demo.add_argument("--agents", type=int, default=5)
    demo.add_argument("--out", default="out")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--desk-scale", action="store_true", default=True)
    demo.add_argument("--full-scale", dest="desk_scale", action="store_false")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "platoon-demo":
            return cmd_platoon_demo(args.agents, args.out, args.seed,
                                    desk=args.desk_scale)
        config = load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        if args.mode is not None:
            config["mode"] = _MODE_ALIASES[args.mode]
        handler = {
            "sample-size": cmd_sample_size,
            "collect": cmd_collect,
            "synthesize": cmd_synthesize,
            "certify": cmd_certify,
            "validate": cmd_validate,
        }[args.command]
        return handler(config, args.out)
    except InputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc!r}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetParseError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
