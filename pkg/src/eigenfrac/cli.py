"""Command-line front end.

Three subcommands: ``simulate`` runs one evolution and writes its node
ledger (CSV) plus optional VTK snapshots; ``study`` runs one of the
named verification studies; ``oracle`` replays the micro-instance
corpus against exhaustive enumeration.  Exit codes: 0 success,
1 configuration problem, 2 violated run invariant, 3 linear-solver
failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import experiments
from .config import (ORACLE_DEFAULTS, ORACLE_SCHEMA, SIMULATE_DEFAULTS,
                     SIMULATE_SCHEMA, STUDY_DEFAULTS, STUDY_SCHEMA,
                     ConfigError, config_hash, coupling_from_config,
                     domain_from_config, elastic_tensor_from_config,
                     load_from_config, strategy_from_config, validate_config)
from .evolution import (EvolutionResult, InvariantViolation, RunSetup,
                        TimeGrid, evolve, verify_discrete_estimate)
from .fem import SolverFailure
from .geometry import good_set
from .jit import JIT_ENABLED, set_thread_count
from .mesh import build_structured_mesh, couple_resolution

CSV_SCHEMA_VERSION = 1


def write_run_csv(path: str, res: EvolutionResult) -> None:
    cols = ("schema", "index", "t", "elastic", "surface", "lambda", "work",
            "balance_defect", "crack_size", "rupture")
    with open(path, "w", newline="") as f:
        f.write(",".join(cols) + "\n")
        for r in res.records:
            f.write(",".join(map(str, (
                CSV_SCHEMA_VERSION, r.index, r.t, r.elastic, r.surface,
                r.lam, r.work_cum, r.balance_defect, r.crack_size,
                int(r.ruptured)))) + "\n")


def write_vtk(path: str, mesh, u: np.ndarray, gamma: np.ndarray,
              broken_mask: np.ndarray, covered_mask: np.ndarray,
              kept_mask: np.ndarray, title: str = "state") -> None:
    """Legacy ASCII VTK unstructured grid with the node and cell fields."""
    with open(path, "w", newline="") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(title[:255] + "\n")
        f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_vert} double\n")
        for x, y in mesh.verts:
            f.write(f"{x} {y} 0.0\n")
        f.write(f"CELLS {mesh.n_tri} {4 * mesh.n_tri}\n")
        for a, b, c in mesh.tris:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {mesh.n_tri}\n")
        f.write("5\n" * mesh.n_tri)
        f.write(f"POINT_DATA {mesh.n_vert}\n")
        f.write("SCALARS displacement double 1\nLOOKUP_TABLE default\n")
        for v in u:
            f.write(f"{v}\n")
        f.write(f"CELL_DATA {mesh.n_tri}\n")
        f.write("SCALARS broken int 1\nLOOKUP_TABLE default\n")
        for v in broken_mask.astype(int):
            f.write(f"{v}\n")
        f.write("SCALARS eigenstrain_mag double 1\nLOOKUP_TABLE default\n")
        for v in np.hypot(gamma[:, 0], gamma[:, 1]):
            f.write(f"{v}\n")
        f.write("SCALARS covered int 1\nLOOKUP_TABLE default\n")
        for v in covered_mask.astype(int):
            f.write(f"{v}\n")
        f.write("SCALARS kept int 1\nLOOKUP_TABLE default\n")
        for v in kept_mask.astype(int):
            f.write(f"{v}\n")


def _cmd_simulate(cfg: dict, out_dir: str) -> int:
    spec = domain_from_config(cfg)
    coupling = coupling_from_config(cfg)
    eps = cfg["epsilon"]
    h = couple_resolution(eps, coupling)
    mesh = build_structured_mesh(spec, h, pad=eps + 1.5 * h)
    every = cfg["snapshots"]
    n_nodes = (1 << cfg["time_level"]) + 1
    capture = tuple(range(0, n_nodes, every)) if every else ()
    setup = RunSetup(mesh=mesh, eps=eps, kappa=cfg["kappa"],
                     c_tensor=elastic_tensor_from_config(cfg),
                     load=load_from_config(cfg), grid=TimeGrid(cfg["time_level"]),
                     strategy=strategy_from_config(cfg),
                     count_exterior=cfg["count_exterior"],
                     capture_nodes=capture)
    res = evolve(setup)
    est = verify_discrete_estimate(res)
    if not est.ok:
        print(f"energy estimate violated on {est.n_violations} node pairs "
              f"(worst overshoot {est.worst_overshoot:.3e})", file=sys.stderr)
        return 2

    os.makedirs(out_dir, exist_ok=True)
    write_run_csv(os.path.join(out_dir, "run.csv"), res)
    if capture:
        snap_dir = os.path.join(out_dir, "snapshots")
        os.makedirs(snap_dir, exist_ok=True)
        covered = res.ledger.counts > 0
        kept = good_set(mesh, covered).kept_mask
        for idx, (u, gamma, _ids) in sorted(res.captured.items()):
            write_vtk(os.path.join(snap_dir, f"node_{idx:04d}.vtk"), mesh,
                      u, gamma, res.ledger.broken_mask, covered, kept,
                      title=f"node {idx}")
    last = res.records[-1]
    print(f"config {config_hash(cfg)[:12]}  jit={'on' if JIT_ENABLED else 'off'}")
    print(f"nodes {len(res.records)}  crack {last.crack_size}  "
          f"rupture t*={res.rupture_time}")
    print(f"E={last.total:.6g} (elastic {last.elastic:.3g} + surface "
          f"{last.surface:.6g})  lambda={last.lam:.6g}")
    print(f"max balance defect {res.max_balance_defect:.3e}  "
          f"estimate worst overshoot {est.worst_overshoot:.3e}")
    print(f"wrote {os.path.join(out_dir, 'run.csv')}")
    return 0


def _cmd_study(cfg: dict, out_dir: str) -> int:
    kind = cfg["kind"]
    spec = domain_from_config(cfg)
    coupling = coupling_from_config(cfg)
    if kind == "tube":
        rep = experiments.tube_convergence_study(
            eps_list=cfg["eps_list"], coupling=coupling, spec=spec)
    elif kind == "bar":
        rep, _ = experiments.bar_rupture_study(
            eps_list=cfg["eps_list"], level=cfg["level"], t_max=cfg["t_max"],
            kappa=cfg["kappa"], coupling=coupling, spec=spec)
    elif kind == "balance":
        rep = experiments.balance_defect_study(
            levels=tuple(cfg["levels"]), eps=cfg["eps_list"][0],
            t_max=cfg["t_max"], kappa=cfg["kappa"], coupling=coupling,
            spec=spec)
    elif kind == "simultaneous":
        rep = experiments.simultaneous_study(
            schedule=[tuple(p) for p in cfg["schedule"]], t_max=cfg["t_max"],
            kappa=cfg["kappa"], coupling=coupling, spec=spec)
    elif kind == "goodset":
        rep = experiments.goodset_convergence_study(
            eps_list=cfg["eps_list"], level=cfg["level"], t_max=cfg["t_max"],
            kappa=cfg["kappa"], coupling=coupling, spec=spec)
    else:
        rep = experiments.growth_study(n_clouds=cfg["n_clouds"],
                                       seed=cfg["seed"])
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"study_{kind}.csv")
    rep.to_csv(csv_path)
    summary = rep.summary() + f"\nconfig_hash: {config_hash(cfg)}\n"
    with open(os.path.join(out_dir, "summary.txt"), "w") as f:
        f.write(summary)
    print(summary)
    print(f"wrote {csv_path}")
    return 0


def _cmd_oracle(cfg: dict, out_dir: str) -> int:
    corpus = experiments.build_oracle_corpus(n=cfg["n_instances"],
                                             seed=cfg["seed"])
    rep = experiments.run_oracle_comparison(
        corpus, strategy=strategy_from_config(cfg), cap=cfg["cap"])
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "oracle.csv")
    rep.to_csv(csv_path)
    print(rep.summary())
    print(f"wrote {csv_path}")
    if not rep.meta["all_never_below"]:
        print("strategy undercut the exhaustive optimum", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="eigenfrac",
        description="Quasi-static brittle fracture by eigenstrain relaxation "
                    "with neighborhood surface accounting.")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker thread cap (clamped to the machine)")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "run one evolution"),
                        ("study", "run a named verification study"),
                        ("oracle", "compare against exhaustive enumeration")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=(name != "oracle"),
                       help="JSON configuration file")
        p.add_argument("--out", default="out", help="output directory")
    args = ap.parse_args(argv)

    try:
        if args.command == "oracle" and args.config is None:
            raw = {}
        else:
            with open(args.config) as f:
                raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1

    schema, defaults, run = {
        "simulate": (SIMULATE_SCHEMA, SIMULATE_DEFAULTS, _cmd_simulate),
        "study": (STUDY_SCHEMA, STUDY_DEFAULTS, _cmd_study),
        "oracle": (ORACLE_SCHEMA, ORACLE_DEFAULTS, _cmd_oracle),
    }[args.command]
    try:
        cfg = validate_config(raw, schema, defaults)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1

    set_thread_count(args.threads if args.threads is not None
                     else cfg.get("threads", 1))
    try:
        return run(cfg, args.out)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"bad configuration value: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
