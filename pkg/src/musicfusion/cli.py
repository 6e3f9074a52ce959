"""Command-line entry points: ``map``, ``mc``, ``sweep`` and ``oracle``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, default_scenario, parse_scenario, scenario_digest, write_scenario
from .experiment import draw_scene, fuse_scenario, run_experiment, sweep_subcarriers
from .fusion import MAP_METHODS, METHODS, BudgetExceededError, best_assignment, exact_ml_oracle


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario JSON file (defaults apply to missing keys)")
    common.add_argument("--seed", type=_u64, help="master seed, overrides the config")
    common.add_argument("--methods", type=_csv_list, help=f"comma list from {','.join(METHODS)}")
    common.add_argument("--trials", type=int, help="Monte Carlo trial count")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--q-list", type=_int_list, help="subcarrier counts for sweep, e.g. 64,128,256")
    common.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo")
    common.add_argument("--db", action="store_true", help="write maps in dB relative to the highest peak")

    parser = argparse.ArgumentParser(prog="musicfusion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("map", parents=[common], help="per-pair and combined likelihood maps for one scene")
    sub.add_parser("mc", parents=[common], help="Monte Carlo RMSE experiment")
    sub.add_parser("sweep", parents=[common], help="RMSE and diagonality versus subcarrier count")
    sub.add_parser("oracle", parents=[common], help="compare the proposed fusion with the exact ML search")
    return parser


def _load(args):
    cfg = parse_scenario(args.config) if args.config else default_scenario()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("trials: must be >= 1")
        changes["trials"] = args.trials
    if args.methods is not None:
        bad = [m for m in args.methods if m not in METHODS]
        if bad or not args.methods:
            raise ConfigError(f"methods: unknown method {bad[0] if bad else '(empty)'}")
        changes["methods"] = tuple(args.methods)
    return replace(cfg, **changes)


def _cmd_map(cfg, args, out: Path) -> None:
    targets, obs, covs = draw_scene(cfg, 0)
    methods = [m for m in cfg.methods if m in MAP_METHODS] or list(MAP_METHODS)
    res = fuse_scenario(cfg, covs, methods, truth=targets)
    digest = scenario_digest(cfg)
    for m in methods:
        for lm in res.pair_maps[m]:
            io.export_map(lm, out / f"map_{m}_pair{lm.pair_id}.csv", args.db, digest, cfg.seed)
        io.export_map(res.combined_maps[m], out / f"map_{m}_combined.csv", args.db, digest, cfg.seed)
    for cov in covs:
        io.export_covariance(cov, out / f"cov_pair{cov.pair_id}.txt", digest, cfg.seed)
    scene = {
        "scenario_digest": digest,
        "seed": cfg.seed,
        "truth": targets.tolist(),
        "estimates": {m: res.positions[m].tolist() for m in methods},
        "weights": dict(zip([str(p.pair_id) for p in cfg.pairs], res.weights)),
        "payload_elements": {str(p.pair_id): {"covariance": p.dim ** 2, "channel": p.subcarriers * p.dim}
                             for p in cfg.pairs},
    }
    (out / "scene.json").write_text(json.dumps(scene, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(methods) * (len(cfg.pairs) + 1)} maps for {len(methods)} methods to {out}")


def _print_report(rep) -> None:
    for m, v in rep.rmse.items():
        ci = rep.ci95[m]
        print(f"  {m:12s} rmse={v:.3f} m" + (f" +/- {ci:.3f}" if ci is not None else ""))
    for pid, z in rep.mean_diagonality.items():
        print(f"  pair {pid} mean diagonality={z:.3f}")


def _cmd_mc(cfg, args, out: Path) -> None:
    rep = run_experiment(cfg, cfg.trials, cfg.methods, workers=args.workers)
    io.write_report(rep, out / "report.json")
    io.write_trial_log(rep.trial_results, out / "trials.jsonl", rep.scenario_digest, rep.seed)
    print(f"{rep.n_trials} trials, scenario {rep.scenario_digest}, seed {rep.seed}")
    _print_report(rep)


def _cmd_sweep(cfg, args, out: Path) -> None:
    q_list = args.q_list or [64, 128, 256, 512]
    reports = sweep_subcarriers(cfg, q_list, cfg.trials, cfg.methods, workers=args.workers)
    io.write_report(reports, out / "sweep_report.json")
    for Q, rep in zip(q_list, reports):
        io.write_trial_log(rep.trial_results, out / f"trials_Q{Q}.jsonl", rep.scenario_digest, rep.seed)
        print(f"Q={Q}")
        _print_report(rep)


def _cmd_oracle(cfg, args, out: Path) -> None:
    targets, obs, covs = draw_scene(cfg, 0)
    proposed = fuse_scenario(cfg, covs, ["proposed"], truth=targets).positions["proposed"]
    oracle = exact_ml_oracle(covs, cfg.pairs, cfg.grid, cfg.n_targets, budget=cfg.oracle_budget)
    cells_p = cfg.grid.cell_of(proposed)
    cells_o = cfg.grid.cell_of(oracle)
    # match by cell distance; the two outputs have no common ordering
    dist = np.abs(cells_p[:, None, :] - cells_o[None, :, :]).max(axis=-1)
    perm = list(best_assignment(cells_p.astype(float), cells_o.astype(float)))
    worst = int(dist[np.arange(len(perm)), perm].max())
    agreement = "exact" if worst == 0 else ("within_one_cell" if worst <= 1 else "mismatch")
    result = {
        "scenario_digest": scenario_digest(cfg),
        "seed": cfg.seed,
        "truth": targets.tolist(),
        "proposed": proposed.tolist(),
        "oracle": oracle[perm].tolist(),
        "max_cell_offset": worst,
        "agreement": agreement,
    }
    (out / "oracle.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"proposed: {proposed.tolist()}")
    print(f"oracle:   {oracle[perm].tolist()}")
    print(f"agreement = {agreement}")


COMMANDS = {"map": _cmd_map, "mc": _cmd_mc, "sweep": _cmd_sweep, "oracle": _cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load(args)
        args.out.mkdir(parents=True, exist_ok=True)
        write_scenario(cfg, args.out / "scenario.json")
        COMMANDS[args.command](cfg, args, args.out)
    except (ConfigError, BudgetExceededError, io.FormatError, OSError, ValueError) as exc:
        print(f"musicfusion {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
