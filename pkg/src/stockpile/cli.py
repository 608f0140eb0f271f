"""Batch command-line front end.

Commands (each takes ``--config`` and ``--out``):

``train``
    Train a policy; writes ``policy.json``, ``training_log.csv``, and
    the resolved-config echo.
``simulate``
    Run a trained policy over freshly sampled paths; writes
    ``capacities.csv``, ``trajectories.csv``, ``prices.csv``,
    ``storage_values.csv``.
``bench``
    Solve the scenario-tree program and the perfect-foresight program
    over all paths; writes ``ef_*.csv`` and ``pf_*.csv`` tables.
``acf``
    Autocorrelation report for the series file named in the config;
    writes ``acf.csv``.
``curves``
    Bid curves, price duration curve, and storage trajectory bands
    from a trained policy; writes ``bids.csv``, ``duration.csv``,
    ``bands.csv``.
``oracle``
    Train, solve the scenario tree, and emit the comparison row
    (oracle optimum, trained lower bound, relative gap) to stdout and
    ``oracle.csv``.

Every command writes ``resolved_config.yaml`` (the fully resolved
configuration plus input content hashes) into the output directory, so
a result folder documents exactly what produced it. All randomness is
seeded from the config (``--seed`` overrides); reruns with identical
inputs give identical outputs.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
failure, 1 unexpected internal error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import analysis, benchmarks, sddp, weather
from .config import ScenarioConfig, echo_text, validate_config
from .errors import (
    ConfigError,
    DataError,
    EmptyPool,
    SolverFailure,
    StockpileError,
    TreeTooLarge,
)

POLICY_FILE = "policy.json"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stockpile",
        description="Capacity expansion and storage bidding toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="path to the YAML run configuration")
        p.add_argument("--out", default="out",
                       help="output directory (created if missing)")

    train = sub.add_parser("train", help="train a policy")
    common(train)
    train.add_argument("--seed", type=int, help="override training seed")
    train.add_argument("--max-iterations", type=int,
                       help="override iteration budget")
    train.add_argument("--time-limit", type=float,
                       help="override wall-clock budget in seconds")
    train.add_argument("--threads", type=int,
                       help="override backward-pass thread count")

    simulate = sub.add_parser("simulate", help="simulate a trained policy")
    common(simulate)
    simulate.add_argument("--policy", help="policy file "
                          f"(default <out>/{POLICY_FILE})")
    simulate.add_argument("--seed", type=int,
                          help="override simulation seed")
    simulate.add_argument("--n-paths", type=int,
                          help="override number of sampled paths")

    bench = sub.add_parser("bench", help="solve the reference programs")
    common(bench)

    acf = sub.add_parser("acf", help="stage-mean autocorrelation report")
    common(acf)

    curves = sub.add_parser("curves", help="bid and duration curve tables")
    common(curves)
    curves.add_argument("--policy", help="policy file "
                        f"(default <out>/{POLICY_FILE})")
    curves.add_argument("--seed", type=int,
                        help="override simulation seed")
    curves.add_argument("--n-paths", type=int,
                        help="override number of sampled paths")

    oracle = sub.add_parser("oracle",
                            help="train and compare against the exact tree")
    common(oracle)
    oracle.add_argument("--seed", type=int, help="override training seed")
    oracle.add_argument("--max-iterations", type=int,
                        help="override iteration budget")
    oracle.add_argument("--time-limit", type=float,
                        help="override wall-clock budget in seconds")
    oracle.add_argument("--threads", type=int,
                        help="override backward-pass thread count")
    return parser


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _training_options(cfg: ScenarioConfig, args,
                      out: Path) -> sddp.TrainOptions:
    if cfg.training is None:
        raise ConfigError(["training: block required by this command"])
    overrides = {"log_path": str(out / "training_log.csv")}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_iterations is not None:
        overrides["max_iterations"] = args.max_iterations
    if args.time_limit is not None:
        overrides["time_limit"] = args.time_limit
    if args.threads is not None:
        overrides["threads"] = args.threads
    return dataclasses.replace(cfg.training, **overrides)


def _load_policy(path, cfg: ScenarioConfig) -> sddp.Policy:
    try:
        return sddp.load_policy(path, cfg.catalog, cfg.scenario, cfg.lattice)
    except OSError as exc:
        raise DataError(f"cannot read policy {str(path)!r}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"policy {str(path)!r} is not valid JSON: "
                        f"{exc}") from exc


def _simulation_seed(cfg: ScenarioConfig, args) -> int:
    if args.seed is not None:
        return args.seed
    if cfg.simulation_seed is None:
        raise ConfigError(["simulation.seed: required by this command"])
    return cfg.simulation_seed


def _sample_paths(lattice, seed: int, n: int) -> list:
    rng = np.random.default_rng(seed)
    return [weather.sample_path(lattice, rng) for _ in range(n)]


def _run_train(args, cfg: ScenarioConfig, out: Path) -> int:
    options = _training_options(cfg, args, out)
    policy = sddp.train(cfg.catalog, cfg.scenario, cfg.lattice, options)
    policy_path = out / POLICY_FILE
    sddp.save_policy(policy, policy_path)
    _write(out / "resolved_config.yaml", echo_text(cfg))
    lb = sddp.lower_bound(policy)
    print(f"trained {len(policy.training_log)} iterations, "
          f"lower bound {lb!r} MEUR, stopped: {policy.stopped_reason}")
    print(f"policy written to {policy_path}")
    return 0


def _run_simulate(args, cfg: ScenarioConfig, out: Path) -> int:
    policy_path = Path(args.policy) if args.policy else out / POLICY_FILE
    policy = _load_policy(policy_path, cfg)
    seed = _simulation_seed(cfg, args)
    n_paths = args.n_paths if args.n_paths is not None else \
        cfg.simulation_paths
    paths = _sample_paths(cfg.lattice, seed, n_paths)
    trajectories = sddp.simulate(policy, paths)

    lines = ["label,value"]
    for label, value in zip(policy.layout.labels, policy.capacities):
        lines.append(f"{label},{float(value)!r}")
    _write(out / "capacities.csv", "\n".join(lines) + "\n")

    ldes = [s.name for s in cfg.catalog.long_duration_storages]
    header = "path,stage,node,stage_cost_meur,theta_meur"
    header += "".join(f",closing_{name}_gwh" for name in ldes)
    rows = [header]
    price_rows = ["path,stage,period,price_eur_per_mwh"]
    value_rows = ["path,stage,period,storage,value_eur_per_mwh"]
    for p, trajectory in enumerate(trajectories):
        for rec in trajectory.records:
            node = "" if rec.node is None else rec.node
            theta = "" if rec.theta is None else repr(rec.theta)
            line = f"{p},{rec.stage},{node},{rec.stage_cost!r},{theta}"
            for name in ldes:
                if rec.dispatch is None:
                    line += ","
                else:
                    line += f",{float(rec.dispatch.level[name][-1])!r}"
            rows.append(line)
            if rec.dispatch is None:
                continue
            for h, price in enumerate(rec.dispatch.prices):
                price_rows.append(f"{p},{rec.stage},{h},{float(price)!r}")
            for name, series in rec.dispatch.storage_values.items():
                for h, value in enumerate(series):
                    value_rows.append(
                        f"{p},{rec.stage},{h},{name},{float(value)!r}")
    _write(out / "trajectories.csv", "\n".join(rows) + "\n")
    _write(out / "prices.csv", "\n".join(price_rows) + "\n")
    _write(out / "storage_values.csv", "\n".join(value_rows) + "\n")
    _write(out / "resolved_config.yaml",
           echo_text(cfg, {"policy_sha256": _sha256(policy_path)}))
    costs = np.array([t.total_cost for t in trajectories])
    se = costs.std(ddof=1) / np.sqrt(len(costs)) if len(costs) > 1 else 0.0
    print(f"simulated {len(costs)} paths: mean cost {costs.mean():.6e} MEUR "
          f"(se {se:.3e})")
    return 0


def _run_bench(args, cfg: ScenarioConfig, out: Path) -> int:
    try:
        ef = benchmarks.extensive_form(cfg.catalog, cfg.scenario,
                                       cfg.lattice)
        paths = benchmarks.enumerate_paths(cfg.lattice)
    except TreeTooLarge as exc:
        raise DataError(str(exc)) from exc
    pf = benchmarks.perfect_foresight(cfg.catalog, cfg.scenario, paths)
    for prefix, result in (("ef", ef), ("pf", pf)):
        for name, text in result.to_tables().items():
            _write(out / f"{prefix}_{name}.csv", text)
    _write(out / "resolved_config.yaml", echo_text(cfg))
    print(f"scenario tree optimum {ef.objective:.6e} MEUR over "
          f"{cfg.lattice.path_count} paths")
    print(f"perfect foresight optimum {pf.objective:.6e} MEUR")
    return 0


def _run_acf(args, cfg: ScenarioConfig, out: Path) -> int:
    if cfg.analysis.series is None:
        raise ConfigError(["analysis.series: required by the acf command"])
    try:
        table = weather.ingest_series(cfg.analysis.series)
    except OSError as exc:
        raise DataError(f"cannot read series "
                        f"{cfg.analysis.series!r}: {exc}") from exc
    report = weather.acf_test(table, stage_length=cfg.analysis.stage_length,
                              max_lag=cfg.analysis.max_lag)
    _write(out / "acf.csv", report.to_table())
    _write(out / "resolved_config.yaml",
           echo_text(cfg, {"series_sha256": _sha256(cfg.analysis.series)}))
    worst = max(float(np.max(np.abs(r)))
                for r in report.correlations.values())
    print(f"acf over {report.n_samples} stage means, band "
          f"{report.band:.4f}, max |rho| {worst:.4f}")
    return 0


def _run_curves(args, cfg: ScenarioConfig, out: Path) -> int:
    policy_path = Path(args.policy) if args.policy else out / POLICY_FILE
    policy = _load_policy(policy_path, cfg)
    if not cfg.catalog.long_duration_storages:
        raise DataError("curves need a long-duration storage in the catalog")
    name = cfg.catalog.long_duration_storages[0].name

    bid_lines = []
    for stage in range(cfg.lattice.n_stages + 1):
        try:
            curve = analysis.msv_curve(policy, stage,
                                       grid_step=cfg.analysis.grid_step,
                                       storage=name)
        except EmptyPool:
            continue
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        body = curve.to_table().splitlines()
        if not bid_lines:
            bid_lines.append(body[0])
        bid_lines.extend(body[1:])
    if not bid_lines:
        raise DataError("no cut pool has been trained; run train first")
    _write(out / "bids.csv", "\n".join(bid_lines) + "\n")

    seed = _simulation_seed(cfg, args)
    n_paths = args.n_paths if args.n_paths is not None else \
        cfg.simulation_paths
    paths = _sample_paths(cfg.lattice, seed, n_paths)
    trajectories = sddp.simulate(policy, paths)
    duration = analysis.price_duration_curve(trajectories)
    _write(out / "duration.csv", duration.to_table())
    e_ini = float(policy.capacities[policy.layout.position(f"ini:{name}")])
    bands = analysis.trajectory_stats(trajectories, e_ini, storage=name)
    _write(out / "bands.csv", bands.to_table())
    _write(out / "resolved_config.yaml",
           echo_text(cfg, {"policy_sha256": _sha256(policy_path)}))
    print(f"wrote bid curve ({len(bid_lines) - 1} rows), duration curve, "
          f"and trajectory bands for {name!r}")
    return 0


def _run_oracle(args, cfg: ScenarioConfig, out: Path) -> int:
    options = _training_options(cfg, args, out)
    policy = sddp.train(cfg.catalog, cfg.scenario, cfg.lattice, options)
    try:
        ef = benchmarks.extensive_form(cfg.catalog, cfg.scenario,
                                       cfg.lattice)
    except TreeTooLarge as exc:
        raise DataError(str(exc)) from exc
    lb = sddp.lower_bound(policy)
    gap = abs(ef.objective - lb) / max(1.0, abs(ef.objective))
    row = "oracle_optimum_meur,sddp_lower_bound_meur,relative_gap\n" \
          f"{ef.objective!r},{lb!r},{gap!r}\n"
    _write(out / "oracle.csv", row)
    sddp.save_policy(policy, out / POLICY_FILE)
    _write(out / "resolved_config.yaml", echo_text(cfg))
    print(row, end="")
    return 0


_RUNNERS = {
    "train": _run_train,
    "simulate": _run_simulate,
    "bench": _run_bench,
    "acf": _run_acf,
    "curves": _run_curves,
    "oracle": _run_oracle,
}


def main(argv=None) -> int:
    """Entry point; returns the process exit code."""
    args = _build_parser().parse_args(argv)
    try:
        cfg = validate_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _RUNNERS[args.command](args, cfg, out)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 4
    except StockpileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
