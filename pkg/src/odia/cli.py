"""
Command-line driver.

Subcommands
-----------
feasibility   required relay antennas and closed-form DoF
solve         one realization: residual report and effective ranks
verify        invariant suite at small sizes
simulate      Monte Carlo run written as CSV
dof           simulate plus a slope summary

Exit codes: 0 success, 1 failed check, 2 configuration error,
3 infeasible (no solvable realization).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .config import KEYS, ExperimentConfig, build_config, read_config_file
from .exceptions import AllTrialsInfeasible, ConfigError, Infeasible, RankDeficient
from .network import closed_form_dof, required_relay_antennas, sample_channels
from .simulate import effective_ranks, monte_carlo, trial_seeds
from .solver import interference_residual, solve
from .verify import run_checks

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3

CSV_COLUMNS = (
    "trial", "snr_db", "cell", "direction", "rate_bits_per_use",
    "max_residual", "eff_rank", "feasible", "seed",
)


def _int_list(text: str):
    parts = [p.strip() for p in text.split(",")]
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise ConfigError(f"expected an integer or comma-separated integers, got {text!r}") from None
    return values[0] if len(values) == 1 else values


def _nested_int_list(text: str):
    if ";" not in text and "," not in text:
        return _int_list(text)
    rows = []
    for row in text.split(";"):
        value = _int_list(row)
        rows.append(value if isinstance(value, list) else [value])
    return rows


def _float_list(text: str):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


_FLAG_TYPES = {
    "cells": int,
    "users_per_cell": _int_list,
    "ue_antennas": _nested_int_list,
    "bs_antennas": _int_list,
    "relay_antennas": int,
    "scheme": str,
    "streams_per_ue": int,
    "alpha": float,
    "uplink_users": int,
    "downlink_users": int,
    "trials": int,
    "snr_db": _float_list,
    "seed": int,
    "rank_rel_tol": float,
    "residual_tol": float,
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat TOML file with experiment keys")
    common.add_argument("--output", type=Path, help="CSV destination (default: stdout)")
    keys = common.add_argument_group("overrides", "each flag overrides the key of the same name")
    for key in KEYS:
        # values are parsed later so that bad input maps onto exit code 2
        keys.add_argument("--" + key.replace("_", "-"), dest=key, metavar=key.upper())

    parser = argparse.ArgumentParser(prog="odia", description="Relay-aided opposite-directional interference alignment.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("feasibility", parents=[common], help="required relay antennas and DoF")
    sub.add_parser("solve", parents=[common], help="solve one channel realization")
    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realizations", type=int, default=5)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo rates as CSV")
    sub.add_parser("dof", parents=[common], help="Monte Carlo DoF slope summary")
    return parser


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Merge the config file (if any) with command-line overrides."""
    values, where = {}, {}
    if args.config is not None:
        values, where = read_config_file(args.config)
    for key in KEYS:
        raw = getattr(args, key, None)
        if raw is None:
            continue
        try:
            values[key] = _FLAG_TYPES[key](raw)
        except ValueError:
            raise ConfigError(f"command line: --{key.replace('_', '-')} has invalid value {raw!r}") from None
        except ConfigError as exc:
            raise ConfigError(f"command line: --{key.replace('_', '-')}: {exc}") from None
        where.pop(key, None)
    return build_config(values, where, args.output)


def _fmt(x) -> str:
    return str(x) if x.denominator != 1 else str(x.numerator)


def _print_bounds(dof, out):
    if dof.linear_coop_bound is not None:
        print(f"reference bounds per cell: KM+N = {_fmt(dof.linear_coop_bound)}, "
              f"KMN/(KM+N) = {_fmt(dof.imac_info_bound)}", file=out)


def cmd_feasibility(exp: ExperimentConfig, out) -> int:
    cfg = exp.network
    need = required_relay_antennas(cfg)
    dof = closed_form_dof(cfg)
    print(f"scheme: {cfg.scheme}", file=out)
    print(f"required relay antennas: N_R >= {need}", file=out)
    verdict = "sufficient" if cfg.N_R >= need else "insufficient"
    print(f"configured relay antennas: {cfg.N_R} ({verdict})", file=out)
    print(f"per-cell DoF: {_fmt(dof.per_cell)}", file=out)
    print(f"per-BS DoF: {_fmt(dof.per_bs)}, per-UE DoF: {_fmt(dof.per_ue)}", file=out)
    print(f"network DoF: {_fmt(dof.network_total)}", file=out)
    _print_bounds(dof, out)
    return EXIT_OK


def cmd_solve(exp: ExperimentConfig, out) -> int:
    cfg = exp.network
    ch_seed, _ = trial_seeds(exp.seed, 0)
    ch = sample_channels(cfg, ch_seed)
    try:
        bf = solve(ch, exp.rank_rel_tol)
    except Infeasible as exc:
        d = exc.diagnostics
        print(f"infeasible: {exc}", file=out)
        if d is not None:
            print(f"stacked system {d.rows} x {d.unknowns}, rank {d.rank}, augmented rank {d.rank_augmented}",
                  file=out)
        return EXIT_INFEASIBLE
    except RankDeficient as exc:
        print(f"infeasible: {exc}", file=out)
        return EXIT_INFEASIBLE
    d = bf.diagnostics
    print(f"scheme: {cfg.scheme}, N_R = {cfg.N_R}, channel seed {ch_seed}", file=out)
    print(f"stacked system {d.rows} x {d.unknowns}, rank {d.rank}, augmented rank {d.rank_augmented}", file=out)
    report = interference_residual(ch, bf)
    for node, res in report.per_node:
        print(f"  residual {node}: {res:.3e}", file=out)
    for (cell, direction), rank in effective_ranks(ch, bf, exp.rank_rel_tol).items():
        print(f"  effective rank cell {cell} {direction}: {rank}", file=out)
    ok = report.max_residual <= exp.residual_tol
    relation = "<=" if ok else ">"
    print(f"max residual {report.max_residual:.3e} {relation} {exp.residual_tol:g}", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(seed: int, realizations: int, out) -> int:
    checks = run_checks(seed, realizations)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}", file=out)
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed", file=out)
    return EXIT_OK if not failed else EXIT_FAIL


def _directions(cfg):
    dirs = []
    if cfg.bs_receives:
        dirs.append("ul")
    if cfg.bs_transmits or cfg.downlink_per_cell:
        dirs.append("dl")
    return dirs


def csv_rows(result):
    """Yield one CSV row per (trial, SNR point, cell, direction)."""
    cfg = result.config
    for rep in result.reports:
        res = "" if rep.max_residual is None else repr(float(rep.max_residual))
        keys = list(rep.rates) if rep.feasible else [(j, d) for j in range(cfg.C) for d in _directions(cfg)]
        for i, snr in enumerate(rep.snr_db):
            for key in keys:
                cell, direction = key
                rate = repr(float(rep.rates[key][i])) if rep.feasible else ""
                rank = rep.eff_ranks.get(key, "")
                yield (rep.trial, repr(snr), cell, direction, rate, res, rank, int(rep.feasible), rep.seed)


def write_csv(result, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(csv_rows(result))


def _run_mc(exp: ExperimentConfig):
    return monte_carlo(exp.network, exp.trials, exp.snr_db, exp.seed, exp.rank_rel_tol, exp.residual_tol)


def _emit_csv(result, exp: ExperimentConfig, out) -> None:
    if exp.output is None:
        write_csv(result, out)
        return
    buf = io.StringIO()
    write_csv(result, buf)
    exp.output.write_text(buf.getvalue())


def cmd_simulate(exp: ExperimentConfig, out) -> int:
    _emit_csv(_run_mc(exp), exp, out)
    return EXIT_OK


def cmd_dof(exp: ExperimentConfig, out) -> int:
    result = _run_mc(exp)
    if exp.output is not None:
        _emit_csv(result, exp, out)
    agg = result.aggregate
    cfg = exp.network
    dof = closed_form_dof(cfg)
    print(f"scheme: {cfg.scheme}, N_R = {cfg.N_R}, seed {exp.seed}", file=out)
    print(f"trials: {agg.trials} ({agg.feasible_trials} feasible, {agg.infeasible_trials} infeasible)", file=out)
    for snr, rate in zip(agg.snr_db, agg.network_rate):
        print(f"  {snr:6.1f} dB  network sum rate {rate:.4f} bits/use", file=out)
    if agg.dof_estimate is None:
        print("DoF slope: needs at least two distinct SNR points", file=out)
    else:
        print(f"network DoF slope: {agg.dof_estimate:.4f} (closed form {_fmt(dof.network_total)})", file=out)
        for j, (got, want) in enumerate(zip(agg.per_cell_dof, dof.per_cell_each)):
            print(f"  cell {j}: slope {got:.4f} (closed form {_fmt(want)})", file=out)
    _print_bounds(dof, out)
    return EXIT_OK


def run(argv=None, out=None) -> int:
    """Parse `argv`, dispatch the subcommand and return the exit code."""
    out = out if out is not None else sys.stdout
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.seed, args.realizations, out)
        exp = load_experiment(args)
        handler = {
            "feasibility": cmd_feasibility,
            "solve": cmd_solve,
            "simulate": cmd_simulate,
            "dof": cmd_dof,
        }[args.command]
        return handler(exp, out)
    except ConfigError as exc:
        print(f"odia: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AllTrialsInfeasible as exc:
        print(f"odia: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
