"""Command line driver.

Verbs::

    nondiv run <config-or-scenario>    run one experiment, write artifacts
    nondiv scenarios                   list the scenario catalog
    nondiv verify [filter]             re-run golden scenarios and compare
    nondiv dump-operator <config>      write the sparse operator as text

Exit codes for ``run``: 0 converged, 2 circling, 3 blow-up, 4 budget,
5 chart-exit, 64 config error.  ``verify``: 0 pass, 1 mismatch, 65 empty
filter.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .flow import FlowInvariantError, run
from .operators import scalar_operator_matrix
from .reporting import (EXIT_CONFIG_ERROR, EXIT_VERIFY_EMPTY, EXIT_VERIFY_MISMATCH,
                        ensure_dir, exit_code_for, write_monitors_csv, write_snapshot,
                        write_summary_svg, write_verdict)
from .scenarios import SCENARIOS, load_goldens, run_scenario, verify_scenario

log = logging.getLogger("nondiv")


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment and write monitors.csv, verdict.json, summary.svg
    and optional snapshots into the output directory."""
    out = ensure_dir(config.resolved_output_dir())
    domain = config.build_domain_structure()
    initial = config.build_initial_map(domain)

    flow_config = config.flow_config()
    if config.checkpoint_every > 0:
        write_snapshot(os.path.join(out, "snapshot_000000.txt"), initial)

    state, verdict = run(domain, initial, flow_config)

    write_monitors_csv(os.path.join(out, "monitors.csv"), state.history)
    write_verdict(os.path.join(out, "verdict.json"), verdict, scenario=config.scenario)
    write_snapshot(os.path.join(out, "final.txt"), state.field)
    try:
        write_summary_svg(os.path.join(out, "summary.svg"), state.history,
                          title=config.scenario or f"{config.domain_name} -> {config.target_name}")
    except Exception as exc:  # plotting must never change the verdict
        log.warning("summary plot failed: %s", exc)
    code = exit_code_for(verdict.kind)
    print(f"verdict: {verdict.kind} (exit {code}); "
          f"sup|tau|_g = {verdict.evidence.get('final_sup_tension'):.3e}; "
          f"steps = {verdict.evidence.get('steps')}; artifacts in {out}")
    return code


def _config_from_arg(arg: str) -> ExperimentConfig:
    if os.path.exists(arg):
        return load_config(arg)
    if arg in SCENARIOS:
        spec = SCENARIOS[arg]
        cfg = spec.config
        return ExperimentConfig(**{**cfg.__dict__, "scenario": spec.name,
                                   "output_dir": os.path.join("runs", spec.name)})
    raise ConfigError(f"{arg!r} is neither a config file nor a scenario name")


def cmd_run(args) -> int:
    config = _config_from_arg(args.config)
    return run_experiment(config)


def cmd_scenarios(args) -> int:
    for name, spec in SCENARIOS.items():
        print(f"{name:30s} [{spec.expected_verdict}]")
        print(f"    {spec.description}")
        print(f"    exercises: {spec.claim}")
    return 0


def cmd_verify(args) -> int:
    goldens = load_goldens()
    names = [n for n in SCENARIOS if args.filter is None or args.filter in n]
    names = [n for n in names if n in goldens]
    if not names:
        print("no scenarios match the filter")
        return EXIT_VERIFY_EMPTY
    failed = []
    for name in names:
        spec = SCENARIOS[name]
        rows = verify_scenario(spec, goldens[name])
        bad = [r for r in rows if not r[1]]
        status = "PASS" if not bad else "FAIL"
        print(f"[{status}] {name}")
        for fieldname, ok, detail in rows:
            mark = "ok  " if ok else "FAIL"
            print(f"    {mark} {fieldname:28s} {detail}")
        if bad:
            failed.append(name)
    if failed:
        print(f"{len(failed)} of {len(names)} scenarios failed: {', '.join(failed)}")
        return EXIT_VERIFY_MISMATCH
    print(f"all {len(names)} scenarios match their golden records")
    return 0


def cmd_dump_operator(args) -> int:
    config = _config_from_arg(args.config)
    out = ensure_dir(config.resolved_output_dir())
    domain = config.build_domain_structure()
    op = scalar_operator_matrix(domain)
    path = os.path.join(out, "operator.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(op.to_coo_text())
    print(f"wrote {op.matrix.nnz} entries ({op.size}x{op.size}, "
          f"{op.mesh_ratio_violations} mesh-ratio violations) to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nondiv",
        description="non-divergence harmonic map flows on periodic domains")
    parser.add_argument("--version", action="version", version=f"nondiv {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config or scenario")
    p_run.add_argument("config", help="path to a config file or a scenario name")
    p_run.set_defaults(func=cmd_run)

    p_sc = sub.add_parser("scenarios", help="list the scenario catalog")
    p_sc.set_defaults(func=cmd_scenarios)

    p_ver = sub.add_parser("verify", help="re-run golden scenarios and compare")
    p_ver.add_argument("filter", nargs="?", default=None,
                       help="substring filter on scenario names")
    p_ver.set_defaults(func=cmd_verify)

    p_dump = sub.add_parser("dump-operator",
                            help="write the assembled sparse operator as row/col/value text")
    p_dump.add_argument("config", help="path to a config file or a scenario name")
    p_dump.set_defaults(func=cmd_dump_operator)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FlowInvariantError as exc:
        print(f"flow invariant violated: {exc}", file=sys.stderr)
        return 70  # internal software error


if __name__ == "__main__":
    sys.exit(main())
