"""Command line entry point.

    smile-spectrum run <config> [--jobs N] [--out DIR]
    smile-spectrum alloc <config>
    smile-spectrum constants <config>
    smile-spectrum enumerate <config>

``<config>`` is a YAML file or the name of a bundled fixture.  Exit codes:
0 success, 2 config error, 3 instance error, 4 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .agent import Agent, AgentParams
from .engine import run_allocation_protocol
from .errors import ConfigError, Deadlock, InstanceError, InstanceTooLarge, SmileError
from .experiment import list_fixtures, load_config, run_experiment_config
from .matching import enumerate_stable, solve_stable

EXIT_OK, EXIT_CONFIG, EXIT_INSTANCE, EXIT_RUNTIME = 0, 2, 3, 4

log = logging.getLogger("smile_spectrum")


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.out:
        config.output_dir = Path(args.out)
    summaries = run_experiment_config(config, jobs=args.jobs)
    for name, s in summaries.items():
        regret = np.mean([tr.regret[-1] for tr in s.traces])
        print(f"{name:>7}: final-window sum rate {s.final_window_sum_rate:.3f}, mean regret {regret:.1f}")
    print(f"artifacts in {config.output_dir}")
    return EXIT_OK


def _cmd_alloc(args) -> int:
    config = load_config(args.config)
    inst = config.instance
    L, S = inst.shape
    # agents only need estimates for the protocol; coefficients are never read
    params = AgentParams(kappa=1.0, sampling_constant=1.0)
    agents = [Agent(c, S, inst.graph.neighbors[c], params) for c in range(L)]
    for a in agents:
        a.estimates[:] = inst.means[a.cell_id]
    result = run_allocation_protocol(agents, inst.graph)
    for k, it in enumerate(result.iterations, 1):
        outcome = "assigned" if it.assigned else "collision with " + ",".join(str(q + 1) for q in it.blockers)
        print(f"iteration {k}: cell {it.cell + 1} -> channel {it.channel + 1} ({it.value:g}): {outcome}")
    print(f"iterations: {len(result.iterations)}  slots: {result.slots}")
    print("allocation: " + ", ".join(f"{c}->{s}" for c, s in result.allocation.as_dict().items()))
    return EXIT_OK


def _cmd_constants(args) -> int:
    config = load_config(args.config)
    print(json.dumps(config.constants().to_dict(), indent=2))
    return EXIT_OK


def _cmd_enumerate(args) -> int:
    config = load_config(args.config)
    inst = config.instance
    stable = enumerate_stable(inst.means, inst.graph)
    greedy, _ = solve_stable(inst.means, inst.graph)
    for alloc in stable:
        mark = " (greedy)" if alloc == greedy else ""
        print(f"{alloc.as_dict()} value {alloc.value(inst.means):g}{mark}")
    print(f"{len(stable)} stable allocation(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smile-spectrum", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run all configured policies and write CSV/JSON artifacts")
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    r.add_argument("--out", default=None, help="output directory (overrides config and env)")
    r.set_defaults(func=_cmd_run)
    for name, func, text in [
        ("alloc", _cmd_alloc, "dry-run one allocation phase on the instance means"),
        ("constants", _cmd_constants, "print the system constants"),
        ("enumerate", _cmd_enumerate, "list every stable allocation (small instances)"),
    ]:
        c = sub.add_parser(name, help=text)
        c.add_argument("config")
        c.set_defaults(func=func)
    sub.add_parser("fixtures", help="list bundled fixtures").set_defaults(
        func=lambda a: print("\n".join(list_fixtures())) or EXIT_OK)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InstanceError, Deadlock, InstanceTooLarge) as exc:
        print(f"instance error: {exc}", file=sys.stderr)
        return EXIT_INSTANCE
    except (OSError, SmileError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
