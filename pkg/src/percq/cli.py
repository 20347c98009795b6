"""Command-line front end.

Exit codes: 0 success, 1 I/O failure, 2 bad flags or out-of-domain values.
Every run is seeded; the default seed comes from ``PERCQ_SEED`` (else 0).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io, topology
from .errors import DomainError
from .percolation import (PercConfig, classical_chain_prob, fixed_point, mc_border_connectivity,
                          recursion_iterate)
from .protocol import MODES, distillation_plan, run_chain_protocol
from .qstate import concurrence, make_pair

SWEEP_HEADER = ("p", "k", "trials", "successes", "estimate", "std_error", "prediction",
                "p_infinity", "regime", "classical_exact")
LEVELS_HEADER = ("mode", "level", "links", "mean_scp", "mean_concurrence")


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("PERCQ_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"PERCQ_SEED must be an integer, got {raw!r}") from None


def _add_common(sp, seeded=True):
    sp.add_argument("--out", help="output file (default: stdout)")
    if seeded:
        sp.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                        help="master seed (default: $PERCQ_SEED or 0)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker thread cap (results do not depend on it)")


def _add_net(sp):
    sp.add_argument("--n-nodes", type=int)
    sp.add_argument("--k-pairs", type=int)
    sp.add_argument("--net-file", help="hierarchical network in 'hiernet N K' text format")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="percq", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("recursion", help="iterate the border-connectivity recursion")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--k-max", type=int, default=10)
    _add_common(sp, seeded=False)

    sp = sub.add_parser("sweep", help="Monte Carlo vs recursion over a range of p")
    sp.add_argument("--p-min", type=float, required=True)
    sp.add_argument("--p-max", type=float, required=True)
    sp.add_argument("--steps", type=int, default=11)
    _add_net(sp)
    sp.add_argument("--trials", type=int, default=100_000)
    _add_common(sp)

    sp = sub.add_parser("protocol", help="state-tracked vs ideal hierarchical construction")
    _add_net(sp)
    sp.add_argument("--lambda2", type=float, required=True)
    sp.add_argument("--mode", choices=MODES, default="state-tracked")
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--levels-out", help="per-level CSV (default: <out stem>.levels.csv)")
    _add_common(sp)

    sp = sub.add_parser("distill", help="distillation pair budget")
    sp.add_argument("--lambda2", type=float, required=True)
    sp.add_argument("--n-nodes", type=int, required=True)
    _add_common(sp, seeded=False)

    sp = sub.add_parser("resources", help="base-pair accounting")
    sp.add_argument("--n-nodes", type=int, required=True)
    sp.add_argument("--k-pairs", type=int, default=None,
                    help="pairs per edge (default: enough for the full hierarchy)")
    _add_common(sp, seeded=False)
    return ap


def _net_from_args(args) -> topology.HierNet:
    if args.net_file is not None:
        if args.n_nodes is not None or args.k_pairs is not None:
            raise UsageError("--net-file excludes --n-nodes/--k-pairs")
        try:
            return topology.load(args.net_file)
        except OSError as exc:
            raise UsageError(f"cannot read {args.net_file}: {exc.strerror}") from None
    if args.n_nodes is None or args.k_pairs is None:
        raise UsageError("give --n-nodes and --k-pairs, or --net-file")
    return topology.build_hiernet(args.n_nodes, args.k_pairs)


def _check_trials(args):
    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    if args.threads is not None and args.threads < 1:
        raise UsageError(f"--threads must be >= 1, got {args.threads}")


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("command", "out", "levels_out")}


def cmd_recursion(args) -> int:
    if not 0.0 <= args.p <= 1.0:
        raise UsageError(f"--p must lie in [0, 1], got {args.p}")
    if args.k_max < 0:
        raise UsageError(f"--k-max must be >= 0, got {args.k_max}")
    trace = recursion_iterate(args.p, args.k_max)
    text = io.csv_text(("k", "P_k"), enumerate(trace.values))
    io.emit(text, args.out, io.RunManifest("recursion", _params(args), None))
    return 0


def sweep_rows(net, ps, trials, seed, threads=None):
    k = net.max_level
    rows = []
    for p in ps:
        est = mc_border_connectivity(net, PercConfig(p, trials, seed), threads)
        fp = fixed_point(p, max_iter=10_000)
        rows.append((p, k, est.trials, est.successes, est.estimate, est.std_error,
                     recursion_iterate(p, k).final, fp.p_infinity, fp.regime,
                     classical_chain_prob(p, net.k_pairs, net.n_nodes).exact))
    return rows


def cmd_sweep(args) -> int:
    if not (0.0 <= args.p_min <= args.p_max <= 1.0):
        raise UsageError(f"need 0 <= p-min <= p-max <= 1, got {args.p_min}, {args.p_max}")
    if args.steps < 1:
        raise UsageError(f"--steps must be >= 1, got {args.steps}")
    _check_trials(args)
    net = _net_from_args(args)
    seed = args.seed if args.seed is not None else _default_seed()
    ps = [float(p) for p in np.linspace(args.p_min, args.p_max, args.steps)]
    rows = sweep_rows(net, ps, args.trials, seed, args.threads)
    params = _params(args) | {"n_nodes": net.n_nodes, "k_pairs": net.k_pairs}
    io.emit(io.csv_text(SWEEP_HEADER, rows), args.out, io.RunManifest("sweep", params, seed))
    return 0


def protocol_payload(stats) -> dict:
    return {
        "mode": stats.mode,
        "N": stats.n_nodes,
        "K": stats.k_pairs,
        "lambda1": stats.base.lambda1,
        "lambda2": stats.base.lambda2,
        "master_seed": stats.master_seed,
        "trials": stats.trials,
        "successes": stats.border.successes,
        "border_connected_fraction": stats.border.estimate,
        "std_error": stats.border.std_error,
        "mean_scp": stats.mean_scp,
        "mean_concurrence": stats.mean_concurrence,
        "levels": [
            {"level": lvl, "links": n, "mean_scp": s, "mean_concurrence": c}
            for lvl, (n, s, c) in enumerate(zip(stats.level_links, stats.level_mean_scp,
                                                stats.level_mean_concurrence))
        ],
        "build": io.tool_version(),
    }


def cmd_protocol(args) -> int:
    _check_trials(args)
    if not 0.0 <= args.lambda2 <= 0.5:
        raise UsageError(f"--lambda2 must lie in [0, 1/2], got {args.lambda2}")
    net = _net_from_args(args)
    seed = args.seed if args.seed is not None else _default_seed()
    base = make_pair(args.lambda2)
    stats = run_chain_protocol(net.n_nodes, net.k_pairs, base, args.mode,
                               PercConfig(0.0, args.trials, seed), args.threads)
    payload = protocol_payload(stats)
    levels = io.csv_text(LEVELS_HEADER, [
        (stats.mode, d["level"], d["links"], d["mean_scp"], d["mean_concurrence"])
        for d in payload["levels"]
    ])
    params = _params(args) | {"n_nodes": net.n_nodes, "k_pairs": net.k_pairs}
    manifest = io.RunManifest("protocol", params, seed)
    io.emit(io.json_text(payload), args.out, manifest)
    levels_out = args.levels_out
    if levels_out is None and args.out is not None:
        levels_out = str(Path(args.out).with_suffix(".levels.csv"))
    if levels_out is not None:
        io.emit(levels, levels_out, manifest)
    return 0


def cmd_distill(args) -> int:
    if not 0.0 <= args.lambda2 <= 0.5:
        raise UsageError(f"--lambda2 must lie in [0, 1/2], got {args.lambda2}")
    base = make_pair(args.lambda2)
    if concurrence(base) < 0.5 - 1e-12:
        raise UsageError(
            f"concurrence {concurrence(base):.6g} is below 1/2; the distillation "
            "model only covers links with C >= 1/2"
        )
    plan = distillation_plan(args.n_nodes, base)
    payload = asdict(plan) | {"lambda1": base.lambda1, "lambda2": base.lambda2,
                              "fidelity_trace": list(plan.fidelity_trace),
                              "build": io.tool_version()}
    io.emit(io.json_text(payload), args.out, io.RunManifest("distill", _params(args), None))
    return 0


def cmd_resources(args) -> int:
    if args.n_nodes < 2:
        raise UsageError(f"--n-nodes must be >= 2, got {args.n_nodes}")
    k = args.k_pairs
    if k is None:
        k = topology.required_pairs_for_full_hierarchy(args.n_nodes)
    rep = topology.resource_report(args.n_nodes, k)
    payload = asdict(rep) | {"n_squared": rep.n_squared}
    io.emit(io.json_text(payload), args.out, io.RunManifest("resources", _params(args), None))
    return 0


COMMANDS = {
    "recursion": cmd_recursion,
    "sweep": cmd_sweep,
    "protocol": cmd_protocol,
    "distill": cmd_distill,
    "resources": cmd_resources,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        parser.print_usage(sys.stderr)
        print(f"percq {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"percq {args.command}: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
