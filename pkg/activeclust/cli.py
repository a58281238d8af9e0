"""Command-line harness: generate instances, run RECUR or the baseline, compare, verify."""

import argparse
import logging
import statistics
import sys
from functools import partial
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .baseline import BaselineConfig, ScqKMeans
from .errors import ActiveClusteringError, ParseError
from .geometry import GeometryConfig, has_margin
from .instances import GENERATORS, load_instance, save_instance
from .oracle import LatentInstance, QueryLedger, SameClusterOracle
from .recur import Recur, RecurConfig, RecoveredClustering, clustering_error, local_to_latent
from .tessellation import audit_cells
from .utils.csv_util import COMPARE_COLUMNS, write_rounds, write_rows
from .utils.run_util import RunSpec, run_all

logger = logging.getLogger(__name__)

ALGORITHMS = ("recur", "scq-kmeans")
SCHEMA_TYPES = {"integer": int, "number": float, "string": str}


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {value!r}")


def _print_margins(instance: LatentInstance, values: np.ndarray) -> None:
    sizes = instance.cluster_sizes()
    for j, (size, value) in enumerate(zip(sizes, values)):
        line = f"cluster {j}: size {size}, margin {value:.6g}"
        if instance.metrics is not None:
            line += f", kappa {instance.metrics[j].metric.condition_number:.4g}"
        print(line)
    print(f"declared gamma: {instance.gamma:.6g}")


def _add_algorithm_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gamma-fed", type=float, default=None, help="margin fed to the algorithm (default: declared gamma)")
    parser.add_argument("--epsilon", type=float, default=0.0, help="residual fraction that may stay unlabeled")
    parser.add_argument("--mode", choices=("quota", "batch"), default="quota", help="RECUR sampling mode")
    parser.add_argument("--batch-m", type=int, default=None, help="samples per round in batch mode (default 10k)")
    parser.add_argument("--quota-constant", type=float, default=1.0, help="b in the b d^2 ln k quota")
    parser.add_argument("--hull-expansion", type=_parse_bool, default=False, metavar="BOOL", help="greedy hull expansion")
    parser.add_argument("--mvee-epsilon", type=float, default=1e-3, help="Khachiyan rounding slack")
    parser.add_argument("--phase1-samples", type=int, default=None, help="baseline centroid sample size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activeclust", description=__doc__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="log per-round progress")
    verbosity.add_argument("--quiet", action="store_true", help="log errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate a margin-verified instance")
    generators = gen.add_subparsers(dest="generator", required=True)
    for generator in GENERATORS.values():
        sub = generators.add_parser(generator.name, help=generator.description, description=generator.description)
        schema = generator.input_schema
        required = set(schema.get("required", []))
        for name, prop in schema["properties"].items():
            kwargs: dict[str, Any] = {"type": SCHEMA_TYPES[prop["type"]], "help": prop.get("description")}
            if "enum" in prop:
                kwargs["choices"] = prop["enum"]
            if name in required:
                kwargs["required"] = True
            else:
                kwargs["default"] = prop.get("default")
            sub.add_argument(f"--{name.replace('_', '-')}", dest=name, **kwargs)
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--out", type=Path, required=True, help="instance JSON path")

    run = commands.add_parser("run", help="run one algorithm on an instance")
    run.add_argument("--algo", choices=ALGORITHMS, required=True)
    run.add_argument("--instance", type=Path, required=True)
    _add_algorithm_flags(run)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--csv", type=Path, default=None, help="per-round CSV path")
    run.add_argument("--transcript", type=Path, default=None, help="query transcript CSV path")
    run.add_argument("--dump-cells", type=Path, default=None, metavar="DIR", help="write one tessellation JSON per round")

    compare = commands.add_parser("compare", help="run both algorithms over several seeds")
    compare.add_argument("--instance", type=Path, required=True)
    compare.add_argument("--seeds", type=int, nargs="+", required=True)
    compare.add_argument("--csv", type=Path, required=True, help="long-format CSV path")
    _add_algorithm_flags(compare)
    compare.add_argument("--sequential", action="store_true", help="do not fan out over threads")

    verify = commands.add_parser("verify", help="recompute and check an instance's margins")
    verify.add_argument("--instance", type=Path, required=True)
    return parser


def _execute(
    algo: str,
    instance: LatentInstance,
    args: argparse.Namespace,
    seed: int,
    ledger: QueryLedger | None = None,
    verbose: bool = False,
) -> RecoveredClustering:
    """Run ``algo`` on ``instance`` with its own oracle; Δ after each round is recorded."""
    gamma = args.gamma_fed if args.gamma_fed is not None else instance.gamma
    oracle = SameClusterOracle(instance, ledger)
    error_fn = partial(clustering_error, labels=instance.labels, k=instance.k)
    if algo == "recur":
        config = RecurConfig(
            epsilon=args.epsilon,
            sampling=args.mode,
            quota_constant=args.quota_constant,
            batch_size=args.batch_m,
            use_hull_expansion=args.hull_expansion,
            mvee_epsilon=args.mvee_epsilon,
            rng_seed=seed,
            geometry=GeometryConfig(mvee_epsilon=args.mvee_epsilon),
        )
        return Recur(name=f"recur/{seed}", config=config, verbose=verbose).run(
            oracle, instance.k, gamma, error_fn=error_fn
        )
    config = BaselineConfig(phase1_samples=args.phase1_samples, rng_seed=seed)
    return ScqKMeans(name=f"scq-kmeans/{seed}", config=config, verbose=verbose).run(
        oracle, instance.k, gamma, error_fn=error_fn
    )


def _audit(instance: LatentInstance, result: RecoveredClustering, gamma: float) -> None:
    """Log mixed cells and unsound labels at WARNING."""
    mixed = sum(len(audit_cells(t, instance.labels)) for t in result.tessellations)
    if mixed:
        logger.warning("%d tessellation cells mixed latent labels (gamma fed %.4g)", mixed, gamma)
    try:
        local_to_latent(result.assignment, instance.labels)
    except ValueError as e:
        logger.warning("recovered clustering is not sound: %s", e)


def cmd_gen(args: argparse.Namespace) -> int:
    generator = GENERATORS[args.generator]
    params = {name: getattr(args, name) for name in generator.input_schema["properties"]}
    try:
        instance = generator.generate(seed=args.seed, **params)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ActiveClusteringError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    save_instance(instance, args.out)
    print(f"wrote {args.out} ({instance.n} points, d={instance.d}, k={instance.k})")
    values = instance.margins()
    if values is not None:
        _print_margins(instance, values)
    return 0


def _load(path: Path) -> LatentInstance:
    return load_instance(path, verify=False)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        instance = _load(args.instance)
    except (ParseError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    ledger = QueryLedger(record_transcript=args.transcript is not None)
    try:
        result = _execute(args.algo, instance, args, args.seed, ledger, verbose=args.verbose)
    except (ActiveClusteringError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1

    if args.algo == "recur":
        gamma = args.gamma_fed if args.gamma_fed is not None else instance.gamma
        _audit(instance, result, gamma)
    if args.csv is not None:
        write_rounds(args.csv, result.rounds)
    if args.transcript is not None:
        ledger.to_csv(args.transcript)
    if args.dump_cells is not None:
        for index, tessellation in enumerate(result.tessellations):
            tessellation.to_json(args.dump_cells / f"round_{index:04d}.json")

    error = clustering_error(result.assignment, instance.labels, instance.k)
    wall = result.rounds[-1].wall_time_s if result.rounds else 0.0
    print(f"algo: {args.algo}")
    print(f"error: {error:.6f}")
    print(f"queries: {result.queries}")
    print(f"rounds: {len(result.rounds)}")
    print(f"unlabeled: {result.unlabeled}")
    print(f"wall time: {wall:.3f}s")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        instance = _load(args.instance)
    except (ParseError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    specs = [RunSpec(algo, seed) for algo in ALGORITHMS for seed in args.seeds]
    outcomes = run_all(
        specs,
        lambda spec: _execute(spec.algo, instance, args, spec.seed),
        parallel=not args.sequential,
    )
    outcomes = sorted(outcomes, key=lambda outcome: (outcome.spec.algo, outcome.spec.seed))

    rows = []
    failed = 0
    for outcome in outcomes:
        if outcome.error is not None:
            failed += 1
            print(f"error: {outcome.spec.algo} seed {outcome.spec.seed}: {outcome.error}", file=sys.stderr)
            continue
        for stats in outcome.result.rounds:
            rows.append(
                {
                    "algo": outcome.spec.algo,
                    "seed": outcome.spec.seed,
                    "round": stats.round,
                    "queries_cumulative": stats.queries_cumulative,
                    "error": stats.error_so_far,
                }
            )
    rows.sort(key=lambda row: (row["algo"], row["seed"], row["round"]))
    write_rows(args.csv, COMPARE_COLUMNS, rows)

    for algo in ALGORITHMS:
        finished = [o.result for o in outcomes if o.spec.algo == algo and o.error is None]
        if not finished:
            continue
        errors = [clustering_error(r.assignment, instance.labels, instance.k) for r in finished]
        queries = [r.queries for r in finished]
        print(
            f"{algo}: {len(finished)} runs, median error {statistics.median(errors):.6f}, "
            f"max error {max(errors):.6f}, median queries {statistics.median(queries):g}"
        )
    return 1 if failed else 0


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        instance = _load(args.instance)
    except (ParseError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        values = instance.margins()
    except ActiveClusteringError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    if values is None:
        logger.warning("%s carries no metrics; margins cannot be checked", args.instance)
        print("unverifiable")
        return 0
    _print_margins(instance, values)
    if not has_margin(values, instance.gamma):
        print(
            f"margin violation: smallest margin {values.min():.6g} is below gamma {instance.gamma:.6g}",
            file=sys.stderr,
        )
        return 1
    return 0


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "compare": cmd_compare, "verify": cmd_verify}


def main(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit code."""
    args = build_parser().parse_args(argv)
    level = logging.INFO if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
