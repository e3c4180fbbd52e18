"""Main entry point for the DHT-DAS simulator."""
import argparse
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import chain
from pathlib import Path
from typing import List, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

import csv_exporter
import workload
from block import build_block
from config import ExperimentConfig, available_presets, parse_config, write_config
from csv_exporter import write_outputs
from draws import seeded_rng
from errors import ConfigError
from metrics import Cdf, ExperimentAggregate, cdf
from network import Network
from progress_display import SimpleProgressDisplay, SimulationProgressDisplay
from workload import build_aggregate, run_sampling, run_seeding, seed_block_directly, select_sampling_keys

# Create console with legacy Windows support if needed
console = Console(legacy_windows=(sys.platform == "win32"))

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# (flag, config key, metavar, help)
CONFIG_FLAGS = [
    ("--experiment", "experiment", "NAME", "Experiment to run: hops, sampling or seeding"),
    ("--nodes", "node_count", "N", "Number of nodes in the network"),
    ("--k", "k", "K", "Replication factor and bucket size"),
    ("--alpha", "alpha", "A", "Concurrent queries per lookup"),
    ("--beta", "beta", "B", "Peers returned per query"),
    ("--stop-rule", "stop_rule", "RULE", "Lookup stop rule: closest-queried or stalled"),
    ("--fast-error-rate", "fast_error_rate", "P", "Probability of an immediate connection failure"),
    ("--slow-error-rate", "slow_error_rate", "P", "Probability of a connection timeout"),
    ("--delay-ms", "delay_ms", "MIN:MAX", "Successful connection delay range"),
    ("--fast-delay-ms", "fast_delay_ms", "MIN:MAX", "Fast error delay range"),
    ("--slow-delay-ms", "slow_delay_ms", "MIN:MAX", "Slow error delay range"),
    ("--gamma-ms", "gamma_ms", "MS", "Extra delay per earlier contact of the same node"),
    ("--gamma-scope", "gamma_scope", "SCOPE", "Contacts that add overhead: callee, caller or both"),
    ("--samples", "sample_count", "N", "Samples to seed"),
    ("--queries", "queries_per_node", "N", "Lookups per sampling set"),
    ("--sets", "sets", "N", "Number of sampling sets"),
    ("--seeders", "seeders", "N", "Number of seeding nodes"),
    ("--seed", "seed", "S", "Random seed"),
    ("--repeat", "repeat", "R", "Run R consecutive seeds, each into its own directory"),
    ("--workers", "workers", "W", "Processes used for repeated runs"),
    ("--out", "out", "DIR", "Output directory"),
]


@dataclass
class RunResult:
    records: list
    cdfs: List[Cdf]
    aggregate: ExperimentAggregate


def display_banner(config: ExperimentConfig):
    """Display the application banner."""
    banner = Text(f"DHT-DAS Simulator: {config.experiment}", style="bold cyan")
    console.print(Panel(banner, expand=False))
    console.print(
        f"[dim]N={config.node_count:,} k={config.k} alpha={config.alpha} beta={config.beta} "
        f"gamma={config.gamma_ms} ms ({config.gamma_scope.value}) seed={config.seed}[/dim]"
    )
    console.print()


def build_network(config: ExperimentConfig, quiet: bool) -> Network:
    with SimpleProgressDisplay("Building routing tables", config.node_count, enabled=not quiet) as progress:
        return Network.build(config.network_params(), config.k, config.seed, on_table_built=progress.update)


def run_experiment(config: ExperimentConfig, quiet: bool = False) -> RunResult:
    """
    Build the network and block for config and run its experiment.

    sampling runs value lookups against a block placed directly on the
    closest nodes; hops asks for the closest nodes of the same sampled keys
    without placing anything; seeding pushes the block through provides.
    """
    dht = config.dht_params()
    net = build_network(config, quiet)
    block = build_block(config.seed, seeded_rng(config.seed, "payloads"), config.rows, config.cols)

    if config.experiment == "seeding":
        spec = config.seeding_spec()
        if not quiet:
            console.print(f"[bold]Seeding[/bold] {spec.sample_count:,} samples from {spec.seeders} seeder(s)")
        with SimulationProgressDisplay("Provides", spec.sample_count, enabled=not quiet) as progress:
            seeding = run_seeding(spec, block, net, dht, seed=config.seed,
                                  experiment_id=config.experiment_id, on_op_done=progress.update)
        records = seeding.records
        cdfs = [
            cdf([r.hops for r in records], "hops"),
            cdf([r.duration_us for r in records], "duration", unit="us"),
            cdf([len(r.stored_on) for r in records], "replicas"),
        ]
    else:
        spec = config.sampling_spec()
        key_sets = select_sampling_keys(spec, block, config.seed)
        if spec.find_value:
            placed = seed_block_directly(block, net, dht.k, keys=dict.fromkeys(chain.from_iterable(key_sets)))
            if not quiet:
                console.print(f"[dim]Placed {placed:,} replicas of the sampled cells[/dim]")
        if not quiet:
            console.print(f"[bold]Sampling[/bold] {spec.sets} set(s) of {spec.queries_per_node} lookups")
        with SimulationProgressDisplay("Lookups", spec.sets * spec.queries_per_node, enabled=not quiet) as progress:
            sampling = run_sampling(spec, block, net, dht, seed=config.seed,
                                    experiment_id=config.experiment_id, on_op_done=progress.update)
        seeding = None
        records = sampling.records
        cdfs = [
            cdf([r.hops for r in records], "hops"),
            cdf([r.duration_us for r in records], "duration", unit="us"),
            cdf(list(sampling.set_durations_us.values()), "set_duration", unit="us"),
        ]

    aggregate = build_aggregate(config.experiment, config.experiment_id, config.snapshot(),
                                records, net, seeding=seeding)
    return RunResult(records=records, cdfs=cdfs, aggregate=aggregate)


def run_once(config: ExperimentConfig, quiet: bool = False) -> ExperimentAggregate:
    """Run one seed and write its records, CDFs, aggregate and config echo to config.out."""
    result = run_experiment(config, quiet)
    out_dir = Path(config.out)
    write_outputs(out_dir, result.records, result.cdfs, result.aggregate, quiet=quiet)
    write_config(config, out_dir / "config.ini")
    return result.aggregate


def repeat_configs(config: ExperimentConfig) -> List[ExperimentConfig]:
    """One single-run config per repetition: consecutive seeds, out/run-NNN."""
    out = Path(config.out)
    return [
        replace(config, seed=config.seed + i, repeat=1, workers=1, out=str(out / f"run-{i:03d}"))
        for i in range(config.repeat)
    ]


def summary_line(aggregate: ExperimentAggregate) -> str:
    hops = aggregate.hops
    duration = aggregate.duration_ms
    verdict = "fits" if aggregate.fits_slot else "exceeds"
    return (
        f"{aggregate.experiment_id}: hops p50={hops.get('p50')} p99={hops.get('p99')} | "
        f"duration p50={duration.get('p50', 0):.1f} ms p99={duration.get('p99', 0):.1f} ms | "
        f"slot ratio {aggregate.slot_ratio:.3f} ({verdict})"
    )


def display_results(aggregates: Sequence[ExperimentAggregate]):
    table = Table(title="Results", show_header=True, header_style="bold")
    table.add_column("Run", style="cyan")
    table.add_column("Ops", justify="right")
    table.add_column("Success", justify="right")
    table.add_column("Hops p50/p90/p99", justify="right")
    table.add_column("Total", justify="right")
    table.add_column("Slot ratio", justify="right")
    for agg in aggregates:
        hops = "/".join(str(agg.hops.get(p, "-")) for p in ("p50", "p90", "p99"))
        ratio_style = "green" if agg.fits_slot else "red"
        table.add_row(
            agg.experiment_id,
            f"{agg.op_count:,}",
            f"{agg.success_rate:.1%}",
            hops,
            f"{agg.total_duration_ms / 1000:.2f} s",
            f"[{ratio_style}]{agg.slot_ratio:.3f}[/{ratio_style}]",
        )
    console.print(table)
    if any(agg.unseeded for agg in aggregates):
        console.print("[yellow]Warning: no sample was retrievable in at least one run[/yellow]")


def run(config: ExperimentConfig, quiet: bool = False, debug: bool = False) -> int:
    """
    Run a resolved config and write its outputs.

    Returns:
        Exit code: 0 on success, 2 on configuration errors, 3 on runtime errors
    """
    csv_exporter.console.quiet = quiet
    workload.console.quiet = quiet
    try:
        if not quiet:
            display_banner(config)
        if config.repeat == 1:
            aggregates = [run_once(config, quiet)]
        else:
            configs = repeat_configs(config)
            write_config(config, Path(config.out) / "config.ini")
            if config.workers > 1:
                if not quiet:
                    console.print(f"[cyan]Running {len(configs)} seeds on {config.workers} workers[/cyan]")
                with ProcessPoolExecutor(max_workers=config.workers) as executor:
                    aggregates = list(executor.map(run_once, configs, [True] * len(configs)))
            else:
                aggregates = [run_once(c, quiet) for c in configs]
    except ConfigError as e:
        console.print(f"[red]Config error: {e}[/red]")
        if debug:
            traceback.print_exc()
        return EXIT_CONFIG
    except KeyboardInterrupt:
        console.print("\n[yellow]Run cancelled by user[/yellow]")
        return EXIT_RUNTIME
    except Exception as e:
        console.print(f"[red]Error: {e}[/red]")
        if debug:
            traceback.print_exc()
        return EXIT_RUNTIME

    if not quiet:
        console.print()
        display_results(aggregates)
    for aggregate in aggregates:
        console.print(summary_line(aggregate), highlight=False, soft_wrap=True)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Deterministic Kademlia DHT simulator for Ethereum data availability sampling",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py --config fig5_hops
  python main.py --config fig7_seed1k --seed 7 --out results/seed1k
  python main.py --experiment sampling --nodes 2000 --queries 80 --sets 10
  python main.py --config fig8_seed262k --gamma-ms 0.03 --repeat 4 --workers 4
        """
    )
    parser.add_argument(
        "--config",
        metavar="PATH",
        help="INI file, or the name of a shipped preset"
    )
    for flag, key, metavar, help_text in CONFIG_FLAGS:
        parser.add_argument(flag, dest=key, metavar=metavar, help=help_text)
    parser.add_argument(
        "--quiet",
        action="store_true",
        help="Only print the one-line summary"
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Print tracebacks on errors"
    )
    parser.add_argument(
        "--list-presets",
        action="store_true",
        help="List the shipped presets and exit"
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, resolve the config and run it. Returns the exit code."""
    args = build_parser().parse_args(argv)

    if args.list_presets:
        for name in available_presets():
            console.print(name)
        return EXIT_OK

    overrides = {key: getattr(args, key) for _, key, _, _ in CONFIG_FLAGS}
    try:
        config = parse_config(args.config, overrides)
    except ConfigError as e:
        console.print(f"[red]Config error: {e}[/red]")
        if args.debug:
            traceback.print_exc()
        return EXIT_CONFIG
    return run(config, quiet=args.quiet, debug=args.debug)


if __name__ == "__main__":
    sys.exit(main())
