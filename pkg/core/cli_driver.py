#!/usr/bin/env python3
"""
Experiment runner for the rotatable STAR-RIS MEC simulator.

Commands:
    train     train the rotatable scheme per seed, evaluate, write results
    eval      evaluate saved checkpoints of the rotatable scheme
    baseline  run one benchmark scheme
    compare   aggregate results.csv files into a summary table

Every run writes results.csv (and train_log.csv when training) under --out;
--trace adds trace_<seed>.csv and --channel-trace adds channel_<seed>.csv.
"""

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.panel import Panel

from agents.sac import AgentConfig, SacAgent, TrainingLogRow, checkpoint_name, train
from core.env import StarMecEnv
from core.errors import (
    ComparisonError,
    ConfigurationError,
    StarMecError,
    TrainingDivergedError,
    UsageError,
)
from core.protocol import Protocol
from core.rollout import EpisodeResult, evaluate, random_policy, zero_policy
from core.scenario import ScenarioConfig
from utils.config import (
    DEFAULT_OUT,
    DEFAULT_SEEDS,
    QUIET,
    load_config,
    parse_seeds,
    parse_sweep,
)
from utils.console import console, get_logger, set_verbosity
from utils.diff import print_diff, print_summary
from utils.records import (
    ResultRow,
    SummaryRow,
    read_results,
    write_results,
    write_summary,
    write_training_log,
)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

MODES = ("train", "eval", "baseline", "compare")
LEARNED_BASELINES = ("fixed-orientation", "reflect-only", "transmit-only")
BASELINES = LEARNED_BASELINES + ("local-only", "random-policy")
ROTATABLE = "rotatable"
FIXED = "fixed-orientation"


@dataclass
class ExperimentSpec:
    """One CLI invocation, validated."""

    mode: str
    protocol: Protocol = Protocol.ES
    baseline: Optional[str] = None
    seeds: List[int] = field(default_factory=lambda: parse_seeds(DEFAULT_SEEDS))
    out: Path = Path(DEFAULT_OUT)
    config_path: Optional[str] = None
    sweep_key: Optional[str] = None
    sweep_values: List = field(default_factory=lambda: [None])
    steps: Optional[int] = None
    trace: bool = False
    channel_trace: bool = False
    inputs: List[Path] = field(default_factory=list)
    quiet: bool = QUIET

    def validate(self) -> "ExperimentSpec":
        if self.mode not in MODES:
            raise UsageError(f"unknown mode '{self.mode}'")
        if self.mode == "baseline":
            if self.baseline not in BASELINES:
                raise UsageError(f"unknown baseline '{self.baseline}', choose from {', '.join(BASELINES)}")
        elif self.baseline is not None:
            raise UsageError("--baseline is only valid with the baseline command")
        if self.steps is not None and self.steps < 1:
            raise UsageError("--steps must be positive")
        return self

    @property
    def scheme(self) -> str:
        return self.baseline if self.mode == "baseline" else ROTATABLE


def build_env(scenario: ScenarioConfig, protocol: Protocol, scheme: str, seed: int) -> StarMecEnv:
    """Environment for a named scheme; one-sided surfaces reuse the ES machinery."""
    if scheme in ("reflect-only", "transmit-only"):
        return StarMecEnv(scenario, Protocol.ES, seed=seed, surface=scheme.split("-")[0])
    return StarMecEnv(scenario, protocol, seed=seed,
                      fixed_orientation=scheme == FIXED,
                      force_local=scheme == "local-only")


def eval_seeds(seed: int, count: int) -> List[int]:
    return [seed * 1000 + 500 + i for i in range(count)]


def summarize_episodes(protocol: str, scheme: str, scenario: ScenarioConfig, seed: int,
                       episodes: Sequence[EpisodeResult], wall_clock: float) -> ResultRow:
    per_ud = np.mean([e.per_ud_energy for e in episodes], axis=0)
    return ResultRow(
        protocol=protocol,
        scheme=scheme,
        N=scenario.N,
        K=scenario.K,
        seed=seed,
        total_energy_J=float(per_ud.sum()),
        per_ud_energy_J=[float(e) for e in per_ud],
        P1=float(np.mean([e.P1 for e in episodes])),
        P2=float(np.mean([e.P2 for e in episodes])),
        wall_clock_s=wall_clock,
    )


def run_seed(spec: ExperimentSpec, scenario: ScenarioConfig, agent_cfg: AgentConfig,
             seed: int) -> Tuple[ResultRow, List[TrainingLogRow]]:
    """
    Train or load a policy for one seed (if the scheme needs one) and evaluate it.

    Returns:
        (result row, training log rows; empty when nothing was trained)
    """
    scheme = spec.scheme
    protocol = Protocol.ES if scheme in ("reflect-only", "transmit-only") else spec.protocol
    scenario = scenario.with_overrides(seed=seed)
    agent_cfg = agent_cfg.with_overrides(seed=seed)
    env = build_env(scenario, protocol, scheme, seed)
    run_name = f"{protocol.value}-{scheme}-N{scenario.N}-K{scenario.K}-seed{seed}"
    ckpt_dir = spec.out / "checkpoints"
    started = time.perf_counter()
    log: List[TrainingLogRow] = []

    if scheme == "local-only":
        policy = zero_policy(env.action_dim)
    elif scheme == "random-policy":
        policy = random_policy(np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2]), env.action_dim)
    elif spec.mode == "eval":
        path = ckpt_dir / checkpoint_name(run_name)
        if not path.exists():
            raise ConfigurationError("checkpoint", f"no checkpoint at {path}; run train first")
        policy = SacAgent.load(path).policy(deterministic=True)
    else:
        console.print(f"[blue]🚀 Training {run_name}[/blue]")
        agent, log = train(env, agent_cfg, checkpoint_dir=ckpt_dir, run_name=run_name,
                           show_progress=not spec.quiet)
        saved = agent.save(ckpt_dir / checkpoint_name(run_name))
        console.print(f"[green]✓ Saved checkpoint to: {saved}[/green]")
        policy = agent.policy(deterministic=True)

    episodes = evaluate(
        env, policy, eval_seeds(seed, agent_cfg.eval_episodes),
        trace_path=spec.out / f"trace_{seed}.csv" if spec.trace else None,
        channel_trace_path=spec.out / f"channel_{seed}.csv" if spec.channel_trace else None,
    )
    row = summarize_episodes(protocol.value, scheme, scenario, seed, episodes, time.perf_counter() - started)
    return row, log


def run(spec: ExperimentSpec) -> List[ResultRow]:
    """
    Execute a train/eval/baseline spec over every sweep value and seed.

    Writes results.csv, and train_log.csv when anything was trained.
    """
    spec.validate()
    scenario, agent_cfg = load_config(spec.config_path)
    if spec.steps is not None:
        agent_cfg = agent_cfg.with_overrides(total_env_steps=spec.steps)
    print_diff(ScenarioConfig().to_dict(), scenario.to_dict(), title="Scenario overrides")

    rows: List[ResultRow] = []
    log_rows: List[TrainingLogRow] = []
    for value in spec.sweep_values:
        swept = scenario if spec.sweep_key is None else scenario.with_overrides(**{spec.sweep_key: value})
        for seed in spec.seeds:
            row, log = run_seed(spec, swept, agent_cfg, seed)
            rows.append(row)
            log_rows.extend(log)
            console.print(f"[green]✓ {row.protocol} {row.scheme} N={row.N} K={row.K} seed={seed}: "
                          f"{row.total_energy_J:.4f} J[/green]")

    results_path = write_results(spec.out / "results.csv", rows)
    console.print(f"[green]✓ Wrote {len(rows)} rows to: {results_path}[/green]")
    if log_rows:
        write_training_log(spec.out / "train_log.csv", log_rows)
    return rows


def compare(rows: Sequence[ResultRow]) -> List[SummaryRow]:
    """
    Mean/std energy per (protocol, scheme, N, K), the reduction of rotatable
    against fixed-orientation, and a per-configuration protocol ranking.

    Raises:
        ComparisonError: when schemes of one configuration were run on different seeds
    """
    if not rows:
        raise ComparisonError("no result rows to compare")
    groups: Dict[Tuple, List[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.protocol, row.scheme, row.N, row.K), []).append(row)

    seeds_by_config: Dict[Tuple, Dict[str, List[int]]] = {}
    for (_, scheme, _, _), members in groups.items():
        seeds_by_config.setdefault(members[0].config_key, {})[scheme] = sorted(r.seed for r in members)
    for config, by_scheme in seeds_by_config.items():
        seed_sets = {tuple(s) for s in by_scheme.values()}
        if len(seed_sets) > 1:
            raise ComparisonError(f"schemes of {config} were run on different seeds: {by_scheme}")

    summary: Dict[Tuple, SummaryRow] = {}
    for (protocol, scheme, N, K), members in sorted(groups.items()):
        energies = np.array([r.total_energy_J for r in members])
        summary[(protocol, scheme, N, K)] = SummaryRow(
            protocol=protocol, scheme=scheme, N=N, K=K, n_seeds=len(members),
            mean_energy_J=float(energies.mean()),
            std_energy_J=float(energies.std(ddof=1)) if len(energies) > 1 else 0.0,
        )

    for (protocol, scheme, N, K), row in summary.items():
        if scheme != ROTATABLE:
            continue
        fixed = summary.get((protocol, FIXED, N, K))
        if fixed is not None and fixed.mean_energy_J > 0.0:
            row.reduction_pct = repr((fixed.mean_energy_J - row.mean_energy_J) / fixed.mean_energy_J * 100.0)

    rotatable = [r for r in summary.values() if r.scheme == ROTATABLE]
    for N, K in sorted({(r.N, r.K) for r in rotatable}):
        ranked = sorted((r for r in rotatable if (r.N, r.K) == (N, K)), key=lambda r: r.mean_energy_J)
        for rank, row in enumerate(ranked, start=1):
            row.protocol_rank = str(rank)
    return list(summary.values())


def run_compare(spec: ExperimentSpec) -> List[SummaryRow]:
    inputs = spec.inputs or [spec.out / "results.csv"]
    rows: List[ResultRow] = []
    for path in inputs:
        rows.extend(read_results(path))
    summary = compare(rows)
    path = write_summary(spec.out / "summary.csv", summary)
    print_summary(summary)
    console.print(f"[green]✓ Wrote summary to: {path}[/green]")
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="star-mec-sim",
        description="Rotatable STAR-RIS assisted MEC: train, evaluate and compare offloading policies",
    )
    parser.add_argument("mode", choices=MODES, help="What to run")
    parser.add_argument("--config", help="Flat JSON config (scenario and agent keys)")
    parser.add_argument("--protocol", default="es", help="es, ms or ts (default: es)")
    parser.add_argument("--baseline", help=f"Benchmark scheme: {', '.join(BASELINES)}")
    parser.add_argument("--seeds", default=DEFAULT_SEEDS, help="Seed list, e.g. 2020-2024 or 1,2,3")
    parser.add_argument("--out", default=DEFAULT_OUT, help="Output directory")
    parser.add_argument("--sweep", help="Scenario sweep, e.g. N=16,32,64 or K=2,4,6")
    parser.add_argument("--steps", type=int, help="Training budget in environment steps")
    parser.add_argument("--trace", action="store_true", help="Write trace_<seed>.csv for the first eval episode")
    parser.add_argument("--channel-trace", action="store_true", help="Write channel_<seed>.csv with effective channels")
    parser.add_argument("--inputs", nargs="*", default=[], help="results.csv files for compare")
    parser.add_argument("--quiet", action="store_true", help="Hide progress bars")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    return parser


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    try:
        protocol = Protocol.parse(args.protocol)
    except ValueError:
        raise UsageError(f"unknown protocol '{args.protocol}', choose es, ms or ts")
    sweep_key, sweep_values = parse_sweep(args.sweep)
    return ExperimentSpec(
        mode=args.mode,
        protocol=protocol,
        baseline=args.baseline,
        seeds=parse_seeds(args.seeds),
        out=Path(args.out),
        config_path=args.config,
        sweep_key=sweep_key,
        sweep_values=sweep_values,
        steps=args.steps,
        trace=args.trace,
        channel_trace=args.channel_trace,
        inputs=[Path(p) for p in args.inputs],
        quiet=args.quiet or QUIET,
    ).validate()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_verbosity(args.verbose)

    try:
        spec = spec_from_args(args)
        console.print(Panel(f"[bold]{spec.mode}[/bold] · protocol {spec.protocol.value} · scheme {spec.scheme}"
                            f" · seeds {spec.seeds[0]}..{spec.seeds[-1]} · out {spec.out}",
                            title="star-mec-sim", border_style="blue"))
        if spec.mode == "compare":
            run_compare(spec)
        else:
            run(spec)
    except UsageError as e:
        console.print(f"[red]Usage error: {e}[/red]")
        return EXIT_USAGE
    except (ConfigurationError, ComparisonError, OSError) as e:
        console.print(f"[red]Configuration error: {e}[/red]")
        return EXIT_CONFIG
    except TrainingDivergedError as e:
        console.print(f"[red]Training diverged: {e}[/red]")
        return EXIT_RUNTIME
    except StarMecError as e:
        console.print(f"[red]Error: {e}[/red]")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
