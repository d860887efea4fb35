"""
CSV records written by the experiment runner.

Floats are written with repr() so a file re-parses into exactly the values that
produced it.
"""

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, List, Sequence, Type

from agents.sac import TrainingLogRow
from core.errors import ConfigurationError


RESULT_COLUMNS = ["protocol", "scheme", "N", "K", "seed", "total_energy_J", "per_ud_energy_J",
                  "P1", "P2", "wall_clock_s"]


@dataclass
class ResultRow:
    """One evaluated (protocol, scheme, N, K, seed) run."""

    protocol: str
    scheme: str
    N: int
    K: int
    seed: int
    total_energy_J: float
    per_ud_energy_J: List[float]
    P1: float
    P2: float
    wall_clock_s: float = 0.0

    def __post_init__(self):
        if self.total_energy_J < 0.0 or any(e < 0.0 for e in self.per_ud_energy_J):
            raise ConfigurationError("total_energy_J", "energy must be non-negative")

    @property
    def config_key(self):
        return (self.protocol, self.N, self.K)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ";".join(repr(float(v)) for v in value)
    return str(value)


def write_results(path: Path, rows: Iterable[ResultRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in RESULT_COLUMNS])
    return path


def read_results(path: Path) -> List[ResultRow]:
    """
    Parse a results.csv back into ResultRow objects.

    Raises:
        ConfigurationError: if the file is missing or its header is unexpected
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError("results", f"file not found: {path}")
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != RESULT_COLUMNS:
            raise ConfigurationError("results", f"unexpected columns in {path}")
        return [
            ResultRow(
                protocol=r["protocol"],
                scheme=r["scheme"],
                N=int(r["N"]),
                K=int(r["K"]),
                seed=int(r["seed"]),
                total_energy_J=float(r["total_energy_J"]),
                per_ud_energy_J=[float(v) for v in r["per_ud_energy_J"].split(";") if v],
                P1=float(r["P1"]),
                P2=float(r["P2"]),
                wall_clock_s=float(r["wall_clock_s"]),
            )
            for r in reader
        ]


def write_dataclass_rows(path: Path, rows: Sequence, row_type: Type) -> Path:
    """Write dataclass instances with one column per field."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [f.name for f in fields(row_type)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(names)
        for row in rows:
            writer.writerow([_fmt(getattr(row, n)) for n in names])
    return path


def read_training_log(path: Path) -> List[TrainingLogRow]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        return [
            TrainingLogRow(
                episode=int(r["episode"]),
                env_steps=int(r["env_steps"]),
                mean_return=float(r["mean_return"]),
                critic_loss=float(r["critic_loss"]),
                actor_loss=float(r["actor_loss"]),
                alpha=float(r["alpha"]),
                eval_energy_J=float(r["eval_energy_J"]),
            )
            for r in csv.DictReader(f)
        ]


def write_training_log(path: Path, rows: Sequence[TrainingLogRow]) -> Path:
    return write_dataclass_rows(path, rows, TrainingLogRow)


@dataclass
class SummaryRow:
    """Aggregate of one (protocol, scheme, N, K) group across seeds."""

    protocol: str
    scheme: str
    N: int
    K: int
    n_seeds: int
    mean_energy_J: float
    std_energy_J: float
    reduction_pct: str = ""      # rotatable rows only, vs fixed-orientation
    protocol_rank: str = ""      # rotatable rows only, 1 = lowest mean energy


def write_summary(path: Path, rows: Sequence[SummaryRow]) -> Path:
    return write_dataclass_rows(path, rows, SummaryRow)
