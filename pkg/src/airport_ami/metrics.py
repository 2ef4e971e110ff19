"""Evaluation criteria: per-agent satisfaction, time in airport, run and batch summaries."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field
from typing import Any, Sequence, TextIO

METRIC_NAMES = ("total-satisfaction", "total-satisfactionAmI", "average-time", "average-timeAmI")


@dataclass(frozen=True)
class SatisfactionWeights:
    miss: float = 100
    shop: float = 10
    queue: float = 1


@dataclass
class MetricLog:
    aid: int
    ami: bool
    outgoing: bool
    entry_tick: int
    exit_tick: int | None = None
    queue_wait: int = 0
    purchases: list[tuple[str, float]] = field(default_factory=list)
    missed_flight: bool = False
    failed: bool = False

    @property
    def terminated(self) -> bool:
        return self.exit_tick is not None

    @property
    def time_in_airport(self) -> int:
        if self.exit_tick is None:
            raise ValueError(f"agent {self.aid} has not left the airport")
        return self.exit_tick - self.entry_tick

    def close(self, tick: int) -> None:
        if tick < self.entry_tick:
            raise ValueError("exit tick before entry tick")
        self.exit_tick = tick

    def mark_missed(self) -> None:
        if not self.outgoing:
            raise ValueError("only outgoing agents can miss a flight")
        self.missed_flight = True


def satisfaction(log: MetricLog, weights: SatisfactionWeights = SatisfactionWeights()) -> float:
    """Score of one terminated agent.

    Making the flight (or, for arrivals, getting out) is worth ``+miss``;
    missing it (or failing) costs ``-miss``. Each purchase adds ``shop`` and
    each tick spent waiting in a line costs ``queue``.
    """
    if not log.terminated:
        raise ValueError(f"agent {log.aid} has not terminated")
    return accrued_satisfaction(log, weights)


def accrued_satisfaction(
    log: MetricLog, weights: SatisfactionWeights, extra_wait: int = 0
) -> float:
    """Score accumulated so far; the flight term only counts once terminated."""
    score = weights.shop * len(log.purchases) - weights.queue * (log.queue_wait + extra_wait)
    if log.terminated:
        score += -weights.miss if (log.missed_flight or log.failed) else weights.miss
    return score


@dataclass
class RunResult:
    seed: int
    ticks: int
    truncated: bool
    logs: dict[int, MetricLog]
    weights: SatisfactionWeights = field(default_factory=SatisfactionWeights)
    series: list[tuple[int, float, float]] = field(default_factory=list)
    trace: list = field(default_factory=list)
    roles: dict[int, str] = field(default_factory=dict)
    events: list[tuple] = field(default_factory=list)
    queue_lengths: dict[int, list[int]] = field(default_factory=dict)

    def population(self, ami: bool) -> list[MetricLog]:
        return [lg for lg in self.logs.values() if lg.ami == ami and lg.terminated]

    def total_satisfaction_of(self, ami: bool) -> float:
        return sum(satisfaction(lg, self.weights) for lg in self.population(ami))

    def average_time_of(self, ami: bool) -> float:
        pop = self.population(ami)
        if not pop:
            return 0.0
        return sum(lg.time_in_airport for lg in pop) / len(pop)

    @property
    def total_satisfaction(self) -> float:
        return self.total_satisfaction_of(False)

    @property
    def total_satisfaction_ami(self) -> float:
        return self.total_satisfaction_of(True)

    @property
    def average_time(self) -> float:
        return self.average_time_of(False)

    @property
    def average_time_ami(self) -> float:
        return self.average_time_of(True)

    def metrics(self) -> dict[str, float]:
        """The four Table-1 style values of this run, keyed by metric name."""
        return dict(
            zip(
                METRIC_NAMES,
                (
                    self.total_satisfaction,
                    self.total_satisfaction_ami,
                    self.average_time,
                    self.average_time_ami,
                ),
            )
        )

    @property
    def missed_flights(self) -> dict[bool, int]:
        return {
            ami: sum(1 for lg in self.population(ami) if lg.missed_flight) for ami in (False, True)
        }


@dataclass(frozen=True)
class SummaryRow:
    name: str
    average: float
    stddev: float


def summarize(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        raise ValueError("no values to summarize")
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, sd


def aggregate(results: Sequence[RunResult | dict[str, Any]]) -> list[SummaryRow]:
    """Mean and sample standard deviation of each metric over runs."""
    if not results:
        raise ValueError("aggregate needs at least one run")
    rows = []
    per_run = [r if isinstance(r, dict) else r.metrics() for r in results]
    for name in METRIC_NAMES:
        mean, sd = summarize([float(m[name]) for m in per_run])
        rows.append(SummaryRow(name, mean, sd))
    return rows


def fmt(x: float) -> str:
    return repr(float(x))


def write_summary_csv(rows: Sequence[SummaryRow], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["name", "average", "stddev"])
    for row in rows:
        w.writerow([row.name, fmt(row.average), fmt(row.stddev)])


def write_series_csv(series: Sequence[tuple[int, float, float]], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["tick", "satisfaction_nonami", "satisfaction_ami"])
    for tick, non, ami in series:
        w.writerow([tick, fmt(non), fmt(ami)])


def write_queue_csv(queue_lengths: dict[int, list[int]], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    providers = sorted(queue_lengths)
    w.writerow(["tick"] + [f"provider_{aid}" for aid in providers])
    n = max((len(v) for v in queue_lengths.values()), default=0)
    for t in range(n):
        w.writerow([t] + [queue_lengths[aid][t] for aid in providers])
