"""Batch experiments: config files, seeded repetitions, CSV and SVG output."""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

from .engine import run
from .messaging import write_trace
from .metrics import (
    METRIC_NAMES,
    RunResult,
    SummaryRow,
    aggregate,
    fmt,
    write_queue_csv,
    write_series_csv,
    write_summary_csv,
)
from .params import SetupParameters

log = logging.getLogger(__name__)

RUN_COLUMNS = ("seed", "ticks", "truncated") + METRIC_NAMES + ("missed", "missedAmI")


class ConfigError(ValueError):
    def __init__(self, key: str, line: int | None, reason: str):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{key}: {reason}")
        self.key = key
        self.line = line


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    params: SetupParameters = field(default_factory=SetupParameters)
    runs: int = 30
    seed: int = 0
    out: str = "results"
    trace: bool = False
    series: bool = False
    svg: bool = False
    # 0 means one worker per CPU, 1 runs in-process
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.workers < 0:
            raise ValueError("workers must be >= 0")
        # the batch seed is the only seed; keep params in step with it
        if self.params.seed != self.seed:
            object.__setattr__(self, "params", dataclasses.replace(self.params, seed=self.seed))

    def seeds(self) -> range:
        return range(self.seed, self.seed + self.runs)

    def params_for(self, seed: int) -> SetupParameters:
        return dataclasses.replace(self.params, seed=seed)


_PARAM_TYPES = typing.get_type_hints(SetupParameters)
_EXPERIMENT_KEYS = ("runs", "out", "trace", "series", "svg", "workers")
_EXPERIMENT_TYPES = {k: v for k, v in typing.get_type_hints(ExperimentConfig).items() if k in _EXPERIMENT_KEYS}
# the base seed lives on the experiment; params.seed is set per run
KEYS: dict[str, type] = {**{k: v for k, v in _PARAM_TYPES.items()}, **_EXPERIMENT_TYPES}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(key: str, raw: str, line: int | None):
    kind = KEYS.get(key)
    if kind is None:
        raise ConfigError(key, line, "unknown key")
    try:
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(key, line, f"bad value {raw!r} ({e})") from None


def config_from_pairs(pairs: Sequence[tuple[str, str, int | None]], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from ``(key, raw value, line)`` triples applied over ``base``."""
    base = base or ExperimentConfig()
    exp = {k: getattr(base, k) for k in _EXPERIMENT_KEYS}
    exp["seed"] = base.seed
    params = dataclasses.asdict(base.params)
    for key, raw, line in pairs:
        value = _convert(key, raw, line)
        if key == "seed":
            exp["seed"] = value
        elif key in _EXPERIMENT_KEYS:
            exp[key] = value
        else:
            params[key] = value
    try:
        sp = SetupParameters(**params)
    except ValueError as e:
        raise ConfigError("params", None, str(e)) from None
    return ExperimentConfig(params=dataclasses.replace(sp, seed=exp["seed"]), **exp)


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    pairs = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, n, "expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        pairs.append((key, raw, n))
    return config_from_pairs(pairs, base)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def parse_overrides(items: Sequence[str]) -> list[tuple[str, str, None]]:
    pairs = []
    for item in items:
        if "=" not in item:
            raise ConfigError(item, None, "override must look like key=value")
        key, raw = item.split("=", 1)
        pairs.append((key.strip(), raw.strip(), None))
    return pairs


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def dump_config(config: ExperimentConfig) -> str:
    lines = ["# experiment"]
    lines += [f"runs = {config.runs}", f"seed = {config.seed}"]
    lines += [f"{k} = {_render(getattr(config, k))}" for k in _EXPERIMENT_KEYS if k != "runs"]
    lines.append("# model")
    lines += [
        f"{f.name} = {_render(getattr(config.params, f.name))}"
        for f in dataclasses.fields(SetupParameters)
        if f.name != "seed"
    ]
    return "\n".join(lines) + "\n"


# -- outputs ---------------------------------------------------------------------


def run_row(r: RunResult) -> dict:
    m = r.metrics()
    missed = r.missed_flights
    return {
        "seed": r.seed,
        "ticks": r.ticks,
        "truncated": r.truncated,
        **m,
        "missed": missed[False],
        "missedAmI": missed[True],
    }


def write_runs_csv(results: Sequence[RunResult], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in results:
        row = run_row(r)
        w.writerow(
            [row["seed"], row["ticks"], "true" if row["truncated"] else "false"]
            + [fmt(row[name]) for name in METRIC_NAMES]
            + [row["missed"], row["missedAmI"]]
        )


def read_runs_csv(inp: TextIO) -> list[dict]:
    rows = []
    for rec in csv.DictReader(inp):
        rows.append({name: float(rec[name]) for name in METRIC_NAMES} | {"seed": int(rec["seed"])})
    return rows


def write_events_csv(r: RunResult, out: TextIO) -> None:
    """Roles first (tick -1, kind "role"), then the engine's event log."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("tick", "aid", "kind", "detail"))
    for aid in sorted(r.roles):
        w.writerow((-1, aid, "role", r.roles[aid]))
    for tick, aid, kind, detail in r.events:
        w.writerow((tick, aid, kind, detail))


def read_events_csv(inp: TextIO) -> tuple[dict[int, str], list[tuple[int, int, str, str]]]:
    roles, events = {}, []
    for rec in csv.DictReader(inp):
        tick, aid = int(rec["tick"]), int(rec["aid"])
        if rec["kind"] == "role":
            roles[aid] = rec["detail"]
        else:
            events.append((tick, aid, rec["kind"], rec["detail"]))
    return roles, events


def mean_series(results: Sequence[RunResult]) -> list[tuple[int, float, float]]:
    """Per-tick mean over runs; a finished run holds its last value."""
    n = max((len(r.series) for r in results), default=0)
    out = []
    for t in range(n):
        non = ami = 0.0
        for r in results:
            if not r.series:
                continue
            _, a, b = r.series[min(t, len(r.series) - 1)]
            non += a
            ami += b
        out.append((t, non / len(results), ami / len(results)))
    return out


def series_svg(series: Sequence[tuple[int, float, float]], width: int = 640, height: int = 400) -> str:
    """Two-curve line chart of satisfaction over ticks."""
    pad = 50
    ticks = [t for t, _, _ in series] or [0]
    values = [v for _, a, b in series for v in (a, b)] or [0.0]
    t_max = max(max(ticks), 1)
    lo, hi = min(values + [0.0]), max(values + [0.0])
    if hi == lo:
        hi = lo + 1

    def x(t):
        return pad + (width - 2 * pad) * t / t_max

    def y(v):
        return height - pad - (height - 2 * pad) * (v - lo) / (hi - lo)

    def polyline(idx, colour):
        pts = " ".join(f"{x(s[0]):.2f},{y(s[idx]):.2f}" for s in series)
        return f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>'

    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            '<rect width="100%" height="100%" fill="white"/>',
            f'<line x1="{pad}" y1="{y(0):.2f}" x2="{width - pad}" y2="{y(0):.2f}" stroke="#bbb"/>',
            f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
            f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
            polyline(1, "#d62728"),
            polyline(2, "#1f77b4"),
            f'<text x="{pad}" y="{pad - 20}" font-size="12">satisfaction per tick (mean over runs)</text>',
            f'<text x="{width - pad - 140}" y="{pad - 20}" font-size="12" fill="#d62728">non-AmI</text>',
            f'<text x="{width - pad - 70}" y="{pad - 20}" font-size="12" fill="#1f77b4">AmI</text>',
            f'<text x="{pad - 5}" y="{pad}" font-size="10" text-anchor="end">{hi:g}</text>',
            f'<text x="{pad - 5}" y="{height - pad}" font-size="10" text-anchor="end">{lo:g}</text>',
            f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{t_max}</text>',
            f'<text x="{width / 2:.0f}" y="{height - 15}" font-size="12" text-anchor="middle">tick</text>',
            "</svg>",
            "",
        ]
    )


# -- batch -----------------------------------------------------------------------


@dataclass
class BatchResult:
    summary: list[SummaryRow]
    results: list[RunResult]

    @property
    def truncated(self) -> bool:
        return any(r.truncated for r in self.results)


def _prepare_out(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise ExperimentError(f"output directory {path} is not writable: {e}") from None


def run_all(config: ExperimentConfig) -> list[RunResult]:
    params = [config.params_for(s) for s in config.seeds()]
    if config.workers == 1 or config.runs == 1:
        return [run(p) for p in params]
    with ProcessPoolExecutor(max_workers=config.workers or None) as pool:
        return list(pool.map(run, params))


def batch(config: ExperimentConfig) -> BatchResult:
    out = Path(config.out)
    _prepare_out(out)
    results = run_all(config)
    summary = aggregate(results)
    with open(out / "runs.csv", "w", newline="") as f:
        write_runs_csv(results, f)
    with open(out / "summary.csv", "w", newline="") as f:
        write_summary_csv(summary, f)
    (out / "config.txt").write_text(dump_config(config))
    for r in results:
        if config.trace:
            with open(out / f"trace-{r.seed}.txt", "w") as f:
                write_trace(r.trace, f)
            with open(out / f"events-{r.seed}.csv", "w", newline="") as f:
                write_events_csv(r, f)
        if config.series:
            with open(out / f"series-{r.seed}.csv", "w", newline="") as f:
                write_series_csv(r.series, f)
            with open(out / f"queues-{r.seed}.csv", "w", newline="") as f:
                write_queue_csv(r.queue_lengths, f)
    avg = mean_series(results)
    if config.series:
        with open(out / "series.csv", "w", newline="") as f:
            write_series_csv(avg, f)
    if config.svg:
        (out / "satisfaction.svg").write_text(series_svg(avg))
    for r in results:
        if r.truncated:
            log.warning("seed %d truncated after %d ticks", r.seed, r.ticks)
    return BatchResult(summary, results)
