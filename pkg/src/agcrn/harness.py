"""Experiment protocol, 5x2cv F-test and report files."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .cga import CgaConfig, Topology
from .data import Dataset, SplitSpec, prepare
from .fitness import FitnessWeights, classification_error
from .genomes import MutationRanges
from .mlp import forward_layers, nmse
from .search import ALGOS, SearchConfig, SearchResult, run
from .trainers import TrainAlgo

log = logging.getLogger(__name__)

F_THRESHOLD = 4.74
REPLICATIONS, FOLDS = 5, 2


class ProtocolError(RuntimeError):
    """An iteration failed; ``partial`` holds the records completed so far."""

    def __init__(self, message: str, partial: "ExperimentResult"):
        super().__init__(message)
        self.partial = partial


@dataclass
class IterationRecord:
    dataset: str
    algo: str
    iteration: int
    replication: int
    fold: int
    hidden_nodes: int
    architecture: str
    train_err: float
    val_err: float
    test_err: float
    train_nmse: float
    test_nmse: float
    i_fit: float
    rule: str


@dataclass
class Summary:
    dataset: str
    algo: str
    mean_arch: float
    mean_train_err: float
    mean_test_err: float
    f_stat: float
    significant: bool
    mean_train_nmse: float
    mean_test_nmse: float


@dataclass
class ExperimentResult:
    dataset: str
    iterations: int
    records: list[IterationRecord] = field(default_factory=list)
    traces: list[dict] = field(default_factory=list)

    def for_algo(self, algo: str) -> list[IterationRecord]:
        return [r for r in self.records if r.algo == algo]

    def algos(self) -> list[str]:
        return list(dict.fromkeys(r.algo for r in self.records))


@dataclass(frozen=True)
class FTestResult:
    statistic: float
    threshold: float = F_THRESHOLD

    @property
    def significant(self) -> bool:
        return self.statistic > self.threshold


def f_test(errors_a, errors_b) -> FTestResult:
    """Combined 5x2cv F-test on paired error rates laid out as (5, 2).

    F = sum_ij d_ij^2 / (2 * sum_i s_i^2), with d the per-fold differences
    and s_i^2 the variance of replication i's two differences.
    """
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != (REPLICATIONS, FOLDS) or b.shape != (REPLICATIONS, FOLDS):
        raise ValueError(f"expected {REPLICATIONS}x{FOLDS} error tables, got {a.shape} and {b.shape}")
    d = a - b
    s2 = ((d - d.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    num, den = float((d ** 2).sum()), float(2.0 * s2.sum())
    if den == 0.0:
        # no within-replication variance: reported as 0 (not significant)
        return FTestResult(0.0)
    return FTestResult(num / den)


def fold_table(records: Sequence[IterationRecord], column: str = "test_err") -> np.ndarray:
    table = np.full((REPLICATIONS, FOLDS), np.nan)
    for r in records:
        if not (0 <= r.replication < REPLICATIONS and 0 <= r.fold < FOLDS):
            raise ValueError(f"iteration {r.iteration} falls outside the 5x2 layout")
        table[r.replication, r.fold] = getattr(r, column)
    if np.isnan(table).any():
        raise ValueError("5x2 table incomplete: need 10 iterations covering every replication and fold")
    return table


def iteration_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(iteration)]).generate_state(1, np.uint64)[0] >> 1)


def _describe_rule(result: SearchResult) -> str:
    return ";".join(f"{k}={v!r}" for k, v in sorted(result.rule.params.values.items()))


def _describe_arch(result: SearchResult) -> str:
    return "-".join(f"{d}{f.value}" for d, f in zip(result.arch.dims, result.arch.fns))


def run_protocol(dataset: Dataset, cfg: SearchConfig, iterations: int = 10,
                 algos: Sequence[TrainAlgo] = ALGOS, mapper: Callable = map,
                 on_record: Callable[[IterationRecord], None] | None = None) -> ExperimentResult:
    """Repeat split + search ``iterations`` times.

    Iterations come in pairs that share one random half-split with the
    halves swapped, so 10 iterations form the 5x2 cross-validation layout.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    result = ExperimentResult(dataset.name, iterations)
    for it in range(iterations):
        replication, fold = divmod(it, FOLDS)
        spec = SplitSpec(seed=iteration_seed(cfg.seed, replication))
        try:
            train, val, test = prepare(dataset, spec, swap=bool(fold))
            it_cfg = dataclasses.replace(cfg, seed=iteration_seed(cfg.seed, 1000 + it))
            for algo in algos:
                found = run(it_cfg, algo, train, val, mapper)
                out = forward_layers(found.network, test.features)[-1]
                record = IterationRecord(
                    dataset.name, algo.value, it, replication, fold, found.hidden_nodes,
                    _describe_arch(found), found.train_error, found.val_error,
                    classification_error(found.network, test), found.train_nmse,
                    nmse(out, test.targets), found.i_fit, _describe_rule(found))
                result.records.append(record)
                result.traces.extend(dict(iteration=it, algo=algo.value, **dataclasses.asdict(t))
                                     for t in found.traces)
                log.info("%s %s iteration %d: arch %s train %.3f%% test %.3f%%", dataset.name,
                         algo.value, it, record.architecture, record.train_err, record.test_err)
                if on_record is not None:
                    on_record(record)
        except Exception as exc:  # noqa: BLE001 - re-raised with partial results
            raise ProtocolError(f"iteration {it} failed: {exc}", result) from exc
    return result


def summarize(result: ExperimentResult,
              reference: Sequence[IterationRecord] | None = None) -> list[Summary]:
    """Per-algorithm means plus a 5x2cv F statistic.

    The comparison partner is the matching algorithm in ``reference`` when
    given, otherwise the algorithm with the lowest mean test error. Without
    a complete 5x2 layout the statistic is NaN.
    """
    algos = result.algos()
    means = {a: float(np.mean([r.test_err for r in result.for_algo(a)])) for a in algos}
    best = min(algos, key=lambda a: means[a]) if algos else None
    rows = []
    for algo in algos:
        recs = result.for_algo(algo)
        if reference is not None:
            partner = [r for r in reference if r.algo == algo and r.dataset == result.dataset]
        else:
            partner = result.for_algo(best)
        try:
            stat = f_test(fold_table(recs), fold_table(partner))
        except ValueError:
            stat = FTestResult(math.nan)
        rows.append(Summary(
            result.dataset, algo,
            float(np.mean([r.hidden_nodes for r in recs])),
            float(np.mean([r.train_err for r in recs])),
            float(np.mean([r.test_err for r in recs])),
            stat.statistic, stat.significant,
            float(np.mean([r.train_nmse for r in recs])),
            float(np.mean([r.test_nmse for r in recs]))))
    return rows


# serialization ---------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(kind, text: str):
    if kind is bool:
        return text == "true"
    if kind is float:
        return float(text)
    if kind is int:
        return int(text)
    return text


def _write_rows(path: Path, rows: Iterable, cls) -> None:
    names = [f.name for f in dataclasses.fields(cls)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([_fmt(getattr(row, n)) for n in names])


def _read_rows(path: Path, cls) -> list:
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    kinds = {n: {"float": float, "int": int, "bool": bool}.get(t if isinstance(t, str) else t.__name__, str)
             for n, t in types.items()}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(types) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [cls(**{n: _parse(kinds[n], row[n]) for n in types}) for row in reader]


def write_summary_csv(path, rows: Sequence[Summary]) -> None:
    _write_rows(Path(path), rows, Summary)


def read_summary_csv(path) -> list[Summary]:
    return _read_rows(Path(path), Summary)


def write_iterations_csv(path, records: Sequence[IterationRecord]) -> None:
    _write_rows(Path(path), records, IterationRecord)


def read_iterations_csv(path) -> list[IterationRecord]:
    return _read_rows(Path(path), IterationRecord)


def format_table(rows: Sequence[Summary]) -> str:
    """Plain-text table: architecture, train/test error and F-test per algorithm."""
    head = f"{'Problem':<10} {'Algo':<5} {'Arch.':>7} {'Train':>9} {'Test':>9} {'F-test':>10}"
    lines = [head, "-" * len(head)]
    last = None
    for r in rows:
        name = r.dataset if r.dataset != last else ""
        last = r.dataset
        if math.isnan(r.f_stat):
            verdict = "n/a"
        else:
            verdict = f"> {F_THRESHOLD}" if r.significant else f"<= {F_THRESHOLD}"
        lines.append(f"{name:<10} {r.algo.upper():<5} {r.mean_arch:>7.1f} {r.mean_train_err:>9.4f} "
                     f"{r.mean_test_err:>9.4f} {verdict:>10}")
    return "\n".join(lines) + "\n"


def config_dict(cfg: SearchConfig) -> dict:
    def plain(v):
        if isinstance(v, Topology):
            return v.value
        if isinstance(v, tuple):
            return list(v)
        return v
    return {k: plain(v) for k, v in flatten_config(cfg).items()}


def flatten_config(cfg: SearchConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out.update({g.name: getattr(value, g.name) for g in dataclasses.fields(value)})
        else:
            out[f.name] = value
    return out


def config_hash(cfg: SearchConfig) -> str:
    blob = json.dumps(config_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def emit_report(results: Sequence[ExperimentResult], out_dir, cfg: SearchConfig,
                datasets: Sequence[Dataset] = (),
                reference: Sequence[IterationRecord] | None = None) -> dict[str, Path]:
    """Write results.csv, iterations.csv, traces.csv, table.txt and manifest.json."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    summaries = [s for res in results for s in summarize(res, reference)]
    paths = {name: out / name for name in
             ("results.csv", "iterations.csv", "traces.csv", "table.txt", "manifest.json")}
    write_summary_csv(paths["results.csv"], summaries)
    write_iterations_csv(paths["iterations.csv"], [r for res in results for r in res.records])
    with open(paths["traces.csv"], "w", newline="") as fh:
        names = ["iteration", "algo", "level", "bera", "beafa", "cell", "generation", "best", "mean",
                 "replacements", "failures"]
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset"] + names)
        for res in results:
            for t in res.traces:
                writer.writerow([res.dataset] + [_fmt(t[n]) for n in names])
    paths["table.txt"].write_text(format_table(summaries))
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config": config_dict(cfg),
        "config_hash": config_hash(cfg),
        "iterations": {res.dataset: res.iterations for res in results},
        "datasets": {d.name: {"checksum": d.checksum, "patterns": len(d), "attributes": d.n_attributes,
                              "classes": d.n_classes, "dropped": d.dropped} for d in datasets},
    }
    paths["manifest.json"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


# config files ------------------------------------------------------------------

_SEARCH_KEYS = {f.name for f in dataclasses.fields(SearchConfig)} - {"cga", "fitness", "ranges"}
_CGA_KEYS = {f.name for f in dataclasses.fields(CgaConfig)}
_FIT_KEYS = {f.name for f in dataclasses.fields(FitnessWeights)}
_RANGE_KEYS = {f.name for f in dataclasses.fields(MutationRanges)}


def _convert(key: str, text: str):
    if key == "topology":
        try:
            return Topology(text.lower().replace("_", "").replace("-", ""))
        except ValueError:
            raise ValueError(f"unknown topology {text!r} (moore or vonneumann)") from None
    if key == "offspring":
        return None if text.lower() in ("", "none", "auto") else int(text)
    if key in ("fx", "arqval"):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ValueError(f"{key} needs two comma-separated values")
        conv = int if key == "arqval" else float
        return (conv(parts[0]), conv(parts[1]))
    if key in ("pra_size", "paf_size", "ppi_size", "bera", "beafa", "bep", "seed"):
        return int(text)
    return float(text)


def parse_config(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SEARCH_KEYS | _CGA_KEYS | _FIT_KEYS | _RANGE_KEYS:
            raise ValueError(f"line {n}: unknown key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError as exc:
            raise ValueError(f"line {n}: {exc}") from None
    return values


def build_config(values: dict, base: SearchConfig = SearchConfig()) -> SearchConfig:
    pick = lambda keys, obj: dataclasses.replace(obj, **{k: v for k, v in values.items() if k in keys})
    return dataclasses.replace(
        base,
        cga=pick(_CGA_KEYS, base.cga),
        fitness=pick(_FIT_KEYS, base.fitness),
        ranges=pick(_RANGE_KEYS, base.ranges),
        **{k: v for k, v in values.items() if k in _SEARCH_KEYS},
    )


def format_config(cfg: SearchConfig) -> str:
    lines = []
    for key, value in flatten_config(cfg).items():
        if isinstance(value, Topology):
            value = value.value
        elif isinstance(value, tuple):
            value = ", ".join(str(v) for v in value)
        elif value is None:
            value = "auto"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
