"""Experiment grid orchestration: repeat (window x lag x plan x mode)
cells, aggregate per-run RMSEs, pair clean/leaky cells into gain records,
and emit CSV/JSON reports plus long-format plot data.

Per-run seeds derive from the base seed and the cell coordinates (never
from grid position), so a cell's results do not depend on which other
cells run alongside it and grids can execute concurrently. A null base
seed means fresh entropy per run.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .audit import AuditReport, audit
from .errors import ContaminationError, LeakbenchError, SplitError
from .forecaster import TrainConfig, baseline_linear_ar, baseline_persistence, predict, train
from .metrics import GainRecord, RunStats, aggregate, leakage_rank, make_gain_record, rmse
from .series import TimeSeries, load_csv
from .splitting import SplitPlan, SplitSpec, SplitResult, split
from .windowing import WindowConfig

MODELS = ("lstm", "persistence", "linear_ar")

_CONVENTIONS = {
    "k_fold_run_rmse": "mean of the k per-fold test RMSEs",
    "early_stopping_monitor": "validation MSE when a validation split exists, else training MSE",
    "leakage_rank": "ascending |gain_percent| within a (window, lag) group; ties by plan order 2-way, 3-way, k-fold",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment grid needs, mirrored 1:1 by the JSON
    config file."""

    name: str
    dataset: str
    windows: tuple[int, ...]
    lags: tuple[int, ...]
    plans: tuple[SplitPlan, ...]
    modes: tuple[str, ...]
    train: TrainConfig
    value_column: str = "meantemp"
    date_column: str = "date"
    order: str = "sequential"
    model: str = "lstm"
    hidden_size: int = 64
    repetitions: int = 10
    base_seed: int | None = None

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise LeakbenchError(f"repetitions must be >= 1, got {self.repetitions}")
        for grid, label in ((self.windows, "windows"), (self.lags, "lags"),
                            (self.plans, "plans"), (self.modes, "modes")):
            if not grid:
                raise LeakbenchError(f"grid list '{label}' must be non-empty")
        if self.model not in MODELS:
            raise LeakbenchError(f"unknown model {self.model!r} (expected one of {MODELS})")
        object.__setattr__(self, "windows", tuple(int(w) for w in self.windows))
        object.__setattr__(self, "lags", tuple(int(l) for l in self.lags))
        object.__setattr__(self, "plans", tuple(self.plans))
        object.__setattr__(self, "modes", tuple(self.modes))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dataset": self.dataset,
            "value_column": self.value_column,
            "date_column": self.date_column,
            "windows": list(self.windows),
            "lags": list(self.lags),
            "plans": [p.to_dict() for p in self.plans],
            "modes": list(self.modes),
            "order": self.order,
            "model": self.model,
            "hidden_size": self.hidden_size,
            "train": self.train.to_dict(),
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            return cls(
                name=d["name"],
                dataset=d["dataset"],
                value_column=d.get("value_column", "meantemp"),
                date_column=d.get("date_column", "date"),
                windows=tuple(d["windows"]),
                lags=tuple(d["lags"]),
                plans=tuple(SplitPlan.from_dict(p) for p in d["plans"]),
                modes=tuple(d["modes"]),
                order=d.get("order", "sequential"),
                model=d.get("model", "lstm"),
                hidden_size=int(d.get("hidden_size", 64)),
                train=TrainConfig.from_dict(d["train"]),
                repetitions=int(d.get("repetitions", 10)),
                base_seed=d.get("base_seed"),
            )
        except KeyError as exc:
            raise LeakbenchError(f"config missing required key {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        p = Path(path)
        if not p.exists():
            raise LeakbenchError(f"no such config file: {p}")
        try:
            payload = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LeakbenchError(f"{p}: invalid JSON: {exc}") from exc
        return cls.from_dict(payload)


@dataclass(frozen=True, eq=False)
class Cell:
    """One grid coordinate."""

    window: int
    lag: int
    plan: SplitPlan
    mode: str

    @property
    def key(self) -> tuple:
        return (self.window, self.lag, self.plan.label, self.mode)


@dataclass(frozen=True)
class CellResult:
    """Aggregated outcome of all repetitions of one cell."""

    window: int
    lag: int
    plan: str
    mode: str
    stats: RunStats
    run_rmses: tuple[float, ...]
    max_overlap: int
    audits: tuple[AuditReport, ...]

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "lag": self.lag,
            "plan": self.plan,
            "mode": self.mode,
            "stats": self.stats.to_dict(),
            "run_rmses": list(self.run_rmses),
            "max_overlap": self.max_overlap,
            "audits": [a.to_dict() for a in self.audits],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellResult":
        return cls(
            window=int(d["window"]),
            lag=int(d["lag"]),
            plan=d["plan"],
            mode=d["mode"],
            stats=RunStats.from_dict(d["stats"]),
            run_rmses=tuple(float(x) for x in d["run_rmses"]),
            max_overlap=int(d["max_overlap"]),
            audits=tuple(AuditReport.from_dict(a) for a in d["audits"]),
        )


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """All cell results, gain records, and provenance of one grid run."""

    name: str
    cells: tuple[CellResult, ...]
    gains: tuple[GainRecord, ...]
    provenance: dict
    errors: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cells": [c.to_dict() for c in self.cells],
            "gains": [g.to_dict() for g in self.gains],
            "provenance": self.provenance,
            "errors": list(self.errors),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(
            name=d["name"],
            cells=tuple(CellResult.from_dict(c) for c in d["cells"]),
            gains=tuple(GainRecord.from_dict(g) for g in d["gains"]),
            provenance=d["provenance"],
            errors=tuple(d.get("errors", ())),
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExperimentReport) and self.to_dict() == other.to_dict()


def derive_seed(base_seed: int | None, *parts) -> int | None:
    """Stable per-(cell, repetition) seed; None propagates fresh entropy."""
    if base_seed is None:
        return None
    key = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return (int(base_seed) ^ int.from_bytes(digest[:8], "big")) & ((1 << 63) - 1)


def _plan_sort(plan_label: str) -> int:
    return {"2-way": 0, "3-way": 1}.get(plan_label, 2)


@dataclass(frozen=True, eq=False)
class _RunOutcome:
    rmse: float
    optimal_epoch: float | None
    last_epoch: float | None
    max_overlap: int
    audits: tuple[AuditReport, ...]


def _evaluate_fold(
    cfg: ExperimentConfig, result: SplitResult, train_seed: int | None
) -> tuple[float, float | None, float | None]:
    """Train/evaluate one fold, returning (test RMSE, optimal, last epoch)."""
    targets = result.test.targets()
    if cfg.model == "persistence":
        preds = baseline_persistence(result.test)
        return rmse(preds, targets), None, None
    if cfg.model == "linear_ar":
        preds = baseline_linear_ar(result.train, result.test)
        return rmse(preds, targets), None, None
    train_cfg = TrainConfig(
        epochs=cfg.train.epochs,
        learning_rate=cfg.train.learning_rate,
        batch_size=cfg.train.batch_size,
        early_stopping=cfg.train.early_stopping,
        patience=cfg.train.patience,
        seed=train_seed,
        scaling=cfg.train.scaling,
    )
    outcome = train(result.train, result.val, train_cfg, hidden_size=cfg.hidden_size)
    preds = predict(outcome.model, outcome.scaler, result.test)
    return rmse(preds, targets), float(outcome.optimal_epoch), float(outcome.last_epoch)


def _run_once(series: TimeSeries, cfg: ExperimentConfig, cell: Cell, rep: int) -> _RunOutcome:
    split_seed = derive_seed(cfg.base_seed, *cell.key, rep, "split")
    spec = SplitSpec(
        plan=cell.plan,
        mode=cell.mode,
        window=WindowConfig(cell.window, cell.lag),
        order=cfg.order,
        seed=split_seed,
    )
    results = split(series, spec)
    fold_rmses = []
    optimal_epochs = []
    last_epochs = []
    audits = []
    for res in results:
        report = audit(res)
        audits.append(report)
        if cell.mode == "clean" and report.is_contaminated:
            raise ContaminationError(
                f"clean cell audited contaminated: W={cell.window} L={cell.lag} "
                f"plan={cell.plan.label} fold={res.fold_index} "
                f"overlap={report.overlap_count}"
            )
        train_seed = derive_seed(cfg.base_seed, *cell.key, rep, res.fold_index, "train")
        fold_rmse, opt, last = _evaluate_fold(cfg, res, train_seed)
        fold_rmses.append(fold_rmse)
        if opt is not None:
            optimal_epochs.append(opt)
            last_epochs.append(last)
    return _RunOutcome(
        rmse=float(np.mean(fold_rmses)),
        optimal_epoch=float(np.mean(optimal_epochs)) if optimal_epochs else None,
        last_epoch=float(np.mean(last_epochs)) if last_epochs else None,
        max_overlap=max(a.overlap_count for a in audits),
        audits=tuple(audits),
    )


def _execute_task(
    series: TimeSeries, cfg: ExperimentConfig, task: tuple[Cell, int]
) -> tuple[Cell, int, "_RunOutcome | Exception"]:
    """One (cell, repetition) unit of work; module-level so worker
    processes can pickle it. Errors come back as values and are re-raised
    (or recorded) by the parent."""
    cell, rep = task
    try:
        return cell, rep, _run_once(series, cfg, cell, rep)
    except LeakbenchError as exc:
        return cell, rep, exc


def run_experiment(
    cfg: ExperimentConfig, workers: int = 1, keep_going: bool = False
) -> ExperimentReport:
    """Execute the full grid.

    Each repetition of each cell is one run: split, audit every fold (a
    contaminated clean fold aborts the whole experiment regardless of
    keep_going), train, predict on test, RMSE. A cell's run RMSE under
    k-fold is the mean of its per-fold test RMSEs. Cell failures abort
    unless keep_going, in which case they are recorded in report.errors.
    """
    series = load_csv(cfg.dataset, cfg.value_column, cfg.date_column)
    cells = [
        Cell(window=w, lag=l, plan=p, mode=m)
        for w in cfg.windows
        for l in cfg.lags
        for p in cfg.plans
        for m in cfg.modes
    ]
    tasks = [(cell, rep) for cell in cells for rep in range(cfg.repetitions)]

    outcomes: dict[tuple, list[tuple[int, _RunOutcome]]] = {c.key: [] for c in cells}
    errors: list[str] = []

    execute = partial(_execute_task, series, cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            completed = list(pool.map(execute, tasks))
    else:
        completed = [execute(t) for t in tasks]

    failed_cells: set[tuple] = set()
    for cell, rep, outcome in completed:
        if isinstance(outcome, ContaminationError):
            raise outcome
        if isinstance(outcome, Exception):
            msg = (
                f"cell W={cell.window} L={cell.lag} plan={cell.plan.label} "
                f"mode={cell.mode} rep={rep}: {outcome}"
            )
            if not keep_going:
                raise SplitError(msg)
            errors.append(msg)
            failed_cells.add(cell.key)
        else:
            outcomes[cell.key].append((rep, outcome))

    cell_results = []
    for cell in cells:
        if cell.key in failed_cells:
            continue
        runs = [o for _, o in sorted(outcomes[cell.key], key=lambda t: t[0])]
        rmses = [r.rmse for r in runs]
        optimal = [r.optimal_epoch for r in runs if r.optimal_epoch is not None]
        last = [r.last_epoch for r in runs if r.last_epoch is not None]
        stats = aggregate(rmses, optimal_epochs=optimal or None, last_epochs=last or None)
        cell_results.append(
            CellResult(
                window=cell.window,
                lag=cell.lag,
                plan=cell.plan.label,
                mode=cell.mode,
                stats=stats,
                run_rmses=tuple(rmses),
                max_overlap=max(r.max_overlap for r in runs),
                audits=runs[0].audits,
            )
        )
    cell_results.sort(key=lambda c: (c.window, c.lag, _plan_sort(c.plan), c.mode))

    gains = _pair_gains(cell_results)
    provenance = {
        "config": cfg.to_dict(),
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "conventions": dict(_CONVENTIONS),
    }
    return ExperimentReport(
        name=cfg.name,
        cells=tuple(cell_results),
        gains=tuple(gains),
        provenance=provenance,
        errors=tuple(errors),
    )


def _pair_gains(cells: list[CellResult]) -> list[GainRecord]:
    """One GainRecord per (window, lag, plan) with both modes present,
    ranked inside each (window, lag) group."""
    by_coord: dict[tuple, dict[str, CellResult]] = {}
    for c in cells:
        by_coord.setdefault((c.window, c.lag, c.plan), {})[c.mode] = c
    records = []
    for (window, lag, plan), modes in sorted(
        by_coord.items(), key=lambda kv: (kv[0][0], kv[0][1], _plan_sort(kv[0][2]))
    ):
        if "clean" in modes and "leaky" in modes:
            records.append(
                make_gain_record(
                    window, lag, plan,
                    clean=modes["clean"].stats.mean,
                    leaky=modes["leaky"].stats.mean,
                )
            )
    ranked: list[GainRecord] = []
    groups: dict[tuple, list[GainRecord]] = {}
    for r in records:
        groups.setdefault((r.window, r.lag), []).append(r)
    for key in sorted(groups):
        ranked.extend(leakage_rank(groups[key]))
    return ranked


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


CELL_CSV_HEADER = (
    "name,window,lag,plan,mode,n_runs,min,max,mean,std,stderr,ci_low,ci_high,"
    "mean_optimal_epoch,mean_last_epoch,max_overlap"
)
GAIN_CSV_HEADER = "window,lag,plan,clean,leaky,gain_percent,direction,rank"


def emit_report(report: ExperimentReport, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write the report to disk.

    csv: `cells.csv` with one row per cell
    (name,window,lag,plan,mode,n_runs,min,max,mean,std,stderr,ci_low,
    ci_high,mean_optimal_epoch,mean_last_epoch,max_overlap) and `gains.csv`
    (window,lag,plan,clean,leaky,gain_percent,direction,rank). Floats use
    repr so identical reports are byte-identical and re-ingestion is exact.

    json: `report.json` carrying the full structure including audit detail;
    parsing it back reproduces the report exactly.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if fmt == "json":
        path = out / "report.json"
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        return [path]
    if fmt != "csv":
        raise LeakbenchError(f"unknown report format {fmt!r} (expected csv or json)")

    lines = [CELL_CSV_HEADER]
    for c in report.cells:
        s = c.stats
        ci_low, ci_high = (s.ci95 if s.ci95 is not None else (None, None))
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    report.name, c.window, c.lag, c.plan, c.mode, s.n_runs,
                    s.min, s.max, s.mean, s.std, s.stderr, ci_low, ci_high,
                    s.mean_optimal_epoch, s.mean_last_epoch, c.max_overlap,
                )
            )
        )
    cells_path = out / "cells.csv"
    cells_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(cells_path)

    lines = [GAIN_CSV_HEADER]
    for g in report.gains:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    g.window, g.lag, g.plan, g.rmse_clean, g.rmse_leaky,
                    g.gain_percent, g.direction, g.leakage_rank,
                )
            )
        )
    gains_path = out / "gains.csv"
    gains_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(gains_path)
    return written


def load_report(path: str | Path) -> ExperimentReport:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    if not p.exists():
        raise LeakbenchError(f"no report found at {p}")
    return ExperimentReport.from_dict(json.loads(p.read_text(encoding="utf-8")))


def emit_plot_data(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """Long-format files for external plotting: `runs.csv` has one row per
    (cell, run) observation; `gains_long.csv` one row per gain record.
    Row order is deterministic for identical reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs_lines = ["name,window,lag,plan,mode,run,rmse"]
    for c in report.cells:
        for run_idx, value in enumerate(c.run_rmses):
            runs_lines.append(
                ",".join(
                    _fmt(v)
                    for v in (report.name, c.window, c.lag, c.plan, c.mode, run_idx, value)
                )
            )
    runs_path = out / "runs.csv"
    runs_path.write_text("\n".join(runs_lines) + "\n", encoding="utf-8")

    gain_lines = ["window,lag,plan,gain_percent"]
    for g in report.gains:
        gain_lines.append(
            ",".join(_fmt(v) for v in (g.window, g.lag, g.plan, g.gain_percent))
        )
    gains_path = out / "gains_long.csv"
    gains_path.write_text("\n".join(gain_lines) + "\n", encoding="utf-8")
    return [runs_path, gains_path]


def recompute_gains(clean_csv: str | Path, leaky_csv: str | Path) -> list[GainRecord]:
    """Rebuild gain records from two previously written cells.csv files,
    matching (window, lag, plan) between clean rows and leaky rows."""
    import csv as _csv

    def read_means(path: str | Path, mode: str) -> dict[tuple, float]:
        p = Path(path)
        if not p.exists():
            raise LeakbenchError(f"no such report file: {p}")
        means: dict[tuple, float] = {}
        with open(p, newline="", encoding="utf-8") as fh:
            for row in _csv.DictReader(fh):
                if row.get("mode") != mode:
                    continue
                key = (int(row["window"]), int(row["lag"]), row["plan"])
                means[key] = float(row["mean"])
        if not means:
            raise LeakbenchError(f"{p}: no rows with mode={mode!r}")
        return means

    clean = read_means(clean_csv, "clean")
    leaky = read_means(leaky_csv, "leaky")
    shared = sorted(
        set(clean) & set(leaky), key=lambda k: (k[0], k[1], _plan_sort(k[2]))
    )
    if not shared:
        raise LeakbenchError("no matching (window, lag, plan) cells between the reports")
    records = [
        make_gain_record(w, l, plan, clean=clean[(w, l, plan)], leaky=leaky[(w, l, plan)])
        for w, l, plan in shared
    ]
    groups: dict[tuple, list[GainRecord]] = {}
    for r in records:
        groups.setdefault((r.window, r.lag), []).append(r)
    out: list[GainRecord] = []
    for key in sorted(groups):
        out.extend(leakage_rank(groups[key]))
    return out
