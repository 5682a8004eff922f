"""RMSE, repeated-run aggregation with t-based confidence intervals, the
clean-vs-leaky gain metric, and leakage-sensitivity ranking.

gain_percent = (rmse_clean - rmse_leaky) / rmse_clean * 100. Positive gain
means the leaky setup looked *better* than the clean one (optimistic bias);
negative gain is degradation or run-to-run noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import LeakbenchError


@dataclass(frozen=True)
class RunStats:
    """Aggregate RMSE statistics over repeated runs.

    std/stderr/ci95 need at least two runs and are None below that.
    The confidence interval is mean +/- t(0.975, n-1) * stderr.
    """

    n_runs: int
    min: float
    max: float
    mean: float
    std: Optional[float]
    stderr: Optional[float]
    ci95: Optional[tuple[float, float]]
    mean_optimal_epoch: Optional[float] = None
    mean_last_epoch: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "std": self.std,
            "stderr": self.stderr,
            "ci95": list(self.ci95) if self.ci95 is not None else None,
            "mean_optimal_epoch": self.mean_optimal_epoch,
            "mean_last_epoch": self.mean_last_epoch,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunStats":
        ci = d.get("ci95")
        return cls(
            n_runs=int(d["n_runs"]),
            min=float(d["min"]),
            max=float(d["max"]),
            mean=float(d["mean"]),
            std=None if d.get("std") is None else float(d["std"]),
            stderr=None if d.get("stderr") is None else float(d["stderr"]),
            ci95=None if ci is None else (float(ci[0]), float(ci[1])),
            mean_optimal_epoch=d.get("mean_optimal_epoch"),
            mean_last_epoch=d.get("mean_last_epoch"),
        )


@dataclass(frozen=True)
class GainRecord:
    """Clean-vs-leaky comparison for one (window, lag, plan) cell."""

    window: int
    lag: int
    plan: str
    rmse_clean: float
    rmse_leaky: float
    gain_percent: float
    direction: str
    leakage_rank: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "lag": self.lag,
            "plan": self.plan,
            "rmse_clean": self.rmse_clean,
            "rmse_leaky": self.rmse_leaky,
            "gain_percent": self.gain_percent,
            "direction": self.direction,
            "leakage_rank": self.leakage_rank,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GainRecord":
        return cls(
            window=int(d["window"]),
            lag=int(d["lag"]),
            plan=d["plan"],
            rmse_clean=float(d["rmse_clean"]),
            rmse_leaky=float(d["rmse_leaky"]),
            gain_percent=float(d["gain_percent"]),
            direction=d["direction"],
            leakage_rank=None if d.get("leakage_rank") is None else int(d["leakage_rank"]),
        )


def rmse(predictions: Sequence[float] | np.ndarray, targets: Sequence[float] | np.ndarray) -> float:
    """Root mean squared error."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise LeakbenchError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise LeakbenchError("rmse of empty vectors is undefined")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def aggregate(
    run_rmses: Sequence[float],
    optimal_epochs: Sequence[float] | None = None,
    last_epochs: Sequence[float] | None = None,
) -> RunStats:
    """Aggregate per-run RMSEs: sample std, stderr = std/sqrt(n), and a
    Student-t 95% confidence interval (n >= 2; suppressed otherwise)."""
    vals = np.asarray(run_rmses, dtype=float)
    if vals.size == 0:
        raise LeakbenchError("cannot aggregate zero runs")
    n = int(vals.size)
    mean = float(vals.mean())
    std = stderr = None
    ci = None
    if n >= 2:
        std = float(vals.std(ddof=1))
        stderr = std / math.sqrt(n)
        half = float(sps.t.ppf(0.975, n - 1)) * stderr
        ci = (mean - half, mean + half)
    return RunStats(
        n_runs=n,
        min=float(vals.min()),
        max=float(vals.max()),
        mean=mean,
        std=std,
        stderr=stderr,
        ci95=ci,
        mean_optimal_epoch=(
            float(np.mean(optimal_epochs)) if optimal_epochs else None
        ),
        mean_last_epoch=(float(np.mean(last_epochs)) if last_epochs else None),
    )


def rmse_gain(clean: float, leaky: float) -> tuple[float, str]:
    """(gain_percent, direction) for one clean/leaky RMSE pair."""
    if clean <= 0:
        raise LeakbenchError(f"clean RMSE must be positive, got {clean}")
    gain = (clean - leaky) / clean * 100.0
    return gain, ("up" if gain > 0 else "down")


def make_gain_record(
    window: int, lag: int, plan: str, clean: float, leaky: float
) -> GainRecord:
    gain, direction = rmse_gain(clean, leaky)
    return GainRecord(
        window=window,
        lag=lag,
        plan=plan,
        rmse_clean=clean,
        rmse_leaky=leaky,
        gain_percent=gain,
        direction=direction,
    )


def _plan_sort_key(plan_label: str) -> int:
    order = {"2-way": 0, "3-way": 1}
    return order.get(plan_label, 2)


def leakage_rank(records: Sequence[GainRecord]) -> list[GainRecord]:
    """Assign ranks within one config group by ascending |gain_percent|
    (1 = least sensitive); ties break by plan order 2-way, 3-way, k-fold."""
    if not records:
        raise LeakbenchError("cannot rank an empty group")
    ordered = sorted(
        records, key=lambda r: (abs(r.gain_percent), _plan_sort_key(r.plan))
    )
    ranked = {id(r): i + 1 for i, r in enumerate(ordered)}
    return [replace(r, leakage_rank=ranked[id(r)]) for r in records]
