"""Post-run statistics: growth dynamics, tail fitting, curve aggregation.

Growth events from a run form a point process in request time; their
interevent gaps are fitted with a discrete power law and a geometric
distribution and compared with a normalized log-likelihood-ratio test.
Accuracy curves from replicated runs are aggregated onto a common budget
grid against their matched baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from crowdcast.simulation import RunTrace


@dataclass(frozen=True)
class IntereventSample:
    """Gaps between consecutive growth events, in request time (>= 1)."""

    values: tuple

    def __post_init__(self):
        if any(v < 1 for v in self.values):
            raise ValueError("interevent times must be >= 1")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class TailFit:
    """Fitted interevent model; exactly one parameter set applies."""

    kind: str  # "powerlaw" | "geometric" | "exponential"
    pl_alpha: float = float("nan")
    x_min: int = 1
    p: float = float("nan")
    lam: float = float("nan")


def interevent_times(growth_times: Sequence[int]) -> IntereventSample:
    """Consecutive gaps t_{k+1} - t_k; adjacent growth events give 1."""
    ts = list(growth_times)
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("growth times must be strictly increasing")
    return IntereventSample(tuple(b - a for a, b in zip(ts, ts[1:])))


def fit_geometric(sample: IntereventSample) -> TailFit:
    """MLE on support {1, 2, ...}: p = 1 / mean."""
    if len(sample) == 0:
        raise ValueError("cannot fit an empty sample")
    return TailFit(kind="geometric", p=1.0 / float(np.mean(sample.values)))


def fit_powerlaw(sample: IntereventSample, x_min: int = 1) -> TailFit:
    """Discrete power-law MLE via the shifted continuous approximation:
    alpha = 1 + n / sum(ln(x_i / (x_min - 1/2))), over x_i >= x_min."""
    if x_min < 1:
        raise ValueError("x_min must be >= 1")
    xs = np.array([v for v in sample.values if v >= x_min], dtype=float)
    if len(xs) < 2:
        raise ValueError(f"need at least 2 values >= x_min={x_min}, have {len(xs)}")
    denom = float(np.sum(np.log(xs / (x_min - 0.5))))
    return TailFit(kind="powerlaw", pl_alpha=1.0 + len(xs) / denom, x_min=x_min)


def fit_exponential(sample: IntereventSample, x_min: int = 1) -> TailFit:
    """Continuous memoryless analog, shifted to the discrete support:
    rate = 1 / (mean - x_min + 1)."""
    if len(sample) == 0:
        raise ValueError("cannot fit an empty sample")
    return TailFit(
        kind="exponential",
        lam=1.0 / (float(np.mean(sample.values)) - x_min + 1.0),
        x_min=x_min,
    )


def _log_pmf(fit: TailFit, xs: np.ndarray) -> np.ndarray:
    if fit.kind == "powerlaw":
        norm = float(special.zeta(fit.pl_alpha, fit.x_min))
        return -fit.pl_alpha * np.log(xs) - math.log(norm)
    if fit.kind == "geometric":
        if fit.p >= 1.0:
            return np.where(xs == 1.0, 0.0, -np.inf)
        return math.log(fit.p) + (xs - 1.0) * math.log(1.0 - fit.p)
    if fit.kind == "exponential":
        # density of the shifted continuous analog, support [x_min - 1, inf)
        return math.log(fit.lam) - fit.lam * (xs - fit.x_min + 1.0)
    raise ValueError(f"unknown fit kind {fit.kind!r}")


@dataclass(frozen=True)
class LRResult:
    """Normalized log-likelihood ratio; positive r favors the first model."""

    r_statistic: float
    p_value: float


def likelihood_ratio(
    sample: IntereventSample, fit_a: TailFit, fit_b: TailFit
) -> LRResult:
    """Compare two fitted models on the same sample.

    r is the summed pointwise log-likelihood difference; the p-value uses
    the normal approximation p = erfc(|r| / (sigma * sqrt(2 n))) with
    sigma^2 the sample variance of the pointwise differences.  Zero
    variance makes the test undefined and is reported as (r=0, p=1).
    """
    if len(sample) < 2:
        raise ValueError("likelihood ratio needs at least 2 sample points")
    xs = np.asarray(sample.values, dtype=float)
    diffs = _log_pmf(fit_a, xs) - _log_pmf(fit_b, xs)
    if not np.all(np.isfinite(diffs)):
        raise ValueError("one of the fits is not evaluable on the sample")
    sigma = float(np.std(diffs))
    if sigma == 0.0:
        return LRResult(r_statistic=0.0, p_value=1.0)
    r = float(np.sum(diffs))
    p = float(special.erfc(abs(r) / (sigma * math.sqrt(2.0 * len(xs)))))
    return LRResult(r_statistic=r, p_value=p)


def growth_rate(trace: RunTrace) -> float:
    """Tasks added per request spent."""
    spent = len(trace.events)
    if spent == 0:
        raise ValueError("trace spent no budget")
    return (trace.n_final - trace.meta["seed_tasks"]) / spent


def pooled_interevents(traces: Sequence[RunTrace]) -> IntereventSample:
    """Interevent gaps pooled across replications (gaps never span runs)."""
    pooled: list = []
    for trace in traces:
        pooled.extend(interevent_times(trace.growth_times).values)
    return IntereventSample(tuple(pooled))


def _locf(checkpoints, grid):
    """Last-observation-carried-forward accuracy and task count on a grid."""
    ts = np.array([c[0] for c in checkpoints])
    ns = np.array([c[1] for c in checkpoints], dtype=float)
    accs = np.array([c[2] for c in checkpoints])
    idx = np.searchsorted(ts, grid, side="right") - 1
    idx = np.clip(idx, 0, len(ts) - 1)
    return accs[idx], ns[idx]


def aggregate_runs(
    traces: Sequence[RunTrace],
    baselines: Sequence[RunTrace],
    grid: Optional[Sequence[int]] = None,
) -> list:
    """Mean/std accuracy curves for forecasting and matched baselines.

    Both sets are interpolated onto a common budget grid (the forecasting
    checkpoint times by default) by carrying the last observation forward.
    Returns one dict per gridpoint.
    """
    if len(traces) != len(baselines):
        raise ValueError(
            f"replication counts differ: {len(traces)} traces, {len(baselines)} baselines"
        )
    if grid is None:
        grid = [c[0] for c in traces[0].checkpoints]
    grid = np.asarray(grid)

    f_acc = np.stack([_locf(t.checkpoints, grid)[0] for t in traces])
    f_n = np.stack([_locf(t.checkpoints, grid)[1] for t in traces])
    b_acc = np.stack([_locf(t.checkpoints, grid)[0] for t in baselines])

    rows = []
    for j, t in enumerate(grid):
        rows.append(
            {
                "t": int(t),
                "mean_forecast_accuracy": float(f_acc[:, j].mean()),
                "std_forecast_accuracy": float(f_acc[:, j].std()),
                "mean_baseline_accuracy": float(b_acc[:, j].mean()),
                "std_baseline_accuracy": float(b_acc[:, j].std()),
                "mean_improvement": float((f_acc[:, j] - b_acc[:, j]).mean()),
                "mean_n_tasks": float(f_n[:, j].mean()),
            }
        )
    return rows
