"""The six figure kinds rendered from crowdcast CSV outputs.

Styling conventions: forecasting variants use solid lines, matched
baselines use dashed lines; the interevent distribution is drawn on
log-log axes with both the fitted power-law and geometric overlays.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from crowdfig import schemas

_RULE_COLORS = {"gr1": "tab:blue", "gr2": "tab:orange"}


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: Sequence[str]
    output: str
    x_label: str = ""
    y_label: str = ""


def _color(rule):
    return _RULE_COLORS.get(rule, "tab:green")


def _save(fig, spec):
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)


def _by_rule_means(rows, value_key):
    """Mean of value_key per (variant, rule, t) across replications."""
    acc = defaultdict(list)
    for row in rows:
        key = (row["variant"], row["rule"], int(row["t"]))
        acc[key].append(float(row[value_key]))
    series = defaultdict(list)
    for (variant, rule, t), values in sorted(acc.items(), key=lambda kv: kv[0][2]):
        series[(variant, rule)].append((t, sum(values) / len(values)))
    return series


def render_curves(spec):
    rows = schemas.read_table(spec.inputs[0], schemas.CURVES)
    fig, ax = plt.subplots(figsize=(6, 4))
    for (variant, rule), points in _by_rule_means(rows, "accuracy").items():
        ts, accs = zip(*points)
        ax.plot(
            ts, accs,
            linestyle="-" if variant == "forecast" else "--",
            color=_color(rule),
            label=f"{rule} {variant}",
        )
    ax.set_xlabel(spec.x_label or "budget spent")
    ax.set_ylabel(spec.y_label or "mean accuracy")
    ax.legend()
    _save(fig, spec)


def render_spikes(spec):
    rows = schemas.read_table(spec.inputs[0], schemas.GROWTH_EVENTS)
    lanes = defaultdict(list)
    for row in rows:
        lanes[(row["rule"], int(row["replication"]))].append(int(row["t"]))
    fig, ax = plt.subplots(figsize=(7, 0.6 + 0.4 * max(len(lanes), 1)))
    labels = []
    for lane, (key, times) in enumerate(sorted(lanes.items())):
        rule, rep = key
        ax.vlines(times, lane + 0.1, lane + 0.9, color=_color(rule))
        labels.append(f"{rule} r{rep}")
    ax.set_yticks([i + 0.5 for i in range(len(labels))], labels)
    ax.set_xlabel(spec.x_label or "budget spent")
    ax.set_ylabel(spec.y_label or "run")
    _save(fig, spec)


def _interevent_overlays(gaps, fit_row):
    """(alpha, p) overlay parameters, from tailfits when available."""
    if fit_row is not None:
        return float(fit_row["pl_alpha"]), float(fit_row["geom_p"])
    mean = sum(gaps) / len(gaps)
    alpha = 1.0 + len(gaps) / sum(math.log(2.0 * g) for g in gaps)
    return alpha, 1.0 / mean


def render_interevent(spec):
    rows = schemas.read_table(spec.inputs[0], schemas.INTEREVENT)
    fits = {}
    if len(spec.inputs) > 1:
        for row in schemas.read_table(spec.inputs[1], schemas.TAILFITS):
            fits[row["rule"]] = row
    fig, ax = plt.subplots(figsize=(5, 4))
    by_rule = defaultdict(list)
    for row in rows:
        by_rule[row["rule"]].append(int(row["dt"]))
    if not by_rule:
        ax.text(
            0.5, 0.5, "warning: no interevent samples",
            ha="center", va="center", transform=ax.transAxes,
        )
        ax.set_xticks([])
        ax.set_yticks([])
        _save(fig, spec)
        return
    for rule, gaps in sorted(by_rule.items()):
        values, counts = np.unique(gaps, return_counts=True)
        pmf = counts / counts.sum()
        ax.loglog(values, pmf, "o", color=_color(rule), label=f"{rule} data")
        alpha, p = _interevent_overlays(gaps, fits.get(rule))
        grid = np.arange(1, values.max() + 1)
        power = grid ** -alpha
        power /= power.sum()
        geom = p * (1 - p) ** (grid - 1)
        ax.loglog(grid, power, "-", color=_color(rule),
                  label=f"{rule} power law ({alpha:.2f})")
        ax.loglog(grid, geom, ":", color=_color(rule),
                  label=f"{rule} geometric ({p:.2f})")
    ax.set_xlabel(spec.x_label or "interevent time")
    ax.set_ylabel(spec.y_label or "frequency")
    ax.legend(fontsize="small")
    _save(fig, spec)


def render_rates(spec):
    rows = schemas.read_table(spec.inputs[0], schemas.RATES)
    axes_names = sorted({row["axis_name"] for row in rows})
    fig, axs = plt.subplots(
        1, max(len(axes_names), 1), figsize=(4 * max(len(axes_names), 1), 3.5),
        squeeze=False,
    )
    for ax, axis_name in zip(axs[0], axes_names):
        for rule in sorted({r["rule"] for r in rows}):
            cells = sorted(
                (float(r["axis_value"]), float(r["mean_rate"]), float(r["std_rate"]))
                for r in rows
                if r["axis_name"] == axis_name and r["rule"] == rule
            )
            if not cells:
                continue
            xs, means, stds = zip(*cells)
            ax.errorbar(xs, means, yerr=stds, marker="o",
                        color=_color(rule), label=rule)
        ax.set_xlabel(axis_name)
        ax.set_ylabel(spec.y_label or "growth rate")
        ax.legend()
    _save(fig, spec)


def _render_improvement_panels(spec, axis_name):
    rows = [
        r
        for r in schemas.read_table(spec.inputs[0], schemas.IMPROVEMENT)
        if r["axis_name"] == axis_name
    ]
    if not rows:
        raise schemas.SchemaError(
            f"{spec.inputs[0]}: no rows with axis_name={axis_name!r}"
        )
    values = sorted({float(r["axis_value"]) for r in rows})
    fig, axs = plt.subplots(
        1, len(values), figsize=(4 * len(values), 3.5), squeeze=False,
        sharey=True,
    )
    for ax, value in zip(axs[0], values):
        panel = [r for r in rows if float(r["axis_value"]) == value]
        for rule in sorted({r["rule"] for r in panel}):
            pts = sorted(
                (
                    int(r["t"]),
                    float(r["mean_forecast_accuracy"]),
                    float(r["mean_baseline_accuracy"]),
                )
                for r in panel
                if r["rule"] == rule
            )
            ts, fore, base = zip(*pts)
            ax.plot(ts, fore, "-", color=_color(rule), label=f"{rule} forecast")
            ax.plot(ts, base, "--", color=_color(rule), label=f"{rule} baseline")
        ax.set_title(f"{axis_name} = {value:g}")
        ax.set_xlabel(spec.x_label or "budget spent")
        ax.legend(fontsize="small")
    axs[0][0].set_ylabel(spec.y_label or "mean accuracy")
    _save(fig, spec)


def render_n0_panels(spec):
    _render_improvement_panels(spec, "seed_tasks")


def render_cost_panels(spec):
    _render_improvement_panels(spec, "s")


KINDS = {
    "curves": render_curves,
    "spikes": render_spikes,
    "interevent": render_interevent,
    "rates": render_rates,
    "n0_panels": render_n0_panels,
    "cost_panels": render_cost_panels,
}


def render(spec: FigureSpec) -> None:
    try:
        renderer = KINDS[spec.kind]
    except KeyError:
        raise schemas.SchemaError(
            f"unknown figure kind {spec.kind!r}; choose from {sorted(KINDS)}"
        ) from None
    if not spec.inputs:
        raise schemas.SchemaError("at least one input file is required")
    renderer(spec)
