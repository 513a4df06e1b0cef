"""The four figure kinds, rendered deterministically to PNG or SVG.

Rendering draws pre-computed values only: slopes annotated on log-log
ladders come from a straight least-squares line through the plotted
points, and every other number on a figure is read from the CSV.  Output
bytes depend only on the input rows and the spec (fixed style, fixed
svg hash salt, no timestamps), so identical inputs give identical files.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .figspec import FigureSpec, SpecError, load_rows

_RC = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "plotview",
    "legend.framealpha": 0.9,
}

_TITLES = {
    "theta_curve": "Distance exponent vs beta",
    "loglog_ladder": "Distance scale vs box size",
    "telescope": "Telescope terms by length class",
    "cutpoints": "Cut-point means: sampled vs exact",
}


@dataclass(frozen=True)
class PlotResult:
    """What a render produced: the file plus the numbers it drew."""

    path: str
    kind: str
    series: dict
    annotations: tuple


def _finish(fig, ax, spec: FigureSpec, extra_notes):
    notes = tuple(spec.annotations) + tuple(extra_notes)
    if notes:
        ax.text(
            0.02, 0.98, "\n".join(notes), transform=ax.transAxes,
            va="top", ha="left", fontsize=8,
            bbox={"boxstyle": "round", "facecolor": "white", "alpha": 0.75},
        )
    ax.set_title(spec.title or _TITLES[spec.kind])
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix.lower() == ".svg":
        meta = {"Date": None}
    else:
        meta = {"Software": "plotview"}
    fig.savefig(out, metadata=meta, facecolor="white")
    plt.close(fig)
    return notes


def _theta_curve(rows, spec):
    fig, ax = plt.subplots()
    series = []
    markers = {"inf_formula": "o", "ols_slope": "s"}
    for method in sorted({r["method"] for r in rows}):
        pts = sorted((r for r in rows if r["method"] == method), key=lambda r: r["beta"])
        betas = np.array([r["beta"] for r in pts])
        vals = np.array([r["value"] for r in pts])
        lo = np.array([r["ci_low"] for r in pts])
        hi = np.array([r["ci_high"] for r in pts])
        ax.errorbar(
            betas, vals, yerr=np.vstack([vals - lo, hi - vals]),
            marker=markers.get(method, "d"), linestyle="-", capsize=3, label=method,
        )
        series.extend({"beta": float(b), "value": float(v), "method": method}
                      for b, v in zip(betas, vals))
    beta_max = max(r["beta"] for r in rows)
    ref_x = np.linspace(0.0, min(1.0, max(beta_max, 0.25)), 50)
    ax.plot(ref_x, 1.0 - ref_x, "k--", linewidth=1, label="1 - beta")
    notes = []
    if beta_max > 2.0:
        # anchor the decay guide through the largest-beta point
        anchor = max(rows, key=lambda r: (r["beta"], r["method"] == "ols_slope"))
        c = anchor["value"] * math.log(anchor["beta"])
        guide_x = np.linspace(2.0, beta_max, 60)
        ax.plot(guide_x, c / np.log(guide_x), "k:", linewidth=1, label="c / log beta")
        notes.append(f"c = {c:.3f}")
    ax.set_xlabel("beta")
    ax.set_ylabel("theta")
    ax.set_ylim(bottom=0.0)
    ax.legend()
    return fig, ax, {"theta": series}, notes


def _loglog_ladder(rows, spec):
    fig, ax = plt.subplots()
    series = {}
    notes = []
    for beta in sorted({r["beta"] for r in rows}):
        pts = sorted((r for r in rows if r["beta"] == beta), key=lambda r: r["n"])
        ns = np.array([r["n"] for r in pts])
        means = np.array([r["mean"] for r in pts])
        ses = np.array([r["stderr"] for r in pts])
        (line,) = ax.plot(ns, means, marker="o", linestyle="", label=f"beta = {beta:g}")
        ax.fill_between(
            ns, means - 3.0 * ses, means + 3.0 * ses,
            color=line.get_color(), alpha=0.2, linewidth=0,
        )
        slope = None
        if len(ns) >= 2:
            slope, intercept = np.polyfit(np.log(ns), np.log(means), 1)
            fit_x = np.array([ns[0], ns[-1]])
            ax.plot(fit_x, np.exp(intercept) * fit_x ** slope,
                    color=line.get_color(), linestyle="--", linewidth=1)
            slope = float(slope)
            notes.append(f"beta = {beta:g}: slope {slope:.3f}")
        series[beta] = {"slope": slope, "points": [(float(n), float(m)) for n, m in zip(ns, means)]}
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("mean distance scale")
    ax.legend()
    return fig, ax, {"ladders": series}, notes


def _telescope(rows, spec):
    fig, ax = plt.subplots()
    series = {}
    for beta, eps in sorted({(r["beta"], r["eps"]) for r in rows}):
        pts = sorted(
            (r for r in rows if r["beta"] == beta and r["eps"] == eps),
            key=lambda r: r["k"],
        )
        ks = np.array([r["k"] for r in pts])
        vals = np.array([r["log_ratio"] for r in pts])
        ses = np.array([r["stderr"] for r in pts])
        ax.errorbar(ks, vals, yerr=3.0 * ses, marker="o", capsize=3,
                    label=f"beta = {beta:g}, eps = {eps:g}")
        series[(float(beta), float(eps))] = [(int(k), float(v)) for k, v in zip(ks, vals)]
    ax.set_xlabel("length class k")
    ax.set_ylabel("log ratio")
    ax.legend()
    return fig, ax, {"terms": series}, []


def _cutpoints(rows, spec):
    fig, ax = plt.subplots()
    cases = sorted(rows, key=lambda r: (r["n"], r["beta"]))
    xs = np.arange(len(cases))
    mc = np.array([r["mean_mc"] for r in cases])
    se = np.array([r["stderr"] for r in cases])
    exact = np.array([r["mean_exact"] for r in cases])
    ax.errorbar(xs - 0.08, mc, yerr=3.0 * se, marker="o", linestyle="",
                capsize=4, label="sampled (3 sigma)")
    ax.plot(xs + 0.08, exact, marker="_", markersize=16, linestyle="",
            color="black", label="exact")
    ax.set_xticks(xs)
    ax.set_xticklabels([f"n={r['n']:g}\nbeta={r['beta']:g}" for r in cases])
    ax.set_ylabel("mean cut-point count")
    ax.legend()
    series = [
        (float(r["n"]), float(r["beta"]), float(r["mean_mc"]), float(r["mean_exact"]))
        for r in cases
    ]
    return fig, ax, {"cases": series}, []


_RENDERERS = {
    "theta_curve": _theta_curve,
    "loglog_ladder": _loglog_ladder,
    "telescope": _telescope,
    "cutpoints": _cutpoints,
}


def plot(spec: FigureSpec) -> PlotResult:
    """Render one figure and report the values that were drawn."""
    rows = load_rows(spec)
    with plt.rc_context(_RC):
        fig, ax, series, extra = _RENDERERS[spec.kind](rows, spec)
        notes = _finish(fig, ax, spec, extra)
    return PlotResult(path=str(spec.output), kind=spec.kind, series=series, annotations=notes)
