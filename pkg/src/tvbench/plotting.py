"""SVG emitters for R^2-vs-noise curves and latent scatter plots.

Output bytes are reproducible: matplotlib's SVG id salt is pinned and the
date metadata is dropped.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

AGG_HEADER = "model,sigma,snr_db_mean,n,r2_mean,r2_min,r2_max"

_RC = {"svg.hashsalt": "tvbench", "svg.fonttype": "none", "path.simplify": False}


def aggregate(records) -> list[dict]:
    """Mean and min/max of r2_eval across seeds, per (model, sigma).

    Rows come out in first-appearance order of the models, then ascending
    sigma. NaN scores (failed runs) are ignored; ``n`` counts finite scores.
    """
    groups: dict[tuple[str, float], list] = defaultdict(list)
    order: list[str] = []
    for r in records:
        if r.model not in order:
            order.append(r.model)
        groups[(r.model, r.sigma)].append(r)
    rows = []
    for model in order:
        for sigma in sorted(s for (m, s) in groups if m == model):
            recs = groups[(model, sigma)]
            r2 = np.array([r.r2_eval for r in recs if math.isfinite(r.r2_eval)])
            snr = np.array([r.snr_db for r in recs])
            rows.append({
                "model": model,
                "sigma": sigma,
                "snr_db_mean": float(np.mean(snr)),
                "n": int(r2.size),
                "r2_mean": float(np.mean(r2)) if r2.size else math.nan,
                "r2_min": float(np.min(r2)) if r2.size else math.nan,
                "r2_max": float(np.max(r2)) if r2.size else math.nan,
            })
    return rows


def write_aggregate(rows: list[dict], path) -> Path:
    from .runner import _num

    with open(path, "w") as fh:
        fh.write(AGG_HEADER + "\n")
        for r in rows:
            fh.write(",".join([r["model"], _num(r["sigma"]), _num(r["snr_db_mean"]), str(r["n"]),
                               _num(r["r2_mean"]), _num(r["r2_min"]), _num(r["r2_max"])]) + "\n")
    return Path(path)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_curves(records, out_dir, x: str = "sigma") -> Path:
    """One mean-R^2 curve per model with a min-max band across seeds.

    Writes ``curves_sigma.svg`` / ``curves_snr.svg`` and ``curves.csv``.
    """
    if not records:
        raise ValueError("no records to plot")
    if x not in ("sigma", "snr_db"):
        raise ValueError(f"x must be 'sigma' or 'snr_db', got {x!r}")
    out_dir = Path(out_dir)
    rows = aggregate(records)
    write_aggregate(rows, out_dir / "curves.csv")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for model in dict.fromkeys(r["model"] for r in rows):
            pts = [r for r in rows if r["model"] == model]
            xs = np.array([r["sigma"] if x == "sigma" else r["snr_db_mean"] for r in pts])
            mean = np.array([r["r2_mean"] for r in pts])
            (line,) = ax.plot(xs, mean, marker="o", label=model)
            lo = np.array([r["r2_min"] for r in pts])
            hi = np.array([r["r2_max"] for r in pts])
            if len(pts) > 1 and np.any(hi > lo):
                ax.fill_between(xs, lo, hi, color=line.get_color(), alpha=0.15, linewidth=0)
        ax.set_xlabel("distractor scale sigma" if x == "sigma" else "SNR (dB)")
        ax.set_ylabel("probe R^2 (held-out)")
        if x == "snr_db":
            ax.invert_xaxis()
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8, loc="best")
        fig.tight_layout()
        return _save(fig, out_dir / ("curves_sigma.svg" if x == "sigma" else "curves_snr.svg"))


def emit_scatter_points(Z: np.ndarray, pair: tuple[int, int], path, title: str = "") -> Path:
    i, j = pair
    k = Z.shape[1]
    if not (0 <= i < k and 0 <= j < k):
        raise IndexError(f"feature pair {pair} out of range for {k} latents")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.scatter(Z[:, i], Z[:, j], s=2, alpha=0.5)
        ax.set_xlabel(f"z{i}")
        ax.set_ylabel(f"z{j}")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def emit_scatter(diag: dict, pair: tuple[int, int], path, title: str = "") -> Path:
    """Scatter of latent pair ``pair`` from a ``latent_diagnostics`` table."""
    k = len(diag["variance"])
    return emit_scatter_points(diag["rows"][:, 1 : 1 + k], pair, path, title)
