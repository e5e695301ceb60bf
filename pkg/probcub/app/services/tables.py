"""
Result Tables and Plots

CSV is the canonical experiment output; SVG charts are a convenience.
Both are written deterministically so reruns are byte-identical.
"""

from collections.abc import Mapping
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from loguru import logger  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from pydantic import BaseModel  # noqa: E402

from probcub.app.models import TIPosterior  # noqa: E402

SVG_SALT = "probcub"
FLOAT_FORMAT = "%.17g"


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Write a table with full float precision and Unix line endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(record: BaseModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(record.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def _save(fig: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.info(f"Wrote {path}")
    return path


def plot_lines(
    path: Path,
    series: Mapping[str, tuple[np.ndarray, np.ndarray]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    log: bool = False,
    diagonal: bool = False,
) -> Path:
    """
    Line chart of several (x, y) series.

    Args:
        path: Output SVG path.
        series: Label -> (x, y).
        xlabel: X axis label.
        ylabel: Y axis label.
        title: Chart title.
        log: Log-log axes.
        diagonal: Draw y = x (nominal-vs-empirical coverage charts).
    """
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(1, 1, 1)
    for label, (x, y) in series.items():
        ax.plot(x, y, marker="o", markersize=3, label=label)
    if diagonal:
        ax.plot([0, 1], [0, 1], color="grey", linestyle=":", linewidth=1)
    if log:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if series:
        ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_intervals(
    path: Path,
    frame: pd.DataFrame,
    x: str,
    group: str,
    truth: float | None = None,
    xlabel: str = "n",
    ylabel: str = "estimate",
    log_x: bool = True,
) -> Path:
    """Point estimates with lo/hi error bars, one series per ``group`` value."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(1, 1, 1)
    for label, rows in frame.groupby(group, sort=True):
        err = np.vstack([rows["mean"] - rows["lo"], rows["hi"] - rows["mean"]])
        ax.errorbar(
            rows[x], rows["mean"], yerr=err, marker="o", markersize=3, capsize=2, label=str(label)
        )
    if truth is not None:
        ax.axhline(truth, color="black", linestyle="--", linewidth=1, label="truth")
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def ti_rungs_frame(post: TIPosterior) -> pd.DataFrame:
    """
    Per-rung table of a TI posterior with a trailing summary row.

    Columns: rung, t, mu, sigma_diag, logZ_mean, var_outer, var_propagated;
    the summary row has rung = "summary" and the last three columns set.
    """
    m = post.schedule.m
    rows = pd.DataFrame(
        {
            "rung": [str(i + 1) for i in range(m)],
            "t": np.asarray(post.schedule.t),
            "mu": np.asarray(post.mu),
            "sigma_diag": np.diag(np.asarray(post.cov)),
            "logZ_mean": np.nan,
            "var_outer": np.nan,
            "var_propagated": np.nan,
        }
    )
    summary = pd.DataFrame(
        [
            {
                "rung": "summary",
                "t": np.nan,
                "mu": np.nan,
                "sigma_diag": np.nan,
                "logZ_mean": post.logz_mean,
                "var_outer": post.logz_var_outer,
                "var_propagated": post.logz_var_propagated,
            }
        ]
    )
    return pd.concat([rows, summary], ignore_index=True)
