"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import (  # noqa: E402
    PUBLISHED_ALPHA_SWEEP,
    PUBLISHED_BASELINES_MTS,
    PUBLISHED_NOTECHAT_CALLS,
    EvalReport,
    IterationReport,
    RunStats,
)

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def figure_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".png")


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    # no Software tag: keeps PNG bytes independent of the matplotlib version
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_iterations(report: IterationReport, path: str | Path) -> Path:
    """Extractiveness across iterations, one line per note."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for row in report.rows:
            ys = row["extractiveness"]
            if not ys:
                continue
            ax.plot(range(1, len(ys) + 1), ys, marker="o", lw=1, ms=3, alpha=0.8,
                    ls="-" if row["improved"] else ":")
        ax.set_xlabel("iteration")
        ax.set_ylabel("extractiveness (ROUGE-1 F1)")
        ax.set_title(f"Extractiveness by iteration ({report.summary})")
        ax.xaxis.get_major_locator().set_params(integer=True)
        return _save(fig, path)


def plot_cost(cost: dict, path: str | Path) -> Path:
    labels = ["avg", "max", "min"]
    ours = [cost["generate_calls_avg"] or 0, cost["generate_calls_max"] or 0, cost["generate_calls_min"] or 0]
    ref = [PUBLISHED_NOTECHAT_CALLS[k] for k in labels]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        xs = range(len(labels))
        ax.bar([x - 0.2 for x in xs], ref, width=0.4, label="NoteChat (published)", color="0.7")
        ax.bar([x + 0.2 for x in xs], ours, width=0.4, label="this run", color="C0")
        ax.set_xticks(list(xs), labels)
        ax.set_ylabel("API calls per note")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_metrics(report: EvalReport, path: str | Path) -> Path:
    metrics = ["similarity", "extractiveness", "diversity", "factuality"]
    ours = report.corpus_row()
    systems = {f"{k} (published)": v for k, v in PUBLISHED_BASELINES_MTS.items()}
    systems["this run"] = ours
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.2))
        width = 0.8 / len(systems)
        for j, (name, vals) in enumerate(systems.items()):
            ys = [vals.get(m) or 0.0 for m in metrics]
            ax.bar([i + (j - len(systems) / 2 + 0.5) * width for i in range(len(metrics))], ys, width=width, label=name)
        ax.set_xticks(range(len(metrics)), metrics)
        ax.set_ylim(0, 1.25)
        ax.set_yticks([0, 0.2, 0.4, 0.6, 0.8, 1.0])
        ax.legend(frameon=False, ncol=3, loc="upper center")
        return _save(fig, path)


def plot_robustness(stats: RunStats, path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        runs = range(1, len(stats.per_run) + 1)
        for key, color in (("similarity", "C0"), ("extractiveness", "C1")):
            ys = [r.get(key) for r in stats.per_run]
            if all(y is None for y in ys):
                continue
            ax.plot(list(runs), ys, marker="o", color=color, label=key)
            if stats.mean.get(key) is not None:
                ax.axhline(stats.mean[key], color=color, ls="--", lw=0.8)
        ax.set_xlabel("run")
        ax.set_ylabel("corpus mean ROUGE-1 F1")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_sweep(rows: list[dict], path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        alphas = [r["alpha"] for r in rows]
        ax.plot(alphas, [r["similarity_mean"] for r in rows], marker="o", color="C0", label="similarity")
        ax.plot(alphas, [r["extractiveness_mean"] for r in rows], marker="o", color="C1", label="extractiveness")
        pub = PUBLISHED_ALPHA_SWEEP
        ax.plot([p[0] for p in pub], [p[1] for p in pub], ls=":", color="C0", label="similarity (published)")
        ax.plot([p[0] for p in pub], [p[2] for p in pub], ls=":", color="C1", label="extractiveness (published)")
        ax.set_xlabel("alpha")
        ax.set_ylabel("corpus mean ROUGE-1 F1")
        ax.legend(frameon=False)
        return _save(fig, path)
