"""Figure rendering for the reproduction targets (PNG alongside the CSVs)."""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_method_table(rows, path, title=""):
    """Bar chart of per-method mean accuracy."""
    methods = [r["method"] for r in rows]
    acc = [float(r["accuracy_pct"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(methods, acc, color="tab:blue")
    ax.bar_label(bars, fmt="%.1f", fontsize=8)
    ax.set_ylabel("Mean accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title(title)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right")
    _save(fig, path)


def plot_semi_table(rows, path):
    """Grouped bars: semi-supervised vs supervised at small labeled sets."""
    base = sorted({r["method"].replace(" (semi)", "") for r in rows})
    semi = {r["method"].replace(" (semi)", ""): float(r["accuracy_pct"])
            for r in rows if "(semi)" in r["method"]}
    sup = {r["method"]: float(r["accuracy_pct"])
           for r in rows if "(semi)" not in r["method"]}
    x = range(len(base))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.bar([i - width / 2 for i in x], [semi.get(m, 0) for m in base], width,
           label="semi-supervised", color="tab:green")
    ax.bar([i + width / 2 for i in x], [sup.get(m, 0) for m in base], width,
           label="supervised", color="tab:gray")
    ax.set_xticks(list(x), base)
    ax.set_ylabel("Mean accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title("Small labeled sets: semi-supervised vs supervised")
    ax.legend(frameon=False)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    _save(fig, path)


def plot_falsemiss(rows, path):
    """Two panels: false alarm and miss detection rates vs training epoch."""
    methods = []
    for r in rows:
        if r["method"] not in methods:
            methods.append(r["method"])
    fig, (ax_far, ax_mdr) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    for m in methods:
        pts = [(int(r["epoch"]), float(r["far"]), float(r["mdr"]))
               for r in rows if r["method"] == m]
        pts.sort()
        epochs = [p[0] for p in pts]
        ax_far.plot(epochs, [p[1] for p in pts], marker=".", label=m)
        ax_mdr.plot(epochs, [p[2] for p in pts], marker=".", label=m)
    ax_far.set_ylabel("False alarm rate")
    ax_mdr.set_ylabel("Miss detection rate")
    ax_mdr.set_xlabel("Epoch")
    ax_far.legend(frameon=False, fontsize=8, ncol=2)
    for ax in (ax_far, ax_mdr):
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    _save(fig, path)


def plot_samples(rows, path):
    """Accuracy vs per-class training-set size, one curve per method."""
    methods = []
    for r in rows:
        if r["method"] not in methods:
            methods.append(r["method"])
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for m in methods:
        pts = sorted((int(r["n_train_per_class"]), float(r["accuracy_pct"]))
                     for r in rows if r["method"] == m)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=m)
    ax.set_xlabel("Labeled training samples per class")
    ax.set_ylabel("Mean accuracy (%)")
    ax.set_title("Accuracy vs training-set size")
    ax.legend(frameon=False)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    _save(fig, path)
