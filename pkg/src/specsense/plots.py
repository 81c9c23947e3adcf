"""Figure rendering for the CLI report path.

Every evaluation command writes its delimited tables and, unless figures
are disabled, a matching PNG next to them.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_roc_plot(curves: dict, path) -> None:
    """curves: name -> list of RocPoint."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, points in curves.items():
        ax.plot([p.pf for p in points], [p.pd for p in points], marker=".", label=name)
    ax.plot([0, 1], [0, 1], "k--", lw=0.8, label="chance")
    ax.set_xlabel("probability of false alarm")
    ax.set_ylabel("probability of detection")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_plot(rows, path) -> None:
    """rows: list of SweepRow."""
    fig, ax = plt.subplots(figsize=(5, 4))
    series = {}
    for r in rows:
        series.setdefault((r.detector, r.N), []).append((r.snr_db, r.pd))
    for (det, n), pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=f"{det} (N={n})")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("probability of detection")
    ax.set_ylim(0, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_accuracy_plot(rows, path) -> None:
    """rows: list of AccuracyRow."""
    fig, ax = plt.subplots(figsize=(5, 4))
    series = {}
    for r in rows:
        series.setdefault(r.model, []).append((r.snr_db, r.accuracy))
    for model, pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="s", label=model)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("classification accuracy")
    ax.set_ylim(0.4, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_acf_plot(rho, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.stem(range(len(rho)), rho, basefmt=" ")
    ax.set_xlabel("lag (samples)")
    ax.set_ylabel("normalized autocorrelation")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_training_plot(training_log, path) -> None:
    """training_log: per-epoch (train loss, validation accuracy)."""
    fig, ax1 = plt.subplots(figsize=(5, 4))
    epochs = range(1, len(training_log) + 1)
    ax1.plot(epochs, [r[0] for r in training_log], "b-o", label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss", color="b")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [r[1] for r in training_log], "r-s", label="validation accuracy")
    ax2.set_ylabel("validation accuracy", color="r")
    ax2.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
