"""MSE-versus-step figures."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_series(record, path: str | Path) -> Path:
    """Mean per-step MSE with individual trials faint behind it; the convergence step is marked."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if len(record.trials) > 1:
        for t in record.trials:
            ax.plot(t.mse_series, color="0.8", linewidth=0.6)
    ax.plot(record.mse_series, color="k", linewidth=1.2, label="mean MSE")
    ax.axhline(record.config.rule.threshold, color="tab:red", linestyle=":", linewidth=0.8, label="threshold")
    if record.nc is not None:
        ax.axvline(record.nc, color="tab:blue", linestyle="--", linewidth=0.8, label=f"Nc = {record.nc}")
    ax.set_xlabel("step")
    ax.set_ylabel("MSE")
    ax.set_title(record.config.name())
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
