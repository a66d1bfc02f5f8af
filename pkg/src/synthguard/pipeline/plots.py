"""Optional SVG line plots; skipped quietly when matplotlib is not installed."""

from __future__ import annotations

from pathlib import Path

from synthguard.errors import IoError


def plot_acf(series: dict[str, list[float] | None], path: str | Path, title: str) -> Path | None:
    """One curve per dataset, lag on the x axis."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "synthguard", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        # Real first, then alphabetical, so cached and fresh reports draw alike
        for label in sorted(series, key=lambda k: (k != "Real", k)):
            values = series[label]
            if values:
                ax.plot(range(len(values)), values, label=label, linewidth=2.0 if label == "Real" else 1.0)
        ax.axhline(0.0, color="grey", linewidth=0.5)
        ax.set_xlabel("lag")
        ax.set_ylabel("autocorrelation")
        ax.set_title(title)
        ax.legend(fontsize="small")
        fig.tight_layout()
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
        finally:
            plt.close(fig)
    return path
