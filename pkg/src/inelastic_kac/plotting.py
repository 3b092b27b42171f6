"""Report figures, written as PNG files next to the CSV/JSON outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 3.6),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 9,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def ensemble_histogram(values, path, title=""):
    """Histogram of the central 98% of an ensemble (heavy tails are clipped)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        lo, hi = np.percentile(values, [1.0, 99.0])
        if hi <= lo:
            lo, hi = lo - 1.0, hi + 1.0
        ax.hist(values, bins=120, range=(lo, hi), density=True, color="0.35")
        ax.set_xlabel("v")
        ax.set_ylabel("density")
        ax.set_title(title)
        return _save(fig, path)


def cf_curves(xi, curves, path, title="", ylabel="Re cf"):
    """Several real CF curves over ``xi``; ``curves`` maps label -> values."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, values in curves.items():
            ax.plot(xi, values, lw=1.2, label=label)
        ax.set_xlabel("xi")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def rho_plot(xs, rho, c0, path, title=""):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        positive = rho > 0
        if positive.any():
            ax.loglog(xs[positive], rho[positive], "o-", ms=3, lw=1)
        if c0:
            ax.axhline(c0, color="C3", lw=1, ls="--", label=f"c0 = {c0:.4g}")
            ax.legend()
        ax.set_xlabel("x")
        ax.set_ylabel("x^alpha (1 - F*(x))")
        ax.set_title(title)
        return _save(fig, path)


def distance_ladder(ts, distances, band, path, title=""):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(ts, distances, "o-", lw=1.2)
        ax.axhline(band, color="0.5", ls=":", lw=1, label="Monte Carlo noise")
        ax.set_xlabel("t")
        ax.set_ylabel("sup |cf - target|")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)
