"""Text tables and matplotlib figures for CLI reports."""
from __future__ import annotations

import numpy as np
from scipy import stats

Z05 = stats.norm.ppf(0.975)
Z10 = stats.norm.ppf(0.95)


def stars(est: float, se: float) -> str:
    """Two-sided normal test: ``**`` at 5%, ``*`` at 10%."""
    if not (np.isfinite(est) and np.isfinite(se)) or se <= 0:
        return ""
    z = abs(est / se)
    if z >= Z05:
        return "**"
    if z >= Z10:
        return "*"
    return ""


def coefficient_table(names, est, se, loglik_total: float | None = None, title: str = "AMLE") -> str:
    """Two lines per variable: estimate with stars, then ``(se)`` below."""
    width = max(12, *(len(s) for s in names)) + 2
    lines = [f"{'Variable':<{width}}{title:>14}", "-" * (width + 14)]
    for name, b, s in zip(names, est, se):
        lines.append(f"{name:<{width}}{f'{b:.3f}{stars(b, s)}':>14}")
        cell = f"({s:.3f})" if np.isfinite(s) else "(---)"
        lines.append(f"{'':<{width}}{cell:>14}")
    lines.append("-" * (width + 14))
    if loglik_total is not None:
        lines.append(f"{'LogLikelihood':<{width}}{loglik_total:>14.3f}")
    lines.append("*  significant at 10% level.")
    lines.append("** significant at 5% level.")
    return "\n".join(lines) + "\n"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_coefficients(path, names, est, se) -> None:
    """Point estimates with 95% normal intervals."""
    plt = _pyplot()
    est, se = np.asarray(est, float), np.asarray(se, float)
    y = np.arange(len(names))[::-1]
    fig, ax = plt.subplots(figsize=(6, 0.45 * len(names) + 1.2))
    ok = np.isfinite(se)
    ax.errorbar(est[ok], y[ok], xerr=Z05 * se[ok], fmt="o", color="C0", capsize=3)
    ax.plot(est[~ok], y[~ok], "o", color="C1")
    ax.axvline(0.0, color="grey", lw=0.8, ls="--")
    ax.set_yticks(y, names)
    ax.set_xlabel("estimate (95% interval)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_montecarlo(path, names, estimates, truth, ok=None) -> None:
    """Histogram of each parameter's replication estimates with the true value."""
    plt = _pyplot()
    estimates = np.asarray(estimates, float)
    if ok is not None:
        estimates = estimates[np.asarray(ok, bool)]
    P = len(names)
    fig, axes = plt.subplots(1, P, figsize=(3.2 * P, 3), squeeze=False)
    for ax, name, col, t in zip(axes[0], names, estimates.T, truth):
        col = col[np.isfinite(col)]
        if col.size:
            ax.hist(col, bins=min(30, max(5, col.size // 10)), color="C0", alpha=0.75)
            ax.axvline(col.mean(), color="C1", lw=1.2, label="mean")
        ax.axvline(t, color="k", ls="--", lw=1.2, label="true")
        ax.set_title(name)
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
