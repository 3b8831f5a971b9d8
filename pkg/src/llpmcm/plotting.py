"""Figures written next to the CSV/JSON reports."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (4.5, 3.4),
    "savefig.dpi": 150,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_roc(fpr, tpr, auc, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(fpr, tpr, lw=1.5, label=f"AUC = {auc:.4f}")
        ax.plot([0, 1], [0, 1], ls=":", c="0.6", lw=1)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.legend(loc="lower right", frameon=False)
        return _save(fig, path)


def plot_sweep(rows, path):
    N = [r["N"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(N, [r["ber"] for r in rows], "o-", label="test BER")
        ax.axhline(rows[0]["bayes_ber"], ls="--", c="k", lw=1, label="Bayes BER")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("number of bag pairs N")
        ax.set_ylabel("balanced error rate")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_epr_demo(result, path, p=1.0):
    from .evaluation import counterexample_ber, counterexample_epr

    t = np.linspace(0, 1, 501)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, counterexample_ber(t), label="BER(t)")
        ax.plot(t, counterexample_epr(t, p), label=f"EPR(t), p={p:g}")
        ax.axvline(result.t_ber, c="C0", ls=":", lw=1)
        ax.axvline(result.t_epr, c="C1", ls=":", lw=1)
        ax.set_xlabel("threshold t")
        ax.legend(frameon=False)
        return _save(fig, path)
