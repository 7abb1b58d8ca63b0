"""Figure rendering for the CLI report paths.

Every figure lands next to its delimited output file and shares the stem.
Plots are a convenience view; the CSV/JSON files remain the data of record.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .budget import BudgetReport
from .loopback import ScanResult
from .rb import RbDataset, RbFit, decay_model


def plot_scan_iq(scan: ScanResult, path) -> None:
    """IQ-plane locus of the accumulated values over the drive-phase scan."""
    acc = scan.accumulated
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.plot(acc.real, acc.imag, ".-", ms=4, lw=0.8)
    ax.set_xlabel("I (accumulator units)")
    ax.set_ylabel("Q (accumulator units)")
    ax.set_title("Receiver integrated signal vs drive phase")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_scan_response(scan: ScanResult, path) -> None:
    """Amplitude ratio and detrended phase versus drive phase."""
    theta = scan.drive_phases
    mags = np.abs(scan.accumulated)
    rel = mags / np.mean(mags) - 1.0
    unwrapped = np.unwrap(np.angle(scan.accumulated))
    slope, intercept = np.polyfit(theta, unwrapped, 1)
    resid = unwrapped - (slope * theta + intercept)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.5), sharex=True)
    ax1.plot(theta, rel, ".-", ms=4, lw=0.8)
    ax1.set_ylabel("|acc| / mean - 1")
    ax1.grid(True, alpha=0.4)
    ax2.plot(theta, resid, ".-", ms=4, lw=0.8, color="tab:orange")
    ax2.set_xlabel("drive phase (rad)")
    ax2.set_ylabel("detrended phase (rad)")
    ax2.grid(True, alpha=0.4)
    fig.suptitle("Scan amplitude and phase response")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_budget_levels(report: BudgetReport, path) -> None:
    """Signal level running through the chain, with compression flags."""
    labels = ["in"] + [r.label for r in report.rows]
    levels = [report.input_dbm] + [r.output_dbm for r in report.rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.step(range(len(levels)), levels, where="post", marker="o")
    for i, row in enumerate(report.rows, start=1):
        if row.compression_warning:
            ax.annotate("P1dB!", (i, levels[i]), textcoords="offset points",
                        xytext=(0, 8), color="red", ha="center")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("signal level (dBm)")
    ax.set_title(f"{report.role} level plan ({report.total_gain_db:+.1f} dB)")
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rb_fit(data: RbDataset, fit: RbFit, path) -> None:
    """Survival data with the fitted decay curve."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(data.lengths, data.survival, "o", ms=5, label="data")
    grid = np.linspace(1, data.lengths.max(), 200)
    ax.plot(grid, decay_model(grid, fit.a, fit.p), "-", label="A p^m fit")
    label = f"infidelity {fit.infidelity:.3g}"
    if math.isfinite(fit.infidelity_stderr) and fit.infidelity_stderr > 0:
        label += f" +/- {fit.infidelity_stderr:.2g}"
    ax.set_xlabel("sequence length m (Clifford gates)")
    ax.set_ylabel("survival probability")
    ax.set_title(label)
    ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
