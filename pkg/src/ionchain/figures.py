"""Matplotlib renderings written next to the delimited outputs.

Everything goes through the Agg backend with fixed metadata so repeated
runs produce byte-identical image files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150
_PNG_METADATA = {"Software": "ionchain"}


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def render_spectrum(spectrum, path):
    """Stem plot of signed mode amplitudes against frequency."""
    freqs_hz = spectrum.frequencies / (2 * np.pi)
    amps = spectrum.signed_amplitudes
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    markers, stems, base = ax.stem(freqs_hz / 1e6, amps * 1e9)
    plt.setp(stems, linewidth=1.2)
    plt.setp(base, color="gray", linewidth=0.8)
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("frequency (MHz)")
    ax.set_ylabel("amplitude (nm)")
    ax.set_title(f"Motion spectrum of ion {spectrum.observe_ion}")
    fig.tight_layout()
    _save(fig, path)


def render_trajectory(traj, path, max_ions=8):
    """Displacement traces of up to ``max_ions`` ions."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    shown = min(traj.n_ions, max_ions)
    for m in range(1, shown + 1):
        ax.plot(traj.times * 1e6, traj.ion(m) * 1e9, linewidth=0.9, label=f"ion {m}")
    ax.set_xlabel("time (µs)")
    ax.set_ylabel("displacement (nm)")
    ax.set_title("Ion displacements after the impulse")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    _save(fig, path)


def render_modes(chain, basis, path):
    """Eigenvector matrix next to the mode frequency ladder."""
    fig, (ax_vec, ax_freq) = plt.subplots(
        1, 2, figsize=(7.5, 3.4), gridspec_kw={"width_ratios": [1.4, 1.0]}
    )
    im = ax_vec.imshow(
        basis.eigenvectors.T, cmap="bwr", vmin=-1, vmax=1, aspect="auto"
    )
    fig.colorbar(im, ax=ax_vec, label="eigenvector component")
    ax_vec.set_xlabel("ion")
    ax_vec.set_ylabel("mode")
    ax_vec.set_xticks(range(basis.n_ions), [str(m + 1) for m in range(basis.n_ions)])
    ax_vec.set_yticks(range(basis.n_ions), [str(p + 1) for p in range(basis.n_ions)])
    ax_vec.set_title("Mode matrix")

    freqs_mhz = basis.frequencies / (2 * np.pi) / 1e6
    for w in freqs_mhz:
        ax_freq.plot([0, 1], [w, w], color="tab:blue", linewidth=1.0)
    ax_freq.set_xticks([])
    ax_freq.set_ylabel("mode frequency (MHz)")
    ax_freq.set_title("Frequency ladder")
    fig.tight_layout()
    _save(fig, path)


def render_impurity_frequencies(basis, perturbed, path):
    """Homogeneous versus perturbed mode frequencies."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    modes = np.arange(1, basis.n_ions + 1)
    ax.plot(
        modes, basis.frequencies / (2 * np.pi) / 1e6, "o", label="uniform chain",
        markersize=5,
    )
    ax.plot(
        modes, perturbed.frequencies / (2 * np.pi) / 1e6, "x",
        label="with impurity", markersize=6,
    )
    ax.set_xticks(modes)
    ax.set_xlabel("mode")
    ax.set_ylabel("frequency (MHz)")
    ax.set_title("Mode frequencies")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
