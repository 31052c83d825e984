"""Deterministic writers for the CLI's delimited and JSON outputs.

All numeric columns are SI with the unit spelled out in the header row.
Floats are written with shortest round-trip representation, so identical
inputs produce byte-identical files.
"""

import json

import numpy as np


def fmt(value):
    """Shortest round-trip decimal form of a scalar."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    """Write rows of scalars under a units-bearing header row."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path, payload):
    path.write_text(
        json.dumps(payload, default=_jsonable, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def trajectory_table(traj):
    header = ["time_s"] + [f"q_{m}_m" for m in range(1, traj.n_ions + 1)]
    rows = (
        [t] + list(q) for t, q in zip(traj.times, traj.displacements)
    )
    return header, rows


def spectrum_table(spectrum):
    header = ["frequency_hz", "amplitude_m", "phase_rad"]
    rows = (
        [f / (2 * np.pi), a, ph]
        for f, a, ph in zip(
            spectrum.frequencies, spectrum.signed_amplitudes, spectrum.phases
        )
    )
    return header, rows


def equilibrium_table(chain):
    header = ["ion", "position_dimensionless", "position_m"]
    rows = (
        [m + 1, u, x]
        for m, (u, x) in enumerate(zip(chain.positions, chain.positions_si))
    )
    return header, rows


def mode_table(basis):
    header = ["mode", "eigenvalue", "omega_rad_per_s", "frequency_hz"]
    rows = (
        [p + 1, mu, w, w / (2 * np.pi)]
        for p, (mu, w) in enumerate(zip(basis.eigenvalues, basis.frequencies))
    )
    return header, rows


def eigenvector_table(basis):
    n = basis.n_ions
    header = ["mode"] + [f"b_{m}" for m in range(1, n + 1)]
    rows = ([p + 1] + list(basis.eigenvectors[:, p]) for p in range(n))
    return header, rows


def perturbed_mode_table(basis, perturbed):
    header = [
        "mode",
        "eigenvalue",
        "omega_rad_per_s",
        "eigenvalue_perturbed",
        "omega_perturbed_rad_per_s",
        "frequency_ratio_to_com",
    ]
    com = perturbed.frequencies[0]
    rows = (
        [p + 1, mu, w, mup, wp, wp / com]
        for p, (mu, w, mup, wp) in enumerate(
            zip(
                basis.eigenvalues,
                basis.frequencies,
                perturbed.eigenvalues,
                perturbed.frequencies,
            )
        )
    )
    return header, rows


def spectrum_payload(spectrum):
    return {
        "observe_ion": spectrum.observe_ion,
        "noise_floor_m": spectrum.noise_floor,
        "peaks": [
            {"frequency_hz": f / (2 * np.pi), "amplitude_m": a, "phase_rad": ph}
            for f, a, ph in spectrum.peaks
        ],
    }


def collision_report_payload(report, observe_ion):
    return {
        "observe_ion": observe_ion,
        "inferred_site": report.inferred_site,
        "confidence": report.confidence,
        "residuals": report.residuals,
        "recovered_eigenvector_components": report.recovered_eigenvector_components,
        "is_tie": report.is_tie,
        "tied_sites": list(report.tied_sites),
    }


def mass_estimate_payload(estimate):
    return {
        "method": estimate.method,
        "impurity_index": estimate.impurity_index,
        "estimated_mass_kg": estimate.estimated_mass,
        "per_mode_estimates_kg": estimate.per_mode_estimates,
        "used_modes": list(estimate.used_modes),
        "residual": estimate.residual,
        "uncertainty_kg": estimate.uncertainty,
        "excluded_modes": [list(item) for item in estimate.excluded_modes],
        "ambiguous": estimate.ambiguous,
        "degenerate": estimate.degenerate,
        "tied_candidates": [
            {"impurity_index": i, "estimated_mass_kg": m}
            for i, m in estimate.tied_candidates
        ],
    }
