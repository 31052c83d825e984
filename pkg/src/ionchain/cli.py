"""Command-line front end: configure a trap, run a scenario, write reports.

Subcommands
-----------
modes     equilibrium positions, eigenvalue/frequency table, eigenvectors
collide   impulse-response trajectory, motion spectrum, collision report
impurity  perturbed mode frequencies and impurity mass estimates

Every run writes delimited data (CSV or JSON) plus rendered figures into
the output directory.  Identical configurations (including the seed)
produce byte-identical files.

Exit codes: 0 success, 2 config error, 3 numerical failure,
4 ambiguous diagnostic.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import figures, output
from .dynamics import ImpulseEvent, Trajectory, beta_amplitudes, synthesize_trajectory
from .equilibrium import equilibrium_chain
from .errors import ConfigError, IonChainError
from .impurity import (
    MassDistribution,
    estimate_impurity_mass_exact,
    estimate_impurity_mass_first_order,
    exact_frequency_ratios,
    perturbed_modes,
)
from .modes import chain_modes
from .runconfig import load_config, with_defaults_applied
from .spectral import estimate_spectrum, infer_collision_site

_SCENARIO_BY_COMMAND = {
    "modes": "modes-table",
    "collide": "collision",
    "impurity": "impurity",
}


def _add_common_flags(parser):
    parser.add_argument("--config", metavar="PATH", help="flat key = value config file")
    parser.add_argument("--n", type=int, dest="n_ions", help="number of ions")
    parser.add_argument(
        "--omega0-hz", type=float, dest="omega0_hz",
        help="single-ion axial frequency in Hz",
    )
    parser.add_argument(
        "--mass-amu", type=float, dest="mass_amu",
        help="majority ion mass in atomic mass units",
    )
    parser.add_argument(
        "--site", type=int,
        help="struck ion (collide) or impurity position (impurity), 1-based",
    )
    parser.add_argument(
        "--v0", type=float, dest="v0_m_per_s",
        help="impulse velocity in m/s (default: harmonic-regime velocity)",
    )
    parser.add_argument(
        "--noise-sigma", type=float, dest="noise_sigma_rel",
        help="measurement noise relative to the dominant spectral peak",
    )
    parser.add_argument("--seed", type=int, help="random seed (required with noise)")
    parser.add_argument("--out", dest="out_dir", metavar="DIR", help="output directory")
    parser.add_argument(
        "--format", choices=("csv", "json"), help="delimited output format"
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ionchain",
        description="Normal-mode diagnostics for linear trapped-ion crystals",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, help_text in (
        ("modes", "write the equilibrium and normal-mode tables"),
        ("collide", "simulate an impulse and identify the collision site"),
        ("impurity", "estimate a dark impurity's mass from mode frequencies"),
    ):
        _add_common_flags(sub.add_parser(command, help=help_text))
    return parser


def _overrides(args):
    keys = (
        "n_ions", "omega0_hz", "mass_amu", "site", "v0_m_per_s",
        "noise_sigma_rel", "seed", "out_dir", "format",
    )
    return {k: getattr(args, k) for k in keys}


def _write(table_path, header, rows, fmt, json_key):
    """Write one table as CSV, or return it as a JSON fragment."""
    if fmt == "csv":
        output.write_csv(table_path.with_suffix(".csv"), header, rows)
        return None
    header = list(header)
    return {json_key: [dict(zip(header, row)) for row in rows]}


def _emit_tables(out_dir, fmt, stem, tables):
    """Write named tables either as separate CSVs or one JSON document."""
    written = []
    payload = {}
    for name, (header, rows) in tables.items():
        fragment = _write(out_dir / name, header, rows, fmt, name)
        if fragment is None:
            written.append(out_dir / f"{name}.csv")
        else:
            payload.update(fragment)
    if payload:
        path = out_dir / f"{stem}.json"
        output.write_json(path, payload)
        written.append(path)
    return written


def _default_velocity(chain, trap):
    # Keeps the peak displacement near 1% of the smallest ion gap.
    return 0.01 * chain.min_spacing * chain.length_scale * trap.omega0


def cmd_modes(config):
    trap = config.trap_config()
    chain = equilibrium_chain(trap)
    _, basis = chain_modes(chain, trap)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = _emit_tables(
        out_dir,
        config.format,
        "modes",
        {
            "equilibrium": output.equilibrium_table(chain),
            "modes": output.mode_table(basis),
            "eigenvectors": output.eigenvector_table(basis),
        },
    )
    figure = out_dir / "modes.png"
    figures.render_modes(chain, basis, figure)
    written.append(figure)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_collide(config):
    trap = config.trap_config()
    chain = equilibrium_chain(trap)
    _, basis = chain_modes(chain, trap)
    config = with_defaults_applied(config, trap, basis)

    v0 = config.v0_m_per_s
    if v0 is None:
        v0 = _default_velocity(chain, trap)
    event = ImpulseEvent(ion_index=config.site, velocity=v0)
    traj = synthesize_trajectory(
        event, basis, trap, config.sample_rate_hz, config.duration_s
    )

    if config.noise_sigma_rel > 0:
        beta = beta_amplitudes(event, config.observe_ion, basis, trap)
        sigma = config.noise_sigma_rel * float(np.max(np.abs(beta)))
        rng = np.random.default_rng(config.seed)
        noisy = traj.displacements + sigma * rng.standard_normal(
            traj.displacements.shape
        )
        traj = Trajectory(
            times=traj.times, displacements=noisy, sample_rate=traj.sample_rate
        )

    spectrum = estimate_spectrum(
        traj, config.observe_ion, model_frequencies=basis.frequencies
    )
    report = infer_collision_site(spectrum, basis)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = _emit_tables(
        out_dir,
        config.format,
        "collision_data",
        {
            "trajectory": output.trajectory_table(traj),
            "spectrum": output.spectrum_table(spectrum),
        },
    )
    report_path = out_dir / "collision_report.json"
    output.write_json(
        report_path, output.collision_report_payload(report, config.observe_ion)
    )
    written.append(report_path)
    for name, renderer, arg in (
        ("spectrum.png", figures.render_spectrum, spectrum),
        ("trajectory.png", figures.render_trajectory, traj),
    ):
        path = out_dir / name
        renderer(arg, path)
        written.append(path)
    for path in written:
        print(f"wrote {path}")

    if report.is_tie:
        print(f"ambiguous: sites {report.tied_sites} are tied")
        return 4
    print(
        f"inferred collision site: ion {report.inferred_site} "
        f"(confidence {report.confidence:.3f})"
    )
    return 0


def cmd_impurity(config):
    trap = config.trap_config()
    chain = equilibrium_chain(trap)
    coupling, basis = chain_modes(chain, trap)

    impurity_mass_amu = config.impurity_mass_amu
    if impurity_mass_amu is None:
        impurity_mass_amu = config.mass_amu
    n = config.n_ions

    # The simulated chain carries the impurity at the given site; without
    # one it is placed at ion 1 and the estimator searches all positions.
    sim_site = config.site if config.site is not None else 1
    masses = MassDistribution.single_impurity(
        n, sim_site, impurity_mass_amu / config.mass_amu, 1.0
    )
    mode_indices = list(range(2, n + 1))
    observed = exact_frequency_ratios(coupling, masses, mode_indices)
    ratios = list(zip(mode_indices, observed))

    perturbed = perturbed_modes(coupling, masses, trap)
    estimates = {}
    if config.site is not None:
        estimates["first_order"] = estimate_impurity_mass_first_order(
            ratios, config.site, basis, trap.ion_mass
        )
        estimates["exact_search"] = estimate_impurity_mass_exact(
            ratios, basis, coupling, trap.ion_mass,
            candidate_positions=[config.site],
        )
    else:
        estimates["exact_search"] = estimate_impurity_mass_exact(
            ratios, basis, coupling, trap.ion_mass
        )

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = _emit_tables(
        out_dir,
        config.format,
        "impurity_data",
        {"frequencies": output.perturbed_mode_table(basis, perturbed)},
    )
    estimate_path = out_dir / "mass_estimate.json"
    output.write_json(
        estimate_path,
        {key: output.mass_estimate_payload(est) for key, est in estimates.items()},
    )
    written.append(estimate_path)
    figure = out_dir / "frequencies.png"
    figures.render_impurity_frequencies(basis, perturbed, figure)
    written.append(figure)
    for path in written:
        print(f"wrote {path}")

    exact = estimates["exact_search"]
    kg_per_amu = trap.ion_mass / config.mass_amu
    if exact.degenerate:
        print("degenerate: a uniform chain fits every position equally well")
        return 4
    if exact.ambiguous:
        tied = ", ".join(
            f"site {i} ({m / kg_per_amu:.4f} amu)" for i, m in exact.tied_candidates
        )
        print(f"ambiguous: {tied}")
        return 4
    print(
        f"estimated impurity mass: {exact.estimated_mass / kg_per_amu:.6f} amu "
        f"at site {exact.impurity_index}"
    )
    return 0


_RUNNERS = {
    "modes-table": cmd_modes,
    "collision": cmd_collide,
    "impurity": cmd_impurity,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(
            path=args.config,
            overrides=_overrides(args),
            scenario=_SCENARIO_BY_COMMAND[args.command],
        )
        return _RUNNERS[config.scenario](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IonChainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
