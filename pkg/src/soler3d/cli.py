"""Batch command-line front end.

    soler3d <command> --config run.cfg [--out DIR]

Commands: profile, spectrum, sweep, validate, decompose. Exit status is 0 on
success, 1 for configuration errors, 2 for numerical failures and 3 when a
validation check exceeds its tolerance.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, SolerError, ValidationFailure
from .fields import (
    BiFrequencyWave,
    SpinorField,
    bogoliubov_transform,
    build_bi_frequency_wave,
    build_one_frequency_wave,
    decompose_field,
    field_norm,
    reconstruct_field,
    scalar_density,
)
from .harmonics import (
    AngularGrid,
    basis_index,
    grid_for_degree,
    srso_matrix_elements,
    verify_spin_orbit_identities,
)
from .linops import BlockKind, make_radial_grid
from .profiles import SolitonProfile, profile_residual, solve_profile, write_profile_csv
from .spectra import analyze_sector, sweep_threshold

__all__ = ["main", "run_validation_suite", "execute", "VALIDATION_TOLERANCES"]

log = logging.getLogger("soler3d")

EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 1, 2, 3

VALIDATION_TOLERANCES = {
    "anticommutator": 1e-10,
    "spin_orbit_laplacian": 1e-8,
    "degree_leakage": 1e-10,
    "mssm_diagonal": 1e-10,
    "mssm_corners": 1e-10,
    "bogoliubov_density": 1e-12,
    "bi_frequency_density": 1e-10,
    "rs_orthogonality": 1e-12,
    "decompose_round_trip": 1e-9,
}


def worker_count(cfg: RunConfig) -> int:
    cap = os.environ.get("SOLER_THREADS")
    n = cfg.workers
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"not an integer: {cap!r}", key="SOLER_THREADS") from None
    return n


def _write(out_dir: str, name: str, text: str, cfg: RunConfig, command: str, extra: dict | None = None) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    meta = {"file": name, "command": command, "config_sha256": cfg.digest, "N": cfg.N, "r_max": cfg.r_max}
    if extra:
        meta.update(extra)
    with open(path + ".meta.json", "w", newline="\n") as fh:
        fh.write(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return path


def _synthetic_profile(omega: float = 0.9) -> SolitonProfile:
    """Smooth (v, u) pair for identity checks that hold for any radial functions."""
    r = np.linspace(1e-3, 12.0, 600)
    v = 1.1 * np.exp(-0.4 * r * r)
    u = 0.6 * r * np.exp(-0.5 * r * r)
    return SolitonProfile(omega=omega, r=r, v=v, u=u, amplitude=1.1, decay_rate=float(np.sqrt(1 - omega**2)))


def _random_field(rng, r, ell_max, ang: AngularGrid) -> SpinorField:
    """Band-limited upper spinor plus i sigma_r times a band-limited spinor below."""
    from .harmonics import eval_harmonic, pauli_spherical

    th, ph = ang.mesh
    vals = np.zeros((4, r.size) + ang.shape, dtype=complex)
    env = np.exp(-0.3 * r * r)
    powers = np.array([np.ones_like(r), r, r * r])
    for ell in range(ell_max + 1):
        for m in range(-ell, ell + 1):
            h = eval_harmonic(ell, m, th, ph)
            for s in range(4):
                c = (rng.normal(size=3) + 1j * rng.normal(size=3)) @ powers
                vals[s] += (c * env)[:, None, None] * h
    sig_r = pauli_spherical(th, ph)[0]
    vals[2:] = 1j * np.einsum("ij...,jr...->ir...", sig_r, vals[2:])
    return SpinorField(r, ang, vals)


def run_validation_suite(ell_max: int = 6, seed: int = 0, round_trips: int = 20) -> list[dict]:
    """Angular identities, field density identities and the decomposition round trip."""
    records = [
        {"check_name": rec.check_name, "ell": rec.ell, "max_abs_deviation": rec.max_abs_deviation}
        for rec in verify_spin_orbit_identities(ell_max)
    ]
    for ell in range(ell_max + 1):
        mat = srso_matrix_elements(ell)
        diag_dev = 0.0
        for m in range(-ell, ell + 1):
            diag_dev = max(diag_dev, abs(mat[basis_index(ell, m, 0), basis_index(ell, m, 0)] + m))
            diag_dev = max(diag_dev, abs(mat[basis_index(ell, m, 1), basis_index(ell, m, 1)] - m))
        corner_dev = max(
            float(np.max(np.abs(mat[(2 * ell + 1) :, basis_index(ell, ell, 0)]))),
            float(np.max(np.abs(mat[: 2 * ell + 1, basis_index(ell, -ell, 1)]))),
        )
        records.append({"check_name": "mssm_diagonal", "ell": ell, "max_abs_deviation": float(diag_dev)})
        records.append({"check_name": "mssm_corners", "ell": ell, "max_abs_deviation": corner_dev})

    rng = np.random.default_rng(seed)
    prof = _synthetic_profile()
    r = np.linspace(0.05, 6.0, 24)
    ang = grid_for_degree(4)
    xi0 = np.array([1.0, 0.0])
    base = build_one_frequency_wave(prof, xi0, r, ang)
    dev = 0.0
    for _ in range(5):
        b = complex(rng.normal(), rng.normal())
        a = np.sqrt(1 + abs(b) ** 2) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        dev = max(dev, float(np.max(np.abs(scalar_density(bogoliubov_transform(a, b, base)) - scalar_density(base)))))
    records.append({"check_name": "bogoliubov_density", "ell": 0, "max_abs_deviation": dev})

    v, u = prof.resample(r)
    target = (v * v - u * u)[:, None, None]
    sigma2 = np.array([[0, -1j], [1j, 0]])
    dev = 0.0
    for nu in (0.0, 0.5, 1.3):
        cases = [
            (np.sqrt(1 + nu * nu) * np.array([1, 0]), nu * np.array([1, 0])),
            (np.sqrt(1 + nu * nu) * np.array([1, 0]), nu * sigma2 @ np.conj(np.array([1, 0]))),
        ]
        for xi, eta in cases:
            wave = BiFrequencyWave(prof, xi, eta)
            for t in rng.uniform(0, 20, size=10):
                dens = scalar_density(build_bi_frequency_wave(wave, t, r, ang))
                dev = max(dev, float(np.max(np.abs(dens - target))))
    records.append({"check_name": "bi_frequency_density", "ell": 0, "max_abs_deviation": dev})

    # fields built from R, S only are beta-orthogonal to the e1 carrier pointwise
    from .fields import CoefficientSet

    dev = 0.0
    carrier = base.values
    for ell in range(4):
        cs = CoefficientSet(r=r, ell_max=ell, n_theta=ang.theta.size, n_phi=ang.phi.size)
        cs.rs[ell] = {"R": (rng.normal(size=r.size) + 1j * rng.normal(size=r.size)), "S": rng.normal(size=r.size) + 0j}
        f = reconstruct_field(cs, ang).values
        inner = np.conj(carrier[0]) * f[0] + np.conj(carrier[1]) * f[1] - np.conj(carrier[2]) * f[2] - np.conj(carrier[3]) * f[3]
        dev = max(dev, float(np.max(np.abs(inner))))
        records.append({"check_name": "rs_orthogonality", "ell": ell, "max_abs_deviation": float(np.max(np.abs(inner)))})

    ang3 = grid_for_degree(3)
    worst = 0.0
    for _ in range(round_trips):
        f = _random_field(rng, r, 3, ang3)
        back = reconstruct_field(decompose_field(f, 3), ang3)
        diff = SpinorField(r, ang3, back.values - f.values)
        worst = max(worst, field_norm(diff) / field_norm(f))
    records.append({"check_name": "decompose_round_trip", "ell": 3, "max_abs_deviation": worst})
    return records


def _failures(records: list[dict]) -> list[dict]:
    return [r for r in records if not r["max_abs_deviation"] <= VALIDATION_TOLERANCES[r["check_name"]]]


def _spectrum_name(sector) -> str:
    stem = f"spectrum_{sector.ell}_{sector.m}"
    if sector.kind is not BlockKind.ONE_FREQ:
        stem += f"_{sector.kind.value.lower()}"
        if sector.kind is BlockKind.BI_FREQ:
            stem += f"_nu{sector.nu:g}"
    return stem


def _read_field(path: str) -> SpinorField:
    try:
        data = np.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read field file: {exc}", key="field") from None
    try:
        theta = data["theta"]
        weights = data["theta_weights"] if "theta_weights" in data else np.ones_like(theta)
        ang = AngularGrid(theta=theta, phi=data["phi"], theta_weights=weights)
        return SpinorField(data["r"], ang, data["values"])
    except KeyError as exc:
        raise ConfigError(f"field file lacks array {exc}", key="field") from None


def execute(cfg: RunConfig, command: str, out_dir: str) -> list[str]:
    """Run one command; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if command == "profile":
        w = cfg.require_omega()
        prof = solve_profile(cfg.model, w, tol=cfg.profile_tol)
        path = os.path.join(out_dir, "profile.csv")
        write_profile_csv(prof, path)
        meta = {
            "file": "profile.csv",
            "command": command,
            "config_sha256": cfg.digest,
            "N": cfg.N,
            "r_max": cfg.r_max,
            "omega": w,
            "amplitude": prof.amplitude,
            "decay_rate": prof.decay_rate,
            "residual": profile_residual(prof),
        }
        with open(path + ".meta.json", "w", newline="\n") as fh:
            fh.write(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        written.append(path)
    elif command == "spectrum":
        w = cfg.require_omega()
        prof = solve_profile(cfg.model, w, tol=cfg.profile_tol)
        grid = make_radial_grid(cfg.N, cfg.r_max)
        # the grid-consistent profile is cached on the profile; build it once before fanning out
        from .linops import profile_on_grid

        profile_on_grid(prof, grid)
        profile_on_grid(prof, make_radial_grid(2 * cfg.N, cfg.r_max))

        def one(sector):
            return sector, analyze_sector(prof, sector, grid, cfg.tol_real)

        n = worker_count(cfg)
        if n > 1:
            with ThreadPoolExecutor(max_workers=n) as pool:
                results = list(pool.map(one, cfg.sectors))
        else:
            results = [one(s) for s in cfg.sectors]
        for sector, rep in results:
            stem = _spectrum_name(sector)
            extra = {"sector": sector.as_dict(), "omega": w, "growth_rate": rep.growth_rate}
            written.append(_write(out_dir, stem + ".csv", rep.to_csv(), cfg, command, extra))
            written.append(_write(out_dir, stem + ".json", rep.to_json() + "\n", cfg, command, extra))
            log.info("%s growth_rate=%.3e", stem, rep.growth_rate)
    elif command == "sweep":
        lo, hi = cfg.require_range()
        sector = cfg.sectors[0]
        res = sweep_threshold(
            cfg.model,
            sector,
            lo,
            hi,
            cfg.tol_omega,
            N=cfg.N,
            r_max=cfg.r_max,
            tol_real=cfg.tol_real,
            profile_tol=cfg.profile_tol,
            workers=worker_count(cfg),
            log=log.info,
        )
        extra = {"sector": sector.as_dict()}
        written.append(_write(out_dir, "sweep.csv", res.to_csv(), cfg, command, extra))
        summary = dict(res.summary(), monotone=res.monotone)
        written.append(_write(out_dir, "threshold.json", json.dumps(summary, indent=1) + "\n", cfg, command, extra))
    elif command == "validate":
        records = run_validation_suite(max(cfg.ell_max, 1))
        written.append(_write(out_dir, "validate.json", json.dumps(records, indent=1) + "\n", cfg, command))
        bad = _failures(records)
        if bad:
            names = ", ".join(f"{b['check_name']}(l={b['ell']})" for b in bad)
            raise ValidationFailure(f"checks above tolerance: {names}")
    elif command == "decompose":
        if cfg.field_path is None:
            raise ConfigError("required for decompose", key="field")
        f = _read_field(cfg.field_path)
        coeffs = decompose_field(f, cfg.ell_max)
        extra = {"ell_max": cfg.ell_max, "leakage": coeffs.leakage}
        written.append(_write(out_dir, "coefficients.json", coeffs.to_json() + "\n", cfg, command, extra))
    else:
        raise ConfigError(f"unknown command {command!r}", key="command")
    return written


def _run(command: str, config: str, out: str | None, verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        cfg = load_config(config)
        out_dir = out or cfg.out_dir or "."
        for path in execute(cfg, command, out_dir):
            click.echo(path)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except ValidationFailure as exc:
        click.echo(f"validation failed: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except SolerError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)


def _command(name: str, help_text: str):
    @click.command(name=name, help=help_text)
    @click.option("--config", "config", required=True, type=click.Path(dir_okay=False), help="Run configuration file.")
    @click.option("--out", "out", type=click.Path(file_okay=False), default=None, help="Output directory.")
    @click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
    def cmd(config, out, verbose):
        _run(name, config, out, verbose)

    return cmd


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Solitary waves of the 3D Soler model and the spectra of their linearizations."""


main.add_command(_command("profile", "Solve the ground-state profile and write profile.csv."))
main.add_command(_command("spectrum", "Filtered, classified spectra for every configured sector."))
main.add_command(_command("sweep", "Bisect in omega for the emergence of a real eigenvalue pair."))
main.add_command(_command("validate", "Run the angular and field identity suites; exit 3 on failure."))
main.add_command(_command("decompose", "Decompose a field file (.npz) into radial coefficients."))


if __name__ == "__main__":
    main()
