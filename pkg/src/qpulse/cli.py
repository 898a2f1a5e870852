"""Command-line interface: ``qpulse-sim <command> --config FILE | --recipe NAME``.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
Errors are reported on stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config, load_recipe, recipe_names
from .emission import NoEmissionError, emission_onset, fit_lorentzian, spectrogram
from .propagator import IntegrationError, evolve, integration_window
from .pulseshape import build_spectrum, synthesize_envelope
from .quantum import InvariantError
from .results import (
    ResultError,
    UnwritablePathError,
    envelope_table,
    fit_table,
    spectrogram_table,
    spectrum_table,
    sweep_table,
    trajectory_table,
    write_table,
)
from .sweeps import run_sweep

log = logging.getLogger("qpulse")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

COMMANDS = ("pulse", "evolve", "sweep", "spectrum", "run", "validate")


class NumericalFailure(RuntimeError):
    pass


def _emit_error(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def _load(args) -> ExperimentConfig:
    if (args.config is None) == (args.recipe is None):
        raise ConfigError("give exactly one of --config or --recipe")
    cfg = load_recipe(args.recipe) if args.recipe else load_config(args.config)
    if args.format:
        cfg = replace(cfg, fmt=args.format)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if getattr(args, "publication", False):
        cfg = cfg.with_publication_grid()
    return cfg


def _envelope(cfg: ExperimentConfig):
    n = cfg.numerics
    spectrum = build_spectrum(cfg.pulse, n.n_samples, n.span_factor)
    return spectrum, synthesize_envelope(spectrum, n.oversample)


def _path(cfg: ExperimentConfig, suffix: str, ext: str | None = None) -> Path:
    return Path(cfg.out_dir) / f"{cfg.name}_{suffix}.{ext or cfg.fmt}"


def do_pulse(cfg: ExperimentConfig, args) -> list[Path]:
    spectrum, env = _envelope(cfg)
    prov = cfg.provenance()
    lo, hi = integration_window(env)
    inside = (env.t_grid >= lo) & (env.t_grid <= hi)
    window = replace(env, t_grid=env.t_grid[inside], omega_values=env.omega_values[inside])
    return [
        write_table(spectrum_table(spectrum, prov), _path(cfg, "spectrum"), cfg.fmt),
        write_table(envelope_table(window, prov), _path(cfg, "envelope"), cfg.fmt),
    ]


def do_evolve(cfg: ExperimentConfig, args) -> list[Path]:
    _, env = _envelope(cfg)
    n = cfg.numerics
    t_out = cfg.evolve_grid.values() if cfg.evolve_grid else None
    traj = evolve(env, cfg.emitter, rtol=n.rtol, atol=n.atol, t_out=t_out)
    log.info("final rho_ee = %.12f", traj.rho_ee[-1])
    paths = [write_table(trajectory_table(traj, cfg.provenance()), _path(cfg, "trajectory"), cfg.fmt)]
    if args.plot:
        from .plotting import plot_trajectory

        paths.append(plot_trajectory(traj, _path(cfg, "trajectory", "svg")))
    return paths


def do_sweep(cfg: ExperimentConfig, args) -> list[Path]:
    plan = cfg.sweep_plan()
    result = run_sweep(plan, workers=args.workers)
    failed = int((~result.converged).sum())
    if failed:
        log.warning("%d sweep cell(s) failed to converge; see the converged column", failed)
    paths = [write_table(sweep_table(result, cfg.provenance()), _path(cfg, "sweep"), cfg.fmt)]
    if args.plot:
        from .plotting import plot_sweep

        paths.append(plot_sweep(result, _path(cfg, "sweep", "svg")))
    return paths


def compute_spectrogram(cfg: ExperimentConfig):
    """Spectrogram described by the config's [spectrum] section."""
    s = cfg.spectrum
    if s is None:
        raise ConfigError("run 'spectrum' needs a [spectrum] section")
    _, env = _envelope(cfg)
    n = cfg.numerics
    omega = np.linspace(s.omega_min, s.omega_max, s.omega_count)
    return spectrogram(
        env, cfg.emitter, None, omega, s.t_grid.values(),
        tau_max=s.tau_max, apodization=s.apodization, rtol=n.rtol, atol=n.atol,
    )


def do_spectrum(cfg: ExperimentConfig, args) -> list[Path]:
    s = cfg.spectrum
    spec = compute_spectrogram(cfg)
    omega = spec.omega_grid
    fit = fit_lorentzian(omega, spec.slice_at(-1))
    if fit.mismatch:
        log.warning("post-pulse slice is poorly described by a Lorentzian (residual %.2e)", fit.residual_norm)
    try:
        onset = emission_onset(spec, s.onset_fraction)
        onset_s = emission_onset(spec, s.onset_fraction, sustained=True)
    except NoEmissionError as exc:
        log.warning("%s", exc)
        onset = onset_s = None
    prov = cfg.provenance()
    paths = [
        write_table(spectrogram_table(spec, prov), _path(cfg, "spectrogram"), cfg.fmt),
        write_table(fit_table(fit, onset, onset_s, prov), _path(cfg, "fit"), cfg.fmt),
    ]
    if args.plot:
        from .plotting import plot_spectrogram

        paths.append(plot_spectrogram(spec, _path(cfg, "spectrogram", "svg")))
    return paths


RUNNERS = {"pulse": do_pulse, "evolve": do_evolve, "sweep": do_sweep, "spectrum": do_spectrum}


def do_validate(args) -> int:
    from .validation import run_validation

    checks = run_validation()
    for c in checks:
        print(json.dumps({
            "check": c.name, "passed": c.passed, "value": c.value,
            "tolerance": c.tolerance, "detail": c.detail, "seconds": round(c.seconds, 3),
        }))
    failed = [c.name for c in checks if not c.passed]
    if failed:
        _emit_error("validation", "invariant checks failed", checks=failed)
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpulse-sim",
        description="Shaped-pulse control and emission spectra of a driven two-level emitter.",
    )
    parser.add_argument("--version", action="version", version=f"qpulse-sim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    helps = {
        "pulse": "write the shaped spectrum and time envelope",
        "evolve": "write the density-matrix trajectory",
        "sweep": "write a final-population map",
        "spectrum": "write the emission spectrogram and its Lorentzian fit",
        "run": "run whatever the config's 'run' key names",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="PATH", help="TOML experiment file")
        src.add_argument("--recipe", metavar="NAME", help=f"bundled recipe: {', '.join(recipe_names())}")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
        p.add_argument("--format", choices=("csv", "json"), help="output format (overrides the config)")
        p.add_argument("--workers", type=int, default=1, metavar="N", help="sweep worker processes")
        p.add_argument("--plot", action="store_true", help="also write an SVG figure")
        p.add_argument(
            "--publication", action="store_true",
            help="use 201 points per sweep axis instead of the recipe grid",
        )
    sub.add_parser("validate", help="run the numerical invariant suite")
    sub.add_parser("recipes", help="list the bundled recipes")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "recipes":
            print("\n".join(recipe_names()))
            return EXIT_OK
        if args.command == "validate":
            return do_validate(args)
        if args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
        cfg = _load(args)
        run = cfg.run if args.command == "run" else args.command
        if run == "sweep" and cfg.sweep is None:
            raise ConfigError("command 'sweep' needs a [sweep] section")
        paths = RUNNERS[run](cfg, args)
    except (ConfigError, UnwritablePathError) as exc:
        _emit_error("config", str(exc))
        return EXIT_CONFIG
    except (IntegrationError, InvariantError, NoEmissionError, ResultError, ArithmeticError) as exc:
        _emit_error("numerical", str(exc), type=type(exc).__name__)
        return EXIT_NUMERIC
    except ValueError as exc:
        _emit_error("numerical", str(exc), type=type(exc).__name__)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
