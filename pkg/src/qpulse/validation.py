"""Numerical-hygiene suite run by ``qpulse-sim validate``."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .propagator import DEFAULT_ATOL, DEFAULT_RTOL, evolve
from .pulseshape import PulseSpec, build_spectrum, synthesize_envelope
from .quantum import CLOSED, DriveSample, EmitterParams, free_propagate, lindblad_rhs
from .sweeps import Axis, SweepPlan, run_sweep
from .units import FS

log = logging.getLogger(__name__)

TAU0 = 100 * FS
SEED = 20240601

REFERENCE_PULSES = {
    "rabi": PulseSpec.from_normalized(5.0, TAU0),
    "arp": PulseSpec.from_normalized(5.0, TAU0, alpha_over_tau0_sq=0.8),
    "narp": PulseSpec.from_normalized(5.0, TAU0, alpha_over_tau0_sq=2.4, delta_over_gamma0=0.25),
}
OPEN = EmitterParams(gamma=1e12, gamma_ph=1e11)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0


def _parseval() -> Check:
    worst = 0.0
    for spec in REFERENCE_PULSES.values():
        s = build_spectrum(spec)
        env = synthesize_envelope(s)
        worst = max(worst, abs(env.energy() - s.energy()) / s.energy())
    return Check("parseval", worst < 1e-10, worst, 1e-10, "relative energy mismatch")


def _notch_zero() -> Check:
    s = build_spectrum(REFERENCE_PULSES["narp"])
    mag = np.abs(s.values)
    at_line = mag[np.argmin(np.abs(s.omega_grid + s.spec.carrier_offset))]
    ratio = float(at_line / mag.max())
    return Check("notch_zero", ratio < 1e-12, ratio, 1e-12, "|spectrum at omega_0| / peak")


def _phase_mask() -> Check:
    worst = 0.0
    for spec in REFERENCE_PULSES.values():
        a = np.abs(build_spectrum(spec).values)
        b = np.abs(build_spectrum(replace(spec, alpha=0.0)).values)
        worst = max(worst, float(np.max(np.abs(a - b)) / b.max()))
    return Check("phase_mask_invariance", worst < 1e-14, worst, 1e-14, "max |d|Omega~|| / peak")


def _chirp_area() -> Check:
    env = synthesize_envelope(build_spectrum(REFERENCE_PULSES["arp"]))
    margin = env.area() - abs(env.complex_area())
    return Check("chirp_area_inequality", margin >= -1e-12, margin, -1e-12, "area - |complex area|")


def _rhs_invariants() -> list[Check]:
    rng = np.random.default_rng(SEED)
    worst_tr = worst_herm = worst_pur = 0.0
    for _ in range(200):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        pure = np.outer(v, v.conj())
        p = rng.uniform()
        rho = p * pure + (1 - p) * np.eye(2) / 2
        drive = DriveSample(complex(*rng.normal(scale=1e13, size=2)), rng.normal(scale=1e13))
        params = EmitterParams(rng.normal(scale=1e12), rng.uniform(0, 1e12), rng.uniform(0, 1e12))
        r = lindblad_rhs(rho, drive, params)
        norm = max(np.linalg.norm(r), 1e-300)
        worst_tr = max(worst_tr, abs(np.trace(r)) / norm)
        worst_herm = max(worst_herm, np.linalg.norm(r - r.conj().T) / norm)
        closed = replace(params, gamma=0.0, gamma_ph=0.0)
        rc = lindblad_rhs(pure, drive, closed)
        worst_pur = max(worst_pur, abs(2 * np.trace(pure @ rc)) / max(np.linalg.norm(rc), 1e-300))
    return [
        Check("rhs_trace", worst_tr < 1e-12, worst_tr, 1e-12, "|tr rhs| / ||rhs||"),
        Check("rhs_hermiticity", worst_herm < 1e-12, worst_herm, 1e-12, "||rhs - rhs^H|| / ||rhs||"),
        Check("rhs_purity", worst_pur < 1e-12, worst_pur, 1e-12, "|d tr(rho^2)/dt| / ||rhs||"),
    ]


def _coherence_decay() -> Check:
    params = EmitterParams(detuning0=3e11, gamma=1e12, gamma_ph=2e11)
    m = np.array([[0.5, 0.3 - 0.1j], [0.3 + 0.1j, 0.5]])
    tau = 0.7e-12
    out = free_propagate(m, params, tau)
    rate = -math.log(abs(out[1, 0]) / abs(m[1, 0])) / tau
    err = abs(rate - params.coherence_decay) / params.coherence_decay
    slope = lindblad_rhs(m, DriveSample(0j, params.detuning0), params)[1, 0] / m[1, 0]
    err = max(err, abs(-slope.real - params.coherence_decay) / params.coherence_decay)
    return Check("coherence_decay_rate", err < 1e-12, err, 1e-12, "relative error vs gamma/2 + gamma_ph")


def _trajectories() -> list[Check]:
    worst_purity = worst_trace = 0.0
    worst_eig = 0.0
    for spec in REFERENCE_PULSES.values():
        env = synthesize_envelope(build_spectrum(spec))
        closed = evolve(env, CLOSED)
        worst_purity = max(worst_purity, float(np.max(np.abs(closed.purity() - 1.0))))
        opened = evolve(env, OPEN)
        s = opened.states
        worst_trace = max(worst_trace, float(np.max(np.abs(s[:, 0, 0] + s[:, 1, 1] - 1.0))))
        eig = np.linalg.eigvalsh(0.5 * (s + np.conj(np.swapaxes(s, 1, 2))))
        worst_eig = max(worst_eig, float(max(-eig.min(), eig.max() - 1.0, 0.0)))
    return [
        Check("closed_purity", worst_purity < 10 * DEFAULT_RTOL, worst_purity, 10 * DEFAULT_RTOL,
              "max |tr(rho^2) - 1| along closed trajectories"),
        Check("open_trace", worst_trace < 10 * DEFAULT_ATOL, worst_trace, 10 * DEFAULT_ATOL,
              "max |tr rho - 1| along open trajectories"),
        Check("open_positivity", worst_eig < 1e-9, worst_eig, 1e-9,
              "eigenvalues outside [0, 1] along open trajectories"),
    ]


def _determinism() -> Check:
    plan = SweepPlan(
        axes=(
            Axis("theta", 1.0, 5.0, 3, "theta_in_pi"),
            Axis("alpha", 0.0, 2.0, 3, "alpha_over_tau0_sq"),
        ),
        baseline=REFERENCE_PULSES["rabi"],
        n_samples=4096,
    )
    a = run_sweep(plan, workers=1)
    b = run_sweep(plan, workers=2)
    same = a.rho_ee.tobytes() == b.rho_ee.tobytes() and np.array_equal(a.converged, b.converged)
    diff = float(np.max(np.abs(a.rho_ee - b.rho_ee)))
    return Check("determinism_across_workers", same, diff, 0.0, "bitwise, 1 vs 2 workers")


SUITE: list[Callable[[], Check | list[Check]]] = [
    _parseval,
    _notch_zero,
    _phase_mask,
    _chirp_area,
    _rhs_invariants,
    _coherence_decay,
    _trajectories,
    _determinism,
]


def run_validation() -> list[Check]:
    out: list[Check] = []
    for fn in SUITE:
        t0 = time.perf_counter()
        res = fn()
        dt = time.perf_counter() - t0
        for c in res if isinstance(res, list) else [res]:
            c = replace(c, passed=bool(c.passed), value=float(c.value), seconds=dt)
            log.info("%s: %s (%.3e vs %.1e)", c.name, "ok" if c.passed else "FAIL", c.value, c.tolerance)
            out.append(c)
    return out
