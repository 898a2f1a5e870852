"""Time integration of closed and open two-level dynamics over a sampled pulse."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _dopri
from .pulseshape import WINDOW_EDGE_RATIO, SampledEnvelope
from .quantum import (
    CLOSED,
    DensityMatrix,
    EmitterParams,
    InvariantError,
    free_propagate,
    state_violations,
)
from .units import chirped_fwhm

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
PAD_DURATIONS = 3.0
MAX_STEPS = 20_000_000
INVARIANT_SCALE = 10.0


class IntegrationError(ArithmeticError):
    """The adaptive integrator failed (step budget or step-size underflow)."""

    def __init__(self, message: str, status: int = 0):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class Drive:
    """Cubic interpolant of Omega(t) restricted to the integration window.

    ``t_lo``/``t_hi`` bound the numerical window; the drive is treated as zero
    outside it.
    """

    t0: float
    dt: float
    c_re: np.ndarray
    c_im: np.ndarray
    t_lo: float
    t_hi: float
    h_max: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.vectorize(
            lambda s: _dopri.drive_at(s, self.t0, self.dt, self.c_re, self.c_im), otypes=[complex]
        )(t)


def integration_window(envelope: SampledEnvelope, pad_durations: float = PAD_DURATIONS):
    """Support above the 1e-8 floor, padded by ``pad_durations`` chirped FWHMs per side."""
    if math.isfinite(envelope.tau0):
        pad = pad_durations * chirped_fwhm(envelope.tau0, envelope.alpha)
    else:
        pad = pad_durations * 100 * envelope.dt
    if envelope.peak == 0:
        lo, hi = 0.0, 0.0
    else:
        lo, hi = envelope.support(WINDOW_EDGE_RATIO)
    t = envelope.t_grid
    return max(lo - pad, t[0]), min(hi + pad, t[-1])


def prepare_drive(envelope: SampledEnvelope, pad_durations: float = PAD_DURATIONS) -> Drive:
    lo, hi = integration_window(envelope, pad_durations)
    t = envelope.t_grid
    i0 = max(int(np.searchsorted(t, lo, side="right")) - 1, 0)
    i1 = min(int(np.searchsorted(t, hi, side="left")), t.size - 1)
    sub_t = t[i0 : i1 + 1]
    sub = envelope.omega_values[i0 : i1 + 1]
    c_re = np.ascontiguousarray(CubicSpline(sub_t, sub.real).c)
    c_im = np.ascontiguousarray(CubicSpline(sub_t, sub.imag).c)
    if math.isfinite(envelope.tau0):
        h_max = envelope.tau0 / 4.0
    else:
        h_max = 4.0 * envelope.dt
    return Drive(
        t0=float(sub_t[0]),
        dt=envelope.dt,
        c_re=c_re,
        c_im=c_im,
        t_lo=float(sub_t[0]),
        t_hi=float(sub_t[-1]),
        h_max=h_max,
    )


@dataclass(frozen=True)
class Trajectory:
    t_grid: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def rho_ee(self) -> np.ndarray:
        return self.states[:, 1, 1].real

    @property
    def rho_eg(self) -> np.ndarray:
        return self.states[:, 1, 0]

    def state(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.states[i].copy())

    @property
    def final(self) -> DensityMatrix:
        return self.state(-1)

    def purity(self) -> np.ndarray:
        s = self.states
        return np.einsum("nij,nji->n", s, s).real


def _check_tolerances(rtol: float, atol: float) -> None:
    if not 1e-12 <= rtol <= 1e-3:
        raise ValueError(f"rtol must lie in [1e-12, 1e-3], got {rtol!r}")
    if not atol > 0:
        raise ValueError(f"atol must be positive, got {atol!r}")


def propagate_operator(
    drive: Drive,
    params: EmitterParams,
    m0: np.ndarray,
    t_start: float,
    t_out: np.ndarray,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> tuple[np.ndarray, dict]:
    """Evolve any 2x2 operator under the Lindblad map from ``t_start``.

    Returns ``(ops, stats)`` with ``ops`` shaped ``(len(t_out), 2, 2)``.  Times
    beyond the drive window use the exact zero-drive solution.
    """
    t_out = np.asarray(t_out, dtype=float)
    if t_out.size and (np.any(np.diff(t_out) < 0) or t_out[0] < t_start):
        raise ValueError("output times must be sorted and not precede t_start")
    y0 = np.ascontiguousarray(np.asarray(m0, dtype=np.complex128).reshape(4))
    t_num_end = max(min(drive.t_hi, t_out[-1] if t_out.size else t_start), t_start)
    numeric = t_out <= t_num_end
    t_num = t_out[numeric]
    grid = np.append(t_num, t_num_end)

    y_out, n_acc, n_rej, n_fev, status = _dopri.integrate(
        drive.c_re, drive.c_im, drive.t0, drive.dt,
        params.detuning0, params.gamma, params.gamma_ph,
        y0, t_start, t_num_end, grid, rtol, atol,
        drive.h_max / 10.0, drive.h_max, MAX_STEPS,
    )
    if status != _dopri.OK:
        reason = "step budget exhausted" if status == _dopri.MAX_STEPS else "step size underflow"
        raise IntegrationError(f"integration failed at rtol={rtol}: {reason}", status)

    ops = np.empty((t_out.size, 2, 2), dtype=np.complex128)
    ops[numeric] = y_out[:-1].reshape(-1, 2, 2)
    if not np.all(numeric):
        m_end = y_out[-1].reshape(2, 2)
        ops[~numeric] = free_propagate(m_end, params, t_out[~numeric] - t_num_end)
    stats = {"n_accepted": int(n_acc), "n_rejected": int(n_rej), "n_fev": int(n_fev)}
    return ops, stats


def evolve(
    envelope: SampledEnvelope,
    params: EmitterParams = CLOSED,
    rho0: DensityMatrix | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    t_out=None,
    drive: Drive | None = None,
) -> Trajectory:
    """Integrate the master equation across the pulse.

    By default the state is reported on every envelope grid point inside the
    integration window.  Explicit ``t_out`` may extend past the window, where
    the drive-free solution is exact.
    """
    _check_tolerances(rtol, atol)
    rho0 = DensityMatrix.ground() if rho0 is None else rho0
    rho0.check()
    drive = prepare_drive(envelope) if drive is None else drive
    if t_out is None:
        t = envelope.t_grid
        t_out = t[(t >= drive.t_lo) & (t <= drive.t_hi)]
    t_out = np.asarray(t_out, dtype=float)
    if t_out.size == 0:
        raise ValueError("no output times requested")
    if t_out[0] < drive.t_lo:
        raise ValueError(
            f"output time {t_out[0]:.6e} s precedes the simulated window start {drive.t_lo:.6e} s"
        )

    states, stats = propagate_operator(
        drive, params, rho0.matrix, drive.t_lo, t_out, rtol, atol
    )
    problems = state_violations(states, INVARIANT_SCALE)
    if problems:
        raise InvariantError("; ".join(problems))
    meta = {"rtol": rtol, "atol": atol, "window": (drive.t_lo, drive.t_hi), **stats}
    return Trajectory(t_grid=t_out, states=states, meta=meta)


def final_population(
    envelope: SampledEnvelope,
    params: EmitterParams = CLOSED,
    rho0: DensityMatrix | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> float:
    """rho_ee at the end of the integration window."""
    drive = prepare_drive(envelope)
    traj = evolve(envelope, params, rho0, rtol, atol, t_out=[drive.t_hi], drive=drive)
    return float(traj.rho_ee[-1])
