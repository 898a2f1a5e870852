"""Two-time correlations and the time-resolved emission spectrum.

The first-order correlation ``g1(t, tau) = <sigma_+(t + tau) sigma_-(t)>`` is
obtained from the quantum regression theorem: evolve rho to t, form
``M = sigma_- rho(t)``, propagate M with the same Liouvillian and read off
``tr[sigma_+ M(tau)] = M_ge(tau)``.

Pulses last femtoseconds while the emitter decays over nanoseconds.  Inside the
drive window M is integrated numerically; past it the drive-free solution
``M_ge(tau) = M_ge(tau_s) exp(-(i d + gamma/2 + gamma_ph)(tau - tau_s))`` is
used, with ``d = omega_0 - omega_L``.

Frequencies in a :class:`Spectrogram` are offsets from the emitter line.  The
kernel of the spectrum is ``exp(-i w tau)`` with ``w`` the rotating-frame
frequency, and ``w = offset - d`` places the free line at offset zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .propagator import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    Drive,
    evolve,
    prepare_drive,
    propagate_operator,
)
from .pulseshape import SampledEnvelope
from .quantum import SIGMA_MINUS, DensityMatrix, EmitterParams

log = logging.getLogger(__name__)

TAU_MAX_DECAYS = 10.0
NEGATIVE_TOL = 1e-9
MISMATCH_RESIDUAL = 1e-2
ONSET_FRACTION = 0.1


@dataclass(frozen=True)
class Spectrogram:
    omega_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray  # shape (len(t_grid), len(omega_grid))
    meta: dict = field(default_factory=dict)

    def slice_at(self, t_index: int = -1) -> np.ndarray:
        return self.values[t_index]

    @property
    def resonant_index(self) -> int:
        return int(np.argmin(np.abs(self.omega_grid)))

    @property
    def d_omega(self) -> float:
        return float(self.omega_grid[1] - self.omega_grid[0])


@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    amplitude: float
    residual_norm: float
    n_iter: int = 0

    @property
    def mismatch(self) -> bool:
        """True when the Lorentzian model clearly does not describe the data."""
        return self.residual_norm > MISMATCH_RESIDUAL


class NoEmissionError(ValueError):
    """The resonant emission never crosses the onset threshold."""


def lorentzian(omega, center, fwhm, amplitude):
    hw2 = (0.5 * fwhm) ** 2
    return amplitude * hw2 / ((np.asarray(omega) - center) ** 2 + hw2)


def _prepare(envelope, params, rho0, drive):
    rho0 = DensityMatrix.ground() if rho0 is None else rho0
    drive = prepare_drive(envelope) if drive is None else drive
    return rho0, drive


def g1(
    envelope: SampledEnvelope,
    params: EmitterParams,
    rho0: DensityMatrix | None,
    t: float,
    tau_grid,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    drive: Drive | None = None,
) -> np.ndarray:
    """<sigma_+(t + tau) sigma_-(t)> on ``tau_grid`` (uniform, starting at 0)."""
    rho0, drive = _prepare(envelope, params, rho0, drive)
    tau = np.asarray(tau_grid, dtype=float)
    if tau.size == 0 or tau[0] != 0.0:
        raise ValueError("tau_grid must start at 0")
    if tau.size > 2 and not np.allclose(np.diff(tau), tau[1] - tau[0], rtol=1e-9, atol=0):
        raise ValueError("tau_grid must be uniform")
    if t < drive.t_lo:
        raise ValueError(f"t={t:.6e} s precedes the simulated window start {drive.t_lo:.6e} s")
    rho_t = evolve(envelope, params, rho0, rtol, atol, t_out=[t], drive=drive).states[0]
    ops, _ = propagate_operator(drive, params, SIGMA_MINUS @ rho_t, t, t + tau, rtol, atol)
    return ops[:, 0, 1].copy()


def _trapz_kernel(w: np.ndarray, tau: np.ndarray, g: np.ndarray) -> np.ndarray:
    """integral over tau of exp(-i w tau) g(tau), trapezoid rule, for every w."""
    if tau.size < 2:
        return np.zeros(w.shape, dtype=np.complex128)
    weights = np.full(tau.size, tau[1] - tau[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return np.exp(-1j * np.outer(w, tau)) @ (g * weights)


def _tail_integral(w, g_s, tau_s, tau_max, rate):
    """Exact integral of exp(-i w tau) g_s exp(-rate (tau - tau_s)) over [tau_s, tau_max]."""
    p = 1j * w + rate
    span = max(tau_max - tau_s, 0.0)
    with np.errstate(invalid="ignore"):
        frac = np.where(np.abs(p) > 0, -np.expm1(-p * span) / np.where(p == 0, 1, p), span)
    return g_s * np.exp(-1j * w * tau_s) * frac


def spectrogram(
    envelope: SampledEnvelope,
    params: EmitterParams,
    rho0: DensityMatrix | None,
    omega_grid,
    t_grid,
    tau_max: float | None = None,
    apodization: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    drive: Drive | None = None,
) -> Spectrogram:
    """S(w, t) = gamma * Re integral_0^tau_max exp(-i w tau) g1(t, tau) dtau.

    Parameters
    ----------
    omega_grid : array
        Offsets from the emitter line, rad/s.
    t_grid : array
        Emission-start times, s; must not precede the simulated window.
    tau_max : float, optional
        Truncation of the tau integral. Defaults to 10 / (gamma/2 + gamma_ph).
    apodization : float, optional
        Width ``w`` of a Gaussian window ``exp(-tau^2 / (2 w^2))`` on the
        correlation. ``None`` integrates the bare correlation.

    Notes
    -----
    The drive window is integrated with the trapezoid rule on the envelope time
    step; the drive-free tail is integrated in closed form (bare kernel) or by
    trapezoid on a step resolving the window and the fastest kernel frequency
    (apodized kernel). Values are normalized to a global maximum of 1; negative
    values are clipped to zero and the most negative one is logged and kept in
    ``meta['min_raw']``.
    """
    rho0, drive = _prepare(envelope, params, rho0, drive)
    x = np.asarray(omega_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    rate_c = params.coherence_decay
    rate = 1j * params.detuning0 + rate_c
    if tau_max is None:
        if rate_c == 0:
            raise ValueError("tau_max is required when gamma/2 + gamma_ph = 0")
        tau_max = TAU_MAX_DECAYS / rate_c
    if apodization is None and tau_max * rate_c < TAU_MAX_DECAYS:
        raise ValueError(
            f"tau_max={tau_max:.3e} s is shorter than {TAU_MAX_DECAYS:g} coherence decay times"
        )
    if apodization is not None and not apodization > 0:
        raise ValueError("apodization width must be positive")

    w = x - params.detuning0
    traj = evolve(envelope, params, rho0, rtol, atol, t_out=t_grid, drive=drive)
    step = envelope.dt
    raw = np.empty((t_grid.size, x.size))
    for k, (t_k, rho_t) in enumerate(zip(t_grid, traj.states)):
        m0 = SIGMA_MINUS @ rho_t
        tau_s = min(max(drive.t_hi - t_k, 0.0), tau_max)
        if tau_s > 0:
            n = max(int(math.ceil(tau_s / step)), 1)
            tau = np.linspace(0.0, tau_s, n + 1)
            ops, _ = propagate_operator(drive, params, m0, t_k, t_k + tau, rtol, atol)
            g = ops[:, 0, 1]
            if apodization is not None:
                g = g * np.exp(-0.5 * (tau / apodization) ** 2)
            head = _trapz_kernel(w, tau, g)
            g_s = ops[-1, 0, 1]
        else:
            head = 0.0
            g_s = m0[0, 1]
        if apodization is None:
            tail = _tail_integral(w, g_s, tau_s, tau_max, rate)
        else:
            tail = _apodized_tail(w, g_s, tau_s, tau_max, rate, apodization)
        raw[k] = params.gamma * np.real(head + tail)

    peak = raw.max()
    values = raw / peak if peak > 0 else raw.copy()
    min_raw = float(values.min()) if values.size else 0.0
    if min_raw < -NEGATIVE_TOL:
        log.warning("spectrogram: clipped negative intensities down to %.3e of the peak", min_raw)
    values = np.clip(values, 0.0, None)
    meta = {
        "tau_max": tau_max,
        "apodization": apodization,
        "resolution_broadening_fwhm": (
            2.0 * math.sqrt(2.0 * math.log(2.0)) / apodization if apodization else 0.0
        ),
        "min_raw": min_raw,
        "peak_raw": float(peak),
        "switch_time": drive.t_hi,
        "rtol": rtol,
        "atol": atol,
    }
    return Spectrogram(omega_grid=x, t_grid=t_grid, values=values, meta=meta)


def _apodized_tail(w, g_s, tau_s, tau_max, rate, width):
    end = min(tau_max, tau_s + 8.0 * width)
    if end <= tau_s:
        return np.zeros(w.shape, dtype=np.complex128)
    fastest = max(np.max(np.abs(w + rate.imag)), rate.real, 1.0 / width)
    n = max(int(math.ceil((end - tau_s) * fastest / 0.05)), 2)
    tau = np.linspace(tau_s, end, n + 1)
    g = g_s * np.exp(-rate * (tau - tau_s) - 0.5 * (tau / width) ** 2)
    return _trapz_kernel(w, tau, g)


def fit_lorentzian(omega, values, max_iter: int = 200) -> LorentzianFit:
    """Least-squares Lorentzian fit ``A (G/2)^2 / ((w - w_c)^2 + (G/2)^2)``.

    The initial guess comes from the peak sample and its half-maximum crossings.
    """
    omega = np.asarray(omega, dtype=float)
    y = np.asarray(values, dtype=float)
    i_pk = int(np.argmax(y))
    a0 = float(y[i_pk])
    if not a0 > 0:
        raise ValueError("no peak: spectrum is non-positive")
    above = y >= 0.5 * a0
    if int(above.sum()) < 10:
        raise ValueError(f"only {int(above.sum())} samples above half maximum; need >= 10")
    lo = i_pk
    while lo > 0 and y[lo - 1] >= 0.5 * a0:
        lo -= 1
    hi = i_pk
    while hi < y.size - 1 and y[hi + 1] >= 0.5 * a0:
        hi += 1
    width0 = max(omega[hi] - omega[lo], omega[1] - omega[0])
    c0 = float(omega[i_pk])

    # fit in units of the initial width around the initial center
    u = (omega - c0) / width0

    def resid(p):
        return lorentzian(u, p[0], p[1], p[2]) - y / a0

    sol = least_squares(
        resid, x0=[0.0, 1.0, 1.0], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
        max_nfev=max_iter * 4,
    )
    if sol.status <= 0:
        raise RuntimeError(f"Lorentzian fit did not converge: {sol.message}")
    c, g, a = sol.x
    norm = float(np.linalg.norm(resid(sol.x)) / np.linalg.norm(y / a0))
    return LorentzianFit(
        center=c0 + c * width0,
        fwhm=abs(g) * width0,
        amplitude=a * a0,
        residual_norm=norm,
        n_iter=int(sol.nfev),
    )


def emission_onset(
    spec: Spectrogram, fraction: float = ONSET_FRACTION, sustained: bool = False
) -> float:
    """First time the resonant slice exceeds ``fraction`` of its final value.

    With ``sustained=True`` the onset is instead the last upward crossing, after
    which the slice stays above the threshold; this ignores transient spikes of
    the unfiltered kernel. Crossings are linearly interpolated between
    emission-time samples.
    """
    s = spec.values[:, spec.resonant_index]
    final = s[-1]
    if not final > 0:
        raise NoEmissionError("no resonant emission at the last emission time")
    level = fraction * final
    above = s > level
    if not above.any():
        raise NoEmissionError("resonant emission never crosses the onset threshold")
    if sustained:
        below = np.flatnonzero(~above)
        i = 0 if below.size == 0 else int(below[-1]) + 1
    else:
        i = int(np.flatnonzero(above)[0])
    if i == 0:
        return float(spec.t_grid[0])
    t0, t1 = spec.t_grid[i - 1], spec.t_grid[i]
    s0, s1 = s[i - 1], s[i]
    return float(t0 + (level - s0) * (t1 - t0) / (s1 - s0))
