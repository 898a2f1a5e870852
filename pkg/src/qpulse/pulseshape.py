"""Shaped ultrafast pulses: Gaussian spectrum, Gaussian notch, quadratic phase.

Conventions
-----------
The spectral variable ``x`` is the angular-frequency offset from the laser
carrier, ``x = omega - omega_L``.  A spectral component at offset ``x`` enters
the rotating-frame Rabi frequency as ``exp(-i x t)``::

    Omega(t) = 1/(2 pi) * integral Omega~(x) exp(-i x t) dx

With this choice a TL Gaussian of area ``theta`` has ``Omega~(0) = theta`` and
``Omega(t) = |Omega(t)| exp(-i phi(t))`` where ``phi`` is the temporal phase of
the optical field, so the instantaneous detuning is
``(omega_0 - omega_L) - dphi/dt``.

The pulse area ``theta`` always refers to the underlying transform-limited
Gaussian; notch and chirp masks are applied afterwards and change the realized
temporal area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .units import alpha_from_norm, chirped_fwhm, delta_from_norm, spectral_fwhm, tl_sigma

DEFAULT_N_SAMPLES = 2**14
DEFAULT_SPAN_FACTOR = 16.0
DEFAULT_OVERSAMPLE = 4

ENERGY_FRACTION = 1.0 - 1e-8
WINDOW_EDGE_RATIO = 1e-8
MAGNITUDE_FLOOR = 1e-6


@dataclass(frozen=True)
class PulseSpec:
    """Declarative description of a shaped pulse.

    Parameters
    ----------
    theta : float
        Area of the underlying transform-limited Gaussian, rad.
    tau0 : float
        Transform-limited temporal intensity FWHM, s.
    alpha : float
        Spectral chirp coefficient, s^2.
    delta_notch : float
        Gaussian standard width of the spectral notch, rad/s. 0 disables it.
    carrier_offset : float
        ``omega_L - omega_0``, rad/s.
    """

    theta: float
    tau0: float
    alpha: float = 0.0
    delta_notch: float = 0.0
    carrier_offset: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau0 > 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0!r}")
        if not self.theta >= 0:
            raise ValueError(f"theta must be non-negative, got {self.theta!r}")
        if not self.delta_notch >= 0:
            raise ValueError(f"delta_notch must be non-negative, got {self.delta_notch!r}")
        for name in ("theta", "tau0", "alpha", "delta_notch", "carrier_offset"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_normalized(
        cls,
        theta_in_pi: float,
        tau0: float,
        alpha_over_tau0_sq: float = 0.0,
        delta_over_gamma0: float = 0.0,
        carrier_offset: float = 0.0,
    ) -> "PulseSpec":
        return cls(
            theta=theta_in_pi * math.pi,
            tau0=tau0,
            alpha=alpha_from_norm(alpha_over_tau0_sq, tau0),
            delta_notch=delta_from_norm(delta_over_gamma0, tau0),
            carrier_offset=carrier_offset,
        )

    @property
    def protocol(self) -> str:
        if self.delta_notch > 0:
            return "narp"
        return "arp" if self.alpha != 0 else "rabi"

    @property
    def gamma0(self) -> float:
        return spectral_fwhm(self.tau0)

    @property
    def chirped_duration(self) -> float:
        """Intensity FWHM of the chirped, un-notched pulse."""
        return chirped_fwhm(self.tau0, self.alpha)


@dataclass(frozen=True)
class SpectralAmplitude:
    """Complex pulse spectrum on a uniform grid of offsets from the carrier.

    ``omega_grid`` follows FFT ordering after ``fftshift``: ``(k - n/2) * d_omega``
    for ``k = 0..n-1``, so the carrier ``x = 0`` is always a grid point.
    """

    omega_grid: np.ndarray
    values: np.ndarray
    spec: PulseSpec

    @property
    def d_omega(self) -> float:
        return float(self.omega_grid[1] - self.omega_grid[0])

    def energy(self) -> float:
        """(1/2pi) * integral |Omega~|^2 d omega."""
        return float(np.sum(np.abs(self.values) ** 2) * self.d_omega / (2.0 * math.pi))


@dataclass(frozen=True)
class SampledEnvelope:
    """Complex Rabi frequency Omega(t) on a uniform time grid centered on the pulse."""

    t_grid: np.ndarray
    omega_values: np.ndarray
    carrier_offset: float = 0.0
    tau0: float = float("nan")
    alpha: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.omega_values)))

    def area(self) -> float:
        """Measured area integral |Omega(t)| dt."""
        return float(np.sum(np.abs(self.omega_values)) * self.dt)

    def complex_area(self) -> complex:
        return complex(np.sum(self.omega_values) * self.dt)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.omega_values) ** 2) * self.dt)

    def support(self, floor: float = WINDOW_EDGE_RATIO) -> tuple[float, float]:
        """First and last grid time where |Omega| exceeds ``floor`` times the peak."""
        mag = np.abs(self.omega_values)
        peak = mag.max()
        if peak == 0:
            return 0.0, 0.0
        idx = np.flatnonzero(mag > floor * peak)
        return float(self.t_grid[idx[0]]), float(self.t_grid[idx[-1]])


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def tl_spectrum(spec: PulseSpec, x: np.ndarray) -> np.ndarray:
    """Gaussian spectrum of the transform-limited pulse; equals ``theta`` at x = 0."""
    T = tl_sigma(spec.tau0)
    return spec.theta * np.exp(-0.5 * (x * T) ** 2)


def notch_mask(spec: PulseSpec, x: np.ndarray) -> np.ndarray:
    if spec.delta_notch == 0:
        return np.ones_like(x)
    # notch is centered on the emitter: omega - omega_0 = x + (omega_L - omega_0)
    r = (x + spec.carrier_offset) / spec.delta_notch
    return -np.expm1(-0.5 * r**2)


def chirp_phase(spec: PulseSpec, x: np.ndarray) -> np.ndarray:
    return np.exp(0.5j * spec.alpha * x**2)


def build_spectrum(
    spec: PulseSpec,
    n_samples: int = DEFAULT_N_SAMPLES,
    span_factor: float = DEFAULT_SPAN_FACTOR,
) -> SpectralAmplitude:
    """Gaussian TL spectrum times the notch mask times the quadratic phase.

    The grid spans ``span_factor * Gamma0`` around the carrier with ``n_samples``
    points.
    """
    if not isinstance(n_samples, (int, np.integer)) or not _is_power_of_two(int(n_samples)):
        raise ValueError(f"n_samples must be a power of two, got {n_samples!r}")
    if n_samples < 1024:
        raise ValueError(f"n_samples must be >= 1024, got {n_samples}")
    if not span_factor >= 8:
        raise ValueError(f"span_factor must be >= 8, got {span_factor!r}")

    span = span_factor * spec.gamma0
    d_omega = span / n_samples
    x = (np.arange(n_samples) - n_samples // 2) * d_omega

    # |TL spectrum|^2 = theta^2 exp(-x^2 T^2): the fraction outside |x| > L is erfc(L T)
    half = x[-1]
    outside = math.erfc(half * tl_sigma(spec.tau0))
    if outside > 1.0 - ENERGY_FRACTION:
        raise ValueError(
            f"span_factor={span_factor} leaves {outside:.2e} of the spectral energy off-grid"
        )
    if spec.delta_notch > 0 and abs(spec.carrier_offset) > half:
        raise ValueError("notch center lies outside the spectral grid")

    amp = tl_spectrum(spec, x) * notch_mask(spec, x)
    values = amp * chirp_phase(spec, x)
    return SpectralAmplitude(omega_grid=x, values=values.astype(np.complex128), spec=spec)


def synthesize_envelope(
    spectrum: SpectralAmplitude, oversample: int = DEFAULT_OVERSAMPLE
) -> SampledEnvelope:
    """Inverse transform of ``spectrum`` onto a time grid centered at t = 0.

    ``oversample`` zero-pads the spectrum so the time step shrinks by that
    factor; this is exact band-limited interpolation and leaves Parseval intact.
    """
    if oversample < 1 or not _is_power_of_two(int(oversample)):
        raise ValueError(f"oversample must be a power of two >= 1, got {oversample!r}")
    n = spectrum.omega_grid.size
    m = n * oversample
    d_omega = spectrum.d_omega
    padded = np.zeros(m, dtype=np.complex128)
    start = m // 2 - n // 2
    padded[start : start + n] = spectrum.values

    dt = 2.0 * math.pi / (m * d_omega)
    t = (np.arange(m) - m // 2) * dt
    # exp(-i x t) kernel is a forward DFT in centered index order
    omega_t = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(padded))) * (d_omega / (2.0 * math.pi))

    mag = np.abs(omega_t)
    peak = mag.max()
    if peak > 0 and max(mag[0], mag[-1]) >= WINDOW_EDGE_RATIO * peak:
        raise ValueError("time window too short: envelope has not decayed at the grid edges")

    spec = spectrum.spec
    return SampledEnvelope(
        t_grid=t,
        omega_values=omega_t,
        carrier_offset=spec.carrier_offset,
        tau0=spec.tau0,
        alpha=spec.alpha,
        meta={"n_samples": n, "oversample": oversample, "d_omega": d_omega, "spec": spec},
    )


def make_envelope(
    spec: PulseSpec,
    n_samples: int = DEFAULT_N_SAMPLES,
    span_factor: float = DEFAULT_SPAN_FACTOR,
    oversample: int = DEFAULT_OVERSAMPLE,
) -> SampledEnvelope:
    return synthesize_envelope(build_spectrum(spec, n_samples, span_factor), oversample)


def analytic_chirped_envelope(spec: PulseSpec, t):
    """Closed-form Omega(t) of an un-notched, linearly chirped Gaussian.

    Transforming ``theta * exp(-x^2 (T^2 - i alpha) / 2)`` gives
    ``theta / sqrt(2 pi (T^2 - i alpha)) * exp(-t^2 / (2 (T^2 - i alpha)))``.
    The magnitude shrinks by ``(1 + alpha^2/T^4)^(-1/4)`` and the temporal phase
    is ``-alpha t^2 / (2 (T^4 + alpha^2))``.
    """
    if spec.delta_notch != 0:
        raise ValueError("analytic envelope only exists for un-notched pulses")
    T2 = tl_sigma(spec.tau0) ** 2
    q = T2 - 1j * spec.alpha
    t = np.asarray(t, dtype=float)
    return spec.theta / np.sqrt(2.0 * math.pi * q) * np.exp(-(t**2) / (2.0 * q))


def _floored_runs(mask: np.ndarray) -> list[slice]:
    """Contiguous runs of True in ``mask``."""
    edges = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [slice(a, b) for a, b in zip(starts, stops)]


def unwrapped_phase_rate(envelope: SampledEnvelope, floor: float = MAGNITUDE_FLOOR) -> np.ndarray:
    """d/dt arg Omega(t) on the magnitude-floored sub-grid, NaN elsewhere."""
    mag = np.abs(envelope.omega_values)
    peak = mag.max()
    if peak == 0:
        raise ValueError("envelope is identically zero")
    mask = mag > floor * peak
    out = np.full(mag.shape, np.nan)
    for run in _floored_runs(mask):
        if run.stop - run.start < 3:
            continue
        phase = np.unwrap(np.angle(envelope.omega_values[run]))
        out[run] = np.gradient(phase, envelope.dt)
    if np.all(np.isnan(out)):
        raise ValueError("envelope is below the magnitude floor everywhere")
    return out


def instantaneous_detuning(
    envelope: SampledEnvelope, floor: float = MAGNITUDE_FLOOR
) -> np.ndarray:
    """Delta(t) = (omega_0 - omega_L) - dphi/dt, NaN where |Omega| is below ``floor``.

    Since Omega = |Omega| exp(-i phi), dphi/dt = -d(arg Omega)/dt.
    """
    return -envelope.carrier_offset + unwrapped_phase_rate(envelope, floor)


def intensity_fwhm(t: np.ndarray, values: np.ndarray) -> float:
    """FWHM of |values|^2 with linear interpolation of the half-max crossings."""
    inten = np.abs(values) ** 2
    half = inten.max() / 2.0
    above = np.flatnonzero(inten >= half)
    i0, i1 = above[0], above[-1]

    def cross(a: int, b: int) -> float:
        ya, yb = inten[a], inten[b]
        return t[a] + (half - ya) * (t[b] - t[a]) / (yb - ya)

    return cross(i1, i1 + 1) - cross(i0 - 1, i0)
