"""Two-level-system algebra in the laser rotating frame.

Basis order is ``(|g>, |e>)``; matrices are indexed ``rho[row, col]`` so that
``rho[1, 0]`` is rho_eg.  All Hamiltonians are returned as H/hbar in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pulseshape import MAGNITUDE_FLOOR, SampledEnvelope, unwrapped_phase_rate

SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=np.complex128)
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
PROJ_E = SIGMA_PLUS @ SIGMA_MINUS

TRACE_TOL = 1e-9
EIG_TOL = 1e-9


@dataclass(frozen=True)
class EmitterParams:
    """Emitter detuning and decoherence rates.

    detuning0 is ``omega_0 - omega_L`` in rad/s; gamma and gamma_ph are in 1/s.
    """

    detuning0: float = 0.0
    gamma: float = 0.0
    gamma_ph: float = 0.0

    def __post_init__(self) -> None:
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        if not self.gamma_ph >= 0:
            raise ValueError(f"gamma_ph must be >= 0, got {self.gamma_ph!r}")

    @property
    def coherence_decay(self) -> float:
        """Zero-drive decay rate of rho_eg: gamma/2 + gamma_ph."""
        return 0.5 * self.gamma + self.gamma_ph

    @property
    def closed(self) -> bool:
        return self.gamma == 0 and self.gamma_ph == 0


CLOSED = EmitterParams()


@dataclass(frozen=True)
class DriveSample:
    omega_complex: complex
    detuning: float = 0.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.omega_complex) and math.isfinite(self.detuning)):
            raise ValueError("drive sample must be finite")


class InvariantError(ArithmeticError):
    """A state violated trace, Hermiticity or positivity beyond tolerance."""


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    @classmethod
    def ground(cls) -> "DensityMatrix":
        return cls(np.array([[1, 0], [0, 0]], dtype=np.complex128))

    @classmethod
    def excited(cls) -> "DensityMatrix":
        return cls(np.array([[0, 0], [0, 1]], dtype=np.complex128))

    @classmethod
    def from_populations(cls, rho_ee: float, rho_eg: complex = 0.0) -> "DensityMatrix":
        return cls(
            np.array([[1 - rho_ee, np.conj(rho_eg)], [rho_eg, rho_ee]], dtype=np.complex128)
        )

    @property
    def rho_ee(self) -> float:
        return float(self.matrix[1, 1].real)

    @property
    def rho_gg(self) -> float:
        return float(self.matrix[0, 0].real)

    @property
    def rho_eg(self) -> complex:
        return complex(self.matrix[1, 0])

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def violations(self, scale: float = 1.0) -> list[str]:
        """Invariant violations at ``scale`` times the nominal tolerances."""
        return state_violations(self.matrix[None], scale)

    def check(self, scale: float = 1.0) -> "DensityMatrix":
        problems = self.violations(scale)
        if problems:
            raise InvariantError("; ".join(problems))
        return self


def state_violations(states: np.ndarray, scale: float = 1.0) -> list[str]:
    """Vectorized invariant check over an ``(n, 2, 2)`` stack of density matrices."""
    states = np.asarray(states)
    out = []
    herm = np.abs(states[:, 1, 0] - np.conj(states[:, 0, 1]))
    diag_imag = np.abs(states[:, 0, 0].imag) + np.abs(states[:, 1, 1].imag)
    if np.max(np.maximum(herm, diag_imag)) > scale * TRACE_TOL:
        out.append(f"non-Hermitian (max deviation {np.max(np.maximum(herm, diag_imag)):.3e})")
    tr = np.abs(states[:, 0, 0] + states[:, 1, 1] - 1.0)
    if tr.max() > scale * TRACE_TOL:
        out.append(f"trace drift {tr.max():.3e} at index {int(tr.argmax())}")
    eig_min = np.linalg.eigvalsh(0.5 * (states + np.conj(np.swapaxes(states, 1, 2))))[:, 0]
    if eig_min.min() < -scale * EIG_TOL:
        out.append(f"negative eigenvalue {eig_min.min():.3e} at index {int(eig_min.argmin())}")
    return out


def hamiltonian_rwa(drive: DriveSample) -> np.ndarray:
    """-(d/2) sigma_z - (1/2) (Omega sigma_+ + Omega* sigma_-), in rad/s."""
    om = complex(drive.omega_complex)
    return -0.5 * drive.detuning * SIGMA_Z - 0.5 * (om * SIGMA_PLUS + np.conj(om) * SIGMA_MINUS)


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)


def dissipator_emission(rho: np.ndarray, gamma: float) -> np.ndarray:
    sp, sm = SIGMA_PLUS, SIGMA_MINUS
    return 0.5 * gamma * (2 * sm @ rho @ sp - sp @ sm @ rho - rho @ sp @ sm)


def dissipator_dephasing(rho: np.ndarray, gamma_ph: float) -> np.ndarray:
    return 0.5 * gamma_ph * (SIGMA_Z @ rho @ SIGMA_Z - rho)


def lindblad_rhs(rho, drive: DriveSample, params: EmitterParams) -> np.ndarray:
    """d rho/dt = -i[H, rho] + L_em[rho] + L_ph[rho].

    Accepts any 2x2 operator, not only physical states, so the same map drives
    the regression-theorem propagation of sigma_- rho.
    """
    m = _as_matrix(rho)
    h = hamiltonian_rwa(drive)
    return (
        -1j * (h @ m - m @ h)
        + dissipator_emission(m, params.gamma)
        + dissipator_dephasing(m, params.gamma_ph)
    )


def adiabaticity_metric(
    envelope: SampledEnvelope,
    params: EmitterParams,
    floor: float = MAGNITUDE_FLOOR,
) -> np.ndarray:
    """|dDelta/dt |Omega| - Delta d|Omega|/dt| / (|Omega|^2 + Delta^2)^(3/2).

    Delta(t) uses ``params.detuning0`` and the envelope phase. Samples where the
    envelope is below ``floor`` or the denominator vanishes come back as NaN.
    """
    mag = np.abs(envelope.omega_values)
    delta = params.detuning0 + unwrapped_phase_rate(envelope, floor)
    out = np.full(mag.shape, np.nan)
    valid = ~np.isnan(delta)
    edges = np.diff(np.concatenate(([0], valid.astype(np.int8), [0])))
    for a, b in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        if b - a < 3:
            continue
        d = delta[a:b]
        m = mag[a:b]
        num = np.abs(np.gradient(d, envelope.dt) * m - d * np.gradient(m, envelope.dt))
        den = (m**2 + d**2) ** 1.5
        with np.errstate(divide="ignore", invalid="ignore"):
            out[a:b] = np.where(den > 0, num / den, np.nan)
    return out


def free_propagate(m: np.ndarray, params: EmitterParams, tau) -> np.ndarray:
    """Exact zero-drive Lindblad evolution of an arbitrary 2x2 operator.

    Returns an array of shape ``(len(tau), 2, 2)`` (or ``(2, 2)`` for scalar tau).
    """
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    decay = np.exp(-params.gamma * tau_arr)
    coh = np.exp((-1j * params.detuning0 - params.coherence_decay) * tau_arr)
    out = np.empty((tau_arr.size, 2, 2), dtype=np.complex128)
    out[:, 1, 1] = m[1, 1] * decay
    out[:, 0, 0] = m[0, 0] + m[1, 1] * (1.0 - decay)
    out[:, 0, 1] = m[0, 1] * coh
    out[:, 1, 0] = m[1, 0] * np.conj(coh)
    return out[0] if np.ndim(tau) == 0 else out
