"""Parallel parameter maps of the final excited-state population."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__
from .propagator import DEFAULT_ATOL, DEFAULT_RTOL, IntegrationError, final_population
from .pulseshape import (
    DEFAULT_N_SAMPLES,
    DEFAULT_OVERSAMPLE,
    DEFAULT_SPAN_FACTOR,
    PulseSpec,
    make_envelope,
)
from .quantum import EmitterParams, InvariantError
from .units import spectral_fwhm

log = logging.getLogger(__name__)

AXIS_FIELDS = {"theta": "theta", "alpha": "alpha", "delta": "delta_notch"}
NORMALIZATIONS = {
    "theta": ("absolute", "theta_in_pi"),
    "alpha": ("absolute", "alpha_over_tau0_sq"),
    "delta": ("absolute", "delta_over_Gamma0"),
}


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int
    normalization: str = "absolute"

    def __post_init__(self) -> None:
        if self.name not in AXIS_FIELDS:
            raise ValueError(f"unknown axis {self.name!r}; expected one of {sorted(AXIS_FIELDS)}")
        if self.normalization not in NORMALIZATIONS[self.name]:
            raise ValueError(
                f"axis {self.name!r} accepts normalizations {NORMALIZATIONS[self.name]}, "
                f"got {self.normalization!r}"
            )
        if self.count < 1 or (self.count == 1 and self.min != self.max):
            raise ValueError(f"axis {self.name!r}: count must be >= 2 (or 1 with min == max)")
        if self.count > 1 and not self.max > self.min:
            raise ValueError(f"axis {self.name!r}: max must exceed min")

    def values(self) -> np.ndarray:
        """Grid in the axis' own (possibly normalized) units."""
        return np.linspace(self.min, self.max, self.count)

    def to_absolute(self, tau0: float) -> np.ndarray:
        v = self.values()
        return {
            "absolute": v,
            "theta_in_pi": v * math.pi,
            "alpha_over_tau0_sq": v * tau0**2,
            "delta_over_Gamma0": v * spectral_fwhm(tau0),
        }[self.normalization]

    @property
    def label(self) -> str:
        return self.name if self.normalization == "absolute" else self.normalization


@dataclass(frozen=True)
class SweepPlan:
    axes: tuple[Axis, ...]
    baseline: PulseSpec
    params: EmitterParams = field(default_factory=EmitterParams)
    closed_system: bool = True
    n_samples: int = DEFAULT_N_SAMPLES
    span_factor: float = DEFAULT_SPAN_FACTOR
    oversample: int = DEFAULT_OVERSAMPLE
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self) -> None:
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep has one or two axes")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"sweep axes must be distinct, got {names}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def effective_params(self) -> EmitterParams:
        if self.closed_system:
            return EmitterParams(detuning0=self.params.detuning0)
        return self.params

    def cell_spec(self, index: tuple[int, ...]) -> PulseSpec:
        updates = {}
        for axis, i in zip(self.axes, index):
            updates[AXIS_FIELDS[axis.name]] = float(axis.to_absolute(self.baseline.tau0)[i])
        return replace(self.baseline, **updates)

    def provenance(self) -> dict:
        d = {
            "code_version": __version__,
            "axes": [asdict(a) for a in self.axes],
            "baseline": asdict(self.baseline),
            "params": asdict(self.effective_params),
            "closed_system": self.closed_system,
            "n_samples": self.n_samples,
            "span_factor": self.span_factor,
            "oversample": self.oversample,
            "rtol": self.rtol,
            "atol": self.atol,
        }
        d["plan_hash"] = hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]
        return d


@dataclass(frozen=True)
class SweepResult:
    plan: SweepPlan
    grids: tuple[np.ndarray, ...]
    rho_ee: np.ndarray
    converged: np.ndarray
    provenance: dict

    @property
    def axes(self) -> tuple[Axis, ...]:
        return self.plan.axes


def compute_cell(plan: SweepPlan, index: tuple[int, ...]) -> tuple[float, bool]:
    """Final population of one cell; failures come back as (nan, False)."""
    spec = plan.cell_spec(index)
    try:
        env = make_envelope(spec, plan.n_samples, plan.span_factor, plan.oversample)
        value = final_population(env, plan.effective_params, rtol=plan.rtol, atol=plan.atol)
    except (IntegrationError, InvariantError, ValueError) as exc:
        log.warning("cell %s failed: %s", index, exc)
        return math.nan, False
    return value, True


def _row(plan: SweepPlan, i: int) -> list[tuple[float, bool]]:
    if len(plan.axes) == 1:
        return [compute_cell(plan, (i,))]
    return [compute_cell(plan, (i, j)) for j in range(plan.axes[1].count)]


def run_sweep(
    plan: SweepPlan,
    workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> SweepResult:
    """Evaluate every cell of ``plan``; rows are distributed over ``workers`` processes.

    Each cell is computed by the same deterministic code path, so the result does
    not depend on the worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n_rows = plan.axes[0].count
    rows: list[list[tuple[float, bool]]] = []

    def report(done: int) -> None:
        log.info("sweep row %d/%d done", done, n_rows)
        if progress is not None:
            progress(done, n_rows)

    if workers == 1:
        for i in range(n_rows):
            rows.append(_row(plan, i))
            report(i + 1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_row, plan, i) for i in range(n_rows)]
            for i, fut in enumerate(futures):
                rows.append(fut.result())
                report(i + 1)

    values = np.array([[v for v, _ in r] for r in rows], dtype=float).reshape(plan.shape)
    flags = np.array([[ok for _, ok in r] for r in rows], dtype=bool).reshape(plan.shape)
    return SweepResult(
        plan=plan,
        grids=tuple(a.values() for a in plan.axes),
        rho_ee=values,
        converged=flags,
        provenance=plan.provenance(),
    )


def min_achieving(grid: np.ndarray, rho_ee: np.ndarray, level: float = 0.98) -> float:
    """Smallest grid value whose population reaches ``level``; inf if none does."""
    hits = np.flatnonzero(np.asarray(rho_ee) >= level)
    return float(grid[hits[0]]) if hits.size else math.inf


def gradient_sign_changes(values: np.ndarray, axis: int, tol: float = 1e-6) -> int:
    """Number of sign flips of the discrete gradient along ``axis`` (ignoring |diff| < tol)."""
    d = np.diff(values, axis=axis)
    s = np.sign(np.where(np.abs(d) < tol, 0.0, d))
    s = np.moveaxis(s, axis, -1)
    count = 0
    for line in s.reshape(-1, s.shape[-1]):
        nz = line[line != 0]
        count += int(np.sum(nz[1:] != nz[:-1]))
    return count
