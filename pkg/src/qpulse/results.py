"""Result tables and their CSV / JSON serialization.

Every file starts with a provenance block.  CSV layout::

    # qpulse-sim v0.1.0
    # kind: "sweep"
    # <key>: <json value>
    ...
    axis1,axis2,rho_ee,converged
    0.0,-3.0,5.1e-07,1

Floats are written with ``repr``, the shortest decimal that round-trips, so a
write followed by a read reproduces every value bitwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .emission import LorentzianFit, Spectrogram
from .propagator import Trajectory
from .pulseshape import SampledEnvelope, SpectralAmplitude
from .sweeps import SweepResult
from .units import GHZ, MHZ, PS, THZ

HEADER = f"# qpulse-sim v{__version__}"
FORMATS = ("csv", "json")


class ResultError(ValueError):
    """A result cannot be persisted (NaN values, unwritable path, bad file)."""


class UnwritablePathError(ResultError):
    """The output location cannot be created or written."""


@dataclass(frozen=True)
class Table:
    kind: str
    columns: tuple[str, ...]
    rows: list[tuple]
    provenance: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "__dataclass_fields__"):
        from dataclasses import asdict

        return asdict(obj)
    return repr(obj)


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return repr(float(value))


def _check_finite(table: Table) -> None:
    for i, row in enumerate(table.rows):
        for name, v in zip(table.columns, row):
            if isinstance(v, (float, np.floating)) and not math.isfinite(v):
                raise ResultError(
                    f"refusing to write non-finite value {v!r} in column {name!r}, "
                    f"row {i} ({dict(zip(table.columns, row))})"
                )


def to_csv(table: Table) -> str:
    _check_finite(table)
    lines = [HEADER, f"# kind: {json.dumps(table.kind)}"]
    for key, value in table.provenance.items():
        lines.append(f"# {key}: {json.dumps(value, sort_keys=True, default=_jsonable, allow_nan=False)}")
    lines.append(",".join(table.columns))
    lines.extend(",".join(_cell(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def to_json(table: Table) -> str:
    _check_finite(table)
    doc = {
        "header": HEADER[2:],
        "kind": table.kind,
        "provenance": table.provenance,
        "columns": list(table.columns),
        "rows": [
            [None if v is None else (bool(v) if isinstance(v, np.bool_) else v) for v in row]
            for row in table.rows
        ],
    }
    return json.dumps(doc, default=_jsonable, allow_nan=False, indent=1) + "\n"


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def from_csv(text: str) -> Table:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# qpulse-sim v"):
        raise ResultError("not a qpulse-sim CSV file (missing version header)")
    prov = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][2:].partition(": ")
        prov[key] = json.loads(value)
        i += 1
    if i >= len(lines):
        raise ResultError("CSV file has no column header")
    columns = tuple(lines[i].split(","))
    rows = [tuple(_parse_cell(c) for c in line.split(",")) for line in lines[i + 1 :] if line]
    kind = prov.pop("kind", "")
    return Table(kind, columns, rows, prov)


def from_json(text: str) -> Table:
    doc = json.loads(text)
    if not str(doc.get("header", "")).startswith("qpulse-sim v"):
        raise ResultError("not a qpulse-sim JSON file (missing version header)")
    rows = [tuple(r) for r in doc["rows"]]
    return Table(doc["kind"], tuple(doc["columns"]), rows, doc["provenance"])


def write_table(table: Table, path: str | Path, fmt: str = "csv") -> Path:
    if fmt not in FORMATS:
        raise ResultError(f"unknown format {fmt!r}; use one of {list(FORMATS)}")
    text = to_csv(table) if fmt == "csv" else to_json(table)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise UnwritablePathError(f"cannot write {path}: {exc}") from exc
    return path


def read_table(path: str | Path) -> Table:
    path = Path(path)
    text = path.read_text()
    return from_json(text) if path.suffix == ".json" else from_csv(text)


# -- result -> table conversions -------------------------------------------


def sweep_table(result: SweepResult, provenance: dict | None = None) -> Table:
    """Long-form sweep table; cells that failed to converge carry an empty rho_ee."""
    axes = result.axes
    names = tuple(f"axis{i + 1}" for i in range(len(axes)))
    prov = dict(provenance or {})
    for name, axis in zip(names, axes):
        prov[name] = {"name": axis.name, "normalization": axis.normalization, "label": axis.label}
    prov["sweep"] = result.provenance
    rows = []
    for idx in np.ndindex(result.rho_ee.shape):
        ok = bool(result.converged[idx])
        value = float(result.rho_ee[idx])
        if ok and not math.isfinite(value):
            raise ResultError(f"non-finite rho_ee in converged cell {idx}")
        coords = tuple(float(g[i]) for g, i in zip(result.grids, idx))
        rows.append(coords + (value if ok else None, ok))
    return Table("sweep", names + ("rho_ee", "converged"), rows, prov)


def trajectory_table(traj: Trajectory, provenance: dict | None = None) -> Table:
    prov = dict(provenance or {})
    prov["trajectory"] = traj.meta
    rows = [
        (float(t / PS), float(ee), float(eg.real), float(eg.imag))
        for t, ee, eg in zip(traj.t_grid, traj.rho_ee, traj.rho_eg)
    ]
    return Table("trajectory", ("t_ps", "rho_ee", "re_rho_eg", "im_rho_eg"), rows, prov)


def spectrum_table(spectrum: SpectralAmplitude, provenance: dict | None = None) -> Table:
    prov = dict(provenance or {})
    prov["spectrum_grid"] = {"n_samples": spectrum.omega_grid.size, "d_omega": spectrum.d_omega}
    rows = [
        (float(x / THZ), float(v.real), float(v.imag))
        for x, v in zip(spectrum.omega_grid, spectrum.values)
    ]
    return Table("pulse_spectrum", ("omega_offset_THz", "re_amplitude", "im_amplitude"), rows, prov)


def envelope_table(
    envelope: SampledEnvelope, provenance: dict | None = None, stride: int = 1
) -> Table:
    prov = dict(provenance or {})
    prov["envelope_grid"] = {
        "n_points": envelope.t_grid.size,
        "dt": envelope.dt,
        "stride": stride,
        **{k: v for k, v in envelope.meta.items() if k != "spec"},
    }
    sl = slice(None, None, stride)
    rows = [
        (float(t / PS), float(v.real * PS), float(v.imag * PS))
        for t, v in zip(envelope.t_grid[sl], envelope.omega_values[sl])
    ]
    return Table(
        "pulse_envelope", ("t_ps", "re_omega_rad_per_ps", "im_omega_rad_per_ps"), rows, prov
    )


def spectrogram_table(spec: Spectrogram, provenance: dict | None = None) -> Table:
    prov = dict(provenance or {})
    prov["spectrogram"] = spec.meta
    rows = []
    for i, t in enumerate(spec.t_grid):
        for j, w in enumerate(spec.omega_grid):
            rows.append((float(w / GHZ), float(t / PS), float(spec.values[i, j])))
    return Table("spectrogram", ("omega_offset_GHz", "t_ps", "intensity"), rows, prov)


def fit_table(
    fit: LorentzianFit,
    onset: float | None,
    onset_sustained: float | None,
    provenance: dict | None = None,
) -> Table:
    row = (
        float(fit.center / GHZ),
        float(fit.fwhm / MHZ),
        float(fit.amplitude),
        float(fit.residual_norm),
        None if onset is None else float(onset / PS),
        None if onset_sustained is None else float(onset_sustained / PS),
    )
    cols = (
        "center_GHz", "fwhm_MHz", "amplitude", "residual_norm", "onset_ps", "onset_sustained_ps",
    )
    return Table("lorentzian_fit", cols, [row], dict(provenance or {}))
