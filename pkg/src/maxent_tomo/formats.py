"""Plain-text file formats.

Every file is CSV preceded by a single ``#``-prefixed JSON header line that
declares the grid, the physical constants and the units.  Floats are written
with 17 significant digits so a write/read cycle is exact.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .grid import GridSpec, PhysicalConstants, make_grid
from .maxent import DataError, DensityMatrix, FitReport, MeasurementRecord
from .projectors import MOMENTUM
from .wigner import WignerGrid

UNITS = {"x": "angstrom", "k": "1/angstrom", "velocity": "angstrom/ps", "time": "ps",
         "mass": "amu", "hbar": "amu*angstrom^2/ps", "entropy": "nats"}

ROW_SUM_TOL = 1e-6


class FormatError(DataError):
    """Malformed or inconsistent file contents."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dump_header(header: dict) -> str:
    return "# " + json.dumps(header, sort_keys=True) + "\n"


def _write(path, header: dict, rows) -> None:
    buf = io.StringIO()
    buf.write(_dump_header(header))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


def _read(path, kind: str):
    text = Path(path).read_text()
    first, _, body = text.partition("\n")
    if not first.startswith("#"):
        raise FormatError(f"{path}: missing '#' JSON header line")
    try:
        header = json.loads(first[1:])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: header is not valid JSON ({exc.msg})") from None
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header must be a JSON object")
    if header.get("format") != kind:
        raise FormatError(f"{path}: field 'format' is {header.get('format')!r}, expected {kind!r}")
    rows = [r for r in csv.reader(io.StringIO(body)) if r]
    return header, rows


def _require(header: dict, key: str, path):
    if key not in header:
        raise FormatError(f"{path}: header field '{key}' is missing")
    return header[key]


def grid_header(grid: GridSpec, constants: PhysicalConstants) -> dict:
    return {"grid": grid.to_dict(), "constants": {"hbar": constants.hbar, "mass": constants.mass},
            "units": UNITS}


def grid_from_header(header: dict, path="<header>"):
    g = _require(header, "grid", path)
    c = _require(header, "constants", path)
    try:
        grid = make_grid(int(g["n_points"]), g["x_min"], g["x_max"], g.get("k_center", 0.0))
        constants = PhysicalConstants(hbar=float(c["hbar"]), mass=float(c["mass"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: header field 'grid'/'constants' invalid ({exc})") from None
    return grid, constants


def _dataset_key(d):
    return MOMENTUM if d == MOMENTUM else fmt(d)


def _parse_dataset_key(s: str, path):
    if s == MOMENTUM:
        return MOMENTUM
    try:
        return float(s)
    except ValueError:
        raise FormatError(f"{path}: unknown dataset id {s!r}") from None


def _floats(cells, path, what):
    try:
        return np.array([float(c) for c in cells])
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric value in {what} ({exc})") from None


def write_dataset(path, records, grid: GridSpec, constants: PhysicalConstants, *,
                  seed=None, counts=None, extra: dict | None = None) -> None:
    header = {"format": "maxent-tomo/dataset", "version": 1, "n_points": grid.n_points,
              "times": [r.dataset_id for r in records if r.dataset_id != MOMENTUM],
              "datasets": [_dataset_key(r.dataset_id) for r in records],
              "counts": counts, "seed": seed, **grid_header(grid, constants)}
    if extra:
        header.update(extra)
    rows = [[_dataset_key(r.dataset_id)] + [fmt(p) for p in r.probabilities] for r in records]
    _write(path, header, rows)


def read_dataset(path):
    """Returns ``(records, grid, constants, header)``."""
    header, rows = _read(path, "maxent-tomo/dataset")
    grid, constants = grid_from_header(header, path)
    n = _require(header, "n_points", path)
    if not isinstance(n, int) or n != grid.n_points:
        raise FormatError(f"{path}: header field 'n_points'={n!r} disagrees with grid "
                          f"({grid.n_points} points)")
    counts = header.get("counts")
    if counts is not None and (not isinstance(counts, int) or counts <= 0):
        raise FormatError(f"{path}: header field 'counts' must be a positive integer or null")
    records = []
    for row in rows:
        d = _parse_dataset_key(row[0], path)
        a = _floats(row[1:], path, f"dataset {row[0]}")
        if a.size != n:
            raise FormatError(f"{path}: dataset {row[0]} has {a.size} bins but header field "
                              f"'n_points' is {n}")
        if abs(a.sum() - 1) > ROW_SUM_TOL:
            raise FormatError(f"{path}: dataset {row[0]} sums to {a.sum():.9g}, not 1")
        records.append(MeasurementRecord(d, a, counts))
    if not records:
        raise FormatError(f"{path}: no dataset rows")
    return records, grid, constants, header


def write_density(path, rho: DensityMatrix, grid: GridSpec, constants: PhysicalConstants,
                  extra: dict | None = None) -> None:
    header = {"format": "maxent-tomo/density", "version": 1, "n_points": grid.n_points,
              "basis": "momentum", "time": 0.0, **grid_header(grid, constants)}
    if extra:
        header.update(extra)
    m = rho.matrix
    rows = [["re"] + [fmt(v) for v in row] for row in m.real]
    rows += [["im"] + [fmt(v) for v in row] for row in m.imag]
    _write(path, header, rows)


def read_density(path):
    """Returns ``(rho, grid, constants, header)``."""
    header, rows = _read(path, "maxent-tomo/density")
    grid, constants = grid_from_header(header, path)
    n = grid.n_points
    re = [_floats(r[1:], path, "real part") for r in rows if r[0] == "re"]
    im = [_floats(r[1:], path, "imaginary part") for r in rows if r[0] == "im"]
    if len(re) != n or len(im) != n or any(r.size != n for r in re + im):
        raise FormatError(f"{path}: expected {n} 're' and {n} 'im' rows of length {n}")
    return DensityMatrix(np.array(re) + 1j * np.array(im)), grid, constants, header


def write_lambda(path, lam, dataset_ids, grid: GridSpec, constants: PhysicalConstants) -> None:
    n = grid.n_points
    header = {"format": "maxent-tomo/lambda", "version": 1, "n_points": n,
              "datasets": [_dataset_key(d) for d in dataset_ids], **grid_header(grid, constants)}
    rows = [[_dataset_key(d), j, fmt(lam[i * n + j])]
            for i, d in enumerate(dataset_ids) for j in range(n)]
    _write(path, header, [["dataset", "bin", "lambda"]] + rows)


def read_lambda(path):
    """Returns ``(lam, dataset_ids, grid, constants)``."""
    header, rows = _read(path, "maxent-tomo/lambda")
    grid, constants = grid_from_header(header, path)
    ids = [_parse_dataset_key(d, path) for d in _require(header, "datasets", path)]
    body = rows[1:]
    lam = _floats([r[2] for r in body], path, "lambda column")
    if lam.size != grid.n_points * len(ids):
        raise FormatError(f"{path}: {lam.size} multipliers for {len(ids)} datasets")
    return lam, ids, grid, constants


def write_report(path, report: FitReport, extra: dict | None = None) -> None:
    d = report.to_dict()
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def write_wigner(path, w: WignerGrid, time: float, extra: dict | None = None) -> None:
    header = {"format": "maxent-tomo/wigner", "version": 1, "time": time,
              "shape": list(w.values.shape), "mass": w.mass, "hbar": w.hbar,
              "min_W": w.min_value, "negative": w.has_negativity, "imag_residue": w.imag_residue,
              "normalization": "sum(W) * dx * dp = 1", "units": {**UNITS, "W": "1/(angstrom*amu*angstrom/ps)"}}
    if extra:
        header.update(extra)
    rows = [["x", "v", "p", "W"]]
    for i, x in enumerate(w.x_values):
        for j, p in enumerate(w.p_values):
            rows.append([fmt(x), fmt(p / w.mass), fmt(p), fmt(w.values[i, j])])
    _write(path, header, rows)


def read_wigner(path):
    """Returns ``(wigner_grid, header)``."""
    header, rows = _read(path, "maxent-tomo/wigner")
    nx, npp = _require(header, "shape", path)
    data = np.array([[float(c) for c in r] for r in rows[1:]])
    if data.shape != (nx * npp, 4):
        raise FormatError(f"{path}: expected {nx * npp} rows of 4 columns")
    x = data[::npp, 0]
    p = data[:npp, 2]
    w = WignerGrid(data[:, 3].reshape(nx, npp), x, p, float(header["mass"]), float(header["hbar"]),
                   float(header.get("imag_residue", 0.0)))
    return w, header


def write_marginals(path, rows, header: dict) -> None:
    header = {"format": "maxent-tomo/marginals", "version": 1, "units": UNITS, **header}
    _write(path, header, [["dataset", "coordinate", "measured", "reconstructed"]] + rows)


def read_marginals(path):
    header, rows = _read(path, "maxent-tomo/marginals")
    return header, rows[1:]
