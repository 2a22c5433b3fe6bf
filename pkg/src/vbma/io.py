"""File formats: field CSVs, config JSON and solution directories.

A solution directory holds ``solution.json`` (header) and ``psi.bin``
(little-endian float64, row-major with x fastest).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import torus
from .errors import ConfigParseError, SchemaMismatch
from .mav import SolutionReport, VortexConfig
from .torus import ScalarField

SOLUTION_SCHEMA = "mav-1"
SOLUTION_HEADER = "solution.json"
PSI_FILE = "psi.bin"
CSV_HEADER = ["x", "y", "value"]


def dumps(obj) -> str:
    """Canonical JSON text; identical inputs give identical bytes."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path) -> object:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON ({exc})") from exc


def load_config(path) -> VortexConfig:
    return VortexConfig.from_json(read_json(path))


def save_config(path, cfg: VortexConfig) -> None:
    write_json(path, cfg.to_json())


# -- field CSV ------------------------------------------------------------


def write_field_csv(path, grid: torus.TorusGrid, values: np.ndarray) -> None:
    values = grid.check(values)
    x, y = grid.xy
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for xv, yv, v in zip(x.ravel(), y.ravel(), np.asarray(values, dtype=float).ravel()):
            fh.write(f"{xv:.17g},{yv:.17g},{v:.17g}\n")


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(x, y, values)`` as ``(n, n)`` arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != CSV_HEADER:
        raise SchemaMismatch(f"{path}: missing header {','.join(CSV_HEADER)}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise SchemaMismatch(f"{path}: no grid values")
    try:
        data = np.array([[float(c) for c in r] for r in body])
    except ValueError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 3:
        raise SchemaMismatch(f"{path}: expected three columns")
    n = int(round(np.sqrt(len(data))))
    if n * n != len(data):
        raise SchemaMismatch(f"{path}: {len(data)} rows is not a square grid")
    return tuple(data[:, i].reshape(n, n) for i in range(3))


# -- solution directories ---------------------------------------------------


def save_solution(directory, report: SolutionReport) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    header = {
        "schema": SOLUTION_SCHEMA,
        "config": report.cfg.to_json(),
        "monitors": report.monitors,
        "converged": report.converged,
        "reason": report.reason,
        "t_history": [list(row) for row in report.t_history],
        "psi_file": PSI_FILE if report.psi_final is not None else None,
    }
    if report.psi_final is not None:
        report.psi_final.values.astype("<f8").tofile(d / PSI_FILE)
    write_json(d / SOLUTION_HEADER, header)
    return d


def load_solution(directory) -> tuple[VortexConfig, ScalarField, dict]:
    d = Path(directory)
    path = d / SOLUTION_HEADER
    if not path.is_file():
        raise SchemaMismatch(f"{path} not found")
    header = read_json(path)
    if not isinstance(header, dict) or header.get("schema") != SOLUTION_SCHEMA:
        raise SchemaMismatch(f"{path}: schema is not {SOLUTION_SCHEMA!r}")
    cfg = VortexConfig.from_json(header.get("config"))
    if not header.get("psi_file"):
        raise SchemaMismatch(f"{path}: no psi field stored")
    raw = np.fromfile(d / header["psi_file"], dtype="<f8")
    if raw.size != cfg.n * cfg.n:
        raise SchemaMismatch(f"psi file has {raw.size} values, expected {cfg.n * cfg.n}")
    grid = torus.make_grid(cfg.tau, cfg.n)
    return cfg, ScalarField(grid, raw.reshape(cfg.n, cfg.n).astype(float)), header
