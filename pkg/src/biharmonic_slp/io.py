"""Plain-text exports: CSV tables and flat key=value reports.

Every float is written with 17 significant digits so that a round trip
through text is exact and identical inputs give byte-identical files.

Schemas
-------
matrix CSV   one row per matrix row, no header
density CSV  curve,node,t,x1,x2,q0,q1
scan CSV     rho,lambda1,lambda2,lambda3,det[,sigma_min]
roots CSV    rho,branch,multiplicity[,sigma_dip_rho]
report       key=value per line, in insertion order
"""

from __future__ import annotations

import csv
import io
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def fmt(value) -> str:
    """17-significant-digit text for floats; str() for everything else."""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (np.integer,)):
        return str(int(value))
    if isinstance(value, np.ndarray):
        return " ".join(fmt(v) for v in value.ravel())
    return str(value)


@contextmanager
def _open(target):
    if target is None or target == "-":
        yield sys.stdout
    elif isinstance(target, io.TextIOBase) or hasattr(target, "write"):
        yield target
    else:
        path = Path(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(target, header: Sequence[str] | None, rows: Iterable[Sequence]) -> None:
    with _open(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float data of a CSV written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def write_report(target, record: Mapping) -> None:
    with _open(target) as fh:
        for key, value in record.items():
            fh.write(f"{key}={fmt(value)}\n")


def read_report(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def export_matrix(target, matrix) -> None:
    write_csv(target, None, np.atleast_2d(np.asarray(matrix, dtype=float)))


def export_density(target, q) -> None:
    """Nodal density of a :class:`~biharmonic_slp.assembly.DiscreteDensity`."""
    rows = []
    for c, (smp, (q0, q1)) in enumerate(zip(q.disc.samples, q.per_curve())):
        for i in range(smp.n):
            rows.append((c, i, smp.t[i], smp.points[i, 0], smp.points[i, 1], q0[i], q1[i]))
    write_csv(target, ["curve", "node", "t", "x1", "x2", "q0", "q1"], rows)


def export_scan(target, scan, sigma_min=None) -> None:
    """Sorted Robin eigenvalues per scale; ``sigma_min`` adds a column."""
    header = ["rho", "lambda1", "lambda2", "lambda3", "det"]
    cols = [scan.rho, *scan.eigenvalues.T, scan.determinants]
    if sigma_min is not None:
        header.append("sigma_min")
        cols.append(np.asarray(sigma_min, dtype=float))
    order = np.argsort(scan.rho, kind="stable")
    write_csv(target, header, np.column_stack(cols)[order].tolist())


def export_roots(target, roots, dips=None) -> None:
    """Root table; with ``dips`` the nearest sigma_min dip is added per root."""
    header = ["rho", "branch", "multiplicity"]
    if dips is not None:
        header.append("sigma_dip_rho")
    rows = []
    for r in sorted(roots, key=lambda r: r.rho):
        row = [float(r.rho), int(r.branch), int(r.multiplicity)]
        if dips is not None:
            near = min(dips, key=lambda d: abs(d.rho - r.rho)) if dips else None
            row.append(float(near.rho) if near else float("nan"))
        rows.append(row)
    write_csv(target, header, rows)


def read_config(path) -> dict[str, str]:
    """key=value lines; blank lines and ``#`` comments are ignored.

    Keys are normalised to lower case with ``-`` replaced by ``_``.
    """
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out
