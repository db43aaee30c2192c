"""Trajectory checkpoints and report export.

A trajectory directory holds ``manifest.json`` plus one raw file per
snapshot (``snap_00000.f64``, ...): little-endian float64 values in
row-major node order, no header. The manifest records the grid, the phase
constant, the snapshot times, the file names with their SHA-256 checksums
and an echo of the provenance.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ChecksumError, FormatVersionError, LoadError, TruncatedFileError
from .flow import Trajectory
from .grid import GridSpec

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
_DTYPE = np.dtype("<f8")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if callable(obj):
        return getattr(obj, "__name__", repr(obj))
    return obj


def save_trajectory(traj: Trajectory, directory) -> dict:
    """Write ``traj`` to ``directory`` and return the manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files, sums = [], []
    for k in range(len(traj)):
        name = f"snap_{k:05d}.f64"
        raw = np.ascontiguousarray(traj.data[k], dtype=_DTYPE).tobytes()
        (d / name).write_bytes(raw)
        files.append(name)
        sums.append(_sha256(raw))
    manifest = {
        "format_version": FORMAT_VERSION,
        "grid": traj.grid.to_dict(),
        "theta0": float(traj.theta0),
        "times": [float(t) for t in traj.times],
        "snapshots": files,
        "checksums": sums,
        "provenance": _jsonable(traj.provenance),
    }
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2))
    return manifest


def load_trajectory(directory) -> Trajectory:
    """Inverse of :func:`save_trajectory`; values round-trip bit for bit."""
    d = Path(directory)
    try:
        manifest = json.loads((d / MANIFEST).read_text())
    except FileNotFoundError as err:
        raise LoadError(f"no {MANIFEST} in {d}") from err
    except json.JSONDecodeError as err:
        raise LoadError(f"malformed {MANIFEST} in {d}: {err}") from err
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    grid = GridSpec.from_dict(manifest["grid"])
    times = manifest["times"]
    files = manifest["snapshots"]
    sums = manifest["checksums"]
    if not (len(times) == len(files) == len(sums)):
        raise LoadError("manifest times, snapshots and checksums differ in length")
    expected = grid.node_count * _DTYPE.itemsize
    data = np.empty((len(files),) + grid.shape)
    for k, (name, digest) in enumerate(zip(files, sums)):
        path = d / name
        try:
            raw = path.read_bytes()
        except FileNotFoundError as err:
            raise LoadError(f"missing snapshot file {name}") from err
        if len(raw) != expected:
            raise TruncatedFileError(
                f"snapshot file {name} holds {len(raw)} bytes, expected {expected}", filename=name
            )
        if _sha256(raw) != digest:
            raise ChecksumError(f"checksum mismatch for snapshot file {name}")
        data[k] = np.frombuffer(raw, dtype=_DTYPE).reshape(grid.shape)
    return Trajectory(grid, float(manifest["theta0"]), np.array(times, dtype=float), data, manifest.get("provenance", {}))


def write_json(obj, path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(_jsonable(obj), indent=2))


def write_reports(reports, directory, stem: str = "report") -> None:
    """Write ``<stem>.json`` (list of report objects) and ``<stem>.csv`` (one row each)."""
    from .estimates import EstimateReport

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_json([r.to_dict() for r in reports], d / f"{stem}.json")
    with open(d / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EstimateReport.CSV_COLUMNS)
        writer.writeheader()
        for r in reports:
            writer.writerow(r.csv_row())


def write_csv(rows, columns, path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)
