"""On-disk formats: snapshots, CSV tables, manifests and the sweep journal.

Snapshot: one JSON header line terminated by '\\n', followed by the field as
little-endian float64 (re, im) pairs in row-major (C) order.
"""

import csv
import json
import math
import os
import queue
import threading
import time
from pathlib import Path

import numpy as np

from .. import __version__, _kernels
from ..errors import ValidationError
from ..spectral import Field, Grid

__all__ = [
    "write_snapshot",
    "read_snapshot",
    "write_csv",
    "CsvStream",
    "write_manifest",
    "Journal",
    "format_cell",
]

SNAPSHOT_FORMAT = "finls-snapshot"


def write_snapshot(path, field, time=0.0, params=None, extra=None):
    g = field.grid
    header = {
        "format": SNAPSHOT_FORMAT,
        "version": 1,
        "grid": {"dim": g.dim, "points_per_axis": g.points_per_axis, "half_width": g.half_width},
        "params": params.to_dict() if params is not None else None,
        "time": float(time),
        "endianness": "little",
        "layout": "row-major",
        "dtype": "float64 (re, im) pairs",
        "count": g.size,
    }
    if extra:
        header["extra"] = extra
    data = np.ascontiguousarray(field.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(data.tobytes(order="C"))


def read_snapshot(path):
    """Return (Field, header)."""
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: bad snapshot header") from exc
        if header.get("format") != SNAPSHOT_FORMAT or header.get("endianness") != "little":
            raise ValidationError(f"{path}: not a little-endian finls snapshot")
        gd = header["grid"]
        grid = Grid(gd["dim"], gd["points_per_axis"], gd["half_width"])
        raw = fh.read()
    vals = np.frombuffer(raw, dtype="<c16")
    if vals.size != grid.size:
        raise ValidationError(f"{path}: expected {grid.size} values, found {vals.size}")
    return Field(grid, vals.astype(complex)), header


def format_cell(x):
    """CSV cell text: NaN and None become empty, floats use repr (round-trip exact)."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([format_cell(x) for x in row])


class CsvStream:
    """CSV writer fed through a queue so the producer never waits on disk."""

    def __init__(self, path, header):
        self._fh = open(path, "w", newline="")
        self._wr = csv.writer(self._fh, lineterminator="\n")
        self._wr.writerow(header)
        self._q = queue.SimpleQueue()
        self._thread = threading.Thread(target=self._drain, daemon=True)
        self._thread.start()

    def _drain(self):
        while True:
            row = self._q.get()
            if row is None:
                break
            self._wr.writerow([format_cell(x) for x in row])

    def put(self, row):
        self._q.put(list(row))

    def close(self):
        self._q.put(None)
        self._thread.join()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) else (str(x) if math.isinf(x) else x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_manifest(path, command, config_hash, tolerances, results, artifacts=()):
    """Manifest JSON; everything except ``created`` is a function of the inputs."""
    doc = {
        "tool": "finls",
        "version": __version__,
        "command": command,
        "config_hash": config_hash,
        "kernel_backend": _kernels.BACKEND,
        "tolerances": _jsonable(tolerances),
        "results": _jsonable(results),
        "artifacts": sorted(str(a) for a in artifacts),
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


class Journal:
    """Append-only JSONL log of finished sweep points.

    Only the parent process writes, one complete line per point, flushed and
    fsynced, so a crash leaves at most a truncated last line, which
    ``load`` ignores.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def load(self):
        done = {}
        if not self.path.exists():
            return done
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final line from an interrupted write
                done[entry["key"]] = entry
        return done

    def append(self, entry):
        line = json.dumps(_jsonable(entry), sort_keys=True) + "\n"
        with self._lock:
            with open(self.path, "a") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
