"""Pattern files: CSV point tables with a JSON sidecar.

A replicate with stem ``rep_0000`` is stored as

``rep_0000.f1.csv``  rows ``site_x,site_y,disp_x,disp_y`` (one per observed pair),
``rep_0000.f2.csv``  rows ``x,y`` (every displaced point in the window),
``rep_0000.json``    window, shift, seed, theta, model and the resolved config.

Framework-1 estimation also needs the points whose sites fall outside the
window, so reading an F1 file picks up the F2 companion when present.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .errors import DataError
from .geometry import Window
from .patterns import Observation

log = logging.getLogger(__name__)

_AXES = "xyzw"


def _axis_names(d: int) -> list[str]:
    return list(_AXES[:d]) if d <= len(_AXES) else [str(k) for k in range(d)]


def f1_header(d: int) -> list[str]:
    ax = _axis_names(d)
    return [f"site_{a}" for a in ax] + [f"disp_{a}" for a in ax]


def f2_header(d: int) -> list[str]:
    return _axis_names(d)


def stem_of(path) -> Path:
    p = Path(path)
    for suffix in (".f1.csv", ".f2.csv", ".json", ".csv"):
        if p.name.endswith(suffix):
            return p.with_name(p.name[: -len(suffix)])
    return p


def _fmt(v: float) -> str:
    return repr(float(v))


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def write_replicate(stem, f1: Observation, f2: Observation, sidecar: dict) -> list[Path]:
    """Write both frameworks and the sidecar; returns the written paths."""
    stem = Path(stem)
    d = f2.dimension
    p1 = stem.with_name(stem.name + ".f1.csv")
    p2 = stem.with_name(stem.name + ".f2.csv")
    pj = stem.with_name(stem.name + ".json")
    write_table(p1, f1_header(d), np.hstack([f1.sites, f1.displacements]))
    write_table(p2, f2_header(d), f2.points)
    meta = {"window": f2.window.to_dict(), "shift": f2.shift.tolist(),
            "n_pairs": len(f1.sites), "n_points": len(f2.points), **sidecar}
    with open(pj, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return [p1, p2, pj]


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Parse a header-plus-floats CSV; errors name the offending line."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise DataError(f"{path}: empty file", 1) from None
        header = [h.strip() for h in header]
        rows = []
        for row in rd:
            line = rd.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: expected {len(header)} fields, found {len(row)}", line)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"{path}: non-numeric value in {row}", line) from None
    arr = np.asarray(rows, dtype=float).reshape(-1, len(header))
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(arr), axis=1))[0])
        raise DataError(f"{path}: non-finite value", bad + 2)
    return header, arr


def read_sidecar(path) -> dict:
    pj = stem_of(path).with_name(stem_of(path).name + ".json")
    if not pj.exists():
        raise DataError(f"missing sidecar {pj}")
    try:
        with open(pj) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{pj}: {exc.msg}", exc.lineno) from exc
    for key in ("window", "shift"):
        if key not in meta:
            raise DataError(f"{pj}: sidecar lacks the {key!r} key")
    return meta


def framework_of(header: list[str]) -> str:
    if header and all(h.startswith(("site_", "disp_")) for h in header):
        return "F1"
    return "F2"


def read_observation(path, framework: str | None = None) -> tuple[Observation, dict]:
    """Load an F1 or F2 pattern file (framework inferred from the header)."""
    header, arr = read_table(path)
    meta = read_sidecar(path)
    window = Window.from_dict(meta["window"])
    d = window.dimension
    fw = framework_of(header)
    if framework is not None and framework != fw:
        raise DataError(f"{path}: columns {header} do not match framework {framework}", 1)
    expect = f1_header(d) if fw == "F1" else f2_header(d)
    if header != expect:
        raise DataError(f"{path}: header {header} should be {expect}", 1)
    try:
        if fw == "F2":
            return Observation("F2", window, meta["shift"], arr), meta
        sites, disp = arr[:, :d], arr[:, d:]
        companion = stem_of(path).with_name(stem_of(path).name + ".f2.csv")
        if companion.exists():
            _, points = read_table(companion)
        else:
            log.warning("%s: no F2 companion; neighbours with sites outside the window "
                        "are missing", path)
            points = sites + disp
        return Observation("F1", window, meta["shift"], points, sites, disp), meta
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
