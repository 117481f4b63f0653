"""Result rows, percentile summaries and CDF tables.

Floats are written in one fixed format and JSON keys are sorted, so
identical results give byte-identical files.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError

FLOAT_FMT = "{:.12g}"


@dataclass(frozen=True)
class ResultRow:
    point: int
    coords: tuple  # ((name, value), ...) in sweep order
    drop: int
    ue: int
    level: int
    scheme: str
    se: float      # nan for a failed cell
    stderr: float  # nan when not applicable
    status: str    # "ok" or "error"


def rows_from_cells(point, coords, drop, cells, k_count):
    """Flatten ``{(level, family): SEReport | Exception}`` into rows, ordered by level then scheme.

    A failed cell still yields one row per UE, with ``se = nan`` and status ``error``.
    """
    rows, errors = [], []
    for (level, family) in sorted(cells, key=lambda c: (c[0], c[1])):
        cell = cells[(level, family)]
        if isinstance(cell, Exception):
            errors.append({"point": point, "drop": drop, "level": level, "scheme": family,
                           "message": str(cell)})
            rows.extend(ResultRow(point, coords, drop, ue, level, family, math.nan, math.nan,
                                  "error") for ue in range(k_count))
            continue
        for ue, (se, err) in enumerate(zip(cell.se, cell.stderr)):
            rows.append(ResultRow(point, coords, drop, ue, level, family, float(se), float(err),
                                  "ok"))
    return rows, errors


def _fmt(x):
    if isinstance(x, float):
        return "nan" if math.isnan(x) else FLOAT_FMT.format(x)
    return str(x)


def write_rows(path, rows, sweep_keys):
    header = ["point", *sweep_keys, "drop", "ue", "level", "scheme", "se", "stderr", "status"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            coords = dict(r.coords)
            w.writerow([r.point, *(_fmt(coords[k]) for k in sweep_keys), r.drop, r.ue, r.level,
                        r.scheme, _fmt(r.se), _fmt(r.stderr), r.status])


def percentile_summary(values, q):
    """Empirical ``q``-quantile with linear interpolation; ``q = 0.2`` is the 80%-likely SE."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise InvalidConfigError("percentile of an empty set")
    if not 0.0 <= q <= 1.0:
        raise InvalidConfigError("q must lie in [0, 1]")
    return float(np.quantile(values, q, method="linear"))


def empirical_cdf(values):
    """Sorted values and their CDF levels ``i/n``; the last level is exactly 1."""
    x = np.sort(np.asarray(values, dtype=float).ravel())
    if x.size == 0:
        raise InvalidConfigError("CDF of an empty set")
    return x, np.arange(1, x.size + 1) / x.size


def _groups(rows):
    out = {}
    for r in rows:
        if r.status == "ok":
            out.setdefault((r.point, r.level, r.scheme), []).append(r)
    return out


def summarize(rows, errors, grid, drops):
    """Per (point, level, scheme): mean SE, mean sum SE over drops and percentiles."""
    cells = []
    for (point, level, scheme), grp in sorted(_groups(rows).items()):
        se = np.array([r.se for r in grp])
        per_drop = {}
        for r in grp:
            per_drop[r.drop] = per_drop.get(r.drop, 0.0) + r.se
        cells.append({
            "point": point,
            "coords": grid[point],
            "level": level,
            "scheme": scheme,
            "drops_ok": len(per_drop),
            "samples": int(se.size),
            "mean_se": float(se.mean()),
            "sum_se": float(np.mean([per_drop[d] for d in sorted(per_drop)])),
            "p20_se": percentile_summary(se, 0.2),
            "p50_se": percentile_summary(se, 0.5),
        })
    return {"drops": drops, "grid": grid, "cells": cells, "errors": errors}


def write_summary(path, summary):
    def clean(obj):
        if isinstance(obj, float):
            return float(FLOAT_FMT.format(obj))
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        return obj

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_cdf(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", "level", "scheme", "se", "cdf"])
        for (point, level, scheme), grp in sorted(_groups(rows).items()):
            x, F = empirical_cdf([r.se for r in grp])
            for xi, fi in zip(x, F):
                w.writerow([point, level, scheme, _fmt(float(xi)), _fmt(float(fi))])
