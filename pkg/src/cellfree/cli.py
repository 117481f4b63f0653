"""Batch experiment runner.

Usage::

    cellfree-se --config exp.yaml --out results/ [--seed 1] [--workers 4]
                [--levels 3 4] [--schemes mr] [-v]

Writes ``rows.csv`` (one row per sweep point, drop, UE, level and scheme),
``summary.json`` (mean, sum and percentile SE per cell) and ``cdf.csv`` into
the output directory. The worker count comes from ``--workers``, then the
config, then ``$CELLFREE_WORKERS``, then 1. Tasks are keyed by (sweep point, drop) and reduced in that
order, so outputs do not depend on scheduling.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import report
from .config import LEVELS, SCHEMES, load_config, with_overrides
from .errors import CellFreeError, InvalidConfigError
from .scenario import run_drop

log = logging.getLogger("cellfree")

ENV_WORKERS = "CELLFREE_WORKERS"


def _task(args):
    cfg, point_index, coords, drop = args
    point = cfg.point(coords)
    cells = run_drop(cfg, point, cfg.seed, drop, point_index)
    return report.rows_from_cells(point_index, tuple(coords.items()), drop, cells, point.K)


def run_experiment(cfg, out_dir=None):
    """Execute every (sweep point, drop) task; optionally write the three output files.

    Returns ``(rows, summary)``.
    """
    grid = cfg.grid()
    workers = cfg.workers or 1
    tasks = [(cfg, p, coords, d) for p, coords in enumerate(grid) for d in range(cfg.drops)]
    log.info("running %d tasks on %d worker(s)", len(tasks), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = []
        for i, t in enumerate(tasks):
            results.append(_task(t))
            log.debug("task %d/%d done", i + 1, len(tasks))
    rows, errors = [], []
    for r, e in results:
        rows.extend(r)
        errors.extend(e)
    for e in errors:
        log.warning("point %d drop %d level %d %s failed: %s", e["point"], e["drop"], e["level"],
                    e["scheme"], e["message"])
    summary = report.summarize(rows, errors, grid, cfg.drops)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_rows(out / "rows.csv", rows, cfg.sweep_keys)
        report.write_summary(out / "summary.json", summary)
        report.write_cdf(out / "cdf.csv", rows)
    return rows, summary


def _env_workers():
    value = os.environ.get(ENV_WORKERS)
    if value is None:
        return None
    try:
        return int(value)
    except ValueError as exc:
        raise InvalidConfigError(f"{ENV_WORKERS} must be an integer, got {value!r}") from exc


def build_parser():
    p = argparse.ArgumentParser(prog="cellfree-se",
                                description="Uplink SE of cell-free massive MIMO with multi-antenna UEs.")
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override simulation.seed")
    p.add_argument("--workers", type=int, help=f"worker processes (default: config, then ${ENV_WORKERS}, then 1)")
    p.add_argument("--levels", type=int, nargs="+", choices=LEVELS, help="restrict levels")
    p.add_argument("--schemes", nargs="+", choices=SCHEMES, help="restrict scheme families")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        workers = args.workers
        if workers is None and cfg.workers is None:
            workers = _env_workers()
        cfg = with_overrides(cfg, seed=args.seed, workers=workers, levels=args.levels,
                             schemes=args.schemes)
        run_experiment(cfg, args.out)
    except CellFreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
