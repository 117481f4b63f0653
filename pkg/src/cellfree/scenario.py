"""One network drop at one sweep point, from configuration to per-UE SE.

Geometry, shadowing and eigenbases depend only on the drop index, so every
sweep point sees the same layout (common random numbers). Channel, noise and
pilot draws are keyed by both the drop index and the sweep point.
"""

import numpy as np

from . import closed_form, se_engine
from .channel import draw_stats
from .errors import NumericalError
from .estimation import assign_pilots
from .geometry import drop_network, large_scale_map, sample_shadowing
from .seeding import stream
from .system import make_context


def build_context(point, seed, drop_index, point_index=0):
    """:class:`cellfree.system.DropContext` for one drop of a resolved :class:`PointConfig`."""
    drop = drop_network(point.M, point.K, point.area_side, stream(seed, "drop", drop_index),
                        point.height_offset)
    shadow = None
    if point.shadowing:
        shadow = sample_shadowing(drop, point.delta_f, point.sigma_sf_db, point.d_dc,
                                  stream(seed, "shadowing", drop_index))
    beta = large_scale_map(drop, shadow).beta
    stats = draw_stats(beta, point.L, point.N, stream(seed, "eigenbasis", drop_index), point.model)
    plan = assign_pilots(point.K, point.N, point.tau_p, point.policy,
                         rng=stream(seed, "pilots", drop_index, point_index),
                         pilot_power=point.ue_power_w, tau_c=point.tau_c)
    return make_context(stats, plan, point.sigma2, powers=point.ue_power_w, tau_c=point.tau_c)


def _closed_mr(ctx, levels, lsfd_mode):
    out = {}
    try:
        terms = closed_form.compute_terms(ctx)
    except NumericalError as exc:
        return {(lv, "mr"): exc for lv in levels}
    for lv in levels:
        try:
            if lv == 3:
                se = closed_form.se_level3_closed(ctx, terms, lsfd_mode)
            else:
                se = closed_form.se_level2_closed(ctx, terms)
            out[(lv, "mr")] = se_engine.SEReport(lv, "MR", se, np.full(ctx.K, np.nan), 0, ctx.prelog)
        except NumericalError as exc:
            out[(lv, "mr")] = exc
    return out


def run_drop(cfg, point, seed, drop_index, point_index=0):
    """All requested (level, scheme) cells for one drop: ``{(level, family): SEReport | NumericalError}``."""
    try:
        ctx = build_context(point, seed, drop_index, point_index)
    except NumericalError as exc:
        return {(lv, s): exc for s in cfg.schemes for lv in cfg.levels}
    rng = stream(seed, "channel", drop_index, point_index)
    noise = stream(seed, "noise", drop_index, point_index)
    levels = set(cfg.levels)
    out = {}
    closed = set()
    if "mr" in cfg.schemes and cfg.mr_evaluation == "closed":
        closed = levels & {2, 3}
        out.update(_closed_mr(ctx, sorted(closed), cfg.lsfd))
    for family in cfg.schemes:
        todo = levels - closed if family == "mr" else levels
        if todo:
            out.update(se_engine.se_all_mc(ctx, sorted(todo), [family], cfg.trials,
                                           cfg.moment_trials, rng, noise, lsfd_mode=cfg.lsfd))
    return out
