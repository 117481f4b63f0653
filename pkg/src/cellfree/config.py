"""Experiment configuration: YAML schema, defaults and validation.

A config file has up to seven sections; every key is optional and unknown
keys are rejected::

    network:    {M: 40, K: 20, L: 4, N: 2, area_side: 1000.0, height_offset: 11.0}
    channel:    {model: weichselberger}          # or kronecker, uncorrelated
    pilots:     {tau_c: 200, tau_p: KN, policy: round_robin}
    power:      {ue_power_mw: 200.0, noise_dbm: -94.0, bandwidth_hz: 2.0e7}
    shadowing:  {enabled: true, delta_f: 0.5, sigma_sf_db: 8.0, d_dc: 100.0}
    simulation: {levels: [1, 2, 3, 4], schemes: [mmse, mr], lsfd: optimal,
                 mr_evaluation: mc, drops: 50, trials: 20000,
                 moment_trials: 10000, seed: 0, workers: 1}
    sweep:      {N: [1, 2, 4, 6]}

``tau_p`` is an integer or one of the expressions ``KN`` and ``KN/<d>``,
evaluated per sweep point. ``sweep`` maps parameter names to lists; the grid
is their Cartesian product in file order. ``workers`` may be omitted, in
which case the runner falls back to ``$CELLFREE_WORKERS`` and then to 1.
``noise_dbm`` is the total noise power over the band, so ``bandwidth_hz`` is
recorded but does not enter the computation.
"""

import copy
import itertools
import re
from dataclasses import dataclass, field

import yaml

from .errors import InvalidConfigError

MODELS = ("weichselberger", "kronecker", "uncorrelated")
SCHEMES = ("mmse", "mr")
LEVELS = (1, 2, 3, 4)

DEFAULTS = {
    "network": {"M": 40, "K": 20, "L": 4, "N": 2, "area_side": 1000.0, "height_offset": 11.0},
    "channel": {"model": "weichselberger"},
    "pilots": {"tau_c": 200, "tau_p": "KN", "policy": "round_robin"},
    "power": {"ue_power_mw": 200.0, "noise_dbm": -94.0, "bandwidth_hz": 2.0e7},
    "shadowing": {"enabled": True, "delta_f": 0.5, "sigma_sf_db": 8.0, "d_dc": 100.0},
    "simulation": {"levels": [1, 2, 3, 4], "schemes": ["mmse", "mr"], "lsfd": "optimal",
                   "mr_evaluation": "mc", "drops": 50, "trials": 20000,
                   "moment_trials": 10000, "seed": 0, "workers": None},
    "sweep": {},
}

# sweepable parameter -> (section, key)
SWEEPABLE = {
    "M": ("network", "M"), "K": ("network", "K"), "L": ("network", "L"), "N": ("network", "N"),
    "tau_p": ("pilots", "tau_p"), "model": ("channel", "model"),
    "ue_power_mw": ("power", "ue_power_mw"),
}

_TAU_EXPR = re.compile(r"^\s*KN\s*(?:/\s*(\d+))?\s*$")


@dataclass(frozen=True)
class PointConfig:
    """Fully resolved parameters for one sweep point."""

    M: int
    K: int
    L: int
    N: int
    area_side: float
    height_offset: float
    model: str
    tau_c: int
    tau_p: int
    policy: str
    ue_power_mw: float
    noise_dbm: float
    shadowing: bool
    delta_f: float
    sigma_sf_db: float
    d_dc: float

    @property
    def sigma2(self):
        """Noise power in watts."""
        return 10.0 ** ((self.noise_dbm - 30.0) / 10.0)

    @property
    def ue_power_w(self):
        return self.ue_power_mw / 1000.0


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    levels: tuple
    schemes: tuple
    lsfd: str
    mr_evaluation: str
    drops: int
    trials: int
    moment_trials: int
    seed: int
    workers: object  # int or None
    sweep_keys: tuple = field(default=())
    sweep_values: tuple = field(default=())

    def grid(self):
        """Sweep coordinates as a list of dicts, one per point (a single empty dict without a sweep)."""
        return [dict(zip(self.sweep_keys, combo)) for combo in itertools.product(*self.sweep_values)]

    def point(self, coords):
        """Resolve the parameters at one sweep coordinate."""
        raw = copy.deepcopy(self.raw)
        for name, value in coords.items():
            section, key = SWEEPABLE[name]
            raw[section][key] = value
        return _resolve_point(raw)


def _merge(user):
    if user is None:
        user = {}
    if not isinstance(user, dict):
        raise InvalidConfigError("config root must be a mapping")
    out = copy.deepcopy(DEFAULTS)
    for section, body in user.items():
        if section not in DEFAULTS:
            raise InvalidConfigError(f"unknown config section {section!r}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise InvalidConfigError(f"section {section!r} must be a mapping")
        if section == "sweep":
            for key in body:
                if key not in SWEEPABLE:
                    raise InvalidConfigError(f"parameter {key!r} cannot be swept")
            out["sweep"] = dict(body)
            continue
        for key, value in body.items():
            if key not in DEFAULTS[section]:
                raise InvalidConfigError(f"unknown key {section}.{key}")
            out[section][key] = value
    return out


def _int(value, name, low=1):
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidConfigError(f"{name} must be an integer, got {value!r}")
    if value < low:
        raise InvalidConfigError(f"{name} must be >= {low}, got {value}")
    return value


def _float(value, name):
    # PyYAML reads "2.0e7" (no exponent sign) as a string, so accept numeric strings
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def resolve_tau_p(value, K, N):
    """Integer ``tau_p`` from an integer or a ``KN`` / ``KN/d`` expression."""
    if isinstance(value, str):
        match = _TAU_EXPR.match(value)
        if not match:
            raise InvalidConfigError(f"tau_p expression {value!r} not understood")
        div = int(match.group(1) or 1)
        if div < 1 or (K * N) % div:
            raise InvalidConfigError(f"tau_p={value} does not give an integer for K={K}, N={N}")
        return K * N // div
    return _int(value, "tau_p")


def _resolve_point(raw):
    net, ch, pil, pw, sh = (raw[s] for s in ("network", "channel", "pilots", "power", "shadowing"))
    M, K = _int(net["M"], "M"), _int(net["K"], "K")
    L, N = _int(net["L"], "L"), _int(net["N"], "N")
    area = _float(net["area_side"], "area_side")
    if area <= 0:
        raise InvalidConfigError("area_side must be positive")
    height = _float(net["height_offset"], "height_offset")
    if height < 0:
        raise InvalidConfigError("height_offset must be nonnegative")
    if ch["model"] not in MODELS:
        raise InvalidConfigError(f"unknown channel model {ch['model']!r}")
    tau_c = _int(pil["tau_c"], "tau_c")
    tau_p = resolve_tau_p(pil["tau_p"], K, N)
    if tau_p > tau_c:
        raise InvalidConfigError(f"tau_p={tau_p} exceeds tau_c={tau_c}")
    if tau_p % N:
        raise InvalidConfigError(f"tau_p={tau_p} must be a multiple of N={N}")
    if pil["policy"] not in ("round_robin", "random"):
        raise InvalidConfigError(f"unknown pilot policy {pil['policy']!r}")
    power = _float(pw["ue_power_mw"], "ue_power_mw")
    if power <= 0:
        raise InvalidConfigError("ue_power_mw must be positive")
    if _float(pw["bandwidth_hz"], "bandwidth_hz") <= 0:
        raise InvalidConfigError("bandwidth_hz must be positive")
    if not isinstance(sh["enabled"], bool):
        raise InvalidConfigError("shadowing.enabled must be true or false")
    delta_f = _float(sh["delta_f"], "delta_f")
    if not 0.0 <= delta_f <= 1.0:
        raise InvalidConfigError("delta_f must lie in [0, 1]")
    d_dc = _float(sh["d_dc"], "d_dc")
    if d_dc <= 0:
        raise InvalidConfigError("d_dc must be positive")
    sigma_sf = _float(sh["sigma_sf_db"], "sigma_sf_db")
    if sigma_sf < 0:
        raise InvalidConfigError("sigma_sf_db must be nonnegative")
    return PointConfig(M, K, L, N, area, height, ch["model"], tau_c, tau_p, pil["policy"], power,
                       _float(pw["noise_dbm"], "noise_dbm"), sh["enabled"], delta_f, sigma_sf, d_dc)


def parse_config(data):
    """Validate a config mapping (already loaded from YAML) into :class:`ExperimentConfig`."""
    raw = _merge(data)
    sim = raw["simulation"]
    levels = sim["levels"]
    if not isinstance(levels, list) or not levels or any(lv not in LEVELS for lv in levels):
        raise InvalidConfigError(f"levels must be a nonempty subset of {list(LEVELS)}")
    schemes = sim["schemes"]
    if not isinstance(schemes, list) or not schemes or any(s not in SCHEMES for s in schemes):
        raise InvalidConfigError(f"schemes must be a nonempty subset of {list(SCHEMES)}")
    if sim["lsfd"] not in ("optimal", "uniform"):
        raise InvalidConfigError(f"unknown lsfd mode {sim['lsfd']!r}")
    if sim["mr_evaluation"] not in ("mc", "closed"):
        raise InvalidConfigError(f"mr_evaluation must be 'mc' or 'closed', not {sim['mr_evaluation']!r}")
    drops = _int(sim["drops"], "drops")
    trials = _int(sim["trials"], "trials")
    moment_trials = _int(sim["moment_trials"], "moment_trials", low=2)
    seed = _int(sim["seed"], "seed", low=0)
    workers = None if sim["workers"] is None else _int(sim["workers"], "workers")
    keys, values = [], []
    for key, vals in raw["sweep"].items():
        if not isinstance(vals, list) or not vals:
            raise InvalidConfigError(f"sweep.{key} must be a nonempty list")
        keys.append(key)
        values.append(tuple(vals))
    cfg = ExperimentConfig(raw, tuple(sorted(set(levels))), tuple(dict.fromkeys(schemes)),
                           sim["lsfd"], sim["mr_evaluation"], drops, trials, moment_trials, seed,
                           workers, tuple(keys), tuple(values))
    for coords in cfg.grid():
        cfg.point(coords)  # validate every point up front
    return cfg


def load_config(path):
    """Read and validate a YAML config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(data)


def with_overrides(cfg, seed=None, workers=None, levels=None, schemes=None):
    """Copy of ``cfg`` with command-line overrides applied and revalidated."""
    raw = copy.deepcopy(cfg.raw)
    sim = raw["simulation"]
    if seed is not None:
        sim["seed"] = seed
    if workers is not None:
        sim["workers"] = workers
    if levels is not None:
        sim["levels"] = list(levels)
    if schemes is not None:
        sim["schemes"] = list(schemes)
    return parse_config(raw)
