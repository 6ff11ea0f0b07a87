"""Flat key/value episode configuration.

A config file is a flat YAML mapping whose keys are episode field names;
channel, cost and trace-synthesis fields sit at the top level next to the
episode fields. Unknown keys are rejected.
"""

from dataclasses import fields, replace

import yaml

from .engine import EpisodeConfig
from .phy import ChannelConfig
from .trace import SynthesisConfig

EPISODE_KEYS = tuple(f.name for f in fields(EpisodeConfig) if f.name not in ("channel", "costs", "synthesis"))
CHANNEL_KEYS = tuple(f.name for f in fields(ChannelConfig))
COST_KEYS = ("c_t", "c_m", "c_c", "cost_fraction")
SYNTHESIS_KEYS = tuple(f.name for f in fields(SynthesisConfig))
ALL_KEYS = EPISODE_KEYS + CHANNEL_KEYS + COST_KEYS + SYNTHESIS_KEYS

# Defaults the published setup leaves open; flagged in --help.
ASSUMED = {
    "bandwidth": "10 MHz",
    "content_bits": "1e6 bits",
    "w_t": "0.5",
    "d2d_max": "80 m",
    "alpha": "8",
    "path_loss_exp": "3",
    "enb_distance": "500 m from the OffSN centre",
    "cost_fraction": "0.05",
    "tie_length": "100 m",
    "duration_scale": "5 s",
}

_INT_KEYS = {"n_users", "seed"}


def _coerce(key, value):
    if key == "utility_form":
        return str(value)
    if key == "cost_fraction" and value is None:
        return None
    if key in _INT_KEYS:
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"{key} must be an integer, got {value}")
        return int(value)
    return float(value)


def apply_overrides(config, values):
    """Return ``config`` with flat ``{key: value}`` overrides applied."""
    unknown = sorted(set(values) - set(ALL_KEYS))
    if unknown:
        raise KeyError(f"unknown config keys: {', '.join(unknown)}")
    ep, ch, co, sy = {}, {}, {}, {}
    for key, raw in values.items():
        val = _coerce(key, raw)
        if key in CHANNEL_KEYS:
            ch[key] = val
        elif key in COST_KEYS:
            co["fraction" if key == "cost_fraction" else key] = val
        elif key in SYNTHESIS_KEYS:
            sy[key] = val
        else:
            ep[key] = val
    return replace(
        config,
        channel=replace(config.channel, **ch),
        costs=replace(config.costs, **co),
        synthesis=replace(config.synthesis, **sy),
        **ep,
    )


def load_config(path, base=None, extra_keys=()):
    """Read a flat YAML config. Returns ``(EpisodeConfig, extras)`` where
    ``extras`` holds any of ``extra_keys`` found in the file."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a flat key/value mapping")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ValueError(f"{path}: nested sections are not allowed ({', '.join(nested)})")
    extras = {k: data.pop(k) for k in list(data) if k in extra_keys}
    return apply_overrides(base or EpisodeConfig(), data), extras


def flatten(config):
    """Inverse of :func:`apply_overrides` on a default config."""
    out = {k: getattr(config, k) for k in EPISODE_KEYS}
    out.update({k: getattr(config.channel, k) for k in CHANNEL_KEYS})
    out.update({"c_t": config.costs.c_t, "c_m": config.costs.c_m, "c_c": config.costs.c_c})
    out["cost_fraction"] = config.costs.fraction
    out.update({k: getattr(config.synthesis, k) for k in SYNTHESIS_KEYS})
    return out
