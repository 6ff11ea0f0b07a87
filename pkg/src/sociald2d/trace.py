"""Encounter histories: parsing, synthesis and per-pair contact statistics.

Trace CSV lines are ``user_a,user_b,start_s,duration_s``. A header line is
allowed and recognised by a non-numeric first field.
"""

import io
import math
from dataclasses import dataclass

import numpy as np


class TraceParseError(ValueError):
    """Malformed trace line; ``lineno`` is 1-based."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class EncounterRecord:
    user_a: int
    user_b: int
    start: float
    duration: float

    def __post_init__(self):
        if self.user_a == self.user_b:
            raise ValueError(f"self-loop encounter for user {self.user_a}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not self.start >= 0:
            raise ValueError(f"start must be nonnegative, got {self.start}")

    @property
    def pair(self):
        return pair_key(self.user_a, self.user_b)


@dataclass(frozen=True)
class ContactStats:
    pair: tuple
    n_encounters: int
    mean_duration: float
    irregularity: float


def pair_key(a, b):
    """Canonical unordered pair (smaller id first)."""
    return (a, b) if a < b else (b, a)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_trace(source):
    """Parse trace CSV from bytes, text or a binary/text stream."""
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data

    records = []
    for lineno, raw in enumerate(io.StringIO(text, newline=None), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if lineno == 1 and not _is_number(fields[0]):
            continue
        if len(fields) != 4:
            raise TraceParseError(lineno, f"expected 4 fields, got {len(fields)}")
        try:
            user_a, user_b = int(fields[0]), int(fields[1])
        except ValueError:
            raise TraceParseError(lineno, "user ids must be integers") from None
        try:
            start, duration = float(fields[2]), float(fields[3])
        except ValueError:
            raise TraceParseError(lineno, "start and duration must be numeric") from None
        if not (math.isfinite(start) and math.isfinite(duration)):
            raise TraceParseError(lineno, "non-finite start or duration")
        if user_a == user_b:
            raise TraceParseError(lineno, f"self-loop pair ({user_a},{user_b})")
        if duration <= 0:
            raise TraceParseError(lineno, f"duration must be positive, got {duration}")
        if start < 0:
            raise TraceParseError(lineno, f"start must be nonnegative, got {start}")
        records.append(EncounterRecord(user_a, user_b, start, duration))
    return records


def format_trace(records):
    """Inverse of :func:`parse_trace` (no header)."""
    return "".join(f"{r.user_a},{r.user_b},{r.start!r},{r.duration!r}\n" for r in records)


def contact_stats(records):
    """Reduce records to {pair: ContactStats} with population variance."""
    durations = {}
    for rec in records:
        durations.setdefault(rec.pair, []).append(rec.duration)
    stats = {}
    for pair in sorted(durations):
        # sorted so the float reduction does not depend on record order
        x = np.sort(np.asarray(durations[pair], dtype=np.float64))
        mean = math.fsum(x) / x.size
        # equal durations give exactly zero, not rounding noise around it
        irregularity = 0.0 if x[0] == x[-1] else math.fsum((x - mean) ** 2) / x.size
        stats[pair] = ContactStats(pair, int(x.size), mean, irregularity)
    return stats


@dataclass(frozen=True)
class SynthesisConfig:
    """Knobs for synthetic encounter histories.

    Tie strength between two users decays with their distance,
    ``s = exp(-d / tie_length)``. A pair meets ``Poisson(mean_encounters * s)``
    times; each contact lasts ``Gamma(shape, mean / shape)`` seconds where the
    shape ``1 + shape_gain * s`` and mean ``duration_scale * (duration_floor + s)``
    both grow with tie strength, so close friends meet often and regularly.
    """

    tie_length: float = 100.0
    mean_encounters: float = 20.0
    shape_gain: float = 4.0
    duration_scale: float = 5.0
    duration_floor: float = 0.1
    horizon: float = 86400.0


def _pairwise_distances(positions):
    diff = positions[:, None, :] - positions[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def uniform_disk(n, radius, rng):
    """``n`` points uniform in a disk centred at the origin."""
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def synthesize_encounters(positions, rng, params=None):
    """Array form of :func:`synthesize_trace`.

    Returns ``(user_a, user_b, start, duration)`` arrays, one entry per
    encounter, grouped by pair in ``triu`` order.
    """
    params = params or SynthesisConfig()
    n_users = positions.shape[0]
    ia, ib = np.triu_indices(n_users, k=1)
    dist = _pairwise_distances(positions)[ia, ib]
    strength = np.exp(-dist / params.tie_length)
    counts = rng.poisson(params.mean_encounters * strength)
    shape = 1.0 + params.shape_gain * strength
    mean = params.duration_scale * (params.duration_floor + strength)

    pair_idx = np.repeat(np.arange(ia.size), counts)
    k = shape[pair_idx]
    durations = rng.gamma(k, mean[pair_idx] / k)
    starts = rng.uniform(0.0, params.horizon, pair_idx.size)
    # exact zeros are measure-zero but would violate duration > 0
    durations = np.maximum(durations, np.finfo(float).tiny)
    return ia[pair_idx], ib[pair_idx], starts, durations


def synthesize_trace(n_users, placement, rng, params=None):
    """Generate Gamma-duration encounter records for ``n_users``.

    ``placement`` is either an (n, 2) array of positions or a callable
    ``placement(n, rng)`` returning one. Users are labelled ``0..n-1``.
    """
    if n_users < 2:
        raise ValueError(f"need at least 2 users, got {n_users}")
    positions = placement(n_users, rng) if callable(placement) else np.asarray(placement, dtype=np.float64)
    if positions.shape != (n_users, 2):
        raise ValueError(f"positions must have shape ({n_users}, 2), got {positions.shape}")
    ua, ub, starts, durations = synthesize_encounters(positions, rng, params)
    return [
        EncounterRecord(int(a), int(b), float(s), float(d))
        for a, b, s, d in zip(ua, ub, starts, durations)
    ]


def pair_moments(user_a, user_b, durations, n_users):
    """Vectorised contact statistics over integer-labelled users.

    Returns ``(a, b, n, mean, irregularity)`` arrays for every pair with at
    least one encounter, sorted by ``(a, b)``.
    """
    lo = np.minimum(user_a, user_b)
    hi = np.maximum(user_a, user_b)
    code = lo.astype(np.int64) * n_users + hi
    uniq, inv, n = np.unique(code, return_inverse=True, return_counts=True)
    mean = np.bincount(inv, weights=durations, minlength=uniq.size) / n
    irregularity = np.bincount(inv, weights=(durations - mean[inv]) ** 2, minlength=uniq.size) / n
    return uniq // n_users, uniq % n_users, n, mean, irregularity


def parse_positions(source):
    """Parse ``user_id,x_m,y_m`` lines into {user_id: (x, y)}."""
    if isinstance(source, (bytes, bytearray)):
        source = bytes(source).decode("utf-8")
    elif not isinstance(source, str):
        data = source.read()
        source = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    out = {}
    for lineno, raw in enumerate(io.StringIO(source, newline=None), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if lineno == 1 and not _is_number(fields[0]):
            continue
        if len(fields) != 3:
            raise TraceParseError(lineno, f"expected 3 fields, got {len(fields)}")
        try:
            out[int(fields[0])] = (float(fields[1]), float(fields[2]))
        except ValueError:
            raise TraceParseError(lineno, "malformed position") from None
    return out
