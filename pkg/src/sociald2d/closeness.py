"""Gamma contact-duration fit and the link closeness metric.

Closeness is the probability that a contact lasts at least ``x_min``, the
time needed to push one content item over the link::

    w = 1 - P(k, x_min / theta)

with ``P`` the regularized lower incomplete gamma function. ``P`` is
evaluated by series / continued fraction (see ``_accel``) to an absolute
error below 1e-10 over shapes 0.5..10 and arguments 0..50.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _accel


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise ValueError(f"shape must be positive and finite, got {self.shape}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    @property
    def mean(self):
        return self.shape * self.scale

    @property
    def variance(self):
        return self.shape * self.scale**2


@dataclass(frozen=True)
class Degenerate:
    """Point mass at ``duration``; what a zero-irregularity pair fits to."""

    duration: float


def fit_gamma(stats):
    """Moment-match a Gamma law to a pair's contact statistics.

    ``stats`` is a :class:`~sociald2d.trace.ContactStats` (or anything with
    ``mean_duration`` and ``irregularity``).
    """
    m = stats.mean_duration
    var = stats.irregularity
    if not m > 0:
        raise ValueError(f"mean contact duration must be positive, got {m}")
    if var <= 0:
        return Degenerate(m)
    return GammaParams(shape=m * m / var, scale=var / m)


def reg_lower_gamma(shape, x):
    """Regularized lower incomplete gamma ``gamma(shape, x) / Gamma(shape)``.

    Accepts scalars or arrays; returns the same kind.
    """
    a = np.asarray(shape, dtype=np.float64)
    xa = np.asarray(x, dtype=np.float64)
    if np.any(~(a > 0)) or np.any(np.isinf(a)):
        raise ValueError("shape must be positive and finite")
    if np.any(~(xa >= 0)):
        raise ValueError("x must be nonnegative")
    out = _accel.reg_lower_gamma_array(a, xa)
    if out.ndim == 0:
        return float(out)
    return out


def closeness(params, x_min):
    """Probability that one contact lasts at least ``x_min`` seconds."""
    if not x_min >= 0:
        raise ValueError(f"x_min must be nonnegative, got {x_min}")
    if isinstance(params, Degenerate):
        return 1.0 if params.duration >= x_min else 0.0
    if x_min == 0:
        return 1.0
    return 1.0 - reg_lower_gamma(params.shape, x_min / params.scale)


def closeness_array(shape, scale, x_min):
    """Vectorised closeness for fitted pairs.

    ``scale <= 0`` (or NaN shape) marks a degenerate pair whose point mass sits
    at ``shape`` interpreted as the mean duration; callers build these with
    :func:`fit_arrays`. ``x_min`` may be ``inf`` (zero link rate) giving w = 0.
    """
    shape = np.asarray(shape, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    x_min = np.asarray(x_min, dtype=np.float64)
    shape, scale, x_min = np.broadcast_arrays(shape, scale, x_min)
    w = np.empty(shape.shape)
    degen = scale <= 0
    if degen.any():
        w[degen] = (shape[degen] >= x_min[degen]).astype(np.float64)
    ok = ~degen
    if ok.any():
        w[ok] = 1.0 - _accel.reg_lower_gamma_array(shape[ok], x_min[ok] / scale[ok])
    return w


def fit_arrays(mean, irregularity):
    """Array moment fit; returns ``(shape, scale)`` with degenerate pairs
    encoded as ``(mean, 0.0)`` for :func:`closeness_array`."""
    mean = np.asarray(mean, dtype=np.float64)
    irregularity = np.asarray(irregularity, dtype=np.float64)
    degen = irregularity <= 0
    safe_var = np.where(degen, 1.0, irregularity)
    shape = np.where(degen, mean, mean * mean / safe_var)
    scale = np.where(degen, 0.0, safe_var / mean)
    return shape, scale


def min_contact_time(content_bits, link_rate):
    """Seconds needed to move ``content_bits`` at ``link_rate`` bit/s."""
    if not content_bits > 0:
        raise ValueError(f"content_bits must be positive, got {content_bits}")
    if not link_rate > 0:
        raise ValueError(f"link_rate must be positive, got {link_rate}")
    return content_bits / link_rate
