"""Link budget: distance path loss with Rayleigh fading, and the three
spectral-efficiency formulas (cellular with D2D interference, D2D with eNB
and D2D interference, interference-free cellular).

Powers are linear milliwatts throughout; convert with :func:`dbm_to_linear`.
"""

from dataclasses import dataclass, field

import numpy as np


def dbm_to_linear(x):
    """dBm -> mW."""
    return np.power(10.0, np.divide(x, 10.0))


def db_to_linear(x):
    """dB -> power ratio."""
    return dbm_to_linear(x)


def linear_to_dbm(x):
    return 10.0 * np.log10(x)


linear_to_db = linear_to_dbm


@dataclass(frozen=True)
class ChannelConfig:
    path_loss_exp: float = 3.0
    p_enb: float = 46.0  # dBm
    p_ue: float = 23.0  # dBm
    gain_enb: float = 14.0  # dBi
    gain_ue: float = 0.0  # dBi
    noise_density: float = -174.0  # dBm/Hz
    noise_figure: float = 9.0  # dB
    bandwidth: float = 10e6  # Hz

    def __post_init__(self):
        if not 2.0 <= self.path_loss_exp <= 5.0:
            raise ValueError(f"path_loss_exp must lie in [2, 5], got {self.path_loss_exp}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    @property
    def enb_eirp(self):
        """eNB transmit power times antenna gain, mW."""
        return dbm_to_linear(self.p_enb + self.gain_enb)

    @property
    def ue_eirp(self):
        return dbm_to_linear(self.p_ue + self.gain_ue)

    @property
    def noise_power(self):
        """Receiver noise floor over the whole bandwidth, mW."""
        return dbm_to_linear(self.noise_density + 10.0 * np.log10(self.bandwidth) + self.noise_figure)


@dataclass(frozen=True)
class LinkRealization:
    distance: float
    fading_power: float
    gain: float


@dataclass
class InterferenceTopology:
    """Which transmissions hear each other.

    ``cd_flags[(c, d)]`` is 1 when D2D pair ``d`` interferes with cellular
    user ``c``; ``dd_flags[(d, d2)]`` likewise between D2D pairs.
    """

    cd_flags: dict = field(default_factory=dict)
    dd_flags: dict = field(default_factory=dict)

    def __post_init__(self):
        for d, d2 in list(self.dd_flags):
            if d == d2:
                raise ValueError(f"D2D pair {d} cannot interfere with itself")
        for (d, d2), flag in list(self.dd_flags.items()):
            other = self.dd_flags.setdefault((d2, d), flag)
            if other != flag:
                raise ValueError(f"asymmetric D2D flags for pair ({d}, {d2})")

    @classmethod
    def shared_subchannel(cls, cellular_users, d2d_pairs):
        """Everyone on one subchannel: all flags 1 (the intra-OffSN rule)."""
        cd = {(c, d): 1 for c in cellular_users for d in d2d_pairs}
        dd = {(d, d2): 1 for d in d2d_pairs for d2 in d2d_pairs if d != d2}
        return cls(cd, dd)

    def cd(self, c, d):
        return self.cd_flags.get((c, d), 0)

    def dd(self, d, d2):
        return self.dd_flags.get((d, d2), 0)


def rayleigh_power(rng, size=None):
    """|h0|^2 for h0 ~ CN(0, 1): unit-mean exponential."""
    return rng.exponential(1.0, size)


def channel_gain(distance, eta, rng):
    """One fading realization of ``d^-eta * |h0|^2``."""
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    fading = float(rayleigh_power(rng))
    return LinkRealization(distance, fading, distance ** (-eta) * fading)


def channel_gains(distance, eta, rng):
    """Vectorised :func:`channel_gain` returning just the gains."""
    distance = np.asarray(distance, dtype=np.float64)
    if np.any(~(distance > 0)):
        raise ValueError("distances must be positive")
    return distance ** (-eta) * rayleigh_power(rng, distance.shape)


def _check_noise(noise):
    if isinstance(noise, float):
        if not noise > 0:
            raise ValueError("noise power must be positive")
    elif np.any(~(np.asarray(noise) > 0)):
        raise ValueError("noise power must be positive")


def rate_cellular(signal, d2d_interference, noise):
    """Spectral efficiency of an eNB downlink sharing its subchannel with D2D."""
    _check_noise(noise)
    return np.log2(1.0 + signal / (d2d_interference + noise))


def rate_d2d(signal, enb_interference, other_d2d_interference, noise):
    """Spectral efficiency of a D2D link hearing the eNB and other D2D pairs."""
    _check_noise(noise)
    return np.log2(1.0 + signal / (enb_interference + other_d2d_interference + noise))


def rate_clean(signal, noise):
    """Interference-free eNB spectral efficiency."""
    _check_noise(noise)
    return np.log2(1.0 + signal / noise)
