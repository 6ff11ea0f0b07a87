"""One offloading episode, end to end.

Stage 1 builds the OffSNs from synthetic encounter histories. Stage 2 walks
users in label order; white-area users are served entirely by the eNB.
Stage 3 serves OffSN users from their OffSN's content-demand process: old
contents go over D2D from the closest-tied holder in range (success with
probability equal to the realized closeness), everything else falls back to
the eNB.

All randomness comes from independent child streams of one
``SeedSequence(seed)``, so a seed fixes the episode completely.
"""

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import _accel
from .closeness import closeness_array, fit_arrays
from .offsn import ClosenessGraph, OffsnPartition, frequent_users, partition_arrays
from .onsn import IbpState, ibp_select, update_prior
from .phy import ChannelConfig, rate_cellular, rate_clean, rate_d2d
from .trace import SynthesisConfig, pair_moments, synthesize_encounters, uniform_disk

UTILITY_FORMS = ("expected", "realized")


@dataclass(frozen=True)
class CostConfig:
    """Per-content costs.

    With ``fraction`` set, each cost is that fraction of the rate it offsets
    (D2D cost of R_d, user payment of R_c, control cost of V_c) and the
    absolute values are ignored.
    """

    c_t: float = 0.0
    c_m: float = 0.0
    c_c: float = 0.0
    fraction: float | None = 0.05

    def __post_init__(self):
        for name in ("c_t", "c_m", "c_c"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.fraction is not None and not self.fraction >= 0:
            raise ValueError("cost fraction must be nonnegative")

    def transmission(self, r_d):
        return self.fraction * r_d if self.fraction is not None else self.c_t

    def payment(self, r_c):
        return self.fraction * r_c if self.fraction is not None else self.c_m

    def control(self, v_c):
        return self.fraction * v_c if self.fraction is not None else self.c_c


@dataclass(frozen=True)
class EpisodeConfig:
    n_users: int = 32
    cell_radius: float = 80.0
    d2d_max: float = 80.0
    alpha: float = 8.0
    w_t: float = 0.5
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    costs: CostConfig = field(default_factory=CostConfig)
    content_bits: float = 1e6
    seed: int = 0
    utility_form: str = "expected"
    enb_distance: float = 500.0
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    frequent_fraction: float = 0.25

    def __post_init__(self):
        if self.n_users < 2:
            raise ValueError(f"n_users must be >= 2, got {self.n_users}")
        if not self.cell_radius > 0:
            raise ValueError("cell_radius must be positive")
        if not self.d2d_max >= 0:
            raise ValueError("d2d_max must be nonnegative")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.w_t >= 0:
            raise ValueError("w_t must be nonnegative")
        if not self.content_bits > 0:
            raise ValueError("content_bits must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.utility_form not in UTILITY_FORMS:
            raise ValueError(f"utility_form must be one of {UTILITY_FORMS}")
        if not self.enb_distance >= 0:
            raise ValueError("enb_distance must be nonnegative")
        if not 0 < self.frequent_fraction <= 1:
            raise ValueError("frequent_fraction must lie in (0, 1]")

    def with_value(self, name, value):
        """Copy with one field replaced; understands nested channel/cost keys."""
        if name == "cost_fraction":
            return replace(self, costs=replace(self.costs, fraction=value))
        if name in {f.name for f in fields(ChannelConfig)}:
            return replace(self, channel=replace(self.channel, **{name: value}))
        if name in {"c_t", "c_m", "c_c"}:
            return replace(self, costs=replace(self.costs, **{name: value}))
        return replace(self, **{name: value})


@dataclass
class UserMetrics:
    user: int
    offsn: int  # -1 for the white area
    m_n: int
    m_n0: int
    old_served_d2d: int
    d2d_failures: int
    no_holder: int
    enb_served: int
    u_user: float
    u_enb: float
    offloaded: float


@dataclass
class EpisodeMetrics:
    per_user: list
    aggregates: dict
    offsns: list
    frequent_users: list

    def to_dict(self):
        return {
            "per_user": [asdict(u) for u in self.per_user],
            "aggregates": dict(self.aggregates),
            "offsns": [list(g) for g in self.offsns],
            "frequent_users": list(self.frequent_users),
        }


# --------------------------------------------------------------------------
# per-user accounting (direct formula evaluations)
# --------------------------------------------------------------------------

def old_term(n, state_before, selection=None, form="expected"):
    """Old-content weight for user ``n``: sum of m_k/n (expected) or the
    realized number of old contents picked.

    ``state_before`` is an :class:`IbpState` positioned at user ``n`` or a
    plain ``{content: m_k}`` mapping.
    """
    if n < 1:
        raise ValueError("user index starts at 1")
    if form == "realized":
        if selection is None:
            raise ValueError("realized form needs the selection")
        return float(len(selection.old_contents))
    if isinstance(state_before, IbpState):
        if n != state_before.next_user:
            raise ValueError(f"state is positioned at user {state_before.next_user}, not {n}")
        return state_before.expected_old()
    return math.fsum(state_before.values()) / n


def utility_user(n, state_before, m_n0, r_d, r_c, costs, selection=None, form="expected"):
    """User utility: old-content weight * (R_d - C_t) + m_n0 * (R_c - C_m)."""
    old = old_term(n, state_before, selection, form)
    return old * (r_d - costs.transmission(r_d)) + m_n0 * (r_c - costs.payment(r_c))


def utility_enb(n, state_before, m_n0, m_n, r_d, r_c, costs, selection=None, form="expected", v_c=None):
    """eNB utility: old-content weight * R_d + m_n0 * R_c - m_n * C_c.

    ``v_c`` is only needed when costs are fractional (C_c = fraction * V_c).
    """
    old = old_term(n, state_before, selection, form)
    c_c = costs.control(v_c if v_c is not None else 0.0)
    return old * r_d + m_n0 * r_c - m_n * c_c


def offloaded_traffic(m_n, m_n0, v_c, r_c, c_c):
    """Traffic taken off the eNB: m_n V_c - m_n C_c - m_n0 R_c."""
    if m_n < 0 or m_n0 < 0:
        raise ValueError("counts must be nonnegative")
    return m_n * v_c - m_n * c_c - m_n0 * r_c


# --------------------------------------------------------------------------
# episode
# --------------------------------------------------------------------------

def _streams(seed):
    names = ("placement", "trace", "demand", "fading", "outcome", "activity")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(s) for name, s in zip(names, children)}


def _nominal_x_min(config, dist, d_enb):
    """Min contact time per pair from the mean-fading D2D rate.

    Uses the worse of the two link directions (the receiver nearer the eNB
    hears more eNB interference).
    """
    ch = config.channel
    signal = ch.ue_eirp * dist ** (-ch.path_loss_exp)
    enb = ch.enb_eirp * d_enb ** (-ch.path_loss_exp)
    rate = rate_d2d(signal, enb, 0.0, ch.noise_power)
    with np.errstate(divide="ignore"):
        return np.where(rate > 0, config.content_bits / (rate * ch.bandwidth), np.inf)


@dataclass
class Stage1:
    """Everything stage 1 produces; matrices are indexed by user id."""

    positions: np.ndarray
    enb_dist: np.ndarray
    dist: np.ndarray
    weights: np.ndarray  # NaN where a pair never met
    shape: np.ndarray  # fitted Gamma shape (point mass for degenerate pairs)
    scale: np.ndarray  # fitted Gamma scale, 0 for degenerate pairs
    partition: OffsnPartition

    @property
    def graph(self):
        n = self.positions.shape[0]
        a, b = np.nonzero(np.triu(~np.isnan(self.weights), k=1))
        return ClosenessGraph(
            tuple(range(n)),
            {(int(i), int(j)): float(self.weights[i, j]) for i, j in zip(a, b)},
            {i: (float(x), float(y)) for i, (x, y) in enumerate(self.positions)},
        )


def build_offsns(config, streams=None):
    """Stage 1: positions, encounters, closeness graph and partition."""
    streams = streams or _streams(config.seed)
    n = config.n_users
    positions = uniform_disk(n, config.cell_radius, streams["placement"])
    enb = np.array([config.enb_distance, 0.0])
    # 1 m floor keeps the path-loss law finite for users on top of the eNB
    enb_dist = np.maximum(np.hypot(*(positions - enb).T), 1.0)
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), 1e-3)

    ua, ub, _, durations = synthesize_encounters(positions, streams["trace"], config.synthesis)
    a, b, _, mean, irr = pair_moments(ua, ub, durations, n)
    shape_p, scale_p = fit_arrays(mean, irr)
    worst_enb = np.minimum(enb_dist[a], enb_dist[b])
    x_min = _nominal_x_min(config, dist[a, b], worst_enb)
    w = closeness_array(shape_p, scale_p, x_min)

    weights = np.full((n, n), np.nan)
    weights[a, b] = weights[b, a] = w
    shape = np.full((n, n), np.nan)
    shape[a, b] = shape[b, a] = shape_p
    scale = np.full((n, n), np.nan)
    scale[a, b] = scale[b, a] = scale_p
    part = partition_arrays(n, a, b, w, config.w_t)
    return Stage1(positions, enb_dist, dist, weights, shape, scale, part)


class _Holders:
    """Growable (content x user) bool matrix for one OffSN."""

    def __init__(self, n_users):
        self.mat = np.zeros((16, n_users), dtype=bool)

    def ensure(self, n_contents):
        if n_contents > self.mat.shape[0]:
            grown = np.zeros((max(n_contents, 2 * self.mat.shape[0]), self.mat.shape[1]), dtype=bool)
            grown[: self.mat.shape[0]] = self.mat
            self.mat = grown


def run_episode(config, order=None):
    """Simulate one episode and return its :class:`EpisodeMetrics`.

    ``order`` optionally overrides the label-order user visit sequence (a
    permutation of ``range(n_users)``).
    """
    n_users = config.n_users
    if order is None:
        order = range(n_users)
    else:
        order = [int(u) for u in order]
        if sorted(order) != list(range(n_users)):
            raise ValueError("order must be a permutation of the user ids")

    streams = _streams(config.seed)
    st = build_offsns(config, streams)
    part = st.partition
    member = np.full(n_users, -1, dtype=np.int64)
    for g, group in enumerate(part.offsns):
        member[list(group)] = g

    activity = {u: int(c) for u, c in enumerate(streams["activity"].poisson(config.alpha, n_users))}
    frequent = frequent_users(activity, config.frequent_fraction)

    ch = config.channel
    eta = ch.path_loss_exp
    noise = float(ch.noise_power)
    enb_rx = ch.enb_eirp * st.enb_dist ** (-eta)  # mean eNB power at each user
    ue_rx = ch.ue_eirp * st.dist ** (-eta)  # mean D2D power between users
    bits_per_hz = config.content_bits / ch.bandwidth
    costs = config.costs
    form = config.utility_form

    demand = streams["demand"]
    fading = streams["fading"]
    outcome = streams["outcome"]

    white_state = IbpState(config.alpha)
    states = [IbpState(config.alpha) for _ in part.offsns]
    holders = [_Holders(n_users) for _ in part.offsns]

    # score[u, v]: closeness of v as a source for u, -1 if out of range or no edge
    candidate = ~np.isnan(st.weights) & (st.dist <= config.d2d_max)
    score = np.where(candidate, st.weights, -1.0)

    per_user = []
    enb_rate_sum = 0.0
    attempts_total = 0
    successes_total = 0
    requests_total = 0

    for u in order:
        g = int(member[u])
        if g < 0:
            sel = ibp_select(white_state, demand)
            m = sel.total
            v_c = rate_clean(enb_rx[u] * fading.exponential(1.0, m), noise)
            v_sum = float(v_c.sum())
            enb_rate_sum += v_sum
            requests_total += m
            u_user = float(np.sum(v_c - costs.payment(v_c)))
            per_user.append(UserMetrics(u, -1, m, sel.n_new, 0, 0, 0, m, u_user, v_sum, 0.0))
            white_state = update_prior(white_state, sel)
            continue

        state = states[g]
        hold = holders[g]
        n = state.next_user
        sel = ibp_select(state, demand)
        m = sel.total
        old_ids = np.array(sorted(sel.old_contents), dtype=np.int64)

        givers = _accel.best_holders(hold.mat, old_ids, score[u])
        tx = givers[givers >= 0]
        n_att = tx.size
        no_holder = old_ids.size - n_att

        # one tick: every transfer into u shares the subchannel and hears the eNB
        p_d2d = ue_rx[tx, u] * fading.exponential(1.0, n_att)
        i_enb = enb_rx[u] * fading.exponential(1.0)
        r_d, ok = _accel.d2d_session(
            p_d2d, i_enb, noise, bits_per_hz, st.shape[u, tx], st.scale[u, tx], outcome.random(n_att)
        )
        n_ok = int(ok.sum())
        n_fail = n_att - n_ok

        enb_served = sel.n_new + n_fail + no_holder
        s_enb = enb_rx[u] * fading.exponential(1.0, m)
        v_c = rate_clean(s_enb, noise)
        # A UE cannot decode its own eNB downlink and its D2D receptions on one
        # subchannel, so its downlinks sit off the subchannel its D2D pairs
        # reuse: every pair in this tick targets u, hence zero beta_cd terms.
        r_c = rate_cellular(s_enb[:enb_served], 0.0, noise)

        v_mean = float(v_c.sum()) / m if m else 0.0
        r_c_mean = float(r_c.sum()) / enb_served if enb_served else 0.0
        r_d_mean = float(r_d.sum()) / n_att if n_att else 0.0
        c_c_mean = costs.control(v_mean)
        offl = offloaded_traffic(m, enb_served, v_mean, r_c_mean, c_c_mean)
        u_user = utility_user(n, state, sel.n_new, r_d_mean, r_c_mean, costs, sel, form)
        u_enb = utility_enb(n, state, sel.n_new, m, r_d_mean, r_c_mean, costs, sel, form, v_mean)

        enb_rate_sum += float(r_c.sum())
        attempts_total += n_att
        successes_total += n_ok
        requests_total += m
        per_user.append(
            UserMetrics(u, g, m, sel.n_new, n_ok, n_fail, no_holder, enb_served, u_user, u_enb, offl)
        )

        # u now holds everything it asked for, however it was served
        new_state = update_prior(state, sel)
        hold.ensure(new_state.next_content_id)
        hold.mat[old_ids, u] = True
        hold.mat[state.next_content_id : new_state.next_content_id, u] = True
        states[g] = new_state

    offl_total = math.fsum(p.offloaded for p in per_user)
    aggregates = {
        "enb_data_rate_sum": enb_rate_sum,
        "offloaded_traffic": offl_total / requests_total if requests_total else 0.0,
        "offloaded_traffic_total": offl_total,
        "d2d_success_ratio": successes_total / attempts_total if attempts_total else 0.0,
        "d2d_attempts": attempts_total,
        "d2d_successes": successes_total,
        "requests": requests_total,
        "n_offsns": len(part.offsns),
        "white_area_size": len(part.white_area),
    }
    return EpisodeMetrics(per_user, aggregates, [sorted(g) for g in part.offsns], frequent)
