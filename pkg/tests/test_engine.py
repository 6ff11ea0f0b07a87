import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from sociald2d import _accel
from sociald2d.closeness import closeness, GammaParams, Degenerate
from sociald2d.engine import (
    CostConfig,
    EpisodeConfig,
    build_offsns,
    offloaded_traffic,
    run_episode,
    utility_enb,
    utility_user,
)
from sociald2d.onsn import IbpState

ABS = CostConfig(fraction=None)


def test_utility_user_examples():
    assert utility_user(1, IbpState(1.0), 2, 0.0, 3.0, CostConfig(c_m=1.0, fraction=None)) == 4.0
    s = IbpState(1.0, n_seen=3, counts={0: 2, 1: 2}, next_content_id=2)
    assert utility_user(4, s, 0, 5.0, 0.0, CostConfig(c_t=1.0, fraction=None)) == 4.0
    assert utility_user(4, s, 0, 2.0, 0.0, CostConfig(c_t=2.0, fraction=None)) == 0.0


def test_utility_enb_examples():
    assert utility_enb(1, IbpState(1.0), 3, 3, 0.0, 2.0, CostConfig(c_c=0.5, fraction=None)) == 4.5
    assert utility_enb(3, {0: 3}, 0, 1, 4.0, 0.0, CostConfig(c_c=1.0, fraction=None)) == 3.0
    s = IbpState(1.0, n_seen=3, counts={0: 2, 1: 1}, next_content_id=2)
    assert utility_enb(4, s, 2, 5, 3.0, 2.0, ABS) == pytest.approx(0.75 * 3.0 + 2 * 2.0)


def test_utility_state_position_checked():
    with pytest.raises(ValueError):
        utility_user(2, IbpState(1.0), 0, 1.0, 1.0, ABS)
    with pytest.raises(ValueError):
        utility_user(0, {}, 0, 1.0, 1.0, ABS)


def test_offloaded_traffic_examples():
    assert offloaded_traffic(10, 2, 4.0, 3.0, 0.2) == pytest.approx(32.0, abs=1e-12)
    assert offloaded_traffic(5, 5, 3.0, 3.0, 0.0) == 0.0
    assert offloaded_traffic(7, 0, 2.5, 9.0, 0.0) == 7 * 2.5


def test_cost_config():
    c = CostConfig(c_t=1.0, c_m=2.0, c_c=3.0, fraction=None)
    assert (c.transmission(9.0), c.payment(9.0), c.control(9.0)) == (1.0, 2.0, 3.0)
    f = CostConfig(fraction=0.25)
    assert (f.transmission(4.0), f.payment(8.0), f.control(2.0)) == (1.0, 2.0, 0.5)
    with pytest.raises(ValueError):
        CostConfig(c_t=-1.0)


@pytest.mark.parametrize(
    "kw", [{"n_users": 1}, {"alpha": 0.0}, {"w_t": -0.1}, {"d2d_max": -1.0}, {"seed": -1}, {"utility_form": "x"}]
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        EpisodeConfig(**kw)


@pytest.mark.parametrize("seed", range(8))
def test_conservation_and_first_request(seed):
    res = run_episode(EpisodeConfig(seed=seed))
    for u in res.per_user:
        assert u.old_served_d2d + u.m_n0 + u.d2d_failures + u.no_holder == u.m_n
        assert u.enb_served == u.m_n0 + u.d2d_failures + u.no_holder
        if u.offsn < 0:
            assert u.old_served_d2d == 0 and u.offloaded == 0.0
    agg = res.aggregates
    assert agg["requests"] == sum(u.m_n for u in res.per_user)
    assert agg["d2d_successes"] == sum(u.old_served_d2d for u in res.per_user)
    assert agg["d2d_attempts"] == sum(u.old_served_d2d + u.d2d_failures for u in res.per_user)
    assert agg["white_area_size"] + sum(len(g) for g in res.offsns) == 32


def test_first_user_of_each_offsn_is_all_new():
    res = run_episode(EpisodeConfig(seed=3, alpha=12.0))
    seen = set()
    for u in res.per_user:
        if u.offsn >= 0 and u.offsn not in seen:
            seen.add(u.offsn)
            assert u.m_n == u.m_n0 and u.old_served_d2d == 0
    assert seen


def test_deterministic():
    a = json.dumps(run_episode(EpisodeConfig(seed=42)).to_dict(), sort_keys=True)
    b = json.dumps(run_episode(EpisodeConfig(seed=42)).to_dict(), sort_keys=True)
    assert a == b
    c = json.dumps(run_episode(EpisodeConfig(seed=43)).to_dict(), sort_keys=True)
    assert a != c


def test_tiny_alpha_no_demand():
    for seed in range(5):
        agg = run_episode(EpisodeConfig(alpha=1e-6, seed=seed)).aggregates
        assert agg["requests"] == 0
        assert agg["offloaded_traffic"] == 0.0
        assert agg["enb_data_rate_sum"] == 0.0


@pytest.mark.parametrize("kw", [{"d2d_max": 0.0}, {"w_t": 1.01}])
def test_no_d2d_when_disabled(kw):
    for seed in range(4):
        res = run_episode(EpisodeConfig(seed=seed, alpha=12.0, **kw))
        assert res.aggregates["d2d_successes"] == 0
        assert res.aggregates["d2d_attempts"] == 0


def test_threshold_above_one_empties_offsns():
    res = run_episode(EpisodeConfig(w_t=1.01))
    assert res.offsns == [] and res.aggregates["white_area_size"] == 32


def test_stage1_weights_symmetric_and_partition_consistent():
    st = build_offsns(EpisodeConfig(seed=5))
    w = st.weights
    assert np.array_equal(np.isnan(w), np.isnan(w.T))
    assert np.allclose(np.nan_to_num(w), np.nan_to_num(w.T))
    member = {u for g in st.partition.offsns for u in g}
    for u in member:
        assert np.nanmax(w[u]) >= 0.5
    for u in st.partition.white_area:
        assert not np.any(w[u] >= 0.5)
    iu = np.triu_indices(32, 1)
    assert len(st.graph.edges) == int(np.sum(~np.isnan(w[iu])))


def test_custom_order():
    cfg = EpisodeConfig(seed=1)
    res = run_episode(cfg, order=list(reversed(range(32))))
    assert [u.user for u in res.per_user] == list(reversed(range(32)))
    with pytest.raises(ValueError):
        run_episode(cfg, order=[0, 0, 1])


def test_realized_utility_form():
    res = run_episode(EpisodeConfig(seed=2, utility_form="realized"))
    assert all(math.isfinite(u.u_user) for u in res.per_user)


def test_d2d_session_backends_agree():
    rng = np.random.default_rng(0)
    p = rng.exponential(1e-6, 40)
    shape = rng.uniform(0.5, 6, 40)
    scale = rng.uniform(0.1, 3, 40)
    scale[:5] = 0.0  # degenerate pairs
    u = rng.random(40)
    r1, ok1 = _accel._d2d_session_nb(p, 1e-8, 1e-10, 0.1, shape, scale, u)
    r2, ok2 = _accel._d2d_session_np(p, 1e-8, 1e-10, 0.1, shape, scale, u)
    assert np.allclose(r1, r2, rtol=1e-14)
    assert np.array_equal(ok1, ok2)


def test_d2d_session_success_rule():
    p = np.array([3e-9, 1e-9])
    rate, ok = _accel.d2d_session(p, 0.0, 1e-9, 0.5, np.array([2.0, 7.0]), np.array([1.0, 0.0]), np.array([0.0, 0.0]))
    # first link: rate = log2(1 + 3/(1 + 1)), second: degenerate with mean 7
    assert rate[0] == pytest.approx(math.log2(2.5))
    w0 = closeness(GammaParams(2.0, 1.0), 0.5 / rate[0])
    assert ok[0] == (0.0 < w0)
    w1 = closeness(Degenerate(7.0), 0.5 / rate[1])
    assert ok[1] == (0.0 < w1)


def test_numpy_backend_matches_numba_episode():
    code = (
        "import json; from sociald2d.engine import run_episode, EpisodeConfig; "
        "print(json.dumps([run_episode(EpisodeConfig(seed=s)).aggregates for s in range(3)]))"
    )
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, SOCIALD2D_DISABLE_NUMBA=flag)
        r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs.append(json.loads(r.stdout))
    for a, b in zip(*outs):
        assert a.keys() == b.keys()
        for k in a:
            assert a[k] == pytest.approx(b[k], rel=1e-12, abs=1e-12)
