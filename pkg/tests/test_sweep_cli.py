import csv
import io
import subprocess
import sys

import pytest

from sociald2d import cli
from sociald2d import config as cfgmod
from sociald2d.engine import EpisodeConfig, run_episode
from sociald2d.sweep import METRICS, SweepRow, SweepSpec, emit_csv, emit_plot, parse_csv, run_sweep


def test_spec_validation():
    with pytest.raises(ValueError, match="axis"):
        SweepSpec("n_users", (1, 2))
    with pytest.raises(ValueError, match="values"):
        SweepSpec("alpha", ())
    with pytest.raises(ValueError, match="increasing"):
        SweepSpec("alpha", (2, 2))
    with pytest.raises(ValueError, match="replicas"):
        SweepSpec("alpha", (2,), replicas=0)


def test_single_replica_equals_episode():
    base = EpisodeConfig(seed=17)
    rows = run_sweep(SweepSpec("alpha", (4.0,), 1, base))
    agg = run_episode(base.with_value("alpha", 4.0)).aggregates
    assert [r.metric for r in rows] == list(METRICS)
    for r in rows:
        assert r.mean == agg[r.metric] and r.std == 0.0 and r.replicas == 1


def test_replica_seeds_and_parallel_equivalence():
    spec = SweepSpec("d2d_max", (20.0, 80.0), 3, EpisodeConfig(seed=5))
    rows, samples = run_sweep(spec, return_samples=True)
    expect = [run_episode(EpisodeConfig(seed=5 + r, d2d_max=20.0)).aggregates["offloaded_traffic"] for r in range(3)]
    assert samples[20.0]["offloaded_traffic"] == expect
    assert emit_csv(run_sweep(spec, jobs=2)) == emit_csv(rows)


@pytest.mark.parametrize("axis,value,attr", [
    ("cost_fraction", 0.3, lambda c: c.costs.fraction),
    ("w_t", 0.7, lambda c: c.w_t),
    ("alpha", 3.0, lambda c: c.alpha),
])
def test_axis_applied(axis, value, attr):
    spec = SweepSpec(axis, (value,), 1, EpisodeConfig())
    assert attr(spec.config_at(value, 0)) == value


def _rows(n=3):
    return [SweepRow("alpha", float(i + 1), "offloaded_traffic", 0.1 * i + 1 / 3, 1e-17 * i, 7) for i in range(n)]


def test_csv_shape_and_round_trip():
    data = emit_csv(_rows())
    lines = data.decode().splitlines()
    assert lines[0].startswith("# ") and "format-version" in lines[0]
    assert lines[1] == "axis,value,metric,mean,std,replicas"
    assert len(lines) == 2 + 3
    assert parse_csv(data) == _rows()


def test_csv_empty_is_error():
    with pytest.raises(ValueError):
        emit_csv([])
    with pytest.raises(ValueError):
        emit_plot([], "x.svg")


def test_csv_rejects_unversioned():
    with pytest.raises(ValueError):
        parse_csv(b"axis,value,metric,mean,std,replicas\n")


def test_plot_is_svg_and_deterministic(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_plot(_rows(), a)
    emit_plot(_rows(), b)
    text = a.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    assert a.read_bytes() == b.read_bytes()


def test_config_load_and_unknown_key(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("alpha: 4\nbandwidth: 5e6\ncost_fraction: 0.2\ntie_length: 50\nn_users: 10\n")
    cfg, _ = cfgmod.load_config(p)
    assert (cfg.alpha, cfg.channel.bandwidth, cfg.costs.fraction, cfg.synthesis.tie_length, cfg.n_users) == (
        4.0, 5e6, 0.2, 50.0, 10)
    p.write_text("alpha: 4\nbogus: 1\n")
    with pytest.raises(KeyError, match="bogus"):
        cfgmod.load_config(p)
    p.write_text("channel:\n  bandwidth: 1\n")
    with pytest.raises(ValueError):
        cfgmod.load_config(p)


def test_config_flatten_round_trip():
    cfg = EpisodeConfig(alpha=3.0, seed=9)
    assert cfgmod.apply_overrides(EpisodeConfig(), cfgmod.flatten(cfg)) == cfg
    assert set(cfgmod.flatten(cfg)) == set(cfgmod.ALL_KEYS)


def test_help_flags_assumed_defaults():
    out = subprocess.run([sys.executable, "-m", "sociald2d.cli", "sweep", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for key in ("bandwidth", "content_bits", "w_t", "d2d_max"):
        line = next(ln for ln in out.splitlines() if ln.strip().startswith(key + " ="))
        assert "[assumed]" in line
    for key in ("n_users", "p_enb", "noise_figure"):
        line = next(ln for ln in out.splitlines() if ln.strip().startswith(key + " ="))
        assert "[assumed]" not in line
    for flag in ("--config", "--seed", "--out", "--replicas"):
        assert flag in out


def test_cli_sweep_deterministic(tmp_path):
    conf = tmp_path / "c.yaml"
    conf.write_text("axis: alpha\nvalues: [2, 8]\nreplicas: 3\nn_users: 12\n")
    for d in ("a", "b"):
        assert cli.main(["sweep", "--config", str(conf), "--seed", "11", "--out", str(tmp_path / d), "--no-plot"]) == 0
    a = (tmp_path / "a" / "sweep_alpha.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep_alpha.csv").read_bytes()
    assert len(parse_csv(a)) == 2 * len(METRICS)


def test_cli_run(tmp_path):
    assert cli.main(["run", "--seed", "4", "--out", str(tmp_path), "--set", "alpha=3"]) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "episode_users.csv").read_text())))
    assert len(rows) == 32
    res = run_episode(EpisodeConfig(seed=4, alpha=3.0))
    assert [int(r["m_n"]) for r in rows] == [u.m_n for u in res.per_user]
    assert (tmp_path / "episode.json").exists()


def test_cli_errors(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text("nope: 1\n")
    assert cli.main(["run", "--config", str(conf), "--out", str(tmp_path)]) == 2
    assert "nope" in capsys.readouterr().err
    assert cli.main(["sweep", "--axis", "alpha", "--values", "8,2", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        cli.main(["run", "--seed", "-1"])


def test_cli_fit(tmp_path):
    trace = tmp_path / "t.csv"
    trace.write_text("user_a,user_b,start_s,duration_s\n1,2,0,2\n1,2,10,4\n2,1,20,6\n1,3,0,5\n")
    assert cli.main(["fit", str(trace), "--x-min", "1.0", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(io.StringIO((tmp_path / "closeness.csv").read_text())))
    assert rows[0] == ["user_a", "user_b", "w"]
    got = {(int(a), int(b)): float(w) for a, b, w in rows[1:]}
    # pair (1,2): M=4, I=8/3 -> Gamma(6, 2/3); pair (1,3): single contact of 5 s -> step
    from scipy.special import gammaincc
    assert got[(1, 2)] == pytest.approx(gammaincc(6.0, 1.5), abs=1e-10)
    assert got[(1, 3)] == 1.0

    pos = tmp_path / "p.csv"
    pos.write_text("user_id,x_m,y_m\n1,0,0\n2,10,0\n3,0,20\n")
    assert cli.main(["fit", str(trace), "--positions", str(pos), "--out", str(tmp_path / "p")]) == 0
    rows = list(csv.reader(io.StringIO((tmp_path / "p" / "closeness.csv").read_text())))
    assert len(rows) == 3 and all(0 <= float(r[2]) <= 1 for r in rows[1:])

    trace.write_text("1,1,0,2\n")
    assert cli.main(["fit", str(trace), "--out", str(tmp_path)]) == 2
