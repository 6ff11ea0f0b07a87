"""Parameter sweeps: replicated episodes per axis value, CSV and SVG output.

Replica ``r`` of every axis value runs with seed ``master_seed + r`` (mod
2**64), so all axis values share common random numbers.
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import EpisodeConfig, run_episode

AXES = ("alpha", "d2d_max", "cost_fraction", "w_t")
METRICS = ("enb_data_rate_sum", "offloaded_traffic", "d2d_success_ratio")
FORMAT_VERSION = 1
HEADER = ["axis", "value", "metric", "mean", "std", "replicas"]

AXIS_LABELS = {
    "alpha": "user activity degree alpha",
    "d2d_max": "maximum D2D distance (m)",
    "cost_fraction": "control cost fraction",
    "w_t": "closeness threshold w_T",
}


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    replicas: int = 1
    base: EpisodeConfig = field(default_factory=EpisodeConfig)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("values must be nonempty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"values must be strictly increasing, got {list(vals)}")
        object.__setattr__(self, "values", vals)
        if not (isinstance(self.replicas, int) and self.replicas >= 1):
            raise ValueError(f"replicas must be an integer >= 1, got {self.replicas}")

    def config_at(self, value, replica):
        cfg = self.base.with_value(self.axis, value)
        return cfg.with_value("seed", (self.base.seed + replica) % 2**64)


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    metric: str
    mean: float
    std: float
    replicas: int


def summarize(samples):
    """(mean, sample std); std is 0 for a single sample."""
    x = np.asarray(samples, dtype=np.float64)
    mean = math.fsum(x.tolist()) / x.size
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return mean, std


def ci95(mean, std, n):
    half = 1.96 * std / math.sqrt(n)
    return mean - half, mean + half


def _point(args):
    spec, value = args
    out = {m: [] for m in METRICS}
    for r in range(spec.replicas):
        agg = run_episode(spec.config_at(value, r)).aggregates
        for m in METRICS:
            out[m].append(agg[m])
    return out


def run_sweep(spec, jobs=1, return_samples=False):
    """Run ``spec`` and return a list of :class:`SweepRow`.

    ``jobs > 1`` farms axis values out to worker processes; the rows are
    assembled in axis order afterwards so the output does not depend on it.
    """
    tasks = [(spec, v) for v in spec.values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            samples = list(pool.map(_point, tasks))
    else:
        samples = [_point(t) for t in tasks]
    rows = []
    for value, per_metric in zip(spec.values, samples):
        for m in METRICS:
            mean, std = summarize(per_metric[m])
            rows.append(SweepRow(spec.axis, value, m, mean, std, spec.replicas))
    if return_samples:
        return rows, dict(zip(spec.values, samples))
    return rows


def emit_csv(rows):
    """Serialize rows; floats use repr so the text round-trips exactly."""
    if not rows:
        raise ValueError("cannot emit an empty table")
    buf = io.StringIO()
    buf.write(f"# sociald2d-sweep format-version {FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([r.axis, repr(float(r.value)), r.metric, repr(float(r.mean)), repr(float(r.std)), r.replicas])
    return buf.getvalue().encode("utf-8")


def parse_csv(data):
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines()
    if not lines or not lines[0].startswith("# sociald2d-sweep format-version "):
        raise ValueError("missing format-version line")
    version = int(lines[0].rsplit(" ", 1)[1])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version}")
    reader = csv.reader(lines[1:])
    if next(reader, None) != HEADER:
        raise ValueError(f"expected header {','.join(HEADER)}")
    return [SweepRow(a, float(v), m, float(mu), float(sd), int(n)) for a, v, m, mu, sd, n in reader]


def emit_plot(rows, path, axis_label=None):
    """One line chart per metric with 95% CI error bars, written as SVG."""
    if not rows:
        raise ValueError("cannot plot an empty table")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    metrics = [m for m in dict.fromkeys(r.metric for r in rows)]
    fig, axes = plt.subplots(1, len(metrics), figsize=(4.2 * len(metrics), 3.4), squeeze=False)
    axis = rows[0].axis
    for ax, metric in zip(axes[0], metrics):
        sel = [r for r in rows if r.metric == metric]
        x = [r.value for r in sel]
        y = [r.mean for r in sel]
        err = [1.96 * r.std / math.sqrt(r.replicas) for r in sel]
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3)
        ax.set_xlabel(axis_label or AXIS_LABELS.get(axis, axis))
        ax.set_title(metric)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    plt.rcParams["svg.hashsalt"] = "sociald2d"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
