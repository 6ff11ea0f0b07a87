"""Compare the numba kernels with their numpy fallbacks.

    python benchmarks/bench_kernels.py [--episodes N]

Kernel timings run both implementations in-process. Episode timings run a
child interpreter per backend, since the backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from sociald2d import _accel


def _best(fn, number, repeat=5):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_kernels():
    rng = np.random.default_rng(0)
    a = rng.uniform(0.5, 10, 500)
    x = rng.uniform(0, 50, 500)
    hold = rng.random((64, 32)) < 0.3
    contents = np.arange(0, 64, 3, dtype=np.int64)
    score = np.where(rng.random(32) < 0.5, rng.random(32), -1.0)
    p = rng.exponential(1e-7, 12)
    shape = rng.uniform(1, 5, 12)
    scale = rng.uniform(0.5, 3, 12)
    u = rng.random(12)

    cases = {
        "reg_lower_gamma (500 pts)": (
            lambda: _accel.reg_lower_gamma_numba(a, x),
            lambda: _accel.reg_lower_gamma_numpy(a, x),
        ),
        "best_holders (22 x 32)": (
            lambda: _accel._best_holders_nb(hold, contents, score),
            lambda: _accel._best_holders_np(hold, contents, score),
        ),
        "d2d_session (12 links)": (
            lambda: _accel._d2d_session_nb(p, 1e-9, 1e-10, 0.1, shape, scale, u),
            lambda: _accel._d2d_session_np(p, 1e-9, 1e-10, 0.1, shape, scale, u),
        ),
    }
    rows = []
    for name, (nb, npy) in cases.items():
        nb()  # compile
        t_nb = _best(nb, 2000)
        t_np = _best(npy, 2000)
        rows.append((name, t_nb, t_np))
    return rows


_EPISODE_CODE = """
import time
from sociald2d.engine import EpisodeConfig, run_episode
from sociald2d import _accel
run_episode(EpisodeConfig(seed=0))
n = {n}
t = time.perf_counter()
for s in range(n):
    run_episode(EpisodeConfig(seed=s))
print(_accel.backend_name(), (time.perf_counter() - t) / n)
"""


def bench_episodes(n):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SOCIALD2D_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", _EPISODE_CODE.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        name, secs = res.stdout.split()
        out[name] = float(secs)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=200)
    args = ap.parse_args()

    print(f"{'kernel':28s} {'numba':>12s} {'numpy':>12s} {'speedup':>8s}")
    for name, t_nb, t_np in bench_kernels():
        print(f"{name:28s} {t_nb * 1e6:10.1f}us {t_np * 1e6:10.1f}us {t_np / t_nb:7.1f}x")
    ep = bench_episodes(args.episodes)
    print(f"{'episode (defaults)':28s} {ep['numba'] * 1e3:10.2f}ms {ep['numpy'] * 1e3:10.2f}ms "
          f"{ep['numpy'] / ep['numba']:7.1f}x")


if __name__ == "__main__":
    main()
