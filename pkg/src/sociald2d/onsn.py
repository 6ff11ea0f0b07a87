"""Content demand as an Indian Buffet Process.

User ``n`` (1-based) re-selects each already-viewed content ``k`` with
probability ``m_k / n`` and draws ``Poisson(alpha / n)`` never-viewed
contents. Content ids for fresh draws come from a monotone counter and are
never reused.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class IbpState:
    alpha: float
    n_seen: int = 0
    counts: dict = field(default_factory=dict)
    next_content_id: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.n_seen < 0:
            raise ValueError("n_seen must be nonnegative")
        for k, m in self.counts.items():
            if not 1 <= m <= self.n_seen:
                raise ValueError(f"count for content {k} must lie in [1, n_seen], got {m}")

    @property
    def next_user(self):
        """1-based index of the user about to select."""
        return self.n_seen + 1

    def copy(self):
        return IbpState(self.alpha, self.n_seen, dict(self.counts), self.next_content_id)

    def expected_old(self):
        """Sum over viewed contents of ``m_k / n`` for the next user."""
        n = self.next_user
        return sum(self.counts.values()) / n


@dataclass(frozen=True)
class Selection:
    old_contents: frozenset
    n_new: int

    @property
    def total(self):
        return len(self.old_contents) + self.n_new


def ibp_select(state, rng):
    """Draw the next user's selection without touching ``state``.

    Existing contents are visited in ascending id order so a given generator
    state always yields the same selection.
    """
    n = state.next_user
    if state.counts:
        ids = np.fromiter(sorted(state.counts), dtype=np.int64, count=len(state.counts))
        m = np.fromiter((state.counts[k] for k in ids.tolist()), dtype=np.float64, count=ids.size)
        picked = rng.random(ids.size) < m / n
        old = frozenset(ids[picked].tolist())
    else:
        old = frozenset()
    n_new = int(rng.poisson(state.alpha / n))
    return Selection(old, n_new)


def update_prior(state, selection):
    """Posterior counts after ``selection``; returns a new state."""
    unknown = [k for k in selection.old_contents if k not in state.counts]
    if unknown:
        raise KeyError(f"selection references unknown content ids {sorted(unknown)}")
    if selection.n_new < 0:
        raise ValueError("n_new must be nonnegative")
    counts = dict(state.counts)
    for k in selection.old_contents:
        counts[k] += 1
    for k in range(state.next_content_id, state.next_content_id + selection.n_new):
        counts[k] = 1
    return IbpState(state.alpha, state.n_seen + 1, counts, state.next_content_id + selection.n_new)


def new_content_ids(state, selection):
    """Ids that :func:`update_prior` will assign to the fresh contents."""
    return list(range(state.next_content_id, state.next_content_id + selection.n_new))


def expected_library_size(alpha, n_users):
    """Mean number of distinct contents after ``n_users``: alpha * H_N."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if n_users < 1:
        raise ValueError(f"n_users must be >= 1, got {n_users}")
    return alpha * sum(1.0 / n for n in range(1, n_users + 1))


def simulate_library(alpha, n_users, rng):
    """Run the buffet for ``n_users`` and return the final state."""
    state = IbpState(alpha)
    for _ in range(n_users):
        state = update_prior(state, ibp_select(state, rng))
    return state


def state_to_csv(state):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["content_id", "m_k"])
    for k in sorted(state.counts):
        w.writerow([k, state.counts[k]])
    return buf.getvalue()


def counts_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["content_id", "m_k"]:
        raise ValueError("expected header 'content_id,m_k'")
    return {int(k): int(m) for k, m in rows[1:] if k}
