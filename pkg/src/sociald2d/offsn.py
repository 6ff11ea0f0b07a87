"""Offline social networks: the thresholded closeness graph and its parts.

An OffSN is a connected component (size >= 2) of the graph that keeps only
edges with closeness >= w_T. Everyone else lives in the white area and is
served by the eNB directly.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .closeness import closeness, fit_gamma
from .trace import pair_key


@dataclass
class ClosenessGraph:
    users: tuple
    edges: dict = field(default_factory=dict)
    positions: dict = field(default_factory=dict)

    def __post_init__(self):
        self.users = tuple(sorted(self.users))
        known = set(self.users)
        clean = {}
        for (a, b), w in self.edges.items():
            if a == b:
                raise ValueError(f"self-loop edge on user {a}")
            if a not in known or b not in known:
                raise KeyError(f"edge ({a}, {b}) references an unknown user")
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"edge weight {w} outside [0, 1]")
            clean[pair_key(a, b)] = float(w)
        self.edges = clean

    def weight(self, a, b):
        """Edge weight or ``None`` when the pair never met."""
        return self.edges.get(pair_key(a, b))

    def distance(self, a, b):
        (xa, ya), (xb, yb) = self.positions[a], self.positions[b]
        return math.hypot(xa - xb, ya - yb)

    @cached_property
    def index(self):
        return {u: i for i, u in enumerate(self.users)}

    @cached_property
    def weight_matrix(self):
        """Dense weights in ``users`` order; NaN where there is no edge."""
        n = len(self.users)
        w = np.full((n, n), np.nan)
        idx = self.index
        for (a, b), val in self.edges.items():
            w[idx[a], idx[b]] = w[idx[b], idx[a]] = val
        return w


def build_graph(stats, positions, x_min_model, users=None):
    """Closeness graph from per-pair contact statistics.

    ``x_min_model(a, b)`` returns the minimum useful contact time for that
    pair (seconds). ``users`` defaults to the keys of ``positions``.
    """
    users = set(positions) if users is None else set(users)
    edges = {}
    for (a, b), st in stats.items():
        if a not in users or b not in users:
            raise KeyError(f"stats reference unknown user in pair ({a}, {b})")
        edges[pair_key(a, b)] = closeness(fit_gamma(st), x_min_model(a, b))
    return ClosenessGraph(tuple(users), edges, dict(positions))


@dataclass(frozen=True)
class OffsnPartition:
    offsns: tuple
    white_area: frozenset
    threshold: float

    def membership(self):
        """{user: offsn index}; white-area users are absent."""
        return {u: i for i, group in enumerate(self.offsns) for u in group}


def components(n, rows, cols):
    """Connected-component labels over ``n`` nodes for an undirected edge list."""
    adj = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    return labels


def partition_arrays(n_users, a, b, w, w_t):
    """Partition users ``0..n_users-1`` given edge arrays ``(a, b, w)``."""
    # w_t above 1 is accepted: it disables every edge
    if not w_t >= 0.0:
        raise ValueError(f"threshold must be >= 0, got {w_t}")
    keep = np.asarray(w) >= w_t
    labels = components(n_users, np.asarray(a)[keep], np.asarray(b)[keep])
    sizes = np.bincount(labels, minlength=n_users)
    groups = {}
    for u in range(n_users):
        if sizes[labels[u]] >= 2:
            groups.setdefault(labels[u], []).append(u)
    offsns = sorted((frozenset(g) for g in groups.values()), key=min)
    white = frozenset(int(u) for u in np.flatnonzero(sizes[labels] < 2))
    return OffsnPartition(tuple(offsns), white, w_t)


def partition(graph, w_t):
    """Split users into OffSNs (components over edges with w >= w_t)."""
    idx = graph.index
    pairs = list(graph.edges.items())
    a = [idx[p[0]] for p, _ in pairs]
    b = [idx[p[1]] for p, _ in pairs]
    w = [val for _, val in pairs]
    part = partition_arrays(len(graph.users), a, b, w, w_t)
    users = graph.users
    return OffsnPartition(
        tuple(frozenset(users[i] for i in g) for g in part.offsns),
        frozenset(users[i] for i in part.white_area),
        w_t,
    )


def frequent_users(activity, top_fraction):
    """Most active users first (ties by id), top ``ceil(fraction * N)``."""
    if not activity:
        raise ValueError("activity map is empty")
    if not 0 < top_fraction <= 1:
        raise ValueError(f"top_fraction must lie in (0, 1], got {top_fraction}")
    ordered = sorted(activity, key=lambda u: (-activity[u], u))
    return ordered[: math.ceil(top_fraction * len(ordered))]


def best_holder(graph, requester, holders, d_max):
    """Holder with the highest closeness to ``requester`` within ``d_max``.

    Only holders sharing an edge with the requester qualify; ties go to the
    lower id. Returns ``None`` when nobody qualifies.
    """
    if requester not in graph.index:
        raise KeyError(f"unknown requester {requester}")
    if requester in holders:
        raise ValueError("requester already holds the content")
    best, best_w = None, -1.0
    for h in sorted(holders):
        w = graph.weight(requester, h)
        if w is None or graph.distance(requester, h) > d_max:
            continue
        if w > best_w:
            best, best_w = h, w
    return best
