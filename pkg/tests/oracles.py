"""Slow, obviously-correct reference implementations used by the tests."""

from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np
from scipy.special import gamma, kv


def sweep_mod(trajs, start, duration, spec, radius, step=1e-3):
    """Fraction of 1 ms instants at which some pedestrian's disk covers each cell."""
    n = int(round(duration / step))
    t = start + (np.arange(n) + 0.5) * step
    present = np.zeros((n, spec.height * spec.width), dtype=bool)
    offs = [(dr, dc) for dr in range(-radius, radius + 1) for dc in range(-radius, radius + 1) if dr * dr + dc * dc <= radius * radius]
    for tr in trajs:
        act = (t >= tr.times[0]) & (t < tr.times[-1])
        if not act.any():
            continue
        ta = t[act]
        x = np.interp(ta, tr.times, tr.xy[:, 0])
        y = np.interp(ta, tr.times, tr.xy[:, 1])
        r = np.floor((y - spec.origin_y) / spec.resolution).astype(int)
        c = np.floor((x - spec.origin_x) / spec.resolution).astype(int)
        rows = np.nonzero(act)[0]
        inside = (r >= 0) & (r < spec.height) & (c >= 0) & (c < spec.width)
        for dr, dc in offs:
            rr, cc = r + dr, c + dc
            ok = inside & (rr >= 0) & (rr < spec.height) & (cc >= 0) & (cc < spec.width)
            present[rows[ok], rr[ok] * spec.width + cc[ok]] = True
    return present.mean(axis=0).reshape(spec.height, spec.width)


def union_length(intervals):
    total, end = 0.0, -math.inf
    for a, b in sorted(intervals):
        if b <= end:
            continue
        total += b - max(a, end)
        end = b
    return total


class Octo:
    """Exact path length ``a + d*sqrt(2)`` with integer ``a`` and ``d``."""

    __slots__ = ("a", "d")

    def __init__(self, a=0, d=0):
        self.a, self.d = a, d

    def __add__(self, other):
        if isinstance(other, int):
            return Octo(self.a + other, self.d)
        return Octo(self.a + other.a, self.d + other.d)

    __radd__ = __add__

    def cmp(self, other):
        if isinstance(other, int):
            other = Octo(other, 0)
        da, dd = self.a - other.a, self.d - other.d
        if da >= 0 and dd >= 0:
            return int(da > 0 or dd > 0)
        if da <= 0 and dd <= 0:
            return -1
        # opposite signs never tie since sqrt(2) is irrational
        if da > 0:
            return 1 if da * da > 2 * dd * dd else -1
        return 1 if 2 * dd * dd > da * da else -1

    def __lt__(self, other):
        return self.cmp(other) < 0

    def __le__(self, other):
        return self.cmp(other) <= 0

    def __gt__(self, other):
        return self.cmp(other) > 0

    def __eq__(self, other):
        if isinstance(other, int):
            other = Octo(other, 0)
        return isinstance(other, Octo) and self.a == other.a and self.d == other.d

    def __hash__(self):
        return hash((self.a, self.d))


def grid_graph(admissible):
    """8-connected graph over admissible cells; diagonals need one admissible axial neighbour."""
    h, w = admissible.shape
    g = nx.Graph()
    for r in range(h):
        for c in range(w):
            if not admissible[r, c]:
                continue
            g.add_node((r, c))
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                nr, nc = r + dr, c + dc
                if not (0 <= nr < h and 0 <= nc < w) or not admissible[nr, nc]:
                    continue
                if dr and dc:
                    if not (admissible[r, nc] or admissible[nr, c]):
                        continue
                    g.add_edge((r, c), (nr, nc), weight=Octo(0, 1))
                else:
                    g.add_edge((r, c), (nr, nc), weight=Octo(1, 0))
    return g


def dijkstra_steps(admissible, start, goal):
    """``(n_axial, n_diagonal)`` of a shortest path, or None."""
    g = grid_graph(admissible)
    if start not in g or goal not in g:
        return None
    try:
        d = nx.dijkstra_path_length(g, start, goal, weight="weight")
    except nx.NetworkXNoPath:
        return None
    if isinstance(d, int):
        return (0, 0)
    return (d.a, d.d)


def all_distances(admissible, goal):
    g = grid_graph(admissible)
    if goal not in g:
        return {}
    return {k: (0, 0) if isinstance(v, int) else (v.a, v.d) for k, v in nx.single_source_dijkstra_path_length(g, goal).items()}


def best_permutations(values):
    n = len(values)
    perms = list(itertools.permutations(range(n)))
    sums = [sum(values[i][p[i]] for i in range(n)) for p in perms]
    maxes = [max(values[i][p[i]] for i in range(n)) for p in perms]
    return perms, sums, maxes


def matern_general(r, variance, length_scale, nu):
    r = np.asarray(r, dtype=float)
    s = np.sqrt(2 * nu) * r / length_scale
    with np.errstate(invalid="ignore"):
        k = variance * 2 ** (1 - nu) / gamma(nu) * s**nu * kv(nu, s)
    return np.where(r == 0, variance, k)


def dense_posterior(X, y, Q, variance, length_scale, nu, noise, mean=0.0):
    def K(a, b):
        d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
        return matern_general(d, variance, length_scale, nu)

    Kxx = K(X, X) + noise * np.eye(len(X))
    Kxq = K(X, Q)
    mu = mean + Kxq.T @ np.linalg.solve(Kxx, y - mean)
    var = variance - np.einsum("ij,ij->j", Kxq, np.linalg.solve(Kxx, Kxq))
    return mu, var


def brute_conflicts(pa, pb, radius):
    """Index pairs of two sampled paths that come within ``radius``."""
    out = set()
    for i, p in enumerate(pa):
        for j, q in enumerate(pb):
            if math.hypot(p[0] - q[0], p[1] - q[1]) <= radius:
                out.add((i, j))
    return out
