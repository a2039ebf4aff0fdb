"""Exact distance-based metrics of a switch graph."""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _bfs
from .errors import Disconnected, NoEndpoints
from .topology import Topology

UNREACHABLE = -1


@dataclass(frozen=True)
class DistanceTable:
    source: int
    dist: np.ndarray

    def __getitem__(self, switch):
        return self.dist[switch]


def bfs_from(t: Topology, s: int) -> DistanceTable:
    dist = np.full(t.N, UNREACHABLE, dtype=np.int64)
    dist[s] = 0
    queue = deque([s])
    adj = t.adjacency
    while queue:
        c = queue.popleft()
        nd = dist[c] + 1
        for n in adj[c]:
            if dist[n] == UNREACHABLE:
                dist[n] = nd
                queue.append(n)
    return DistanceTable(s, dist)


def distance_matrix(t: Topology, sources=None) -> np.ndarray:
    """Rows of hop counts from ``sources`` (default: all switches), -1 if unreachable."""
    indptr, indices = t.csr
    src = np.arange(t.N) if sources is None else np.asarray(sources, dtype=np.int64)
    return _bfs.distance_rows(indptr, indices, src)


@dataclass
class _Sweep:
    # counts[r]: ordered pairs (source in this level, target anywhere) at distance r
    all_targets: np.ndarray
    # same, restricted to endpoint-bearing targets
    leaf_targets: np.ndarray
    unreached: int
    sources: int


def _level_sweep(t: Topology, level: int) -> _Sweep:
    cache = t.meta.setdefault("_sweeps", {})
    if level not in cache:
        indptr, indices = t.csr
        sources = np.flatnonzero(t.level_of == level)
        group = (np.asarray(t.endpoints) > 0).astype(np.int64)
        counts, unreached = _bfs.sphere_counts(indptr, indices, sources, group, 2)
        last = int(np.max(np.flatnonzero(counts.sum(axis=0)))) + 1
        cache[level] = _Sweep(
            all_targets=counts[:, :last].sum(axis=0),
            leaf_targets=counts[1, :last].copy(),
            unreached=int(unreached.sum()),
            sources=len(sources),
        )
    return cache[level]


def _leaf_sweep(t: Topology):
    cache = t.meta.setdefault("_sweeps", {})
    if "leaf" not in cache:
        leaves = t.leaves
        if len(leaves) == 0:
            raise NoEndpoints("topology has no endpoints")
        indptr, indices = t.csr
        group = (np.asarray(t.endpoints) > 0).astype(np.int64)
        counts, unreached = _bfs.sphere_counts(indptr, indices, leaves, group, 2)
        nz = np.flatnonzero(counts[1])
        cache["leaf"] = (counts[1, : nz.max() + 1].copy(), int(unreached[1]))
    return cache["leaf"]


def _find_unreachable(t: Topology, sources, targets):
    targets = np.asarray(targets)
    for s in sources:
        dist = bfs_from(t, int(s)).dist
        bad = targets[dist[targets] == UNREACHABLE]
        if len(bad):
            return int(s), int(bad[0])
    raise AssertionError("sweep reported unreachable pairs but none were found")


def leaf_metrics(t: Topology) -> tuple[int, float]:
    """Diameter and average distance over ordered pairs of distinct leaves."""
    hist, unreached = _leaf_sweep(t)
    if unreached:
        raise Disconnected(_find_unreachable(t, t.leaves, t.leaves))
    L = len(t.leaves)
    if L < 2:
        return 0, 0.0
    r = np.arange(len(hist))
    D = int(r[hist > 0].max())
    total = int((r * hist).sum())
    return D, total / (L * (L - 1))


def full_metrics(t: Topology) -> tuple[int, float]:
    """Diameter and average distance over ordered pairs of distinct switches."""
    total = 0
    pairs = 0
    Dstar = 0
    for level in range(len(t.levels)):
        sw = _level_sweep(t, level)
        if sw.unreached:
            raise Disconnected(_find_unreachable(t, np.flatnonzero(t.level_of == level), np.arange(t.N)))
        r = np.arange(len(sw.all_targets))
        total += int((r * sw.all_targets).sum())
        pairs += int(sw.all_targets[1:].sum())
        Dstar = max(Dstar, int(r[sw.all_targets > 0].max()))
    return Dstar, (total / pairs if pairs else 0.0)


def distance_distribution(t: Topology, level: int) -> np.ndarray:
    """Mean sphere sizes ``n_r`` around switches of ``level`` (0-based).

    Entry ``r`` is the average over centers of the number of switches at
    distance exactly ``r``; entries for ``r >= 1`` sum to ``N - 1`` on a
    connected topology.
    """
    sw = _level_sweep(t, level)
    return sw.all_targets / sw.sources


def capacity_limit(t: Topology, A: float | None = None) -> float:
    if t.S == 0:
        raise NoEndpoints("capacity limit needs endpoints")
    if A is None:
        _, A = leaf_metrics(t)
    return 2 * t.M / (t.S * A)


def link_cost(t: Topology) -> float:
    if t.S == 0:
        raise NoEndpoints("link cost needs endpoints")
    return t.M / t.S


def switch_cost(t: Topology) -> float:
    if t.S == 0:
        raise NoEndpoints("switch cost needs endpoints")
    return t.N / t.S


@dataclass
class MetricsReport:
    D: int
    Dstar: int
    A: float
    Astar: float
    theta: float
    cost_links: float
    cost_switches: float
    S: int
    N: int
    M: int
    distance_histograms: dict[int, list[float]] = field(default_factory=dict)

    FLAT_FIELDS = ("S", "N", "M", "D", "Dstar", "A", "Astar", "theta", "cost_links", "cost_switches")

    def flat(self) -> dict:
        return {k: getattr(self, k) for k in self.FLAT_FIELDS}

    def to_json(self) -> str:
        d = asdict(self)
        d["distance_histograms"] = {str(k): v for k, v in self.distance_histograms.items()}
        return json.dumps(d, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.FLAT_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerow(self.flat())
        return buf.getvalue()

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "r", "count"])
        for level, seq in sorted(self.distance_histograms.items()):
            for r, c in enumerate(seq):
                w.writerow([level, r, c])
        return buf.getvalue()


def metrics_report(t: Topology, full: bool = True) -> MetricsReport:
    """All metrics in one record.  ``full=False`` skips the all-switch sweep;
    ``Dstar``/``Astar`` are then reported as -1/nan."""
    D, A = leaf_metrics(t)
    if full:
        Dstar, Astar = full_metrics(t)
        hists = {lvl + 1: distance_distribution(t, lvl).tolist() for lvl in range(len(t.levels))}
    else:
        Dstar, Astar, hists = -1, float("nan"), {}
    return MetricsReport(
        D=D, Dstar=Dstar, A=A, Astar=Astar,
        theta=capacity_limit(t, A),
        cost_links=link_cost(t), cost_switches=switch_cost(t),
        S=t.S, N=t.N, M=t.M, distance_histograms=hists,
    )
