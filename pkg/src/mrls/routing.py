"""Route computation: Polarized routing, K shortest paths and up/down routing.

Polarized routing labels every port of the current switch ``c`` by the change
it causes in the distances to the source ``s`` and the destination ``t``.  A
packet only needs two "closer" bits per port to compute the label, and one
integer of state (the balance ``d(c,s) - d(c,t)``) to know which half of
the route it is in.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from . import _bfs
from .errors import CornerEncountered, Disconnected, HopBoundExceeded, NotMultistage
from .metrics import full_metrics, leaf_metrics
from .topology import Topology

DEFAULT_PENALTY = 16
CORNER_SAMPLE_THRESHOLD = 5000
CORNER_SAMPLE_SOURCES = 128


class PortLabel(enum.Enum):
    FORWARD = (1, -1)
    EXPANSION = (1, 1)
    CONTRACTION = (-1, -1)
    BACKTRACK = (-1, 1)

    @property
    def delta(self) -> tuple[int, int]:
        return self.value

    @property
    def short(self) -> str:
        return self.name[0]


class Phase(enum.Enum):
    BEFORE_MIDDLE = "before-middle"
    AFTER_MIDDLE = "after-middle"

    @classmethod
    def from_balance(cls, balance: int) -> "Phase":
        return cls.BEFORE_MIDDLE if balance < 0 else cls.AFTER_MIDDLE


def _padded_neighbors(t: Topology) -> np.ndarray:
    width = max(1, int(t.degree.max()) if t.N else 1)
    nbr = np.full((t.N, width), -1, dtype=np.int64)
    for c, adj in enumerate(t.adjacency):
        nbr[c, : len(adj)] = adj
    return nbr


class CloserBits:
    """Per (switch, port, leaf) bit: is the neighbor closer to the leaf?

    The bits are derived on demand from the leaf distance rows, which take
    ``N1 * N`` small integers instead of ``N * R * N1`` bits.
    """

    def __init__(self, topo: Topology):
        self.topo = topo
        leaves = topo.leaves
        indptr, indices = topo.csr
        self.dist = _bfs.distance_rows(indptr, indices, leaves)
        if (self.dist < 0).any():
            i, c = np.argwhere(self.dist < 0)[0]
            raise Disconnected((int(leaves[i]), int(c)))
        self.dist.setflags(write=False)
        self.neighbors = _padded_neighbors(topo)
        self.neighbors.setflags(write=False)
        self._col = topo.leaf_index

    def distance(self, x: int, c: int) -> int:
        """Hops between leaf ``x`` and any switch ``c``."""
        return int(self.dist[self._row(x), c])

    def _row(self, x: int) -> int:
        row = int(self._col[x])
        if row < 0:
            raise ValueError(f"switch {x} carries no endpoints")
        return row

    def closer(self, c: int, p: int, x: int) -> bool:
        row = self.dist[self._row(x)]
        return bool(row[self.topo.adjacency[c][p]] < row[c])

    def port_bits(self, c: int, x: int) -> np.ndarray:
        row = self.dist[self._row(x)]
        nbrs = np.asarray(self.topo.adjacency[c], dtype=np.int64)
        return row[nbrs] < row[c]

    def table(self) -> np.ndarray:
        """Dense ``bits[c, p, leaf_row]``; padding ports read False."""
        d = self.dist.T  # (N, L)
        nbr = self.neighbors
        safe = np.where(nbr < 0, 0, nbr)
        bits = d[safe] < d[:, None, :]
        bits[nbr < 0] = False
        return bits


def build_closer_bits(t: Topology) -> CloserBits:
    return CloserBits(t)


def classify_port(c: int, p: int, s: int, t: int, bits: CloserBits) -> PortLabel:
    to_s = -1 if bits.closer(c, p, s) else 1
    to_t = -1 if bits.closer(c, p, t) else 1
    return PortLabel((to_s, to_t))


def port_labels(c: int, s: int, t: int, bits: CloserBits) -> list[PortLabel]:
    cs = bits.port_bits(c, s)
    ct = bits.port_bits(c, t)
    return [PortLabel((-1 if a else 1, -1 if b else 1)) for a, b in zip(cs, ct)]


def polarized_candidates(c: int, s: int, t: int, bits: CloserBits, phase) -> list[tuple[int, int]]:
    """Allowed ports at ``c`` as ``(port, penalty_class)``; deroutes have class 1."""
    if c == t:
        return []
    phase = Phase(phase)
    out = []
    for p, label in enumerate(port_labels(c, s, t, bits)):
        if label is PortLabel.FORWARD:
            out.append((p, 0))
        elif label is PortLabel.EXPANSION and phase is Phase.BEFORE_MIDDLE:
            out.append((p, 1))
        elif label is PortLabel.CONTRACTION and phase is Phase.AFTER_MIDDLE:
            out.append((p, 1))
    if not out:
        raise CornerEncountered(s, t, c)
    return out


@dataclass(frozen=True)
class Route:
    source: int
    target: int
    switches: tuple[int, ...]
    labels: tuple[PortLabel, ...] = ()
    vcs: tuple[int, ...] = ()

    @property
    def length(self) -> int:
        return len(self.switches) - 1

    def to_line(self) -> str:
        parts = [self.source, self.target, self.length, *self.switches, "vcs", *self.vcs]
        return " ".join(str(x) for x in parts)

    @classmethod
    def from_line(cls, line: str) -> "Route":
        tok = line.split()
        s, t, n = int(tok[0]), int(tok[1]), int(tok[2])
        sw = tuple(int(x) for x in tok[3 : 4 + n])
        if tok[4 + n] != "vcs":
            raise ValueError(f"malformed route line: {line!r}")
        vcs = tuple(int(x) for x in tok[5 + n :])
        return cls(s, t, sw, (), vcs)


def vc_for_hop(hop_index: int, max_hops: int) -> int:
    if not 0 <= hop_index < max_hops:
        raise HopBoundExceeded(f"hop {hop_index} outside the bound of {max_hops} hops")
    return hop_index // 2


def vc_count(max_hops: int) -> int:
    return (max_hops + 1) // 2


def max_route_length_bound(t: Topology, Dstar: int | None = None) -> int:
    if Dstar is None:
        Dstar, _ = full_metrics(t)
    D, _ = leaf_metrics(t)
    bound = 2 * Dstar - 2
    assert bound <= 2 * D, f"2*D*-2 = {bound} exceeds 2*D = {2 * D}"
    return bound


def zero_occupancy(c: int, ports: np.ndarray) -> np.ndarray:
    return np.zeros(len(ports))


def polarized_route(topo: Topology, s: int, dst: int, selector=None, *, bits: CloserBits | None = None,
                    rng=None, penalty: int = DEFAULT_PENALTY, max_hops: int | None = None) -> Route:
    """Route one packet hop by hop.

    ``selector(c, ports)`` returns the occupancy of each candidate port;
    the port with the smallest ``occupancy + penalty * class`` wins and ties
    are broken uniformly with ``rng``.
    """
    if bits is None:
        bits = CloserBits(topo)
    if rng is None:
        rng = np.random.default_rng(0)
    selector = selector or zero_occupancy
    if s == dst:
        return Route(s, dst, (s,))
    balance = -bits.distance(dst, s)
    limit = max_hops if max_hops is not None else 2 * topo.N
    c = s
    switches, labels = [s], []
    while c != dst:
        if len(labels) >= limit:
            raise HopBoundExceeded(f"route {s}->{dst} exceeded {limit} hops")
        cand = polarized_candidates(c, s, dst, bits, Phase.from_balance(balance))
        ports = np.array([p for p, _ in cand])
        cls = np.array([k for _, k in cand])
        cost = np.asarray(selector(c, ports), dtype=float) + penalty * cls
        best = np.flatnonzero(cost == cost.min())
        p = int(ports[best[rng.integers(len(best))]] if len(best) > 1 else ports[best[0]])
        label = PortLabel.FORWARD if cls[ports == p][0] == 0 else (
            PortLabel.EXPANSION if balance < 0 else PortLabel.CONTRACTION)
        if label is PortLabel.FORWARD:
            balance += 2
        c = topo.adjacency[c][p]
        switches.append(c)
        labels.append(label)
    vcs = tuple(h // 2 for h in range(len(labels)))
    return Route(s, dst, tuple(switches), tuple(labels), vcs)


# ---------------------------------------------------------------------------
# Corners


@nb.njit(cache=True)
def _automaton_reach(indptr, indices, ds, dt, s):
    """Switches reachable from ``s`` by Polarized-permitted hops."""
    n = len(indptr) - 1
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    seen[s] = True
    stack[0] = s
    top = 1
    while top:
        top -= 1
        c = stack[top]
        if dt[c] == 0:
            continue
        before = ds[c] < dt[c]
        for k in range(indptr[c], indptr[c + 1]):
            v = indices[k]
            if seen[v]:
                continue
            up_s = ds[v] > ds[c]
            up_t = dt[v] > dt[c]
            ok = (up_s and not up_t) or (before and up_s and up_t) or (
                (not before) and (not up_s) and (not up_t))
            if ok:
                seen[v] = True
                stack[top] = v
                top += 1
    return seen


def corner_check(topo: Topology, bits: CloserBits | None = None, *,
                 threshold: int = CORNER_SAMPLE_THRESHOLD,
                 sample_sources: int = CORNER_SAMPLE_SOURCES, seed: int = 0) -> list[tuple[int, int, int]]:
    """Corner triples ``(s, t, c)`` with ``c`` reachable from ``s`` by the router.

    A switch with a neighbor closer to ``t`` always has a Forward or
    Contraction port, so after the middle nothing can get stuck.  Before
    the middle only Forward and Expansion hops move away from ``s``;
    corners are therefore local maxima of ``d(., s)`` with
    ``d(c, s) < d(c, t)``.  Those are found per source and then checked for
    reachability.  Above ``threshold`` switches only ``sample_sources``
    random source leaves are examined (against every destination).
    """
    if bits is None:
        bits = CloserBits(topo)
    leaves = topo.leaves
    rows = np.arange(len(leaves))
    if topo.N > threshold and len(leaves) > sample_sources:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(len(leaves), size=sample_sources, replace=False))
    indptr, indices = topo.csr
    nbr = bits.neighbors
    pad = nbr < 0
    safe = np.where(pad, 0, nbr)
    found = []
    for i in rows:
        ds = bits.dist[i].astype(np.int64)
        nd = np.where(pad, -1, ds[safe])
        peaks = np.flatnonzero(nd.max(axis=1) < ds)
        if len(peaks) == 0:
            continue
        sub = bits.dist[:, peaks] > ds[peaks]  # (L, peaks)
        sub[i] = False
        for j in np.flatnonzero(sub.any(axis=1)):
            dt = bits.dist[j].astype(np.int64)
            seen = _automaton_reach(indptr, indices, ds, dt, int(leaves[i]))
            for c in peaks[sub[j]]:
                if seen[c]:
                    found.append((int(leaves[i]), int(leaves[j]), int(c)))
    return found


def corner_csv(triples) -> str:
    return "s,t,c\n" + "".join(f"{s},{t},{c}\n" for s, t, c in triples)


# ---------------------------------------------------------------------------
# K shortest paths


@dataclass
class KspTable:
    K: int
    paths: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __getitem__(self, pair) -> np.ndarray:
        return self.paths[pair]

    def __len__(self) -> int:
        return len(self.paths)

    def to_text(self) -> str:
        lines = [f"ksp K {self.K} pairs {len(self.paths)}"]
        for (s, t), arr in sorted(self.paths.items()):
            lines.append(f"pair {s} {t} {arr.shape[0]} {arr.shape[1] - 1}")
            lines.extend(" ".join(map(str, row)) for row in arr.tolist())
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "KspTable":
        it = iter(text.splitlines())
        head = next(it).split()
        if head[:2] != ["ksp", "K"]:
            raise ValueError("not a KSP table")
        table = cls(int(head[2]))
        for line in it:
            tok = line.split()
            if not tok:
                continue
            if tok[0] != "pair":
                raise ValueError(f"expected a pair header, got {line!r}")
            s, t, count = int(tok[1]), int(tok[2]), int(tok[3])
            rows = [[int(x) for x in next(it).split()] for _ in range(count)]
            table.paths[(s, t)] = np.array(rows, dtype=np.int32)
        return table

    @classmethod
    def load(cls, path) -> "KspTable":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _minimal_paths(adj, dt, s, K, rng):
    """Up to ``K`` distinct minimal paths from ``s`` down the distance DAG of ``dt``."""
    out: list[list[int]] = []
    path = [s]

    def walk(c):
        if dt[c] == 0:
            out.append(list(path))
            return len(out) >= K
        nxt = [v for v in adj[c] if dt[v] == dt[c] - 1]
        for k in rng.permutation(len(nxt)):
            path.append(nxt[k])
            if walk(nxt[k]):
                return True
            path.pop()
        return False

    walk(s)
    return out


def ksp_build(topo: Topology, K: int, seed: int = 0, pairs=None) -> KspTable:
    """Up to ``K`` minimal paths per ordered leaf pair, in shuffled order."""
    if K < 1:
        raise ValueError("K must be at least 1")
    bits = CloserBits(topo)
    leaves = [int(x) for x in topo.leaves]
    rng = np.random.default_rng(seed)
    if pairs is None:
        pairs = [(s, t) for t in leaves for s in leaves if s != t]
    table = KspTable(K)
    adj = topo.adjacency
    for s, t in pairs:
        dt = bits.dist[bits._row(t)]
        paths = _minimal_paths(adj, dt, s, K, rng)
        arr = np.array(paths, dtype=np.int32)
        table.paths[(s, t)] = arr[rng.permutation(len(arr))]
    return table


# ---------------------------------------------------------------------------
# Up/down


def updown_route(topo: Topology, s: int, dst: int, bits: CloserBits | None = None) -> Route:
    """Minimal route that climbs and then descends, choosing among the
    eligible ports by destination index."""
    if topo.family == "mrls":
        raise NotMultistage("random leaf-spine networks need more than one up/down phase")
    if bits is None:
        bits = CloserBits(topo)
    if s == dst:
        return Route(s, dst, (s,))
    lvl = topo.level_of
    switches = [s]
    c, going_up = s, True
    while c != dst:
        dc = bits.distance(dst, c)
        nxt = [v for v in topo.adjacency[c] if bits.distance(dst, v) == dc - 1]
        up = [v for v in nxt if lvl[v] > lvl[c]]
        down = [v for v in nxt if lvl[v] < lvl[c]]
        if going_up and up:
            choice = up
        elif down:
            choice, going_up = down, False
        else:
            raise NotMultistage(f"no up/down route from {s} to {dst}")
        c = choice[dst % len(choice)]
        switches.append(c)
    n = len(switches) - 1
    labels = (PortLabel.FORWARD,) * n
    return Route(s, dst, tuple(switches), labels, tuple(h // 2 for h in range(n)))


def path_route(path, max_hops: int | None = None) -> Route:
    """Wrap a stored minimal path as a :class:`Route`."""
    sw = tuple(int(x) for x in path)
    n = len(sw) - 1
    vcs = tuple(vc_for_hop(h, max_hops) if max_hops else h // 2 for h in range(n))
    return Route(sw[0], sw[-1], sw, (PortLabel.FORWARD,) * n, vcs)
