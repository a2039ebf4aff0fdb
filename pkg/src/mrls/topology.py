"""Leveled switch topologies: Multipass Random Leaf-Spine, Fat-Tree and
Orthogonal Fat-Tree generators, validation, and a line-oriented text format.

Switches are numbered level by level, leaves first.  Endpoints are implicit:
endpoint ``e`` is the ``e``-th (leaf, local index) pair in leaf order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GenerationStalled, InfeasibleSpec, ParseError

MAX_RESTARTS = 20
FORMAT_HEADER = "# mrls-net topology v1"


@dataclass(frozen=True)
class Topology:
    levels: tuple[int, ...]
    adjacency: tuple[tuple[int, ...], ...]
    endpoints: tuple[int, ...]
    radix: int
    meta: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if sum(self.levels) != len(self.adjacency):
            raise ValueError("level sizes do not add up to the switch count")
        if len(self.endpoints) != len(self.adjacency):
            raise ValueError("one endpoint count per switch is required")

    @property
    def N(self) -> int:
        return len(self.adjacency)

    @cached_property
    def S(self) -> int:
        return sum(self.endpoints)

    @cached_property
    def M(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    @property
    def family(self) -> str | None:
        return self.meta.get("family")

    @cached_property
    def level_of(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.levels)), self.levels)

    @cached_property
    def leaves(self) -> np.ndarray:
        """Endpoint-bearing switches, in id order."""
        return np.flatnonzero(np.asarray(self.endpoints) > 0)

    @cached_property
    def leaf_index(self) -> np.ndarray:
        """Column of each switch among :attr:`leaves`, -1 for the rest."""
        idx = np.full(self.N, -1, dtype=np.int64)
        idx[self.leaves] = np.arange(len(self.leaves))
        return idx

    @cached_property
    def degree(self) -> np.ndarray:
        return np.fromiter((len(a) for a in self.adjacency), dtype=np.int64, count=self.N)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        indptr = np.zeros(self.N + 1, dtype=np.int64)
        np.cumsum(self.degree, out=indptr[1:])
        indices = np.fromiter(
            (n for a in self.adjacency for n in a), dtype=np.int64, count=int(indptr[-1])
        )
        return indptr, indices

    @cached_property
    def endpoint_offsets(self) -> np.ndarray:
        off = np.zeros(self.N + 1, dtype=np.int64)
        np.cumsum(self.endpoints, out=off[1:])
        return off

    def endpoint_id(self, switch: int, local: int) -> int:
        if not 0 <= local < self.endpoints[switch]:
            raise IndexError(f"switch {switch} has no endpoint {local}")
        return int(self.endpoint_offsets[switch]) + local

    def endpoint_switch(self, endpoint: int) -> tuple[int, int]:
        sw = int(np.searchsorted(self.endpoint_offsets, endpoint, side="right")) - 1
        return sw, endpoint - int(self.endpoint_offsets[sw])

    def port_to(self, switch: int, neighbor: int) -> int:
        return self.adjacency[switch].index(neighbor)

    def edges(self):
        """Yield each link once as ``(a, port_a, b, port_b)`` with ``a < b``."""
        for a, nbrs in enumerate(self.adjacency):
            for pa, b in enumerate(nbrs):
                if a < b:
                    yield a, pa, b, self.adjacency[b].index(a)


# ---------------------------------------------------------------------------
# Specs


@dataclass(frozen=True)
class MrlsSpec:
    """Parameters of a Multipass Random Leaf-Spine network.

    ``S`` defaults to ``d * N1``; smaller values depopulate leaves one
    endpoint at a time, spread evenly.  When ``u * N1`` is not a multiple of
    ``R`` the spines absorb the shortfall, each missing at most one port.
    """

    R: int
    u: int
    d: int
    N1: int
    N2: int
    seed: int = 0
    S: int | None = None

    @property
    def f(self) -> float:
        return self.u / self.d

    @property
    def endpoints(self) -> int:
        return self.d * self.N1 if self.S is None else self.S

    @property
    def mean_spine_degree(self) -> float:
        return self.u * self.N1 / self.N2

    @classmethod
    def for_endpoints(cls, R: int, u: int, S: int, seed: int = 0) -> "MrlsSpec":
        d = R - u
        if d <= 0 or u <= 0:
            raise InfeasibleSpec(f"need 0 < u < R, got u={u}, R={R}")
        if S < d:
            raise InfeasibleSpec(f"S={S} is below one full leaf switch (d={d})")
        N1 = -(-S // d)
        N2 = -(-(u * N1) // R)
        return cls(R=R, u=u, d=d, N1=N1, N2=N2, seed=seed, S=S)

    def check(self) -> None:
        R, u, d, N1, N2 = self.R, self.u, self.d, self.N1, self.N2
        if min(R, u, d, N1, N2) <= 0:
            raise InfeasibleSpec(f"all of R, u, d, N1, N2 must be positive: {self}")
        if u + d != R:
            raise InfeasibleSpec(f"u + d must equal R (u={u}, d={d}, R={R})")
        short = R * N2 - u * N1
        if short < 0:
            raise InfeasibleSpec(f"u*N1={u * N1} exceeds spine capacity R*N2={R * N2}")
        if short >= N2:
            raise InfeasibleSpec(
                f"u*N1={u * N1} leaves more than one idle port per spine (R*N2={R * N2})"
            )
        S = self.endpoints
        if not N1 <= S <= d * N1:
            raise InfeasibleSpec(f"S={S} must lie in [N1, d*N1] = [{N1}, {d * N1}]")
        if not 1 <= self.f <= 3:
            warnings.warn(f"thickness factor {self.f:.3f} outside [1, 3]", stacklevel=2)

    def spine_degrees(self) -> np.ndarray:
        total = self.u * self.N1
        deg = np.full(self.N2, total // self.N2, dtype=np.int64)
        deg[: total % self.N2] += 1
        return deg

    def leaf_endpoints(self) -> np.ndarray:
        deficit = self.d * self.N1 - self.endpoints
        eps = np.full(self.N1, self.d - deficit // self.N1, dtype=np.int64)
        extra = deficit % self.N1
        eps[(np.arange(extra) * self.N1) // max(extra, 1)] -= 1
        return eps


@dataclass(frozen=True)
class FtSpec:
    R: int
    h: int
    populated: float = 1.0

    @property
    def k(self) -> int:
        return self.R // 2

    @property
    def endpoints(self) -> int:
        return int(round(2 * self.k ** (self.h + 1) * self.populated))


@dataclass(frozen=True)
class OftSpec:
    q: int

    @property
    def R(self) -> int:
        return 2 * (self.q + 1)

    @property
    def N2(self) -> int:
        return self.q * self.q + self.q + 1

    @property
    def N1(self) -> int:
        return 2 * self.N2


# ---------------------------------------------------------------------------
# Builders


def _from_neighbor_lists(levels, adjacency, endpoints, radix, meta) -> Topology:
    return Topology(
        levels=tuple(int(x) for x in levels),
        adjacency=tuple(tuple(int(n) for n in a) for a in adjacency),
        endpoints=tuple(int(e) for e in endpoints),
        radix=int(radix),
        meta=meta,
    )


def _match_stubs(leaf_stubs, spine_stubs, N2, rng, budget):
    """Pair stubs at random and repair parallel edges with edge swaps.

    Returns the spine assigned to each leaf stub, or None when a duplicate
    cannot be swapped away within ``budget`` attempts.
    """
    spines = rng.permutation(spine_stubs)
    keys = leaf_stubs * N2 + spines
    order = np.argsort(keys, kind="stable")
    dup_mask = np.zeros(len(keys), dtype=bool)
    dup_mask[order[1:]] = keys[order[1:]] == keys[order[:-1]]
    dups = np.flatnonzero(dup_mask)
    if len(dups) == 0:
        return spines

    present: dict[int, int] = {}
    for key in keys.tolist():
        present[key] = present.get(key, 0) + 1
    M = len(keys)
    for e in dups.tolist():
        l1, s1 = int(leaf_stubs[e]), int(spines[e])
        for _ in range(budget):
            f = int(rng.integers(M))
            l2, s2 = int(leaf_stubs[f]), int(spines[f])
            if l1 == l2 or s1 == s2:
                continue
            if l1 * N2 + s2 in present or l2 * N2 + s1 in present:
                continue
            # replace (l1,s1),(l2,s2) by (l1,s2),(l2,s1)
            for old in (l1 * N2 + s1, l2 * N2 + s2):
                present[old] -= 1
                if present[old] == 0:
                    del present[old]
            present[l1 * N2 + s2] = 1
            present[l2 * N2 + s1] = 1
            spines[e], spines[f] = s2, s1
            break
        else:
            return None
    return spines


def _is_complete(spec: MrlsSpec) -> bool:
    return bool(np.all(spec.spine_degrees() == spec.N1))


def build_mrls(spec: MrlsSpec) -> Topology:
    spec.check()
    N1, N2, u = spec.N1, spec.N2, spec.u
    leaf_stubs = np.repeat(np.arange(N1, dtype=np.int64), u)
    spine_stubs = np.repeat(np.arange(N2, dtype=np.int64), spec.spine_degrees())
    budget = N1 * spec.R

    spines = None
    if u == N2 and _is_complete(spec):
        # the only simple wiring is complete bipartite; swaps cannot reach it
        rng = np.random.default_rng([spec.seed, 0])
        spines = np.concatenate([rng.permutation(N2) for _ in range(N1)]).astype(np.int64)
    for attempt in range(0 if spines is not None else MAX_RESTARTS):
        rng = np.random.default_rng([spec.seed, attempt])
        spines = _match_stubs(leaf_stubs, spine_stubs, N2, rng, budget)
        if spines is not None:
            break
    if spines is None:
        raise GenerationStalled(
            f"no simple wiring found for {spec} after {MAX_RESTARTS} restarts"
        )

    leaf_adj = (spines.reshape(N1, u) + N1).tolist()
    by_spine = np.argsort(spines, kind="stable")
    bounds = np.searchsorted(spines[by_spine], np.arange(N2 + 1))
    edge_leaf = leaf_stubs[by_spine]
    spine_adj = [edge_leaf[bounds[s] : bounds[s + 1]].tolist() for s in range(N2)]

    endpoints = np.concatenate([spec.leaf_endpoints(), np.zeros(N2, dtype=np.int64)])
    meta = {"family": "mrls", "spec": spec}
    return _from_neighbor_lists((N1, N2), leaf_adj + spine_adj, endpoints, spec.R, meta)


def build_fat_tree(spec: FtSpec) -> Topology:
    """Folded Clos with ``h + 1`` levels (k-ary tree wiring, k = R/2).

    Switches below the top are indexed by a half bit and ``h`` base-k
    digits; going up from level ``l`` rewrites digit ``l``.  With
    ``populated=0.5`` only one half is built and the top level is kept whole.
    """
    R, h = spec.R, spec.h
    if R < 2 or R % 2 or h < 1:
        raise InfeasibleSpec(f"fat-tree needs even R >= 2 and h >= 1, got R={R}, h={h}")
    if spec.populated not in (1.0, 0.5):
        raise InfeasibleSpec("fat-tree population must be 1.0 or 0.5")
    k = R // 2
    kh = k**h
    halves = 2 if spec.populated == 1.0 else 1
    W = halves * kh
    n_sw = h * W + kh
    adj: list[list[int]] = [[] for _ in range(n_sw)]
    up: list[list[int]] = [[] for _ in range(n_sw)]

    for lvl in range(h):
        base = lvl * W
        weight = k**lvl
        for x in range(W):
            digit = (x // weight) % k
            for j in range(k):
                if lvl < h - 1:
                    y = (lvl + 1) * W + x + (j - digit) * weight
                else:
                    low = x % (kh // k)
                    y = h * W + low + j * (kh // k)
                up[base + x].append(y)
                adj[y].append(base + x)
    for s in range(n_sw):
        adj[s].extend(up[s])

    endpoints = [k] * W + [0] * (n_sw - W)
    levels = [W] * h + [kh]
    meta = {"family": "fat_tree", "spec": spec}
    return _from_neighbor_lists(levels, adj, endpoints, R, meta)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, math.isqrt(n) + 1))


def projective_points(q: int) -> list[tuple[int, int, int]]:
    """Normalized homogeneous coordinates of the points of PG(2, q), q prime."""
    pts = [(1, a, b) for a in range(q) for b in range(q)]
    pts += [(0, 1, a) for a in range(q)]
    pts.append((0, 0, 1))
    return pts


def build_oft(spec: OftSpec) -> Topology:
    """Two columns of leaves (points of PG(2,q)) joined through line spines."""
    q = spec.q
    if not is_prime(q):
        raise InfeasibleSpec(f"q={q} is not prime (prime powers are not supported)")
    pts = np.array(projective_points(q), dtype=np.int64)
    n = len(pts)
    incid = (pts @ pts.T) % q == 0  # incid[point, line]
    adj: list[list[int]] = [[] for _ in range(3 * n)]
    for p in range(n):
        lines = np.flatnonzero(incid[p]).tolist()
        adj[p] = [2 * n + line for line in lines]
        adj[n + p] = [2 * n + line for line in lines]
    for line in range(n):
        pts_on = np.flatnonzero(incid[:, line]).tolist()
        adj[2 * n + line] = pts_on + [n + p for p in pts_on]
    endpoints = [q + 1] * (2 * n) + [0] * n
    meta = {"family": "oft", "spec": spec}
    return _from_neighbor_lists((2 * n, n), adj, endpoints, spec.R, meta)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    kind: str
    switch: int
    ports: tuple[int, ...] = ()
    detail: str = ""

    def __str__(self):
        ports = f" ports {list(self.ports)}" if self.ports else ""
        return f"{self.kind}: switch {self.switch}{ports} {self.detail}".rstrip()


def validate(t: Topology) -> list[Violation]:
    """Check every structural invariant; an empty list means valid."""
    report: list[Violation] = []
    level = t.level_of
    for s, nbrs in enumerate(t.adjacency):
        seen: dict[int, int] = {}
        for p, n in enumerate(nbrs):
            if not 0 <= n < t.N:
                report.append(Violation("bad-neighbor", s, (p,), f"neighbor {n} out of range"))
                continue
            if n == s:
                report.append(Violation("self-loop", s, (p,)))
            if n in seen:
                report.append(Violation("duplicate-edge", s, (seen[n], p), f"both reach {n}"))
            else:
                seen[n] = p
            if abs(int(level[n]) - int(level[s])) != 1:
                report.append(
                    Violation(
                        "not-leveled", s, (p,),
                        f"links level {level[s]} to switch {n} at level {level[n]}",
                    )
                )
            elif s not in t.adjacency[n]:
                report.append(Violation("asymmetric", s, (p,), f"{n} has no port back"))
        if t.endpoints[s] < 0:
            report.append(Violation("negative-endpoints", s))
        if len(nbrs) + t.endpoints[s] > t.radix:
            report.append(
                Violation(
                    "radix-exceeded", s, (),
                    f"{len(nbrs)} ports + {t.endpoints[s]} endpoints > R={t.radix}",
                )
            )
    return report


# ---------------------------------------------------------------------------
# Text format


def save_topology(t: Topology, path) -> None:
    lines = [FORMAT_HEADER]
    lines.append("levels " + " ".join(str(x) for x in t.levels))
    lines.append(f"radix {t.radix}")
    for s, e in enumerate(t.endpoints):
        if e:
            lines.append(f"endpoints {s} {e}")
    for a, pa, b, pb in t.edges():
        lines.append(f"edge {a} {pa} {b} {pb}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _int_token(tokens, idx, lineno, cols):
    try:
        value = int(tokens[idx])
    except (IndexError, ValueError):
        col = cols[idx] if idx < len(cols) else (cols[-1] if cols else 1)
        raise ParseError("expected a non-negative integer", lineno, col) from None
    if value < 0:
        raise ParseError("expected a non-negative integer", lineno, cols[idx])
    return value


def parse_topology(text: str) -> Topology:
    levels = None
    radix = None
    endpoints: dict[int, int] = {}
    edges: list[tuple[int, int, int, int, int, list[int]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        tokens, cols = [], []
        pos = 0
        for tok in body.split():
            pos = body.index(tok, pos)
            tokens.append(tok)
            cols.append(pos + 1)
            pos += len(tok)
        head, nargs = tokens[0], len(tokens) - 1
        if head == "levels":
            if nargs < 1:
                raise ParseError("levels needs at least one size", lineno, cols[0])
            levels = [_int_token(tokens, i, lineno, cols) for i in range(1, nargs + 1)]
        elif head == "radix":
            if nargs != 1:
                raise ParseError("radix takes one value", lineno, cols[0])
            radix = _int_token(tokens, 1, lineno, cols)
        elif head == "endpoints":
            if nargs != 2:
                raise ParseError("endpoints takes <switch> <count>", lineno, cols[0])
            endpoints[_int_token(tokens, 1, lineno, cols)] = _int_token(tokens, 2, lineno, cols)
        elif head == "edge":
            if nargs != 4:
                raise ParseError("edge takes <a> <port> <b> <port>", lineno, cols[0])
            vals = [_int_token(tokens, i, lineno, cols) for i in range(1, 5)]
            edges.append((*vals, lineno, cols))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, cols[0])

    if levels is None:
        raise ParseError("missing 'levels' directive")
    if radix is None:
        raise ParseError("missing 'radix' directive")
    n_sw = sum(levels)
    level_of = np.repeat(np.arange(len(levels)), levels)
    ports: list[dict[int, int]] = [{} for _ in range(n_sw)]
    for a, pa, b, pb, lineno, cols in edges:
        for sw, col in ((a, cols[1]), (b, cols[3])):
            if sw >= n_sw:
                raise ParseError(f"switch {sw} out of range (N={n_sw})", lineno, col)
        if a == b:
            raise ParseError("self-loop", lineno, cols[3])
        if abs(int(level_of[a]) - int(level_of[b])) != 1:
            raise ParseError(
                f"link joins level {level_of[a]} to level {level_of[b]}; "
                "only adjacent levels may be linked",
                lineno, cols[3],
            )
        for sw, port, other, col in ((a, pa, b, cols[2]), (b, pb, a, cols[4])):
            if port in ports[sw]:
                raise ParseError(f"port {port} of switch {sw} used twice", lineno, col)
            ports[sw][port] = other
    adjacency = []
    for sw, pmap in enumerate(ports):
        if sorted(pmap) != list(range(len(pmap))):
            raise ParseError(f"ports of switch {sw} are not contiguous from 0")
        adjacency.append([pmap[p] for p in range(len(pmap))])
    for sw in endpoints:
        if sw >= n_sw:
            raise ParseError(f"endpoints on unknown switch {sw}")
    eps = [endpoints.get(s, 0) for s in range(n_sw)]
    return _from_neighbor_lists(levels, adjacency, eps, radix, {})


def load_topology(path) -> Topology:
    text = Path(path).read_text(encoding="utf-8")
    t = parse_topology(text)
    t.meta["source"] = str(path)
    return t
