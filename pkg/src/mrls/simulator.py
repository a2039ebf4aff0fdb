"""Flit-timed simulation of input/output-buffered switches.

Three experiment drivers are provided: :func:`run_throughput` (Bernoulli
traffic, accepted load after a warmup), :func:`run_latency` (mice and
elephant messages, latency percentiles) and :func:`run_all2all`
(completion time of a collective).  The heavy lifting happens in
:mod:`mrls._sim`; this module prepares arrays and interprets results.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _sim
from .errors import (CornerEncountered, CreditUnderflow, DeadlockDetected,
                     HopBoundExceeded, SaturatedAtLoad)
from .metrics import leaf_metrics
from .routing import CloserBits, KspTable, corner_check, ksp_build, max_route_length_bound, vc_count
from .topology import Topology

PERCENTILES = (50.0, 99.0, 99.9, 99.99)
ROUTINGS = ("polarized", "min", "ksp")
SATURATION_RATIO = 0.98


@dataclass(frozen=True)
class SimConfig:
    flits_per_packet: int = 16
    input_buffer: int = 8
    output_buffer: int = 4
    crossbar_speedup: int = 2
    vc_count: int | None = None
    allocator: str = "random"
    seed: int = 0
    warmup_cycles: int = 20_000
    measurement_cycles: int = 50_000
    offered_load: float = 1.0
    router_delay: int = 1
    link_latency: int = 1
    penalty: int = 16
    stall_window: int = 10_000
    check_every: int = 0
    drain_cycles: int = 0
    max_cycles: int = 20_000_000
    trace_events: int = 0
    trace_path: str | None = None
    ksp_reselect: bool = False
    latency_bins: int = 1 << 18

    def check(self) -> None:
        for name in ("flits_per_packet", "input_buffer", "output_buffer", "crossbar_speedup",
                     "router_delay", "link_latency", "stall_window", "latency_bins"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.vc_count is not None and self.vc_count < 1:
            raise ValueError("vc_count must be positive")
        if self.warmup_cycles < 0 or self.measurement_cycles < 0:
            raise ValueError("cycle counts must be non-negative")
        if not 0.0 <= self.offered_load <= 1.0:
            raise ValueError("offered_load is in flits/cycle/endpoint and must lie in [0, 1]")
        if self.allocator != "random":
            raise ValueError("only the random allocator is implemented")


class PatternKind(enum.Enum):
    UN = "uniform"
    REP = "random-endpoint-permutation"
    RSP = "random-switch-permutation"
    BU = "bipartite-uniform"
    ME = "mice-elephant"
    A2A = "all2all"


@dataclass(frozen=True)
class TrafficPattern:
    kind: PatternKind
    mice_fraction: float = 0.9
    elephant_packets: int = 16
    packets_per_message: int = 1
    task_count: int | None = None

    @classmethod
    def parse(cls, name: str, **kw) -> "TrafficPattern":
        key = name.strip().upper()
        aliases = {"UNIFORM": "UN", "MICE-ELEPHANT": "ME", "ALL2ALL": "A2A"}
        key = aliases.get(key, key)
        try:
            return cls(PatternKind[key], **kw)
        except KeyError:
            valid = ", ".join(k.name for k in PatternKind)
            raise ValueError(f"unknown traffic pattern {name!r}; valid: {valid}") from None

    @property
    def name(self) -> str:
        return self.kind.name

    @property
    def mean_packets(self) -> float:
        if self.kind is PatternKind.ME:
            f = self.mice_fraction
            return f + (1 - f) * self.elephant_packets
        return float(self.packets_per_message)


def derangement(n: int, rng) -> np.ndarray:
    """Uniform random permutation of ``range(n)`` without fixed points."""
    if n < 2:
        raise ValueError("a derangement needs at least two elements")
    while True:
        p = rng.permutation(n)
        if not (p == np.arange(n)).any():
            return p


@dataclass
class Routing:
    name: str = "polarized"
    ksp: KspTable | None = None
    K: int = 250

    def __post_init__(self):
        if self.name not in ROUTINGS:
            raise ValueError(f"unknown routing {self.name!r}; valid: {', '.join(ROUTINGS)}")


@dataclass
class SimStats:
    topology: str
    routing: str
    pattern: str
    offered_load: float
    seed: int
    accepted_load: float
    cycles: int
    injected_packets: int
    delivered_packets: int
    in_flight: int
    latency_percentiles: dict = field(default_factory=dict)
    completion_cycles: int | None = None
    link_utilization: list = field(default_factory=list)
    hop_histogram: list = field(default_factory=list)
    volume_split: dict = field(default_factory=dict)
    checks_run: int = 0
    generated_load: float = 0.0
    undrained_messages: int = 0

    CSV_FIELDS = ("topology", "routing", "pattern", "load", "seed", "accepted_load", "cycles",
                  "injected_packets", "delivered_packets", "in_flight", "completion_cycles",
                  "p50", "p99", "p99.9", "p99.99", "max_hops")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def csv_row(self) -> dict:
        lat = self.latency_percentiles.get("all", {})
        hops = [i for i, c in enumerate(self.hop_histogram) if c]
        return {
            "topology": self.topology, "routing": self.routing, "pattern": self.pattern,
            "load": self.offered_load, "seed": self.seed, "accepted_load": self.accepted_load,
            "cycles": self.cycles, "injected_packets": self.injected_packets,
            "delivered_packets": self.delivered_packets, "in_flight": self.in_flight,
            "completion_cycles": "" if self.completion_cycles is None else self.completion_cycles,
            "p50": lat.get("50", ""), "p99": lat.get("99", ""), "p99.9": lat.get("99.9", ""),
            "p99.99": lat.get("99.99", ""), "max_hops": max(hops) if hops else 0,
        }


def stats_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SimStats.CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.csv_row())
    return buf.getvalue()


def percentiles_from_histogram(hist: np.ndarray, ranks=PERCENTILES) -> dict:
    total = int(hist.sum())
    if total == 0:
        return {}
    cum = np.cumsum(hist)
    return {f"{p:g}": int(np.searchsorted(cum, p / 100.0 * total - 1e-9)) for p in ranks}


def zero_load_latency(hops: int, cfg: SimConfig) -> int:
    """Contention-free latency of a one-packet message crossing ``hops`` links
    between switches: every switch costs routing plus one crossbar cycle, every
    link its latency, and the tail trails the head by ``F - 1`` cycles."""
    return (hops + 2) * cfg.link_latency + (hops + 1) * (cfg.router_delay + 1) + cfg.flits_per_packet - 1


# ---------------------------------------------------------------------------


@dataclass
class _Net:
    deg: np.ndarray
    nbr: np.ndarray
    port_base: np.ndarray
    port_peer: np.ndarray
    port_ep: np.ndarray
    port_switch: np.ndarray
    leaf_row: np.ndarray
    dist: np.ndarray
    ep_switch: np.ndarray
    ep_gp: np.ndarray
    leaf_ep_off: np.ndarray
    leaf_eps: np.ndarray


def _network(t: Topology) -> _Net:
    cached = t.meta.get("_simnet")
    if cached is not None:
        return cached
    bits = CloserBits(t)
    N = t.N
    deg = t.degree.astype(np.int64)
    eps = np.asarray(t.endpoints, dtype=np.int64)
    port_base = np.zeros(N + 1, dtype=np.int64)
    np.cumsum(deg + eps, out=port_base[1:])
    GP = int(port_base[-1])
    port_peer = np.full(GP, -1, dtype=np.int64)
    port_ep = np.full(GP, -1, dtype=np.int64)
    port_switch = np.repeat(np.arange(N), deg + eps)
    for a, pa, b, pb in t.edges():
        port_peer[port_base[a] + pa] = port_base[b] + pb
        port_peer[port_base[b] + pb] = port_base[a] + pa
    ep_switch = np.repeat(np.arange(N), eps)
    local = np.arange(t.S) - t.endpoint_offsets[ep_switch]
    ep_gp = port_base[ep_switch] + deg[ep_switch] + local
    port_ep[ep_gp] = np.arange(t.S)
    leaves = t.leaves
    leaf_ep_off = np.concatenate([[0], np.cumsum(eps[leaves])]).astype(np.int64)
    net = _Net(deg, bits.neighbors.astype(np.int64), port_base, port_peer, port_ep, port_switch,
               t.leaf_index.astype(np.int64), np.ascontiguousarray(bits.dist), ep_switch.astype(np.int64),
               ep_gp.astype(np.int64), leaf_ep_off, np.arange(t.S, dtype=np.int64))
    t.meta["_simnet"] = net
    return net


def default_vc_count(t: Topology, routing: str) -> int:
    """VCs needed for one VC per two hops: polarized routes may take up to
    ``2 D* - 2`` hops, minimal ones at most ``D``."""
    if routing == "polarized":
        return vc_count(max_route_length_bound(t))
    D, _ = leaf_metrics(t)
    return vc_count(max(D, 1))


def _ksp_arrays(t: Topology, table: KspTable):
    leaves = [int(x) for x in t.leaves]
    L = len(leaves)
    pair_off = np.zeros(L * L + 1, dtype=np.int64)
    path_off, nodes = [0], []
    k = 0
    for i, s in enumerate(leaves):
        for j, d in enumerate(leaves):
            if s != d:
                for p in table.paths[(s, d)]:
                    nodes.extend(int(x) for x in p)
                    path_off.append(len(nodes))
                    k += 1
            pair_off[i * L + j + 1] = k
    return (np.array(path_off[:-1] or [0], dtype=np.int64), np.array(nodes or [0], dtype=np.int64),
            pair_off)


def _label(t: Topology) -> str:
    return t.meta.get("label") or f"{t.family or 'topology'}-S{t.S}-N{t.N}"


_STATUS_ERRORS = {
    _sim.ST_CREDIT: "credit accounting violated",
    _sim.ST_LOSS: "packet conservation violated",
    _sim.ST_OVERFLOW: "internal event or pool capacity exceeded",
}


def _run(t: Topology, routing: Routing | str, pattern: TrafficPattern, cfg: SimConfig, *,
         drain: int = 0) -> SimStats:
    cfg.check()
    if isinstance(routing, str):
        routing = Routing(routing)
    if t.S < 2:
        raise ValueError("simulation needs at least two endpoints")
    net = _network(t)
    if routing.name == "polarized":
        corners = corner_check(t)
        if corners:
            raise CornerEncountered(*corners[0])
    V = cfg.vc_count or default_vc_count(t, routing.name)
    code = {"polarized": _sim.R_POLARIZED, "min": _sim.R_MIN, "ksp": _sim.R_KSP}[routing.name]
    if routing.name == "ksp":
        table = routing.ksp or ksp_build(t, routing.K, seed=cfg.seed)
        path_off, path_nodes, pair_off = _ksp_arrays(t, table)
    else:
        path_off = path_nodes = np.zeros(1, dtype=np.int64)
        pair_off = np.zeros(1, dtype=np.int64)

    rng = np.random.default_rng([cfg.seed, 2])
    S = t.S
    L = len(t.leaves)
    perm = np.zeros(1, dtype=np.int64)
    leaf_perm = np.zeros(1, dtype=np.int64)
    half_of_leaf = np.zeros(max(L, 1), dtype=np.int64)
    half_off = np.zeros(3, dtype=np.int64)
    half_eps = np.zeros(1, dtype=np.int64)
    kind = pattern.kind
    pcode = _sim.P_UNIFORM
    if kind is PatternKind.REP:
        pcode, perm = _sim.P_PERM, derangement(S, rng).astype(np.int64)
    elif kind is PatternKind.RSP:
        pcode, leaf_perm = _sim.P_SWITCH_PERM, derangement(L, rng).astype(np.int64)
    elif kind is PatternKind.BU:
        if L < 2:
            raise ValueError("bipartite traffic needs at least two leaves")
        pcode = _sim.P_BIPARTITE
        order = rng.permutation(L)
        half_of_leaf[order[L // 2:]] = 1
        groups = [np.concatenate([np.arange(net.leaf_ep_off[r], net.leaf_ep_off[r + 1])
                                  for r in range(L) if half_of_leaf[r] == h]) for h in (0, 1)]
        half_off = np.array([0, len(groups[0]), len(groups[0]) + len(groups[1])], dtype=np.int64)
        half_eps = np.concatenate(groups).astype(np.int64)
    elif kind is PatternKind.A2A:
        pcode = _sim.P_ALL2ALL
    tasks = pattern.task_count or 0
    if kind is PatternKind.A2A and not 1 <= tasks <= S:
        raise ValueError(f"task_count must lie in [1, {S}]")

    p_mice = pattern.mice_fraction if kind is PatternKind.ME else 1.0
    F = cfg.flits_per_packet
    gen_p = cfg.offered_load / (F * pattern.mean_packets)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(S, dtype=np.uint64)
    seeds[seeds == 0] = 0x9E3779B97F4A7C15
    alloc = np.random.SeedSequence([cfg.seed, 1]).generate_state(1, dtype=np.uint64)
    alloc[alloc == 0] = 1

    if kind is PatternKind.A2A:
        warmup, measure_end, max_cycles = 0, cfg.max_cycles, cfg.max_cycles
    else:
        warmup = cfg.warmup_cycles
        measure_end = warmup + cfg.measurement_cycles
        max_cycles = measure_end if not drain else min(cfg.max_cycles, measure_end + drain)

    counters = np.zeros(17, dtype=np.int64)
    lat_hist = np.zeros((2, cfg.latency_bins), dtype=np.int64)
    hop_hist = np.zeros(2 * V + 2, dtype=np.int64)
    link_flits = np.zeros(len(net.port_peer), dtype=np.int64)
    trace = np.zeros((max(cfg.trace_events, 1), 4), dtype=np.int64)

    status = _sim.simulate(
        net.deg, net.nbr, net.port_base, net.port_peer, net.port_ep, net.port_switch,
        net.leaf_row, net.dist, net.ep_switch, net.ep_gp,
        code, cfg.penalty, path_off, path_nodes, pair_off, cfg.ksp_reselect,
        pcode, gen_p, p_mice, pattern.elephant_packets, perm, leaf_perm, net.leaf_ep_off,
        net.leaf_eps, half_of_leaf, half_off, half_eps, tasks, pattern.packets_per_message,
        F, cfg.input_buffer, cfg.output_buffer, V, cfg.crossbar_speedup, cfg.router_delay,
        cfg.link_latency,
        seeds, alloc, warmup, measure_end, max_cycles, drain,
        cfg.stall_window, cfg.check_every, cfg.trace_events,
        counters, lat_hist, hop_hist, link_flits, trace,
    )

    trace_path = None
    if cfg.trace_events and cfg.trace_path:
        trace_path = _write_trace(cfg.trace_path, trace, int(counters[16]))
    if status == _sim.ST_DEADLOCK:
        raise DeadlockDetected(int(counters[7]), int(counters[8]), trace_path)
    if status == _sim.ST_CORNER:
        raise CornerEncountered(int(counters[9]), int(counters[10]), int(counters[11]))
    if status == _sim.ST_HOPS:
        raise HopBoundExceeded(f"packet needed hop {counters[10]} at switch {counters[11]} with {V} VCs")
    if status != _sim.ST_OK:
        raise CreditUnderflow(f"{_STATUS_ERRORS[status]} (detail {counters[9]}, {counters[10]}, cycle {counters[11]})")

    lat = {}
    if lat_hist.sum():
        lat["all"] = percentiles_from_histogram(lat_hist.sum(axis=0))
        if kind is PatternKind.ME:
            lat["mice"] = percentiles_from_histogram(lat_hist[0])
            lat["elephant"] = percentiles_from_histogram(lat_hist[1])
    volume = {}
    gen_flits = counters[13] + counters[14]
    if kind is PatternKind.ME and gen_flits:
        volume = {"mice": float(counters[13] / gen_flits), "elephant": float(counters[14] / gen_flits)}
    window = cfg.measurement_cycles
    accepted = counters[3] / (S * window) if window and kind is not PatternKind.A2A else 0.0
    util = []
    inter = net.port_peer >= 0
    if window and inter.any() and kind is not PatternKind.A2A:
        frac = link_flits[inter] / window
        util = np.histogram(frac, bins=10, range=(0.0, 1.0))[0].tolist()
    return SimStats(
        topology=_label(t), routing=routing.name, pattern=pattern.name,
        offered_load=cfg.offered_load, seed=cfg.seed, accepted_load=float(accepted),
        cycles=int(counters[0]), injected_packets=int(counters[1]),
        delivered_packets=int(counters[2]), in_flight=int(counters[8]),
        latency_percentiles=lat,
        completion_cycles=int(counters[5]) if kind is PatternKind.A2A else None,
        link_utilization=util, hop_histogram=hop_hist.tolist(), volume_split=volume,
        checks_run=int(counters[12]),
        generated_load=float(counters[4] / (S * window)) if window and kind is not PatternKind.A2A else 0.0,
        undrained_messages=int(counters[15]),
    )


def _write_trace(path, trace, written) -> str:
    n = len(trace)
    order = range(max(0, written - n), written)
    names = ("arrive", "head", "credit", "inj_credit", "ob_free", "deliver")
    with open(path, "w", encoding="utf-8") as fh:
        for i in order:
            cyc, kind, a, b = trace[i % n]
            fh.write(f"{cyc} {names[kind]} {a} {b}\n")
    return str(Path(path))


def run_throughput(t: Topology, routing, pattern: TrafficPattern | str, cfg: SimConfig) -> SimStats:
    if isinstance(pattern, str):
        pattern = TrafficPattern.parse(pattern)
    return _run(t, routing, pattern, cfg)


def run_latency(t: Topology, routing, cfg: SimConfig, pattern: TrafficPattern | None = None) -> SimStats:
    """Message latency percentiles (generation to last-flit arrival, source
    queueing included) for messages generated in the measurement window.

    The run counts as saturated when window messages are still undelivered
    after the drain, or when the accepted load falls below 98% of the load
    actually generated in the window (not the nominal rate, whose Bernoulli
    noise dominates at low loads).
    """
    pattern = pattern or TrafficPattern(PatternKind.ME)
    drain = cfg.drain_cycles or 4 * cfg.measurement_cycles
    stats = _run(t, routing, pattern, cfg, drain=drain)
    if stats.undrained_messages or stats.accepted_load < SATURATION_RATIO * stats.generated_load:
        raise SaturatedAtLoad(cfg.offered_load, stats.accepted_load, stats)
    return stats


def run_all2all(t: Topology, routing, task_count: int, cfg: SimConfig, packets_per_message: int = 1) -> SimStats:
    pattern = TrafficPattern(PatternKind.A2A, packets_per_message=packets_per_message,
                             task_count=task_count)
    return _run(t, routing, pattern, replace(cfg, offered_load=0.0))
