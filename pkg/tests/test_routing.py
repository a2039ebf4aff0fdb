import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrls.errors import CornerEncountered, HopBoundExceeded, NotMultistage
from mrls.metrics import full_metrics
from mrls.routing import (CloserBits, KspTable, Phase, PortLabel, Route, build_closer_bits, classify_port,
                          corner_check, corner_csv, ksp_build, max_route_length_bound, path_route,
                          polarized_candidates, polarized_route, port_labels, updown_route, vc_count, vc_for_hop)
from mrls.topology import FtSpec, MrlsSpec, OftSpec, Topology, build_fat_tree, build_mrls, build_oft

from conftest import bfs_oracle

# leaves s=0, c=1, x=2, t=3; spines a=4, b=5; edges s-a, c-a, x-a, x-b, t-b
CORNER = Topology((4, 2), ((4,), (4,), (4, 5), (5,), (0, 1, 2), (2, 3)), (1, 1, 1, 1, 0, 0), 4)


def naive_corners(t):
    """Every (s, t, c) where the router can reach c and has no permitted port."""
    dist = [bfs_oracle(t.adjacency, x) for x in range(t.N)]
    leaves = [x for x in range(t.N) if t.endpoints[x]]
    out = []
    for s, d in itertools.permutations(leaves, 2):
        ds, dt = dist[s], dist[d]
        seen, stack = {s}, [s]
        while stack:
            c = stack.pop()
            if c == d:
                continue
            before = ds[c] < dt[c]
            moves = []
            for v in t.adjacency[c]:
                step = (ds[v] - ds[c], dt[v] - dt[c])
                if step == (1, -1) or (before and step == (1, 1)) or (not before and step == (-1, -1)):
                    moves.append(v)
            if not moves:
                out.append((s, d, c))
            for v in moves:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
    return sorted(out)


def test_hand_built_corner():
    naive = naive_corners(CORNER)
    assert (0, 3, 1) in naive
    assert sorted(corner_check(CORNER)) == naive
    with pytest.raises(CornerEncountered) as e:
        polarized_candidates(1, 0, 3, CloserBits(CORNER), Phase.BEFORE_MIDDLE)
    assert e.value.triple == (0, 3, 1)


@pytest.mark.parametrize("name", ["sample", "oft2", "mrls14"])
def test_corner_check_matches_naive(name, request):
    t = request.getfixturevalue(name)
    assert sorted(corner_check(t)) == naive_corners(t)


def test_sample_corners_come_from_twin_leaves(sample):
    triples = corner_check(sample)
    assert (5, 0, 10) in triples
    assert sample.adjacency[5] == sample.adjacency[5] and set(sample.adjacency[5]) == set(sample.adjacency[10])


small_mrls = st.builds(
    lambda R, N2, seed: MrlsSpec(R, R // 2, R - R // 2, 2 * N2, N2, seed=seed),
    st.sampled_from([4, 6]), st.integers(3, 10), st.integers(0, 10**6),
)


@settings(max_examples=40, deadline=None)
@given(spec=small_mrls)
def test_corner_check_matches_naive_random(spec):
    t = build_mrls(spec)
    assert t.N <= 30
    if any(d < 0 for d in bfs_oracle(t.adjacency, 0)):
        return
    assert sorted(corner_check(t)) == naive_corners(t)


def test_complete_bipartite_corner_free():
    assert corner_check(build_mrls(MrlsSpec(8, 4, 4, 8, 4))) == []
    assert corner_check(build_fat_tree(FtSpec(4, 1))) == naive_corners(build_fat_tree(FtSpec(4, 1))) == []


def test_corner_sampling_is_seeded():
    t = build_mrls(MrlsSpec(8, 4, 4, 60, 30, seed=3))
    a = corner_check(t, threshold=10, sample_sources=8, seed=5)
    assert a == corner_check(t, threshold=10, sample_sources=8, seed=5)
    assert set(a) <= set(corner_check(t))
    assert {s for s, _, _ in a} <= set(int(x) for x in t.leaves)
    assert len({s for s, _, _ in a}) <= 8


def test_u18_instances_corner_free():
    for seed in (1, 2):
        assert corner_check(build_mrls(MrlsSpec(36, 18, 18, 614, 307, seed=seed))) == []


def test_corner_csv():
    assert corner_csv([(0, 3, 1)]) == "s,t,c\n0,3,1\n"


def test_closer_bits_oft(oft2):
    bits = build_closer_bits(oft2)
    for c in range(14, 21):
        for p, leaf in enumerate(oft2.adjacency[c]):
            assert bits.closer(c, p, leaf)


def test_closer_bits_sample(sample):
    bits = CloserBits(sample)
    assert bits.closer(14, sample.port_to(14, 0), 0)


@pytest.mark.parametrize("name", ["sample", "mrls14"])
def test_closer_bits_match_bfs(name, request):
    t = request.getfixturevalue(name)
    bits = CloserBits(t)
    table = bits.table()
    for row, x in enumerate(t.leaves):
        d = bfs_oracle(t.adjacency, int(x))
        for c in range(t.N):
            for p, n in enumerate(t.adjacency[c]):
                assert d[n] != d[c]
                assert table[c, p, row] == (d[n] < d[c]) == bits.closer(c, p, int(x))


def test_port_labels(sample):
    bits = CloserBits(sample)
    r = polarized_route(sample, 0, 13, bits=bits)
    # every hop of a minimal route is Forward
    for c, n in zip(r.switches, r.switches[1:]):
        assert classify_port(c, sample.port_to(c, n), 0, 13, bits) is PortLabel.FORWARD
        # the way back is the inverse label
        assert classify_port(n, sample.port_to(n, c), 0, 13, bits) is PortLabel.BACKTRACK
    # leaving s towards a spine that is not closer to t
    ds = [bits.distance(13, v) for v in sample.adjacency[0]]
    for p, v in enumerate(sample.adjacency[0]):
        if bits.distance(13, v) > bits.distance(13, 0):
            assert classify_port(0, p, 0, 13, bits) is PortLabel.EXPANSION


@pytest.mark.parametrize("name", ["sample", "mrls14", "oft2"])
def test_labels_partition(name, request):
    t = request.getfixturevalue(name)
    bits = CloserBits(t)
    for s, d in itertools.permutations([int(x) for x in t.leaves[:6]], 2):
        for c in range(t.N):
            labels = port_labels(c, s, d, bits)
            assert len(labels) == len(t.adjacency[c])
            assert all(isinstance(x, PortLabel) for x in labels)
            assert labels == [classify_port(c, p, s, d, bits) for p in range(len(labels))]


def test_label_tuples():
    assert PortLabel.FORWARD.delta == (1, -1)
    assert PortLabel.EXPANSION.delta == (1, 1)
    assert PortLabel.CONTRACTION.delta == (-1, -1)
    assert PortLabel.BACKTRACK.delta == (-1, 1)


def test_sample_route(sample):
    r = polarized_route(sample, 0, 13)
    assert r.length == 4
    assert r.switches[0] == 0 and r.switches[-1] == 13
    assert Route.from_line(r.to_line()).switches == r.switches


def test_same_leaf_route(sample):
    r = polarized_route(sample, 4, 4)
    assert r.length == 0
    assert polarized_candidates(4, 0, 4, CloserBits(sample), Phase.AFTER_MIDDLE) == []


def test_candidates_include_forward_at_source(mrls14):
    bits = CloserBits(mrls14)
    cand = polarized_candidates(0, 0, 5, bits, Phase.BEFORE_MIDDLE)
    labels = port_labels(0, 0, 5, bits)
    fwd = [p for p, lab in enumerate(labels) if lab is PortLabel.FORWARD]
    assert fwd and all((p, 0) in cand for p in fwd)


def check_route(t, bits, r, bound):
    s, d = r.source, r.target
    assert r.switches[0] == s and r.switches[-1] == d
    assert r.length <= bound
    after = False
    for (c, n), lab in zip(zip(r.switches, r.switches[1:]), r.labels):
        assert n in t.adjacency[c]
        assert lab is not PortLabel.BACKTRACK
        phase_after = bits.distance(s, c) >= bits.distance(d, c)
        assert not (after and not phase_after)   # never reverts
        after = phase_after
        if lab is PortLabel.EXPANSION:
            assert not phase_after
        if lab is PortLabel.CONTRACTION:
            assert phase_after
        assert classify_port(c, t.port_to(c, n), s, d, bits) is lab
    assert list(r.vcs) == [h // 2 for h in range(r.length)]
    assert all(b - a in (0, 1) for a, b in zip(r.vcs, r.vcs[1:]))


def adversarial(bits, s, d):
    """Occupancy that makes every Forward port look expensive."""
    def sel(c, ports):
        labels = port_labels(c, s, d, bits)
        return np.array([10**6 if labels[p] is PortLabel.FORWARD else 0 for p in ports])
    return sel


@pytest.mark.parametrize("name", ["mrls14", "oft2"])
def test_route_bound_exhaustive(name, request):
    t = request.getfixturevalue(name)
    bits = CloserBits(t)
    bound = max_route_length_bound(t)
    rng = np.random.default_rng(0)
    for s, d in itertools.permutations([int(x) for x in t.leaves], 2):
        r = polarized_route(t, s, d, bits=bits)
        assert r.length == bits.distance(d, s)
        check_route(t, bits, r, bound)
        check_route(t, bits, polarized_route(t, s, d, adversarial(bits, s, d), bits=bits, rng=rng), bound)
        rand = lambda c, ports: rng.integers(0, 64, len(ports))
        check_route(t, bits, polarized_route(t, s, d, rand, bits=bits, rng=rng), bound)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), N2=st.integers(6, 20))
def test_route_bound_random_instances(seed, N2):
    t = build_mrls(MrlsSpec(6, 3, 3, 2 * N2, N2, seed=seed))
    if corner_check(t):
        return
    bits = CloserBits(t)
    bound = max_route_length_bound(t)
    rng = np.random.default_rng(seed)
    leaves = t.leaves
    for _ in range(20):
        s, d = (int(x) for x in rng.choice(leaves, 2, replace=False))
        check_route(t, bits, polarized_route(t, s, d, adversarial(bits, s, d), bits=bits, rng=rng), bound)


def test_route_hits_corner(sample):
    with pytest.raises(CornerEncountered):
        bits = CloserBits(CORNER)
        polarized_route(CORNER, 0, 3, adversarial(bits, 0, 3), bits=bits)


def test_vc_helpers():
    assert vc_count(6) == 3 and vc_count(8) == 4 and vc_count(4) == 2
    assert vc_for_hop(5, 6) == 2
    with pytest.raises(HopBoundExceeded):
        vc_for_hop(6, 6)


def test_bound_values(oft2):
    assert max_route_length_bound(oft2) == 4
    u18 = build_mrls(MrlsSpec(36, 18, 18, 614, 307, seed=1))
    assert max_route_length_bound(u18) == 6
    assert max_route_length_bound(u18, Dstar=5) == 8


def count_minimal_paths(t, s, d):
    dist = bfs_oracle(t.adjacency, s)[d]
    walks = [[s]]
    for _ in range(dist):
        walks = [w + [n] for w in walks for n in t.adjacency[w[-1]]]
    return {tuple(w) for w in walks if w[-1] == d}


def test_ksp_sample_counts(sample):
    exact = count_minimal_paths(sample, 0, 13)
    assert len(exact) == 12
    for K in (1, 5, 12, 250):
        table = ksp_build(sample, K, seed=1, pairs=[(0, 13)])
        stored = {tuple(p) for p in table[(0, 13)].tolist()}
        assert len(stored) == min(K, len(exact))
        assert stored <= exact


def test_ksp_all_pairs_minimal(sample):
    table = ksp_build(sample, 250, seed=0)
    assert len(table) == 14 * 13
    for (s, d), paths in table.paths.items():
        exact = count_minimal_paths(sample, s, d)
        assert {tuple(p) for p in paths.tolist()} == exact


def test_ksp_round_trip_and_seed(tmp_path, sample):
    a = ksp_build(sample, 4, seed=3)
    a.save(tmp_path / "k.ksp")
    b = KspTable.load(tmp_path / "k.ksp")
    assert b.K == 4 and all(np.array_equal(a[p], b[p]) for p in a.paths)
    assert a.to_text() == ksp_build(sample, 4, seed=3).to_text()
    assert a.to_text() != ksp_build(sample, 4, seed=4).to_text()


def test_ksp_k1_fat_tree():
    t = build_fat_tree(FtSpec(4, 1))
    table = ksp_build(t, 1)
    assert all(len(p) == 1 for p in table.paths.values())


def test_updown_fat_tree():
    t = build_fat_tree(FtSpec(36, 2))
    bits = CloserBits(t)
    # leaves 0 and 1 share their pod's middle switches
    assert updown_route(t, 0, 1, bits).length == 2
    far = int(t.leaves[-1])
    r = updown_route(t, 0, far, bits)
    assert r.length == 4
    lv = t.level_of[list(r.switches)]
    top = int(np.argmax(lv))
    assert np.all(np.diff(lv[: top + 1]) == 1) and np.all(np.diff(lv[top:]) == -1)


def test_updown_oft(oft2):
    bits = CloserBits(oft2)
    for s, d in itertools.permutations(range(14), 2):
        r = updown_route(oft2, s, d, bits)
        assert r.length == 2
        assert r.switches[1] in set(oft2.adjacency[s]) & set(oft2.adjacency[d])


def test_updown_rejects_mrls(mrls14):
    with pytest.raises(NotMultistage):
        updown_route(mrls14, 0, 1)


def test_path_route():
    r = path_route([0, 14, 6, 20, 13], max_hops=6)
    assert r.vcs == (0, 0, 1, 1) and r.length == 4
