import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrls.errors import Disconnected, NoEndpoints
from mrls.metrics import (bfs_from, capacity_limit, distance_distribution, distance_matrix, full_metrics,
                          leaf_metrics, link_cost, metrics_report, switch_cost)
from mrls.topology import (FtSpec, MrlsSpec, OftSpec, Topology, build_fat_tree, build_mrls, build_oft)

from conftest import bfs_oracle


def brute(t):
    """All-pairs metrics straight from the queue BFS."""
    rows = [bfs_oracle(t.adjacency, s) for s in range(t.N)]
    leaves = [s for s in range(t.N) if t.endpoints[s]]
    ll = [rows[a][b] for a, b in itertools.permutations(leaves, 2)]
    aa = [rows[a][b] for a, b in itertools.permutations(range(t.N), 2)]
    return max(ll), sum(ll) / len(ll), max(aa), sum(aa) / len(aa)


def test_sample_distance_four(sample):
    assert bfs_from(sample, 0)[13] == 4


def test_oft2_leaves_at_two(oft2):
    for s in range(14):
        d = bfs_from(oft2, s).dist
        assert d[s] == 0
        assert all(d[x] == 2 for x in range(14) if x != s)


def test_oft2_metrics(oft2):
    assert leaf_metrics(oft2) == (2, 2.0)
    assert full_metrics(oft2)[0] == 3
    n = distance_distribution(oft2, 0)
    assert n[2] == 13


def test_oft17_leaf_metrics():
    assert leaf_metrics(build_oft(OftSpec(17))) == (2, 2.0)


def test_ft36_diameter_and_costs():
    t = build_fat_tree(FtSpec(36, 2))
    assert leaf_metrics(t)[0] == 4
    assert round(link_cost(t), 3) == 2
    assert round(switch_cost(t), 3) == 0.139


def test_star_against_enumeration():
    N1 = 5
    adj = tuple((N1,) for _ in range(N1)) + (tuple(range(N1)),)
    t = Topology((N1, 1), adj, (1,) * N1 + (0,), 4)
    D, A, Ds, As = brute(t)
    assert full_metrics(t) == (Ds, pytest.approx(As))
    assert Ds == 2


@pytest.mark.parametrize("name", ["sample", "oft2", "mrls14"])
def test_matches_brute_force(name, request):
    t = request.getfixturevalue(name)
    D, A, Ds, As = brute(t)
    assert leaf_metrics(t) == (D, pytest.approx(A, abs=1e-12))
    assert full_metrics(t) == (Ds, pytest.approx(As, abs=1e-12))


def test_sample_values(sample):
    r = metrics_report(sample)
    assert (r.D, r.Dstar) == (4, 4)
    assert r.A == pytest.approx(220 / 91)


def test_disconnected_reports_pair():
    t = Topology((2, 2), ((2,), (3,), (0,), (1,)), (1, 1, 0, 0), 4)
    with pytest.raises(Disconnected) as e:
        leaf_metrics(t)
    assert set(e.value.pair) == {0, 1}


def test_no_endpoints():
    t = Topology((1, 1), ((1,), (0,)), (0, 0), 4)
    with pytest.raises(NoEndpoints):
        link_cost(t)


def test_table_row_u18():
    As, n2 = [], []
    for seed in range(1, 4):
        t = build_mrls(MrlsSpec(36, 18, 18, 614, 307, seed=seed))
        r = metrics_report(t)
        As.append(r.A)
        n2.append(r.distance_histograms[1][2])
        assert r.distance_histograms[1][1] == 18
        assert (r.D, r.Dstar) == (4, 4)
        assert (r.cost_links, round(r.cost_switches, 3)) == (1.0, 0.083)
    assert np.mean(As) == pytest.approx(2.674, abs=0.01)
    assert 2 / np.mean(As) == pytest.approx(0.748, abs=0.01)
    assert np.mean(n2) == pytest.approx(399, rel=0.02)


def test_cost_row_u19():
    t = build_mrls(MrlsSpec.for_endpoints(32, 19, 16640, seed=1))
    assert link_cost(t) == pytest.approx(19 / 13)
    assert round(link_cost(t), 3) == 1.462


def test_two_level_diameter_two_gives_f():
    # leaf-spine with every leaf on every spine: A = 2, so theta = u/d
    t = build_mrls(MrlsSpec(6, 4, 2, 6, 4, seed=0))
    assert leaf_metrics(t) == (2, 2.0)
    assert capacity_limit(t) == pytest.approx(2.0)


def test_distance_matrix_rows(sample):
    m = distance_matrix(sample, [0, 5])
    assert m.shape == (2, sample.N)
    assert list(m[0]) == bfs_oracle(sample.adjacency, 0)


def test_report_serialisation(sample):
    r = metrics_report(sample)
    assert r.to_csv().splitlines()[0] == "S,N,M,D,Dstar,A,Astar,theta,cost_links,cost_switches"
    assert '"theta"' in r.to_json()
    hist = r.histogram_csv().splitlines()
    assert hist[0] == "level,r,count"


specs = st.builds(
    lambda R, N2, seed: MrlsSpec(R, R // 2, R - R // 2, 2 * N2, N2, seed=seed),
    st.sampled_from([4, 6, 8]), st.integers(6, 30), st.integers(0, 10**6),
)


@settings(max_examples=30, deadline=None)
@given(spec=specs)
def test_metric_identities(spec):
    t = build_mrls(spec)
    try:
        r = metrics_report(t)
    except Disconnected:
        return
    d = distance_matrix(t)
    lvl = t.level_of
    same = lvl[:, None] == lvl[None, :]
    assert np.all(d[same] % 2 == 0)
    assert np.all(d[~same] % 2 == 1)
    assert r.cost_links == pytest.approx(r.theta * r.A / 2)
    assert r.cost_links == spec.u / spec.d
    for level, seq in r.distance_histograms.items():
        assert sum(seq[1:]) == pytest.approx(t.N - 1)
    assert 2 * (r.Dstar // 2) == r.D
    assert r.A <= r.D and r.Astar <= r.Dstar
    # neighbouring switches differ by at most one hop from any source
    for a, _, b, _ in t.edges():
        assert np.all(np.abs(d[:, a] - d[:, b]) <= 1)
