import itertools

import numpy as np
import pytest

from sdconsensus import (
    build_topology,
    is_connected,
    parse_edge_list,
    spectrum,
    weighted_adjacency,
)

from oracles import weighted_adjacency_eigenvalues_exact

# exact spectrum of the 6-agent benchmark graph, frozen from the rational
# characteristic-polynomial oracle (re-derived live in test_reference_spectrum)
REFERENCE_EIGENVALUES = [
    1.0,
    0.6234898018587336,
    0.0,
    -0.2225209339563144,
    -0.5,
    -0.9009688679024191,
]

REFERENCE_EDGES = [(1, 2), (1, 4), (2, 4), (3, 4), (3, 6), (4, 5), (5, 6)]


def all_connected_graphs(n):
    """Every labeled connected simple graph on n nodes."""
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    for bits in range(1, 2 ** len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if bits >> i & 1]
        top = build_topology(n, edges)
        if is_connected(top):
            yield top


def random_connected_topology(rng, n):
    """Random spanning tree plus random extra edges."""
    nodes = list(rng.permutation(np.arange(1, n + 1)))
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(nodes[i]), int(nodes[j])
        edges.add((min(a, b), max(a, b)))
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        a, b = rng.choice(np.arange(1, n + 1), size=2, replace=False)
        a, b = int(a), int(b)
        edges.add((min(a, b), max(a, b)))
    return build_topology(n, sorted(edges))


class TestBuildTopology:
    def test_single_edge_degrees(self):
        top = build_topology(2, [(1, 2)])
        assert list(top.degrees) == [1, 1]
        assert top.adjacency[0, 1] == 1.0 and top.adjacency[1, 0] == 1.0

    def test_reference_degrees(self, ref_topology):
        assert list(ref_topology.degrees) == [2, 2, 2, 4, 2, 2]
        assert np.array_equal(ref_topology.adjacency, ref_topology.adjacency.T)
        assert np.all(np.diag(ref_topology.adjacency) == 0.0)

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError, match=r"self-loop \(1, 1\)"):
            build_topology(3, [(1, 1)])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match=r"\(1, 7\) out of range"):
            build_topology(6, [(1, 7)])

    def test_duplicate_rejected_either_orientation(self):
        with pytest.raises(ValueError, match=r"duplicate edge \(2, 1\)"):
            build_topology(3, [(1, 2), (2, 1)])

    def test_too_few_agents(self):
        with pytest.raises(ValueError, match="agent count"):
            build_topology(1, [])


class TestEdgeList:
    def test_parse_round_trip(self):
        text = "# comment\n1 2\n\n2 3\n"
        assert parse_edge_list(text) == [(1, 2), (2, 3)]

    def test_parse_malformed(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_edge_list("1 2\n3\n")


class TestWeightedAdjacency:
    def test_single_edge(self):
        top = build_topology(2, [(1, 2)])
        assert np.array_equal(weighted_adjacency(top), [[0.0, 1.0], [1.0, 0.0]])

    def test_triangle(self):
        top = build_topology(3, [(1, 2), (2, 3), (1, 3)])
        w = weighted_adjacency(top)
        for i, j in itertools.product(range(3), range(3)):
            assert w[i, j] == (0.0 if i == j else 0.5)

    def test_reference_hub_row(self, ref_topology):
        w = weighted_adjacency(ref_topology)
        assert np.array_equal(w[3], [0.25, 0.25, 0.25, 0.0, 0.25, 0.0])

    def test_isolated_node_named(self):
        top = build_topology(3, [(1, 2)])
        with pytest.raises(ValueError, match="node 3 is isolated"):
            weighted_adjacency(top)


class TestConnectivity:
    def test_reference_connected(self, ref_topology):
        assert is_connected(ref_topology)

    def test_two_disjoint_edges(self):
        assert not is_connected(build_topology(4, [(1, 2), (3, 4)]))

    def test_single_edge(self):
        assert is_connected(build_topology(2, [(1, 2)]))


class TestSpectrum:
    def test_single_edge(self):
        spec = spectrum(build_topology(2, [(1, 2)]))
        assert np.allclose(spec.eigenvalues, [1.0, -1.0], atol=1e-12)

    def test_triangle(self):
        spec = spectrum(build_topology(3, [(1, 2), (2, 3), (1, 3)]))
        assert np.allclose(spec.eigenvalues, [1.0, -0.5, -0.5], atol=1e-12)

    def test_reference_spectrum(self, ref_topology):
        spec = spectrum(ref_topology)
        exact = weighted_adjacency_eigenvalues_exact(ref_topology)
        assert np.allclose(spec.eigenvalues, exact, atol=1e-12)
        assert np.allclose(spec.eigenvalues, REFERENCE_EIGENVALUES, atol=1e-12)
        assert spec.eigenvalues[0] == 1.0
        assert spec.eigenvalues[1] < 1.0 - 1e-9

    def test_disconnected_rejected(self):
        with pytest.raises(ValueError, match="disconnected"):
            spectrum(build_topology(4, [(1, 2), (3, 4)]))

    def test_first_column_is_ones(self, ref_topology):
        spec = spectrum(ref_topology)
        assert np.array_equal(spec.modal_matrix[:, 0], np.ones(6))


def _check_invariants(top):
    w = weighted_adjacency(top)
    assert np.max(np.abs(w.sum(axis=1) - 1.0)) < 1e-12
    spec = spectrum(top)
    lam = spec.eigenvalues
    assert lam[0] == 1.0
    assert np.all(lam >= -1.0 - 1e-12) and np.all(lam <= 1.0 + 1e-12)
    assert lam[1] < 1.0 - 1e-9  # top eigenvalue simple for connected graphs
    recon = spec.modal_matrix @ np.diag(lam) @ spec.modal_inverse
    assert np.max(np.abs(recon - w)) < 1e-10
    assert np.array_equal(spec.modal_matrix[:, 0], np.ones(top.n))


class TestInvariants:
    def test_exhaustive_small_graphs(self):
        count = 0
        for n in (2, 3, 4):
            for top in all_connected_graphs(n):
                _check_invariants(top)
                count += 1
        assert count > 40

    def test_random_graphs(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            n = int(rng.integers(2, 9))
            _check_invariants(random_connected_topology(rng, n))

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(3, 9))
            top = random_connected_topology(rng, n)
            perm = rng.permutation(n)
            relabeled = []
            for i in range(n):
                for j in range(i + 1, n):
                    if top.adjacency[i, j]:
                        relabeled.append((int(perm[i]) + 1, int(perm[j]) + 1))
            other = build_topology(n, relabeled)
            lam_a = np.sort(spectrum(top).eigenvalues)
            lam_b = np.sort(spectrum(other).eigenvalues)
            assert np.max(np.abs(lam_a - lam_b)) < 1e-9
