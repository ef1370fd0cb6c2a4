from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraccontain.errors import ArgumentError, ConstraintViolation, ValidationError
from fraccontain.potential import ControllerParams
from fraccontain.scenario import preset_karate
from fraccontain.social_graph import (
    AgentRole,
    NetworkTopology,
    assemble_pi_matrix,
    check_assumption_one,
    edge_margin,
    edge_margins,
    is_metzler,
    metzler_laplacian,
    social_difference,
)

F, L = AgentRole.FOLLOWER, AgentRole.LEADER


def _line():
    # leader 0 <- follower 1 <- follower 2, follower 1 also reads 2
    return NetworkTopology((L, F, F), ((1, 0), (1, 2), (2, 1)), 5.0)


class TestTopology:
    def test_roles_and_neighbors(self):
        topo = _line()
        assert topo.leaders == (0,) and topo.followers == (1, 2)
        assert topo.neighbors(1) == (0, 2)

    def test_roles_accept_strings(self):
        topo = NetworkTopology(("leader", "follower"), [(1, 0)], 1.0)
        assert topo.roles == (L, F)

    @pytest.mark.parametrize(
        "roles,edges,delta,path",
        [
            ((L, F), [(1, 1)], 1.0, "edges[0]"),
            ((L, F), [(1, 5)], 1.0, "edges[0]"),
            ((L, F), [(1, 0), (1, 0)], 1.0, "edges[1]"),
            ((L, F), [(1, 0), (0, 1)], 1.0, "edges[1]"),
            ((L, F, F), [(1, 0)], 1.0, "agents[2]"),
            ((F, F), [(0, 1), (1, 0)], 1.0, "agents"),
            ((L, L), [], 1.0, "agents"),
            ((L, F), [(1, 0)], 0.0, "controller.delta"),
        ],
    )
    def test_invalid_structures_name_the_field(self, roles, edges, delta, path):
        with pytest.raises(ValidationError) as info:
            NetworkTopology(roles, edges, delta)
        assert path in [p for p, _ in info.value.errors]


class TestSocialDifference:
    def test_examples(self):
        assert social_difference([1, 2], [1, 2]) == 0
        assert social_difference([1, 0], [0, 0]) == 1
        assert social_difference([2, 1], [-1, 1]) == 9

    def test_dimension_mismatch(self):
        with pytest.raises(ArgumentError):
            social_difference([1, 2], [1, 2, 3])

    @given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
    def test_symmetric_and_nonnegative(self, a, b):
        assert social_difference(a, b) == social_difference(b, a) >= 0


class TestEdgeMargin:
    def test_examples(self):
        topo = NetworkTopology((L, F), [(1, 0)], 4.0)
        assert edge_margin(topo, [[0.0], [1.0]], 1, 0) == 3.0
        assert edge_margin(topo, [[0.0], [2.0]], 1, 0) == 0.0

    def test_missing_edge(self):
        topo = NetworkTopology((L, F), [(1, 0)], 4.0)
        with pytest.raises(ArgumentError):
            edge_margin(topo, [[0.0], [1.0]], 0, 1)

    def test_karate_initial_margins_positive(self):
        cfg = preset_karate(0)
        assert np.all(edge_margins(cfg.topology, cfg.initial_states) >= 0.1 * cfg.topology.delta)


class TestAssumptionOne:
    def test_chain_ok(self):
        topo = NetworkTopology((L, F, F), [(1, 0), (2, 1)], 1.0)
        assert check_assumption_one(topo) == frozenset()

    def test_unreachable_reported(self):
        # followers 2 and 3 read only each other
        topo = NetworkTopology((L, F, F, F), [(1, 0), (2, 3), (3, 2)], 1.0)
        assert check_assumption_one(topo) == frozenset({2, 3})

    def test_direction_matters(self):
        # 2 reads 1 so 1 influences 2, but nothing influences 1 except 2
        topo = NetworkTopology((L, F, F), [(2, 0), (1, 2)], 1.0)
        assert check_assumption_one(topo) == frozenset()
        topo = NetworkTopology((L, F, F), [(2, 0), (2, 1), (1, 2)], 1.0)
        assert check_assumption_one(topo) == frozenset()

    def test_karate_against_networkx(self):
        topo = preset_karate(0).topology
        g = nx.DiGraph([(j, i) for i, j in topo.access_edges])
        reached = set().union(*(nx.descendants(g, l) for l in topo.leaders))
        assert set(topo.followers) <= reached
        assert check_assumption_one(topo) == frozenset()

    @settings(max_examples=200)
    @given(st.data())
    def test_random_digraphs_against_networkx(self, data):
        n = data.draw(st.integers(3, 9))
        n_leaders = data.draw(st.integers(1, n - 1))
        roles = (L,) * n_leaders + (F,) * (n - n_leaders)
        edges = set()
        for i in range(n_leaders, n):
            srcs = data.draw(st.sets(st.integers(0, n - 1).filter(lambda j, i=i: j != i), min_size=1, max_size=3))
            edges.update((i, j) for j in srcs)
        topo = NetworkTopology(roles, tuple(edges), 1.0)
        g = nx.DiGraph()
        g.add_nodes_from(range(n))
        g.add_edges_from((j, i) for i, j in edges)
        reached = set()
        for l in range(n_leaders):
            reached |= nx.descendants(g, l)
        assert check_assumption_one(topo) == frozenset(set(range(n_leaders, n)) - reached)


class TestPiMatrix:
    def test_two_agent_row(self):
        topo = NetworkTopology((L, F), [(1, 0)], 4.0)
        pi = assemble_pi_matrix(topo, [[0.0], [1.0]], 2.0, 2.0)
        row = pi.entries[0]
        assert row[0] > 0 and row[1] == -row[0]
        assert row.sum() == 0

    def test_consensus_is_well_defined(self):
        topo = _line()
        pi = assemble_pi_matrix(topo, np.zeros((3, 2)), 1.0, 2.0)
        assert np.all(np.isfinite(pi.entries))
        assert np.allclose(pi.row_sums(), 0, atol=1e-12)

    def test_line_graph_against_exact_rationals(self):
        # k = 1 makes every quantity rational: m = (beta + b_bar gamma) / (gamma + beta)^2
        def m_exact(sq, idx, delta=Fraction(5)):
            gamma = sum(Fraction(s, 2) for s in sq)
            margins = [delta - s for s in sq]
            beta = Fraction(1, 2)
            for b in margins:
                beta *= b
            b_bar = Fraction(1)
            for pos, b in enumerate(margins):
                if pos != idx:
                    b_bar *= b
            return (beta + b_bar * gamma) / (gamma + beta) ** 2

        m10, m12 = m_exact([1, 1], 0), m_exact([1, 1], 1)
        m21 = m_exact([1], 0)
        assert (m10, m12, m21) == (Fraction(4, 27), Fraction(4, 27), Fraction(2, 5))
        pi = assemble_pi_matrix(_line(), [[0.0], [1.0], [2.0]], 1.0, 1.0)
        expected = np.array([[4 / 27, -8 / 27, 4 / 27], [0.0, 0.4, -0.4]])
        np.testing.assert_allclose(pi.entries, expected, rtol=1e-14, atol=0)

    def test_violation_names_edge(self):
        topo = NetworkTopology((L, F), [(1, 0)], 1.0)
        with pytest.raises(ConstraintViolation) as info:
            assemble_pi_matrix(topo, [[0.0], [1.0]], 1.0, 2.0)
        assert info.value.edge == (1, 0)

    def test_embedded_is_metzler_with_zero_rows(self):
        cfg = preset_karate(3)
        pi = assemble_pi_matrix(cfg.topology, cfg.initial_states, cfg.params, cfg.params.k)
        full = pi.embedded()
        assert is_metzler(full)
        assert np.max(np.abs(full.sum(axis=1))) <= 1e-12
        assert np.all(full[list(cfg.topology.leaders)] == 0)

    def test_per_agent_gains_scale_rows(self):
        topo = _line()
        q = [[0.0], [1.0], [1.5]]
        base = assemble_pi_matrix(topo, q, 1.0, 2.0).entries
        scaled = assemble_pi_matrix(topo, q, ControllerParams(2.0, [9.0, 3.0, 0.5]), 2.0).entries
        np.testing.assert_allclose(scaled, base * np.array([[3.0], [0.5]]))


class TestMetzlerLaplacian:
    def test_two_node(self):
        np.testing.assert_array_equal(metzler_laplacian([[0, 1], [1, 0]]), [[-1, 1], [1, -1]])

    def test_empty(self):
        np.testing.assert_array_equal(metzler_laplacian(np.zeros((3, 3))), np.zeros((3, 3)))

    def test_random_rows_sum_to_zero(self):
        rng = np.random.default_rng(5)
        a = rng.random((5, 5))
        np.fill_diagonal(a, 0)
        lap = metzler_laplacian(a)
        assert np.max(np.abs(lap.sum(axis=1))) <= 1e-15
        assert is_metzler(lap)

    @pytest.mark.parametrize("a", [[[0, -1], [1, 0]], [[1, 1], [1, 0]], [[0, 1, 2]]])
    def test_rejects_invalid(self, a):
        with pytest.raises(ArgumentError):
            metzler_laplacian(a)
