import itertools

import numpy as np
import pytest

from agd.graphs import (ABSENT, MASK, DiffusionTrajectory, GraphError,
                        absorb_node, apply_prediction, denoising_view,
                        edge_state, empty_graph, forward_trajectory,
                        fully_masked_state, initial_state, new_graph,
                        observed_step, permute)


def p3():
    return new_graph([0, 0, 0], [(0, 1, 1), (1, 2, 1)])


def random_graph(rng, n, num_node_types=2, num_edge_types=3, p=0.4):
    types = rng.integers(0, num_node_types, size=n).tolist()
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((i, j, int(rng.integers(1, num_edge_types))))
    return new_graph(types, edges, num_node_types, num_edge_types)


class TestNewGraph:
    def test_single_node(self):
        g = new_graph([0], [])
        assert g.n == 1 and g.m == 0

    def test_path_construction(self):
        g = p3()
        assert g.edge_type(0, 1) == 1
        assert g.edge_type(1, 0) == 1
        assert g.edge_type(0, 2) == ABSENT

    def test_conflicting_symmetric_types_rejected(self):
        with pytest.raises(GraphError):
            new_graph([0, 0], [(0, 1, 1), (1, 0, 2)])

    def test_duplicate_edge_same_type_ok(self):
        g = new_graph([0, 0], [(0, 1, 1), (1, 0, 1)])
        assert g.m == 1

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError):
            new_graph([0, 0], [(1, 1, 1)])

    def test_out_of_range_rejected(self):
        with pytest.raises(GraphError):
            new_graph([0, 0], [(0, 2, 1)])
        with pytest.raises(GraphError):
            new_graph([0, 3], [], num_node_types=2)
        with pytest.raises(GraphError):
            new_graph([0, 0], [(0, 1, 5)], num_edge_types=3)

    def test_absent_not_storable(self):
        with pytest.raises(GraphError):
            new_graph([0, 0], [(0, 1, 0)])


class TestAbsorb:
    def test_absorb_middle_of_path(self):
        s = absorb_node(initial_state(p3()), 1)
        assert edge_state(s, 1, 0) == MASK
        assert edge_state(s, 1, 2) == MASK
        assert edge_state(s, 0, 2) == ABSENT
        assert s.t == 1 and s.absorb_position[1] == 1

    def test_single_node_absorb(self):
        g = new_graph([0], [])
        s = absorb_node(initial_state(g), 0)
        assert s.t == 1 and s.masked == (True,)

    def test_double_absorb_rejected(self):
        s = absorb_node(initial_state(p3()), 1)
        with pytest.raises(GraphError):
            absorb_node(s, 1)

    def test_all_orderings_end_fully_masked(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            g = random_graph(rng, int(rng.integers(2, 6)))
            for ordering in itertools.permutations(range(g.n)):
                s = initial_state(g)
                for v in ordering:
                    s = absorb_node(s, v)
                assert s.t == g.n
                for i in range(g.n):
                    for j in range(i + 1, g.n):
                        assert edge_state(s, i, j) == MASK


class TestEdgeState:
    def test_unmasked_pair_reports_base(self):
        g = new_graph([0, 0], [(0, 1, 2)])
        assert edge_state(initial_state(g), 0, 1) == 2

    def test_masked_endpoint_reports_mask(self):
        g = new_graph([0, 0, 0], [])
        s = absorb_node(initial_state(g), 0)
        assert edge_state(s, 0, 1) == MASK

    def test_self_pair_rejected(self):
        with pytest.raises(GraphError):
            edge_state(initial_state(p3()), 1, 1)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        g = random_graph(rng, 6)
        s = initial_state(g)
        for v in (2, 0, 5):
            s = absorb_node(s, v)
        for i in range(6):
            for j in range(6):
                if i != j:
                    assert edge_state(s, i, j) == edge_state(s, j, i)


class TestDenoisingView:
    def test_fully_masked_view_is_single_node(self):
        g = p3()
        traj = forward_trajectory(g, [2, 0, 1])
        view = denoising_view(traj.states[3], 1)
        assert view.size == 1
        assert view.node_tokens == (MASK,)
        assert view.prev_nodes() == []

    def test_first_absorption_view_is_whole_graph(self):
        g = p3()
        s = absorb_node(initial_state(g), 1)
        view = denoising_view(s, 1)
        assert view.size == 3
        ti = view.target_index
        for a in range(3):
            if a != ti:
                assert view.edge_states[ti][a] == MASK
        # untouched pair keeps its base state
        others = [a for a in range(3) if a != ti]
        assert view.edge_states[others[0]][others[1]] == ABSENT

    def test_exactly_one_mask_token(self):
        rng = np.random.default_rng(2)
        g = random_graph(rng, 6)
        traj = forward_trajectory(g, rng.permutation(6))
        for t in range(1, 7):
            view = denoising_view(traj.states[t], traj.ordering[t - 1])
            assert sum(1 for tok in view.node_tokens if tok == MASK) == 1

    def test_view_size_is_n_minus_t(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            g = random_graph(rng, n)
            traj = forward_trajectory(g, rng.permutation(n))
            # state t+1 has t+1 masked; its view has n - t nodes
            for t in range(n):
                view = denoising_view(traj.states[t + 1], traj.ordering[t])
                assert view.size == n - t

    def test_unmasked_target_rejected(self):
        with pytest.raises(GraphError):
            denoising_view(initial_state(p3()), 0)


class TestApplyPrediction:
    def test_single_node_roundtrip(self):
        g = new_graph([0], [])
        s = absorb_node(initial_state(g), 0)
        out = apply_prediction(s, 0, 0, {})
        assert out.t == 0 and out.base == g

    def test_backward_replay_recovers_graph(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(1, 8))
            g = random_graph(rng, n)
            traj = forward_trajectory(g, rng.permutation(n))
            s = traj.states[n]
            for t in range(n, 0, -1):
                target = traj.ordering[t - 1]
                node_type, assignment = observed_step(g, s, target)
                s = apply_prediction(s, target, node_type, assignment)
            assert s.base == g and s.t == 0

    def test_apply_then_reabsorb_roundtrip(self):
        g = p3()
        traj = forward_trajectory(g, [1, 0, 2])
        s = traj.states[2]
        target = traj.ordering[1]
        node_type, assignment = observed_step(g, s, target)
        back = absorb_node(apply_prediction(s, target, node_type, assignment), target)
        assert back == s

    def test_wrong_coverage_rejected(self):
        g = p3()
        s = absorb_node(initial_state(g), 1)
        with pytest.raises(GraphError):
            apply_prediction(s, 1, 0, {0: 1})  # missing node 2

    def test_mask_in_assignment_rejected(self):
        g = p3()
        s = absorb_node(initial_state(g), 1)
        with pytest.raises(GraphError):
            apply_prediction(s, 1, 0, {0: MASK, 2: 0})

    def test_only_last_absorbed_can_be_applied(self):
        g = p3()
        traj = forward_trajectory(g, [0, 1, 2])
        with pytest.raises(GraphError):
            apply_prediction(traj.states[2], 0, 0, {2: 0})


class TestPermute:
    def test_identity(self):
        g = p3()
        assert permute(g, [0, 1, 2]) == g

    def test_reversal_keeps_edge_multiset(self):
        g = p3()
        h = permute(g, [2, 1, 0])
        assert sorted(k for _, _, k in h.edge_list()) == sorted(k for _, _, k in g.edge_list())
        assert h.edge_type(2, 1) == 1 and h.edge_type(1, 0) == 1

    def test_permute_inverse_roundtrip(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng, 7)
        perm = list(rng.permutation(7))
        inv = [0] * 7
        for i, p in enumerate(perm):
            inv[p] = i
        assert permute(permute(g, perm), inv) == g

    def test_non_bijective_rejected(self):
        with pytest.raises(GraphError):
            permute(p3(), [0, 0, 1])


class TestTrajectory:
    def test_mask_counts_along_trajectory(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(1, 12))
            g = random_graph(rng, n)
            traj = forward_trajectory(g, rng.permutation(n))
            for t, state in enumerate(traj.states):
                assert state.t == t
                positions = sorted(state.absorb_position[i] for i in state.masked_nodes())
                assert positions == list(range(1, t + 1))

    def test_ordering_must_be_permutation(self):
        with pytest.raises(GraphError):
            forward_trajectory(p3(), [0, 0, 1])

    def test_fully_masked_state_positions(self):
        g = p3()
        s = fully_masked_state(g)
        assert s.t == 3
        assert s.last_absorbed() == 0  # slot 0 carries the highest position

    def test_empty_graph_base(self):
        g = empty_graph(4, 2, 3)
        assert g.n == 4 and g.m == 0
