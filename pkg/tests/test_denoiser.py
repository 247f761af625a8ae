import itertools
import math

import numpy as np
import pytest

from agd.autodiff import Tape, grad_check
from agd.denoiser import DenoiserConfig, DenoiserNet
from agd.graphs import (ABSENT, MASK, absorb_node, denoising_view,
                        forward_trajectory, initial_state, new_graph, permute)


def tiny_denoiser(num_node_types=2, num_edge_types=3, aggregator="gat",
                  seed=0, **overrides):
    kwargs = dict(layers=2, hidden=6, mlp_hidden=8, mixtures=2)
    kwargs.update(overrides)
    config = DenoiserConfig(num_node_types=num_node_types,
                            num_edge_types=num_edge_types,
                            aggregator=aggregator, **kwargs)
    return DenoiserNet.init(config, np.random.default_rng(seed))


def view_with_prev(num_prev, seed=1, num_node_types=2, num_edge_types=3):
    """A view over a random graph where `num_prev` nodes are already denoised."""
    rng = np.random.default_rng(seed)
    n = num_prev + 1
    types = rng.integers(0, num_node_types, size=n).tolist()
    edges = [(i, j, int(rng.integers(1, num_edge_types)))
             for i in range(n) for j in range(i + 1, n) if rng.random() < 0.6]
    g = new_graph(types, edges, num_node_types, num_edge_types)
    state = absorb_node(initial_state(g), 0)
    return g, denoising_view(state, 0)


def enumerate_outcome_probs(pred, num_node_types, num_edge_types):
    """All (node type, edge assignment) probabilities from a StepPrediction."""
    out = {}
    P = len(pred.prev_nodes)
    for v in range(num_node_types):
        if P == 0:
            out[(v, ())] = pred.node_probs[v]
            continue
        for combo in itertools.product(range(num_edge_types), repeat=P):
            p_edges = 0.0
            for k in range(len(pred.mixture_weights)):
                p_k = 1.0
                for j, e in enumerate(combo):
                    p_k *= pred.edge_probs[k, j, e]
                p_edges += pred.mixture_weights[k] * p_k
            out[(v, combo)] = pred.node_probs[v] * p_edges
    return out


class TestMessagePass:
    def test_single_node_view_pools_to_itself(self):
        net = tiny_denoiser()
        g = new_graph([1, 0], [(0, 1, 1)], 2, 3)
        state = absorb_node(absorb_node(initial_state(g), 0), 1)
        view = denoising_view(state, 1)
        assert view.size == 1
        h, h_g = net.message_pass(view)
        assert np.array_equal(h.data[0], h_g.data)

    def test_relabeling_permutes_embeddings_and_keeps_pooling(self):
        net = tiny_denoiser()
        g = new_graph([0, 1, 0, 1], [(0, 1, 1), (1, 2, 2), (2, 3, 1)], 2, 3)
        state = absorb_node(initial_state(g), 2)
        view = denoising_view(state, 2)
        h, h_g = net.message_pass(view)

        perm = [3, 1, 0, 2]
        gp = permute(g, perm)
        state_p = absorb_node(initial_state(gp), perm[2])
        view_p = denoising_view(state_p, perm[2])
        hp, hp_g = net.message_pass(view_p)

        assert np.array_equal(h_g.data, hp_g.data)
        for local, v in enumerate(view.nodes):
            local_p = view_p.nodes.index(perm[v])
            assert np.array_equal(h.data[local], hp.data[local_p])

    def test_edge_states_enter_attention_and_messages(self):
        net = tiny_denoiser(seed=3)
        # identical views except for the type of the (1, 2) edge
        g1 = new_graph([0, 0, 0], [(0, 1, 1), (1, 2, 1)], 2, 3)
        g2 = new_graph([0, 0, 0], [(0, 1, 1), (1, 2, 2)], 2, 3)
        v1 = denoising_view(absorb_node(initial_state(g1), 0), 0)
        v2 = denoising_view(absorb_node(initial_state(g2), 0), 0)
        h1, _ = net.message_pass(v1)
        h2, _ = net.message_pass(v2)
        assert not np.allclose(h1.data[v1.nodes.index(1)], h2.data[v2.nodes.index(1)])

    def test_masked_edges_carry_a_distinct_embedding(self):
        net = tiny_denoiser(seed=3)
        g = new_graph([0, 0, 0], [(0, 1, 1), (1, 2, 1)], 2, 3)
        view = denoising_view(absorb_node(initial_state(g), 0), 0)
        base, _ = net.message_pass(view)
        # node 1 receives one message over a MASK edge; wiping the MASK
        # embedding row must change what it computes
        mask_row = net.config.mask_edge_token
        saved = net.params["edge_embed"].data[mask_row].copy()
        net.params["edge_embed"].data[mask_row] = 0.0
        wiped, _ = net.message_pass(view)
        net.params["edge_embed"].data[mask_row] = saved
        assert not np.allclose(base.data[view.nodes.index(1)],
                               wiped.data[view.nodes.index(1)])

    def test_unknown_aggregator_rejected(self):
        with pytest.raises(ValueError):
            DenoiserConfig(2, 3, aggregator="mean-pool") and None
            DenoiserNet.init(DenoiserConfig(2, 3, aggregator="mean-pool"),
                             np.random.default_rng(0))

    def test_gru_gate_single_node_view(self):
        net = tiny_denoiser(aggregator="gru-gate")
        g = new_graph([0], [], 2, 3)
        state = absorb_node(initial_state(g), 0)
        h, h_g = net.message_pass(denoising_view(state, 0))
        assert h.data.shape == (1, net.config.hidden)
        assert np.array_equal(h.data[0], h_g.data)


class TestPredictStep:
    def test_first_step_has_no_edge_part(self):
        net = tiny_denoiser()
        g = new_graph([0], [], 2, 3)
        view = denoising_view(absorb_node(initial_state(g), 0), 0)
        pred = net.predict_step(view)
        assert pred.mixture_weights is None and pred.edge_probs is None
        assert abs(pred.node_probs.sum() - 1.0) < 1e-9

    def test_distributions_normalized(self):
        for agg in ("gat", "gru-gate"):
            net = tiny_denoiser(aggregator=agg, seed=5)
            _, view = view_with_prev(3, seed=5)
            pred = net.predict_step(view)
            assert abs(pred.node_probs.sum() - 1.0) < 1e-9
            assert abs(pred.mixture_weights.sum() - 1.0) < 1e-9
            assert np.allclose(pred.edge_probs.sum(axis=2), 1.0, atol=1e-9)

    def test_outcome_probabilities_sum_to_one(self):
        net = tiny_denoiser(seed=7)
        _, view = view_with_prev(3, seed=7)
        pred = net.predict_step(view)
        probs = enumerate_outcome_probs(pred, 2, 3)
        assert abs(sum(probs.values()) - 1.0) < 1e-8

    def test_two_component_mixture_arithmetic(self):
        # alpha=[.5,.5], two edges: joint = .5 p1(e1)p1(e2) + .5 p2(e1)p2(e2)
        net = tiny_denoiser(seed=9)
        _, view = view_with_prev(2, seed=9)
        pred = net.predict_step(view)
        a = pred.mixture_weights
        e = pred.edge_probs
        hand = 0.0
        for k in range(2):
            hand += a[k] * e[k, 0, 1] * e[k, 1, 2]
        prev = pred.prev_nodes
        got = math.exp(net.step_log_likelihood(
            view, 0, {prev[0]: 1, prev[1]: 2}).item()) / pred.node_probs[0]
        assert abs(got - hand) < 1e-9


class TestStepLogLikelihood:
    def test_forced_outcome_is_zero(self):
        net = tiny_denoiser(num_node_types=1, seed=11)
        g = new_graph([0], [], 1, 3)
        view = denoising_view(absorb_node(initial_state(g), 0), 0)
        assert net.step_log_likelihood(view, 0, {}).item() == 0.0

    def test_single_component_factorizes(self):
        net = tiny_denoiser(mixtures=1, seed=13)
        _, view = view_with_prev(2, seed=13)
        pred = net.predict_step(view)
        prev = pred.prev_nodes
        observed = {prev[0]: 0, prev[1]: 2}
        got = net.step_log_likelihood(view, 1, observed).item()
        expect = (math.log(pred.node_probs[1]) + math.log(pred.edge_probs[0, 0, 0])
                  + math.log(pred.edge_probs[0, 1, 2]))
        assert abs(got - expect) < 1e-9

    def test_exp_sums_to_one_over_all_outcomes(self):
        net = tiny_denoiser(seed=15)
        _, view = view_with_prev(3, seed=15)
        prev = view.prev_nodes()
        total = 0.0
        for v in range(2):
            for combo in itertools.product(range(3), repeat=3):
                observed = {p: e for p, e in zip(prev, combo)}
                total += math.exp(net.step_log_likelihood(view, v, observed).item())
        assert abs(total - 1.0) < 1e-8

    def test_coverage_mismatch_rejected(self):
        net = tiny_denoiser()
        _, view = view_with_prev(2)
        prev = view.prev_nodes()
        with pytest.raises(Exception):
            net.step_log_likelihood(view, 0, {prev[0]: 1})
        with pytest.raises(Exception):
            net.step_log_likelihood(view, 0, {prev[0]: 1, prev[1]: MASK})

    def test_invariant_under_prev_node_relabeling(self):
        net = tiny_denoiser(seed=17)
        g = new_graph([0, 1, 0, 1], [(0, 1, 1), (1, 2, 2), (0, 3, 1), (2, 3, 2)], 2, 3)
        state = absorb_node(initial_state(g), 1)
        view = denoising_view(state, 1)
        observed = {0: 1, 2: 2, 3: 0}
        base = net.step_log_likelihood(view, 0, observed).item()

        perm = [2, 1, 3, 0]  # relabel the non-target nodes
        gp = permute(g, perm)
        state_p = absorb_node(initial_state(gp), 1)
        view_p = denoising_view(state_p, 1)
        observed_p = {perm[v]: e for v, e in observed.items()}
        assert net.step_log_likelihood(view_p, 0, observed_p).item() == base

    @pytest.mark.parametrize("agg", ["gat", "gru-gate"])
    def test_gradient_matches_finite_differences(self, agg):
        # hidden width 6 keeps every coordinate live at these seeds; degenerate
        # instances can park an attention direction on a flat LeakyReLU piece,
        # where finite differences see pure rounding noise
        net = tiny_denoiser(aggregator=agg, seed=100, layers=1, hidden=6, mlp_hidden=6)
        _, view = view_with_prev(2, seed=0)
        prev = view.prev_nodes()
        observed = {prev[0]: 1, prev[1]: 0}

        def fn(tape):
            return net.step_log_likelihood(view, 1, observed, tape)

        assert grad_check(fn, net.params, eps=1e-5) < 1e-4


class TestSampleStep:
    def test_deterministic_given_seed(self):
        net = tiny_denoiser(seed=21)
        _, view = view_with_prev(3, seed=21)
        a = net.sample_step(view, np.random.default_rng(42))
        b = net.sample_step(view, np.random.default_rng(42))
        assert a == b

    def test_edge_mask_forces_absent(self):
        net = tiny_denoiser(seed=23)
        _, view = view_with_prev(3, seed=23)
        prev = view.prev_nodes()
        _, assignment = net.sample_step(view, np.random.default_rng(0),
                                        edge_mask=set(prev))
        assert all(v == ABSENT for v in assignment.values())

    def test_saturated_heads_give_argmax(self):
        net = tiny_denoiser(num_node_types=3, seed=25)
        # saturate the node head bias so one class dominates
        net.params["nh2b"].data[:] = np.array([0.0, 60.0, 0.0])
        g = new_graph([0], [], 3, 3)
        view = denoising_view(absorb_node(initial_state(g), 0), 0)
        for s in range(5):
            node_type, _ = net.sample_step(view, np.random.default_rng(s))
            assert node_type == 1

    def test_frequencies_match_enumerated_probabilities(self):
        net = tiny_denoiser(seed=27, num_node_types=1, num_edge_types=2)
        _, view = view_with_prev(2, seed=27, num_node_types=1, num_edge_types=2)
        pred = net.predict_step(view)
        probs = enumerate_outcome_probs(pred, 1, 2)
        rng = np.random.default_rng(1)
        draws = 20_000
        counts = {key: 0 for key in probs}
        prev = pred.prev_nodes
        for _ in range(draws):
            v, assignment = net.sample_step(view, rng)
            counts[(v, tuple(assignment[p] for p in prev))] += 1
        for key, p in probs.items():
            se = math.sqrt(p * (1 - p) / draws)
            assert abs(counts[key] / draws - p) < 3 * se + 1e-9
