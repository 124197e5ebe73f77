"""Predicate-aware attention encoder."""

import io

import numpy as np
import pytest

from licap import autodiff as ad
from licap.kg import KnowledgeGraph, augment_for_message_passing, load_graph
from licap.pregat import (
    PreGATConfig,
    attention_coefficients,
    forward,
    init_pregat,
    load_params,
    save_params,
)


def toy_graph(text="a\tp\tb\nb\tq\tc\nc\tp\ta\nd\tq\ta\n"):
    return augment_for_message_passing(load_graph(io.StringIO(text)))


def toy_config(kg, in_dim=3, hidden=2, heads=2, pred_dim=2, aware=True):
    return PreGATConfig(
        in_dim=in_dim,
        hidden_dim=hidden,
        heads=heads,
        predicate_dim=pred_dim,
        predicate_count=kg.predicate_count,
        predicate_aware=aware,
    )


class TestInit:
    def test_same_seed_bitwise_equal(self):
        kg = toy_graph()
        cfg = toy_config(kg)
        a = init_pregat(cfg, seed=5)
        b = init_pregat(cfg, seed=5)
        for ta, tb in zip(a.all_tensors(), b.all_tensors()):
            assert np.array_equal(ta.values, tb.values)

    def test_predicate_table_shape(self):
        kg = augment_for_message_passing(load_graph(io.StringIO("a\tp\tb\n")))
        assert kg.predicate_count == 3
        cfg = toy_config(kg, pred_dim=10)
        params = init_pregat(cfg, seed=0)
        assert params.predicates.values.shape == (3, 10)

    def test_gat_mode_attention_vector_length(self):
        kg = toy_graph()
        cfg = toy_config(kg, hidden=4, aware=False)
        params = init_pregat(cfg, seed=0)
        assert all(a.values.shape == (8,) for a in params.attn)

    def test_aware_mode_attention_vector_length(self):
        kg = toy_graph()
        cfg = toy_config(kg, hidden=4, pred_dim=3)
        params = init_pregat(cfg, seed=0)
        assert all(a.values.shape == (11,) for a in params.attn)

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValueError):
            PreGATConfig(in_dim=0, predicate_count=1)

    def test_predicate_table_is_standard_normal(self):
        cfg = PreGATConfig(in_dim=4, predicate_dim=50, predicate_count=200)
        params = init_pregat(cfg, seed=3)
        table = params.predicates.values
        assert abs(table.mean()) < 0.05
        assert abs(table.std() - 1.0) < 0.05
        assert np.abs(table).max() > 1.0  # not uniform-bounded


class TestAttention:
    def test_self_only_node_gets_unit_attention(self):
        kg = augment_for_message_passing(load_graph(io.StringIO("a\tp\tb\n")))
        # no edges touch node c in this graph; build one with an isolated node
        bare = KnowledgeGraph(node_count=2, edges=((0, 0, 0),), predicate_count=1)
        kg = augment_for_message_passing(bare)
        cfg = toy_config(kg)
        params = init_pregat(cfg, seed=1)
        features = np.random.default_rng(0).normal(size=(2, 3))
        alpha = attention_coefficients(params, kg, features).values
        dst, _, _ = kg.message_edges()
        # node 1 has only its self edge
        rows = np.where(dst == 1)[0]
        assert rows.size == 1
        assert np.allclose(alpha[rows], 1.0)

    def test_identical_neighbors_split_evenly(self):
        # two in-edges to b with the same predicate from nodes with equal rows
        bare = KnowledgeGraph(
            node_count=3, edges=((0, 0, 2), (1, 0, 2)), predicate_count=1
        )
        kg = augment_for_message_passing(bare)
        cfg = toy_config(kg)
        params = init_pregat(cfg, seed=2)
        features = np.ones((3, 3))
        features[2] = [0.5, -1.0, 2.0]
        alpha = attention_coefficients(params, kg, features).values
        dst, src, pred = kg.message_edges()
        rows = np.where((dst == 2) & (src != 2))[0]
        assert rows.size == 2
        assert np.allclose(alpha[rows[0]], alpha[rows[1]])

    def test_predicate_changes_attention(self):
        # same neighbors, same features, different predicate ids
        bare = KnowledgeGraph(
            node_count=3, edges=((0, 0, 2), (1, 1, 2)), predicate_count=2
        )
        kg = augment_for_message_passing(bare)
        cfg = toy_config(kg)
        params = init_pregat(cfg, seed=3)
        features = np.ones((3, 3))
        alpha = attention_coefficients(params, kg, features).values
        dst, src, _ = kg.message_edges()
        rows = np.where((dst == 2) & (src != 2))[0]
        assert not np.allclose(alpha[rows[0]], alpha[rows[1]])

    def test_normalization_across_random_graphs(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(2, 51))
            n_edges = int(rng.integers(1, 4 * n))
            edges = tuple(
                (int(rng.integers(n)), int(rng.integers(3)), int(rng.integers(n)))
                for _ in range(n_edges)
            )
            kg = augment_for_message_passing(
                KnowledgeGraph(node_count=n, edges=edges, predicate_count=3)
            )
            cfg = toy_config(kg)
            params = init_pregat(cfg, seed=int(rng.integers(1 << 30)))
            features = rng.normal(size=(n, 3))
            alpha = attention_coefficients(params, kg, features).values
            dst, _, _ = kg.message_edges()
            for head in range(cfg.heads):
                sums = np.zeros(n)
                np.add.at(sums, dst, alpha[:, head])
                assert np.all(np.abs(sums - 1.0) <= 1e-12)


class TestForward:
    def test_output_shape(self):
        kg = toy_graph()
        cfg = PreGATConfig(
            in_dim=5, hidden_dim=8, heads=8, predicate_dim=10,
            predicate_count=kg.predicate_count,
        )
        params = init_pregat(cfg, seed=0)
        features = np.random.default_rng(1).normal(size=(kg.node_count, 5))
        out = forward(params, kg, features)
        assert out.values.shape == (kg.node_count, 64)

    def test_isolated_node_is_transformed_self(self):
        bare = KnowledgeGraph(node_count=2, edges=((0, 0, 0),), predicate_count=1)
        kg = augment_for_message_passing(bare)
        cfg = toy_config(kg)
        params = init_pregat(cfg, seed=4)
        features = np.random.default_rng(2).normal(size=(2, 3))
        out = forward(params, kg, features).values
        slope = cfg.leaky_slope
        for head in range(cfg.heads):
            wh = features[1] @ params.weights[head].values
            expected = np.where(wh > 0, wh, slope * wh)
            block = out[1, head * cfg.hidden_dim : (head + 1) * cfg.hidden_dim]
            assert np.allclose(block, expected)

    def test_adjacency_order_does_not_matter(self):
        kg = toy_graph()
        cfg = toy_config(kg)
        params = init_pregat(cfg, seed=5)
        features = np.random.default_rng(3).normal(size=(kg.node_count, 3))
        base = forward(params, kg, features).values

        rng = np.random.default_rng(9)
        shuffled_adj = tuple(
            tuple(rng.permutation(np.array(entries, dtype=np.int64)).tolist())
            if entries else ()
            for entries in kg.adjacency
        )
        shuffled_adj = tuple(
            tuple((int(a), int(b)) for a, b in entries) for entries in shuffled_adj
        )
        shuffled = KnowledgeGraph(
            node_count=kg.node_count,
            edges=kg.edges,
            predicate_count=kg.predicate_count,
            node_names=kg.node_names,
            predicate_names=kg.predicate_names,
            adjacency=shuffled_adj,
            augmented=True,
        )
        assert np.array_equal(forward(params, shuffled, features).values, base)

    def test_gat_equivalence_with_zero_predicate_dim(self):
        kg = toy_graph()
        features = np.random.default_rng(4).normal(size=(kg.node_count, 3))
        outputs = []
        for aware in (True, False):
            cfg = toy_config(kg, pred_dim=0, aware=aware)
            params = init_pregat(cfg, seed=6)
            outputs.append(forward(params, kg, features).values)
        assert np.array_equal(outputs[0], outputs[1])

    def test_gradients_on_five_node_graph(self):
        bare = KnowledgeGraph(
            node_count=5,
            edges=((0, 0, 1), (1, 1, 2), (2, 0, 3), (3, 1, 4), (4, 0, 0), (1, 0, 3)),
            predicate_count=2,
        )
        kg = augment_for_message_passing(bare)
        cfg = toy_config(kg)
        rng = np.random.default_rng(12)
        params = init_pregat(cfg, seed=12)
        features = ad.tensor(rng.normal(size=(5, 3)), requires_grad=True)
        direction = rng.normal(size=(5, cfg.out_dim))
        leaves = [features, *params.all_tensors()]

        def f(*leaves):
            out = forward(params, kg, leaves[0])
            return ad.tsum(ad.mul(out, ad.tensor(direction)))

        assert ad.grad_check(f, leaves, eps=1e-6) < 1e-4

    def test_dimension_mismatch_rejected(self):
        kg = toy_graph()
        params = init_pregat(toy_config(kg), seed=0)
        with pytest.raises(ValueError):
            forward(params, kg, np.zeros((kg.node_count, 7)))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        kg = toy_graph()
        cfg = toy_config(kg)
        params = init_pregat(cfg, seed=8)
        path = tmp_path / "params.tsv"
        save_params(path, params)
        loaded = load_params(path)
        assert loaded.config == cfg
        for a, b in zip(params.all_tensors(), loaded.all_tensors()):
            assert np.array_equal(a.values, b.values)

    def test_round_trip_with_zero_predicate_dim(self, tmp_path):
        kg = toy_graph()
        cfg = toy_config(kg, pred_dim=0)
        params = init_pregat(cfg, seed=8)
        path = tmp_path / "params.tsv"
        save_params(path, params)
        loaded = load_params(path)
        assert loaded.predicates.values.shape == (kg.predicate_count, 0)
