import json

import numpy as np
import pytest

from oracles import finite_diff, rel_err
from pgxbench import autodiff as ad
from pgxbench.autodiff import Tensor
from pgxbench.explainer import (
    ExplainTrainConfig,
    edge_logits,
    explain,
    explainer_from_dict,
    explainer_to_dict,
    explainer_loss,
    grad_edge_scores,
    instance_mask_scores,
    new_explainer_net,
    node_grad_scores,
    prepare_instance,
    prepare_instances,
    reg_budget,
    reg_connectivity,
    sample_concrete,
    temperature,
    train_pgexplainer,
)
from pgxbench.gnn import TrainConfig, forward, new_model, train
from pgxbench.graphs import Graph, extract_computation_graph, graph_from_undirected
from pgxbench.seeding import substream
from pgxbench.synth import Dataset, gen_ba, gen_dataset


class FixedRng:
    """Stand-in generator returning a constant uniform draw."""

    def __init__(self, value):
        self.value = value

    def random(self, shape):
        return np.full(shape, self.value)


class TestTemperature:
    def test_endpoints(self):
        cfg = ExplainTrainConfig()
        assert temperature(0, cfg) == pytest.approx(5.0)
        assert temperature(cfg.epochs, cfg) == pytest.approx(2.0)

    def test_geometric_midpoint(self):
        cfg = ExplainTrainConfig(epochs=30)
        assert temperature(15, cfg) == pytest.approx(np.sqrt(10.0))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            temperature(31, ExplainTrainConfig(epochs=30))


class TestSampleConcrete:
    def test_half_draw_reduces_to_sigmoid(self):
        om = np.array([[0.7], [-1.2]])
        out = sample_concrete(Tensor(om), 2.0, FixedRng(0.5))
        np.testing.assert_allclose(out.data, 1 / (1 + np.exp(-om / 2.0)))

    def test_zero_logit_half_draw_gives_half(self):
        out = sample_concrete(Tensor(np.zeros((3, 1))), 0.37, FixedRng(0.5))
        np.testing.assert_allclose(out.data, 0.5)

    def test_monte_carlo_matches_sigmoid(self):
        # P(sample > 1/2) equals sigmoid(logit) for any temperature
        rng = substream(0, "mc")
        om = Tensor(np.full((1000, 1), 2.0))
        draws = sample_concrete(om, 0.05, rng).data
        frac = float((draws > 0.5).mean())
        assert abs(frac - 1 / (1 + np.exp(-2.0))) < 0.03

    def test_low_temperature_binarizes(self):
        rng = substream(0, "bin")
        for om_value in (2.0, -2.0, 4.0):
            draws = sample_concrete(Tensor(np.full((5000, 1), om_value)), 0.01, rng).data
            near_binary = (draws < 0.01) | (draws > 0.99)
            assert near_binary.mean() > 0.99

    def test_temperature_must_be_positive(self):
        with pytest.raises(ValueError):
            sample_concrete(Tensor(np.zeros((2, 1))), 0.0, substream(0, "x"))

    def test_gradient_flows_through_logits(self):
        om = Tensor(np.array([[0.3], [-0.4]]), requires_grad=True)
        rng = substream(3, "g")
        noise_rng_state = rng.bit_generator.state

        def build():
            r = np.random.default_rng()
            r.bit_generator.state = noise_rng_state
            return ad.total(sample_concrete(om, 1.7, r))

        loss = build()
        (g,) = ad.backward(loss, [om])
        fd = finite_diff(lambda: build().item(), om.data)
        assert rel_err(g, fd) < 1e-5


class TestLossTerms:
    def test_cross_entropy_zero_for_matching_onehot(self):
        p = np.array([0.0, 1.0])
        loss = explainer_loss(p, Tensor(np.array([[0.0, 1.0]])), Tensor(np.array([[0.5]])),
                              ExplainTrainConfig(lambda_size=0, lambda_entropy=0))
        assert loss.item() == pytest.approx(0.0, abs=1e-9)

    def test_cross_entropy_uniform_target(self):
        loss = explainer_loss(
            np.array([0.7, 0.3]),
            Tensor(np.array([[0.5, 0.5]])),
            Tensor(np.zeros((1, 1)) + 0.5),
            ExplainTrainConfig(lambda_size=0, lambda_entropy=0),
        )
        assert loss.item() == pytest.approx(np.log(2.0))

    def test_entropy_term_zero_at_binary_masks(self):
        cfg = ExplainTrainConfig(lambda_size=0, lambda_entropy=1.0)
        p = np.array([1.0, 0.0])
        loss = explainer_loss(p, Tensor(np.array([[1.0, 0.0]])), Tensor(np.array([[1.0], [0.0]])), cfg)
        assert loss.item() == pytest.approx(0.0, abs=1e-9)

    def test_size_term_scales_with_mask_mass(self):
        cfg = ExplainTrainConfig(lambda_size=0.05, lambda_entropy=0)
        p = np.array([1.0, 0.0])
        pm = Tensor(np.array([[1.0, 0.0]]))
        small = explainer_loss(p, pm, Tensor(np.full((4, 1), 0.1)), cfg).item()
        large = explainer_loss(p, pm, Tensor(np.full((4, 1), 0.9)), cfg).item()
        assert large - small == pytest.approx(0.05 * 4 * 0.8)


class TestRegularizers:
    def test_budget_under(self):
        assert reg_budget(Tensor(np.array([1.0, 1.0, 1.0])), 5.0).item() == 0.0

    def test_budget_over(self):
        assert reg_budget(Tensor(np.array([4.0, 4.0])), 5.0).item() == pytest.approx(3.0)

    def test_budget_zero_is_size_term(self):
        e = np.array([0.3, 0.4])
        assert reg_budget(Tensor(e), 0.0).item() == pytest.approx(e.sum())

    def test_budget_rejects_negative(self):
        with pytest.raises(ValueError):
            reg_budget(Tensor(np.ones(2)), -1.0)

    def _star(self):
        return graph_from_undirected(5, [(0, i) for i in range(1, 5)], np.ones((5, 2)))

    def test_connectivity_agreeing_extremes_near_zero(self):
        g = self._star()
        val = reg_connectivity(Tensor(np.ones((4, 1))), g).item()
        assert val == pytest.approx(0.0, abs=1e-9)

    def test_connectivity_fair_coin_is_ln2(self):
        g = self._star()
        val = reg_connectivity(Tensor(np.full((4, 1), 0.5)), g).item()
        assert val == pytest.approx(np.log(2.0))

    def test_connectivity_penalizes_disagreement(self):
        g = self._star()
        uneven = np.array([[0.99], [0.01], [0.01], [0.01]])
        even = np.full((4, 1), 0.99)
        assert reg_connectivity(Tensor(uneven), g).item() > reg_connectivity(Tensor(even), g).item()

    def test_connectivity_no_adjacent_pairs(self):
        g = graph_from_undirected(4, [(0, 1), (2, 3)], np.ones((4, 2)))
        assert reg_connectivity(Tensor(np.ones((2, 1))), g).item() == 0.0


def tiny_node_setup(seed=0):
    ds = gen_dataset("tree-cycles", 2)
    model = new_model("node", ds.feature_dim, ds.label_count, seed=seed)
    return ds, model


class TestEdgeLogits:
    def test_zero_final_layer_gives_uniform_half(self):
        ds, model = tiny_node_setup()
        ctx = prepare_instance(model, ds, int(ds.instances[0]))
        net = new_explainer_net(60, substream(0, "n"))
        net.w2.data = np.zeros_like(net.w2.data)
        om = edge_logits(net, ctx.z, ctx.graph, ctx.center)
        np.testing.assert_allclose(om, 0.0, atol=1e-12)
        np.testing.assert_allclose(1 / (1 + np.exp(-om)), 0.5)

    def test_symmetrized_output_direction_invariant(self):
        ds, model = tiny_node_setup()
        ctx = prepare_instance(model, ds, int(ds.instances[3]))
        net = new_explainer_net(60, substream(1, "n"))
        om = edge_logits(net, ctx.z, ctx.graph, ctx.center)
        np.testing.assert_allclose(om, om[ctx.graph.reverse_index()], atol=1e-12)

    def test_identical_embeddings_give_identical_logits(self):
        g = graph_from_undirected(4, [(0, 1), (1, 2), (2, 3)], np.ones((4, 10)))
        z = np.tile(np.linspace(0.1, 2.0, 20), (4, 1))
        net = new_explainer_net(40, substream(2, "n"))
        om1 = edge_logits(net, z, g)
        om2 = edge_logits(net, z, g)
        np.testing.assert_array_equal(om1, om2)
        # duplicate graph with the same embeddings scores identically
        g2 = graph_from_undirected(4, [(0, 1), (1, 2), (2, 3)], np.ones((4, 10)))
        np.testing.assert_array_equal(edge_logits(net, z, g2), om1)

    def test_missing_center_rejected_for_node_width(self):
        g = graph_from_undirected(3, [(0, 1), (1, 2)], np.ones((3, 10)))
        net = new_explainer_net(60, substream(3, "n"))
        with pytest.raises(ValueError, match="center"):
            edge_logits(net, np.ones((3, 20)), g, center=None)

    def test_incompatible_width_rejected(self):
        g = graph_from_undirected(3, [(0, 1), (1, 2)], np.ones((3, 10)))
        net = new_explainer_net(60, substream(4, "n"))
        with pytest.raises(ValueError, match="width"):
            edge_logits(net, np.ones((3, 7)), g, center=0)


class TestTraining:
    def test_single_instance_training_converges(self):
        ds, model = tiny_node_setup()
        cfg = ExplainTrainConfig(epochs=10, seed=0)
        net, history = train_pgexplainer(model, ds, ds.instances[:1], cfg)
        assert len(history) == 10
        assert np.isfinite(history).all()

    def test_loss_decreases_on_trained_model(self):
        ds = gen_dataset("tree-cycles", 2)
        model, _ = train(ds, TrainConfig(epochs=300, seed=0))
        cfg = ExplainTrainConfig(seed=0)
        _, history = train_pgexplainer(model, ds, ds.instances[:40], cfg)
        assert history[-1] < history[0]

    def test_gnn_parameters_frozen(self):
        ds, model = tiny_node_setup()
        before = [p.data.copy() for p in model.params()]
        train_pgexplainer(model, ds, ds.instances[:5], ExplainTrainConfig(epochs=3, seed=0))
        for b, p in zip(before, model.params()):
            np.testing.assert_array_equal(b, p.data)

    def test_parameter_count_independent_of_graph_size(self):
        # one shared net regardless of instance count or edge count
        net = new_explainer_net(60, substream(0, "a"))
        assert net.param_count() == 60 * 64 + 64 + 64 + 1
        ds, model = tiny_node_setup()
        ctxs = prepare_instances(model, ds, ds.instances[:6])
        nets = [train_pgexplainer(model, ds, None, ExplainTrainConfig(epochs=1, seed=s), contexts=ctxs[: k + 1])[0]
                for s, k in [(0, 0), (1, 5)]]
        assert nets[0].param_count() == nets[1].param_count() == net.param_count()
        # contrast: the per-instance mask optimizes one variable per undirected edge
        for ctx in ctxs[:2]:
            n_rep = len(ctx.graph.representative_edges())
            logits = instance_mask_scores(model, ctx, 0)
            assert len(logits) == 2 * n_rep

    def test_nan_loss_aborts_with_last_good_params(self, monkeypatch):
        ds, model = tiny_node_setup()
        cfg = ExplainTrainConfig(epochs=5, seed=0)
        import pgxbench.explainer as ex

        real = ex._instance_loss
        calls = {"n": 0}

        def sometimes_nan(net, frozen, ctx, tau, c, rng):
            calls["n"] += 1
            if calls["n"] > 2:
                return Tensor(np.nan)
            return real(net, frozen, ctx, tau, c, rng)

        monkeypatch.setattr(ex, "_instance_loss", sometimes_nan)
        with pytest.warns(UserWarning, match="restoring last checkpoint"):
            net, history = ex.train_pgexplainer(model, ds, ds.instances[:2], cfg)
        assert len(history) == 1  # only the first epoch completed


class TestExplain:
    def test_deterministic_and_symmetric(self):
        ds = gen_dataset("tree-cycles", 2)
        model, _ = train(ds, TrainConfig(epochs=200, seed=0))
        net, _ = train_pgexplainer(model, ds, ds.instances[:20], ExplainTrainConfig(epochs=5, seed=0))
        a = explain(net, model, ds, int(ds.instances[0]), topk=6)
        b = explain(net, model, ds, int(ds.instances[0]), topk=6)
        np.testing.assert_array_equal(a.omega, b.omega)
        assert a.topk == b.topk
        np.testing.assert_allclose(a.prob, a.prob[a.graph.reverse_index()])
        assert a.inference_ms >= 0.0

    def test_unseen_instance_without_retraining(self):
        ds = gen_dataset("tree-cycles", 2)
        model, _ = train(ds, TrainConfig(epochs=200, seed=0))
        net, _ = train_pgexplainer(model, ds, ds.instances[:10], ExplainTrainConfig(epochs=5, seed=0))
        unseen = int(ds.instances[-1])
        result = explain(net, model, ds, unseen, topk=6)
        assert result.instance == unseen
        assert len(result.topk) == 6

    def test_export_dict_fields(self):
        ds, model = tiny_node_setup()
        net, _ = train_pgexplainer(model, ds, ds.instances[:3], ExplainTrainConfig(epochs=2, seed=0))
        d = explain(net, model, ds, int(ds.instances[1]), topk=4).to_dict()
        assert set(d) == {"schema_version", "instance", "edges", "omega", "prob", "topk"}
        assert len(d["topk"]) == 4
        assert len(d["edges"]) == len(d["omega"]) == len(d["prob"])

    def test_runtime_scales_linearly_in_edges(self):
        # inference is one MLP pass over the edge list plus one GNN encode;
        # an affine fit over a 100x edge range should be close to exact
        import time

        from pgxbench.graphs import graph_from_undirected

        sizes = [200, 2000, 20000]
        model = new_model("graph", 10, 2, seed=0)
        net = new_explainer_net(40, substream(0, "lin"))
        medians = []
        for n_edges in sizes:
            g = graph_from_undirected(
                n_edges + 1,
                [(i, i + 1) for i in range(n_edges)],
                np.ones((n_edges + 1, 10)),
                graph_label=0,
            )
            ds = Dataset("lin", "graph", [g], np.arange(1), {})
            times = []
            for _ in range(7):
                t0 = time.perf_counter()
                explain(net, model, ds, 0, topk=5)
                times.append(time.perf_counter() - t0)
            medians.append(np.median(times))
        x = np.asarray(sizes, dtype=float)
        y = np.asarray(medians)
        slope, intercept = np.polyfit(x, y, 1)
        residuals = y - (slope * x + intercept)
        r2 = 1.0 - residuals.var() / y.var()
        assert slope > 0
        assert r2 > 0.9


class TestInstanceMaskBaseline:
    def test_zero_epochs_gives_half_scores(self):
        ds, model = tiny_node_setup()
        ctx = prepare_instance(model, ds, int(ds.instances[0]))
        scores = instance_mask_scores(model, ctx, 0)
        np.testing.assert_allclose(scores, 0.5)

    def test_scores_symmetric_and_in_unit_interval(self):
        ds = gen_dataset("tree-cycles", 2)
        model, _ = train(ds, TrainConfig(epochs=200, seed=0))
        ctx = prepare_instance(model, ds, int(ds.instances[0]))
        scores = instance_mask_scores(model, ctx, 20, rng=substream(0, "m"))
        assert np.all((scores > 0) & (scores < 1))
        np.testing.assert_allclose(scores, scores[ctx.graph.reverse_index()])

    def test_recovers_decisive_edges(self):
        # graph task where the label is carried entirely by motif edges:
        # class = house vs cycle attached to a tree; train to high accuracy
        ds = gen_dataset("ba-2motifs", 1)
        sub = Dataset("sub", "graph", ds.graphs[:60] + ds.graphs[-60:], np.arange(120), {})
        model, rep = train(sub, TrainConfig(epochs=400, seed=0, keep_best_val=False))
        assert rep.train_acc > 0.9
        ctx = prepare_instance(model, sub, 0)
        scores = instance_mask_scores(model, ctx, 150, rng=substream(1, "m"))
        rep_idx = ctx.graph.representative_edges()
        auc_like = (
            scores[rep_idx][ctx.graph.motif_edge[rep_idx]].mean()
            > scores[rep_idx][~ctx.graph.motif_edge[rep_idx]].mean()
        )
        assert auc_like


class TestGradientBaselines:
    def test_grad_scores_zero_beyond_computation_graph(self):
        # degree normalization lets an edge touching the ball's rim influence
        # the center, so the exactly-zero region is edges with both endpoints
        # outside the L-hop node set
        ds = gen_dataset("tree-cycles", 2)
        model, _ = train(ds, TrainConfig(epochs=100, seed=0))
        g = ds.graphs[0]
        v = int(ds.instances[0])
        scores = grad_edge_scores(model, g, center=v)
        cg = extract_computation_graph(g, v, 3)
        inside_nodes = np.zeros(g.num_nodes, dtype=bool)
        inside_nodes[cg.node_map] = True
        fully_outside = ~(inside_nodes[g.edges[:, 0]] | inside_nodes[g.edges[:, 1]])
        assert np.all(scores >= 0)
        np.testing.assert_array_equal(scores[fully_outside], 0.0)
        assert scores[cg.edge_map].max() > 0

    def test_grad_matches_finite_difference_edge_perturbation(self):
        g = gen_ba(6, 1, substream(5, "g"))
        g = Graph(num_nodes=6, edges=g.edges, features=np.random.default_rng(0).random((6, 10)))
        model = new_model("node", 10, 3, seed=1)
        center = 0
        scores = grad_edge_scores(model, g, center=center)
        _, probs = forward(model, g)
        pred = int(probs.data[center].argmax())

        def loss_at(weights):
            _, p = forward(model, g, edge_weights=weights)
            return -np.log(max(p.data[center, pred], 1e-12))

        h = 1e-6
        raw = np.zeros(g.num_edges)
        for e in range(g.num_edges):
            wp = np.ones(g.num_edges)
            wp[e] = 1.0 - h  # stay inside [0, 1]
            raw[e] = (loss_at(np.ones(g.num_edges)) - loss_at(wp)) / h
        sym = 0.5 * (np.abs(raw) + np.abs(raw)[g.reverse_index()])
        np.testing.assert_allclose(scores, sym, atol=1e-4)

    def test_node_grad_mean_of_endpoint_importance(self):
        ds, model = tiny_node_setup()
        g = ds.graphs[0]
        scores = node_grad_scores(model, g, center=int(ds.instances[0]))
        assert np.all(scores >= 0)
        np.testing.assert_allclose(scores, scores[g.reverse_index()])

    def test_node_grad_zero_when_features_disconnected(self):
        ds, model = tiny_node_setup()
        for wl, _ in model.layers:
            wl.data = np.zeros_like(wl.data)
        scores = node_grad_scores(model, ds.graphs[0], center=int(ds.instances[0]))
        np.testing.assert_array_equal(scores, 0.0)


class TestCheckpoint:
    def test_round_trip(self):
        net = new_explainer_net(40, substream(0, "c"))
        d = explainer_to_dict(net, ExplainTrainConfig())
        back = explainer_from_dict(json.loads(json.dumps(d)))
        np.testing.assert_array_equal(back.w1.data, net.w1.data)
        np.testing.assert_array_equal(back.b2.data, net.b2.data)

    def test_width_validation(self):
        net = new_explainer_net(40, substream(0, "c"))
        d = explainer_to_dict(net)
        d["input_width"] = 60
        with pytest.raises(ValueError, match="widths"):
            explainer_from_dict(d)
