import numpy as np
import pytest

from veriflow.corpus import ClassWeights, Label, class_weights, synth_multiview
from veriflow.errors import DataError
from veriflow.neurofusion import (
    Hyper,
    check_gradients,
    eval_with_mask,
    forward,
    history_to_csv,
    init_net,
    load_net,
    loss_and_grads,
    predict_proba_net,
    save_net,
    train_net,
)

SMALL = Hyper(per_view_hidden=4, fusion_hidden=8, seed=0)


def random_small_net(rng_seed, view_dims=(3, 2)):
    return init_net(list(view_dims), Hyper(per_view_hidden=4, fusion_hidden=8, seed=rng_seed))


def random_batch(rng, view_dims=(3, 2), n=5):
    views = [rng.normal(size=(n, d)) for d in view_dims]
    y = list(rng.integers(0, 3, size=n))
    return views, y


class TestInitNet:
    def test_reference_architecture_shapes(self):
        dims = [72, 120, 768, 6373, 600]
        net = init_net(dims, Hyper(seed=0))
        assert [w.shape for w in net.Wv] == [(16, d) for d in dims]
        assert net.Wf.shape == (32, 16 * 5)  # concat width 80
        assert net.Wo.shape == (3, 32)

    def test_same_seed_identical(self):
        a = init_net([5, 7], Hyper(seed=3))
        b = init_net([5, 7], Hyper(seed=3))
        for (_, pa), (_, pb) in zip(a.param_blocks(), b.param_blocks()):
            np.testing.assert_array_equal(pa, pb)

    def test_param_count_single_dim1_view(self):
        net = init_net([1], Hyper(seed=0))
        assert net.param_count() == 1 * 16 + 16 + 16 * 32 + 32 + 32 * 3 + 3  # 675

    def test_biases_zero_weights_bounded(self):
        net = init_net([4, 4], Hyper(seed=1))
        for name, p in net.param_blocks():
            if name.startswith("b"):
                assert np.all(p == 0.0)
        limit = np.sqrt(6.0 / (4 + 16))
        assert np.abs(net.Wv[0]).max() <= limit

    def test_empty_view_list_errors(self):
        with pytest.raises(DataError, match="at least one view"):
            init_net([], Hyper(seed=0))


class TestForward:
    def test_zero_net_uniform_output(self):
        net = random_small_net(0)
        for _, p in net.param_blocks():
            p[:] = 0.0
        out = forward(net, [np.ones(3), np.ones(2)])
        np.testing.assert_allclose(out, [1 / 3] * 3, atol=1e-12)

    def test_valid_simplex(self):
        rng = np.random.default_rng(5)
        net = random_small_net(5)
        views, _ = random_batch(rng)
        out = forward(net, views)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(out >= 0.0)

    def test_eval_mode_ignores_rng(self):
        rng1 = np.random.default_rng(1)
        rng2 = np.random.default_rng(2)
        net = random_small_net(7)
        x = [np.ones(3), np.ones(2)]
        np.testing.assert_array_equal(forward(net, x, rng=rng1), forward(net, x, rng=rng2))

    def test_train_mode_dropout_changes_output(self):
        net = random_small_net(9)
        x = [np.ones(3), np.ones(2)]
        a = forward(net, x, train_mode=True, rng=np.random.default_rng(0), retention=0.5)
        b = forward(net, x, train_mode=True, rng=np.random.default_rng(123), retention=0.5)
        assert not np.allclose(a, b)

    def test_dimension_mismatch(self):
        net = random_small_net(2)
        with pytest.raises(DataError, match="dim"):
            forward(net, [np.ones(4), np.ones(2)])

    def test_shape_invariant_random_dims(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            dims = list(rng.integers(1, 9, size=int(rng.integers(1, 4))))
            net = init_net(dims, Hyper(per_view_hidden=4, fusion_hidden=8, seed=int(rng.integers(1000))))
            views = [rng.normal(size=(3, d)) for d in dims]
            out = forward(net, views)
            assert out.shape == (3, 3)
            np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)


class TestGradients:
    def test_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        for trial in range(5):
            net = random_small_net(trial)
            views, y = random_batch(rng)
            w = ClassWeights((0.7, 1.1, 1.5))
            assert check_gradients(net, views, y, w) < 1e-4

    def test_zero_output_layer_localizes_gradient(self):
        rng = np.random.default_rng(4)
        net = random_small_net(13)
        net.Wo[:] = 0.0
        views, y = random_batch(rng)
        _, grads = loss_and_grads(net, views, y, None)
        for name, g in grads:
            if name in ("Wo", "bo"):
                assert np.abs(g).max() > 0.0
            else:
                np.testing.assert_array_equal(g, np.zeros_like(g))

    def test_unit_weights_match_unweighted(self):
        rng = np.random.default_rng(6)
        net = random_small_net(17)
        views, y = random_batch(rng)
        loss_w, grads_w = loss_and_grads(net, views, y, ClassWeights((1.0, 1.0, 1.0)))
        loss_u, grads_u = loss_and_grads(net, views, y, None)
        assert loss_w == loss_u
        for (_, gw), (_, gu) in zip(grads_w, grads_u):
            np.testing.assert_array_equal(gw, gu)

    def test_duplicating_batch_preserves_full_gradient(self):
        rng = np.random.default_rng(8)
        net = random_small_net(19)
        views, y = random_batch(rng, n=6)
        _, grads = loss_and_grads(net, views, y, None)
        dup_views = [np.concatenate([v, v]) for v in views]
        _, dup_grads = loss_and_grads(net, dup_views, y + y, None)
        for (_, g), (_, gd) in zip(grads, dup_grads):
            np.testing.assert_allclose(g, gd, atol=1e-15)


@pytest.fixture(scope="module")
def separable():
    ds = synth_multiview(45, 3, [("va", 4, 5.0), ("vb", 4, 5.0), ("vc", 4, 5.0)], seed=23)
    ids = [c.claim_id for c in ds.claims]
    views = [v.matrix(ids) for v in ds.views]
    # standardize like the experiment pipeline does
    views = [(v - v.mean(axis=0)) / np.where(v.std(axis=0) > 0, v.std(axis=0), 1) for v in views]
    y = [int(c.label) for c in ds.claims]
    return views, y


class TestTrainNet:
    def test_high_training_accuracy_with_default_hyper(self, separable):
        views, y = separable
        weights = class_weights([Label(v) for v in y])
        net, history = train_net(views, y, weights, Hyper(seed=1))
        assert len(history) == 512
        assert history.records[-1].train.accuracy >= 95.0

    def test_history_length_matches_epochs(self, separable):
        views, y = separable
        _, history = train_net(views, y, None, Hyper(seed=0, epochs=17))
        assert len(history) == 17
        assert [r.epoch for r in history.records] == list(range(1, 18))

    def test_bit_identical_histories_same_seed(self, separable):
        views, y = separable
        hyper = Hyper(seed=77, epochs=5)
        net_a, hist_a = train_net(views, y, None, hyper)
        net_b, hist_b = train_net(views, y, None, hyper)
        for (_, pa), (_, pb) in zip(net_a.param_blocks(), net_b.param_blocks()):
            np.testing.assert_array_equal(pa, pb)
        assert [r.loss for r in hist_a.records] == [r.loss for r in hist_b.records]
        assert [r.train for r in hist_a.records] == [r.train for r in hist_b.records]

    def test_uniform_weights_reproduce_unweighted(self, separable):
        views, y = separable
        hyper = Hyper(seed=5, epochs=3)
        net_w, _ = train_net(views, y, ClassWeights((1.0, 1.0, 1.0)), hyper)
        net_u, _ = train_net(views, y, None, hyper)
        for (_, pw), (_, pu) in zip(net_w.param_blocks(), net_u.param_blocks()):
            np.testing.assert_array_equal(pw, pu)

    def test_eval_history_recorded(self, separable):
        views, y = separable
        _, history = train_net(
            views, y, None, Hyper(seed=2, epochs=4),
            eval_views=[v[:10] for v in views], eval_y=y[:10],
        )
        assert all(r.eval is not None for r in history.records)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow is the point
    def test_non_finite_loss_aborts(self, separable):
        views, y = separable
        bad = [v.copy() for v in views]
        bad[0] *= 1e12  # explodes the logits within an epoch at lr 0.5
        from veriflow.errors import TrainingError

        with pytest.raises(TrainingError, match="non-finite"):
            train_net(bad, y, None, Hyper(seed=0, epochs=3, learning_rate=0.5))


class TestEvalWithMask:
    def test_identity_mask_equals_forward(self):
        rng = np.random.default_rng(41)
        net = random_small_net(3)
        views, _ = random_batch(rng)
        np.testing.assert_array_equal(eval_with_mask(net, views, [True, True]), forward(net, views))

    def test_masked_view_perturbation_invariance(self):
        rng = np.random.default_rng(43)
        net = random_small_net(29)
        views, _ = random_batch(rng)
        base = eval_with_mask(net, views, [True, False])
        for _ in range(20):
            perturbed = [views[0], rng.normal(size=views[1].shape) * 100]
            np.testing.assert_array_equal(eval_with_mask(net, perturbed, [True, False]), base)

    def test_all_inactive_equals_zero_input(self):
        rng = np.random.default_rng(47)
        net = random_small_net(31)
        views, _ = random_batch(rng)
        masked = eval_with_mask(net, views, [False, False])
        zeros = forward(net, [np.zeros_like(v) for v in views])
        np.testing.assert_array_equal(masked, zeros)

    def test_mask_length_mismatch(self):
        net = random_small_net(1)
        with pytest.raises(DataError, match="mask length"):
            eval_with_mask(net, [np.ones(3), np.ones(2)], [True])


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        net = init_net([3, 5], Hyper(per_view_hidden=4, fusion_hidden=8, seed=2), view_names=["alpha", "beta"])
        path = tmp_path / "net.txt"
        save_net(path, net)
        loaded = load_net(path)
        assert loaded.view_names == ("alpha", "beta")
        for (_, pa), (_, pb) in zip(net.param_blocks(), loaded.param_blocks()):
            np.testing.assert_array_equal(pa, pb)
        views = [rng.normal(size=(4, 3)), rng.normal(size=(4, 5))]
        np.testing.assert_array_equal(predict_proba_net(net, views), predict_proba_net(loaded, views))
        save_net(tmp_path / "again.txt", loaded)
        assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()


class TestHistoryCsv:
    def test_header_and_row_count(self):
        rng = np.random.default_rng(50)
        views = [rng.normal(size=(9, 2))]
        y = [0, 1, 2] * 3
        _, history = train_net(views, y, None, Hyper(seed=0, epochs=3))
        text = history_to_csv(history)
        lines = text.strip().split("\n")
        assert lines[0] == "epoch,loss,mae,mmae,acc,f1,mar"
        assert len(lines) == 4

    def test_eval_columns_present(self):
        rng = np.random.default_rng(51)
        views = [rng.normal(size=(9, 2))]
        y = [0, 1, 2] * 3
        _, history = train_net(views, y, None, Hyper(seed=0, epochs=2), eval_views=[views[0][:3]], eval_y=[0, 1, 2])
        header = history_to_csv(history).split("\n")[0]
        assert header.endswith("eval_mae,eval_mmae,eval_acc,eval_f1,eval_mar")
