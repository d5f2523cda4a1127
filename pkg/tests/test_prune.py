import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signalprune import layers, prune
from signalprune.errors import ConfigError, DecisionError
from signalprune.layers import ConvParams
from signalprune.network import Architecture, init_network, iter_params, network_forward
from signalprune.prune import PruneDecision, decide, kernel_scores, rebuild_pruned, retention_rate, select_keep


def rand_net(rng, widths=(4, 6, 8), d=32, k=3, n_classes=3, randomize_stats=True):
    arch = Architecture(*widths, k=k, p_drop=0.0, d=d, n_classes=n_classes)
    net = init_network(arch, seed=int(rng.integers(0, 2**31)))
    if randomize_stats:
        for b in net.blocks:
            b.bn.gamma[:] = rng.normal(1.0, 0.3, b.bn.c)
            b.bn.beta[:] = rng.normal(0.0, 0.3, b.bn.c)
            b.bn.running_mean[:] = rng.normal(0.0, 0.5, b.bn.c)
            b.bn.running_var[:] = rng.uniform(0.25, 2.0, b.bn.c)
            b.conv.bias[:] = rng.normal(0.0, 0.2, b.conv.c_out)
        net.dense.bias[:] = rng.normal(0.0, 0.2, net.dense.n_out)
    return net


def masked_logits(net, decision, x):
    """Oracle: zero the consumers of pruned channels in the ORIGINAL net."""
    masked = net.clone()
    for l, keep in enumerate(decision.keep):
        dropped = sorted(set(range(net.blocks[l].conv.c_out)) - set(keep))
        if not dropped:
            continue
        if l + 1 < len(masked.blocks):
            masked.blocks[l + 1].conv.weights[:, dropped, :] = 0.0
        else:
            masked.dense.weights[:, dropped] = 0.0
    logits, _ = network_forward(masked, x, layers.EVAL)
    return logits


class TestScores:
    def test_zero_kernel(self):
        p = ConvParams(weights=np.zeros((1, 2, 3)), bias=np.ones(1))
        assert kernel_scores(p)[0] == 0.0

    def test_slab_arithmetic(self):
        # |1| + |-2| + |3| + |-4| = 10, zero-padded third tap changes nothing
        p = ConvParams(weights=np.array([[[1.0, -2.0, 0.0], [3.0, -4.0, 0.0]]]), bias=np.zeros(1))
        assert kernel_scores(p)[0] == 10.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        p = ConvParams(weights=rng.normal(size=(5, 4, 3)), bias=rng.normal(size=5))
        got = kernel_scores(p)
        for j in range(5):
            want = sum(abs(float(p.weights[j, i, t])) for i in range(4) for t in range(3))
            assert abs(got[j] - want) < 1e-12

    def test_input_permutation_invariance(self):
        rng = np.random.default_rng(1)
        p = ConvParams(weights=rng.normal(size=(3, 5, 3)), bias=np.zeros(3))
        perm = rng.permutation(5)
        permuted = ConvParams(weights=p.weights[:, perm, :].copy(), bias=p.bias.copy())
        np.testing.assert_allclose(kernel_scores(p), kernel_scores(permuted), atol=1e-12)


class TestSelectKeep:
    def test_basic(self):
        assert select_keep(np.array([1.0, 5.0, 3.0, 2.0]), 0.5) == [1, 2]

    def test_tie_prefers_lower_index(self):
        assert select_keep(np.array([2.0, 2.0, 2.0, 2.0]), 0.5) == [0, 1]

    def test_ceil_on_odd_count(self):
        assert len(select_keep(np.arange(5.0), 0.5)) == 3

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(1, 12))
            scores = rng.integers(0, 4, size=n).astype(float)  # heavy ties
            ratio = float(rng.integers(1, 129)) / 128.0
            got = select_keep(scores, ratio)
            n_keep = max(1, math.ceil(ratio * n - 1e-12))
            ranked = sorted(range(n), key=lambda i: (-scores[i], i))
            assert got == sorted(ranked[:n_keep])

    @given(st.lists(st.integers(0, 5), min_size=1, max_size=16), st.integers(1, 16))
    @settings(max_examples=100, deadline=None)
    def test_size_sorted_unique(self, scores, num):
        ratio = num / 16.0
        keep = select_keep(np.array(scores, dtype=float), ratio)
        assert keep == sorted(set(keep))
        assert len(keep) == max(1, math.ceil(ratio * len(scores) - 1e-12))

    def test_bad_ratio(self):
        with pytest.raises(ConfigError):
            select_keep(np.ones(4), 0.0)


class TestRebuild:
    def test_identity_at_ratio_one(self):
        net = rand_net(np.random.default_rng(3))
        rebuilt = rebuild_pruned(net, decide(net, 1.0))
        for (_, a), (_, b) in zip(iter_params(net), iter_params(rebuilt)):
            np.testing.assert_array_equal(a, b)
        for ba, bb in zip(net.blocks, rebuilt.blocks):
            np.testing.assert_array_equal(ba.bn.running_mean, bb.bn.running_mean)
            np.testing.assert_array_equal(ba.bn.running_var, bb.bn.running_var)

    def test_default_width_shapes(self):
        net = rand_net(np.random.default_rng(4), widths=(16, 32, 64), d=64, k=5)
        pruned = rebuild_pruned(net, decide(net, 0.5))
        assert pruned.widths == (8, 16, 32)
        assert pruned.blocks[1].conv.weights.shape == (16, 8, 5)
        assert pruned.dense.c_in == 32

    def test_masked_equivalence(self):
        rng = np.random.default_rng(5)
        for trial in range(5):
            net = rand_net(rng)
            ratio = float(rng.choice([0.25, 0.5, 0.75]))
            decision = decide(net, ratio)
            pruned = rebuild_pruned(net, decision)
            x = rng.normal(size=(4, 1, 32))
            got, _ = network_forward(pruned, x, layers.EVAL)
            want = masked_logits(net, decision, x)
            assert np.abs(got - want).max() <= 1e-10

    def test_arbitrary_keep_sets(self):
        rng = np.random.default_rng(6)
        net = rand_net(rng)
        decision = PruneDecision(keep=[[0, 3], [1, 2, 5], [0, 7]], ratio=0.4, scores=[[], [], []])
        pruned = rebuild_pruned(net, decision)
        assert pruned.widths == (2, 3, 2)
        x = rng.normal(size=(2, 1, 32))
        got, _ = network_forward(pruned, x, layers.EVAL)
        want = masked_logits(net, decision, x)
        assert np.abs(got - want).max() <= 1e-10

    def test_empty_keep_rejected(self):
        net = rand_net(np.random.default_rng(7))
        with pytest.raises(ConfigError):
            rebuild_pruned(net, PruneDecision(keep=[[], [0], [0]], ratio=0.1, scores=[[], [], []]))

    def test_out_of_range_keep_rejected(self):
        net = rand_net(np.random.default_rng(8))
        with pytest.raises(DecisionError):
            rebuild_pruned(net, PruneDecision(keep=[[0, 99], [0], [0]], ratio=0.1, scores=[[], [], []]))

    def test_param_count_strictly_shrinks(self):
        net = rand_net(np.random.default_rng(9))
        pruned = rebuild_pruned(net, decide(net, 0.5))
        assert pruned.param_count() < net.param_count()


class TestRetention:
    def test_half(self):
        rng = np.random.default_rng(10)
        net = rand_net(rng, widths=(16, 32, 64), d=64, k=5)
        pruned = rebuild_pruned(net, decide(net, 0.5))
        assert retention_rate(net, pruned) == 50.0
        assert net.n_kernels == 112 and pruned.n_kernels == 56

    def test_identity(self):
        net = rand_net(np.random.default_rng(11))
        assert retention_rate(net, rebuild_pruned(net, decide(net, 1.0))) == 100.0


class TestPruneAndRetrain:
    def test_ratio_one_warm_start_preserves_weights(self):
        from signalprune import data
        from signalprune.train import TrainConfig

        ds = data.synth_generate(data.SynthConfig(n_per_class=30, d=32, n_classes=3, seed=1))
        tr, va, _ = data.stratified_split(ds, data.SplitRatios(), seed=1)
        sc = data.standardize_fit(tr)
        tr, va = data.standardize_apply(tr, sc), data.standardize_apply(va, sc)
        # nonzero params everywhere: a 1e-30 Adam update then rounds to no-op
        net = rand_net(np.random.default_rng(12), randomize_stats=True)
        cfg = TrainConfig(lr0=1e-30, lr_min=1e-30, max_epochs=1, patience=1, plateau_wait=1, seed=1)
        best, history, decision = prune.prune_and_retrain(net.clone(), tr, va, cfg, ratio=1.0)
        assert decision.keep == [list(range(4)), list(range(6)), list(range(8))]
        for (_, a), (_, b) in zip(iter_params(net), iter_params(best)):
            np.testing.assert_array_equal(a, b)

    def test_reinit_draws_fresh_weights(self):
        from signalprune import data
        from signalprune.train import TrainConfig

        ds = data.synth_generate(data.SynthConfig(n_per_class=30, d=32, n_classes=3, seed=2))
        tr, va, _ = data.stratified_split(ds, data.SplitRatios(), seed=2)
        sc = data.standardize_fit(tr)
        tr, va = data.standardize_apply(tr, sc), data.standardize_apply(va, sc)
        net = rand_net(np.random.default_rng(13), randomize_stats=False)
        cfg = TrainConfig(lr0=1e-30, lr_min=1e-30, max_epochs=1, patience=1, plateau_wait=1, seed=2)
        warm, _, _ = prune.prune_and_retrain(net.clone(), tr, va, cfg, ratio=0.5)
        cold, _, _ = prune.prune_and_retrain(net.clone(), tr, va, cfg, ratio=0.5, reinit=True)
        assert warm.widths == cold.widths
        assert not np.array_equal(warm.blocks[0].conv.weights, cold.blocks[0].conv.weights)
