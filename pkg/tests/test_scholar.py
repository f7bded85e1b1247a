"""Scholar lifecycle: replay mixing, updates, and checkpointing."""

import numpy as np
import pytest

from gmm_replay import errors, gmm, scholar
from gmm_replay.datasets import ImageSet, LabelSet
from conftest import make_clusters, three_cluster_toy

TOY_CFG = scholar.ScholarConfig(
    K=9, num_classes=4, epochs_init=80, epochs_replay=120,
    readout_epochs=50, rng_seed=0,
)


def toy_scholar(seed=0):
    images, labels = three_cluster_toy(seed)
    cfg = scholar.ScholarConfig(
        K=9, num_classes=3, epochs_init=80, readout_epochs=50, rng_seed=seed
    )
    return scholar.initial_fit(scholar.new_scholar(cfg), (images, labels)), images, labels


class TestPlanMix:
    def test_constant_time_generates_exactly_d_i(self):
        plan = scholar.ReplayPlan(scholar.CONSTANT_TIME, batch_size=100)
        for task_index in (2, 3, 7):
            mix = scholar.plan_mix(plan, task_index, 6000, 9, 1)
            assert mix.generate_count == 6000
            assert mix.chi == 1.0
            assert mix.beta_g == 50 and mix.beta_r == 50

    def test_constant_time_odd_batch_real_gets_extra(self):
        plan = scholar.ReplayPlan(scholar.CONSTANT_TIME, batch_size=101)
        mix = scholar.plan_mix(plan, 2, 1000, 1, 1)
        assert mix.beta_g == 50 and mix.beta_r == 51

    def test_balanced_nine_to_one(self):
        plan = scholar.ReplayPlan(scholar.BALANCED, batch_size=100)
        mix = scholar.plan_mix(plan, 2, 6000, 9, 1)
        assert mix.chi == 9.0
        assert mix.beta_g == 90 and mix.beta_r == 10
        assert mix.generate_count == 54000

    def test_balanced_grows_with_seen_classes(self):
        plan = scholar.ReplayPlan(scholar.BALANCED, batch_size=100)
        counts = [
            scholar.plan_mix(plan, i + 2, 1000, 5 + i, 1).generate_count
            for i in range(4)
        ]
        assert counts == [5000, 6000, 7000, 8000]

    def test_chi_zero_degenerate(self):
        plan = scholar.ReplayPlan(scholar.BALANCED, batch_size=100)
        mix = scholar.plan_mix(plan, 2, 1000, 0, 1)
        assert mix.generate_count == 0
        assert mix.beta_g == 0 and mix.beta_r == 100

    def test_task_index_guard(self):
        plan = scholar.ReplayPlan(scholar.CONSTANT_TIME)
        with pytest.raises(errors.InvalidRatio):
            scholar.plan_mix(plan, 1, 1000, 0, 1)

    def test_balanced_needs_new_classes(self):
        plan = scholar.ReplayPlan(scholar.BALANCED)
        with pytest.raises(errors.InvalidRatio):
            scholar.plan_mix(plan, 2, 1000, 5, 0)

    def test_unknown_strategy(self):
        with pytest.raises(errors.ConfigError):
            scholar.ReplayPlan("rehearsal")


class TestInitialFit:
    def test_r0_arithmetic(self):
        assert scholar.ScholarConfig(K=400).r0_init == pytest.approx(7.0711, abs=5e-5)

    def test_toy_accuracy(self):
        model, images, labels = toy_scholar()
        preds = scholar.classify_batch(model, images.samples)
        assert (preds == labels.labels).mean() >= 0.99

    def test_second_initial_fit_rejected(self):
        model, images, labels = toy_scholar()
        with pytest.raises(errors.SecondInitialFit):
            scholar.initial_fit(model, (images, labels))

    def test_classify_before_fit_rejected(self):
        fresh = scholar.new_scholar(TOY_CFG)
        with pytest.raises(errors.NotInitialized):
            scholar.classify(fresh, np.zeros(2))

    def test_update_before_fit_rejected(self):
        fresh = scholar.new_scholar(TOY_CFG)
        images, labels = three_cluster_toy()
        with pytest.raises(errors.NotInitialized):
            scholar.adiabatic_update(
                fresh, (images, labels), scholar.ReplayPlan(), seen_classes=0
            )

    def test_classify_deterministic(self):
        model, images, _ = toy_scholar()
        x = images.samples[0]
        assert scholar.classify(model, x) == scholar.classify(model, x)

    def test_classify_dim_mismatch(self):
        model, _, _ = toy_scholar()
        with pytest.raises(errors.DimensionMismatch):
            scholar.classify(model, np.zeros(5))


class TestAdiabaticUpdate:
    A_CENTER = (0.15, 0.15)
    C_CENTER = (0.85, 0.85)
    B_CENTER = (0.35, 0.15)  # new class lands near class A

    def _two_cluster_scholar(self, seed=0):
        """Hand-built clean scholar: 5 tight components on class A, 4 on
        class C, read-out mapping them to classes 0 and 1.

        Constructed directly rather than fitted so the selectivity of
        the update is tested in isolation from fit quality.
        """
        from gmm_replay import readout as readout_mod
        rng = np.random.default_rng(seed)
        a = np.asarray(self.A_CENTER)
        c = np.asarray(self.C_CENTER)
        centroids = np.concatenate([
            a + rng.uniform(-0.03, 0.03, size=(5, 2)),
            c + rng.uniform(-0.03, 0.03, size=(4, 2)),
        ]).astype(np.float32)
        params = gmm.GmmParams(
            weight_logits=np.zeros(9, dtype=np.float32),
            centroids=centroids,
            log_stddevs=np.full((9, 2), np.log(0.05), dtype=np.float32),
            grid_side=3,
        )
        W = np.zeros((3, 9), dtype=np.float32)
        W[0, :5] = 1.0
        W[1, 5:] = 1.0
        cfg = scholar.ScholarConfig(
            K=9, num_classes=3, epochs_init=80, epochs_replay=120,
            readout_epochs=50, rng_seed=seed,
        )
        model = scholar.Scholar(
            cfg=cfg, gmm_params=params,
            readout_weights=readout_mod.ReadoutWeights(W), stage=1,
        )
        images, labels = make_clusters(
            [self.A_CENTER, self.C_CENTER], 0.04, 150, seed, clip=(0.0, 1.0)
        )
        return model, images, labels

    def test_constant_time_generated_count(self):
        model, _, _ = self._two_cluster_scholar()
        new_x, new_y = make_clusters([self.B_CENTER], 0.04, 137, 5, clip=(0.0, 1.0))
        new_y = LabelSet(np.full(137, 2), 3)
        updated = scholar.adiabatic_update(
            model, (new_x, new_y), scholar.ReplayPlan(batch_size=20), seen_classes=2
        )
        assert updated.generated_count == 137
        assert updated.stage == 2

    def test_selective_replacement(self):
        # new class B lands near class A; far class C's components barely move
        model, _, _ = self._two_cluster_scholar()
        before = model.gmm_params.centroids.copy()
        a_center = np.array(self.A_CENTER)
        c_center = np.array(self.C_CENTER)
        is_a = (
            ((before - a_center) ** 2).sum(axis=1)
            < ((before - c_center) ** 2).sum(axis=1)
        )
        new_x, new_y = make_clusters([self.B_CENTER], 0.04, 150, 5, clip=(0.0, 1.0))
        new_y = LabelSet(np.full(150, 2), 3)
        updated = scholar.adiabatic_update(
            model, (new_x, new_y), scholar.ReplayPlan(batch_size=20), seen_classes=2
        )
        moved = np.sqrt(((updated.gmm_params.centroids - before) ** 2).sum(axis=1))
        move_a = moved[is_a].max()
        move_c = moved[~is_a].max()
        assert move_c < 0.1 * move_a

    def test_update_keeps_earlier_class(self):
        model, images, labels = self._two_cluster_scholar()
        new_x, new_y = make_clusters([self.B_CENTER], 0.04, 150, 5, clip=(0.0, 1.0))
        new_y = LabelSet(np.full(150, 2), 3)
        updated = scholar.adiabatic_update(
            model, (new_x, new_y), scholar.ReplayPlan(batch_size=20), seen_classes=2
        )
        far = images.samples[labels.labels == 1]
        preds = scholar.classify_batch(updated, far)
        assert (preds == 1).mean() >= 0.95


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        model, images, _ = toy_scholar()
        path = str(tmp_path / "scholar.ckpt")
        scholar.save_scholar(model, path)
        loaded = scholar.load_scholar(path)
        np.testing.assert_array_equal(
            loaded.gmm_params.weight_logits, model.gmm_params.weight_logits
        )
        np.testing.assert_array_equal(loaded.gmm_params.centroids, model.gmm_params.centroids)
        np.testing.assert_array_equal(
            loaded.gmm_params.log_stddevs, model.gmm_params.log_stddevs
        )
        np.testing.assert_array_equal(loaded.readout_weights.W, model.readout_weights.W)
        np.testing.assert_array_equal(
            scholar.classify_batch(loaded, images.samples),
            scholar.classify_batch(model, images.samples),
        )
        assert loaded.stage == model.stage
        assert loaded.cfg == model.cfg

    def test_wrong_kind_rejected(self, tmp_path):
        from gmm_replay import checkpoint
        path = str(tmp_path / "other.ckpt")
        checkpoint.write_arrays(path, {"kind": "other"}, [
            ("a", np.zeros(2, dtype=np.float32)),
        ])
        with pytest.raises(errors.CheckpointError):
            scholar.load_scholar(path)
