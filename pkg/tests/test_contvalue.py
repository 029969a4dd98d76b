"""Value network: gradients, training, persistence, sample construction."""

import numpy as np
import pytest

from edgetwin.config import SimConfig
from edgetwin.contvalue import (
    OBSERVED,
    TWIN_AUGMENTED,
    ContValueModel,
    Normalizer,
    ReplayBuffer,
    TrainingSample,
    build_reference_target,
    build_training_samples,
)
from edgetwin.profile import default_profile
from edgetwin.twin import emulate_workloads, estimate_execution_slots

CFG = SimConfig()
PROF = default_profile(CFG)


def fresh_model(seed=0, lr=1e-3):
    return ContValueModel(np.random.default_rng(seed), learning_rate=lr)


class TestNormalizer:
    def test_matches_batch_statistics(self):
        rng = np.random.default_rng(3)
        data = rng.normal(5.0, 2.0, size=(500, 3))
        norm = Normalizer(3)
        norm.update(data[:200])
        norm.update(data[200:])
        out = norm.transform(data)
        assert np.allclose(out.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(out.std(axis=0), 1.0, atol=1e-3)

    def test_single_sample_no_scaling(self):
        norm = Normalizer(2)
        norm.update(np.array([[3.0, 4.0]]))
        assert np.allclose(norm.transform(np.array([[3.0, 4.0]])), 0.0)


class TestModelBasics:
    def test_zero_head_predicts_zero(self):
        model = fresh_model()
        x = np.random.default_rng(1).normal(size=(10, 3))
        assert np.allclose(model.forward(x), 0.0)

    def test_deterministic_construction(self):
        a, b = fresh_model(5), fresh_model(5)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_loss_example(self):
        # untrained model outputs 0, so loss is mean of squared targets
        model = fresh_model()
        x = np.zeros((2, 3))
        assert model.loss(x, np.array([0.5, 0.0])) == pytest.approx(0.125)


class TestGradients:
    def test_analytic_matches_finite_difference(self):
        model = fresh_model(2)
        # give the head nonzero weights so every layer has signal
        rng = np.random.default_rng(9)
        model.weights[-1] = rng.normal(0, 0.3, size=model.weights[-1].shape)
        x = rng.normal(size=(8, 3))
        y = rng.normal(size=8)
        model.normalizer.update(x)
        _, grads = model.loss_and_grads(x, y)
        params = model._params()
        eps = 1e-6
        checked = 0
        for pi, p in enumerate(params):
            flat = p.reshape(-1)
            for j in rng.choice(flat.size, size=min(5, flat.size), replace=False):
                orig = flat[j]
                flat[j] = orig + eps
                lp = model.loss(x, y)
                flat[j] = orig - eps
                lm = model.loss(x, y)
                flat[j] = orig
                numeric = (lp - lm) / (2 * eps)
                analytic = grads[pi].reshape(-1)[j]
                denom = max(abs(numeric), abs(analytic), 1e-8)
                assert abs(numeric - analytic) / denom < 1e-4, (pi, j)
                checked += 1
        assert checked >= 30


class TestTraining:
    def test_loss_drops_on_fixed_batch(self):
        model = fresh_model(4, lr=1e-2)
        rng = np.random.default_rng(8)
        x = rng.normal(size=(64, 3))
        y = 0.5 * x[:, 0] - 0.2 * x[:, 1]
        first = model.train_step(x, y)
        for _ in range(400):
            last = model.train_step(x, y)
        assert last < first / 10

    def test_training_is_deterministic(self):
        runs = []
        for _ in range(2):
            model = fresh_model(6)
            rng = np.random.default_rng(42)
            losses = [
                model.train_step(rng.normal(size=(16, 3)), rng.normal(size=16))
                for _ in range(20)
            ]
            runs.append(losses)
        assert runs[0] == runs[1]

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            fresh_model().train_step(np.zeros((0, 3)), np.zeros(0))


class TestPersistence:
    def test_round_trip(self, tmp_path):
        model = fresh_model(1, lr=5e-3)
        rng = np.random.default_rng(2)
        for _ in range(30):
            model.train_step(rng.normal(size=(32, 3)), rng.normal(size=32))
        path = str(tmp_path / "model.npz")
        model.save(path)
        loaded = ContValueModel.load(path)
        probe = rng.normal(size=(50, 3))
        assert np.allclose(model.forward(probe), loaded.forward(probe))
        assert loaded.learning_rate == model.learning_rate


class TestReplayBuffer:
    def sample(self, source, target=1.0):
        return TrainingSample(1, 0.1, 0.2, target, source)

    def test_counts_by_source(self):
        buf = ReplayBuffer()
        buf.add([self.sample(OBSERVED), self.sample(TWIN_AUGMENTED), self.sample(OBSERVED)])
        assert len(buf) == 3
        assert buf.observed_count == 2
        assert buf.augmented_count == 1

    def test_minibatch_caps_at_buffer_size(self):
        buf = ReplayBuffer()
        buf.add([self.sample(OBSERVED, float(i)) for i in range(5)])
        feats, targets = buf.minibatch(np.random.default_rng(0), 64)
        assert feats.shape == (5, 3)
        assert set(targets).issubset(set(range(5)))

    def test_non_finite_target_rejected(self):
        with pytest.raises(ValueError):
            TrainingSample(1, 0.0, 0.0, float("nan"), OBSERVED)


class TestReferenceTarget:
    def test_terminal_uses_stop_only(self):
        assert build_reference_target(-0.3, None) == -0.3

    def test_interior_takes_better_branch(self):
        assert build_reference_target(0.2, 0.5) == 0.5
        assert build_reference_target(0.2, -0.1) == 0.2


def make_snapshot(seed=0):
    rng = np.random.default_rng(seed)
    slots = estimate_execution_slots(100, int(rng.integers(0, 5)), PROF.device_delay_slots)
    arrivals = [int(s) for s in sorted(rng.integers(slots[0] + 1, slots[-1] + 1, size=3))]
    events = [(int(rng.integers(slots[0], slots[-1] + 1)), float(rng.uniform(0, 4e9)))]
    return emulate_workloads(
        1, slots, int(rng.integers(0, 4)), float(rng.uniform(0, 2e10)), arrivals, events, CFG
    )


class TestSampleConstruction:
    def test_augmented_count_is_boundaries(self):
        snap = make_snapshot()
        for x in range(PROF.device_only_decision + 1):
            samples = build_training_samples(fresh_model(), x, snap, PROF, CFG, augment=True)
            assert len(samples) == PROF.exit_index + 1, x

    def test_source_tags_follow_decision(self):
        snap = make_snapshot(1)
        samples = build_training_samples(fresh_model(), 0, snap, PROF, CFG, augment=True)
        assert [s.source for s in samples] == [OBSERVED, TWIN_AUGMENTED, TWIN_AUGMENTED]
        samples = build_training_samples(
            fresh_model(), PROF.device_only_decision, snap, PROF, CFG, augment=True
        )
        assert all(s.source == OBSERVED for s in samples)

    def test_no_augment_keeps_reached_boundaries(self):
        snap = make_snapshot(2)
        model = fresh_model()
        assert len(build_training_samples(model, 0, snap, PROF, CFG, augment=False)) == 0
        assert len(build_training_samples(model, 2, snap, PROF, CFG, augment=False)) == 2
        dev = PROF.device_only_decision
        assert (
            len(build_training_samples(model, dev, snap, PROF, CFG, augment=False))
            == PROF.exit_index + 1
        )

    def test_zero_model_targets_are_stop_values(self):
        # with a zero-output model, targets reduce to max(next stop value, 0)
        # except at the last boundary, which has no continuation branch
        from edgetwin.costs import candidate_lt_utility

        snap = make_snapshot(3)
        samples = build_training_samples(fresh_model(), 0, snap, PROF, CFG, augment=True)
        lt = [
            candidate_lt_utility(l, snap.d_lq_s(l), snap.t_eq_s(l), PROF, CFG)
            for l in range(PROF.device_only_decision + 1)
        ]
        le = PROF.exit_index
        for l, s in enumerate(samples):
            expect = lt[le + 1] if l == le else max(lt[l + 1], 0.0)
            assert s.target == pytest.approx(expect), l
        assert samples[0].d_lq_s == 0.0
