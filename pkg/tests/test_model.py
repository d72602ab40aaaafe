import numpy as np
import pytest

from warpcheck.errors import (CheckpointError, InsufficientInput,
                              ShapeMismatch)
from warpcheck.facegen import make_face_image
from warpcheck.imaging import GaussianKernel, gaussian_blur
from warpcheck.model import (CnnArchitecture, CompactCnn, SgdState,
                             TrainConfig, _bce_loss, backward, batch_arrays,
                             forward, learning_rate, load_checkpoint,
                             mine_hard, predict_image, save_checkpoint,
                             sgd_step, train)
from warpcheck.synth import Label, Sample, SourceImage, SynthConfig

TINY = CnnArchitecture(input_size=8, channels=(4,))


def logit(p):
    return float(np.log(p / (1.0 - p)))


class StubNet:
    """Duck-typed net returning preset logits regardless of pixels."""

    def __init__(self, probs, input_size=8):
        self.arch = CnnArchitecture(input_size=input_size, channels=(2,))
        self._logits = np.array([logit(p) for p in probs])

    def forward_logits(self, x, want_cache=False):
        n = x.shape[0]
        out = np.resize(self._logits, n)
        return (out, None) if want_cache else out


def dense_forward_oracle(net, x):
    """Hand-rolled dense computation of the 1-block forward pass."""
    n = x.shape[0]
    probs = np.zeros(n)
    w = net.params["conv0.w"].astype(np.float64)
    b = net.params["conv0.b"].astype(np.float64)
    fcw = net.params["fc.w"].astype(np.float64)
    fcb = float(net.params["fc.b"][0])
    cout = w.shape[0]
    size = net.arch.input_size
    for s in range(n):
        img = x[s].astype(np.float64)
        conv = np.zeros((cout, size, size))
        for f in range(cout):
            for i in range(size):
                for j in range(size):
                    acc = b[f]
                    for c in range(3):
                        for di in range(3):
                            for dj in range(3):
                                ii, jj = i + di - 1, j + dj - 1
                                if 0 <= ii < size and 0 <= jj < size:
                                    acc += w[f, c, di, dj] * img[ii, jj, c]
                    conv[f, i, j] = max(acc, 0.0)
        half = size // 2
        pooled = np.zeros((cout, half, half))
        for f in range(cout):
            for i in range(half):
                for j in range(half):
                    pooled[f, i, j] = conv[f, 2 * i:2 * i + 2,
                                           2 * j:2 * j + 2].max()
        gap = pooled.reshape(cout, -1).mean(axis=1)
        z = float(gap @ fcw + fcb)
        probs[s] = 1.0 / (1.0 + np.exp(-z))
    return probs


class TestForward:
    def test_zero_weights_give_half(self, rng):
        net = CompactCnn(TINY, seed=0)
        for p in net.params.values():
            p[:] = 0
        x = rng.uniform(size=(5, 8, 8, 3))
        assert np.array_equal(forward(net, x), np.full(5, 0.5))

    def test_duplicated_rows_identical(self, rng):
        net = CompactCnn(TINY, seed=1)
        row = rng.uniform(size=(8, 8, 3))
        x = np.stack([row, row, row])
        probs = forward(net, x)
        assert probs[0] == probs[1] == probs[2]

    def test_matches_dense_reference(self, rng):
        net = CompactCnn(TINY, seed=2, dtype=np.float64)
        x = rng.uniform(size=(3, 8, 8, 3))
        probs = forward(net, x)
        ref = dense_forward_oracle(net, x)
        assert np.allclose(probs, ref, atol=1e-12)

    def test_float32_close_to_dense_reference(self, rng):
        net = CompactCnn(TINY, seed=2, dtype=np.float32)
        x = rng.uniform(size=(2, 8, 8, 3))
        assert np.allclose(forward(net, x), dense_forward_oracle(net, x),
                           atol=1e-6)

    def test_shape_mismatch(self, rng):
        net = CompactCnn(TINY, seed=0)
        with pytest.raises(ShapeMismatch):
            forward(net, rng.uniform(size=(2, 16, 16, 3)))

    def test_accepts_samples(self, rng):
        net = CompactCnn(TINY, seed=0)
        samples = [Sample(rng.uniform(size=(8, 8, 3)), Label.REAL)]
        probs = forward(net, samples)
        assert probs.shape == (1,)


class TestBackward:
    def test_saturated_batch_vanishing_gradient(self, rng):
        net = CompactCnn(TINY, seed=3, dtype=np.float64)
        net.params["fc.w"][:] = 0
        net.params["fc.b"][:] = 40.0  # logit 40 for every input
        x = rng.uniform(size=(4, 8, 8, 3))
        y = np.ones(4)  # correctly classified with huge margin
        grads, _ = backward(net, x, y)
        norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
        assert norm < 1e-8

    def test_fc_gradient_closed_form(self, rng):
        # single example: d(loss)/d(fc.w) = (p - y) * gap_input
        net = CompactCnn(TINY, seed=4, dtype=np.float64)
        x = rng.uniform(size=(1, 8, 8, 3))
        y = np.array([1.0])
        logits, (_, _, gap) = net.forward_logits(x, want_cache=True)
        p = 1.0 / (1.0 + np.exp(-logits[0]))
        grads, _ = backward(net, x, y)
        assert np.allclose(grads["fc.w"], (p - 1.0) * gap[0], atol=1e-12)
        assert np.allclose(grads["fc.b"], [p - 1.0], atol=1e-12)

    def test_finite_differences_every_parameter(self, rng):
        net = CompactCnn(TINY, seed=5, dtype=np.float64)
        x = rng.uniform(0.05, 0.95, size=(3, 8, 8, 3))
        y = np.array([0.0, 1.0, 1.0])
        grads, _ = backward(net, x, y)
        eps = 1e-4
        for name, p in net.params.items():
            flat = p.ravel()
            gflat = grads[name].ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up = _bce_loss(net.forward_logits(x), y)
                flat[i] = orig - eps
                down = _bce_loss(net.forward_logits(x), y)
                flat[i] = orig
                fd = (up - down) / (2 * eps)
                rel = abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1e-6)
                assert rel < 1e-4, f"{name}[{i}]: fd={fd} analytic={gflat[i]}"


class TestSgdStep:
    def test_schedule_values_exact(self):
        cfg = TrainConfig()
        assert learning_rate(cfg, 0) == 0.001
        assert learning_rate(cfg, 999) == 0.001
        assert learning_rate(cfg, 1000) == 0.00095
        assert learning_rate(cfg, 2500) == 0.0009025

    def test_hard_mining_stage_restarts_schedule(self):
        cfg = TrainConfig()
        assert learning_rate(cfg, 5000, stage1_steps=5000) == 0.0001
        assert learning_rate(cfg, 6000, stage1_steps=5000) == pytest.approx(
            0.0001 * 0.95)

    def test_zero_gradient_zero_momentum_is_noop(self):
        net = CompactCnn(TINY, seed=6)
        before = net.flat_weights().copy()
        state = SgdState.fresh(net)
        grads = {name: np.zeros_like(p) for name, p in net.params.items()}
        sgd_step(net, grads, state, TrainConfig())
        assert np.array_equal(net.flat_weights(), before)
        assert state.step == 1

    def test_small_step_decreases_loss(self, rng):
        net = CompactCnn(TINY, seed=7, dtype=np.float64)
        x = rng.uniform(size=(8, 8, 8, 3))
        y = rng.integers(0, 2, size=8).astype(np.float64)
        grads, loss0 = backward(net, x, y)
        state = SgdState.fresh(net)
        cfg = TrainConfig(lr0=1e-4, momentum=0.0)
        sgd_step(net, grads, state, cfg)
        _, loss1 = backward(net, x, y)
        assert loss1 < loss0

    def test_momentum_accumulates(self):
        net = CompactCnn(TINY, seed=8, dtype=np.float64)
        state = SgdState.fresh(net)
        cfg = TrainConfig(momentum=0.9, lr0=0.01)
        grads = {name: np.ones_like(p) for name, p in net.params.items()}
        w0 = net.flat_weights().copy()
        sgd_step(net, grads, state, cfg)
        d1 = w0 - net.flat_weights()
        w1 = net.flat_weights().copy()
        sgd_step(net, grads, state, cfg)
        d2 = w1 - net.flat_weights()
        assert np.allclose(d2, d1 * 1.9, atol=1e-12)


class TestMineHard:
    def _samples(self, labels):
        rng = np.random.default_rng(0)
        return [Sample(rng.uniform(size=(8, 8, 3)), lb) for lb in labels]

    def test_perfect_classifier_empty(self):
        samples = self._samples([Label.REAL, Label.FAKE])
        net = StubNet([0.1, 0.9])
        assert mine_hard(net, samples) == []

    def test_constant_half_classifier_empty(self):
        samples = self._samples([Label.REAL, Label.FAKE, Label.REAL])
        net = StubNet([0.5, 0.5, 0.5])
        assert mine_hard(net, samples) == []

    def test_misclassified_subset(self):
        samples = self._samples([Label.REAL, Label.REAL,
                                 Label.FAKE, Label.FAKE])
        net = StubNet([0.7, 0.2, 0.4, 0.9])
        hard = mine_hard(net, samples)
        assert hard == [samples[0], samples[2]]


@pytest.fixture(scope="module")
def face():
    return make_face_image(np.random.default_rng(21))


@pytest.fixture(scope="module")
def corpus():
    return [SourceImage(*make_face_image(np.random.default_rng((31, i))),
                        source_id=f"c{i}") for i in range(8)]


class TestPredictImage:
    def test_constant_net(self, face):
        img, lm = face
        net = StubNet([0.8], input_size=16)
        p = predict_image(net, img, lm, np.random.default_rng(0))
        assert p == pytest.approx(0.8, abs=1e-12)

    def test_fixed_seed_reproducible(self, face):
        img, lm = face
        net = CompactCnn(CnnArchitecture(input_size=16, channels=(4,)),
                         seed=9)
        a = predict_image(net, img, lm, np.random.default_rng(5))
        b = predict_image(net, img, lm, np.random.default_rng(5))
        assert a == b

    def test_average_of_stubbed_crops(self, face):
        img, lm = face
        probs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0 - 1e-9]
        net = StubNet(probs, input_size=16)
        p = predict_image(net, img, lm, np.random.default_rng(0))
        assert p == pytest.approx(0.55, abs=1e-9)


def _toy_samples(rng, n_per_class, size=16):
    """Sharp noise = REAL, globally blurred noise = FAKE."""
    samples = []
    for _ in range(n_per_class):
        sharp = rng.uniform(size=(size, size, 3))
        samples.append(Sample(sharp, Label.REAL))
        blurred = gaussian_blur(rng.uniform(size=(size, size, 3)),
                                GaussianKernel(size=5, sigma=1.5))
        samples.append(Sample(blurred, Label.FAKE))
    return samples


class TestTraining:
    def test_toy_blur_task_converges(self, rng):
        samples = _toy_samples(rng, 32)
        net = CompactCnn(CnnArchitecture(input_size=16, channels=(8, 16)),
                         seed=10)
        state = SgdState.fresh(net)
        cfg = TrainConfig(batch_size=32, momentum=0.9, lr0=0.003)
        order = np.arange(len(samples))
        epoch_losses = []
        for epoch in range(40):
            np.random.default_rng(epoch).shuffle(order)
            losses = []
            for k in range(0, len(samples), 32):
                part = [samples[i] for i in order[k:k + 32]]
                grads, loss = backward(net, part)
                sgd_step(net, grads, state, cfg)
                losses.append(loss)
            epoch_losses.append(float(np.mean(losses)))
        assert all(b < a + 1e-9 for a, b in zip(epoch_losses, epoch_losses[1:]))
        assert epoch_losses[-1] < epoch_losses[0]
        x, y = batch_arrays(samples)
        acc = ((forward(net, x) > 0.5).astype(int) == y).mean()
        assert acc == 1.0

    def _cfg(self, **kw):
        base = dict(batch_size=4, max_epochs=2, hard_mine_epochs=0, seed=123)
        base.update(kw)
        return TrainConfig(**base)

    def _synth(self):
        return SynthConfig(sample_size=16, target_size=32)

    def test_bit_identical_across_runs(self, corpus):
        arch = CnnArchitecture(input_size=16, channels=(4,))
        n1, s1, _ = train(corpus, self._cfg(), self._synth(), arch=arch)
        n2, s2, _ = train(corpus, self._cfg(), self._synth(), arch=arch)
        assert np.array_equal(n1.flat_weights(), n2.flat_weights())
        assert s1.step == s2.step

    def test_resume_matches_straight_run(self, corpus, tmp_path):
        arch = CnnArchitecture(input_size=16, channels=(4,))
        straight, _, _ = train(corpus, self._cfg(max_epochs=2),
                               self._synth(), arch=arch)
        net1, state1, _ = train(corpus, self._cfg(max_epochs=1),
                                self._synth(), arch=arch)
        ckpt = tmp_path / "mid.wfck"
        save_checkpoint(ckpt, net1, state1, seed=123)
        net2, state2, _ = load_checkpoint(ckpt)
        resumed, rstate, _ = train(corpus, self._cfg(max_epochs=2),
                                   self._synth(), net=net2, state=state2)
        assert np.array_equal(resumed.flat_weights(),
                              straight.flat_weights())

    def test_hard_mining_stage_runs(self, corpus):
        arch = CnnArchitecture(input_size=16, channels=(4,))
        cfg = self._cfg(max_epochs=1, hard_mine_epochs=2)
        net, state, log = train(corpus, cfg, self._synth(), arch=arch)
        assert state.hm_epoch == 2
        assert state.stage1_steps == 2  # 8 items / batch 4 = 2 steps
        stage2 = [r for r in log if r.step >= state.stage1_steps]
        for row in stage2:
            assert row.lr == pytest.approx(cfg.hard_mine_lr)

    def test_zero_stage2_epochs_leave_counters_clean(self, corpus):
        arch = CnnArchitecture(input_size=16, channels=(4,))
        net, state, _ = train(corpus, self._cfg(), self._synth(), arch=arch)
        assert state.stage1_steps is None
        assert state.hm_epoch == 0
        assert state.step == 4  # 2 epochs x 2 steps

    def test_lr_logged_matches_schedule(self, corpus):
        arch = CnnArchitecture(input_size=16, channels=(4,))
        cfg = self._cfg()
        _, _, log = train(corpus, cfg, self._synth(), arch=arch)
        for row in log:
            assert row.lr == learning_rate(cfg, row.step)

    def test_insufficient_input(self):
        with pytest.raises(InsufficientInput):
            train([], TrainConfig(), SynthConfig())


class TestCheckpoint:
    def test_round_trip_bits_and_forward(self, rng, tmp_path):
        net = CompactCnn(TINY, seed=11)
        state = SgdState.fresh(net)
        state.step = 17
        for v in state.velocity.values():
            v += np.float32(0.25)
        path = tmp_path / "net.wfck"
        save_checkpoint(path, net, state, seed=7)
        net2, state2, header = load_checkpoint(path)
        assert np.array_equal(net.flat_weights(), net2.flat_weights())
        assert state2.step == 17
        for name in net.params:
            assert np.array_equal(state.velocity[name],
                                  state2.velocity[name])
        x = rng.uniform(size=(4, 8, 8, 3))
        assert np.array_equal(forward(net, x), forward(net2, x))
        assert header["seed"] == 7
        assert len(header["rng_digest"]) == 64

    def test_magic_bytes(self, tmp_path):
        net = CompactCnn(TINY, seed=0)
        path = tmp_path / "net.wfck"
        save_checkpoint(path, net, SgdState.fresh(net))
        assert path.read_bytes()[:4] == b"WFCK"

    def test_corrupt_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.wfck"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated_payload_rejected(self, tmp_path):
        net = CompactCnn(TINY, seed=0)
        path = tmp_path / "net.wfck"
        save_checkpoint(path, net, SgdState.fresh(net))
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
