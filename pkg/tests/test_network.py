"""Quantized model handling, the fixed-point reference path and the SC
inference path."""

import numpy as np
import pytest

from scsim.network import (Conv, FullyConnected, MaxPool, QuantizedModel,
                           Relu, accuracy_sweep, evaluate_fixed, evaluate_sc,
                           fixed_point_infer, load_csv_dataset,
                           load_idx_images, load_idx_labels, load_model,
                           mac_invocations, quantize, quantize_values,
                           save_idx_images, save_idx_labels, save_model,
                           sc_infer, sc_infer_batch, value_to_word)
from scsim.neuron import MAC_FAN_IN, ScNeuron, neuron_cycle_counts
from scsim.pcc import PccKind, PccSpec

NN8 = PccSpec(PccKind.NAND_NOR, 8)


class TestQuantization:
    def test_rounds_to_grid(self):
        q = quantize_values([0.5, -0.25, 0.126], 3)
        assert np.allclose(q, [0.5, -0.25, 0.25])

    def test_ties_away_from_zero(self):
        # 0.125 is exactly between grid points 0 and 0.25 at 3 bits
        assert quantize_values(0.125, 3) == 0.25
        assert quantize_values(-0.125, 3) == -0.25

    def test_clips_to_range(self):
        assert quantize_values(1.5, 4) == 7 / 8
        assert quantize_values(-2.0, 4) == -1.0

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            quantize_values([np.nan], 8)

    def test_word_mapping(self):
        assert value_to_word(0.0, 8) == 128
        assert value_to_word(-1.0, 8) == 0
        assert value_to_word(127 / 128, 8) == 255

    def test_word_roundtrip(self, rng):
        v = quantize_values(rng.uniform(-1, 1, 100), 8)
        w = value_to_word(v, 8)
        assert np.allclose(w / 128.0 - 1.0, v)


def _tiny_model(n_bits=8):
    w = np.zeros((2, 1, 3, 3))
    w[0, 0] = np.eye(3) * 0.5          # diagonal detector
    w[1, 0] = -0.25                    # uniform negative
    wfc = np.zeros((3, 2 * 2 * 2))
    wfc[0, :4] = 0.5
    wfc[1, 4:] = 0.5
    wfc[2, :] = -0.125
    layers = [Conv(2, (3, 3)), Relu(), MaxPool(2),
              FullyConnected(3)]
    return quantize({0: w, 3: wfc}, n_bits, (1, 6, 6), layers,
                    scale_exps={0: -2, 3: 0})


class TestModel:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            quantize({0: np.zeros((2, 1, 3, 3))}, 8, (1, 6, 6),
                     [Conv(3, (3, 3))])

    def test_pool_must_tile(self):
        with pytest.raises(ValueError):
            quantize({0: np.zeros((2, 1, 2, 2))}, 8, (1, 6, 6),
                     [Conv(2, (2, 2)), MaxPool(2)])

    def test_n_bits_range(self):
        with pytest.raises(ValueError):
            _tiny_model(n_bits=2)
        with pytest.raises(ValueError):
            _tiny_model(n_bits=11)

    def test_activation_without_main_layer(self):
        m = quantize({1: np.zeros((2, 36))}, 8, (1, 6, 6),
                     [Relu(), FullyConnected(2)])
        with pytest.raises(ValueError):
            fixed_point_infer(m, np.zeros((1, 6, 6)))

    def test_requantized_coarsens(self):
        m = _tiny_model()
        m3 = m.requantized(3)
        assert m3.n_bits == 3
        assert np.allclose(m3.weights[0],
                           quantize_values(m.weights[0], 3))

    def test_save_load_roundtrip(self, tmp_path):
        m = _tiny_model()
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        assert back.n_bits == m.n_bits
        assert back.layers == m.layers
        for i in m.weights:
            assert np.array_equal(back.weights[i], m.weights[i])
        assert back.scale_exps == m.scale_exps

    def test_mac_invocations(self):
        m = _tiny_model()
        # conv: 16 positions x 2 channels x 1 group; fc: 3 neurons x 1 group
        assert mac_invocations(m) == [32, 3]


class TestFixedPoint:
    def test_hand_computed_trace(self):
        m = _tiny_model()
        img = np.zeros((1, 6, 6))
        img[0, :3, :3] = np.eye(3)      # bright diagonal top-left
        scores = fixed_point_infer(m, img)
        # manual oracle: conv0 window (0,0) sees the full diagonal ->
        # dot 1.5; conv1 sees -0.25*3 = -0.75 -> relu 0.  After 2x2 max
        # pooling and the 2^-2 scale, channel-0 pool quadrant (0,0) is
        # 1.5/4 = 0.375 and all other taps are small or zero.
        qimg = quantize_values(img, 8)
        acts = np.zeros(8)
        conv0 = np.zeros((4, 4))
        for y in range(4):
            for x in range(4):
                win = qimg[0, y:y + 3, x:x + 3]
                conv0[y, x] = max((win * np.eye(3) * 0.5).sum(), 0.0)
        pooled = conv0.reshape(2, 2, 2, 2).max(axis=(1, 3)) / 4.0
        acts[:4] = quantize_values(pooled.ravel(), 8)
        expect = np.array([acts[:4].sum() * 0.5, acts[4:].sum() * 0.5,
                           acts.sum() * -0.125])
        assert np.allclose(scores, expect)

    def test_zero_image_zero_scores(self):
        m = _tiny_model()
        assert np.allclose(fixed_point_infer(m, np.zeros((1, 6, 6))), 0.0)

    def test_input_shape_checked(self):
        with pytest.raises(ValueError):
            fixed_point_infer(_tiny_model(), np.zeros((1, 5, 5)))


class TestScInfer:
    def test_deterministic(self):
        m = _tiny_model()
        img = np.random.default_rng(0).uniform(-1, 1, (1, 6, 6))
        a = sc_infer(m, img, 64, NN8, seed=77)
        b = sc_infer(m, img, 64, NN8, seed=77)
        assert np.array_equal(a, b)

    def test_seed_changes_scores(self):
        m = _tiny_model()
        img = np.random.default_rng(0).uniform(-1, 1, (1, 6, 6))
        a = sc_infer(m, img, 64, NN8, seed=77)
        b = sc_infer(m, img, 64, NN8, seed=78)
        assert not np.array_equal(a, b)

    def test_zero_image_scores_near_zero(self):
        m = _tiny_model()
        scores = sc_infer(m, np.zeros((1, 6, 6)), 2048, NN8, seed=3)
        assert np.all(np.abs(scores) < 0.5)

    def test_precision_mismatch_rejected(self):
        with pytest.raises(ValueError):
            sc_infer(_tiny_model(), np.zeros((1, 6, 6)), 16,
                     PccSpec(PccKind.NAND_NOR, 4), seed=0)

    def test_positive_k_required(self):
        with pytest.raises(ValueError):
            sc_infer(_tiny_model(), np.zeros((1, 6, 6)), 0, NN8, seed=0)

    def test_converges_to_fixed_point(self, toy_model, digits):
        images, _ = digits
        inputs = np.asarray(images[:3], dtype=np.float64) / 255.0 * 2 - 1
        span = 2 * MAC_FAN_IN  # final FC layer spans two 25-wide groups
        for img in inputs:
            fx = fixed_point_infer(toy_model, img)
            sc = sc_infer(toy_model, img, 16384, NN8, seed=5)
            assert np.max(np.abs(sc - fx)) / span <= 0.02

    def test_error_shrinks_with_k(self, toy_model, digits):
        images, _ = digits
        inputs = np.asarray(images[:20], dtype=np.float64) / 255.0 * 2 - 1
        errs = {}
        for k in (64, 16384):
            tot = 0.0
            for i, img in enumerate(inputs):
                fx = fixed_point_infer(toy_model, img)
                sc = sc_infer(toy_model, img, k, NN8, seed=100 + i)
                tot += np.abs(sc - fx).mean()
            errs[k] = tot / len(inputs)
        assert errs[16384] < errs[64]

    def test_single_group_decomposes_to_neuron(self):
        # one 25-input FC neuron: the network path must equal the neuron
        # module's cycle counts accumulated by the exact S2B
        from scsim.network import layer_sources
        rng = np.random.default_rng(8)
        w = rng.uniform(-1, 1, (1, MAC_FAN_IN))
        m = quantize({0: w}, 8, (1, 5, 5), [FullyConnected(1)])
        img = quantize_values(rng.uniform(-1, 1, (1, 5, 5)), 8)
        seed, k = 42, 256
        got = sc_infer(m, img, k, NN8, seed)[0]

        acts = quantize_values(img, 8).ravel()
        aw = tuple(int(v) for v in value_to_word(acts, 8))
        ww = tuple(int(v) for v in value_to_word(m.weights[0][0], 8))
        neuron = ScNeuron(aw, ww, NN8, NN8, k)
        src_a, src_w = layer_sources(seed, 0, 8)
        counts = neuron_cycle_counts(neuron, src_a, src_w)
        dot = (2.0 * counts.sum() - MAC_FAN_IN * k) / k
        assert got == pytest.approx(dot, abs=1e-12)

    def test_batch_matches_per_image_seeds(self):
        m = _tiny_model()
        imgs = np.random.default_rng(1).uniform(-1, 1, (3, 1, 6, 6))
        batch = sc_infer_batch(m, imgs, 32, NN8, seed=9)
        assert batch.shape == (3, 3)


class TestDatasets:
    def test_idx_roundtrip(self, tmp_path, rng):
        imgs = rng.integers(0, 256, (4, 8, 8), dtype=np.uint8)
        labels = rng.integers(0, 10, 4, dtype=np.uint8)
        save_idx_images(imgs, tmp_path / "i.idx")
        save_idx_labels(labels, tmp_path / "l.idx")
        assert np.array_equal(load_idx_images(tmp_path / "i.idx"), imgs)
        assert np.array_equal(load_idx_labels(tmp_path / "l.idx"), labels)

    def test_idx_magic_checked(self, tmp_path):
        (tmp_path / "bad.idx").write_bytes(b"\x00\x00\x08\x02" + b"\x00" * 12)
        with pytest.raises(ValueError):
            load_idx_images(tmp_path / "bad.idx")
        with pytest.raises(ValueError):
            load_idx_labels(tmp_path / "bad.idx")

    def test_csv_dataset(self, tmp_path, rng):
        imgs = rng.integers(0, 256, (3, 4, 4), dtype=np.uint8)
        labels = np.array([1, 2, 3], dtype=np.uint8)
        rows = np.hstack([labels[:, None], imgs.reshape(3, -1)])
        np.savetxt(tmp_path / "d.csv", rows, fmt="%d", delimiter=",")
        got_imgs, got_labels = load_csv_dataset(tmp_path / "d.csv")
        assert np.array_equal(got_imgs, imgs)
        assert np.array_equal(got_labels, labels)

    def test_csv_requires_square_images(self, tmp_path):
        np.savetxt(tmp_path / "d.csv", [[1, 2, 3, 4]], fmt="%d",
                   delimiter=",")
        with pytest.raises(ValueError):
            load_csv_dataset(tmp_path / "d.csv")


class TestEvaluation:
    def test_fixed_eval_deterministic(self, toy_model, digits):
        images, labels = digits
        a = evaluate_fixed(toy_model, images[:50], labels[:50])
        b = evaluate_fixed(toy_model, images[:50], labels[:50])
        assert a == b and 0.0 <= a.accuracy <= 1.0

    def test_sc_eval_report_fields(self, toy_model, digits):
        images, labels = digits
        rep = evaluate_sc(toy_model, images[:20], labels[:20], 32, NN8, 1)
        assert rep.k == 32 and rep.n_images == 20 and rep.seed == 1
        assert sum(rep.per_class) <= 20

    def test_sweep_report_grid(self, toy_model, digits):
        images, labels = digits
        reports = accuracy_sweep(toy_model, images[:10], labels[:10],
                                 [8, 16], [3, 8], seed=2)
        assert len(reports) == 4
        assert {(r.k, r.n_bits) for r in reports} == \
            {(8, 3), (16, 3), (8, 8), (16, 8)}

    def test_sweep_rejects_empty(self, toy_model):
        with pytest.raises(ValueError):
            accuracy_sweep(toy_model, np.zeros((0, 8, 8)), np.zeros(0),
                           [8], [8], seed=0)
