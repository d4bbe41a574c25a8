import numpy as np
import pytest

from sparsetag.crf import (
    CrfError,
    CrfModel,
    TrainConfig,
    compile_batch,
    forward_backward,
    load_model,
    log_partition,
    nll_and_gradient,
    path_score,
    save_model,
    score_lattice,
    smooth_objective,
    train,
    viterbi_path,
)

from oracles import crf_enumerate, finite_difference_gradient


def toy_model(labels=("A", "B"), features=("fa", "fb")):
    feature_index = {f: i for i, f in enumerate(features)}
    emissions = np.zeros((len(features), len(labels)))
    transitions = np.zeros((len(labels), len(labels)))
    return CrfModel(labels, feature_index, emissions, transitions, c1=1.0, c2=0.001)


class TestScoreLattice:
    def test_zero_weights_zero_scores(self):
        model = toy_model()
        em, _ = score_lattice(model, [[("fa", 1.0)], [("fb", 2.0)]])
        np.testing.assert_array_equal(em, np.zeros((2, 2)))

    def test_weighted_feature(self):
        model = toy_model()
        model.emissions[0, 0] = 0.5
        em, _ = score_lattice(model, [[("fa", 2.0)]])
        assert em[0, 0] == pytest.approx(1.0)
        assert em[0, 1] == 0.0

    def test_linearity(self):
        rng = np.random.default_rng(0)
        model = toy_model()
        model.emissions[:] = rng.standard_normal(model.emissions.shape)
        feats = [[("fa", 0.7), ("fb", -1.2)], [("fb", 2.0)]]
        doubled = [[(n, 2 * v) for n, v in pos] for pos in feats]
        em1, _ = score_lattice(model, feats)
        em2, _ = score_lattice(model, doubled)
        np.testing.assert_allclose(em2, 2 * em1, atol=1e-12)

    def test_unseen_features_skipped(self):
        model = toy_model()
        em, _ = score_lattice(model, [[("never-seen", 1.0)]])
        np.testing.assert_array_equal(em, np.zeros((1, 2)))


class TestInference:
    def test_logz_single_token_uniform(self):
        assert log_partition(np.zeros((1, 2)), np.zeros((2, 2))) == pytest.approx(np.log(2))

    def test_logz_matches_enumeration(self):
        rng = np.random.default_rng(1)
        em = rng.standard_normal((3, 3))
        tr = rng.standard_normal((3, 3))
        expected, *_ = crf_enumerate(em, tr)
        assert log_partition(em, tr) == pytest.approx(expected, abs=1e-10)

    def test_logz_constant_shift(self):
        rng = np.random.default_rng(2)
        em = rng.standard_normal((4, 3))
        tr = rng.standard_normal((3, 3))
        shifted = em.copy()
        shifted[2] += 1.75
        assert log_partition(shifted, tr) == pytest.approx(log_partition(em, tr) + 1.75, abs=1e-10)

    def test_marginals_sum_to_one(self):
        rng = np.random.default_rng(3)
        em = rng.standard_normal((5, 4))
        tr = rng.standard_normal((4, 4))
        _, unary, pairwise = forward_backward(em, tr)
        np.testing.assert_allclose(unary.sum(axis=1), 1.0, atol=1e-10)
        np.testing.assert_allclose(pairwise.sum(axis=(1, 2)), 1.0, atol=1e-10)

    def test_forward_backward_matches_enumeration(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n_pos = int(rng.integers(1, 7))
            n_lab = int(rng.integers(2, 5))
            em = rng.standard_normal((n_pos, n_lab))
            tr = rng.standard_normal((n_lab, n_lab))
            logz_bf, unary_bf, pairwise_bf, *_ = crf_enumerate(em, tr)
            logz, unary, pairwise = forward_backward(em, tr)
            assert logz == pytest.approx(logz_bf, abs=1e-10)
            np.testing.assert_allclose(unary, unary_bf, atol=1e-10)
            np.testing.assert_allclose(pairwise, pairwise_bf, atol=1e-10)

    def test_viterbi_single_token(self):
        assert viterbi_path(np.array([[1.0, 0.0]]), np.zeros((2, 2))) == [0]

    def test_viterbi_matches_enumeration(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            n_pos = int(rng.integers(1, 7))
            n_lab = int(rng.integers(2, 5))
            em = rng.standard_normal((n_pos, n_lab))
            tr = rng.standard_normal((n_lab, n_lab))
            *_, best, best_score = crf_enumerate(em, tr)
            path = viterbi_path(em, tr)
            assert path == best
            assert path_score(em, tr, path) == pytest.approx(best_score, abs=1e-10)

    def test_viterbi_tie_break_lowest_index(self):
        assert viterbi_path(np.zeros((4, 3)), np.zeros((3, 3))) == [0, 0, 0, 0]

    def test_viterbi_shift_invariance(self):
        rng = np.random.default_rng(6)
        em = rng.standard_normal((5, 3))
        tr = rng.standard_normal((3, 3))
        shifted = em.copy()
        shifted[3] += 42.0
        assert viterbi_path(em, tr) == viterbi_path(shifted, tr)

    def test_viterbi_score_below_logz(self):
        rng = np.random.default_rng(7)
        em = rng.standard_normal((6, 3))
        tr = rng.standard_normal((3, 3))
        path = viterbi_path(em, tr)
        assert path_score(em, tr, path) <= log_partition(em, tr)


class TestObjective:
    def test_uniform_single_token(self):
        model = toy_model()
        obj, (grad_em, grad_tr) = nll_and_gradient(model, [[[("fa", 1.0)]]], [["A"]])
        assert obj == pytest.approx(np.log(2))
        assert grad_em[0, 0] == pytest.approx(-0.5)
        assert grad_em[0, 1] == pytest.approx(0.5)

    def test_duplicated_sentence_doubles_smooth_part(self):
        model = toy_model()
        feats = [[("fa", 1.0)], [("fb", 1.0)]]
        one, _ = nll_and_gradient(model, [feats], [["A", "B"]])
        two, _ = nll_and_gradient(model, [feats, feats], [["A", "B"], ["A", "B"]])
        # zero weights: no penalty contribution, so the smooth part doubles
        assert two == pytest.approx(2 * one)

    def test_unknown_gold_label_rejected(self):
        model = toy_model()
        with pytest.raises(CrfError, match="'C'"):
            nll_and_gradient(model, [[[("fa", 1.0)]]], [["C"]])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        sentences = []
        labels = []
        for _ in range(3):
            length = int(rng.integers(1, 5))
            sent = []
            labs = []
            for _t in range(length):
                feats = [(f"ind{rng.integers(4)}", 1.0), (f"d:{rng.integers(3)}", float(rng.standard_normal()))]
                sent.append(feats)
                labs.append(["A", "B", "C"][int(rng.integers(3))])
            sentences.append(sent)
            labels.append(labs)
        batch = compile_batch(sentences, labels)
        n_params = batch.n_features * len(batch.labels) + len(batch.labels) ** 2
        params = rng.standard_normal(n_params) * 0.5
        c2 = 0.001
        _, grad = smooth_objective(params, batch, c2)
        fd = finite_difference_gradient(lambda p: smooth_objective(p, batch, c2)[0], params)
        rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1.0)
        assert rel.max() < 1e-4


class TestTrain:
    def _separable(self, n=20):
        sentences = []
        labels = []
        for i in range(n):
            sent = []
            labs = []
            for t in range(3):
                lab = "A" if (i + t) % 2 == 0 else "B"
                sent.append([(f"f{lab}", 1.0)])
                labs.append(lab)
            sentences.append(sent)
            labels.append(labs)
        return sentences, labels

    def test_separable_task_fits_training_set(self):
        sentences, labels = self._separable()
        model = train(sentences, labels, TrainConfig())
        correct = 0
        total = 0
        for sent, labs in zip(sentences, labels):
            pred = model.decode(sent)
            correct += sum(p == g for p, g in zip(pred, labs))
            total += len(labs)
        assert correct == total

    def test_huge_c1_zeroes_all_weights(self):
        sentences, labels = self._separable()
        model = train(sentences, labels, TrainConfig(c1=1e6))
        assert np.all(model.emissions == 0.0)
        assert np.all(model.transitions == 0.0)

    def test_deterministic_weight_files(self, tmp_path):
        sentences, labels = self._separable()
        paths = []
        for name in ("m1", "m2"):
            model = train(sentences, labels, TrainConfig())
            path = tmp_path / name
            save_model(path, model)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_empty_training_set_rejected(self):
        with pytest.raises(CrfError):
            train([], [], TrainConfig())


class TestModelFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        model = toy_model(labels=("X", "Y", "Z"), features=("a", "b", "c"))
        model.emissions[:] = rng.standard_normal(model.emissions.shape)
        model.transitions[:] = rng.standard_normal(model.transitions.shape)
        model.meta["scheme"] = "sc"
        model.meta["window"] = "1"
        path = tmp_path / "model"
        save_model(path, model)
        again = load_model(path)
        assert again.labels == model.labels
        assert again.meta["scheme"] == "sc"
        assert (again.c1, again.c2) == (model.c1, model.c2)
        np.testing.assert_array_equal(again.transitions, model.transitions)
        for name, fid in model.feature_index.items():
            fid2 = again.feature_index[name]
            np.testing.assert_array_equal(again.emissions[fid2], model.emissions[fid])

    def test_decode_identical_after_reload(self, tmp_path):
        sentences = [[[("fa", 1.0)], [("fb", 1.0)], [("fa", 1.0)]]]
        labels = [["A", "B", "A"]]
        model = train(sentences, labels, TrainConfig())
        path = tmp_path / "model"
        save_model(path, model)
        again = load_model(path)
        for sent in sentences:
            assert model.decode(sent) == again.decode(sent)

    def test_bracketed_feature_names_survive(self, tmp_path):
        # offset-prefixed features start with '[' and must not be
        # mistaken for section headers
        model = toy_model(labels=("A", "B"), features=("[0]+1", "[-1]w=x"))
        model.emissions[:] = [[1.5, 0.0], [0.0, -2.5]]
        path = tmp_path / "model"
        save_model(path, model)
        again = load_model(path)
        assert set(again.feature_index) == {"[0]+1", "[-1]w=x"}
        fid = again.feature_index["[0]+1"]
        assert again.emissions[fid, 0] == 1.5

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "model"
        path.write_text("not a model\n", encoding="utf-8")
        with pytest.raises(CrfError):
            load_model(path)
