import numpy as np
import pytest

from wordglyph.corpus import multi_hot_labels
from wordglyph.evalsuite import (average_precision, evaluate_run, fid,
                                 fid_from_moments, leaderboard_append, map_score,
                                 mean_average_precision, train_feature_extractor,
                                 train_predictor)
from wordglyph.lexicon import vocab_matrix
from wordglyph.nets import DESK_DIMS, build_variant, save_checkpoint
from wordglyph.synth import SynthConfig, synthesize_corpus


def brute_force_ap(scores, labels):
    """Independent oracle: no sorting, O(n^2) rank counting (assumes no ties)."""
    scores = list(map(float, scores))
    labels = list(map(bool, labels))
    precisions = []
    for i, positive in enumerate(labels):
        if not positive:
            continue
        rank = 1 + sum(1 for s in scores if s > scores[i])
        hits = sum(1 for s, l in zip(scores, labels) if l and s >= scores[i])
        precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


@pytest.fixture(scope="module")
def eval_corpus():
    config = SynthConfig(n_fonts=14, attributes=("bold", "thin"), tag_mode="single",
                         noise_rate=0.0, seed=17, letters="ABCDEFGH")
    return synthesize_corpus(config)


@pytest.fixture(scope="module")
def tiny_checkpoint(tmp_path_factory, eval_corpus, small_table):
    records, vocab = eval_corpus
    W = vocab_matrix(small_table, vocab.words)
    bundle = build_variant("imp2font", k=len(vocab), d=W.shape[1], rng_seed=4,
                           dims=DESK_DIMS, vocab=vocab, word_matrix=W)
    path = tmp_path_factory.mktemp("ckpt") / "tiny.npz"
    save_checkpoint(bundle, path)
    return str(path)


# ----------------------------------------------------------------------- fid

def test_fid_identical_sets_is_zero():
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(200, 6))
    assert fid(feats, feats) < 1e-6


def test_fid_symmetric_and_permutation_invariant():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(300, 5))
    b = rng.normal(size=(280, 5)) + 0.4
    perm_a = a[rng.permutation(len(a))]
    perm_b = b[rng.permutation(len(b))]
    assert abs(fid(a, b) - fid(b, a)) < 1e-6
    assert abs(fid(a, b) - fid(perm_a, perm_b)) < 1e-6


def test_fid_gaussian_closed_form_within_five_percent():
    rng = np.random.default_rng(2)
    n, f, delta = 20_000, 8, 3.0
    a = rng.normal(size=(n, f))
    a[:, 0] += delta
    b = rng.normal(size=(n, f))
    value = fid(a, b)
    assert abs(value - delta ** 2) / delta ** 2 < 0.05


def test_fid_rejects_bad_shapes():
    with pytest.raises(ValueError):
        fid(np.zeros((5, 3)), np.zeros((5, 4)))


def test_fid_from_moments_rejects_nonsense_covariance():
    mu = np.zeros(2)
    with pytest.raises(ValueError):
        fid_from_moments(mu, np.diag([-1.0, 1.0]), mu, np.eye(2))


# ------------------------------------------------------------------------ ap

def test_perfect_scores_give_map_one():
    labels = np.array([[1, 0], [0, 1], [1, 0], [0, 0]], dtype=float)
    value, per_class, skipped = mean_average_precision(labels.copy(), labels)
    assert value == 1.0
    assert skipped == []


def test_reversed_two_item_fixture_is_half():
    scores = np.array([[1.0], [0.0]])
    labels = np.array([[0.0], [1.0]])
    assert average_precision(scores[:, 0], labels[:, 0]) == 0.5
    value, _, _ = mean_average_precision(scores, labels)
    assert value == 0.5


def test_map_matches_brute_force_oracle():
    rng = np.random.default_rng(3)
    scores = rng.normal(size=(100, 3))
    labels = (rng.random((100, 3)) < 0.3).astype(float)
    labels[0] = 1.0  # make sure no class is empty
    value, per_class, _ = mean_average_precision(scores, labels)
    oracle = np.mean([brute_force_ap(scores[:, k], labels[:, k]) for k in range(3)])
    assert abs(value - oracle) < 1e-9
    for k in range(3):
        assert abs(per_class[k] - brute_force_ap(scores[:, k], labels[:, k])) < 1e-9


def test_map_skips_and_reports_empty_classes():
    scores = np.zeros((4, 3))
    scores[0, 0] = 1.0
    labels = np.zeros((4, 3))
    labels[0, 0] = 1.0
    labels[2, 1] = 1.0
    value, per_class, skipped = mean_average_precision(scores, labels)
    assert skipped == [2]
    assert set(per_class) == {0, 1}


def test_map_all_empty_errors():
    with pytest.raises(ValueError):
        mean_average_precision(np.zeros((3, 2)), np.zeros((3, 2)))


def test_map_bounded_in_unit_interval():
    rng = np.random.default_rng(4)
    for _ in range(10):
        scores = rng.normal(size=(30, 4))
        labels = (rng.random((30, 4)) < 0.4).astype(float)
        if labels.sum() == 0:
            continue
        try:
            value, _, _ = mean_average_precision(scores, labels)
        except ValueError:
            continue
        assert 0.0 <= value <= 1.0


# ------------------------------------------------------------------ predictor

def test_predictor_separable_fixture_high_map(eval_corpus):
    records, vocab = eval_corpus
    images = np.stack([g for r in records for g in r.glyphs.values()])
    labels = np.repeat(multi_hot_labels(records, len(vocab)),
                       [len(r.glyphs) for r in records], axis=0)
    predictor = train_predictor(images, labels, side_tag="pred-real", seed=0)
    value, _, _ = map_score(predictor, images, labels)
    assert value > 0.95
    assert predictor.side_tag == "pred-real"


def test_predictor_deterministic(eval_corpus):
    records, vocab = eval_corpus
    images = np.stack([g for r in records for g in r.glyphs.values()])
    labels = np.repeat(multi_hot_labels(records, len(vocab)),
                       [len(r.glyphs) for r in records], axis=0)
    p1 = train_predictor(images, labels, side_tag="x", seed=9, epochs=2)
    p2 = train_predictor(images, labels, side_tag="x", seed=9, epochs=2)
    assert np.array_equal(p1.scores(images), p2.scores(images))


def test_predictor_rejects_degenerate_labels():
    images = np.zeros((10, 64, 64), dtype=np.float32)
    labels = np.zeros((10, 3), dtype=np.float32)
    labels[:, 1] = 1.0
    with pytest.raises(ValueError, match="degenerate"):
        train_predictor(images, labels, side_tag="bad")


# ------------------------------------------------------------------ full run

def test_evaluate_run_deterministic(tiny_checkpoint, eval_corpus, small_table):
    records, _ = eval_corpus
    r1 = evaluate_run(tiny_checkpoint, records, small_table, seed=0)
    r2 = evaluate_run(tiny_checkpoint, records, small_table, seed=0)
    assert r1.fid == r2.fid
    assert r1.map_train == r2.map_train
    assert r1.map_test == r2.map_test
    assert r1.per_class == r2.per_class
    assert r1.checkpoint_id == r2.checkpoint_id


def test_evaluate_run_identity_generator_zero_fid(tiny_checkpoint, eval_corpus, small_table):
    records, vocab = eval_corpus
    real_images = np.stack([g for r in records for _, g in sorted(r.glyphs.items())])
    onehot = np.zeros((len(real_images), len(vocab)), dtype=np.float32)
    words = []
    i = 0
    for rec in records:
        for _ in rec.glyphs:
            onehot[i, rec.impressions[0]] = 1.0
            words.append(rec.impressions[0])
            i += 1
    report = evaluate_run(tiny_checkpoint, records, small_table, seed=0,
                          generator_fn=lambda: (real_images, onehot, words))
    assert report.fid < 1e-6


def test_evaluate_run_vocab_mismatch_errors(tiny_checkpoint, eval_corpus, small_table):
    records, _ = eval_corpus
    bad = [records[0].__class__(font_id="bad", glyphs=records[0].glyphs,
                                impressions=[99])]
    with pytest.raises(ValueError, match="mismatch"):
        evaluate_run(tiny_checkpoint, bad, small_table, seed=0)


def test_extractor_frozen_through_evaluation(tiny_checkpoint, eval_corpus, small_table):
    records, _ = eval_corpus
    extractor = train_feature_extractor(records, seed=1, epochs=2)
    before = extractor.checksum()
    evaluate_run(tiny_checkpoint, records, small_table, seed=0, extractor=extractor)
    assert extractor.checksum() == before


def test_report_json_and_leaderboard(tmp_path, tiny_checkpoint, eval_corpus, small_table):
    records, _ = eval_corpus
    report = evaluate_run(tiny_checkpoint, records, small_table, seed=0)
    payload = report.to_json(tmp_path / "report.json")
    assert (tmp_path / "report.json").exists()
    assert '"fid"' in payload
    lb = leaderboard_append(tmp_path / "board.csv", report)
    lb = leaderboard_append(tmp_path / "board.csv", report)
    lines = lb.read_text().strip().splitlines()
    assert lines[0].startswith("checkpoint_id,variant,fid")
    assert len(lines) == 3
