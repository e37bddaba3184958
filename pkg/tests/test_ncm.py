import numpy as np
import pytest

from isoclip import align, errors, ncm, synthdata


def brute_force_prototypes(w, features, labels):
    """Independent mean -> project -> normalize recomputation."""
    out = {}
    for cid in sorted(set(int(l) for l in labels)):
        rows = [features[i] for i in range(len(labels)) if labels[i] == cid]
        mean = np.sum(rows, axis=0, dtype=np.float64) / len(rows)
        projected = w @ mean
        out[cid] = projected / np.linalg.norm(projected)
    return out


def test_single_sample_class():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((3, 5))
    feature = rng.standard_normal((1, 5))
    protos = ncm.compute_prototypes(w, feature, np.array([7]))
    expected = w @ feature[0]
    expected /= np.linalg.norm(expected)
    assert np.allclose(protos.prototypes[0], expected, atol=1e-12)
    assert protos.class_ids.tolist() == [7]
    assert protos.counts.tolist() == [1]


def test_duplicate_samples_match_single():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((3, 5))
    f = rng.standard_normal(5)
    single = ncm.compute_prototypes(w, f[None, :], np.array([0]))
    doubled = ncm.compute_prototypes(w, np.stack([f, f]), np.array([0, 0]))
    assert np.allclose(single.prototypes, doubled.prototypes, atol=1e-15)


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((4, 6))
    features = rng.standard_normal((12, 6))
    labels = rng.integers(0, 3, 12)
    protos = ncm.compute_prototypes(w, features, labels)
    oracle = brute_force_prototypes(w, features, labels)
    for row, cid in enumerate(protos.class_ids):
        assert np.array_equal(protos.prototypes[row], oracle[int(cid)])


def test_empty_class_rejected():
    rng = np.random.default_rng(3)
    with pytest.raises(errors.EmptyClassError):
        ncm.compute_prototypes(rng.standard_normal((2, 3)),
                               rng.standard_normal((4, 3)),
                               np.array([0, 0, 1, 1]), class_ids=[0, 1, 2])


def test_mean_then_project_order():
    # projecting first then averaging would give a different prototype for
    # non-collinear samples; check we do mean-then-project
    w = np.array([[1.0, 0.0], [0.0, 2.0]])
    features = np.array([[1.0, 0.0], [0.0, 1.0]])
    protos = ncm.compute_prototypes(w, features, np.array([0, 0]))
    mean_first = w @ np.array([0.5, 0.5])
    mean_first /= np.linalg.norm(mean_first)
    assert np.allclose(protos.prototypes[0], mean_first, atol=1e-15)


def test_classify_recovers_source_mean():
    rng = np.random.default_rng(4)
    w = rng.standard_normal((4, 6))
    features = rng.standard_normal((20, 6))
    labels = rng.integers(0, 4, 20)
    protos = ncm.compute_prototypes(w, features, labels)
    means = np.stack([features[labels == c].mean(axis=0) for c in protos.class_ids])
    accuracy, predicted = ncm.classify(protos, w, means, protos.class_ids)
    assert accuracy == 1.0
    assert np.array_equal(predicted, protos.class_ids)


def test_tie_goes_to_lowest_class_id():
    w = np.eye(2)
    protos = ncm.compute_prototypes(
        w, np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([3, 8]))
    # equidistant test point: both similarities are bitwise equal
    _, predicted = ncm.classify(protos, w, np.array([[1.0, 1.0]]))
    assert predicted.tolist() == [3]


def test_predictions_invariant_under_head_scaling():
    rng = np.random.default_rng(5)
    w = rng.standard_normal((4, 6))
    features = rng.standard_normal((15, 6))
    labels = rng.integers(0, 3, 15)
    tests = rng.standard_normal((9, 6))
    protos = ncm.compute_prototypes(w, features, labels)
    protos_scaled = ncm.compute_prototypes(2.5 * w, features, labels)
    _, a = ncm.classify(protos, w, tests)
    _, b = ncm.classify(protos_scaled, 2.5 * w, tests)
    assert np.array_equal(a, b)


def test_full_band_alignment_preserves_predictions():
    rng = np.random.default_rng(6)
    from isoclip.tensorio import ProjectorPair
    pair = ProjectorPair(w_i=rng.standard_normal((5, 8)),
                         w_t=rng.standard_normal((5, 7)))
    op = align.inter_modal_operator(pair)
    aligned = align.align_projectors(pair, align.select_band(op, 0, 0), op=op)
    features = rng.standard_normal((20, 8))
    labels = rng.integers(0, 4, 20)
    tests = rng.standard_normal((10, 8))
    _, a = ncm.classify(ncm.compute_prototypes(pair.w_i, features, labels), pair.w_i, tests)
    _, b = ncm.classify(ncm.compute_prototypes(aligned.w_i_hat, features, labels),
                        aligned.w_i_hat, tests)
    assert np.array_equal(a, b)


def test_permuting_test_order_permutes_predictions():
    rng = np.random.default_rng(7)
    w = rng.standard_normal((4, 6))
    features = rng.standard_normal((12, 6))
    labels = rng.integers(0, 3, 12)
    tests = rng.standard_normal((8, 6))
    protos = ncm.compute_prototypes(w, features, labels)
    perm = rng.permutation(8)
    _, direct = ncm.classify(protos, w, tests)
    _, permuted = ncm.classify(protos, w, tests[perm])
    assert np.array_equal(permuted, direct[perm])


def test_planted_clusters_and_alignment_benefit():
    spec = synthdata.PlantedSpec(
        d_i=24, d_t=20, d=16, spectrum=synthdata.banded_spectrum(16, 3, 2),
        n_top=3, n_bottom=2, classes=4, per_class=20, noise_sigma=0.05, seed=8,
    )
    pair, truth = synthdata.make_projectors(spec)
    image_ds, _ = synthdata.make_embeddings(spec, truth)
    idx = np.arange(image_ds.n)
    train = idx % 4 != 0  # stratified: labels are grouped by class
    test = ~train
    op = align.inter_modal_operator(pair)
    aligned = align.align_projectors(pair, align.select_band(op, 3, 2), op=op)

    def accuracy(head):
        protos = ncm.compute_prototypes(head, image_ds.features[train],
                                        image_ds.labels[train])
        acc, _ = ncm.classify(protos, head, image_ds.features[test],
                              image_ds.labels[test])
        return acc

    acc_aligned = accuracy(aligned.w_i_hat)
    assert acc_aligned == 1.0  # margin-separated planted clusters
    assert acc_aligned >= accuracy(pair.w_i)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    w = rng.standard_normal((3, 5))
    protos = ncm.compute_prototypes(w, rng.standard_normal((10, 5)),
                                    rng.integers(0, 3, 10))
    ncm.save_prototypes(protos, tmp_path)
    loaded = ncm.load_prototypes(tmp_path)
    assert np.array_equal(loaded.prototypes, protos.prototypes)
    assert np.array_equal(loaded.class_ids, protos.class_ids)
    assert np.array_equal(loaded.counts, protos.counts)
