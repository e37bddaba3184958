import numpy as np
import pytest
from scipy.linalg import subspace_angles

from isoclip import align, retrieval, synthdata


def small_spec(seed=0, **overrides):
    kwargs = dict(
        d_i=20, d_t=18, d=12, spectrum=synthdata.banded_spectrum(12, 3, 2),
        n_top=3, n_bottom=2, classes=4, per_class=10, noise_sigma=0.05, seed=seed,
    )
    kwargs.update(overrides)
    return synthdata.PlantedSpec(**kwargs)


class TestSpecValidation:
    def test_rejects_increasing_spectrum(self):
        with pytest.raises(ValueError):
            small_spec(spectrum=np.linspace(0.1, 1.0, 12))

    def test_rejects_band_overflow(self):
        with pytest.raises(ValueError):
            small_spec(n_top=8, n_bottom=5)

    def test_rejects_too_many_classes(self):
        with pytest.raises(ValueError):
            small_spec(classes=10)  # middle width is 7

    def test_banded_spectrum_shape(self):
        s = synthdata.banded_spectrum(16, 4, 3)
        assert s.shape == (16,)
        assert (np.diff(s) <= 0).all()
        assert s[4:-3].std() == 0.0  # flat middle


class TestMakeProjectors:
    def test_plants_sigma_exactly(self):
        spec = small_spec()
        pair, truth = synthdata.make_projectors(spec)
        psi = pair.w_i.T @ pair.w_t
        planted = (truth.u * truth.sigma) @ truth.v.T
        assert np.abs(psi - planted).max() <= 1e-12

    def test_isotropic_spectrum_only_sigma_asserted(self):
        # degenerate flat spectrum: any orthonormal basis is a valid
        # recovery, so only the singular values can be checked
        spec = small_spec(spectrum=np.ones(12), n_top=0, n_bottom=0, classes=4)
        pair, _ = synthdata.make_projectors(spec)
        s = align.inter_modal_operator(pair).decomposition.s
        assert np.abs(s - 1.0).max() <= 1e-8

    def test_recovers_middle_band(self):
        spec = synthdata.PlantedSpec(
            d_i=8, d_t=7, d=5, spectrum=np.array([10.0, 5.0, 1.0, 1.0, 0.1]),
            n_top=2, n_bottom=1, classes=2, per_class=4, noise_sigma=0.0, seed=1,
        )
        pair, truth = synthdata.make_projectors(spec)
        op = align.inter_modal_operator(pair)
        recovered = op.decomposition.u[:, 2:4]
        assert subspace_angles(recovered, truth.u[:, 2:4]).max() <= 1e-6

    def test_seeded_determinism(self):
        a_pair, a_truth = synthdata.make_projectors(small_spec(seed=9))
        b_pair, b_truth = synthdata.make_projectors(small_spec(seed=9))
        assert np.array_equal(a_pair.w_i, b_pair.w_i)
        assert np.array_equal(a_pair.w_t, b_pair.w_t)
        assert np.array_equal(a_truth.u, b_truth.u)

    def test_different_seeds_differ(self):
        a_pair, _ = synthdata.make_projectors(small_spec(seed=1))
        b_pair, _ = synthdata.make_projectors(small_spec(seed=2))
        assert not np.array_equal(a_pair.w_i, b_pair.w_i)

    def test_warns_on_repeated_boundary_value(self):
        spectrum = synthdata.banded_spectrum(12, 3, 2)
        spectrum[2] = spectrum[3]  # top band bleeds into the middle
        with pytest.warns(UserWarning, match="not identifiable"):
            synthdata.make_projectors(small_spec(spectrum=spectrum))


class TestMakeEmbeddings:
    def test_seeded_determinism(self):
        spec = small_spec(seed=5)
        _, truth = synthdata.make_projectors(spec)
        a_img, a_txt = synthdata.make_embeddings(spec, truth)
        b_img, b_txt = synthdata.make_embeddings(spec, truth)
        assert np.array_equal(a_img.features, b_img.features)
        assert np.array_equal(a_txt.features, b_txt.features)

    def test_clean_signal_gives_perfect_baseline(self):
        spec = small_spec(noise_sigma=0.0, nuisance_scale=0.0)
        pair, truth = synthdata.make_projectors(spec)
        image_ds, _ = synthdata.make_embeddings(spec, truth)
        report = retrieval.evaluate_retrieval(pair.w_i, image_ds)
        assert report.map == 1.0

    def test_strong_nuisance_hurts_baseline_not_aligned(self):
        spec = small_spec(nuisance_scale=3.0)
        pair, truth = synthdata.make_projectors(spec)
        image_ds, text_ds = synthdata.make_embeddings(spec, truth)
        op = align.inter_modal_operator(pair)
        band = align.select_band(op, spec.n_top, spec.n_bottom)
        aligned = align.align_projectors(pair, band, op=op)
        base = retrieval.evaluate_retrieval(pair.w_i, image_ds).map
        iso = retrieval.evaluate_retrieval(aligned.w_i_hat, image_ds).map
        assert iso > base
        # text side via the role swap
        base_t = retrieval.evaluate_retrieval(pair.w_t, text_ds).map
        iso_t = retrieval.evaluate_retrieval(aligned.w_t_hat, text_ds).map
        assert iso_t > base_t

    def test_labels_and_split_convention(self):
        spec = small_spec()
        _, truth = synthdata.make_projectors(spec)
        image_ds, _ = synthdata.make_embeddings(spec, truth)
        assert image_ds.n == spec.classes * spec.per_class
        assert image_ds.exclude_self is True
        assert np.array_equal(np.unique(image_ds.labels), np.arange(spec.classes))

    def test_extending_band_into_top_degrades_map(self):
        spec = small_spec(nuisance_scale=3.0, seed=21)
        pair, truth = synthdata.make_projectors(spec)
        image_ds, _ = synthdata.make_embeddings(spec, truth)
        op = align.inter_modal_operator(pair)

        def map_at(k_t, k_b):
            aligned = align.align_projectors(
                pair, align.select_band(op, k_t, k_b), op=op)
            return retrieval.evaluate_retrieval(aligned.w_i_hat, image_ds).map

        planted = map_at(spec.n_top, spec.n_bottom)
        widened_top = map_at(0, spec.n_bottom)
        widened_bottom = map_at(spec.n_top, 0)
        assert planted > widened_top
        assert planted > widened_bottom
