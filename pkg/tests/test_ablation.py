import numpy as np
import pytest

from latentscope.ablation import (ablate_dimension, ablate_latents, attribution_map,
                                  error_decompose, permutation_baseline, run_ablation,
                                  same_label_fraction, squared_error)
from latentscope.fieldgen import FieldConfig, generate_field, sample_observations
from latentscope.mmgn import MMGN


@pytest.fixture(scope="module")
def setup():
    f = generate_field(FieldConfig(nlat=8, nlon=10, nt=5))
    obs = sample_observations(f, 0.4, seed=2)
    model = MMGN(latent_dim=3, hidden_dim=12, epochs=200, random_state=4).fit(obs)
    return model, model.latents_, f


def test_zero_ablation_identity(setup):
    model, z, f = setup
    base = squared_error(model, z, f)
    assert np.array_equal(base, squared_error(model, z.copy(), f))
    zz = z.copy()
    zz[:, 1] = 0.0
    assert np.array_equal(ablate_dimension(model, zz, 1, f), squared_error(model, zz, f))


def test_single_dimension_ablation_is_unmodulated_decoder(setup):
    model, _, f = setup
    z = np.random.default_rng(0).normal(size=(5, 1))
    m1 = MMGN(**{**model.get_params(), "latent_dim": 1})
    m1.params_ = {k: (v[:, :1].copy() if k.startswith("mod") else v) for k, v in model.params_.items()}
    m1.n_frames_, m1.grid_shape_ = model.n_frames_, model.grid_shape_
    err = ablate_dimension(m1, z, 0, f)
    unmod = (m1.reconstruct(latents=np.zeros((5, 1))) - f) ** 2
    assert np.array_equal(err, unmod)


def test_ablate_latents_fill_modes():
    z = np.arange(12.0).reshape(4, 3)
    assert np.all(ablate_latents(z, 2)[:, 2] == 0) and np.array_equal(ablate_latents(z, 2)[:, :2], z[:, :2])
    assert np.all(ablate_latents(z, 0, "mean")[:, 0] == z[:, 0].mean())
    with pytest.raises(ValueError):
        ablate_latents(z, 3)
    with pytest.raises(ValueError):
        ablate_latents(z, -1)


def test_error_decompose_examples():
    e_t, e_x = error_decompose(np.arange(8.0).reshape(2, 2, 2))
    np.testing.assert_array_equal(e_t, [1.5, 5.5])
    np.testing.assert_array_equal(e_x, [[2, 3], [4, 5]])
    e_t, e_x = error_decompose(np.full((3, 4, 5), 0.25))
    assert np.all(e_t == 0.25) and np.all(e_x == 0.25)


def test_error_decompose_means_agree():
    err = np.random.default_rng(1).random((6, 7, 8))
    e_t, e_x = error_decompose(err)
    assert abs(e_t.mean() - err.mean()) < 1e-12
    assert abs(e_x.mean() - err.mean()) < 1e-12


def test_error_decompose_weights():
    err = np.random.default_rng(2).random((4, 3, 5))
    e_t, e_x = error_decompose(err, np.ones((3, 5)))
    np.testing.assert_allclose(e_t, err.mean(axis=(1, 2)), atol=1e-15)
    # all weight on one cell picks that cell's series
    w = np.zeros((3, 5))
    w[1, 2] = 2.0
    e_t, e_x2 = error_decompose(err, w)
    np.testing.assert_array_equal(e_t, err[:, 1, 2])
    assert np.array_equal(e_x2, e_x)
    for bad in (np.ones((5, 3)), -np.ones((3, 5)), np.zeros((3, 5))):
        with pytest.raises(ValueError):
            error_decompose(err, bad)


def test_run_ablation_consistency(setup):
    model, z, f = setup
    res = run_ablation(model, z, f)
    assert res.total_mse.shape == (3,) and res.e_t.shape == (3, 5) and res.e_x.shape == (3, 8, 10)
    assert np.all(res.total_mse >= 0)
    np.testing.assert_allclose(res.e_t.mean(axis=1), res.total_mse, atol=1e-12)
    np.testing.assert_allclose(res.e_x.mean(axis=(1, 2)), res.total_mse, atol=1e-12)
    amap = attribution_map(res)
    assert np.array_equal(amap, np.argmax(res.e_x, axis=0))
    assert amap.min() >= 0 and amap.max() < 3
    assert np.array_equal(amap, attribution_map(run_ablation(model, z, f)))


def test_attribution_k1_is_all_zero(setup):
    model, _, f = setup
    m1 = MMGN(**{**model.get_params(), "latent_dim": 1})
    m1.params_ = {k: (v[:, :1].copy() if k.startswith("mod") else v) for k, v in model.params_.items()}
    m1.n_frames_, m1.grid_shape_ = model.n_frames_, model.grid_shape_
    amap = attribution_map(run_ablation(m1, np.ones((5, 1)), f))
    assert np.all(amap == 0)


def test_attribution_tie_break(setup):
    model, z, f = setup
    z2 = z[:, :2].copy()
    z2[:, 1] = 0.0
    m2 = MMGN(**{**model.get_params(), "latent_dim": 2})
    m2.params_ = {k: (v[:, :2].copy() if k.startswith("mod") else v) for k, v in model.params_.items()}
    m2.n_frames_, m2.grid_shape_ = model.n_frames_, model.grid_shape_
    res = run_ablation(m2, z2, f)
    amap = attribution_map(res)
    # dim 1 is a no-op ablation: it only wins where dim 0 does not increase the error at all
    strictly_worse = res.e_x[0] > res.e_x[1]
    assert not np.any(amap[strictly_worse] == 1)
    assert np.all(amap[res.e_x[0] == res.e_x[1]] == 0)


def test_same_label_fraction_and_baseline():
    stripes = np.repeat(np.arange(4), 6).reshape(4, 6)
    # 20 of 20 horizontal pairs match, 0 of 18 vertical pairs
    assert same_label_fraction(stripes) == pytest.approx(20 / 38)
    assert same_label_fraction(np.zeros((3, 3))) == 1.0
    assert permutation_baseline(stripes, 100, seed=0) < same_label_fraction(stripes)
    assert permutation_baseline(stripes, 10, seed=1) == permutation_baseline(stripes, 10, seed=1)
