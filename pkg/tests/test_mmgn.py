import numpy as np
import pytest

from latentscope.fieldgen import FieldConfig, ObservationSet, generate_field, sample_observations
from latentscope.mmgn import (MMGN, GaborLayerParams, TrainConfig, decoder_forward, gabor_filter,
                              gabor_filter_vjp, infer_latent, read_latents, read_model,
                              reconstruct_grid, relative_error, train, write_latents, write_model)


@pytest.fixture(scope="module")
def small_obs():
    f = generate_field(FieldConfig(nlat=12, nlon=16, nt=6))
    return f, sample_observations(f, 0.3, seed=0)


@pytest.fixture(scope="module")
def small_model(small_obs):
    _, obs = small_obs
    return MMGN(latent_dim=4, hidden_dim=16, n_layers=3, epochs=300, random_state=1).fit(obs)


def random_gabor(rng, h):
    return GaborLayerParams(rng.uniform(-1, 1, (h, 2)), np.abs(rng.normal(size=h)),
                            rng.normal(0, 2, (h, 2)), rng.uniform(0, 2 * np.pi, h))

from oracles import central_difference


def test_gabor_unit_at_center_with_quarter_phase():
    rng = np.random.default_rng(0)
    p = random_gabor(rng, 5)
    p.omega[2] = 0.0
    p.phi[2] = np.pi / 2
    assert gabor_filter(p.mu[2], p)[2] == pytest.approx(1.0, abs=1e-15)


def test_gabor_zero_scale_is_pure_sinusoid():
    rng = np.random.default_rng(1)
    p = random_gabor(rng, 6)
    p.gamma[:] = 0.0
    x = np.array([0.3, -0.7])
    np.testing.assert_allclose(gabor_filter(x, p), np.sin(p.omega @ x + p.phi), atol=1e-14)


def test_gabor_matches_direct_formula():
    rng = np.random.default_rng(2)
    p = random_gabor(rng, 7)
    x = rng.uniform(-1, 1, (9, 2))
    direct = np.exp(-0.5 * p.gamma * ((x[:, None, :] - p.mu) ** 2).sum(-1)) * np.sin(x @ p.omega.T + p.phi)
    np.testing.assert_allclose(gabor_filter(x, p), direct, atol=1e-14)


def test_gabor_parameter_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    p = random_gabor(rng, 5)
    x = rng.uniform(-1, 1, 2)
    w = rng.normal(size=5)
    analytic = gabor_filter_vjp(x, p, w)
    for name in ("mu", "gamma", "omega", "phi"):
        numeric = central_difference(lambda: float(w @ gabor_filter(x, p)), getattr(p, name))
        rel = np.linalg.norm(numeric - analytic[name]) / np.linalg.norm(numeric)
        assert rel < 1e-6, name


def unmodulated(params, n_layers, x):
    """The plain multiplicative filter network, written out from its recurrence."""
    def g(i):
        mu, gamma = params[f"gabor{i}.mu"], params[f"gabor{i}.gamma"]
        om, ph = params[f"gabor{i}.omega"], params[f"gabor{i}.phi"]
        return np.exp(-0.5 * gamma * ((x[:, None, :] - mu) ** 2).sum(-1)) * np.sin(x @ om.T + ph)
    h = g(0)
    for i in range(1, n_layers):
        h = (h @ params[f"linear{i - 1}.weight"].T + params[f"linear{i - 1}.bias"]) * g(i)
    return h @ params["head.weight"] + params["head.bias"]


def test_zero_latent_recovers_unmodulated_network(small_model):
    x = np.random.default_rng(4).uniform(-1, 1, (20, 2))
    out = small_model.decode(x, np.zeros(small_model.latent_dim))
    np.testing.assert_allclose(out, unmodulated(small_model.params_, 3, x), rtol=1e-12, atol=1e-14)


def test_constant_head(small_model):
    m = MMGN(**small_model.get_params())
    m.params_ = {k: v.copy() for k, v in small_model.params_.items()}
    m.params_["head.weight"][:] = 0.0
    m.params_["head.bias"] = np.asarray(0.7)
    rng = np.random.default_rng(5)
    for _ in range(5):
        assert decoder_forward(m, rng.uniform(-1, 1, 2), rng.normal(size=4)) == 0.7


def test_decode_shape_errors(small_model):
    with pytest.raises(ValueError):
        small_model.decode(np.zeros((3, 2)), np.zeros(5))
    with pytest.raises(ValueError):
        small_model.decode(np.zeros((3, 3)), np.zeros(4))


def test_full_gradient_matches_finite_differences():
    f = generate_field(FieldConfig(nlat=6, nlon=8, nt=3))
    obs = sample_observations(f, 0.5, seed=1)
    model = MMGN(latent_dim=2, hidden_dim=4, n_layers=2, epochs=0, random_state=3).fit(obs)
    latents = np.random.default_rng(0).normal(0, 0.5, model.latents_.shape)
    params = {k: v.copy() for k, v in model.params_.items()}
    _, grads = model.loss_and_grad(obs, params=params, latents=latents)
    for name in list(params) + ["latents"]:
        arr = latents if name == "latents" else params[name]
        if arr.ndim == 0:
            arr = params[name] = arr.reshape(1)
        numeric = central_difference(
            lambda: model.loss_and_grad(obs, params=params, latents=latents)[0], arr)
        rel = np.linalg.norm(numeric.ravel() - np.ravel(grads[name])) / np.linalg.norm(numeric)
        assert rel < 1e-5, name


def test_zero_epochs_returns_initialization(small_obs):
    _, obs = small_obs
    a = MMGN(latent_dim=3, hidden_dim=8, epochs=0, latent_init_std=1e-2, random_state=7).fit(obs)
    assert a.loss_history_ == []
    model = MMGN(latent_dim=3, hidden_dim=8, epochs=0, random_state=7)
    _, rng = model.init_params()
    np.testing.assert_array_equal(a.latents_, rng.normal(0.0, 1e-2, size=(obs.nt, 3)))


def test_single_frame_memorization():
    f = generate_field(FieldConfig(nlat=8, nlon=10, nt=2))
    fr = sample_observations(f, 0.25, seed=0).frame(0)
    one = ObservationSet(fr.t, fr.i, fr.j, fr.values, fr.rate, (1, 8, 10))
    assert len(one) == 20
    model, _, history = train(one, TrainConfig(epochs=2000))
    assert len(history) == 2000
    assert model.final_data_loss_ < 1e-4


def test_training_is_deterministic(small_obs):
    _, obs = small_obs
    kw = dict(latent_dim=3, hidden_dim=8, epochs=40, random_state=5)
    a, b = MMGN(**kw).fit(obs), MMGN(**kw).fit(obs)
    assert a.latents_.tobytes() == b.latents_.tobytes()
    assert all(a.params_[k].tobytes() == b.params_[k].tobytes() for k in a.params_)
    assert a.loss_history_ == b.loss_history_


def test_training_reduces_loss(small_model):
    h = small_model.loss_history_
    assert len(h) == 300 and h[-1] < 0.2 * h[0]
    assert all(g >= 0 for i in range(3) for g in small_model.params_[f"gabor{i}.gamma"])


def test_empty_and_nonfinite_training_errors(small_obs):
    _, obs = small_obs
    empty = ObservationSet([], [], [], [], 0.1, obs.dims)
    with pytest.raises(ValueError):
        MMGN(epochs=1).fit(empty)
    with np.errstate(all="ignore"), pytest.raises(FloatingPointError, match="epoch"):
        MMGN(latent_dim=2, hidden_dim=4, epochs=50, learning_rate=1e200).fit(obs)


def test_infer_latent_recovers_synthetic_code(small_model, small_obs):
    _, obs = small_obs
    fr = obs.frame(2)
    z_star = small_model.latents_[2] * 3 + 0.1
    syn = ObservationSet(fr.t, fr.i, fr.j, small_model.decode(fr.coords(), z_star), fr.rate, fr.dims)
    before = {k: v.tobytes() for k, v in small_model.params_.items()}
    z = infer_latent(small_model, syn, latent_reg=0.0)
    mse = np.mean((small_model.decode(syn.coords(), z) - syn.values) ** 2)
    assert mse <= 0.0 + 1e-8
    assert {k: v.tobytes() for k, v in small_model.params_.items()} == before


def test_infer_latent_with_regularization_stays_close(small_model, small_obs):
    _, obs = small_obs
    fr = obs.frame(1)
    z = small_model.infer_latent(fr)
    assert small_model.observation_mse(fr, latents=np.tile(z, (obs.nt, 1))) < 2 * small_model.final_data_loss_ + 0.05


def test_infer_latent_zero_iterations_returns_init(small_model, small_obs):
    _, obs = small_obs
    init = np.array([0.1, -0.2, 0.3, 0.0])
    np.testing.assert_array_equal(small_model.infer_latent(obs.frame(0), n_iter=0, init=init), init)
    with pytest.raises(ValueError):
        small_model.infer_latent(ObservationSet([], [], [], [], 0.1, obs.dims))


def test_reconstruction_matches_training_loss(small_model, small_obs):
    _, obs = small_obs
    grid = small_model.reconstruct()
    masked = np.mean((grid[obs.t, obs.i, obs.j] - obs.values) ** 2)
    assert abs(masked - small_model.final_data_loss_) < 1e-12
    assert small_model.loss_history_[-1] >= small_model.final_data_loss_ * 0.5


def test_reconstruction_on_finer_grid(small_model):
    fine = reconstruct_grid(small_model, small_model.latents_, (6, 12, 32))
    assert fine.shape == (6, 12, 32)
    coarse = small_model.reconstruct()
    # every second longitude node of the 32-wide grid does not coincide with the 16-wide grid,
    # but the endpoints do
    np.testing.assert_allclose(fine[:, :, 0], coarse[:, :, 0], atol=1e-12)
    np.testing.assert_allclose(fine[:, :, -1], coarse[:, :, -1], atol=1e-12)
    with pytest.raises(ValueError):
        small_model.reconstruct((5, 12, 16))


def test_decoder_is_locally_lipschitz(small_model):
    rng = np.random.default_rng(8)
    z = small_model.latents_[0]
    for _ in range(10):
        x = rng.uniform(-0.9, 0.9, 2)
        # local gradient bound from a coarse probe around x
        probes = x + rng.uniform(-1e-3, 1e-3, (50, 2))
        vals = small_model.decode(probes, z)
        dist = np.linalg.norm(probes[:, None] - probes[None], axis=-1) + np.eye(50)
        bound = np.max(np.abs(vals[:, None] - vals[None]) / dist)
        delta = rng.normal(size=2)
        delta *= 1e-6 / np.linalg.norm(delta)
        diff = abs(decoder_forward(small_model, x + delta, z) - decoder_forward(small_model, x, z))
        assert diff <= 2 * bound * 1e-6 + 1e-12


def test_predict_and_score(small_model, small_obs):
    f, obs = small_obs
    X = np.column_stack([obs.t, obs.coords()])
    np.testing.assert_allclose(small_model.predict(X), small_model.reconstruct()[obs.t, obs.i, obs.j],
                               atol=1e-12)
    assert small_model.score(X, obs.values) > 0.5
    assert relative_error(f, f) == 0.0


def test_model_and_latent_files_roundtrip(small_model, tmp_path):
    write_model(small_model, tmp_path / "m.mmgn")
    back = read_model(tmp_path / "m.mmgn")
    assert back.get_params() == small_model.get_params()
    assert (tmp_path / "m.mmgn").read_bytes()[:4] == b"MMGN"
    np.testing.assert_array_equal(back.reconstruct(latents=small_model.latents_),
                                  small_model.reconstruct())
    write_latents(small_model.latents_, tmp_path / "z.csv")
    assert (tmp_path / "z.csv").read_text().splitlines()[0] == "t,z0,z1,z2,z3"
    assert read_latents(tmp_path / "z.csv").tobytes() == small_model.latents_.tobytes()


def test_get_params_roundtrip():
    m = MMGN(latent_dim=5, epochs=10)
    assert MMGN(**m.get_params()).get_params() == m.get_params()
