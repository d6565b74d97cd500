"""Auto-decoded latent codes with a modulated Gabor multiplicative filter network.

Each time step ``t`` owns a free latent vector ``z_t``. The decoder maps a
normalized coordinate ``x`` and ``z_t`` to a scalar field value::

    h_1     = g_1(x) * (1 + A_1 z)
    h_{i+1} = (W_i h_i + b_i) * g_{i+1}(x) * (1 + A_{i+1} z)
    u       = w_out . h_L + b_out

where ``g_i`` is a bank of Gabor filters. At ``z = 0`` every modulation factor
is exactly one, so the plain multiplicative filter network is recovered.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._framing import FormatError, read_framed, write_framed
from .fieldgen import ObservationSet, grid_coords

__all__ = [
    "GaborLayerParams",
    "TrainConfig",
    "MMGN",
    "gabor_filter",
    "decoder_forward",
    "train",
    "infer_latent",
    "reconstruct_grid",
    "relative_error",
    "write_model",
    "read_model",
    "write_latents",
    "read_latents",
]

MODEL_MAGIC = b"MMGN"


@dataclass
class GaborLayerParams:
    """Filter bank of ``h`` units: centers (h, 2), scales (h,), frequencies (h, 2), phases (h,)."""

    mu: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    phi: np.ndarray


@dataclass
class TrainConfig:
    epochs: int = 1500
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    latent_reg: float = 1e-4
    latent_init_std: float = 1e-2
    lr_floor: float = 0.01
    seed: int = 0


def axis_tables(x):
    """Unique values and inverse indices per coordinate axis of ``x`` (n, 2)."""
    u1, i1 = np.unique(x[:, 0], return_inverse=True)
    u2, i2 = np.unique(x[:, 1], return_inverse=True)
    return u1, i1, u2, i2


class _Points:
    """Query coordinates reduced to their unique nodes for filter evaluation."""

    def __init__(self, x):
        self.x = x
        self.nodes, self.inverse = np.unique(x, axis=0, return_inverse=True)
        self.inverse = self.inverse.ravel()
        self.axes = axis_tables(self.nodes)
        n, nn = x.shape[0], self.nodes.shape[0]
        self.scatter = sparse.csr_matrix(
            (np.ones(n), (self.inverse, np.arange(n))), shape=(nn, n))

    def gabor(self, mu, gamma, omega, phi):
        g, cache = _gabor(self.nodes, mu, gamma, omega, phi, axes=self.axes)
        return g[self.inverse], cache

    def gabor_backward(self, dg, gamma, cache):
        return _gabor_backward(np.asarray(self.scatter @ dg), gamma, cache)


def _gabor(x, mu, gamma, omega, phi, axes=None):
    # sin(w1 x1 + w2 x2 + phi) is assembled from per-axis tables by angle
    # addition; on lattice-structured inputs this avoids most transcendental calls
    u1, i1, u2, i2 = axis_tables(x) if axes is None else axes
    a = u1[:, None] * omega[None, :, 0] + phi[None, :]
    b = u2[:, None] * omega[None, :, 1]
    sa, ca, sb, cb = np.sin(a), np.cos(a), np.sin(b), np.cos(b)
    sa, ca, sb, cb = sa[i1], ca[i1], sb[i2], cb[i2]
    s = sa * cb + ca * sb
    c = ca * cb - sa * sb
    d1 = x[:, 0:1] - mu[None, :, 0]
    d2 = x[:, 1:2] - mu[None, :, 1]
    e1 = np.exp(-0.5 * gamma[None, :] * (u1[:, None] - mu[None, :, 0]) ** 2)
    e2 = np.exp(-0.5 * gamma[None, :] * (u2[:, None] - mu[None, :, 1]) ** 2)
    env = e1[i1] * e2[i2]
    return env * s, (x, d1, d2, env, s, c)


def _gabor_backward(dg, gamma, cache):
    x, d1, d2, env, s, c = cache
    denv_env = dg * s * env
    darg = dg * env * c
    dsq = denv_env * (-0.5 * gamma[None, :])
    sq = d1 * d1 + d2 * d2
    return {
        "mu": -2.0 * np.stack([np.sum(dsq * d1, axis=0), np.sum(dsq * d2, axis=0)], axis=1),
        "gamma": np.sum(denv_env * (-0.5 * sq), axis=0),
        "omega": darg.T @ x,
        "phi": darg.sum(axis=0),
    }


def gabor_filter(x, p):
    """Gabor responses ``exp(-gamma/2 |x - mu|^2) * sin(omega.x + phi)`` per unit.

    ``x`` is a single 2-vector (returns shape ``(h,)``) or an ``(n, 2)`` batch.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if xs.shape[1] != 2 or not np.all(np.isfinite(xs)):
        raise ValueError("coordinates must be finite 2-vectors")
    g, _ = _gabor(xs, p.mu, p.gamma, p.omega, p.phi)
    return g[0] if single else g


def gabor_filter_vjp(x, p, dg):
    """Gradient of ``sum(dg * gabor_filter(x, p))`` with respect to each filter parameter."""
    xs = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _, cache = _gabor(xs, p.mu, p.gamma, p.omega, p.phi)
    return _gabor_backward(np.atleast_2d(dg), p.gamma, cache)


def param_names(n_layers):
    """Parameter array names in declaration (and file payload) order."""
    names = []
    for i in range(n_layers):
        names += [f"gabor{i}.mu", f"gabor{i}.gamma", f"gabor{i}.omega", f"gabor{i}.phi"]
    for i in range(n_layers - 1):
        names += [f"linear{i}.weight", f"linear{i}.bias"]
    names += [f"mod{i}.weight" for i in range(n_layers)]
    names += ["head.weight", "head.bias"]
    return names


def param_shapes(n_layers, hidden_dim, latent_dim):
    h, k = hidden_dim, latent_dim
    shapes = {}
    for i in range(n_layers):
        shapes.update({f"gabor{i}.mu": (h, 2), f"gabor{i}.gamma": (h,),
                       f"gabor{i}.omega": (h, 2), f"gabor{i}.phi": (h,)})
    for i in range(n_layers - 1):
        shapes.update({f"linear{i}.weight": (h, h), f"linear{i}.bias": (h,)})
    for i in range(n_layers):
        shapes[f"mod{i}.weight"] = (h, k)
    shapes.update({"head.weight": (h,), "head.bias": ()})
    return [(name, shapes[name]) for name in param_names(n_layers)]


def _init_params(rng, n_layers, h, k, freq_scale, gamma_scale):
    p = {}
    for i in range(n_layers):
        p[f"gabor{i}.mu"] = rng.uniform(-1.0, 1.0, size=(h, 2))
        p[f"gabor{i}.gamma"] = np.abs(rng.normal(0.0, gamma_scale, size=h))
        # the filter product sums frequencies, so split the bandwidth across layers
        p[f"gabor{i}.omega"] = rng.normal(0.0, freq_scale / np.sqrt(n_layers), size=(h, 2))
        p[f"gabor{i}.phi"] = rng.uniform(0.0, 2 * np.pi, size=h)
    bound = np.sqrt(6.0 / h)
    for i in range(n_layers - 1):
        p[f"linear{i}.weight"] = rng.uniform(-bound, bound, size=(h, h))
        p[f"linear{i}.bias"] = np.zeros(h)
    for i in range(n_layers):
        p[f"mod{i}.weight"] = rng.uniform(-1.0, 1.0, size=(h, k)) / np.sqrt(k)
    p["head.weight"] = rng.uniform(-1.0, 1.0, size=h) / np.sqrt(h)
    p["head.bias"] = np.zeros(())
    return {name: p[name] for name in param_names(n_layers)}


def _layer(p, i):
    return (p[f"gabor{i}.mu"], p[f"gabor{i}.gamma"], p[f"gabor{i}.omega"], p[f"gabor{i}.phi"])


def _forward(p, n_layers, pts, z, gabor=None):
    """Batched decoder at ``pts`` (a ``_Points``) with ``z`` (n, k) or a single (k,) code.

    ``gabor`` optionally supplies precomputed filter responses per layer.
    """
    cache = {"pts": pts, "z": z, "g": [], "gcache": [], "m": [], "pre": [None], "h": []}
    for i in range(n_layers):
        if gabor is None:
            g, gc = pts.gabor(*_layer(p, i))
        else:
            g, gc = gabor[i], None
        m = 1.0 + z @ p[f"mod{i}.weight"].T
        if i == 0:
            h = g * m
        else:
            pre = cache["h"][-1] @ p[f"linear{i - 1}.weight"].T + p[f"linear{i - 1}.bias"]
            cache["pre"].append(pre)
            h = pre * g * m
        cache["g"].append(g)
        cache["gcache"].append(gc)
        cache["m"].append(m)
        cache["h"].append(h)
    u = cache["h"][-1] @ p["head.weight"] + p["head.bias"]
    return u, cache


def _backward(p, n_layers, du, cache):
    """Gradients of ``sum(du * u)`` w.r.t. all parameters and the per-row latents."""
    grads = {}
    z = cache["z"]
    h_last = cache["h"][-1]
    grads["head.weight"] = du @ h_last
    grads["head.bias"] = np.asarray(du.sum())
    dh = du[:, None] * p["head.weight"][None, :]
    dz = np.zeros_like(z, dtype=np.float64)
    for i in reversed(range(n_layers)):
        g, m = cache["g"][i], cache["m"][i]
        if i == 0:
            dg = dh * m
            dm = dh * g
        else:
            pre = cache["pre"][i]
            gm = g * m
            dpre = dh * gm
            dg = dh * pre * m
            dm = dh * pre * g
            grads[f"linear{i - 1}.weight"] = dpre.T @ cache["h"][i - 1]
            grads[f"linear{i - 1}.bias"] = dpre.sum(axis=0)
            dh = dpre @ p[f"linear{i - 1}.weight"]
        a = p[f"mod{i}.weight"]
        if z.ndim == 1:
            grads[f"mod{i}.weight"] = np.outer(dm.sum(axis=0), z)
            dz = dz + a.T @ dm.sum(axis=0)
        else:
            grads[f"mod{i}.weight"] = dm.T @ z
            dz = dz + dm @ a
        gc = cache["gcache"][i]
        if gc is not None:
            for key, val in cache["pts"].gabor_backward(dg, p[f"gabor{i}.gamma"], gc).items():
                grads[f"gabor{i}.{key}"] = val
    return grads, dz


def _latent_jacobian(p, n_layers, z, gabor):
    """Forward-mode d u / d z for one shared code ``z`` at precomputed filter responses."""
    h = dh = None
    for i in range(n_layers):
        a = p[f"mod{i}.weight"]
        g = gabor[i]
        m = 1.0 + a @ z
        if i == 0:
            h = g * m
            dh = g[:, :, None] * a[None, :, :]
        else:
            w = p[f"linear{i - 1}.weight"]
            pre = h @ w.T + p[f"linear{i - 1}.bias"]
            dpre = np.einsum("ab,nbk->nak", w, dh)
            h = pre * g * m
            dh = dpre * (g * m)[:, :, None] + (pre * g)[:, :, None] * a[None, :, :]
    return np.einsum("h,nhk->nk", p["head.weight"], dh)


class _Adam:
    def __init__(self, lr, beta1, beta2, eps):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] = params[name] - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _validate_obs(obs):
    if not isinstance(obs, ObservationSet):
        raise TypeError(f"expected an ObservationSet, got {type(obs).__name__}")
    if len(obs) == 0:
        raise ValueError("observation set is empty")
    if not np.all(np.isfinite(obs.values)):
        raise ValueError("observation values must be finite")


class MMGN(RegressorMixin, BaseEstimator):
    """Field reconstructor: a latent table optimized jointly with a Gabor MFN decoder.

    Parameters
    ----------
    latent_dim : int
        Size ``k`` of each per-time-step latent code.
    hidden_dim : int
        Width ``h`` of every filter bank and hidden layer.
    n_layers : int
        Number ``L`` of Gabor layers; every layer is latent-modulated.
    epochs : int
        Full-batch Adam steps.
    learning_rate, beta1, beta2, eps : float
        Adam settings.
    latent_reg : float
        Weight of the ``mean_t |z_t|^2`` penalty.
    latent_init_std : float
        Standard deviation of the Normal latent initialization.
    lr_floor : float
        The learning rate follows a cosine decay to ``lr_floor * learning_rate``.
    freq_scale, gamma_scale : float
        Initialization scales of the filter frequencies and envelope widths.
    infer_iters : int
        Evaluation budget for test-time latent inference.
    random_state : int
        Seed for every random draw; fitting is deterministic given it.

    Attributes
    ----------
    params_ : dict of ndarray
        Decoder parameters in declaration order.
    latents_ : ndarray of shape (T, k)
        Learned latent code per time step.
    loss_history_ : list of float
        Total loss before each epoch's update.
    final_data_loss_ : float
        Observation MSE of the fitted model and latents.
    """

    def __init__(self, latent_dim=16, hidden_dim=64, n_layers=3, epochs=1500,
                 learning_rate=2e-3, beta1=0.9, beta2=0.999, eps=1e-8, latent_reg=1e-4,
                 latent_init_std=1e-2, lr_floor=0.01, freq_scale=4.0, gamma_scale=1.0, infer_iters=200,
                 random_state=0):
        self.latent_dim = latent_dim
        self.hidden_dim = hidden_dim
        self.n_layers = n_layers
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.latent_reg = latent_reg
        self.latent_init_std = latent_init_std
        self.lr_floor = lr_floor
        self.freq_scale = freq_scale
        self.gamma_scale = gamma_scale
        self.infer_iters = infer_iters
        self.random_state = random_state

    def _check_hyperparams(self):
        if self.latent_dim < 1 or self.hidden_dim < 1 or self.n_layers < 1:
            raise ValueError("latent_dim, hidden_dim and n_layers must be positive")
        if self.epochs < 0 or self.learning_rate <= 0:
            raise ValueError("epochs must be >= 0 and learning_rate > 0")
        if self.latent_reg < 0:
            raise ValueError("latent_reg must be >= 0")

    def init_params(self):
        """Fresh decoder parameters and latent table for ``self.random_state``."""
        rng = np.random.default_rng(self.random_state)
        params = _init_params(rng, self.n_layers, self.hidden_dim, self.latent_dim,
                              self.freq_scale, self.gamma_scale)
        return params, rng

    def fit(self, obs, y=None):
        """Jointly optimize the decoder and one latent code per frame of ``obs``."""
        _validate_obs(obs)
        self._check_hyperparams()
        params, rng = self.init_params()
        nt = obs.nt
        latents = rng.normal(0.0, self.latent_init_std, size=(nt, self.latent_dim))

        x = obs.coords()
        t_idx = obs.t
        y_obs = obs.values
        n = y_obs.size
        lam = self.latent_reg
        opt = _Adam(self.learning_rate, self.beta1, self.beta2, self.eps)
        pts = _Points(x)
        history = []
        state = dict(params)
        state["latents"] = latents
        for epoch in range(self.epochs):
            loss, grads = self._loss_and_grad(state, pts, t_idx, y_obs, n, nt, lam)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite training loss {loss!r} at epoch {epoch}")
            history.append(float(loss))
            opt.step(state, grads, self._lr_at(epoch))
            for i in range(self.n_layers):
                np.maximum(state[f"gabor{i}.gamma"], 0.0, out=state[f"gabor{i}.gamma"])

        self.latents_ = state.pop("latents")
        self.params_ = state
        self.loss_history_ = history
        self.n_frames_ = nt
        self.grid_shape_ = obs.dims[1:]
        self.final_data_loss_ = self.observation_mse(obs)
        return self

    def _lr_at(self, epoch):
        # cosine decay from learning_rate down to lr_floor * learning_rate
        frac = 0.5 * (1.0 + np.cos(np.pi * epoch / max(self.epochs, 1)))
        return self.learning_rate * (self.lr_floor + (1.0 - self.lr_floor) * frac)

    def _loss_and_grad(self, state, pts, t_idx, y_obs, n, nt, lam):
        z = state["latents"][t_idx]
        u, cache = _forward(state, self.n_layers, pts, z)
        resid = u - y_obs
        z_all = state["latents"]
        loss = np.dot(resid, resid) / n + lam * np.sum(z_all * z_all) / nt
        grads, dz = _backward(state, self.n_layers, 2.0 * resid / n, cache)
        dlat = np.zeros_like(z_all)
        np.add.at(dlat, t_idx, dz)
        grads["latents"] = dlat + 2.0 * lam * z_all / nt
        return loss, grads

    def loss_and_grad(self, obs, params=None, latents=None):
        """Training objective and its gradient (parameters plus ``"latents"``)."""
        state = dict(self.params_ if params is None else params)
        state["latents"] = self.latents_ if latents is None else latents
        return self._loss_and_grad(state, _Points(obs.coords()), obs.t, obs.values, len(obs), obs.nt,
                                   self.latent_reg)

    def decode(self, x, z):
        """Decoder output at coordinates ``x`` (n, 2) with codes ``z`` (n, k) or (k,)."""
        check_is_fitted(self, "params_")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        z = np.asarray(z, dtype=np.float64)
        if x.shape[1] != 2:
            raise ValueError("coordinates must have 2 columns")
        if z.shape[-1] != self.latent_dim or (z.ndim == 2 and z.shape[0] != x.shape[0]):
            raise ValueError(f"latent shape {z.shape} incompatible with {x.shape[0]} points, k={self.latent_dim}")
        u, _ = _forward(self.params_, self.n_layers, _Points(x), z)
        return u

    def predict(self, X):
        """Field values at rows ``(t, lat, lon)`` with ``t`` an integer frame index."""
        X = np.asarray(X, dtype=np.float64)
        t = X[:, 0].astype(np.int64)
        return self.decode(X[:, 1:3], self.latents_[t])

    def observation_mse(self, obs, latents=None):
        """Mean squared error of the decoder against every observation."""
        lat = self.latents_ if latents is None else latents
        resid = self.decode(obs.coords(), lat[obs.t]) - obs.values
        return float(np.dot(resid, resid) / resid.size)

    def score(self, X, y, sample_weight=None):
        return super().score(X, y, sample_weight=sample_weight)

    def reconstruct(self, dims=None, latents=None):
        """Evaluate the decoder on a full ``(nt, nlat, nlon)`` grid.

        ``dims`` defaults to the training grid; any resolution is allowed since
        the representation is continuous in space.
        """
        check_is_fitted(self, "params_")
        latents = self.latents_ if latents is None else np.asarray(latents, dtype=np.float64)
        if dims is None:
            dims = (self.n_frames_,) + tuple(self.grid_shape_)
        nt, nlat, nlon = (int(d) for d in dims)
        if latents.shape != (nt, self.latent_dim):
            raise ValueError(f"latents shape {latents.shape} does not match nt={nt}, k={self.latent_dim}")
        pts = _Points(grid_coords(nlat, nlon))
        gabor = [pts.gabor(*_layer(self.params_, i))[0] for i in range(self.n_layers)]
        out = np.empty((nt, nlat * nlon))
        for t in range(nt):
            out[t], _ = _forward(self.params_, self.n_layers, pts, latents[t], gabor=gabor)
        return out.reshape(nt, nlat, nlon)

    def infer_latent(self, frame, n_iter=None, latent_reg=None, init=None, random_state=None):
        """Fit a latent code to the observations of one frame with the decoder frozen.

        Minimizes ``mean((D(x, z) - u)^2) + latent_reg * |z|^2`` by
        Levenberg-Marquardt from a Normal(0, latent_init_std^2) start (or ``init``).
        """
        check_is_fitted(self, "params_")
        if len(frame) == 0:
            raise ValueError("observation set is empty")
        n_iter = self.infer_iters if n_iter is None else n_iter
        lam = self.latent_reg if latent_reg is None else latent_reg
        if init is None:
            seed = self.random_state if random_state is None else random_state
            rng = np.random.default_rng(seed)
            init = rng.normal(0.0, self.latent_init_std, size=self.latent_dim)
        z0 = np.array(init, dtype=np.float64)
        if n_iter == 0:
            return z0
        pts = _Points(frame.coords())
        y = frame.values
        n = y.size
        gabor = [pts.gabor(*_layer(self.params_, i))[0] for i in range(self.n_layers)]
        scale = 1.0 / np.sqrt(n)
        root_lam = np.sqrt(lam)

        def resid(z):
            u, _ = _forward(self.params_, self.n_layers, pts, z, gabor=gabor)
            return np.concatenate([(u - y) * scale, root_lam * z])

        def jac(z):
            jz = _latent_jacobian(self.params_, self.n_layers, z, gabor) * scale
            return np.vstack([jz, root_lam * np.eye(z.size)])

        method = "lm" if n + z0.size >= z0.size * 2 else "trf"
        sol = least_squares(resid, z0, jac=jac, method=method, max_nfev=max(n_iter, 1),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15)
        return sol.x


def decoder_forward(model, x, z):
    """Scalar decoder output ``D(x, z)`` for one coordinate and one latent code."""
    return float(model.decode(np.asarray(x, dtype=np.float64)[None, :], z)[0])


def train(obs, cfg=None, arch=None):
    """Functional wrapper: returns ``(model, latents, loss_history)``.

    ``arch`` is a mapping of MMGN architecture keywords (``latent_dim``,
    ``hidden_dim``, ``n_layers``, ...).
    """
    cfg = TrainConfig() if cfg is None else cfg
    arch = dict(arch or {})
    model = MMGN(epochs=cfg.epochs, learning_rate=cfg.learning_rate, beta1=cfg.beta1,
                 beta2=cfg.beta2, eps=cfg.eps, latent_reg=cfg.latent_reg,
                 latent_init_std=cfg.latent_init_std, lr_floor=cfg.lr_floor, random_state=cfg.seed, **arch)
    model.fit(obs)
    return model, model.latents_, model.loss_history_


def infer_latent(model, frame, cfg=None, **kwargs):
    if cfg is not None:
        kwargs.setdefault("latent_reg", cfg.latent_reg)
        kwargs.setdefault("random_state", cfg.seed)
    return model.infer_latent(frame, **kwargs)


def reconstruct_grid(model, latents, dims):
    return model.reconstruct(dims, latents)


def relative_error(pred, truth):
    """Relative L2 (Frobenius) error ``|pred - truth| / |truth|``."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    return float(np.linalg.norm(pred - truth) / np.linalg.norm(truth))


_ARCH_KEYS = ("latent_dim", "hidden_dim", "n_layers", "epochs", "learning_rate", "beta1",
              "beta2", "eps", "latent_reg", "latent_init_std", "lr_floor", "freq_scale", "gamma_scale",
              "infer_iters", "random_state")


def write_model(model, path):
    check_is_fitted(model, "params_")
    header = {"arch": {key: getattr(model, key) for key in _ARCH_KEYS},
              "k": model.latent_dim, "h": model.hidden_dim, "L": model.n_layers,
              "seed": model.random_state, "n_frames": model.n_frames_,
              "grid": list(model.grid_shape_)}
    payload = b"".join(
        np.asarray(model.params_[name], dtype="<f8").tobytes()
        for name, _ in param_shapes(model.n_layers, model.hidden_dim, model.latent_dim)
    )
    write_framed(path, MODEL_MAGIC, header, payload)


def read_model(path):
    header, payload = read_framed(path, MODEL_MAGIC)
    try:
        model = MMGN(**header["arch"])
        shapes = param_shapes(header["L"], header["h"], header["k"])
        n_frames, grid = header["n_frames"], tuple(header["grid"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: incomplete model header ({exc})") from None
    sizes = [int(np.prod(shape)) for _, shape in shapes]
    if len(payload) != 8 * sum(sizes):
        raise FormatError(f"{path}: expected {8 * sum(sizes)} payload bytes, found {len(payload)}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    params, pos = {}, 0
    for (name, shape), size in zip(shapes, sizes):
        params[name] = flat[pos : pos + size].reshape(shape).copy()
        pos += size
    model.params_ = params
    model.n_frames_ = n_frames
    model.grid_shape_ = grid
    return model


def write_latents(latents, path):
    latents = np.asarray(latents, dtype=np.float64)
    k = latents.shape[1]
    lines = ["t," + ",".join(f"z{j}" for j in range(k))]
    for t, row in enumerate(latents):
        lines.append(f"{t}," + ",".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_latents(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "t" or header[1:] != [f"z{j}" for j in range(len(header) - 1)]:
            raise FormatError(f"{path}: expected header 't,z0,...'")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise FormatError(f"{path}: no latent rows")
    ts = [int(r[0]) for r in rows]
    if ts != list(range(len(rows))):
        raise FormatError(f"{path}: time index must run 0..T-1 in order")
    return np.array([[float(v) for v in r[1:]] for r in rows])
