"""Synthetic spatiotemporal fields, sparse observation sampling and field files."""

from dataclasses import dataclass, field

import numpy as np

from ._framing import FormatError, read_framed, write_framed
from ._validation import check_tensor3

__all__ = [
    "WaveComponent",
    "FieldConfig",
    "ObservationSet",
    "grid_coords",
    "generate_field",
    "sample_observations",
    "write_field",
    "read_field",
    "write_observations",
    "read_observations",
    "write_attribution",
    "read_attribution",
]

FIELD_MAGIC = b"FLD1"
_OBS_DTYPE = np.dtype([("t", "<u4"), ("i", "<u4"), ("j", "<u4"), ("value", "<f8")])


@dataclass(frozen=True)
class WaveComponent:
    """One traveling wave ``A sin(k_lat*phi + k_lon*lam - omega*t + phase)``."""

    amplitude: float
    wavevector: tuple
    omega: float
    phase: float = 0.0


def _default_waves():
    return (
        WaveComponent(1.0, (1.5, 2.0), 2 * np.pi / 24, 0.3),
        WaveComponent(0.6, (-2.5, 3.0), 2 * np.pi / 16, 1.1),
        WaveComponent(0.35, (3.5, -1.5), 2 * np.pi / 48, 2.0),
    )


@dataclass(frozen=True)
class FieldConfig:
    nlat: int = 32
    nlon: int = 64
    nt: int = 48
    waves: tuple = field(default_factory=_default_waves)
    gradient: float = 0.8
    seasonal_amplitude: float = 0.5
    seasonal_period: int = 12
    noise_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.nlat < 4 or self.nlon < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.nlat}x{self.nlon}")
        if self.nt < 2:
            raise ValueError(f"need at least 2 time steps, got {self.nt}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.seasonal_period <= 0:
            raise ValueError("seasonal_period must be positive")
        waves = tuple(w if isinstance(w, WaveComponent) else WaveComponent(*w) for w in self.waves)
        object.__setattr__(self, "waves", waves)

    @property
    def dims(self):
        return (self.nt, self.nlat, self.nlon)


def grid_coords(nlat, nlon):
    """Normalized node coordinates in [-1, 1]^2, shape ``(nlat*nlon, 2)`` row-major."""
    lat = np.linspace(-1.0, 1.0, nlat)
    lon = np.linspace(-1.0, 1.0, nlon)
    phi, lam = np.meshgrid(lat, lon, indexing="ij")
    return np.stack([phi.ravel(), lam.ravel()], axis=1)


def generate_field(cfg):
    """Evaluate the configured field on its grid; deterministic given ``cfg``."""
    nt, nlat, nlon = cfg.dims
    phi = np.linspace(-1.0, 1.0, nlat)[None, :, None]
    lam = np.linspace(-1.0, 1.0, nlon)[None, None, :]
    t = np.arange(nt, dtype=np.float64)[:, None, None]

    u = np.zeros((nt, nlat, nlon))
    for w in cfg.waves:
        k_lat, k_lon = w.wavevector
        u += w.amplitude * np.sin(k_lat * phi + k_lon * lam - w.omega * t + w.phase)
    u += cfg.gradient * phi
    # reduce t modulo the period so the seasonal cycle repeats bit-for-bit
    season = np.arange(nt) % cfg.seasonal_period
    u += cfg.seasonal_amplitude * np.sin(2 * np.pi * season / cfg.seasonal_period)[:, None, None]
    if cfg.noise_std > 0:
        rng = np.random.default_rng(cfg.seed)
        u += rng.normal(0.0, cfg.noise_std, size=u.shape)
    return u


@dataclass
class ObservationSet:
    """Sparse per-frame measurements ``u^i_t`` at grid nodes ``(i, j)``.

    Rows are grouped by frame in ascending ``t``; within a frame they are in
    ascending flat grid index.
    """

    t: np.ndarray
    i: np.ndarray
    j: np.ndarray
    values: np.ndarray
    rate: float
    dims: tuple

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.i = np.asarray(self.i, dtype=np.int64)
        self.j = np.asarray(self.j, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.dims = tuple(int(d) for d in self.dims)
        n = self.values.shape[0]
        if not (self.t.shape == self.i.shape == self.j.shape == (n,)):
            raise ValueError("t, i, j and values must be 1-D arrays of equal length")

    def __len__(self):
        return self.values.shape[0]

    @property
    def nt(self):
        return self.dims[0]

    def coords(self):
        """Normalized (lat, lon) coordinates of every observation."""
        _, nlat, nlon = self.dims
        return np.stack([
            -1.0 + 2.0 * self.i / (nlat - 1),
            -1.0 + 2.0 * self.j / (nlon - 1),
        ], axis=1)

    def frame(self, t):
        """The sub-set of observations taken at time step ``t``."""
        sel = self.t == t
        return ObservationSet(self.t[sel], self.i[sel], self.j[sel], self.values[sel],
                              self.rate, self.dims)

    def counts(self):
        return np.bincount(self.t, minlength=self.nt)


def sample_observations(field, rate, seed=0):
    """Draw ``floor(rate * nlat * nlon)`` distinct grid points independently per frame."""
    field = check_tensor3(field, "field")
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    nt, nlat, nlon = field.shape
    npts = nlat * nlon
    count = int(np.floor(rate * npts))
    if count < 1:
        raise ValueError(f"rate {rate} yields no observations on a {nlat}x{nlon} grid")
    rng = np.random.default_rng(seed)
    flat = np.empty((nt, count), dtype=np.int64)
    for t in range(nt):
        flat[t] = np.sort(rng.choice(npts, size=count, replace=False))
    t_idx = np.repeat(np.arange(nt), count)
    i_idx, j_idx = np.divmod(flat.ravel(), nlon)
    values = field[t_idx, i_idx, j_idx]
    return ObservationSet(t_idx, i_idx, j_idx, values, float(rate), field.shape)


def write_field(t, path):
    t = check_tensor3(t)
    header = {"dims": list(t.shape), "dtype": "f64", "order": "t-major"}
    write_framed(path, FIELD_MAGIC, header, t.astype("<f8").tobytes())


def _payload_array(path, payload, dtype, count):
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"{path}: header implies {count * dtype.itemsize} payload bytes, found {len(payload)}"
        )
    return np.frombuffer(payload, dtype=dtype).copy()


def _dims(path, header, n):
    dims = header.get("dims")
    if not isinstance(dims, list) or len(dims) != n or any(
        not isinstance(d, int) or d < 1 for d in dims
    ):
        raise FormatError(f"{path}: bad dims {dims!r}")
    return tuple(dims)


def read_field(path):
    header, payload = read_framed(path, FIELD_MAGIC)
    if header.get("type", "field") != "field" or header.get("dtype") != "f64":
        raise FormatError(f"{path}: not an f64 field file")
    dims = _dims(path, header, 3)
    data = _payload_array(path, payload, np.dtype("<f8"), int(np.prod(dims)))
    return data.astype(np.float64).reshape(dims)


def write_observations(obs, path):
    rec = np.empty(len(obs), dtype=_OBS_DTYPE)
    rec["t"], rec["i"], rec["j"], rec["value"] = obs.t, obs.i, obs.j, obs.values
    header = {"type": "obs", "rate": obs.rate, "dims": list(obs.dims)}
    write_framed(path, FIELD_MAGIC, header, rec.tobytes())


def read_observations(path):
    header, payload = read_framed(path, FIELD_MAGIC)
    if header.get("type") != "obs":
        raise FormatError(f"{path}: not an observation file")
    dims = _dims(path, header, 3)
    if len(payload) % _OBS_DTYPE.itemsize:
        raise FormatError(f"{path}: payload is not a whole number of records")
    rec = _payload_array(path, payload, _OBS_DTYPE, len(payload) // _OBS_DTYPE.itemsize)
    return ObservationSet(rec["t"], rec["i"], rec["j"], rec["value"], float(header["rate"]), dims)


def write_attribution(grid, path):
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.min(initial=0) < 0:
        raise ValueError("attribution map must be a 2-D grid of nonnegative indices")
    header = {"type": "attr", "dtype": "u32", "dims": list(grid.shape)}
    write_framed(path, FIELD_MAGIC, header, grid.astype("<u4").tobytes())


def read_attribution(path):
    header, payload = read_framed(path, FIELD_MAGIC)
    if header.get("type") != "attr" or header.get("dtype") != "u32":
        raise FormatError(f"{path}: not an attribution map file")
    dims = _dims(path, header, 2)
    data = _payload_array(path, payload, np.dtype("<u4"), int(np.prod(dims)))
    return data.astype(np.int64).reshape(dims)
