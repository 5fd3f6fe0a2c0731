"""Fractional Brownian motion on the uniform grid ``x_m = m / M``.

Paths are built from fractional Gaussian noise sampled exactly by circulant
embedding (Davies-Harte).  Each path owns a Philox substream keyed by
``(seed, path_index)`` so ensembles are reproducible in any evaluation order.
"""
from dataclasses import dataclass
import csv

import numpy as np

from .frac_core import HurstIndex, _as_hurst
from .rng import substream


@dataclass(frozen=True)
class FbmPath:
    values: np.ndarray
    hurst: HurstIndex
    seed: int

    @property
    def M(self):
        return len(self.values) - 1


def covariance_oracle(H, x, y):
    """``E[B^H(x) B^H(y)] = (|x|^2H + |y|^2H - |x - y|^2H) / 2``."""
    H2 = 2.0 * _as_hurst(H).H
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 0.5 * (np.abs(x) ** H2 + np.abs(y) ** H2 - np.abs(x - y) ** H2)


def fgn_autocovariance(H, k):
    """Autocovariance of unit-step fractional Gaussian noise at integer lags ``k``."""
    H2 = 2.0 * H
    k = np.abs(np.asarray(k, dtype=float))
    return 0.5 * (np.abs(k + 1.0) ** H2 - 2.0 * k**H2 + np.abs(k - 1.0) ** H2)


def circulant_eigenvalues(H, M, max_doublings=8):
    """Eigenvalues of a nonnegative-definite circulant embedding of the fGn covariance.

    Starts from embedding length ``2 M`` and doubles until every eigenvalue is
    nonnegative up to roundoff.
    """
    L = M
    for _ in range(max_doublings + 1):
        gam = fgn_autocovariance(H, np.arange(L + 1))
        row = np.concatenate([gam, gam[-2:0:-1]])
        lam = np.fft.fft(row).real
        floor = -1e-10 * lam.max()
        if lam.min() >= floor:
            return np.clip(lam, 0.0, None)
        L *= 2
    raise RuntimeError(
        f"circulant embedding of fGn(H={H}) not nonnegative definite for M={M}"
    )


def _fgn_from_normals(lam, M, z):
    # z: (..., 2m) standard normals -> (..., M) exact fGn samples
    m = lam.size
    half = z.shape[-1] // 2
    w = z[..., :half] + 1j * z[..., half:]
    y = np.fft.fft(np.sqrt(lam / m) * w, axis=-1)
    return y[..., :M].real


def generate_fbm(H, M, seed, path_index=0):
    """One fBm path ``B^H(x_m)``, ``m = 0..M``, exact in distribution."""
    return generate_fbm_batch(H, M, seed, [path_index])[0]


def generate_fbm_batch(H, M, seed, path_indices):
    """Paths for several substream indices, returned as :class:`FbmPath` objects."""
    hurst = _as_hurst(H)
    values = fbm_values(hurst, M, seed, path_indices)
    return [FbmPath(v, hurst, int(seed)) for v in values]


def fbm_values(H, M, seed, path_indices, chunk=4096):
    """Array of shape ``(len(path_indices), M + 1)`` of fBm paths."""
    hurst = _as_hurst(H)
    M = int(M)
    if M < 2:
        raise ValueError("M must be at least 2")
    lam = circulant_eigenvalues(hurst.H, M)
    m = lam.size
    idx = list(path_indices)
    out = np.zeros((len(idx), M + 1))
    scale = (1.0 / M) ** hurst.H
    for start in range(0, len(idx), chunk):
        block = idx[start:start + chunk]
        z = np.stack([substream(seed, "fbm", p).standard_normal(2 * m) for p in block])
        inc = _fgn_from_normals(lam, M, z) * scale
        out[start:start + len(block), 1:] = np.cumsum(inc, axis=-1)
    return out


def fbm_increment_matrix(H, M, seed, n_paths, chunk=4096):
    """Increments ``delta B_m`` for paths ``0..n_paths-1``, shape ``(n_paths, M)``."""
    return np.diff(fbm_values(H, M, seed, range(n_paths), chunk=chunk), axis=-1)


def increments(path):
    """First differences ``B^H(x_{m+1}) - B^H(x_m)``."""
    values = path.values if isinstance(path, FbmPath) else np.asarray(path, dtype=float)
    return np.diff(values)


def write_path_csv(path, filename):
    """Dump a path as ``x,value`` rows."""
    M = path.M
    with open(filename, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "value"])
        for m, v in enumerate(path.values):
            writer.writerow([repr(m / M), repr(float(v))])

