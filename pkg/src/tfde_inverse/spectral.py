"""From boundary traces to phaseless Fourier modes of the source.

Boundary data ``u(0, t_n)`` are contaminated multiplicatively, transformed
with a ``tau``-weighted DFT at nodes ``0 <= omega <= W``, and the source
magnitude is read off the variance identity

    Var[u_hat(0, omega)] = R(omega) |f_hat(omega)|^2.

Restricting ``omega`` to ``[0, W]`` is the spectral cut-off.
"""
from dataclasses import dataclass

import numpy as np

from .rng import substream


@dataclass(frozen=True)
class NoisySpec:
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon >= 0.0:
            raise ValueError("noise level must be nonnegative")


@dataclass(frozen=True)
class FrequencyGrid:
    W: float
    count: int = 64

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("frequency count must be positive")
        if not self.W >= 0.0:
            raise ValueError("cut-off W must be nonnegative")

    @property
    def nodes(self):
        if self.count == 1:
            return np.array([0.0])
        return np.linspace(0.0, self.W, self.count)


@dataclass
class PhaselessModes:
    omegas: np.ndarray
    magnitudes: np.ndarray      # (masks, frequencies)

    def __post_init__(self):
        mags = np.atleast_2d(np.asarray(self.magnitudes, dtype=float))
        if np.any(~np.isfinite(mags)) or np.any(mags < 0):
            raise ValueError("phaseless modes must be finite and nonnegative")
        self.magnitudes = mags


def add_noise(trace, spec, *index):
    """``u (1 + eps * eta)`` with ``eta ~ U[-1, 1]`` i.i.d., drawn from noise substream ``index``.

    ``trace`` may be a single trace or a ``(P, N + 1)`` stack; each row gets
    fresh draws.
    """
    u = np.asarray(trace, dtype=float)
    if spec.epsilon == 0.0:
        return u.copy()
    eta = substream(spec.seed, "noise", *index).uniform(-1.0, 1.0, size=u.shape)
    return u * (1.0 + spec.epsilon * eta)


def dft_matrix(t, omegas, tau):
    """``tau * exp(-i omega t_n)`` as an ``(n_omega, N + 1)`` matrix."""
    return tau * np.exp(-1j * np.outer(np.atleast_1d(omegas), t))


def dft_boundary(trace, grid, omega):
    """``tau * sum_n u_n exp(-i omega t_n)``; vectorised over stacked traces and omega arrays."""
    u = np.asarray(trace, dtype=float)
    K = dft_matrix(grid.t, omega, grid.tau)
    out = u @ K.T
    if np.ndim(omega) == 0:
        out = out[..., 0]
    return out


def ensemble_variance(samples, axis=0):
    """Unbiased complex sample variance ``sum |z - mean|^2 / (P - 1)``."""
    z = np.asarray(samples)
    P = z.shape[axis]
    if P < 2:
        raise ValueError("need at least two samples for a variance")
    dev = z - z.mean(axis=axis, keepdims=True)
    return np.sum(np.abs(dev) ** 2, axis=axis) / (P - 1)


def variance_standard_error(samples, axis=0):
    """Standard error of :func:`ensemble_variance` from the spread of ``|z - mean|^2``."""
    z = np.asarray(samples)
    P = z.shape[axis]
    d2 = np.abs(z - z.mean(axis=axis, keepdims=True)) ** 2
    return np.std(d2, axis=axis, ddof=1) / np.sqrt(P)


def recover_fhat_abs(variances, r_values):
    """``sqrt(Var / R)`` per frequency node."""
    v = np.asarray(variances, dtype=float)
    r = np.asarray(r_values, dtype=float)
    if v.shape[-1] != r.shape[-1]:
        raise ValueError("variances and R values differ in length")
    if np.any(~(r > 0.0)):
        raise ValueError("R(omega) must be strictly positive; check the quadrature")
    if np.any(v < 0.0):
        raise ValueError("variances must be nonnegative")
    return np.sqrt(v / r)


def perturbation_gain(variance, r_value, delta):
    """Change in ``sqrt(V / R)`` caused by adding ``delta`` to ``V``."""
    return np.sqrt((variance + delta) / r_value) - np.sqrt(variance / r_value)
