"""PhaseLift recovery of ``|f(t_n)|`` from masked Fourier magnitudes.

With diagonal 0/1 masks ``M_i`` and measurement vectors
``v_{i,omega}[n] = tau * M_i[n] * exp(-i omega t_n)``, the data are
``b_k = |v_k . f|^2 = <v_k v_k^*, f f^T>``, which is linear in the lifted
matrix ``X = f f^T``.  We solve

    min_{X >= 0}  sum_k (A(X)_k - b_k)^2 + lam * trace(X)

by accelerated proximal gradient: a gradient step on the quadratic, then
eigenvalue soft-thresholding with the PSD projection.  The source is real, so
``X`` is kept real symmetric.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .rng import substream

log = logging.getLogger(__name__)


@dataclass
class MaskSet:
    masks: np.ndarray
    seed: int = 0

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.masks, dtype=float))
        if not np.all(m[0] == 1.0):
            raise ValueError("the first mask must be the identity")
        if np.any(m.sum(axis=1) == 0):
            raise ValueError("every mask needs a nonzero entry")
        self.masks = m

    def __len__(self):
        return self.masks.shape[0]


def make_masks(length, N_m, seed):
    """Identity mask followed by ``N_m - 1`` Bernoulli(1/2) patterns."""
    if N_m < 1:
        raise ValueError("need at least one mask")
    masks = np.ones((N_m, length))
    for i in range(1, N_m):
        rng = substream(seed, "masks", i)
        row = rng.integers(0, 2, size=length)
        while not row.any():
            row = rng.integers(0, 2, size=length)
        masks[i] = row
    return MaskSet(masks, int(seed))


class MeasurementOperator:
    """Linear map ``f -> (v_{i,omega} . f)`` and its lifted counterpart on symmetric X."""

    def __init__(self, masks, t, tau, omegas):
        self.masks = masks if isinstance(masks, MaskSet) else MaskSet(masks)
        self.t = np.asarray(t, dtype=float)
        self.tau = float(tau)
        self.omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        kernel = self.tau * np.exp(-1j * np.outer(self.omegas, self.t))
        m = self.masks.masks
        if m.shape[1] != self.t.size:
            raise ValueError("mask length does not match the time grid")
        # rows ordered mask-major: k = i * n_omega + j
        self.vectors = (m[:, None, :] * kernel[None, :, :]).reshape(-1, self.t.size)
        self._stacked = np.concatenate([self.vectors.real, self.vectors.imag])
        self._norm_sq = None

    @property
    def shape(self):
        return len(self.masks), self.omegas.size

    @property
    def n(self):
        return self.t.size

    def apply(self, f):
        return self.vectors @ np.asarray(f)

    def lifted(self, X):
        """``A(X)_k = v_k^T X conj(v_k)`` for real symmetric X."""
        S = self._stacked
        q = np.einsum("kn,kn->k", S @ X, S)
        K = self.vectors.shape[0]
        return q[:K] + q[K:]

    def adjoint(self, r):
        """``sum_k r_k Re(conj(v_k) v_k^T)``."""
        S = self._stacked
        r2 = np.concatenate([r, r])
        G = S.T @ (r2[:, None] * S)
        return 0.5 * (G + G.T)

    def norm_sq(self, iters=100, seed=0):
        """Power-iteration estimate of the largest eigenvalue of ``A^* A``."""
        if self._norm_sq is None:
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((self.n, self.n))
            X = X + X.T
            X /= np.linalg.norm(X)
            lam = 0.0
            for _ in range(iters):
                Y = self.adjoint(self.lifted(X))
                new = np.linalg.norm(Y)
                X = Y / new
                if abs(new - lam) <= 1e-10 * new:
                    break
                lam = new
            self._norm_sq = new
        return self._norm_sq


def forward_magnitudes(op, f):
    """``|v_{i,omega} . f|`` arranged as ``(masks, frequencies)``."""
    f = np.asarray(f, dtype=float)
    if f.size != op.n:
        raise ValueError("signal length does not match the operator")
    return np.abs(op.apply(f)).reshape(op.shape)


@dataclass
class LiftedMatrix:
    X: np.ndarray
    converged: bool = True
    iterations: int = 0
    history: list = field(default_factory=list)
    eigvals: np.ndarray = None
    eigvecs: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.X)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise ValueError("lifted matrix must be square")
        scale = max(np.abs(X).max(), 1e-300)
        if np.abs(X - X.conj().T).max() > 1e-10 * scale:
            raise ValueError("lifted matrix must be Hermitian")
        self.X = 0.5 * (X + X.conj().T)
        if self.eigvals is None:
            self.eigvals, self.eigvecs = np.linalg.eigh(self.X)

    @property
    def is_psd(self):
        norm = max(abs(self.eigvals).max(), 1e-300)
        return self.eigvals.min() >= -1e-10 * norm


def psd_soft_threshold(Y, thresh):
    """Eigenvalues shifted down by ``thresh`` and clipped at zero."""
    Y = 0.5 * (Y + Y.T)
    w, Q = np.linalg.eigh(Y)
    w = np.maximum(w - thresh, 0.0)
    keep = w > 0
    Qk = Q[:, keep]
    return (Qk * w[keep]) @ Qk.T


def objective(op, X, b, lam):
    r = op.lifted(X) - b
    return float(r @ r + lam * np.trace(X))


def solve_phaselift(b, op, lam=None, max_iters=5000, tol=1e-10, X0=None, stages=3,
                    callback=None):
    """Accelerated proximal gradient with function-value restarts.

    ``lam`` is the trace weight of the last stage; by default it follows a
    continuation ``1e-3 ||b||, 1e-4 ||b||, ...`` over ``stages`` stages, each
    warm-started from the previous.  Passing a number runs a single stage with
    that weight.  Each stage stops when the relative objective decrease falls
    below ``tol`` or after ``max_iters`` iterations.
    """
    b = np.asarray(b, dtype=float).ravel()
    if b.size != op.vectors.shape[0]:
        raise ValueError(f"expected {op.vectors.shape[0]} measurements, got {b.size}")
    if np.any(b < 0):
        raise ValueError("squared magnitudes must be nonnegative")
    n = op.n
    X = np.zeros((n, n)) if X0 is None else np.array(X0, dtype=float)
    if X.shape != (n, n):
        raise ValueError("initial matrix has the wrong shape")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return LiftedMatrix(np.zeros((n, n)), True, 0, [0.0])
    if lam is None:
        schedule = [1e-3 * bnorm / 10**k for k in range(stages)]
    else:
        schedule = list(np.atleast_1d(lam))
    L = 2.0 * op.norm_sq()
    history = []
    converged = True
    total = 0
    for stage_lam in schedule:
        X, ok, its, hist = _apg(op, b, stage_lam, L, X, max_iters, tol, callback)
        converged &= ok
        total += its
        history.extend(hist)
        log.debug("phaselift stage lam=%.3e: %d iterations, objective %.6e",
                  stage_lam, its, hist[-1])
    return LiftedMatrix(X, converged, total, history)


def _apg(op, b, lam, L, X, max_iters, tol, callback):
    Y = X.copy()
    t = 1.0
    F = objective(op, X, b, lam)
    hist = [F]
    for it in range(1, max_iters + 1):
        grad = 2.0 * op.adjoint(op.lifted(Y) - b)
        Xn = psd_soft_threshold(Y - grad / L, lam / L)
        Fn = objective(op, Xn, b, lam)
        if Fn > F:
            # restart: drop momentum and take a plain proximal step from X
            t = 1.0
            grad = 2.0 * op.adjoint(op.lifted(X) - b)
            Xn = psd_soft_threshold(X - grad / L, lam / L)
            Fn = objective(op, Xn, b, lam)
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        Y = Xn + ((t - 1.0) / tn) * (Xn - X)
        decrease = F - Fn
        X, F, t = Xn, Fn, tn
        hist.append(F)
        if callback is not None:
            callback(it, X, F)
        if 0.0 <= decrease <= tol * max(F, 1e-300):
            return X, True, it, hist
    return X, False, max_iters, hist


def extract_signal(X, return_flag=False):
    """``|sqrt(lambda_1) v_1|`` from the leading eigenpair of a PSD lifted matrix."""
    lm = X if isinstance(X, LiftedMatrix) else LiftedMatrix(np.asarray(X))
    if not lm.is_psd:
        raise ValueError("lifted matrix is not positive semidefinite")
    w, Q = lm.eigvals, lm.eigvecs
    top = max(w[-1], 0.0)
    out = np.sqrt(top) * np.abs(Q[:, -1])
    if return_flag:
        tie = w.size > 1 and w[-2] >= (1.0 - 1e-8) * w[-1] and w[-1] > 0
        return out, bool(tie)
    return out
