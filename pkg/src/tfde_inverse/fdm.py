"""Finite-difference schemes for the two-term time-fractional equation

    D_t^a1 u + D_t^a2 u - u_xx = F(x, t),   u_x(0, t) = 0,  u(1, t) = 0,

with zero initial data.  Sub-diffusive orders use the L1 formula with weights
``a_l``; super-diffusive orders use the L1-type formula at the half level
``n - 1/2`` with weights ``b_l`` and a Crank-Nicolson average of the
Laplacian.  Every step solves

    beta u_0 - 2 u_1               = w_0
    -u_{m-1} + beta u_m - u_{m+1}  = w_m,   m = 1..M-1  (u_M = 0),

where the first row carries the Neumann ghost value ``u_{-1} = u_1``.  The
stochastic source is ``F = f(t) dB^H/dx``, discretised as
``f(t_n) delta B_m / h``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma

from .fbm import FbmPath, fbm_increment_matrix
from .frac_core import FractionalOrders, HurstIndex, _as_hurst, _as_orders

REGIMES = ("SubSub", "SubSuper", "SuperSuper")


@dataclass(frozen=True)
class GridSpec:
    T: float
    N: int
    M: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if int(self.N) < 1 or int(self.M) < 2:
            raise ValueError("need N >= 1 and M >= 2")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "M", int(self.M))

    @property
    def tau(self):
        return self.T / self.N

    @property
    def h(self):
        return 1.0 / self.M

    @property
    def t(self):
        return self.tau * np.arange(self.N + 1)

    @property
    def x(self):
        return self.h * np.arange(self.M + 1)


@dataclass
class BoundaryEnsemble:
    traces: np.ndarray
    orders: FractionalOrders
    hurst: HurstIndex
    grid: GridSpec
    seed: int
    source: str = "custom"
    meta: dict = field(default_factory=dict)


def classify(orders):
    """Regime tag of a pair of orders, rejecting the cases without a scheme."""
    return _as_orders(orders).regime


def caputo_weights_a(alpha, L):
    """``a_l = (l + 1)^(1 - alpha) - l^(1 - alpha)`` for ``l = 0..L``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    l = np.arange(L + 1, dtype=float)
    return (l + 1.0) ** (1.0 - alpha) - l ** (1.0 - alpha)


def caputo_weights_b(alpha, L):
    """``b_l = (l + 1)^(2 - alpha) - l^(2 - alpha)`` for ``l = 0..L``."""
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    l = np.arange(L + 1, dtype=float)
    return (l + 1.0) ** (2.0 - alpha) - l ** (2.0 - alpha)


def _scale(alpha, grid):
    # h^2 / (tau^alpha Gamma(2 - alpha)) for sub orders, 2 h^2 / (tau^alpha Gamma(3 - alpha)) for super
    if alpha < 1.0:
        return grid.h**2 / (grid.tau**alpha * gamma(2.0 - alpha))
    return 2.0 * grid.h**2 / (grid.tau**alpha * gamma(3.0 - alpha))


def assemble_beta(regime, orders, grid):
    """Diagonal entry of the step matrix."""
    orders = _as_orders(orders)
    if regime != orders.regime:
        raise ValueError(f"regime {regime} inconsistent with orders {orders.orders}")
    # a_0 = b_0 = 1
    return 2.0 + sum(_scale(a, grid) for a in orders)


class _History:
    """Precomputed memory coefficients for one regime and grid."""

    def __init__(self, orders, grid):
        self.regime = orders.regime
        N = grid.N
        self.sub = []    # (scale, a weights) for orders in (0, 1)
        self.sup = []    # (scale, b weights) for orders in (1, 2)
        for a in orders:
            if a < 1.0:
                self.sub.append((_scale(a, grid), caputo_weights_a(a, N + 1)))
            else:
                self.sup.append((_scale(a, grid), caputo_weights_b(a, N + 1)))

    def rhs(self, n, U, forcing):
        """Right-hand side at level ``n`` given ``U[0..n-1]`` (shape (n, M, ...))."""
        if U.shape[0] != n:
            raise ValueError(f"history holds {U.shape[0]} levels, expected {n}")
        w = np.array(forcing, dtype=float, copy=True)
        prev = U[n - 1]
        if self.regime == "SubSub":
            for c, a in self.sub:
                if n >= 2:
                    # sum_{k=1}^{n-1} (a_{n-k-1} - a_{n-k}) u^k
                    k = np.arange(1, n)
                    coef = a[n - k - 1] - a[n - k]
                    w += c * np.tensordot(coef, U[1:n], axes=1)
            return w
        for c, a in self.sub:
            # average of the L1 formula at levels n and n-1
            w -= c * a[1] * prev
            if n >= 3:
                k = np.arange(1, n - 1)
                coef = a[n - k - 2] - a[n - k]
                w += c * np.tensordot(coef, U[1:n - 1], axes=1)
        for c, b in self.sup:
            w += c * b[0] * prev
            if n >= 2:
                k = np.arange(1, n)
                coef = b[n - k - 1] - b[n - k]
                w += c * np.tensordot(coef, U[1:n] - U[0:n - 1], axes=1)
        w += _explicit_laplacian(prev)
        return w


def _explicit_laplacian(u):
    # u_{m-1} - 2 u_m + u_{m+1} with u_{-1} = u_1 and u_M = 0
    lap = -2.0 * u
    lap[1:] += u[:-1]
    lap[:-1] += u[1:]
    lap[0] += u[1]
    return lap


def assemble_rhs(regime, orders, grid, history, f_samples, delta_B, n=None):
    """Right-hand side ``w^n`` of the step matrix for the stochastic source.

    ``history`` holds ``u^0..u^{n-1}`` as rows of length M (``u^0 = 0``);
    ``n`` defaults to ``len(history)``.
    """
    orders = _as_orders(orders)
    if regime != orders.regime:
        raise ValueError(f"regime {regime} inconsistent with orders {orders.orders}")
    U = np.asarray(history, dtype=float)
    n = U.shape[0] if n is None else n
    delta_B = np.asarray(delta_B, dtype=float)
    if delta_B.shape[0] != grid.M:
        raise ValueError("delta_B must have length M")
    f = np.asarray(f_samples, dtype=float)
    hist = _History(orders, grid)
    forcing = _level_weights(regime, f, grid)[n] * delta_B
    return hist.rhs(n, U, forcing)


def _level_weights(regime, f, grid):
    """Factor ``phi_n`` such that the source term of ``w^n`` is ``phi_n * delta B``."""
    f = np.asarray(f, dtype=float)
    phi = np.zeros_like(f)
    if regime == "SubSub":
        phi[1:] = grid.h * f[1:]
    else:
        phi[1:] = grid.h * (f[1:] + f[:-1])
    return phi


def tridiag_factor(beta, M):
    """Forward-elimination multipliers for the step matrix of size M."""
    if not beta > 2.0:
        raise ValueError(f"beta must exceed 2 for a nonsingular step matrix, got {beta}")
    cp = np.empty(M)
    denom = np.empty(M)
    denom[0] = beta
    cp[0] = -2.0 / beta
    for m in range(1, M):
        denom[m] = beta + cp[m - 1]
        if denom[m] == 0.0:
            raise ZeroDivisionError(f"zero pivot in row {m}")
        cp[m] = -1.0 / denom[m]
    return cp, denom


def tridiag_solve(beta, rhs, factor=None):
    """Thomas algorithm for the step matrix; ``rhs`` may carry trailing batch axes."""
    b = np.asarray(rhs, dtype=float)
    M = b.shape[0]
    cp, denom = factor if factor is not None else tridiag_factor(beta, M)
    d = np.empty_like(b)
    d[0] = b[0] / denom[0]
    for m in range(1, M):
        d[m] = (b[m] + d[m - 1]) / denom[m]
    x = np.empty_like(b)
    x[-1] = d[-1]
    for m in range(M - 2, -1, -1):
        x[m] = d[m] - cp[m] * x[m + 1]
    return x


def step_matrix(beta, M):
    """Dense step matrix, for checks."""
    A = beta * np.eye(M) - np.eye(M, k=1) - np.eye(M, k=-1)
    A[0, 1] = -2.0
    return A


def march(orders, grid, forcing):
    """Run the scheme for a given right-hand-side source.

    ``forcing`` has shape ``(N + 1, M, ...)``: row ``n`` is added to ``w^n``
    (row 0 is ignored).  Returns the full field ``U`` of shape
    ``(N + 1, M, ...)``; ``u_M = 0`` is implicit.
    """
    orders = _as_orders(orders)
    regime = orders.regime
    forcing = np.asarray(forcing, dtype=float)
    if forcing.shape[0] != grid.N + 1 or forcing.shape[1] != grid.M:
        raise ValueError("forcing must have shape (N + 1, M, ...)")
    beta = assemble_beta(regime, orders, grid)
    factor = tridiag_factor(beta, grid.M)
    hist = _History(orders, grid)
    U = np.zeros(forcing.shape)
    for n in range(1, grid.N + 1):
        w = hist.rhs(n, U[:n], forcing[n])
        U[n] = tridiag_solve(beta, w, factor)
    return U


def manufactured_forcing(orders, grid, g):
    """Forcing rows for a smooth deterministic source ``g(x, t)``."""
    orders = _as_orders(orders)
    x = grid.x[:-1]
    t = grid.t
    G = g(x[None, :], t[:, None])
    out = np.zeros_like(G)
    if orders.regime == "SubSub":
        out[1:] = grid.h**2 * G[1:]
    else:
        out[1:] = grid.h**2 * (G[1:] + G[:-1])
    return out


def solve_forward(orders, grid, f_samples, path):
    """Boundary trace ``u_0^n``, ``n = 0..N``, for source ``f`` and one fBm path."""
    orders = _as_orders(orders)
    f = _check_source(f_samples, grid)
    dB = np.diff(path.values) if isinstance(path, FbmPath) else np.asarray(path, dtype=float)
    if dB.shape[0] != grid.M:
        raise ValueError(f"path resolution {dB.shape[0]} does not match M={grid.M}")
    phi = _level_weights(orders.regime, f, grid)
    U = march(orders, grid, phi[:, None] * dB[None, :])
    return U[:, 0].copy()


def _check_source(f_samples, grid):
    f = np.asarray(f_samples, dtype=float)
    if f.shape != (grid.N + 1,):
        raise ValueError(f"source samples must have length N + 1 = {grid.N + 1}")
    if f[0] != 0.0:
        raise ValueError("the source must vanish at t = 0")
    return f


def impulse_response(orders, grid):
    """Boundary response to a unit forcing ``e_m`` at level 1, shape ``(N + 1, M)``.

    The scheme is linear with coefficients depending only on ``n - k``, so a
    forcing applied first at level ``j`` produces the same response delayed by
    ``j - 1`` steps.
    """
    forcing = np.zeros((grid.N + 1, grid.M, grid.M))
    forcing[1] = np.eye(grid.M)
    return march(orders, grid, forcing)[:, 0, :]


def boundary_projection(response, dB):
    """``y[p, n] = sum_m response[n, m] dB[p, m]``: trace of a unit level-1 source per path."""
    return np.asarray(dB) @ response.T


def convolve_levels(phi, y):
    """``trace[n] = sum_{j=1}^{n} phi_j y[n - j + 1]`` for stacked ``y`` (P, N + 1)."""
    y = np.atleast_2d(y)
    N1 = y.shape[-1]
    traces = np.zeros(y.shape)
    if N1 < 2:
        return traces
    if N1 <= 256:
        for j in range(1, N1):
            if phi[j] != 0.0:
                traces[:, j:] += phi[j] * y[:, 1:N1 - j + 1]
        return traces
    # long records: same causal sum through an FFT
    full = fftconvolve(y[:, 1:], np.asarray(phi, dtype=float)[None, 1:], axes=-1)
    traces[:, 1:] = full[:, :N1 - 1]
    return traces


def superpose(response, phi, dB):
    """Boundary traces for level weights ``phi`` and increments ``dB`` (P x M)."""
    return convolve_levels(phi, boundary_projection(response, dB))


def level_weights(orders, f_samples, grid):
    """Source factor ``phi_n`` of each level for the regime of ``orders``."""
    return _level_weights(_as_orders(orders).regime, f_samples, grid)


def simulate_ensemble(orders, grid, f_samples, H, P, master_seed, method="superpose",
                      source="custom", increments=None):
    """``P`` boundary traces; path ``p`` uses fBm substream ``(master_seed, p)``.

    ``method="march"`` runs the scheme with all paths as simultaneous
    right-hand sides; ``"superpose"`` convolves the precomputed impulse
    response, which is algebraically identical and much cheaper.
    """
    orders = _as_orders(orders)
    hurst = _as_hurst(H)
    if P < 1:
        raise ValueError("P must be at least 1")
    f = _check_source(f_samples, grid)
    dB = fbm_increment_matrix(hurst, grid.M, master_seed, P) if increments is None else increments
    phi = _level_weights(orders.regime, f, grid)
    if method == "superpose":
        traces = superpose(impulse_response(orders, grid), phi, dB)
    elif method == "march":
        forcing = phi[:, None, None] * dB.T[None, :, :]
        traces = march(orders, grid, forcing)[:, 0, :].T.copy()
    else:
        raise ValueError(f"unknown method {method!r}")
    bad = ~np.all(np.isfinite(traces), axis=1)
    if np.any(bad):
        raise FloatingPointError(f"non-finite trace for path {int(np.argmax(bad))}")
    return BoundaryEnsemble(traces, orders, hurst, grid, int(master_seed), source)
