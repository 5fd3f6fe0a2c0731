"""Experiment pipelines: forward ensembles, R(omega) tables and reconstructions.

Every output is a pure function of the configuration: randomness is drawn
from named substreams of ``master_seed`` (fBm paths, noise, masks).
"""
from contextlib import contextmanager
from dataclasses import dataclass, field
import logging
import math
import os
import time

import numpy as np

from .config import format_config
from .fbm import FbmPath, fbm_values, write_path_csv
from .fdm import boundary_projection, convolve_levels, impulse_response, level_weights
from .frac_core import QuadratureError, QuadratureSpec, compute_R
from .phaselift import (MeasurementOperator, extract_signal, make_masks,
                        solve_phaselift)
from .spectral import (FrequencyGrid, NoisySpec, add_noise, dft_boundary,
                       ensemble_variance, recover_fhat_abs)

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage, cfg, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}\n--- config ---\n{format_config(cfg)}")


@contextmanager
def _stage(name, cfg):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, cfg, exc) from exc


def _fmt(x):
    return repr(float(x))


def write_csv(path, header, columns):
    cols = [np.asarray(c) for c in columns]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_kv(path, items):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {_fmt(v) if isinstance(v, float) else v}\n")


def _outdir(cfg):
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def _quad(cfg):
    return QuadratureSpec(tail_cutoff=cfg.tail_cutoff)


def r_table(cfg, omegas):
    out = np.empty(len(omegas))
    for k, w in enumerate(omegas):
        try:
            out[k] = compute_R(cfg.orders, w, cfg.H, _quad(cfg))
        except QuadratureError as exc:
            raise QuadratureError(f"omega={w!r}: {exc}") from exc
    return out


def unit_level_traces(cfg, response=None):
    """Per-path boundary response ``y`` to a unit level-1 source; shape (P, N + 1).

    Paths use fBm substreams ``0 .. P - 1`` of ``master_seed``.
    """
    grid = cfg.grid
    if response is None:
        response = impulse_response(cfg.orders, grid)
    dB = np.diff(fbm_values(cfg.H, grid.M, cfg.master_seed, np.arange(cfg.P)), axis=1)
    return boundary_projection(response, dB)


def boundary_traces(cfg, f_samples, y=None):
    """``P`` noise-free traces ``u(0, t_n)`` for source samples ``f_samples``."""
    if y is None:
        y = unit_level_traces(cfg)
    return convolve_levels(level_weights(cfg.orders, f_samples, cfg.grid), y)


def run_direct(cfg):
    """Boundary ensemble ``ensemble.csv`` (one column per path) plus ``ensemble.meta``."""
    out = _outdir(cfg)
    with _stage("source", cfg):
        f = cfg.source_samples()
    with _stage("simulate", cfg):
        traces = boundary_traces(cfg, f)
        if not np.all(np.isfinite(traces)):
            bad = int(np.argmax(~np.all(np.isfinite(traces), axis=1)))
            raise FloatingPointError(f"non-finite trace for path {bad}")
    path = os.path.join(out, "ensemble.csv")
    with _stage("write", cfg):
        header = ["t"] + [f"path_{p}" for p in range(cfg.P)]
        write_csv(path, header, [cfg.grid.t, *traces])
        with open(os.path.join(out, "ensemble.meta"), "w") as fh:
            fh.write(format_config(cfg))
            fh.write(f"regime = {cfg.orders.regime}\n")
            fh.write(f"tau = {_fmt(cfg.grid.tau)}\n")
            fh.write(f"h = {_fmt(cfg.grid.h)}\n")
    return path, traces


def r_omega_grid(cfg, n_log=60):
    """``(omega, label)`` pairs: zero, a log-spaced sweep to ``100 pi`` and the cut-off nodes."""
    logs = np.logspace(-2, math.log10(100 * math.pi), n_log)
    cut = FrequencyGrid(cfg.W, cfg.N_omega).nodes
    omegas = np.concatenate([[0.0], logs, cut])
    labels = ["zero"] + ["log"] * logs.size + ["cutoff"] * cut.size
    return omegas, labels


def run_r_omega(cfg):
    out = _outdir(cfg)
    omegas, labels = r_omega_grid(cfg)
    with _stage("quadrature", cfg):
        R = r_table(cfg, omegas)
    path = os.path.join(out, "r_omega.csv")
    with open(path, "w") as fh:
        fh.write("grid,omega,R\n")
        for lab, w, r in zip(labels, omegas, R):
            fh.write(f"{lab},{_fmt(w)},{_fmt(r)}\n")
    return path, omegas, R


def run_fbm(cfg):
    """fBm paths on ``x_m = m / M``.

    ``fbm.csv`` holds path 0 as ``x,value`` rows; ``fbm_paths.csv`` holds all
    ``P`` paths, one column each.
    """
    out = _outdir(cfg)
    with _stage("fbm", cfg):
        vals = fbm_values(cfg.H, cfg.M, cfg.master_seed, np.arange(cfg.P))
    path = os.path.join(out, "fbm.csv")
    write_path_csv(FbmPath(vals[0], cfg.H, cfg.master_seed), path)
    write_csv(os.path.join(out, "fbm_paths.csv"), ["x"] + [f"path_{p}" for p in range(cfg.P)],
              [np.linspace(0.0, 1.0, cfg.M + 1), *vals])
    return path, vals


@dataclass
class Reconstruction:
    t: np.ndarray
    f_true: np.ndarray
    f_recon: np.ndarray
    omegas: np.ndarray
    fhat_recovered: np.ndarray      # (masks, frequencies)
    fhat_true: np.ndarray
    R: np.ndarray
    solver: object
    metrics: dict = field(default_factory=dict)


def relative_l2_error(f_recon, f_true):
    ref = np.linalg.norm(f_true)
    diff = np.linalg.norm(np.abs(f_recon) - np.abs(f_true))
    return float(diff / ref) if ref > 0 else float(diff)


def reconstruct(cfg, f_samples=None, R=None):
    """Run the full inverse pipeline in memory.

    Every mask reuses the same ``P`` fBm paths (a mask changes only the
    source); the traces get fresh multiplicative noise per mask, are
    transformed on the cut-off grid, and ``|f_hat|`` is read off the sample
    variance.  The squared magnitudes of all masks feed PhaseLift.
    """
    grid = cfg.grid
    with _stage("source", cfg):
        f = cfg.source_samples() if f_samples is None else np.asarray(f_samples, dtype=float)
    omegas = FrequencyGrid(cfg.W, cfg.N_omega).nodes
    with _stage("masks", cfg):
        masks = make_masks(grid.N + 1, cfg.N_m, cfg.master_seed)
    with _stage("quadrature", cfg):
        if R is None:
            R = r_table(cfg, omegas)
    noise = NoisySpec(cfg.epsilon, cfg.master_seed)
    recovered = np.empty((cfg.N_m, omegas.size))
    with _stage("simulate", cfg):
        y = unit_level_traces(cfg)
    for i, mask in enumerate(masks.masks):
        with _stage(f"simulate mask {i}", cfg):
            traces = boundary_traces(cfg, mask * f, y)
        with _stage(f"noise mask {i}", cfg):
            traces = add_noise(traces, noise, i)
        with _stage(f"variance mask {i}", cfg):
            V = ensemble_variance(dft_boundary(traces, grid, omegas))
            recovered[i] = recover_fhat_abs(V, R)
    with _stage("phaselift", cfg):
        op = MeasurementOperator(masks, grid.t, grid.tau, omegas)
        lams = [cfg.lambda_scale * 10.0**-k for k in range(cfg.lambda_stages)]
        b = recovered.ravel() ** 2
        lams = [lam * float(np.linalg.norm(b)) for lam in lams]
        sol = solve_phaselift(b, op, lam=lams, max_iters=cfg.max_iters, tol=cfg.tol)
    with _stage("extract", cfg):
        f_rec = extract_signal(sol)
    fhat_true = np.abs(op.apply(f)).reshape(op.shape)[0]
    metrics = {
        "rel_l2_error": relative_l2_error(f_rec, f),
        "phaselift_iterations": sol.iterations,
        "phaselift_converged": sol.converged,
        "phaselift_objective": float(sol.history[-1]),
        "fhat_rel_error": relative_l2_error(recovered[0], fhat_true),
    }
    return Reconstruction(grid.t, f, f_rec, omegas, recovered, fhat_true, R, sol, metrics)


def run_reconstruct(cfg):
    """Writes ``recon.csv``, ``fhat.csv``, ``solver.log`` and ``metrics.txt``."""
    out = _outdir(cfg)
    start = time.perf_counter()
    rec = reconstruct(cfg)
    elapsed = time.perf_counter() - start
    write_csv(os.path.join(out, "recon.csv"), ["t", "f_true_abs", "f_recon_abs"],
              [rec.t, np.abs(rec.f_true), rec.f_recon])
    write_csv(os.path.join(out, "fhat.csv"), ["omega", "fhat_abs_recovered", "fhat_abs_true"],
              [rec.omegas, rec.fhat_recovered[0], rec.fhat_true])
    with open(os.path.join(out, "solver.log"), "w") as fh:
        fh.write(f"# iterations = {rec.solver.iterations}\n")
        fh.write(f"# converged = {rec.solver.converged}\n")
        fh.write("iteration,objective\n")
        for k, F in enumerate(rec.solver.history):
            fh.write(f"{k},{_fmt(F)}\n")
    items = dict(rec.metrics)
    items["wall_seconds"] = round(elapsed, 3)
    write_kv(os.path.join(out, "metrics.txt"), items)
    return rec
