"""Exact simulation of d-dimensional fBm on the uniform grid, three ways.

* circulant: Davies-Harte FFT embedding of the stationary increment
  sequence; exact joint law, O(n log n) per path. The embedding of fBm
  increments is nonnegative definite in theory; a small relative tolerance
  absorbs roundoff, with automatic fallback to cholesky.
* cholesky: lower factor of the increment covariance, exact joint law,
  O(n^2) per path after an O(n^3) factorization (cached per (n, hurst)).
* volterra: moving average of Brownian increments against the cell
  averages of the fBm kernel; biased by the grid discretization of the
  kernel integral, but it is the only method that exposes the driving
  Brownian path alongside the fBm path.

All methods draw their Gaussians from the per-(seed, replicate, component)
counter-based streams of RngStream, so replicates can be generated in any
order or in parallel with bit-identical results.
"""

from __future__ import annotations

import functools

import numpy as np

from .fracops import kernel_cell_averages
from .model import FbmModel, PathMatrix, RngStream

METHODS = ("circulant", "cholesky", "volterra")

# Relative eigenvalue tolerance for the circulant embedding.
EIG_TOLERANCE = 1e-10


class CirculantEmbeddingError(RuntimeError):
    """Circulant eigenvalues fell below the tolerance; caller should fall
    back to the cholesky method."""


class CovarianceFactorizationError(RuntimeError):
    """Increment covariance failed the Cholesky factorization; indicates a
    covariance implementation bug, not a recoverable condition."""


def fbm_covariance(s, t, hurst):
    """Covariance of one fBm component, (s^2h + t^2h - |t-s|^2h)/2."""
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {hurst!r}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0.0) or np.any(t < 0.0):
        raise ValueError("covariance times must be nonnegative")
    h2 = 2.0 * hurst
    out = 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(k, hurst, dt):
    """Autocovariance of fBm increments at lag k on a grid with step dt."""
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {hurst!r}")
    if dt <= 0.0:
        raise ValueError("step dt must be positive")
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("lag must be nonnegative")
    h2 = 2.0 * hurst
    out = 0.5 * dt**h2 * (np.abs(k + 1) ** h2 - 2.0 * np.abs(k) ** h2 + np.abs(k - 1) ** h2)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# cached per-(n, hurst) structure on the unit-step grid
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _circulant_amplitudes(n: int, hurst: float):
    """sqrt eigenvalue amplitudes of the 2n circulant embedding, unit step.

    Returns (amp_real, amp_pair): multipliers for the two real frequencies
    (0 and n) and the conjugate pairs, already divided by the FFT size.
    Raises CirculantEmbeddingError when an eigenvalue is below
    -EIG_TOLERANCE relative to the largest one.
    """
    m = 2 * n
    row = fgn_autocovariance(np.arange(n + 1), hurst, 1.0)
    circ = np.concatenate([row, row[-2:0:-1]])
    lam = np.fft.fft(circ).real
    floor = -EIG_TOLERANCE * lam.max()
    if lam.min() < floor:
        raise CirculantEmbeddingError(
            f"circulant eigenvalue {lam.min():.3e} below tolerance {floor:.3e} "
            f"for n={n}, hurst={hurst}"
        )
    lam = np.maximum(lam, 0.0)
    amp_real = np.sqrt(lam[[0, n]] / m)
    amp_pair = np.sqrt(lam[1:n] / (2.0 * m))
    amp_real.flags.writeable = False
    amp_pair.flags.writeable = False
    return amp_real, amp_pair


@functools.lru_cache(maxsize=32)
def _fgn_cholesky_factor(n: int, hurst: float) -> np.ndarray:
    """Lower Cholesky factor of the unit-step increment covariance."""
    lags = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    cov = fgn_autocovariance(lags, hurst, 1.0)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise CovarianceFactorizationError(
            f"increment covariance is not positive definite for n={n}, "
            f"hurst={hurst}: {exc}"
        ) from exc
    L.flags.writeable = False
    return L


def volterra_weights(model: FbmModel) -> np.ndarray:
    """Lower-triangular map from Brownian increments to fBm values,
    B[t_i] = sum_j w[i, j] dW_j with w the cell averages of the kernel."""
    return kernel_cell_averages(model.n, model.hurst) * model.dt ** (model.hurst - 0.5)


# ---------------------------------------------------------------------------
# batch sampling (replicate ranges); single-path API wraps batch of one
# ---------------------------------------------------------------------------


def _normals(model: FbmModel, seed: int, rep_lo: int, rep_hi: int, count: int) -> np.ndarray:
    """Standard normals of shape (reps, d, count), one stream per
    (seed, replicate, component), drawn in a fixed order."""
    reps = rep_hi - rep_lo
    out = np.empty((reps, model.d, count))
    stream = RngStream(seed)
    for k in range(reps):
        child = stream.child(rep_lo + k)
        for c in range(model.d):
            out[k, c] = child.generator(c).standard_normal(count)
    return out


def sample_fbm_batch(model: FbmModel, method: str, seed: int, rep_lo: int, rep_hi: int) -> np.ndarray:
    """fBm values of shape (reps, d, n+1) for replicates [rep_lo, rep_hi)."""
    if method == "circulant":
        try:
            return _sample_circulant(model, seed, rep_lo, rep_hi)
        except CirculantEmbeddingError:
            return _sample_cholesky(model, seed, rep_lo, rep_hi)
    if method == "cholesky":
        return _sample_cholesky(model, seed, rep_lo, rep_hi)
    if method == "volterra":
        return _sample_volterra(model, seed, rep_lo, rep_hi)[0]
    raise ValueError(f"unknown simulation method {method!r}; expected one of {METHODS}")


def _paths_from_increments(inc: np.ndarray) -> np.ndarray:
    reps, d, n = inc.shape
    out = np.zeros((reps, d, n + 1))
    np.cumsum(inc, axis=-1, out=out[:, :, 1:])
    return out


def _sample_circulant(model, seed, rep_lo, rep_hi) -> np.ndarray:
    n = model.n
    amp_real, amp_pair = _circulant_amplitudes(n, model.hurst)
    scale = model.dt**model.hurst
    a = _normals(model, seed, rep_lo, rep_hi, 2 * n)
    m = 2 * n
    w = np.zeros(a.shape[:-1] + (m,), dtype=complex)
    w[..., 0] = scale * amp_real[0] * a[..., 0]
    w[..., n] = scale * amp_real[1] * a[..., 1]
    if n > 1:
        pair = scale * amp_pair * (a[..., 2:2 * n:2] + 1j * a[..., 3:2 * n:2])
        w[..., 1:n] = pair
        w[..., n + 1 :] = np.conj(pair[..., ::-1])
    inc = np.fft.fft(w, axis=-1).real[..., :n]
    return _paths_from_increments(inc)


def _sample_cholesky(model, seed, rep_lo, rep_hi) -> np.ndarray:
    L = _fgn_cholesky_factor(model.n, model.hurst)
    a = _normals(model, seed, rep_lo, rep_hi, model.n)
    inc = a @ (model.dt**model.hurst * L).T
    return _paths_from_increments(inc)


def _sample_volterra(model, seed, rep_lo, rep_hi):
    """Returns (fbm_paths, brownian_paths), both (reps, d, n+1)."""
    a = _normals(model, seed, rep_lo, rep_hi, model.n)
    dw = np.sqrt(model.dt) * a
    wiener = _paths_from_increments(dw)
    if model.hurst == 0.5:
        return wiener.copy(), wiener  # kernel is identically 1
    weights = volterra_weights(model)
    fbm = np.zeros_like(wiener)
    fbm[:, :, 1:] = dw @ weights.T
    return fbm, wiener


def simulate_fbm(model: FbmModel, method: str, rng: RngStream) -> PathMatrix:
    """One exact (circulant/cholesky) or kernel-discretized (volterra)
    d-dimensional fBm path for the given replicate stream."""
    values = sample_fbm_batch(model, method, rng.master_seed, rng.replicate_index,
                              rng.replicate_index + 1)[0]
    return PathMatrix.wrap(values, model)


def simulate_volterra_pair(model: FbmModel, rng: RngStream):
    """(fBm path, driving Brownian path) from the moving-average method."""
    fbm, wiener = _sample_volterra(model, rng.master_seed, rng.replicate_index,
                                   rng.replicate_index + 1)
    return PathMatrix.wrap(fbm[0], model), PathMatrix.wrap(wiener[0], model)


def add_drift(path: PathMatrix, drift) -> PathMatrix:
    """Shift each component by its drift function: out = path + drift(grid).

    `drift` is any object exposing sample(model) -> (d, n+1) values with
    zeros in column 0 (drifts vanish at t = 0).
    """
    shift = drift.sample(path.model)
    if shift.shape != path.values.shape:
        raise ValueError(
            f"drift shape {shift.shape} does not match path shape {path.values.shape}"
        )
    return PathMatrix.wrap(path.values + shift, path.model)


def path_to_csv(path: PathMatrix) -> str:
    """CSV dump `t,comp_1,...,comp_d`, one row per grid point, full double
    precision (17 significant digits)."""
    d = path.model.d
    lines = ["t," + ",".join(f"comp_{i + 1}" for i in range(d))]
    for j, t in enumerate(path.grid):
        row = [f"{t:.17g}"] + [f"{path.values[i, j]:.17g}" for i in range(d)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
