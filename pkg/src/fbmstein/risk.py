"""Monte Carlo estimation of the quadratic risk E int |delta_t - theta_t|^2 dt.

Sampling under the drifted law is done by direct shifting (X + theta with X
a zero-drift path), which is exact for the Gaussian-shift family and
variance-optimal; the change-of-measure density is only a cross-check (see
the drift module). Replicates are independent work items: per-replicate
results land in a slot array indexed by replicate and are reduced in index
order, so results do not depend on the worker-thread count (capped by the
FBM_THREADS environment variable). The chunk size is a fixed constant for
the same reason.

The MLE estimation error is formed directly as the zero-drift path X
(delta - theta = (X + theta) - theta = X identically), which makes its risk
bit-exactly independent of the drift.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .drift import DriftSpec
from .model import FbmModel, RngStream
from .shrinkage import (
    Estimator,
    ShrinkageSpec,
    shrinkage_batch,
    stein_integrand_from_norms,
    validate_dominance_conditions,
)
from .simulate import sample_fbm_batch

CHUNK = 2048


def worker_count() -> int:
    """Worker threads for replicate chunks; FBM_THREADS caps it, default 1."""
    raw = os.environ.get("FBM_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"FBM_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(k, 64))


def _chunks(n_reps: int):
    return [(lo, min(lo + CHUNK, n_reps)) for lo in range(0, n_reps, CHUNK)]


def _run_chunks(work, n_reps: int) -> None:
    spans = _chunks(n_reps)
    threads = worker_count()
    if threads == 1 or len(spans) == 1:
        for lo, hi in spans:
            work(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda span: work(*span), spans))


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    dt = grid[1] - grid[0]
    w = np.full(grid.size, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def _mean_se(slots: np.ndarray):
    mean = float(np.mean(slots))
    if slots.size < 2:
        return mean, 0.0
    return mean, float(np.std(slots, ddof=1) / np.sqrt(slots.size))


def cramer_rao_value(d: int, hurst: float, T: float) -> float:
    """Efficiency benchmark T^(2h+1)/(2h+1) * d attained by the MLE."""
    if d < 1 or not 0.0 < hurst < 1.0 or T < 0.0:
        raise ValueError("need d >= 1, Hurst in (0, 1), T >= 0")
    return T ** (2.0 * hurst + 1.0) / (2.0 * hurst + 1.0) * d


def cramer_rao_bound(model: FbmModel) -> float:
    return cramer_rao_value(model.d, model.hurst, model.T)


# ---------------------------------------------------------------------------
# quadratic risk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    std_error: float
    n_reps: int
    seed: int
    estimator_label: str
    drift_label: str


def _risk_slots(estimator: Estimator, drift: DriftSpec, model: FbmModel,
                method: str, n_reps: int, seed: int) -> np.ndarray:
    w = trapezoid_weights(model.grid)
    theta = drift.sample(model)
    slots = np.empty(n_reps)

    def work(lo, hi):
        x = sample_fbm_batch(model, method, seed, lo, hi)
        if estimator.is_identity:
            err = x
        else:
            err = estimator.transform_batch(x + theta[None], model.grid) - theta[None]
        slots[lo:hi] = np.einsum("bdn,bdn->bn", err, err) @ w

    _run_chunks(work, n_reps)
    return slots


def quadratic_risk_mc(estimator: Estimator, drift: DriftSpec, model: FbmModel,
                      method: str, n_reps: int, seed: int) -> RiskEstimate:
    """Monte Carlo quadratic risk of an estimator under the drifted law."""
    slots = _risk_slots(estimator, drift, model, method, n_reps, seed)
    mean, se = _mean_se(slots)
    return RiskEstimate(mean, se, n_reps, seed, estimator.label, drift.label)


# ---------------------------------------------------------------------------
# paired risk differences and the unbiased-risk cross-check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DominanceReport:
    delta_mean: float
    delta_std_error: float
    ci95_upper: float
    certified_conditions: bool
    stein_form_mean: float
    stein_form_std_error: float
    stein_gap_std_error: float
    risk_mean: float
    risk_std_error: float
    mle_risk_mean: float
    n_reps: int
    seed: int
    estimator_label: str
    drift_label: str


def _paired_slots(configs, model: FbmModel, method: str, n_reps: int, seed: int):
    """One simulation pass shared by several (spec, drift) rows.

    Returns (mle_slots, [(risk_slots, stein_slots), ...]); per-replicate
    values are identical to what standalone runs produce because the
    replicate streams and the chunking are the same.
    """
    w = trapezoid_weights(model.grid)
    grid = model.grid
    thetas = [drift.sample(model) for _, drift in configs]
    mle_slots = np.empty(n_reps)
    per_cfg = [(np.empty(n_reps), np.empty(n_reps)) for _ in configs]

    def work(lo, hi):
        x = sample_fbm_batch(model, method, seed, lo, hi)
        mle_slots[lo:hi] = np.einsum("bdn,bdn->bn", x, x) @ w
        for (spec, _), theta, (risk_slots, stein_slots) in zip(configs, thetas, per_cfg):
            obs = x + theta[None]
            err = shrinkage_batch(obs, grid, spec) - theta[None]
            risk_slots[lo:hi] = np.einsum("bdn,bdn->bn", err, err) @ w
            u = np.einsum("bdn,bdn->bn", obs, obs)
            stein_slots[lo:hi] = stein_integrand_from_norms(u, grid, spec, model.d) @ w

    _run_chunks(work, n_reps)
    return mle_slots, per_cfg


def _dominance_report(spec, drift, model, mle_slots, risk_slots, stein_slots,
                      n_reps, seed) -> DominanceReport:
    risk_mean, risk_se = _mean_se(risk_slots)
    mle_mean, _ = _mean_se(mle_slots)
    # difference of the two slot means (bit-equal to standalone risk runs);
    # the error bar comes from the paired per-replicate differences
    delta_mean = risk_mean - mle_mean
    _, delta_se = _mean_se(risk_slots - mle_slots)
    stein_mean, stein_se = _mean_se(stein_slots)
    # paired error of (delta - stein): the two are negatively correlated on
    # common streams, so hypot(se, se) would understate it
    _, gap_se = _mean_se(risk_slots - mle_slots - stein_slots)
    cert = validate_dominance_conditions(spec, model.d).certified
    return DominanceReport(
        delta_mean=delta_mean,
        delta_std_error=delta_se,
        ci95_upper=delta_mean + 1.96 * delta_se,
        certified_conditions=cert,
        stein_form_mean=stein_mean,
        stein_form_std_error=stein_se,
        stein_gap_std_error=gap_se,
        risk_mean=risk_mean,
        risk_std_error=risk_se,
        mle_risk_mean=mle_mean,
        n_reps=n_reps,
        seed=seed,
        estimator_label=f"js[a={spec.a:g},r={spec.r.label}]",
        drift_label=drift.label,
    )


def risk_difference_paired(spec: ShrinkageSpec, drift: DriftSpec, model: FbmModel,
                           method: str, n_reps: int, seed: int) -> DominanceReport:
    """Paired (common-random-number) risk difference of the shrinkage
    estimator against the MLE, plus the closed-form integrand average."""
    mle_slots, per_cfg = _paired_slots([(spec, drift)], model, method, n_reps, seed)
    risk_slots, stein_slots = per_cfg[0]
    return _dominance_report(spec, drift, model, mle_slots, risk_slots, stein_slots,
                             n_reps, seed)


def risk_difference_paired_multi(configs: Sequence, model: FbmModel, method: str,
                                 n_reps: int, seed: int):
    """Paired risk differences for several (spec, drift) rows sharing one
    simulation pass; each row is bit-identical to its standalone run."""
    mle_slots, per_cfg = _paired_slots(list(configs), model, method, n_reps, seed)
    return [
        _dominance_report(spec, drift, model, mle_slots, risk_slots, stein_slots,
                          n_reps, seed)
        for (spec, drift), (risk_slots, stein_slots) in zip(configs, per_cfg)
    ]


# ---------------------------------------------------------------------------
# direct Gaussian identity check (no paths needed)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteinIdentityCheck:
    lhs: float
    rhs: float
    lhs_std_error: float
    rhs_std_error: float
    combined_std_error: float
    n_samples: int
    seed: int


def stein_identity_check(spec: ShrinkageSpec, t: float, theta_t: np.ndarray,
                         n_samples: int, seed: int) -> SteinIdentityCheck:
    """Gaussian integration-by-parts identity at one time slice:
    E[sum_i g^i(B_t)(B^i_t - theta^i)] = t^(2h) E[sum_i d_i g^i(B_t)]
    with B_t ~ N(theta_t, t^(2h) I). Both sides by direct sampling; the
    combined error is the paired standard error of the difference."""
    if not t > 0.0:
        raise ValueError("the identity needs t > 0")
    theta_t = np.asarray(theta_t, dtype=float)
    d = theta_t.size
    z = RngStream(seed).generator(0).standard_normal((n_samples, d))
    b = theta_t[None, :] + t**spec.hurst * z
    u = np.einsum("kd,kd->k", b, b)
    safe = u > 1e-300
    u = np.where(safe, u, 1.0)
    r = np.asarray(spec.r.r(u), dtype=float)
    rp = np.asarray(spec.r.r_prime(u), dtype=float)
    t2h = t ** (2.0 * spec.hurst)
    ip = np.einsum("kd,kd->k", b, b - theta_t[None, :])
    lhs_k = np.where(safe, -spec.a * t2h * r / u * ip, 0.0)
    rhs_k = np.where(safe, -spec.a * t2h * t2h * (2.0 * rp + (d - 2) * r / u), 0.0)
    lhs, lhs_se = _mean_se(lhs_k)
    rhs, rhs_se = _mean_se(rhs_k)
    _, diff_se = _mean_se(lhs_k - rhs_k)
    return SteinIdentityCheck(lhs, rhs, lhs_se, rhs_se, diff_se, n_samples, seed)


# ---------------------------------------------------------------------------
# inverse-norm integrability and unbiasedness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InverseNormCheck:
    mc_value: float
    std_error: float
    closed_bound: float
    n_reps: int
    seed: int


def inverse_norm_moment_check(model: FbmModel, n_reps: int, seed: int,
                              method: str = "circulant") -> InverseNormCheck:
    """Monte Carlo E int_0^T dt/|B_t|^2 against the exact value
    T^(1-2h)/((1-2h)(d-2)); requires d >= 3 and Hurst < 1/2.

    The [0, t_1] sliver uses t_1/(1-2h) * 1/|B_{t_1}|^2, whose expectation
    is exactly the sliver's true mean under the model."""
    if model.d < 3:
        raise ValueError("the inverse-norm moment needs dimension d >= 3")
    model.require_low_hurst("the inverse-norm moment")
    grid = model.grid
    w = trapezoid_weights(grid)[1:].copy()
    w[0] = 0.5 * (grid[2] - grid[1])  # trapezoid restricted to [t_1, T]
    sliver_coef = grid[1] / (1.0 - 2.0 * model.hurst)
    slots = np.empty(n_reps)

    def work(lo, hi):
        x = sample_fbm_batch(model, method, seed, lo, hi)
        u = np.einsum("bdn,bdn->bn", x, x)[:, 1:]
        inv = 1.0 / u
        slots[lo:hi] = inv @ w + sliver_coef * inv[:, 0]

    _run_chunks(work, n_reps)
    mean, se = _mean_se(slots)
    closed = model.T ** (1.0 - 2.0 * model.hurst) / (
        (1.0 - 2.0 * model.hurst) * (model.d - 2)
    )
    return InverseNormCheck(mean, se, closed, n_reps, seed)


@dataclass(frozen=True)
class UnbiasednessCheck:
    discrepancy: np.ndarray  # (d, n+1) mean estimation error
    std_error: np.ndarray  # (d, n+1)
    max_norm_discrepancy: float
    n_reps: int
    seed: int


def unbiasedness_check(estimator: Estimator, drift: DriftSpec, model: FbmModel,
                       method: str, n_reps: int, seed: int) -> UnbiasednessCheck:
    """Mean estimation error path (delta_t - theta_t averaged over
    replicates) with per-node standard errors and its sup norm over the
    grid."""
    theta = drift.sample(model)
    spans = _chunks(n_reps)
    partial = np.zeros((len(spans), 2, model.d, model.n + 1))

    def work_index(idx):
        lo, hi = spans[idx]
        x = sample_fbm_batch(model, method, seed, lo, hi)
        if estimator.is_identity:
            err = x
        else:
            err = estimator.transform_batch(x + theta[None], model.grid) - theta[None]
        partial[idx, 0] = err.sum(axis=0)
        partial[idx, 1] = (err * err).sum(axis=0)

    threads = worker_count()
    if threads == 1 or len(spans) == 1:
        for idx in range(len(spans)):
            work_index(idx)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work_index, range(len(spans))))
    sums = partial[:, 0].sum(axis=0)
    sums_sq = partial[:, 1].sum(axis=0)
    mean = sums / n_reps
    var = np.maximum(sums_sq / n_reps - mean**2, 0.0) * n_reps / max(n_reps - 1, 1)
    se = np.sqrt(var / n_reps)
    norms = np.sqrt(np.einsum("dn,dn->n", mean, mean))
    return UnbiasednessCheck(mean, se, float(norms.max()), n_reps, seed)
