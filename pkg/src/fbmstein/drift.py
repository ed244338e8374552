"""Admissible drifts and the change-of-measure machinery.

A drift lives in the Cameron-Martin-type subspace of the model when the
inverse kernel transform of each component is square integrable on [0, T];
membership is probed numerically by refining the discrete energy. The
log-density of the drifted law along a driving Brownian path is

    L = sum_i ( int phi_i dW_i - 1/2 int phi_i(s)^2 ds ),

where phi_i inverts the simulation kernel on the i-th drift component.
The closed-form inverse operator is normalized so that composing it with
the covariance-true kernel transform gives c*Gamma(h+1/2) times the
identity (c the kernel normalizer); the Girsanov integrand therefore
divides the closed form by that constant so the realized drift is exactly
theta. At h = 1/2 the constant is 1 and phi is the classical derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import simulate
from .fracops import AcFunction, apply_K_inverse, gamma_fn, kernel_norm_const
from .model import FbmModel, PathMatrix

_SLIVER_TINY = 1e-300
DRIFT_KINDS = ("zero", "linear", "power2H", "custom")


@dataclass(frozen=True)
class DriftSpec:
    """Per-component drift functions theta^i with analytic derivatives."""

    components: tuple
    label: str

    def __post_init__(self):
        if not self.components:
            raise ValueError("drift needs at least one component")
        for comp in self.components:
            if not isinstance(comp, AcFunction):
                raise ValueError("drift components must be AcFunction instances")
            v0 = float(comp.sample(np.array([0.0]))[0])
            if not abs(v0) <= 1e-12:
                raise ValueError(f"drift components must vanish at t = 0, got {v0!r}")

    @property
    def d(self) -> int:
        return len(self.components)

    def sample(self, model: FbmModel) -> np.ndarray:
        """Drift values on the model grid, (d, n+1), exact zeros at t_0."""
        if model.d != self.d:
            raise ValueError(
                f"drift has {self.d} components but the model dimension is {model.d}"
            )
        out = np.empty((self.d, model.n + 1))
        for i, comp in enumerate(self.components):
            out[i] = comp.sample(model.grid)
        out[:, 0] = 0.0
        return out


def builtin_drift(kind: str, model: FbmModel, c: float = 1.0,
                  components: Sequence[AcFunction] | None = None) -> DriftSpec:
    """Built-in drift families, identical in every component.

    zero: theta = 0; linear: theta = c*t; power2H: theta = c*t^(2h) with h
    the model Hurst index (the perturbation direction that saturates the
    efficiency bound); custom: caller-supplied components.
    """
    if not np.isfinite(c):
        raise ValueError("drift coefficient must be finite")
    if kind == "zero":
        comp = AcFunction(lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                          lambda t: np.zeros_like(np.asarray(t, dtype=float)))
        return DriftSpec((comp,) * model.d, "zero")
    if kind == "linear":
        comp = AcFunction(lambda t: c * np.asarray(t, dtype=float),
                          lambda t: np.full_like(np.asarray(t, dtype=float), c))
        return DriftSpec((comp,) * model.d, f"linear({c:g})")
    if kind == "power2H":
        h2 = 2.0 * model.hurst
        comp = AcFunction(lambda t: c * np.asarray(t, dtype=float) ** h2,
                          lambda t: c * h2 * np.asarray(t, dtype=float) ** (h2 - 1.0))
        return DriftSpec((comp,) * model.d, f"power2H({c:g})")
    if kind == "custom":
        if not components:
            raise ValueError("custom drift needs explicit components")
        return DriftSpec(tuple(components), "custom")
    raise ValueError(f"unknown drift kind {kind!r}; expected one of {DRIFT_KINDS}")


# ---------------------------------------------------------------------------
# inverse-kernel integrand and discrete energy
# ---------------------------------------------------------------------------


def closed_form_inverse_values(comp: AcFunction, model: FbmModel) -> np.ndarray:
    """Closed-form inverse-transform values of one drift component on the
    grid (index 0 unused, set to 0). Requires Hurst <= 1/2; at exactly 1/2
    the inverse is plain differentiation."""
    if model.hurst > 0.5:
        raise ValueError("drift machinery requires Hurst <= 1/2")
    if model.hurst == 0.5:
        out = comp.sample_derivative(model.grid).copy()
        out[0] = 0.0
        return out
    return apply_K_inverse(comp, model.hurst, model.grid).values


def girsanov_integrand_values(comp: AcFunction, model: FbmModel) -> np.ndarray:
    """True inverse of the simulation kernel on one drift component: the
    closed form divided by c*Gamma(h+1/2) (exactly 1 at h = 1/2)."""
    values = closed_form_inverse_values(comp, model)
    if model.hurst == 0.5:
        return values
    scale = kernel_norm_const(model.hurst) * gamma_fn(model.hurst + 0.5)
    return values / scale


def energy_with_power_sliver(squared: np.ndarray, grid: np.ndarray) -> float:
    """integral_0^T q(s) ds of a sampled nonnegative integrand q that may
    blow up like a power at 0: trapezoid on [t_1, T] plus an analytic
    power-law estimate of the [0, t_1] sliver fitted from (t_1, t_2).
    Returns inf when the fitted power is not integrable."""
    q1 = squared[1]
    q2 = squared[2] if squared.size > 2 else squared[1]
    body = float(np.trapezoid(squared[1:], grid[1:]))
    if q1 <= _SLIVER_TINY or q2 <= _SLIVER_TINY:
        return body
    p = np.log(q2 / q1) / np.log(grid[2] / grid[1])
    if p <= -1.0:
        return np.inf
    return body + q1 * grid[1] / (p + 1.0)


@dataclass(frozen=True)
class MembershipReport:
    """Discrete inverse-kernel energies per component at two resolutions."""

    energies: tuple
    refined_energies: tuple
    ratios: tuple
    suspected_non_member: bool
    n: int
    refined_n: int

    @property
    def total_energy(self) -> float:
        return float(sum(self.energies))


def validate_membership(drift: DriftSpec, model: FbmModel,
                        growth_tolerance: float = 0.2) -> MembershipReport:
    """Probe square integrability of the inverse transform of each drift
    component: compute the discrete energy at resolutions n and 2n and flag
    suspected non-membership when it grows more than the tolerance under
    refinement. A diagnostic, not a proof."""
    model.require_low_hurst("membership validation")
    fine = model.with_steps(2 * model.n)
    energies, refined, ratios = [], [], []
    suspect = False
    for comp in drift.components:
        coarse_vals = closed_form_inverse_values(comp, model)
        fine_vals = closed_form_inverse_values(comp, fine)
        e0 = energy_with_power_sliver(coarse_vals**2, model.grid)
        e1 = energy_with_power_sliver(fine_vals**2, fine.grid)
        energies.append(e0)
        refined.append(e1)
        if e0 == 0.0 and e1 == 0.0:
            ratios.append(1.0)
            continue
        if not (np.isfinite(e0) and np.isfinite(e1)):
            ratios.append(np.inf)
            suspect = True
            continue
        ratio = e1 / e0 if e0 > 0 else np.inf
        ratios.append(ratio)
        if ratio > 1.0 + growth_tolerance:
            suspect = True
    return MembershipReport(tuple(energies), tuple(refined), tuple(ratios),
                           suspect, model.n, fine.n)


# ---------------------------------------------------------------------------
# Girsanov log-density
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GirsanovEvaluation:
    log_density: float
    ito_term: float
    energy_term: float


def _ito_coefficients(drift: DriftSpec, model: FbmModel) -> np.ndarray:
    """Left-endpoint integrand values per increment cell, (d, n); the t_0
    cell uses the value at t_1 to avoid the power blow-up at 0."""
    coef = np.empty((drift.d, model.n))
    for i, comp in enumerate(drift.components):
        phi = girsanov_integrand_values(comp, model)
        coef[i, 0] = phi[1]
        coef[i, 1:] = phi[1:-1]
    return coef


def _total_energy(drift: DriftSpec, model: FbmModel) -> float:
    total = 0.0
    for comp in drift.components:
        phi = girsanov_integrand_values(comp, model)
        total += energy_with_power_sliver(phi**2, model.grid)
    return 0.5 * total


def girsanov_log_density(wiener: PathMatrix, drift: DriftSpec, model: FbmModel) -> GirsanovEvaluation:
    """log dP_drift/dP evaluated along a driving Brownian path.

    The stochastic integral is discretized with the left-endpoint
    convention on the increment cells of the given path; the energy uses
    the trapezoid plus analytic-sliver rule. log_density = ito - energy.
    """
    if wiener.model.d != drift.d:
        raise ValueError("drift dimension does not match the path")
    if wiener.model.n != model.n or wiener.model.hurst != model.hurst:
        raise ValueError("path grid does not match the model")
    coef = _ito_coefficients(drift, model)
    dw = np.diff(wiener.values, axis=1)
    ito = float(np.sum(coef * dw))
    energy = _total_energy(drift, model)
    return GirsanovEvaluation(ito - energy, ito, energy)


# ---------------------------------------------------------------------------
# Monte Carlo checks of the density
# ---------------------------------------------------------------------------

_CHUNK = 2048


@dataclass(frozen=True)
class MeanOneCheck:
    mean: float
    std_error: float
    n_reps: int
    seed: int


def girsanov_mean_one_check(drift: DriftSpec, model: FbmModel, n_reps: int,
                            seed: int, antithetic: bool = False) -> MeanOneCheck:
    """Monte Carlo E[exp(L)] over driving Brownian paths (martingale mean-one
    property). With antithetic=True each replicate averages the +W and -W
    evaluations (variance-reduced oracle)."""
    coef = _ito_coefficients(drift, model)
    energy = _total_energy(drift, model)
    total = 0.0
    total_sq = 0.0
    for lo in range(0, n_reps, _CHUNK):
        hi = min(lo + _CHUNK, n_reps)
        _, wiener = simulate._sample_volterra(model, seed, lo, hi)
        dw = np.diff(wiener, axis=-1)
        ito = np.einsum("bdn,dn->b", dw, coef)
        if antithetic:
            vals = 0.5 * (np.exp(ito - energy) + np.exp(-ito - energy))
        else:
            vals = np.exp(ito - energy)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
    mean = total / n_reps
    var = max(total_sq / n_reps - mean * mean, 0.0) * n_reps / max(n_reps - 1, 1)
    return MeanOneCheck(mean, float(np.sqrt(var / n_reps)), n_reps, seed)


@dataclass(frozen=True)
class ChangeOfMeasureCheck:
    weighted_mean: float
    weighted_std_error: float
    shifted_mean: float
    shifted_std_error: float
    combined_std_error: float
    n_reps: int
    seed: int


def change_of_measure_check(drift: DriftSpec, model: FbmModel, n_reps: int,
                            seed: int, clip: float = 10.0) -> ChangeOfMeasureCheck:
    """Compare E[exp(L) F(B)] under the base law with E[F(X + theta)], for
    the bounded functional F(B) = min(max_{i,j} |B^i_{t_j}|, clip), using
    common random numbers (the same simulated paths on both sides)."""
    coef = _ito_coefficients(drift, model)
    energy = _total_energy(drift, model)
    theta = drift.sample(model)
    sums = np.zeros(2)
    sums_sq = np.zeros(2)
    for lo in range(0, n_reps, _CHUNK):
        hi = min(lo + _CHUNK, n_reps)
        fbm, wiener = simulate._sample_volterra(model, seed, lo, hi)
        dw = np.diff(wiener, axis=-1)
        ito = np.einsum("bdn,dn->b", dw, coef)
        f_base = np.minimum(np.abs(fbm).max(axis=(1, 2)), clip)
        f_shift = np.minimum(np.abs(fbm + theta[None]).max(axis=(1, 2)), clip)
        weighted = np.exp(ito - energy) * f_base
        sums += [weighted.sum(), f_shift.sum()]
        sums_sq += [(weighted * weighted).sum(), (f_shift * f_shift).sum()]
    means = sums / n_reps
    variances = np.maximum(sums_sq / n_reps - means**2, 0.0) * n_reps / max(n_reps - 1, 1)
    ses = np.sqrt(variances / n_reps)
    return ChangeOfMeasureCheck(float(means[0]), float(ses[0]), float(means[1]),
                                float(ses[1]), float(np.hypot(ses[0], ses[1])),
                                n_reps, seed)
