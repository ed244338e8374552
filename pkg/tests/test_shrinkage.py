import numpy as np
import pytest

from fbmstein import (
    FbmModel,
    PathMatrix,
    R_ONE,
    R_RATIONAL,
    RFunctionSpec,
    ShrinkageSpec,
    g_divergence,
    g_shift,
    make_estimator,
    mle_estimate,
    shrinkage_estimate,
    stein_integrand,
    validate_dominance_conditions,
)
from fbmstein.shrinkage import shrinkage_batch, stein_integrand_from_norms


def path_with_final(vec, hurst=0.25, n=4):
    vec = np.asarray(vec, dtype=float)
    m = FbmModel(vec.size, hurst, 1.0, n)
    vals = np.zeros((vec.size, n + 1))
    vals[:, -1] = vec
    vals[:, 1:-1] = 0.5  # arbitrary interior values
    return PathMatrix.wrap(vals, m), m


class TestRFunctions:
    def test_builtin_profiles_clean(self):
        assert R_ONE.probe_violations() == []
        assert R_RATIONAL.probe_violations() == []

    def test_out_of_range_detected(self):
        bad = RFunctionSpec(lambda u: 2.0 * np.ones_like(u), lambda u: np.zeros_like(u), "big")
        assert any("[0, 1]" in v for v in bad.probe_violations())

    def test_decreasing_detected(self):
        bad = RFunctionSpec(
            lambda u: 1.0 / (1.0 + u), lambda u: -1.0 / (1.0 + u) ** 2, "dec"
        )
        assert any("increasing" in v for v in bad.probe_violations())

    def test_derivative_mismatch_detected(self):
        bad = RFunctionSpec(
            lambda u: u / (1.0 + u), lambda u: 2.0 / (1.0 + u) ** 2, "wrong"
        )
        assert any("central differences" in v for v in bad.probe_violations())


class TestSpecValidation:
    def test_positive_a(self):
        with pytest.raises(ValueError):
            ShrinkageSpec(0.0, R_ONE, 0.25)

    def test_certified(self):
        cert = validate_dominance_conditions(ShrinkageSpec(2.0, R_ONE, 0.25), 3)
        assert cert.certified and cert.violations == ()

    def test_low_dimension_violated(self):
        cert = validate_dominance_conditions(ShrinkageSpec(1.0, R_ONE, 0.25), 2)
        assert not cert.certified
        assert any("d >= 3" in v for v in cert.violations)

    def test_high_hurst_violated(self):
        cert = validate_dominance_conditions(ShrinkageSpec(1.0, R_ONE, 0.6), 3)
        assert not cert.certified
        assert any("1/2" in v for v in cert.violations)

    def test_large_a_violated(self):
        cert = validate_dominance_conditions(ShrinkageSpec(3.0, R_ONE, 0.25), 3)
        assert not cert.certified
        assert any("2(d-2)" in v for v in cert.violations)


class TestEstimators:
    def test_mle_is_identity(self):
        p, _ = path_with_final([1.0, 2.0, 3.0])
        assert mle_estimate(p) is p

    def test_james_stein_corollary_value(self):
        # factor (1 - a t^{2H}/|B|^2) at t = 1, B = (2, 0, 0), a = 2
        p, m = path_with_final([2.0, 0.0, 0.0])
        out = shrinkage_estimate(p, ShrinkageSpec(2.0, R_ONE, m.hurst))
        assert np.allclose(out.values[:, -1], [1.0, 0.0, 0.0], atol=1e-15)

    def test_rational_profile_value(self):
        p, m = path_with_final([1.0, 1.0, 1.0], hurst=0.25)
        out = shrinkage_estimate(p, ShrinkageSpec(1.0, R_RATIONAL, 0.25))
        assert np.allclose(out.values[:, -1], 0.75, rtol=1e-14)

    def test_zero_profile_is_identity(self):
        zero_r = RFunctionSpec(
            lambda u: np.zeros_like(np.asarray(u, dtype=float)),
            lambda u: np.zeros_like(np.asarray(u, dtype=float)),
            "zero",
        )
        p, m = path_with_final([1.5, -0.5, 2.0])
        out = shrinkage_estimate(p, ShrinkageSpec(5.0, zero_r, m.hurst))
        assert np.array_equal(out.values, p.values)

    def test_origin_maps_to_zero(self):
        p, m = path_with_final([1.0, 1.0, 1.0])
        out = shrinkage_estimate(p, ShrinkageSpec(1.0, R_ONE, m.hurst))
        assert np.all(out.values[:, 0] == 0.0)

    def test_collinearity(self):
        rng = np.random.default_rng(0)
        m = FbmModel(3, 0.3, 1.0, 8)
        vals = np.concatenate([np.zeros((3, 1)), rng.standard_normal((3, 8))], axis=1)
        p = PathMatrix.wrap(vals, m)
        out = shrinkage_estimate(p, ShrinkageSpec(1.0, R_RATIONAL, 0.3))
        for j in range(1, 9):
            cross = np.outer(out.values[:, j], p.values[:, j])
            assert np.allclose(cross, cross.T, rtol=1e-12, atol=1e-14)

    def test_adapted_to_current_time(self):
        # permuting values at times > t leaves the estimate at t unchanged
        rng = np.random.default_rng(1)
        m = FbmModel(3, 0.3, 1.0, 10)
        vals = np.concatenate([np.zeros((3, 1)), rng.standard_normal((3, 10))], axis=1)
        spec = ShrinkageSpec(1.0, R_RATIONAL, 0.3)
        base = shrinkage_estimate(PathMatrix.wrap(vals, m), spec)
        shuffled = vals.copy()
        shuffled[:, 6:] = shuffled[:, [9, 10, 8, 7, 6]]
        out = shrinkage_estimate(PathMatrix.wrap(shuffled, m), spec)
        assert np.array_equal(out.values[:, :6], base.values[:, :6])

    def test_registry(self):
        m = FbmModel(3, 0.25, 1.0, 8)
        assert make_estimator("mle").is_identity
        js = make_estimator("js", m, a=1.5)
        assert js.spec.a == 1.5 and js.spec.r.label == "one"
        jr = make_estimator("js-rational", m, a=0.5)
        assert jr.spec.r.label == "rational"
        with pytest.raises(ValueError):
            make_estimator("stein9000", m)
        with pytest.raises(ValueError):
            make_estimator("custom")


class TestSteinIntegrand:
    def test_boundary_cancellation(self):
        spec = ShrinkageSpec(2.0, R_ONE, 0.25)  # a = 2(d-2) for d = 3
        for x in ([1.0, 0.0, 0.0], [0.3, -2.0, 1.1]):
            assert stein_integrand(np.array(x), 0.7, spec, 3) == pytest.approx(0.0, abs=1e-14)

    def test_reference_value(self):
        spec = ShrinkageSpec(1.0, R_ONE, 0.25)
        val = stein_integrand(np.array([2.0, 0.0, 0.0]), 1.0, spec, 3)
        assert val == pytest.approx(-0.25, rel=1e-14)

    def test_zero_norm_rejected(self):
        spec = ShrinkageSpec(1.0, R_ONE, 0.25)
        with pytest.raises(ValueError):
            stein_integrand(np.zeros(3), 1.0, spec, 3)

    def test_divergence_against_central_differences(self):
        rng = np.random.default_rng(7)
        spec = ShrinkageSpec(1.3, R_RATIONAL, 0.3)
        for _ in range(100):
            d = int(rng.integers(3, 6))
            x = rng.standard_normal(d) * rng.uniform(0.5, 3.0)
            t = rng.uniform(0.05, 2.0)
            step = 1e-5 * (1.0 + np.abs(x))
            num = 0.0
            for i in range(d):
                e = np.zeros(d)
                e[i] = step[i]
                num += (g_shift(x + e, t, spec)[i] - g_shift(x - e, t, spec)[i]) / (
                    2.0 * step[i]
                )
            ana = g_divergence(x, t, spec, d)
            assert num == pytest.approx(ana, rel=1e-5)

    def test_closed_form_assembles_from_g(self):
        rng = np.random.default_rng(8)
        spec = ShrinkageSpec(0.8, R_RATIONAL, 0.2)
        for _ in range(20):
            d = int(rng.integers(3, 6))
            x = rng.standard_normal(d)
            t = rng.uniform(0.1, 2.0)
            g = g_shift(x, t, spec)
            direct = float(g @ g) + 2.0 * t ** (2 * spec.hurst) * g_divergence(x, t, spec, d)
            assert stein_integrand(x, t, spec, d) == pytest.approx(direct, rel=1e-12)

    def test_certified_sign_on_probes(self):
        rng = np.random.default_rng(9)
        for r in (R_ONE, R_RATIONAL):
            spec = ShrinkageSpec(1.7, r, 0.25)  # a < 2(d-2) for d = 3
            assert validate_dominance_conditions(spec, 3).certified
            u = 10.0 ** rng.uniform(-8, 4, 10000)
            t = rng.uniform(0.01, 2.0, 10000)
            vals = stein_integrand_from_norms(u, t, spec, 3)
            assert np.all(vals <= 1e-15)

    def test_batch_guard_at_origin(self):
        spec = ShrinkageSpec(1.0, R_ONE, 0.25)
        vals = stein_integrand_from_norms(np.array([0.0, 4.0]), np.array([0.0, 1.0]), spec, 3)
        assert vals[0] == 0.0
        assert vals[1] == pytest.approx(-0.25)


def test_assumption_a_shift_second_moment_stable():
    # E int |g(B_t, t)|^2 dt finite and stable under grid refinement for a
    # certified spec (ratio within 5% between n = 256 and n = 512)
    import fbmstein.simulate as sim
    from fbmstein.risk import trapezoid_weights

    spec = ShrinkageSpec(1.0, R_ONE, 0.25)
    est = {}
    for n in (256, 512):
        m = FbmModel(3, 0.25, 1.0, n)
        x = sim.sample_fbm_batch(m, "circulant", 1357, 0, 12000)
        u = np.einsum("bdn,bdn->bn", x, x)
        t4h = m.grid ** (4 * spec.hurst)
        integrand = np.where(u > 0, spec.a**2 * t4h[None, :] / np.where(u > 0, u, 1.0), 0.0)
        est[n] = float(np.mean(integrand @ trapezoid_weights(m.grid)))
    assert np.isfinite(est[256]) and np.isfinite(est[512])
    assert abs(est[512] / est[256] - 1.0) < 0.05
