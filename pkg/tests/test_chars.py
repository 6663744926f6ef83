"""Characteristics: validation, exponent evaluation, clock integration."""

import numpy as np
import pytest
from scipy import integrate

import siilab as s
from siilab.chars import PiecewiseConstant


def quad_exponent_oracle(b, c, measure, threshold, u):
    """Independent exponent evaluation via adaptive quadrature."""
    out = 1j * u * b - 0.5 * u * u * c
    if measure.is_empty:
        return out

    def h(y):
        return y if abs(y) <= threshold else 0.0

    if isinstance(measure.sizes, s.ConstantSize):
        y = measure.sizes.value
        return out + measure.rate * (np.exp(1j * u * y) - 1 - 1j * u * h(y))

    dens = measure.sizes.density
    lo, hi = -60.0, 60.0
    if isinstance(measure.sizes, s.UniformSize):
        lo, hi = measure.sizes.lo, measure.sizes.hi
    pts = sorted(set([-threshold, threshold]) & set(np.linspace(lo, hi, 3)) | {0.0})
    re = integrate.quad(lambda y: (np.cos(u * y) - 1) * dens(y), lo, hi,
                        points=[p for p in (-threshold, 0, threshold) if lo < p < hi],
                        limit=200)[0]
    im = integrate.quad(lambda y: (np.sin(u * y) - u * h(y)) * dens(y), lo, hi,
                        points=[p for p in (-threshold, 0, threshold) if lo < p < hi],
                        limit=200)[0]
    return out + measure.rate * (re + 1j * im)


class TestTruncation:
    def test_identity_below_threshold(self):
        h = s.TruncationFunction(1.0)
        for y in [0.0, 0.3, -0.99, 1.0, -1.0]:
            assert h(y) == y
        assert h(1.5) == 0.0
        assert h(-2.0) == 0.0

    def test_complement(self):
        h = s.TruncationFunction(1.0)
        assert h.complement(0.5) == 0.0
        assert h.complement(2.0) == 2.0
        ys = np.array([-3.0, -0.5, 0.0, 0.7, 4.0])
        np.testing.assert_allclose(h(ys) + h.complement(ys), ys)

    def test_positive_threshold_required(self):
        with pytest.raises(s.CharacteristicsError):
            s.TruncationFunction(0.0)


class TestValidate:
    def test_brownian_trivial(self):
        res = s.brownian_chars().validate(1.0)
        assert res.ok
        assert res.drift_integral == 0.0
        assert res.jump_integral == 0.0

    def test_unit_drift_unit_jump(self):
        ch = s.LocalCharacteristics.constant(
            1.0, 0.0, s.JumpMeasure(1.0, s.ConstantSize(1.0)))
        res = ch.validate(2.0)
        assert res.ok
        assert res.drift_integral == pytest.approx(2.0, abs=1e-12)
        assert res.jump_integral == pytest.approx(2.0, abs=1e-12)

    def test_decreasing_clock_rejected(self):
        with pytest.raises(s.CharacteristicsError, match="not nondecreasing"):
            s.TimeScale.from_table([(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)])

    def test_negative_c_rejected(self):
        ch = s.LocalCharacteristics.constant(0.0, -1.0)
        res = ch.validate(1.0)
        assert not res.ok
        assert "negative c" in res.violations

    def test_presets_accepted(self):
        for ch in (s.brownian_chars(), s.standard_poisson_chars(), s.mixed_jump_chars()):
            assert ch.validate(4.0).ok

    def test_horizon_precondition(self):
        with pytest.raises(ValueError):
            s.brownian_chars().validate(0.0)


class TestLevyExponent:
    def test_pure_gaussian(self):
        assert s.levy_exponent(s.brownian_chars(), 2.0) == pytest.approx(-2.0)

    def test_zero_frequency(self):
        for ch in (s.brownian_chars(), s.mixed_jump_chars()):
            assert s.levy_exponent(ch, 0.0) == 0j

    def test_poisson_cancellation(self):
        # i u b cancels the -i u h(1) term, leaving the Poisson exponent
        ch = s.standard_poisson_chars()
        got = s.levy_exponent(ch, 1.0)
        assert got == pytest.approx(np.exp(1j) - 1)
        oracle = quad_exponent_oracle(1.0, 0.0, ch.jumps_at(0.0), 1.0, 1.0)
        assert got == pytest.approx(oracle)

    @pytest.mark.parametrize("u", [0.5, 1.0, 2.5, -3.0])
    def test_uniform_jumps_vs_quadrature(self, u):
        ch = s.mixed_jump_chars()
        got = s.levy_exponent(ch, u)
        oracle = quad_exponent_oracle(0.5, 1.0, ch.jumps_at(0.0), 1.0, u)
        assert got == pytest.approx(oracle, abs=1e-10)

    @pytest.mark.parametrize("u", [0.7, -2.0])
    def test_gaussian_jumps_vs_quadrature(self, u):
        m = s.JumpMeasure(1.5, s.GaussianSize(0.3, 0.8))
        ch = s.LocalCharacteristics.constant(0.2, 0.4, m)
        got = s.levy_exponent(ch, u)
        oracle = quad_exponent_oracle(0.2, 0.4, m, 1.0, u)
        assert got == pytest.approx(oracle, abs=1e-9)

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(7)
        ch = s.mixed_jump_chars()
        for u in rng.uniform(-5, 5, 25):
            assert s.levy_exponent(ch, -u) == pytest.approx(
                np.conj(s.levy_exponent(ch, u)))

    def test_additive_in_characteristics(self):
        m1 = s.JumpMeasure(1.0, s.UniformSize(-0.5, 1.5))
        m2 = s.JumpMeasure(2.0, s.GaussianSize(0.0, 0.4))
        ch1 = s.LocalCharacteristics.constant(0.3, 0.5, m1)
        ch2 = s.LocalCharacteristics.constant(-0.1, 1.0, m2)
        combined = s.LocalCharacteristics.constant(0.2, 1.5, m1.combine(m2))
        for u in [-2.0, 0.5, 3.0]:
            assert s.levy_exponent(combined, u) == pytest.approx(
                s.levy_exponent(ch1, u) + s.levy_exponent(ch2, u), abs=1e-10)

    def test_array_input(self):
        u = np.linspace(-3, 3, 11)
        out = s.levy_exponent(s.mixed_jump_chars(), u)
        assert out.shape == u.shape
        assert out[5] == 0j  # u = 0


class TestIntegratedExponent:
    def test_time_constant(self):
        ch = s.mixed_jump_chars()
        psi = s.levy_exponent(ch, 1.3)
        assert s.integrated_exponent(ch, 1.3, 3.0) == pytest.approx(3.0 * psi)

    def test_zero_frequency(self):
        assert s.integrated_exponent(s.mixed_jump_chars(), 0.0, 2.0) == 0j

    def test_piecewise_clock_and_drift(self):
        # A runs at double speed on [0,1]: A(1)=2, A(2)=3; b steps 1 -> 2 at t=1.
        # By hand: int_0^2 psi_s dA_s = iu(1*2 + 2*1) = 4iu.
        clock = s.TimeScale.from_table([(0.0, 0.0), (1.0, 2.0), (2.0, 3.0)])
        ch = s.LocalCharacteristics(
            drift=PiecewiseConstant((0.0, 1.0), (1.0, 2.0)),
            diffusion=PiecewiseConstant.constant(0.0),
            jumps=PiecewiseConstant.constant(s.JumpMeasure.empty()),
            clock=clock)
        u = 0.7
        assert s.integrated_exponent(ch, u, 2.0) == pytest.approx(4j * u)
        # independent Riemann oracle on a fine grid
        ts = np.linspace(0.0, 2.0, 20001)
        psi_vals = np.array([s.levy_exponent(ch, u, t) for t in ts[:-1]])
        da = np.diff(clock(ts))
        assert s.integrated_exponent(ch, u, 2.0) == pytest.approx(
            np.sum(psi_vals * da), abs=1e-3)

    def test_partial_segment(self):
        clock = s.TimeScale.from_table([(0.0, 0.0), (1.0, 2.0), (2.0, 3.0)])
        ch = s.LocalCharacteristics.constant(1.0, 0.5, clock=clock)
        u = 1.1
        psi = s.levy_exponent(ch, u)
        assert s.integrated_exponent(ch, u, 1.5) == pytest.approx(psi * 2.5)


class TestBivariate:
    def test_structure(self):
        biv = s.BivariateCharacteristics(s.mixed_jump_chars())
        assert biv.drift_pair() == (0.5, 0.5)
        mat = biv.diffusion_matrix()
        assert mat[0][1] == 0.0 and mat[1][0] == 0.0
        assert mat[0][0] == mat[1][1] == 1.0

    def test_no_mass_off_axes(self):
        biv = s.BivariateCharacteristics(s.mixed_jump_chars())
        both_nonzero = biv.joint_jump_expect(
            lambda x, y: ((x != 0) & (y != 0)).astype(float))
        assert both_nonzero == 0.0

    def test_joint_exponent_splits(self):
        ch = s.mixed_jump_chars()
        biv = s.BivariateCharacteristics(ch)
        got = biv.joint_exponent(0.8, -1.2)
        assert got == pytest.approx(s.levy_exponent(ch, 0.8) + s.levy_exponent(ch, -1.2))

    def test_marginal_rate_preserved(self):
        biv = s.BivariateCharacteristics(s.mixed_jump_chars())
        total = biv.joint_jump_expect(lambda x, y: np.ones_like(x))
        assert total == pytest.approx(2 * 2.0)  # each axis carries full rate


class TestJumpMeasure:
    def test_empty(self):
        m = s.JumpMeasure.empty()
        assert m.is_empty
        assert m.expect(lambda y: y) == 0.0

    def test_sampler_never_zero(self):
        gen = np.random.default_rng(3)
        for sizes in (s.ConstantSize(1.0), s.UniformSize(-1, 1), s.GaussianSize(0, 1)):
            assert np.all(sizes.sample(gen, 5000) != 0.0)

    def test_uniform_expectation_oracle(self):
        m = s.JumpMeasure(2.0, s.UniformSize(-1.0, 1.0))
        got = m.expect(lambda y: np.minimum(1.0, y * y), breaks=(-1.0, 1.0))
        oracle = 2.0 * integrate.quad(lambda y: min(1.0, y * y) * 0.5, -1, 1)[0]
        assert got == pytest.approx(oracle, abs=1e-12)

    def test_gaussian_expectation_oracle(self):
        m = s.JumpMeasure(1.0, s.GaussianSize(0.5, 1.2))
        got = m.expect(lambda y: np.abs(y), breaks=(0.0,))
        dens = m.sizes.density
        oracle = integrate.quad(lambda y: abs(y) * dens(y), -15, 15, limit=200)[0]
        assert got == pytest.approx(oracle, abs=1e-10)

    def test_discontinuous_integrand_with_breaks(self):
        m = s.JumpMeasure(1.0, s.UniformSize(-2.0, 2.0))
        thr = 1.0
        got = m.expect(lambda y: np.where(np.abs(y) <= thr, y, 0.0), breaks=(-thr, thr))
        assert got == pytest.approx(0.0, abs=1e-14)
        got2 = m.expect(lambda y: np.where(np.abs(y) <= thr, 1.0, 0.0), breaks=(-thr, thr))
        assert got2 == pytest.approx(0.5, abs=1e-12)
