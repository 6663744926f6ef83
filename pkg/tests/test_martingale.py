"""Generators, test processes, martingale verification, zero covariation."""

import numpy as np
import pytest

import siilab as s
from siilab.martingale import (default_functionals, kg_value_matrix,
                               mf_value_matrix, multiplicative_presets)


def const_function(value=3.0):
    return s.TestFunction(
        name=f"const {value:g}",
        f=lambda x: np.full_like(np.asarray(x, dtype=float), value),
        df=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        d2f=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        positive_infimum=value > 0, inf_value=value, sup_value=value,
        sup_df=0.0, sup_d2f=0.0)


class TestTestFunctions:
    def test_wave_positivity(self):
        xs = np.linspace(-10, 10, 2001)
        for tf in multiplicative_presets():
            assert np.min(tf.f(xs)) >= 1.0
            assert tf.positive_infimum

    @pytest.mark.parametrize("tf", multiplicative_presets() + [s.bump(0.3, 1.5, 2.0)],
                             ids=lambda tf: tf.name)
    def test_derivatives_match_finite_differences(self, tf):
        xs = np.linspace(-2.2, 2.2, 41)
        h = 1e-6
        fd1 = (tf.f(xs + h) - tf.f(xs - h)) / (2 * h)
        fd2 = (tf.f(xs + h) - 2 * tf.f(xs) + tf.f(xs - h)) / (h * h)
        scale1 = np.maximum(np.abs(fd1), 1.0)
        scale2 = np.maximum(np.abs(fd2), 1.0)
        assert np.max(np.abs(tf.df(xs) - fd1) / scale1) < 1e-6
        assert np.max(np.abs(tf.d2f(xs) - fd2) / scale2) < 1e-3

    def test_bump_compact_support(self):
        tf = s.bump(0.0, 1.0, 1.0)
        assert tf.f(1.5) == 0.0 and tf.df(1.5) == 0.0 and tf.d2f(1.5) == 0.0
        assert tf.f(0.0) == pytest.approx(1.0)


class TestGeneratorL:
    def test_constant_function_annihilated(self):
        for ch in (s.brownian_chars(), s.mixed_jump_chars()):
            out = s.generator_L(const_function(), 0.7, 0.0, ch)
            assert out == pytest.approx(0.0, abs=1e-12)

    def test_pure_diffusion(self):
        ch = s.brownian_chars()
        f = s.sin_wave(1.0)
        for x in (-1.2, 0.0, 2.5):
            assert s.generator_L(f, x, 0.0, ch) == pytest.approx(-np.sin(x) / 2)

    def test_poisson_difference_form(self):
        # unit jumps at threshold 1: drift and truncation terms cancel and the
        # generator reduces to the pure difference f(x + 1) - f(x)
        ch = s.standard_poisson_chars()
        f = s.sin_wave(1.0)
        for x in (-0.3, 0.0, 1.7):
            want = float(f.f(x + 1.0) - f.f(x))
            assert s.generator_L(f, x, 0.0, ch) == pytest.approx(want, abs=1e-12)

    def test_vectorized(self):
        ch = s.mixed_jump_chars()
        f = s.cos_wave(2.0)
        xs = np.linspace(-1, 1, 7)
        out = s.generator_L(f, xs, 0.0, ch)
        for xi, oi in zip(xs, out):
            assert oi == pytest.approx(s.generator_L(f, float(xi), 0.0, ch))


class TestOperatorK:
    def _path(self, value):
        grid = s.TimeGrid.uniform(1.0, 4)
        return s.CadlagPath.from_values(grid, np.full(5, value))

    def test_sigma_zero(self):
        spec = s.SdeSpec.from_expressions(0.0, "0", "0")
        out = s.operator_K(s.sin_wave(1.0), self._path(0.4), 0.5,
                           s.mixed_jump_chars(), spec)
        assert out == 0.0

    def test_sigma_one_reduces_to_generator(self):
        spec = s.SdeSpec.from_expressions(0.0, "0", "1")
        g = s.cos_wave(1.0)
        path = self._path(0.8)
        ch = s.mixed_jump_chars()
        got = s.operator_K(g, path, 0.5, ch, spec)
        assert got == pytest.approx(s.generator_L(g, 0.8, 0.5, ch), abs=1e-12)

    def test_sigma_two_poisson_hand_formula(self):
        # scaled jumps: sigma b g' + (g(w + 2) - g(w) - 2 h(1) g'(w)) with
        # b = h(1) = 1, so the g' terms cancel
        spec = s.SdeSpec.from_expressions(0.0, "0", "2")
        g = s.sin_wave(1.0)
        ch = s.standard_poisson_chars()
        w = 0.3
        got = s.operator_K(g, self._path(w), 0.5, ch, spec)
        want = float(g.f(w + 2.0) - g.f(w))
        assert got == pytest.approx(want, abs=1e-12)


class TestMfProcess:
    def test_constant_function_gives_one(self):
        grid = s.TimeGrid.uniform(1.0, 20)
        y = s.simulate_sii(s.brownian_chars(), grid, s.RngStream(1, 0))
        m = s.mf_process(const_function(), y, s.brownian_chars())
        np.testing.assert_allclose(m.values, 1.0, atol=1e-12)

    def test_pure_drift_telescopes(self):
        n = 400
        grid = s.TimeGrid.uniform(1.0, n)
        ch = s.LocalCharacteristics.constant(1.0, 0.0)
        y = s.simulate_sii(ch, grid, s.RngStream(1, 0))
        for f in multiplicative_presets():
            m = s.mf_process(f, y, ch)
            assert np.max(np.abs(m.values - 1.0)) <= 5.0 / n

    def test_requires_positive_infimum(self):
        grid = s.TimeGrid.uniform(1.0, 4)
        y = s.CadlagPath.from_values(grid, np.zeros(5))
        with pytest.raises(ValueError, match="inf f > 0"):
            s.mf_process(s.bump(), y, s.brownian_chars())

    def test_martingale_mean_brownian(self):
        n_paths, n = 4000, 64
        grid = s.TimeGrid.uniform(1.0, n)
        ch = s.brownian_chars()
        vals = np.stack([s.simulate_sii(ch, grid, s.RngStream(3, i)).values
                         for i in range(n_paths)])
        f = s.sin_wave(1.0)
        m = mf_value_matrix(f, vals, grid, ch)
        se = m[:, -1].std(ddof=1) / np.sqrt(n_paths)
        assert abs(m[:, -1].mean() - 1.0) <= 4 * se

    def test_matrix_agrees_with_per_path(self):
        grid = s.TimeGrid.uniform(1.0, 32)
        ch = s.mixed_jump_chars()
        paths = s.simulate_many(ch, grid, 8, 50)
        vals = np.stack([p.values for p in paths])
        f = s.cos_wave(1.0)
        exact = mf_value_matrix(f, vals, grid, ch, interp_points=None)
        interp = mf_value_matrix(f, vals, grid, ch)
        for i, p in enumerate(paths):
            per_path = s.mf_process(f, p, ch)
            np.testing.assert_allclose(per_path.values, exact[i], atol=1e-12)
        assert np.max(np.abs(interp - exact)) < 1e-5

    def test_boundedness_along_horizon(self):
        grid = s.TimeGrid.uniform(1.0, 64)
        ch = s.mixed_jump_chars()
        f = s.sin_wave(2.0)
        bound = s.mf_bound(f, ch, 1.0)
        for i in range(100):
            y = s.simulate_sii(ch, grid, s.RngStream(21, i))
            m = s.mf_process(f, y, ch)
            assert np.max(np.abs(m.values)) <= bound

    def test_jump_ledger_of_mf(self):
        grid = s.TimeGrid.uniform(1.0, 16)
        ch = s.standard_poisson_chars()
        y = None
        for i in range(50):
            cand = s.simulate_sii(ch, grid, s.RngStream(5, i))
            if cand.jump_times.size:
                y = cand
                break
        assert y is not None
        f = s.sin_wave(1.0)
        m = s.mf_process(f, y, ch)
        assert m.jump_times.size == y.jump_times.size
        assert m.decomposition_residual() <= 1e-14


class TestKgProcess:
    def test_all_zero_coefficients(self):
        grid = s.TimeGrid.uniform(1.0, 16)
        x = s.CadlagPath.from_values(grid, np.full(17, 2.0))
        spec = s.SdeSpec.from_expressions(2.0, "0", "0")
        k = s.kg_process(s.sin_wave(1.0), x, spec, s.brownian_chars())
        np.testing.assert_allclose(k.values, 0.0, atol=1e-14)

    def test_drift_only_ode_cancellation(self):
        n = 2000
        grid = s.TimeGrid.uniform(1.0, n)
        still = s.CadlagPath.from_values(grid, np.zeros(n + 1))
        spec = s.SdeSpec.from_expressions(1.0, "1 * x", "0")
        ch = s.LocalCharacteristics.constant(0.0, 0.0)
        x = s.solve_sde(spec, still)
        for g in (s.sin_wave(1.0), s.cos_wave(1.0)):
            k = s.kg_process(g, x, spec, ch)
            assert np.max(np.abs(k.values)) <= 20.0 / n

    def test_matrix_agrees_with_per_path(self):
        grid = s.TimeGrid.uniform(1.0, 32)
        ch = s.mixed_jump_chars()
        spec = s.SdeSpec.from_expressions(0.25, "0.5", "ind(x > 0)")
        drivers = s.simulate_many(ch, grid, 14, 40)
        xs = [s.solve_sde(spec, d) for d in drivers]
        vals = np.stack([x.values for x in xs])
        g = s.sin_wave(2.0)
        exact = kg_value_matrix(g, vals, grid, spec, ch, interp_points=None)
        interp = kg_value_matrix(g, vals, grid, spec, ch)
        for i, x in enumerate(xs):
            per_path = s.kg_process(g, x, spec, ch)
            np.testing.assert_allclose(per_path.values, exact[i], atol=1e-12)
        assert np.max(np.abs(interp - exact)) < 1e-5


class TestMartingaleTest:
    def test_constant_process_passes(self):
        grid = s.TimeGrid.uniform(1.0, 10)
        values = np.ones((50, 11))
        rep = s.martingale_test(values, grid=grid)
        assert rep.passed
        assert rep.max_stat == 0.0

    def test_deterministic_drift_rejected(self):
        grid = s.TimeGrid.uniform(1.0, 10)
        rng = np.random.default_rng(0)
        n = 400
        values = grid.times[None, :] + 0.01 * rng.standard_normal((n, 11))
        rep = s.martingale_test(values, grid=grid)
        assert not rep.passed
        assert rep.max_stat > 10.0

    def test_degenerate_se_reported(self):
        grid = s.TimeGrid.uniform(1.0, 4)
        values = np.tile(grid.times, (20, 1))  # exact common drift
        rep = s.martingale_test(values, grid=grid)
        assert not rep.passed
        assert any("degenerate" in r.detail for r in rep.rows)

    def test_brownian_passes(self):
        grid = s.TimeGrid.uniform(1.0, 32)
        ch = s.brownian_chars()
        vals = np.stack([s.simulate_sii(ch, grid, s.RngStream(33, i)).values
                         for i in range(2000)])
        rep = s.martingale_test(vals, grid=grid, scenario="brownian")
        assert rep.passed

    def test_adaptedness_of_functionals(self):
        # functionals read columns at or before s only
        grid = s.TimeGrid.uniform(1.0, 8)
        rng = np.random.default_rng(4)
        values = rng.standard_normal((30, 9))
        mutated = values.copy()
        s_idx = 4
        mutated[:, s_idx + 1:] = 1e9
        for name, fn in default_functionals():
            np.testing.assert_array_equal(fn(values, grid, s_idx),
                                          fn(mutated, grid, s_idx))

    def test_drift_corrupted_sampler_rejected(self):
        # lemma shadow, contrapositive: wrong drift in the sampled paths makes
        # the multiplicative process fail for some wave frequency
        n_paths, n = 5000, 64
        grid = s.TimeGrid.uniform(1.0, n)
        stated = s.brownian_chars()
        corrupted = s.LocalCharacteristics.constant(0.2, 1.0)
        vals = np.stack([s.simulate_sii(corrupted, grid, s.RngStream(90, i)).values
                         for i in range(n_paths)])
        rejected = False
        presets = multiplicative_presets()
        for f in presets:
            m = mf_value_matrix(f, vals, grid, stated)
            rep = s.martingale_test(m, grid=grid, bonferroni_extra=len(presets))
            rejected = rejected or not rep.passed
        assert rejected


class TestZeroCovariation:
    def test_disjoint_jumps_pass(self):
        grid = s.TimeGrid.uniform(1.0, 64)
        ch = s.mixed_jump_chars()
        spec = s.SdeSpec.from_expressions(0.25, "0.5", "ind(x > 0)")
        f, g = s.sin_wave(1.0), s.cos_wave(1.0)
        mfs, kgs = [], []
        for i in range(400):
            l_path = s.simulate_sii(ch, grid, s.RngStream(70, 2 * i))
            u_path = s.simulate_sii(ch, grid, s.RngStream(70, 2 * i + 1))
            x = s.solve_sde(spec, l_path)
            v = s.construct_v(x, spec, u_path, l_path)
            mfs.append(s.mf_process(f, v, ch))
            kgs.append(s.kg_process(g, x, spec, ch))
        rep = s.zero_covariation_check(mfs, kgs)
        assert rep.passed
        assert rep.rows[0].statistic == 0.0

    def test_same_stream_adversarial_fails(self):
        # U = L by construction: the spliced path shares jump times with the
        # solution and the ledger product term cannot vanish
        grid = s.TimeGrid.uniform(1.0, 64)
        ch = s.standard_poisson_chars()
        spec = s.SdeSpec.from_expressions(0.25, "0.5", "ind(x > 0)")
        f, g = s.sin_wave(1.0), s.cos_wave(1.0)
        found_violation = False
        for i in range(40):
            l_path = s.simulate_sii(ch, grid, s.RngStream(71, i))
            u_path = s.simulate_sii(ch, grid, s.RngStream(71, i))  # same stream
            x = s.solve_sde(spec, l_path)
            mask = s.splicing_mask(x, spec).inverted()
            v = s.construct_v(x, spec, u_path, l_path, mask=mask)
            m = s.mf_process(f, v, ch)
            k = s.kg_process(g, x, spec, ch)
            rep = s.zero_covariation_check(m, k)
            if rep.rows[0].statistic > 0.0:
                found_violation = True
                assert not rep.passed
        assert found_violation
