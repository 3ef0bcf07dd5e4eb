
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from stable_fields.errors import InsufficientDataError, ParameterError
from stable_fields.kernels import KernelSpec
from stable_fields.regularity import (
    DyadicGrid,
    chain_pair_max,
    chaining_fields,
    chaining_increment_bound,
    dyadic_grid,
    dyadic_h_grid,
    fit_holder_exponent,
    modulus_normalizer,
    modulus_profile,
    modulus_ratio_series,
    oscillation,
    oscillation_bruteforce,
    simulate_chaining_fields,
)
from stable_fields.simulate import LfsmDiscretization, SamplePath, map_replicates
from stable_fields.stable_core import RngStream


def unit_path(values):
    values = np.asarray(values, float)
    return SamplePath(None, values, 1.0 / (values.shape[0] - 1))


class TestDyadicGrid:
    def test_level_zero(self):
        g = dyadic_grid(0, 1)
        np.testing.assert_array_equal(g.points(), [[0.0]])

    def test_level_two(self):
        np.testing.assert_array_equal(dyadic_grid(2, 1).points().ravel(), [0, 0.25, 0.5, 0.75])

    def test_size(self):
        assert dyadic_grid(3, 2).size == 64 == len(dyadic_grid(3, 2).points())

    @pytest.mark.parametrize("m,d", [(m, d) for m in range(1, 7) for d in (1, 2)])
    def test_neighbor_bound_and_chaining(self, m, d):
        g = dyadic_grid(m, d)
        assert g.max_neighbor_count() <= 2 ** d
        assert g.verify_chaining()

    @pytest.mark.parametrize("m,d", [(3, 1), (5, 1), (3, 2)])
    def test_neighbors_match_enumeration(self, m, d):
        g = DyadicGrid(m, d)
        coarse = DyadicGrid(m - 1, d).points()
        for k, p in zip(g.indices(), g.points()):
            close = np.max(np.abs(coarse - p), axis=1) <= 2.0 ** -m + 1e-15
            expect = {tuple(c) for c in (coarse[close] * 2 ** (m - 1)).round().astype(int)}
            assert {tuple(c) for c in g.neighbors(k)} == expect

    def test_neighbor_audit_m5_d2(self):
        assert dyadic_grid(5, 2).max_neighbor_count() <= 4

    def test_invalid(self):
        with pytest.raises(ParameterError):
            DyadicGrid(-1, 1)
        with pytest.raises(ParameterError):
            DyadicGrid(0, 1).neighbors([0])


class TestOscillation:
    def test_constant(self):
        assert oscillation(unit_path(np.full(33, 2.5)), 1 / 32) == 0.0

    def test_linear(self):
        t = np.linspace(0, 1, 257)
        assert oscillation(unit_path(t), 0.25) == pytest.approx(0.25, abs=1e-15)

    def test_below_resolution(self):
        with pytest.raises(ParameterError):
            oscillation(unit_path(np.zeros(9)), 0.05)

    @given(arrays(np.float64, st.integers(2, 256), elements=st.floats(-1e6, 1e6)), st.integers(1, 300))
    def test_matches_bruteforce_1d(self, vals, w):
        assert oscillation(SamplePath(None, vals, 1.0), w) == oscillation_bruteforce(vals, 1.0, w)

    @pytest.mark.parametrize("w", [1, 2, 5, 15])
    def test_matches_bruteforce_2d(self, w):
        vals = np.random.default_rng(w).standard_cauchy((16, 16))
        assert oscillation(SamplePath(None, vals, 1.0), w) == oscillation_bruteforce(vals, 1.0, w)

    def test_broadcast_axes(self):
        base = np.random.default_rng(1).normal(size=(12, 1))
        vals = np.broadcast_to(base, (12, 12))
        assert oscillation(SamplePath(None, vals, 1.0), 3) == oscillation_bruteforce(np.array(vals), 1.0, 3)

    @given(arrays(np.float64, 64, elements=st.floats(-100, 100)))
    def test_monotone_and_subadditive(self, vals):
        path = SamplePath(None, vals, 1.0)
        om = {w: oscillation(path, w) for w in range(1, 40)}
        for w1 in range(1, 20):
            assert om[w1] <= om[w1 + 1]
            for w2 in range(1, 20):
                assert om[w1 + w2] <= om[w1] + om[w2] + 1e-9


class TestHolderFit:
    def test_power_at_origin(self):
        t = np.linspace(0, 1, 2 ** 14 + 1)
        fit = fit_holder_exponent([unit_path(t ** 0.3)], 2.0 ** np.arange(-10, -3))
        assert fit.exponent == pytest.approx(0.3, abs=0.02)

    def test_interior_cusp(self):
        t = np.linspace(0, 1, 2 ** 12 + 1)
        fit = fit_holder_exponent([unit_path(np.abs(t - 0.5) ** 0.6)], 2.0 ** np.arange(-9, -3))
        assert fit.exponent == pytest.approx(0.6, abs=0.02) and fit.stderr < 0.02

    def test_log_power_removes_log_factor(self):
        h = 2.0 ** np.arange(-12, -3)
        t = np.linspace(0, 1, 2 ** 14 + 1)
        # a path whose oscillation is exactly h**0.5 * log(1/h)**0.5 near the origin
        with np.errstate(divide="ignore"):
            vals = np.where(t > 0, np.sqrt(t * np.log(1 / np.where(t > 0, t, 1))), 0.0)
        fit = fit_holder_exponent([unit_path(vals)], h, log_power=0.5)
        assert fit.exponent == pytest.approx(0.5, abs=0.02)

    def test_fine_scales_excluded(self):
        t = np.linspace(0, 1, 65)
        with pytest.raises(InsufficientDataError):
            fit_holder_exponent([unit_path(t)], 2.0 ** np.arange(-6, -2))

    def test_default_grid(self):
        h = dyadic_h_grid(2.0 ** -10)
        assert h[0] == 2.0 ** -7 and h[-1] == 0.25

    def test_profile_csv(self, tmp_path):
        t = np.linspace(0, 1, 257)
        prof = modulus_profile([unit_path(t), unit_path(2 * t)], [1 / 64, 1 / 16])
        assert prof.is_monotone()
        prof.to_csv(tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "h,omega_median,omega_q25,omega_q75" and len(lines) == 3


class TestRatioSeries:
    h = 2.0 ** np.arange(-8, -3)

    def test_constant_zero(self):
        paths = [unit_path(np.full(2 ** 10 + 1, c)) for c in (1.0, -3.0)]
        rs = modulus_ratio_series(paths, 0.8, 1.0, 1.8, 1.0, self.h)
        assert np.all(rs.ratios == 0) and rs.verdict and rs.fraction_decreasing == 1.0

    def test_normalizer_monotone_in_gamma(self):
        hs = 2.0 ** -np.arange(2, 20)  # log(1/h) > 1
        a = modulus_normalizer(hs, 0.8, 1.0, 1.8, 0.5)
        b = modulus_normalizer(hs, 0.8, 1.0, 1.8, 1.5)
        assert np.all(a >= b)

    def test_smooth_path_decreasing(self):
        t = np.linspace(0, 1, 2 ** 12 + 1)
        rs = modulus_ratio_series([unit_path(np.sin(3 * t))], 0.8, 1.0, 1.8, 1.0, self.h)
        assert rs.verdict and rs.path_decreasing.all()

    @pytest.mark.parametrize("theta2,gamma", [(1.5, 1.0), (1.0, 0.0), (1.0, 1.8)])
    def test_refuses(self, theta2, gamma):
        with pytest.raises(ParameterError):
            modulus_ratio_series([unit_path(np.zeros(9))], 0.8, theta2, 1.8, gamma, self.h)


class TestChaining:
    def test_pair_max_against_neighbors(self):
        n = 4
        v = np.random.default_rng(2).normal(size=2 ** n)
        g = DyadicGrid(n, 1)
        brute = 0.0
        for k in g.indices():
            for j in g.neighbors(k):
                brute = max(brute, abs(v[k[0]] - v[2 * j[0]]))
        assert chain_pair_max(v, n) == brute

    def test_fields_split(self):
        n, H = 3, 0.7
        ext = np.arange(2 ** n + 2, dtype=float) ** 2
        x, ys = chaining_fields(ext, n, H)
        assert x.values[0] == 0 and x.values.size == 2 ** n
        np.testing.assert_allclose(ys[1].values, 2 ** (n * H) * np.diff(ext)[1:])
        np.testing.assert_allclose(ys[-1].values, -2 ** (n * H) * np.diff(ext)[:-1])

    def test_constant_both_zero(self):
        model = KernelSpec.constant(1.5)
        reps = [simulate_chaining_fields(model, 4, RngStream(3, r)) for r in range(5)]
        rep = chaining_increment_bound([r[0] for r in reps], {v: [r[1][v] for r in reps] for v in (1, -1)},
                                       4, 0.5, 0.5)
        assert rep.lhs == 0 and rep.rhs == 0 and rep.holds

    def _lfsm_reps(self, model, seed, R=60):
        disc = LfsmDiscretization(substeps=4, near=16)
        return map_replicates(lambda s: simulate_chaining_fields(model, 5, s, lfsm_disc=disc), seed, R)

    def _report(self, reps, n=5, gamma=0.5, H=0.7):
        return chaining_increment_bound([r[0] for r in reps], {v: [r[1][v] for r in reps] for v in (1, -1)},
                                        n, gamma, H)

    def test_homogeneity(self):
        base = KernelSpec.lfsm(0.7, 1.5)
        a = self._report(self._lfsm_reps(base, 4))
        b = self._report(self._lfsm_reps(base.scaled(2.0), 4))
        assert b.lhs == pytest.approx(2 ** 0.5 * a.lhs, rel=1e-12)
        assert b.rhs == pytest.approx(2 ** 0.5 * a.rhs, rel=1e-12)

    def test_lfsm_bound_holds(self):
        rep = self._report(self._lfsm_reps(KernelSpec.lfsm(0.7, 1.5), 5, R=200))
        assert rep.holds and rep.lhs < rep.rhs

    def test_mismatched_seeds(self):
        reps = self._lfsm_reps(KernelSpec.lfsm(0.7, 1.5), 6, R=3)
        others = self._lfsm_reps(KernelSpec.lfsm(0.7, 1.5), 7, R=3)
        with pytest.raises(ParameterError):
            chaining_increment_bound([r[0] for r in reps], {v: [r[1][v] for r in others] for v in (1, -1)},
                                     5, 0.5, 0.7)

    def test_unsupported_model(self):
        with pytest.raises(ParameterError):
            simulate_chaining_fields(KernelSpec.iid(1.5), 3, RngStream(0))
