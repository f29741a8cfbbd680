import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdrift import (ConfigError, ExperimentConfig, GOEInitial, LinearProfile,
                       OverlapAccumulator, ProfileInitial, bin_overlap_curve,
                       empirical_cdf, estimate_theta, resolvent_diagonal,
                       run_overlap_experiment, solve_fixed_point)
from specdrift.montecarlo import (OverlapCurve, _draw_sample, accumulate_overlaps,
                                  curves_from_accumulator, theta_sample,
                                  theta_sample_resolvent)


def small_config(**overrides):
    base = dict(n=40, t=0.5, samples=8, initial=GOEInitial(1.0),
                target_indices=(20,), master_seed=99)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            small_config(samples=0)
        with pytest.raises(ConfigError):
            small_config(target_indices=(0,))
        with pytest.raises(ConfigError):
            small_config(target_indices=(41,))
        with pytest.raises(ConfigError):
            small_config(t=-1.0)

    def test_describe_roundtrip(self):
        d = small_config().describe()
        assert d["n"] == 40 and d["target_indices"] == [20]


class TestDrawSample:
    def test_row_sums(self):
        config = small_config()
        _a, _lam, vecs = _draw_sample(config, 0)
        sq = vecs ** 2
        assert np.max(np.abs(sq.sum(axis=0) - 1.0)) <= 1e-10
        assert np.max(np.abs(sq.sum(axis=1) - 1.0)) <= 1e-10

    def test_determinism(self):
        config = small_config()
        a1, l1, v1 = _draw_sample(config, 3)
        a2, l2, v2 = _draw_sample(config, 3)
        assert np.array_equal(a1, a2) and np.array_equal(l1, l2) and np.array_equal(v1, v2)

    def test_t0_identity(self):
        config = small_config(t=0.0)
        _a, lam, vecs = _draw_sample(config, 0)
        assert np.array_equal(vecs, np.eye(config.n))

    def test_profile_initial_deterministic_diagonal(self, linear_profile):
        config = small_config(initial=ProfileInitial(linear_profile))
        a, _lam, _vecs = _draw_sample(config, 0)
        assert np.allclose(a, (np.arange(1, 41) - 0.5) / 40)


class TestAccumulator:
    def _accs(self, config):
        full = accumulate_overlaps(config)
        left = OverlapAccumulator(config.n, config.target_indices)
        right = OverlapAccumulator(config.n, config.target_indices)
        for k, (a, sq) in full._parts.items():
            (left if k % 2 == 0 else right).add_sample(k, a, sq)
        return full, left, right

    def test_merge_associative_and_order_free(self):
        config = small_config()
        full, left, right = self._accs(config)
        lr = left.merge(right).finalize()
        rl = right.merge(left).finalize()
        ref = full.finalize()
        for x, y in zip(lr, ref):
            assert np.array_equal(x, y)
        for x, y in zip(rl, ref):
            assert np.array_equal(x, y)

    def test_duplicate_substream_rejected(self):
        config = small_config()
        full, left, _right = self._accs(config)
        with pytest.raises(ConfigError):
            full.merge(left)

    def test_bad_rows_rejected(self):
        acc = OverlapAccumulator(4, (1,))
        with pytest.raises(Exception):
            acc.add_sample(0, np.zeros(4), np.full((1, 4), 0.3))


class TestOverlapExperiment:
    def test_bit_exact_rerun(self):
        c1 = run_overlap_experiment(small_config())[20]
        c2 = run_overlap_experiment(small_config())[20]
        assert np.array_equal(c1.values, c2.values)
        assert np.array_equal(c1.a, c2.a)

    def test_workers_match_serial(self):
        config = small_config()
        serial = run_overlap_experiment(config, workers=1)[20]
        parallel = run_overlap_experiment(config, workers=4)[20]
        assert np.array_equal(serial.values, parallel.values)

    def test_single_sample_row_sum(self):
        curve = run_overlap_experiment(small_config(samples=1))[20]
        assert curve.values.sum() / curve.n == pytest.approx(1.0, abs=1e-10)

    def test_small_t_diagonal_dominates(self, linear_profile):
        config = small_config(t=1e-8, initial=ProfileInitial(linear_profile),
                              samples=2)
        curve = run_overlap_experiment(config)[20]
        sq = curve.values / curve.n  # back to raw mean
        assert sq[19] >= 1.0 - 1e-4
        assert np.max(np.delete(sq, 19)) <= 1e-4

    def test_csv_export(self, tmp_path):
        curve = run_overlap_experiment(small_config(samples=2))[20]
        path = tmp_path / "c.csv"
        curve.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "j,a_j_mean,overlap_mean_timesN,stderr_timesN"
        assert len(lines) == curve.n + 1


class TestBinning:
    def _flat_curve(self, n=50):
        return OverlapCurve(index=1, n=n, t=1.0, a=np.linspace(-1, 1, n),
                            values=np.full(n, 3.0), stderr=np.full(n, 0.1),
                            samples=10)

    def test_window_one_identity(self):
        c = self._flat_curve()
        b = bin_overlap_curve(c, 1)
        assert np.array_equal(b.values, c.values)

    def test_constant_curve_unchanged(self):
        b = bin_overlap_curve(self._flat_curve(), 5)
        assert np.max(np.abs(b.values - 3.0)) <= 1e-12

    def test_mass_preserved(self):
        gen = np.random.default_rng(0)
        c = self._flat_curve()
        c.values = gen.uniform(0, 2, c.n)
        b = bin_overlap_curve(c, 5)
        assert b.values.sum() == pytest.approx(c.values.sum(), abs=1e-12)

    def test_window_too_large(self):
        with pytest.raises(Exception):
            bin_overlap_curve(self._flat_curve(), 51)


class TestTheta:
    def test_g_one_is_empirical_stieltjes(self):
        config = small_config(samples=1)
        a, lam, vecs = _draw_sample(config, 0)
        z = 0.3 + 0.2j
        direct = np.mean(1.0 / (lam - z))
        assert abs(theta_sample(a, lam, vecs, z, lambda x: 1.0) - direct) <= 1e-12

    def test_two_routes_agree(self):
        config = small_config(samples=1)
        gen_a, lam, vecs = _draw_sample(config, 0)
        m_t = (vecs * lam) @ vecs.T
        z = -0.5 + 0.1j
        g = lambda x: 1.0 if x <= 0 else 0.0
        v1 = theta_sample(gen_a, lam, vecs, z, g)
        v2 = theta_sample_resolvent(gen_a, m_t, z, g)
        assert abs(v1 - v2) <= 1e-10

    def test_indicator_real_parts_antisymmetric(self):
        # at z = i eta the two half-line indicators carry opposite real
        # parts (joint spectrum symmetry); their sum is the g=1 trace whose
        # real part vanishes
        config = small_config(n=100, samples=40)
        neg = estimate_theta(config, 0.5j, lambda a: 1.0 if a <= 0 else 0.0)
        pos = estimate_theta(config, 0.5j, lambda a: 1.0 if a > 0 else 0.0)
        tol = 3.0 * max(neg.stderr_re + pos.stderr_re, 1e-3)
        assert abs(neg.value.real + pos.value.real) <= tol
        assert abs(neg.value.real) > 0.05  # each half alone is not zero

    def test_real_z_rejected(self):
        with pytest.raises(Exception):
            estimate_theta(small_config(), 1.0 + 0j, lambda a: 1.0)


class TestEmpiricalCdf:
    def test_total_mass(self):
        est = empirical_cdf(small_config(samples=2), 100.0, 100.0)
        assert est.value.real == pytest.approx(1.0, abs=1e-12)

    def test_empty_below(self):
        est = empirical_cdf(small_config(samples=2), -100.0, 100.0)
        assert est.value.real == 0.0

    def test_monotone(self):
        config = small_config(samples=4)
        v = [empirical_cdf(config, lam, 0.0).value.real for lam in (-1.0, 0.0, 1.0)]
        assert v[0] <= v[1] <= v[2]


class TestResolventDiagonal:
    def test_far_field(self):
        config = small_config(samples=2)
        vals = resolvent_diagonal(config, 100.0 + 1.0j)
        assert np.max(np.abs(vals + 1.0 / (100.0 + 1.0j))) <= 1e-3

    def test_t0_exact(self, linear_profile):
        config = small_config(t=0.0, initial=ProfileInitial(linear_profile), samples=1)
        z = 0.5 + 0.2j
        vals = resolvent_diagonal(config, z)
        a = (np.arange(1, 41) - 0.5) / 40
        assert np.max(np.abs(vals - 1.0 / (a - z))) <= 1e-12

    def test_profile_initial_matches_fixed_point_kernel(self, linear_profile):
        config = ExperimentConfig(n=400, t=1.0, samples=200,
                                  initial=ProfileInitial(linear_profile),
                                  master_seed=11)
        z = 0.5 + 0.05j
        rows = []
        for k in range(config.samples):
            _a, lam, vecs = _draw_sample(config, k)
            rows.append(vecs ** 2 @ (1.0 / (lam - z)))
        rows = np.array(rows)
        vals = rows.mean(axis=0)
        stderr = np.abs(rows - vals).std(axis=0, ddof=1) / np.sqrt(config.samples)
        m = solve_fixed_point(linear_profile, 1.0, z)
        x = (np.arange(1, 401) - 0.5) / 400
        predicted = 1.0 / (linear_profile.eval(x) - z - 1.0 * m)
        bulk = slice(20, 380)
        dev = np.abs(vals - predicted)[bulk]
        # sup-norm bias allowance plus a noise band for the sampled mean
        assert np.all(dev <= 0.03 + 3.0 * stderr[bulk])
        assert np.median(dev) <= 0.03


class TestProperties:
    @given(seed=st.integers(min_value=0, max_value=2**30))
    @settings(max_examples=10, deadline=None)
    def test_row_sums_any_seed(self, seed):
        config = small_config(n=20, samples=1, master_seed=seed, target_indices=(10,))
        _a, _lam, vecs = _draw_sample(config, 0)
        assert np.max(np.abs((vecs ** 2).sum(axis=0) - 1.0)) <= 1e-10

    @given(window=st.integers(min_value=1, max_value=20))
    @settings(max_examples=20, deadline=None)
    def test_binning_mass_any_window(self, window):
        gen = np.random.default_rng(window)
        n = 60
        c = OverlapCurve(index=1, n=n, t=1.0, a=np.linspace(-1, 1, n),
                         values=gen.uniform(0, 2, n), stderr=np.zeros(n), samples=1)
        b = bin_overlap_curve(c, window)
        assert b.values.sum() == pytest.approx(c.values.sum(), abs=1e-10)
