import math

import numpy as np
import pytest

from biomatch import _kernels
from biomatch import evaluation as ev
from biomatch.quantization import build_table, make_bins, quantize_feature
from biomatch.stats_core import FeatureModel, llr_continuous


class TestFeatureSets:
    def test_catalog(self):
        assert ev.FEATURE_SETS["fs1"].k == 21
        assert ev.FEATURE_SETS["fs2"].k == 20
        assert ev.FEATURE_SETS["fs3"].k == 12
        assert ev.FEATURE_SETS["fs1"].rho[0] == 0.70
        assert ev.FEATURE_SETS["fs1"].rho[-1] == 0.90


class TestGenPopulation:
    def test_shape(self):
        pop = ev.gen_population(ev.FEATURE_SETS["fs3"], 50, 4, seed=1)
        assert pop.shape == (50, 4, 12)

    def test_marginal_variance_is_one(self):
        fs = ev.FEATURE_SETS["fs2"]
        pop = ev.gen_population(fs, 2000, 5, seed=2)
        var = pop.reshape(-1, fs.k).var(axis=0)
        assert np.all(np.abs(var - 1.0) < 0.08)

    def test_per_user_mean_variance_matches_rho(self):
        fs = ev.FEATURE_SETS["fs3"]
        pop = ev.gen_population(fs, 4000, 50, seed=3)
        # Mean over many captures estimates the per-user mean; its variance
        # across users estimates rho (plus a small (1-rho)/n bias).
        user_means = pop.mean(axis=1)
        est = user_means.var(axis=0) - (1.0 - np.asarray(fs.rho)) / 50
        assert np.all(np.abs(est - np.asarray(fs.rho)) < 0.06)

    def test_seed_reproducibility(self):
        fs = ev.FEATURE_SETS["fs3"]
        a = ev.gen_population(fs, 20, 3, seed=9)
        b = ev.gen_population(fs, 20, 3, seed=9)
        c = ev.gen_population(fs, 20, 3, seed=10)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestTrialPairs:
    def test_genuine_count_and_impostor_cross_user(self):
        fs = ev.FEATURE_SETS["fs3"]
        pop = ev.gen_population(fs, 30, 5, seed=4)
        ge, gp, ie, ip = ev.trial_pairs(pop, 500, seed=5)
        assert len(ge) == len(gp) == 30 * (5 * 4 // 2)
        assert len(ie) == len(ip) == 500
        # No impostor pair may come from the same user: with distinct per-user
        # means, identical first-capture values would betray a same-user pair.
        assert not np.any(np.all(ie == ip, axis=1))


class TestScoreTrials:
    def test_continuous_matches_scalar_oracle(self):
        fs = ev.FEATURE_SETS["fs3"]
        pop = ev.gen_population(fs, 8, 3, seed=6)
        trials = ev.score_trials(fs, pop, 50, seed=7)
        ge, gp, _, _ = ev.trial_pairs(pop, 50, seed=7)
        models = [FeatureModel(r) for r in fs.rho]
        for row in range(5):
            want = sum(llr_continuous(float(p), float(t), m)
                       for p, t, m in zip(gp[row], ge[row], models))
            assert trials.genuine[row] == pytest.approx(want, abs=1e-9)

    def test_quantized_matches_scalar_oracle(self):
        fs = ev.FEATURE_SETS["fs3"]
        b, delta = 3, 1.0
        pop = ev.gen_population(fs, 8, 3, seed=6)
        trials = ev.score_trials(fs, pop, 50, seed=7, b=b, delta=delta)
        ge, gp, ie, ip = ev.trial_pairs(pop, 50, seed=7)
        bins = make_bins(b)
        tables = [build_table(b, r, delta) for r in fs.rho]
        for row in range(5):
            want = sum(int(t.scores[quantize_feature(float(e), bins),
                                    quantize_feature(float(p), bins)])
                       for t, e, p in zip(tables, ge[row], gp[row]))
            assert trials.genuine[row] == want

    def test_quantized_requires_delta(self):
        fs = ev.FEATURE_SETS["fs3"]
        pop = ev.gen_population(fs, 4, 2, seed=8)
        with pytest.raises(ValueError):
            ev.score_trials(fs, pop, 10, seed=9, b=3)


class TestKernels:
    def test_numba_and_numpy_agree(self):
        fs = ev.FEATURE_SETS["fs3"]
        pop = ev.gen_population(fs, 10, 3, seed=10)
        ge, gp, ie, ip = ev.trial_pairs(pop, 100, seed=11)
        enroll = np.vstack([ge, ie])
        probe = np.vstack([gp, ip])
        interior = make_bins(4).interior
        tables = np.stack([build_table(4, r, 1.0).scores for r in fs.rho])
        rho = np.asarray(fs.rho)

        q_np = _kernels._quantized_scores_np(interior, tables, enroll, probe)
        c_np = _kernels._continuous_scores_np(rho, enroll, probe)
        if _kernels.USE_NUMBA:
            q_nb = _kernels._quantized_scores_nb(
                interior, tables.astype(np.int32), enroll, probe)
            c_nb = _kernels._continuous_scores_nb(rho, enroll, probe)
            assert np.array_equal(q_np, q_nb)
            assert np.allclose(c_np, c_nb, atol=1e-10)
        # Dispatcher output matches whichever path is active.
        assert np.array_equal(
            _kernels.quantized_scores(interior, tables, enroll, probe), q_np)
        assert np.allclose(
            _kernels.continuous_scores(rho, enroll, probe), c_np, atol=1e-10)


class TestEer:
    def _trials(self, genuine, impostor):
        return ev.TrialSet(genuine=np.asarray(genuine, dtype=float),
                           impostor=np.asarray(impostor, dtype=float))

    def test_perfect_separation_is_zero(self):
        t = self._trials([10, 11, 12], [-5, -4, -3])
        val, _ = ev.eer(t)
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_identical_distributions_is_half(self):
        rng = np.random.default_rng(12)
        same = rng.normal(0, 1, 20_000)
        val, _ = ev.eer(self._trials(same, same.copy()))
        assert val == pytest.approx(0.5, abs=0.02)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ev.eer(self._trials([], [1.0]))

    def test_interpolated_crossing(self):
        # Genuine ~ N(2,1), impostor ~ N(-2,1): EER is Phi(-2) ~ 2.28%.
        rng = np.random.default_rng(13)
        t = self._trials(rng.normal(2, 1, 100_000), rng.normal(-2, 1, 100_000))
        val, t_star = ev.eer(t)
        assert val == pytest.approx(0.02275, abs=0.002)
        assert abs(t_star) < 0.1


class TestRoc:
    def test_far_descends_gar_descends(self):
        rng = np.random.default_rng(14)
        t = ev.TrialSet(genuine=rng.normal(1, 1, 2000),
                        impostor=rng.normal(-1, 1, 2000))
        pts = ev.roc_points(t)
        fars = [p[1] for p in pts]
        gars = [p[2] for p in pts]
        assert fars[0] == 1.0 and fars[-1] == 0.0
        assert all(a >= b for a, b in zip(fars, fars[1:]))
        assert all(a >= b for a, b in zip(gars, gars[1:]))

    def test_csv_shape(self):
        t = ev.TrialSet(genuine=np.array([1.0, 2.0]),
                        impostor=np.array([-1.0, 0.0]))
        lines = ev.roc_csv(t).strip().splitlines()
        assert lines[0] == "threshold,far,gar"
        assert all(len(ln.split(",")) == 3 for ln in lines[1:])


class TestBench:
    def test_alpha_time_grows(self):
        res = ev.bench_alpha(alphas=(2, 16), reps=3)
        assert res[1][1] > res[0][1]

    def test_csv(self):
        csv = ev.bench_alpha_csv([(10, 1.5), (20, 3.0)])
        assert csv.splitlines()[0] == "alpha,time_ms"
        assert len(csv.strip().splitlines()) == 3

    def test_linear_fit_of_exact_line(self):
        pts = [(a, 0.3 * a + 2.0) for a in (10, 20, 30, 40)]
        assert ev.linear_fit_r2(pts) == pytest.approx(1.0, abs=1e-12)
