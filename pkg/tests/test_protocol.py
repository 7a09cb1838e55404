import numpy as np
import pytest

from biomatch import ec_elgamal as eg
from biomatch import protocol as pr
from biomatch.quantization import make_bins, quantize_feature
from biomatch.rng import SeededRng

CURVE = "secp112r1"


def make_config(k=2, b=1, rho=(0.8, 0.9), threshold=0, delta=1.0):
    base = pr.SystemConfig.create(k, b, delta, rho, 0, curve=CURVE)
    return pr.SystemConfig(k=k, b=b, delta=delta, rho=tuple(rho),
                           threshold=threshold, curve=CURVE,
                           score_min=base.score_min, score_max=base.score_max)


def plaintext_score(cfg, tables, enroll_feats, probe_feats):
    bins = make_bins(cfg.b)
    return sum(int(tables[i].scores[quantize_feature(float(enroll_feats[i]), bins),
                                    quantize_feature(float(probe_feats[i]), bins)])
               for i in range(cfg.k))


class TestSystemConfig:
    def test_create_derives_domain(self):
        cfg = pr.SystemConfig.create(2, 2, 1.0, (0.8, 0.9), 0, curve=CURVE)
        assert cfg.score_min < 0 < cfg.score_max
        assert cfg.alpha == cfg.score_max - cfg.threshold

    def test_threshold_must_be_in_domain(self):
        cfg = pr.SystemConfig.create(1, 1, 1.0, (0.9,), 0, curve=CURVE)
        with pytest.raises(ValueError):
            pr.SystemConfig(k=1, b=1, delta=1.0, rho=(0.9,),
                            threshold=cfg.score_max + 1, curve=CURVE,
                            score_min=cfg.score_min, score_max=cfg.score_max)

    def test_rho_length_checked(self):
        with pytest.raises(ValueError):
            pr.SystemConfig(k=3, b=1, delta=1.0, rho=(0.9,), threshold=0,
                            curve=CURVE, score_min=-1, score_max=1)

    def test_json_round_trip(self):
        cfg = make_config()
        assert pr.SystemConfig.from_json(cfg.to_json()) == cfg


class TestEnroll:
    def test_zero_tables_decrypt_to_zero(self, params112, keys112, rng):
        cfg = make_config(k=2, rho=(0.0, 0.0))
        tables = pr.build_tables(cfg)
        tpl = pr.enroll([0.3, -1.2], "u", cfg, tables, keys112.h, params112, rng)
        for row in tpl.rows:
            for ct in row:
                assert eg.full_decrypt(ct, keys112.a, params112) is None

    def test_reenrollment_differs_in_bytes_not_values(self, params112, keys112, rng):
        cfg = make_config()
        tables = pr.build_tables(cfg)
        feats = [0.5, -0.5]
        t1 = pr.enroll(feats, "u", cfg, tables, keys112.h, params112, rng)
        t2 = pr.enroll(feats, "u", cfg, tables, keys112.h, params112, rng)
        for r1, r2 in zip(t1.rows, t2.rows):
            for c1, c2 in zip(r1, r2):
                assert (eg.ciphertext_to_bytes(c1, params112)
                        != eg.ciphertext_to_bytes(c2, params112))
                assert (eg.full_decrypt(c1, keys112.a, params112)
                        == eg.full_decrypt(c2, keys112.a, params112))

    def test_rows_match_plaintext_tables(self, params112, keys112, rng):
        cfg = make_config(k=2, b=1, rho=(0.8, 0.9))
        tables = pr.build_tables(cfg)
        feats = [-0.7, 0.4]
        tpl = pr.enroll(feats, "u", cfg, tables, keys112.h, params112, rng)
        bins = make_bins(cfg.b)
        for i in range(cfg.k):
            x = quantize_feature(feats[i], bins)
            for y, ct in enumerate(tpl.rows[i]):
                expected = int(tables[i].scores[x, y])
                assert (eg.full_decrypt(ct, keys112.a, params112)
                        == params112.mul_g(expected))

    def test_wrong_feature_count(self, params112, keys112, rng):
        cfg = make_config()
        with pytest.raises(ValueError):
            pr.enroll([0.1], "u", cfg, pr.build_tables(cfg), keys112.h,
                      params112, rng)


class TestLookupAndSum:
    def test_zero_tables_sum_to_identity(self, params112, keys112, rng):
        cfg = make_config(k=3, rho=(0.0, 0.0, 0.0))
        tables = pr.build_tables(cfg)
        tpl = pr.enroll([0.1, 0.2, 0.3], "u", cfg, tables, keys112.h, params112, rng)
        ct = pr.sensor_lookup_and_sum([1, -1, 0.5], tpl, cfg, keys112.h, params112, rng)
        assert eg.full_decrypt(ct, keys112.a, params112) is None

    def test_k1_matches_table_cell(self, params112, keys112, rng):
        cfg = make_config(k=1, b=1, rho=(0.9,))
        tables = pr.build_tables(cfg)
        enroll_feats, probe_feats = [-0.8], [0.6]
        tpl = pr.enroll(enroll_feats, "u", cfg, tables, keys112.h, params112, rng)
        ct = pr.sensor_lookup_and_sum(probe_feats, tpl, cfg, keys112.h, params112, rng)
        s = plaintext_score(cfg, tables, enroll_feats, probe_feats)
        assert eg.full_decrypt(ct, keys112.a, params112) == params112.mul_g(s)

    def test_randomized_by_zero_encryption(self, params112, keys112, rng):
        cfg = make_config(k=1, b=1, rho=(0.9,))
        tables = pr.build_tables(cfg)
        tpl = pr.enroll([0.5], "u", cfg, tables, keys112.h, params112, rng)
        ct = pr.sensor_lookup_and_sum([0.5], tpl, cfg, keys112.h, params112, rng)
        naked = tpl.rows[0][quantize_feature(0.5, make_bins(cfg.b))]
        assert (eg.ciphertext_to_bytes(ct, params112)
                != eg.ciphertext_to_bytes(naked, params112))

    def test_dimension_mismatch(self, params112, keys112, rng):
        cfg = make_config()
        tables = pr.build_tables(cfg)
        tpl = pr.enroll([0.5, 0.2], "u", cfg, tables, keys112.h, params112, rng)
        with pytest.raises(ValueError):
            pr.sensor_lookup_and_sum([0.5], tpl, cfg, keys112.h, params112, rng)


class TestCompareAndDecide:
    @pytest.mark.parametrize("score_offset,expected", [
        (0, True),      # S == t
        (-1, False),    # S == t - 1
    ])
    def test_threshold_edge(self, params112, keys112, rng, score_offset, expected):
        cfg = make_config(k=2, b=2, rho=(0.8, 0.9), threshold=1)
        s = cfg.threshold + score_offset
        score_ct = eg.encrypt(s, keys112.h, params112, rng)
        cset = pr.service_compare(score_ct, cfg, keys112.h, keys112.a1, params112, rng)
        assert len(cset.elements) == cfg.alpha + 1
        assert pr.sensor_decide(cset, keys112.a2, params112) is expected

    def test_max_score_accepts_with_one_zero(self, params112, keys112, rng):
        cfg = make_config(k=2, b=2, rho=(0.8, 0.9), threshold=1)
        score_ct = eg.encrypt(cfg.score_max, keys112.h, params112, rng)
        cset = pr.service_compare(score_ct, cfg, keys112.h, keys112.a1, params112, rng)
        zeros = sum(eg.is_zero(eg.final_decrypt(p, keys112.a2, params112))
                    for p in cset.elements)
        assert zeros == 1
        assert pr.sensor_decide(cset, keys112.a2, params112)

    def test_end_to_end_matches_plaintext_oracle(self, params112, keys112):
        rng = SeededRng(99)
        nprng = np.random.default_rng(1000)
        for _ in range(30):
            k = int(nprng.integers(1, 6))
            b = int(nprng.integers(1, 4))
            rho = tuple(float(r) for r in nprng.uniform(0.1, 0.95, k))
            base = pr.SystemConfig.create(k, b, 1.0, rho, 0, curve=CURVE)
            t = int(nprng.integers(base.score_min, base.score_max + 1))
            cfg = pr.SystemConfig(k=k, b=b, delta=1.0, rho=rho, threshold=t,
                                  curve=CURVE, score_min=base.score_min,
                                  score_max=base.score_max)
            tables = pr.build_tables(cfg)
            mu = nprng.normal(0, np.sqrt(rho))
            ef = mu + nprng.normal(0, np.sqrt(1.0 - np.asarray(rho)))
            pf = mu + nprng.normal(0, np.sqrt(1.0 - np.asarray(rho)))
            tpl = pr.enroll(ef, "u", cfg, tables, keys112.h, params112, rng)
            sct = pr.sensor_lookup_and_sum(pf, tpl, cfg, keys112.h, params112, rng)
            cset = pr.service_compare(sct, cfg, keys112.h, keys112.a1, params112, rng)
            verdict = pr.sensor_decide(cset, keys112.a2, params112)
            assert verdict == (plaintext_score(cfg, tables, ef, pf) >= t)
