import math

import numpy as np
import pytest

from gsrdetect import (
    CalibrationMismatchError,
    CalibrationTable,
    DegenerateTrainingError,
    GraphKind,
    Multiplicity,
    Statistic,
    WindowConfig,
    calibrate,
    calibrate_alpha_star,
    online_null,
    permute,
    quantile_threshold,
    seeded_rng,
    static_null,
)
from gsrdetect.calibrate import (
    CalibrationMode,
    family_exceedance,
    lower_quantile_threshold,
)


class TestPermute:
    def test_preserves_multiset(self, rng):
        block = rng.standard_normal((30, 3))
        out = permute(block, rng)
        assert sorted(map(tuple, out)) == sorted(map(tuple, block))

    def test_single_row(self, rng):
        block = np.array([[1.0, 2.0]])
        assert (permute(block, rng) == block).all()

    def test_orders_uniform(self):
        # each of the 6 orders of 3 items appears with frequency 1/6 +- 3 sigma
        rng = seeded_rng(77, 0)
        counts = {}
        trials = 6000
        for _ in range(trials):
            out = tuple(permute(np.array([[1.0], [2.0], [3.0]]), rng).ravel())
            counts[out] = counts.get(out, 0) + 1
        assert len(counts) == 6
        p = 1 / 6
        bound = 3 * math.sqrt(p * (1 - p) / trials)
        for c in counts.values():
            assert abs(c / trials - p) <= bound


class TestQuantileThreshold:
    def test_hundred_values(self):
        values = np.arange(1.0, 101.0)
        # ceil(0.95 * 101) = 96
        assert quantile_threshold(values, 0.05) == 96.0

    def test_clamps(self):
        values = np.arange(1.0, 11.0)
        assert quantile_threshold(values, 0.999) == 1.0
        assert quantile_threshold(values, 1e-9) == 10.0

    def test_monotone_in_level(self):
        values = np.sort(seeded_rng(3, 0).standard_normal(200))
        lvls = np.linspace(0.01, 0.5, 25)
        thrs = [quantile_threshold(values, z) for z in lvls]
        assert all(a >= b for a, b in zip(thrs, thrs[1:]))

    def test_lower_mirror(self):
        values = np.arange(1.0, 101.0)
        assert lower_quantile_threshold(values, 0.05) == 5.0


class TestStaticNull:
    def test_cardinality_and_sorted(self, rng):
        train = rng.standard_normal((50, 2))
        mu, sig = static_null(train, 20, 100, GraphKind.COMPLETE, seed=1)
        assert len(mu) == len(sig) == 100
        assert (np.diff(mu) >= 0).all() and (np.diff(sig) >= 0).all()
        assert (sig >= 2.0).all()
        assert np.median(sig) >= 2.0

    def test_constant_training_aborts(self):
        with pytest.raises(DegenerateTrainingError):
            static_null(np.ones((40, 2)), 20, 50, GraphKind.COMPLETE, seed=1)

    def test_deterministic(self, rng):
        train = rng.standard_normal((60, 3))
        a = static_null(train, 20, 50, GraphKind.MST, seed=9)
        b = static_null(train, 20, 50, GraphKind.MST, seed=9)
        assert (a[0] == b[0]).all() and (a[1] == b[1]).all()


class TestOnlineNull:
    def test_training_equal_to_window_matches_static(self, rng):
        # a single window position degenerates the scan to the static draw
        train = rng.standard_normal((20, 2))
        on = online_null(train, 20, 60, GraphKind.COMPLETE, seed=4)
        st = static_null(train, 20, 60, GraphKind.COMPLETE, seed=4)
        np.testing.assert_allclose(on[0], st[0], rtol=1e-12)
        np.testing.assert_allclose(on[1], st[1], rtol=1e-12)

    def test_max_dominates_fixed_position(self, rng):
        from gsrdetect.ratios import scan_ratios
        from gsrdetect.calibrate import _draw_perms

        train = rng.standard_normal((30, 2))
        n, k, seed = 12, 20, 8
        mu, _ = online_null(train, n, k, GraphKind.COMPLETE, seed=seed)
        centered = train - train.mean(axis=0)
        perms = _draw_perms(seed, np.arange(k), 30, 0)
        fixed = np.sort(
            [scan_ratios(centered[perms[b]][:n], GraphKind.COMPLETE).mean_ratio for b in range(k)]
        )
        assert (mu >= fixed - 1e-12).all()

    def test_cardinality(self, rng):
        train = rng.standard_normal((60, 2))
        mu, sig = online_null(train, 40, 200, GraphKind.COMPLETE, seed=2)
        assert len(mu) == len(sig) == 200


class TestAlphaStar:
    def test_single_pair_keeps_alpha(self, rng):
        values = rng.standard_normal((1, 500))
        res = calibrate_alpha_star(values, 0.05)
        assert res.alpha_star == pytest.approx(0.05)
        assert not res.fallback

    def test_independent_pairs_shrink(self, rng):
        values = rng.standard_normal((6, 2000))
        res = calibrate_alpha_star(values, 0.10)
        assert res.alpha_star < 0.10
        assert res.family_rate <= 0.10

    def test_family_rate_controlled_in_sample(self, rng):
        values = rng.standard_normal((4, 1000))
        res = calibrate_alpha_star(values, 0.08)
        thr = np.array(
            [quantile_threshold(np.sort(values[p]), res.alpha_star) for p in range(4)]
        )
        assert family_exceedance(values, thr) <= 0.08

    def test_familywise_control_held_out(self):
        # thresholds from one draw control the rate on a fresh draw
        fit = seeded_rng(5, 1).standard_normal((6, 1500))
        res = calibrate_alpha_star(fit, 0.10)
        thr = np.array([quantile_threshold(np.sort(fit[p]), res.alpha_star) for p in range(6)])
        fresh = seeded_rng(5, 2).standard_normal((6, 4000))
        rate = family_exceedance(fresh, thr)
        assert rate <= 0.10 + 2 * math.sqrt(0.10 / 1500)

    def test_literal_stays_at_alpha(self, rng):
        values = rng.standard_normal((6, 1000))
        res = calibrate_alpha_star(values, 0.10, multiplicity=Multiplicity.LITERAL)
        assert res.alpha_star == pytest.approx(0.10)

    def test_family_rate_on_real_calibration(self, rng):
        # three windows and both statistics from shared draws: the joint
        # exceedance over the calibration's own permutations stays at alpha
        from gsrdetect.calibrate import _null_matrix

        train = rng.standard_normal((80, 3))
        lengths = (12, 20, 30)
        values, _ = _null_matrix(train, lengths, 500, GraphKind.COMPLETE, 9, CalibrationMode.ONLINE)
        matrix = np.stack([values[key] for key in sorted(values, key=lambda t: (t[0], t[1].value))])
        res = calibrate_alpha_star(matrix, 0.10)
        thr = np.array([quantile_threshold(np.sort(row), res.alpha_star) for row in matrix])
        assert family_exceedance(matrix, thr) <= 0.10
        assert res.alpha_star <= 0.10


class TestCalibrationTable:
    @pytest.fixture
    def table(self, rng):
        train = rng.standard_normal((80, 3))
        cfg = WindowConfig(lengths=(16, 24), alpha=0.1, permutations=120, seed=6)
        return calibrate(train, cfg, CalibrationMode.ONLINE)

    def test_alpha_star_within_bounds(self, table):
        assert 0 < table.alpha_star <= 0.1

    def test_entries_complete(self, table):
        for n in (16, 24):
            for stat in Statistic:
                entry = table.entries[(n, stat)]
                assert len(entry.values) == 120
                assert (np.diff(entry.values) >= 0).all()
                assert entry.values[0] <= entry.threshold <= entry.values[-1]

    def test_json_round_trip(self, table, tmp_path):
        path = tmp_path / "cal.json"
        table.save(path)
        loaded = CalibrationTable.load(path)
        assert loaded.alpha_star == table.alpha_star
        assert loaded.config == table.config
        for key, entry in table.entries.items():
            np.testing.assert_array_equal(loaded.entries[key].values, entry.values)
            assert loaded.entries[key].threshold == entry.threshold

    def test_config_mismatch_detected(self, table):
        other = WindowConfig(lengths=(16, 24), alpha=0.2, permutations=120, seed=6)
        with pytest.raises(CalibrationMismatchError):
            table.check_compatible(other)
        table.check_compatible(table.config)

    def test_deterministic_rebuild(self, rng):
        train = rng.standard_normal((60, 2))
        cfg = WindowConfig(lengths=(20,), alpha=0.05, permutations=80, seed=3)
        a = calibrate(train, cfg, CalibrationMode.STATIC)
        b = calibrate(train, cfg, CalibrationMode.STATIC)
        assert a.to_json_dict() == b.to_json_dict()

    def test_static_mode_threshold_at_level(self, rng):
        # one window still carries two statistics, so the joint level is
        # below alpha but the thresholds stay within each sorted vector
        train = rng.standard_normal((80, 4))
        cfg = WindowConfig(lengths=(20,), alpha=0.1, permutations=200, seed=13)
        table = calibrate(train, cfg, CalibrationMode.STATIC)
        assert 0 < table.alpha_star <= 0.1

    def test_foreign_artifact_rejected(self, tmp_path):
        import json

        path = tmp_path / "bogus.json"
        path.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(CalibrationMismatchError):
            CalibrationTable.load(path)

    def test_tampered_config_hash_rejected(self, table, tmp_path):
        import json

        doc = table.to_json_dict()
        doc["config"]["alpha"] = 0.5
        path = tmp_path / "tampered.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(CalibrationMismatchError):
            CalibrationTable.load(path)

    def test_literal_multiplicity_config(self, rng):
        train = rng.standard_normal((60, 2))
        cfg = WindowConfig(
            lengths=(12, 20), alpha=0.1, permutations=150, seed=8,
            multiplicity=Multiplicity.LITERAL,
        )
        table = calibrate(train, cfg, CalibrationMode.ONLINE)
        # the literal reading does not shrink the per-test level
        assert table.alpha_star == pytest.approx(0.1)
