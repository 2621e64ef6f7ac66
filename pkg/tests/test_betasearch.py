import numpy as np
import pytest

from conftest import make_volume
from kswap import (BetaCurve, KswapError, TransferConfig, averaged_optimal,
                   evaluate_pair_at_beta, grid_search, naive_predict,
                   optimal_per_pair, surface_dice)
from kswap.betasearch import validate_grid
from kswap.predict import BaselineSegmenter
from kswap.volume import ScanCollection, binarize_probability, minmax_normalize


def curve(pair, points):
    return BetaCurve(pair_id=pair, points=tuple(points))


def tiny_pair(rng, shift=0.3):
    """Two-scan phantom pair: bright square sources, dimmed targets with masks."""
    def scans(level, domain, n):
        out, masks = [], []
        for k in range(n):
            data = np.full((4, 16, 16), 0.05, dtype=np.float32)
            lo = 4 + k
            data[:, lo:lo + 7, lo:lo + 7] = level
            noise = rng.random((4, 16, 16), dtype=np.float64) * 0.02
            vol = make_volume(minmax_normalize(np.clip(data + noise, 0, 1)),
                              vol_id=f"{domain}{k}", domain=domain)
            mask = np.zeros((4, 16, 16), dtype=np.float32)
            mask[:, lo:lo + 7, lo:lo + 7] = 1.0
            out.append(vol)
            masks.append(make_volume(mask, kind="mask", vol_id=f"{domain}{k}m",
                                     domain=domain))
        return out, masks

    s_scans, s_masks = scans(0.9, "src", 2)
    t_scans, t_masks = scans(0.9 - shift, "tgt", 2)
    return (ScanCollection(s_scans, "src", s_masks),
            ScanCollection(t_scans, "tgt", t_masks))


class TestBetaCurve:
    def test_validation(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            curve(("a", "b"), [(0.2, 0.5), (0.1, 0.6)])
        with pytest.raises(ValueError, match="strictly increasing"):
            curve(("a", "b"), [(0.1, 0.5), (0.1, 0.6)])
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            curve(("a", "b"), [(0.1, 1.5)])
        with pytest.raises(ValueError, match="at least one"):
            curve(("a", "b"), [])

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            validate_grid([])
        with pytest.raises(ValueError):
            validate_grid([0.1, 0.1])
        with pytest.raises(ValueError):
            validate_grid([0.1, 0.05])
        assert validate_grid((0.01, 0.02)) == [0.01, 0.02]


class TestOptimalPerPair:
    def test_argmax(self):
        got = optimal_per_pair([curve(("s", "t"), [(0.01, 0.5), (0.03, 0.7)])])
        assert got[("s", "t")] == 0.03

    def test_tie_breaks_to_smaller_beta(self):
        got = optimal_per_pair([curve(("s", "t"), [(0.01, 0.7), (0.03, 0.7)])])
        assert got[("s", "t")] == 0.01

    def test_matches_bruteforce(self, rng):
        curves = []
        for k in range(3):
            betas = (0.01, 0.02, 0.05)
            scores = rng.random(3)
            curves.append(curve((f"s{k}", "t"), list(zip(betas, scores))))
        got = optimal_per_pair(curves)
        for c in curves:
            best = max(c.points, key=lambda p: (p[1], -p[0]))
            assert got[c.pair_id] == best[0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            optimal_per_pair([])


class TestAveragedOptimal:
    def test_single_curve_matches_per_pair(self):
        c = curve(("s", "t"), [(0.01, 0.4), (0.05, 0.9)])
        assert averaged_optimal([c]) == optimal_per_pair([c])[("s", "t")]

    def test_mean_argmax(self):
        c1 = curve(("a", "t"), [(0.01, 0.8), (0.03, 0.2)])
        c2 = curve(("b", "t"), [(0.01, 0.2), (0.03, 0.9)])
        assert averaged_optimal([c1, c2]) == 0.03

    def test_matches_bruteforce(self, rng):
        betas = (0.01, 0.03, 0.07, 0.1)
        curves = [curve((f"s{k}", "t"), list(zip(betas, rng.random(4))))
                  for k in range(6)]
        means = [np.mean([c.scores[j] for c in curves]) for j in range(4)]
        assert averaged_optimal(curves) == betas[int(np.argmax(means))]

    def test_identical_curves_agree_with_per_pair(self):
        pts = [(0.01, 0.3), (0.05, 0.8), (0.1, 0.6)]
        curves = [curve((f"s{k}", "t"), pts) for k in range(4)]
        per_pair = optimal_per_pair(curves)
        assert all(b == averaged_optimal(curves) for b in per_pair.values())

    def test_scaling_invariance(self):
        betas = (0.01, 0.05, 0.1)
        raw = [0.2, 0.9, 0.4]
        c1 = [curve(("s", "t"), list(zip(betas, raw)))]
        c2 = [curve(("s", "t"), list(zip(betas, [0.5 * v for v in raw])))]
        assert averaged_optimal(c1) == averaged_optimal(c2)

    def test_mismatched_grids_rejected(self):
        c1 = curve(("a", "t"), [(0.01, 0.5), (0.03, 0.5)])
        c2 = curve(("b", "t"), [(0.01, 0.5), (0.05, 0.5)])
        with pytest.raises(ValueError, match="share one grid"):
            averaged_optimal([c1, c2])


class TestGridSearch:
    def test_beta_zero_point_equals_naive_score(self, rng):
        sources, targets = tiny_pair(rng)
        cfg = TransferConfig(beta=0.0, n_mst=2)
        predictor = BaselineSegmenter()
        curves = grid_search([(sources, targets)], [0.0], "2d", cfg, predictor)
        naive_scores = []
        for scan, gt in zip(targets.scans, targets.masks):
            pred = binarize_probability(naive_predict(scan, predictor), 0.5)
            naive_scores.append(surface_dice(pred, gt))
        assert curves[0].points[0] == (0.0, float(np.mean(naive_scores)))

    def test_duplicate_beta_rejected(self, rng):
        sources, targets = tiny_pair(rng)
        with pytest.raises(ValueError):
            grid_search([(sources, targets)], [0.05, 0.05], "2d",
                        TransferConfig(beta=0.0, n_mst=2), BaselineSegmenter())

    def test_curve_points_match_independent_evaluation(self, rng):
        sources, targets = tiny_pair(rng)
        cfg = TransferConfig(beta=0.0, n_mst=2)
        predictor = BaselineSegmenter()
        grid = [0.0, 0.05]
        curves = grid_search([(sources, targets)], grid, "2d", cfg, predictor)
        for beta, score in curves[0].points:
            again = evaluate_pair_at_beta(sources, targets, beta, "2d", cfg, predictor)
            assert score == again

    def test_failed_pair_recorded_others_proceed(self, rng):
        good_src, good_tgt = tiny_pair(rng)
        bad_src, _ = tiny_pair(rng)
        bad_tgt_scans = [make_volume(rng.random((4, 18, 18)).astype(np.float32),
                                     vol_id="bad", domain="weird")]
        bad_tgt_masks = [make_volume(np.zeros((4, 18, 18), dtype=np.float32),
                                     kind="mask", vol_id="badm", domain="weird")]
        bad_tgt = ScanCollection(bad_tgt_scans, "weird", bad_tgt_masks)
        failures = []
        curves = grid_search([(bad_src, bad_tgt), (good_src, good_tgt)], [0.02],
                             "2d", TransferConfig(beta=0.0, n_mst=2),
                             BaselineSegmenter(), failures=failures)
        assert len(curves) == 1
        assert curves[0].pair_id == ("src", "tgt")
        assert len(failures) == 1
        assert failures[0]["pair"] == ["src", "weird"]

    def test_missing_masks_rejected(self, rng):
        sources, targets = tiny_pair(rng)
        bare = ScanCollection(targets.scans, targets.domain, None)
        with pytest.raises(KswapError, match="mask"):
            evaluate_pair_at_beta(sources, bare, 0.0, "2d",
                                  TransferConfig(beta=0.0, n_mst=2), BaselineSegmenter())

    def test_deterministic(self, rng):
        sources, targets = tiny_pair(rng)
        cfg = TransferConfig(beta=0.0, n_mst=2)
        runs = [grid_search([(sources, targets)], [0.0, 0.03], "3d", cfg,
                            BaselineSegmenter()) for _ in range(2)]
        assert runs[0][0].points == runs[1][0].points
