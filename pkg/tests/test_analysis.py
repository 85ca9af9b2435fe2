"""Dissimilarity, motif ranking and matching, sampling, and exports."""

import io

import numpy as np
import pytest

from mrtensor.analysis import (
    bray_curtis,
    cosine_similarity,
    dissimilarity_matrix,
    match_motifs,
    max_workers,
    rank_motifs,
    simulate,
    write_dissimilarity_csv,
    write_motif_csv,
    write_motif_svg,
)
from mrtensor.model import CpBtdModel
from mrtensor.ingest import parse_events


def table_from(rows):
    header = "replicate_id,team,minutes,x_o,y_o,x_d,y_d"
    return parse_events(io.StringIO("\n".join([header] + rows) + "\n"))


def concentrated_model(n_rep=2, usage=50.0):
    """Rank-one term whose mass sits in cell (0, 0)."""
    factors = [np.array([[1.0], [0.0]]), np.array([[1.0], [0.0]])]
    return CpBtdModel(
        (1,), factors, np.ones(1), np.full((1, n_rep), usage)
    )


class TestBrayCurtis:
    def test_hand_values(self):
        assert bray_curtis([1, 1], [1, 2]) == pytest.approx(1 / 5)
        assert bray_curtis([1, 2, 3], [2, 3, 1]) == pytest.approx(1 / 3)

    def test_identical_is_zero(self):
        assert bray_curtis([3.0, 4.0], [3.0, 4.0]) == 0.0

    def test_disjoint_support_is_one(self):
        assert bray_curtis([1.0, 0.0], [0.0, 2.5]) == 1.0

    def test_symmetric(self):
        rng = np.random.default_rng(91)
        u, v = rng.uniform(size=8), rng.uniform(size=8)
        assert bray_curtis(u, v) == bray_curtis(v, u)

    def test_both_zero_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            bray_curtis([0.0, 0.0], [0.0, 0.0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            bray_curtis([-1.0], [1.0])


class TestDissimilarityMatrix:
    def test_exposure_scaling_hand_value(self):
        # Identical passing but half the minutes doubles the exposure-
        # adjusted rates: BC(0.75 x, 1.5 x) = 1/3.
        rows = [
            "m1,slow,90,10,10,80,60",
            "m1,slow,90,20,20,90,60",
            "m2,fast,45,10,10,80,60",
            "m2,fast,45,20,20,90,60",
        ]
        d = dissimilarity_matrix(table_from(rows), scale=1)
        assert d.labels == ("slow", "fast")
        assert d.values[0, 1] == pytest.approx(1 / 3)
        assert d.values[1, 0] == pytest.approx(1 / 3)
        np.testing.assert_array_equal(np.diag(d.values), [0.0, 0.0])

    def test_identical_teams_are_zero(self):
        rows = [
            "m1,a,90,10,10,80,60",
            "m2,b,90,10,10,80,60",
        ]
        d = dissimilarity_matrix(table_from(rows), scale=1)
        assert d.values[0, 1] == 0.0

    def test_replicates_pool_within_team(self):
        # One team split over two replicates must equal the same
        # events in a single replicate.
        split = table_from(
            [
                "m1,a,45,10,10,80,60",
                "m2,a,45,80,60,10,10",
                "m3,b,90,10,70,80,10",
            ]
        )
        merged = table_from(
            [
                "m1,a,90,10,10,80,60",
                "m1,a,90,80,60,10,10",
                "m3,b,90,10,70,80,10",
            ]
        )
        a = dissimilarity_matrix(split, scale=1)
        b = dissimilarity_matrix(merged, scale=1)
        assert a.values[0, 1] == pytest.approx(b.values[0, 1])

    def test_team_without_passes_rejected(self):
        from mrtensor.ingest import EventTable, Replicate

        table = EventTable(
            (Replicate("m1", "a", 90.0), Replicate("m2", "b", 90.0)),
            np.array([0]),
            np.array([[0.1, 0.1, 0.6, 0.6]]),
        )
        with pytest.raises(ValueError, match="no passes"):
            dissimilarity_matrix(table, scale=1)

    def test_threaded_matches_serial(self, monkeypatch):
        rng = np.random.default_rng(92)
        rows = []
        for team in "abcd":
            for k in range(30):
                x_o, x_d = rng.uniform(0, 115, size=2)
                y_o, y_d = rng.uniform(0, 74, size=2)
                rows.append(f"m{team},{team},90,{x_o},{y_o},{x_d},{y_d}")
        table = table_from(rows)
        monkeypatch.setenv("MRTENSOR_THREADS", "1")
        serial = dissimilarity_matrix(table, scale=2)
        monkeypatch.setenv("MRTENSOR_THREADS", "4")
        threaded = dissimilarity_matrix(table, scale=2)
        np.testing.assert_array_equal(serial.values, threaded.values)

    def test_worker_env_validation(self, monkeypatch):
        monkeypatch.setenv("MRTENSOR_THREADS", "many")
        with pytest.raises(ValueError, match="MRTENSOR_THREADS"):
            max_workers()

    def test_csv_export(self, tmp_path):
        rows = ["m1,a,90,10,10,80,60", "m2,b,90,10,70,80,10"]
        d = dissimilarity_matrix(table_from(rows), scale=1)
        path = tmp_path / "d.csv"
        write_dissimilarity_csv(d, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "team,a,b"
        assert lines[1].startswith("a,0,")


class TestMotifRanking:
    def make_model(self, usages):
        h = len(usages)
        factors = [np.ones((4, h)) / 4, np.ones((4, h)) / 4]
        return CpBtdModel(
            (1,) * h,
            factors,
            np.ones(h),
            np.array(usages)[:, None].astype(float),
        )

    def test_sorted_by_usage(self):
        ranked = rank_motifs(self.make_model([5.0, 0.0, 7.0]))
        assert ranked == [(2, 7.0), (0, 5.0)]

    def test_tie_keeps_lower_term(self):
        ranked = rank_motifs(self.make_model([3.0, 3.0]))
        assert ranked == [(0, 3.0), (1, 3.0)]

    def test_cosine_basics(self):
        assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)
        assert cosine_similarity([2, 0], [5, 0]) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            cosine_similarity([0, 0], [1, 0])

    def test_greedy_matching(self):
        fitted = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        reference = [np.array([0.05, 0.95]), np.array([0.9, 0.1])]
        pairs = match_motifs(fitted, reference)
        assert len(pairs) == 2
        by_fit = {i: j for i, j, _ in pairs}
        assert by_fit == {0: 1, 1: 0}
        sims = [s for _, _, s in pairs]
        assert sims == sorted(sims, reverse=True)

    def test_matching_empty(self):
        assert match_motifs([], [np.ones(2)]) == []


class TestSimulate:
    def test_concentrated_model_fills_one_cell(self):
        model = concentrated_model()
        for method in ("superposition", "cells"):
            t = simulate(model, seed=11, method=method)
            assert t.shape == (2, 2, 2)
            if t.nnz:
                np.testing.assert_array_equal(
                    t.indices[:, :2], np.zeros((t.nnz, 2), dtype=int)
                )

    def test_seed_reproducibility(self):
        model = concentrated_model()
        a = simulate(model, seed=3)
        b = simulate(model, seed=3)
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_zero_rates_give_empty_tensor(self):
        model = concentrated_model()
        t = simulate(model, rates=np.zeros((1, 3)), seed=0)
        assert t.nnz == 0
        assert t.shape == (2, 2, 3)

    def test_rates_shape_validation(self):
        model = concentrated_model()
        with pytest.raises(ValueError):
            simulate(model, rates=np.ones((2, 2)))
        with pytest.raises(ValueError):
            simulate(model, rates=-np.ones((1, 2)))
        with pytest.raises(ValueError):
            simulate(model, method="bootstrap")

    def test_zero_weight_term_with_usage_rejected(self):
        factors = [np.ones((2, 1)), np.ones((2, 1))]
        model = CpBtdModel(
            (1,), factors, np.zeros(1), np.full((1, 2), 5.0)
        )
        with pytest.raises(ValueError, match="zero mixing"):
            simulate(model, seed=0)

    def test_total_events_scale_with_rates(self):
        model = concentrated_model(n_rep=1, usage=400.0)
        t = simulate(model, seed=21)
        # Poisson(400): six sigma is 120.
        assert 280 < t.total < 520


class TestExports:
    def test_motif_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(93)
        m = rng.uniform(size=(4, 4))
        path = tmp_path / "m.csv"
        write_motif_csv(m, path)
        back = np.loadtxt(path, delimiter=",")
        np.testing.assert_array_equal(back, m)

    def test_svg_caps_edges(self, tmp_path):
        rng = np.random.default_rng(94)
        m = rng.uniform(0.1, 1.0, size=(16, 16))
        path = tmp_path / "m.svg"
        drawn = write_motif_svg(m, path, top_edges=5)
        assert drawn == 5
        text = path.read_text()
        assert text.count('class="edge"') == 5
        assert 'viewBox="0 0 1150 740"' in text

    def test_svg_self_loops_are_circles(self, tmp_path):
        m = np.diag([1.0, 2.0, 3.0, 4.0])
        path = tmp_path / "m.svg"
        drawn = write_motif_svg(m, path)
        assert drawn == 4
        text = path.read_text()
        assert text.count("<circle") == 4
        assert "marker-end" not in text

    def test_svg_skips_zero_entries(self, tmp_path):
        m = np.zeros((4, 4))
        m[1, 2] = 0.5
        path = tmp_path / "m.svg"
        assert write_motif_svg(m, path, top_edges=10) == 1

    def test_svg_rejects_bad_shape(self, tmp_path):
        with pytest.raises(ValueError):
            write_motif_svg(np.ones((3, 3)), tmp_path / "m.svg")
        with pytest.raises(ValueError):
            write_motif_svg(np.ones((4, 5)), tmp_path / "m.svg")
