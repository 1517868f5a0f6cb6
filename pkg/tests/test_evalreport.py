import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antiforensics.errors import SchemaError
from antiforensics.evalreport import (
    ConfusionCounts,
    DatasetManifest,
    DetectionMetrics,
    confusion,
    detection_table,
    load_manifest,
    load_predictions,
    metrics,
    parse_table_csv,
    plot_data,
    quality_table,
)


def _manifest(labels):
    entries = tuple((f"img{i:03d}", f"img{i:03d}.png", lab) for i, lab in enumerate(labels))
    return DatasetManifest(name="toy", entries=entries)


class TestConfusion:
    def test_all_correct_toy_set(self):
        m = _manifest(["forged", "forged", "authentic", "authentic"])
        preds = {"img000": 0.9, "img001": 0.9, "img002": 0.1, "img003": 0.1}
        c = confusion(preds, m)
        assert (c.tp, c.tn, c.fp, c.fn) == (2, 2, 0, 0)

    def test_all_zero_scores(self):
        m = _manifest(["forged"] * 3 + ["authentic"] * 5)
        preds = {e[0]: 0.0 for e in m.entries}
        c = confusion(preds, m)
        assert (c.tp, c.tn, c.fp, c.fn) == (0, 5, 0, 3)

    def test_threshold_is_inclusive(self):
        m = _manifest(["forged", "authentic"])
        c = confusion({"img000": 0.5, "img001": 0.5}, m, threshold=0.5)
        assert (c.tp, c.fp) == (1, 1)

    def test_missing_predictions_listed(self):
        m = _manifest(["forged", "authentic", "forged"])
        with pytest.raises(ValueError) as err:
            confusion({"img001": 0.2}, m)
        assert "img000" in str(err.value) and "img002" in str(err.value)

    @given(
        st.lists(
            st.tuples(st.sampled_from(["forged", "authentic"]), st.floats(0, 1)),
            min_size=1,
            max_size=40,
        ),
        st.floats(0.1, 0.9),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_recount(self, rows, threshold):
        m = _manifest([lab for lab, _ in rows])
        preds = {f"img{i:03d}": s for i, (_, s) in enumerate(rows)}
        c = confusion(preds, m, threshold)
        want_tp = sum(1 for lab, s in rows if lab == "forged" and s >= threshold)
        want_fn = sum(1 for lab, s in rows if lab == "forged" and s < threshold)
        want_fp = sum(1 for lab, s in rows if lab == "authentic" and s >= threshold)
        want_tn = sum(1 for lab, s in rows if lab == "authentic" and s < threshold)
        assert (c.tp, c.tn, c.fp, c.fn) == (want_tp, want_tn, want_fp, want_fn)
        assert c.total == len(rows)

    def test_random_balanced_accuracy_near_half(self):
        rng = np.random.default_rng(1234)
        m = _manifest(["forged"] * 100 + ["authentic"] * 100)
        preds = {e[0]: float(s) for e, s in zip(m.entries, rng.uniform(0, 1, 200))}
        acc = metrics(confusion(preds, m)).accuracy
        assert abs(acc - 0.5) <= 0.1


class TestMetrics:
    def test_published_raw_row(self):
        # inverting accuracy 0.690 / recall 0.43 over 100+100 images
        m = metrics(ConfusionCounts(tp=43, tn=95, fp=5, fn=57))
        assert m.accuracy == pytest.approx(0.690, abs=1e-9)
        assert m.recall == pytest.approx(0.43, abs=1e-9)

    def test_coin_flip_floor(self):
        m = metrics(ConfusionCounts(tp=0, tn=100, fp=0, fn=100))
        assert (m.accuracy, m.recall) == (0.5, 0.0)

    def test_perfect(self):
        m = metrics(ConfusionCounts(tp=100, tn=100, fp=0, fn=0))
        assert (m.accuracy, m.recall) == (1.0, 1.0)

    def test_no_positives_gives_recall_sentinel(self):
        m = metrics(ConfusionCounts(tp=0, tn=10, fp=2, fn=0))
        assert m.recall is None

    def test_empty_counts_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            metrics(ConfusionCounts(0, 0, 0, 0))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            ConfusionCounts(tp=-1, tn=0, fp=0, fn=0)

    def test_metric_ranges_validated(self):
        with pytest.raises(ValueError, match="accuracy"):
            DetectionMetrics(accuracy=1.2, recall=0.5)


class TestManifestIO:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("id,path,label\na,imgs/a.png,forged\nb,imgs/b.png,authentic\n")
        m = load_manifest(p, name="d1")
        assert m.name == "d1"
        assert m.entries == (("a", "imgs/a.png", "forged"), ("b", "imgs/b.png", "authentic"))

    def test_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("image,file,tag\na,b,forged\n")
        with pytest.raises(SchemaError) as err:
            load_manifest(p)
        assert err.value.line == 1

    def test_bad_label_has_line_number(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("id,path,label\na,a.png,forged\nb,b.png,maybe\n")
        with pytest.raises(SchemaError) as err:
            load_manifest(p)
        assert err.value.line == 3

    def test_duplicate_id(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("id,path,label\na,a.png,forged\na,b.png,authentic\n")
        with pytest.raises(SchemaError, match="duplicate"):
            load_manifest(p)

    def test_predictions_round_trip(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("id,score\na,0.25\nb,1\n")
        assert load_predictions(p) == {"a": 0.25, "b": 1.0}

    def test_prediction_score_range(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("id,score\na,1.5\n")
        with pytest.raises(SchemaError) as err:
            load_predictions(p)
        assert err.value.line == 2

    def test_empty_predictions_file(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("")
        with pytest.raises(SchemaError, match="empty"):
            load_predictions(p)

    def test_header_only_rejected(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("id,score\n")
        with pytest.raises(SchemaError, match="no rows"):
            load_predictions(p)


def _qrow(dataset, method, psnr, ssim, brisque):
    return {"dataset": dataset, "method": method, "psnr": psnr, "ssim": ssim, "brisque": brisque}


class TestQualityTable:
    def test_single_row_marked_best(self):
        art = quality_table([_qrow("d", "only", 30.0, 0.9, 20.0)])
        assert art.rows[0][-3:] == ("1", "1", "1")

    def test_best_marker_on_higher_psnr(self):
        art = quality_table(
            [_qrow("d", "a", 37.35, 0.9, 20.0), _qrow("d", "b", 34.91, 0.8, 25.0)]
        )
        by_method = {r[1]: r for r in art.rows}
        assert by_method["a"][5] == "1" and by_method["b"][5] == "2"

    def test_brisque_lower_is_better(self):
        art = quality_table(
            [
                _qrow("d", "raw", 40.0, 0.99, 13.58),
                _qrow("d", "attacked", 35.0, 0.9, 24.10),
                _qrow("d", "worse", 30.0, 0.8, 50.0),
            ]
        )
        by_method = {r[1]: r for r in art.rows}
        assert by_method["raw"][7] == "1"
        assert by_method["attacked"][7] == "2"
        assert by_method["worse"][7] == ""

    def test_ties_share_better_rank(self):
        art = quality_table(
            [
                _qrow("d", "a", 37.1, 0.9, 10.0),
                _qrow("d", "b", 37.1, 0.9, 11.0),
                _qrow("d", "c", 34.0, 0.8, 12.0),
            ]
        )
        by_method = {r[1]: r for r in art.rows}
        assert by_method["a"][5] == by_method["b"][5] == "1"
        assert by_method["c"][5] == "2"

    def test_markers_scoped_per_dataset(self):
        art = quality_table(
            [
                _qrow("d1", "a", 30.0, 0.9, 10.0),
                _qrow("d1", "b", 35.0, 0.9, 11.0),
                _qrow("d2", "a", 20.0, 0.5, 40.0),
            ]
        )
        d2 = [r for r in art.rows if r[0] == "d2"][0]
        assert d2[5] == "1"  # best within its own dataset despite lower PSNR

    def test_csv_round_trip(self):
        rows = [_qrow("d", "a", 37.35, 0.95, 20.5), _qrow("d", "b", 34.91, 0.88, 24.1)]
        art = quality_table(rows)
        header, parsed = parse_table_csv(art.csv_text)
        assert header[:5] == ("dataset", "method", "psnr", "ssim", "brisque")
        assert len(parsed) == 2
        assert parsed[0][2] == pytest.approx(37.35)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            quality_table([])

    def test_text_table_aligned(self):
        art = quality_table([_qrow("d", "a", 37.35, 0.9, 20.0)])
        lines = art.text.splitlines()
        assert lines[0].startswith("dataset")
        assert set(lines[1]) <= {"-", " "}


class TestDetectionTable:
    def _rows(self):
        return [
            {"dataset": "d", "detector": "x", "method": "raw", "accuracy": 0.69, "recall": 0.43},
            {"dataset": "d", "detector": "x", "method": "atk", "accuracy": 0.55, "recall": 0.12},
            {"dataset": "d", "detector": "x", "method": "mid", "accuracy": 0.60, "recall": 0.30},
        ]

    def test_lowest_accuracy_marked_best(self):
        art = detection_table(self._rows())
        by_method = {r[2]: r for r in art.rows}
        assert by_method["atk"][5] == "1"
        assert by_method["mid"][5] == "2"
        assert by_method["raw"][5] == ""

    def test_none_recall_renders_na(self):
        rows = self._rows()
        rows[0]["recall"] = None
        art = detection_table(rows)
        assert "n/a" in art.csv_text
        header, parsed = parse_table_csv(art.csv_text)
        assert parsed[0][4] is None

    def test_six_row_shape(self):
        rows = []
        for ds in ("d1", "d2"):
            for method in ("m1", "m2", "m3"):
                rows.append(
                    {
                        "dataset": ds,
                        "detector": "x",
                        "method": method,
                        "accuracy": 0.5,
                        "recall": 0.5,
                    }
                )
        art = detection_table(rows)
        assert len(art.rows) == 6


class TestPlotData:
    def test_single_method_all_rank_one(self):
        bundles = plot_data([_qrow("d", "only", 30.0, 0.9, 20.0)])
        header, rows = parse_table_csv(bundles["radar.csv"])
        assert all(r[3] == "1" or r[3] == 1.0 for r in rows)

    def test_psnr_rank_ordering(self):
        bundles = plot_data(
            [
                _qrow("d", "a", 37.35, 0.9, 20.0),
                _qrow("d", "b", 34.91, 0.9, 20.0),
                _qrow("d", "c", 32.69, 0.9, 20.0),
            ]
        )
        _, rows = parse_table_csv(bundles["radar.csv"])
        psnr_rows = {r[2]: r for r in rows if r[1] == "psnr"}
        assert [psnr_rows[m][3] for m in ("a", "b", "c")] == ["1", "2", "3"]
        # rank 1 sits furthest from the centre
        assert float(psnr_rows["a"][4]) > float(psnr_rows["c"][4])

    def test_ties_share_better_rank(self):
        bundles = plot_data(
            [
                _qrow("d", "a", 37.0, 0.9, 20.0),
                _qrow("d", "b", 37.0, 0.9, 20.0),
                _qrow("d", "c", 30.0, 0.9, 20.0),
            ]
        )
        _, rows = parse_table_csv(bundles["radar.csv"])
        psnr_rows = {r[2]: r for r in rows if r[1] == "psnr"}
        assert psnr_rows["a"][3] == psnr_rows["b"][3] == "1"
        assert psnr_rows["c"][3] == "3"

    def test_bars_bundle_present_with_detection_rows(self):
        bundles = plot_data(
            [_qrow("d", "a", 30.0, 0.9, 20.0)],
            [{"dataset": "d", "detector": "x", "method": "a", "accuracy": 0.6, "recall": 0.4}],
        )
        assert "bars.csv" in bundles
        header, rows = parse_table_csv(bundles["bars.csv"])
        assert header == ("dataset", "detector", "method", "accuracy", "recall")
        assert len(rows) == 1


class TestManifestType:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            DatasetManifest("d", (("a", "p", "forged"), ("a", "q", "authentic")))

    def test_bad_label_rejected(self):
        with pytest.raises(ValueError, match="label"):
            DatasetManifest("d", (("a", "p", "tampered"),))
