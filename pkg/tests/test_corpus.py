import json

import numpy as np
import pytest

from veriflow.corpus import (
    Claim,
    Dataset,
    FeatureView,
    Label,
    claims_to_bytes,
    class_weights,
    load_claims,
    load_dataset,
    load_view,
    loo_debate_folds,
    synth_multiview,
    validate,
    view_to_bytes,
    write_claims,
    write_view,
)
from veriflow.errors import DataError


def make_claim(cid="c1", debate="d1", speaker="s1", text="hello there", label=Label.FALSE, split="train", span=None):
    return Claim(cid, debate, speaker, text, label, split, span)


class TestLabel:
    def test_fixed_ordinal_mapping(self):
        assert Label.parse("false") == 0
        assert Label.parse("half-true") == 1
        assert Label.parse("true") == 2
        assert Label.parse("HALF-TRUE") == 1

    def test_order_preserved(self):
        assert Label.FALSE < Label.HALF_TRUE < Label.TRUE

    @pytest.mark.parametrize("bad", ["maybe", "half true", "TRUEISH", "", "0"])
    def test_unknown_strings_fail(self, bad):
        with pytest.raises(DataError):
            Label.parse(bad)

    def test_round_trip_strings(self):
        for lab in Label:
            assert Label.parse(lab.as_string()) == lab


class TestLoadDataset:
    def test_one_claim_no_views(self, tmp_path):
        path = tmp_path / "one.jsonl"
        write_claims(path, [make_claim()])
        ds = load_dataset(path, [])
        assert len(ds.claims) == 1
        assert ds.views == []
        assert ds.roster == ["s1"]

    def test_small_fixture(self, small_dataset):
        assert len(small_dataset.claims) == 16
        assert len(small_dataset.views) == 2
        assert small_dataset.roster == ["harris", "jordan", "keller", "lopez"]

    def test_duplicate_claim_id_fails(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        lines = claims_to_bytes([make_claim("c1"), make_claim("c1", debate="d2")])
        path.write_bytes(lines)
        with pytest.raises(DataError, match="duplicate claim_id"):
            load_claims(path)

    def test_unknown_label_fails(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        obj = {"claim_id": "c1", "debate_id": "d1", "speaker": "s", "text": "x", "label": "sorta", "split": "train"}
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(DataError, match="unknown label"):
            load_claims(path)

    def test_parse_failure(self, tmp_path):
        path = tmp_path / "garbled.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(DataError, match="invalid JSON"):
            load_claims(path)

    def test_view_dim_mismatch_fails(self, tmp_path):
        (tmp_path / "v.json").write_text(json.dumps({"name": "v", "dim": 3, "rows": "v.csv"}))
        (tmp_path / "v.csv").write_text("claim_id,f0,f1,f2\nc1,0.5,1.5\n")
        with pytest.raises(DataError, match="expected 4 fields"):
            load_view(tmp_path / "v.json")

    def test_audio_span_ordering_enforced(self, tmp_path):
        path = tmp_path / "span.jsonl"
        obj = {
            "claim_id": "c1", "debate_id": "d1", "speaker": "s", "text": "x",
            "label": "true", "split": "train", "audio": {"start_s": 9.0, "end_s": 3.0},
        }
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(DataError, match="audio span"):
            load_claims(path)


class TestRoundTrip:
    def test_claims_round_trip_bytes(self, data_dir):
        original = (data_dir / "claims_small.jsonl").read_bytes()
        claims = load_claims(data_dir / "claims_small.jsonl")
        assert claims_to_bytes(claims) == original

    def test_view_round_trip_bytes(self, data_dir):
        original_manifest = (data_dir / "emb.json").read_bytes()
        original_csv = (data_dir / "emb.csv").read_bytes()
        view = load_view(data_dir / "emb.json")
        manifest, csv_bytes = view_to_bytes(view)
        assert manifest == original_manifest
        assert csv_bytes == original_csv

    def test_write_then_load_identity(self, tmp_path, small_dataset):
        write_claims(tmp_path / "c.jsonl", small_dataset.claims)
        manifest = write_view(tmp_path, small_dataset.views[0])
        reloaded = load_dataset(tmp_path / "c.jsonl", [manifest])
        assert reloaded.claims == small_dataset.claims
        v0, v1 = small_dataset.views[0], reloaded.views[0]
        assert v0.name == v1.name and v0.dim == v1.dim
        for cid in v0.rows:
            np.testing.assert_array_equal(v0.rows[cid], v1.rows[cid])


class TestValidate:
    def test_valid_dataset_no_findings(self, small_dataset):
        assert validate(small_dataset).findings == []

    def test_speaker_absent_from_roster(self):
        ds = Dataset(claims=[make_claim(speaker="ghost")], views=[], roster=["someone"])
        report = validate(ds)
        assert len(report.errors) == 1
        assert report.errors[0].code == "unknown-speaker"

    def test_non_finite_view_entry(self):
        view = FeatureView("v", 2, {"c1": np.array([1.0, np.nan])})
        ds = Dataset(claims=[make_claim()], views=[view], roster=["s1"])
        report = validate(ds)
        assert [f.code for f in report.errors] == ["non-finite"]

    def test_missing_rows_strictness(self):
        view = FeatureView("v", 1, {})
        ds = Dataset(claims=[make_claim()], views=[view], roster=["s1"])
        assert [f.code for f in validate(ds, strict=True).errors] == ["missing-rows"]
        lenient = validate(ds, strict=False)
        assert lenient.errors == []
        assert [f.code for f in lenient.warnings] == ["missing-rows"]

    def test_unknown_claim_row(self):
        view = FeatureView("v", 1, {"c1": np.zeros(1), "zzz": np.zeros(1)})
        ds = Dataset(claims=[make_claim()], views=[view], roster=["s1"])
        assert [f.code for f in validate(ds).errors] == ["unknown-claim-row"]


class TestFolds:
    def test_three_train_debates_three_folds(self, small_dataset):
        folds = loo_debate_folds(small_dataset)
        assert len(folds) == 3
        assert [f.held_out_debate_id for f in folds] == ["deb_a", "deb_b", "deb_c"]

    def test_partition_property(self, small_dataset):
        folds = loo_debate_folds(small_dataset)
        train_ids = set(small_dataset.split_ids("train"))
        held_union = set()
        for fold in folds:
            held = set(fold.heldout_claim_ids)
            rest = set(fold.train_claim_ids)
            assert held | rest == train_ids
            assert held & rest == set()
            assert held & held_union == set()
            held_union |= held
        assert held_union == train_ids

    def test_heldout_is_exactly_one_debate(self, small_dataset):
        for fold in loo_debate_folds(small_dataset):
            debates = {small_dataset.claim(c).debate_id for c in fold.heldout_claim_ids}
            assert debates == {fold.held_out_debate_id}

    def test_synthetic_five_debates(self):
        ds = synth_multiview(50, 5, [("v", 2, 1.0)], seed=3)
        folds = loo_debate_folds(ds)
        assert len(folds) == 5
        for fold in folds:
            expected = {c.claim_id for c in ds.claims if c.debate_id == fold.held_out_debate_id}
            assert set(fold.heldout_claim_ids) == expected

    def test_single_debate_errors(self):
        claims = [make_claim(f"c{i}", debate="only") for i in range(4)]
        ds = Dataset(claims=claims, views=[], roster=["s1"])
        with pytest.raises(DataError, match=">= 2 train debates"):
            loo_debate_folds(ds)


class TestClassWeights:
    def test_balanced_counts_give_unit_weights(self):
        labels = [Label.FALSE] * 10 + [Label.HALF_TRUE] * 10 + [Label.TRUE] * 10
        assert class_weights(labels).weights == (1.0, 1.0, 1.0)

    def test_imbalanced_reference_counts(self):
        # oracle: w_c = N / (3 * n_c) with counts false=48, half=24, true=22
        counts = (48, 24, 22)
        n = sum(counts)
        expected = tuple(n / (3 * c) for c in counts)
        assert expected == pytest.approx((0.6528, 1.3056, 1.4242), abs=1e-4)
        labels = [Label.FALSE] * 48 + [Label.HALF_TRUE] * 24 + [Label.TRUE] * 22
        w = class_weights(labels)
        assert w.weights == pytest.approx(expected, abs=1e-12)

    def test_absent_class_errors(self):
        with pytest.raises(DataError, match="all 3 classes"):
            class_weights([Label.FALSE, Label.TRUE])

    def test_weighted_counts_sum_to_n(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            counts = rng.integers(1, 40, size=3)
            labels = sum(([Label(i)] * int(c) for i, c in enumerate(counts)), [])
            w = class_weights(labels)
            total = sum(w[Label(i)] * int(c) for i, c in enumerate(counts))
            assert total == pytest.approx(len(labels), abs=1e-9)

    def test_mean_per_example_weight_is_one(self):
        labels = [Label.FALSE] * 5 + [Label.HALF_TRUE] * 3 + [Label.TRUE] * 8
        w = class_weights(labels)
        assert w.per_example(labels).mean() == pytest.approx(1.0, abs=1e-12)


def bayes_accuracy(view_specs, which_views, labels, parts):
    """Oracle: exact Gaussian class posterior on the documented generating
    distribution (mean = strength * e0 iff label == view_index mod 3)."""
    n = len(labels)
    correct = 0
    for i in range(n):
        log_post = np.zeros(3)
        for j in which_views:
            _, dim, strength = view_specs[j]
            x = parts[j][i]
            for c in range(3):
                mu = np.zeros(dim)
                if c == j % 3:
                    mu[0] = strength
                log_post[c] += -0.5 * np.sum((x - mu) ** 2)
        correct += int(np.argmax(log_post) == labels[i])
    return correct / n


class TestSynthMultiview:
    def test_determinism(self):
        a = synth_multiview(30, 3, [("v", 4, 1.5)], seed=11)
        b = synth_multiview(30, 3, [("v", 4, 1.5)], seed=11)
        assert a.claims == b.claims
        for va, vb in zip(a.views, b.views):
            for cid in va.rows:
                np.testing.assert_array_equal(va.rows[cid], vb.rows[cid])

    def test_different_seeds_differ(self):
        a = synth_multiview(30, 3, [("v", 4, 1.5)], seed=1)
        b = synth_multiview(30, 3, [("v", 4, 1.5)], seed=2)
        assert any(not np.array_equal(a.views[0].rows[c], b.views[0].rows[c]) for c in a.views[0].rows)

    def test_zero_signal_bayes_accuracy_one_third(self):
        specs = [("v1", 3, 0.0), ("v2", 3, 0.0)]
        ds = synth_multiview(3000, 5, specs, seed=5)
        ids = [c.claim_id for c in ds.claims]
        labels = [int(c.label) for c in ds.claims]
        parts = [ds.views[j].matrix(ids) for j in range(2)]
        acc = bayes_accuracy(specs, [0, 1], labels, parts)
        assert acc == pytest.approx(1 / 3, abs=0.035)

    def test_fused_bayes_beats_single_views(self):
        # two views with partial, complementary signal
        specs = [("v1", 3, 2.0), ("v2", 3, 2.0)]
        ds = synth_multiview(4000, 4, specs, seed=9)
        ids = [c.claim_id for c in ds.claims]
        labels = [int(c.label) for c in ds.claims]
        parts = [ds.views[j].matrix(ids) for j in range(2)]
        fused = bayes_accuracy(specs, [0, 1], labels, parts)
        single = [bayes_accuracy(specs, [j], labels, parts) for j in range(2)]
        assert fused > max(single) + 0.05

    def test_valid_and_split_sizes(self):
        ds = synth_multiview(60, 6, [("v", 2, 1.0)], seed=0, test_fraction=0.34)
        assert validate(ds).findings == []
        test_debates = {c.debate_id for c in ds.split("test")}
        train_debates = {c.debate_id for c in ds.split("train")}
        assert len(test_debates) == 2 and len(train_debates) == 4
        assert not test_debates & train_debates

    def test_balanced_labels(self):
        ds = synth_multiview(90, 3, [("v", 2, 1.0)], seed=0)
        counts = [0, 0, 0]
        for c in ds.claims:
            counts[int(c.label)] += 1
        assert counts == [30, 30, 30]

    def test_invalid_sizes(self):
        with pytest.raises(DataError):
            synth_multiview(3, 4, [("v", 2, 1.0)], seed=0)
        with pytest.raises(DataError):
            synth_multiview(10, 1, [("v", 2, 1.0)], seed=0)
        with pytest.raises(DataError):
            synth_multiview(10, 2, [("v", 0, 1.0)], seed=0)
