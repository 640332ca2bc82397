import io
import math

import numpy as np
import pytest

from hijackmap import corpus
from hijackmap.corpus import (
    Dataset,
    IngestError,
    SplitSpec,
    TweetRecord,
    generate_synthetic_corpus,
    ingest_records,
    split_dataset,
    validation_partition,
    write_records,
)
from hijackmap.geomap import default_gazetteer, extract_locations


def line(id_, text="some text", label=None):
    body = f'{{"id": "{id_}", "text": "{text}", "created_at": "2022-03-01T08:00:00Z"'
    if label is not None:
        body += f', "label": {label}'
    return body + "}"


class TestIngest:
    def test_two_records(self):
        result = ingest_records([line("a"), line("b")])
        assert len(result.dataset) == 2
        assert [r.id for r in result.dataset] == ["a", "b"]

    def test_duplicate_keeps_first(self):
        result = ingest_records([line("a", "first"), line("a", "second")])
        assert len(result.dataset) == 1
        assert result.dataset[0].text == "first"
        assert result.dedup_events == 1

    def test_426_records(self):
        lines = [line(f"t{i}", label=i % 2) for i in range(426)]
        result = ingest_records(lines)
        assert len(result.dataset) == 426

    def test_empty_source(self):
        result = ingest_records([])
        assert len(result.dataset) == 0

    def test_malformed_line_is_fatal_with_line_number(self):
        with pytest.raises(IngestError, match="line 2"):
            ingest_records([line("a"), "{broken", line("b")])

    def test_malformed_line_skippable_when_lenient(self):
        result = ingest_records([line("a"), "{broken", line("b")], lenient=True)
        assert len(result.dataset) == 2
        assert len(result.skipped) == 1

    def test_missing_field_reported(self):
        with pytest.raises(IngestError, match="created_at"):
            ingest_records(['{"id": "a", "text": "x"}'])

    def test_bad_label_rejected(self):
        with pytest.raises(IngestError, match="label"):
            ingest_records([line("a", label=2)])

    def test_round_trip(self):
        lines = [line(f"t{i}", f"text {i}", label=i % 2) for i in range(25)]
        ds = ingest_records(lines).dataset
        buf = io.StringIO()
        write_records(ds, buf)
        again = ingest_records(io.StringIO(buf.getvalue())).dataset
        assert again == ds


class TestRecordInvariants:
    def test_empty_id_rejected(self):
        with pytest.raises(ValueError):
            TweetRecord(id="", text="x", created_at="2022-03-01T08:00:00Z")

    def test_blank_text_rejected(self):
        with pytest.raises(ValueError):
            TweetRecord(id="a", text="   ", created_at="2022-03-01T08:00:00Z")

    def test_duplicate_ids_rejected_in_dataset(self):
        rec = TweetRecord(id="a", text="x", created_at="t")
        with pytest.raises(ValueError, match="duplicate"):
            Dataset([rec, rec])


def labeled_dataset(n_pos, n_neg):
    records = [
        TweetRecord(id=f"p{i}", text=f"pos {i}", created_at="t", label=1)
        for i in range(n_pos)
    ] + [
        TweetRecord(id=f"n{i}", text=f"neg {i}", created_at="t", label=0)
        for i in range(n_neg)
    ]
    return Dataset(records, "test")


class TestSplitDataset:
    def test_stratified_exact_class_counts(self):
        ds = labeled_dataset(105, 321)
        spec = SplitSpec(
            train_count=296, test_count=130, seed=3, stratified=True,
            train_by_class={1: 76, 0: 220}, test_by_class={1: 29, 0: 101},
        )
        train, test = split_dataset(ds, spec)
        assert train.class_counts() == {1: 76, 0: 220}
        assert test.class_counts() == {1: 29, 0: 101}
        assert len(train) == 296 and len(test) == 130

    def test_zero_train_count(self):
        ds = labeled_dataset(5, 5)
        train, test = split_dataset(ds, SplitSpec(train_count=0, test_count=10, seed=1))
        assert len(train) == 0
        assert test.ids() == ds.ids()

    def test_deterministic_per_seed(self):
        ds = labeled_dataset(40, 60)
        spec = SplitSpec(train_count=70, test_count=30, seed=11, stratified=True)
        first = split_dataset(ds, spec)
        second = split_dataset(ds, spec)
        assert first[0] == second[0] and first[1] == second[1]

    def test_deficient_class_named(self):
        ds = labeled_dataset(3, 50)
        spec = SplitSpec(train_count=30, test_count=10, seed=1, stratified=True,
                         train_by_class={1: 5, 0: 25}, test_by_class={1: 0, 0: 10})
        with pytest.raises(ValueError, match="class 1"):
            split_dataset(ds, spec)

    def test_parts_disjoint_union_is_selection(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            n_pos, n_neg = int(rng.integers(5, 40)), int(rng.integers(5, 60))
            ds = labeled_dataset(n_pos, n_neg)
            total = len(ds)
            n_train = int(rng.integers(0, total))
            n_test = int(rng.integers(0, total - n_train))
            spec = SplitSpec(train_count=n_train, test_count=n_test,
                             seed=int(rng.integers(1 << 32)),
                             stratified=bool(rng.integers(2)))
            train, test = split_dataset(ds, spec)
            assert not (train.ids() & test.ids())
            assert len(train) + len(test) == n_train + n_test

    def test_oversized_request_rejected(self):
        ds = labeled_dataset(5, 5)
        with pytest.raises(ValueError):
            split_dataset(ds, SplitSpec(train_count=8, test_count=5, seed=0))


class TestValidationPartition:
    def test_296_record_partition(self):
        ds = labeled_dataset(76, 220)
        fit, val = validation_partition(ds, 0.2, seed=1)
        assert len(fit) == 236 and len(val) == 60

    def test_zero_fraction(self):
        ds = labeled_dataset(4, 4)
        fit, val = validation_partition(ds, 0.0)
        assert len(val) == 0 and fit.ids() == ds.ids()

    def test_exact_fraction(self):
        ds = labeled_dataset(5, 5)
        fit, val = validation_partition(ds, 0.2, seed=2)
        assert len(fit) == 8 and len(val) == 2

    def test_fraction_one_rejected(self):
        with pytest.raises(ValueError):
            validation_partition(labeled_dataset(2, 2), 1.0)

    def test_sizes_for_1000_random_pairs(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            n = int(rng.integers(1, 500))
            fraction = float(rng.uniform(0, 0.999))
            ds = labeled_dataset(n, 0)
            fit, val = validation_partition(ds, fraction, seed=0)
            assert len(val) == math.ceil(fraction * n)
            assert len(fit) + len(val) == n


class TestSyntheticCorpus:
    def test_standard_class_balance(self):
        ds = generate_synthetic_corpus(7, 76, 220)
        assert len(ds) == 296
        assert sum(1 for r in ds if r.label == 1) == 76

    def test_empty(self):
        assert len(generate_synthetic_corpus(7, 0, 0)) == 0

    def test_byte_identical_for_same_seed(self):
        a, b = io.StringIO(), io.StringIO()
        write_records(generate_synthetic_corpus(7, 5, 5), a)
        write_records(generate_synthetic_corpus(7, 5, 5), b)
        assert a.getvalue() == b.getvalue()

    def test_different_seeds_differ(self):
        a = generate_synthetic_corpus(7, 10, 10)
        b = generate_synthetic_corpus(8, 10, 10)
        assert [r.text for r in a] != [r.text for r in b]

    def test_relevant_records_name_exactly_one_place(self):
        gaz = default_gazetteer()
        ds = generate_synthetic_corpus(3, 50, 0)
        for rec in ds:
            assert corpus.KEYWORD in rec.text
            assert len(extract_locations(rec.text, gaz)) == 1

    def test_irrelevant_records_name_no_place(self):
        gaz = default_gazetteer()
        ds = generate_synthetic_corpus(3, 0, 50)
        for rec in ds:
            assert extract_locations(rec.text, gaz) == []
