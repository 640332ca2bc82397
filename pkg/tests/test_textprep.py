import math

import numpy as np
import pytest

from hijackmap.textprep import (
    clean_text,
    default_stoplist,
    export_manifest,
    fit_tfidf,
    load_manifest,
    manifest_hash,
    tokenize,
    transform_tfidf,
)
from oracle_utils import brute_force_tfidf


class TestCleanText:
    def test_trim_and_lowercase(self):
        assert clean_text("  Hijacking NOW  ") == "hijacking now"

    def test_empty(self):
        assert clean_text("") == ""

    def test_strips_mentions_and_urls(self):
        assert clean_text("Report @SAPS https://t.co/x hijacking") == "report hijacking"

    def test_collapses_whitespace(self):
        assert clean_text("a\t b \n  c") == "a b c"


class TestTokenize:
    def test_stoplist_filter(self):
        assert tokenize("a hijacking at the mall", {"a", "at", "the"}) == ["hijacking", "mall"]

    def test_edge_punctuation_stripped(self):
        assert tokenize("hijacking, cape town!", set()) == ["hijacking", "cape", "town"]

    def test_all_removed(self):
        assert tokenize("the the the", {"the"}) == []

    def test_intra_token_marks_kept(self):
        assert tokenize("n'duli semi-detached", set()) == ["n'duli", "semi-detached"]


TWO_DOCS = [["hijacking", "cape", "town"], ["cape", "town", "traffic"]]


class TestFitTfidf:
    def test_two_doc_example(self):
        model = fit_tfidf(TWO_DOCS)
        assert model.doc_freq == {"hijacking": 1, "cape": 2, "town": 2, "traffic": 1}
        assert model.idf["hijacking"] == pytest.approx(math.log(3 / 2) + 1, abs=1e-12)
        assert model.idf["cape"] == pytest.approx(1.0, abs=1e-12)

    def test_single_doc(self):
        model = fit_tfidf([["x"]])
        assert model.vocabulary == {"x": 0}
        assert model.idf["x"] == pytest.approx(1.0)

    def test_deterministic(self):
        assert fit_tfidf(TWO_DOCS) == fit_tfidf(TWO_DOCS)

    def test_lexicographic_indices(self):
        model = fit_tfidf(TWO_DOCS)
        terms = sorted(model.vocabulary)
        assert [model.vocabulary[t] for t in terms] == list(range(len(terms)))

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            fit_tfidf([])
        with pytest.raises(ValueError):
            fit_tfidf([[], []])


class TestTransformTfidf:
    def test_two_doc_example(self):
        model = fit_tfidf(TWO_DOCS)
        vec = transform_tfidf(model, ["hijacking", "cape", "town"])
        by_term = {t: vec[i] for t, i in model.vocabulary.items()}
        assert by_term["hijacking"] == pytest.approx(0.7049, abs=5e-5)
        assert by_term["cape"] == pytest.approx(0.5015, abs=5e-5)
        assert by_term["town"] == pytest.approx(0.5015, abs=5e-5)
        assert by_term["traffic"] == 0.0

    def test_single_term_normalizes_to_one(self):
        model = fit_tfidf([["x"]])
        assert transform_tfidf(model, ["x"]).tolist() == [1.0]

    def test_out_of_vocabulary_is_zero_vector(self):
        model = fit_tfidf(TWO_DOCS)
        assert not transform_tfidf(model, ["unknown", "terms"]).any()

    def test_nonzero_vectors_unit_norm(self):
        rng = np.random.default_rng(5)
        terms = [f"t{i}" for i in range(12)]
        corpus = [list(rng.choice(terms, size=rng.integers(1, 8))) for _ in range(6)]
        model = fit_tfidf(corpus)
        for doc in corpus:
            vec = transform_tfidf(model, doc)
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)

    def test_matches_brute_force_oracle_on_random_corpora(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            terms = [f"w{i}" for i in range(int(rng.integers(2, 16)))]
            corpus = [
                [terms[rng.integers(len(terms))] for _ in range(int(rng.integers(1, 10)))]
                for _ in range(int(rng.integers(1, 11)))
            ]
            model = fit_tfidf(corpus)
            doc = corpus[int(rng.integers(len(corpus)))]
            expected = brute_force_tfidf(corpus, doc)
            got = transform_tfidf(model, doc)
            np.testing.assert_allclose(got, expected, atol=1e-9)


class TestManifest:
    def test_round_trip(self):
        model = fit_tfidf(TWO_DOCS)
        text = export_manifest(model)
        loaded = load_manifest(text)
        assert loaded == model

    def test_hash_stable_and_sensitive(self):
        a = export_manifest(fit_tfidf(TWO_DOCS))
        b = export_manifest(fit_tfidf(TWO_DOCS))
        c = export_manifest(fit_tfidf([["different"], ["corpus"]]))
        assert manifest_hash(a) == manifest_hash(b)
        assert manifest_hash(a) != manifest_hash(c)

    def test_rejects_headerless_text(self):
        with pytest.raises(ValueError):
            load_manifest("cape\t0\t2\t1.0\n")


def test_default_stoplist_has_function_words():
    stop = default_stoplist()
    assert {"the", "a", "at", "and"} <= stop
    assert len(stop) > 150
    assert "hijacking" not in stop
