"""Text cleaning, tokenization, and TF-IDF featurization.

The vectorizer uses raw term counts, the smooth inverse document frequency
``idf(t) = ln((1 + N) / (1 + df(t))) + 1``, and L2 row normalization.
Vocabulary indices are assigned lexicographically, so a fitted model is
fully determined by its input corpus.
"""

from __future__ import annotations

import hashlib
import math
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable

import numpy as np

_EDGE_CHARS = string.punctuation.replace("-", "").replace("'", "")


def default_stoplist() -> set[str]:
    """The packaged English stoplist (one term per line)."""
    text = resources.files("hijackmap.data").joinpath("stoplist.txt").read_text("utf-8")
    return {line.strip() for line in text.splitlines() if line.strip()}


def load_stoplist(path: str | Path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def clean_text(raw: str) -> str:
    """Trim, lowercase, collapse whitespace, drop URL and @mention tokens."""
    words = raw.lower().split()
    kept = [w for w in words if not w.startswith(("http", "@"))]
    return " ".join(kept)


def tokenize(cleaned: str, stoplist: set[str]) -> list[str]:
    """Split on whitespace, strip edge punctuation, filter the stoplist.

    Intra-token hyphens and apostrophes survive so place names and
    contractions pass through unchanged.
    """
    tokens = []
    for raw in cleaned.split():
        tok = raw.strip(_EDGE_CHARS)
        if tok and tok not in stoplist:
            tokens.append(tok)
    return tokens


@dataclass
class TfidfModel:
    """A fitted vocabulary: term -> column index, document counts, idf weights."""

    vocabulary: dict[str, int]
    doc_freq: dict[str, int]
    n_docs: int
    idf: dict[str, float]

    @property
    def size(self) -> int:
        return len(self.vocabulary)


def _idf(n_docs: int, df: int) -> float:
    return math.log((1 + n_docs) / (1 + df)) + 1.0


def fit_tfidf(corpus: list[list[str]]) -> TfidfModel:
    """Fit vocabulary, document frequencies and idf weights over token lists."""
    if not corpus:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    doc_freq: dict[str, int] = {}
    for doc in corpus:
        for term in set(doc):
            doc_freq[term] = doc_freq.get(term, 0) + 1
    if not doc_freq:
        raise ValueError("corpus has no tokens; vocabulary would be empty")
    terms = sorted(doc_freq)
    vocabulary = {term: i for i, term in enumerate(terms)}
    n_docs = len(corpus)
    idf = {term: _idf(n_docs, doc_freq[term]) for term in terms}
    return TfidfModel(vocabulary=vocabulary, doc_freq=doc_freq, n_docs=n_docs, idf=idf)


def transform_tfidf(model: TfidfModel, doc: list[str]) -> np.ndarray:
    """Weight a document as count(term) * idf(term), L2-normalized.

    Out-of-vocabulary terms contribute nothing; a document with no
    vocabulary hit maps to the all-zero vector.
    """
    vec = np.zeros(model.size, dtype=np.float64)
    for term in doc:
        idx = model.vocabulary.get(term)
        if idx is not None:
            vec[idx] += model.idf[term]
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def transform_many(model: TfidfModel, docs: Iterable[list[str]]) -> np.ndarray:
    return np.array([transform_tfidf(model, doc) for doc in docs], dtype=np.float64)


def prepare_documents(texts: Iterable[str], stoplist: set[str]) -> list[list[str]]:
    """clean_text + tokenize over a batch of raw texts."""
    return [tokenize(clean_text(t), stoplist) for t in texts]


def export_manifest(model: TfidfModel) -> str:
    """Render the fitted model as an auditable text manifest.

    First line records the corpus size; every following line is one
    ``term<TAB>index<TAB>doc_freq<TAB>idf`` row in index order.
    """
    lines = [f"n_docs={model.n_docs}"]
    for term, idx in sorted(model.vocabulary.items(), key=lambda kv: kv[1]):
        lines.append(f"{term}\t{idx}\t{model.doc_freq[term]}\t{model.idf[term]:.17g}")
    return "\n".join(lines) + "\n"


def load_manifest(text: str) -> TfidfModel:
    """Rebuild a TfidfModel from its exported manifest."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("n_docs="):
        raise ValueError("manifest missing n_docs header")
    n_docs = int(lines[0].split("=", 1)[1])
    vocabulary: dict[str, int] = {}
    doc_freq: dict[str, int] = {}
    idf: dict[str, float] = {}
    for ln in lines[1:]:
        term, idx, df, weight = ln.split("\t")
        vocabulary[term] = int(idx)
        doc_freq[term] = int(df)
        idf[term] = float(weight)
    return TfidfModel(vocabulary=vocabulary, doc_freq=doc_freq, n_docs=n_docs, idf=idf)


def manifest_hash(manifest: str | bytes) -> str:
    """SHA-256 over the manifest bytes; ties checkpoints to their featurizer."""
    data = manifest.encode("utf-8") if isinstance(manifest, str) else manifest
    return hashlib.sha256(data).hexdigest()


def write_manifest(model: TfidfModel, sink: IO[str]) -> str:
    text = export_manifest(model)
    sink.write(text)
    return manifest_hash(text)
