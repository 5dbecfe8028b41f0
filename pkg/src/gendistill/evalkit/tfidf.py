"""Word-level TF-IDF and cosine nearest-neighbour search over the training set.

Weights: tf = raw term count, idf = ln((1 + N) / (1 + df)) + 1, then every
document vector is L2-normalised. Tokens are lowercased runs of word
characters, independent of the BPE vocabulary.
"""
import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import sparse

_WORD = re.compile(r"\w+")


def word_tokens(text):
    return _WORD.findall(text.lower())


class TfidfVectorizer:
    def fit(self, texts):
        texts = list(texts)
        if not texts:
            raise ValueError("TfidfVectorizer.fit: empty corpus")
        df = Counter()
        for t in texts:
            df.update(set(word_tokens(t)))
        self.vocabulary = {w: i for i, w in enumerate(sorted(df))}
        N = len(texts)
        self.idf = np.array([math.log((1 + N) / (1 + df[w])) + 1.0 for w in sorted(df)])
        return self

    def transform(self, texts):
        rows, cols, vals = [], [], []
        for r, t in enumerate(texts):
            tf = Counter(w for w in word_tokens(t) if w in self.vocabulary)
            if not tf:
                continue
            pairs = sorted((self.vocabulary[w], c) for w, c in tf.items())
            idx = np.array([i for i, _ in pairs])
            weights = np.array([c for _, c in pairs], dtype=np.float64) * self.idf[idx]
            weights /= np.sqrt(np.dot(weights, weights))
            rows.extend([r] * len(idx))
            cols.extend(idx.tolist())
            vals.extend(weights.tolist())
        return sparse.csr_matrix((vals, (rows, cols)), shape=(len(texts), len(self.vocabulary)))

    def transform_dense(self, texts):
        return self.transform(list(texts)).toarray()


@dataclass
class TfidfIndex:
    vectorizer: TfidfVectorizer
    matrix: sparse.csr_matrix   # unit-norm rows, zero-vector documents removed
    examples: list              # Example objects aligned with matrix rows

    @property
    def idf(self):
        return self.vectorizer.idf


def build_tfidf(train):
    """Index the training documents; documents with no word tokens are left out."""
    examples = list(train.examples if hasattr(train, "examples") else train)
    if not examples:
        raise ValueError("build_tfidf: empty training set")
    vec = TfidfVectorizer().fit(ex.text for ex in examples)
    mat = vec.transform([ex.text for ex in examples])
    keep = np.flatnonzero(mat.getnnz(axis=1) > 0)
    return TfidfIndex(vec, mat[keep], [examples[i] for i in keep])


def nearest_neighbors(idx, query, k=3):
    """Top-k training examples by cosine similarity to ``query``.

    Sorted by descending cosine, ties by lower example id. Returns a list of
    (example, cosine) pairs; fewer than k when the index is smaller.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = idx.vectorizer.transform([query])
    scores = np.asarray((idx.matrix @ q.T).todense()).ravel()
    ids = np.array([ex.id for ex in idx.examples])
    order = np.lexsort((ids, -scores))[:k]
    return [(idx.examples[i], float(scores[i])) for i in order]
