"""The two non-neural-CNN baselines: TF-IDF + linear SVM and a fastText-style bag."""
from dataclasses import replace

import numpy as np

from ..evalkit.metrics import accuracy
from ..evalkit.tfidf import TfidfVectorizer
from ..numerics.rng import Rng
from .models import BagConfig, BagOfEmbeddings
from .training import TrainConfig, argmax_lowest, predict_logits, train_classifier


class LinearSVM:
    """One-vs-rest linear SVM trained by SGD on the L2-regularised hinge loss."""

    def __init__(self, n_classes, lam=1e-4, epochs=30, seed=0):
        self.n_classes = n_classes
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.W = None
        self.b = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        N, D = X.shape
        C = self.n_classes
        W = np.zeros((D, C))
        b = np.zeros(C)
        sign = np.where(y[:, None] == np.arange(C)[None, :], 1.0, -1.0)
        rng = Rng(self.seed, "svm")
        t = 0
        for epoch in range(self.epochs):
            for i in rng.child(epoch).permutation(N):
                t += 1
                eta = 1.0 / (self.lam * (t + 1000))  # Pegasos-style decaying step
                margin = sign[i] * (X[i] @ W + b)
                viol = margin < 1.0
                W *= 1.0 - eta * self.lam
                if viol.any():
                    W[:, viol] += eta * np.outer(X[i], sign[i, viol])
                    b[viol] += eta * sign[i, viol]
        self.W, self.b = W, b
        return self

    def decision_function(self, X):
        return np.asarray(X) @ self.W + self.b

    def predict(self, X):
        return argmax_lowest(self.decision_function(X))


def baseline_tfidf_linear(train, test, seed=0, return_predictions=False):
    vec = TfidfVectorizer().fit(train.texts)
    clf = LinearSVM(train.n_classes, seed=seed).fit(vec.transform_dense(train.texts), train.labels)
    preds = clf.predict(vec.transform_dense(test.texts))
    acc = accuracy(preds, test.labels)
    return (acc, preds) if return_predictions else acc


def baseline_fasttext_style(train, test, vocab, tc=None, cfg=None, seed=0,
                            return_predictions=False):
    tc = tc or TrainConfig(seed=seed)
    tc = replace(tc, loss="hard_ce")
    cfg = cfg or BagConfig()
    model = BagOfEmbeddings(cfg, len(vocab), train.n_classes, seed=seed)
    train_seqs = [vocab.encode(t).ids for t in train.texts]
    train_classifier(model, train_seqs, train.labels, tc)
    preds = argmax_lowest(predict_logits(model, [vocab.encode(t).ids for t in test.texts]))
    acc = accuracy(preds, test.labels)
    return (acc, preds) if return_predictions else acc
