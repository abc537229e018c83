"""scikit-learn compatible wrappers around the preprocessing chain and the MLP.

    >>> from sklearn.pipeline import make_pipeline
    >>> clf = make_pipeline(GlyphPreprocessor(), GeezMLPClassifier())
    >>> clf.fit(list_of_scans, class_ids).score(other_scans, other_ids)
"""
from __future__ import annotations

import os

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import pnm
from .dataset import BINARY5, N_CLASSES, decode_batch, encode_labels
from .imaging import N_FEATURES, preprocess
from .network import Architecture, forward
from .optimizer import CgConfig
from .training import TrainConfig, train_arrays


class GlyphPreprocessor(TransformerMixin, BaseEstimator):
    """Turn raw single-character scans into 1800-long binary feature rows.

    Accepts a sequence of 2-D gray / 3-D RGB arrays or Netpbm file paths, or a
    ``(n, rows, cols)`` stack. Stateless, so ``transform`` works unfitted.

    Parameters
    ----------
    threshold : int or None
        Fixed binarization threshold; Otsu's method when None.
    """

    def __init__(self, threshold=None):
        self.threshold = threshold

    def fit(self, X, y=None):
        self.n_features_out_ = N_FEATURES
        return self

    def transform(self, X):
        rows = []
        for item in X:
            if isinstance(item, (str, os.PathLike)):
                item = pnm.read(item)
            rows.append(preprocess(item, self.threshold))
        return np.array(rows, dtype=np.uint8).reshape(len(rows), N_FEATURES)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.two_d_array = False
        tags.requires_fit = False
        return tags


class GeezMLPClassifier(ClassifierMixin, BaseEstimator):
    """Feed-forward recognizer trained by full-batch PR+ conjugate gradient.

    ``y`` holds class ids 0..19 (folder numbers). ``classes_`` is always the
    full 20-symbol table so models trained on a subset keep the output layout.
    ``n_init`` seeded starts are tried and the lowest training loss is kept.
    """

    def __init__(self, hidden_layer_sizes=(20, 15, 10), hidden_activation="logistic",
                 target_encoding="onehot", max_iter=1000, tol=1e-6, loss_goal=1e-5, n_init=5,
                 random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.hidden_activation = hidden_activation
        self.target_encoding = target_encoding
        self.max_iter = max_iter
        self.tol = tol
        self.loss_goal = loss_goal
        self.n_init = n_init
        self.random_state = random_state

    def _config(self, n_features):
        width = 5 if self.target_encoding == BINARY5 else N_CLASSES
        arch = Architecture(
            (n_features, *self.hidden_layer_sizes, width),
            hidden_activation=self.hidden_activation,
            target_encoding=self.target_encoding,
        )
        cg = CgConfig(max_iterations=self.max_iter, gradient_tolerance=self.tol, loss_goal=self.loss_goal)
        return TrainConfig(arch, cg, seed=int(self.random_state or 0), n_init=int(self.n_init))

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y)
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.mod(y, 1) == 0):
                raise ValueError("y must contain integer class ids 0..19")
            y = y.astype(np.int64)
        if y.min() < 0 or y.max() >= N_CLASSES:
            raise ValueError("y must contain class ids in 0..19")
        self.model_, self.trace_ = train_arrays(X, y, self._config(X.shape[1]))
        self.classes_ = np.arange(N_CLASSES)
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = self.trace_.n_iterations
        self.loss_ = float(self.model_.metadata["final_loss"])
        return self

    def decision_function(self, X):
        """Raw network outputs, one row per sample (20 or 5 columns)."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        out, _ = forward(self.model_.params, X)
        return out

    def predict(self, X):
        out = self.decision_function(X)
        if self.target_encoding == BINARY5:
            # nearest valid codeword; equals bit rounding whenever that is in range
            codes = encode_labels(np.arange(N_CLASSES), BINARY5)
            return np.argmin(((out[:, None, :] - codes[None]) ** 2).sum(-1), axis=1)
        return decode_batch(out, self.target_encoding)
