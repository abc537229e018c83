import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from geeznum.estimators import GeezMLPClassifier, GlyphPreprocessor
from geeznum.imaging import preprocess
from geeznum.synthgen import load_templates, template_page


@pytest.fixture(scope="module")
def pages():
    return [template_page(t) for t in load_templates()], np.arange(20)


def test_get_set_params_and_clone():
    clf = GeezMLPClassifier(hidden_layer_sizes=(8, 6), max_iter=3)
    params = clf.get_params()
    assert params["hidden_layer_sizes"] == (8, 6) and params["n_init"] == 5
    assert params["hidden_activation"] == "logistic" and params["target_encoding"] == "onehot"
    twin = clone(clf)
    assert twin.get_params() == params and twin is not clf
    clf.set_params(max_iter=7)
    assert clf.max_iter == 7
    assert GlyphPreprocessor(threshold=100).get_params() == {"threshold": 100}


def test_preprocessor_matches_function_and_accepts_paths(pages, tmp_path):
    from geeznum import pnm

    imgs, _ = pages
    path = tmp_path / "g.pgm"
    pnm.write_pgm(path, imgs[3])
    out = GlyphPreprocessor().transform(imgs[:3] + [str(path)])
    assert out.shape == (4, 1800)
    assert np.array_equal(out[0], preprocess(imgs[0]))
    assert np.array_equal(out[3], preprocess(imgs[3]))
    assert GlyphPreprocessor().fit(imgs).n_features_out_ == 1800


def test_pipeline_fits_toy_templates(pages):
    imgs, y = pages
    pipe = make_pipeline(GlyphPreprocessor(), GeezMLPClassifier(max_iter=500, random_state=7))
    pipe.fit(imgs, y)
    assert pipe.score(imgs, y) == 1.0
    clf = pipe[-1]
    assert clf.classes_.tolist() == list(range(20)) and clf.n_features_in_ == 1800
    assert clf.n_iter_ <= 500 and clf.loss_ >= 0
    assert clf.decision_function(GlyphPreprocessor().transform(imgs[:2])).shape == (2, 20)


def test_binary5_classifier(toy_set):
    X, y = toy_set
    clf = GeezMLPClassifier(target_encoding="binary5", max_iter=500, random_state=7).fit(X, y)
    assert clf.decision_function(X).shape == (20, 5)
    assert np.array_equal(clf.predict(X), y)


def test_validation_errors(toy_set):
    X, y = toy_set
    with pytest.raises(NotFittedError):
        GeezMLPClassifier().predict(X)
    with pytest.raises(ValueError):
        GeezMLPClassifier(max_iter=1).fit(X, y + 1)
    with pytest.raises(ValueError):
        GeezMLPClassifier(max_iter=1).fit(X, y + 0.5)
    clf = GeezMLPClassifier(max_iter=1, n_init=1).fit(X, y)
    with pytest.raises(ValueError):
        clf.predict(X[:, :100])
