#!/usr/bin/env python
import sys, os
import tempfile, shutil
import math
from io import StringIO, BytesIO

import unittest

import numpy as np

# local modules
from utils import make_trace, series

# Search parent directory first, to make sure we test the local alarmsys module,
# not an installed alarmsys module.
parentdir = os.path.realpath(os.path.join(os.path.dirname(__file__), os.pardir))
if parentdir not in sys.path:
    sys.path.insert(1, parentdir)  # insert ../ just after ./

from alarmsys.errors import ConfigError, FitError, DimensionError, ScoreFormatError, DataError
from alarmsys.encoding import fit_encoder, encode_prefix
from alarmsys.estimator import EstimatorParams, BoostedTrees, ConstantEstimator, \
    OracleEstimator, ProbabilitySeries, fit, train, training_data, score_log, \
    save_model, load_model, write_scores, load_external_scores
from alarmsys.experiment import f_score
from alarmsys.log import EventLog
from alarmsys.synthetic import SyntheticLogSpec, generate_synthetic_log


def separable():
    X = np.arange(10, dtype=float).reshape(-1, 1)
    y = X[:, 0] >= 5
    return X, y


def noisy(seed=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(200, 3))
    y = X[:, 0] + 0.5 * X[:, 1] + rng.normal(scale=0.8, size=200) > 0
    return X, y


class FitTest(unittest.TestCase):
    """Gradient boosted trees."""
    def testSeparable(self):
        X, y = separable()
        est = fit(X, y, EstimatorParams(n_rounds=50, min_leaf=1))
        np.testing.assert_array_equal(est.predict_matrix(X) > 0.5, y)

    def testPositivePoint(self):
        X, y = separable()
        est = fit(X, y, EstimatorParams(n_rounds=100, min_leaf=1))
        self.assertGreater(est.predict_proba([9.0]), 0.9)

    def testFlippedLabels(self):
        X, y = noisy()
        params = EstimatorParams(n_rounds=20, min_leaf=5)
        p = fit(X, y, params).predict_matrix(X)
        q = fit(X, ~y, params).predict_matrix(X)
        np.testing.assert_allclose(q, 1.0 - p, atol=1e-6)

    def testLossNonIncreasing(self):
        X, y = noisy()
        est = fit(X, y, EstimatorParams(n_rounds=30, min_leaf=5, learning_rate=1.0))
        self.assertEqual(len(est.train_loss_), 31)
        for before, after in zip(est.train_loss_, est.train_loss_[1:]):
            self.assertLessEqual(after, before)

    def testDeterministic(self):
        X, y = noisy()
        params = EstimatorParams(n_rounds=10, min_leaf=5)
        self.assertEqual(fit(X, y, params).to_dict(), fit(X, y, params).to_dict())

    def testSingleClass(self):
        X, _ = separable()
        self.assertRaises(FitError, fit, X, np.ones(10, dtype=bool), EstimatorParams())

    def testParams(self):
        self.assertRaises(ConfigError, EstimatorParams, n_rounds=0)
        self.assertRaises(ConfigError, EstimatorParams, max_depth=0)
        self.assertRaises(ConfigError, EstimatorParams, learning_rate=0)
        self.assertRaises(ConfigError, EstimatorParams.from_dict, {"depth": 3})


class PredictTest(unittest.TestCase):
    def testPriorOnly(self):
        est = BoostedTrees(math.log(0.2 / 0.8), [], 0.1, 2)
        self.assertAlmostEqual(est.predict_proba([1.0, 2.0]), 0.2)
        self.assertAlmostEqual(est.predict_proba([-5.0, 7.0]), 0.2)

    def testPure(self):
        X, y = noisy()
        est = fit(X, y, EstimatorParams(n_rounds=5, min_leaf=5))
        self.assertEqual(est.predict_proba(X[3]), est.predict_proba(X[3]))

    def testRange(self):
        X, y = noisy()
        p = fit(X, y, EstimatorParams(n_rounds=50, min_leaf=1, learning_rate=1.0)).predict_matrix(X)
        self.assertTrue(((p >= 0) & (p <= 1)).all())

    def testDimensionMismatch(self):
        X, y = separable()
        est = fit(X, y, EstimatorParams(n_rounds=2, min_leaf=1))
        self.assertRaises(DimensionError, est.predict_proba, [1.0, 2.0])

    def testConstant(self):
        self.assertEqual(ConstantEstimator(0.3).predict_proba([1.0]), 0.3)
        self.assertRaises(ConfigError, ConstantEstimator, 1.5)


class ScoreLogTest(unittest.TestCase):
    """Scoring whole logs into probability series."""
    def setUp(self):
        traces = [make_trace("c%02d" % i, ["a", "b", "c"] if i % 2 else ["a", "x", "y"], i)
                  for i in range(20)]
        self.log = EventLog(traces, dict(("c%02d" % i, bool(i % 2)) for i in range(20)))
        self.encoder = fit_encoder(self.log, min_frequency=1)
        self.est = train(self.log, self.encoder, EstimatorParams(n_rounds=10, min_leaf=2), 3)

    def testSeriesPerCase(self):
        scored = score_log(self.est, self.log, self.encoder, 3)
        self.assertEqual([s.case_id for s in scored], sorted(self.log))
        self.assertEqual(len(scored[0]), 3)
        self.assertEqual(scored[0].trace_len, 3)

    def testMatchesPredictProba(self):
        scored = score_log(self.est, self.log, self.encoder, 3)
        prefix = self.log["c01"].head(2)
        self.assertAlmostEqual(scored[1].probs[1],
                               self.est.predict_proba(encode_prefix(prefix, self.encoder)))

    def testMaxLen(self):
        scored = score_log(self.est, self.log, self.encoder, 2)
        self.assertTrue(all(len(s) == 2 for s in scored))

    def testOracle(self):
        for s in score_log(OracleEstimator(), self.log, self.encoder, 3):
            self.assertEqual(s.probs, (1.0,) * 3 if s.outcome else (0.0,) * 3)

    def testTrainingData(self):
        X, y = training_data(self.log, self.encoder, 2)
        self.assertEqual(X.shape, (40, self.encoder.dimensionality))
        self.assertEqual(int(y.sum()), 20)

    def testSyntheticMaxSignal(self):
        spec = SyntheticLogSpec(n_cases=1000, signal=1.0, seed=11)
        log, _ = generate_synthetic_log(spec)
        encoder = fit_encoder(log)
        X, y = training_data(log, encoder, spec.max_length)
        est = fit(X, y, EstimatorParams(n_rounds=30))
        predicted = est.predict_matrix(X) > 0.5
        tp = int(np.sum(predicted & y))
        fp = int(np.sum(predicted & ~y))
        fn = int(np.sum(~predicted & y))
        self.assertGreaterEqual(f_score(tp, fp, fn), 0.95)


class ScoreFileTest(unittest.TestCase):
    """The score interchange format."""
    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def testRead(self):
        text = "case_id,prefix_len,probability,outcome,trace_len\n" \
               "A,1,0.1,1,3\nA,2,0.4,1,3\nA,3,0.8,1,3\nB,1,0.2,0,5\n"
        scored = load_external_scores(StringIO(text))
        self.assertEqual(scored, [series("A", [0.1, 0.4, 0.8], True),
                                  series("B", [0.2], False, 5)])

    def testProbabilityOutOfRange(self):
        text = "case_id,prefix_len,probability,outcome,trace_len\nA,1,1.2,1,3\n"
        self.assertRaises(ScoreFormatError, load_external_scores, StringIO(text))

    def testGap(self):
        text = "case_id,prefix_len,probability,outcome,trace_len\nA,1,0.1,1,3\nA,3,0.2,1,3\n"
        try:
            load_external_scores(StringIO(text))
        except ScoreFormatError as e:
            self.assertEqual(e.line, 3)
        else:
            self.fail("ScoreFormatError not raised")

    def testMissingColumn(self):
        text = "case_id,prefix_len,probability\nA,1,0.1\n"
        self.assertRaises(ScoreFormatError, load_external_scores, StringIO(text))

    def testInvalidUtf8(self):
        data = b"case_id,prefix_len,probability,outcome,trace_len\nA\xff,1,0.1,1,3\n"
        self.assertRaises(ScoreFormatError, load_external_scores, BytesIO(data))

    def testSurplusFields(self):
        text = "case_id,prefix_len,probability,outcome,trace_len\n" \
               "A,1,0.1,1,3\nA,2,0.4,1,3,0.9,x\n"
        try:
            load_external_scores(StringIO(text))
        except ScoreFormatError as e:
            self.assertEqual(e.line, 3)
        else:
            self.fail("ScoreFormatError not raised")

    def testWriteAndRead(self):
        scored = [series("A", [0.1, 1 / 3.0], True, 4), series("B", [0.0], False)]
        filename = os.path.join(self.tempdir, "scores.csv")
        write_scores(scored, filename)
        self.assertEqual(load_external_scores(filename), scored)

    def testSeriesInvariants(self):
        self.assertRaises(DataError, ProbabilitySeries, "A", [0.5, 1.5], True, 2)
        self.assertRaises(DataError, ProbabilitySeries, "A", [0.5, 0.5], True, 1)
        self.assertRaises(DataError, ProbabilitySeries, "A", [], True, 1)


class ModelFileTest(unittest.TestCase):
    """Model dump as JSON."""
    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def testSaveLoad(self):
        X, y = noisy()
        est = fit(X, y, EstimatorParams(n_rounds=10, min_leaf=5))
        filename = os.path.join(self.tempdir, "model.json")
        save_model(est, filename)
        loaded = load_model(filename)
        np.testing.assert_array_equal(loaded.predict_matrix(X), est.predict_matrix(X))
        self.assertEqual(loaded.params.to_dict(), est.params.to_dict())

    def testMissingFile(self):
        self.assertRaises(ConfigError, load_model, os.path.join(self.tempdir, "none.json"))


if __name__ == '__main__':
    unittest.main()
