"""
Estimate the likelihood that a running case ends with an undesired outcome.

The built-in estimator is a gradient boosted ensemble of shallow regression
trees under logistic loss. Alternatively, scores of any external classifier
are read from score files::

    case_id,prefix_len,probability,outcome,trace_len
    A,1,0.12,1,3
    A,2,0.48,1,3
    ...

which is also the format written by :func:`write_scores`.
"""

import json
import logging
import math

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, FitError, DimensionError, ScoreFormatError
from .encoding import encode_trace
from .log import read_table

logger = logging.getLogger(__name__)

SCORE_COLUMNS = ("case_id", "prefix_len", "probability", "outcome", "trace_len")
"""Columns of the score interchange format."""
REG_LAMBDA = 1.0
"""L2 regularisation of the leaf values (added to the sum of hessians)."""
MIN_GAIN = 1e-12
"""A node is only split if the gain of the best split exceeds this value."""
MAX_SHRINK = 30
"""Number of times a tree is halved before its round is skipped."""


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _logistic_loss(raw, y):
    sign = 2.0 * y - 1.0
    return float(np.sum(np.logaddexp(0.0, -sign * raw)))


class ProbabilitySeries(object):
    """
    The estimated likelihoods of an undesired outcome of one case;
    probs[k-1] is the estimate after the prefix of length k.
    """
    __slots__ = ("case_id", "probs", "outcome", "trace_len")

    def __init__(self, case_id, probs, outcome, trace_len):
        probs = tuple(float(p) for p in probs)
        if not probs:
            raise DataError("Probability series of case %s is empty" % case_id)
        for k, p in enumerate(probs, 1):
            if not 0.0 <= p <= 1.0:
                raise DataError("Probability %r of case %s at prefix %d is outside [0, 1]" %
                                (p, case_id, k))
        if len(probs) > trace_len:
            raise DataError("Case %s has %d probabilities but only %d events" %
                            (case_id, len(probs), trace_len))
        self.case_id = case_id
        self.probs = probs
        self.outcome = bool(outcome)
        """True if the case has an undesired outcome"""
        self.trace_len = int(trace_len)

    def __len__(self):
        return len(self.probs)

    def __eq__(self, other):
        return isinstance(other, ProbabilitySeries) and \
            (self.case_id, self.probs, self.outcome, self.trace_len) == \
            (other.case_id, other.probs, other.outcome, other.trace_len)

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "%s(%r, %r, outcome=%r, trace_len=%d)" % (self.__class__.__name__,
            self.case_id, list(self.probs), self.outcome, self.trace_len)


class EstimatorParams(object):
    """Hyperparameters of the boosted trees."""
    def __init__(self, n_rounds=100, max_depth=3, learning_rate=0.1, min_leaf=20, seed=0):
        if int(n_rounds) < 1:
            raise ConfigError("n_rounds must be at least 1, not %r" % n_rounds)
        if int(max_depth) < 1:
            raise ConfigError("max_depth must be at least 1, not %r" % max_depth)
        if not 0 < learning_rate <= 1:
            raise ConfigError("learning_rate must be in (0, 1], not %r" % learning_rate)
        if int(min_leaf) < 1:
            raise ConfigError("min_leaf must be at least 1, not %r" % min_leaf)
        self.n_rounds = int(n_rounds)
        self.max_depth = int(max_depth)
        self.learning_rate = float(learning_rate)
        self.min_leaf = int(min_leaf)
        self.seed = int(seed)
        """recorded with the model; the exact split search itself draws no random numbers"""

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(("n_rounds", "max_depth", "learning_rate", "min_leaf", "seed"))
        if unknown:
            raise ConfigError("Unknown estimator parameters: %s" % ", ".join(sorted(unknown)))
        return cls(**d)

    def to_dict(self):
        return {"n_rounds": self.n_rounds, "max_depth": self.max_depth,
                "learning_rate": self.learning_rate, "min_leaf": self.min_leaf,
                "seed": self.seed}


class Estimator(object):
    """Base class of all estimators."""
    kind = None
    n_features = None
    """input dimensionality, or None if any input is accepted"""

    def predict_matrix(self, X):
        """Return the estimated likelihood for every row of X."""
        raise NotImplementedError(self.__class__.__name__)

    def _check_dimension(self, width):
        if self.n_features is not None and width != self.n_features:
            raise DimensionError("Feature vector has %d entries, the estimator expects %d" %
                                 (width, self.n_features))

    def predict_proba(self, v):
        """Return the estimated likelihood of an undesired outcome for one feature vector."""
        v = np.asarray(v, dtype=float)
        if v.ndim != 1:
            raise DimensionError("Expected a feature vector, got an array of shape %r" % (v.shape,))
        self._check_dimension(len(v))
        return float(self.predict_matrix(v.reshape(1, -1))[0])

    def predict_case(self, rows, outcome):
        """Return the likelihoods for the prefix rows of one case."""
        return self.predict_matrix(rows)

    def __repr__(self):
        return "<%s at 0x%x>" % (self.__class__.__name__, id(self))


class ConstantEstimator(Estimator):
    """Estimate the same likelihood p for every prefix."""
    kind = "constant"

    def __init__(self, p):
        if not 0.0 <= p <= 1.0:
            raise ConfigError("Constant probability must be in [0, 1], not %r" % p)
        self.p = float(p)

    def predict_matrix(self, X):
        return np.full(np.asarray(X).shape[0], self.p)


class OracleEstimator(Estimator):
    """Estimate 1 for every prefix of an undesired case and 0 otherwise."""
    kind = "oracle"

    def predict_matrix(self, X):
        raise DataError("The oracle estimator needs the outcome of the case")

    def predict_case(self, rows, outcome):
        return np.full(np.asarray(rows).shape[0], 1.0 if outcome else 0.0)


class RegressionTree(object):
    """
    A binary regression tree stored as flat node arrays. Node 0 is the root;
    a node with feature -1 is a leaf. Samples with x[feature] <= threshold
    go to the left child.
    """
    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    def predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feature = self.feature[node]
            internal = feature >= 0
            if not internal.any():
                return self.value[node]
            rows = np.flatnonzero(internal)
            go_left = X[rows, feature[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def scale(self, factor):
        self.value = self.value * factor

    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


def _best_split(X, order, in_node, g, h, min_leaf):
    """
    Exact split search over all features and midpoints between distinct
    observed values. Returns (gain, feature, threshold) or None. Ties go to
    the lowest feature index, then the lowest threshold.
    """
    best = None
    for feature in range(X.shape[1]):
        idx = order[feature][in_node[order[feature]]]
        m = len(idx)
        if m < 2 * min_leaf:
            return None
        xs = X[idx, feature]
        g_left = np.cumsum(g[idx])
        h_left = np.cumsum(h[idx])
        g_total, h_total = g_left[-1], h_left[-1]
        g_left, h_left = g_left[:-1], h_left[:-1]
        n_left = np.arange(1, m)
        valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
        if not valid.any():
            continue
        gain = g_left ** 2 / (h_left + REG_LAMBDA) + \
            (g_total - g_left) ** 2 / (h_total - h_left + REG_LAMBDA) - \
            g_total ** 2 / (h_total + REG_LAMBDA)
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > MIN_GAIN and (best is None or gain[i] > best[0]):
            best = (float(gain[i]), feature, float((xs[i] + xs[i + 1]) / 2.0))
    return best


def _grow_tree(X, order, g, h, max_depth, min_leaf):
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(in_node, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-float(np.sum(g[in_node])) / (float(np.sum(h[in_node])) + REG_LAMBDA))
        if depth >= max_depth:
            return node
        split = _best_split(X, order, in_node, g, h, min_leaf)
        if split is None:
            return node
        _, f, t = split
        goes_left = X[:, f] <= t
        feature[node] = f
        threshold[node] = t
        left[node] = grow(in_node & goes_left, depth + 1)
        right[node] = grow(in_node & ~goes_left, depth + 1)
        return node

    grow(np.ones(X.shape[0], dtype=bool), 0)
    return RegressionTree(feature, threshold, left, right, value)


class BoostedTrees(Estimator):
    """
    Gradient boosted regression trees under logistic loss. The estimated
    likelihood is sigmoid(prior_logodds + learning_rate * sum of tree outputs).
    """
    kind = "boosted_trees"

    def __init__(self, prior_logodds, trees, learning_rate, n_features, params=None,
                 train_loss=None):
        self.prior_logodds = float(prior_logodds)
        self.trees = list(trees)
        self.learning_rate = float(learning_rate)
        self.n_features = int(n_features)
        self.params = params
        self.train_loss_ = list(train_loss) if train_loss else []
        """training logistic loss before the first and after every round"""

    def raw_scores(self, X):
        raw = np.full(X.shape[0], self.prior_logodds)
        for tree in self.trees:
            raw += self.learning_rate * tree.predict(X)
        return raw

    def predict_matrix(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise DimensionError("Expected a feature matrix, got an array of shape %r" % (X.shape,))
        self._check_dimension(X.shape[1])
        return _sigmoid(self.raw_scores(X))

    def to_dict(self):
        return {"kind": self.kind, "prior_logodds": self.prior_logodds,
                "learning_rate": self.learning_rate, "n_features": self.n_features,
                "params": self.params.to_dict() if self.params else None,
                "train_loss": self.train_loss_,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        try:
            params = EstimatorParams.from_dict(d["params"]) if d.get("params") else None
            return cls(d["prior_logodds"], [RegressionTree.from_dict(t) for t in d["trees"]],
                       d["learning_rate"], d["n_features"], params, d.get("train_loss"))
        except (KeyError, TypeError) as e:
            raise ConfigError("Invalid model file: %s" % e)


def fit(features, labels, params):
    """
    Fit boosted trees on a feature matrix and boolean labels (True =
    undesired). Leaf values are Newton steps; a tree that would increase
    the training loss is halved until it does not, so the training loss
    never increases from one round to the next.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DimensionError("Feature matrix of shape %r does not match %d labels" %
                             (X.shape, len(y)))
    n_positive = int(y.sum())
    if n_positive == 0 or n_positive == len(y):
        raise FitError("Training data needs both outcomes, got %d undesired of %d" %
                       (n_positive, len(y)))
    yf = y.astype(float)
    base_rate = n_positive / float(len(y))
    prior = math.log(base_rate / (1.0 - base_rate))
    raw = np.full(len(y), prior)
    order = [np.argsort(X[:, j], kind="mergesort") for j in range(X.shape[1])]
    loss = _logistic_loss(raw, yf)
    losses = [loss]
    trees = []
    for r in range(params.n_rounds):
        p = _sigmoid(raw)
        g = p - yf
        h = p * (1.0 - p)
        tree = _grow_tree(X, order, g, h, params.max_depth, params.min_leaf)
        step = params.learning_rate * tree.predict(X)
        new_loss = _logistic_loss(raw + step, yf)
        shrink = 0
        while new_loss > loss and shrink < MAX_SHRINK:
            tree.scale(0.5)
            step = step * 0.5
            new_loss = _logistic_loss(raw + step, yf)
            shrink += 1
        if new_loss > loss:
            tree.scale(0.0)
            step = np.zeros_like(step)
            new_loss = loss
        raw = raw + step
        loss = new_loss
        losses.append(loss)
        trees.append(tree)
        logger.debug("round %d: %d leaves, loss %.6f", r + 1, tree.n_leaves(), loss)
    logger.info("fitted %d trees on %d rows, final loss %.4f", len(trees), len(y),
                loss / len(y))
    return BoostedTrees(prior, trees, params.learning_rate, X.shape[1], params, losses)


def save_model(est, filename):
    with open(filename, "w", encoding="utf-8") as f:
        json.dump(est.to_dict(), f, indent=1, sort_keys=True)


def load_model(filename):
    try:
        with open(filename, "r", encoding="utf-8") as f:
            d = json.load(f)
    except (IOError, OSError) as e:
        raise ConfigError("Can not read model %s: %s" % (filename, e))
    except ValueError as e:
        raise ConfigError("Model %s is not valid JSON: %s" % (filename, e))
    return BoostedTrees.from_dict(d)


def training_data(log, encoder, max_len):
    """
    Feature matrix of all prefixes up to max_len of a labeled log, and
    every row labeled with the outcome of its case.
    """
    blocks = []
    labels = []
    for case_id in sorted(log):
        rows = encode_trace(log[case_id], encoder, max_len)
        blocks.append(rows)
        labels.extend([log.outcome(case_id)] * len(rows))
    if not blocks:
        raise FitError("The training log is empty")
    return np.vstack(blocks), np.array(labels, dtype=bool)


def train(log, encoder, params, max_len):
    """Fit boosted trees on the prefixes of a labeled training log."""
    X, y = training_data(log, encoder, max_len)
    return fit(X, y, params)


def score_log(est, log, encoder, max_len):
    """
    Return one ProbabilitySeries per case of a labeled log, ordered by
    case id; probs[k-1] is the estimate for the prefix of length k.
    """
    case_ids = sorted(log)
    blocks = []
    for case_id in case_ids:
        try:
            blocks.append(encode_trace(log[case_id], encoder, max_len))
        except DataError as e:
            raise e.__class__("Case %s: %s" % (case_id, e.msg))
    series = []
    if isinstance(est, OracleEstimator) or not blocks:
        predictions = [est.predict_case(rows, log.outcome(c)) for c, rows in zip(case_ids, blocks)]
    else:
        try:
            flat = est.predict_matrix(np.vstack(blocks))
        except DataError as e:
            raise e.__class__("Scoring log: %s" % e.msg)
        bounds = np.cumsum([0] + [len(b) for b in blocks])
        predictions = [flat[bounds[i]:bounds[i + 1]] for i in range(len(blocks))]
    for case_id, probs in zip(case_ids, predictions):
        series.append(ProbabilitySeries(case_id, probs, log.outcome(case_id),
                                        len(log[case_id])))
    logger.debug("scored %d cases", len(series))
    return series


def write_scores(series_set, dest):
    """Write probability series in the score interchange format."""
    rows = []
    for s in series_set:
        for k, p in enumerate(s.probs, 1):
            rows.append([s.case_id, str(k), repr(p), "1" if s.outcome else "0",
                         str(s.trace_len)])
    pd.DataFrame(rows, columns=list(SCORE_COLUMNS), dtype=str).to_csv(dest, index=False)


def _parse_int(value, name, line):
    try:
        return int(value)
    except ValueError:
        raise ScoreFormatError("Invalid %s %r on line %d" % (name, value, line), line=line)


def load_external_scores(source):
    """
    Read probability series from a score file. Rows of a case must be
    consecutive with prefix_len 1, 2, 3, ...
    """
    try:
        df = read_table(source, "Score file", ScoreFormatError)
    except pd.errors.EmptyDataError:
        raise ScoreFormatError("Score file has no header row", line=1)
    for col in SCORE_COLUMNS:
        if col not in df.columns:
            raise ScoreFormatError("Score file has no column %r" % col, line=1)
    cases = {}
    records = zip(*(df[c].tolist() for c in SCORE_COLUMNS))
    for pos, (case_id, prefix_len, probability, outcome, trace_len) in enumerate(records):
        line = pos + 2
        prefix_len = _parse_int(prefix_len, "prefix_len", line)
        trace_len = _parse_int(trace_len, "trace_len", line)
        try:
            p = float(probability)
        except ValueError:
            raise ScoreFormatError("Invalid probability %r on line %d" % (probability, line),
                                   line=line)
        if not 0.0 <= p <= 1.0:
            raise ScoreFormatError("Probability %r outside [0, 1] on line %d" % (p, line),
                                   line=line)
        flag = outcome.strip().lower()
        if flag not in ("0", "1", "true", "false"):
            raise ScoreFormatError("Invalid outcome %r on line %d" % (outcome, line), line=line)
        outcome = flag in ("1", "true")
        entry = cases.setdefault(case_id, {"probs": [], "outcome": outcome,
                                           "trace_len": trace_len})
        if prefix_len != len(entry["probs"]) + 1:
            raise ScoreFormatError("Case %s: expected prefix_len %d, got %d on line %d" %
                                   (case_id, len(entry["probs"]) + 1, prefix_len, line),
                                   line=line)
        if entry["outcome"] != outcome or entry["trace_len"] != trace_len:
            raise ScoreFormatError("Case %s: outcome or trace_len changes on line %d" %
                                   (case_id, line), line=line)
        if prefix_len > trace_len:
            raise ScoreFormatError("Case %s: prefix_len %d exceeds trace_len %d on line %d" %
                                   (case_id, prefix_len, trace_len, line), line=line)
        entry["probs"].append(p)
    return [ProbabilitySeries(c, e["probs"], e["outcome"], e["trace_len"])
            for c, e in sorted(cases.items())]
