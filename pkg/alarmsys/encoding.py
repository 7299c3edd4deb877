"""
Aggregation encoding of trace prefixes into fixed-length feature vectors.

For a prefix of length k the vector holds, in this order:

- for every categorical attribute (the activity, the resource and every
  categorical event attribute) and every value of its vocabulary, the number
  of events of the prefix carrying that value. Values seen fewer than
  ``min_frequency`` times in the training log, and values never seen, count
  towards the reserved value "other";
- for every numeric attribute, the min, max, mean and sum over the prefix,
  with missing values imputed by the most recent preceding value of the
  trace, or zero;
- the event number k, the hour, weekday (0 = Monday) and month of the last
  event, the time since case start and the time since the previous event,
  both in seconds.
"""

import json
import logging

import numpy as np

from .errors import ConfigError, EmptyLogError

logger = logging.getLogger(__name__)

OTHER = "other"
"""Reserved vocabulary value for infrequent and unseen categorical values."""
MIN_FREQUENCY = 10
"""Categorical values occurring less often than this in the training log become OTHER."""
ACTIVITY = "activity"
RESOURCE = "resource"
NUMERIC_STATS = ("min", "max", "mean", "sum")
TEMPORAL_FEATURES = ("event_nr", "hour", "weekday", "month",
                     "time_since_start", "time_since_last")


def _categorical_value(event, attr):
    if attr == ACTIVITY:
        return event.activity
    if attr == RESOURCE:
        return event.resource
    value = event.attrs.get(attr)
    if value is None:
        return None
    if isinstance(value, float):
        return repr(value)
    return value


class EncoderState(object):
    """
    The fitted vocabularies and column order of the aggregation encoding.
    Not modified after fitting; safe to share between threads.
    """
    def __init__(self, vocabularies, numeric, frequencies=None, min_frequency=MIN_FREQUENCY):
        self.vocabularies = dict((attr, list(values)) for attr, values in vocabularies.items())
        """categorical attribute -> ordered values, OTHER last"""
        self.categorical = list(vocabularies)
        """categorical attributes in column order"""
        self.numeric = list(numeric)
        """numeric attributes in column order"""
        self.frequencies = frequencies or {}
        """categorical attribute -> value -> number of events in the training log"""
        self.min_frequency = min_frequency
        for attr in self.categorical:
            if OTHER not in self.vocabularies[attr]:
                self.vocabularies[attr].append(OTHER)

        self._index = {}
        column = 0
        for attr in self.categorical:
            index = {}
            for value in self.vocabularies[attr]:
                index[value] = column
                column += 1
            self._index[attr] = index
        self._numeric_offset = column
        self._temporal_offset = column + len(NUMERIC_STATS) * len(self.numeric)
        self.dimensionality = self._temporal_offset + len(TEMPORAL_FEATURES)

    def feature_names(self):
        names = []
        for attr in self.categorical:
            names.extend("%s=%s" % (attr, value) for value in self.vocabularies[attr])
        for attr in self.numeric:
            names.extend("%s:%s" % (attr, stat) for stat in NUMERIC_STATS)
        names.extend(TEMPORAL_FEATURES)
        return names

    def column(self, attr, value):
        """Return the count column of a categorical value (OTHER's column if unknown)."""
        index = self._index[attr]
        return index.get(value, index[OTHER])

    def to_dict(self):
        return {
            "min_frequency": self.min_frequency,
            "vocabularies": [[attr, self.vocabularies[attr]] for attr in self.categorical],
            "numeric": self.numeric,
            "frequencies": dict((attr, dict(sorted(counts.items())))
                                for attr, counts in sorted(self.frequencies.items())),
            "columns": self.feature_names(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            state = cls(dict((attr, values) for attr, values in d["vocabularies"]),
                        d["numeric"], d.get("frequencies"),
                        d.get("min_frequency", MIN_FREQUENCY))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError("Invalid encoder state: %s" % e)
        if "columns" in d and d["columns"] != state.feature_names():
            raise ConfigError("Encoder state column order does not match its vocabularies")
        return state

    def save(self, filename):
        with open(filename, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, filename):
        try:
            with open(filename, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (IOError, OSError) as e:
            raise ConfigError("Can not read encoder state %s: %s" % (filename, e))
        except ValueError as e:
            raise ConfigError("Encoder state %s is not valid JSON: %s" % (filename, e))

    def __repr__(self):
        return "<%s %d columns at 0x%x>" % (self.__class__.__name__, self.dimensionality, id(self))


def fit_encoder(train, min_frequency=MIN_FREQUENCY):
    """Fit vocabularies and column order on a training log."""
    if len(train) == 0:
        raise EmptyLogError("Can not fit an encoder on an empty log")
    kinds = {}
    has_resource = False
    for trace in train.values():
        for e in trace:
            has_resource = has_resource or e.resource is not None
            for name, value in e.attrs.items():
                kind = "numeric" if isinstance(value, float) else "categorical"
                if kinds.get(name, kind) != kind:
                    kind = "categorical"
                kinds[name] = kind
    for reserved in (ACTIVITY, RESOURCE):
        if reserved in kinds:
            logger.warning("ignoring event attribute %r, the name is reserved", reserved)
            del kinds[reserved]

    categorical = [ACTIVITY] + ([RESOURCE] if has_resource else []) + \
        sorted(n for n, k in kinds.items() if k == "categorical")
    numeric = sorted(n for n, k in kinds.items() if k == "numeric")

    frequencies = dict((attr, {}) for attr in categorical)
    for trace in train.values():
        for e in trace:
            for attr in categorical:
                value = _categorical_value(e, attr)
                if value is not None:
                    counts = frequencies[attr]
                    counts[value] = counts.get(value, 0) + 1
    vocabularies = {}
    for attr in categorical:
        vocabularies[attr] = sorted(v for v, c in frequencies[attr].items()
                                    if c >= min_frequency and v != OTHER)
    state = EncoderState(vocabularies, numeric, frequencies, min_frequency)
    logger.debug("fitted encoder with %d columns", state.dimensionality)
    return state


def encode_trace(trace, state, max_len=None):
    """
    Return the matrix of feature vectors of the prefixes of length
    1 .. min(len(trace), max_len); row k-1 encodes the prefix of length k.
    """
    n = len(trace) if max_len is None else min(len(trace), max_len)
    rows = np.zeros((n, state.dimensionality))
    n_numeric = len(state.numeric)
    counts = np.zeros(state._numeric_offset)
    last = [None] * n_numeric
    low = [0.0] * n_numeric
    high = [0.0] * n_numeric
    total = [0.0] * n_numeric
    first = trace[0].timestamp
    previous = first
    for k in range(1, n + 1):
        e = trace[k - 1]
        for attr in state.categorical:
            value = _categorical_value(e, attr)
            if value is not None:
                counts[state.column(attr, value)] += 1
        row = rows[k - 1]
        row[:state._numeric_offset] = counts
        for i, attr in enumerate(state.numeric):
            value = e.attrs.get(attr)
            if isinstance(value, float):
                last[i] = value
            else:
                value = last[i] if last[i] is not None else 0.0
            if k == 1:
                low[i] = high[i] = value
            else:
                low[i] = min(low[i], value)
                high[i] = max(high[i], value)
            total[i] += value
            offset = state._numeric_offset + len(NUMERIC_STATS) * i
            row[offset:offset + 4] = (low[i], high[i], total[i] / k, total[i])
        ts = e.timestamp
        row[state._temporal_offset:] = (
            k, ts.hour, ts.weekday(), ts.month,
            (ts - first).total_seconds(), (ts - previous).total_seconds())
        previous = ts
    return rows


def encode_prefix(prefix, state):
    """Return the feature vector of a prefix."""
    return encode_trace(prefix, state)[-1]
