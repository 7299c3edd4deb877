"""
Read, prepare and split event logs.

An event log is a set of traces; a trace is the non-empty sequence of events
recorded for one case, ordered by timestamp. Logs are read from CSV files
using a :class:`LogSchema` that names the case id, activity and timestamp
columns. All other columns become event attributes.

The preparation steps follow the evaluation protocol: label the outcome of
each case (optionally cutting the trace before the outcome becomes known),
truncate traces at a percentile of the case lengths, and split the cases
temporally into a training, a thresholding and a test log.
"""

import json
import logging
import math
import re
from collections.abc import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, SchemaError, RowError, LabelingError, \
    EmptyLogError, SplitError

logger = logging.getLogger(__name__)

CANONICAL_TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"
"""Timestamp format of canonical CSV files: ISO-8601 UTC with milliseconds."""
CANONICAL_COLUMNS = ("case_id", "activity", "timestamp", "resource")
"""Leading columns of canonical CSV files."""
OUTCOME_COLUMN = "outcome"
"""Name of the label column written to canonical CSV files of labeled logs."""
POOL_SHARE = 0.8
"""Share of the cases, ordered by start time, that forms the train/thres pool."""
TRAIN_SHARE = 0.8
"""Share of the pool assigned to the training log. The rest is the thresholding log."""
MIN_SPLIT_CASES = 5
"""Minimum number of cases needed for a temporal split."""

_TRUE_FLAGS = ("1", "1.0", "true", "yes")
_FALSE_FLAGS = ("0", "0.0", "false", "no")


class Event(object):
    """A single event of a case. Events are not modified after creation."""
    __slots__ = ("case_id", "activity", "timestamp", "resource", "attrs")

    def __init__(self, case_id, activity, timestamp, resource=None, attrs=None):
        if not activity:
            raise RowError("Event of case %s has no activity" % case_id)
        if timestamp is None:
            raise RowError("Event of case %s has no timestamp" % case_id)
        self.case_id = case_id
        self.activity = activity
        self.timestamp = timestamp
        """timezone-aware UTC datetime, millisecond precision"""
        self.resource = resource
        self.attrs = dict(attrs) if attrs else {}
        """attribute name -> str (categorical) or float (numeric)"""

    def replace_attrs(self, attrs):
        """Return a copy of this event with other attributes."""
        return Event(self.case_id, self.activity, self.timestamp, self.resource, attrs)

    def _key(self):
        return (self.case_id, self.activity, self.timestamp, self.resource,
                sorted(self.attrs.items()))

    def __eq__(self, other):
        return isinstance(other, Event) and self._key() == other._key()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "%s(%r, %r, %s)" % (self.__class__.__name__, self.case_id,
                                   self.activity, self.timestamp.isoformat())


class Trace(Sequence):
    """
    The events of one case, comparable to a read-only list.
    A prefix of a trace is again a Trace.
    """
    def __init__(self, case_id, events):
        self.case_id = case_id
        self.events = tuple(events)
        if not self.events:
            raise EmptyLogError("Trace %s has no events" % case_id)
        for i in range(1, len(self.events)):
            if self.events[i].timestamp < self.events[i - 1].timestamp:
                raise RowError("Events of case %s are not ordered by timestamp" % case_id)

    def head(self, k):
        """Return the prefix of length k (the whole trace if k >= len)."""
        if k >= len(self.events):
            return self
        return Trace(self.case_id, self.events[:k])

    @property
    def start(self):
        """Timestamp of the first event."""
        return self.events[0].timestamp

    @property
    def end(self):
        """Timestamp of the last event."""
        return self.events[-1].timestamp

    # Mixin methods
    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, key):
        return self.events[key]

    def __eq__(self, other):
        return isinstance(other, Trace) and self.case_id == other.case_id \
            and self.events == other.events

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash((self.case_id, len(self.events)))

    def trace_info(self):
        """Return a one-line summary with case id and activities."""
        return "%s(%r): %s" % (self.__class__.__name__, self.case_id,
                               ", ".join(e.activity for e in self.events))

    def __repr__(self):
        return "<%s(%r) %d events at 0x%x>" % (self.__class__.__name__,
                                               self.case_id, len(self.events), id(self))


class EventLog(Mapping):
    """
    A set of traces, comparable to a read-only dict case_id -> Trace,
    and the outcome label of each case (True = undesired outcome).
    Iteration follows the order in which the cases were added.
    """
    def __init__(self, traces=(), labels=None):
        self.traces = {}
        for trace in traces:
            if trace.case_id in self.traces:
                raise RowError("Duplicate case id %s" % trace.case_id)
            self.traces[trace.case_id] = trace
        self.labels = dict(labels) if labels else {}
        for case_id in self.labels:
            if case_id not in self.traces:
                raise LabelingError("Label for unknown case %s" % case_id)

    def is_labeled(self):
        """Return True if every case carries an outcome label."""
        return len(self.labels) == len(self.traces)

    def outcome(self, case_id):
        """Return the outcome label of a case. Raise LabelingError if it is unknown."""
        try:
            return self.labels[case_id]
        except KeyError:
            raise LabelingError("Case %s has no outcome label" % case_id)

    def subset(self, case_ids):
        """Return a new log with only the given cases, in the given order."""
        traces = [self.traces[c] for c in case_ids]
        labels = dict((c, self.labels[c]) for c in case_ids if c in self.labels)
        return EventLog(traces, labels)

    def event_count(self):
        return sum(len(t) for t in self.traces.values())

    # Mixin methods
    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    def __getitem__(self, case_id):
        return self.traces[case_id]

    def __eq__(self, other):
        return isinstance(other, EventLog) and list(self.traces.items()) == \
            list(other.traces.items()) and self.labels == other.labels

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "<%s %d cases, %d events at 0x%x>" % (self.__class__.__name__,
                                                     len(self), self.event_count(), id(self))


class DatasetSplit(object):
    """The training, thresholding and test logs of a temporal split."""
    def __init__(self, train, thres, test, assigned=None):
        self.train = train
        self.thres = thres
        self.test = test
        self.assigned = assigned or {}
        """number of cases assigned to each partition before discarding
        the events that overlap in time with the test log"""

    def sizes(self):
        return {"train": len(self.train), "thres": len(self.thres), "test": len(self.test)}

    def __repr__(self):
        return "%s(train=%d, thres=%d, test=%d)" % (self.__class__.__name__,
            len(self.train), len(self.thres), len(self.test))


class LabelRule(object):
    """
    How the outcome label of a case is determined. Either a designated
    label column, constant per case, or the occurrence of an activity.
    With an activity rule and cut=True, all events at and after the first
    occurrence of the activity are removed.
    """
    def __init__(self, column=None, activity=None, cut=True):
        if (column is None) == (activity is None):
            raise SchemaError("A label rule needs either a column or an activity")
        self.column = column
        self.activity = activity
        self.cut = bool(cut)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise SchemaError("Label rule must be an object, not %r" % (d,))
        unknown = set(d) - set(("column", "activity", "cut"))
        if unknown:
            raise SchemaError("Unknown label rule keys: %s" % ", ".join(sorted(unknown)))
        return cls(column=d.get("column"), activity=d.get("activity"), cut=d.get("cut", True))

    def to_dict(self):
        if self.column is not None:
            return {"column": self.column}
        return {"activity": self.activity, "cut": self.cut}

    def __repr__(self):
        return "%s(%r)" % (self.__class__.__name__, self.to_dict())


class LogSchema(object):
    """Column mapping of a CSV event log."""
    def __init__(self, case_id_col, activity_col, timestamp_col, timestamp_format,
                 resource_col=None, label=None):
        for key, value in (("case_id_col", case_id_col), ("activity_col", activity_col),
                           ("timestamp_col", timestamp_col),
                           ("timestamp_format", timestamp_format)):
            if not value:
                raise SchemaError("Log schema has no %s" % key)
        self.case_id_col = case_id_col
        self.activity_col = activity_col
        self.timestamp_col = timestamp_col
        self.timestamp_format = timestamp_format
        self.resource_col = resource_col
        if isinstance(label, dict):
            label = LabelRule.from_dict(label)
        self.label = label
        """a LabelRule, or None if the log is not labeled while reading"""

    def mandatory_columns(self):
        return [self.case_id_col, self.activity_col, self.timestamp_col]

    @classmethod
    def from_dict(cls, d):
        known = ("case_id_col", "activity_col", "timestamp_col", "timestamp_format",
                 "resource_col", "label")
        unknown = set(d) - set(known)
        if unknown:
            raise SchemaError("Unknown log schema keys: %s" % ", ".join(sorted(unknown)))
        return cls(d.get("case_id_col"), d.get("activity_col"), d.get("timestamp_col"),
                   d.get("timestamp_format"), d.get("resource_col"), d.get("label"))

    @classmethod
    def from_file(cls, filename):
        try:
            with open(filename, "r", encoding="utf-8") as f:
                d = json.load(f)
        except (IOError, OSError) as e:
            raise ConfigError("Can not read log schema %s: %s" % (filename, e))
        except ValueError as e:
            raise SchemaError("Log schema %s is not valid JSON: %s" % (filename, e))
        return cls.from_dict(d)

    def to_dict(self):
        d = {"case_id_col": self.case_id_col, "activity_col": self.activity_col,
             "timestamp_col": self.timestamp_col, "timestamp_format": self.timestamp_format}
        if self.resource_col:
            d["resource_col"] = self.resource_col
        if self.label is not None:
            d["label"] = self.label.to_dict()
        return d


CANONICAL_SCHEMA = LogSchema("case_id", "activity", "timestamp",
                             CANONICAL_TIMESTAMP_FORMAT, resource_col="resource")
"""Schema of canonical CSV files as written by :func:`write_event_log`."""


def _is_numeric_column(values):
    """A column is numeric if every non-empty value parses as a number."""
    nonempty = values[values != ""]
    if len(nonempty) == 0:
        return False
    return not pd.to_numeric(nonempty, errors="coerce").isna().any()


_LINE_PATTERN = re.compile(r"line (\d+)")


def read_table(source, what, error_class=RowError):
    """
    Read a UTF-8 CSV file as a frame of strings. Invalid UTF-8 and rows
    with more fields than the header raise error_class; a file without a
    header row raises pandas' EmptyDataError.
    """
    try:
        df = pd.read_csv(source, dtype=str, keep_default_na=False, encoding="utf-8")
    except UnicodeDecodeError as e:
        raise error_class("%s is not valid UTF-8: %s" % (what, e))
    except pd.errors.ParserError as e:
        match = _LINE_PATTERN.search(str(e))
        line = int(match.group(1)) if match else None
        raise error_class("%s has a malformed row: %s" % (what, str(e).strip()), line=line)
    # pandas turns surplus leading fields of the first row into an index
    if not isinstance(df.index, pd.RangeIndex):
        raise error_class("%s line 2 has more fields than the header" % what, line=2)
    return df


def parse_event_log(source, schema):
    """
    Parse a UTF-8 CSV event log from a filename or file object.
    Events are sorted by timestamp within each case; ties keep file order.
    Cases keep the order of their first appearance in the file.
    """
    try:
        df = read_table(source, "Event log")
    except pd.errors.EmptyDataError:
        raise SchemaError("Event log has no header row")
    for col in schema.mandatory_columns():
        if col not in df.columns:
            raise SchemaError("Event log has no column %r" % col)
    if schema.resource_col and schema.resource_col not in df.columns:
        raise SchemaError("Event log has no column %r" % schema.resource_col)

    raw_ts = df[schema.timestamp_col]
    timestamps = pd.to_datetime(raw_ts, format=schema.timestamp_format,
                                errors="coerce", utc=True)
    bad = np.flatnonzero(timestamps.isna().to_numpy())
    if len(bad):
        line = int(bad[0]) + 2
        raise RowError("Unparseable timestamp %r on line %d" % (raw_ts.iloc[bad[0]], line),
                       line=line)
    timestamps = [t.to_pydatetime() for t in timestamps.dt.floor("ms")]

    reserved = set(schema.mandatory_columns())
    if schema.resource_col:
        reserved.add(schema.resource_col)
    attr_cols = [c for c in df.columns if c not in reserved]
    numeric = dict((c, _is_numeric_column(df[c])) for c in attr_cols)

    case_ids = df[schema.case_id_col].tolist()
    activities = df[schema.activity_col].tolist()
    resources = df[schema.resource_col].tolist() if schema.resource_col else None
    attr_values = dict((c, df[c].tolist()) for c in attr_cols)

    grouped = {}
    for pos in range(len(df)):
        case_id = case_ids[pos]
        if case_id == "":
            raise RowError("Empty case id on line %d" % (pos + 2), line=pos + 2)
        if activities[pos] == "":
            raise RowError("Empty activity on line %d" % (pos + 2), line=pos + 2)
        attrs = {}
        for c in attr_cols:
            value = attr_values[c][pos]
            if value == "":
                continue
            attrs[c] = float(value) if numeric[c] else value
        resource = resources[pos] if resources is not None and resources[pos] != "" else None
        event = Event(case_id, activities[pos], timestamps[pos], resource, attrs)
        grouped.setdefault(case_id, []).append(event)

    traces = []
    for case_id, events in grouped.items():
        # list.sort is stable: ties keep file order
        events.sort(key=lambda e: e.timestamp)
        traces.append(Trace(case_id, events))
    logger.debug("parsed %d events in %d cases", len(df), len(traces))
    return EventLog(traces)


def read_event_log(source, schema):
    """Parse an event log and label it if the schema has a label rule."""
    log = parse_event_log(source, schema)
    if schema.label is not None:
        log = label_outcomes(log, schema.label)
    return log


def read_canonical_log(source):
    """Read a canonical CSV file, labeled if it has an outcome column."""
    log = parse_event_log(source, CANONICAL_SCHEMA)
    if any(OUTCOME_COLUMN in e.attrs for t in log.values() for e in t):
        log = label_outcomes(log, LabelRule(column=OUTCOME_COLUMN))
    return log


def _format_timestamp(ts):
    return ts.strftime("%Y-%m-%dT%H:%M:%S.") + "%03dZ" % (ts.microsecond // 1000)


def _format_value(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_event_log(log, dest):
    """
    Write a log as canonical CSV to a filename or text file object: columns
    case_id, activity, timestamp, resource, outcome (labeled logs only),
    then the attributes in lexicographic order.
    """
    attr_names = sorted(set(name for t in log.values() for e in t for name in e.attrs))
    labeled = log.is_labeled() and len(log) > 0
    clash = [name for name in attr_names if name in CANONICAL_COLUMNS]
    if clash:
        raise SchemaError("Attribute name %r clashes with a canonical column" % clash[0])
    if labeled and OUTCOME_COLUMN in attr_names:
        raise SchemaError("Attribute name %r is reserved for the outcome label" % OUTCOME_COLUMN)
    columns = list(CANONICAL_COLUMNS)
    if labeled:
        columns.append(OUTCOME_COLUMN)
    columns.extend(attr_names)
    rows = []
    for case_id, trace in log.items():
        for e in trace:
            row = [case_id, e.activity, _format_timestamp(e.timestamp), e.resource or ""]
            if labeled:
                row.append("1" if log.labels[case_id] else "0")
            row.extend(_format_value(e.attrs[a]) if a in e.attrs else "" for a in attr_names)
            rows.append(row)
    pd.DataFrame(rows, columns=columns, dtype=str).to_csv(dest, index=False)


def _parse_flag(value, case_id, column):
    if isinstance(value, float):
        if value in (0.0, 1.0):
            return value == 1.0
    elif value is not None:
        flag = value.strip().lower()
        if flag in _TRUE_FLAGS:
            return True
        if flag in _FALSE_FLAGS:
            return False
    raise LabelingError("Case %s has an invalid value %r in label column %r" %
                        (case_id, value, column))


def label_outcomes(log, rule):
    """
    Return a copy of log with every case labeled according to rule.
    A label column is removed from the event attributes. With an activity
    rule and cutting, cases that start with the activity are dropped since
    nothing of them remains.
    """
    traces = []
    labels = {}
    dropped = 0
    for case_id, trace in log.items():
        if rule.column is not None:
            flags = set(_parse_flag(e.attrs.get(rule.column), case_id, rule.column)
                        for e in trace)
            if len(flags) != 1:
                raise LabelingError("Label column %r is not constant within case %s" %
                                    (rule.column, case_id))
            events = [e.replace_attrs(dict((k, v) for k, v in e.attrs.items()
                                           if k != rule.column)) for e in trace]
            traces.append(Trace(case_id, events))
            labels[case_id] = flags.pop()
        else:
            position = None
            for i, e in enumerate(trace):
                if e.activity == rule.activity:
                    position = i
                    break
            if position is not None and rule.cut:
                if position == 0:
                    dropped += 1
                    continue
                trace = trace.head(position)
            traces.append(trace)
            labels[case_id] = position is not None
    if dropped:
        logger.info("dropped %d cases starting with %r", dropped, rule.activity)
    return EventLog(traces, labels)


def percentile_length(lengths, percentile):
    """
    Return the smallest length l such that the share of lengths <= l is at
    least percentile (nearest-rank).
    """
    if not 0 < percentile <= 1:
        raise ConfigError("Percentile must be in (0, 1], not %r" % percentile)
    ordered = sorted(lengths)
    if not ordered:
        raise EmptyLogError("Can not compute the length percentile of an empty log")
    rank = int(math.ceil(round(percentile * len(ordered), 9)))
    return ordered[max(rank, 1) - 1]


def truncate_log(log, percentile):
    """Truncate every trace to the length at the given percentile of all case lengths."""
    if len(log) == 0:
        raise EmptyLogError("Can not truncate an empty log")
    max_len = percentile_length([len(t) for t in log.values()], percentile)
    traces = [t.head(max_len) for t in log.values()]
    logger.debug("truncated traces at length %d", max_len)
    return EventLog(traces, log.labels)


def _share(n, fraction):
    return int(math.floor(n * fraction + 1e-9))


def _discard_from(log, case_ids, cutoff):
    """Keep only events strictly before cutoff. Traces emptied are removed."""
    traces = []
    for case_id in case_ids:
        events = [e for e in log[case_id] if e.timestamp < cutoff]
        if events:
            traces.append(Trace(case_id, events))
    kept = [t.case_id for t in traces]
    return EventLog(traces, dict((c, log.labels[c]) for c in kept if c in log.labels))


def temporal_split(log, seed):
    """
    Split a log into training, thresholding and test logs. Cases are ordered
    by start time; the first 80% form a pool of which a seeded shuffle
    assigns 80% to training and the rest to thresholding. The last 20% are
    the test log. Events of the pool cases at or after the start of the
    earliest test case are discarded.
    """
    n = len(log)
    if n < MIN_SPLIT_CASES:
        raise SplitError("A temporal split needs at least %d cases, the log has %d" %
                         (MIN_SPLIT_CASES, n))
    positions = dict((c, i) for i, c in enumerate(log))
    ordered = sorted(log, key=lambda c: (log[c].start, positions[c]))
    n_pool = _share(n, POOL_SHARE)
    pool, test_ids = ordered[:n_pool], ordered[n_pool:]
    permutation = np.random.default_rng(seed).permutation(n_pool)
    n_train = _share(n_pool, TRAIN_SHARE)
    train_pos = sorted(int(i) for i in permutation[:n_train])
    thres_pos = sorted(int(i) for i in permutation[n_train:])
    train_ids = [pool[i] for i in train_pos]
    thres_ids = [pool[i] for i in thres_pos]
    assigned = {"train": len(train_ids), "thres": len(thres_ids), "test": len(test_ids)}

    cutoff = min(log[c].start for c in test_ids)
    train = _discard_from(log, train_ids, cutoff)
    thres = _discard_from(log, thres_ids, cutoff)
    test = log.subset(test_ids)
    for name, part in (("train", train), ("thres", thres), ("test", test)):
        if len(part) == 0:
            raise SplitError("The %s log is empty after discarding events that "
                             "overlap with the test log" % name)
    split = DatasetSplit(train, thres, test, assigned)
    logger.info("split %d cases into %s", n, split)
    return split


def prefixes(trace, max_len):
    """Yield the prefixes of trace of length 1 .. min(len(trace), max_len)."""
    if max_len < 1:
        raise ConfigError("Maximum prefix length must be at least 1, not %r" % max_len)
    for k in range(1, min(len(trace), max_len) + 1):
        yield trace.head(k)


def log_statistics(log):
    """Return the number of traces, class ratio, min/median/max length and number of events."""
    if len(log) == 0:
        raise EmptyLogError("Can not compute statistics of an empty log")
    lengths = np.array([len(t) for t in log.values()])
    stats = {
        "traces": len(log),
        "min_length": int(lengths.min()),
        "median_length": float(np.median(lengths)),
        "max_length": int(lengths.max()),
        "events": int(lengths.sum()),
    }
    if log.is_labeled():
        stats["class_ratio"] = sum(1 for v in log.labels.values() if v) / float(len(log))
    return stats
