"""
Alarm policies: when, if at all, to raise an alarm for a case.

A policy maps the probability series of a case to at most one alarm
decision. The families are

- basic: fire at the first prefix whose likelihood exceeds tau;
- delayed: fire once the likelihood exceeded tau for kappa consecutive prefixes;
- intervals: as delayed, but the threshold depends on the prefix length,
  taus[i] applying from prefix splits[i] on;
- hierarchical: two alarm types with an alarm-vs-no-alarm threshold each
  and a threshold between the two alarms;
- always and never, the baselines.

Thresholds are exceeded strictly: tau = 1 never fires.
"""

import json
import logging

import numpy as np
import pandas as pd

from .cost import AlarmDecision, NO_ALARM, DEFAULT_ALARM_ID
from .errors import ConfigError, PolicyError

logger = logging.getLogger(__name__)


def _check_tau(tau, name="tau"):
    if isinstance(tau, bool) or not isinstance(tau, (int, float)) or not 0.0 <= tau <= 1.0:
        raise PolicyError("%s must be in [0, 1], not %r" % (name, tau))
    return float(tau)


def _check_kappa(kappa):
    if isinstance(kappa, bool) or int(kappa) != kappa or kappa < 1:
        raise PolicyError("kappa must be a positive integer, not %r" % (kappa,))
    return int(kappa)


def decide_basic(series, tau, alarm_id=DEFAULT_ALARM_ID):
    """Fire at the smallest k with probs[k-1] > tau."""
    for k, p in enumerate(series.probs, 1):
        if p > tau:
            return AlarmDecision(alarm_id, k)
    return NO_ALARM


def decide_delayed(series, tau, kappa, alarm_id=DEFAULT_ALARM_ID):
    """Fire at the smallest k such that the last kappa likelihoods up to k all exceed tau."""
    run = 0
    for k, p in enumerate(series.probs, 1):
        run = run + 1 if p > tau else 0
        if run >= kappa:
            return AlarmDecision(alarm_id, k)
    return NO_ALARM


def interval_threshold(splits, taus, k):
    """Return taus[i] for the largest i with splits[i] <= k."""
    tau = taus[0]
    for split, t in zip(splits, taus):
        if split <= k:
            tau = t
        else:
            break
    return tau


def decide_intervals(series, splits, taus, kappa, alarm_id=DEFAULT_ALARM_ID):
    """
    As decide_delayed, where each likelihood of the run is compared with the
    threshold of its own prefix length interval.
    """
    run = 0
    for k, p in enumerate(series.probs, 1):
        run = run + 1 if p > interval_threshold(splits, taus, k) else 0
        if run >= kappa:
            return AlarmDecision(alarm_id, k)
    return NO_ALARM


def decide_hierarchical(series, policy):
    """
    At the first prefix whose likelihood exceeds an alarm-vs-no-alarm
    threshold, fire that alarm; if both are exceeded, fire the lower alarm
    up to tau_pairwise and the higher alarm above.
    """
    low, high = policy.order
    tau_low, tau_high = policy.tau_no_vs[low], policy.tau_no_vs[high]
    for k, p in enumerate(series.probs, 1):
        above_low = p > tau_low
        above_high = p > tau_high
        if above_low and above_high:
            return AlarmDecision(high if p > policy.tau_pairwise else low, k)
        if above_low:
            return AlarmDecision(low, k)
        if above_high:
            return AlarmDecision(high, k)
    return NO_ALARM


class ProbabilityMatrix(object):
    """
    Probability series of a set of cases as a matrix padded with -1, which
    exceeds no threshold. Used to decide for all cases at once.
    """
    def __init__(self, series_set):
        series_set = list(series_set)
        width = max([len(s) for s in series_set] or [1])
        self.case_ids = [s.case_id for s in series_set]
        self.values = np.full((len(series_set), width), -1.0)
        for i, s in enumerate(series_set):
            self.values[i, :len(s)] = s.probs

    def __len__(self):
        return len(self.case_ids)


def _first_run(exceeds, kappa):
    """Return the 1-based index where a run of kappa exceedances completes, 0 if none."""
    if kappa == 1:
        hits = exceeds
    else:
        run = np.zeros(exceeds.shape[0], dtype=np.int64)
        hits = np.zeros_like(exceeds)
        for j in range(exceeds.shape[1]):
            run = np.where(exceeds[:, j], run + 1, 0)
            hits[:, j] = run >= kappa
    fired = hits.any(axis=1)
    return np.where(fired, np.argmax(hits, axis=1) + 1, 0)


class Policy(object):
    """Base class of all alarm policies."""
    type = None

    def alarm_ids(self):
        """Alarm types this policy can fire, indexed by the batch decisions."""
        return (self.alarm_id,)

    def decide(self, series):
        raise NotImplementedError(self.__class__.__name__)

    def decide_matrix(self, matrix):
        """
        Decide for all cases of a ProbabilityMatrix. Return fired_at (0 = no
        alarm) and the index of the fired alarm in alarm_ids().
        """
        raise NotImplementedError(self.__class__.__name__)

    def to_dict(self):
        raise NotImplementedError(self.__class__.__name__)

    def describe(self):
        """Return a short human readable description."""
        return self.type

    def __eq__(self, other):
        return isinstance(other, Policy) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def __repr__(self):
        return "%s(%s)" % (self.__class__.__name__, self.describe())


class NeverPolicy(Policy):
    """Never raise an alarm: the as-is situation."""
    type = "never"

    def __init__(self, alarm_id=DEFAULT_ALARM_ID):
        self.alarm_id = alarm_id

    def decide(self, series):
        return NO_ALARM

    def decide_matrix(self, matrix):
        zeros = np.zeros(len(matrix), dtype=np.int64)
        return zeros, zeros.copy()

    def to_dict(self):
        return {"type": self.type, "alarm_id": self.alarm_id}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("alarm_id", DEFAULT_ALARM_ID))


class AlwaysPolicy(Policy):
    """Raise an alarm at the first event of every case."""
    type = "always"

    def __init__(self, alarm_id=DEFAULT_ALARM_ID):
        self.alarm_id = alarm_id

    def decide(self, series):
        return AlarmDecision(self.alarm_id, 1)

    def decide_matrix(self, matrix):
        return np.ones(len(matrix), dtype=np.int64), np.zeros(len(matrix), dtype=np.int64)

    def to_dict(self):
        return {"type": self.type, "alarm_id": self.alarm_id}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("alarm_id", DEFAULT_ALARM_ID))


class BasicPolicy(Policy):
    """Fire at the first prefix whose likelihood exceeds tau."""
    type = "basic"

    def __init__(self, tau, alarm_id=DEFAULT_ALARM_ID):
        self.tau = _check_tau(tau)
        self.alarm_id = alarm_id

    def decide(self, series):
        return decide_basic(series, self.tau, self.alarm_id)

    def decide_matrix(self, matrix):
        fired_at = _first_run(matrix.values > self.tau, 1)
        return fired_at, np.zeros(len(matrix), dtype=np.int64)

    def describe(self):
        return "tau=%g" % self.tau

    def to_dict(self):
        return {"type": self.type, "tau": self.tau, "alarm_id": self.alarm_id}

    @classmethod
    def from_dict(cls, d):
        return cls(d["tau"], d.get("alarm_id", DEFAULT_ALARM_ID))


class DelayedPolicy(Policy):
    """Fire once the likelihood exceeded tau for kappa consecutive prefixes."""
    type = "delayed"

    def __init__(self, tau, kappa, alarm_id=DEFAULT_ALARM_ID):
        self.tau = _check_tau(tau)
        self.kappa = _check_kappa(kappa)
        self.alarm_id = alarm_id

    def decide(self, series):
        return decide_delayed(series, self.tau, self.kappa, self.alarm_id)

    def decide_matrix(self, matrix):
        fired_at = _first_run(matrix.values > self.tau, self.kappa)
        return fired_at, np.zeros(len(matrix), dtype=np.int64)

    def describe(self):
        return "tau=%g kappa=%d" % (self.tau, self.kappa)

    def to_dict(self):
        return {"type": self.type, "tau": self.tau, "kappa": self.kappa,
                "alarm_id": self.alarm_id}

    @classmethod
    def from_dict(cls, d):
        return cls(d["tau"], d["kappa"], d.get("alarm_id", DEFAULT_ALARM_ID))


class IntervalPolicy(Policy):
    """
    Thresholds per prefix length interval: taus[i] applies from prefix length
    splits[i] up to splits[i+1] - 1. Optionally with a firing delay kappa.
    """
    type = "intervals"

    def __init__(self, splits, taus, kappa=1, alarm_id=DEFAULT_ALARM_ID):
        splits = [int(s) for s in splits]
        if not splits or splits[0] != 1:
            raise PolicyError("Interval splits must start at prefix length 1, not %r" % (splits,))
        for i in range(1, len(splits)):
            if splits[i] <= splits[i - 1]:
                raise PolicyError("Interval splits must strictly increase: %r" % (splits,))
        if len(taus) != len(splits):
            raise PolicyError("%d interval thresholds for %d intervals" % (len(taus), len(splits)))
        self.splits = tuple(splits)
        self.taus = tuple(_check_tau(t, "interval threshold") for t in taus)
        self.kappa = _check_kappa(kappa)
        self.alarm_id = alarm_id

    def decide(self, series):
        return decide_intervals(series, self.splits, self.taus, self.kappa, self.alarm_id)

    def thresholds(self, width):
        """Effective threshold of the prefix lengths 1..width."""
        return np.array([interval_threshold(self.splits, self.taus, k)
                         for k in range(1, width + 1)])

    def decide_matrix(self, matrix):
        exceeds = matrix.values > self.thresholds(matrix.values.shape[1])[np.newaxis, :]
        return _first_run(exceeds, self.kappa), np.zeros(len(matrix), dtype=np.int64)

    def describe(self):
        return "splits=%s taus=%s kappa=%d" % (list(self.splits),
                                               ["%g" % t for t in self.taus], self.kappa)

    def to_dict(self):
        return {"type": self.type, "splits": list(self.splits), "taus": list(self.taus),
                "kappa": self.kappa, "alarm_id": self.alarm_id}

    @classmethod
    def from_dict(cls, d):
        return cls(d["splits"], d["taus"], d.get("kappa", 1), d.get("alarm_id", DEFAULT_ALARM_ID))


class HierarchicalPolicy(Policy):
    """
    Two alarm types, ordered (low, high). tau_no_vs maps each alarm to its
    alarm-vs-no-alarm threshold; above both, the high alarm fires when the
    likelihood exceeds tau_pairwise.
    """
    type = "hierarchical"

    def __init__(self, tau_no_vs, tau_pairwise, order):
        order = tuple(order)
        if len(order) != 2 or order[0] == order[1]:
            raise PolicyError("Hierarchical thresholding supports exactly two alarms, not %r" %
                              (order,))
        if set(tau_no_vs) != set(order):
            raise PolicyError("Alarm-vs-no-alarm thresholds %r do not match alarms %r" %
                              (sorted(tau_no_vs), order))
        self.tau_no_vs = dict((a, _check_tau(tau_no_vs[a], "threshold of %s" % a)) for a in order)
        self.tau_pairwise = _check_tau(tau_pairwise, "tau_pairwise")
        self.order = order

    def alarm_ids(self):
        return self.order

    def decide(self, series):
        return decide_hierarchical(series, self)

    def decide_matrix(self, matrix):
        low, high = self.order
        values = matrix.values
        above_low = values > self.tau_no_vs[low]
        above_high = values > self.tau_no_vs[high]
        fired_at = _first_run(above_low | above_high, 1)
        rows = np.arange(len(matrix))
        at = np.maximum(fired_at - 1, 0)
        p = values[rows, at]
        both = above_low[rows, at] & above_high[rows, at]
        use_high = np.where(both, p > self.tau_pairwise, ~above_low[rows, at])
        return fired_at, np.where((fired_at > 0) & use_high, 1, 0)

    def describe(self):
        low, high = self.order
        return "%s>%g %s>%g pairwise=%g" % (low, self.tau_no_vs[low], high,
                                            self.tau_no_vs[high], self.tau_pairwise)

    def to_dict(self):
        return {"type": self.type, "tau_no_vs": dict(self.tau_no_vs),
                "tau_pairwise": self.tau_pairwise, "order": list(self.order)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["tau_no_vs"], d["tau_pairwise"], d["order"])


POLICYLIST = {NeverPolicy.type: NeverPolicy, AlwaysPolicy.type: AlwaysPolicy,
              BasicPolicy.type: BasicPolicy, DelayedPolicy.type: DelayedPolicy,
              IntervalPolicy.type: IntervalPolicy, HierarchicalPolicy.type: HierarchicalPolicy}
"""Policy classes by their JSON type."""


def policy_from_dict(d):
    try:
        cls = POLICYLIST[d["type"]]
    except (KeyError, TypeError):
        raise PolicyError("Unknown policy %r; known types: %s" %
                          (d.get("type") if isinstance(d, dict) else d, ", ".join(sorted(POLICYLIST))))
    try:
        return cls.from_dict(d)
    except KeyError as e:
        raise PolicyError("Policy %s misses %s" % (d["type"], e))


def load_policy(filename):
    """Read a policy from a JSON file; the file may also be an optimization result."""
    try:
        with open(filename, "r", encoding="utf-8") as f:
            d = json.load(f)
    except (IOError, OSError) as e:
        raise ConfigError("Can not read policy %s: %s" % (filename, e))
    except ValueError as e:
        raise PolicyError("Policy %s is not valid JSON: %s" % (filename, e))
    if isinstance(d, dict) and "policy" in d:
        d = d["policy"]
    return policy_from_dict(d)


def apply_policy(series_set, policy):
    """Return a dict case_id -> AlarmDecision."""
    return dict((s.case_id, policy.decide(s)) for s in series_set)


def write_decisions(decisions, dest):
    """Write decisions as CSV case_id,alarm_id,fired_at; empty fields for no alarm."""
    rows = []
    for case_id in sorted(decisions):
        d = decisions[case_id]
        rows.append([case_id, d.alarm_id or "", "" if d.fired_at is None else str(d.fired_at)])
    pd.DataFrame(rows, columns=["case_id", "alarm_id", "fired_at"], dtype=str).to_csv(dest, index=False)
