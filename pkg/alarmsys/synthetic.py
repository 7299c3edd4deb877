"""
Seeded synthetic event logs whose Bayes-optimal outcome probabilities are
known in closed form.

Every case draws its outcome with probability class_ratio of being
undesired, then a length uniformly from min_length..max_length. Each event
passes through the next stage of a fixed sequence and is either "flagged" or
"passed"; an undesired case flags an event with probability 0.5 + signal/2,
a desired one with 0.5 - signal/2. Each event also carries a numeric
attribute ``amount`` drawn from a normal distribution with mean +signal
(undesired) or -signal (desired) and standard deviation noise. Resources
and event times carry no information about the outcome.

Given the events of a prefix, the posterior probability of an undesired
outcome follows from Bayes' rule; :func:`posterior_series` computes it for
any log with these attributes.
"""

import logging
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import ConfigError
from .estimator import ProbabilitySeries
from .log import Event, EventLog, Trace

logger = logging.getLogger(__name__)

STAGES = ("register", "check", "assess", "review", "decide", "notify")
"""Stage names, cycled through by the events of a case."""
FLAGGED = "flagged"
PASSED = "passed"
AMOUNT = "amount"
START = datetime(2020, 1, 1, tzinfo=timezone.utc)
"""Start of the first case."""


class SyntheticLogSpec(object):
    """Parameters of a synthetic log."""
    KEYS = ("n_cases", "class_ratio", "min_length", "max_length", "signal", "noise",
            "seed", "n_resources")

    def __init__(self, n_cases=1000, class_ratio=0.5, min_length=4, max_length=12,
                 signal=0.5, noise=1.0, seed=0, n_resources=5):
        if int(n_cases) < 1:
            raise ConfigError("n_cases must be at least 1, not %r" % (n_cases,))
        if not 0.0 < class_ratio < 1.0:
            raise ConfigError("class_ratio must be in (0, 1), not %r" % (class_ratio,))
        if int(min_length) < 1 or int(max_length) < int(min_length):
            raise ConfigError("Invalid case lengths %r..%r" % (min_length, max_length))
        if not 0.0 <= signal <= 1.0:
            raise ConfigError("signal must be in [0, 1], not %r" % (signal,))
        if not noise > 0.0:
            raise ConfigError("noise must be positive, not %r" % (noise,))
        if int(n_resources) < 1:
            raise ConfigError("n_resources must be at least 1, not %r" % (n_resources,))
        self.n_cases = int(n_cases)
        self.class_ratio = float(class_ratio)
        self.min_length = int(min_length)
        self.max_length = int(max_length)
        self.signal = float(signal)
        """0: events carry no information; 1: the first event reveals the outcome"""
        self.noise = float(noise)
        self.seed = int(seed)
        self.n_resources = int(n_resources)

    def flag_probability(self, undesired):
        return 0.5 + self.signal / 2 if undesired else 0.5 - self.signal / 2

    def to_dict(self):
        return dict((key, getattr(self, key)) for key in self.KEYS)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ConfigError("Unknown synthetic log keys: %s" % ", ".join(sorted(unknown)))
        return cls(**d)

    def __repr__(self):
        return "%s(%r)" % (self.__class__.__name__, self.to_dict())


def _activity(index, flagged):
    return "%s_%s" % (STAGES[index % len(STAGES)], FLAGGED if flagged else PASSED)


def generate_synthetic_log(spec):
    """
    Return the labeled log and the Bayes-optimal probability series of
    every full case, ordered by case id.
    """
    rng = np.random.default_rng(spec.seed)
    traces = []
    labels = {}
    start = START
    for i in range(spec.n_cases):
        case_id = "case%05d" % i
        undesired = bool(rng.random() < spec.class_ratio)
        length = int(rng.integers(spec.min_length, spec.max_length + 1))
        flags = rng.random(length) < spec.flag_probability(undesired)
        mean = spec.signal if undesired else -spec.signal
        amounts = rng.normal(mean, spec.noise, length)
        gaps = rng.integers(60 * 1000, 8 * 3600 * 1000, length)
        resources = rng.integers(spec.n_resources, size=length)
        ts = start
        events = []
        for j in range(length):
            if j > 0:
                ts = ts + timedelta(milliseconds=int(gaps[j]))
            events.append(Event(case_id, _activity(j, flags[j]), ts,
                                "r%d" % resources[j], {AMOUNT: float(amounts[j])}))
        traces.append(Trace(case_id, events))
        labels[case_id] = undesired
        start = start + timedelta(milliseconds=int(rng.integers(10 * 60 * 1000, 4 * 3600 * 1000)))
    log = EventLog(traces, labels)
    logger.info("generated %d synthetic cases (%d undesired)", len(log),
                sum(1 for v in labels.values() if v))
    return log, posterior_series(log, spec)


def _event_evidence(event, spec):
    """Log likelihood ratio undesired:desired of one event; may be infinite."""
    q1 = spec.flag_probability(True)
    q0 = spec.flag_probability(False)
    with np.errstate(divide="ignore"):
        if event.activity.endswith("_" + FLAGGED):
            ratio = np.log(q1) - np.log(q0)
        else:
            ratio = np.log(1.0 - q1) - np.log(1.0 - q0)
    amount = event.attrs.get(AMOUNT)
    if isinstance(amount, float):
        ratio = ratio + 2.0 * spec.signal * amount / spec.noise ** 2
    return ratio


def posterior(events, spec):
    """Posterior probabilities of an undesired outcome after each prefix of the events."""
    prior = np.log(spec.class_ratio) - np.log(1.0 - spec.class_ratio)
    if spec.signal == 0.0:
        return [spec.class_ratio] * len(events)
    probs = []
    evidence = prior
    for e in events:
        evidence = evidence + _event_evidence(e, spec)
        if evidence == np.inf:
            probs.append(1.0)
        elif evidence == -np.inf:
            probs.append(0.0)
        else:
            probs.append(float(0.5 * (1.0 + np.tanh(0.5 * evidence))))
    return probs


def posterior_series(log, spec, max_len=None):
    """The Bayes-optimal ProbabilitySeries of the cases of a labeled log, ordered by case id."""
    series = []
    for case_id in sorted(log):
        trace = log[case_id]
        events = trace.events if max_len is None else trace.events[:max_len]
        series.append(ProbabilitySeries(case_id, posterior(events, spec),
                                        log.outcome(case_id), len(trace)))
    return series
