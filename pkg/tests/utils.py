#!/usr/bin/env python
"""
Fixture builders shared by the test modules.
"""
import sys, os
from datetime import datetime, timedelta, timezone

# Search parent directory first, to make sure we test the local alarmsys module,
# not an installed alarmsys module.
parentdir = os.path.realpath(os.path.join(os.path.dirname(__file__), os.pardir))
if parentdir not in sys.path:
    sys.path.insert(1, parentdir)  # insert ../ just after ./

from alarmsys.cost import CostModel, AlarmModel, CostFunction, Effectiveness, ALARM_FACTORS
from alarmsys.estimator import ProbabilitySeries
from alarmsys.log import Event, Trace, EventLog

T0 = datetime(2021, 3, 1, 8, 0, tzinfo=timezone.utc)


def make_trace(case_id, activities, start_minute=0, step=10, attrs=None, resource=None):
    """A trace with one event per activity, step minutes apart."""
    events = []
    for i, activity in enumerate(activities):
        ts = T0 + timedelta(minutes=start_minute + i * step)
        events.append(Event(case_id, activity, ts, resource, attrs[i] if attrs else None))
    return Trace(case_id, events)


def make_log(cases, labels=None):
    """cases: list of (case_id, activities, start_minute)."""
    return EventLog([make_trace(c, acts, start) for c, acts, start in cases], labels)


def series(case_id, probs, outcome, trace_len=None):
    return ProbabilitySeries(case_id, probs, outcome,
                             len(probs) if trace_len is None else trace_len)


def single_model(c_in=1, c_com=0, eff=1, c_out=10):
    return CostModel.single(c_in, c_com, eff, c_out)


def oracle_series(n_undesired, n_desired, length=4):
    """Series with likelihood 1 on every prefix of undesired cases, 0 otherwise."""
    result = []
    for i in range(n_undesired):
        result.append(series("u%03d" % i, [1.0] * length, True))
    for i in range(n_desired):
        result.append(series("d%03d" % i, [0.0] * length, False))
    return result


def spike_series(n=15):
    """
    Undesired cases rise and stay high; desired cases have a single-event
    spike at prefix 2. Only a firing delay separates them.
    """
    result = []
    for i in range(n):
        result.append(series("u%03d" % i, [0.05, 0.8, 0.85, 0.9, 0.9, 0.9], True))
        result.append(series("d%03d" % i, [0.05, 0.9, 0.05, 0.05, 0.05, 0.05], False))
    return result


def stable_series(n=15):
    """Undesired cases are recognized from prefix 2 on, desired cases never look risky."""
    result = []
    for i in range(n):
        result.append(series("u%03d" % i, [0.05, 0.9, 0.9, 0.9], True))
        result.append(series("d%03d" % i, [0.05, 0.05, 0.05, 0.05], False))
    return result


def high_fp_series(prefix="c"):
    """
    30 single-prefix cases: 9 undesired at likelihood 0.95, 6 undesired and
    3 desired at 0.6, 12 desired at 0.1. With the two-alarm cost model of
    high_fp_model the first alarm is cheapest on the certain cases and the
    second one, with its cheaper compensation, on the uncertain ones.
    """
    result = []
    for i in range(9):
        result.append(series("%s_h%02d" % (prefix, i), [0.95], True))
    for i in range(6):
        result.append(series("%s_mu%02d" % (prefix, i), [0.6], True))
    for i in range(3):
        result.append(series("%s_md%02d" % (prefix, i), [0.6], False))
    for i in range(12):
        result.append(series("%s_l%02d" % (prefix, i), [0.1], False))
    return result


def two_alarm_model(c_in=1, c_com=20, c_out=10, factors=ALARM_FACTORS):
    base = AlarmModel(CostFunction("constant", c_in, role="c_in"),
                      CostFunction("constant", c_com, role="c_com"),
                      Effectiveness("constant", 1.0))
    return CostModel([(alarm_id, base.scaled(f_in, f_com)) for alarm_id, f_in, f_com in factors],
                     CostFunction("constant", c_out, role="c_out"))
