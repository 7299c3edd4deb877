"""
Alarm models and cost models.

An alarm model is a triple (c_in, c_com, eff): the cost of the intervention
triggered by the alarm, the compensation cost when the intervention turns
out to be superfluous, and the mitigation effectiveness, the share of the
cost of an undesired outcome c_out that is avoided by intervening. A cost
model maps each alarm type to an alarm model and adds c_out. The cost of a
case depends on its outcome and on whether and when an alarm fired:

    ================  ==================================  ==================
                      alarm raised at prefix k            no alarm
    ================  ==================================  ==================
    undesired         c_in(k) + (1 - eff(k)) * c_out      c_out
    desired           c_in(k) + c_com(k)                  0
    ================  ==================================  ==================

Cost functions depend on the prefix index k and the trace length only.
"""

import json
import logging

import numpy as np

from .errors import ConfigError, CostModelError, CostRangeError, DataError

logger = logging.getLogger(__name__)

COST_FAMILIES = ("constant", "linear", "non_monotonic")
"""Cost function families: constant base, base * k / |trace|, and the non-monotonic forms."""
EFF_FAMILIES = ("constant", "linear_decay", "non_monotonic")
"""Effectiveness families: constant value, 1 - k / |trace|, 1 - min(e, k - 1) / f."""
CONSTANT_NAMES = ("a", "b", "c", "d", "e", "f")

NONMONOTONIC_CONSTANTS = {
    "bpic2017_cancelled": {"a": 10, "b": 35, "c": 13, "d": 32, "e": 18, "f": 40},
    "bpic2017_refused": {"a": 8, "b": 33, "c": 15, "d": 34, "e": 20, "f": 35},
    "traffic_fines": {"a": 3, "b": 5, "c": 2, "d": 5, "e": 3, "f": 4},
}
"""Constants of the non-monotonic cost configurations per evaluation log. Numerators
are close to the minimum case length, divisors close to the median case length."""

ALARM_FACTORS = (("alarm_1", 1.0, 1.0), ("alarm_2", 1.2, 0.5))
"""(alarm id, c_in factor, c_com factor) of the two-alarm configuration."""

DEFAULT_ALARM_ID = "alarm"
"""Alarm id of single-alarm cost models and policies."""


def _resolve_constants(constants):
    if constants is None:
        return None
    if isinstance(constants, str):
        try:
            return dict(NONMONOTONIC_CONSTANTS[constants])
        except KeyError:
            raise CostModelError("Unknown constants preset %r; known presets: %s" %
                                 (constants, ", ".join(sorted(NONMONOTONIC_CONSTANTS))))
    missing = [n for n in CONSTANT_NAMES if n not in constants]
    if missing:
        raise CostModelError("Non-monotonic constants miss %s" % ", ".join(missing))
    resolved = {}
    for name in CONSTANT_NAMES:
        value = constants[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or int(value) != value or value <= 0:
            raise CostModelError("Constant %s must be a positive integer, not %r" % (name, value))
        resolved[name] = int(value)
    return resolved


def _check_range(k, trace_len):
    if not 1 <= k <= trace_len:
        raise CostRangeError("Prefix index %r outside 1..%r" % (k, trace_len))


class CostFunction(object):
    """
    A cost function of the prefix index k and trace length. The role
    (c_in, c_com or c_out) selects the non-monotonic form:
    c_in: base * (1 - min(a, k - 1) / b), c_com: base * (1 - min(k - 1, c) / d).
    Results are clamped at 0.
    """
    def __init__(self, family, base, constants=None, role="c_in"):
        if family not in COST_FAMILIES:
            raise CostModelError("Unknown cost family %r" % (family,))
        if isinstance(base, bool) or not isinstance(base, (int, float)) or not base >= 0:
            raise CostModelError("Cost base must be a non-negative number, not %r" % (base,))
        if role not in ("c_in", "c_com", "c_out"):
            raise CostModelError("Unknown cost role %r" % (role,))
        if family == "non_monotonic":
            if role == "c_out":
                raise CostModelError("c_out supports the constant and linear families only")
            constants = _resolve_constants(constants)
            if constants is None:
                raise CostModelError("The non-monotonic %s needs constants a..f" % role)
        self.family = family
        self.base = float(base)
        self.constants = constants if family == "non_monotonic" else None
        self.role = role

    def evaluate(self, k, trace_len):
        _check_range(k, trace_len)
        if self.family == "constant":
            value = self.base
        elif self.family == "linear":
            value = self.base * k / float(trace_len)
        elif self.role == "c_in":
            value = self.base * (1.0 - min(self.constants["a"], k - 1) / float(self.constants["b"]))
        else:
            value = self.base * (1.0 - min(k - 1, self.constants["c"]) / float(self.constants["d"]))
        return max(value, 0.0)

    def scaled(self, factor):
        """Return this cost function with its base multiplied by factor."""
        return CostFunction(self.family, self.base * factor, self.constants, self.role)

    def to_dict(self):
        d = {"family": self.family, "base": self.base}
        if self.constants is not None:
            d["constants"] = dict(self.constants)
        return d

    @classmethod
    def from_dict(cls, d, role="c_in", constants=None):
        """
        Build from {"family", "base", "constants"}; a bare number means a
        constant cost. A CostFunction is taken as is, in the given role.
        """
        if isinstance(d, CostFunction):
            if d.role == role:
                return d
            return cls(d.family, d.base, d.constants, role)
        if isinstance(d, (int, float)) and not isinstance(d, bool):
            return cls("constant", d, role=role)
        if not isinstance(d, dict):
            raise CostModelError("Invalid %s specification %r" % (role, d))
        unknown = set(d) - set(("family", "base", "constants"))
        if unknown:
            raise CostModelError("Unknown %s keys: %s" % (role, ", ".join(sorted(unknown))))
        return cls(d.get("family", "constant"), d.get("base", 0.0),
                   d.get("constants", constants), role)

    def __eq__(self, other):
        return isinstance(other, CostFunction) and self.to_dict() == other.to_dict() \
            and self.role == other.role

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "%s(%r, %r, role=%r)" % (self.__class__.__name__, self.family, self.base, self.role)


class Effectiveness(object):
    """Mitigation effectiveness of intervening after prefix k, always within [0, 1]."""
    def __init__(self, family, value=None, constants=None):
        if family not in EFF_FAMILIES:
            raise CostModelError("Unknown effectiveness family %r" % (family,))
        if family == "constant":
            if isinstance(value, bool) or not isinstance(value, (int, float)) \
                    or not 0.0 <= value <= 1.0:
                raise CostModelError("Constant effectiveness must be in [0, 1], not %r" % (value,))
            value = float(value)
        if family == "non_monotonic":
            constants = _resolve_constants(constants)
            if constants is None:
                raise CostModelError("The non-monotonic effectiveness needs constants a..f")
        self.family = family
        self.value = value if family == "constant" else None
        self.constants = constants if family == "non_monotonic" else None

    def evaluate(self, k, trace_len):
        _check_range(k, trace_len)
        if self.family == "constant":
            return self.value
        if self.family == "linear_decay":
            value = 1.0 - k / float(trace_len)
        else:
            value = 1.0 - min(self.constants["e"], k - 1) / float(self.constants["f"])
        return min(max(value, 0.0), 1.0)

    def to_dict(self):
        d = {"family": self.family}
        if self.value is not None:
            d["value"] = self.value
        if self.constants is not None:
            d["constants"] = dict(self.constants)
        return d

    @classmethod
    def from_dict(cls, d, constants=None):
        """Build from {"family", "value", "constants"}; a bare number means a constant."""
        if isinstance(d, Effectiveness):
            return d
        if isinstance(d, (int, float)) and not isinstance(d, bool):
            return cls("constant", d)
        if isinstance(d, str):
            return cls(d, constants=constants)
        if not isinstance(d, dict):
            raise CostModelError("Invalid eff specification %r" % (d,))
        unknown = set(d) - set(("family", "value", "constants"))
        if unknown:
            raise CostModelError("Unknown eff keys: %s" % ", ".join(sorted(unknown)))
        return cls(d.get("family", "constant"), d.get("value"), d.get("constants", constants))

    def __eq__(self, other):
        return isinstance(other, Effectiveness) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "%s(%r)" % (self.__class__.__name__, self.to_dict())


class AlarmModel(object):
    """The tuple (c_in, c_com, eff) of one alarm type."""
    def __init__(self, c_in, c_com, eff):
        self.c_in = c_in
        self.c_com = c_com
        self.eff = eff

    def scaled(self, c_in_factor=1.0, c_com_factor=1.0):
        """Return the alarm model with the c_in and c_com bases multiplied by the factors."""
        return AlarmModel(self.c_in.scaled(c_in_factor), self.c_com.scaled(c_com_factor), self.eff)

    def to_dict(self):
        return {"c_in": self.c_in.to_dict(), "c_com": self.c_com.to_dict(),
                "eff": self.eff.to_dict()}

    @classmethod
    def from_dict(cls, d, constants=None):
        for key in ("c_in", "c_com", "eff"):
            if key not in d:
                raise CostModelError("Alarm model has no %s" % key)
        model = cls(CostFunction.from_dict(d["c_in"], "c_in", constants),
                    CostFunction.from_dict(d["c_com"], "c_com", constants),
                    Effectiveness.from_dict(d["eff"], constants))
        factors = d.get("factors")
        if factors:
            unknown = set(factors) - set(("c_in", "c_com"))
            if unknown:
                raise CostModelError("Unknown factor keys: %s" % ", ".join(sorted(unknown)))
            model = model.scaled(factors.get("c_in", 1.0), factors.get("c_com", 1.0))
        return model

    def __eq__(self, other):
        return isinstance(other, AlarmModel) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "%s(c_in=%r, c_com=%r, eff=%r)" % (self.__class__.__name__,
                                                   self.c_in, self.c_com, self.eff)


class CostModel(object):
    """
    A multi-alarm cost model: alarm models in escalation order and the cost
    of an undesired outcome c_out. A single-alarm cost model has one alarm.
    """
    def __init__(self, alarms, c_out):
        alarms = list(alarms)
        if not alarms:
            raise CostModelError("A cost model needs at least one alarm")
        ids = [alarm_id for alarm_id, _ in alarms]
        if len(set(ids)) != len(ids):
            raise CostModelError("Alarm ids are not unique: %s" % ", ".join(ids))
        if c_out.role != "c_out":
            c_out = CostFunction(c_out.family, c_out.base, c_out.constants, "c_out")
        self.alarms = alarms
        self.c_out = c_out
        self._by_id = dict(alarms)

    @classmethod
    def single(cls, c_in, c_com, eff, c_out, alarm_id=DEFAULT_ALARM_ID):
        """
        Return a single-alarm cost model. Numbers are accepted for constant
        costs and a constant effectiveness.
        """
        return cls([(alarm_id, AlarmModel(CostFunction.from_dict(c_in, "c_in"),
                                          CostFunction.from_dict(c_com, "c_com"),
                                          Effectiveness.from_dict(eff)))],
                   CostFunction.from_dict(c_out, "c_out"))

    def alarm_ids(self):
        return [alarm_id for alarm_id, _ in self.alarms]

    def alarm(self, alarm_id):
        try:
            return self._by_id[alarm_id]
        except KeyError:
            raise CostModelError("Unknown alarm %r; the cost model has %s" %
                                 (alarm_id, ", ".join(self.alarm_ids())))

    def is_single(self):
        return len(self.alarms) == 1

    def restricted(self, alarm_id):
        """Return the single-alarm cost model of one alarm type."""
        return CostModel([(alarm_id, self.alarm(alarm_id))], self.c_out)

    def out_cost(self, trace_len):
        """c_out of a case, evaluated with its full trace."""
        return self.c_out.evaluate(trace_len, trace_len)

    def to_dict(self):
        return {"alarms": [dict(id=alarm_id, **model.to_dict()) for alarm_id, model in self.alarms],
                "c_out": self.c_out.to_dict()}

    @classmethod
    def from_dict(cls, d):
        """
        Build a cost model from its JSON form. Alarm entries inherit missing
        keys from "base_alarm" and may carry "factors"; "constants" (a dict
        or a preset name) applies to every non-monotonic function that does
        not list its own. Without "alarms", the top level is one alarm model.
        """
        if not isinstance(d, dict):
            raise CostModelError("A cost model must be an object")
        if "c_out" not in d:
            raise CostModelError("Cost model has no c_out")
        constants = d.get("constants")
        base = d.get("base_alarm", {})
        if "alarms" in d:
            entries = d["alarms"]
        else:
            entry = dict((k, d[k]) for k in ("c_in", "c_com", "eff", "factors") if k in d)
            entry["id"] = d.get("id", DEFAULT_ALARM_ID)
            entries = [entry]
        alarms = []
        for entry in entries:
            merged = dict(base)
            merged.update(entry)
            if "id" not in merged:
                raise CostModelError("Alarm entry has no id")
            alarms.append((merged["id"], AlarmModel.from_dict(merged, constants)))
        return cls(alarms, CostFunction.from_dict(d["c_out"], "c_out", constants))

    @classmethod
    def from_file(cls, filename):
        try:
            with open(filename, "r", encoding="utf-8") as f:
                d = json.load(f)
        except (IOError, OSError) as e:
            raise ConfigError("Can not read cost model %s: %s" % (filename, e))
        except ValueError as e:
            raise CostModelError("Cost model %s is not valid JSON: %s" % (filename, e))
        return cls.from_dict(d)

    def __eq__(self, other):
        return isinstance(other, CostModel) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "<%s %s at 0x%x>" % (self.__class__.__name__, ", ".join(self.alarm_ids()), id(self))


class AlarmDecision(object):
    """Which alarm fired at which prefix index, or neither (no alarm)."""
    __slots__ = ("alarm_id", "fired_at")

    def __init__(self, alarm_id=None, fired_at=None):
        if (alarm_id is None) != (fired_at is None):
            raise DataError("An alarm decision needs both an alarm id and a prefix index, or neither")
        if fired_at is not None and fired_at < 1:
            raise DataError("Alarms fire at prefix index 1 or later, not %r" % fired_at)
        self.alarm_id = alarm_id
        self.fired_at = fired_at

    def fired(self):
        return self.fired_at is not None

    def __eq__(self, other):
        return isinstance(other, AlarmDecision) and \
            (self.alarm_id, self.fired_at) == (other.alarm_id, other.fired_at)

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash((self.alarm_id, self.fired_at))

    def __repr__(self):
        if self.fired_at is None:
            return "%s(no alarm)" % self.__class__.__name__
        return "%s(%r at %d)" % (self.__class__.__name__, self.alarm_id, self.fired_at)


NO_ALARM = AlarmDecision()


class CostSummary(object):
    """Total and average cost over a set of cases."""
    def __init__(self, total, n_cases):
        self.total = total
        self.n_cases = n_cases
        self.avg_per_case = total / n_cases if n_cases else 0.0

    def __repr__(self):
        return "%s(total=%r, avg_per_case=%r)" % (self.__class__.__name__,
                                                  self.total, self.avg_per_case)


def eval_cost_fn(spec, k, trace_len):
    return spec.evaluate(k, trace_len)


def eval_eff(spec, k, trace_len):
    return spec.evaluate(k, trace_len)


def case_cost(trace_len, outcome, decision, model):
    """Cost of one case given its outcome and the alarm decision."""
    if decision.fired_at is None:
        return model.out_cost(trace_len) if outcome else 0.0
    alarm = model.alarm(decision.alarm_id)
    k = decision.fired_at
    intervention = alarm.c_in.evaluate(k, trace_len)
    if outcome:
        return intervention + (1.0 - alarm.eff.evaluate(k, trace_len)) * model.out_cost(trace_len)
    return intervention + alarm.c_com.evaluate(k, trace_len)


def total_cost(series_set, decisions, model):
    """Sum and mean of the case costs. Every case needs a decision."""
    total = 0.0
    n = 0
    for s in series_set:
        try:
            decision = decisions[s.case_id]
        except KeyError:
            raise DataError("No alarm decision for case %s" % s.case_id)
        total += case_cost(s.trace_len, s.outcome, decision, model)
        n += 1
    return CostSummary(total, n)


class CostTable(object):
    """
    Precomputed case costs: fire[a, i, k-1] is the cost of case i when
    alarm a fires at prefix k, never[i] the cost when no alarm fires.
    Prefixes beyond a case's probability series cost infinity.
    """
    def __init__(self, case_ids, alarm_ids, fire, never):
        self.case_ids = case_ids
        self.alarm_ids = alarm_ids
        self.fire = fire
        self.never = never

    def case_costs(self, fired_at, alarm_index):
        """Cost per case for fired_at (0 = no alarm) and the index of the fired alarm."""
        rows = np.arange(len(self.never))
        firing = self.fire[alarm_index, rows, np.maximum(fired_at - 1, 0)]
        return np.where(fired_at > 0, firing, self.never)


def case_cost_table(series_set, model):
    series_set = list(series_set)
    width = max([len(s) for s in series_set] or [1])
    alarm_ids = model.alarm_ids()
    fire = np.full((len(alarm_ids), len(series_set), width), np.inf)
    never = np.zeros(len(series_set))
    for i, s in enumerate(series_set):
        never[i] = case_cost(s.trace_len, s.outcome, NO_ALARM, model)
        for a, alarm_id in enumerate(alarm_ids):
            for k in range(1, len(s) + 1):
                fire[a, i, k - 1] = case_cost(s.trace_len, s.outcome,
                                              AlarmDecision(alarm_id, k), model)
    return CostTable([s.case_id for s in series_set], alarm_ids, fire, never)
