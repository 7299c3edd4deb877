"""
Evaluation of alarm policies: metrics, baselines and the sweeps over
alarm model configurations.

The sweeps follow the table of alarm model configurations:

====  =======================  ==================  =============================  ==================
RQ    c_out                    c_in                c_com                          eff
====  =======================  ==================  =============================  ==================
RQ1   1, 2, 3, 5, 10, 20       1                   0                              1 - k/|trace|
RQ2   1, 2, 3, 5, 10, 20       1                   0                              0, 0.1, ..., 1
RQ3   1, 2, 3, 5, 10, 20       1                   0, 1/20, 1/10, ..., 10, 20     1 - k/|trace|
RQ4+  10                       1..5                0..5, 10, 15, 20               1         (constant)
RQ4+  10                       1..5 linear         0..5, 10, 20                   1 - k/|trace| (linear)
RQ4+  10                       1..5 non-monotonic  0..5, 10, 20 non-monotonic     non-monotonic
RQ8   10                       1..5                1..5, 10, 20, 30, 40           1, two alarms
====  =======================  ==================  =============================  ==================

RQ4 to RQ7 share the cost configurations and differ in the advanced policy:
delayed firing (RQ4), two intervals with an optimized split (RQ5), the fixed
interval systems {1}, {1, 2}, {1, 2, 3} (RQ6) and two intervals with a
firing delay (RQ7). RQ8 compares hierarchical thresholding with the best
single alarm.
"""

import itertools
import json
import logging
import os

import pandas as pd

from .cost import (ALARM_FACTORS, AlarmModel, CostFunction, CostModel, Effectiveness,
                   NO_ALARM, total_cost)
from .errors import AlarmSysError, ConfigError
from .estimator import EstimatorParams, load_external_scores, score_log, train
from .encoding import fit_encoder
from .log import temporal_split
from .optimize import (SearchSpace, optimize_basic, optimize_delayed,
                       optimize_hierarchical, optimize_intervals)
from .policy import AlwaysPolicy, BasicPolicy, NeverPolicy, apply_policy
from .synthetic import SyntheticLogSpec, generate_synthetic_log, posterior_series

logger = logging.getLogger(__name__)

C_OUT_RATIOS = (1, 2, 3, 5, 10, 20)
EFF_VALUES = tuple(i / 10.0 for i in range(11))
C_COM_RATIOS = (0, 1 / 20.0, 1 / 10.0, 1 / 5.0, 1 / 2.0, 1, 2, 5, 10, 20)
C_IN_VALUES = (1, 2, 3, 4, 5)
CONSTANT_C_COM = (0, 1, 2, 3, 4, 5, 10, 15, 20)
VARYING_C_COM = (0, 1, 2, 3, 4, 5, 10, 20)
MULTI_ALARM_C_COM = (1, 2, 3, 4, 5, 10, 20, 30, 40)
COST_TYPES = ("constant", "linear", "non_monotonic")
"""Cost configuration types of RQ4 to RQ7."""
DEFAULT_CONSTANTS = "traffic_fines"
"""Non-monotonic constants preset when an RQ config names none."""
PARAMS = ("c_out", "c_in", "c_com", "eff")
"""Swept parameters, in the order of the cartesian product."""

RQ_TABLE = {
    "RQ1": {"c_out": C_OUT_RATIOS, "c_in": (1,), "c_com": (0,), "eff": ("linear_decay",)},
    "RQ2": {"c_out": C_OUT_RATIOS, "c_in": (1,), "c_com": (0,), "eff": EFF_VALUES},
    "RQ3": {"c_out": C_OUT_RATIOS, "c_in": (1,), "c_com": C_COM_RATIOS, "eff": ("linear_decay",)},
    "constant": {"c_out": (10,), "c_in": C_IN_VALUES, "c_com": CONSTANT_C_COM, "eff": (1,)},
    "linear": {"c_out": (10,), "c_in": C_IN_VALUES, "c_com": VARYING_C_COM, "eff": ("linear_decay",)},
    "non_monotonic": {"c_out": (10,), "c_in": C_IN_VALUES, "c_com": VARYING_C_COM,
                      "eff": ("non_monotonic",)},
    "RQ8": {"c_out": (10,), "c_in": C_IN_VALUES, "c_com": MULTI_ALARM_C_COM, "eff": (1,)},
}
"""Parameter lists per RQ row; RQ4 to RQ7 use the rows of their cost types."""
ADVANCED_RQS = ("RQ4", "RQ5", "RQ6", "RQ7")
RQS = ("RQ1", "RQ2", "RQ3") + ADVANCED_RQS + ("RQ8",)
FIXED_INTERVAL_SYSTEMS = ((1,), (1, 2), (1, 2, 3))
"""User-defined interval systems compared in RQ6."""


class EvaluationReport(object):
    """Cost and alarm statistics of a policy on a set of cases."""
    def __init__(self, avg_cost_per_case, benefit, counts, alarms_per_type, fp_per_type,
                 total_cost=0.0, config=None):
        self.avg_cost_per_case = avg_cost_per_case
        self.total_cost = total_cost
        self.benefit = benefit
        """average cost when never alarming minus the average cost of the policy"""
        self.counts = counts
        """tp, fp, fn, tn: fired on undesired, fired on desired, silent on undesired, silent on desired"""
        self.alarms_per_type = alarms_per_type
        self.fp_per_type = fp_per_type
        self.config = config
        self.f_score = f_score(counts["tp"], counts["fp"], counts["fn"])

    def to_dict(self):
        d = {"avg_cost_per_case": self.avg_cost_per_case, "total_cost": self.total_cost,
             "benefit": self.benefit, "f_score": self.f_score, "counts": dict(self.counts),
             "alarms_per_type": dict(self.alarms_per_type),
             "fp_per_type": dict(self.fp_per_type)}
        if self.config is not None:
            d["config"] = self.config
        return d

    def __repr__(self):
        return "<%s avg=%g benefit=%g f=%g at 0x%x>" % (self.__class__.__name__,
            self.avg_cost_per_case, self.benefit, self.f_score, id(self))


def f_score(tp, fp, fn):
    """Harmonic mean of precision and recall; 0 when both are 0 or undefined."""
    precision = tp / float(tp + fp) if tp + fp else 0.0
    recall = tp / float(tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def evaluate(series_set, model, policy, config=None):
    """Apply the policy to every case and report its cost, benefit and confusion counts."""
    series_set = list(series_set)
    decisions = apply_policy(series_set, policy)
    summary = total_cost(series_set, decisions, model)
    never = total_cost(series_set, dict((s.case_id, NO_ALARM) for s in series_set), model)
    counts = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    alarms = dict((a, 0) for a in model.alarm_ids())
    false_positives = dict((a, 0) for a in model.alarm_ids())
    for s in series_set:
        d = decisions[s.case_id]
        if d.fired():
            alarms[d.alarm_id] = alarms.get(d.alarm_id, 0) + 1
            if s.outcome:
                counts["tp"] += 1
            else:
                counts["fp"] += 1
                false_positives[d.alarm_id] = false_positives.get(d.alarm_id, 0) + 1
        elif s.outcome:
            counts["fn"] += 1
        else:
            counts["tn"] += 1
    return EvaluationReport(summary.avg_per_case, never.avg_per_case - summary.avg_per_case,
                            counts, alarms, false_positives, summary.total, config)


def baseline_policies(model):
    """The policies of the baselines: never alarming, alarming at the start, and tau = 0.5."""
    if not model.is_single():
        raise ConfigError("Baselines need a single-alarm cost model, got alarms %s" %
                          ", ".join(model.alarm_ids()))
    alarm_id = model.alarm_ids()[0]
    return [("never", NeverPolicy(alarm_id)), ("always_at_start", AlwaysPolicy(alarm_id)),
            ("tau_0.5", BasicPolicy(0.5, alarm_id))]


def baselines(series_set, model):
    series_set = list(series_set)
    return dict((name, evaluate(series_set, model, policy))
                for name, policy in baseline_policies(model))


def _eff(value, constants):
    if isinstance(value, str):
        return Effectiveness(value, constants=constants)
    return Effectiveness("constant", value)


def cell_model(rq, cost_type, cell, constants=None):
    """Cost model of one sweep cell."""
    c_out = CostFunction("constant", cell["c_out"], role="c_out")
    eff = _eff(cell["eff"], constants)
    if cost_type == "linear":
        c_in = CostFunction("linear", cell["c_in"], role="c_in")
        c_com = CostFunction("constant", cell["c_com"], role="c_com")
    elif cost_type == "non_monotonic":
        c_in = CostFunction("non_monotonic", cell["c_in"], constants, "c_in")
        c_com = CostFunction("non_monotonic", cell["c_com"], constants, "c_com")
    else:
        c_in = CostFunction("constant", cell["c_in"], role="c_in")
        c_com = CostFunction("constant", cell["c_com"], role="c_com")
    base = AlarmModel(c_in, c_com, eff)
    if rq == "RQ8":
        return CostModel([(alarm_id, base.scaled(f_in, f_com))
                          for alarm_id, f_in, f_com in ALARM_FACTORS], c_out)
    return CostModel([("alarm", base)], c_out)


class RQConfig(object):
    """A sweep: RQ row, dataset, seeds, parameter overrides and search space."""
    KEYS = ("rq", "dataset", "seed", "overrides", "search", "include_baselines", "constants",
            "cost_types", "estimator")

    def __init__(self, rq, dataset, seed=0, overrides=None, search=None,
                 include_baselines=False, constants=None, cost_types=None, estimator=None):
        if rq not in RQS:
            raise ConfigError("Unknown RQ %r; known: %s" % (rq, ", ".join(RQS)))
        if not isinstance(dataset, dict) or \
                not (set(("thres", "test")) <= set(dataset) or "synthetic" in dataset):
            raise ConfigError("The dataset needs score files 'thres' and 'test', or 'synthetic'")
        self.rq = rq
        self.dataset = dataset
        self.seed = int(seed)
        self.overrides = dict(overrides or {})
        unknown = set(self.overrides) - set(PARAMS)
        if unknown:
            raise ConfigError("Unknown override parameters: %s" % ", ".join(sorted(unknown)))
        for name, values in self.overrides.items():
            if not isinstance(values, list) or not values:
                raise ConfigError("Override %s must be a non-empty list" % name)
        self.search = SearchSpace.from_dict(search or {})
        self.include_baselines = bool(include_baselines)
        self.constants = constants if constants is not None else DEFAULT_CONSTANTS
        if rq in ADVANCED_RQS:
            self.cost_types = list(cost_types or COST_TYPES)
            for cost_type in self.cost_types:
                if cost_type not in COST_TYPES:
                    raise ConfigError("Unknown cost type %r" % (cost_type,))
        else:
            self.cost_types = [rq]
        self.estimator = EstimatorParams.from_dict(estimator or {})

    def cells(self):
        """(cost type, cell) pairs in sweep order."""
        for cost_type in self.cost_types:
            row = dict(RQ_TABLE[cost_type])
            row.update(self.overrides)
            for values in itertools.product(*(row[p] for p in PARAMS)):
                yield cost_type, dict(zip(PARAMS, values))

    def to_dict(self):
        return {"rq": self.rq, "dataset": self.dataset, "seed": self.seed,
                "overrides": self.overrides, "search": self.search.to_dict(),
                "include_baselines": self.include_baselines, "constants": self.constants,
                "cost_types": self.cost_types, "estimator": self.estimator.to_dict()}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ConfigError("Unknown RQ config keys: %s" % ", ".join(sorted(unknown)))
        if "rq" not in d or "dataset" not in d:
            raise ConfigError("An RQ config needs 'rq' and 'dataset'")
        return cls(**d)


def _describe(rq, cost_type, cell):
    return "%s %s %s" % (rq, cost_type, " ".join("%s=%s" % (p, cell[p]) for p in PARAMS))


class _Dataset(object):
    """Thresholding and test probability series, loaded on first use."""
    def __init__(self, config):
        self.config = config
        self._series = None

    def series(self, where):
        if self._series is None:
            try:
                self._series = self._load()
            except AlarmSysError as e:
                raise e.__class__("%s: %s" % (where, e.msg))
        return self._series

    def _load(self):
        d = self.config.dataset
        if "synthetic" in d:
            spec = SyntheticLogSpec.from_dict(d["synthetic"])
            log, _ = generate_synthetic_log(spec)
            split = temporal_split(log, self.config.seed)
            if d.get("scorer", "bayes") == "bayes":
                return posterior_series(split.thres, spec), posterior_series(split.test, spec)
            encoder = fit_encoder(split.train)
            est = train(split.train, encoder, self.config.estimator, spec.max_length)
            return (score_log(est, split.thres, encoder, spec.max_length),
                    score_log(est, split.test, encoder, spec.max_length))
        series = []
        for part in ("thres", "test"):
            if not os.path.isfile(d[part]):
                raise ConfigError("Score file %s does not exist" % d[part])
            series.append(load_external_scores(d[part]))
        return tuple(series)


def _ratio(advanced, basic):
    if basic == 0:
        return 1.0 if advanced == 0 else None
    return advanced / basic


class ResultTable(object):
    """Rows of a sweep, one per cell and policy, in sweep order."""
    COLUMNS = ("rq", "cost_type") + PARAMS + ("policy", "avg_cost", "benefit", "f_score",
                                              "tp", "fp", "fn", "tn", "cost_ratio", "cv_cost",
                                              "parameters")

    def __init__(self, rows=None, config=None):
        self.rows = list(rows or [])
        self.config = config

    def columns(self):
        extra = sorted(set(k for row in self.rows for k in row) - set(self.COLUMNS))
        return list(self.COLUMNS) + extra

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=self.columns())

    def write_csv(self, dest):
        self.to_frame().to_csv(dest, index=False, float_format="%.10g")

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return "<%s %d rows at 0x%x>" % (self.__class__.__name__, len(self.rows), id(self))


def _row(rq, cost_type, cell, name, report, result=None, basic=None):
    row = {"rq": rq, "cost_type": cost_type, "policy": name,
           "avg_cost": report.avg_cost_per_case, "benefit": report.benefit,
           "f_score": report.f_score, "cost_ratio": None,
           "cv_cost": result.cv_mean_cost if result else None,
           "parameters": json.dumps(result.policy.to_dict(), sort_keys=True) if result else None}
    row.update(cell)
    row.update(report.counts)
    if basic is not None:
        row["cost_ratio"] = _ratio(report.avg_cost_per_case, basic.avg_cost_per_case)
    if rq == "RQ8":
        for alarm_id in sorted(report.alarms_per_type):
            row["alarms_%s" % alarm_id] = report.alarms_per_type[alarm_id]
            row["fp_%s" % alarm_id] = report.fp_per_type[alarm_id]
    return row


def _best_single(thres, model, space):
    best = None
    for alarm_id in model.alarm_ids():
        result = optimize_basic(thres, model.restricted(alarm_id), space)
        if best is None or result.cv_mean_cost < best.cv_mean_cost:
            best = result
    return best


def run_cell(rq, cost_type, cell, thres, test, config):
    """Optimize on the thresholding series and evaluate on the test series; return the rows."""
    model = cell_model(rq, cost_type, cell, config.constants)
    space = config.search
    rows = []
    if rq == "RQ8":
        single = _best_single(thres, model, space)
        hierarchical = optimize_hierarchical(thres, model, space)
        single_report = evaluate(test, model, single.policy)
        rows.append(_row(rq, cost_type, cell, "best_single", single_report, single))
        rows.append(_row(rq, cost_type, cell, "hierarchical",
                         evaluate(test, model, hierarchical.policy), hierarchical, single_report))
        return rows

    basic = optimize_basic(thres, model, space)
    basic_report = evaluate(test, model, basic.policy)
    rows.append(_row(rq, cost_type, cell, "basic", basic_report, basic))
    advanced = []
    if rq == "RQ4":
        advanced.append(("delayed", optimize_delayed(thres, model, space)))
    elif rq == "RQ5":
        advanced.append(("intervals_2", optimize_intervals(thres, model, space, 2)))
    elif rq == "RQ6":
        for splits in FIXED_INTERVAL_SYSTEMS:
            fixed = space.replace(fixed_splits=list(splits))
            advanced.append(("intervals_%s" % "-".join(str(s) for s in splits),
                             optimize_intervals(thres, model, fixed)))
    elif rq == "RQ7":
        delayed = space.replace(interval_kappa_grid=space.kappa_grid)
        advanced.append(("intervals_2_delayed", optimize_intervals(thres, model, delayed, 2)))
    for name, result in advanced:
        rows.append(_row(rq, cost_type, cell, name, evaluate(test, model, result.policy),
                         result, basic_report))
    if config.include_baselines:
        for name, policy in baseline_policies(model):
            rows.append(_row(rq, cost_type, cell, name, evaluate(test, model, policy)))
    return rows


def run_rq_suite(config):
    """Run every cell of a sweep; return the ResultTable."""
    if isinstance(config, dict):
        config = RQConfig.from_dict(config)
    dataset = _Dataset(config)
    rows = []
    for cost_type, cell in config.cells():
        where = _describe(config.rq, cost_type, cell)
        thres, test = dataset.series(where)
        try:
            rows.extend(run_cell(config.rq, cost_type, cell, thres, test, config))
        except AlarmSysError as e:
            raise e.__class__("%s: %s" % (where, e.msg))
        logger.debug("finished %s", where)
    logger.info("%s: %d rows", config.rq, len(rows))
    return ResultTable(rows, config.to_dict())


def heatmap(table, row_param, col_param, value="benefit", policy=None):
    """
    Pivot a result table into a matrix with one row per value of row_param
    and one column per value of col_param. Rows of other policies are
    dropped when a policy is given.
    """
    frame = table.to_frame() if isinstance(table, ResultTable) else table
    for column in (row_param, col_param, value):
        if column not in frame.columns:
            raise ConfigError("Result table has no column %r" % column)
    if policy is not None:
        frame = frame[frame["policy"] == policy]
    frame = frame.assign(**{value: pd.to_numeric(frame[value], errors="coerce")})
    return frame.pivot_table(index=row_param, columns=col_param, values=value, aggfunc="mean")
