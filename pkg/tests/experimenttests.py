#!/usr/bin/env python
import sys, os
import tempfile, shutil

import unittest

import pandas as pd

# local modules
from utils import series, single_model, oracle_series, two_alarm_model, high_fp_series

# Search parent directory first, to make sure we test the local alarmsys module,
# not an installed alarmsys module.
parentdir = os.path.realpath(os.path.join(os.path.dirname(__file__), os.pardir))
if parentdir not in sys.path:
    sys.path.insert(1, parentdir)  # insert ../ just after ./

from alarmsys.errors import ConfigError
from alarmsys.estimator import write_scores
from alarmsys.policy import NeverPolicy, BasicPolicy, DelayedPolicy, HierarchicalPolicy
from alarmsys.experiment import f_score, evaluate, baselines, baseline_policies, cell_model, \
    RQConfig, ResultTable, run_rq_suite, heatmap, RQ_TABLE

COARSE = [i / 10.0 for i in range(11)]


def synthetic_config(rq, n_cases=200, signal=0.5, **kwargs):
    d = {"rq": rq, "dataset": {"synthetic": {"n_cases": n_cases, "signal": signal, "seed": 7},
                               "scorer": "bayes"},
         "search": {"tau_grid": COARSE, "interval_tau_grid": [0.0, 0.5, 1.0]}}
    d.update(kwargs)
    return d


class MetricTest(unittest.TestCase):
    """f-score, cost and benefit of a policy."""
    def testFScore(self):
        self.assertAlmostEqual(f_score(1, 1, 0), 2 / 3.0)
        self.assertEqual(f_score(0, 0, 3), 0.0)
        self.assertEqual(f_score(0, 0, 0), 0.0)
        self.assertEqual(f_score(4, 0, 0), 1.0)

    def testOracle(self):
        cases = [series("u", [1.0], True), series("d", [0.0], False)]
        report = evaluate(cases, single_model(c_in=1, c_com=0, eff=1, c_out=10), BasicPolicy(0.5))
        self.assertEqual(report.avg_cost_per_case, 0.5)
        self.assertEqual(report.benefit, 4.5)
        self.assertEqual(report.f_score, 1.0)
        self.assertEqual(report.counts, {"tp": 1, "fp": 0, "fn": 0, "tn": 1})

    def testNeverHasNoBenefit(self):
        cases = [series("a", [0.3, 0.9], True, 5), series("b", [0.7], False, 2),
                 series("c", [0.2], True)]
        report = evaluate(cases, single_model(c_com=3), NeverPolicy())
        self.assertEqual(report.benefit, 0)
        self.assertEqual(report.f_score, 0)
        self.assertEqual(report.alarms_per_type, {"alarm": 0})

    def testCountsPartitionCases(self):
        cases = [series("c%d" % i, [i / 10.0, 1 - i / 10.0], i % 3 == 0) for i in range(10)]
        report = evaluate(cases, single_model(), DelayedPolicy(0.3, 2))
        self.assertEqual(sum(report.counts.values()), 10)
        self.assertLessEqual(report.benefit, evaluate(cases, single_model(),
                                                      NeverPolicy()).avg_cost_per_case)

    def testAlarmsPerType(self):
        cases = [series("a", [0.9], True), series("b", [0.6], False), series("c", [0.1], False)]
        policy = HierarchicalPolicy({"alarm_1": 0.5, "alarm_2": 0.5}, 0.8, ("alarm_1", "alarm_2"))
        report = evaluate(cases, two_alarm_model(), policy)
        self.assertEqual(report.alarms_per_type, {"alarm_1": 1, "alarm_2": 1})
        self.assertEqual(report.fp_per_type, {"alarm_1": 1, "alarm_2": 0})
        # alarm_2 on the undesired case: 1.2, alarm_1 on the desired one: 1 + 20
        self.assertAlmostEqual(report.total_cost, 22.2)


class BaselineTest(unittest.TestCase):
    def testBaselines(self):
        cases = oracle_series(3, 5)
        reports = baselines(cases, single_model(c_in=1, c_com=2, eff=1, c_out=10))
        self.assertEqual(sorted(reports), ["always_at_start", "never", "tau_0.5"])
        self.assertEqual(reports["never"].avg_cost_per_case, 30 / 8.0)
        self.assertEqual(reports["never"].f_score, 0)
        always = reports["always_at_start"].counts
        self.assertEqual(always["tp"] + always["fp"], 8)
        self.assertEqual(reports["tau_0.5"].f_score, 1.0)

    def testMultiAlarmModel(self):
        self.assertRaises(ConfigError, baseline_policies, two_alarm_model())


class CellTest(unittest.TestCase):
    """Cost models of the sweep cells."""
    def testTwoAlarms(self):
        model = cell_model("RQ8", "RQ8", {"c_out": 10, "c_in": 2, "c_com": 20, "eff": 1})
        self.assertEqual(model.alarm_ids(), ["alarm_1", "alarm_2"])
        self.assertAlmostEqual(model.alarm("alarm_2").c_in.base, 2.4)
        self.assertAlmostEqual(model.alarm("alarm_2").c_com.base, 10.0)

    def testLinear(self):
        model = cell_model("RQ4", "linear", {"c_out": 10, "c_in": 3, "c_com": 2,
                                             "eff": "linear_decay"})
        self.assertEqual(model.alarm("alarm").c_in.family, "linear")
        self.assertEqual(model.alarm("alarm").eff.family, "linear_decay")

    def testNonMonotonic(self):
        model = cell_model("RQ4", "non_monotonic", {"c_out": 10, "c_in": 3, "c_com": 2,
                                                    "eff": "non_monotonic"}, "traffic_fines")
        self.assertEqual(model.alarm("alarm").c_com.constants["d"], 5)

    def testCells(self):
        self.assertEqual(len(list(RQConfig.from_dict(synthetic_config("RQ1")).cells())), 6)
        self.assertEqual(len(list(RQConfig.from_dict(synthetic_config("RQ3")).cells())), 60)
        self.assertEqual(len(list(RQConfig.from_dict(synthetic_config("RQ4")).cells())),
                         5 * 9 + 5 * 8 + 5 * 8)
        self.assertEqual(RQ_TABLE["RQ1"]["c_out"], (1, 2, 3, 5, 10, 20))

    def testInvalidConfig(self):
        self.assertRaises(ConfigError, RQConfig.from_dict, synthetic_config("RQ9"))
        self.assertRaises(ConfigError, RQConfig.from_dict, {"rq": "RQ1", "dataset": {}})
        self.assertRaises(ConfigError, RQConfig.from_dict,
                          synthetic_config("RQ1", overrides={"colour": [1]}))
        self.assertRaises(ConfigError, RQConfig.from_dict,
                          synthetic_config("RQ1", overrides={"c_out": 5}))
        self.assertRaises(ConfigError, RQConfig.from_dict,
                          synthetic_config("RQ4", cost_types=["quadratic"]))
        self.assertRaises(ConfigError, RQConfig.from_dict, synthetic_config("RQ1", speed=3))


class SuiteTest(unittest.TestCase):
    """Sweeps over alarm model configurations."""
    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def testRQ1Rows(self):
        table = run_rq_suite(synthetic_config("RQ1"))
        frame = table.to_frame()
        self.assertEqual(len(frame), 6)
        self.assertEqual(list(frame["c_out"]), [1, 2, 3, 5, 10, 20])
        self.assertEqual(set(frame["policy"]), set(["basic"]))

    def testRQ2Rows(self):
        self.assertEqual(len(run_rq_suite(synthetic_config("RQ2"))), 6 * 11)

    def testRQ1Pattern(self):
        config = synthetic_config("RQ1", n_cases=1500, signal=0.9, include_baselines=True)
        config["search"] = {}
        frame = run_rq_suite(config).to_frame()
        self.assertEqual(sorted(set(frame["c_out"])), [1, 2, 3, 5, 10, 20])
        for c_out in (1, 2, 3, 5, 10, 20):
            rows = frame[frame["c_out"] == c_out].set_index("policy")
            best_baseline = rows.loc[["never", "always_at_start", "tau_0.5"], "avg_cost"].min()
            self.assertLessEqual(rows.loc["basic", "avg_cost"], 1.05 * best_baseline)
        balanced = frame[(frame["c_out"] == 1) & (frame["policy"] == "basic")].iloc[0]
        self.assertEqual(balanced["tp"] + balanced["fp"], 0)
        costly = frame[(frame["c_out"] == 20)].set_index("policy")
        self.assertLess(costly.loc["basic", "avg_cost"], costly.loc["never", "avg_cost"])

    def testDelayedNeverWorseOnThresholding(self):
        config = synthetic_config("RQ4", cost_types=["non_monotonic"],
                                  overrides={"c_in": [1], "c_com": [5]})
        frame = run_rq_suite(config).to_frame()
        self.assertEqual(list(frame["policy"]), ["basic", "delayed"])
        self.assertLessEqual(frame["cv_cost"][1], frame["cv_cost"][0] + 1e-12)
        self.assertIsNotNone(frame["cost_ratio"][1])

    def testFixedIntervalSystems(self):
        config = synthetic_config("RQ6", cost_types=["constant"],
                                  overrides={"c_in": [1], "c_com": [2]})
        frame = run_rq_suite(config).to_frame()
        self.assertEqual(list(frame["policy"]),
                         ["basic", "intervals_1", "intervals_1-2", "intervals_1-2-3"])

    def testTwoAlarmSweep(self):
        config = synthetic_config("RQ8", overrides={"c_in": [1], "c_com": [20]})
        frame = run_rq_suite(config).to_frame()
        self.assertEqual(list(frame["policy"]), ["best_single", "hierarchical"])
        for column in ("alarms_alarm_1", "alarms_alarm_2", "fp_alarm_1", "fp_alarm_2"):
            self.assertIn(column, frame.columns)

    def testHierarchicalOnHeldOutFalseAlarms(self):
        dataset = {}
        for part in ("thres", "test"):
            dataset[part] = os.path.join(self.tempdir, "%s.csv" % part)
            write_scores(high_fp_series(part), dataset[part])
        config = {"rq": "RQ8", "dataset": dataset,
                  "overrides": {"c_in": [1], "c_com": [10, 20, 30, 40]}}
        frame = run_rq_suite(config).to_frame()
        self.assertEqual(len(frame), 8)
        for c_com in (10, 20, 30, 40):
            rows = frame[frame["c_com"] == c_com].set_index("policy")
            self.assertLessEqual(rows.loc["hierarchical", "avg_cost"],
                                 rows.loc["best_single", "avg_cost"] + 1e-12)
        # certain cases get alarm_1, uncertain ones the cheaper compensation of alarm_2
        rows = frame[frame["c_com"] == 20].set_index("policy")
        self.assertAlmostEqual(rows.loc["hierarchical", "avg_cost"], 49.8 / 30)
        self.assertAlmostEqual(rows.loc["best_single", "avg_cost"], 51.6 / 30)
        self.assertEqual(rows.loc["hierarchical", "alarms_alarm_1"], 9)
        self.assertEqual(rows.loc["hierarchical", "alarms_alarm_2"], 9)
        self.assertEqual(rows.loc["hierarchical", "fp_alarm_2"], 3)
        self.assertLess(rows.loc["hierarchical", "cost_ratio"], 1.0)
        rows = frame[frame["c_com"] == 30].set_index("policy")
        self.assertAlmostEqual(rows.loc["hierarchical", "avg_cost"], 64.8 / 30)
        self.assertAlmostEqual(rows.loc["best_single", "avg_cost"], 66.6 / 30)

    def testMissingScoreFileNamesCell(self):
        config = {"rq": "RQ1", "dataset": {"thres": os.path.join(self.tempdir, "thres.csv"),
                                           "test": os.path.join(self.tempdir, "test.csv")}}
        try:
            run_rq_suite(config)
        except ConfigError as e:
            self.assertIn("c_out=1", str(e))
            self.assertIn("thres.csv", str(e))
        else:
            self.fail("ConfigError not raised")

    def testWriteCsv(self):
        table = run_rq_suite(synthetic_config("RQ1", overrides={"c_out": [2]}))
        filename = os.path.join(self.tempdir, "results.csv")
        table.write_csv(filename)
        frame = pd.read_csv(filename)
        self.assertEqual(list(frame.columns[:4]), ["rq", "cost_type", "c_out", "c_in"])
        self.assertEqual(len(frame), 1)

    def testDeterministic(self):
        first = run_rq_suite(synthetic_config("RQ1", overrides={"c_out": [5]}))
        second = run_rq_suite(synthetic_config("RQ1", overrides={"c_out": [5]}))
        self.assertEqual(first.rows, second.rows)


class HeatmapTest(unittest.TestCase):
    def testPivot(self):
        rows = []
        for c_out in (1, 2):
            for eff in (0.0, 0.5):
                rows.append({"rq": "RQ2", "cost_type": "RQ2", "c_out": c_out, "c_in": 1,
                             "c_com": 0, "eff": eff, "policy": "basic",
                             "benefit": c_out * 10 + eff})
                rows.append({"rq": "RQ2", "cost_type": "RQ2", "c_out": c_out, "c_in": 1,
                             "c_com": 0, "eff": eff, "policy": "never", "benefit": 0.0})
        matrix = heatmap(ResultTable(rows), "eff", "c_out", policy="basic")
        self.assertEqual(matrix.shape, (2, 2))
        self.assertEqual(matrix.loc[0.5, 2], 20.5)

    def testUnknownColumn(self):
        self.assertRaises(ConfigError, heatmap, ResultTable([{"rq": "RQ1"}]), "colour", "c_out")


if __name__ == '__main__':
    unittest.main()
