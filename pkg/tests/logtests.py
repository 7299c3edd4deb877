#!/usr/bin/env python
import sys, os
import tempfile, shutil
from io import StringIO, BytesIO
from datetime import timedelta

import unittest

# local modules
from utils import make_log, make_trace, T0

# Search parent directory first, to make sure we test the local alarmsys module,
# not an installed alarmsys module.
parentdir = os.path.realpath(os.path.join(os.path.dirname(__file__), os.pardir))
if parentdir not in sys.path:
    sys.path.insert(1, parentdir)  # insert ../ just after ./

from alarmsys.errors import SchemaError, RowError, LabelingError, EmptyLogError, \
    SplitError, ConfigError
from alarmsys.log import LogSchema, LabelRule, EventLog, Trace, Event, parse_event_log, \
    read_event_log, read_canonical_log, write_event_log, label_outcomes, truncate_log, \
    percentile_length, temporal_split, prefixes, log_statistics

SCHEMA = LogSchema("Case", "Activity", "Time", "%Y-%m-%d %H:%M:%S", resource_col="Resource")

LOAN_CSV = """Case,Activity,Time,Resource,Amount,Channel,deviant
A,submit,2021-01-04 09:00:00,ann,1000,web,1
A,check,2021-01-04 09:30:00,bob,,web,1
B,submit,2021-01-04 10:00:00,ann,250.5,phone,0
A,decline,2021-01-04 09:10:00,bob,1000,web,1
B,accept,2021-01-04 11:00:00,,250.5,phone,0
"""


class ParseTest(unittest.TestCase):
    """Read CSV event logs through a schema."""
    def setUp(self):
        self.log = parse_event_log(StringIO(LOAN_CSV), SCHEMA)

    def testCases(self):
        self.assertEqual(list(self.log), ["A", "B"])
        self.assertEqual(len(self.log["A"]), 3)
        self.assertEqual(self.log.event_count(), 5)

    def testSortedByTimestamp(self):
        self.assertEqual([e.activity for e in self.log["A"]], ["submit", "decline", "check"])

    def testAttributeTypes(self):
        first = self.log["B"][0]
        self.assertEqual(first.attrs["Amount"], 250.5)
        self.assertEqual(first.attrs["Channel"], "phone")
        self.assertEqual(first.resource, "ann")
        self.assertIsNone(self.log["B"][1].resource)
        # empty cells are missing values
        self.assertNotIn("Amount", self.log["A"][2].attrs)

    def testTimestampsAreUtc(self):
        ts = self.log["A"][0].timestamp
        self.assertEqual(ts.utcoffset(), timedelta(0))
        self.assertEqual((ts.hour, ts.minute), (9, 0))

    def testStableOrderOfTies(self):
        csv = "Case,Activity,Time\nX,first,2021-01-01 00:00:00\nX,second,2021-01-01 00:00:00\n"
        schema = LogSchema("Case", "Activity", "Time", "%Y-%m-%d %H:%M:%S")
        log = parse_event_log(StringIO(csv), schema)
        self.assertEqual([e.activity for e in log["X"]], ["first", "second"])

    def testMissingColumn(self):
        csv = "Case,Activity\nA,submit\n"
        self.assertRaises(SchemaError, parse_event_log, StringIO(csv), SCHEMA)

    def testBadTimestampNamesLine(self):
        csv = LOAN_CSV.replace("2021-01-04 11:00:00", "yesterday")
        try:
            parse_event_log(StringIO(csv), SCHEMA)
        except RowError as e:
            self.assertEqual(e.line, 6)
            self.assertIn("yesterday", str(e))
        else:
            self.fail("RowError not raised")

    def testInvalidUtf8(self):
        data = LOAN_CSV.encode("utf-8").replace(b"phone", b"ph\xffne")
        self.assertRaises(RowError, parse_event_log, BytesIO(data), SCHEMA)

    def testSurplusFieldsOnFirstRow(self):
        csv = LOAN_CSV.replace("web,1\n", "web,1,x,extra\n", 1)
        try:
            parse_event_log(StringIO(csv), SCHEMA)
        except RowError as e:
            self.assertEqual(e.line, 2)
        else:
            self.fail("RowError not raised")

    def testSurplusFieldsOnLaterRow(self):
        csv = LOAN_CSV.replace("phone,0\n", "phone,0,x,extra\n", 1)
        try:
            parse_event_log(StringIO(csv), SCHEMA)
        except RowError as e:
            self.assertEqual(e.line, 4)
        else:
            self.fail("RowError not raised")

    def testSchemaFromDict(self):
        schema = LogSchema.from_dict(SCHEMA.to_dict())
        self.assertEqual(schema.to_dict(), SCHEMA.to_dict())
        self.assertRaises(SchemaError, LogSchema.from_dict, {"case_id_col": "Case"})
        self.assertRaises(SchemaError, LogSchema.from_dict,
                          dict(SCHEMA.to_dict(), colour="red"))


class LabelTest(unittest.TestCase):
    """Outcome labels from a column or from the occurrence of an activity."""
    def testLabelColumn(self):
        log = parse_event_log(StringIO(LOAN_CSV), SCHEMA)
        labeled = label_outcomes(log, LabelRule(column="deviant"))
        self.assertTrue(labeled.outcome("A"))
        self.assertFalse(labeled.outcome("B"))
        # the label does not leak into the attributes
        self.assertNotIn("deviant", labeled["A"][0].attrs)

    def testInconsistentLabelColumn(self):
        csv = LOAN_CSV.replace("bob,,web,1", "bob,,web,0")
        log = parse_event_log(StringIO(csv), SCHEMA)
        self.assertRaises(LabelingError, label_outcomes, log, LabelRule(column="deviant"))

    def testActivityRuleCuts(self):
        log = make_log([("A", ["a", "b", "c", "credit collection", "d"], 0),
                        ("B", ["a", "b"], 5)])
        labeled = label_outcomes(log, LabelRule(activity="credit collection"))
        self.assertTrue(labeled.outcome("A"))
        self.assertEqual([e.activity for e in labeled["A"]], ["a", "b", "c"])
        self.assertFalse(labeled.outcome("B"))
        self.assertEqual(labeled["B"], log["B"])

    def testActivityRuleWithoutCut(self):
        log = make_log([("A", ["a", "x", "b"], 0)])
        labeled = label_outcomes(log, LabelRule(activity="x", cut=False))
        self.assertTrue(labeled.outcome("A"))
        self.assertEqual(len(labeled["A"]), 3)

    def testCaseStartingWithActivityIsDropped(self):
        log = make_log([("A", ["x", "b"], 0), ("B", ["a"], 5)])
        labeled = label_outcomes(log, LabelRule(activity="x"))
        self.assertEqual(list(labeled), ["B"])

    def testReadEventLogLabels(self):
        schema = LogSchema.from_dict(dict(SCHEMA.to_dict(), label={"column": "deviant"}))
        log = read_event_log(StringIO(LOAN_CSV), schema)
        self.assertTrue(log.is_labeled())

    def testInvalidRule(self):
        self.assertRaises(SchemaError, LabelRule)
        self.assertRaises(SchemaError, LabelRule, column="x", activity="y")


class TruncateTest(unittest.TestCase):
    """Truncation at a percentile of the case lengths."""
    def setUp(self):
        self.log = make_log([("c%02d" % n, ["a"] * n, n) for n in range(1, 11)])

    def testNinetiethPercentile(self):
        self.assertEqual(percentile_length(range(1, 11), 0.9), 9)
        truncated = truncate_log(self.log, 0.9)
        self.assertEqual(len(truncated["c10"]), 9)
        self.assertEqual(len(truncated["c05"]), 5)

    def testFullPercentileKeepsLog(self):
        self.assertEqual(truncate_log(self.log, 1.0), self.log)

    def testEqualLengths(self):
        log = make_log([("x", ["a", "b"], 0), ("y", ["a", "b"], 1)])
        self.assertEqual(truncate_log(log, 0.5), log)

    def testEmptyLog(self):
        self.assertRaises(EmptyLogError, truncate_log, EventLog(), 0.9)

    def testPercentileRange(self):
        self.assertRaises(ConfigError, truncate_log, self.log, 0)
        self.assertRaises(ConfigError, truncate_log, self.log, 1.5)


class SplitTest(unittest.TestCase):
    """Temporal split into training, thresholding and test logs."""
    def setUp(self):
        cases = [("c%03d" % i, ["a", "b"], i * 60) for i in range(100)]
        self.log = make_log(cases, dict(("c%03d" % i, i % 3 == 0) for i in range(100)))

    def testShares(self):
        split = temporal_split(self.log, 7)
        self.assertEqual(split.assigned, {"train": 64, "thres": 16, "test": 20})
        self.assertEqual(split.sizes(), {"train": 64, "thres": 16, "test": 20})
        self.assertEqual(sorted(split.test), ["c%03d" % i for i in range(80, 100)])

    def testDeterministic(self):
        first = temporal_split(self.log, 3)
        second = temporal_split(self.log, 3)
        self.assertEqual(list(first.train), list(second.train))
        self.assertEqual(list(first.thres), list(second.thres))

    def testSeedChangesAssignment(self):
        first = temporal_split(self.log, 1)
        second = temporal_split(self.log, 2)
        self.assertNotEqual(sorted(first.thres), sorted(second.thres))

    def testLabelsKept(self):
        split = temporal_split(self.log, 0)
        for case_id in split.train:
            self.assertEqual(split.train.outcome(case_id), self.log.outcome(case_id))

    def testOverlapAtBoundaryIsDiscarded(self):
        traces = [make_trace("p%d" % i, ["a", "b", "c"], -10) for i in range(4)]
        traces.append(make_trace("t", ["a"], 0))
        log = EventLog(traces, dict((t.case_id, False) for t in traces))
        split = temporal_split(log, 0)
        self.assertEqual(list(split.test), ["t"])
        # the second event of every pool case lies exactly at the start of the test case
        for part in (split.train, split.thres):
            for trace in part.values():
                self.assertEqual(len(trace), 1)

    def testEmptyPartition(self):
        traces = [make_trace("p%d" % i, ["a"], 0) for i in range(5)]
        log = EventLog(traces, dict((t.case_id, False) for t in traces))
        self.assertRaises(SplitError, temporal_split, log, 0)

    def testTooFewCases(self):
        self.assertRaises(SplitError, temporal_split, make_log([("a", ["x"], 0)]), 0)


class CanonicalTest(unittest.TestCase):
    """Canonical CSV files."""
    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def testWriteAndRead(self):
        schema = LogSchema.from_dict(dict(SCHEMA.to_dict(), label={"column": "deviant"}))
        log = read_event_log(StringIO(LOAN_CSV), schema)
        filename = os.path.join(self.tempdir, "log.csv")
        write_event_log(log, filename)
        self.assertEqual(read_canonical_log(filename), log)
        with open(filename) as f:
            header = f.readline().strip()
        self.assertEqual(header, "case_id,activity,timestamp,resource,outcome,Amount,Channel")

    def testReservedAttributeNames(self):
        filename = os.path.join(self.tempdir, "log.csv")
        for name in ("case_id", "activity", "timestamp", "resource"):
            trace = Trace("A", [Event("A", "a", T0, attrs={name: "x"})])
            self.assertRaises(SchemaError, write_event_log, EventLog([trace]), filename)
        trace = Trace("A", [Event("A", "a", T0, attrs={"outcome": "x"})])
        self.assertRaises(SchemaError, write_event_log, EventLog([trace], {"A": True}), filename)

    def testMilliseconds(self):
        trace = Trace("A", [Event("A", "a", T0 + timedelta(milliseconds=1234))])
        filename = os.path.join(self.tempdir, "log.csv")
        write_event_log(EventLog([trace]), filename)
        with open(filename) as f:
            f.readline()
            self.assertIn("2021-03-01T08:00:01.234Z", f.readline())


class PrefixTest(unittest.TestCase):
    def setUp(self):
        self.trace = make_trace("A", ["a", "b", "c"])

    def testPrefixLengths(self):
        self.assertEqual([len(p) for p in prefixes(self.trace, 5)], [1, 2, 3])
        self.assertEqual([len(p) for p in prefixes(self.trace, 2)], [1, 2])

    def testSingleEvent(self):
        trace = make_trace("B", ["a"])
        self.assertEqual(list(prefixes(trace, 3)), [trace])

    def testStatistics(self):
        log = make_log([("a", ["x"] * 2, 0), ("b", ["x"] * 4, 1), ("c", ["x"] * 9, 2)],
                       {"a": True, "b": False, "c": False})
        stats = log_statistics(log)
        self.assertEqual(stats["traces"], 3)
        self.assertEqual((stats["min_length"], stats["median_length"], stats["max_length"]),
                         (2, 4.0, 9))
        self.assertEqual(stats["events"], 15)
        self.assertAlmostEqual(stats["class_ratio"], 1 / 3.0)


if __name__ == '__main__':
    unittest.main()
