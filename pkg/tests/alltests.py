#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Run the alarmsys unit tests. Without arguments all modules in testmodules
run; otherwise only the named ones, e.g. ``python alltests.py costtests``.
"""

import sys
import logging

import unittest

testmodules = ['logtests', 'encodingtests', 'estimatortests', 'costtests', 'policytests',
               'optimizetests', 'experimenttests', 'synthetictests', 'clitests']
"""Test modules in the tests directory, without the .py extension."""


def load_tests_in_modules(modulenames):
    """Import the test modules and return one suite with all their test cases."""
    loader = unittest.TestLoader()
    return unittest.TestSuite([loader.loadTestsFromModule(__import__(name))
                               for name in modulenames])


if __name__ == "__main__":
    logger = logging.getLogger("alarmsys.tests")
    if len(logger.handlers) == 0:
        logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                            format='%(levelname)-8s %(message)s')
    names = sys.argv[1:] or testmodules
    unknown = [name for name in names if name not in testmodules]
    if unknown:
        sys.exit("Unknown test modules: %s" % ", ".join(unknown))
    testresult = unittest.TextTestRunner(verbosity=2).run(load_tests_in_modules(names))
    sys.exit(0 if testresult.wasSuccessful() else 1)
