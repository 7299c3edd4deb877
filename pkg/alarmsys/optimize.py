"""
Empirical thresholding: choose the policy parameters that minimize the
realized cost on the thresholding log.

Candidates are scored by the mean over cross validation folds of the average
cost per case. Folds are drawn once per optimization by a seeded, unstratified
shuffle of the cases, so every candidate of a run sees the same folds. The
reduction over candidates is ordered: a later candidate replaces the best one
only if it is strictly cheaper, or equally cheap and preferred by the tie
break (larger thresholds, then fewer distinct thresholds, then shorter delay).
"""

import itertools
import json
import logging

import numpy as np

from .cost import case_cost_table
from .errors import CostModelError, OptimizationError, PolicyError, SearchSpaceError
from .policy import (AlwaysPolicy, BasicPolicy, DelayedPolicy, HierarchicalPolicy,
                     IntervalPolicy, ProbabilityMatrix, POLICYLIST, policy_from_dict)

logger = logging.getLogger(__name__)

DEFAULT_TAU_GRID = tuple(i / 100.0 for i in range(101))
"""0.00, 0.01, ..., 1.00"""
DEFAULT_INTERVAL_TAU_GRID = tuple(i / 20.0 for i in range(21))
"""0.00, 0.05, ..., 1.00; thresholds of two or more intervals are searched jointly"""
DEFAULT_KAPPA_GRID = tuple(range(1, 8))
DEFAULT_FOLDS = 3
MAX_DEFAULT_SPLIT = 20
"""Without explicit split candidates, splits are searched over prefix lengths 2..20."""
SEARCH_KINDS = ("grid", "random")

_ALWAYS_KEY = (-1.0,)


def _grid(values, name, low=None, high=None, integer=False):
    if values is None:
        return None
    values = list(values)
    if not values:
        raise SearchSpaceError("The %s grid is empty" % name)
    checked = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SearchSpaceError("Invalid %s grid value %r" % (name, v))
        if integer and int(v) != v:
            raise SearchSpaceError("The %s grid holds integers only, not %r" % (name, v))
        if (low is not None and v < low) or (high is not None and v > high):
            raise SearchSpaceError("%s grid value %r outside [%s, %s]" % (name, v, low, high))
        checked.append(int(v) if integer else float(v))
    return sorted(set(checked))


class SearchSpace(object):
    """Parameter grids and the search strategy of an optimization."""
    KEYS = ("tau_grid", "kappa_grid", "split_candidates", "interval_tau_grid",
            "interval_kappa_grid", "fixed_splits", "kind", "n_samples", "seed", "folds",
            "include_always")

    def __init__(self, tau_grid=DEFAULT_TAU_GRID, kappa_grid=DEFAULT_KAPPA_GRID,
                 split_candidates=None, interval_tau_grid=DEFAULT_INTERVAL_TAU_GRID,
                 interval_kappa_grid=(1,), fixed_splits=None, kind="grid", n_samples=None,
                 seed=0, folds=DEFAULT_FOLDS, include_always=True):
        self.tau_grid = _grid(tau_grid, "tau", 0.0, 1.0)
        self.kappa_grid = _grid(kappa_grid, "kappa", 1, integer=True)
        self.split_candidates = _grid(split_candidates, "split", 2, integer=True)
        """prefix lengths a new interval may start at; None derives 2..min(longest case, 20)"""
        self.interval_tau_grid = _grid(interval_tau_grid, "interval tau", 0.0, 1.0)
        self.interval_kappa_grid = _grid(interval_kappa_grid, "interval kappa", 1, integer=True)
        if fixed_splits is not None:
            fixed_splits = [int(s) for s in fixed_splits]
            if not fixed_splits or fixed_splits[0] != 1 or \
                    any(b <= a for a, b in zip(fixed_splits, fixed_splits[1:])):
                raise SearchSpaceError("Fixed splits must start at 1 and strictly increase: %r" %
                                       (fixed_splits,))
        self.fixed_splits = fixed_splits
        if kind not in SEARCH_KINDS:
            raise SearchSpaceError("Unknown search kind %r; use %s" % (kind, " or ".join(SEARCH_KINDS)))
        if kind == "random" and (n_samples is None or int(n_samples) < 1):
            raise SearchSpaceError("Random search needs n_samples >= 1, not %r" % (n_samples,))
        self.kind = kind
        self.n_samples = None if n_samples is None else int(n_samples)
        self.seed = int(seed)
        if int(folds) < 2:
            raise SearchSpaceError("Cross validation needs at least 2 folds, not %r" % (folds,))
        self.folds = int(folds)
        self.include_always = bool(include_always)
        """also consider the policy alarming at the first event of every case"""

    def replace(self, **kwargs):
        """Return a copy with some keys changed."""
        d = self.to_dict()
        d.update(kwargs)
        return SearchSpace.from_dict(d)

    def to_dict(self):
        return dict((key, getattr(self, key)) for key in self.KEYS)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise SearchSpaceError("Unknown search keys: %s" % ", ".join(sorted(unknown)))
        return cls(**d)

    def __repr__(self):
        return "<%s %s at 0x%x>" % (self.__class__.__name__, self.kind, id(self))


class OptimizationResult(object):
    """The best policy found, with its cross validation costs."""
    def __init__(self, policy, fold_costs, n_candidates, stage2_empty=False, stage1=None,
                 space=None):
        self.policy = policy
        self.fold_costs = [float(c) for c in fold_costs]
        self.cv_mean_cost = float(np.mean(self.fold_costs))
        self.n_candidates = n_candidates
        self.stage2_empty = stage2_empty
        """hierarchical only: no prefix exceeded both alarm-vs-no-alarm thresholds"""
        self.stage1 = stage1 or {}
        """hierarchical only: alarm id -> single-alarm OptimizationResult"""
        self.space = space

    def to_dict(self):
        d = {"policy": self.policy.to_dict(), "cv_mean_cost": self.cv_mean_cost,
             "fold_costs": self.fold_costs, "n_candidates": self.n_candidates}
        if isinstance(self.policy, HierarchicalPolicy):
            d["stage2_empty"] = self.stage2_empty
            d["stage1"] = dict((a, r.to_dict()) for a, r in sorted(self.stage1.items()))
        if self.space is not None:
            d["search"] = self.space.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            stage1 = dict((a, cls.from_dict(r)) for a, r in d.get("stage1", {}).items())
            space = SearchSpace.from_dict(d["search"]) if "search" in d else None
            return cls(policy_from_dict(d["policy"]), d["fold_costs"], d["n_candidates"],
                       d.get("stage2_empty", False), stage1, space)
        except (KeyError, TypeError) as e:
            raise PolicyError("Invalid optimization result: %s" % e)

    def save(self, filename, config=None):
        d = self.to_dict()
        if config is not None:
            d["config"] = config
        with open(filename, "w", encoding="utf-8") as f:
            json.dump(d, f, indent=2, sort_keys=True)

    def __repr__(self):
        return "<%s %r cv=%g at 0x%x>" % (self.__class__.__name__, self.policy,
                                          self.cv_mean_cost, id(self))


class _Evaluator(object):
    """Cross validation costs of candidate policies on a fixed set of cases and folds."""
    def __init__(self, series_set, model, folds=DEFAULT_FOLDS, seed=0):
        series = sorted(series_set, key=lambda s: s.case_id)
        if len(series) < folds:
            raise OptimizationError("%d-fold cross validation needs at least %d cases, got %d" %
                                    (folds, folds, len(series)))
        self.width = max(len(s) for s in series)
        self.matrix = ProbabilityMatrix(series)
        self.table = case_cost_table(series, model)
        self.alarm_index = dict((a, i) for i, a in enumerate(self.table.alarm_ids))
        permutation = np.random.default_rng(seed).permutation(len(series))
        self.fold_of = np.empty(len(series), dtype=np.int64)
        for f, members in enumerate(np.array_split(permutation, folds)):
            self.fold_of[members] = f
        self.folds = folds
        self.fold_sizes = np.bincount(self.fold_of, minlength=folds)

    def case_costs(self, policy):
        fired_at, which = policy.decide_matrix(self.matrix)
        if not fired_at.any():
            return self.table.never.copy()
        try:
            mapping = np.array([self.alarm_index[a] for a in policy.alarm_ids()])
        except KeyError as e:
            raise CostModelError("Policy fires alarm %s, which the cost model does not define" % e)
        return self.table.case_costs(fired_at, mapping[which])

    def fold_costs(self, policy):
        totals = np.bincount(self.fold_of, weights=self.case_costs(policy), minlength=self.folds)
        return totals / self.fold_sizes


def cv_objective(series_set, model, policy, folds=DEFAULT_FOLDS, seed=0):
    """Mean over the folds of the average cost per case under the policy."""
    return float(np.mean(_Evaluator(series_set, model, folds, seed).fold_costs(policy)))


def _search(evaluator, candidates):
    """Ordered argmin over (key, policy) pairs."""
    best = None
    best_cost = None
    best_key = None
    n = 0
    for key, policy in candidates:
        fold_costs = evaluator.fold_costs(policy)
        cost = float(np.mean(fold_costs))
        n += 1
        if best is None or cost < best_cost or (cost == best_cost and key > best_key):
            best, best_cost, best_key, best_folds = policy, cost, key, fold_costs
        logger.debug("candidate %r: %g", policy, cost)
    if best is None:
        raise SearchSpaceError("The search space holds no candidates")
    return best, best_folds, n


def _single_alarm(model):
    if not model.is_single():
        raise PolicyError("This policy needs a single-alarm cost model, got alarms %s" %
                          ", ".join(model.alarm_ids()))
    return model.alarm_ids()[0]


def _sampled(space, dimensions):
    """
    Candidate parameter tuples: the full product of the dimensions for grid
    search, n_samples independent draws for random search. A dimension is a
    list of values or a function drawing a value from a generator.
    """
    if space.kind == "grid":
        return itertools.product(*dimensions)
    rng = np.random.default_rng(space.seed)

    def draw(dim):
        if callable(dim):
            return dim(rng)
        return dim[int(rng.integers(len(dim)))]
    return (tuple(draw(dim) for dim in dimensions) for _ in range(space.n_samples))


def _with_always(space, alarm_id, candidates):
    if space.include_always:
        yield _ALWAYS_KEY, AlwaysPolicy(alarm_id)
    for candidate in candidates:
        yield candidate


def _finish(evaluator, space, candidates, what):
    policy, fold_costs, n = _search(evaluator, candidates)
    result = OptimizationResult(policy, fold_costs, n, space=space)
    logger.info("%s: %r over %d candidates, cv cost %g", what, policy, n, result.cv_mean_cost)
    return result


def optimize_basic(series_set, model, space=None, evaluator=None):
    """Best threshold tau of the basic policy."""
    space = space or SearchSpace()
    alarm_id = _single_alarm(model)
    evaluator = evaluator or _Evaluator(series_set, model, space.folds, space.seed)
    candidates = (((tau,), BasicPolicy(tau, alarm_id))
                  for tau, in _sampled(space, [space.tau_grid]))
    return _finish(evaluator, space, _with_always(space, alarm_id, candidates), "basic")


def optimize_delayed(series_set, model, space=None, evaluator=None):
    """Best threshold and firing delay (tau, kappa)."""
    space = space or SearchSpace()
    alarm_id = _single_alarm(model)
    evaluator = evaluator or _Evaluator(series_set, model, space.folds, space.seed)
    candidates = (((tau, -kappa), DelayedPolicy(tau, kappa, alarm_id))
                  for tau, kappa in _sampled(space, [space.tau_grid, space.kappa_grid]))
    return _finish(evaluator, space, _with_always(space, alarm_id, candidates), "delayed")


def _interval_key(splits, taus, kappa):
    return (min(taus), sum(taus), -len(set(taus)), -kappa, tuple(taus),
            tuple(-s for s in splits))


def optimize_intervals(series_set, model, space=None, n_intervals=2, evaluator=None):
    """
    Best interval thresholds. With space.fixed_splits only the thresholds (and
    delays) are searched; otherwise the n_intervals - 1 split points are
    searched jointly with them.

    A single interval is searched on space.tau_grid. Several intervals are
    searched on the coarser space.interval_tau_grid; a grid search adds the
    systems with one threshold from space.tau_grid for all intervals, so it
    never ends above the single interval result.
    """
    space = space or SearchSpace()
    alarm_id = _single_alarm(model)
    evaluator = evaluator or _Evaluator(series_set, model, space.folds, space.seed)
    if space.fixed_splits is not None:
        split_options = [tuple(space.fixed_splits)]
        n_intervals = len(space.fixed_splits)
    else:
        if int(n_intervals) < 1:
            raise SearchSpaceError("n_intervals must be at least 1, not %r" % (n_intervals,))
        n_intervals = int(n_intervals)
        candidates = space.split_candidates
        if candidates is None:
            candidates = list(range(2, min(evaluator.width, MAX_DEFAULT_SPLIT) + 1))
        if len(candidates) < n_intervals - 1:
            raise SearchSpaceError("%d intervals need %d split candidates, got %d" %
                                   (n_intervals, n_intervals - 1, len(candidates)))
        split_options = [(1,) + c for c in itertools.combinations(candidates, n_intervals - 1)]

    if n_intervals == 1:
        tau_grids = [space.tau_grid]
        uniform_taus = []
    else:
        tau_grids = [space.interval_tau_grid] * n_intervals
        covered = set(space.interval_tau_grid)
        uniform_taus = [tau for tau in space.tau_grid if tau not in covered]
    if space.kind == "grid":
        dimensions = [split_options] + tau_grids + [space.interval_kappa_grid]
    else:
        def draw_splits(rng):
            return split_options[int(rng.integers(len(split_options)))]
        dimensions = [draw_splits] + tau_grids + [space.interval_kappa_grid]
        uniform_taus = []

    def generate():
        for params in _sampled(space, dimensions):
            splits, taus, kappa = params[0], params[1:-1], params[-1]
            yield _interval_key(splits, taus, kappa), IntervalPolicy(splits, taus, kappa, alarm_id)
        splits = split_options[0]
        for tau, kappa in itertools.product(uniform_taus, space.interval_kappa_grid):
            taus = (tau,) * n_intervals
            yield _interval_key(splits, taus, kappa), IntervalPolicy(splits, taus, kappa, alarm_id)
    return _finish(evaluator, space, _with_always(space, alarm_id, generate()),
                   "%d intervals" % n_intervals)


def optimize_hierarchical(series_set, model, space=None):
    """
    Train a two-alarm hierarchical policy. Stage 1 optimizes the basic
    threshold of each alarm against its own single-alarm cost model. Stage 2
    looks at the cases whose likelihood exceeds both stage 1 thresholds at
    some prefix and chooses tau_pairwise, minimizing the total cost of firing
    at the first such prefix the lower alarm up to tau_pairwise and the higher
    alarm above it. Ties go to the larger tau_pairwise.
    """
    space = space or SearchSpace()
    order = tuple(model.alarm_ids())
    if len(order) != 2:
        raise PolicyError("Hierarchical thresholding needs exactly two alarms, got %d" % len(order))
    series_set = sorted(series_set, key=lambda s: s.case_id)
    stage1_space = space.replace(include_always=False)
    stage1 = {}
    for alarm_id in order:
        stage1[alarm_id] = optimize_basic(series_set, model.restricted(alarm_id), stage1_space)
    tau_no_vs = dict((a, stage1[a].policy.tau) for a in order)
    low, high = order
    floor = max(tau_no_vs.values())

    survivors = []
    for s in series_set:
        for k, p in enumerate(s.probs, 1):
            if p > floor:
                survivors.append((s, k, p))
                break
    n_candidates = sum(r.n_candidates for r in stage1.values())
    if not survivors:
        tau_pairwise = 1.0
        logger.info("no prefix exceeds both stage 1 thresholds, tau_pairwise set to 1")
    else:
        table = case_cost_table([s for s, _, _ in survivors], model)
        rows = np.arange(len(survivors))
        at = np.array([k for _, k, _ in survivors]) - 1
        likelihood = np.array([p for _, _, p in survivors])
        low_costs = table.fire[0, rows, at]
        high_costs = table.fire[1, rows, at]
        best_cost = None
        for tau in space.tau_grid:
            cost = float(np.sum(np.where(likelihood > tau, high_costs, low_costs)))
            n_candidates += 1
            if best_cost is None or cost <= best_cost:
                best_cost, tau_pairwise = cost, tau

    policy = HierarchicalPolicy(tau_no_vs, tau_pairwise, order)
    evaluator = _Evaluator(series_set, model, space.folds, space.seed)
    result = OptimizationResult(policy, evaluator.fold_costs(policy), n_candidates,
                                stage2_empty=not survivors, stage1=stage1, space=space)
    logger.info("hierarchical: %r, cv cost %g", policy, result.cv_mean_cost)
    return result


def optimize_policy(series_set, model, policy_type, space=None, n_intervals=2):
    """Dispatch to the optimizer of a policy type."""
    space = space or SearchSpace()
    if policy_type == BasicPolicy.type:
        return optimize_basic(series_set, model, space)
    if policy_type == DelayedPolicy.type:
        return optimize_delayed(series_set, model, space)
    if policy_type == IntervalPolicy.type:
        return optimize_intervals(series_set, model, space, n_intervals)
    if policy_type == HierarchicalPolicy.type:
        return optimize_hierarchical(series_set, model, space)
    if policy_type in POLICYLIST:
        raise PolicyError("Policy %r has no parameters to optimize" % policy_type)
    raise PolicyError("Unknown policy %r; known types: %s" %
                      (policy_type, ", ".join(sorted(POLICYLIST))))
