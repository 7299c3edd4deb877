"""
Command line interface.

    alarmsys split    --log LOG.csv [--schema SCHEMA.json] --out-dir DIR
    alarmsys score    --split-dir DIR [--oracle] --out-dir DIR
    alarmsys optimize --scores THRES.csv --cost-model COST.json --policy-type basic --out-dir DIR
    alarmsys evaluate --scores TEST.csv --cost-model COST.json --policy never|POLICY.json --out-dir DIR
    alarmsys rq       --config RQ.json --out-dir DIR
    alarmsys synth    --n-cases 1000 --out-dir DIR

Every command accepts --config with a JSON object whose keys are the long
option names (with underscores); options given on the command line take
precedence. The resolved configuration is written to manifest.json in the
output directory and embedded in every JSON output. A JSON summary goes to
stdout, diagnostics go to stderr. Exit codes: 0 success, 2 invalid
configuration or missing input, 3 data errors.
"""

import argparse
import json
import logging
import os
import sys

from . import _get_version
from .errors import AlarmSysError, ConfigError, DataError
from .cost import CostModel
from .encoding import MIN_FREQUENCY, fit_encoder
from .estimator import (EstimatorParams, OracleEstimator, load_external_scores, save_model,
                        score_log, train, write_scores)
from .experiment import RQS, RQConfig, evaluate, heatmap, run_rq_suite
from .log import (CANONICAL_SCHEMA, LogSchema, log_statistics, read_canonical_log,
                  read_event_log, temporal_split, truncate_log, write_event_log)
from .optimize import SearchSpace, optimize_policy
from .policy import NeverPolicy, AlwaysPolicy, POLICYLIST, load_policy
from .synthetic import SyntheticLogSpec, generate_synthetic_log

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
DEFAULT_PERCENTILE = 0.9
"""Traces are truncated at the 90th percentile of the case lengths before splitting."""
MANIFEST = "manifest.json"
SPLIT_FILES = {"train": "train.csv", "thres": "thres.csv", "test": "test.csv"}
SCORE_FILES = {"thres": "thres_scores.csv", "test": "test_scores.csv"}


def _write_json(d, filename):
    with open(filename, "w", encoding="utf-8") as f:
        json.dump(d, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_json(filename, what):
    try:
        with open(filename, "r", encoding="utf-8") as f:
            return json.load(f)
    except (IOError, OSError) as e:
        raise ConfigError("Can not read %s %s: %s" % (what, filename, e))
    except ValueError as e:
        raise ConfigError("%s %s is not valid JSON: %s" % (what.capitalize(), filename, e))


def _existing(path, what):
    if path is None:
        raise ConfigError("No %s given" % what)
    if not os.path.exists(path):
        raise ConfigError("The %s %s does not exist" % (what, path))
    return path


def _out_dir(config):
    out = config.get("out_dir") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _summary(d):
    sys.stdout.write(json.dumps(d, sort_keys=True) + "\n")


def resolve_config(args, keys):
    """Merge the --config file with the options given on the command line."""
    config = {}
    if args.config is not None:
        config = _read_json(_existing(args.config, "config file"), "config file")
        if not isinstance(config, dict):
            raise ConfigError("Config file %s must hold a JSON object" % args.config)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    if "seed" in keys:
        config.setdefault("seed", 0)
    return config


def cmd_split(args):
    config = resolve_config(args, ("log", "schema", "percentile", "seed", "out_dir"))
    source = _existing(config.get("log"), "event log")
    schema = config.get("schema")
    if schema is None:
        schema = CANONICAL_SCHEMA
    elif isinstance(schema, dict):
        schema = LogSchema.from_dict(schema)
    else:
        schema = LogSchema.from_file(_existing(schema, "schema file"))
    out = _out_dir(config)

    if schema is CANONICAL_SCHEMA:
        log = read_canonical_log(source)
    else:
        log = read_event_log(source, schema)
    if not log.is_labeled():
        raise ConfigError("The log %s is not labeled; give a schema with a label rule" % source)
    percentile = config.get("percentile", DEFAULT_PERCENTILE)
    statistics = log_statistics(log)
    log = truncate_log(log, percentile)
    max_len = max(len(t) for t in log.values())
    logger.info("read %d cases, truncated at length %d", len(log), max_len)
    split = temporal_split(log, config["seed"])
    for name, part in (("train", split.train), ("thres", split.thres), ("test", split.test)):
        write_event_log(part, os.path.join(out, SPLIT_FILES[name]))
    manifest = {"command": "split", "config": _provenance(config, schema=schema.to_dict()),
                "assigned": split.assigned, "sizes": split.sizes(),
                "max_len": max_len, "statistics": statistics}
    _write_json(manifest, os.path.join(out, MANIFEST))
    _summary({"command": "split", "assigned": split.assigned, "max_len": max_len})


def _provenance(config, **extra):
    d = dict(config)
    d.update(extra)
    return d


def cmd_score(args):
    config = resolve_config(args, ("split_dir", "external_thres", "external_test", "oracle",
                                   "max_len", "min_frequency", "estimator", "seed", "out_dir"))
    out = _out_dir(config)
    if config.get("external_thres") or config.get("external_test"):
        series = {}
        for part in ("thres", "test"):
            series[part] = load_external_scores(_existing(config.get("external_" + part),
                                                          "%s score file" % part))
        logger.info("read external scores")
    else:
        split_dir = _existing(config.get("split_dir"), "split directory")
        max_len = config.get("max_len")
        manifest_file = os.path.join(split_dir, MANIFEST)
        if max_len is None and os.path.exists(manifest_file):
            max_len = _read_json(manifest_file, "split manifest").get("max_len")
        logs = dict((part, read_canonical_log(_existing(os.path.join(split_dir, name),
                                                        "%s log" % part)))
                    for part, name in SPLIT_FILES.items())
        encoder = fit_encoder(logs["train"], config.get("min_frequency", MIN_FREQUENCY))
        if config.get("oracle"):
            est = OracleEstimator()
        else:
            params = EstimatorParams.from_dict(dict(config.get("estimator") or {},
                                                    seed=config["seed"]))
            est = train(logs["train"], encoder, params, max_len)
            save_model(est, os.path.join(out, "model.json"))
            encoder.save(os.path.join(out, "encoder.json"))
        series = dict((part, score_log(est, logs[part], encoder, max_len))
                      for part in ("thres", "test"))
        config["max_len"] = max_len
    for part in ("thres", "test"):
        write_scores(series[part], os.path.join(out, SCORE_FILES[part]))
    counts = dict((part, len(series[part])) for part in ("thres", "test"))
    _write_json({"command": "score", "config": config, "cases": counts},
                os.path.join(out, MANIFEST))
    _summary({"command": "score", "cases": counts})


def _cost_model(config):
    model = config.get("cost_model")
    if isinstance(model, dict):
        return CostModel.from_dict(model)
    return CostModel.from_file(_existing(model, "cost model"))


def cmd_optimize(args):
    config = resolve_config(args, ("scores", "cost_model", "policy_type", "n_intervals",
                                   "search", "seed", "out_dir"))
    series = load_external_scores(_existing(config.get("scores"), "score file"))
    model = _cost_model(config)
    search = config.get("search") or {}
    if not isinstance(search, dict):
        search = _read_json(_existing(search, "search file"), "search file")
    search = dict(search)
    search.setdefault("seed", config["seed"])
    space = SearchSpace.from_dict(search)
    out = _out_dir(config)
    result = optimize_policy(series, model, config.get("policy_type", "basic"), space,
                             config.get("n_intervals", 2))
    result.save(os.path.join(out, "result.json"), config)
    _write_json({"command": "optimize", "config": config}, os.path.join(out, MANIFEST))
    _summary({"command": "optimize", "policy": result.policy.to_dict(),
              "cv_mean_cost": result.cv_mean_cost, "n_candidates": result.n_candidates})


def cmd_evaluate(args):
    config = resolve_config(args, ("scores", "cost_model", "policy", "seed", "out_dir"))
    series = load_external_scores(_existing(config.get("scores"), "score file"))
    model = _cost_model(config)
    policy = config.get("policy", "never")
    if policy == NeverPolicy.type:
        policy = NeverPolicy(model.alarm_ids()[0])
    elif policy == AlwaysPolicy.type:
        policy = AlwaysPolicy(model.alarm_ids()[0])
    else:
        policy = load_policy(_existing(policy, "policy file"))
    out = _out_dir(config)
    report = evaluate(series, model, policy, config)
    report_dict = report.to_dict()
    report_dict["policy"] = policy.to_dict()
    _write_json(report_dict, os.path.join(out, "report.json"))
    _write_json({"command": "evaluate", "config": config}, os.path.join(out, MANIFEST))
    _summary({"command": "evaluate", "avg_cost_per_case": report.avg_cost_per_case,
              "benefit": report.benefit, "f_score": report.f_score})


def cmd_rq(args):
    config = resolve_config(args, ("rq", "thres", "test", "seed", "include_baselines",
                                   "heatmap", "out_dir"))
    rq_config = dict((k, v) for k, v in config.items() if k in RQConfig.KEYS)
    dataset = dict(rq_config.get("dataset") or {})
    for part in ("thres", "test"):
        if config.get(part) is not None:
            dataset[part] = config[part]
    rq_config["dataset"] = dataset
    if "rq" not in rq_config:
        raise ConfigError("No RQ given; use --rq or the config key 'rq'")
    rq_config = RQConfig.from_dict(rq_config)
    out = _out_dir(config)
    table = run_rq_suite(rq_config)
    table.write_csv(os.path.join(out, "results.csv"))
    if config.get("heatmap"):
        row_param, col_param = config["heatmap"][:2]
        value = config["heatmap"][2] if len(config["heatmap"]) > 2 else "benefit"
        matrix = heatmap(table, row_param, col_param, value)
        matrix.to_csv(os.path.join(out, "heatmap.csv"), float_format="%.10g")
    _write_json({"command": "rq", "config": rq_config.to_dict()}, os.path.join(out, MANIFEST))
    _summary({"command": "rq", "rq": rq_config.rq, "rows": len(table)})


def cmd_synth(args):
    config = resolve_config(args, SyntheticLogSpec.KEYS + ("out_dir",))
    spec = SyntheticLogSpec.from_dict(dict((k, v) for k, v in config.items()
                                           if k in SyntheticLogSpec.KEYS))
    out = _out_dir(config)
    log, series = generate_synthetic_log(spec)
    write_event_log(log, os.path.join(out, "log.csv"))
    write_scores(series, os.path.join(out, "scores.csv"))
    _write_json({"command": "synth", "config": spec.to_dict(),
                 "statistics": log_statistics(log)}, os.path.join(out, MANIFEST))
    _summary({"command": "synth", "cases": len(log)})


def _common(parser):
    parser.add_argument("--config", help="JSON file with option values")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory (default: .)")
    parser.add_argument("--seed", type=int, help="random seed (default: 0)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")


def build_parser():
    parser = argparse.ArgumentParser(prog="alarmsys",
        description="Cost-aware alarm systems for prescriptive process monitoring.")
    parser.add_argument("--version", action="version", version="%(prog)s " + _get_version())
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    p = commands.add_parser("split", help="split a labeled log into train, thres and test logs")
    _common(p)
    p.add_argument("--log", help="CSV event log")
    p.add_argument("--schema", help="JSON log schema (default: canonical columns)")
    p.add_argument("--percentile", type=float,
                   help="truncate traces at this length percentile (default: 0.9)")
    p.set_defaults(func=cmd_split)

    p = commands.add_parser("score", help="train the estimator and score thres and test")
    _common(p)
    p.add_argument("--split-dir", dest="split_dir", help="output directory of split")
    p.add_argument("--external-thres", dest="external_thres", help="scores of the thres log")
    p.add_argument("--external-test", dest="external_test", help="scores of the test log")
    p.add_argument("--oracle", action="store_true", default=None,
                   help="score with the true outcomes instead of an estimator")
    p.add_argument("--max-len", dest="max_len", type=int, help="longest prefix to score")
    p.add_argument("--min-frequency", dest="min_frequency", type=int,
                   help="minimum frequency of categorical values (default: %d)" % MIN_FREQUENCY)
    p.set_defaults(func=cmd_score)

    p = commands.add_parser("optimize", help="optimize policy parameters on the thres scores")
    _common(p)
    p.add_argument("--scores", help="score file of the thres log")
    p.add_argument("--cost-model", dest="cost_model", help="JSON cost model")
    p.add_argument("--policy-type", dest="policy_type",
                   choices=[t for t in sorted(POLICYLIST) if t not in ("always", "never")])
    p.add_argument("--n-intervals", dest="n_intervals", type=int)
    p.add_argument("--search", help="JSON search space")
    p.set_defaults(func=cmd_optimize)

    p = commands.add_parser("evaluate", help="evaluate a policy on the test scores")
    _common(p)
    p.add_argument("--scores", help="score file of the test log")
    p.add_argument("--cost-model", dest="cost_model", help="JSON cost model")
    p.add_argument("--policy", help="'never', 'always', or a JSON policy or optimize result")
    p.set_defaults(func=cmd_evaluate)

    p = commands.add_parser("rq", help="run a sweep over alarm model configurations")
    _common(p)
    p.add_argument("--rq", choices=RQS)
    p.add_argument("--thres", help="score file of the thres log")
    p.add_argument("--test", help="score file of the test log")
    p.add_argument("--include-baselines", dest="include_baselines", action="store_true",
                   default=None)
    p.add_argument("--heatmap", nargs="+", metavar="COLUMN",
                   help="write heatmap.csv: row parameter, column parameter, value")
    p.set_defaults(func=cmd_rq)

    p = commands.add_parser("synth", help="generate a synthetic log with Bayes-optimal scores")
    _common(p)
    p.add_argument("--n-cases", dest="n_cases", type=int)
    p.add_argument("--class-ratio", dest="class_ratio", type=float)
    p.add_argument("--min-length", dest="min_length", type=int)
    p.add_argument("--max-length", dest="max_length", type=int)
    p.add_argument("--signal", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--n-resources", dest="n_resources", type=int)
    p.set_defaults(func=cmd_synth)
    return parser


def _configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    if not logging.getLogger().handlers:
        logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)-8s %(message)s')
    logging.getLogger("alarmsys").setLevel(level)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        args.func(args)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except DataError as e:
        logger.error("%s", e)
        return EXIT_DATA
    except AlarmSysError as e:
        logger.error("%s", e)
        return EXIT_DATA
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
