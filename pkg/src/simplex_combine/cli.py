"""Command-line entry point: ``simplex-combine {ingest,run,report,biplot,cluster}``."""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidK, MissingRun, SchemaError, SimplexCombineError
from .panel import ForecastPanel
from .pipeline import cmd_ingest, cmd_run, export_biplot, export_dendrogram, write_json
from .report import cmd_report
from .selection import biplot, cluster_cas, cluster_forecasts, pairwise_distance, redundancy_groups
from .weights import DEFAULT_EPSILON, accuracy, weight_matrix

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
logger = logging.getLogger("simplex_combine")


def _configure_logging():
    level = os.environ.get("SIMPLEX_COMBINE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load(args):
    from .config import load_config

    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    methods = tuple(m.strip() for m in args.methods.split(",")) if getattr(args, "methods", None) else None
    cfg = cfg.with_overrides(
        out=Path(args.out) if args.out else None,
        jobs=getattr(args, "jobs", None),
        epsilon=args.epsilon,
        methods=methods,
        mode=getattr(args, "cas_mode", None),
        linkage=getattr(args, "linkage", None),
        k=getattr(args, "k", None),
    )
    return cfg.validate()


def _panel_weights(args):
    panel = ForecastPanel.from_json(args.panel)
    if args.upto is not None:
        panel = panel.head(sum(1 for t in panel.times if t <= args.upto))
    W = weight_matrix(accuracy(panel.forecasts, panel.actuals, args.epsilon or DEFAULT_EPSILON))
    return panel, W


def _stem(panel):
    return f"{panel.variable}__s{panel.sample or 'x'}__m{panel.season}"


def do_ingest(args):
    cfg = _load(args)
    manifest = cmd_ingest(cfg)
    print(f"wrote {len(manifest['panels'])} panel(s) to {Path(cfg.out) / 'panels'}")
    return EXIT_PARTIAL if manifest["failures"] else EXIT_OK


def do_run(args):
    cfg = _load(args)
    summary = cmd_run(cfg)
    print(f"evaluated {summary['panels']} panel(s), {summary['cells']} cell(s); outputs in {cfg.out}")
    for f in summary["failures"]:
        print(f"  failed: {f}", file=sys.stderr)
    return EXIT_PARTIAL if summary["failures"] else EXIT_OK


def do_report(args):
    text = cmd_report(args.run_dir)
    Path(args.run_dir, "report.md").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def do_biplot(args):
    panel, W = _panel_weights(args)
    result = biplot(W, args.scaling, labels=panel.forecaster_ids)
    groups = redundancy_groups(result, args.angle_tolerance)
    out = Path(args.out or ".")
    export_biplot(result, panel.times[: W.shape[0]], out, _stem(panel), groups)
    print(json.dumps({"variance_explained": result.variance_explained,
                      "redundancy_groups": [[panel.forecaster_ids[i] for i in g] for g in groups]}))
    return EXIT_OK


def do_cluster(args):
    panel, W = _panel_weights(args)
    if args.k is not None and not 1 <= args.k <= panel.J:
        raise InvalidK(f"k must lie in [1, {panel.J}], got {args.k}")
    dend = cluster_forecasts(pairwise_distance(W), args.linkage, panel.forecaster_ids)
    out = Path(args.out or ".")
    export_dendrogram(dend, out, _stem(panel))
    payload = {"linkage": args.linkage}
    if args.k is not None:
        head = panel.head(W.shape[0])
        assignment, w = cluster_cas(W, dend, args.k, args.cluster_mode, head.forecasts, head.actuals,
                                    args.epsilon or DEFAULT_EPSILON)
        payload.update(k=args.k, clusters=dict(zip(panel.forecaster_ids, assignment.tolist())),
                       weights=dict(zip(panel.forecaster_ids, np.asarray(w).tolist())))
        write_json(out / f"{_stem(panel)}_cluster_cas.json", payload)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="simplex-combine",
                                     description="Simplex forecast combination and selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON or YAML run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--epsilon", type=float, help="floor on absolute forecast errors")

    p = sub.add_parser("ingest", help="load, fill and split the survey into panels")
    common(p)
    p.set_defaults(func=do_ingest)

    p = sub.add_parser("run", help="rolling evaluation of all panels")
    common(p)
    p.add_argument("--jobs", type=int, help="parallel panel workers")
    p.add_argument("--methods", help="comma list from AVE,E_STC,S_STC,CAS")
    p.add_argument("--cas-mode", choices=("threshold", "cluster", "biplot"))
    p.add_argument("--linkage", choices=("ward", "complete"))
    p.add_argument("--k", type=int, help="number of clusters for cluster CAS")
    p.set_defaults(func=do_run)

    p = sub.add_parser("report", help="markdown summary of a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=do_report)

    p = sub.add_parser("biplot", help="rank-2 biplot coordinates for one panel")
    common(p, config=False)
    p.add_argument("--panel", required=True, help="panel JSON written by ingest")
    p.add_argument("--upto", type=int, help="use rows up to and including this period")
    p.add_argument("--scaling", choices=("form", "covariance"), default="form")
    p.add_argument("--angle-tolerance", type=float, default=5.0)
    p.set_defaults(func=do_biplot)

    p = sub.add_parser("cluster", help="dendrogram and cluster-CAS weights for one panel")
    common(p, config=False)
    p.add_argument("--panel", required=True, help="panel JSON written by ingest")
    p.add_argument("--upto", type=int, help="use rows up to and including this period")
    p.add_argument("--linkage", choices=("ward", "complete"), default="ward")
    p.add_argument("--k", type=int)
    p.add_argument("--cluster-mode", choices=("uniform", "series"), default="uniform")
    p.set_defaults(func=do_cluster)
    return parser


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingRun as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimplexCombineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
