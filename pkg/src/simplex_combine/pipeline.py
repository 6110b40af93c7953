"""Ingest -> combine -> select -> evaluate, writing panel-scoped artifacts.

Outputs are plain UTF-8 CSV and JSON with no timestamps, so identical
inputs and configuration reproduce identical bytes.
"""
import csv
import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .coda import center
from .errors import SimplexCombineError, ZeroMsfe, ZeroVariation
from .evaluation import (
    RollingScheme,
    accuracy_metrics,
    beat_table,
    coefficient_of_variation,
    msfe_decomposition,
    rolling_evaluate,
    stratum,
)
from .panel import ForecastPanel, apply_fill_policy, attach_actuals, load_actuals, load_survey, split_panels
from .selection import biplot, cas_select, cluster_cas, cluster_forecasts, pairwise_distance, redundancy_groups
from .weights import accuracy, weight_matrix

logger = logging.getLogger(__name__)

__all__ = [
    "cmd_ingest",
    "cmd_run",
    "write_csv",
    "read_csv",
    "export_dendrogram",
    "export_biplot",
    "panel_key",
]


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def panel_key(variable, sample, season):
    return f"{variable}__s{sample}__m{season}"


def _panel_path(panels_dir, variable, sample, season):
    return Path(panels_dir) / variable / f"sample_{sample}" / f"season_{season}.json"


def cmd_ingest(config, panels_dir=None):
    """Load, fill and split the survey into JSON panels; returns the manifest."""
    panels_dir = Path(panels_dir or Path(config.out) / "panels")
    if not config.variables:
        logger.warning("no variables configured; nothing to ingest")
        return {"panels": [], "failures": []}
    records = load_survey(config.survey, config.schema)
    if config.actuals is not None:
        records = attach_actuals(records, load_actuals(config.actuals, config.schema))
    records = apply_fill_policy(records, config.fill_policy)
    manifest = {"panels": [], "failures": []}
    for variable in config.variables:
        for sample, (start, end) in sorted(config.samples.items()):
            try:
                panels = split_panels(records, variable, (start, config.eval_end), config.frequency, sample=sample)
            except SimplexCombineError as exc:
                logger.error("%s sample %s: %s", variable, sample, exc)
                manifest["failures"].append({"variable": variable, "sample": sample, "error": str(exc)})
                continue
            for p in panels:
                p = replace(p, meta={"train_start": start, "train_end": end})
                path = _panel_path(panels_dir, variable, sample, p.season)
                path.parent.mkdir(parents=True, exist_ok=True)
                p.to_json(path)
                manifest["panels"].append(
                    {
                        "variable": variable,
                        "sample": sample,
                        "season": p.season,
                        "path": str(path.relative_to(panels_dir)),
                        "J": p.J,
                        "T": end - start + 1,
                    }
                )
    write_json(panels_dir / "manifest.json", manifest)
    return manifest


def export_dendrogram(dendrogram, directory, stem):
    directory = Path(directory)
    write_json(directory / f"{stem}_dendrogram.json", dendrogram.to_dict())
    write_csv(
        directory / f"{stem}_dendrogram.csv",
        ["step", "a", "b", "height", "size"],
        [(s, a, b, h, n) for s, (a, b, h, n) in enumerate(dendrogram.merges)],
    )
    write_csv(
        directory / f"{stem}_leaves.csv",
        ["position", "leaf", "label"],
        [(i, leaf, dendrogram.labels[leaf]) for i, leaf in enumerate(dendrogram.leaf_order())],
    )


def export_biplot(result, times, directory, stem, groups=None):
    directory = Path(directory)
    payload = result.to_dict()
    payload["times"] = list(times)
    if groups is not None:
        payload["redundancy_groups"] = [[result.labels[i] for i in g] for g in groups]
    write_json(directory / f"{stem}_biplot.json", payload)
    write_csv(directory / f"{stem}_biplot_scores.csv", ["time", "axis1", "axis2"],
              [(t, float(a), float(b)) for t, (a, b) in zip(times, result.scores)])
    write_csv(directory / f"{stem}_biplot_loadings.csv", ["forecaster", "axis1", "axis2"],
              [(lab, float(a), float(b)) for lab, (a, b) in zip(result.labels, result.loadings)])


def _process_panel(args):
    """Evaluate one panel; never raises, failures come back as an error entry."""
    path, entry, config, plots_dir = args
    key = panel_key(entry["variable"], entry["sample"], entry["season"])
    try:
        panel = ForecastPanel.from_json(path)
        train_end = int(panel.meta["train_end"])
        scheme = RollingScheme(train_end=train_end, eval_periods=tuple(range(train_end + 1, config.eval_end + 1)))
        result = rolling_evaluate(panel, config.methods, scheme, config.epsilon, config.cas)
        out = {"key": key, "entry": entry, "result": result, "cv": [], "selection": None, "error": None}
        for t in result.times:
            row = panel.forecasts[panel.index_of(t)]
            try:
                cv = coefficient_of_variation(row)
            except SimplexCombineError:
                cv = float("nan")
            out["cv"].append((t, cv))

        train = panel.head(sum(1 for t in panel.times if t <= train_end))
        W = weight_matrix(accuracy(train.forecasts, train.actuals, config.epsilon))
        g = center(W)
        sel = cas_select(g)
        out["selection"] = {
            "center": dict(zip(panel.forecaster_ids, g.tolist())),
            "cas_included": [panel.forecaster_ids[i] for i in sel.included],
            "cas_weights": sel.sub_weights.tolist(),
        }
        if config.plots and train.T >= 2:
            dend = cluster_forecasts(pairwise_distance(W), config.cas.linkage, panel.forecaster_ids)
            export_dendrogram(dend, plots_dir, key)
            k = min(config.cas.k, panel.J)
            assignment, cw = cluster_cas(W, dend, k, config.cas.cluster_mode, train.forecasts, train.actuals,
                                         config.epsilon)
            out["selection"]["clusters"] = dict(zip(panel.forecaster_ids, assignment.tolist()))
            out["selection"]["cluster_cas_weights"] = cw.tolist()
            try:
                bp = biplot(W, config.cas.biplot_scaling, labels=panel.forecaster_ids)
            except ZeroVariation:
                pass
            else:
                groups = redundancy_groups(bp, config.cas.angle_tolerance, config.cas.min_length_fraction)
                export_biplot(bp, train.times, plots_dir, key, groups)
        return out
    except (SimplexCombineError, ValueError, KeyError, OSError) as exc:
        logger.error("panel %s failed: %s", key, exc)
        return {"key": key, "entry": entry, "error": f"{type(exc).__name__}: {exc}"}


def _fmt(x):
    return "nan" if x is None or (isinstance(x, float) and np.isnan(x)) else x


def cmd_run(config, panels_dir=None):
    """Evaluate every panel and write the run directory. Returns a summary dict."""
    out_dir = Path(config.out)
    panels_dir = Path(panels_dir or out_dir / "panels")
    manifest_path = panels_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    else:
        manifest = cmd_ingest(config, panels_dir)
    plots_dir = out_dir / "plots"
    entries = sorted(manifest["panels"], key=lambda e: (e["variable"], e["sample"], e["season"]))
    jobs = [(panels_dir / e["path"], e, config, plots_dir) for e in entries]
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_process_panel, jobs))
    else:
        outcomes = [_process_panel(j) for j in jobs]

    failures = list(manifest.get("failures", []))
    forecast_rows, weight_rows, cv_rows = [], [], []
    selections = {}
    grouped = defaultdict(list)
    for o in outcomes:
        if o["error"]:
            e = o["entry"]
            failures.append({"variable": e["variable"], "sample": e["sample"], "season": e["season"],
                             "error": o["error"]})
            continue
        r, e = o["result"], o["entry"]
        grouped[(e["variable"], e["sample"])].append(o)
        selections[o["key"]] = o["selection"]
        for method, series in r.forecasts.items():
            for fc, actual in zip(series, r.actuals):
                forecast_rows.append((e["variable"], e["sample"], e["season"], fc.time, method, fc.value, actual))
                for fid, w in zip(fc.included_ids, fc.weights_used):
                    weight_rows.append((e["variable"], e["sample"], e["season"], fc.time, method, fid, float(w)))
        for t, cv in o["cv"]:
            cv_rows.append((e["variable"], e["sample"], e["season"], t, _fmt(cv)))

    metric_rows, msfe_rows, cells = [], [], []
    for (variable, sample), outs in sorted(grouped.items()):
        J = max(o["entry"]["J"] for o in outs)
        T = outs[0]["entry"]["T"]
        series = defaultdict(lambda: defaultdict(list))
        for o in sorted(outs, key=lambda o: o["entry"]["season"]):
            r = o["result"]
            for method in config.methods:
                for fc, actual in zip(r.forecasts[method], r.actuals):
                    period = fc.time if config.beat_by == "period" else ""
                    series[period][method].append((fc.value, actual))
        for period in sorted(series):
            per_method = {m: accuracy_metrics(*map(np.array, zip(*series[period][m]))) for m in config.methods}
            for metric in config.metrics:
                values = {m: per_method[m].get(metric) for m in config.methods}
                cells.append({"variable": variable, "sample": sample, "period": period, "metric": metric,
                              "J": J, "T": T, "values": values})
                for m in config.methods:
                    metric_rows.append([variable, sample, period, metric, m, _fmt(values[m])])
        pooled = {m: [pair for p in series.values() for pair in p[m]] for m in config.methods}
        decomps = {}
        for m in config.methods:
            f, y = map(np.array, zip(*pooled[m]))
            try:
                decomps[m] = msfe_decomposition(f, y, config.bias_cut, config.var_cut)
            except (ZeroMsfe, ValueError) as exc:
                decomps[m] = exc
        finite = {m: d.msfe for m, d in decomps.items() if not isinstance(d, Exception)}
        best = min(finite, key=lambda m: (finite[m], config.methods.index(m))) if finite else None
        for m, d in decomps.items():
            if isinstance(d, Exception):
                msfe_rows.append((variable, sample, m, "nan", "nan", "nan", "nan", "undefined", 0))
            else:
                msfe_rows.append((variable, sample, m, d.msfe, d.bias_prop, d.var_prop, d.cov_prop, d.case,
                                  int(m == best)))

    table = beat_table(cells, config.methods)
    winners = {(r["variable"], r["sample"], r["period"], r["metric"]): r["winner"] for r in table.rows}
    for row in metric_rows:
        row.append(int(winners.get(tuple(row[:4])) == row[4]))

    write_csv(out_dir / "forecasts.csv", ["variable", "sample", "season", "time", "method", "value", "actual"],
              forecast_rows)
    write_csv(out_dir / "weights.csv", ["variable", "sample", "season", "time", "method", "forecaster", "weight"],
              weight_rows)
    write_csv(out_dir / "cv.csv", ["variable", "sample", "season", "time", "cv"], cv_rows)
    write_csv(out_dir / "metrics.csv", ["variable", "sample", "period", "metric", "method", "value", "winner"],
              metric_rows)
    write_csv(out_dir / "beat_cells.csv", ["variable", "sample", "period", "metric", "stratum", "winner"],
              [(r["variable"], r["sample"], r["period"], r["metric"], r["stratum"], r["winner"]) for r in table.rows])
    write_csv(out_dir / "beats.csv", ["stratum", "method", "count"],
              [(st, m, n) for (st,), c in table.counts(("stratum",)).items() for m, n in c.items()])
    write_csv(out_dir / "msfe.csv",
              ["variable", "sample", "method", "msfe", "bias_prop", "var_prop", "cov_prop", "case", "lowest"],
              msfe_rows)
    write_json(out_dir / "selections.json", selections)
    expected = [{"variable": v, "sample": s, "stratum": stratum(max(o["entry"]["J"] for o in outs),
                                                                 outs[0]["entry"]["T"])}
                for (v, s), outs in sorted(grouped.items())]
    run_info = {
        "config": config.to_dict(),
        "methods": list(config.methods),
        "metrics": list(config.metrics),
        "variables": list(config.variables),
        "samples": sorted(config.samples),
        "evaluated": expected,
        "failures": failures,
    }
    write_json(out_dir / "run.json", run_info)
    write_json(out_dir / "errors.json", failures)
    return {"panels": len(entries), "failures": failures, "cells": len(cells), "beats": table}
