"""Markdown summary of a finished (or partial) run directory."""
import json
from collections import Counter, defaultdict
from pathlib import Path

from .errors import MissingRun
from .evaluation import METRICS, TIE_PREFERENCE, BeatTable
from .pipeline import read_csv

__all__ = ["cmd_report", "load_beat_counts"]

MISSING = "missing"


def load_beat_counts(run_dir):
    counts = defaultdict(dict)
    for row in read_csv(Path(run_dir) / "beats.csv"):
        counts[row["stratum"]][row["method"]] = int(row["count"])
    return dict(counts)


def _pct(x):
    return "n/a" if x != x else f"{x:.2f}"


def _md_table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return lines


def _stratum_table(table):
    methods = list(table.methods)
    header = [""] + methods + ["SIMPLEX", "TOTAL"]
    rows = []
    for line in table.summary():
        rows.append([line["stratum"]] + [line["counts"].get(m, 0) for m in methods]
                    + [line["SIMPLEX"], line["TOTAL"]])
        total_pct = "" if line["stratum"] == "TOTAL" else _pct(line["TOTAL_percent"])
        rows.append(["(%)"] + [_pct(line["percent"].get(m, float("nan"))) for m in methods]
                    + [_pct(line["SIMPLEX_percent"]), total_pct])
    return _md_table(header, rows)


def cmd_report(run_dir):
    """Render the run's beat tables, MSFE classification and winners as markdown.

    Works on partial runs: whatever artifacts exist are summarized and
    expected cells without results are marked ``missing``.
    """
    run_dir = Path(run_dir)
    info_path, beats_path = run_dir / "run.json", run_dir / "beats.csv"
    if not info_path.exists() and not beats_path.exists():
        raise MissingRun(f"{run_dir} holds no run outputs (run.json / beats.csv)")
    info = json.loads(info_path.read_text(encoding="utf-8")) if info_path.exists() else {}
    out = [f"# Forecast combination report: {run_dir.name}", ""]

    if beats_path.exists():
        counts = load_beat_counts(run_dir)
        methods = info.get("methods") or [m for m in TIE_PREFERENCE if any(m in c for c in counts.values())]
        table = BeatTable.from_counts(counts, methods=tuple(methods))
        out += ["## Beats by forecaster/period stratum", ""]
        out += _stratum_table(table) if table.rows else ["No cells were scored."]
        out.append("")
    else:
        out += ["## Beats by forecaster/period stratum", "", MISSING, ""]

    cells_path = run_dir / "beat_cells.csv"
    if cells_path.exists():
        cells = read_csv(cells_path)
        methods = info.get("methods") or sorted({c["winner"] for c in cells})
        metrics = info.get("metrics") or list(METRICS)
        by_var_metric = defaultdict(Counter)
        for c in cells:
            by_var_metric[(c["variable"], c["metric"])][c["winner"]] += 1
        variables = sorted({c["variable"] for c in cells} | set(info.get("variables", [])))
        out += ["## Percentage of beats by variable and metric", ""]
        header = ["variable"] + [f"{metric} {m}" for metric in metrics for m in methods]
        rows = []
        for v in variables:
            row = [v]
            for metric in metrics:
                c = by_var_metric.get((v, metric))
                total = sum(c.values()) if c else 0
                row += [_pct(100.0 * c[m] / total) if total else MISSING for m in methods]
            rows.append(row)
        out += _md_table(header, rows) + [""]

        out += ["## Beats by metric and stratum", ""]
        by_metric_stratum = defaultdict(Counter)
        for c in cells:
            by_metric_stratum[(c["stratum"], c["metric"])][c["winner"]] += 1
        strata = sorted({c["stratum"] for c in cells})
        header = ["stratum"] + [f"{metric} {m}" for metric in metrics for m in methods]
        rows = [[st] + [by_metric_stratum[(st, metric)].get(m, 0) for metric in metrics for m in methods]
                for st in strata]
        out += _md_table(header, rows) + [""]
        header = ["stratum"] + [f"{metric} {g}" for metric in metrics for g in ("AVE", "SIMPLEX")]
        rows = []
        for st in strata:
            row = [st]
            for metric in metrics:
                c = by_metric_stratum[(st, metric)]
                row += [c.get("AVE", 0), c.get("S_STC", 0) + c.get("CAS", 0)]
            rows.append(row)
        out += _md_table(header, rows) + [""]

        out += ["## Winner per variable", ""]
        per_var = defaultdict(Counter)
        for c in cells:
            per_var[c["variable"]][c["winner"]] += 1
        rows = []
        for v in variables:
            c = per_var.get(v)
            if not c:
                rows.append([v, MISSING, ""])
                continue
            rank = {m: i for i, m in enumerate(TIE_PREFERENCE)}
            best = min(c, key=lambda m: (-c[m], rank.get(m, 99)))
            rows.append([v, best, ", ".join(f"{m}={c[m]}" for m in methods)])
        out += _md_table(["variable", "winner", "beats"], rows) + [""]

    msfe_path = run_dir / "msfe.csv"
    if msfe_path.exists():
        out += ["## MSFE decomposition of the lowest-MSFE method", ""]
        rows_by_cell = defaultdict(list)
        for r in read_csv(msfe_path):
            rows_by_cell[(r["variable"], r["sample"])].append(r)
        expected = [(e["variable"], e["sample"]) for e in info.get("evaluated", [])]
        expected += [(f["variable"], f["sample"]) for f in info.get("failures", [])]
        keys = sorted(set(rows_by_cell) | set(expected))
        rows, cases = [], defaultdict(Counter)
        for key in keys:
            best = [r for r in rows_by_cell.get(key, []) if r["lowest"] == "1"]
            if not best:
                rows.append(list(key) + [MISSING] * 6)
                continue
            r = best[0]
            cases[r["method"]][r["case"]] += 1
            rows.append(list(key) + [r["method"], r["msfe"], r["bias_prop"], r["var_prop"], r["cov_prop"], r["case"]])
        out += _md_table(["variable", "sample", "method", "msfe", "bias", "variance", "covariance", "case"], rows)
        out += ["", "Cases of the lowest-MSFE method (1 best ... 4 worst):", ""]
        out += _md_table(["method", "case 1", "case 2", "case 3", "case 4"],
                         [[m] + [c.get(str(k), 0) for k in range(1, 5)] for m, c in sorted(cases.items())])
        out.append("")

    failures = info.get("failures", [])
    if failures:
        out += ["## Failed panels", ""]
        out += [f"- {f['variable']} sample {f['sample']}"
                + (f" season {f['season']}" if "season" in f else "") + f": {f['error']}" for f in failures]
        out.append("")
    return "\n".join(out)
