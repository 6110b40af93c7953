"""Survey ingestion, missing-data policy and seasonal panel construction.

Raw input is a long-format CSV with one forecast per row. A row is addressed
by (variable, forecaster, target year, target season, horizon); the period
always refers to the *target* quarter/month being forecast, so the 2-step
forecast for a period was issued one survey before the 1-step forecast.
"""
import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import EmptyPanel, MissingActual, ParseError, SchemaError

logger = logging.getLogger(__name__)

__all__ = [
    "SurveyRecord",
    "ForecastPanel",
    "FillPolicy",
    "DEFAULT_SCHEMA",
    "load_survey",
    "load_actuals",
    "attach_actuals",
    "apply_fill_policy",
    "split_panels",
]

FIELDS = ("variable", "forecaster", "year", "season", "horizon", "value", "actual")
REQUIRED_FIELDS = FIELDS[:-1]
DEFAULT_SCHEMA = {name: name for name in FIELDS}
MISSING_TOKENS = frozenset({"", "na", "nan", "#n/a", "null"})


@dataclass(frozen=True)
class SurveyRecord:
    variable: str
    forecaster_id: str
    year: int
    season: int
    horizon: int
    value: float | None
    actual: float | None = None
    filled: bool = False

    @property
    def period(self):
        return (self.year, self.season)

    @property
    def missing(self):
        return self.value is None


@dataclass(frozen=True)
class FillPolicy:
    use_two_step_fill: bool = True
    max_consecutive_missing: int = 4

    def __post_init__(self):
        if self.max_consecutive_missing < 0:
            raise ValueError("max_consecutive_missing must be >= 0")


@dataclass(frozen=True, eq=False)
class ForecastPanel:
    """Balanced T x J table of one-step forecasts for one season."""

    variable: str
    season: int
    times: tuple
    forecaster_ids: tuple
    forecasts: np.ndarray
    actuals: np.ndarray
    sample: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        forecasts = np.asarray(self.forecasts, dtype=np.float64)
        actuals = np.asarray(self.actuals, dtype=np.float64)
        object.__setattr__(self, "forecasts", forecasts)
        object.__setattr__(self, "actuals", actuals)
        object.__setattr__(self, "times", tuple(int(t) for t in self.times))
        object.__setattr__(self, "forecaster_ids", tuple(str(f) for f in self.forecaster_ids))
        T, J = len(self.times), len(self.forecaster_ids)
        if forecasts.shape != (T, J):
            raise ValueError(f"forecasts shape {forecasts.shape} != ({T}, {J})")
        if actuals.shape != (T,):
            raise ValueError(f"actuals shape {actuals.shape} != ({T},)")
        if T < 1 or J < 2:
            raise ValueError(f"panel needs T >= 1 and J >= 2, got T={T}, J={J}")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("panel times must be strictly increasing")
        if not (np.isfinite(forecasts).all() and np.isfinite(actuals).all()):
            raise ValueError("panel contains missing or non-finite cells")

    @property
    def T(self):
        return len(self.times)

    @property
    def J(self):
        return len(self.forecaster_ids)

    def rows_before(self, time):
        """Sub-panel of the periods strictly earlier than ``time``."""
        n = sum(1 for t in self.times if t < time)
        return self.head(n)

    def head(self, n):
        return replace(
            self,
            times=self.times[:n],
            forecasts=self.forecasts[:n],
            actuals=self.actuals[:n],
        )

    def index_of(self, time):
        return self.times.index(int(time))

    def to_dict(self):
        return {
            "variable": self.variable,
            "sample": self.sample,
            "season": self.season,
            "times": list(self.times),
            "forecaster_ids": list(self.forecaster_ids),
            "forecasts": self.forecasts.tolist(),
            "actuals": self.actuals.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            variable=d["variable"],
            season=int(d["season"]),
            times=d["times"],
            forecaster_ids=d["forecaster_ids"],
            forecasts=np.array(d["forecasts"], dtype=np.float64).reshape(
                len(d["times"]), len(d["forecaster_ids"])
            ),
            actuals=d["actuals"],
            sample=d.get("sample", ""),
            meta=d.get("meta", {}),
        )

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _resolve_schema(schema, header, required):
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(FIELDS)
        if unknown:
            raise SchemaError(f"unknown schema field(s): {sorted(unknown)}")
        mapping.update(schema)
    resolved = {}
    for name in FIELDS:
        column = mapping.get(name)
        if column is None:
            if name in required:
                raise SchemaError(f"schema does not map required field {name!r}")
            continue
        if column not in header:
            if name in required or (schema and name in schema):
                raise SchemaError(f"column {column!r} (mapped to {name!r}) not found in header {header}")
            continue
        resolved[name] = column
    return resolved


def _parse_float(text):
    if text is None or text.strip().lower() in MISSING_TOKENS:
        return None
    value = float(text)
    if not np.isfinite(value):
        return None
    return value


def _read_rows(path):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        # header is line 1, first data row is line 2
        rows = [(i, row) for i, row in enumerate(reader, start=2)]
    return header, rows


def load_survey(path, schema=None):
    """Read a long-format survey CSV into a list of :class:`SurveyRecord`.

    ``schema`` maps the logical fields ``variable, forecaster, year, season,
    horizon, value, actual`` to column names; unmapped fields default to the
    field name itself and ``actual`` may be absent. Missing cells (empty or
    ``NA``) in ``value``/``actual`` become ``None``. Any unparseable numeric
    cell raises :class:`ParseError` listing every offending line.
    """
    header, rows = _read_rows(path)
    columns = _resolve_schema(schema, header, REQUIRED_FIELDS)
    records, problems = [], []
    for line, row in rows:
        try:
            records.append(
                SurveyRecord(
                    variable=row[columns["variable"]].strip(),
                    forecaster_id=row[columns["forecaster"]].strip(),
                    year=int(row[columns["year"]]),
                    season=int(row[columns["season"]]),
                    horizon=int(row[columns["horizon"]]),
                    value=_parse_float(row[columns["value"]]),
                    actual=_parse_float(row[columns["actual"]]) if "actual" in columns else None,
                )
            )
        except (TypeError, ValueError) as exc:
            problems.append((line, str(exc)))
    if problems:
        detail = "; ".join(f"line {line}: {msg}" for line, msg in problems[:10])
        raise ParseError(f"{path}: {len(problems)} unparseable row(s): {detail}", rows=[p[0] for p in problems])
    logger.debug("loaded %d survey records from %s", len(records), path)
    return records


def load_actuals(path, schema=None):
    """Read a side file of realized values keyed by (variable, year, season)."""
    header, rows = _read_rows(path)
    columns = _resolve_schema(
        {k: v for k, v in (schema or {}).items() if k in ("variable", "year", "season", "actual")},
        header,
        ("variable", "year", "season", "actual"),
    )
    actuals, problems = {}, []
    for line, row in rows:
        try:
            key = (row[columns["variable"]].strip(), int(row[columns["year"]]), int(row[columns["season"]]))
            value = _parse_float(row[columns["actual"]])
        except (TypeError, ValueError) as exc:
            problems.append((line, str(exc)))
            continue
        if value is not None:
            actuals[key] = value
    if problems:
        detail = "; ".join(f"line {line}: {msg}" for line, msg in problems[:10])
        raise ParseError(f"{path}: {len(problems)} unparseable row(s): {detail}", rows=[p[0] for p in problems])
    return actuals


def attach_actuals(records, actuals):
    """Overwrite each record's actual from a ``{(variable, year, season): value}`` map."""
    return [
        replace(r, actual=actuals[(r.variable, r.year, r.season)])
        if (r.variable, r.year, r.season) in actuals
        else r
        for r in records
    ]


def _longest_gap(present, span, grid):
    """Longest run of grid periods missing from ``present`` within ``span``.

    ``span`` holds every period the forecaster reported on (including explicit
    missing cells). Periods before its first or after its last report are
    entry and exit, not missing data.
    """
    positions = [i for i, p in enumerate(grid) if p in span]
    if not positions:
        return 0
    longest = run = 0
    for p in grid[positions[0]:positions[-1] + 1]:
        run = 0 if p in present else run + 1
        longest = max(longest, run)
    return longest


def apply_fill_policy(records, policy=FillPolicy()):
    """Fill missing 1-step forecasts from 2-step ones and drop gappy forecasters.

    A missing 1-step forecast for a target period is replaced by the same
    forecaster's 2-step forecast for that target period. Afterwards, any
    forecaster whose 1-step series has a run of more than
    ``policy.max_consecutive_missing`` missing periods is removed for that
    variable (other variables keep it).
    """
    by_key = defaultdict(list)
    for r in records:
        by_key[(r.variable, r.forecaster_id)].append(r)
    grids = defaultdict(set)
    for r in records:
        grids[r.variable].add(r.period)
    grids = {v: sorted(ps) for v, ps in grids.items()}

    out = []
    for (variable, forecaster), recs in by_key.items():
        one_step = {r.period: r for r in recs if r.horizon == 1}
        two_step = {r.period: r for r in recs if r.horizon == 2 and not r.missing}
        filled = dict(one_step)
        if policy.use_two_step_fill:
            for period, backup in two_step.items():
                current = one_step.get(period)
                if current is None or current.missing:
                    actual = current.actual if current is not None and current.actual is not None else backup.actual
                    filled[period] = replace(backup, horizon=1, actual=actual, filled=True)
        present = {p for p, r in filled.items() if not r.missing}
        gap = _longest_gap(present, set(filled), grids[variable])
        if gap > policy.max_consecutive_missing:
            logger.info(
                "excluding forecaster %s for %s: %d consecutive missing periods", forecaster, variable, gap
            )
            continue
        others = [r for r in recs if r.horizon != 1]
        out.extend(others)
        out.extend(filled[p] for p in sorted(filled))
    out.sort(key=lambda r: (r.variable, r.forecaster_id, r.year, r.season, r.horizon))
    return out


def split_panels(records, variable, window, frequency=4, sample=""):
    """Build one balanced :class:`ForecastPanel` per season for ``variable``.

    Only forecasters with a non-missing 1-step forecast for every year of
    ``window`` (inclusive) in a season enter that season's panel. Actuals come
    from the records; every year in the window needs one.

    Raises
    ------
    EmptyPanel
        If fewer than two forecasters are complete for some season.
    MissingActual
        If a year in the window has no realized value.
    """
    start, end = (int(x) for x in window)
    if end < start:
        raise ValueError(f"window {window} is not well ordered")
    years = tuple(range(start, end + 1))
    one_step = defaultdict(dict)
    actuals = {}
    for r in records:
        if r.variable != variable:
            continue
        if r.actual is not None:
            actuals.setdefault(r.period, r.actual)
        if r.horizon == 1 and not r.missing and start <= r.year <= end:
            one_step[r.period][r.forecaster_id] = r.value

    panels = []
    for season in range(1, int(frequency) + 1):
        ids = None
        for year in years:
            have = set(one_step.get((year, season), {}))
            ids = have if ids is None else ids & have
        ids = sorted(ids or ())
        if len(ids) < 2:
            raise EmptyPanel(
                f"{variable} season {season}, window {start}-{end}: "
                f"{len(ids)} complete forecaster(s), need at least 2"
            )
        missing = [y for y in years if (y, season) not in actuals]
        if missing:
            raise MissingActual(f"{variable} season {season}: no actual for year(s) {missing}")
        forecasts = np.array([[one_step[(y, season)][f] for f in ids] for y in years])
        panels.append(
            ForecastPanel(
                variable=variable,
                season=season,
                times=years,
                forecaster_ids=ids,
                forecasts=forecasts,
                actuals=np.array([actuals[(y, season)] for y in years]),
                sample=str(sample),
            )
        )
    return panels
