"""Deterministic synthetic survey data shaped like a professional-forecaster panel.

Forecasters enter the survey in cohorts, so older estimation windows see
few of them and recent windows many (recent windows end up with more
forecasters than years). Within a cohort, forecasters share a common error
component, which makes some of them redundant.
"""
import csv
from pathlib import Path

import numpy as np

__all__ = ["DEFAULT_COHORTS", "DEFAULT_SAMPLES", "make_survey", "write_survey"]

# (entry year, number of forecasters)
DEFAULT_COHORTS = ((1991, 3), (1995, 3), (2000, 4), (2006, 4), (2010, 6))
DEFAULT_SAMPLES = {
    "1": (1991, 2014),
    "2": (1995, 2014),
    "3": (2000, 2014),
    "4": (2006, 2014),
    "5": (2010, 2014),
}


def make_survey(variables=("NGDP", "UNEMP"), first_year=1991, last_year=2018, frequency=4,
                cohorts=DEFAULT_COHORTS, seed=0, missing_rate=0.03, gappy=True):
    """Long-format rows ``(variable, forecaster, year, season, horizon, value, actual)``.

    Each 1-step forecast has a matching 2-step forecast for the same target
    period. A small share of 1-step values is blanked (``None``) so the
    two-step fill has work to do; with ``gappy`` one extra forecaster per
    variable has a long hole and should be excluded by the fill policy.
    """
    rng = np.random.default_rng(seed)
    years = np.arange(first_year, last_year + 1)
    rows = []
    for v_index, variable in enumerate(variables):
        level = 50.0 + 25.0 * v_index
        n = len(years) * frequency
        trend = level + 0.2 * np.arange(n)
        seasonal = 2.0 * np.sin(2 * np.pi * np.arange(n) / frequency)
        actual = trend + seasonal + np.cumsum(rng.normal(0, 0.6, n))
        forecasters = []
        for c, (entry, size) in enumerate(cohorts):
            shared = rng.normal(0, 1.0 + 0.3 * c, n)
            for k in range(size):
                fid = f"F{len(forecasters) + 1:03d}"
                forecasters.append((fid, entry, shared, rng.normal(0, 0.4 + 0.2 * k), rng.normal(0, 0.5)))
        if gappy:
            forecasters.append(("G999", first_year, rng.normal(0, 1.0, n), 0.5, 0.0))

        for fid, entry, shared, scale, bias in forecasters:
            own = rng.normal(0, abs(scale) + 0.1, n)
            one = actual + bias + 0.6 * shared + own
            two = one + rng.normal(0, 0.5, n)
            for i in range(n):
                year, season = int(years[i // frequency]), i % frequency + 1
                if year < entry:
                    continue
                v1 = float(round(one[i], 6))
                if fid == "G999" and 2000 <= year <= 2002:
                    v1 = None
                elif rng.random() < missing_rate:
                    v1 = None
                a = float(round(actual[i], 6))
                rows.append((variable, fid, year, season, 1, v1, a))
                if fid != "G999":
                    rows.append((variable, fid, year, season, 2, float(round(two[i], 6)), a))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3], r[4]))
    return rows


def write_survey(path, rows=None, **kwargs):
    rows = make_survey(**kwargs) if rows is None else rows
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["variable", "forecaster", "year", "season", "horizon", "value", "actual"])
        for r in rows:
            w.writerow(["NA" if x is None else x for x in r])
    return path
