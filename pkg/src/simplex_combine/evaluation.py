"""Rolling one-step-ahead evaluation and forecast accuracy diagnostics."""
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .coda import center, closure, uniform
from .combine import METHODS, CombinationForecast, average_forecast, combine_row
from .errors import ZeroActual, ZeroMean, ZeroMsfe, ZeroVariation
from .selection import biplot_select, cas_select, cluster_cas, cluster_forecasts, pairwise_distance
from .weights import DEFAULT_EPSILON, accuracy, euclidean_stc_weights, weight_matrix

__all__ = [
    "METRICS",
    "CasOptions",
    "RollingScheme",
    "RollingResult",
    "Metrics",
    "MsfeDecomposition",
    "BeatTable",
    "cas_weights",
    "rolling_evaluate",
    "accuracy_metrics",
    "msfe_decomposition",
    "classify_case",
    "coefficient_of_variation",
    "stratum",
    "pick_winner",
    "beat_table",
]

METRICS = ("ME", "RMSE", "MAPE", "MdAPE")
# exact ties go to the first method in this order: fixed weights before varying ones
TIE_PREFERENCE = ("AVE", "E_STC", "S_STC", "CAS")
CAS_MODES = ("threshold", "cluster", "biplot")


@dataclass(frozen=True)
class CasOptions:
    mode: str = "threshold"
    linkage: str = "ward"
    k: int = 2
    cluster_mode: str = "uniform"
    angle_tolerance: float = 5.0
    min_length_fraction: float = 0.1
    biplot_scaling: str = "form"

    def __post_init__(self):
        if self.mode not in CAS_MODES:
            raise ValueError(f"CAS mode must be one of {CAS_MODES}, got {self.mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class RollingScheme:
    """Weights use every period strictly before each target, refreshed each step."""

    train_end: int
    eval_periods: tuple = None

    def targets(self, times):
        if self.eval_periods is None:
            return tuple(t for t in times if t > self.train_end)
        periods = tuple(int(t) for t in self.eval_periods)
        if any(t <= self.train_end for t in periods):
            raise ValueError("evaluation periods must come after train_end")
        missing = [t for t in periods if t not in times]
        if missing:
            raise ValueError(f"panel has no rows for evaluation period(s) {missing}")
        return periods


@dataclass
class RollingResult:
    variable: str
    sample: str
    season: int
    J: int
    T_train: int
    times: tuple
    actuals: np.ndarray
    forecasts: dict = field(default_factory=dict)

    def values(self, method):
        return np.array([f.value for f in self.forecasts[method]])


def cas_weights(history, options=CasOptions(), epsilon=DEFAULT_EPSILON):
    """CAS subcombination estimated from a history panel.

    Returns the included column indices and their weights. The cluster and
    biplot refinements act on the threshold survivors and fall back to the
    plain threshold rule when the history is too short or degenerate.
    """
    W = weight_matrix(accuracy(history.forecasts, history.actuals, epsilon))
    g = center(W)
    sel = cas_select(g)
    idx = np.array(sel.included)
    if options.mode == "threshold" or W.shape[0] < 2:
        return idx, sel.sub_weights
    if options.mode == "cluster" and idx.size >= 2:
        Wsub = closure(W[:, idx])
        dend = cluster_forecasts(pairwise_distance(Wsub), options.linkage)
        _, w = cluster_cas(
            Wsub,
            dend,
            min(options.k, idx.size),
            mode=options.cluster_mode,
            forecasts=history.forecasts[:, idx],
            actuals=history.actuals,
            epsilon=epsilon,
        )
        return idx, w
    if options.mode == "biplot" and idx.size >= 3:
        try:
            sub, _ = biplot_select(
                closure(W[:, idx]),
                g[idx],
                angle_tolerance=options.angle_tolerance,
                min_length_fraction=options.min_length_fraction,
                scaling=options.biplot_scaling,
            )
        except ZeroVariation:
            return idx, sel.sub_weights
        return idx[list(sub.included)], sub.sub_weights
    return idx, sel.sub_weights


def _method_weights(method, history, epsilon, cas_options):
    J = history.J
    if method == "AVE":
        return np.arange(J), uniform(J)
    if method == "E_STC":
        return np.arange(J), euclidean_stc_weights(history, history.T, epsilon).weights
    if method == "S_STC":
        W = weight_matrix(accuracy(history.forecasts, history.actuals, epsilon))
        return np.arange(J), center(W)
    if method == "CAS":
        return cas_weights(history, cas_options, epsilon)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def rolling_evaluate(panel, methods=("AVE", "S_STC", "CAS"), scheme=None, epsilon=DEFAULT_EPSILON,
                     cas_options=CasOptions()):
    """Rolling out-of-sample one-step-ahead combinations for one seasonal panel.

    For each target period the weights are estimated from the rows strictly
    before it and applied to that period's forecasts; the next target then
    sees one more realized row. ``scheme`` defaults to evaluating only the
    final period.
    """
    if scheme is None:
        scheme = RollingScheme(train_end=panel.times[-2] if panel.T > 1 else panel.times[0] - 1)
    targets = scheme.targets(panel.times)
    T_train = sum(1 for t in panel.times if t <= scheme.train_end)
    result = RollingResult(
        variable=panel.variable,
        sample=panel.sample,
        season=panel.season,
        J=panel.J,
        T_train=T_train,
        times=targets,
        actuals=np.array([panel.actuals[panel.index_of(t)] for t in targets]),
        forecasts={m: [] for m in methods},
    )
    for tau in targets:
        history = panel.rows_before(tau)
        if history.T < 1:
            raise ValueError(f"no history before period {tau}")
        row = panel.forecasts[panel.index_of(tau)]
        for method in methods:
            idx, w = _method_weights(method, history, epsilon, cas_options)
            if method == "AVE":
                value = average_forecast(row)
            else:
                value = combine_row(w, row[idx])
            result.forecasts[method].append(
                CombinationForecast(
                    method=method,
                    time=tau,
                    value=value,
                    weights_used=w,
                    included_ids=tuple(panel.forecaster_ids[i] for i in idx),
                )
            )
    return result


@dataclass(frozen=True)
class Metrics:
    ME: float
    RMSE: float
    MAPE: float
    MdAPE: float
    n: int
    zero_actual: bool = False

    def get(self, name):
        return getattr(self, name)

    def as_dict(self):
        return {m: self.get(m) for m in METRICS}


def accuracy_metrics(forecasts, actuals, strict=False):
    """ME, RMSE, MAPE and MdAPE (both in percent) of one forecast series.

    Errors are forecast minus actual. With a zero actual the percentage
    metrics are NaN and ``zero_actual`` is set, unless ``strict`` in which
    case :class:`ZeroActual` is raised.
    """
    f = np.asarray(forecasts, dtype=np.float64)
    y = np.asarray(actuals, dtype=np.float64)
    if f.shape != y.shape or f.ndim != 1 or f.size < 1:
        raise ValueError("forecasts and actuals must be equal-length non-empty vectors")
    e = f - y
    me = float(e.mean())
    rmse = float(np.sqrt(np.mean(e ** 2)))
    zero = bool(np.any(y == 0))
    if zero:
        if strict:
            raise ZeroActual("percentage errors are undefined with a zero actual")
        mape = mdape = math.nan
    else:
        ape = 100.0 * np.abs(e) / np.abs(y)
        mape, mdape = float(ape.mean()), float(np.median(ape))
    return Metrics(ME=me, RMSE=rmse, MAPE=mape, MdAPE=mdape, n=int(f.size), zero_actual=zero)


@dataclass(frozen=True)
class MsfeDecomposition:
    msfe: float
    bias_prop: float
    var_prop: float
    cov_prop: float
    case: int = None

    @property
    def proportions(self):
        return (self.bias_prop, self.var_prop, self.cov_prop)


def classify_case(d, bias_cut=0.3, var_cut=0.3):
    """Rank a decomposition into the four bias/variance situations.

    1: low bias, low variance; 2: low bias, high variance;
    3: high bias, high variance; 4: high bias, low variance.
    """
    bias, var = (d.bias_prop, d.var_prop) if isinstance(d, MsfeDecomposition) else d[:2]
    high_bias, high_var = bias >= bias_cut, var >= var_cut
    if not high_bias:
        return 2 if high_var else 1
    return 3 if high_var else 4


def msfe_decomposition(forecasts, actuals, bias_cut=0.3, var_cut=0.3):
    """Split the mean squared forecast error into bias, variance and covariance shares.

    Uses population (divide-by-H) moments so that
    ``msfe = (mean_f - mean_y)**2 + (sd_f - sd_y)**2 + 2 sd_f sd_y (1 - corr)``
    holds exactly. When either series is constant the correlation is
    undefined and the covariance term is 0.
    """
    f = np.asarray(forecasts, dtype=np.float64)
    y = np.asarray(actuals, dtype=np.float64)
    if f.shape != y.shape or f.ndim != 1 or f.size < 2:
        raise ValueError("need two equal-length series with at least 2 points")
    e = f - y
    msfe = float(np.mean(e ** 2))
    if msfe == 0:
        raise ZeroMsfe("forecasts are perfect; MSFE proportions are undefined")
    # every share is built from the errors themselves, rescaled, so that
    # tiny errors on large series do not cancel away
    c = np.abs(e).max()
    df, dy = f - f.mean(), y - y.mean()
    sf, sy = np.sqrt(np.mean(df ** 2)), np.sqrt(np.mean(dy ** 2))
    eb = e.mean() / c
    de = (e - e.mean()) / c
    bias = eb ** 2
    spread = np.mean(de ** 2)
    if sf == 0 or sy == 0:
        var, cov = spread, 0.0
    else:
        # sd_f - sd_y = (var_f - var_y) / (sd_f + sd_y), with var_f - var_y = mean(de (df + dy))
        var = (np.mean(de * (df + dy)) / (sf + sy)) ** 2
        cov = spread - var
    total = bias + spread
    bias, var, cov = bias / total, var / total, cov / total
    d = MsfeDecomposition(msfe=msfe, bias_prop=float(bias), var_prop=float(var), cov_prop=float(cov))
    return MsfeDecomposition(msfe, d.bias_prop, d.var_prop, d.cov_prop, classify_case(d, bias_cut, var_cut))


def coefficient_of_variation(row):
    """Sample standard deviation across forecasters over the absolute mean."""
    x = np.asarray(row, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least two forecasts")
    mean = x.mean()
    if mean == 0:
        raise ZeroMean("coefficient of variation is undefined for a zero mean")
    return float(x.std(ddof=1) / abs(mean))


def stratum(J, T):
    if J < T:
        return "J<T"
    if J > T:
        return "J>T"
    return "J=T"


def pick_winner(metric, values, preference=TIE_PREFERENCE):
    """Method with the best value; ME is judged by magnitude.

    NaN values never win. Exact ties go to the earliest method in
    ``preference``. Returns ``None`` if no method has a finite value.
    """
    scored = {}
    for method, v in values.items():
        if v is None or not math.isfinite(v):
            continue
        scored[method] = abs(v) if metric == "ME" else v
    if not scored:
        return None
    best = min(scored.values())
    tied = [m for m, v in scored.items() if v == best]
    rank = {m: i for i, m in enumerate(preference)}
    return min(tied, key=lambda m: (rank.get(m, len(rank)), m))


@dataclass
class BeatTable:
    """Which method won each (variable, sample, period, metric) cell."""

    methods: tuple
    rows: list = field(default_factory=list)
    # published overall counts, used for the TOTAL line instead of the stratum sums
    overall: dict = None

    VARYING = ("S_STC", "CAS")

    @classmethod
    def from_counts(cls, counts, methods=None):
        """Build a table from ``{stratum: {method: count}}`` totals alone.

        A ``"TOTAL"`` entry is kept as given rather than re-derived, since
        published tables do not always have rows that add up to their total.
        """
        counts = dict(counts)
        overall = counts.pop("TOTAL", None)
        if methods is None:
            seen = list(counts.values()) + ([overall] if overall else [])
            methods = tuple(m for m in TIE_PREFERENCE if any(m in c for c in seen))
        rows = []
        for st, per_method in counts.items():
            for method, n in per_method.items():
                rows.extend(
                    {"variable": "", "sample": "", "period": "", "metric": "", "stratum": st, "winner": method}
                    for _ in range(int(n))
                )
        if overall is not None:
            overall = {m: int(overall.get(m, 0)) for m in methods}
        return cls(methods=tuple(methods), rows=rows, overall=overall)

    def counts(self, by=("stratum",)):
        out = defaultdict(Counter)
        for r in self.rows:
            out[tuple(r[k] for k in by)][r["winner"]] += 1
        return {k: {m: c.get(m, 0) for m in self.methods} for k, c in sorted(out.items())}

    def percentages(self, by=("stratum",), decimals=2):
        out = {}
        for key, c in self.counts(by).items():
            total = sum(c.values())
            out[key] = {m: round(100.0 * n / total, decimals) for m, n in c.items()}
        return out

    def summary(self, decimals=2):
        """Stratified counts and percentages with SIMPLEX and TOTAL columns.

        SIMPLEX adds up the varying-weight simplex methods. The TOTAL column
        holds each stratum's count and its share of all cells.
        """
        grand = len(self.rows)
        strata = self.counts(("stratum",))
        lines = []
        overall = Counter()
        for (st,), c in strata.items():
            overall.update(c)
            lines.append(self._summary_line(st, c, grand, decimals))
        total = self.overall or {m: overall.get(m, 0) for m in self.methods}
        lines.append(self._summary_line("TOTAL", total, grand, decimals))
        return lines

    def _summary_line(self, label, c, grand, decimals):
        total = sum(c.values())
        simplex = sum(c.get(m, 0) for m in self.VARYING if m in self.methods)
        pct = {m: round(100.0 * n / total, decimals) if total else math.nan for m, n in c.items()}
        return {
            "stratum": label,
            "counts": dict(c),
            "percent": pct,
            "SIMPLEX": simplex,
            "SIMPLEX_percent": round(100.0 * simplex / total, decimals) if total else math.nan,
            "TOTAL": total,
            "TOTAL_percent": round(100.0 * total / grand, decimals) if grand else math.nan,
        }


def beat_table(cells, methods=("AVE", "S_STC", "CAS")):
    """Tally winners over evaluation cells.

    Each cell is a mapping with ``variable``, ``sample``, ``metric``, ``J``,
    ``T`` (the training length), an optional ``period`` and ``values``
    (``{method: metric value}``). Cells where no method has a finite value
    are skipped.
    """
    table = BeatTable(methods=tuple(methods))
    for cell in cells:
        values = {m: cell["values"].get(m) for m in methods}
        winner = pick_winner(cell["metric"], values)
        if winner is None:
            continue
        table.rows.append(
            {
                "variable": cell["variable"],
                "sample": cell["sample"],
                "period": cell.get("period", ""),
                "metric": cell["metric"],
                "stratum": stratum(cell["J"], cell["T"]),
                "winner": winner,
            }
        )
    return table
