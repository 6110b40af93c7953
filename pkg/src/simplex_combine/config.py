"""Declarative run configuration (JSON or YAML)."""
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .combine import METHODS
from .errors import ConfigError
from .evaluation import METRICS, CasOptions
from .panel import FillPolicy
from .weights import DEFAULT_EPSILON

__all__ = ["RunConfig", "load_config"]

KNOWN_KEYS = {
    "survey", "actuals", "schema", "variables", "samples", "frequency", "fill_policy", "epsilon",
    "methods", "cas", "evaluation", "metrics", "beat_by", "case_cuts", "out", "seed", "jobs", "plots",
}


@dataclass(frozen=True)
class RunConfig:
    survey: Path
    variables: tuple
    samples: dict
    eval_end: int
    actuals: Path = None
    schema: dict = field(default_factory=dict)
    frequency: int = 4
    fill_policy: FillPolicy = FillPolicy()
    epsilon: float = DEFAULT_EPSILON
    methods: tuple = ("AVE", "S_STC", "CAS")
    cas: CasOptions = CasOptions()
    metrics: tuple = METRICS
    beat_by: str = "sample"
    bias_cut: float = 0.3
    var_cut: float = 0.3
    out: Path = Path("run")
    seed: int = 0
    jobs: int = 1
    plots: bool = True

    def validate(self):
        if not self.survey.is_file():
            raise ConfigError(f"survey file not found: {self.survey}")
        if self.actuals is not None and not self.actuals.is_file():
            raise ConfigError(f"actuals file not found: {self.actuals}")
        for name, (start, end) in self.samples.items():
            if not start <= end:
                raise ConfigError(f"sample {name!r} window {start}-{end} is not well ordered")
            if end >= self.eval_end:
                raise ConfigError(f"sample {name!r} ends at {end}, not before the evaluation end {self.eval_end}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown method(s) {sorted(unknown)}; choose from {METHODS}")
        if "AVE" not in self.methods:
            raise ConfigError("the AVE benchmark must be among the methods")
        bad = set(self.metrics) - set(METRICS)
        if bad:
            raise ConfigError(f"unknown metric(s) {sorted(bad)}; choose from {METRICS}")
        if self.beat_by not in ("sample", "period"):
            raise ConfigError("beat_by must be 'sample' or 'period'")
        if self.frequency < 1:
            raise ConfigError("frequency must be >= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    def with_overrides(self, **kwargs):
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        cas_keys = {k: kwargs.pop(k) for k in list(kwargs) if k in ("mode", "linkage", "k")}
        cfg = replace(self, **kwargs)
        if cas_keys:
            try:
                cfg = replace(cfg, cas=replace(cfg.cas, **cas_keys))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return cfg

    def to_dict(self):
        d = asdict(self)
        d["survey"] = str(self.survey)
        d["actuals"] = str(self.actuals) if self.actuals else None
        d["out"] = str(self.out)
        d["samples"] = {k: list(v) for k, v in self.samples.items()}
        return d


def _read(path):
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        return yaml.safe_load(text) or {}
    return json.loads(text)


def load_config(path):
    """Parse a config file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        raw = _read(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    base = path.parent

    def resolve(p):
        return None if p is None else (base / p if not Path(p).is_absolute() else Path(p))

    try:
        evaluation = raw.get("evaluation") or {}
        cuts = raw.get("case_cuts") or {}
        cfg = RunConfig(
            survey=resolve(raw["survey"]),
            actuals=resolve(raw.get("actuals")),
            schema=dict(raw.get("schema") or {}),
            variables=tuple(raw.get("variables") or ()),
            samples={str(k): (int(v[0]), int(v[1])) for k, v in (raw.get("samples") or {}).items()},
            eval_end=int(evaluation["end"]),
            frequency=int(raw.get("frequency", 4)),
            fill_policy=FillPolicy(**(raw.get("fill_policy") or {})),
            epsilon=float(raw.get("epsilon", DEFAULT_EPSILON)),
            methods=tuple(raw.get("methods") or ("AVE", "S_STC", "CAS")),
            cas=CasOptions(**(raw.get("cas") or {})),
            metrics=tuple(raw.get("metrics") or METRICS),
            beat_by=raw.get("beat_by", "sample"),
            bias_cut=float(cuts.get("bias", 0.3)),
            var_cut=float(cuts.get("variance", 0.3)),
            out=resolve(raw.get("out", "run")),
            seed=int(raw.get("seed", 0)),
            jobs=int(raw.get("jobs", 1)),
            plots=bool(raw.get("plots", True)),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg
