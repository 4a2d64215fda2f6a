"""Experiment configs, dispatch, and deterministic CSV/JSON reporting.

Every experiment is a pure function of its config: sampling is keyed by
(seed, trial, position) counter streams, rows are sorted by trial index, and
floats are printed with 17 significant digits, so re-running a config gives
byte-identical CSV.  Wall-clock time lives in the JSON report only.
"""

from __future__ import annotations

import json
import numbers
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bounds import run_bounds_suite
from .codes import (iid_measure, known_support_code, pattern_code, redundancy)
from .dwc import premature_probability
from .insure import relationship_demos, run_insurance
from .quantize import (Quantization, b_class_quantization,
                       fh_class_quantization, uniform_class_quantization)
from .sources import (BMember, FhMember, SourceSpec, Uniform, make_pmf,
                      spec_from_json, spec_to_json)

__all__ = [
    "ConfigError", "ExperimentConfig", "ExperimentReport",
    "config_from_json", "run", "emit", "KINDS",
]

KINDS = ("bounds-suite", "phi-run", "premature", "redundancy-curve",
         "insure", "demo")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    class_tag: str | None = None
    source: SourceSpec | None = None
    delta: float = 0.1
    eta: float = 0.05
    trials: int = 200
    horizon: int = 100_000
    caps: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "class": self.class_tag,
            "source": spec_to_json(self.source) if self.source else None,
            "delta": self.delta,
            "eta": self.eta,
            "trials": self.trials,
            "horizon": self.horizon,
            "caps": dict(self.caps),
            "params": dict(self.params),
        }


def config_from_json(obj: dict) -> ExperimentConfig:
    try:
        kind = obj["kind"]
        seed = obj["seed"]
    except (TypeError, KeyError) as e:
        raise ConfigError(f"config needs 'kind' and 'seed': missing {e}")
    source = obj.get("source")
    return ExperimentConfig(
        kind=kind,
        seed=int(seed),
        class_tag=obj.get("class"),
        source=spec_from_json(source) if source else None,
        delta=float(obj.get("delta", 0.1)),
        eta=float(obj.get("eta", 0.05)),
        trials=int(obj.get("trials", 200)),
        horizon=int(obj.get("horizon", 100_000)),
        caps=dict(obj.get("caps", {})),
        params=dict(obj.get("params", {})),
    )


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    header: str
    rows: tuple
    aggregates: dict
    wall_clock_s: float
    version: str = __version__


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


_NEEDS_CLASS = {"phi-run", "premature", "insure"}


def build_quantization(class_tag: str, caps: dict) -> Quantization:
    if class_tag == "uniform":
        return uniform_class_quantization(
            max_symbol=int(caps.get("max_symbol", 64)))
    if class_tag == "rare-spike":
        return b_class_quantization(level_cap=int(caps.get("level_cap", 6)))
    if class_tag == "contaminated-uniform":
        return fh_class_quantization(
            base_cap=int(caps.get("base_cap", 4)),
            span_cap=int(caps.get("span_cap", 4)))
    raise ConfigError(f"unknown class tag {class_tag!r}; expected one of "
                      "uniform, rare-spike, contaminated-uniform")


def _check_in_class(class_tag: str, source: SourceSpec, caps: dict) -> None:
    if class_tag == "uniform":
        cap = int(caps.get("max_symbol", 64))
        if not isinstance(source, Uniform):
            raise ConfigError(
                f"class 'uniform' takes a uniform source, got {source!r}")
        if not 1 <= source.lo <= source.hi <= cap:
            raise ConfigError(
                f"uniform({source.lo},{source.hi}) outside 1..{cap}")
    elif class_tag == "rare-spike":
        if not isinstance(source, BMember):
            raise ConfigError(
                f"class 'rare-spike' takes a rare-spike member, got {source!r}")
    elif class_tag == "contaminated-uniform":
        if not isinstance(source, FhMember):
            raise ConfigError(
                f"class 'contaminated-uniform' takes a contaminated block "
                f"member, got {source!r}")


def validate(config: ExperimentConfig) -> None:
    if config.kind not in KINDS:
        raise ConfigError(
            f"unknown kind {config.kind!r}; expected one of {', '.join(KINDS)}")
    if config.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if not 0.0 < config.delta:
        raise ConfigError(f"delta must be positive, got {config.delta}")
    if not 0.0 < config.eta < 1.0:
        raise ConfigError(f"eta must be in (0, 1), got {config.eta}")
    if config.trials < 0 or config.horizon < 0:
        raise ConfigError("trials and horizon must be nonnegative")
    if config.kind in _NEEDS_CLASS:
        if config.class_tag is None:
            raise ConfigError(f"kind {config.kind!r} needs a class tag")
        if config.source is None:
            raise ConfigError(f"kind {config.kind!r} needs a source")
        _check_in_class(config.class_tag, config.source, config.caps)
        try:
            make_pmf(config.source)
        except ValueError as e:
            raise ConfigError(f"invalid source: {e}")
    if config.kind == "redundancy-curve":
        if config.source is None:
            raise ConfigError("redundancy-curve needs a source")
        code = config.params.get("code", "self")
        if code not in ("self", "kt", "pattern"):
            raise ConfigError(
                f"params.code must be self | kt | pattern, got {code!r}")


# ---------------------------------------------------------------------------
# runners (header, rows, aggregates)
# ---------------------------------------------------------------------------


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, numbers.Integral):
        return str(int(x))
    if isinstance(x, numbers.Real):
        return format(float(x), ".17g")
    return str(x).replace(",", "|")


def _run_bounds(config):
    reports = run_bounds_suite(seed=config.seed)
    header = "bound_name,parameters,bound_value,observed_value,size,violated"
    rows = [r.csv_row() for r in reports]
    return header, rows, {"checks": len(reports),
                          "violations": sum(r.violated for r in reports)}


def _phi_report(config):
    quant = build_quantization(config.class_tag, config.caps)
    return premature_probability(config.source, quant, None, config.delta,
                                 config.eta, config.trials, config.horizon,
                                 config.seed)


PHI_HEADER = "trial,entered,entry_time,trap_index,premature,indeterminate"


def _run_phi(config):
    if config.trials == 0:
        return PHI_HEADER, [], {"undefined": True}
    rep = _phi_report(config)
    rows = [(o.trial, o.entered, o.entry_time, o.trap_index, o.premature,
             o.indeterminate) for o in rep.outcomes]
    agg = {"entered_count": rep.entered_count,
           "entry_fraction": rep.entry_fraction,
           "premature_fraction": rep.premature_fraction,
           "indeterminate_count": rep.indeterminate_count}
    return PHI_HEADER, rows, agg


def _run_premature(config):
    header = "metric,value"
    if config.trials == 0:
        return header, [], {"undefined": True}
    rep = _phi_report(config)
    entries = [o.entry_time for o in rep.outcomes if o.entry_time is not None]
    rows = [
        ("entered_count", rep.entered_count),
        ("entry_fraction", rep.entry_fraction),
        ("premature_count", rep.premature_count),
        ("premature_fraction", rep.premature_fraction),
        ("indeterminate_count", rep.indeterminate_count),
        ("min_entry_time", min(entries) if entries else None),
        ("max_entry_time", max(entries) if entries else None),
    ]
    return header, rows, dict(rows)


def _redundancy_measure(config, p):
    code = config.params.get("code", "self")
    if code == "self":
        return iid_measure(p)
    if code == "kt":
        return known_support_code(p.support)
    return pattern_code()


def _run_redundancy(config):
    header = "n,redundancy,ci_halfwidth,mode"
    p = make_pmf(config.source)
    measure = _redundancy_measure(config, p)
    ns = [int(n) for n in config.params.get("ns", (256, 1024, 4096))]
    mode = config.params.get("mode", "exact")
    rows = []
    for n in sorted(ns):
        rep = redundancy(config.source, measure, n, mode=mode,
                         trials=config.trials or 200, seed=config.seed)
        rows.append((n, rep.value, rep.ci_halfwidth, rep.mode))
    agg = {"max_redundancy": max(r[1] for r in rows) if rows else None,
           "monotone_decreasing": all(a[1] >= b[1] for a, b in
                                      zip(rows, rows[1:]))}
    return header, rows, agg


def _run_insure(config):
    header = "trial,entry_time,premium_at_entry,violations,ruined"
    if config.trials == 0:
        return header, [], {"undefined": True}
    quant = build_quantization(config.class_tag, config.caps)
    rep = run_insurance(config.source, quant, config.eta, config.trials,
                        config.horizon, config.seed)
    rows = [(r.trial, r.entry_time, r.premium_at_entry, r.violations,
             r.ruined) for r in rep.rows]
    agg = {"entered_count": rep.entered_count,
           "violation_total": rep.violation_total,
           "ruin_fraction": rep.ruin_fraction,
           "ruin_allowance_plus_se": rep.ruin_allowance_plus_se()}
    return header, rows, agg


def _run_demo(config):
    rep = relationship_demos(seed=config.seed)
    rows = [(r.quadrant, r.label, r.value) for r in rep.rows]
    return "quadrant,label,value", rows, {"rows": len(rows)}


_RUNNERS = {
    "bounds-suite": _run_bounds,
    "phi-run": _run_phi,
    "premature": _run_premature,
    "redundancy-curve": _run_redundancy,
    "insure": _run_insure,
    "demo": _run_demo,
}


def run(config: ExperimentConfig) -> ExperimentReport:
    """Validate, dispatch, and time one experiment."""
    validate(config)
    t0 = time.perf_counter()
    header, rows, aggregates = _RUNNERS[config.kind](config)
    return ExperimentReport(config=config, header=header, rows=tuple(rows),
                            aggregates=aggregates,
                            wall_clock_s=time.perf_counter() - t0)


def emit(report: ExperimentReport, fmt: str = "csv") -> bytes:
    """CSV: documented header plus one line per row, '.' decimals, floats at
    17 significant digits.  JSON mirrors the full report (including timing,
    which is why only the CSV is byte-stable)."""
    if fmt == "csv":
        lines = [report.header]
        for row in report.rows:
            if isinstance(row, str):
                lines.append(row)
            else:
                lines.append(",".join(_cell(x) for x in row))
        return ("\n".join(lines) + "\n").encode()
    if fmt == "json":
        doc = {
            "config": report.config.to_json(),
            "header": report.header.split(","),
            "rows": [row if isinstance(row, str) else
                     [None if x is None else
                      (int(x) if isinstance(x, (bool, np.bool_,
                                                numbers.Integral))
                       else float(x) if isinstance(x, numbers.Real) else x)
                      for x in row]
                     for row in report.rows],
            "aggregates": {k: (None if v is None else
                               (int(v) if isinstance(v, (bool, np.bool_,
                                                         numbers.Integral))
                                else float(v) if isinstance(v, numbers.Real)
                                else v))
                           for k, v in report.aggregates.items()},
            "wall_clock_s": report.wall_clock_s,
            "version": report.version,
        }
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}; expected csv or json")
