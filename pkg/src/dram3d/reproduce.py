"""Golden checks of model outputs against reference values.

A checks file is JSON: ``{"checks": [...]}``; each entry names a metric at
an evaluation point and either an ``expected`` value with ``abs_tol`` or
``rel_tol``, or a ``max``/``min`` bound. Optional keys:

* ``relative_to``   divide by the same metric of another profile
* ``v_sense_from``  sense with another profile's calibrated level
* ``density``       for ``layers_for_density``, the target in Gb/mm^2
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from typing import Any, Mapping

from .projection import evaluate_profile, layers_for_density
from .scenario import Scenario

EXPECTED_RESULTS = "expected_results.json"

_KEYS = {"name", "metric", "profile", "layers", "scheme", "relative_to", "v_sense_from",
         "density", "expected", "abs_tol", "rel_tol", "max", "min", "note"}


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    criterion: str
    passed: bool


def load_checks(text: str | None = None) -> list[dict[str, Any]]:
    if text is None:
        text = resources.files("dram3d").joinpath("data", EXPECTED_RESULTS).read_text(encoding="utf-8")
    checks = json.loads(text)["checks"]
    for c in checks:
        unknown = set(c) - _KEYS
        if unknown:
            raise ValueError(f"check {c.get('name')!r}: unknown keys {sorted(unknown)}")
    return checks


def _metric(s: Scenario, check: Mapping[str, Any], profile: str) -> float:
    metric = check["metric"]
    if metric == "layers_for_density":
        cfg = s.config(profile)
        return float(layers_for_density(cfg.profile, cfg.topology, cfg.array_efficiency,
                                        check["density"]))
    if "v_sense_from" in check:
        donor = s.operating_point[check["v_sense_from"]].sense_level
        ops = dict(s.operating_point)
        ops[profile] = dataclasses.replace(ops[profile], v_sense=donor)
        s = dataclasses.replace(s, operating_point=ops)
    layers = check.get("layers") if s.profile(profile).is_3d else None
    r = evaluate_profile(s, profile, layers, check.get("scheme"))
    if metric == "e_read_write":
        return r.e_read + r.e_write
    value = getattr(r, metric)
    if value is None:
        raise ValueError(f"metric {metric!r} not defined for {profile}")
    return float(value)


def run_check(s: Scenario, check: Mapping[str, Any]) -> CheckResult:
    value = _metric(s, check, check["profile"])
    if "relative_to" in check:
        base = dict(check)
        base.pop("layers", None)
        base.pop("scheme", None)
        value /= _metric(s, base, check["relative_to"])
    if "expected" in check:
        exp = check["expected"]
        if "rel_tol" in check:
            tol = check["rel_tol"] * abs(exp)
            crit = f"{exp:g} +/- {100 * check['rel_tol']:g}%"
        else:
            tol = check.get("abs_tol", 0.0)
            crit = f"{exp:g} +/- {tol:g}"
        ok = abs(value - exp) <= tol + 1e-12 * abs(exp)
    elif "max" in check:
        ok, crit = value <= check["max"], f"<= {check['max']:g}"
    else:
        ok, crit = value >= check["min"], f">= {check['min']:g}"
    return CheckResult(check["name"], value, crit, ok)


def run_checks(s: Scenario, checks: list[Mapping[str, Any]] | None = None) -> list[CheckResult]:
    if checks is None:
        checks = load_checks()
    return [run_check(s, c) for c in checks]
