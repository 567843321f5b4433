"""Bounded least-squares fitting of model parameters to anchor values.

The engine is generic: it sees a vector of named parameters and a function
returning one relative residual per anchor. It first probes which
parameters move which anchors (finite differences), then peels off
parameters that are pinned by anchors depending on no other unsolved
parameter. A single parameter pinned by a single monotone anchor is solved
by bisection; anything still coupled afterwards goes through cyclic
coordinate descent with a golden-section line search per coordinate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

__all__ = [
    "FreeParameter",
    "Calibration",
    "CalibrationError",
    "InsensitiveParameterError",
    "fit",
]

log = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5) - 1) / 2
_SENS_STEP = 1e-6
_SENS_FLOOR = 1e-12


class CalibrationError(ValueError):
    pass


class InsensitiveParameterError(CalibrationError):
    def __init__(self, name: str):
        self.parameter = name
        super().__init__(f"free parameter {name!r} does not influence any anchor")


@dataclass(frozen=True)
class FreeParameter:
    name: str
    value: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise CalibrationError(f"{self.name}: lower bound must be below upper bound")

    def clip(self, x: float) -> float:
        return min(max(x, self.lower), self.upper)


@dataclass
class Calibration:
    free_parameters: dict[str, FreeParameter]
    residuals: dict[str, float]
    converged: bool
    sweeps: int = 0
    plan: list[tuple[tuple[str, ...], tuple[str, ...], str]] = field(default_factory=list)

    @property
    def values(self) -> dict[str, float]:
        return {k: p.value for k, p in self.free_parameters.items()}


ResidualFn = Callable[[Mapping[str, float]], Mapping[str, float]]


def _golden_min(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    width_tol = tol * max(abs(lo), abs(hi), 1e-300)
    while b - a > width_tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = (a + b) / 2
    # optimum on a bound: golden section only approaches it
    best = min(((f(x), 1, x), (f(lo), 0, lo), (f(hi), 2, hi)))
    return best[2]


def _bisect(g: Callable[[float], float], lo: float, hi: float, glo: float, tol: float) -> float:
    while hi - lo > tol * max(abs(lo), abs(hi), 1e-300):
        mid = (lo + hi) / 2
        gm = g(mid)
        if gm == 0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return (lo + hi) / 2


def _sensitivity(residuals: ResidualFn, params: Sequence[FreeParameter],
                 values: dict[str, float], anchors: Sequence[str]) -> dict[str, set[str]]:
    """Map anchor -> set of parameters that move its residual.

    Each parameter is nudged at its start value and, to get past stationary
    points, at its bounds and midpoint; the others stay at their start.
    """
    base = residuals(values)
    deps: dict[str, set[str]] = {a: set() for a in anchors}
    for p in params:
        span = p.upper - p.lower
        hit = False
        for x in (values[p.name], p.lower, p.upper, (p.lower + p.upper) / 2):
            h = _SENS_STEP * max(span, abs(x))
            x2 = x + h if x + h <= p.upper else x - h
            at = base if x == values[p.name] else residuals({**values, p.name: x})
            r = residuals({**values, p.name: x2})
            for a in anchors:
                if abs(r[a] - at[a]) > _SENS_FLOOR * max(1.0, abs(at[a])):
                    deps[a].add(p.name)
                    hit = True
            if hit:
                break
        if not hit:
            raise InsensitiveParameterError(p.name)
    return deps


def fit(residuals: ResidualFn, params: Sequence[FreeParameter],
        weights: Mapping[str, float], *, step_tol: float = 1e-6, max_sweeps: int = 200,
        line_tol: float = 1e-13) -> Calibration:
    """Minimise sum(w_a * r_a^2) over bounded parameters.

    ``residuals`` maps a full parameter assignment to relative residuals for
    every anchor named in ``weights``. Anchors with zero weight are
    reported but never fitted.
    """
    anchors = [a for a, w in weights.items() if w > 0]
    values = {p.name: p.clip(p.value) for p in params}
    by_name = {p.name: p for p in params}
    if not params:
        r = dict(residuals(values))
        return Calibration({}, r, converged=True)

    deps = _sensitivity(residuals, params, values, anchors)

    def objective(anchor_set, vals):
        r = residuals(vals)
        return sum(weights[a] * r[a] ** 2 for a in anchor_set)

    plan: list[tuple[tuple[str, ...], tuple[str, ...], str]] = []
    unsolved = [p.name for p in params]
    while True:
        for name in unsolved:
            pinned = [a for a in anchors if deps[a] & set(unsolved) == {name}]
            if pinned:
                break
        else:
            break
        unsolved.remove(name)
        p = by_name[name]
        method = "golden"
        if len(pinned) == 1:
            a = pinned[0]

            def g(x, a=a, name=name):
                return residuals({**values, name: x})[a]

            glo, ghi = g(p.lower), g(p.upper)
            if glo == 0:
                values[name], method = p.lower, "bisection"
            elif ghi == 0:
                values[name], method = p.upper, "bisection"
            elif (glo > 0) != (ghi > 0):
                values[name] = _bisect(g, p.lower, p.upper, glo, 1e-15)
                method = "bisection"
        if method == "golden":
            values[name] = _golden_min(
                lambda x, name=name, pinned=pinned: objective(pinned, {**values, name: x}),
                p.lower, p.upper, line_tol)
        plan.append(((name,), tuple(pinned), method))

    converged = True
    sweeps = 0
    if unsolved:
        block = [a for a in anchors if deps[a] & set(unsolved)]
        plan.append((tuple(unsolved), tuple(block), "coordinate_descent"))
        converged = False
        for sweeps in range(1, max_sweeps + 1):
            max_step = 0.0
            for name in unsolved:
                p = by_name[name]
                old = values[name]
                values[name] = _golden_min(
                    lambda x, name=name: objective(block, {**values, name: x}),
                    p.lower, p.upper, line_tol)
                max_step = max(max_step, abs(values[name] - old) / max(abs(old), 1e-300))
            log.debug("sweep %d: max relative step %.3g", sweeps, max_step)
            if max_step < step_tol:
                converged = True
                break

    fitted = {n: FreeParameter(n, values[n], by_name[n].lower, by_name[n].upper) for n in values}
    return Calibration(fitted, dict(residuals(values)), converged, sweeps, plan)
