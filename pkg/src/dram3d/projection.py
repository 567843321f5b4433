"""Density and stack-height scaling, full-metric evaluation of a config,
layer sweeps, multi-config comparison and anchor calibration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from . import calibration as _cal
from .electrical import (
    DisturbWorkload,
    OperatingPoint,
    TimingModel,
    energy_per_bit,
    margin_after_disturb,
    row_cycle_time,
    sense_margin,
)
from .scenario import CalibrationAnchor, Scenario
from .tech_profile import TechnologyProfile
from .topology import (
    D1B_BLSA_AREA_UM2,
    DEFAULT_MIN_PITCH_UM,
    ArrayConfig,
    RoutingTopology,
    blsa_area,
    effective_bl_capacitance,
    feasibility,
    hcb_pitch,
)
from .units import GBIT, MM2, NM, UM

__all__ = [
    "REFERENCE_DENSITY",
    "REFERENCE_BLSA_AREA",
    "bit_density",
    "stack_height",
    "layers_for_density",
    "EvaluationReport",
    "REPORT_COLUMNS",
    "evaluate",
    "evaluate_profile",
    "sweep",
    "sweep_profile",
    "observe",
    "calibrate",
    "ComparisonTable",
    "compare_report",
]

# planar baseline values are reference inputs, not computed; the 3D target is ~6x D1b
REFERENCE_DENSITY = {"d1b": 2.6 / 6}
REFERENCE_BLSA_AREA = {"d1b": D1B_BLSA_AREA_UM2}


def _density_per_layer(profile: TechnologyProfile, efficiency: float) -> float:
    g = profile.geometry
    cell_mm2 = g.x_pitch * g.y_pitch * NM ** 2 / MM2
    return efficiency / cell_mm2 / GBIT


def bit_density(config: ArrayConfig) -> float:
    """Gb/mm^2: one bit per X*Y footprint per layer, times array efficiency.

    Planar profiles return their reference density (NaN if none).
    """
    p = config.profile
    if not p.is_3d:
        return REFERENCE_DENSITY.get(p.name, math.nan)
    return config.n_layers * _density_per_layer(p, config.array_efficiency)


def stack_height(config: ArrayConfig) -> float:
    """Total cell-stack height in um."""
    p = config.profile
    if not p.is_3d or p.geometry.z_pitch is None:
        raise ValueError(f"{p.name}: stack height needs a stacked3d profile with z_pitch")
    return config.n_layers * p.geometry.z_pitch * NM / UM


def layers_for_density(profile: TechnologyProfile, topology: RoutingTopology,
                       efficiency: float, target: float) -> int:
    """Smallest layer count whose density reaches ``target`` Gb/mm^2."""
    if target <= 0:
        raise ValueError("target density must be > 0")
    if not profile.is_3d:
        raise ValueError("layer count only applies to stacked3d profiles")
    exact = target / _density_per_layer(profile, efficiency)
    # absorb round-off so an exactly calibrated efficiency lands on its layer count
    n = max(1, math.ceil(exact * (1 - 1e-9)))
    return n


REPORT_COLUMNS = (
    "profile", "scheme", "n_layers",
    "c_bl_effective", "sense_margin", "margin_after_disturb",
    "t_rc", "t_wordline", "t_bitline", "t_sense", "t_restore", "t_overhead",
    "e_read", "e_write",
    "hcb_pitch", "blsa_area", "bit_density", "stack_height",
    "feasibility", "pitch_margin",
)


@dataclass(frozen=True)
class EvaluationReport:
    profile: str
    scheme: str
    n_layers: int | None
    c_bl_effective: float
    sense_margin: float
    margin_after_disturb: float
    t_rc: float
    t_rc_stages: dict[str, float]
    e_read: float
    e_write: float
    hcb_pitch: float | None
    blsa_area: float | None
    bit_density: float | None
    stack_height: float | None
    feasibility: str
    pitch_margin: float | None
    provenance: dict[str, float] = field(default_factory=dict)

    def row(self) -> dict[str, Any]:
        """Flat record in ``REPORT_COLUMNS`` order."""
        s = self.t_rc_stages
        d = dataclasses.asdict(self)
        d.update({"t_wordline": s["wordline"], "t_bitline": s["bitline"], "t_sense": s["sense"],
                  "t_restore": s["restore"], "t_overhead": s["overhead"]})
        return {k: d[k] for k in REPORT_COLUMNS}

    def to_dict(self) -> dict[str, Any]:
        d = self.row()
        d["t_rc_stages"] = dict(self.t_rc_stages)
        d["provenance"] = dict(self.provenance)
        return d


def evaluate(config: ArrayConfig, op_point: OperatingPoint, workload: DisturbWorkload,
             timing: TimingModel, min_pitch: float = DEFAULT_MIN_PITCH_UM,
             provenance: dict[str, float] | None = None) -> EvaluationReport:
    p = config.profile
    trc = row_cycle_time(config, op_point, timing)
    if p.is_3d:
        feas = feasibility(config, min_pitch)
        pitch, margin, verdict = feas.pitch, feas.margin, feas.verdict
        area = blsa_area(config) if config.scheme.strapped else None
        height = stack_height(config)
    else:
        pitch = margin = height = None
        verdict = "n/a"
        area = REFERENCE_BLSA_AREA.get(p.name)
    density = bit_density(config)
    return EvaluationReport(
        profile=p.name,
        scheme=config.scheme.value,
        n_layers=config.n_layers,
        c_bl_effective=effective_bl_capacitance(config),
        sense_margin=sense_margin(config, op_point),
        margin_after_disturb=margin_after_disturb(config, op_point, workload),
        t_rc=trc.total,
        t_rc_stages=trc.as_dict(),
        e_read=energy_per_bit(config, op_point, "read").total,
        e_write=energy_per_bit(config, op_point, "write").total,
        hcb_pitch=pitch,
        blsa_area=area,
        bit_density=None if math.isnan(density) else density,
        stack_height=height,
        feasibility=verdict,
        pitch_margin=margin,
        provenance=dict(provenance or {}),
    )


def evaluate_profile(scenario: Scenario, name: str, n_layers: int | None = None,
                     scheme: str | None = None) -> EvaluationReport:
    cfg = scenario.config(name, n_layers, scheme)
    return evaluate(cfg, scenario.operating_point[name], scenario.workload, scenario.timing,
                    scenario.min_pitch, scenario.provenance)


def sweep(profile: TechnologyProfile, topology: RoutingTopology, op_point: OperatingPoint,
          workload: DisturbWorkload, layer_range: Iterable[int], *,
          timing: TimingModel = TimingModel(), efficiency: float = 1.0,
          min_pitch: float = DEFAULT_MIN_PITCH_UM,
          provenance: dict[str, float] | None = None) -> list[EvaluationReport]:
    """One report per layer count, in order."""
    layers = list(layer_range)
    if not layers:
        raise ValueError("empty layer range")
    if any(b <= a for a, b in zip(layers, layers[1:])):
        raise ValueError("layer range must be strictly increasing")
    return [evaluate(ArrayConfig(profile, topology, n, efficiency), op_point, workload,
                     timing, min_pitch, provenance) for n in layers]


def sweep_profile(scenario: Scenario, name: str, layer_range: Iterable[int],
                  scheme: str | None = None) -> list[EvaluationReport]:
    cfg = scenario.config(name, scheme=scheme)
    return sweep(cfg.profile, cfg.topology, scenario.operating_point[name], scenario.workload,
                 layer_range, timing=scenario.timing, efficiency=cfg.array_efficiency,
                 min_pitch=scenario.min_pitch, provenance=scenario.provenance)


# -- calibration -------------------------------------------------------------

def observe(scenario: Scenario, anchor: CalibrationAnchor) -> float:
    """Model value of an anchor's observable in the anchor's unit."""
    name = anchor.profile
    cfg = scenario.config(name, anchor.layers, anchor.scheme)
    op = scenario.operating_point[name]
    obs = anchor.observable
    if obs == "c_bl_effective":
        return effective_bl_capacitance(cfg)
    if obs == "sense_margin":
        return sense_margin(cfg, op)
    if obs == "margin_after_disturb":
        return margin_after_disturb(cfg, op, scenario.workload)
    if obs == "t_rc":
        return row_cycle_time(cfg, op, scenario.timing).total
    if obs in ("e_read", "e_write"):
        return energy_per_bit(cfg, op, obs[2:]).total
    if obs == "bit_density":
        return bit_density(cfg)
    if obs == "stack_height":
        return stack_height(cfg)
    if obs == "hcb_pitch":
        return hcb_pitch(cfg)
    if obs == "blsa_area":
        return blsa_area(cfg)
    raise KeyError(obs)


def _relative(model: float, target: float) -> float:
    return (model - target) / abs(target) if target else model


def calibrate(scenario: Scenario, anchors: Sequence[CalibrationAnchor] | None = None,
              free: dict[str, tuple[float, float]] | None = None,
              **fit_options) -> tuple[_cal.Calibration, Scenario]:
    """Fit the free parameters to the anchors.

    Defaults to the scenario's own calibration declarations. Returns the
    calibration record and the scenario with fitted values written back
    (marked as fitted).
    """
    spec = scenario.calibration
    if anchors is None:
        anchors = spec.anchors
    if free is None:
        free = {k: (b.lower, b.upper) for k, b in spec.free.items()}
    if not anchors:
        raise _cal.CalibrationError("calibration needs at least one anchor")

    params = [_cal.FreeParameter(k, scenario.get_param(k), lo, hi) for k, (lo, hi) in free.items()]
    params = [dataclasses.replace(p, value=p.clip(p.value)) for p in params]

    def apply(values) -> Scenario:
        s = scenario
        for k, v in values.items():
            s = s.with_param(k, v)
        return s

    def residuals(values):
        s = apply(values)
        return {a.name: _relative(observe(s, a), a.target) for a in anchors}

    result = _cal.fit(residuals, params, {a.name: a.weight for a in anchors}, **fit_options)
    fitted = apply(result.values)
    if free:
        fitted = dataclasses.replace(
            fitted, calibration=dataclasses.replace(fitted.calibration, fitted=True))
    return result, fitted


# -- comparison ----------------------------------------------------------------

_COMPARE_METRICS = ("c_bl_effective", "sense_margin", "margin_after_disturb", "t_rc",
                    "e_read", "e_write", "e_read_write", "hcb_pitch", "blsa_area",
                    "bit_density", "stack_height")


@dataclass(frozen=True)
class ComparisonTable:
    columns: tuple[str, ...]
    rows: tuple[dict[str, Any], ...]


def compare_report(reports: Sequence[EvaluationReport]) -> ComparisonTable:
    """Side-by-side metrics with ``<metric>_ratio`` columns against the
    first report."""
    if len(reports) < 2:
        raise ValueError("comparison needs at least two configs")

    def metrics(r):
        d = {m: getattr(r, m) for m in _COMPARE_METRICS if m != "e_read_write"}
        d["e_read_write"] = r.e_read + r.e_write
        return d

    base = metrics(reports[0])
    columns = ["profile", "scheme", "n_layers"]
    for m in _COMPARE_METRICS:
        columns += [m, f"{m}_ratio"]
    rows = []
    for r in reports:
        m = metrics(r)
        row = {"profile": r.profile, "scheme": r.scheme, "n_layers": r.n_layers}
        for k in _COMPARE_METRICS:
            row[k] = m[k]
            b = base[k]
            row[f"{k}_ratio"] = m[k] / b if (m[k] is not None and b) else None
        rows.append(row)
    return ComparisonTable(tuple(columns), tuple(rows))
