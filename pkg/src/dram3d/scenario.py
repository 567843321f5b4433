"""The full model configuration: profiles plus everything needed to turn
each of them into an evaluation point, and the calibration declarations.

Free parameters are addressed by dotted paths that mirror the JSON layout,
e.g. ``operating_point.si3d.v_sense`` or ``timing.k_restore``.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

from ._schema import ValidationError, check_keys, integer, number, require
from .electrical import DisturbWorkload, OperatingPoint, TimingModel
from .tech_profile import TechnologyProfile, builtin_profiles, profile_to_dict, profiles_from_list
from .topology import (
    DEFAULT_MIN_PITCH_UM,
    IGO_SELECTOR,
    ArrayConfig,
    RoutingTopology,
    Scheme,
    switched_bl_capacitance,
)

__all__ = [
    "OBSERVABLES",
    "CalibrationAnchor",
    "ParameterBounds",
    "CalibrationSpec",
    "Scenario",
    "default_scenario",
    "shipped_scenario",
    "load_scenario",
    "SHIPPED_CONFIG",
    "SCHEME_COMPARISON_LAYERS",
]

OBSERVABLES = {
    "c_bl_effective": "fF",
    "sense_margin": "mV",
    "margin_after_disturb": "mV",
    "t_rc": "ns",
    "e_read": "fJ",
    "e_write": "fJ",
    "bit_density": "Gb/mm2",
    "stack_height": "um",
    "hcb_pitch": "um",
    "blsa_area": "um2",
}

# layer count assumed for the routing-scheme comparison point (6.6 fF,
# 130/189 mV); an assumption, the reference gives no layer count
SCHEME_COMPARISON_LAYERS = 48

SHIPPED_CONFIG = "paper_anchors.json"


@dataclass(frozen=True)
class CalibrationAnchor:
    name: str
    observable: str
    profile: str
    target: float
    unit: str
    weight: float = 1.0
    layers: int | None = None
    scheme: str | None = None

    def __post_init__(self):
        where = f"calibration.anchors[{self.name}]"
        require(self.observable in OBSERVABLES, f"{where}.observable",
                f"unknown observable {self.observable!r}")
        require(self.unit == OBSERVABLES[self.observable], f"{where}.unit",
                f"{self.observable} is reported in {OBSERVABLES[self.observable]}")
        require(self.weight >= 0, f"{where}.weight", "must be >= 0")
        if self.scheme is not None:
            try:
                Scheme(self.scheme)
            except ValueError:
                raise ValidationError(f"{where}.scheme", f"unknown scheme {self.scheme!r}") from None

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping, where: str) -> "CalibrationAnchor":
        check_keys(cls, data, where)
        for key in ("name", "observable", "profile", "unit"):
            require(isinstance(data[key], str), f"{where}.{key}", "must be a string")
        return cls(
            name=data["name"], observable=data["observable"], profile=data["profile"],
            target=number(data, "target", where), unit=data["unit"],
            weight=number(data, "weight", where, default=1.0),
            layers=integer(data, "layers", where, default=None, optional=True),
            scheme=data.get("scheme"),
        )


@dataclass(frozen=True)
class ParameterBounds:
    lower: float
    upper: float

    def __post_init__(self):
        require(self.lower < self.upper, "calibration.free", "lower bound must be below upper")


@dataclass(frozen=True)
class CalibrationSpec:
    anchors: tuple[CalibrationAnchor, ...] = ()
    free: dict[str, ParameterBounds] = field(default_factory=dict)
    fitted: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "fitted": self.fitted,
            "anchors": [a.to_dict() for a in self.anchors],
            "free": {k: {"lower": b.lower, "upper": b.upper} for k, b in self.free.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping, where: str = "calibration") -> "CalibrationSpec":
        if not isinstance(data, Mapping):
            raise ValidationError(where, "expected an object")
        unknown = sorted(set(data) - {"fitted", "anchors", "free"})
        if unknown:
            raise ValidationError(f"{where}.{unknown[0]}", "unknown key")
        anchors = tuple(CalibrationAnchor.from_dict(a, f"{where}.anchors[{i}]")
                        for i, a in enumerate(data.get("anchors", [])))
        names = [a.name for a in anchors]
        require(len(set(names)) == len(names), f"{where}.anchors", "duplicate anchor name")
        free = {}
        for name, b in data.get("free", {}).items():
            w = f"{where}.free.{name}"
            if not isinstance(b, Mapping) or set(b) - {"lower", "upper"}:
                raise ValidationError(w, "expected {lower, upper}")
            free[name] = ParameterBounds(number(b, "lower", w), number(b, "upper", w))
        fitted = data.get("fitted", False)
        require(isinstance(fitted, bool), f"{where}.fitted", "must be true or false")
        return cls(anchors=anchors, free=free, fitted=fitted)


_OP_FIELDS = ("v_array", "v_pp", "v_bb_wl", "v_sense")
_TOPO_FIELDS = ("c_bond", "r_bond", "c_strap_wire", "c_mux_junction", "c_bl_effective")
_TIMING_FIELDS = tuple(f.name for f in dataclasses.fields(TimingModel))
_WORKLOAD_FIELDS = ("q_rh", "q_fbe", "rh_toggles", "fbe_cycles", "refresh_window")


@dataclass(frozen=True)
class Scenario:
    profiles: tuple[TechnologyProfile, ...]
    topology: dict[str, RoutingTopology]
    operating_point: dict[str, OperatingPoint]
    array_efficiency: dict[str, float] = field(default_factory=dict)
    layers: dict[str, int] = field(default_factory=dict)
    timing: TimingModel = TimingModel()
    workload: DisturbWorkload = DisturbWorkload()
    rh_share: float = 0.5
    min_pitch: float = DEFAULT_MIN_PITCH_UM
    calibration: CalibrationSpec = CalibrationSpec()

    def __post_init__(self):
        names = [p.name for p in self.profiles]
        require(len(set(names)) == len(names), "profiles", "duplicate profile name")
        for section in ("topology", "operating_point"):
            missing = [n for n in names if n not in getattr(self, section)]
            require(not missing, f"{section}.{missing[0] if missing else ''}", "missing entry")
        for section in ("topology", "operating_point", "array_efficiency", "layers"):
            extra = sorted(set(getattr(self, section)) - set(names))
            require(not extra, f"{section}.{extra[0] if extra else ''}", "no such profile")
        for n, eff in self.array_efficiency.items():
            require(0 < eff <= 1, f"array_efficiency.{n}", "must lie in (0, 1]")
        for p in self.profiles:
            if p.is_3d:
                require(p.name in self.layers, f"layers.{p.name}", "nominal layer count required")
                require(self.layers[p.name] >= 1, f"layers.{p.name}", "must be >= 1")
            else:
                require(p.name not in self.layers, f"layers.{p.name}", "planar profile has no layers")
        require(0 <= self.rh_share <= 1, "rh_share", "must lie in [0, 1]")
        require(self.min_pitch > 0, "min_pitch", "must be > 0")

    # -- lookup ---------------------------------------------------------------

    @property
    def profile_names(self) -> list[str]:
        return [p.name for p in self.profiles]

    def profile(self, name: str) -> TechnologyProfile:
        for p in self.profiles:
            if p.name == name:
                return p
        raise KeyError(f"unknown profile {name!r}")

    def config(self, name: str, n_layers: int | None = None,
               scheme: Scheme | str | None = None) -> ArrayConfig:
        """Evaluation point for a profile; stacked profiles default to their
        nominal layer count."""
        p = self.profile(name)
        topo = self.topology[name]
        if scheme is not None and Scheme(scheme) is not topo.scheme:
            topo = topo.with_scheme(scheme)
        if p.is_3d and n_layers is None:
            n_layers = self.layers[name]
        return ArrayConfig(p, topo, n_layers, self.array_efficiency.get(name, 1.0))

    @property
    def provenance(self) -> dict[str, float]:
        """Fitted parameter values, empty when the scenario is uncalibrated."""
        if not self.calibration.fitted:
            return {}
        return {k: self.get_param(k) for k in self.calibration.free}

    # -- parameter access -------------------------------------------------------

    def get_param(self, path: str) -> float:
        section, *rest = path.split(".")
        try:
            if section == "operating_point" and len(rest) == 2 and rest[1] in _OP_FIELDS:
                op = self.operating_point[rest[0]]
                if rest[1] == "v_sense":
                    return op.sense_level
                return getattr(op, rest[1])
            if section == "topology" and len(rest) == 2 and rest[1] in _TOPO_FIELDS:
                t = self.topology[rest[0]]
                if rest[1] == "c_bl_effective" and t.c_bl_effective is None:
                    return switched_bl_capacitance(self.config(rest[0]))
                return getattr(t, rest[1])
            if section == "topology" and rest[1:] == ["selector", "c_junction"]:
                return self.topology[rest[0]].selector.c_junction
            if section == "array_efficiency" and len(rest) == 1:
                return self.array_efficiency.get(rest[0], 1.0)
            if section == "timing" and len(rest) == 1 and rest[0] in _TIMING_FIELDS:
                return getattr(self.timing, rest[0])
            if section == "workload" and rest == ["charge_loss"]:
                return self.workload.charge_loss
            if section == "workload" and len(rest) == 1 and rest[0] in _WORKLOAD_FIELDS:
                return getattr(self.workload, rest[0])
        except (KeyError, AttributeError):
            pass
        raise KeyError(f"unknown parameter {path!r}")

    def with_param(self, path: str, value: float) -> "Scenario":
        self.get_param(path)  # validates the path
        section, *rest = path.split(".")
        value = float(value)
        if section == "operating_point":
            ops = dict(self.operating_point)
            ops[rest[0]] = dataclasses.replace(ops[rest[0]], **{rest[1]: value})
            return dataclasses.replace(self, operating_point=ops)
        if section == "topology":
            topos = dict(self.topology)
            t = topos[rest[0]]
            if rest[1] == "selector":
                t = dataclasses.replace(t, selector=dataclasses.replace(t.selector, c_junction=value))
            else:
                t = dataclasses.replace(t, **{rest[1]: value})
            topos[rest[0]] = t
            return dataclasses.replace(self, topology=topos)
        if section == "array_efficiency":
            eff = dict(self.array_efficiency)
            eff[rest[0]] = value
            return dataclasses.replace(self, array_efficiency=eff)
        if section == "timing":
            return dataclasses.replace(self, timing=dataclasses.replace(self.timing, **{rest[0]: value}))
        if rest == ["charge_loss"]:
            return dataclasses.replace(self, workload=self.workload.with_charge_loss(value, self.rh_share))
        return dataclasses.replace(self, workload=dataclasses.replace(self.workload, **{rest[0]: value}))

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "profiles": [profile_to_dict(p) for p in self.profiles],
            "topology": {k: v.to_dict() for k, v in self.topology.items()},
            "operating_point": {k: v.to_dict() for k, v in self.operating_point.items()},
            "array_efficiency": dict(self.array_efficiency),
            "layers": dict(self.layers),
            "timing": self.timing.to_dict(),
            "workload": self.workload.to_dict(),
            "rh_share": self.rh_share,
            "min_pitch": self.min_pitch,
            "calibration": self.calibration.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scenario":
        if not isinstance(data, Mapping):
            raise ValidationError("", "top level must be an object")
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ValidationError(unknown[0], "unknown key")
        profiles = (profiles_from_list(data["profiles"]) if "profiles" in data
                    else builtin_profiles())

        def section(key):
            v = data.get(key, {})
            if not isinstance(v, Mapping):
                raise ValidationError(key, "expected an object keyed by profile name")
            return v

        topology = {k: RoutingTopology.from_dict(v, f"topology.{k}") for k, v in section("topology").items()}
        ops = {k: OperatingPoint.from_dict(v, f"operating_point.{k}")
               for k, v in section("operating_point").items()}
        eff = {k: number(section("array_efficiency"), k, "array_efficiency")
               for k in section("array_efficiency")}
        layers = {k: integer(section("layers"), k, "layers") for k in section("layers")}
        kw: dict[str, Any] = {}
        if "timing" in data:
            kw["timing"] = TimingModel.from_dict(data["timing"])
        if "workload" in data:
            kw["workload"] = DisturbWorkload.from_dict(data["workload"])
        if "rh_share" in data:
            kw["rh_share"] = number(data, "rh_share", "")
        if "min_pitch" in data:
            kw["min_pitch"] = number(data, "min_pitch", "")
        if "calibration" in data:
            kw["calibration"] = CalibrationSpec.from_dict(data["calibration"])
        scenario = cls(profiles=tuple(profiles), topology=topology, operating_point=ops,
                       array_efficiency=eff, layers=layers, **kw)
        for name in scenario.calibration.free:
            try:
                scenario.get_param(name)
            except KeyError:
                raise ValidationError(f"calibration.free.{name}", "unknown parameter") from None
        for a in scenario.calibration.anchors:
            require(a.profile in scenario.profile_names, f"calibration.anchors[{a.name}].profile",
                    f"no such profile {a.profile!r}")
        return scenario

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def load_scenario(path: str | os.PathLike | None = None) -> Scenario:
    """Read a scenario file; with no path, the shipped calibrated scenario."""
    if path is None:
        return shipped_scenario()
    with open(path, encoding="utf-8") as fh:
        return Scenario.loads(fh.read())


def shipped_scenario() -> Scenario:
    text = resources.files("dram3d").joinpath("data", SHIPPED_CONFIG).read_text(encoding="utf-8")
    return Scenario.loads(text)


def default_scenario() -> Scenario:
    """Uncalibrated starting point: built-in profiles, selector+strap routing
    for the stacked arrays, and the full anchor set."""
    profiles = tuple(builtin_profiles())
    topology = {
        "d1b": RoutingTopology(Scheme.DIRECT_BLSA, c_bl_effective=25.0),
        "si3d": RoutingTopology(Scheme.SELECTOR_STRAP, selector=IGO_SELECTOR, c_bond=1.0, r_bond=0.1),
        "aos3d": RoutingTopology(Scheme.SELECTOR_STRAP, selector=IGO_SELECTOR, c_bond=1.0, r_bond=0.1),
    }
    ops = {
        "d1b": OperatingPoint(v_array=1.0, v_pp=2.5, v_bb_wl=-0.3),
        "si3d": OperatingPoint(v_array=0.6, v_pp=1.8, v_bb_wl=-0.3, v_sense=0.6),
        "aos3d": OperatingPoint(v_array=0.6, v_pp=1.6, v_bb_wl=-0.6, v_sense=0.6),
    }
    A = CalibrationAnchor
    anchors = (
        A("d1b_c_eff", "c_bl_effective", "d1b", 20.0, "fF"),
        A("d1b_margin", "sense_margin", "d1b", 54.0, "mV"),
        A("d1b_trc", "t_rc", "d1b", 21.3, "ns"),
        A("si3d_c_eff_cmp", "c_bl_effective", "si3d", 6.6, "fF", layers=SCHEME_COMPARISON_LAYERS),
        A("aos3d_c_eff_cmp", "c_bl_effective", "aos3d", 6.6, "fF", layers=SCHEME_COMPARISON_LAYERS),
        A("si3d_margin_cmp", "sense_margin", "si3d", 130.0, "mV", layers=SCHEME_COMPARISON_LAYERS),
        A("aos3d_margin_cmp", "sense_margin", "aos3d", 189.0, "mV", layers=SCHEME_COMPARISON_LAYERS),
        A("si3d_density", "bit_density", "si3d", 2.6, "Gb/mm2", layers=137),
        A("aos3d_density", "bit_density", "aos3d", 2.6, "Gb/mm2", layers=87),
        A("si3d_margin_disturbed", "margin_after_disturb", "si3d", 70.0, "mV", layers=137),
        A("si3d_e_write", "e_write", "si3d", 6.26, "fJ", layers=137),
        A("si3d_e_read", "e_read", "si3d", 1.57, "fJ", layers=137),
        A("aos3d_e_write", "e_write", "aos3d", 5.38, "fJ", layers=87),
        A("aos3d_e_read", "e_read", "aos3d", 1.35, "fJ", layers=87),
    )
    B = ParameterBounds
    free = {
        "topology.d1b.c_bl_effective": B(1.0, 100.0),
        "operating_point.d1b.v_array": B(0.1, 2.5),
        "timing.k_restore": B(0.0, 100.0),
        "topology.si3d.c_bond": B(0.0, 20.0),
        "topology.aos3d.c_bond": B(0.0, 20.0),
        "operating_point.si3d.v_sense": B(0.1, 2.5),
        "operating_point.aos3d.v_sense": B(0.1, 2.5),
        "array_efficiency.si3d": B(0.05, 1.0),
        "array_efficiency.aos3d": B(0.05, 1.0),
        "workload.charge_loss": B(0.0, 5.0),
        # WL overdrive allowed anywhere in the stated 1.6-1.8 V window
        "operating_point.si3d.v_array": B(0.1, 1.6),
        "operating_point.si3d.v_pp": B(1.6, 1.8),
        "operating_point.aos3d.v_array": B(0.1, 1.6),
        "operating_point.aos3d.v_pp": B(1.6, 1.8),
    }
    return Scenario(
        profiles=profiles,
        topology=topology,
        operating_point=ops,
        array_efficiency={"si3d": 0.5, "aos3d": 0.5},
        layers={"si3d": 137, "aos3d": 87},
        calibration=CalibrationSpec(anchors=anchors, free=free),
    )
