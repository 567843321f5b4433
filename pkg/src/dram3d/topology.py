"""Bitline routing schemes and bonding geometry.

Four ways of getting a vertical bitline to its sense amplifier on the
bonded CMOS wafer:

* ``direct_blsa``     one bond pad per bitline
* ``core_mux``        one pad per bitline, multiplexed in the periphery
* ``bl_strap``        ``bls_per_strap`` bitlines hard-wired to one pad
* ``selector_strap``  as ``bl_strap`` but each bitline has its own
                      selector transistor, so only the selected one loads
                      the strap node
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Mapping

from ._schema import ValidationError, check_keys, integer, number, require
from .tech_profile import TechnologyProfile
from .units import NM, UM

__all__ = [
    "Scheme",
    "SelectorDevice",
    "RoutingTopology",
    "ArrayConfig",
    "Feasibility",
    "PadCounts",
    "IGO_SELECTOR",
    "D1B_BLSA_AREA_UM2",
    "DEFAULT_MIN_PITCH_UM",
    "local_bl_capacitance",
    "switched_bl_capacitance",
    "effective_bl_capacitance",
    "bl_path_resistance",
    "bls_per_pad",
    "hcb_pitch",
    "blsa_area",
    "feasibility",
    "pad_counts",
]

D1B_BLSA_AREA_UM2 = 0.44
DEFAULT_MIN_PITCH_UM = 0.4


class Scheme(str, enum.Enum):
    DIRECT_BLSA = "direct_blsa"
    BL_STRAP = "bl_strap"
    CORE_MUX = "core_mux"
    SELECTOR_STRAP = "selector_strap"

    @property
    def strapped(self) -> bool:
        return self in (Scheme.BL_STRAP, Scheme.SELECTOR_STRAP)


@dataclass(frozen=True)
class SelectorDevice:
    i_on: float = 50.0  # uA at drive_voltage
    drive_voltage: float = 2.0
    width: float = 70.0  # nm
    length: float = 50.0  # nm
    ss: float = 60.0  # mV/dec
    c_junction: float = 0.1  # fF
    r_on: float | None = None  # kOhm; None -> drive_voltage / i_on

    def __post_init__(self):
        require(self.i_on > 0, "selector.i_on", "must be > 0")
        require(self.drive_voltage > 0, "selector.drive_voltage", "must be > 0")
        require(self.width > 0 and self.length > 0, "selector.width", "dimensions must be > 0")
        require(self.ss >= 60.0, "selector.ss", "cannot beat the 60 mV/dec thermionic limit")
        require(self.c_junction >= 0, "selector.c_junction", "must be >= 0")
        if self.r_on is None:
            # V / uA -> MOhm; x1e3 for kOhm
            object.__setattr__(self, "r_on", self.drive_voltage / self.i_on * 1e3)
        require(self.r_on > 0, "selector.r_on", "must be > 0")


IGO_SELECTOR = SelectorDevice()


@dataclass(frozen=True)
class RoutingTopology:
    """Routing scheme plus the lumped parasitics of strap, bond and mux.

    ``c_bl_effective`` pins the capacitance seen during charge sharing
    (used for the planar baseline, whose effective load differs from its
    tabulated bitline capacitance).
    """

    scheme: Scheme
    bls_per_strap: int = 8
    wls_per_strap_driver: int = 16
    selector: SelectorDevice | None = None
    c_bond: float = 0.0  # fF
    r_bond: float = 0.0  # kOhm
    c_strap_wire: float = 0.0  # fF
    c_mux_junction: float = IGO_SELECTOR.c_junction  # fF
    c_bl_effective: float | None = None  # fF

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        require(self.bls_per_strap >= 1, "topology.bls_per_strap", "must be >= 1")
        require(self.wls_per_strap_driver >= 1, "topology.wls_per_strap_driver", "must be >= 1")
        if self.scheme is Scheme.SELECTOR_STRAP:
            require(self.selector is not None, "topology.selector", "required for selector_strap")
        else:
            require(self.selector is None, "topology.selector", "only allowed for selector_strap")
        for name in ("c_bond", "r_bond", "c_strap_wire", "c_mux_junction"):
            require(getattr(self, name) >= 0, f"topology.{name}", "must be >= 0")
        if self.c_bl_effective is not None:
            require(self.c_bl_effective >= 0, "topology.c_bl_effective", "must be >= 0")

    @classmethod
    def for_scheme(cls, scheme: Scheme | str, **kw) -> "RoutingTopology":
        """Topology with a default IGO selector attached when the scheme needs one."""
        scheme = Scheme(scheme)
        if scheme is Scheme.SELECTOR_STRAP:
            kw.setdefault("selector", IGO_SELECTOR)
        else:
            kw["selector"] = None
        return cls(scheme=scheme, **kw)

    def with_scheme(self, scheme: Scheme | str) -> "RoutingTopology":
        scheme = Scheme(scheme)
        selector = self.selector
        if scheme is Scheme.SELECTOR_STRAP and selector is None:
            selector = IGO_SELECTOR
        elif scheme is not Scheme.SELECTOR_STRAP:
            selector = None
        return RoutingTopology(
            scheme=scheme, bls_per_strap=self.bls_per_strap,
            wls_per_strap_driver=self.wls_per_strap_driver, selector=selector,
            c_bond=self.c_bond, r_bond=self.r_bond, c_strap_wire=self.c_strap_wire,
            c_mux_junction=self.c_mux_junction, c_bl_effective=self.c_bl_effective,
        )

    def to_dict(self) -> dict[str, Any]:
        sel = None
        if self.selector is not None:
            sel = {k: getattr(self.selector, k) for k in
                   ("i_on", "drive_voltage", "width", "length", "ss", "c_junction", "r_on")}
        return {
            "scheme": self.scheme.value,
            "bls_per_strap": self.bls_per_strap,
            "wls_per_strap_driver": self.wls_per_strap_driver,
            "selector": sel,
            "c_bond": self.c_bond,
            "r_bond": self.r_bond,
            "c_strap_wire": self.c_strap_wire,
            "c_mux_junction": self.c_mux_junction,
            "c_bl_effective": self.c_bl_effective,
        }

    @classmethod
    def from_dict(cls, data: Mapping, where: str = "topology") -> "RoutingTopology":
        check_keys(cls, data, where)
        try:
            scheme = Scheme(data["scheme"])
        except ValueError:
            raise ValidationError(f"{where}.scheme",
                                  f"unknown scheme {data['scheme']!r}") from None
        sel = data.get("selector")
        selector = None
        if sel is not None:
            sw = f"{where}.selector"
            check_keys(SelectorDevice, sel, sw)
            selector = SelectorDevice(**{
                k: number(sel, k, sw, default=getattr(IGO_SELECTOR, k) if k != "r_on" else None,
                          optional=(k == "r_on"))
                for k in ("i_on", "drive_voltage", "width", "length", "ss", "c_junction", "r_on")
            })
        return cls(
            scheme=scheme,
            bls_per_strap=integer(data, "bls_per_strap", where, default=8),
            wls_per_strap_driver=integer(data, "wls_per_strap_driver", where, default=16),
            selector=selector,
            c_bond=number(data, "c_bond", where, default=0.0),
            r_bond=number(data, "r_bond", where, default=0.0),
            c_strap_wire=number(data, "c_strap_wire", where, default=0.0),
            c_mux_junction=number(data, "c_mux_junction", where, default=IGO_SELECTOR.c_junction),
            c_bl_effective=number(data, "c_bl_effective", where, default=None, optional=True),
        )


@dataclass(frozen=True)
class ArrayConfig:
    profile: TechnologyProfile
    topology: RoutingTopology
    n_layers: int | None = None
    array_efficiency: float = 1.0

    def __post_init__(self):
        if self.profile.is_3d:
            require(self.n_layers is not None, "n_layers",
                    f"required for stacked3d profile {self.profile.name!r}")
            require(self.n_layers >= 1, "n_layers", "must be >= 1")
        else:
            require(self.n_layers is None, "n_layers",
                    f"not applicable to planar2d profile {self.profile.name!r}")
        require(0 < self.array_efficiency <= 1, "array_efficiency", "must lie in (0, 1]")

    @property
    def scheme(self) -> Scheme:
        return self.topology.scheme


def local_bl_capacitance(config: ArrayConfig) -> float:
    """Capacitance of one local bitline in fF."""
    p = config.profile
    if p.is_3d:
        return config.n_layers * p.cbl_per_layer
    return p.cbl_per_layer


def _local_bl_resistance(config: ArrayConfig) -> float:
    p = config.profile
    if p.is_3d:
        return config.n_layers * p.rbl_per_layer
    return p.rbl_per_layer


def switched_bl_capacitance(config: ArrayConfig) -> float:
    """Physical capacitance connected to the sense node, from the scheme (fF)."""
    t = config.topology
    local = local_bl_capacitance(config)
    if t.scheme is Scheme.DIRECT_BLSA:
        return local + t.c_bond
    if t.scheme is Scheme.CORE_MUX:
        return local + t.c_bond + t.c_mux_junction
    if t.scheme is Scheme.BL_STRAP:
        return t.bls_per_strap * local + t.c_strap_wire + t.c_bond
    return local + t.selector.c_junction + t.c_strap_wire + t.c_bond


def effective_bl_capacitance(config: ArrayConfig) -> float:
    """Capacitance the sense amplifier sees during charge sharing (fF)."""
    if config.topology.c_bl_effective is not None:
        return config.topology.c_bl_effective
    return switched_bl_capacitance(config)


def bl_path_resistance(config: ArrayConfig) -> float:
    """Series resistance from the far end of the bitline to the BLSA (kOhm)."""
    t = config.topology
    r = _local_bl_resistance(config) + t.r_bond
    if t.selector is not None:
        r += t.selector.r_on
    return r


def bls_per_pad(topology: RoutingTopology) -> int:
    return topology.bls_per_strap if topology.scheme.strapped else 1


def _pad_footprint_um2(config: ArrayConfig) -> float:
    if not config.profile.is_3d:
        raise ValueError(f"bonding geometry needs a stacked3d profile, got {config.profile.name!r}")
    g = config.profile.geometry
    # a vertical bitline is shared by two cells per layer
    return bls_per_pad(config.topology) * 2 * g.x_pitch * g.y_pitch * (NM / UM) ** 2


def hcb_pitch(config: ArrayConfig) -> float:
    """Hybrid-bond pad pitch in um, pads on a square grid over the array."""
    return math.sqrt(_pad_footprint_um2(config))


def blsa_area(config: ArrayConfig) -> float:
    """Area available to one sense amplifier (um^2): two pad footprints."""
    if not config.topology.scheme.strapped:
        raise ValueError("BLSA area is defined for strapped schemes only")
    return 2 * _pad_footprint_um2(config)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    pitch: float
    min_pitch: float
    margin: float

    @property
    def verdict(self) -> str:
        return "feasible" if self.feasible else "infeasible"


def feasibility(config: ArrayConfig, min_pitch: float = DEFAULT_MIN_PITCH_UM) -> Feasibility:
    if min_pitch <= 0:
        raise ValueError(f"min_pitch must be > 0, got {min_pitch}")
    pitch = hcb_pitch(config)
    return Feasibility(feasible=pitch >= min_pitch, pitch=pitch, min_pitch=min_pitch,
                       margin=pitch - min_pitch)


@dataclass(frozen=True)
class PadCounts:
    bl_pads: int
    wl_pads: int


def pad_counts(config: ArrayConfig, bank_rows: int, bank_cols: int) -> PadCounts:
    if bank_rows < 1 or bank_cols < 1:
        raise ValueError("bank dimensions must be >= 1")
    t = config.topology
    return PadCounts(bl_pads=-(-bank_cols // bls_per_pad(t)),
                     wl_pads=-(-bank_rows // t.wls_per_strap_driver))
