"""Charge-sharing sense margin, disturb loss, staged row-cycle timing and
per-bit access energy for one ``ArrayConfig``."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Mapping

from ._schema import check_keys, number, require
from .tech_profile import TechnologyProfile
from .topology import (
    ArrayConfig,
    bl_path_resistance,
    effective_bl_capacitance,
    switched_bl_capacitance,
)
from .units import AC, FF, FJ, KOHM, MV, NS, UA

__all__ = [
    "OperatingPoint",
    "DisturbWorkload",
    "TimingModel",
    "TimingBreakdown",
    "EnergyBreakdown",
    "WL_ELMORE_COEFF",
    "sense_margin",
    "disturb_margin_loss",
    "margin_after_disturb",
    "wordline_delay",
    "bitline_time_constant",
    "restore_time",
    "row_cycle_time",
    "energy_per_bit",
]

# 50% delay of a distributed RC line driven from one end
WL_ELMORE_COEFF = 0.38


@dataclass(frozen=True)
class OperatingPoint:
    """Array voltages.

    ``v_array`` is the full bitline swing (precharge at half of it) and sets
    energy and restore time. ``v_sense`` is the stored-level swing used in
    the charge-sharing margin; it defaults to ``v_array``.
    """

    v_array: float
    v_pp: float
    v_bb_wl: float = 0.0
    v_sense: float | None = None

    def __post_init__(self):
        require(self.v_array > 0, "operating_point.v_array", "must be > 0")
        require(self.v_pp >= self.v_array, "operating_point.v_pp", "must be >= v_array")
        if self.v_sense is not None:
            require(self.v_sense > 0, "operating_point.v_sense", "must be > 0")

    @property
    def sense_level(self) -> float:
        return self.v_array if self.v_sense is None else self.v_sense

    @classmethod
    def for_profile(cls, profile: TechnologyProfile, v_array: float,
                    v_sense: float | None = None) -> "OperatingPoint":
        t = profile.transistor
        return cls(v_array=v_array, v_pp=t.v_pp, v_bb_wl=t.v_bb_wl, v_sense=v_sense)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping, where: str = "operating_point") -> "OperatingPoint":
        check_keys(cls, data, where)
        return cls(
            v_array=number(data, "v_array", where),
            v_pp=number(data, "v_pp", where),
            v_bb_wl=number(data, "v_bb_wl", where, default=0.0),
            v_sense=number(data, "v_sense", where, default=None, optional=True),
        )


@dataclass(frozen=True)
class DisturbWorkload:
    """Row-hammer toggles and floating-body cycles per refresh window, with
    the charge each event removes from a victim cell (aC)."""

    rh_toggles: float = 1e4
    fbe_cycles: float = 1.5e6
    refresh_window: float = 64.0  # ms
    q_rh: float = 0.0
    q_fbe: float = 0.0

    def __post_init__(self):
        for name in ("rh_toggles", "fbe_cycles", "q_rh", "q_fbe"):
            require(getattr(self, name) >= 0, f"workload.{name}", "must be >= 0")
        require(self.refresh_window > 0, "workload.refresh_window", "must be > 0")

    @property
    def charge_loss(self) -> float:
        """Total charge lost per refresh window, fC."""
        return (self.rh_toggles * self.q_rh + self.fbe_cycles * self.q_fbe) * AC / FF

    def with_charge_loss(self, total_fc: float, rh_share: float = 0.5) -> "DisturbWorkload":
        """Same event counts, per-event charges rescaled to a total loss."""
        if not 0 <= rh_share <= 1:
            raise ValueError("rh_share must lie in [0, 1]")
        total_ac = total_fc * FF / AC
        q_rh = total_ac * rh_share / self.rh_toggles if self.rh_toggles else 0.0
        q_fbe = total_ac * (1 - rh_share) / self.fbe_cycles if self.fbe_cycles else 0.0
        return DisturbWorkload(self.rh_toggles, self.fbe_cycles, self.refresh_window, q_rh, q_fbe)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping, where: str = "workload") -> "DisturbWorkload":
        check_keys(cls, data, where)
        d = cls()
        return cls(**{f.name: number(data, f.name, where, default=getattr(d, f.name))
                      for f in fields(cls)})


@dataclass(frozen=True)
class TimingModel:
    """Stage factors of the row cycle.

    tRC = k_wl*t_wl + k_bl*tau_bl + t_sense + k_restore*t_restore + t_overhead
    """

    k_wl: float = 2.0
    k_bl: float = 2.3
    t_sense: float = 1.0  # ns
    k_restore: float = 1.0
    t_overhead: float = 2.0  # ns

    def __post_init__(self):
        for f in fields(self):
            require(getattr(self, f.name) >= 0, f"timing.{f.name}", "must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping, where: str = "timing") -> "TimingModel":
        check_keys(cls, data, where)
        d = cls()
        return cls(**{f.name: number(data, f.name, where, default=getattr(d, f.name))
                      for f in fields(cls)})


def _sensing_capacitance(config: ArrayConfig) -> float:
    return config.profile.cs + effective_bl_capacitance(config)


def sense_margin(config: ArrayConfig, op_point: OperatingPoint) -> float:
    """Bitline signal after charge sharing with a stored '1', in mV."""
    cs = config.profile.cs
    dv = 0.5 * op_point.sense_level * cs / (cs + effective_bl_capacitance(config))
    return dv / MV


def disturb_margin_loss(config: ArrayConfig, workload: DisturbWorkload) -> float:
    """Signal lost to RH/FBE charge loss over one refresh window, in mV."""
    return workload.charge_loss * FF / (_sensing_capacitance(config) * FF) / MV


def margin_after_disturb(config: ArrayConfig, op_point: OperatingPoint,
                         workload: DisturbWorkload) -> float:
    return max(0.0, sense_margin(config, op_point) - disturb_margin_loss(config, workload))


def wordline_delay(profile: TechnologyProfile) -> float:
    """Distributed-line Elmore delay of the wordline, ns."""
    c = (profile.cwl + profile.cwl_parasitic) * FF
    return WL_ELMORE_COEFF * profile.rwl * KOHM * c / NS


def bitline_time_constant(config: ArrayConfig) -> float:
    """Path resistance (line, bond, selector) times sensed capacitance, ns."""
    return bl_path_resistance(config) * KOHM * effective_bl_capacitance(config) * FF / NS


def restore_time(config: ArrayConfig, op_point: OperatingPoint) -> float:
    """Time for I_on to slew the storage node across the full swing, ns."""
    i_on = config.profile.transistor.i_on
    if math.isinf(i_on):
        return 0.0
    return config.profile.cs * FF * op_point.v_array / (i_on * UA) / NS


@dataclass(frozen=True)
class TimingBreakdown:
    wordline: float
    bitline: float
    sense: float
    restore: float
    overhead: float

    @property
    def total(self) -> float:
        return self.wordline + self.bitline + self.sense + self.restore + self.overhead

    def as_dict(self) -> dict[str, float]:
        return {"wordline": self.wordline, "bitline": self.bitline, "sense": self.sense,
                "restore": self.restore, "overhead": self.overhead}


def row_cycle_time(config: ArrayConfig, op_point: OperatingPoint,
                   timing: TimingModel) -> TimingBreakdown:
    """Staged tRC in ns; ``.total`` is the sum of the stage terms."""
    return TimingBreakdown(
        wordline=timing.k_wl * wordline_delay(config.profile),
        bitline=timing.k_bl * bitline_time_constant(config),
        sense=timing.t_sense,
        restore=timing.k_restore * restore_time(config, op_point),
        overhead=timing.t_overhead,
    )


@dataclass(frozen=True)
class EnergyBreakdown:
    bitline: float
    wordline: float

    @property
    def total(self) -> float:
        return self.bitline + self.wordline


def energy_per_bit(config: ArrayConfig, op_point: OperatingPoint, op: str) -> EnergyBreakdown:
    """Read or write energy per bit in fJ.

    The bitline term charges the physically switched capacitance (the
    tabulated bitline for planar arrays) plus the cell; a write swings it
    fully, a read by half. Each bit also carries a 1/cells_per_wl share of
    the wordline charge.
    """
    if op not in ("read", "write"):
        raise ValueError(f"op must be 'read' or 'write', got {op!r}")
    p = config.profile
    swing = op_point.v_array if op == "write" else op_point.v_array / 2
    c_bl = (switched_bl_capacitance(config) + p.cs) * FF
    e_wl = (p.cwl + p.cwl_parasitic) * FF * op_point.v_pp ** 2 / p.cells_per_wl
    return EnergyBreakdown(bitline=c_bl * swing ** 2 / FJ, wordline=e_wl / FJ)
