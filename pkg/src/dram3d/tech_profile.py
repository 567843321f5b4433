"""Technology profiles: cell geometry, bitline/wordline parasitics and
access-transistor parameters for the planar D1b baseline and the two
stacked 3D cell variants (epitaxial Si and IWO oxide channel).

All fields are kept in the table units: nm, fF, kOhm, uA (on-current),
fA (off-current) and V.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from ._schema import ValidationError, check_keys, integer, number, require

__all__ = [
    "Dimensionality",
    "Channel",
    "CellGeometry",
    "AccessTransistor",
    "TechnologyProfile",
    "builtin_profiles",
    "builtin",
    "cells_per_bl",
    "load_profiles",
    "dump_profiles",
    "profile_to_dict",
    "profile_from_dict",
    "ValidationError",
]


class Dimensionality(str, enum.Enum):
    PLANAR2D = "planar2d"
    STACKED3D = "stacked3d"


class Channel(str, enum.Enum):
    CRYSTALLINE_SI = "crystalline_si"
    EPITAXIAL_SI = "epitaxial_si"
    IWO_AOS = "iwo_aos"


@dataclass(frozen=True)
class CellGeometry:
    x_pitch: float
    y_pitch: float
    gate_length: float
    channel_width: float
    z_pitch: float | None = None

    def __post_init__(self):
        for name in ("x_pitch", "y_pitch", "gate_length", "channel_width"):
            require(getattr(self, name) > 0, f"geometry.{name}", "must be > 0")
        if self.z_pitch is not None:
            require(self.z_pitch > 0, "geometry.z_pitch", "must be > 0")

    @property
    def footprint_nm2(self) -> float:
        """Plan-view area of one cell, X x Y."""
        return self.x_pitch * self.y_pitch


@dataclass(frozen=True)
class AccessTransistor:
    i_on: float  # uA
    i_off: float  # fA
    v_th: float
    v_pp: float
    v_bb_wl: float
    v_bb: float | None = None

    def __post_init__(self):
        require(self.i_on > 0, "transistor.i_on", "must be > 0")
        require(self.i_off >= 0, "transistor.i_off", "must be >= 0")
        require(self.i_on * 1e9 > self.i_off, "transistor.i_off", "must be below i_on")
        require(self.v_th > 0, "transistor.v_th", "must be > 0")
        require(self.v_pp > self.v_th, "transistor.v_pp", "must exceed v_th")
        require(self.v_bb_wl <= 0, "transistor.v_bb_wl", "must be <= 0")


@dataclass(frozen=True)
class TechnologyProfile:
    """One column of the technology table.

    For planar profiles ``cbl_per_layer``/``rbl_per_layer`` hold the whole
    bitline and ``cells_per_bl_fixed`` is set; stacked profiles derive the
    cell count from the layer count instead.
    """

    name: str
    dimensionality: Dimensionality
    channel: Channel
    geometry: CellGeometry
    cs: float
    cbl_per_layer: float
    rbl_per_layer: float
    cwl: float
    rwl: float
    cwl_parasitic: float
    cells_per_wl: int
    transistor: AccessTransistor
    cells_per_bl_fixed: int | None = None
    rbl_material: str | None = None

    def __post_init__(self):
        require(bool(self.name) and isinstance(self.name, str), "name", "must be a non-empty string")
        object.__setattr__(self, "dimensionality", Dimensionality(self.dimensionality))
        object.__setattr__(self, "channel", Channel(self.channel))
        require(self.cs > 0, "cs", "must be > 0")
        for name in ("cbl_per_layer", "cwl", "cwl_parasitic"):
            require(getattr(self, name) >= 0, name, "capacitance must be >= 0")
        for name in ("rbl_per_layer", "rwl"):
            require(getattr(self, name) >= 0, name, "resistance must be >= 0")
        require(self.cells_per_wl >= 1, "cells_per_wl", "must be >= 1")
        if self.is_3d:
            require(self.cells_per_bl_fixed is None, "cells_per_bl_fixed",
                    "must be absent for stacked3d (derived from layer count)")
            require(self.geometry.z_pitch is not None, "geometry.z_pitch",
                    "required for stacked3d profiles")
        else:
            require(self.cells_per_bl_fixed is not None and self.cells_per_bl_fixed >= 1,
                    "cells_per_bl_fixed", "required (>= 1) for planar2d profiles")
            require(self.geometry.z_pitch is None, "geometry.z_pitch",
                    "must be absent for planar2d profiles")

    @property
    def is_3d(self) -> bool:
        return self.dimensionality is Dimensionality.STACKED3D


def cells_per_bl(profile: TechnologyProfile, n_layers: int | None = None) -> int:
    """Cells sharing one bitline: fixed for planar, two per layer when stacked."""
    if profile.is_3d:
        if n_layers is None:
            raise ValueError(f"{profile.name}: n_layers is required for a stacked3d profile")
        if n_layers < 1:
            raise ValueError(f"{profile.name}: n_layers must be >= 1, got {n_layers}")
        return 2 * n_layers
    if n_layers is not None:
        raise ValueError(f"{profile.name}: n_layers given for a planar2d profile")
    return profile.cells_per_bl_fixed


def builtin_profiles() -> list[TechnologyProfile]:
    """The D1b baseline and the Si / IWO stacked profiles, in that order."""
    d1b = TechnologyProfile(
        name="d1b",
        dimensionality=Dimensionality.PLANAR2D,
        channel=Channel.CRYSTALLINE_SI,
        geometry=CellGeometry(x_pitch=32.6, y_pitch=37.6, gate_length=120.0, channel_width=11.7),
        cs=4.0,
        cbl_per_layer=25.0,
        rbl_per_layer=49.6,
        cwl=30.0,
        rwl=81.2,
        cwl_parasitic=16.2,
        cells_per_wl=1024,
        cells_per_bl_fixed=1280,
        transistor=AccessTransistor(i_on=2.44, i_off=0.2, v_th=0.43, v_pp=2.5,
                                    v_bb_wl=-0.3, v_bb=-0.6),
    )
    si3d = TechnologyProfile(
        name="si3d",
        dimensionality=Dimensionality.STACKED3D,
        channel=Channel.EPITAXIAL_SI,
        geometry=CellGeometry(x_pitch=349.0, y_pitch=100.0, z_pitch=70.0,
                              gate_length=100.0, channel_width=70.0),
        cs=4.0,
        cbl_per_layer=0.0815,
        rbl_per_layer=0.292,
        rbl_material="N+ p-Si",
        cwl=96.3,
        rwl=8.1,
        cwl_parasitic=42.0,
        cells_per_wl=1024,
        transistor=AccessTransistor(i_on=9.03, i_off=0.02, v_th=0.30, v_pp=1.8, v_bb_wl=-0.3),
    )
    aos3d = TechnologyProfile(
        name="aos3d",
        dimensionality=Dimensionality.STACKED3D,
        channel=Channel.IWO_AOS,
        geometry=CellGeometry(x_pitch=238.0, y_pitch=100.0, z_pitch=80.0,
                              gate_length=40.0, channel_width=70.0),
        cs=4.0,
        cbl_per_layer=0.128,
        rbl_per_layer=0.0167,
        rbl_material="TiN/W",
        cwl=94.4,
        rwl=19.9,
        cwl_parasitic=33.2,
        cells_per_wl=1024,
        transistor=AccessTransistor(i_on=10.4, i_off=0.02, v_th=0.20, v_pp=1.6, v_bb_wl=-0.6),
    )
    return [d1b, si3d, aos3d]


def builtin(name: str) -> TechnologyProfile:
    for p in builtin_profiles():
        if p.name == name:
            return p
    raise KeyError(name)


# -- serialization ---------------------------------------------------------

def profile_to_dict(profile: TechnologyProfile) -> dict[str, Any]:
    d = dataclasses.asdict(profile)
    d["dimensionality"] = profile.dimensionality.value
    d["channel"] = profile.channel.value
    return d


def _geometry_from_dict(data: Mapping, where: str) -> CellGeometry:
    check_keys(CellGeometry, data, where)
    return CellGeometry(
        x_pitch=number(data, "x_pitch", where),
        y_pitch=number(data, "y_pitch", where),
        gate_length=number(data, "gate_length", where),
        channel_width=number(data, "channel_width", where),
        z_pitch=number(data, "z_pitch", where, default=None, optional=True),
    )


def _transistor_from_dict(data: Mapping, where: str) -> AccessTransistor:
    check_keys(AccessTransistor, data, where)
    return AccessTransistor(
        i_on=number(data, "i_on", where),
        i_off=number(data, "i_off", where),
        v_th=number(data, "v_th", where),
        v_pp=number(data, "v_pp", where),
        v_bb_wl=number(data, "v_bb_wl", where),
        v_bb=number(data, "v_bb", where, default=None, optional=True),
    )


def _enum(cls, data: Mapping, key: str, where: str):
    path = f"{where}.{key}"
    if key not in data:
        raise ValidationError(path, "missing required key")
    try:
        return cls(data[key])
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise ValidationError(path, f"{data[key]!r} is not one of {allowed}") from None


def profile_from_dict(data: Mapping, where: str = "profile") -> TechnologyProfile:
    check_keys(TechnologyProfile, data, where)
    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ValidationError(f"{where}.name", "must be a non-empty string")
    note = data.get("rbl_material")
    if note is not None and not isinstance(note, str):
        raise ValidationError(f"{where}.rbl_material", "must be a string or null")
    try:
        return TechnologyProfile(
            name=name,
            dimensionality=_enum(Dimensionality, data, "dimensionality", where),
            channel=_enum(Channel, data, "channel", where),
            geometry=_geometry_from_dict(data["geometry"], f"{where}.geometry"),
            cs=number(data, "cs", where),
            cbl_per_layer=number(data, "cbl_per_layer", where),
            rbl_per_layer=number(data, "rbl_per_layer", where),
            cwl=number(data, "cwl", where),
            rwl=number(data, "rwl", where),
            cwl_parasitic=number(data, "cwl_parasitic", where),
            cells_per_wl=integer(data, "cells_per_wl", where),
            transistor=_transistor_from_dict(data["transistor"], f"{where}.transistor"),
            cells_per_bl_fixed=integer(data, "cells_per_bl_fixed", where, default=None, optional=True),
            rbl_material=note,
        )
    except ValidationError as exc:
        if exc.field.startswith(where):
            raise
        raise ValidationError(f"{where}.{exc.field}", str(exc).split(": ", 1)[1]) from None


def profiles_from_list(items: Any, where: str = "profiles") -> list[TechnologyProfile]:
    if not isinstance(items, list):
        raise ValidationError(where, "expected a list of profiles")
    out: list[TechnologyProfile] = []
    seen: set[str] = set()
    for i, item in enumerate(items):
        p = profile_from_dict(item, f"{where}[{i}]")
        if p.name in seen:
            raise ValidationError(f"{where}[{i}].name", f"duplicate profile name {p.name!r}")
        seen.add(p.name)
        out.append(p)
    return out


def load_profiles(document: str) -> list[TechnologyProfile]:
    """Parse a ``{"profiles": [...]}`` JSON document.

    Raises ``json.JSONDecodeError`` for malformed text and
    ``ValidationError`` for schema or invariant violations.
    """
    data = json.loads(document)
    if not isinstance(data, dict):
        raise ValidationError("", "top level must be an object")
    unknown = sorted(set(data) - {"profiles"})
    if unknown:
        raise ValidationError(unknown[0], "unknown key")
    if "profiles" not in data:
        raise ValidationError("profiles", "missing required key")
    return profiles_from_list(data["profiles"])


def dump_profiles(profiles: Iterable[TechnologyProfile]) -> str:
    return json.dumps({"profiles": [profile_to_dict(p) for p in profiles]}, indent=2)
