import dataclasses
import math

import pytest
from hypothesis import given, strategies as st

from dram3d._schema import ValidationError
from dram3d.electrical import (
    DisturbWorkload,
    OperatingPoint,
    TimingModel,
    bitline_time_constant,
    disturb_margin_loss,
    energy_per_bit,
    margin_after_disturb,
    restore_time,
    row_cycle_time,
    sense_margin,
    wordline_delay,
)
from dram3d.scenario import SCHEME_COMPARISON_LAYERS
from dram3d.tech_profile import builtin
from dram3d.topology import ArrayConfig, RoutingTopology, Scheme


def planar(c_eff):
    return ArrayConfig(builtin("d1b"), RoutingTopology(Scheme.DIRECT_BLSA, c_bl_effective=c_eff))


def op(v, v_pp=2.5, v_sense=None):
    return OperatingPoint(v_array=v, v_pp=v_pp, v_sense=v_sense)


# -- sense margin: 0.5 * V * Cs / (Cs + C) ---------------------------------------

@pytest.mark.parametrize("c_eff,expected_mv", [(20.0, 54.0), (6.6, 122.26)])
def test_sense_margin_examples(c_eff, expected_mv):
    assert sense_margin(planar(c_eff), op(0.648)) == pytest.approx(expected_mv, abs=0.01)


def test_sense_margin_unloaded_is_half_swing():
    assert sense_margin(planar(0.0), op(0.648)) == pytest.approx(324.0, rel=1e-12)


def test_sense_level_overrides_array_swing():
    assert sense_margin(planar(20.0), op(1.0, v_sense=0.648)) == pytest.approx(54.0, abs=1e-9)


@given(c1=st.floats(0, 100), c2=st.floats(0, 100), v=st.floats(0.05, 2.0))
def test_sense_margin_monotone_and_linear(c1, c2, v):
    lo, hi = sorted((c1, c2))
    m = lambda c, vv: sense_margin(planar(c), op(vv, v_pp=2.5))
    if hi > lo * (1 + 1e-9) + 1e-12:
        assert m(hi, v) < m(lo, v)
    assert m(c1, v) == pytest.approx(v / 0.5 * m(c1, 0.5), rel=1e-12)


def test_calibrated_3d_margins_beat_planar_at_equal_voltage(shipped):
    v = shipped.operating_point["d1b"].sense_level
    d1b = sense_margin(shipped.config("d1b"), op(v))
    assert d1b == pytest.approx(54.0, abs=1e-6)
    for name in ("si3d", "aos3d"):
        c = shipped.config(name, SCHEME_COMPARISON_LAYERS, "selector_strap")
        assert sense_margin(c, op(v)) > d1b


# -- disturb ------------------------------------------------------------------

def test_zero_workload_no_loss():
    w = DisturbWorkload()
    assert w.charge_loss == 0
    assert disturb_margin_loss(planar(20.0), w) == 0


def test_loss_oracle_and_linearity():
    w = DisturbWorkload(rh_toggles=1e4, fbe_cycles=1e6, q_rh=2e-3, q_fbe=1e-4)
    # 1e4*2e-3 aC + 1e6*1e-4 aC = 120 aC = 0.12 fC ; / 24 fF = 5 mV
    assert w.charge_loss == pytest.approx(0.12)
    assert disturb_margin_loss(planar(20.0), w) == pytest.approx(5.0)
    w2 = dataclasses.replace(w, q_rh=4e-3, q_fbe=2e-4)
    assert disturb_margin_loss(planar(20.0), w2) == pytest.approx(10.0)


def test_margin_floor_at_zero():
    w = DisturbWorkload(q_fbe=1e3)
    assert margin_after_disturb(planar(20.0), op(0.648), w) == 0.0


def test_with_charge_loss_split():
    w = DisturbWorkload().with_charge_loss(0.2, rh_share=0.25)
    assert w.charge_loss == pytest.approx(0.2)
    assert w.rh_toggles * w.q_rh == pytest.approx(0.25 * 0.2e3)
    with pytest.raises(ValueError):
        DisturbWorkload().with_charge_loss(0.2, rh_share=1.5)


def test_shipped_disturbed_margin(shipped):
    c = shipped.config("si3d", 137)
    m = margin_after_disturb(c, shipped.operating_point["si3d"], shipped.workload)
    assert m == pytest.approx(70.0, abs=2.0)


def test_disturbed_margin_decreases_with_layers(shipped):
    o, w = shipped.operating_point["si3d"], shipped.workload
    ms = [margin_after_disturb(shipped.config("si3d", n), o, w) for n in range(10, 201)]
    assert all(b < a for a, b in zip(ms, ms[1:]))


# -- timing -------------------------------------------------------------------

@pytest.mark.parametrize("name,expected", [("d1b", 1.43), ("si3d", 0.426)])
def test_wordline_delay(name, expected):
    assert wordline_delay(builtin(name)) == pytest.approx(expected, abs=0.005)


def test_wordline_delay_zero_resistance():
    assert wordline_delay(dataclasses.replace(builtin("si3d"), rwl=0.0)) == 0.0


@pytest.mark.parametrize("name,expected", [("d1b", 1.06), ("si3d", 0.287)])
def test_restore_time(name, expected):
    p = builtin(name)
    c = ArrayConfig(p, RoutingTopology.for_scheme("direct_blsa"), 10 if p.is_3d else None)
    assert restore_time(c, op(0.648)) == pytest.approx(expected, abs=0.005)


def test_restore_time_infinite_drive():
    p = builtin("si3d")
    p = dataclasses.replace(p, transistor=dataclasses.replace(p.transistor, i_on=math.inf))
    c = ArrayConfig(p, RoutingTopology.for_scheme("direct_blsa"), 10)
    assert restore_time(c, op(0.648)) == 0.0


def test_bitline_time_constant_oracle():
    c = planar(20.0)
    # 49.6 kOhm * 20 fF = 0.992 ns
    assert bitline_time_constant(c) == pytest.approx(0.992)


def test_zero_factors_leave_overhead():
    t = TimingModel(k_wl=0, k_bl=0, t_sense=0, k_restore=0, t_overhead=3.25)
    assert row_cycle_time(planar(20.0), op(0.648), t).total == 3.25


@given(k_wl=st.floats(0, 10), k_bl=st.floats(0, 10), t_s=st.floats(0, 5), k_r=st.floats(0, 50),
       t_o=st.floats(0, 5), n=st.integers(1, 300), name=st.sampled_from(["si3d", "aos3d"]))
def test_stages_nonnegative_and_sum(k_wl, k_bl, t_s, k_r, t_o, n, name):
    t = TimingModel(k_wl, k_bl, t_s, k_r, t_o)
    c = ArrayConfig(builtin(name), RoutingTopology.for_scheme("selector_strap"), n)
    b = row_cycle_time(c, op(0.6, 1.8), t)
    parts = list(b.as_dict().values())
    assert all(x >= 0 for x in parts)
    assert b.total == pytest.approx(math.fsum(parts), rel=1e-15, abs=1e-15)


def test_shipped_trc(shipped):
    t = {n: row_cycle_time(shipped.config(n), shipped.operating_point[n], shipped.timing).total
         for n in shipped.profile_names}
    assert t["d1b"] == pytest.approx(21.3, abs=0.1)
    assert t["si3d"] <= 10.9 and t["aos3d"] <= 10.5
    assert t["si3d"] <= 0.52 * t["d1b"] and t["aos3d"] <= 0.52 * t["d1b"]


# -- energy -------------------------------------------------------------------

def test_energy_hand_oracle():
    # aos3d, 87 layers, direct: C = 87*0.128 + 4 = 15.136 fF
    c = ArrayConfig(builtin("aos3d"), RoutingTopology.for_scheme("direct_blsa"), 87)
    o = OperatingPoint(v_array=0.6, v_pp=1.6)
    e_wl = (94.4 + 33.2) * 1.6 ** 2 / 1024
    w = energy_per_bit(c, o, "write")
    r = energy_per_bit(c, o, "read")
    assert w.wordline == pytest.approx(e_wl) and r.wordline == pytest.approx(e_wl)
    assert w.bitline == pytest.approx(15.136 * 0.36)
    assert r.bitline == pytest.approx(15.136 * 0.09)
    assert w.total == pytest.approx(15.136 * 0.36 + e_wl)


def test_energy_small_swing_leaves_wordline_share():
    c = planar(20.0)
    e = energy_per_bit(c, OperatingPoint(v_array=1e-9, v_pp=2.5), "write")
    assert e.total == pytest.approx(e.wordline, rel=1e-12)


def test_energy_uses_switched_capacitance():
    a = energy_per_bit(planar(20.0), op(0.648), "write")
    b = energy_per_bit(planar(5.0), op(0.648), "write")
    assert a == b


def test_energy_bad_op():
    with pytest.raises(ValueError):
        energy_per_bit(planar(20.0), op(0.648), "erase")


@given(v=st.floats(1e-3, 1.6), n=st.integers(1, 300))
def test_read_below_write(v, n):
    c = ArrayConfig(builtin("si3d"), RoutingTopology.for_scheme("selector_strap"), n)
    o = OperatingPoint(v_array=v, v_pp=1.8)
    assert energy_per_bit(c, o, "read").total < energy_per_bit(c, o, "write").total


def test_shipped_energy_ratio(shipped):
    def rw(n):
        c, o = shipped.config(n), shipped.operating_point[n]
        return energy_per_bit(c, o, "read").total + energy_per_bit(c, o, "write").total
    for n in ("si3d", "aos3d"):
        assert rw(n) <= 0.5 * rw("d1b")


# -- value objects ----------------------------------------------------------

def test_operating_point_rules():
    with pytest.raises(ValidationError):
        OperatingPoint(v_array=0.0, v_pp=1.0)
    with pytest.raises(ValidationError):
        OperatingPoint(v_array=2.0, v_pp=1.0)
    with pytest.raises(ValidationError):
        OperatingPoint(v_array=0.5, v_pp=1.0, v_sense=0.0)
    o = OperatingPoint.for_profile(builtin("aos3d"), 0.6)
    assert (o.v_pp, o.v_bb_wl, o.sense_level) == (1.6, -0.6, 0.6)


@pytest.mark.parametrize("obj", [
    OperatingPoint(0.6, 1.8, -0.3, 0.7), DisturbWorkload(q_rh=1.0, q_fbe=0.5), TimingModel(k_restore=3.0),
])
def test_value_round_trip(obj):
    assert type(obj).from_dict(obj.to_dict()) == obj


@pytest.mark.parametrize("cls", [OperatingPoint, DisturbWorkload, TimingModel])
def test_unknown_key(cls):
    d = {"v_array": 1.0, "v_pp": 1.0} if cls is OperatingPoint else {}
    d["nope"] = 1
    with pytest.raises(ValidationError):
        cls.from_dict(d)


def test_negative_inputs_rejected():
    with pytest.raises(ValidationError):
        TimingModel(k_bl=-1)
    with pytest.raises(ValidationError):
        DisturbWorkload(q_rh=-1)
