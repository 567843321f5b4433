import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dram3d import circuit_sim
from dram3d.circuit_sim import (
    Capacitor,
    RcNetwork,
    Resistor,
    SingularNetworkError,
    Source,
    Switch,
    build_bl_network,
    charge_audit,
    settle_time,
    settling_horizon,
    simulate_sense_margin,
    transient,
)
from dram3d.electrical import OperatingPoint, sense_margin
from dram3d.tech_profile import builtin
from dram3d.topology import ArrayConfig, RoutingTopology, Scheme, SelectorDevice, effective_bl_capacitance

R, C = 10e3, 1e-15
TAU = R * C


def rc_step():
    return RcNetwork(3, resistors=(Resistor(1, 2, R),), capacitors=(Capacitor(2, C),),
                     sources=(Source(1, ((0.0, 1.0),)),))


# -- closed-form oracles ---------------------------------------------------------

def test_rc_step_matches_exponential():
    w = transient(rc_step(), TAU / 1000, 2 * TAU, probes=[2])
    i = int(np.argmin(np.abs(w.times - TAU)))
    assert w.times[i] == pytest.approx(TAU)
    exact = 1 - math.exp(-1)
    assert w.node(2)[i] == pytest.approx(exact, rel=1e-3)


def test_backward_euler_first_order():
    exact = 1 - math.exp(-1)
    errs = []
    for steps in (50, 100, 200, 400):
        w = transient(rc_step(), TAU / steps, TAU, probes=[2])
        errs.append(abs(w.node(2)[-1] - exact))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(0.8 <= p <= 1.2 for p in orders), orders


def test_two_capacitor_charge_share():
    net = RcNetwork(3, capacitors=(Capacitor(1, 4e-15, 0.648), Capacitor(2, 6.6e-15, 0.324)),
                    switches=(Switch(1, 2, 1e3),))
    w = transient(net, settling_horizon(net) / 2000, settling_horizon(net))
    v_final = (4 * 0.648 + 6.6 * 0.324) / 10.6
    assert v_final == pytest.approx(0.4463, abs=1e-4)
    assert w.node(2)[-1] == pytest.approx(v_final, rel=1e-6)
    dv_mv = (w.node(2)[-1] - 0.324) * 1e3
    lumped = sense_margin(ArrayConfig(builtin("d1b"), RoutingTopology(Scheme.DIRECT_BLSA, c_bl_effective=6.6)),
                          OperatingPoint(0.648, 2.5))
    assert dv_mv == pytest.approx(122.0, abs=0.5)
    assert dv_mv == pytest.approx(lumped, rel=0.01)


def test_equilibrium_is_constant():
    net = RcNetwork(4, resistors=(Resistor(1, 2, R), Resistor(2, 3, R)),
                    capacitors=(Capacitor(2, C, 0.8), Capacitor(3, C, 0.8)),
                    sources=(Source(1, ((0.0, 0.8), (1.0, 0.8))),))
    w = transient(net, TAU / 10, 5 * TAU)
    assert np.allclose(w.values, 0.8, rtol=0, atol=1e-15)


def test_switch_event_timing():
    net = RcNetwork(3, capacitors=(Capacitor(1, C, 1.0), Capacitor(2, C, 0.0)),
                    switches=(Switch(1, 2, R, ((0.0, False), (3 * TAU, True))),))
    w = transient(net, TAU / 7, 10 * TAU)
    assert 3 * TAU in set(w.times.tolist())
    before = w.times <= 3 * TAU
    assert np.all(w.node(2)[before] == 0.0)
    assert w.node(2)[-1] == pytest.approx(0.5, rel=1e-4)


def test_pwl_source_ramp():
    net = RcNetwork(2, sources=(Source(1, ((0.0, 0.0), (1e-9, 1.0))),),
                    capacitors=(Capacitor(1, C),))
    w = transient(net, 1e-10, 2e-9)
    assert w.node(1)[5] == pytest.approx(0.5)
    assert w.node(1)[-1] == 1.0


# -- random networks -------------------------------------------------------------

def random_island(rng, n_caps, extra_nodes=0, with_switches=True):
    """Connected capacitor island, no path to ground or sources."""
    n = n_caps + extra_nodes
    caps = tuple(Capacitor(k, rng.uniform(0.5, 20) * 1e-15, rng.uniform(0, 1.5))
                 for k in range(1, n_caps + 1))
    res, sw = [], []
    for k in range(2, n + 1):
        a, b = int(rng.integers(1, k)), k
        ohms = rng.uniform(0.1, 50) * 1e3
        if with_switches and rng.random() < 0.3:
            sw.append(Switch(a, b, ohms))
        else:
            res.append(Resistor(a, b, ohms))
    return RcNetwork(n + 1, resistors=tuple(res), capacitors=caps, switches=tuple(sw))


def shared_voltage(net):
    return sum(c.farads * c.v0 for c in net.capacitors) / net.total_capacitance()


@pytest.mark.parametrize("seed", range(100))
def test_random_charge_share_final_voltage(seed):
    rng = np.random.default_rng(seed)
    net = random_island(rng, int(rng.integers(2, 12)), extra_nodes=int(rng.integers(0, 3)))
    t_end = settling_horizon(net)
    w = transient(net, t_end / 3000, t_end)
    target = shared_voltage(net)
    for c in net.capacitors:
        assert w.node(c.node)[-1] == pytest.approx(target, rel=5e-3, abs=1e-9)
    assert charge_audit(net, w, 0.0, t_end) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_passivity_max_voltage_non_increasing(seed):
    rng = np.random.default_rng(seed)
    base = random_island(rng, int(rng.integers(2, 8)))
    ground = tuple(Resistor(c.node, 0, rng.uniform(10, 500) * 1e3)
                   for c in base.capacitors if rng.random() < 0.5)
    net = RcNetwork(base.node_count, resistors=base.resistors + ground,
                    capacitors=base.capacitors, switches=base.switches)
    w = transient(net, settling_horizon(net) / 500, settling_horizon(net) / 5)
    peak = w.values.max(axis=1)
    assert np.all(np.diff(peak) <= 1e-12)


def test_dense_and_sparse_paths_agree(monkeypatch):
    rng = np.random.default_rng(7)
    net = random_island(rng, 60, with_switches=False)
    t_end = settling_horizon(net) / 50
    dense = transient(net, t_end / 100, t_end)
    monkeypatch.setattr(circuit_sim, "DENSE_LIMIT", 10)
    sparse = transient(net, t_end / 100, t_end)
    assert np.allclose(dense.values, sparse.values, rtol=1e-10, atol=1e-13)


def test_large_network_uses_sparse_solver():
    n = 1200
    caps = tuple(Capacitor(k, 1e-15, 1.0 if k == 1 else 0.0) for k in range(1, n + 1))
    res = tuple(Resistor(k, k + 1, 1.0) for k in range(1, n))
    net = RcNetwork(n + 1, resistors=res, capacitors=caps)
    w = transient(net, 1e-15, 1e-14)
    assert charge_audit(net, w, 0.0, 1e-14) <= 1e-9
    assert w.node(1)[-1] < 1.0 and w.node(2)[-1] > 0.0


# -- settle time -------------------------------------------------------------------

def test_settle_time_ten_percent():
    w = transient(rc_step(), TAU / 1000, 5 * TAU, probes=[2])
    t = settle_time(w, 2, 1.0, 0.1)
    assert t == pytest.approx(math.log(10) * TAU, rel=0.02)


def test_settle_time_already_there():
    net = RcNetwork(2, capacitors=(Capacitor(1, C, 0.5),))
    w = transient(net, TAU, 3 * TAU)
    assert settle_time(w, 1, 0.5, 0.1) == 0.0


def test_settle_time_not_reached():
    w = transient(rc_step(), TAU / 100, TAU, probes=[2])
    assert settle_time(w, 2, 1.0, 0.01) is None
    with pytest.raises(ValueError):
        settle_time(w, 2, 1.0, 1.5)


def elmore_far_end(r_sections, c_sections):
    """Elmore delay at the far end of a chain: sum over resistors of R times
    all capacitance downstream of it (tree recursion on a path)."""
    downstream = 0.0
    delays = []
    for c in reversed(c_sections):
        downstream += c
        delays.append(downstream)
    delays.reverse()
    return sum(r * cd for r, cd in zip(r_sections, delays))


@pytest.mark.parametrize("sections", [8, 16])
def test_ladder_half_swing_tracks_elmore(sections):
    r, c = 2e3, 0.5e-15
    res = (Resistor(1, 2, r),) + tuple(Resistor(k, k + 1, r) for k in range(2, sections + 1))
    caps = tuple(Capacitor(k, c) for k in range(2, sections + 2))
    net = RcNetwork(sections + 2, resistors=res, capacitors=caps, sources=(Source(1, ((0.0, 1.0),)),))
    elmore = elmore_far_end([r] * sections, [c] * sections)
    assert elmore == pytest.approx(r * c * sections * (sections + 1) / 2)
    far = sections + 1
    w = transient(net, elmore / 2000, 4 * elmore, probes=[far])
    v = w.node(far)
    k = int(np.flatnonzero(v >= 0.5)[0])
    t50 = np.interp(0.5, v[k - 1:k + 1], w.times[k - 1:k + 1])
    assert t50 == pytest.approx(math.log(2) * elmore, rel=0.20)


# -- charge audit preconditions -------------------------------------------------------

def test_audit_island():
    net = RcNetwork(3, capacitors=(Capacitor(1, 4e-15, 1.0), Capacitor(2, 6e-15, 0.0)),
                    resistors=(Resistor(1, 2, R),))
    w = transient(net, TAU / 10, 20 * TAU)
    assert charge_audit(net, w, 5 * TAU, 20 * TAU) <= 1e-6
    assert charge_audit(net, w, TAU, TAU) == 0.0


def test_audit_rejects_driven_island():
    w = transient(rc_step(), TAU / 10, TAU)
    with pytest.raises(ValueError):
        charge_audit(rc_step(), w, 0.0, TAU)


def test_audit_rejects_switch_event_inside():
    net = RcNetwork(3, capacitors=(Capacitor(1, C, 1.0), Capacitor(2, C, 0.0)),
                    switches=(Switch(1, 2, R, ((0.0, False), (TAU, True))),))
    w = transient(net, TAU / 10, 3 * TAU)
    with pytest.raises(ValueError):
        charge_audit(net, w, 0.0, 2 * TAU)
    assert charge_audit(net, w, 1.5 * TAU, 3 * TAU) <= 1e-6


# -- network validation ---------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(node_count=1),
    dict(resistors=(Resistor(1, 5, R),)),
    dict(resistors=(Resistor(1, 2, 0.0),)),
    dict(capacitors=(Capacitor(0, C),)),
    dict(capacitors=(Capacitor(1, -C),)),
    dict(switches=(Switch(1, 2, R, ((1.0, True), (0.0, False))),)),
    dict(sources=(Source(1, ((0.0, 1.0),)), Source(1, ((0.0, 2.0),)))),
    dict(sources=(Source(1, ()),)),
])
def test_invalid_networks(kw):
    base = dict(node_count=3)
    base.update(kw)
    with pytest.raises(ValueError):
        RcNetwork(**base)


def test_floating_node_is_singular():
    net = RcNetwork(4, resistors=(Resistor(2, 3, R),), capacitors=(Capacitor(1, C),))
    with pytest.raises(SingularNetworkError) as e:
        transient(net, TAU, 2 * TAU)
    assert e.value.node in (2, 3)


def test_transient_argument_checks():
    with pytest.raises(ValueError):
        transient(rc_step(), 0.0, TAU)
    with pytest.raises(ValueError):
        transient(rc_step(), TAU, TAU / 2)
    with pytest.raises(ValueError):
        transient(rc_step(), TAU, 2 * TAU, probes=[9])
    w = transient(rc_step(), TAU, 2 * TAU, probes=[2])
    with pytest.raises(KeyError):
        w.node(1)


def test_json_round_trip():
    net = RcNetwork(4, resistors=(Resistor(1, 2, R),), capacitors=(Capacitor(2, C, 0.3),),
                    switches=(Switch(2, 3, 5e3, ((0.0, False), (1e-12, True))),),
                    sources=(Source(1, ((0.0, 0.0), (1e-12, 1.2))),), labels={"out": 3})
    back = RcNetwork.from_json(net.to_json())
    assert back == net and back.labels == {"out": 3}
    with pytest.raises(ValueError):
        RcNetwork.from_json('{"node_count": 2, "wires": []}')


def test_waveform_csv():
    w = transient(rc_step(), TAU, 2 * TAU, probes=[1, 2])
    lines = w.to_csv().splitlines()
    assert lines[0] == "time_s,node_1,node_2"
    assert len(lines) == 1 + w.times.size
    back = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    assert np.allclose(back[:, 0], w.times) and np.allclose(back[:, 1:], w.values)


# -- bitline network ----------------------------------------------------------------------

def bl_config(name="si3d", scheme=Scheme.SELECTOR_STRAP, n=4, **kw):
    kw.setdefault("r_bond", 0.1)
    kw.setdefault("c_bond", 1.0)
    p = builtin(name)
    return ArrayConfig(p, RoutingTopology.for_scheme(scheme, **kw), n if p.is_3d else None)


OP = OperatingPoint(0.6, 1.8, v_sense=0.65)


def test_selector_strap_network_structure():
    cfg = bl_config()
    net = build_bl_network(cfg, OP)
    assert net.node_count - 1 == 4 + 3
    assert net.total_capacitance() == pytest.approx((effective_bl_capacitance(cfg) + 4.0) * 1e-15)
    assert set(net.labels) == {"storage", "ladder_bottom", "ladder_top", "junction", "blsa"}
    assert len(net.switches) == 2


def test_single_layer_degenerate_primitive():
    sel = SelectorDevice(c_junction=0.0)
    cfg = bl_config(scheme=Scheme.DIRECT_BLSA, n=1, r_bond=0.0, c_bond=0.0)
    net = build_bl_network(cfg, OP)
    assert len(net.capacitors) == 2 and len(net.switches) == 1
    cfg2 = bl_config(n=1, r_bond=0.0, c_bond=0.0, selector=sel)
    assert len(build_bl_network(cfg2, OP).capacitors) == 2


def test_bl_strap_has_one_ladder_per_bitline():
    cfg = bl_config(scheme=Scheme.BL_STRAP, n=5)
    net = build_bl_network(cfg, OP)
    ladder_caps = [c for c in net.capacitors if c.node not in (net.labels["storage"], net.labels["junction"],
                                                               net.labels["blsa"])]
    assert len(ladder_caps) == cfg.topology.bls_per_strap * 5
    assert net.total_capacitance() == pytest.approx((effective_bl_capacitance(cfg) + 4.0) * 1e-15)


def test_planar_network_uses_override():
    cfg = ArrayConfig(builtin("d1b"), RoutingTopology(Scheme.DIRECT_BLSA, c_bl_effective=20.0))
    net = build_bl_network(cfg, OperatingPoint(0.648, 2.5))
    assert net.total_capacitance() == pytest.approx(24e-15)
    assert simulate_sense_margin(cfg, OperatingPoint(0.648, 2.5)) == pytest.approx(54.0, rel=1e-3)


def test_delayed_access():
    cfg = bl_config()
    net = build_bl_network(cfg, OP, t_access=1e-10)
    assert 1e-10 in net.event_times


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("n", [1, 17, 137])
def test_transient_agrees_with_lumped_margin(scheme, n):
    for name in ("si3d", "aos3d"):
        cfg = bl_config(name, scheme, n)
        assert simulate_sense_margin(cfg, OP) == pytest.approx(sense_margin(cfg, OP), rel=0.05)
