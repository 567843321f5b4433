"""Switched linear RC transient solver (modified nodal analysis, backward
Euler) and a generator for bitline charge-sharing networks.

Everything here is in SI units: ohms, farads, seconds, volts. Node 0 is
ground; capacitors are ground-referenced.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .electrical import OperatingPoint
from .topology import ArrayConfig, Scheme, effective_bl_capacitance, switched_bl_capacitance
from .units import FF, KOHM, UA

__all__ = [
    "Resistor",
    "Capacitor",
    "Switch",
    "Source",
    "RcNetwork",
    "Waveform",
    "SingularNetworkError",
    "build_bl_network",
    "transient",
    "settle_time",
    "charge_audit",
    "simulate_sense_margin",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 1000
_MIN_OHMS = 1e-3


class SingularNetworkError(RuntimeError):
    def __init__(self, node: int, message: str = "node has no DC path to a capacitor, source or ground"):
        self.node = node
        super().__init__(f"node {node}: {message}")


@dataclass(frozen=True)
class Resistor:
    a: int
    b: int
    ohms: float


@dataclass(frozen=True)
class Capacitor:
    node: int
    farads: float
    v0: float = 0.0


@dataclass(frozen=True)
class Switch:
    """Ideal resistor toggled between ``r_on`` and open.

    ``schedule`` is a time-sorted list of (time, closed); the switch is open
    before its first entry.
    """

    a: int
    b: int
    r_on: float
    schedule: tuple[tuple[float, bool], ...] = ((0.0, True),)

    def closed_at(self, t: float) -> bool:
        state = False
        for ts, closed in self.schedule:
            if ts <= t:
                state = closed
            else:
                break
        return state


@dataclass(frozen=True)
class Source:
    """Ideal voltage source to ground with a piecewise-linear waveform."""

    node: int
    pwl: tuple[tuple[float, float], ...]

    def value(self, t: float) -> float:
        ts = [p[0] for p in self.pwl]
        vs = [p[1] for p in self.pwl]
        return float(np.interp(t, ts, vs))


@dataclass(frozen=True)
class RcNetwork:
    node_count: int
    resistors: tuple[Resistor, ...] = ()
    capacitors: tuple[Capacitor, ...] = ()
    switches: tuple[Switch, ...] = ()
    sources: tuple[Source, ...] = ()
    labels: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.node_count
        if n < 2:
            raise ValueError("network needs at least one non-ground node")

        def chk(node, what):
            if not 0 <= node < n:
                raise ValueError(f"{what}: node {node} out of range [0, {n})")

        for r in self.resistors:
            chk(r.a, "resistor"), chk(r.b, "resistor")
            if not r.ohms > 0:
                raise ValueError(f"resistor {r.a}-{r.b}: ohms must be > 0")
        for c in self.capacitors:
            chk(c.node, "capacitor")
            if c.node == 0:
                raise ValueError("capacitor on the ground node")
            if not c.farads > 0:
                raise ValueError(f"capacitor at node {c.node}: farads must be > 0")
        for s in self.switches:
            chk(s.a, "switch"), chk(s.b, "switch")
            if not s.r_on > 0:
                raise ValueError(f"switch {s.a}-{s.b}: r_on must be > 0")
            times = [t for t, _ in s.schedule]
            if times != sorted(times):
                raise ValueError(f"switch {s.a}-{s.b}: schedule not time-sorted")
        seen = set()
        for src in self.sources:
            chk(src.node, "source")
            if src.node == 0 or src.node in seen:
                raise ValueError(f"source node {src.node} is ground or driven twice")
            seen.add(src.node)
            times = [t for t, _ in src.pwl]
            if not times or times != sorted(times):
                raise ValueError(f"source at node {src.node}: waveform not time-sorted")

    @property
    def event_times(self) -> list[float]:
        return sorted({t for s in self.switches for t, _ in s.schedule})

    def total_capacitance(self) -> float:
        return sum(c.farads for c in self.capacitors)

    def to_json(self) -> str:
        return json.dumps({
            "node_count": self.node_count,
            "labels": self.labels,
            "resistors": [[r.a, r.b, r.ohms] for r in self.resistors],
            "capacitors": [[c.node, c.farads, c.v0] for c in self.capacitors],
            "switches": [{"a": s.a, "b": s.b, "r_on": s.r_on,
                          "schedule": [[t, st] for t, st in s.schedule]} for s in self.switches],
            "sources": [{"node": s.node, "pwl": [list(p) for p in s.pwl]} for s in self.sources],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RcNetwork":
        d = json.loads(text)
        unknown = set(d) - {"node_count", "labels", "resistors", "capacitors", "switches", "sources"}
        if unknown:
            raise ValueError(f"unknown netlist keys: {sorted(unknown)}")
        return cls(
            node_count=d["node_count"],
            resistors=tuple(Resistor(int(a), int(b), float(r)) for a, b, r in d.get("resistors", [])),
            capacitors=tuple(Capacitor(int(n), float(c), float(v)) for n, c, v in d.get("capacitors", [])),
            switches=tuple(Switch(int(s["a"]), int(s["b"]), float(s["r_on"]),
                                  tuple((float(t), bool(st)) for t, st in s["schedule"]))
                           for s in d.get("switches", [])),
            sources=tuple(Source(int(s["node"]), tuple((float(t), float(v)) for t, v in s["pwl"]))
                          for s in d.get("sources", [])),
            labels={str(k): int(v) for k, v in d.get("labels", {}).items()},
        )


@dataclass(frozen=True)
class Waveform:
    times: np.ndarray
    probes: tuple[int, ...]
    values: np.ndarray  # shape (len(times), len(probes))

    def node(self, k: int) -> np.ndarray:
        try:
            return self.values[:, self.probes.index(k)]
        except ValueError:
            raise KeyError(f"node {k} was not probed") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(["time_s"] + [f"node_{k}" for k in self.probes]) + "\n")
        for t, row in zip(self.times, self.values):
            buf.write(",".join(f"{x:.9e}" for x in (t, *row)) + "\n")
        return buf.getvalue()


# -- solver ----------------------------------------------------------------

def _conductance_edges(net: RcNetwork, closed: Sequence[bool]) -> list[tuple[int, int, float]]:
    edges = [(r.a, r.b, 1.0 / r.ohms) for r in net.resistors]
    edges += [(s.a, s.b, 1.0 / s.r_on) for s, c in zip(net.switches, closed) if c]
    return edges


def _check_solvable(net: RcNetwork, edges, closed) -> None:
    parent = list(range(net.node_count))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, _ in edges:
        parent[find(a)] = find(b)
    anchored = {find(0)}
    anchored |= {find(c.node) for c in net.capacitors}
    anchored |= {find(s.node) for s in net.sources}
    for node in range(1, net.node_count):
        if find(node) not in anchored:
            raise SingularNetworkError(node)


class _System:
    """MNA matrices for one switch state; unknowns are v[1:] then source currents."""

    def __init__(self, net: RcNetwork, closed: tuple[bool, ...]):
        n = net.node_count - 1
        m = len(net.sources)
        edges = _conductance_edges(net, closed)
        _check_solvable(net, edges, closed)
        rows, cols, vals = [], [], []

        def stamp(i, j, g):
            rows.append(i), cols.append(j), vals.append(g)

        for a, b, g in edges:
            if a:
                stamp(a - 1, a - 1, g)
            if b:
                stamp(b - 1, b - 1, g)
            if a and b:
                stamp(a - 1, b - 1, -g)
                stamp(b - 1, a - 1, -g)
        for k, s in enumerate(net.sources):
            stamp(s.node - 1, n + k, 1.0)
            stamp(n + k, s.node - 1, 1.0)
        size = n + m
        self.size = size
        self.n = n
        self.G = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(size, size))
        cdiag = np.zeros(size)
        for c in net.capacitors:
            cdiag[c.node - 1] += c.farads
        self.cdiag = cdiag
        self._lu: dict[float, object] = {}

    def solve(self, h: float, rhs: np.ndarray) -> np.ndarray:
        lu = self._lu.get(h)
        if lu is None:
            a = self.G + scipy.sparse.diags(self.cdiag / h)
            if self.size <= DENSE_LIMIT:
                lu = ("dense", scipy.linalg.lu_factor(a.toarray(), check_finite=False))
            else:
                lu = ("sparse", scipy.sparse.linalg.splu(a.tocsc()))
            self._lu[h] = lu
        kind, f = lu
        if kind == "dense":
            return scipy.linalg.lu_solve(f, rhs, check_finite=False)
        return f.solve(rhs)


def _initial_state(net: RcNetwork, system: _System) -> np.ndarray:
    """Capacitor and source nodes at their initial values; the remaining
    (purely resistive) nodes solved from the conductance network."""
    n = net.node_count - 1
    v = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    for c in net.capacitors:
        v[c.node - 1] = c.v0
        fixed[c.node - 1] = True
    for s in net.sources:
        v[s.node - 1] = s.value(0.0)
        fixed[s.node - 1] = True
    free = ~fixed
    if free.any():
        g = system.G.toarray()[:n, :n]
        gff = g[np.ix_(free, free)]
        rhs = -g[np.ix_(free, fixed)] @ v[fixed]
        try:
            v[free] = np.linalg.solve(gff, rhs)
        except np.linalg.LinAlgError:
            bad = int(np.flatnonzero(free)[0]) + 1
            raise SingularNetworkError(bad) from None
    return v


def _time_grid(dt: float, t_end: float, events: Iterable[float]) -> np.ndarray:
    steps = int(np.ceil(t_end / dt - 1e-9))
    grid = np.minimum(np.arange(steps + 1) * dt, t_end)
    ev = np.array(sorted({t for t in events if 0 < t < t_end}), dtype=float)
    if ev.size:
        # grid points a sliver away from an event are replaced by the event
        near = np.min(np.abs(grid[:, None] - ev[None, :]), axis=1) < 1e-9 * dt
        near[0] = near[-1] = False
        grid = np.union1d(grid[~near], ev)
    return grid


def transient(network: RcNetwork, dt: float, t_end: float,
              probes: Sequence[int] | None = None) -> Waveform:
    """Backward-Euler integration over [0, t_end].

    Switch states change exactly at their schedule times: the step that
    starts at an event time already uses the new state.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if t_end < dt:
        raise ValueError("t_end must be >= dt")
    if probes is None:
        probes = range(1, network.node_count)
    probes = tuple(int(p) for p in probes)
    for p in probes:
        if not 0 <= p < network.node_count:
            raise ValueError(f"probe node {p} out of range")

    times = _time_grid(dt, t_end, network.event_times)
    systems: dict[tuple[bool, ...], _System] = {}

    def system_at(t):
        key = tuple(s.closed_at(t) for s in network.switches)
        if key not in systems:
            systems[key] = _System(network, key)
        return systems[key]

    sys0 = system_at(0.0)
    n = sys0.n
    v = _initial_state(network, sys0)
    pidx = [p - 1 for p in probes]

    def sample(vec):
        return [0.0 if i < 0 else vec[i] for i in pidx]

    out = np.empty((times.size, len(probes)))
    out[0] = sample(v)
    x = np.zeros(sys0.size)
    for k in range(1, times.size):
        t0, t1 = times[k - 1], times[k]
        h = t1 - t0
        system = system_at(t0)
        x[:] = 0.0
        x[:n] = system.cdiag[:n] / h * v
        for j, s in enumerate(network.sources):
            x[n + j] = s.value(t1)
        v = system.solve(h, x)[:n]
        out[k] = sample(v)
    return Waveform(times=times, probes=probes, values=out)


def settle_time(w: Waveform, node: int, target: float, tolerance: float) -> float | None:
    """First time after which the node stays within ``tolerance`` x swing of
    ``target``; None if it is still outside the band at the last sample."""
    if not 0 < tolerance < 1:
        raise ValueError("tolerance must lie in (0, 1)")
    v = w.node(node)
    t = w.times
    swing = abs(target - v[0])
    band = tolerance * swing
    err = np.abs(v - target)
    outside = np.flatnonzero(err > band)
    if outside.size == 0:
        return float(t[0])
    i = int(outside[-1])
    if i == v.size - 1:
        return None
    e0, e1 = err[i], err[i + 1]
    frac = (e0 - band) / (e0 - e1) if e0 != e1 else 1.0
    return float(t[i] + frac * (t[i + 1] - t[i]))


def charge_audit(network: RcNetwork, w: Waveform, t_start: float, t_end: float) -> float:
    """Relative change of total stored charge between two waveform samples.

    Only meaningful on an interval with no switching and no source drive;
    both conditions are enforced.
    """
    if t_end < t_start:
        raise ValueError("t_end before t_start")
    inside = [t for t in network.event_times if t_start < t < t_end]
    if inside:
        raise ValueError(f"interval contains switch event at t={inside[0]:.6g} s")
    if network.sources:
        closed = tuple(s.closed_at(t_start) for s in network.switches)
        edges = _conductance_edges(network, closed)
        reach = _reachable(network.node_count, edges, {s.node for s in network.sources})
        cap_nodes = {c.node for c in network.capacitors}
        if reach & cap_nodes:
            raise ValueError("a source drives the capacitive island; charge is not conserved")
    if t_end == t_start:
        return 0.0
    i0 = int(np.argmin(np.abs(w.times - t_start)))
    i1 = int(np.argmin(np.abs(w.times - t_end)))

    def charge(i):
        return sum(c.farads * w.values[i, w.probes.index(c.node)] for c in network.capacitors)

    try:
        q0, q1 = charge(i0), charge(i1)
    except ValueError:
        raise KeyError("waveform must probe every capacitor node") from None
    if q0 == 0:
        return abs(q1)
    return abs(q1 - q0) / abs(q0)


def _reachable(node_count, edges, start: set[int]) -> set[int]:
    adj: dict[int, list[int]] = {}
    for a, b, _ in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen = set(start)
    stack = list(start)
    while stack:
        u = stack.pop()
        for nb in adj.get(u, ()):
            if nb not in seen and nb != 0:
                seen.add(nb)
                stack.append(nb)
    return seen


# -- bitline network generator -----------------------------------------------

PLANAR_SECTIONS = 8


def build_bl_network(config: ArrayConfig, op_point: OperatingPoint,
                     t_access: float = 0.0) -> RcNetwork:
    """Charge-sharing network for one bitline read of a stored '1'.

    Node numbering: 1 = storage node, 2..n+1 = selected bitline ladder from
    the strap end upward (the cell hangs on the far, top end), then the
    strap/junction node, then the BLSA node; for ``bl_strap`` the extra
    bitline ladders follow. ``labels`` names the auxiliary nodes.
    Planar profiles use an 8-section ladder for their single bitline.
    """
    p = config.profile
    t = config.topology
    scheme = t.scheme
    n = config.n_layers if p.is_3d else PLANAR_SECTIONS
    v_pre = op_point.sense_level / 2

    ladders = t.bls_per_strap if scheme is Scheme.BL_STRAP else 1
    if scheme is Scheme.SELECTOR_STRAP:
        c_junction = t.selector.c_junction + t.c_strap_wire
    elif scheme is Scheme.BL_STRAP:
        c_junction = t.c_strap_wire
    elif scheme is Scheme.CORE_MUX:
        c_junction = t.c_mux_junction
    else:
        c_junction = 0.0
    c_fixed = c_junction + t.c_bond
    c_ladder_total = switched_bl_capacitance(config) - c_fixed
    if t.c_bl_effective is not None:
        c_ladder_total = effective_bl_capacitance(config) - c_fixed
        if c_ladder_total <= 0:
            raise ValueError("effective capacitance override leaves no bitline capacitance")
    c_section = c_ladder_total / (ladders * n) * FF
    r_total = p.rbl_per_layer * (config.n_layers if p.is_3d else 1) * KOHM
    r_section = max(r_total / n, _MIN_OHMS)

    node = 1
    storage = node
    node += 1
    first_ladder = list(range(node, node + n))
    node += n
    junction = node
    node += 1
    if t.r_bond > 0:
        blsa = node
        node += 1
    else:
        blsa = junction
    extra_ladders = []
    for _ in range(ladders - 1):
        extra_ladders.append(list(range(node, node + n)))
        node += n

    resistors: list[Resistor] = []
    caps: list[Capacitor] = [Capacitor(storage, p.cs * FF, op_point.sense_level)]
    switches: list[Switch] = []

    def add_ladder(nodes, with_selector):
        for k in nodes:
            caps.append(Capacitor(k, c_section, v_pre))
        for a, b in zip(nodes, nodes[1:]):
            resistors.append(Resistor(a, b, r_section))
        if with_selector:
            switches.append(Switch(nodes[0], junction, r_section + t.selector.r_on * KOHM,
                                   ((0.0, True),)))
        else:
            resistors.append(Resistor(nodes[0], junction, r_section))

    add_ladder(first_ladder, scheme is Scheme.SELECTOR_STRAP)
    for lad in extra_ladders:
        add_ladder(lad, False)

    r_access = p.transistor.v_pp / (p.transistor.i_on * UA)
    switches.insert(0, Switch(storage, first_ladder[-1], r_access,
                              ((0.0, False), (t_access, True)) if t_access > 0 else ((0.0, True),)))

    if blsa != junction:
        resistors.append(Resistor(junction, blsa, t.r_bond * KOHM))
        if c_junction > 0:
            caps.append(Capacitor(junction, c_junction * FF, v_pre))
        if t.c_bond > 0:
            caps.append(Capacitor(blsa, t.c_bond * FF, v_pre))
    elif c_fixed > 0:
        caps.append(Capacitor(junction, c_fixed * FF, v_pre))

    return RcNetwork(
        node_count=node,
        resistors=tuple(resistors),
        capacitors=tuple(caps),
        switches=tuple(switches),
        labels={"storage": storage, "ladder_bottom": first_ladder[0],
                "ladder_top": first_ladder[-1], "junction": junction, "blsa": blsa},
    )


def settling_horizon(network: RcNetwork) -> float:
    """Upper bound on the slowest time constant times a safety factor (s)."""
    r = sum(x.ohms for x in network.resistors) + sum(s.r_on for s in network.switches)
    return 15.0 * r * network.total_capacitance()


def simulate_sense_margin(config: ArrayConfig, op_point: OperatingPoint,
                          steps: int = 2000) -> float:
    """Bitline signal at the BLSA node after charge sharing settles, in mV."""
    net = build_bl_network(config, op_point)
    t_end = settling_horizon(net)
    blsa = net.labels["blsa"]
    w = transient(net, t_end / steps, t_end, probes=[blsa])
    return (w.node(blsa)[-1] - op_point.sense_level / 2) * 1e3
