"""Ideal multiport components and their interconnection.

Components are frequency-independent S-matrices with labelled ports. A
:class:`Netlist` wires ports pairwise; :func:`connect` eliminates the
internal waves and returns the S-matrix seen from the remaining (external)
ports.

Beam splitter convention: ports 1, 2 face ports 3, 4; straight-through
amplitude ``1/sqrt(2)`` (1->3, 2->4), cross amplitude ``1j/sqrt(2)``
(1->4, 2->3). Other conventions permute the circulation direction of the
gyrator-based circulator.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .dynamics import ScatteringMatrix

SINGULAR_COND = 1e13

PortRef = tuple[str, str]


class NetlistError(ValueError):
    pass


class SingularNetworkError(ArithmeticError):
    pass


@dataclass(frozen=True)
class NetworkComponent:
    name: str
    ports: tuple[str, ...]
    S: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=complex)
        if S.shape != (len(self.ports), len(self.ports)):
            raise ValueError(f"{self.name}: S has shape {S.shape} for {len(self.ports)} ports")
        if len(set(self.ports)) != len(self.ports):
            raise ValueError(f"{self.name}: duplicate port labels")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "ports", tuple(self.ports))

    def __getitem__(self, key: tuple[str, str]) -> complex:
        out, inp = key
        return complex(self.S[self.ports.index(str(out)), self.ports.index(str(inp))])


_R = 1 / np.sqrt(2)

_IDEAL = {
    "gyrator": [[0, 1], [-1, 0]],
    "transmission_line": [[0, 1], [1, 0]],
    "beam_splitter": [
        [0, 0, _R, 1j * _R],
        [0, 0, 1j * _R, _R],
        [_R, 1j * _R, 0, 0],
        [1j * _R, _R, 0, 0],
    ],
    "matched_load": [[0]],
    "isolator": [[0, 0], [1, 0]],
    # 1 -> 2 -> 3 -> 4 -> 1
    "circulator4": [[0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]],
}

IDEAL_NAMES = tuple(_IDEAL)


def ideal(name: str) -> NetworkComponent:
    """Canonical lossless/matched element; ports are labelled ``"1"..."n"``."""
    try:
        S = np.array(_IDEAL[name], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown component {name!r}; choose from {', '.join(IDEAL_NAMES)}") from None
    return NetworkComponent(name, tuple(str(i + 1) for i in range(len(S))), S)


def from_scattering(S: ScatteringMatrix, name: str = "device", external_only: bool = True) -> NetworkComponent:
    """Wrap an engine scattering matrix (one detuning) as a component."""
    if external_only:
        return NetworkComponent(name, S.external_ports, S.external)
    return NetworkComponent(name, S.ports, S.S)


@dataclass
class Netlist:
    """Component instances, port-to-port wiring and the external port order.

    ``external`` lists ``(instance, port)`` pairs, optionally renamed through
    ``labels``; when empty, every unconnected port is external, in instance
    then port order.
    """

    components: Mapping[str, NetworkComponent]
    connections: Sequence[tuple[PortRef, PortRef]] = ()
    external: Sequence[PortRef] = ()
    labels: Sequence[str] = ()
    name: str = "network"

    def all_ports(self) -> list[PortRef]:
        return [(inst, p) for inst, comp in self.components.items() for p in comp.ports]

    def check(self) -> list[PortRef]:
        """Validate the wiring and return the external port list."""
        known = set(self.all_ports())
        used: dict[PortRef, int] = {}
        for n, pair in enumerate(self.connections):
            a, b = (tuple(x) for x in pair)
            if a == b:
                raise NetlistError(f"connection {n}: port {a[0]}.{a[1]} connected to itself")
            for ref in (a, b):
                if ref not in known:
                    raise NetlistError(f"connection {n}: unknown port {ref[0]}.{ref[1]}")
                if ref in used:
                    raise NetlistError(f"port {ref[0]}.{ref[1]} is connected more than once "
                                       f"(connections {used[ref]} and {n})")
                used[ref] = n
        if self.external:
            external = [tuple(r) for r in self.external]
            for ref in external:
                if ref not in known:
                    raise NetlistError(f"unknown external port {ref[0]}.{ref[1]}")
                if ref in used:
                    raise NetlistError(f"external port {ref[0]}.{ref[1]} is also connected")
            if len(set(external)) != len(external):
                raise NetlistError("external port listed twice")
            dangling = known - set(used) - set(external)
            if dangling:
                ref = sorted(dangling)[0]
                raise NetlistError(f"port {ref[0]}.{ref[1]} is neither connected nor external")
        else:
            external = [r for r in self.all_ports() if r not in used]
        if not external:
            raise NetlistError("netlist has no external ports")
        if self.labels and len(self.labels) != len(external):
            raise NetlistError(f"{len(self.labels)} labels for {len(external)} external ports")
        return external


def connect(netlist: Netlist) -> NetworkComponent:
    """Reduce a netlist to the S-matrix over its external ports.

    With incident waves ``a`` and outgoing ``b = S a`` stacked over all
    ports, each connection sets the incident wave on one side equal to the
    outgoing wave on the other. Solving ``(I - C S_ii) a_i = C S_ie a_e``
    for the internal incident waves gives
    ``S_ext = S_ee + S_ei (I - C S_ii)^{-1} C S_ie``.
    """
    external = netlist.check()
    ports = netlist.all_ports()
    pos = {ref: n for n, ref in enumerate(ports)}
    blocks = [netlist.components[inst].S for inst in netlist.components]
    size = len(ports)
    S = np.zeros((size, size), dtype=complex)
    start = 0
    for B in blocks:
        k = B.shape[0]
        S[start:start + k, start:start + k] = B
        start += k

    ext = [pos[r] for r in external]
    internal = [pos[tuple(r)] for pair in netlist.connections for r in pair]
    labels = tuple(netlist.labels) if netlist.labels else tuple(f"{i}.{p}" for i, p in external)
    if not internal:
        return NetworkComponent(netlist.name, labels, S[np.ix_(ext, ext)])

    # C swaps the two ends of each connection
    n_int = len(internal)
    C = np.zeros((n_int, n_int))
    for m in range(0, n_int, 2):
        C[m, m + 1] = C[m + 1, m] = 1.0
    S_ii = S[np.ix_(internal, internal)]
    S_ie = S[np.ix_(internal, ext)]
    S_ei = S[np.ix_(ext, internal)]
    S_ee = S[np.ix_(ext, ext)]
    A = np.eye(n_int) - C @ S_ii
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularNetworkError(
            f"internal connections of {netlist.name!r} form a lossless resonant loop "
            f"(condition number {cond:.3g})")
    a_int = np.linalg.solve(A, C @ S_ie)
    return NetworkComponent(netlist.name, labels, S_ee + S_ei @ a_int)


def terminate(component: NetworkComponent, ports: Sequence[str]) -> NetworkComponent:
    """Attach matched loads to ``ports`` and reduce to the remaining ports."""
    ports = [str(p) for p in ports]
    for p in ports:
        if p not in component.ports:
            raise NetlistError(f"{component.name} has no port {p!r}")
    remaining = [p for p in component.ports if p not in ports]
    if not remaining:
        raise NetlistError("terminating every port leaves no external port")
    comps = {component.name: component}
    conns = []
    for p in ports:
        load = f"load_{p}"
        comps[load] = ideal("matched_load")
        conns.append(((component.name, p), (load, "1")))
    return connect(Netlist(comps, conns, [(component.name, p) for p in remaining],
                           labels=remaining, name=f"{component.name}_terminated"))


def gyrator_circulator() -> Netlist:
    """Two beam splitters around a gyrator arm and a plain line arm.

    External ports 1 and 3 sit on the first splitter, 2 and 4 on the
    second; the reduced network circulates 1 -> 2 -> 3 -> 4 -> 1.
    """
    comps = {
        "bs1": ideal("beam_splitter"),
        "gyr": ideal("gyrator"),
        "tl": ideal("transmission_line"),
        "bs2": ideal("beam_splitter"),
    }
    conns = [
        (("bs1", "3"), ("gyr", "1")),
        (("gyr", "2"), ("bs2", "1")),
        (("bs1", "4"), ("tl", "1")),
        (("tl", "2"), ("bs2", "2")),
    ]
    external = [("bs1", "1"), ("bs2", "3"), ("bs1", "2"), ("bs2", "4")]
    return Netlist(comps, conns, external, labels=("1", "2", "3", "4"), name="circulator")
