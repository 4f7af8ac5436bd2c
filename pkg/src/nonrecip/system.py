"""Declarative description of linearized coupled-mode systems.

A system is a set of damped bosonic modes (microwave cavities and mechanical
oscillators) joined by beam-splitter couplings. All rates are angular
frequencies in rad/s. Mode detunings live in a common frame centred on the
conversion window: the dynamical matrix carries ``-1j*detuning + kappa/2`` on
its diagonal, so a mode resonates at probe detuning ``delta = -detuning``.

A coupling ``(first, second, rate, phase)`` contributes the Hamiltonian term
``rate * (exp(1j*phase) a_first a_second^dag + h.c.)``; hopping from
``first`` to ``second`` picks up ``phase``. Both the linearized
optomechanical term ``g (e^{i phi} a b^dag + h.c.)`` and the direct coherent
term ``J (e^{i theta} a1 a2^dag + h.c.)`` use this form.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace

ELECTROMAGNETIC = "electromagnetic"
MECHANICAL = "mechanical"
OPTOMECHANICAL = "optomechanical"
COHERENT = "coherent"

MODE_KINDS = (ELECTROMAGNETIC, MECHANICAL)
COUPLING_KINDS = (OPTOMECHANICAL, COHERENT)

_G0_RTOL = 1e-12


def wrap_phase(phase: float) -> float:
    """Wrap an angle into the half-open interval (-pi, pi]."""
    wrapped = math.pi - math.fmod(math.pi - phase, 2 * math.pi)
    if wrapped > math.pi:
        wrapped -= 2 * math.pi
    elif wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


@dataclass(frozen=True)
class Mode:
    """One damped bosonic mode.

    ``kappa_0`` is the intrinsic loss of a cavity, or the energy decay rate
    Gamma_m of a mechanical oscillator. ``n_bath`` is the thermal occupancy
    of the intrinsic bath.
    """

    id: str
    kind: str = ELECTROMAGNETIC
    detuning: float = 0.0
    kappa_ex: float = 0.0
    kappa_0: float = 0.0
    n_bath: float = 0.0

    @property
    def kappa(self) -> float:
        return self.kappa_ex + self.kappa_0

    @property
    def is_mechanical(self) -> bool:
        return self.kind == MECHANICAL


def cavity(id: str, kappa_ex: float, kappa_0: float = 0.0, detuning: float = 0.0,
           n_bath: float = 0.0) -> Mode:
    return Mode(id, ELECTROMAGNETIC, detuning, kappa_ex, kappa_0, n_bath)


def mechanics(id: str, gamma: float, detuning: float = 0.0, n_bath: float = 0.0) -> Mode:
    return Mode(id, MECHANICAL, detuning, 0.0, gamma, n_bath)


@dataclass(frozen=True)
class Coupling:
    """Beam-splitter coupling between two modes.

    ``rate`` may be left as ``None`` when both ``g0`` and ``n_c`` are given;
    validation then fills in ``g0 * sqrt(n_c)``.
    """

    first: str
    second: str
    rate: float | None = None
    phase: float = 0.0
    kind: str = OPTOMECHANICAL
    name: str = ""
    g0: float | None = None
    n_c: float | None = None

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.first, self.second)


@dataclass(frozen=True)
class SystemSpec:
    modes: tuple[Mode, ...]
    couplings: tuple[Coupling, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", tuple(self.couplings))


@dataclass(frozen=True)
class ValidatedSystem(SystemSpec):
    """A :class:`SystemSpec` that passed :func:`validate`.

    Phases are wrapped, rates are resolved and every coupling carries a
    unique name.
    """

    index: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def mode(self, mode_id: str) -> Mode:
        return self.modes[self.index[mode_id]]

    def coupling(self, ref: int | str | Coupling) -> Coupling:
        if isinstance(ref, Coupling):
            return ref
        if isinstance(ref, int):
            return self.couplings[ref]
        for c in self.couplings:
            if c.name == ref:
                return c
        raise KeyError(f"no coupling named {ref!r}")

    @property
    def electromagnetic(self) -> list[Mode]:
        return [m for m in self.modes if not m.is_mechanical]

    @property
    def mechanical(self) -> list[Mode]:
        return [m for m in self.modes if m.is_mechanical]


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


class ValidationError(ValueError):
    """Raised by :func:`validate`; carries every violation found."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _connected(mode_ids: Sequence[str], edges: Iterable[tuple[str, str]]) -> bool:
    if not mode_ids:
        return True
    adjacency: dict[str, set[str]] = {m: set() for m in mode_ids}
    for u, v in edges:
        adjacency[u].add(v)
        adjacency[v].add(u)
    seen = {mode_ids[0]}
    stack = [mode_ids[0]]
    while stack:
        for nxt in adjacency[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(mode_ids)


def validate(spec: SystemSpec) -> ValidatedSystem:
    """Check a system description and return its normalized form.

    Raises
    ------
    ValidationError
        Listing every violation (duplicate ids, dangling endpoints, negative
        or missing rates, undamped modes, kind mismatches, disconnected
        coupling graph).
    """
    problems: list[Violation] = []
    index: dict[str, int] = {}
    if not spec.modes:
        problems.append(Violation("modes", "at least one mode is required"))

    for i, m in enumerate(spec.modes):
        path = f"modes[{i}]"
        if m.id in index:
            problems.append(Violation(f"{path}.id", f"duplicate mode id {m.id!r}"))
        else:
            index[m.id] = i
        if m.kind not in MODE_KINDS:
            problems.append(Violation(f"{path}.kind", f"unknown mode kind {m.kind!r}"))
        for attr in ("detuning", "kappa_ex", "kappa_0", "n_bath"):
            if not math.isfinite(getattr(m, attr)):
                problems.append(Violation(f"{path}.{attr}", "must be finite"))
        for attr in ("kappa_ex", "kappa_0", "n_bath"):
            if getattr(m, attr) < 0:
                problems.append(Violation(f"{path}.{attr}", f"negative value {getattr(m, attr)!r}"))
        if m.kind == MECHANICAL and m.kappa_ex != 0:
            problems.append(Violation(f"{path}.kappa_ex",
                                      f"mechanical mode {m.id!r} cannot have an external port"))
        if not m.kappa > 0:
            problems.append(Violation(path, f"mode {m.id!r} has zero total decay"))

    couplings: list[Coupling] = []
    names: set[str] = set()
    for i, c in enumerate(spec.couplings):
        path = f"couplings[{i}]"
        for end in c.endpoints:
            if end not in index:
                problems.append(Violation(path, f"unknown mode id {end!r}"))
        if c.first == c.second:
            problems.append(Violation(path, f"endpoints must differ, got {c.first!r} twice"))
        if c.kind not in COUPLING_KINDS:
            problems.append(Violation(f"{path}.kind", f"unknown coupling kind {c.kind!r}"))
        elif c.kind == OPTOMECHANICAL and all(e in index for e in c.endpoints):
            kinds = {spec.modes[index[e]].kind for e in c.endpoints}
            if kinds != {ELECTROMAGNETIC, MECHANICAL}:
                problems.append(Violation(
                    f"{path}.kind",
                    "optomechanical coupling must join one electromagnetic and one mechanical "
                    f"mode, got {c.first!r} and {c.second!r}"))

        rate = c.rate
        if c.g0 is not None or c.n_c is not None:
            if c.g0 is None or c.n_c is None:
                problems.append(Violation(path, "g0 and n_c must be given together"))
            elif c.g0 < 0 or c.n_c < 0:
                problems.append(Violation(path, "g0 and n_c must be non-negative"))
            else:
                enhanced = c.g0 * math.sqrt(c.n_c)
                if rate is None:
                    rate = enhanced
                elif abs(rate - enhanced) > _G0_RTOL * rate:
                    problems.append(Violation(
                        f"{path}.rate", f"rate {rate!r} disagrees with g0*sqrt(n_c) = {enhanced!r}"))
        if rate is None:
            problems.append(Violation(f"{path}.rate", "missing coupling rate"))
            rate = 0.0
        elif not math.isfinite(rate) or rate < 0:
            problems.append(Violation(f"{path}.rate", f"invalid rate {rate!r}"))
        if not math.isfinite(c.phase):
            problems.append(Violation(f"{path}.phase", "must be finite"))
            phase = 0.0
        else:
            phase = wrap_phase(c.phase)

        name = c.name or f"{c.first}-{c.second}"
        if name in names:
            suffix = 2
            while f"{name}#{suffix}" in names:
                suffix += 1
            name = f"{name}#{suffix}"
        names.add(name)
        couplings.append(replace(c, rate=float(rate), phase=phase, name=name))

    if not problems:
        ids = [m.id for m in spec.modes]
        if not _connected(ids, (c.endpoints for c in couplings)):
            problems.append(Violation("couplings", "coupling graph is not connected"))
    if problems:
        raise ValidationError(problems)
    return ValidatedSystem(spec.modes, tuple(couplings), index=index)


def cooperativity(coupling: int | str | Coupling, system: SystemSpec) -> float:
    """Cooperativity of one coupling.

    ``4 g^2 / (kappa Gamma_m)`` for an optomechanical link, using the total
    decay of each endpoint; ``4 J^2 / (kappa_1 kappa_2)`` for a coherent one
    (the same expression with both endpoint decays).
    """
    system = system if isinstance(system, ValidatedSystem) else validate(system)
    c = system.coupling(coupling)
    k1 = system.mode(c.first).kappa
    k2 = system.mode(c.second).kappa
    if k1 <= 0 or k2 <= 0:
        raise ValueError(f"coupling {c.name!r} touches an undamped mode")
    return 4.0 * c.rate**2 / (k1 * k2)


def rate_for_cooperativity(coop: float, kappa_1: float, kappa_2: float) -> float:
    """Inverse of :func:`cooperativity`: the coupling rate giving ``coop``."""
    if coop < 0:
        raise ValueError("cooperativity must be non-negative")
    return math.sqrt(coop * kappa_1 * kappa_2 / 4.0)


def loop_orientation(system: ValidatedSystem, loop: Sequence[Coupling]) -> list[int]:
    """Traversal signs (+1 along ``first -> second``) for a closed loop.

    The loop starts at ``loop[0].first``; raises ``ValueError`` when the
    couplings do not chain into a cycle.
    """
    if len(loop) < 2:
        raise ValueError("a loop needs at least two couplings")
    start = loop[0].first
    current = start
    signs = []
    for c in loop:
        if current == c.first:
            signs.append(1)
            current = c.second
        elif current == c.second:
            signs.append(-1)
            current = c.first
        else:
            raise ValueError(f"coupling {c.name or c.endpoints} does not continue the loop at {current!r}")
    if current != start:
        raise ValueError(f"couplings do not close: path ends at {current!r}, started at {start!r}")
    return signs


def synthetic_flux(system: SystemSpec, loop: Sequence[int | str | Coupling]) -> float:
    """Gauge-invariant phase accumulated around a closed loop of couplings.

    The loop is walked in the given order starting from the ``first`` endpoint
    of its first coupling; each coupling adds ``+phase`` when traversed
    ``first -> second`` and ``-phase`` otherwise. The result is wrapped into
    (-pi, pi].
    """
    system = system if isinstance(system, ValidatedSystem) else validate(system)
    couplings = [system.coupling(ref) for ref in loop]
    signs = loop_orientation(system, couplings)
    return wrap_phase(sum(s * c.phase for s, c in zip(signs, couplings)))


def gauge_shift(system: SystemSpec, mode_id: str, angle: float) -> ValidatedSystem:
    """Redefine ``a -> a * exp(1j*angle)`` for one mode.

    Couplings leaving the mode gain ``+angle``, couplings entering it gain
    ``-angle``. Loop fluxes and scattering magnitudes are unchanged.
    """
    system = system if isinstance(system, ValidatedSystem) else validate(system)
    if mode_id not in system.index:
        raise KeyError(mode_id)
    shifted = []
    for c in system.couplings:
        if c.first == mode_id:
            c = replace(c, phase=wrap_phase(c.phase + angle))
        elif c.second == mode_id:
            c = replace(c, phase=wrap_phase(c.phase - angle))
        shifted.append(c)
    return validate(SystemSpec(system.modes, tuple(shifted)))
