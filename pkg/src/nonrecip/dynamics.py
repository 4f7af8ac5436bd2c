"""Input-output scattering engine for linearized coupled-mode systems.

Equations of motion, with every loss channel attached to a port::

    d a/dt = -M a + K a_in,        a_out = a_in - K^T a,

where ``M = diag(-1j*detuning + kappa/2) + 1j*H`` and ``H`` is the Hermitian
coupling matrix. For a probe at detuning ``delta`` (time dependence
``exp(-1j*delta*t)``) this gives

    S(delta) = I - K^T (M - 1j*delta*I)^{-1} K.

Ports are ordered external first (one per cavity with ``kappa_ex > 0``,
labelled by the mode id) and then bath ports (``<id>:int`` for cavity
intrinsic loss, ``<id>:bath`` for mechanical damping).
"""

from __future__ import annotations

import csv
import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .system import SystemSpec, ValidatedSystem, validate

log = logging.getLogger(__name__)

WORKERS_ENV = "NONRECIP_WORKERS"
# Above this condition number the resolvent is treated as singular.
SINGULAR_COND = 1e13
RESIDUAL_TOL = 1e-9


class SingularResponseError(ArithmeticError):
    """The resolvent ``M - 1j*delta`` is singular at ``delta``."""

    def __init__(self, delta: float, cond: float = math.inf):
        self.delta = delta
        self.cond = cond
        super().__init__(f"singular response at delta={delta!r} (condition number {cond:.3g})")


@dataclass(frozen=True)
class DynamicalMatrix:
    M: np.ndarray
    K: np.ndarray
    modes: tuple[str, ...]
    ports: tuple[str, ...]
    n_external: int
    occupancy: np.ndarray

    @property
    def coupling_hamiltonian(self) -> np.ndarray:
        """Hermitian coupling part ``H`` of ``M`` (diagonal removed)."""
        off = self.M - np.diag(np.diag(self.M))
        return -1j * off


def _port_index(ports: Sequence[str], label: str | int) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    try:
        return ports.index(label)
    except ValueError:
        raise KeyError(f"unknown port {label!r}; available: {', '.join(ports)}") from None


@dataclass(frozen=True)
class ScatteringMatrix:
    delta: float
    S: np.ndarray
    ports: tuple[str, ...]
    n_external: int

    def __getitem__(self, key: tuple[str | int, str | int]) -> complex:
        out, inp = key
        return complex(self.S[_port_index(self.ports, out), _port_index(self.ports, inp)])

    @property
    def external(self) -> np.ndarray:
        n = self.n_external
        return self.S[:n, :n]

    @property
    def external_ports(self) -> tuple[str, ...]:
        return self.ports[: self.n_external]


@dataclass(frozen=True)
class ResponseCurve:
    """Scattering matrices over a strictly increasing detuning grid."""

    delta: np.ndarray
    S: np.ndarray
    ports: tuple[str, ...]
    n_external: int

    def __post_init__(self):
        if self.delta.ndim != 1 or len(self.delta) != len(self.S):
            raise ValueError("grid and scattering stack lengths differ")
        if np.any(np.diff(self.delta) <= 0):
            raise ValueError("detuning grid must be strictly increasing")

    def element(self, out: str | int, inp: str | int) -> np.ndarray:
        return self.S[:, _port_index(self.ports, out), _port_index(self.ports, inp)]

    def magnitude(self, out: str | int, inp: str | int) -> np.ndarray:
        return np.abs(self.element(out, inp))

    def phase(self, out: str | int, inp: str | int) -> np.ndarray:
        return np.angle(self.element(out, inp))

    def at(self, i: int) -> ScatteringMatrix:
        return ScatteringMatrix(float(self.delta[i]), self.S[i], self.ports, self.n_external)

    def default_pairs(self) -> list[tuple[str, str]]:
        ext = self.ports[: self.n_external]
        return [(o, i) for o in ext for i in ext]

    def to_csv(self, fh, pairs: Sequence[tuple[str, str]] | None = None,
               delta_scale: float = 1.0, delta_label: str = "delta_rad_s") -> None:
        """Write ``delta`` then ``|S|`` and ``arg S`` columns for each (out, in) pair.

        ``delta_scale`` divides the grid before writing (``2*pi`` for Hz).
        """
        pairs = list(pairs) if pairs is not None else self.default_pairs()
        writer = csv.writer(fh, lineterminator="\n")
        header = [delta_label]
        for o, i in pairs:
            header += [f"abs_S[{o}<-{i}]", f"arg_S[{o}<-{i}]"]
        writer.writerow(header)
        cols = [self.element(o, i) for o, i in pairs]
        for n, d in enumerate(self.delta):
            row = [fmt(d / delta_scale)]
            for col in cols:
                row += [fmt(abs(col[n])), fmt(np.angle(col[n]))]
            writer.writerow(row)


def fmt(x: float) -> str:
    """Fixed-point CSV formatting at 1e-12 resolution (no negative zero)."""
    s = f"{float(x):.12f}"
    return s[1:] if s.startswith("-") and not s.strip("-0.") else s


def build_dynamics(system: SystemSpec) -> DynamicalMatrix:
    """Assemble ``M``, ``K`` and the port list; mode order is declaration order."""
    system = system if isinstance(system, ValidatedSystem) else validate(system)
    modes = system.modes
    n = len(modes)
    M = np.zeros((n, n), dtype=complex)
    for j, m in enumerate(modes):
        M[j, j] = -1j * m.detuning + m.kappa / 2
    for c in system.couplings:
        u, v = system.index[c.first], system.index[c.second]
        hop = c.rate * np.exp(1j * c.phase)
        M[v, u] += 1j * hop
        M[u, v] += 1j * np.conj(hop)

    ports: list[str] = []
    columns: list[tuple[int, float]] = []
    occupancy: list[float] = []
    for j, m in enumerate(modes):
        if m.kappa_ex > 0:
            ports.append(m.id)
            columns.append((j, m.kappa_ex))
            occupancy.append(0.0)
    n_external = len(ports)
    for j, m in enumerate(modes):
        if m.kappa_0 > 0:
            ports.append(f"{m.id}:bath" if m.is_mechanical else f"{m.id}:int")
            columns.append((j, m.kappa_0))
            occupancy.append(m.n_bath)
    K = np.zeros((n, len(ports)))
    for p, (j, rate) in enumerate(columns):
        K[j, p] = math.sqrt(rate)
    return DynamicalMatrix(M, K, tuple(m.id for m in modes), tuple(ports), n_external,
                           np.array(occupancy))


def _solve_stack(M: np.ndarray, K: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    A = M[None, :, :] - 1j * deltas[:, None, None] * np.eye(n)[None]
    cond = np.linalg.cond(A)
    bad = np.flatnonzero(~np.isfinite(cond) | (cond > SINGULAR_COND))
    if bad.size:
        i = bad[0]
        raise SingularResponseError(float(deltas[i]), float(cond[i]))
    B = np.broadcast_to(K.astype(complex), (len(deltas),) + K.shape)
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError:
        # batched solve does not say which slice failed
        for d, a in zip(deltas, A):
            try:
                np.linalg.solve(a, K)
            except np.linalg.LinAlgError:
                raise SingularResponseError(float(d)) from None
        raise
    residual = np.max(np.abs(A @ X - B), axis=(1, 2))
    scale = np.max(np.abs(K)) or 1.0
    for i in np.flatnonzero(residual > RESIDUAL_TOL * scale):
        log.warning("solve residual %.3g at delta=%r (condition number %.3g)",
                    residual[i], deltas[i], cond[i])
    return np.eye(K.shape[1])[None] - np.swapaxes(K, 0, 1)[None] @ X


def scattering_stack(dyn: DynamicalMatrix, deltas: np.ndarray) -> np.ndarray:
    """Full-port S for each detuning, split across worker threads."""
    deltas = np.asarray(deltas, dtype=float)
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers <= 1 or len(deltas) < 2 * workers:
        return _solve_stack(dyn.M, dyn.K, deltas)
    chunks = np.array_split(deltas, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda d: _solve_stack(dyn.M, dyn.K, d), chunks))
    return np.concatenate(parts, axis=0)


def scattering(system: SystemSpec | DynamicalMatrix, delta: float) -> ScatteringMatrix:
    """Scattering matrix over all ports at probe detuning ``delta`` (rad/s)."""
    dyn = system if isinstance(system, DynamicalMatrix) else build_dynamics(system)
    S = scattering_stack(dyn, np.array([float(delta)]))[0]
    return ScatteringMatrix(float(delta), S, dyn.ports, dyn.n_external)


def sweep_grid(system: SystemSpec | DynamicalMatrix, grid) -> ResponseCurve:
    dyn = system if isinstance(system, DynamicalMatrix) else build_dynamics(system)
    grid = np.asarray(grid, dtype=float)
    return ResponseCurve(grid, scattering_stack(dyn, grid), dyn.ports, dyn.n_external)


def sweep(system: SystemSpec | DynamicalMatrix, delta_min: float, delta_max: float,
          n_points: int) -> ResponseCurve:
    """Evaluate :func:`scattering` on a uniform grid of ``n_points`` detunings."""
    if n_points < 2:
        raise ValueError(f"a sweep needs at least 2 points, got {n_points}")
    if not delta_max > delta_min:
        raise ValueError("delta_max must exceed delta_min")
    return sweep_grid(system, np.linspace(delta_min, delta_max, n_points))


def conversion_closed_form(c1: float, c2: float, dphi: float) -> tuple[complex, complex]:
    """Centre-of-window conversion through one mechanical mode.

    ``S21 = 2 sqrt(C1 C2) / (1 + C1 + C2) * exp(1j*dphi)`` and ``S12 = conj(S21)``
    for resonant red-sideband pumping and overcoupled cavities.
    """
    if c1 < 0 or c2 < 0:
        raise ValueError("cooperativities must be non-negative")
    s21 = 2 * math.sqrt(c1 * c2) / (1 + c1 + c2) * complex(math.cos(dphi), math.sin(dphi))
    return s21, s21.conjugate()


def coherent_closed_form(c_coh: float, theta: float) -> tuple[complex, complex]:
    """Conversion through a direct coherent coupling alone.

    Note the reciprocal factor ``1j`` on top of the ``exp(+-1j*theta)`` phase.
    """
    if c_coh < 0:
        raise ValueError("cooperativity must be non-negative")
    amp = 2 * math.sqrt(c_coh) / (1 + c_coh)
    return (amp * 1j * complex(math.cos(theta), math.sin(theta)),
            amp * 1j * complex(math.cos(theta), -math.sin(theta)))
