"""Thermal noise routed through the scattering matrix.

For a passive (beam-splitter only) network the normal-ordered flux leaving
port ``j`` is ``N_j = sum_k |S_jk|^2 n_k``, with ``n_k`` the occupancy of the
field entering port ``k``. The half quantum of vacuum noise is not counted.
Cold microwave lines (``n = 0``) are assumed on external ports unless
overridden; bath ports take ``n_bath`` of their mode.
"""

from __future__ import annotations

import csv
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicalMatrix, build_dynamics, fmt, scattering_stack
from .system import SystemSpec


@dataclass(frozen=True)
class NoiseSpectrum:
    delta: np.ndarray
    port: str
    total: np.ndarray
    contributions: dict[str, np.ndarray]

    def to_csv(self, fh, delta_scale: float = 1.0, delta_label: str = "delta_rad_s") -> None:
        writer = csv.writer(fh, lineterminator="\n")
        sources = list(self.contributions)
        writer.writerow([delta_label, f"N[{self.port}]"] + [f"N[{self.port}<-{s}]" for s in sources])
        for i, d in enumerate(self.delta):
            writer.writerow([fmt(d / delta_scale), fmt(self.total[i])]
                            + [fmt(self.contributions[s][i]) for s in sources])


def port_occupancies(dyn: DynamicalMatrix, baths: Mapping[str, float] | None = None) -> np.ndarray:
    occ = np.array(dyn.occupancy, dtype=float)
    for label, n in (baths or {}).items():
        if label not in dyn.ports:
            raise KeyError(f"unknown port {label!r}; available: {', '.join(dyn.ports)}")
        if not n >= 0:
            raise ValueError(f"occupancy of {label!r} must be non-negative, got {n!r}")
        occ[dyn.ports.index(label)] = float(n)
    return occ


def output_noise(system: SystemSpec | DynamicalMatrix, baths: Mapping[str, float] | None,
                 delta_grid, port: str) -> NoiseSpectrum:
    """Emitted noise quanta at ``port`` over ``delta_grid``.

    ``baths`` overrides the default input occupancy of any port by label.
    """
    dyn = system if isinstance(system, DynamicalMatrix) else build_dynamics(system)
    if port not in dyn.ports:
        raise KeyError(f"unknown port {port!r}; available: {', '.join(dyn.ports)}")
    occ = port_occupancies(dyn, baths)
    grid = np.atleast_1d(np.asarray(delta_grid, dtype=float))
    S = scattering_stack(dyn, grid)
    weights = np.abs(S[:, dyn.ports.index(port), :]) ** 2
    contributions = {label: weights[:, k] * occ[k] for k, label in enumerate(dyn.ports)}
    total = weights @ occ
    return NoiseSpectrum(grid, port, total, contributions)
