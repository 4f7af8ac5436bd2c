"""Time-origin (frame) transformations of frequency-converting scattering matrices.

Shifting the time origin by ``t0`` multiplies a field at angular frequency
``w`` by ``exp(-1j*w*t0)``, so ``S'_jk = S_jk * exp(-1j*(w_j - w_k)*t0)``.
Phases of conversion elements therefore depend on the frame while their
magnitudes do not; only ``|S_jk| != |S_kj|`` is a frame-independent test of
nonreciprocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaugeFrame:
    t0: float
    frequencies: tuple[float, ...]


def transform(S, frame: GaugeFrame) -> np.ndarray:
    """Express ``S`` in a frame whose time origin is shifted by ``frame.t0``."""
    S = np.asarray(S, dtype=complex)
    w = np.asarray(frame.frequencies, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] != len(w):
        raise ValueError(f"need a square matrix with one frequency per port, got {S.shape} and {len(w)}")
    return S * np.exp(-1j * (w[:, None] - w[None, :]) * frame.t0)


def is_nonreciprocal(S, tol: float = 1e-9) -> tuple[bool, tuple[int, int] | None]:
    """Magnitude test ``max |(|S_jk| - |S_kj|)| > tol``.

    Returns the verdict and the (out, in) pair with the larger transmission
    of the most asymmetric pair, or ``None`` for a 1x1 matrix.
    """
    A = np.abs(np.asarray(S))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("scattering matrix must be square")
    diff = A - A.T
    if A.shape[0] < 2:
        return False, None
    j, k = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return bool(diff[j, k] > tol), (int(j), int(k))


def equal_phase_frame(S, frequencies, pair: tuple[int, int] = (1, 0)) -> float:
    """Time origin at which ``S[j, k]`` and ``S[k, j]`` acquire equal phase.

    Solves ``arg S_jk - arg S_kj = 2 (w_j - w_k) t0`` (mod 2 pi) with the
    smallest ``|t0|``.
    """
    j, k = pair
    w = np.asarray(frequencies, dtype=float)
    dw = w[j] - w[k]
    if dw == 0:
        raise ValueError("ports share one frequency; a frame shift cannot change their relative phase")
    S = np.asarray(S, dtype=complex)
    if S[j, k] == 0 or S[k, j] == 0:
        raise ValueError("both transmission elements must be nonzero")
    gap = math.remainder(float(np.angle(S[j, k]) - np.angle(S[k, j])), 2 * math.pi)
    return gap / (2 * dw)
