"""Isolator synthesis: reference topologies, effective couplings, optimization.

Two isolator topologies are supported:

* scheme B: two cavities sharing one mechanical mode plus a direct coherent
  link ``J``. Loop flux is ``phi_1 - phi_2 - theta`` (walk a1 -> b -> a2 -> a1).
* scheme C: two cavities coupled through two mechanical modes whose
  detunings are offset from each other. Loop flux is
  ``phi_11 - phi_21 + phi_22 - phi_12`` (walk a1 -> b1 -> a2 -> b2 -> a1).

Positive flux ``+pi/2`` in scheme B isolates the a2 -> a1 direction
(transmission a1 -> a2 survives).
"""

from __future__ import annotations

import itertools
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .dynamics import ResponseCurve, build_dynamics, scattering, sweep
from .system import (
    COHERENT,
    Coupling,
    SystemSpec,
    ValidatedSystem,
    cavity,
    mechanics,
    rate_for_cooperativity,
    validate,
    wrap_phase,
)

SCHEME_B_LOOP = ("g1", "g2", "J")
SCHEME_C_LOOP = ("g11", "g21", "g22", "g12")


def converter(c1: float, c2: float, phi1: float = 0.0, phi2: float = 0.0,
              kappa1: float = 1.0, kappa2: float = 1.0, gamma: float = 1e-3) -> SystemSpec:
    """Two overcoupled cavities converting through one resonant mechanical mode."""
    g1 = rate_for_cooperativity(c1, kappa1, gamma)
    g2 = rate_for_cooperativity(c2, kappa2, gamma)
    return SystemSpec(
        (cavity("a1", kappa1), cavity("a2", kappa2), mechanics("b", gamma)),
        (Coupling("a1", "b", g1, phi1, name="g1"), Coupling("a2", "b", g2, phi2, name="g2")),
    )


def scheme_b(c1: float, c2: float, c_coh: float, flux: float, kappa1: float = 1.0,
             kappa2: float = 1.0, gamma: float = 1e-3) -> SystemSpec:
    """Scheme B with the whole loop phase placed on the coherent link."""
    base = converter(c1, c2, 0.0, 0.0, kappa1, kappa2, gamma)
    j = rate_for_cooperativity(c_coh, kappa1, kappa2)
    link = Coupling("a1", "a2", j, -flux, kind=COHERENT, name="J")
    return SystemSpec(base.modes, base.couplings + (link,))


def scheme_b_condition(c1: float, c2: float, direction: str = "forward") -> tuple[float, float]:
    """Coherent cooperativity and flux that make scheme B isolate at delta = 0.

    Matching ``J`` to the mechanically induced dissipative coupling
    ``2 g1 g2 / Gamma_m`` means ``C_coh = C1 * C2``. ``direction='forward'``
    (flux ``+pi/2``) passes a1 -> a2 and blocks a2 -> a1.
    """
    if c1 < 0 or c2 < 0:
        raise ValueError("cooperativities must be non-negative")
    sign = {"forward": 1.0, "backward": -1.0}[direction]
    return c1 * c2, sign * math.pi / 2


@dataclass(frozen=True)
class SchemeC:
    """Parameters of the two-mechanical-mode isolator.

    Mechanical detunings are ``offset +- splitting/2`` (b1 takes the plus
    sign). All four optomechanical links share one cooperativity; the loop
    flux sits on the a2-b2 link. ``n_mech`` is the thermal occupancy of both
    mechanical baths.
    """

    kappa1: float = 1.0
    kappa2: float = 1.0
    gamma1: float = 1e-3
    gamma2: float = 1e-3
    flux: float = 0.0
    splitting: float = 0.0
    offset: float = 0.0
    cooperativity: float = 1.0
    n_mech: float = 0.0

    FREE = ("flux", "splitting", "offset", "cooperativity")

    def system(self) -> SystemSpec:
        c = self.cooperativity
        g = {
            (1, 1): rate_for_cooperativity(c, self.kappa1, self.gamma1),
            (2, 1): rate_for_cooperativity(c, self.kappa2, self.gamma1),
            (1, 2): rate_for_cooperativity(c, self.kappa1, self.gamma2),
            (2, 2): rate_for_cooperativity(c, self.kappa2, self.gamma2),
        }
        modes = (
            cavity("a1", self.kappa1),
            cavity("a2", self.kappa2),
            mechanics("b1", self.gamma1, self.offset + self.splitting / 2, self.n_mech),
            mechanics("b2", self.gamma2, self.offset - self.splitting / 2, self.n_mech),
        )
        couplings = tuple(
            Coupling(f"a{i}", f"b{k}", g[i, k], self.flux if (i, k) == (2, 2) else 0.0,
                     name=f"g{i}{k}")
            for k in (1, 2) for i in (1, 2)
        )
        return SystemSpec(modes, couplings)

    def scaled_mechanics(self, factor: float) -> "SchemeC":
        """Scale both mechanical damping rates and detunings, keeping cooperativities."""
        return replace(self, gamma1=self.gamma1 * factor, gamma2=self.gamma2 * factor,
                       splitting=self.splitting * factor, offset=self.offset * factor)

    def single_path(self, k: int) -> SystemSpec:
        """Keep only mechanical mode ``b{k}``: a plain converter through it.

        Its conversion window is centred on that mode's resonance.
        """
        if k not in (1, 2):
            raise ValueError(f"mechanical mode index must be 1 or 2, got {k!r}")
        full = self.system()
        keep = f"b{k}"
        modes = tuple(m for m in full.modes if not m.is_mechanical or m.id == keep)
        couplings = tuple(c for c in full.couplings if c.second == keep)
        return SystemSpec(modes, couplings)


# --- adiabatic elimination -------------------------------------------------

@dataclass(frozen=True)
class EffectiveSystem:
    """Cavity-only model left after eliminating the mechanical modes.

    ``M`` is the effective (non-Hermitian) dynamical matrix of the cavities.
    Its coupling part ``H = -1j * offdiag(M)`` splits into a Hermitian
    (coherent) piece and ``-1j`` times a Hermitian dissipative piece;
    ``coherent`` and ``dissipative`` hold their (second, first) = (1, 0)
    entries.
    """

    modes: tuple[str, ...]
    M: np.ndarray
    K: np.ndarray
    ports: tuple[str, ...]
    n_external: int
    eval_delta: float
    validity: float

    @property
    def coherent(self) -> complex:
        H = -1j * (self.M - np.diag(np.diag(self.M)))
        return complex((H[1, 0] + np.conj(H[0, 1])) / 2)

    @property
    def dissipative(self) -> complex:
        H = -1j * (self.M - np.diag(np.diag(self.M)))
        return complex(1j * (H[1, 0] - np.conj(H[0, 1])) / 2)

    @property
    def gamma_dis(self) -> float:
        return abs(self.dissipative)

    @property
    def induced_damping(self) -> np.ndarray:
        """Extra energy decay rate of each cavity from the eliminated baths."""
        kappa = 2 * np.real(np.diag(self.M))
        return kappa - np.sum(self.K**2, axis=1)

    def scattering(self, delta: float) -> np.ndarray:
        n = self.M.shape[0]
        chi = np.linalg.solve(self.M - 1j * delta * np.eye(n), self.K.astype(complex))
        return np.eye(self.K.shape[1]) - self.K.T @ chi

    def element(self, delta: float, out: str, inp: str) -> complex:
        S = self.scattering(delta)
        return complex(S[self.ports.index(out), self.ports.index(inp)])


def adiabatic_eliminate(system: SystemSpec, eval_delta: float = 0.0) -> EffectiveSystem:
    """Replace every mechanical mode by direct cavity-cavity couplings.

    The mechanical response is frozen at ``eval_delta``. A resonant mode
    (detuning 0, ``eval_delta`` 0) coupling a1 and a2 with rates g1, g2 and
    phases phi1, phi2 leaves a purely dissipative coupling of rate
    ``2 g1 g2 / Gamma_m`` and phase ``phi1 - phi2``; detuned modes leave a
    coherent component as well. ``validity`` is ``min Gamma_m / max g``; the
    Markov approximation needs it to be large.
    """
    system = system if isinstance(system, ValidatedSystem) else validate(system)
    for m in system.mechanical:
        partners = {c.first if c.second == m.id else c.second
                    for c in system.couplings if m.id in c.endpoints}
        cavities = [p for p in partners if not system.mode(p).is_mechanical]
        if len(cavities) < 2:
            raise ValueError(f"mechanical mode {m.id!r} couples to fewer than two cavities")
    dyn = build_dynamics(system)
    em = [i for i, m in enumerate(system.modes) if not m.is_mechanical]
    mech = [i for i, m in enumerate(system.modes) if m.is_mechanical]
    M = dyn.M
    Mbb = M[np.ix_(mech, mech)] - 1j * eval_delta * np.eye(len(mech))
    M_eff = M[np.ix_(em, em)] - M[np.ix_(em, mech)] @ np.linalg.solve(Mbb, M[np.ix_(mech, em)])
    port_rows = [p for p in range(len(dyn.ports)) if np.any(dyn.K[em, p] > 0)]
    K = dyn.K[np.ix_(em, port_rows)]
    ports = tuple(dyn.ports[p] for p in port_rows)
    rates = [c.rate for c in system.couplings if any(system.mode(e).is_mechanical for e in c.endpoints)]
    gammas = [m.kappa for m in system.mechanical]
    validity = min(gammas) / max(rates) if rates and max(rates) > 0 else math.inf
    return EffectiveSystem(tuple(system.modes[i].id for i in em), M_eff, K, ports,
                           sum(1 for p in port_rows if p < dyn.n_external), eval_delta, validity)


# --- metrics ---------------------------------------------------------------

def _db_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        num_db = 20 * np.log10(num)
        den_db = 20 * np.log10(den)
    out = num_db - den_db
    out = np.where((num == 0) & (den == 0), 0.0, out)
    return out


_RATIO_CLIP = 400.0


@dataclass(frozen=True)
class Metrics:
    depth_db: float
    bandwidth: float
    insertion_loss_db: float


def isolation_metrics(curve: ResponseCurve, threshold_db: float = 20.0,
                      forward: tuple[str, str] = ("a2", "a1")) -> Metrics:
    """Isolation depth and insertion loss at delta = 0, and isolation bandwidth.

    ``forward`` is the (out, in) pair expected to transmit. Depth is
    ``20 log10(|S_fw| / |S_bw|)`` at the grid point nearest zero (``inf`` when
    the backward element vanishes); the bandwidth is the measure of detunings
    where that ratio reaches ``threshold_db``, with linear interpolation of
    the crossings.
    """
    out, inp = forward
    fw = curve.magnitude(out, inp)
    bw = curve.magnitude(inp, out)
    ratio = _db_ratio(fw, bw)
    centre = int(np.argmin(np.abs(curve.delta)))
    depth = float(ratio[centre])
    loss = float(-20 * math.log10(fw[centre])) if fw[centre] > 0 else math.inf

    # infinite ratios would break crossing interpolation
    excess = np.clip(ratio, -_RATIO_CLIP, _RATIO_CLIP) - threshold_db
    d = curve.delta
    width = 0.0
    for i in range(len(d) - 1):
        lo, hi = excess[i], excess[i + 1]
        if lo >= 0 and hi >= 0:
            width += d[i + 1] - d[i]
        elif lo >= 0 or hi >= 0:
            width += (d[i + 1] - d[i]) * max(lo, hi) / (abs(lo) + abs(hi))
    return Metrics(depth, float(width), loss)


# --- scheme C optimization -------------------------------------------------

@dataclass
class DesignResult:
    parameters: dict[str, float]
    depth_db: float
    insertion_loss_db: float
    bandwidth: float | None
    converged: bool
    status: str
    target_db: float
    loss_budget_db: float
    evaluations: int = 0
    free: list[str] = field(default_factory=list)

    def scheme(self) -> SchemeC:
        return SchemeC(**self.parameters)

    def to_json(self, scale: float = 1.0, units: str = "rad/s") -> str:
        """Stable JSON report; frequency-valued entries divided by ``scale``."""
        data = asdict(self)
        data["parameters"] = {k: (v / scale if k in _RATE_FIELDS else v)
                              for k, v in data["parameters"].items()}
        if data["bandwidth"] is not None:
            data["bandwidth"] /= scale
        for key in ("depth_db", "insertion_loss_db", "bandwidth"):
            if data[key] is not None and math.isinf(data[key]):
                data[key] = "inf"
        data["units"] = units
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


_RATE_FIELDS = {"kappa1", "kappa2", "gamma1", "gamma2", "splitting", "offset"}
DEFAULT_SEED_GRID = (36, 24)
_DEPTH_CAP = 200.0
# the 'loss' objective aims slightly past the target so the penalty optimum clears it
_TARGET_MARGIN = 1.0


def default_bounds(fixed: SchemeC) -> dict[str, tuple[float, float]]:
    gamma = max(fixed.gamma1, fixed.gamma2)
    return {"flux": (-math.pi, math.pi), "splitting": (0.0, 20 * gamma),
            "cooperativity": (0.5, 20.0)}


def centre_metrics(params: SchemeC, forward: tuple[str, str] = ("a2", "a1")) -> tuple[float, float]:
    """(depth dB, insertion loss dB) at delta = 0."""
    S = scattering(params.system(), 0.0)
    fw = abs(S[forward])
    bw = abs(S[forward[1], forward[0]])
    depth = math.inf if bw == 0 else 20 * math.log10(fw / bw)
    loss = math.inf if fw == 0 else -20 * math.log10(fw)
    return depth, loss


def optimize_scheme_c(fixed: SchemeC | None = None,
                      bounds: Mapping[str, tuple[float, float]] | None = None,
                      target_db: float = 20.0, loss_budget_db: float = 3.0,
                      direction: str = "forward", objective: str = "depth",
                      seed_grid: Sequence[int] = DEFAULT_SEED_GRID,
                      threshold_db: float = 20.0, bandwidth_span: float | None = None,
                      bandwidth_points: int = 2001) -> DesignResult:
    """Search flux, mechanical splitting and cooperativity for isolation.

    A deterministic grid over flux x splitting seeds a bounded Nelder-Mead
    refinement at delta = 0 of either

    * ``objective='depth'``: ``-depth + w * max(0, loss - budget)^2``, or
    * ``objective='loss'``: ``loss + w * max(0, target - depth)^2``.

    Parameters absent from ``bounds`` stay at their value in
    ``fixed``. ``converged`` is true only when the refined point reaches
    ``target_db`` within the loss budget; the result is returned either way.
    """
    fixed = fixed or SchemeC()
    bounds = dict(default_bounds(fixed) if bounds is None else bounds)
    for name, (lo, hi) in bounds.items():
        if name not in SchemeC.FREE:
            raise ValueError(f"unknown free parameter {name!r}; choose from {SchemeC.FREE}")
        if not lo <= hi or not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"infeasible bounds for {name}: ({lo}, {hi})")
    if bounds.get("cooperativity", (0, 0))[0] < 0 or bounds.get("splitting", (0, 0))[0] < 0:
        raise ValueError("infeasible bounds: cooperativity and splitting must be non-negative")
    if target_db > _DEPTH_CAP:
        raise ValueError(f"target depth above {_DEPTH_CAP} dB is beyond numerical resolution")
    forward = {"forward": ("a2", "a1"), "backward": ("a1", "a2")}[direction]
    if objective not in ("depth", "loss"):
        raise ValueError(f"unknown objective {objective!r}")
    free = [n for n in SchemeC.FREE if n in bounds]
    evaluations = 0

    def build(x) -> SchemeC:
        values = dict(zip(free, (float(v) for v in x)))
        return replace(fixed, **values)

    def cost(x) -> float:
        nonlocal evaluations
        evaluations += 1
        depth, loss = centre_metrics(build(x), forward)
        if objective == "depth":
            return -min(depth, _DEPTH_CAP) + 100.0 * max(0.0, loss - loss_budget_db) ** 2
        return min(loss, _DEPTH_CAP) + 100.0 * max(0.0, target_db + _TARGET_MARGIN - depth) ** 2

    def midpoint(name):
        lo, hi = bounds[name]
        return (lo + hi) / 2

    # seed grid over the physically decisive pair, other free parameters at mid-bounds
    axes = []
    for name, n in zip(("flux", "splitting"), seed_grid):
        if name in bounds:
            lo, hi = bounds[name]
            axes.append((name, np.linspace(lo, hi, max(int(n), 1) + 2)[1:-1]))
    best_x, best_f = None, math.inf
    base = {n: midpoint(n) for n in free}
    for combo in itertools.product(*(vals for _, vals in axes)):
        point = dict(base)
        point.update({name: v for (name, _), v in zip(axes, combo)})
        x = np.array([point[n] for n in free])
        f = cost(x)
        if f < best_f:
            best_x, best_f = x, f

    if free:
        nm_bounds = []
        for n in free:
            lo, hi = bounds[n]
            if n == "flux" and hi - lo >= 2 * math.pi - 1e-12:
                lo, hi = lo - math.pi, hi + math.pi  # periodic: let the simplex cross the seam
            nm_bounds.append((lo, hi))
        res = minimize(cost, best_x, method="Nelder-Mead", bounds=nm_bounds,
                       options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 4000,
                                "maxfev": 8000, "adaptive": len(free) > 2})
        x = res.x if res.fun <= best_f else best_x
    else:
        x = np.array([])
    params = build(x)
    if "flux" in free:
        params = replace(params, flux=wrap_phase(params.flux))
    depth, loss = centre_metrics(params, forward)

    bandwidth = None
    if bandwidth_span is not None:
        curve = sweep(params.system(), -bandwidth_span, bandwidth_span, bandwidth_points)
        bandwidth = isolation_metrics(curve, threshold_db, forward).bandwidth

    ok = depth >= target_db and loss <= loss_budget_db
    if ok:
        status = "converged"
    else:
        status = (f"no isolating configuration found: depth {depth:.3f} dB "
                  f"(target {target_db} dB), insertion loss {loss:.3f} dB (budget {loss_budget_db} dB)")
    return DesignResult(asdict(params), depth, loss, bandwidth, ok, status, target_db,
                        loss_budget_db, evaluations, free)
