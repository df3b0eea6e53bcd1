"""Finite-volume solver for ``u_t = [(D(u) + eps) u_x]_x`` on [0, 1] with no-flux ends.

Cells are centred at ``x_i = (i - 1/2) h`` with ``h = 1/M``. Face fluxes use
the diffusivity at the arithmetic mean of the two neighbouring cells, and the
two boundary fluxes are exactly zero, so ``h * sum(u)`` is conserved up to
rounding. Time stepping is explicit Euler.

Reductions (mass, energy, ...) use plain ``numpy.sum`` over contiguous arrays,
which is deterministic for a given array length, so results are bitwise
reproducible on one platform.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.fft import dct

from .asymptotics import fit_log_linear
from .model import ALPHA, CANONICAL, ModelFunctions
from .profiles import resolve

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
SAFETY = 0.4
STABILITY_LIMIT = 0.5


class StabilityError(ValueError):
    """Requested time step exceeds the explicit-Euler bound."""


class SolverOverflowError(ArithmeticError):
    """A cell value became non-finite."""


@dataclass(frozen=True, eq=False)
class ContinuumState:
    cells: np.ndarray
    h: float
    epsilon: float = DEFAULT_EPSILON
    time: float = 0.0
    model: ModelFunctions = field(default=CANONICAL, repr=False)

    def __post_init__(self):
        u = np.array(self.cells, dtype=float)
        if u.ndim != 1 or u.size < 2:
            raise ValueError("need at least two cells")
        if not np.all(np.isfinite(u)):
            raise SolverOverflowError("cell values must be finite")
        if not math.isclose(self.h * u.size, 1.0, rel_tol=1e-12):
            raise ValueError(f"h*M must equal 1 (h={self.h!r}, M={u.size})")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        u.setflags(write=False)
        object.__setattr__(self, "cells", u)

    @classmethod
    def from_profile(cls, spec, M: int, epsilon: float = DEFAULT_EPSILON,
                     model: ModelFunctions = CANONICAL, seed: int | None = None) -> "ContinuumState":
        """Build a state from a profile string, callable of ``x``, or array."""
        return cls(resolve(spec, M, seed), 1.0 / M, epsilon, 0.0, model)

    @property
    def M(self) -> int:
        return self.cells.size

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) * self.h

    def replace(self, cells, time: float) -> "ContinuumState":
        return ContinuumState(cells, self.h, self.epsilon, time, self.model)


@dataclass(frozen=True)
class DiagnosticsSample:
    time: float
    mass: float
    energy: float
    weak_energy: float
    l2_to_mean: float
    max_gradient: float
    u_min: float = float("nan")
    u_max: float = float("nan")

    COLUMNS = ("t", "mass", "energy", "weak_energy", "l2_to_mean", "max_gradient")

    def row(self) -> tuple[float, ...]:
        return (self.time, self.mass, self.energy, self.weak_energy, self.l2_to_mean, self.max_gradient)


def face_coefficients(state: ContinuumState) -> np.ndarray:
    """``D(m_{i+1/2}) + eps`` at the ``M - 1`` interior faces."""
    u = state.cells
    return state.model.D(0.5 * (u[1:] + u[:-1])) + state.epsilon


def stability_bound(state: ContinuumState) -> float:
    """Largest admissible ``dt``: ``h^2 / (2 max|D + eps|)``; infinite if the coefficient vanishes."""
    cmax = float(np.max(np.abs(face_coefficients(state))))
    return math.inf if cmax == 0.0 else STABILITY_LIMIT * state.h**2 / cmax


def stable_dt(state: ContinuumState, safety: float = SAFETY) -> float:
    # |D + eps| rather than D + eps so backward faces also bound the step
    return stability_bound(state) * (safety / STABILITY_LIMIT)


def _advance(u: np.ndarray, coef: np.ndarray, h: float, dt: float) -> np.ndarray:
    flux = np.zeros(u.size + 1)
    flux[1:-1] = coef * (u[1:] - u[:-1]) / h
    with np.errstate(over="ignore", invalid="ignore"):
        return u + (dt / h) * (flux[1:] - flux[:-1])


def pde_step(state: ContinuumState, dt: float) -> ContinuumState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    bound = stability_bound(state)
    if dt > bound * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.3e} exceeds stability bound {bound:.3e}")
    new = _advance(state.cells, face_coefficients(state), state.h, dt)
    if not np.all(np.isfinite(new)):
        raise SolverOverflowError(f"non-finite value at t={state.time + dt:.6g}")
    return state.replace(new, state.time + dt)


def max_gradient(state: ContinuumState) -> float:
    return float(np.max(np.abs(np.diff(state.cells)))) / state.h


def weak_energy(state: ContinuumState) -> float:
    """Midpoint rule for ``int u^2 + |D(u)| u_x^2 dx``.

    Gradients are central in the interior and one-sided at the two end cells.
    """
    u = state.cells
    g = np.gradient(u, state.h)
    return float(state.h * np.sum(u * u + np.abs(state.model.D(u)) * g * g))


def diagnostics(state: ContinuumState) -> DiagnosticsSample:
    u, h = state.cells, state.h
    mass = float(h * np.sum(u))
    dev = u - mass
    return DiagnosticsSample(
        time=state.time,
        mass=mass,
        energy=float(h * np.sum(u * u)),
        weak_energy=weak_energy(state),
        # squared L2 distance to the conserved mean
        l2_to_mean=float(h * np.sum(dev * dev)),
        max_gradient=max_gradient(state),
        u_min=float(u.min()),
        u_max=float(u.max()),
    )


@dataclass
class SimulationResult:
    samples: list[DiagnosticsSample]
    final: ContinuumState
    states: list[ContinuumState] = field(default_factory=list)
    steps: int = 0
    blew_up: bool = False
    t_stop: float = 0.0

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])


def pde_simulate(
    initial: ContinuumState,
    t_max: float,
    sample_every: float | None = None,
    *,
    keep_states: bool = False,
    blowup_cap: float | None = None,
    safety: float = SAFETY,
) -> SimulationResult:
    """Advance to ``t_max`` with ``dt = safety * h^2 / max|D + eps|``.

    Steps are shortened to land exactly on every sampling time. With
    ``blowup_cap`` set, the run stops early (``blew_up = True``) once the
    maximum gradient exceeds ``blowup_cap`` times its initial value (or an
    absolute ``blowup_cap`` when the initial gradient is zero); values that
    overflow are treated the same way. Without a cap, overflow raises.
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if sample_every is None:
        sample_every = t_max / 100
    if not sample_every > 0:
        raise ValueError("sample_every must be positive")
    if not 0 < safety <= STABILITY_LIMIT:
        raise ValueError("safety must lie in (0, 1/2]")

    n_samples = max(1, int(round(t_max / sample_every)))
    targets = [initial.time + t_max * k / n_samples for k in range(1, n_samples + 1)]
    state = initial
    samples = [diagnostics(state)]
    states = [state] if keep_states else []
    g0 = samples[0].max_gradient
    limit = None if blowup_cap is None else blowup_cap * (g0 if g0 > 0 else 1.0)

    u, h, t, steps = np.array(state.cells), state.h, state.time, 0
    blew_up = False
    model, eps = state.model, state.epsilon
    for target in targets:
        while t < target:
            coef = model.D(0.5 * (u[1:] + u[:-1])) + eps
            cmax = float(np.max(np.abs(coef))) if np.all(np.isfinite(coef)) else math.inf
            dt = target - t if cmax == 0.0 else min(safety * h * h / cmax, target - t)
            if not dt > 0:
                blew_up = True
                break
            new = _advance(u, coef, h, dt)
            steps += 1
            t = target if dt == target - t else t + dt
            if not np.all(np.isfinite(new)):
                if limit is None:
                    raise SolverOverflowError(f"non-finite value at t={t:.6g}")
                blew_up = True
                break
            u = new
            if limit is not None and np.max(np.abs(np.diff(u))) / h > limit:
                blew_up = True
                break
        state = initial.replace(u, t)
        samples.append(diagnostics(state))
        if keep_states:
            states.append(state)
        if blew_up:
            logger.info("pde_simulate: growth cap hit at t=%.4g", t)
            break
    return SimulationResult(samples, state, states, steps, blew_up, t)


def decaying_window(samples: list[DiagnosticsSample], floor: float = 1e-25) -> list[DiagnosticsSample]:
    """Samples after ``t = 0`` whose ``l2_to_mean`` still exceeds ``floor`` (rounding noise below)."""
    return [s for s in samples[1:] if s.l2_to_mean > floor]


def l2_decay_fit(samples: list[DiagnosticsSample], floor: float = 1e-25) -> tuple[float, float]:
    """Slope and R^2 of ``log(l2_to_mean)`` against time over the decaying window."""
    w = decaying_window(samples, floor)
    slope, _, r2 = fit_log_linear([s.time for s in w], [s.l2_to_mean for s in w])
    return slope, r2


@dataclass(frozen=True)
class MinPrincipleVerdict:
    passed: bool
    applicable: bool
    initial_min: float
    lowest_min: float
    first_violation_time: float | None = None
    min_nondecreasing: bool = True


def min_principle_check(result: SimulationResult, alpha: float = ALPHA, slack: float = 1e-10) -> MinPrincipleVerdict:
    """The spatial minimum must never fall below its initial value (minus ``slack``).

    Only meaningful when the initial data lies at or above ``alpha``; otherwise
    the verdict is returned with ``applicable = False`` and ``passed = False``.
    """
    mins = np.array([s.u_min for s in result.samples])
    times = [s.time for s in result.samples]
    m0 = float(mins[0])
    bad = np.flatnonzero(mins < m0 - slack)
    first = None if bad.size == 0 else times[int(bad[0])]
    return MinPrincipleVerdict(
        passed=m0 >= alpha and first is None,
        applicable=m0 >= alpha,
        initial_min=m0,
        lowest_min=float(mins.min()),
        first_violation_time=first,
        min_nondecreasing=bool(np.all(np.diff(mins) >= -slack)),
    )


def top_mode_amplitude(cells: np.ndarray) -> float:
    """Amplitude of the highest cosine mode ``cos((M-1) pi x)`` resolved on the grid."""
    coef = dct(np.asarray(cells, dtype=float), type=2, norm="ortho")
    return float(abs(coef[-1]) * math.sqrt(2.0 / cells.size))


@dataclass(frozen=True)
class ProbeEntry:
    epsilon: float
    M: int
    backward: bool
    growth_factor: float
    log_growth_rate: float
    mode_amplitude_initial: float
    mode_amplitude_final: float
    blew_up: bool
    t_stop: float
    steps: int


@dataclass
class IllposednessReport:
    horizon: float
    entries: list[ProbeEntry]

    def entry(self, epsilon: float, M: int) -> ProbeEntry:
        for e in self.entries:
            if e.epsilon == epsilon and e.M == M:
                return e
        raise KeyError((epsilon, M))

    @property
    def growth_increases_as_eps_decreases(self) -> bool:
        """At every ``M``, the log growth rate strictly rises as ``eps`` decreases."""
        return all(np.all(np.diff(rates) > 0) for rates in self._rates("M", "epsilon", descending=True))

    @property
    def growth_increases_with_M(self) -> bool:
        """At the smallest ``eps``, the log growth rate strictly rises with ``M``."""
        eps_min = min(e.epsilon for e in self.entries)
        rows = sorted((e for e in self.entries if e.epsilon == eps_min), key=lambda e: e.M)
        return all(b.log_growth_rate > a.log_growth_rate for a, b in zip(rows, rows[1:]))

    def _rates(self, group: str, order: str, descending: bool):
        keys = sorted({getattr(e, group) for e in self.entries})
        for k in keys:
            rows = sorted((e for e in self.entries if getattr(e, group) == k),
                          key=lambda e: getattr(e, order), reverse=descending)
            yield np.array([e.log_growth_rate for e in rows])

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "entries": [asdict(e) for e in self.entries],
            "growth_increases_as_eps_decreases": self.growth_increases_as_eps_decreases,
            "growth_increases_with_M": self.growth_increases_with_M,
        }


def _probe_one(args) -> ProbeEntry:
    u0_spec, eps, M, horizon, cap, model = args
    st = ContinuumState.from_profile(u0_spec, M, eps, model)
    backward = bool(np.any(model.D(st.cells) + eps < 0))
    g0 = max_gradient(st)
    a0 = top_mode_amplitude(st.cells)
    res = pde_simulate(st, horizon, horizon, blowup_cap=cap)
    g1 = res.samples[-1].max_gradient
    growth = g1 / g0 if g0 > 0 else (1.0 if g1 == 0 else math.inf)
    rate = math.log(growth) / res.t_stop if growth > 0 and res.t_stop > 0 else 0.0
    return ProbeEntry(eps, M, backward, growth, rate, a0, top_mode_amplitude(res.final.cells),
                      res.blew_up, res.t_stop, res.steps)


def illposedness_probe(
    u0_spec,
    epsilon_schedule,
    M_schedule,
    horizon: float = 0.05,
    blowup_cap: float = 1e8,
    model: ModelFunctions = CANONICAL,
    workers: int = 1,
) -> IllposednessReport:
    """Run every ``(eps, M)`` pair to a short horizon and record gradient growth.

    ``u0_spec`` is a profile string, callable of ``x`` or array-valued spec and
    must lie strictly inside ``(0, alpha)``. Runs whose gradient exceeds
    ``blowup_cap`` times its start value stop early; their ``log_growth_rate``
    uses the stopping time. With ``workers > 1`` the pairs run in separate
    processes (the spec must then be picklable, e.g. a profile string).
    """
    eps_list = [float(e) for e in epsilon_schedule]
    M_list = [int(m) for m in M_schedule]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon_schedule must be strictly decreasing")
    if any(b <= a for a, b in zip(M_list, M_list[1:])):
        raise ValueError("M_schedule must be strictly increasing")
    for M in M_list:
        u = resolve(u0_spec, M)
        if not (np.all(u > 0) and np.all(u < model.alpha)):
            raise ValueError("initial data must lie strictly inside (0, alpha)")
    jobs = [(u0_spec, e, M, horizon, blowup_cap, model) for e in eps_list for M in M_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_probe_one, jobs))
    else:
        entries = [_probe_one(j) for j in jobs]
    return IllposednessReport(horizon, entries)


@dataclass(frozen=True)
class BumpTestFunction:
    """``phi(x, t) = b((x - xc)/rx) b((t - tc)/rt)`` with ``b(s) = exp(-1/(1 - s^2))`` on ``|s| < 1``."""

    x_center: float = 0.5
    x_radius: float = 0.4
    t_center: float = 0.5
    t_radius: float = 0.45

    def __post_init__(self):
        if self.x_radius <= 0 or self.t_radius <= 0:
            raise ValueError("radii must be positive")
        if self.x_center - self.x_radius < 0 or self.x_center + self.x_radius > 1:
            raise ValueError("spatial support must lie inside [0, 1]")

    @staticmethod
    def _bump(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        d = np.zeros_like(s)
        inside = np.abs(s) < 1
        q = 1.0 - s[inside] ** 2
        out[inside] = np.exp(-1.0 / q)
        d[inside] = out[inside] * (-2.0 * s[inside] / q**2)
        return out, d

    def evaluate(self, x, t):
        """Return ``(phi_t, phi_x)`` at positions ``x`` and scalar time ``t``."""
        bx, dbx = self._bump((np.asarray(x) - self.x_center) / self.x_radius)
        bt, dbt = self._bump((t - self.t_center) / self.t_radius)
        return bx * dbt / self.t_radius, dbx * bt / self.x_radius

    @classmethod
    def spanning(cls, t0: float, t1: float) -> "BumpTestFunction":
        return cls(0.5, 0.4, 0.5 * (t0 + t1), 0.45 * (t1 - t0))


def weak_form_residual(states: list[ContinuumState], test_function: BumpTestFunction | None = None) -> float:
    """``int int [u phi_t - (D(u) + eps) u_x phi_x] dx dt`` over the stored states.

    Space uses the midpoint rule with central gradients, time the trapezoid
    rule over the stored sample times. The default test function spans the
    stored time interval.
    """
    if len(states) < 2:
        raise ValueError("need at least two stored states")
    times = np.array([s.time for s in states])
    phi = test_function or BumpTestFunction.spanning(times[0], times[-1])
    vals = []
    for s in states:
        u = s.cells
        phi_t, phi_x = phi.evaluate(s.x, s.time)
        ux = np.gradient(u, s.h)
        vals.append(s.h * np.sum(u * phi_t - (s.model.D(u) + s.epsilon) * ux * phi_x))
    vals = np.array(vals)
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(times)))
