"""Discrete reinforced-random-walk lattice.

Sites ``0..N``; the interior ``1..N-1`` carries the state and sites ``0`` and
``N`` are ghosts set by the boundary condition. One call of the update rule is
one time unit. The update is synchronous::

    u_j <- u_j + C(u_j, u_{j-1}) (u_{j-1} - u_j) + C(u_j, u_{j+1}) (u_{j+1} - u_j)

with ``C(x, y) = (x y / 2)(x + y - 1)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import (
    DENSITY_SLACK,
    BoundaryCondition,
    DomainError,
    check_unit_interval,
    extend_with_ghosts,
)

logger = logging.getLogger(__name__)


class InvariantViolation(RuntimeError):
    """A lattice value left [0, 1]; this contradicts the boundedness theorem."""


class RegimeError(ValueError):
    """Input outside the diffusion regime [1/2, 1] required by the matrix form."""


@dataclass(frozen=True, eq=False)
class LatticeState:
    interior: np.ndarray
    bc: BoundaryCondition = BoundaryCondition.NO_FLUX

    def __post_init__(self):
        arr = np.array(self.interior, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("interior must be a non-empty 1-D array")
        check_unit_interval(arr, "interior", slack=DENSITY_SLACK)
        arr.setflags(write=False)
        object.__setattr__(self, "interior", arr)
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))

    @property
    def n_points(self) -> int:
        """``N``: the interior holds ``N - 1`` sites."""
        return self.interior.size + 1

    def with_values(self, values) -> "LatticeState":
        return LatticeState(values, self.bc)

    def ghosted(self) -> np.ndarray:
        return extend_with_ghosts(self.interior, self.bc)

    def __eq__(self, other):
        if not isinstance(other, LatticeState):
            return NotImplemented
        return self.bc is other.bc and np.array_equal(self.interior, other.interior)

    def __repr__(self):
        return f"LatticeState({self.interior.tolist()!r}, bc={self.bc.value})"


@dataclass
class Trajectory:
    """Recorded snapshots of one run; ``steps[i]`` is the step index of ``states[i]``."""

    states: list[LatticeState]
    steps: list[int]
    step_count: int
    converged: bool
    final_change: float = float("nan")
    stride: int = 1

    @property
    def final(self) -> LatticeState:
        return self.states[-1]

    @property
    def initial(self) -> LatticeState:
        return self.states[0]

    def values(self) -> np.ndarray:
        """Snapshots stacked into an array of shape ``(len(states), N - 1)``."""
        return np.stack([s.interior for s in self.states])


@dataclass(frozen=True)
class DifferenceVector:
    """Entry ``i`` is ``u_{i+2} - u_{i+1}``: consecutive interior differences."""

    diffs: np.ndarray = field(repr=True)

    def __len__(self):
        return self.diffs.size


def pair_couplings(ghosted: np.ndarray) -> np.ndarray:
    """``C_j = C(u_j, u_{j-1})`` for ``j = 1..N`` along the last axis."""
    left, right = ghosted[..., :-1], ghosted[..., 1:]
    return 0.5 * right * left * (right + left - 1.0)


def step_array(u: np.ndarray, bc: BoundaryCondition) -> np.ndarray:
    """Unchecked synchronous update of interior arrays of shape ``(..., N-1)``.

    This is the kernel shared by :func:`lattice_step` and the batched
    verification runs.
    """
    e = extend_with_ghosts(u, bc)
    flux = pair_couplings(e) * (e[..., 1:] - e[..., :-1])
    return u - flux[..., :-1] + flux[..., 1:]


def _guard(values: np.ndarray) -> None:
    lo, hi = values.min(), values.max()
    if not (lo >= -DENSITY_SLACK and hi <= 1.0 + DENSITY_SLACK):
        raise InvariantViolation(
            f"lattice value left [0, 1] (min={lo!r}, max={hi!r}); "
            "the boundedness theorem would be falsified"
        )


def lattice_step(state: LatticeState) -> LatticeState:
    new = step_array(state.interior, state.bc)
    _guard(new)
    return LatticeState(new, state.bc)


def interior_mass(state: LatticeState) -> float:
    return float(np.sum(state.interior))


def simulate(
    initial: LatticeState,
    max_steps: int,
    stop_tol: float = 0.0,
    stride: int = 1,
) -> Trajectory:
    """Iterate the update until the successive change drops below ``stop_tol``.

    The run stops *before* applying a step whose max-norm change is below
    ``stop_tol``; a constant initial state is therefore converged at step 0.
    Every ``stride``-th state is recorded, and the final state always is.
    An exact fixed point (zero change) always counts as converged, so
    ``stop_tol = 0`` only stops on exact fixed points.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    if stop_tol < 0:
        raise ValueError("stop_tol must be >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")

    bc = initial.bc
    u = np.array(initial.interior)
    states, steps = [initial], [0]
    converged = False
    change = float("nan")
    k = 0
    while k < max_steps:
        new = step_array(u, bc)
        _guard(new)
        change = float(np.max(np.abs(new - u)))
        if change < stop_tol or change == 0.0:
            converged = True
            break
        u = new
        k += 1
        if k % stride == 0:
            states.append(LatticeState(u, bc))
            steps.append(k)
    else:
        # one extra evaluation decides convergence of the last state
        new = step_array(u, bc)
        change = float(np.max(np.abs(new - u)))
        converged = change < stop_tol or change == 0.0
    if steps[-1] != k:
        states.append(LatticeState(u, bc))
        steps.append(k)
    logger.debug("simulate: %d steps, converged=%s, change=%.3g", k, converged, change)
    return Trajectory(states, steps, k, converged, change, stride)


def coefficient_matrix(state: LatticeState) -> np.ndarray:
    """Tridiagonal ``[C]`` of size ``N x N`` acting on ``[d_1, ..., d_N]``.

    Row ``j`` is ``(C_{j-1}, 1 - 2 C_j, C_{j+1})`` where ``d_j = u_j - u_{j-1}``
    includes the two ghost differences.
    """
    c = pair_couplings(state.ghosted())
    n = c.size
    mat = np.diag(1.0 - 2.0 * c)
    if n > 1:
        mat += np.diag(c[:-1], -1) + np.diag(c[1:], 1)
    return mat


def step_differences(state: LatticeState) -> DifferenceVector:
    """Differences of the next interior state via the matrix form.

    Only valid in the regime where every interior value is in [1/2, 1]; there
    all couplings lie in [0, 1/2] and the matrix is entrywise nonnegative.
    """
    u = state.interior
    if u.min() < 0.5 or u.max() > 1.0:
        raise RegimeError("matrix formulation requires all interior values in [1/2, 1]")
    g = state.ghosted()
    d = np.diff(g)
    nxt = coefficient_matrix(state) @ d
    # rows 2..N-1 are interior differences; the ghost rows are fixed by bc
    return DifferenceVector(nxt[1:-1])


def differences(state: LatticeState) -> DifferenceVector:
    return DifferenceVector(np.diff(state.interior))


__all__ = [
    "DifferenceVector",
    "DomainError",
    "InvariantViolation",
    "LatticeState",
    "RegimeError",
    "Trajectory",
    "coefficient_matrix",
    "differences",
    "interior_mass",
    "lattice_step",
    "pair_couplings",
    "simulate",
    "step_array",
    "step_differences",
]
