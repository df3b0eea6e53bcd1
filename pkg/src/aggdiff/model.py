"""Scalar model functions and boundary-condition semantics.

The movement probability is ``K(u) = (u**2 - u**3) / 2``. Its effective
diffusivity ``D(u) = K - u K'`` equals ``u**2 (u - 1/2)``, which is negative
(aggregation) below the threshold ``alpha = 1/2`` and positive (diffusion)
above it.

All functions accept scalars or numpy arrays. Inputs outside ``[0, 1]`` raise
:class:`DomainError`; nothing is ever clamped.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ALPHA = 0.5
K_MAX = 2.0 / 27.0

# Rounding band accepted around [0, 1] for lattice states produced by the stepper.
DENSITY_SLACK = 1e-12


class DomainError(ValueError):
    """Raised when a density argument lies outside [0, 1]."""


class BoundaryCondition(enum.Enum):
    NO_FLUX = "noflux"
    HOSTILE = "hostile"

    @classmethod
    def parse(cls, value: "str | BoundaryCondition") -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown boundary condition {value!r} (use 'noflux' or 'hostile')")


def check_unit_interval(values, name: str = "u", slack: float = 0.0) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    if arr.size and (arr.min() < -slack or arr.max() > 1.0 + slack):
        raise DomainError(
            f"{name} outside [0, 1]: min={float(arr.min())!r}, max={float(arr.max())!r}"
        )
    return arr


def _scalar_or_array(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def mobility_K(u):
    """Movement probability ``(u^2 - u^3)/2``; lies in ``[0, 2/27]``."""
    arr = check_unit_interval(u)
    return _scalar_or_array(0.5 * (arr * arr - arr * arr * arr), u)


def diffusivity_D(u):
    """Effective diffusivity ``u^2 (u - 1/2)``."""
    arr = check_unit_interval(u)
    return _scalar_or_array(arr * arr * (arr - 0.5), u)


def coupling_C(x, y):
    """Neighbour coupling ``(x y / 2)(x + y - 1)`` weighting lattice differences."""
    xa = check_unit_interval(x, "x")
    ya = check_unit_interval(y, "y")
    out = 0.5 * xa * ya * (xa + ya - 1.0)
    return _scalar_or_array(out, out)


def bound_function_f(x, y):
    """Half-update bounding map ``x + x y (x + y - 1)(y - x)``.

    One lattice update of site ``j`` is the average
    ``(f(u_j, u_{j-1}) + f(u_j, u_{j+1})) / 2``, so ``0 <= f <= 1`` on the
    unit square bounds the whole lattice in ``[0, 1]``.
    """
    xa = check_unit_interval(x, "x")
    ya = check_unit_interval(y, "y")
    out = xa + xa * ya * (xa + ya - 1.0) * (ya - xa)
    return _scalar_or_array(out, out)


def extend_with_ghosts(interior, bc: BoundaryCondition) -> np.ndarray:
    """Return ``[u_0, u_1, ..., u_{N-1}, u_N]`` with ghost values filled per ``bc``.

    Works along the last axis so batches of states can be extended at once.
    """
    u = np.asarray(interior, dtype=float)
    if u.shape[-1] < 1:
        raise ValueError("need at least one interior value")
    bc = BoundaryCondition.parse(bc)
    if bc is BoundaryCondition.NO_FLUX:
        left, right = u[..., :1], u[..., -1:]
    else:
        left = np.zeros_like(u[..., :1])
        right = np.zeros_like(u[..., -1:])
    return np.concatenate([left, u, right], axis=-1)


def canonical_diffusivity(u):
    """Unchecked ``u^2 (u - 1/2)`` for solver internals that may leave [0, 1]."""
    u = np.asarray(u, dtype=float)
    return u * u * (u - 0.5)


@dataclass(frozen=True)
class ModelFunctions:
    """A diffusivity with a sign change at ``alpha``.

    ``diffusivity`` must be vectorised and must not raise for arguments
    outside [0, 1]: the continuum solver evaluates it on unstable runs too.
    """

    alpha: float = ALPHA
    diffusivity: Callable[[np.ndarray], np.ndarray] = field(default=canonical_diffusivity)
    name: str = "canonical"

    def D(self, u):
        return self.diffusivity(np.asarray(u, dtype=float))

    def check_sign_pattern(self, samples: int = 10_001) -> bool:
        """True iff D < 0 on (0, alpha), D(alpha) = 0 and D > 0 on (alpha, 1)."""
        u = np.linspace(0.0, 1.0, samples)[1:-1]
        d = self.D(u)
        below, above = u < self.alpha, u > self.alpha
        at_root = abs(float(self.D(np.array([self.alpha]))[0])) <= 1e-14
        return bool(np.all(d[below] < 0) and np.all(d[above] > 0) and at_root)


CANONICAL = ModelFunctions()
