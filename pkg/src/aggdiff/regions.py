"""Forward (diffusion) and backward (aggregation) index regions.

Membership uses the raw comparison ``u >= 1/2`` with no tolerance band.
Indices are 1-based lattice indices ``1..N-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .lattice import LatticeState, Trajectory

THRESHOLD = 0.5


@dataclass(frozen=True)
class RegionPartition:
    forward: tuple[int, ...]
    backward: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.forward) + len(self.backward)


@dataclass(frozen=True)
class RegionVerdict:
    passed: bool
    first_violation_step: int | None = None
    lost_indices: tuple[int, ...] = ()
    checked_pairs: int = 0


def forward_region(state: LatticeState) -> RegionPartition:
    u = state.interior
    idx = np.arange(1, u.size + 1)
    mask = u >= THRESHOLD
    return RegionPartition(tuple(idx[mask].tolist()), tuple(idx[~mask].tolist()))


def check_region_monotone(traj: Trajectory) -> RegionVerdict:
    """Check that the forward region never loses an index between snapshots.

    With a stride above one, consecutive snapshots are several steps apart;
    inclusion is still asserted between them.
    """
    return check_region_monotone_values(traj.values(), traj.steps)


def check_region_monotone_values(values: np.ndarray, steps: Iterable[int] | None = None) -> RegionVerdict:
    values = np.asarray(values)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("need a non-empty (time, sites) array")
    steps = list(range(values.shape[0])) if steps is None else list(steps)
    fwd = values >= THRESHOLD
    lost = fwd[:-1] & ~fwd[1:]
    bad = np.flatnonzero(lost.any(axis=1))
    if bad.size:
        t = int(bad[0])
        return RegionVerdict(
            False,
            steps[t + 1],
            tuple((np.flatnonzero(lost[t]) + 1).tolist()),
            t + 1,
        )
    return RegionVerdict(True, None, (), values.shape[0] - 1)


def is_monotone_profile(state: LatticeState) -> tuple[bool, str | None]:
    """Return ``(True, direction)`` for monotone profiles, else ``(False, None)``.

    ``direction`` is ``"nondecreasing"``, ``"nonincreasing"`` or ``"both"``
    (constant profiles).
    """
    d = np.diff(state.interior)
    up, down = bool(np.all(d >= 0)), bool(np.all(d <= 0))
    if up and down:
        return True, "both"
    if up:
        return True, "nondecreasing"
    if down:
        return True, "nonincreasing"
    return False, None


def spread(state: LatticeState) -> float:
    u = state.interior
    return float(u.max() - u.min())
