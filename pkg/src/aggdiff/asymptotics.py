"""Long-time behaviour of lattice trajectories.

Besides generic convergence detection and exponential-rate fitting, this module
holds the ten-case taxonomy for the three-site lattice (``N = 4``) with hostile
ends ``u_0 = u_4 = 0``.

Predicate order
---------------
Exact-equality cases come first (Case 9, then Case 6), followed by Cases 1-5,
7, 8 and 10 in numerical order. A case only matches when one of its listed
sub-branches does; otherwise the search falls through to the next case, and
triples that no case covers are labelled ``Undetermined``. Every case is tried
in the given orientation first and then in the reflected one ``(u3, u2, u1)``,
so ``classify_n4(a, b, c)`` and ``classify_n4(c, b, a)`` receive the same
label with reflected predictions.

Comparisons on predicate boundaries (``u1 + u2 == 1``, ``u1 == u3``) use exact
floating-point equality: pass intent-exact values (dyadic fractions are safe).
Ties in "is the maximum/minimum" are resolved inclusively.

Chained predictions
-------------------
The arguments for Cases 4 and 5 allow the trajectory to leave its initial
configuration and continue as another named case. For these branches a
*standing condition* is monitored during :func:`verify_n4`; when it fails, the
current state is reclassified, and if the new case is one of the named
successors its prediction replaces the old one. An excursion into any other
case keeps the prediction in force and is recorded in the report's note.

Some branches also carry a *claim*: an inequality the case analysis asserts
for all times. Its first violation is recorded among the transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .lattice import InvariantViolation, LatticeState, Trajectory, step_array
from .model import DENSITY_SLACK, BoundaryCondition, DomainError, check_unit_interval
from .regions import is_monotone_profile

HOSTILE = BoundaryCondition.HOSTILE


class HypothesisError(ValueError):
    """A theorem's hypotheses do not hold for the supplied state."""


class DegenerateFitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# generic convergence / rate tools


@dataclass(frozen=True)
class ConvergenceResult:
    converged: bool
    limit: np.ndarray | None
    steps_used: int
    final_change: float


def detect_convergence(traj: Trajectory, tol: float, window: int = 1) -> ConvergenceResult:
    """Declare convergence when the last ``window`` snapshot changes are all below ``tol``.

    Changes are measured in the max norm between consecutive recorded
    snapshots. A single-snapshot trajectory defers to the trajectory's own flag.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if window < 1:
        raise ValueError("window must be >= 1")
    vals = traj.values()
    if vals.shape[0] == 1:
        change = 0.0 if traj.converged else float("inf")
    else:
        tail = vals[-(window + 1):]
        change = float(np.max(np.abs(np.diff(tail, axis=0))))
    converged = change < tol
    limit = np.array(vals[-1]) if converged else None
    return ConvergenceResult(converged, limit, traj.step_count, change)


def predicted_limit_monotone(state: LatticeState) -> float:
    """Interior mean, the limit for monotone no-flux data in [1/2, 1]."""
    if state.bc is not BoundaryCondition.NO_FLUX:
        raise HypothesisError("monotone-limit theorem assumes no-flux boundaries")
    u = state.interior
    if u.min() < 0.5 or u.max() > 1.0:
        raise HypothesisError("all values must lie in [1/2, 1]")
    if not is_monotone_profile(state)[0]:
        raise HypothesisError("initial profile must be monotone")
    return float(np.mean(u))


def fit_log_linear(t: Sequence[float], v: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through ``(t, log v)``; returns ``(slope, intercept, r2)``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.size < 3 or t.size != v.size:
        raise ValueError("need at least 3 (t, v) pairs")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValueError("all values must be positive and finite")
    if np.ptp(t) == 0:
        raise DegenerateFitError("all t are equal")
    y = np.log(v)
    tc = t - t.mean()
    slope = float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))
    intercept = float(y.mean() - slope * t.mean())
    resid = y - (intercept + slope * t)
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.dot(resid, resid)) / ss_tot
    return slope, intercept, r2


def fit_decay_rate(series) -> float:
    """Slope of ``log v`` against ``t`` for ``(t, v)`` pairs; negative means decay."""
    pairs = np.asarray(series, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("series must be a sequence of (t, v) pairs")
    return fit_log_linear(pairs[:, 0], pairs[:, 1])[0]


# ---------------------------------------------------------------------------
# N = 4 taxonomy


@dataclass(frozen=True)
class Prediction:
    """What the analysis says about ``lim (u1, u2, u3)``.

    ``limit`` is a fully specified value; the other fields are structural
    (1-based indices). An empty prediction (``is_open``) asserts nothing.
    """

    description: str
    limit: tuple[float, float, float] | None = None
    zero: tuple[int, ...] = ()
    equal: tuple[int, ...] = ()
    common_above: float | None = None
    steady: bool = False

    @property
    def is_open(self) -> bool:
        return self.limit is None and not self.zero and not self.equal and not self.steady

    def reflected(self) -> "Prediction":
        r = {1: 3, 2: 2, 3: 1}
        return replace(
            self,
            limit=None if self.limit is None else tuple(reversed(self.limit)),
            zero=tuple(sorted(r[i] for i in self.zero)),
            equal=tuple(sorted(r[i] for i in self.equal)),
        )

    def check(self, values, tol: float) -> tuple[bool, float]:
        """Return ``(holds, worst_error)`` for an empirical limit."""
        v = np.asarray(values, dtype=float)
        err = 0.0
        ok = True
        if self.limit is not None:
            e = float(np.max(np.abs(v - np.asarray(self.limit))))
            err = max(err, e)
            ok &= e <= tol
        for i in self.zero:
            e = abs(float(v[i - 1]))
            err = max(err, e)
            ok &= e <= tol
        if self.equal:
            grp = v[[i - 1 for i in self.equal]]
            e = float(np.ptp(grp))
            err = max(err, e)
            ok &= e <= tol
            if self.common_above is not None:
                ok &= float(grp.mean()) > self.common_above
        return bool(ok), err

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "limit": None if self.limit is None else list(self.limit),
            "zero": list(self.zero),
            "equal": list(self.equal),
            "common_above": self.common_above,
            "steady": self.steady,
        }


Pred = Callable[[float, float, float], bool]


@dataclass(frozen=True)
class _Branch:
    case: int
    branch: str
    when: Pred
    predict: Callable[[float, float, float], Prediction] | None
    standing: Pred | None = None
    successors: frozenset = frozenset()
    note: str = ""
    claim: Pred | None = None
    claim_text: str = ""


def _total(a: float, b: float, c: float) -> float:
    # exact sum, so a triple and its reflection get identical totals
    return math.fsum((a, b, c))


def _all_equal(desc: str) -> Callable[[float, float, float], Prediction]:
    return lambda a, b, c: Prediction(desc, equal=(1, 2, 3))


_BRANCHES: tuple[_Branch, ...] = (
    _Branch(9, "", lambda a, b, c: a + b == 1.0 and b == c,
            lambda a, b, c: Prediction("steady state", limit=(a, b, c), steady=True)),
    _Branch(6, "a", lambda a, b, c: a == c and a + b > 1.0 and b <= a,
            lambda a, b, c: Prediction("all sites -> total/3", limit=(_total(a, b, c) / 3,) * 3)),
    _Branch(6, "b", lambda a, b, c: a == c and a + b > 1.0 and b > a,
            _all_equal("common limit (enters Case 10)")),
    _Branch(1, "", lambda a, b, c: a + b > 1.0 and b + c < 1.0 and a < b,
            lambda a, b, c: Prediction("u1, u2 share a limit > 1/2; u3 -> 0",
                                       zero=(3,), equal=(1, 2), common_above=0.5)),
    _Branch(2, "", lambda a, b, c: a + b < 1.0 and b + c < 1.0 and b <= a and b <= c,
            lambda a, b, c: Prediction("u2 -> 0; u1, u3 converge", zero=(2,))),
    _Branch(3, "", lambda a, b, c: a + b < 1.0 and b + c < 1.0 and _total(a, b, c) < 1.0
            and b >= a and b >= c,
            lambda a, b, c: Prediction("mass collects on u2", limit=(0.0, _total(a, b, c), 0.0))),
    _Branch(4, "", lambda a, b, c: a + b < 1.0 and b + c < 1.0 and _total(a, b, c) < 1.0
            and c >= b >= a,
            lambda a, b, c: Prediction("mass collects on u3", limit=(0.0, 0.0, _total(a, b, c))),
            standing=lambda a, b, c: c >= b >= a,
            successors=frozenset({2, 3})),
    _Branch(5, "a", lambda a, b, c: a + b < 1.0 and b + c < 1.0 and _total(a, b, c) >= 1.0
            and c >= b >= a,
            lambda a, b, c: Prediction("u1 -> 0; u2, u3 -> total/2",
                                       limit=(0.0, _total(a, b, c) / 2, _total(a, b, c) / 2)),
            standing=lambda a, b, c: a + b < 1.0 and b + c < 1.0 and b >= a,
            successors=frozenset({1, 2, 5})),
    _Branch(5, "b", lambda a, b, c: a + b < 1.0 and b + c > 1.0 and c >= b >= a and b <= 0.5,
            lambda a, b, c: Prediction("u1 -> 0; u2, u3 -> total/2",
                                       limit=(0.0, _total(a, b, c) / 2, _total(a, b, c) / 2)),
            claim=lambda a, b, c: a + b < 1.0, claim_text="u1 + u2 < 1 for all t"),
    _Branch(7, "a", lambda a, b, c: a + b > 1.0 and b + c > 1.0 and b <= a and b <= c,
            _all_equal("all sites share a common limit")),
    _Branch(7, "b", lambda a, b, c: a + b > 1.0 and b + c > 1.0 and c > b > 0.5 > a,
            None, note="open: asymptotic limit or periodic solution not established"),
    _Branch(7, "c", lambda a, b, c: a + b > 1.0 and b + c > 1.0 and c >= b >= a >= 0.5,
            lambda a, b, c: Prediction("monotone diffusion-region data -> total/3",
                                       limit=(_total(a, b, c) / 3,) * 3)),
    _Branch(8, "", lambda a, b, c: a + b < 1.0 and b + c > 1.0 and b > 0.5 and c >= b,
            None, note="open: limits exist only while u1 + u2 < 1 persists"),
    _Branch(10, "", lambda a, b, c: (0.5 <= min(a, c) and max(a, c) <= b <= 1.0)
            or (0.5 <= b <= min(a, c) and max(a, c) <= 1.0),
            _all_equal("all sites share a common limit")),
)


def _match(a: float, b: float, c: float) -> tuple[_Branch | None, bool]:
    for br in _BRANCHES:
        if br.when(a, b, c):
            return br, False
        if br.when(c, b, a):
            return br, True
    return None, False


@dataclass
class CaseReport:
    label: str
    branch: str
    mirrored: bool
    initial: tuple[float, float, float]
    predicted: Prediction | None
    verdict: str | None = None
    empirical_limit: tuple[float, float, float] | None = None
    converged: bool | None = None
    steps_used: int | None = None
    error: float | None = None
    transitions: list[dict] = field(default_factory=list)
    effective_prediction: Prediction | None = None
    diagnostics: dict | None = None
    note: str = ""

    @property
    def case_number(self) -> int | None:
        return None if self.label == "Undetermined" else int(self.label[4:])

    @property
    def key(self) -> str:
        """Compact label such as ``"5b"`` or ``"Undetermined"``."""
        n = self.case_number
        return self.label if n is None else f"{n}{self.branch}"

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "branch": self.branch,
            "mirrored": self.mirrored,
            "initial": list(self.initial),
            "predicted": None if self.predicted is None else self.predicted.to_dict(),
            "verdict": self.verdict,
            "empirical_limit": None if self.empirical_limit is None else list(self.empirical_limit),
            "converged": self.converged,
            "steps_used": self.steps_used,
            "error": self.error,
            "transitions": self.transitions,
            "effective_prediction": None if self.effective_prediction is None
            else self.effective_prediction.to_dict(),
            "diagnostics": self.diagnostics,
            "note": self.note,
        }


def classify_n4(u1: float, u2: float, u3: float, *, slack: float = 0.0) -> CaseReport:
    """Label an initial triple with its case and attach the predicted limit.

    Open branches (part of Case 7, Case 8) and uncovered triples get verdict
    ``"Open"``; all other reports carry ``verdict=None`` until verified.
    """
    vals = check_unit_interval([u1, u2, u3], "triple", slack=slack)
    a, b, c = (float(x) for x in vals)
    br, mirrored = _match(a, b, c)
    if br is None:
        return CaseReport("Undetermined", "", False, (a, b, c), None, verdict="Open",
                          note="no case of the taxonomy covers this triple")
    pred = None
    if br.predict is not None:
        x, y, z = (c, b, a) if mirrored else (a, b, c)
        pred = br.predict(x, y, z)
        if mirrored:
            pred = pred.reflected()
    return CaseReport(
        f"Case{br.case}", br.branch, mirrored, (a, b, c), pred,
        verdict="Open" if pred is None else None, note=br.note,
    )


def _branch_of(report: CaseReport) -> _Branch | None:
    for br in _BRANCHES:
        if f"Case{br.case}" == report.label and br.branch == report.branch:
            return br
    return None


def _holds(pred: Pred, mirrored: bool, u: np.ndarray) -> bool:
    a, b, c = (float(x) for x in u)
    return pred(c, b, a) if mirrored else pred(a, b, c)


# ---------------------------------------------------------------------------
# oscillation diagnostics for open reports


def oscillation_diagnostics(series: np.ndarray, max_candidates: int = 3) -> dict:
    """Envelope and autocorrelation period candidates of a scalar series."""
    x = np.asarray(series, dtype=float)
    out = {
        "samples": int(x.size),
        "envelope_min": float(x.min()) if x.size else None,
        "envelope_max": float(x.max()) if x.size else None,
        "amplitude": float(np.ptp(x)) if x.size else 0.0,
        "period_candidates": [],
    }
    if x.size < 4 or out["amplitude"] <= 1e-12 * max(1.0, abs(float(x.mean()))):
        return out
    y = x - x.mean()
    n = y.size
    spec = np.fft.rfft(y, 2 * n)
    acf = np.fft.irfft(spec * np.conj(spec))[:n]
    if acf[0] <= 0:
        return out
    acf = acf / acf[0]
    peaks = [k for k in range(1, n - 1) if acf[k] > 0.5 and acf[k] >= acf[k - 1] and acf[k] > acf[k + 1]]
    out["period_candidates"] = [int(k) for k in peaks[:max_candidates]]
    return out


# ---------------------------------------------------------------------------
# verification


def verify_n4_batch(
    triples,
    max_steps: int = 10_000_000,
    tol: float = 1e-5,
    stop_tol: float = 1e-13,
    history: int = 4096,
) -> list[CaseReport]:
    """Simulate many hostile-boundary triples and compare with their predictions.

    All triples advance synchronously with the shared lattice kernel; a row
    stops once its successive change falls below ``stop_tol`` (or is exactly
    zero). The last ``history`` values of ``u2`` are kept for open reports.
    """
    tri = np.array(triples, dtype=float).reshape(-1, 3)
    reports = [classify_n4(*row) for row in tri]
    n = tri.shape[0]
    steps_used = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    final_change = np.full(n, np.nan)
    hist = np.zeros((n, history))
    current = list(reports)
    strayed = np.zeros(n, dtype=bool)
    transitions: list[list[dict]] = [[] for _ in range(n)]

    claim_broken = np.zeros(n, dtype=bool)

    def watched(i: int) -> bool:
        br = _branch_of(current[i])
        if br is None or strayed[i]:
            return False
        return br.standing is not None or (br.claim is not None and not claim_broken[i])

    active = np.arange(n)
    u = tri.copy()
    watch = np.array([watched(i) for i in range(n)], dtype=bool)
    k = 0
    while active.size and k < max_steps:
        new = step_array(u, HOSTILE)
        if new.min() < -DENSITY_SLACK or new.max() > 1.0 + DENSITY_SLACK:
            raise InvariantViolation("N=4 trajectory left [0, 1]")
        change = np.max(np.abs(new - u), axis=1)
        done = (change < stop_tol) | (change == 0.0)
        if done.any():
            idx = active[done]
            converged[idx] = True
            steps_used[idx] = k
            final_change[idx] = change[done]
            tri[idx] = u[done]
            keep = ~done
            active, u, new = active[keep], u[keep], new[keep]
        if not active.size:
            break
        u = new
        k += 1
        hist[active, k % history] = u[:, 1]
        for row in np.flatnonzero(watch[active]):
            i = int(active[row])
            br = _branch_of(current[i])
            if br.claim is not None and not claim_broken[i]:
                if not _holds(br.claim, current[i].mirrored, u[row]):
                    claim_broken[i] = True
                    transitions[i].append({"step": k, "claim_violated": br.claim_text,
                                           "state": [float(x) for x in u[row]]})
                    watch[i] = watched(i)
            if br.standing is None or _holds(br.standing, current[i].mirrored, u[row]):
                continue
            nxt = classify_n4(*u[row], slack=DENSITY_SLACK)
            transitions[i].append({"step": k, "from": current[i].key, "to": nxt.key,
                                   "state": [float(x) for x in u[row]]})
            if nxt.case_number in br.successors:
                current[i] = nxt
            else:
                strayed[i] = True
            watch[i] = watched(i)
    if active.size:
        steps_used[active] = k
        tri[active] = u
        last = step_array(u, HOSTILE)
        final_change[active] = np.max(np.abs(last - u), axis=1)

    out = []
    for i, rep in enumerate(reports):
        lim = tuple(float(x) for x in tri[i])
        rep = replace(rep, empirical_limit=lim, converged=bool(converged[i]),
                      steps_used=int(steps_used[i]), transitions=transitions[i])
        pred = current[i].predicted
        if rep.verdict == "Open" or current[i].verdict == "Open":
            kk = int(steps_used[i])
            tail = min(history, max(4, math.ceil(0.1 * kk)), kk)
            pos = [(kk - j) % history for j in range(tail - 1, -1, -1)]
            rep.diagnostics = oscillation_diagnostics(hist[i, pos] if tail else np.array([]))
            rep.diagnostics["final_change"] = float(final_change[i])
            rep.verdict = "Open"
        elif not converged[i]:
            rep.verdict = "Mismatch"
            rep.note = f"not converged within {max_steps} steps"
        else:
            ok, err = pred.check(lim, tol)
            rep.error = err
            rep.verdict = "Match" if ok else "Mismatch"
            if strayed[i]:
                # the prediction in force is still judged; the excursion is recorded
                rep.note = "trajectory entered a case the analysis does not hand off to"
            if not ok and claim_broken[i]:
                rep.note = "the analysis' claim failed along the trajectory"
        if current[i] is not reports[i]:
            rep.effective_prediction = pred
        out.append(rep)
    return out


def verify_n4(u1: float, u2: float, u3: float, max_steps: int = 10_000_000,
              tol: float = 1e-5, stop_tol: float = 1e-13) -> CaseReport:
    return verify_n4_batch([(u1, u2, u3)], max_steps, tol, stop_tol)[0]


# ---------------------------------------------------------------------------
# Case 10 contraction


def contraction_ratios(values, factor: str = "one_sided", floor: float = 1e-9) -> np.ndarray:
    """Per-step ratio ``g(t+1) / (q(t) g(t))`` along a three-site trajectory.

    ``g = max(|u3 - u2|, |u1 - u2|)``. With ``factor="one_sided"`` the
    contraction factor is ``q = max(1 - 2 C(u1, u2), 1/2)``; ``"symmetric"``
    uses ``max(1 - 2 C(u1, u2), 1 - 2 C(u2, u3), 1/2)``. Ratios above one are
    violations. Only steps that start in the Case 10 configuration (all
    values in [1/2, 1] and ``u2`` the largest or smallest) are rated; the
    others, and steps with ``g(t) <= floor`` where the ratio only measures
    rounding noise, are reported as 0.
    """
    v = np.asarray(values, dtype=float)
    a, b, c = v[:-1, 0], v[:-1, 1], v[:-1, 2]
    g0 = np.maximum(np.abs(c - b), np.abs(a - b))
    g1 = np.maximum(np.abs(v[1:, 2] - v[1:, 1]), np.abs(v[1:, 0] - v[1:, 1]))
    c12 = 0.5 * a * b * (a + b - 1.0)
    q = np.maximum(1.0 - 2.0 * c12, 0.5)
    if factor == "symmetric":
        c23 = 0.5 * b * c * (b + c - 1.0)
        q = np.maximum(q, 1.0 - 2.0 * c23)
    elif factor != "one_sided":
        raise ValueError("factor must be 'one_sided' or 'symmetric'")
    in_case = (np.minimum(np.minimum(a, b), c) >= 0.5) & (np.maximum(np.maximum(a, b), c) <= 1.0)
    in_case &= ((b >= a) & (b >= c)) | ((b <= a) & (b <= c))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(in_case & (g0 > floor), g1 / (q * g0), 0.0)


__all__ = [
    "CaseReport",
    "ConvergenceResult",
    "DegenerateFitError",
    "DomainError",
    "HypothesisError",
    "Prediction",
    "classify_n4",
    "contraction_ratios",
    "detect_convergence",
    "fit_decay_rate",
    "fit_log_linear",
    "oscillation_diagnostics",
    "predicted_limit_monotone",
    "verify_n4",
    "verify_n4_batch",
]
