"""Acceptance criteria 1-10 at full scale and stated tolerances.

Each test prints a ``criterion k: PASS/FAIL`` line and records it for the
terminal summary. Criterion 5 is split per case so a failing branch does not
hide the others.
"""

import numpy as np
import pytest

from aggdiff.verification import N4_ASSERTED, N4_OPEN, n4_reports, run_suites

from conftest import ACCEPTANCE

pytestmark = pytest.mark.slow

_cache: dict = {}


def suite(name):
    if name not in _cache:
        (_cache[name],) = run_suites([name], seed=0, scale=1.0)
    return _cache[name]


def record(key, ok, detail=""):
    prev = ACCEPTANCE.get(key)
    if prev is not None:
        ok = ok and prev[0]
        detail = "; ".join(d for d in (prev[1], detail) if d)
    ACCEPTANCE[key] = (ok, detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


def _assert_checks(key, res, names, seconds_limit=None):
    checks = [res.check(n) for n in names]
    ok = all(c.passed for c in checks)
    detail = ", ".join(c.line() for c in checks) + f" ({res.seconds:.1f}s)"
    if seconds_limit is not None:
        ok = ok and res.seconds < seconds_limit
    record(key, ok, detail)
    assert ok, detail


def test_criterion_1_boundedness():
    res = suite("bounds")
    _assert_checks("1", res, ["lattice values stay in [0, 1]"], seconds_limit=120)
    assert res.check("lattice values stay in [0, 1]").total == 10_000


def test_criterion_2_conservation():
    res = suite("conservation")
    _assert_checks("2", res, ["interior mass conserved (noflux)"])


def test_criterion_3_monotone_convergence():
    res = suite("monotone")
    _assert_checks("3", res, ["monotone data converge to the interior mean (1e-8)",
                              "spread nonincreasing at every step"])


def test_criterion_4_forward_region():
    res = suite("regions")
    _assert_checks("4", res, ["forward region never shrinks (noflux)"])
    assert res.check("forward region never shrinks (noflux)").total == 1000


@pytest.fixture(scope="module")
def n4():
    return n4_reports(seed=0, per_case=100, tol=1e-5)


@pytest.mark.parametrize("key", N4_ASSERTED)
def test_criterion_5_case_limits(n4, key):
    reps = n4[key]
    matched = sum(r.verdict == "Match" for r in reps)
    ok = matched == len(reps) == 100
    record("5", ok, f"case {key} {matched}/{len(reps)}")
    assert ok, [r.initial for r in reps if r.verdict != "Match"][:3]


@pytest.mark.parametrize("key", N4_OPEN)
def test_criterion_5_open_cases(n4, key):
    reps = n4[key]
    ok = len(reps) == 100 and all(r.verdict == "Open" for r in reps)
    record("5", ok, f"case {key} Open {sum(r.verdict == 'Open' for r in reps)}/{len(reps)}")
    assert ok


def test_criterion_5_spot_checks():
    res = suite("n4")
    names = ["(0.2, 0.4, 0.3) -> (0.0, 0.9, 0.0)", "(0.1, 0.3, 0.8) -> (0.0, 0.6, 0.6)"]
    ok = all(res.check(n).passed for n in names)
    record("5", ok, "spot checks " + ("ok" if ok else "failed"))
    assert ok


def test_criterion_6_matrix_form():
    res = suite("monotone")
    _assert_checks("6", res, ["matrix form matches differenced step (1e-14)"])
    assert res.check("matrix form matches differenced step (1e-14)").total == 1000


def test_criterion_7_f_range():
    _assert_checks("7", suite("bounds"), ["f range on 1001x1001 grid",
                                          "f spot values f(0,y)=0, f(x,0)=x, f(1,2/3)=23/27"])


def test_criterion_8_continuum_asymptotics():
    res = suite("continuum")
    _assert_checks("8", res, ["mass drift <= 1e-10 relative", "energy nonincreasing",
                              "l2_to_mean < 1e-6 by t = 5", "log-linear decay, slope < 0 and R^2 >= 0.99"],
                   seconds_limit=60)


def test_criterion_9_illposedness():
    res = suite("illposed")
    names = [c.name for c in res.checks if c.assertable and c.name != "constant data: no growth"]
    _assert_checks("9", res, names)


def test_criterion_10_nonmonotone_report():
    res = suite("monotone")
    frac = res.check("non-monotone data: fraction reaching the mean (1e-6)")
    names = ["non-monotone data stay in [0, 1]", "non-monotone data conserve mass"]
    ok = all(res.check(n).passed for n in names) and frac.total == 50
    record("10", ok, f"reached mean {frac.count}/{frac.total} (report); bounds and conservation "
                     + ("ok" if ok else "failed"))
    assert ok
