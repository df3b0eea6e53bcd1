import math

import numpy as np
import pytest

from aggdiff.profiles import ProfileError, cell_centres, parse_profile, resolve


@pytest.mark.parametrize(
    "text, kind, params",
    [
        ("0.4,0.7,0.2", "list", (0.4, 0.7, 0.2)),
        ("constant 0.6", "constant", (0.6,)),
        ("ramp 0.5 1", "ramp", (0.5, 1.0)),
        ("0.75+0.1*cos(pi*x)", "cos", (0.75, 0.1, 1.0)),
        ("0.25 + 0.1*cos(3*pi*x)", "cos", (0.25, 0.1, 3.0)),
        ("0.5-0.005*cos(2*pi*x)", "cos", (0.5, -0.005, 2.0)),
        ("random 0.5 1 seed 3", "random", (0.5, 1.0, 3)),
        ("random 0 1", "random", (0.0, 1.0, None)),
    ],
)
def test_parse(text, kind, params):
    p = parse_profile(text)
    assert (p.kind, p.params) == (kind, params)


@pytest.mark.parametrize("text", ["", "ramp 1", "sin(pi*x)", "random 0 1 seed", "0.1,x,0.3", "constant a"])
def test_parse_errors(text):
    with pytest.raises(ProfileError):
        parse_profile(text)


def test_cosine_sampled_at_cell_centres():
    v = parse_profile("0.75+0.1*cos(pi*x)").sample(4)
    x = (np.arange(4) + 0.5) / 4
    np.testing.assert_allclose(v, 0.75 + 0.1 * np.cos(math.pi * x))
    np.testing.assert_allclose(cell_centres(2), [0.25, 0.75])


def test_ramp_and_constant():
    np.testing.assert_allclose(parse_profile("ramp 0 1").sample(2), [0.25, 0.75])
    assert np.all(parse_profile("constant 0.3").sample(5) == 0.3)


def test_random_is_seeded():
    a = parse_profile("random 0 1 seed 9").sample(6)
    b = parse_profile("random 0 1").sample(6, default_seed=9)
    np.testing.assert_array_equal(a, b)
    assert np.all((a >= 0) & (a <= 1))
    with pytest.raises(ProfileError):
        parse_profile("random 0 1").sample(3)


def test_list_length_checked():
    with pytest.raises(ProfileError):
        parse_profile("0.1,0.2").sample(3)


def test_resolve_accepts_callables_and_arrays():
    np.testing.assert_allclose(resolve(lambda x: 0.5 + 0 * x, 3), [0.5] * 3)
    np.testing.assert_allclose(resolve(lambda x: 0.4, 2), [0.4, 0.4])
    np.testing.assert_allclose(resolve([0.1, 0.2], 2), [0.1, 0.2])
    with pytest.raises(ProfileError):
        resolve([0.1], 2)
