"""Initial-data mini-language shared by the lattice and continuum drivers.

Accepted forms::

    0.4,0.7,0.2                 explicit values
    constant 0.6
    ramp 0.5 1.0                linear from x=0 to x=1
    0.75+0.1*cos(pi*x)          also a-b*cos(k*pi*x)
    random 0.5 1.0 seed 7       uniform draws; the seed clause is optional

Profiles are sampled at cell centres ``x_i = (i - 1/2)/n``, so an ``N``-point
lattice (``N - 1`` interior sites) and an ``M = N - 1`` cell continuum grid see
the same data.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_COS = re.compile(
    rf"^(?P<a>{_NUM})?\s*(?P<sign>[-+])\s*(?P<b>{_NUM})?\s*\*?\s*cos\(\s*(?:(?P<k>{_NUM})\s*\*?\s*)?pi\s*\*\s*x\s*\)$"
)


class ProfileError(ValueError):
    """Unparseable or inconsistent profile text."""


@dataclass(frozen=True)
class Profile:
    kind: str
    params: tuple
    text: str = ""

    def sample(self, n: int, default_seed: int | None = None) -> np.ndarray:
        """Return ``n`` values at the cell centres of ``[0, 1]``."""
        if n < 1:
            raise ProfileError("need at least one sample")
        x = cell_centres(n)
        if self.kind == "list":
            vals = np.array(self.params, dtype=float)
            if vals.size != n:
                raise ProfileError(f"profile lists {vals.size} values but {n} are needed")
            return vals
        if self.kind == "constant":
            return np.full(n, float(self.params[0]))
        if self.kind == "ramp":
            a, b = self.params
            return a + (b - a) * x
        if self.kind == "cos":
            a, b, k = self.params
            return a + b * np.cos(k * math.pi * x)
        if self.kind == "random":
            lo, hi, seed = self.params
            seed = default_seed if seed is None else seed
            if seed is None:
                raise ProfileError("random profile needs a seed (inline or --seed)")
            return np.random.default_rng(seed).uniform(lo, hi, n)
        raise ProfileError(f"unknown profile kind {self.kind!r}")

    @property
    def natural_size(self) -> int | None:
        return len(self.params) if self.kind == "list" else None


def cell_centres(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def parse_profile(text: str) -> Profile:
    s = " ".join(str(text).strip().split())
    if not s:
        raise ProfileError("empty profile")
    low = s.lower()
    words = low.split(" ")
    try:
        if words[0] == "constant" and len(words) == 2:
            return Profile("constant", (float(words[1]),), s)
        if words[0] == "ramp" and len(words) == 3:
            return Profile("ramp", (float(words[1]), float(words[2])), s)
        if words[0] == "random":
            if len(words) == 3:
                return Profile("random", (float(words[1]), float(words[2]), None), s)
            if len(words) == 5 and words[3] == "seed":
                return Profile("random", (float(words[1]), float(words[2]), int(words[4])), s)
            raise ProfileError(f"expected 'random <lo> <hi> [seed <s>]', got {s!r}")
    except ValueError as exc:
        if isinstance(exc, ProfileError):
            raise
        raise ProfileError(f"bad number in profile {s!r}") from exc

    m = _COS.match(low.replace(" ", ""))
    if m:
        a = float(m["a"]) if m["a"] else 0.0
        b = float(m["b"]) if m["b"] else 1.0
        if m["sign"] == "-":
            b = -b
        k = float(m["k"]) if m["k"] else 1.0
        return Profile("cos", (a, b, k), s)

    if "," in s or re.fullmatch(_NUM, s):
        try:
            vals = tuple(float(v) for v in s.split(",") if v.strip())
        except ValueError as exc:
            raise ProfileError(f"bad value list {s!r}") from exc
        if not vals:
            raise ProfileError("empty value list")
        return Profile("list", vals, s)
    raise ProfileError(f"unrecognised profile {s!r}")


def resolve(spec, n: int, default_seed: int | None = None) -> np.ndarray:
    """Turn a profile string, a ``Profile``, a callable of ``x`` or an array into values."""
    if isinstance(spec, str):
        spec = parse_profile(spec)
    if isinstance(spec, Profile):
        return spec.sample(n, default_seed)
    if callable(spec):
        return np.asarray(spec(cell_centres(n)), dtype=float) * np.ones(n)
    arr = np.asarray(spec, dtype=float)
    if arr.shape != (n,):
        raise ProfileError(f"expected {n} values, got shape {arr.shape}")
    return arr
