"""Twisted 1-cocycles alpha: pi_1 -> so(2,1) over Ad(sigma).

A cocycle is stored by its values on the four generators and extended lazily
by the cocycle rule alpha(g1 g2) = Ad(sigma(g1)) alpha(g2) + alpha(g1); it is
a tangent vector to the representation variety at sigma exactly when it
vanishes on the relator.  Cohomology classes are never materialized: class
equality is always tested by pairing against multicurve measures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fuchsian import GENERATOR_NAMES, RELATOR, SurfaceGroupRep, as_word
from .lorentz import group_inv, sharp_adj

RELATOR_TANGENCY_TOL = 1e-8
FD_STEP = 1e-4


@dataclass
class Cocycle:
    """Generator values of a 1-cocycle twisted by Ad(sigma)."""

    rep: SurfaceGroupRep
    values: np.ndarray  # (4, 3, 3), ordered a1, b1, a2, b2

    def __post_init__(self):
        # dtype preserved: closed-form cocycles are built in extended
        # precision so relator tangency can be certified at 1e-12
        self.values = np.asarray(self.values)
        if self.values.shape != (4, 3, 3):
            raise ValueError("expected four 3x3 generator values")
        self._by_name = {n: self.values[i] for i, n in enumerate(GENERATOR_NAMES)}

    def value(self, name: str) -> np.ndarray:
        return self._by_name[name]

    def __add__(self, other: "Cocycle") -> "Cocycle":
        _check_same_rep(self.rep, other.rep)
        return Cocycle(self.rep, self.values + other.values)

    def __sub__(self, other: "Cocycle") -> "Cocycle":
        _check_same_rep(self.rep, other.rep)
        return Cocycle(self.rep, self.values - other.values)

    def __mul__(self, c: float) -> "Cocycle":
        return Cocycle(self.rep, c * self.values)

    __rmul__ = __mul__

    def validate(self, tol: float = RELATOR_TANGENCY_TOL) -> "Cocycle":
        res = relator_tangency(self)
        if res > tol:
            raise ValueError(f"relator tangency {res:.3e} exceeds {tol:.1e}")
        return self

    def to_json(self, rep_file: str | None = None) -> dict:
        """Generator values as 3x3 arrays; the base rep inline or by file."""
        out = {"values": [v.tolist() for v in self.values.astype(float)]}
        if rep_file is not None:
            out["rep_file"] = str(rep_file)
        else:
            out["rep"] = self.rep.to_json()
        return out

    @classmethod
    def from_json(cls, data: dict, rep: "SurfaceGroupRep | None" = None) -> "Cocycle":
        if rep is None:
            if "rep_file" in data:
                from .fuchsian import rep_from_json_file

                rep = rep_from_json_file(data["rep_file"])
            else:
                rep = SurfaceGroupRep.from_json(data["rep"])
        return cls(rep, np.array(data["values"], dtype=float))


class RepMismatchError(ValueError):
    """Raised when cocycles/measures over different base reps are combined."""


def _check_same_rep(a: SurfaceGroupRep, b: SurfaceGroupRep, tol: float = 1e-12):
    if a is b:
        return
    if float(np.abs(a.generators - b.generators).max()) > tol:
        raise RepMismatchError("objects live over different base representations")


def zero_cocycle(rep: SurfaceGroupRep) -> Cocycle:
    return Cocycle(rep, np.zeros((4, 3, 3)))


def _evaluate_cocycle_ld(alpha: Cocycle, word) -> np.ndarray:
    word = as_word(word)
    sig = alpha.rep
    total = np.zeros((3, 3), dtype=np.longdouble)
    prefix = np.eye(3, dtype=np.longdouble)
    for n, e in word.letters:
        g = sig.generator_ld(n)
        v = alpha.value(n).astype(np.longdouble)
        if e > 0:
            total = total + prefix @ v @ group_inv(prefix)
            prefix = prefix @ g
        else:
            gi = group_inv(g)
            total = total + prefix @ (-(gi @ v @ g)) @ group_inv(prefix)
            prefix = prefix @ gi
    return total


def evaluate_cocycle(alpha: Cocycle, word) -> np.ndarray:
    """alpha(word) via the cocycle rule, accumulated in extended precision.

    For an inverse letter, alpha(g^-1) = -Ad(sigma(g)^-1) alpha(g).  The
    extended accumulation matters only for tangency-style cancellations
    (the Ad factors reach operator norm ~1e3 on relator prefixes).  The
    result dtype follows the stored values (longdouble passes through).
    """
    out = _evaluate_cocycle_ld(alpha, word)
    if alpha.values.dtype == np.longdouble:
        return out
    return out.astype(float)


def coboundary(A0: np.ndarray, rep: SurfaceGroupRep) -> Cocycle:
    """alpha(g) = A0 - Ad(sigma(g)) A0; the zero class in H^1."""
    A0 = np.asarray(A0).astype(np.longdouble)
    vals = np.array(
        [A0 - rep.generator_ld(n) @ A0 @ group_inv(rep.generator_ld(n)) for n in GENERATOR_NAMES]
    )
    return Cocycle(rep, vals)


def relator_tangency(alpha: Cocycle) -> float:
    """Frobenius norm of alpha(relator); <= tol iff alpha is a valid cocycle.

    The extended-precision evaluation floors around 1e-11 * scale(alpha) on
    this surface (Ad factors over relator prefixes reach operator norm ~2e5),
    so algebraically exact cocycles report tangencies of that size, not 0.
    """
    r = _evaluate_cocycle_ld(alpha, RELATOR)
    return float(np.sqrt((r * r).sum()))


def differentiate_family(
    family,
    rep: SurfaceGroupRep | None = None,
    step: float = FD_STEP,
    s0: float = 0.0,
) -> Cocycle:
    """Central-difference cocycle of a representation family s -> rep.

    alpha(g) = (d/ds sigma_s(g)) sigma(g)^-1 at s = s0; the result is
    projected onto so(2,1) and satisfies relator tangency up to the
    finite-difference floor (~1e-6 for the default step).  The sampled
    family members must satisfy the rep invariants.
    """
    if rep is None:
        rep = family(s0)
    plus = family(s0 + step).validate()
    minus = family(s0 - step).validate()
    vals = []
    for n in GENERATOR_NAMES:
        d = (plus.generator(n) - minus.generator(n)) / (2.0 * step)
        a = d @ group_inv(rep.generator(n))
        a = 0.5 * (a - sharp_adj(a))  # project to so(2,1)
        vals.append(a - np.trace(a) / 3.0 * np.eye(3))
    return Cocycle(rep, np.array(vals))


def cocycle_to_json_file(alpha: Cocycle, path):
    with open(path, "w") as fh:
        json.dump(alpha.to_json(), fh, indent=1)


def cocycle_from_json_file(path) -> Cocycle:
    with open(path) as fh:
        return Cocycle.from_json(json.load(fh))
