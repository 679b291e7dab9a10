"""Weighted multicurves as measured laminations and their Lie-valued measures.

A weighted multicurve {(gamma_i, b_i)} with b_i > 0 induces the standard
Lie-algebra-valued transverse measure dw = sum_i b_i B_i delta_i, where B_i is
the killing-normalized geodesic-flow generator of sigma(gamma_i).  Mass uses
the sqrt2 operator-norm convention (admissible test forms have largest
singular value <= sqrt2), under which mass(dw) = 2 * length.

Simplicity and disjointness of the curve words are NOT verified: the intended
inputs are the curated handle curves and short simple words, and the formulas
are evaluated on whatever data the caller supplies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import lorentz
from .cocycle import Cocycle, _check_same_rep, evaluate_cocycle
from .fuchsian import SurfaceGroupRep, as_word, axis_generator, translation_length
from .lorentz import cross, exp_so21, killing


@dataclass
class WeightedMulticurve:
    """(word, weight) pairs over a base rep; weights strictly positive."""

    rep: SurfaceGroupRep
    items: list  # [(Word, float), ...]

    def __post_init__(self):
        items = []
        for word, weight in self.items:
            w = as_word(word)
            if not weight > 0:
                raise ValueError(f"weight of {w} must be strictly positive")
            translation_length(self.rep.evaluate(w))  # raises if not hyperbolic
            items.append((w, float(weight)))
        # reject literally repeated curves (same free-homotopy class up to
        # rotation/inversion); equal traces alone are allowed, distinct curves
        # may share a length
        for i, (wi, _) in enumerate(items):
            variants = set(wi.cyclic_variants())
            for wj, _ in items[i + 1:]:
                if wj.cyclically_reduced().letters in variants:
                    raise ValueError(f"curves {wi} and {wj} are conjugate")
        self.items = items

    @classmethod
    def from_json(cls, rep: SurfaceGroupRep, data: list) -> "WeightedMulticurve":
        return cls(rep, [(d["word"], d["weight"]) for d in data])

    def to_json(self) -> list:
        return [{"word": str(w), "weight": b} for w, b in self.items]


@dataclass
class MeasureAtom:
    word: object
    weight: float
    length: float
    generator: np.ndarray  # killing-normalized axis generator B_i


@dataclass
class LieValuedMeasure:
    """Atoms (B_i, b_i, l_i) of dw = sum b_i B_i delta_i over a base rep."""

    rep: SurfaceGroupRep
    atoms: list

    def validate(self, tol: float = 1e-9) -> "LieValuedMeasure":
        for at in self.atoms:
            if abs(killing(at.generator, at.generator) - 2.0) > tol:
                raise ValueError("atom generator is not killing-normalized")
            g = self.rep.evaluate(at.word)
            drift = float(np.abs(g @ at.generator @ lorentz.group_inv(g) - at.generator).max())
            if drift > 1e-8:
                raise ValueError("atom generator is not Ad-invariant along its curve")
        return self

    def to_json(self) -> list:
        return [
            {
                "word": str(at.word),
                "weight": at.weight,
                "length": at.length,
                "generator": at.generator.tolist(),
            }
            for at in self.atoms
        ]


def standard_measure(mc: WeightedMulticurve) -> LieValuedMeasure:
    """One atom per curve: B_i = axis generator, l_i = translation length."""
    atoms = []
    for w, b in mc.items:
        g = mc.rep.evaluate(w)
        atoms.append(
            MeasureAtom(
                word=w,
                weight=b,
                length=translation_length(g),
                generator=axis_generator(g),
            )
        )
    return LieValuedMeasure(mc.rep, atoms).validate()


def mass(m: LieValuedMeasure) -> float:
    """Total variation 2 sum b_i l_i: mass equals twice the length."""
    return 2.0 * sum(at.weight * at.length for at in m.atoms)


def mass_by_duality(
    m: LieValuedMeasure,
    n_samples: int = 32,
    n_quad: int = 96,
    rng: np.random.Generator | None = None,
) -> float:
    """Duality lower bound: sup over sampled admissible test forms of dw(phi).

    Test data along each curve are forms phi(t) = b(t) B_i + a(t) Bperp_i(t)
    with pointwise b^2 + a^2 <= 1, i.e. largest singular value <= sqrt2.
    Includes the optimal form phi = B_i (the proof's sum psi_i B_i alpha_i),
    which attains 2 sum b_i l_i exactly, so the returned sup equals mass up to
    quadrature roundoff while every sampled value stays below it.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    # per-atom frames along the curve, computed once: for killing-normalized
    # B the exponential is exactly I + sinh(t) B + (cosh(t)-1) B^2
    frames = []
    for at in m.atoms:
        B = at.generator
        X = lorentz.axis_point(B)
        _, Bp0, _ = lorentz.frame_at(B, X)
        l = float(at.length)
        ts = (np.arange(n_quad) + 0.5) * (l / n_quad)
        B2 = B @ B
        gt = (
            np.eye(3)[None]
            + np.sinh(ts)[:, None, None] * B[None]
            + (np.cosh(ts) - 1.0)[:, None, None] * B2[None]
        )
        gti = np.einsum("ab,tbc,cd->tad", lorentz.E_SHARP, gt.transpose(0, 2, 1), lorentz.E_SHARP)
        Bp_t = gt @ Bp0[None] @ gti
        frames.append((at, l, ts, Bp_t))

    best = 0.0
    for sample in range(n_samples + 1):
        total = 0.0
        for at, l, ts, Bp_t in frames:
            B = at.generator
            if sample == 0:
                bs = np.ones(n_quad)
                as_ = np.zeros(n_quad)
            else:
                # periodic coefficient functions, clipped into the admissible disc
                ks = rng.integers(1, 4, size=2)
                c = rng.uniform(-1.0, 1.0, size=4)
                bs = c[0] + c[1] * np.cos(2 * np.pi * ks[0] * ts / l)
                as_ = c[2] * np.sin(2 * np.pi * ks[1] * ts / l) + c[3]
                r = np.sqrt(bs**2 + as_**2)
                scale = np.where(r > 1.0, 1.0 / np.maximum(r, 1e-30), 1.0)
                bs, as_ = bs * scale, as_ * scale
            phi = bs[:, None, None] * B[None] + as_[:, None, None] * Bp_t
            vals = np.einsum("tab,ba->t", phi, B)
            total += at.weight * float(vals.sum()) * (l / n_quad)
        best = max(best, total)
    return best


def length(mc: WeightedMulticurve, rep: SurfaceGroupRep | None = None) -> float:
    """sum b_i l(rep(gamma_i)); rep defaults to the multicurve's own."""
    rep = rep if rep is not None else mc.rep
    return sum(b * translation_length(rep.evaluate(w)) for w, b in mc.items)


def pair(m: LieValuedMeasure, xi: Cocycle) -> float:
    """dw(d xi) = sum b_i (B_i, alpha(gamma_i))#; vanishes on coboundaries."""
    _check_same_rep(m.rep, xi.rep)
    return sum(at.weight * killing(at.generator, evaluate_cocycle(xi, at.word)) for at in m.atoms)


def frame_invariance_defect(
    A: np.ndarray, B: np.ndarray, X: np.ndarray, t: float
) -> float:
    """Norm of the non-tangential part of A transported along the axis of B.

    Returns |M - (M X) x X| with M = e^{tB} A e^{-tB} (transport along the
    positive flow direction), which in the frame
    coordinates A = b B + a Bperp + z nhat equals sqrt2 |z cosh t - a sinh t|;
    identically zero over t iff a = z = 0, i.e. dw = b B delta(s) ds.

    The defect matrix is a multiple of the frame's nhat, so its magnitude is
    measured by the Killing norm sqrt|(D,D)#| (equal to the Frobenius norm in
    the standard frame and Ad-invariant, so the closed form holds along any
    axis, not just the standard one).
    """
    lorentz.frame_at(B, X)  # validates the (B, X) frame data
    g = exp_so21(t * B)
    M = g @ A @ lorentz.group_inv(g)
    D = M - cross(M @ X, X)
    return float(np.sqrt(abs(killing(D, D))))


def multicurve_from_json_file(rep: SurfaceGroupRep, path) -> WeightedMulticurve:
    with open(path) as fh:
        return WeightedMulticurve.from_json(rep, json.load(fh))


def measure_to_json_file(m: LieValuedMeasure, path):
    with open(path, "w") as fh:
        json.dump(m.to_json(), fh, indent=1)
