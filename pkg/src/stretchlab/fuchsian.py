"""Genus-2 surface group words and an explicit Fuchsian representation.

The representation is built from the regular hyperbolic octagon with vertex
angle pi/4 (all eight corners glue to one point, total angle 2pi).  The eight
side-pairing maps are the translations x_k = R_k T R_k^-1, k = 0..7, where T
translates by l8 = 2 arccosh(cot pi/8) along the x-axis and R_k rotates by
k pi/4 about the apex; opposite sides are identified (x_{k+4} = x_k^-1) and
the corner cycle gives the relation x1 x2^-1 x3 x0 x1^-1 x2 x3^-1 x0^-1 = I.

A standard generating set with the commutator relator [a1,b1][a2,b2] = I is
the word assignment

    a1 = x0,  b1 = x3,  a2 = x3 x0 x1^-1,  b2 = x1 x2^-1,

four elements of translation length l8 (found by exhaustive search over
short words of systole trace; they form a homology basis, hence generate the
whole group).  Generator matrices are computed once at 50-digit precision and
rounded, and words are evaluated with extended-precision accumulation so that
the relator residual sits at ~1e-12, well below the 1e-9 invariant.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import lorentz
from .lorentz import group_inv, sharp_adj

GENERATOR_NAMES = ("a1", "b1", "a2", "b2")

RELATOR_TOL = 1e-9
HYPERBOLIC_TRACE_TOL = 1e-10

# translation length of the octagon side-pairing translations
OCTAGON_LENGTH = 2.0 * np.arccosh(1.0 / np.tan(np.pi / 8.0))

# words in the eight octagon translations (letter k = x_k, k+4 = x_k^-1)
_GENERATOR_X_WORDS = {"a1": (0,), "b1": (3,), "a2": (3, 0, 5), "b2": (1, 6)}
# the inverse change of basis, used by the mesh for side-pairing transports:
#   x0 = a1, x1 = a2^-1 b1 a1, x2 = b2^-1 a2^-1 b1 a1, x3 = b1
_X_GENERATOR_WORDS = (
    "a1",
    "a2^-1 b1 a1",
    "b2^-1 a2^-1 b1 a1",
    "b1",
)


class NonHyperbolicError(ValueError):
    """Raised when a group element is not of hyperbolic type."""


class WordError(ValueError):
    """Raised on malformed word strings."""


class Word:
    """Freely reduced word in the generators a1, b1, a2, b2.

    Stored as a tuple of (name, exponent) with exponent +-1; construction
    reduces xx^-1 pairs.  Parsed from strings like "a1", "b1^-1 a2" or
    "a1.b1^-1" (separators: whitespace, '.', '*').
    """

    __slots__ = ("letters",)

    def __init__(self, letters=()):
        self.letters = _free_reduce(tuple(letters))

    @classmethod
    def parse(cls, text: str) -> "Word":
        letters = []
        for tok in text.replace(".", " ").replace("*", " ").split():
            name, _, exp = tok.partition("^")
            if name not in GENERATOR_NAMES:
                raise WordError(f"unknown generator {name!r} in word {text!r}")
            if exp in ("", "1", "+1"):
                e = 1
            elif exp == "-1":
                e = -1
            else:
                raise WordError(f"unsupported exponent {exp!r} in word {text!r}")
            letters.append((name, e))
        return cls(letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple((n, -e) for n, e in reversed(self.letters)))

    def cyclically_reduced(self) -> "Word":
        letters = list(self.letters)
        while len(letters) >= 2 and letters[0][0] == letters[-1][0] and letters[0][1] == -letters[-1][1]:
            letters = letters[1:-1]
        return Word(letters)

    def cyclic_variants(self):
        """All rotations of the word and of its inverse (conjugacy tests)."""
        for w in (self.letters, self.inverse().letters):
            for i in range(max(len(w), 1)):
                yield w[i:] + w[:i]

    def __len__(self):
        return len(self.letters)

    def __eq__(self, other):
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self):
        return hash(self.letters)

    def __str__(self):
        if not self.letters:
            return "<id>"
        return " ".join(n if e > 0 else f"{n}^-1" for n, e in self.letters)

    def __repr__(self):
        return f"Word({str(self)!r})"


def _free_reduce(letters):
    out = []
    for n, e in letters:
        if out and out[-1][0] == n and out[-1][1] == -e:
            out.pop()
        else:
            out.append((n, e))
    return tuple(out)


RELATOR = Word.parse("a1 b1 a1^-1 b1^-1 a2 b2 a2^-1 b2^-1")


@dataclass
class SurfaceGroupRep:
    """Four generator matrices in SO+(2,1) with the genus-2 relator.

    generators: array (4, 3, 3), ordered a1, b1, a2, b2; exposed in float64.
    label: role tag ("sigma", "rho", ...).

    Internally the matrices are kept in extended precision (longdouble):
    the relator's partial products reach entry size ~1.5e3, so a rep stored
    in bare float64 cannot certify the 1e-9 relator-residual invariant.
    Construction from a longdouble array preserves it; construction from
    float64 upcasts (and inherits whatever residual that data has).
    """

    generators: np.ndarray
    label: str = "sigma"

    def __post_init__(self):
        arr = np.asarray(self.generators)
        if arr.shape != (4, 3, 3):
            raise ValueError("expected four 3x3 generator matrices")
        self._gen_ld = arr.astype(np.longdouble)
        self.generators = arr.astype(float)
        self._by_name = {n: self.generators[i] for i, n in enumerate(GENERATOR_NAMES)}
        self._by_name_ld = {n: self._gen_ld[i] for i, n in enumerate(GENERATOR_NAMES)}

    def generator(self, name: str) -> np.ndarray:
        return self._by_name[name]

    def generator_ld(self, name: str) -> np.ndarray:
        return self._by_name_ld[name]

    def evaluate_ld(self, word) -> np.ndarray:
        """Image of a word, accumulated and returned in extended precision."""
        word = as_word(word)
        m = np.eye(3, dtype=np.longdouble)
        for n, e in word.letters:
            g = self._by_name_ld[n]
            m = m @ (g if e > 0 else sharp_adj(g))
        return m

    def evaluate(self, word) -> np.ndarray:
        return self.evaluate_ld(word).astype(float)

    def relator_residual(self) -> float:
        r = self.evaluate_ld(RELATOR) - np.eye(3, dtype=np.longdouble)
        return float(np.sqrt((r * r).sum()))

    def validate(self, tol: float = RELATOR_TOL):
        res = self.relator_residual()
        if res > tol:
            raise ValueError(f"relator residual {res:.3e} exceeds {tol:.1e}")
        for n in GENERATOR_NAMES:
            g = self._by_name[n]
            if not lorentz.is_group_elem(g):
                raise ValueError(f"generator {n} is not in SO+(2,1)")
            if np.trace(g) <= 3.0 + HYPERBOLIC_TRACE_TOL:
                raise ValueError(f"generator {n} is not hyperbolic")
        return self

    def with_label(self, label: str) -> "SurfaceGroupRep":
        return SurfaceGroupRep(self._gen_ld.copy(), label)

    def to_json(self) -> dict:
        # generators: plain float64 arrays (the documented interface);
        # generators_ext: full-precision decimal strings so that round-trips
        # preserve the relator residual.
        return {
            "generators": [g.tolist() for g in self.generators],
            "generators_ext": [
                [[_ld_str(x) for x in row] for row in g] for g in self._gen_ld
            ],
            "label": self.label,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SurfaceGroupRep":
        if "generators_ext" in data:
            arr = np.array(
                [[[np.longdouble(x) for x in row] for row in g] for g in data["generators_ext"]],
                dtype=np.longdouble,
            )
        else:
            arr = np.array(data["generators"], dtype=float)
        rep = cls(arr, data.get("label", "sigma"))
        return rep.validate()


def _ld_str(x) -> str:
    return np.format_float_scientific(x, precision=25)


def as_word(word) -> Word:
    if isinstance(word, Word):
        return word
    if isinstance(word, str):
        return Word.parse(word)
    raise WordError(f"cannot interpret {word!r} as a word")


def evaluate(word, rep: SurfaceGroupRep) -> np.ndarray:
    """Free-standing form of SurfaceGroupRep.evaluate."""
    return rep.evaluate(word)


# ---------------------------------------------------------------------------
# octagon model
# ---------------------------------------------------------------------------

@dataclass
class OctagonModel:
    """Geometry shared by the representation and the fundamental-domain mesh.

    vertices[j] sits at angle (2j+1) pi/8 and circumradius arccosh(cot^2 pi/8);
    side j runs from vertices[j-1] to vertices[j] with midpoint in direction
    j pi/4, and is paired with side j+4 by the translation x_j (a word in the
    generators, pairing_words[j], mapping side j+4 onto side j).
    """

    rep: SurfaceGroupRep
    vertices: np.ndarray          # (8, 3) octagon corners
    pairing_words: tuple          # 8 Words; pairing_words[k] maps side k+4 -> side k
    pairing_mats: np.ndarray      # (8, 3, 3) their sigma-images

    def side_vertices(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices[(k - 1) % 8], self.vertices[k % 8]


def _octagon_generators_exact() -> np.ndarray:
    """Generator matrices from 50-digit arithmetic, rounded to longdouble."""
    import mpmath as mp

    with mp.workdps(50):
        ell = 2 * mp.acosh(1 / mp.tan(mp.pi / 8))
        ch, sh = mp.cosh(ell), mp.sinh(ell)
        trans = mp.matrix([[ch, 0, sh], [0, 1, 0], [sh, 0, ch]])
        xs = []
        for k in range(8):
            th = k * mp.pi / 4
            rot = mp.matrix([[mp.cos(th), -mp.sin(th), 0], [mp.sin(th), mp.cos(th), 0], [0, 0, 1]])
            xs.append(rot * trans * rot.T)

        def ev(seq):
            m = mp.eye(3)
            for k in seq:
                m = m * xs[k]
            return m

        gens = [ev(_GENERATOR_X_WORDS[n]) for n in GENERATOR_NAMES]
        return np.array(
            [
                [[np.longdouble(mp.nstr(g[i, j], 25)) for j in range(3)] for i in range(3)]
                for g in gens
            ],
            dtype=np.longdouble,
        )


_OCTAGON_CACHE: dict = {}


def octagon_representation() -> SurfaceGroupRep:
    """The genus-2 octagon representation (see module docstring).

    All four generators are hyperbolic of translation length
    2 arccosh(cot pi/8) and the relator [a1,b1][a2,b2] evaluates to I within
    1e-9.  Construction failure is an assertion, not a recoverable error.
    """
    if "rep" not in _OCTAGON_CACHE:
        rep = SurfaceGroupRep(_octagon_generators_exact(), label="sigma")
        res = rep.relator_residual()
        assert res <= RELATOR_TOL, f"octagon relator residual {res:.3e}"
        for n in GENERATOR_NAMES:
            err = abs(translation_length(rep.generator(n)) - OCTAGON_LENGTH)
            assert err <= 1e-9, f"octagon generator {n} length off by {err:.3e}"
        _OCTAGON_CACHE["rep"] = rep
    return _OCTAGON_CACHE["rep"]


def octagon_model() -> OctagonModel:
    """Octagon geometry + side pairings of the base octagon representation.

    The pairing matrices are always sigma-images; consumers that transport
    data in another rep evaluate pairing_words there.
    """
    rep = octagon_representation()
    r = np.arccosh(1.0 / np.tan(np.pi / 8.0) ** 2)
    sr, cr = np.sinh(r), np.cosh(r)
    verts = np.array(
        [[sr * np.cos((2 * j + 1) * np.pi / 8), sr * np.sin((2 * j + 1) * np.pi / 8), cr] for j in range(8)]
    )
    words = []
    for k in range(8):
        w = Word.parse(_X_GENERATOR_WORDS[k % 4])
        if k >= 4:
            w = w.inverse()
        words.append(w)
    mats = np.array([rep.evaluate(w) for w in words])
    return OctagonModel(rep=rep, vertices=verts, pairing_words=tuple(words), pairing_mats=mats)


# ---------------------------------------------------------------------------
# lengths, axes, stretch ratios
# ---------------------------------------------------------------------------

def translation_length(g: np.ndarray, tol: float = HYPERBOLIC_TRACE_TOL):
    """l with Tr g = 1 + 2 cosh l; raises NonHyperbolicError otherwise.

    Returns a numpy scalar in the input dtype (longdouble passes through).
    """
    c = (np.trace(g) - 1.0) / 2.0
    if float(c) <= 1.0 + tol / 2.0:
        kind = "parabolic" if abs(float(c) - 1.0) <= tol / 2.0 else "elliptic"
        raise NonHyperbolicError(f"element is {kind} (trace {2 * float(c) + 1:.6f})")
    return np.arccosh(c)


def axis_generator(g: np.ndarray, tol: float = HYPERBOLIC_TRACE_TOL) -> np.ndarray:
    """Killing-normalized generator B with exp(l B) = g, Ad(g) B = B.

    For hyperbolic g = exp(l B) the sharp-antisymmetrization kills the B^2
    part exactly: g - g# = 2 sinh(l) B.  The result is rescaled so that
    killing(B,B) = 2; the sign translates in the +B direction (exp(lB) = g
    with l > 0).  Input dtype is preserved.
    """
    l = translation_length(g, tol)
    B = (g - sharp_adj(g)) / (2.0 * np.sinh(l))
    B = B * np.sqrt(2.0 / lorentz.killing(B, B))
    return B


def stretch_ratio(word, sigma: SurfaceGroupRep, rho: SurfaceGroupRep) -> float:
    """l_rho(word) / l_sigma(word); raises NonHyperbolicError if either fails."""
    w = as_word(word)
    return translation_length(rho.evaluate(w)) / translation_length(sigma.evaluate(w))


def enumerate_words(max_len: int, cyclically_reduced: bool = True) -> list:
    """Freely (and optionally cyclically) reduced nonempty words up to max_len."""
    out = []
    letters = [(n, e) for n in GENERATOR_NAMES for e in (1, -1)]

    def rec(seq):
        if seq:
            w = Word(seq)
            if not cyclically_reduced or len(w.cyclically_reduced()) == len(w):
                out.append(w)
        if len(seq) == max_len:
            return
        for n, e in letters:
            if seq and seq[-1][0] == n and seq[-1][1] == -e:
                continue
            rec(seq + [(n, e)])

    rec([])
    return out


def k_lower_bound(words, sigma: SurfaceGroupRep, rho: SurfaceGroupRep) -> float:
    """max over the word list of l_rho/l_sigma (a certified lower bound for K).

    Words that are not hyperbolic in either rep are skipped with a warning.
    Conjugates are deduplicated through their (trace_sigma, trace_rho) pair,
    which determines the ratio.
    """
    # incremental evaluation in float64; traces only need ~1e-9 accuracy here
    sig = {n: sigma.generator(n) for n in GENERATOR_NAMES}
    rh = {n: rho.generator(n) for n in GENERATOR_NAMES}
    for n in GENERATOR_NAMES:
        sig[(n, -1)] = group_inv(sig[n])
        rh[(n, -1)] = group_inv(rh[n])

    best = 0.0
    seen = set()
    skipped = 0
    for w in words:
        w = as_word(w)
        ms = np.eye(3)
        mr = np.eye(3)
        for n, e in w.letters:
            ms = ms @ (sig[n] if e > 0 else sig[(n, -1)])
            mr = mr @ (rh[n] if e > 0 else rh[(n, -1)])
        key = (round(float(np.trace(ms)), 9), round(float(np.trace(mr)), 9))
        if key in seen:
            continue
        seen.add(key)
        try:
            r = translation_length(mr) / translation_length(ms)
        except NonHyperbolicError:
            skipped += 1
            continue
        best = max(best, r)
    if skipped:
        warnings.warn(f"k_lower_bound skipped {skipped} non-hyperbolic words")
    return best


def rep_to_json_file(rep: SurfaceGroupRep, path):
    with open(path, "w") as fh:
        json.dump(rep.to_json(), fh, indent=1)


def rep_from_json_file(path) -> SurfaceGroupRep:
    with open(path) as fh:
        return SurfaceGroupRep.from_json(json.load(fh))
