"""Exact indexed polynomials in a metric perturbation h around Minkowski.

Every tensor is stored fully lowered by the background metric. A factor is one
derivative of the perturbation, ``∂_{d1..dk} h_{ij}``; a label that occurs twice
in a monomial is contracted through the background inverse metric η^{..}.
Labels that occur once are free. Coefficients are :class:`fractions.Fraction`.

The canonical form of a monomial is the lexicographically smallest key over all
renamings of its dummy labels, with the symmetries of h (``h_ij = h_ji``),
commuting partial derivatives and commuting factors built into the key.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

# factor = (metric index pair, sorted derivative labels)
Factor = tuple[tuple[str, str], tuple[str, ...]]
Monomial = tuple[Factor, ...]

DUMMY_PREFIX = "~"


class IndexError_(ValueError):
    """Raised on unbalanced or clashing index labels."""


def make_factor(i: str, j: str, derivs: Iterable[str] = ()) -> Factor:
    pair = (i, j) if i <= j else (j, i)
    return (pair, tuple(sorted(derivs)))


def _labels(mono: Iterable[Factor]) -> list[str]:
    out: list[str] = []
    for pair, derivs in mono:
        out.extend(pair)
        out.extend(derivs)
    return out


def _rename(mono: Iterable[Factor], mapping: Mapping[str, str]) -> Monomial:
    return tuple(
        make_factor(mapping.get(p[0], p[0]), mapping.get(p[1], p[1]),
                    (mapping.get(d, d) for d in ds))
        for p, ds in mono
    )


@lru_cache(maxsize=None)
def canonical_monomial(mono: Monomial, free: frozenset[str]) -> Monomial:
    counts: dict[str, int] = {}
    for lab in _labels(mono):
        counts[lab] = counts.get(lab, 0) + 1
    dummies = []
    for lab, n in counts.items():
        if lab in free:
            if n != 1:
                raise IndexError_(f"free index {lab!r} occurs {n} times")
        elif n == 2:
            dummies.append(lab)
        else:
            raise IndexError_(f"index {lab!r} occurs {n} times")
    missing = free.difference(counts)
    if missing:
        raise IndexError_(f"free indices {sorted(missing)} absent from monomial")
    names = [f"{DUMMY_PREFIX}{k}" for k in range(len(dummies))]
    best: Monomial | None = None
    for perm in itertools.permutations(names):
        cand = tuple(sorted(_rename(mono, dict(zip(dummies, perm)))))
        if best is None or cand < best:
            best = cand
    return best if best is not None else tuple(sorted(mono))


class TensorExpr:
    """Sum of canonical monomials with exact rational coefficients.

    ``free`` is the ordered tuple of free index labels. Expressions are
    immutable; arithmetic returns new objects.
    """

    __slots__ = ("free", "terms")

    def __init__(self, free: Iterable[str] = (), terms: Mapping[Monomial, Fraction] | None = None,
                 *, _canonical: bool = False):
        self.free = tuple(free)
        if len(set(self.free)) != len(self.free):
            raise IndexError_(f"repeated free index in {self.free}")
        for lab in self.free:
            if lab.startswith(DUMMY_PREFIX):
                raise IndexError_(f"free label {lab!r} uses the reserved dummy prefix")
        fs = frozenset(self.free)
        merged: dict[Monomial, Fraction] = {}
        for mono, coeff in (terms or {}).items():
            coeff = Fraction(coeff)
            if coeff == 0:
                continue
            key = mono if _canonical else canonical_monomial(tuple(mono), fs)
            merged[key] = merged.get(key, Fraction(0)) + coeff
        self.terms = {k: v for k, v in merged.items() if v != 0}

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, free: Iterable[str] = ()) -> "TensorExpr":
        return cls(free)

    @classmethod
    def h(cls, i: str, j: str, *derivs: str, coeff=1) -> "TensorExpr":
        """The single term ``coeff * ∂_{derivs} h_{ij}``; repeated labels contract."""
        mono = (make_factor(i, j, derivs),)
        labs = _labels(mono)
        free = [lab for lab in dict.fromkeys(labs) if labs.count(lab) == 1]
        return cls(free, {mono: Fraction(coeff)})

    # basic queries --------------------------------------------------------
    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorExpr):
            return NotImplemented
        return set(self.free) == set(other.free) and self.terms == other.terms

    def __hash__(self):
        return hash((frozenset(self.free), frozenset(self.terms.items())))

    def __repr__(self) -> str:
        return f"TensorExpr(free={self.free}, n_terms={len(self.terms)})"

    def items(self):
        return sorted(self.terms.items())

    def coefficient(self, mono: Iterable[Factor]) -> Fraction:
        key = canonical_monomial(tuple(mono), frozenset(self.free))
        return self.terms.get(key, Fraction(0))

    @staticmethod
    def degree(mono: Monomial) -> int:
        return len(mono)

    def orders(self) -> set[int]:
        return {len(m) for m in self.terms}

    def homogeneous(self, n: int) -> "TensorExpr":
        return TensorExpr(self.free, {m: c for m, c in self.terms.items() if len(m) == n},
                          _canonical=True)

    def truncate(self, order: int) -> "TensorExpr":
        return TensorExpr(self.free, {m: c for m, c in self.terms.items() if len(m) <= order},
                          _canonical=True)

    # arithmetic -----------------------------------------------------------
    def _check_compatible(self, other: "TensorExpr") -> None:
        if set(self.free) != set(other.free):
            raise IndexError_(f"free indices differ: {self.free} vs {other.free}")

    def __add__(self, other: "TensorExpr") -> "TensorExpr":
        # an index-less zero is compatible with anything
        if not other.terms and not other.free:
            return self
        if not self.terms and not self.free:
            return other
        return self._add(other)

    def _add(self, other: "TensorExpr") -> "TensorExpr":
        self._check_compatible(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return TensorExpr(self.free, out, _canonical=True)

    def __neg__(self) -> "TensorExpr":
        return TensorExpr(self.free, {m: -c for m, c in self.terms.items()}, _canonical=True)

    def __sub__(self, other: "TensorExpr") -> "TensorExpr":
        return self + (-other)

    def scale(self, k) -> "TensorExpr":
        k = Fraction(k)
        return TensorExpr(self.free, {m: k * c for m, c in self.terms.items()}, _canonical=True)

    def __rmul__(self, k) -> "TensorExpr":
        return self.scale(k)

    def __mul__(self, other):
        """Tensor product; free labels shared by both operands are contracted."""
        if not isinstance(other, TensorExpr):
            return self.scale(other)
        shared = set(self.free) & set(other.free)
        free = [f for f in self.free if f not in shared] + \
               [f for f in other.free if f not in shared]
        taken = set(self.free) | set(other.free)
        out: dict[Monomial, Fraction] = {}
        fs = frozenset(free)
        for m1, c1 in self.terms.items():
            a = _fresh(m1, taken, "p")
            for m2, c2 in other.terms.items():
                b = _fresh(m2, taken, "q")
                key = canonical_monomial(tuple(a + b), fs)
                out[key] = out.get(key, Fraction(0)) + c1 * c2
        return TensorExpr(free, out, _canonical=True)

    # index manipulation ---------------------------------------------------
    def relabel(self, mapping: Mapping[str, str]) -> "TensorExpr":
        """Rename free labels. Two free labels sent to one name become contracted;
        a new name that collides with a dummy is handled by renaming dummies first."""
        targets = set(mapping.values())
        new_free: list[str] = []
        for f in self.free:
            g = mapping.get(f, f)
            if g in new_free:
                new_free.remove(g)
            else:
                new_free.append(g)
        fs = frozenset(new_free)
        out: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            m = _fresh(m, targets | set(self.free), "r")
            key = canonical_monomial(_rename(m, mapping), fs)
            out[key] = out.get(key, Fraction(0)) + c
        return TensorExpr(new_free, out, _canonical=True)

    def contract(self, i: str, j: str) -> "TensorExpr":
        """Contract two free indices through η."""
        if i not in self.free or j not in self.free or i == j:
            raise IndexError_(f"cannot contract {i!r} with {j!r} in {self.free}")
        return self.relabel({j: i})

    def diff(self, label: str) -> "TensorExpr":
        """Apply ∂_label (product rule). If ``label`` is already free it is contracted."""
        free = list(self.free)
        contracted = label in free
        if contracted:
            free.remove(label)
        else:
            free.append(label)
        fs = frozenset(free)
        out: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            m = _fresh(m, {label} | set(self.free), "d")
            for k, (pair, derivs) in enumerate(m):
                new = m[:k] + ((pair, tuple(sorted(derivs + (label,)))),) + m[k + 1:]
                key = canonical_monomial(new, fs)
                out[key] = out.get(key, Fraction(0)) + c
        return TensorExpr(free, out, _canonical=True)

    def swap_free(self, i: str, j: str) -> "TensorExpr":
        return self.relabel({i: j, j: i}) if i != j else self

    # evaluation -----------------------------------------------------------
    def evaluate(self, jets, values: Mapping[str, int], eta=(-1, 1, 1, 1)):
        """Expand Einstein summation in 4 dimensions for a spot numeric check.

        ``jets(i, j, derivs)`` returns the value of ``∂_derivs h_ij`` for
        component indices. ``values`` assigns a component to each free label.
        """
        total = 0
        for mono, coeff in self.terms.items():
            labs = list(dict.fromkeys(_labels(mono)))
            dummies = [lab for lab in labs if lab not in self.free]
            for comp in itertools.product(range(4), repeat=len(dummies)):
                env = dict(values)
                env.update(zip(dummies, comp))
                term = coeff
                for d in comp:
                    term = term * eta[d]
                for (i, j), derivs in mono:
                    term = term * jets(env[i], env[j], tuple(env[d] for d in derivs))
                total = total + term
        return total


def _fresh(mono: Monomial, avoid: set[str], tag: str) -> Monomial:
    """Rename labels that are not in ``avoid`` to unique throwaway names."""
    mapping = {}
    for lab in _labels(mono):
        if lab not in avoid and lab not in mapping:
            mapping[lab] = f"{tag}{next(_counter)}"
    return _rename(mono, mapping) if mapping else mono


_counter = itertools.count()


# rendering ------------------------------------------------------------------
_GREEK = {"a": "α", "b": "β", "l": "λ", "c": "γ", "d": "δ"}
_DUMMY_NAMES = ["μ", "ν", "σ", "τ", "κ", "ξ", "ζ", "ω"]


def render_monomial(mono: Monomial, coeff: Fraction, *, show_eta: bool = True) -> str:
    """Human-readable form with explicit η contractions, e.g.
    ``-1/2 η^{μμ'} η^{νν'} ∂_α h_{μν} ∂_β h_{μ'ν'}``."""
    names: dict[str, str] = {}
    seen: dict[str, int] = {}
    parts = []
    etas = []
    for pair, derivs in mono:
        labs = []
        for lab in derivs + pair:
            if lab.startswith(DUMMY_PREFIX):
                base = names.setdefault(lab, _DUMMY_NAMES[int(lab[1:]) % len(_DUMMY_NAMES)])
                k = seen.get(lab, 0)
                seen[lab] = k + 1
                if k == 0 and show_eta:
                    etas.append(f"η^{{{base}{base}'}}")
                labs.append(base + ("'" if k and show_eta else ""))
            else:
                labs.append(_GREEK.get(lab, lab))
        nd = len(derivs)
        d = "".join(labs[:nd])
        p = "".join(labs[nd:])
        parts.append((f"∂_{{{d}}} " if nd else "") + f"h_{{{p}}}")
    sign = "-" if coeff < 0 else "+"
    mag = abs(coeff)
    c = "" if mag == 1 else f"{mag} "
    return f"{sign} {c}{' '.join(etas + parts)}".strip()


def render(expr: TensorExpr) -> str:
    if not expr:
        return "0"
    return "\n".join(render_monomial(m, c) for m, c in expr.items())
