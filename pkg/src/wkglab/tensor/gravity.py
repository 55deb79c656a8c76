"""Perturbative Christoffel and Ricci tensors around Minkowski, reduction modulo
the wave-gauge condition, and the null / quasi-null split of the quadratic
remainder.

Index label conventions: the Ricci tensor has free labels ``a, b``; the
Christoffel symbol has free labels ``l, a, b`` (``l`` upper, stored lowered by η).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .expr import Monomial, TensorExpr, _rename, canonical_monomial, make_factor, render

HALF = Fraction(1, 2)


class OrderError(ValueError):
    """Requested expansion order exceeds what the metric carries."""


_fresh_ids = itertools.count()


def _tmp(tag: str = "x") -> str:
    return f"{tag}{next(_fresh_ids)}_"


@dataclass(frozen=True)
class PerturbativeMetric:
    """g_ab = η_ab + h_ab, inverse g^ab = η^ab - h^ab + h^a_c h^cb - ..., truncated."""

    order: int = 2

    def __post_init__(self):
        if self.order not in (1, 2):
            raise OrderError(f"supported truncation orders are 1 and 2, got {self.order}")

    def raise_index(self, expr: TensorExpr, label: str, order: int | None = None) -> TensorExpr:
        """Contract the free lower index ``label`` with g^{label x} and call the
        resulting upper index ``label`` again."""
        order = self.order if order is None else order
        x = _tmp()
        moved = expr.relabel({label: x})
        out = expr
        if order >= 1:
            out = out - TensorExpr.h(label, x) * moved
        if order >= 2:
            p = _tmp("p")
            out = out + (TensorExpr.h(label, p) * TensorExpr.h(p, x)) * moved
        return out

    def inverse_check(self) -> TensorExpr:
        """g^{ac} g_{cb} - δ^a_b through the truncation order; vanishes identically."""
        c = _tmp("c")
        inv = inverse_series(self.order, "a", c)
        product = inv.relabel({c: "b"}) + TensorExpr.h("a", "b") + inv * TensorExpr.h(c, "b")
        return product.truncate(self.order)


def inverse_series(order: int, i: str = "a", j: str = "b") -> TensorExpr:
    """g^{ij} - η^{ij} truncated at ``order`` in h."""
    out = TensorExpr.zero((i, j))
    if order >= 1:
        out = out - TensorExpr.h(i, j)
    if order >= 2:
        p = _tmp("p")
        out = out + TensorExpr.h(i, p) * TensorExpr.h(p, j)
    return out


def _check_order(metric: PerturbativeMetric, order: int) -> None:
    if order not in (1, 2):
        raise OrderError(f"order must be 1 or 2, got {order}")
    if order > metric.order:
        raise OrderError(f"order {order} exceeds metric truncation order {metric.order}")


def christoffel(metric: PerturbativeMetric, order: int = 2,
                labels: tuple[str, str, str] = ("l", "a", "b")) -> TensorExpr:
    """Γ^l_ab = ½ g^{lm}(∂_a g_bm + ∂_b g_am - ∂_m g_ab), truncated in h."""
    _check_order(metric, order)
    if len(set(labels)) < 3:
        fresh = tuple(_tmp(t) for t in "lab")
        return christoffel(metric, order, fresh).relabel(dict(zip(fresh, labels)))
    l, a, b = labels
    lowered = (TensorExpr.h(b, l, a) + TensorExpr.h(a, l, b) - TensorExpr.h(a, b, l)).scale(HALF)
    return metric.raise_index(lowered, l, order - 1).truncate(order)


def ricci(metric: PerturbativeMetric, order: int = 2) -> TensorExpr:
    """R_ab = ∂_l Γ^l_ab - ∂_a Γ^l_bl + Γ^l_ab Γ^d_ld - Γ^l_ad Γ^d_bl."""
    _check_order(metric, order)
    l, d = _tmp("l"), _tmp("d")
    t1 = christoffel(metric, order, (l, "a", "b")).diff(l)
    t2 = christoffel(metric, order, (l, "b", l)).diff("a")
    out = t1 - t2
    if order >= 2:
        g1 = christoffel(metric, order, (l, "a", "b"))
        g2 = christoffel(metric, order, (d, l, d))
        g3 = christoffel(metric, order, (l, "a", d))
        g4 = christoffel(metric, order, (d, "b", l))
        out = out + (g1 * g2).truncate(order) - (g3 * g4).truncate(order)
    return out.truncate(order)


def reduced_wave(order: int = 2, a: str = "a", b: str = "b") -> TensorExpr:
    """□̃_g h_ab = g^{mn} ∂_m ∂_n h_ab truncated in h."""
    m = _tmp("m")
    flat = TensorExpr.h(a, b, m, m)
    if order < 2:
        return flat
    n = _tmp("n")
    return flat - TensorExpr.h(m, n) * TensorExpr.h(a, b, m, n)


def flat_wave(a: str = "a", b: str = "b") -> TensorExpr:
    return reduced_wave(1, a, b)


# ---------------------------------------------------------------------------
# wave-gauge ideal


def gauge_generator(order: int = 2, c: str = "c") -> TensorExpr:
    """G_c = 2 g^{ab} ∂_b g_ac - g^{ab} ∂_c g_ab, truncated."""
    m = _tmp("m")
    out = TensorExpr.h(m, c, m).scale(2) - TensorExpr.h(m, m, c)
    if order >= 2:
        x, y = _tmp("x"), _tmp("y")
        out = out - (TensorExpr.h(x, y) * TensorExpr.h(x, c, y)).scale(2) \
            + TensorExpr.h(x, y) * TensorExpr.h(x, y, c)
    return out.truncate(order)


@dataclass(frozen=True)
class GaugeIdeal:
    """The wave-gauge generators G_c and their first derivatives, at working order."""

    order: int = 2

    def generator(self, c: str) -> TensorExpr:
        return gauge_generator(self.order, c)

    def derivative(self, x: str, c: str) -> TensorExpr:
        """∂_x G_c."""
        return gauge_generator(self.order, c).diff(x).truncate(self.order)

    def symmetric_derivative(self, x: str, y: str) -> TensorExpr:
        """½ (∂_x G_y + ∂_y G_x)."""
        return (self.derivative(x, y) + self.derivative(y, x)).scale(HALF)

    def divergence(self) -> TensorExpr:
        """∂^m G_m."""
        m = _tmp("m")
        return gauge_generator(self.order, m).diff(m).truncate(self.order)


@dataclass
class GaugeMultiple:
    coeff: Fraction
    kind: str            # "G", "sym_dG", "div_G" or "X*G"
    labels: tuple[str, ...]
    expr: TensorExpr     # the generator instance (already contains its labels)

    def reconstruct(self) -> TensorExpr:
        return self.expr.scale(self.coeff)


def _trace_pattern(mono: Monomial, free: tuple[str, ...]):
    """Match a linear monomial ∂..h_mm (a trace under derivatives).

    Returns the elimination rule name and the labels it acts on, or None."""
    if len(mono) != 1:
        return None
    (i, j), derivs = mono[0]
    if i != j or i in free:
        return None
    if len(derivs) == 2:
        x, y = derivs
        if x == y and x not in free:
            return ("div_G", ())
        if x in free and y in free:
            return ("sym_dG", (x, y))
    if len(derivs) == 1 and derivs[0] in free:
        return ("G", (derivs[0],))
    return None


def _divergence_slot(mono: Monomial):
    """Index of a first-derivative factor ∂^n h_{nm} in a quadratic monomial."""
    if len(mono) != 2:
        return None
    for k, (pair, derivs) in enumerate(mono):
        if len(derivs) == 1 and derivs[0] in pair and pair[0] != pair[1]:
            return k
    return None


def _open_dummies(mono: Monomial, free: tuple[str, ...]) -> Monomial:
    """Rename reserved dummy labels so a factor can be split off as its own expression."""
    mapping = {}
    for pair, derivs in mono:
        for lab in pair + derivs:
            if lab not in free and lab not in mapping:
                mapping[lab] = _tmp("u")
    return _rename(mono, mapping)


# elimination order: linear trace structures (contracted first), then quadratic
# monomials carrying a divergence factor
_RULE_RANK = {"div_G": 0, "sym_dG": 1, "G": 2, "X*G": 3}


def _divergence_multiple(mono: Monomial, free: tuple[str, ...], ideal: "GaugeIdeal"):
    opened = _open_dummies(mono, free)
    k = _divergence_slot(opened)
    (pair, (n,)), other = opened[k], opened[1 - k]
    m = pair[0] if pair[1] == n else pair[1]
    x_labels = [lab for lab in other[0] + other[1]]
    x_free = [lab for lab in dict.fromkeys(x_labels) if x_labels.count(lab) == 1]
    cofactor = TensorExpr(x_free, {(other,): Fraction(1)})
    return cofactor, m, (cofactor * ideal.generator(m)).truncate(ideal.order)


def gauge_multiples(expr: TensorExpr, ideal: GaugeIdeal | None = None, *, quadratic: bool = True):
    """Division of ``expr`` by the wave-gauge ideal.

    Eliminable monomials are (i) linear monomials containing a trace ``h_mm``
    under derivatives, removed with G_c, ½(∂_x G_y + ∂_y G_x) or ∂^m G_m, and
    (ii) with ``quadratic=True``, quadratic monomials containing a divergence
    factor ``∂^n h_nm``, removed with (cofactor)·G_m, which trades the divergence
    for ½ ∂_m h^n_n. Each step subtracts a full generator instance truncated at
    the ideal's order. Returns ``(reduced, multiples)``.
    """
    ideal = ideal or GaugeIdeal(max(expr.orders(), default=1))
    reduced = expr
    multiples: list[GaugeMultiple] = []
    for _ in range(4096):
        candidates = []
        for mono, coeff in reduced.terms.items():
            rule = _trace_pattern(mono, reduced.free)
            if rule is not None:
                candidates.append((_RULE_RANK[rule[0]], mono, rule, coeff))
            elif quadratic and ideal.order >= 2 and _divergence_slot(mono) is not None:
                candidates.append((_RULE_RANK["X*G"], mono, ("X*G", ()), coeff))
        if not candidates:
            return reduced, multiples
        candidates.sort(key=lambda t: (t[0], t[1]))
        _, mono, (kind, labs), coeff = candidates[0]
        if kind == "G":
            gen = ideal.generator(labs[0])
        elif kind == "sym_dG":
            gen = ideal.symmetric_derivative(*labs)
        elif kind == "div_G":
            gen = ideal.divergence()
        else:
            cofactor, m, gen = _divergence_multiple(mono, reduced.free, ideal)
            labs = (m,)
        lead = gen.coefficient(mono)
        if lead == 0:
            raise RuntimeError(f"generator {kind}{labs} does not contain its leading term")
        mult = GaugeMultiple(coeff / lead, kind, labs, gen)
        multiples.append(mult)
        reduced = reduced - mult.reconstruct()
    raise RuntimeError("gauge reduction did not terminate")


def reduce_mod_gauge(expr: TensorExpr, ideal: GaugeIdeal | None = None):
    """Split ``expr = reduced + gauge_part`` with gauge_part in the wave-gauge ideal."""
    reduced, multiples = gauge_multiples(expr, ideal)
    gauge_part = TensorExpr.zero(expr.free)
    for m in multiples:
        gauge_part = gauge_part + m.reconstruct()
    return reduced, gauge_part


# ---------------------------------------------------------------------------
# null / quasi-null classification


@dataclass
class Partition:
    """Split of a quadratic expression. ``null + quasi_null + other + gauge`` is the input."""

    null: TensorExpr
    quasi_null: TensorExpr
    other: TensorExpr
    gauge: TensorExpr
    pairs: list[tuple[Monomial, Monomial, Fraction]] = field(default_factory=list)
    multiples: list[GaugeMultiple] = field(default_factory=list)

    def total(self) -> TensorExpr:
        return self.null + self.quasi_null + self.other + self.gauge


def _is_quadratic_first_order(mono: Monomial) -> bool:
    return len(mono) == 2 and all(len(d) == 1 for _, d in mono)


def _derivative_swap(mono: Monomial, free: frozenset[str]) -> Monomial:
    (p1, (x,)), (p2, (y,)) = mono
    return canonical_monomial((make_factor(*p1, (y,)), make_factor(*p2, (x,))), free)


def _pattern(mono: Monomial, free: frozenset[str]) -> str:
    (_, (x,)), (_, (y,)) = mono
    if x == y and x not in free:
        return "null"
    if len(free) == 2 and {x, y} == set(free):
        return "quasi_null"
    return "other"


def _add_to(bucket: dict, mono: Monomial, c: Fraction) -> None:
    v = bucket.get(mono, Fraction(0)) + c
    if v:
        bucket[mono] = v
    else:
        bucket.pop(mono, None)


def classify_quadratic(expr: TensorExpr, ideal: GaugeIdeal | None = None) -> Partition:
    """Partition a quadratic ∂h·∂h expression into null, quasi-null and other parts.

    Antisymmetric pairs ``∂_x A ∂_y B - ∂_y A ∂_x B`` are matched greedily in
    lexicographic order of canonical keys. Remaining monomials are null when
    their two derivative labels are contracted with each other and quasi-null
    when the derivative labels are exactly the two free indices.

    With an ``ideal``, a leftover monomial M is completed to the pair
    ``M - swap(M)`` and ``swap(M)`` is reduced modulo the wave gauge (each
    divergence factor traded for a trace gradient) before being classified
    again; the generator multiples used are collected in ``gauge``.
    """
    free = frozenset(expr.free)
    for mono in expr.terms:
        if not _is_quadratic_first_order(mono):
            raise ValueError(f"not a quadratic first-derivative monomial: {mono}")
    work = dict(expr.terms)
    null_terms: dict[Monomial, Fraction] = {}
    pairs = []
    multiples: list[GaugeMultiple] = []
    gauge = TensorExpr.zero(expr.free)

    def pair_pass():
        for mono in sorted(work):
            c = work.get(mono, Fraction(0))
            if c == 0:
                continue
            partner = _derivative_swap(mono, free)
            cp = work.get(partner, Fraction(0))
            if partner == mono or c * cp >= 0:
                continue
            k = c if abs(c) <= abs(cp) else -cp
            _add_to(null_terms, mono, k)
            _add_to(null_terms, partner, -k)
            _add_to(work, mono, -k)
            _add_to(work, partner, k)
            pairs.append((mono, partner, k))

    pair_pass()
    visited: set[Monomial] = set()
    while ideal is not None:
        pending = sorted(m for m in work if _pattern(m, free) == "other" and m not in visited)
        if not pending:
            break
        mono = pending[0]
        visited.add(mono)
        c = work[mono]
        if _divergence_slot(mono) is not None:
            # reduce in place: ∂^n h_nm -> ½ ∂_m h^n_n
            _add_to(work, mono, -c)
            moved = TensorExpr(expr.free, {mono: c}, _canonical=True)
        else:
            partner = _derivative_swap(mono, free)
            if partner == mono:
                continue
            _add_to(null_terms, mono, c)
            _add_to(null_terms, partner, -c)
            _add_to(work, mono, -c)
            pairs.append((mono, partner, c))
            moved = TensorExpr(expr.free, {partner: c}, _canonical=True)
        reduced, mults = gauge_multiples(moved, GaugeIdeal(max(ideal.order, 2)))
        for m in mults:
            gauge = gauge + m.reconstruct()
        multiples.extend(mults)
        for mo, co in reduced.terms.items():
            _add_to(work, mo, co)
        pair_pass()

    quasi: dict[Monomial, Fraction] = {}
    other: dict[Monomial, Fraction] = {}
    for mono, c in work.items():
        kind = _pattern(mono, free)
        if kind == "null":
            _add_to(null_terms, mono, c)
        elif kind == "quasi_null":
            _add_to(quasi, mono, c)
        else:
            _add_to(other, mono, c)
    mk = lambda t: TensorExpr(expr.free, t, _canonical=True)  # noqa: E731
    return Partition(mk(null_terms), mk(quasi), mk(other), gauge, pairs, multiples)


def quasi_null_reference(a: str = "a", b: str = "b") -> TensorExpr:
    """-½ g^{λλ'}g^{δδ'} ∂_a h_{δλ'} ∂_b h_{λδ'} + ¼ g^{δδ'}g^{λλ'} ∂_b h_{δδ'} ∂_a h_{λλ'}
    at the Minkowski background."""
    m, n, p, q = (_tmp(t) for t in "mnpq")
    first = (TensorExpr.h(m, n, a) * TensorExpr.h(m, n, b)).scale(Fraction(-1, 2))
    second = (TensorExpr.h(p, p, b) * TensorExpr.h(q, q, a)).scale(Fraction(1, 4))
    return first + second


# ---------------------------------------------------------------------------


@dataclass
class LemmaReport:
    order: int
    ricci2: TensorExpr
    reduced_wave: TensorExpr
    remainder: TensorExpr
    gauge_part: TensorExpr
    multiples: list[GaugeMultiple]
    partition: Partition
    expected_quasi_null: TensorExpr
    symmetric: bool
    identity_holds: bool
    remainder_is_quadratic: bool

    @property
    def quasi_null_matches(self) -> bool:
        return self.partition.quasi_null == self.expected_quasi_null

    @property
    def other_empty(self) -> bool:
        return not self.partition.other

    @property
    def ok(self) -> bool:
        return (self.quasi_null_matches and self.other_empty and self.identity_holds
                and self.symmetric and self.remainder_is_quadratic)

    def problems(self) -> list[str]:
        out = []
        if not self.remainder_is_quadratic:
            out.append("remainder contains non-(∂h·∂h) monomials")
        if not self.other_empty:
            out.append("other class is nonempty:\n" + render(self.partition.other))
        if not self.quasi_null_matches:
            diff = self.partition.quasi_null - self.expected_quasi_null
            out.append("quasi-null part differs from reference by:\n" + render(diff))
        if not self.identity_holds:
            out.append("2R = -□̃h + null + quasi-null + gauge does not cancel exactly")
        if not self.symmetric:
            out.append("Ricci tensor is not symmetric")
        return out

    def to_text(self) -> str:
        p = self.partition
        lines = [
            "ricci verify",
            f"order = {self.order}",
            f"status = {'PASS' if self.ok else 'FAIL'}",
            f"ricci_symmetric = {self.symmetric}",
            f"identity_exact = {self.identity_holds}",
            f"ricci_monomials = {len(self.ricci2)}",
            f"gauge_multiples = {len(self.multiples)}",
        ]
        greek = iter("μνσκρ")
        names = {"a": "α", "b": "β"}
        for m in self.multiples:
            shown = [names.setdefault(x, next(greek, x)) for x in m.labels]
            lines.append(f"  {m.coeff} * {m.kind}({', '.join(shown)})")
        lines.append(f"[null] count = {len(p.null)}  (antisymmetric pairs = {len(p.pairs)})")
        lines.extend("  " + s for s in render(p.null).splitlines())
        lines.append(f"[quasi_null] count = {len(p.quasi_null)}  "
                     f"matches_reference = {self.quasi_null_matches}")
        lines.extend("  " + s for s in render(p.quasi_null).splitlines())
        lines.append(f"[other] count = {len(p.other)}")
        if p.other:
            lines.extend("  " + s for s in render(p.other).splitlines())
        for prob in self.problems():
            lines.append("problem: " + prob.splitlines()[0])
        return "\n".join(lines) + "\n"


def verify_lemma(order: int = 2) -> LemmaReport:
    """Check 2 R_ab = -□̃_g h_ab + (null) + (quasi-null) modulo the wave gauge."""
    if order != 2:
        raise OrderError("the decomposition is a statement about quadratic order; use order=2")
    metric = PerturbativeMetric(order)
    ideal = GaugeIdeal(order)
    r2 = ricci(metric, order)
    box = reduced_wave(order)
    d = r2.scale(2) + box
    remainder, multiples = gauge_multiples(d, ideal, quadratic=False)
    quadratic = all(_is_quadratic_first_order(mono) for mono in remainder.terms)
    keep = {m: c for m, c in remainder.terms.items() if _is_quadratic_first_order(m)}
    bad = {m: c for m, c in remainder.terms.items() if not _is_quadratic_first_order(m)}
    part = classify_quadratic(TensorExpr(remainder.free, keep, _canonical=True), ideal)
    if bad:
        part.other = part.other + TensorExpr(remainder.free, bad, _canonical=True)
    gauge_part = part.gauge
    for m in multiples:
        gauge_part = gauge_part + m.reconstruct()
    identity = (-box + part.null + part.quasi_null + part.other + gauge_part) == r2.scale(2)
    symmetric = not (r2 - r2.swap_free("a", "b"))
    return LemmaReport(order, r2, box, remainder, gauge_part, multiples + part.multiples,
                       part, quasi_null_reference(), symmetric, identity, quadratic)


@dataclass
class LinearizedReport:
    reduced: TensorExpr
    expected: TensorExpr
    gauge_part: TensorExpr

    @property
    def holds(self) -> bool:
        return self.reduced == self.expected


def verify_linearized() -> LinearizedReport:
    """2 R_ab at first order reduces modulo the gauge to -□_η h_ab."""
    ideal = GaugeIdeal(1)
    reduced, gauge_part = reduce_mod_gauge(ricci(PerturbativeMetric(1), 1).scale(2), ideal)
    return LinearizedReport(reduced, -flat_wave(), gauge_part)
