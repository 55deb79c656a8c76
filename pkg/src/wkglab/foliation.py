"""Hyperboloidal slices H_s = {t² - r² = s²} of the interior of the light cone,
the Minkowski frame fields (translations, boosts, tangential derivatives) and
their discrete action on radial grid functions.

In spherical symmetry the three boosts L_a = x^a ∂_t + t ∂_a reduce to the
radial boost L = r ∂_t + t ∂_r; rotations act trivially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .stencils import d1

ChartKind = Literal["hyperboloidal", "cartesian"]


class OutsideConeError(ValueError):
    """Raised when a point is not strictly inside the light cone (t <= r)."""


class MissingChannelError(ValueError):
    """Raised when a state lacks the time-derivative channel an operation needs."""


def _finite(*xs) -> None:
    for x in xs:
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite coordinate")


def lift(s, r):
    """Minkowski time of the point at radius r on H_s: t = sqrt(s² + r²)."""
    _finite(s, r)
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(s <= 0):
        raise ValueError("hyperboloidal time must be positive")
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    t = np.hypot(s, r)
    return float(t) if t.ndim == 0 else t


def project(t, r):
    """Hyperboloidal time through (t, r): s = sqrt(t² - r²); requires t > r >= 0."""
    _finite(t, r)
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    if np.any(t <= r):
        raise OutsideConeError("point lies on or outside the light cone (t <= r)")
    s = np.sqrt((t - r) * (t + r))
    return float(s) if s.ndim == 0 else s


def cone_radius(s: float) -> float:
    """Outer radius of H_s inside K = {r < t - 1}: (s² - 1) / 2."""
    return (s * s - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class SliceChart:
    """A radial grid on one slice of a foliation.

    ``kind="hyperboloidal"``: the slice H_s with ``time = s``.
    ``kind="cartesian"``: the flat slice t = ``time``.
    """

    time: float
    r: np.ndarray
    kind: ChartKind = "hyperboloidal"
    confined: bool = False

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        object.__setattr__(self, "r", r)
        r.setflags(write=False)
        if not math.isfinite(self.time) or self.time <= 0:
            raise ValueError(f"slice time must be positive and finite, got {self.time}")
        if self.kind not in ("hyperboloidal", "cartesian"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if r.ndim != 1 or r.size < 5:
            raise ValueError("radial grid needs at least 5 nodes")
        if r[0] < 0:
            raise ValueError("radial nodes must be nonnegative")
        steps = np.diff(r)
        if np.any(steps <= 0):
            raise ValueError("radial nodes must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("radial grid must be uniform")
        if self.confined and self.kind == "hyperboloidal" and r[-1] > cone_radius(self.time) + 1e-12:
            raise OutsideConeError(
                f"r_max={r[-1]} exceeds (s²-1)/2={cone_radius(self.time)} on a confined slice")

    @classmethod
    def uniform(cls, time: float, dr: float, r_max: float, kind: ChartKind = "hyperboloidal",
                confined: bool = False) -> "SliceChart":
        n = int(round(r_max / dr))
        return cls(time, dr * np.arange(n + 1), kind, confined)

    def at(self, time: float) -> "SliceChart":
        return SliceChart(time, self.r, self.kind, self.confined)

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def origin(self) -> bool:
        return self.r[0] == 0.0

    @property
    def t(self) -> np.ndarray:
        """Minkowski time at every node."""
        if self.kind == "hyperboloidal":
            return np.hypot(self.time, self.r)
        return np.full_like(self.r, self.time)

    @property
    def s(self) -> np.ndarray:
        """Hyperboloidal time at every node."""
        if self.kind == "hyperboloidal":
            return np.full_like(self.r, self.time)
        return project(self.t, self.r)

    @property
    def slope(self) -> np.ndarray:
        """dt/dr along the slice (r/t on H_s, 0 on flat slices)."""
        if self.kind == "hyperboloidal":
            return self.r / self.t
        return np.zeros_like(self.r)

    def along(self, f: np.ndarray) -> np.ndarray:
        """Derivative along the slice grid."""
        return d1(f, self.dr, origin=self.origin)


@dataclass(frozen=True)
class FrameField:
    """A Minkowski vector field: ``dt``, ``dr`` (spatial translation), ``boost`` or
    ``tangential`` (∂̄ = ∂_r + (r/t) ∂_t). ``axis`` labels a Cartesian direction
    and only matters for the three-dimensional commutator check."""

    kind: Literal["dt", "dr", "boost", "tangential"]
    axis: int = 1

    def __post_init__(self):
        if self.kind not in ("dt", "dr", "boost", "tangential"):
            raise ValueError(f"unknown frame field {self.kind!r}")
        if self.axis not in (1, 2, 3):
            raise ValueError("axis must be 1, 2 or 3")


def radial_derivative(u: np.ndarray, ut: np.ndarray, chart: SliceChart) -> np.ndarray:
    """∂_r u at fixed t from the along-slice derivative and the stored ∂_t u."""
    return chart.along(u) - chart.slope * ut


def apply_frame(field: FrameField, state, chart: SliceChart | None = None,
                unknown: str = "u") -> np.ndarray:
    """Action of a frame field on one unknown of ``state`` (an EvolutionState or a
    ``(u, ∂_t u)`` pair)."""
    if isinstance(state, tuple):
        u, ut = state
    else:
        chart = chart or state.chart
        u = state.values[unknown]
        ut = state.rates.get(unknown)
    if chart is None:
        raise ValueError("a chart is required")
    if ut is None:
        raise MissingChannelError(f"no time-derivative channel for {unknown!r}")
    if field.kind == "dt":
        return np.array(ut, dtype=float)
    ur = radial_derivative(u, ut, chart)
    if field.kind == "dr":
        return ur
    if field.kind == "boost":
        return chart.r * ut + chart.t * ur
    return ur + (chart.r / chart.t) * ut


# ---------------------------------------------------------------------------
# commutator identities of the Minkowski frame


def _fields(a: int, b: int):
    """Coefficient functions of ∂_t, ∂_b, L_a, L_b and the expected commutators
    on coordinates X = (t, x1, x2, x3)."""
    def trans(mu):
        return lambda X: [1.0 if k == mu else 0.0 for k in range(4)]

    def boost(k):
        return lambda X: [X[k], *[X[0] if j == k else 0.0 for j in (1, 2, 3)]]

    def rot(X):  # x^a ∂_b - x^b ∂_a
        c = [0.0, 0.0, 0.0, 0.0]
        c[b] = c[b] + X[a]
        c[a] = c[a] - X[b]
        return c

    dt, da, db = trans(0), trans(a), trans(b)
    la, lb = boost(a), boost(b)
    delta = 1.0 if a == b else 0.0
    return [
        (dt, la, da),                                    # [∂_t, L_a] = ∂_a
        (db, la, lambda X: [delta, 0.0, 0.0, 0.0]),      # [∂_b, L_a] = δ_ab ∂_t
        (la, lb, rot),                                   # [L_a, L_b] = x^a ∂_b - x^b ∂_a
    ]


def commutator_check(a: int, b: int, sample, *, mode: Literal["exact", "fd"] = "exact",
                     h: float = 1e-3, points: np.ndarray | None = None) -> float:
    """Maximum deviation of the three frame commutator identities on ``sample``.

    ``sample`` is a sympy expression in the symbols ``t, x1, x2, x3``. In
    ``exact`` mode derivatives are symbolic: for polynomials the deviation is
    reduced symbolically and is exactly 0; otherwise it is evaluated at
    ``points``. In ``fd`` mode all derivatives are nested central differences
    with spacing ``h``.
    """
    import sympy as sp

    if a not in (1, 2, 3) or b not in (1, 2, 3):
        raise ValueError("axes must be in 1..3")
    X = sp.symbols("t x1 x2 x3")
    if points is None:
        rng = np.random.default_rng(12345)
        points = rng.uniform(-1.0, 1.0, size=(16, 4))
        points[:, 0] += 3.0
    checks = _fields(a, b)

    if mode == "exact":
        def apply(coeffs, f):
            c = coeffs(list(X))
            return sum(sp.sympify(c[k]) * sp.diff(f, X[k]) for k in range(4))

        devs = []
        for A, B, C in checks:
            dev = apply(A, apply(B, sample)) - apply(B, apply(A, sample)) - apply(C, sample)
            devs.append(sp.expand(dev))
        if all(d == 0 for d in devs):
            return 0.0
        fn = sp.lambdify(X, devs, "numpy")
        vals = np.array([fn(*p) for p in points], dtype=float)
        return float(np.max(np.abs(vals)))

    if mode != "fd":
        raise ValueError(f"unknown mode {mode!r}")
    f0 = sp.lambdify(X, sample, "numpy")

    def num(F):
        return lambda P: float(F(*P))

    def apply_num(coeffs, F):
        def G(P):
            c = coeffs(P)
            total = 0.0
            for k in range(4):
                if c[k] == 0.0:
                    continue
                e = np.zeros(4)
                e[k] = h
                total += c[k] * (F(P + e) - F(P - e)) / (2 * h)
            return total
        return G

    F = num(f0)
    worst = 0.0
    for A, B, C in checks:
        AB = apply_num(A, apply_num(B, F))
        BA = apply_num(B, apply_num(A, F))
        Cf = apply_num(C, F)
        for p in points:
            p = np.asarray(p, dtype=float)
            worst = max(worst, abs(AB(p) - BA(p) - Cf(p)))
    return worst

