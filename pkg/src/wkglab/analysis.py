"""Boost energies on slices, interval norms, decay fits and energy monitoring.

The order-n slice energy of an unknown w is

    E_n = Σ_{j ≤ n} ∫ |L^j w|² 4πr² dr,   L = r ∂_t + t ∂_r,

with the radial boost L standing in for the three boosts (rotations act
trivially on radial fields). On hyperboloids L = t D, so first-order terms need
only the slice data. Second-order terms use ∂_t² w from the model equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .evolution import Trajectory, accelerations
from .foliation import MissingChannelError
from .models import Model
from .state import EvolutionState
from .stencils import trapezoid_radial

MAX_ORDER = 2


class InsufficientDataError(ValueError):
    """Too few slices or samples for the requested analysis."""


@dataclass(frozen=True)
class Derivatives:
    """Minkowski derivatives of one unknown on a slice, up to second order."""

    u: np.ndarray
    t: np.ndarray
    r: np.ndarray
    tt: np.ndarray | None = None
    tr: np.ndarray | None = None
    rr: np.ndarray | None = None


def derivatives(state: EvolutionState, name: str, model: Model | None = None,
                second: bool = False) -> Derivatives:
    chart = state.chart
    if name not in state.rates:
        raise MissingChannelError(f"{name!r} has no time-derivative channel")
    u, ut = state.values[name], state.rates[name]
    theta = chart.slope
    ur = chart.along(u) - theta * ut
    if not second:
        return Derivatives(u, ut, ur)
    if model is None:
        raise ValueError("second derivatives need the model to reconstruct ∂_t² from the PDE")
    utt = accelerations(state, model, boundary=False)[name]
    utr = chart.along(ut) - theta * utt
    urr = chart.along(ur) - theta * utr
    return Derivatives(u, ut, ur, utt, utr, urr)


def boost_chain(d: Derivatives, r: np.ndarray, t: np.ndarray, n: int) -> list[np.ndarray]:
    """[w, Lw, L²w][: n + 1] from the Minkowski derivatives."""
    out = [d.u]
    if n >= 1:
        out.append(r * d.t + t * d.r)
    if n >= 2:
        # L(r w_t + t w_r) = r(r w_tt + w_r + t w_tr) + t(w_t + r w_tr + t w_rr)
        out.append(r * (r * d.tt + d.r + t * d.tr) + t * (d.t + r * d.tr + t * d.rr))
    return out


def _names(state: EvolutionState, unknowns) -> list[str]:
    if unknowns is None:
        return list(state.values)
    if isinstance(unknowns, str):
        return [unknowns]
    return list(unknowns)


def _cut(r: np.ndarray, r_limit: float | None) -> int:
    if r_limit is None:
        return r.size
    k = int(np.searchsorted(r, r_limit * (1 + 1e-12), side="right"))
    if k < 2:
        raise ValueError(f"r_limit={r_limit} leaves fewer than two nodes")
    return k


def slice_energies(state: EvolutionState, n: int, *, model: Model | None = None,
                   unknowns: str | Iterable[str] | None = None,
                   r_limit: float | None = None) -> list[float]:
    """[E_0, ..., E_n] summed over ``unknowns`` (default: all).

    ``r_limit`` truncates the integrals, e.g. to keep an absorbing layer out.
    """
    if not 0 <= n <= MAX_ORDER:
        raise ValueError(f"slice norms are supported for n <= {MAX_ORDER}, got {n}")
    chart = state.chart
    r, t = chart.r, chart.t
    k = _cut(r, r_limit)
    terms = np.zeros(n + 1)
    for name in _names(state, unknowns):
        d = derivatives(state, name, model, second=n >= 2)
        for j, f in enumerate(boost_chain(d, r, t, n)):
            terms[j] += trapezoid_radial(f[:k] * f[:k], r[:k])
    return [float(x) for x in np.cumsum(terms)]


def slice_norm(state: EvolutionState, n: int, chart=None, *, model: Model | None = None,
               unknowns: str | Iterable[str] | None = None, r_limit: float | None = None) -> float:
    """Squared order-n boost norm E_n on the state's slice."""
    if chart is not None and chart is not state.chart:
        state = EvolutionState(chart, state.values, state.rates)
    return slice_energies(state, n, model=model, unknowns=unknowns, r_limit=r_limit)[n]


def _translated(state: EvolutionState, name: str, model: Model | None, N: int):
    """(order |I|, Derivatives of ∂^I w) for every translation multiset with |I| ≤ N.

    Only what the boost chain of the remaining order needs is filled in.
    """
    d = derivatives(state, name, model, second=N >= 2)
    out = [(0, d)]
    if N >= 1:
        out.append((1, Derivatives(d.t, d.tt, d.tr)))
        out.append((1, Derivatives(d.r, d.tr, d.rr)))
    if N >= 2:
        out.extend((2, Derivatives(x, None, None)) for x in (d.tt, d.tr, d.rr))
    return out


def interval_sum(state: EvolutionState, N: int, *, model: Model | None = None,
                 unknowns: str | Iterable[str] | None = None) -> float:
    """Σ_{|I| + n ≤ N} ‖∂^I w‖_{H^n} on one slice, translations ∂_t and ∂_r."""
    if not 0 <= N <= MAX_ORDER:
        raise ValueError(f"interval norms are supported for N <= {MAX_ORDER}")
    chart = state.chart
    r, t = chart.r, chart.t
    total = 0.0
    for name in _names(state, unknowns):
        if N == 0:
            d = derivatives(state, name)
            total += math.sqrt(trapezoid_radial(d.u**2, r))
            continue
        for order, d in _translated(state, name, model, N):
            n = N - order
            if n == 2:
                total += math.sqrt(slice_norm(state, 2, model=model, unknowns=name))
                continue
            energy = sum(trapezoid_radial(f * f, r) for f in boost_chain(d, r, t, n))
            total += math.sqrt(energy)
    return total


def _states(traj) -> list[EvolutionState]:
    if isinstance(traj, Trajectory):
        if not traj.states:
            raise InsufficientDataError("trajectory kept no slice states (run with keep_states=True)")
        return traj.states
    return list(traj)


def interval_norm(traj: Trajectory | Sequence[EvolutionState], N: int,
                  window: tuple[float, float] | None = None, *, model: Model | None = None,
                  unknowns: str | Iterable[str] | None = None, min_slices: int = 10) -> float:
    """sup over recorded slices in ``window`` of :func:`interval_sum`."""
    states = _states(traj)
    if model is None and isinstance(traj, Trajectory):
        model = traj.model
    if window is not None:
        lo, hi = window
        states = [st for st in states if lo - 1e-12 <= st.time <= hi + 1e-12]
    if len(states) < min_slices:
        raise InsufficientDataError(f"{len(states)} slices in range, need at least {min_slices}")
    return max(interval_sum(st, N, model=model, unknowns=unknowns) for st in states)


# ---------------------------------------------------------------------------
# time series


@dataclass(frozen=True)
class EnergyReport:
    """E_n(s) for n = 0..N at every recorded slice time."""

    times: np.ndarray
    energies: np.ndarray  # shape (slices, N + 1)

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 2 or e.shape[0] != len(self.times) or not 1 <= e.shape[1] <= MAX_ORDER + 1:
            raise ValueError("energies must have shape (slices, N + 1) with N <= 2")
        if np.any(e < 0):
            raise ValueError("energies must be nonnegative")

    @property
    def order(self) -> int:
        return self.energies.shape[1] - 1

    def monotone_in_order(self, rtol: float = 1e-12) -> bool:
        e = self.energies
        return bool(np.all(e[:, 1:] >= e[:, :-1] * (1 - rtol)))

    def column(self, n: int) -> np.ndarray:
        return self.energies[:, n]


class EnergyRecorder:
    """Run callback returning E0..EN for each recorded slice."""

    def __init__(self, model: Model, N: int = 2, unknowns=None, r_limit: float | None = None):
        if not 0 <= N <= MAX_ORDER:
            raise ValueError("N must be in 0..2")
        self.model, self.N, self.unknowns, self.r_limit = model, N, unknowns, r_limit

    def __call__(self, state: EvolutionState) -> dict[str, float]:
        es = slice_energies(state, self.N, model=self.model, unknowns=self.unknowns,
                            r_limit=self.r_limit)
        return {f"E{n}": e for n, e in enumerate(es)}


def energy_report(traj: Trajectory, N: int | None = None) -> EnergyReport:
    keys = sorted(k for k in traj.records[0].extra if k[:1] == "E" and k[1:].isdigit())
    if not keys:
        raise InsufficientDataError("trajectory has no recorded energies")
    if N is not None:
        keys = [f"E{n}" for n in range(N + 1)]
    return EnergyReport(traj.times(), np.column_stack([traj.series(k) for k in keys]))


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    prefactor: float
    window: tuple[float, float]
    residual_se: float
    samples: int


def fit_decay(series, window: tuple[float, float] | None = None, *, min_samples: int = 10) -> DecayFit:
    """Least-squares slope of log y against log s over ``window``.

    ``series`` is a sequence of (s, y) pairs or a pair of arrays. The default
    window skips the first three time units.
    """
    s, y = _as_arrays(series)
    if window is None:
        window = (s[0] + 3.0, s[-1])
    lo, hi = window
    if lo >= hi:
        raise ValueError("empty fit window")
    if lo < s[0] - 1e-9 or hi > s[-1] + 1e-9:
        raise ValueError(f"window [{lo}, {hi}] is outside the series range [{s[0]}, {s[-1]}]")
    sel = (s >= lo - 1e-12) & (s <= hi + 1e-12)
    if sel.sum() < min_samples:
        raise InsufficientDataError(f"{int(sel.sum())} samples in window, need at least {min_samples}")
    ys = y[sel]
    if np.any(ys <= 0) or np.any(s[sel] <= 0):
        raise ValueError("decay fit needs positive values in the window")
    X = np.column_stack([np.log(s[sel]), np.ones(sel.sum())])
    coef, *_ = np.linalg.lstsq(X, np.log(ys), rcond=None)
    resid = np.log(ys) - X @ coef
    dof = max(int(sel.sum()) - 2, 1)
    return DecayFit(float(coef[0]), float(math.exp(coef[1])), (float(lo), float(hi)),
                    float(math.sqrt(resid @ resid / dof)), int(sel.sum()))


def _as_arrays(series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, tuple) and len(series) == 2 and np.ndim(series[0]) == 1:
        s, y = np.asarray(series[0], float), np.asarray(series[1], float)
    else:
        arr = np.asarray(list(series), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("series must be (s, y) pairs")
        s, y = arr[:, 0], arr[:, 1]
    if s.size != y.size or s.size == 0:
        raise ValueError("series arrays must be non-empty and of equal length")
    if np.any(np.diff(s) <= 0):
        raise ValueError("series times must increase")
    return s, y


@dataclass(frozen=True)
class EnergyVerdict:
    bounded: bool
    ratio: float
    worst_time: float
    baseline: float
    factor: float

    @property
    def verdict(self) -> str:
        return "bounded" if self.bounded else "amplified"


def energy_monitor(traj: Trajectory | EnergyReport | tuple, N: int = 2, factor: float = 2.0,
                   *, min_slices: int = 10) -> EnergyVerdict:
    """Bounded iff max_s E_N(s) <= factor * E_N(s₀)."""
    if isinstance(traj, Trajectory):
        report = energy_report(traj)
        times, e = report.times, report.column(N)
    elif isinstance(traj, EnergyReport):
        times, e = traj.times, traj.column(N)
    else:
        times, e = (np.asarray(x, float) for x in traj)
    if len(e) < min_slices:
        raise InsufficientDataError(f"{len(e)} recorded slices, need at least {min_slices}")
    base = float(e[0])
    k = int(np.argmax(e))
    if base == 0.0:
        ratio = 0.0 if e[k] == 0.0 else math.inf
    else:
        ratio = float(e[k] / base)
    return EnergyVerdict(ratio <= factor, ratio, float(times[k]), base, factor)
