"""Relaxation limit κ → 0 of the f(R)-type system.

A sweep evolves the f(R) model for a decreasing list of κ from shared data and
measures, on each recorded slice, the L² distance of ρ_κ to its algebraic limit
and of (u, φ) to an Einstein-type reference run on the same grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import models
from .evolution import SchemeConfig, run
from .foliation import MissingChannelError
from .models import FRModel, InitialData, WKGModel
from .state import EvolutionState
from .stencils import trapezoid_radial

__all__ = ["algebraic_rho", "SweepConfig", "ConvergenceReport", "sweep", "log_slope"]


def algebraic_rho(state: EvolutionState, c: float = 1.0, coupling: bool = True) -> np.ndarray:
    """8π(-(∂_tφ)² + (∂_rφ)² + (c²/2)φ²) on the state's slice."""
    if "phi" not in state.values or "phi" not in state.rates:
        raise MissingChannelError("algebraic limit needs phi and its time derivative")
    return models.algebraic_rho(state.jets()["phi"], c, coupling)


@dataclass(frozen=True)
class SweepConfig:
    kappas: tuple[float, ...]
    data: InitialData = field(default_factory=lambda: InitialData.bumps(0.01, u=0.0))
    span: tuple[float, float] = (2.0, 6.0)
    mode: str = "cartesian"
    dr: float = 0.05
    r_max: float = 10.0
    record_every: float = 0.25
    scheme: SchemeConfig = field(default_factory=lambda: SchemeConfig(stiff=True))
    c: float = 1.0
    q: float = 1.0
    coupling: bool = True
    nonlinearities: frozenset[str] = models.CATALOG
    null_coeff: float = 1.0
    quasi_null_coeff: float = 0.1
    norm_order: int = 0

    def __post_init__(self):
        ks = tuple(float(k) for k in self.kappas)
        object.__setattr__(self, "kappas", ks)
        if not ks:
            raise ValueError("empty kappa list")
        if any(not k > 0 for k in ks):
            raise ValueError("kappa values must be positive")
        if len(set(ks)) != len(ks):
            raise ValueError("kappa values must be distinct")
        if any(a <= b for a, b in zip(ks, ks[1:])):
            raise ValueError("kappa values must be strictly decreasing")
        lo, hi = self.span
        if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
            raise ValueError("sweep interval must be bounded and non-empty")
        if self.norm_order != 0:
            raise ValueError("only order-0 (L²) sweep errors are implemented")

    def fr_model(self, kappa: float) -> FRModel:
        return FRModel(kappa, self.c, self.q, self.coupling, self.nonlinearities,
                       self.null_coeff, self.quasi_null_coeff)

    def reference_model(self) -> WKGModel:
        return WKGModel(self.c, self.coupling, self.nonlinearities, self.null_coeff,
                        self.quasi_null_coeff)

    def _run(self, model):
        return run(self.data, model, self.scheme, self.span, mode=self.mode, dr=self.dr,
                   r_max=self.r_max, record_every=self.record_every, keep_states=True)


def log_slope(x, y) -> float:
    """Least-squares slope of log y against log x; NaN unless every y > 0."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2 or np.any(y <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ConvergenceReport:
    kappas: list[float]
    err_rho: list[float]
    err_u: list[float]
    err_phi: list[float]
    q: float
    failed: dict[float, str] = field(default_factory=dict)

    def _slope(self, errs) -> float:
        if len(self.kappas) < 3:
            return math.nan
        return log_slope(self.kappas, errs)

    @property
    def slope_rho(self) -> float:
        return self._slope(self.err_rho)

    @property
    def slope_u(self) -> float:
        return self._slope(self.err_u)

    @property
    def slope_phi(self) -> float:
        return self._slope(self.err_phi)

    def strictly_decreasing(self, which: str = "rho") -> bool:
        e = getattr(self, f"err_{which}")
        return all(b < a for a, b in zip(e, e[1:]))

    def summary(self) -> str:
        def fmt(x):
            return "nan" if math.isnan(x) else f"{x:.6g}"
        return (f"slope_rho={fmt(self.slope_rho)} slope_u={fmt(self.slope_u)} "
                f"slope_phi={fmt(self.slope_phi)} q={self.q!r} points={len(self.kappas)} "
                f"failed={','.join(repr(k) for k in self.failed) or 'none'}")


def _l2(f: np.ndarray, r: np.ndarray) -> float:
    return math.sqrt(trapezoid_radial(f * f, r))


def sweep(config: SweepConfig) -> ConvergenceReport:
    """Run the reference and every κ; diverging members are dropped with a warning."""
    ref = config._run(config.reference_model())
    report = ConvergenceReport([], [], [], [], config.q)
    for kappa in config.kappas:
        model = config.fr_model(kappa)
        try:
            traj = config._run(model)
        except (FloatingPointError, ValueError) as exc:
            warnings.warn(f"kappa={kappa!r} run failed and is excluded: {exc}", RuntimeWarning,
                          stacklevel=2)
            report.failed[kappa] = str(exc)
            continue
        e_rho = e_u = e_phi = 0.0
        for st, st_ref in zip(traj.states, ref.states):
            r = st.chart.r
            e_rho = max(e_rho, _l2(st.values["rho"] - algebraic_rho(st, config.c, config.coupling), r))
            e_u = max(e_u, _l2(st.values["u"] - st_ref.values["u"], r))
            e_phi = max(e_phi, _l2(st.values["phi"] - st_ref.values["phi"], r))
        report.kappas.append(kappa)
        report.err_rho.append(e_rho)
        report.err_u.append(e_u)
        report.err_phi.append(e_phi)
    return report
