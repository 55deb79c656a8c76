"""Coupled wave-Klein-Gordon model systems in radial symmetry.

Each unknown w obeys ``a_w □w - b_w w = S_w`` with □ = -∂_t² + ∂_r² + (2/r)∂_r,
where S_w is returned by :meth:`source_terms` exactly as the right-hand side is
written for the field equations:

* :class:`WKGModel` (Einstein type, unknowns u, phi)::

      □u        = F(u, ∂u) - 8π (2 (∂φ)² + c² φ² u)
      □φ - c² φ = 0

* :class:`FRModel` (f(R) type, unknowns u, phi, rho)::

      □u        = F - 8π (2 e^{-κρ} (∂φ)² + c² φ² e^{-2κρ} u) - 3κ² (∂ρ)² + κ q ρ² u
      □φ - c² φ = c² (e^{-κρ} - 1) φ + κ ∂φ·∂ρ
      3κ □ρ - ρ = κ q ρ² - 8π ((∂φ)² + (c²/2) e^{-κρ} φ²)

Contractions use the Minkowski background: ``∂f·∂g = -f_t g_t + f_r g_r``.
The scalar u stands in for the metric components; F is assembled from a fixed
catalog of quadratic self-interactions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .foliation import MissingChannelError, SliceChart, radial_derivative
from .state import Jet, NonFiniteError

EIGHT_PI = 8.0 * math.pi

CATALOG = frozenset({"null", "quasi_null", "matter"})


def dot(a: Jet, b: Jet) -> np.ndarray:
    """Minkowski contraction of first derivatives in the radial model."""
    return -a.dt * b.dt + a.dr * b.dr


def _check_finite(jets: dict[str, Jet]) -> None:
    for name, jet in jets.items():
        for part, arr in zip(("value", "dt", "dr"), jet):
            bad = ~np.isfinite(arr)
            if np.any(bad):
                node = int(np.argmax(bad)) if np.ndim(arr) else 0
                raise NonFiniteError(f"non-finite {part} of {name!r} at node {node}", name, node)


@dataclass(frozen=True)
class WKGModel:
    c: float = 1.0
    coupling: bool = True
    nonlinearities: frozenset[str] = field(default_factory=lambda: CATALOG)
    null_coeff: float = 1.0
    quasi_null_coeff: float = 0.1

    unknowns = ("u", "phi")

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"Klein-Gordon mass c must be positive, got {self.c}")
        object.__setattr__(self, "nonlinearities", frozenset(self.nonlinearities))
        extra = self.nonlinearities - CATALOG
        if extra:
            raise ValueError(f"unknown nonlinearities {sorted(extra)}; catalog is {sorted(CATALOG)}")

    @property
    def matter_factor(self) -> float:
        """8π with the coupling switch on, 1 with it off."""
        return EIGHT_PI if self.coupling else 1.0

    def operator(self) -> dict[str, tuple[float, float]]:
        """(a_w, b_w) in ``a_w □w - b_w w = S_w``."""
        return {"u": (1.0, 0.0), "phi": (1.0, self.c**2)}

    def self_interaction(self, u: Jet) -> np.ndarray:
        f = np.zeros_like(u.value)
        if "null" in self.nonlinearities:
            f = f + self.null_coeff * dot(u, u)
        if "quasi_null" in self.nonlinearities:
            f = f + self.quasi_null_coeff * u.dt**2
        return f

    def source_terms(self, jets: dict[str, Jet]) -> dict[str, np.ndarray]:
        _check_finite(jets)
        u, phi = jets["u"], jets["phi"]
        s_u = self.self_interaction(u)
        if "matter" in self.nonlinearities:
            s_u = s_u - self.matter_factor * (2 * dot(phi, phi) + self.c**2 * phi.value**2 * u.value)
        return {"u": s_u, "phi": np.zeros_like(phi.value)}

    def describe(self) -> str:
        return (f"wkg c={self.c!r} coupling={int(self.coupling)} "
                f"nonlinearities={','.join(sorted(self.nonlinearities)) or 'none'} "
                f"null_coeff={self.null_coeff!r} quasi_null_coeff={self.quasi_null_coeff!r}")


def _fr_sources(base: WKGModel, kappa: float, q: float, jets: dict[str, Jet]) -> dict[str, np.ndarray]:
    _check_finite(jets)
    u, phi, rho = jets["u"], jets["phi"], jets["rho"]
    c2 = base.c**2
    g = base.matter_factor
    e1 = np.exp(-kappa * rho.value)
    e2 = np.exp(-2 * kappa * rho.value)
    s_u = base.self_interaction(u)
    if "matter" in base.nonlinearities:
        s_u = s_u - g * (2 * e1 * dot(phi, phi) + c2 * phi.value**2 * e2 * u.value)
    s_u = s_u - 3 * kappa**2 * dot(rho, rho) + kappa * q * rho.value**2 * u.value
    s_phi = c2 * (e1 - 1) * phi.value + kappa * dot(phi, rho)
    s_rho = kappa * q * rho.value**2 - g * (dot(phi, phi) + 0.5 * c2 * e1 * phi.value**2)
    return {"u": s_u, "phi": s_phi, "rho": s_rho}


@dataclass(frozen=True)
class FRModel:
    kappa: float
    c: float = 1.0
    q: float = 1.0
    coupling: bool = True
    nonlinearities: frozenset[str] = field(default_factory=lambda: CATALOG)
    null_coeff: float = 1.0
    quasi_null_coeff: float = 0.1

    unknowns = ("u", "phi", "rho")

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        object.__setattr__(self, "nonlinearities", frozenset(self.nonlinearities))
        self.einstein()  # validates c and the catalog

    def einstein(self) -> WKGModel:
        """The Einstein-type model with the same mass, coupling and self-interactions."""
        return WKGModel(self.c, self.coupling, self.nonlinearities, self.null_coeff,
                        self.quasi_null_coeff)

    @property
    def matter_factor(self) -> float:
        return self.einstein().matter_factor

    def operator(self) -> dict[str, tuple[float, float]]:
        return {"u": (1.0, 0.0), "phi": (1.0, self.c**2), "rho": (3 * self.kappa, 1.0)}

    def source_terms(self, jets: dict[str, Jet]) -> dict[str, np.ndarray]:
        return _fr_sources(self.einstein(), self.kappa, self.q, jets)

    def describe(self) -> str:
        return f"fr kappa={self.kappa!r} q={self.q!r} " + self.einstein().describe()[4:]


Model = WKGModel | FRModel


def source_terms(model: Model, state) -> dict[str, np.ndarray]:
    """Right-hand sides of ``model`` evaluated on an EvolutionState."""
    missing = [k for k in model.unknowns if k not in state.values or k not in state.rates]
    if missing:
        raise MissingChannelError(f"state lacks unknowns/channels {missing}")
    return model.source_terms(state.jets())


def algebraic_rho(phi: Jet, c: float = 1.0, coupling: bool = True) -> np.ndarray:
    """Limit value of ρ as κ → 0: 8π(∂φ·∂φ + (c²/2) φ²)."""
    g = EIGHT_PI if coupling else 1.0
    return g * (dot(phi, phi) + 0.5 * c**2 * phi.value**2)


def einstein_limit_sources(jets: dict[str, Jet], c: float = 1.0, *,
                           reference: WKGModel | None = None) -> dict[str, np.ndarray]:
    """f(R) right-hand sides at κ = 0 with ρ replaced by its algebraic limit.

    Only u and phi are needed. Also returns the limiting ρ under ``"rho"``.
    """
    base = reference or WKGModel(c)
    if base.c != c:
        raise ValueError("reference model mass differs from c")
    phi = jets["phi"]
    rho_value = algebraic_rho(phi, c, base.coupling)
    zero = np.zeros_like(rho_value)
    full = dict(jets)
    full["rho"] = Jet(rho_value, zero, zero)
    out = _fr_sources(base, 0.0, 1.0, full)
    return {"u": out["u"], "phi": out["phi"], "rho": rho_value}


def catalog_nullform(u_state, v_state, chart: SliceChart) -> np.ndarray:
    """Q0(u, v) = -∂_t u ∂_t v + ∂_r u ∂_r v on the slice; states are (value, ∂_t) pairs."""
    (u, ut), (v, vt) = u_state, v_state
    if ut is None or vt is None:
        raise MissingChannelError("null form needs time-derivative channels")
    return -ut * vt + radial_derivative(u, ut, chart) * radial_derivative(v, vt, chart)


# ---------------------------------------------------------------------------
# initial data


def bump(r, support: float = 1.0, power: int = 6):
    """(1 - (r/support)²)^power inside r < support, zero outside (C^{power-1})."""
    x = np.clip(1.0 - (np.asarray(r, dtype=float) / support) ** 2, 0.0, None)
    return x**power


def _zero(r):
    return np.zeros_like(np.asarray(r, dtype=float))


Profile = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InitialData:
    """Closed-form radial profiles scaled by the amplitude ``epsilon``.

    ``rho`` selects the f(R) curvature data: ``"well_prepared"`` (on the limit
    relation, with consistent time derivative), ``"ill_prepared"`` (ρ = ρ_t = 0,
    exhibits the initial layer) or ``"profile"`` (use rho0/rho1).
    """

    epsilon: float = 1e-3
    support: float = 1.0
    u0: Profile | None = None
    u1: Profile | None = None
    phi0: Profile | None = None
    phi1: Profile | None = None
    rho0: Profile | None = None
    rho1: Profile | None = None
    rho: str = "well_prepared"

    def __post_init__(self):
        if self.rho not in ("well_prepared", "ill_prepared", "profile"):
            raise ValueError(f"unknown rho data mode {self.rho!r}")
        if not 0 < self.support <= 1.0 + 1e-12:
            raise ValueError("initial data must be supported inside r < 1")

    @classmethod
    def bumps(cls, epsilon: float = 1e-3, *, u: float = 1.0, phi: float = 1.0,
              support: float = 1.0, power: int = 6, **kw) -> "InitialData":
        """u₀ = ε·u·bump, φ₀ = ε·phi·bump, zero time derivatives."""
        def scaled(a):
            return None if a == 0 else (lambda r: a * bump(r, support, power))
        return cls(epsilon, support, u0=scaled(u), phi0=scaled(phi), **kw)

    def profile(self, name: str, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        f0 = getattr(self, f"{name}0") or _zero
        f1 = getattr(self, f"{name}1") or _zero
        v0 = self.epsilon * np.asarray(f0(r), dtype=float)
        v1 = self.epsilon * np.asarray(f1(r), dtype=float)
        outside = np.asarray(r) >= self.support
        if np.any(v0[outside] != 0) or np.any(v1[outside] != 0):
            raise ValueError(f"profile {name!r} is not supported in r < {self.support}")
        return v0, v1
