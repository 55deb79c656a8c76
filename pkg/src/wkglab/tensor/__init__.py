"""Exact perturbative tensor calculus around Minkowski space."""

from .expr import TensorExpr, render
from .gravity import (
    GaugeIdeal,
    LemmaReport,
    LinearizedReport,
    OrderError,
    Partition,
    PerturbativeMetric,
    christoffel,
    classify_quadratic,
    flat_wave,
    gauge_generator,
    quasi_null_reference,
    reduce_mod_gauge,
    reduced_wave,
    ricci,
    verify_lemma,
    verify_linearized,
)

__all__ = [
    "TensorExpr", "render", "GaugeIdeal", "LemmaReport", "OrderError", "Partition",
    "PerturbativeMetric", "christoffel", "classify_quadratic", "flat_wave",
    "gauge_generator", "quasi_null_reference", "reduce_mod_gauge", "reduced_wave",
    "ricci", "verify_lemma", "verify_linearized", "LinearizedReport",
]
