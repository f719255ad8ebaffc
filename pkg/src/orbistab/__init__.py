"""Slope stability of orbifold curves and balanced metrics on their weighted embeddings."""

from .core_arith import QuasiPolynomial, WeightSequence, ci_weights, qp_fit
from .orbicurve import OrbiCurve, QDivisor, football, h0_exact, h0_quasi, projective_line, weighted_line
from .stability import classify_curve, futaki_normal_cone, wps_check

__version__ = "0.1.0"

__all__ = [
    "QuasiPolynomial", "WeightSequence", "ci_weights", "qp_fit",
    "OrbiCurve", "QDivisor", "football", "h0_exact", "h0_quasi", "projective_line", "weighted_line",
    "classify_curve", "futaki_normal_cone", "wps_check",
]
