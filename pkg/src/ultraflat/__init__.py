"""Optimal flat functions and extension operators for ultraholomorphic classes.

Weight sequences live in log form (weight_seq), their associated functions
in assoc_fn, harmonic extensions in harmonic, flat functions in flat and
the moment-based extension operator in borel_ext.
"""

__version__ = "0.1.0"

from .assoc_fn import h, kappa, log_h, nu, omega, recover_Mp
from .borel_ext import (
    FormalSeries,
    alternating_Mp,
    extend,
    extension_operator,
    kernel_from_flat,
    moments,
    verify_asymptotics,
)
from .errors import UltraflatError
from .flat import (
    FlatFunction,
    Sector,
    flat_halfplane,
    flat_product,
    flat_q_gevrey_S2,
    flat_q_gevrey_Sgamma,
    flat_ramified,
    reference_exp,
    verify_flatness,
)
from .harmonic import HarmonicEvaluator, langenbruch_fit, omega_extension
from .weight_seq import (
    WeightSequence,
    check_property,
    convolve,
    gamma_estimate,
    gevrey,
    m_alpha_beta,
    q_gevrey,
)

__all__ = [
    "FlatFunction", "FormalSeries", "HarmonicEvaluator", "Sector", "UltraflatError",
    "WeightSequence", "alternating_Mp", "check_property", "convolve", "extend",
    "extension_operator", "flat_halfplane", "flat_product", "flat_q_gevrey_S2",
    "flat_q_gevrey_Sgamma", "flat_ramified", "gamma_estimate", "gevrey", "h", "kappa",
    "kernel_from_flat", "langenbruch_fit", "log_h", "m_alpha_beta", "moments", "nu",
    "omega", "omega_extension", "q_gevrey", "recover_Mp", "reference_exp",
    "verify_asymptotics", "verify_flatness",
]
