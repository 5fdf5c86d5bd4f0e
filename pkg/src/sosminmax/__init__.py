"""Kernelized sum-of-squares relaxations for polynomial min and min-max problems."""

from .certify import Certificate, Undecided, emptiness_certificate, verify_certificate
from .minmax import (
    BilinearObjective,
    BoundStatus,
    alternate_two_stage,
    dual_weights,
    solve_minmax,
    two_stage,
)
from .polynomial import evaluate, monomial, random_trig, trig
from .sdp import SdpProblem, Status, solve
from .simpleset import Kind, dims, kernel, make_set, product_set, sample_points
from .sosmin import solve_min

__version__ = "0.1.0"

__all__ = [
    "BilinearObjective",
    "BoundStatus",
    "Certificate",
    "Kind",
    "SdpProblem",
    "Status",
    "Undecided",
    "alternate_two_stage",
    "dims",
    "dual_weights",
    "emptiness_certificate",
    "evaluate",
    "kernel",
    "make_set",
    "monomial",
    "product_set",
    "random_trig",
    "sample_points",
    "solve",
    "solve_min",
    "solve_minmax",
    "trig",
    "two_stage",
    "verify_certificate",
]
