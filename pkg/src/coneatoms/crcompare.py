"""Structural constants of tube domains and the threshold comparison with
Coifman-Rochberg type atoms (at ``theta = 0``)."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainConstants",
    "RangeReport",
    "constants",
    "nu_to_r",
    "r_to_nu",
    "our_threshold",
    "cr_threshold",
    "compare",
    "default_p_values",
    "write_compare_csv",
]


@dataclass(frozen=True)
class DomainConstants:
    eps: float
    gamma: float


@dataclass(frozen=True)
class RangeReport:
    p: float
    r_ours: float
    r_cr: float
    nu_ours: float
    nu_cr: float
    dominates: bool


def constants(cone):
    """``eps = R/(2n)`` and ``gamma = 1/2 - eps``."""
    eps = cone.R / (2 * cone.n)
    return DomainConstants(eps, 0.5 - eps)


def r_to_nu(cone, r):
    return 2 * cone.n * r / cone.R + cone.n / cone.R


def nu_to_r(cone, nu):
    return (nu - cone.n / cone.R) * cone.R / (2 * cone.n)


def our_threshold(cone, p):
    """Lower bound on ``r`` for the decomposition built here."""
    e = constants(cone).eps
    return max(-e, -1.5 + p * (1 - e) + e - p / 2)


def cr_threshold(cone, p):
    """Lower bound on ``r`` for the kernel-based atoms at ``theta = 0``."""
    k = constants(cone)
    return max(-k.eps + k.gamma, -1.5 + p * (1 - k.eps))


def default_p_values():
    return [float(p) for p in np.round(np.arange(1.0, 4.0 + 1e-9, 0.25), 10)]


def compare(cone, p_values=None):
    if p_values is None:
        p_values = default_p_values()
    out = []
    for p in p_values:
        if p < 1:
            raise ValueError(f"p must be at least 1, got {p}")
        ro, rc = our_threshold(cone, p), cr_threshold(cone, p)
        out.append(RangeReport(float(p), ro, rc, r_to_nu(cone, ro), r_to_nu(cone, rc), ro <= rc))
    return out


def write_compare_csv(reports, path, header_line=None):
    with open(path, "w", newline="") as fh:
        if header_line:
            fh.write(header_line + "\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["p", "r_ours", "r_cr", "nu_ours", "nu_cr", "dominates"])
        for r in reports:
            wr.writerow([repr(r.p), repr(r.r_ours), repr(r.r_cr), repr(r.nu_ours), repr(r.nu_cr),
                         str(r.dominates).lower()])
