"""Exponential-stability certification of the real delay system.

A certificate is a pair of positive-definite matrices (P, Q) plus a decay
rate beta such that

    [[P A + A^T P + Q,  P B], [B^T P,  -exp(-2 beta tau) Q]]
        + 2 beta [[P, 0], [0, 0]]   ( + 2 lmax(P) ||Upsilon||_sup I )  <  0.

Feasibility implies  ||x(t)|| <= sqrt(alpha2/alpha1) exp(-beta t) |phi|*
with alpha1 = lmin(P) and alpha2 = lmax(P) + tau lmax(Q).  The detuned
variant adds the time-uniform bound on the detuning perturbation norm,
making the check independent of t (conservative but sound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .dde import Trajectory
from .model import (DelaySystem, SystemConfig, resonant_real_matrices,
                    upsilon_sup_norm)

__all__ = [
    "StabilityCertificate",
    "CertificateCheck",
    "EnvelopeReport",
    "assemble_lmi",
    "check_certificate",
    "search_certificate",
    "verify_envelope",
]

_NEGDEF_MARGIN = 1e-10


@dataclass(frozen=True)
class StabilityCertificate:
    """Witness (P, Q, beta) with the derived envelope constants."""

    p: np.ndarray
    q: np.ndarray
    beta: float
    tau: float
    alpha1: float = field(init=False)
    alpha2: float = field(init=False)

    def __post_init__(self):
        p_eigs = np.linalg.eigvalsh(0.5 * (self.p + self.p.T))
        q_eigs = np.linalg.eigvalsh(0.5 * (self.q + self.q.T))
        object.__setattr__(self, "alpha1", float(p_eigs[0]))
        object.__setattr__(self, "alpha2",
                           float(p_eigs[-1] + self.tau * q_eigs[-1]))

    @property
    def envelope_factor(self) -> float:
        return math.sqrt(self.alpha2 / self.alpha1)


@dataclass(frozen=True)
class CertificateCheck:
    certified: bool
    margin: float  # -lmax of the assembled block matrix


@dataclass(frozen=True)
class EnvelopeReport:
    max_ratio: float
    passed: bool


def _require_spd(m: np.ndarray, name: str):
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(m)[0] <= 0:
        raise ValueError(f"{name} must be positive definite")


def _resonant_part(sys: DelaySystem):
    """A0 of the real system: the zero-detuning (time-invariant) part."""
    if not sys.is_real:
        raise ValueError("stability tests operate on the real embedding")
    if sys.time_invariant:
        return sys.a_of_t(0.0)
    if sys.config is None:
        raise ValueError("time-varying system without attached config")
    a0, _ = resonant_real_matrices(sys.config)
    return a0


def assemble_lmi(a0: np.ndarray, b: np.ndarray, p: np.ndarray, q: np.ndarray,
                 beta: float, tau: float,
                 upsilon_bound: float = 0.0) -> np.ndarray:
    """M(P, Q) + 2 beta N(P) (+ detuning inflation), as one symmetric block
    matrix of twice the state dimension."""
    n = a0.shape[0]
    pa = p @ a0
    top_left = pa + pa.T + q + 2.0 * beta * p
    pb = p @ b
    out = np.block([[top_left, pb],
                    [pb.T, -math.exp(-2.0 * beta * tau) * q]])
    if upsilon_bound:
        lmax_p = float(np.linalg.eigvalsh(p)[-1])
        out = out + 2.0 * lmax_p * upsilon_bound * np.eye(2 * n)
    return 0.5 * (out + out.T)


def check_certificate(sys: DelaySystem, cert: StabilityCertificate,
                      detuned: bool = False) -> CertificateCheck:
    """Evaluate the stability inequality for a candidate certificate.

    ``detuned`` switches on the time-uniform detuning term; it requires the
    system to carry its configuration (for the coupling strengths).
    """
    _require_spd(cert.p, "P")
    _require_spd(cert.q, "Q")
    a0 = _resonant_part(sys)
    ups = 0.0
    if detuned:
        if sys.config is None:
            raise ValueError("detuned check requires the system config")
        ups = upsilon_sup_norm(sys.config)
    m = assemble_lmi(a0, sys.b, cert.p, cert.q, cert.beta, sys.tau, ups)
    lmax = float(np.linalg.eigvalsh(m)[-1])
    return CertificateCheck(certified=lmax < -_NEGDEF_MARGIN, margin=-lmax)


def _seed_p(a0: np.ndarray, b: np.ndarray) -> np.ndarray:
    """P from the delay-free Lyapunov equation when A0 + B is Hurwitz,
    identity otherwise."""
    a_cl = a0 + b
    if np.max(np.linalg.eigvals(a_cl).real) < -1e-9:
        p = solve_continuous_lyapunov(a_cl.T, -np.eye(a0.shape[0]))
        p = 0.5 * (p + p.T)
        if np.linalg.eigvalsh(p)[0] > 0:
            return p
    return np.eye(a0.shape[0])


def search_certificate(sys: DelaySystem,
                       detuned: bool = False) -> Optional[StabilityCertificate]:
    """Heuristic certificate search: Lyapunov-seeded P, scalar grid for Q,
    bisection (40 iterations) for the largest certified beta.  Absence of a
    certificate is a valid outcome; feasibility is sufficient, not necessary.
    """
    a0 = _resonant_part(sys)
    ups = 0.0
    if detuned:
        if sys.config is None:
            raise ValueError("detuned search requires the system config")
        ups = upsilon_sup_norm(sys.config)

    p = _seed_p(a0, sys.b)
    beta_hi_start = max(1.0, float(np.linalg.norm(a0, 2)))
    best = None

    def feasible(q_scale: float, beta: float) -> bool:
        m = assemble_lmi(a0, sys.b, p, q_scale * np.eye(a0.shape[0]),
                         beta, sys.tau, ups)
        return float(np.linalg.eigvalsh(m)[-1]) < -_NEGDEF_MARGIN

    for q_scale in np.logspace(-4, 2, 13):
        if not feasible(q_scale, 0.0):
            continue
        lo, hi = 0.0, beta_hi_start
        if feasible(q_scale, hi):
            lo = hi  # decay faster than the norm of A0: accept the cap
        else:
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if feasible(q_scale, mid):
                    lo = mid
                else:
                    hi = mid
        if lo > 0.0 and (best is None or lo > best[1]):
            best = (q_scale, lo)

    if best is None:
        return None
    q_scale, beta = best
    cert = StabilityCertificate(p=p, q=q_scale * np.eye(a0.shape[0]),
                                beta=beta, tau=sys.tau)
    if not check_certificate(sys, cert, detuned=detuned).certified:
        return None
    return cert


def verify_envelope(traj: Trajectory, cert: StabilityCertificate,
                    history_sup: float = 1.0) -> EnvelopeReport:
    """Check ||x(t)|| <= sqrt(alpha2/alpha1) exp(-beta t) |phi|* along a
    trajectory started from the canonical history (|phi|* = 1)."""
    bound = cert.envelope_factor * np.exp(-cert.beta * traj.times) * history_sup
    ratio = float(np.max(traj.norms() / bound))
    return EnvelopeReport(max_ratio=ratio, passed=ratio <= 1.0 + 1e-9)
