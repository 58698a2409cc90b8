"""Laplace-domain analysis of the reduced delay system.

Covers the closed-form three-level solutions (resonant, short-delay generic,
long-delay), final-value predictions, the dark-state criterion for detuned
three-level systems, and the characteristic quasi-polynomial with a
pseudospectral-plus-Newton rightmost-root solver.

The characteristic determinant is evaluated in its factored form

    q(s) = (s d(s) + gamma_{N-1}^2) * prod_{j=2}^{N-1} (d(s)^2 + j gamma_{N-j}^2),

with d(s) = s + kappa (1 - exp(i delta0 tau) exp(-s tau)).  Each factor is the
characteristic function of one consecutive level pair; for N = 2 the product
is the exact determinant of the reduced system.  The real state-space form
squares every factor, so roots are reported once with their sign partners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SystemConfig

__all__ = [
    "REGIMES",
    "analytic_three_level",
    "final_values",
    "FinalValues",
    "detuned_dark_state_check",
    "DarkStateResult",
    "QuasiPolynomial",
    "rightmost_roots",
    "RootResult",
    "residue_inverse_laplace",
]

REGIMES = ("short_delay_resonant", "short_delay_generic", "long_delay")

_RESONANCE_TOL = 1e-9
_SHORT_DELAY_LIMIT = 0.05


def _distance_to_multiple(x: float, period: float) -> float:
    r = math.fmod(x, period)
    if r < 0:
        r += period
    return min(r, period - r)


def is_resonant_phase(cfg: SystemConfig, tol: float = _RESONANCE_TOL) -> bool:
    """True when delta0 * tau is a multiple of 2 pi (within tol)."""
    return _distance_to_multiple(cfg.delta0 * cfg.tau, 2.0 * math.pi) < tol


# ---------------------------------------------------------------------------
# residue-based inverse Laplace for rational transfer functions
# ---------------------------------------------------------------------------

def residue_inverse_laplace(num: Sequence[complex], den: Sequence[complex],
                            t: np.ndarray) -> np.ndarray:
    """Invert num(s)/den(s) (proper rational, den monic-izable) by residue
    summation over the companion-matrix roots of den.

    Near-repeated roots (separation below 1e-6 of the coefficient scale) are
    handled with confluent residues of a double root.
    """
    t = np.asarray(t, dtype=float)
    den = np.asarray(den, dtype=complex)
    num = np.asarray(num, dtype=complex)
    roots = np.roots(den)
    lead = den[0]
    scale = max(1.0, float(np.max(np.abs(roots))))

    def numval(s):
        return np.polyval(num, s)

    used = np.zeros(len(roots), dtype=bool)
    out = np.zeros_like(t, dtype=complex)
    for i, r in enumerate(roots):
        if used[i]:
            continue
        partners = [k for k in range(i + 1, len(roots))
                    if not used[k] and abs(roots[k] - r) < 1e-6 * scale]
        if not partners:
            dprime = np.polyval(np.polyder(den), r)
            out += numval(r) / dprime * np.exp(r * t)
            used[i] = True
        else:
            # double root r0 (average), remaining simple roots factored out
            k = partners[0]
            r0 = 0.5 * (r + roots[k])
            used[i] = used[k] = True
            others = [roots[j] for j in range(len(roots)) if j not in (i, k)]
            def qval(s):
                v = lead
                for ro in others:
                    v = v * (s - ro)
                return v
            def qderiv(s):
                eps = 1e-7 * scale
                return (qval(s + eps) - qval(s - eps)) / (2 * eps)
            def nderiv(s):
                return np.polyval(np.polyder(num), s)
            bcoef = numval(r0) / qval(r0)
            acoef = (nderiv(r0) * qval(r0) - numval(r0) * qderiv(r0)) \
                / qval(r0) ** 2
            out += (acoef + bcoef * t) * np.exp(r0 * t)
    return out


# ---------------------------------------------------------------------------
# three-level closed forms
# ---------------------------------------------------------------------------

def _require_three_level(cfg: SystemConfig):
    if cfg.n_levels != 3:
        raise ValueError("this analysis is specific to three-level systems")


def _cubic_transfer(cfg: SystemConfig, kappa_eff: complex):
    """Numerator/denominator coefficient arrays of the three transfer
    functions C0, C11, C22 with the cubic denominator
    s^3 + 2 k s^2 + (g1^2 + g2^2 + k^2) s + g2^2 k."""
    g1, g2 = cfg.gamma
    k = kappa_eff
    den = [1.0, 2.0 * k, g1 ** 2 + g2 ** 2 + k ** 2, g2 ** 2 * k]
    num_c0 = [1.0, 2.0 * k, g1 ** 2 + k ** 2]
    num_c11 = [1j * g2, 1j * g2 * k]
    num_c22 = [-g1 * g2]
    return den, num_c0, num_c11, num_c22


def analytic_three_level(cfg: SystemConfig, regime: str, t) -> tuple:
    """Closed-form (c0, c11, c22) for the three-level cavity subsystem.

    ``short_delay_resonant`` requires delta0*tau = 2 n pi and zero detunings
    and returns the exact trigonometric solution.  ``short_delay_generic``
    inverts the cubic transfer functions with the complex effective rate
    kappa (1 - exp(i delta0 tau)); ``long_delay`` uses the plain rate kappa
    (pre-delay window, the delayed term has not yet acted).
    """
    _require_three_level(cfg)
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    t = np.asarray(t, dtype=float)
    g1, g2 = cfg.gamma

    if regime == "short_delay_resonant":
        if not cfg.resonant:
            raise ValueError("resonant regime requires zero detunings")
        if not is_resonant_phase(cfg):
            raise ValueError("resonant regime requires delta0*tau = 2 n pi")
        if cfg.kappa * cfg.tau >= _SHORT_DELAY_LIMIT:
            raise ValueError("short-delay regime requires kappa*tau < 0.05")
        om = math.hypot(g1, g2)
        c0 = (g1 ** 2 + g2 ** 2 * np.cos(om * t)) / om ** 2
        c11 = 1j * g2 / om * np.sin(om * t)
        c22 = g1 * g2 / om ** 2 * (np.cos(om * t) - 1.0)
        return c0, c11, c22

    if not cfg.resonant:
        raise ValueError("transfer-function regimes require zero detunings")
    if regime == "short_delay_generic":
        if cfg.kappa * cfg.tau >= _SHORT_DELAY_LIMIT:
            raise ValueError("short-delay regime requires kappa*tau < 0.05")
        kappa_eff = cfg.kappa * (1.0 - cfg.feedback_phase)
    else:
        kappa_eff = complex(cfg.kappa)

    den, n0, n11, n22 = _cubic_transfer(cfg, kappa_eff)
    c0 = residue_inverse_laplace(n0, den, t)
    c11 = residue_inverse_laplace(n11, den, t)
    c22 = residue_inverse_laplace(n22, den, t)
    return c0, c11, c22


@dataclass(frozen=True)
class FinalValues:
    oscillatory: bool
    limits: tuple | None      # (c0, c11, c22) limits when they exist
    waveguide_photons: int


def final_values(cfg: SystemConfig) -> FinalValues:
    """Steady-state prediction for the short-delay three-level system:
    all cavity amplitudes vanish and two photons end up in the waveguide,
    unless delta0*tau = 2 n pi (or the waveguide is decoupled), in which
    case the amplitudes oscillate and the waveguide stays empty."""
    _require_three_level(cfg)
    if cfg.kappa == 0.0 or is_resonant_phase(cfg):
        return FinalValues(oscillatory=True, limits=None, waveguide_photons=0)
    return FinalValues(oscillatory=False, limits=(0.0, 0.0, 0.0),
                       waveguide_photons=2)


@dataclass(frozen=True)
class DarkStateResult:
    dark: bool
    mean: float | None


def detuned_dark_state_check(cfg: SystemConfig) -> DarkStateResult:
    """Persistent-oscillation (dark-state) test for the detuned three-level
    system: requires delta0*tau = 2 n pi and delta2/delta1 = gamma2^2/gamma1^2.
    When dark, c11 oscillates around gamma2 delta1 / (g1^2 + g2^2 + d1 d2)."""
    _require_three_level(cfg)
    g1, g2 = cfg.gamma
    d1, d2 = cfg.delta
    if not is_resonant_phase(cfg):
        return DarkStateResult(dark=False, mean=None)
    if abs(d2 * g1 ** 2 - d1 * g2 ** 2) > _RESONANCE_TOL:
        return DarkStateResult(dark=False, mean=None)
    mean = g2 * d1 / (g1 ** 2 + g2 ** 2 + d1 * d2)
    return DarkStateResult(dark=True, mean=mean)


# ---------------------------------------------------------------------------
# quasi-polynomial and rightmost roots
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuasiPolynomial:
    """Characteristic function of the resonant reduced delay system,
    held in factored (level-pair) form; see the module docstring."""

    gammas: tuple          # (gamma_1, ..., gamma_{N-1})
    kappa: float
    tau: float
    feedback_phase: complex
    n_levels: int

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "QuasiPolynomial":
        if not cfg.resonant:
            raise ValueError("the quasi-polynomial is defined for zero "
                             "detunings (time-invariant dynamics)")
        return cls(gammas=cfg.gamma, kappa=cfg.kappa, tau=cfg.tau,
                   feedback_phase=cfg.feedback_phase, n_levels=cfg.n_levels)

    def dvalue(self, s: complex) -> complex:
        """d(s) = s + kappa (1 - exp(i delta0 tau) exp(-s tau))."""
        return s + self.kappa * (1.0 - self.feedback_phase * np.exp(-s * self.tau))

    def factors(self, s: complex) -> list:
        n = self.n_levels
        d = self.dvalue(s)
        out = [s * d + self.gammas[n - 2] ** 2]
        for j in range(2, n):
            out.append(d * d + j * self.gammas[n - j - 1] ** 2)
        return out

    def det(self, s: complex) -> complex:
        v = 1.0 + 0.0j
        for f in self.factors(s):
            v = v * f
        return v

    def pair_chain_matrices(self):
        """(A, B) of the block-diagonal level-pair delay system whose
        characteristic determinant equals det(s)."""
        n = self.n_levels
        dim = 2 * (n - 1)
        a = np.zeros((dim, dim), dtype=complex)
        b = np.zeros((dim, dim), dtype=complex)
        kb = self.kappa * self.feedback_phase
        g = self.gammas
        a[0, 1] = a[1, 0] = 1j * g[n - 2]
        a[1, 1] = -self.kappa
        b[1, 1] = kb
        for j in range(2, n):
            i0 = 2 * (j - 1)
            gj = math.sqrt(j) * g[n - j - 1]
            a[i0, i0 + 1] = a[i0 + 1, i0] = 1j * gj
            a[i0, i0] = a[i0 + 1, i0 + 1] = -self.kappa
            b[i0, i0] = b[i0 + 1, i0 + 1] = kb
        return a, b


@dataclass
class RootResult:
    roots: list            # converged roots, rightmost first
    residuals: list        # |det| at each root
    non_converged: list    # seeds Newton failed to refine


def _cheb_nodes_and_diff(n: int):
    """Chebyshev points on [-1, 1] (x[0] = 1) and the differentiation matrix."""
    k = np.arange(n + 1)
    x = np.cos(np.pi * k / n)
    c = np.hstack([2.0, np.ones(n - 1), 2.0]) * (-1.0) ** k
    xm = np.tile(x, (n + 1, 1)).T
    dx = xm - xm.T
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    d -= np.diag(d.sum(axis=1))
    return x, d


def _collocation_eigenvalues(a: np.ndarray, b: np.ndarray, tau: float,
                             n_cheb: int) -> np.ndarray:
    """Pseudospectral discretization of the delay operator on [-tau, 0]:
    eigenvalues approximate the characteristic roots."""
    dim = a.shape[0]
    x, d = _cheb_nodes_and_diff(n_cheb)
    # theta = tau (x - 1) / 2 maps [-1, 1] to [-tau, 0]; d/dtheta = (2/tau) d/dx
    dth = (2.0 / tau) * d
    n_nodes = n_cheb + 1
    big = np.zeros((n_nodes * dim, n_nodes * dim), dtype=complex)
    eye = np.eye(dim)
    for i in range(1, n_nodes):
        for jn in range(n_nodes):
            big[i * dim:(i + 1) * dim, jn * dim:(jn + 1) * dim] = dth[i, jn] * eye
    big[0:dim, 0:dim] = a
    big[0:dim, (n_nodes - 1) * dim:n_nodes * dim] += b
    return np.linalg.eigvals(big)


def _holo_derivative(f, s: complex, h: float = 1e-8) -> complex:
    """Derivative of a holomorphic function by a small complex step."""
    return (f(s + 1j * h) - f(s)) / (1j * h)


def _newton_refine(f, s0: complex, tol: float = 1e-12, max_iter: int = 60):
    s = s0
    for _ in range(max_iter):
        fs = f(s)
        dfs = _holo_derivative(f, s)
        if dfs == 0:
            return s, False
        step = fs / dfs
        s = s - step
        if abs(step) < tol * max(1.0, abs(s)):
            return s, True
    return s, False


def rightmost_roots(qp: QuasiPolynomial, count: int,
                    n_cheb: int = 40) -> RootResult:
    """Approximate the ``count`` rightmost characteristic roots.

    Seeds come from pseudospectral collocation of the delay operator
    (Chebyshev nodes on [-tau, 0]); each seed is Newton-refined on the
    characteristic determinant with a complex-step derivative.  Roots are
    deduplicated within 1e-8.  Non-converged seeds are reported, never
    passed off as roots.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    a, b = qp.pair_chain_matrices()

    order = n_cheb
    for attempt in range(2):
        eigs = _collocation_eigenvalues(a, b, qp.tau, order)
        eigs = eigs[np.argsort(-eigs.real)]
        seeds = eigs[:max(3 * count, 12)]
        pre_res = [abs(qp.det(s)) for s in seeds[:count]]
        if all(r < 1e-2 for r in pre_res) or attempt == 1:
            break
        order *= 2  # residual threshold missed: double the collocation order

    roots, residuals, failed = [], [], []
    for s0 in seeds:
        s, ok = _newton_refine(qp.det, s0)
        if not ok or abs(qp.det(s)) >= 1e-8:
            failed.append(complex(s0))
            continue
        if any(abs(s - r) < 1e-8 for r in roots):
            continue
        roots.append(complex(s))
        residuals.append(abs(qp.det(s)))

    idx = np.argsort([-r.real for r in roots])
    roots = [roots[i] for i in idx][:count]
    residuals = [residuals[i] for i in idx][:count]
    return RootResult(roots=roots, residuals=residuals, non_converged=failed)
