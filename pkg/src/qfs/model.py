"""Physical configuration, basis enumeration, and matrix builders.

Everything downstream (integrators, spectral analysis, stability tests,
mode-resolved simulation) consumes the types defined here.  All types are
immutable after construction; the builders are pure functions.

Conventions used throughout the package:

* hbar = 1, all couplings and detunings are angular frequencies.
* ``kappa = g0**2 / (4 * field_speed)`` is the effective cavity decay rate
  into the waveguide; it is always derived from ``g0``, never stored.
* The ladder couplings enter the amplitude equations directly as ``gamma[n]``
  (no photon-number enhancement factors).  This is the convention of the
  worked three-level system, whose closed-form solutions, transfer functions
  and final-value results the acceptance suite checks against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations_with_replacement
from typing import Callable, Optional

import numpy as np

__all__ = [
    "SystemConfig",
    "WaveguideArrayConfig",
    "BasisIndex",
    "DelaySystem",
    "build_cavity_delay_system",
    "build_real_embedding",
    "zero_delay_variant",
    "complex_from_real",
    "real_from_complex",
    "rotation_block",
    "feedback_rotation",
    "resonant_real_matrices",
    "upsilon_matrix",
    "upsilon_norm",
    "upsilon_norm_bruteforce",
    "upsilon_sup_norm",
    "build_gw_matrix",
    "waveguide_compositions",
    "count_weak_compositions",
]


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemConfig:
    """Parameters of the atom/cavity/waveguide network.

    ``gamma[n]`` couples atomic levels ``n`` and ``n+1`` to the cavity mode
    (n = 0 .. N-2), ``delta[n]`` is the corresponding atom-cavity detuning.
    ``g0`` is the cavity-waveguide coupling amplitude, ``delta0`` the central
    mode frequency and ``tau`` the round-trip delay of the feedback loop.
    """

    n_levels: int
    gamma: tuple
    delta: tuple
    g0: float
    delta0: float
    tau: float
    field_speed: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(self, "delta", tuple(float(d) for d in self.delta))
        if self.n_levels < 2:
            raise ValueError("n_levels must be >= 2")
        if len(self.gamma) != self.n_levels - 1:
            raise ValueError("gamma must have n_levels - 1 entries")
        if len(self.delta) != self.n_levels - 1:
            raise ValueError("delta must have n_levels - 1 entries")
        values = (*self.gamma, *self.delta, self.g0, self.delta0,
                  self.tau, self.field_speed)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("all parameters must be finite")
        if any(g <= 0 for g in self.gamma):
            raise ValueError("gamma entries must be positive")
        if self.g0 < 0:
            raise ValueError("g0 must be non-negative")
        if self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.field_speed <= 0:
            raise ValueError("field_speed must be positive")

    @property
    def kappa(self) -> float:
        """Effective cavity-waveguide decay rate g0^2 / (4 c)."""
        return self.g0 ** 2 / (4.0 * self.field_speed)

    @property
    def feedback_phase(self) -> complex:
        """Round-trip phase factor exp(i delta0 tau)."""
        return np.exp(1j * self.delta0 * self.tau)

    @property
    def resonant(self) -> bool:
        return all(d == 0.0 for d in self.delta)

    def gamma_for_transition(self, n: int) -> float:
        """gamma_n for the |n-1> <-> |n> transition, n = 1 .. N-1."""
        return self.gamma[n - 1]

    def delta_for_transition(self, n: int) -> float:
        return self.delta[n - 1]


@dataclass(frozen=True)
class WaveguideArrayConfig:
    """Parallel waveguide array: nearest-neighbour couplings K and
    per-waveguide propagation constants beta.  Coupling symmetry
    K[w][w+1] = K[w+1][w] is enforced by storing each coupling once."""

    n_waveguides: int
    couplings: tuple
    propagation_constants: tuple

    def __post_init__(self):
        object.__setattr__(self, "couplings",
                           tuple(float(k) for k in self.couplings))
        object.__setattr__(self, "propagation_constants",
                           tuple(float(b) for b in self.propagation_constants))
        if self.n_waveguides < 1:
            raise ValueError("n_waveguides must be >= 1")
        if len(self.couplings) != self.n_waveguides - 1:
            raise ValueError("couplings must have n_waveguides - 1 entries")
        if len(self.propagation_constants) != self.n_waveguides:
            raise ValueError("propagation_constants must have one entry "
                             "per waveguide")
        values = (*self.couplings, *self.propagation_constants)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("all parameters must be finite")


def single_waveguide_array() -> WaveguideArrayConfig:
    """Degenerate W = 1 array (no couplings, beta = 0)."""
    return WaveguideArrayConfig(1, (), (0.0,))


# ---------------------------------------------------------------------------
# basis indices
# ---------------------------------------------------------------------------

def waveguide_compositions(n_photons: int, n_waveguides: int):
    """All distributions of n_photons over n_waveguides (weak compositions)."""
    if n_waveguides < 1:
        raise ValueError("n_waveguides must be >= 1")
    if n_photons == 0:
        return [(0,) * n_waveguides]
    out = []
    for split in combinations_with_replacement(range(n_waveguides), n_photons):
        comp = [0] * n_waveguides
        for w in split:
            comp[w] += 1
        out.append(tuple(comp))
    return out


def count_weak_compositions(n_photons: int, n_waveguides: int) -> int:
    return math.comb(n_photons + n_waveguides - 1, n_waveguides - 1)


@dataclass(frozen=True)
class BasisIndex:
    """Index of an eigenstate |atom level N-1-j, m cavity photons, waveguide
    content>.  ``modes`` holds one sorted tuple of mode indices per waveguide
    (all empty for the cavity-only subsystem)."""

    j: int
    m: int
    modes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "modes",
                           tuple(tuple(sorted(ms)) for ms in self.modes))
        if self.j < 0 or self.m < 0:
            raise ValueError("j and m must be non-negative")
        if self.m > self.j:
            raise ValueError("cavity photon count m cannot exceed j")
        n_wg = sum(len(ms) for ms in self.modes)
        if n_wg != self.j - self.m:
            raise ValueError("waveguide photon count must equal j - m")

    @property
    def waveguide_photons(self) -> int:
        return self.j - self.m

    def atom_level(self, n_levels: int) -> int:
        if self.j > n_levels - 1:
            raise ValueError("j exceeds the number of available excitations")
        return n_levels - 1 - self.j


# ---------------------------------------------------------------------------
# the reduced linear delay system
# ---------------------------------------------------------------------------

def _canonical_history(dim: int, dtype=complex) -> Callable[[float], np.ndarray]:
    e0 = np.zeros(dim, dtype=dtype)
    e0[0] = 1.0
    return lambda t: e0.copy()


@dataclass(frozen=True)
class DelaySystem:
    """Linear system  x'(t) = A(t) x(t) + B x(t - tau)  with one delay.

    ``history`` supplies the initial segment on [-tau, 0]; the canonical
    choice is x = e0 (atom fully excited, everything else empty).
    """

    dim: int
    a_of_t: Callable[[float], np.ndarray]
    b: np.ndarray
    tau: float
    history: Callable[[float], np.ndarray]
    is_real: bool = False
    time_invariant: bool = False
    config: Optional[SystemConfig] = None

    @property
    def real_dim(self) -> int:
        return self.dim if self.is_real else 2 * self.dim


def build_cavity_delay_system(cfg: SystemConfig) -> DelaySystem:
    """Reduced N-dimensional complex system for the cavity-only amplitudes
    X = [c_0, c^1_1, ..., c^{N-1}_{N-1}].

    A(t) is tridiagonal: zero first diagonal entry, -kappa elsewhere, and
    i gamma_{N-j} exp(-/+ i delta_{N-j} t) on the sub/super diagonal of row j.
    B is diagonal with kappa*exp(i delta0 tau) on rows 1 .. N-1.
    """
    n = cfg.n_levels
    kappa = cfg.kappa
    phase = cfg.feedback_phase

    gam = np.array([cfg.gamma_for_transition(n - j) for j in range(1, n)])
    det = np.array([cfg.delta_for_transition(n - j) for j in range(1, n)])

    b = np.zeros((n, n), dtype=complex)
    for j in range(1, n):
        b[j, j] = kappa * phase

    time_invariant = cfg.resonant

    def a_of_t(t: float) -> np.ndarray:
        a = np.zeros((n, n), dtype=complex)
        for j in range(1, n):
            a[j, j - 1] = 1j * gam[j - 1] * np.exp(-1j * det[j - 1] * t)
            a[j - 1, j] = 1j * gam[j - 1] * np.exp(1j * det[j - 1] * t)
            a[j, j] = -kappa
        return a

    return DelaySystem(dim=n, a_of_t=a_of_t, b=b, tau=cfg.tau,
                       history=_canonical_history(n), is_real=False,
                       time_invariant=time_invariant, config=cfg)


def zero_delay_variant(sys: DelaySystem) -> DelaySystem:
    """Copy of the system with the delayed term removed (B = 0)."""
    return replace(sys, b=np.zeros_like(sys.b))


def real_from_complex(m: np.ndarray) -> np.ndarray:
    """Exact real embedding: each complex entry z becomes the 2x2 block
    [[Re z, -Im z], [Im z, Re z]] acting on interleaved (re, im) pairs."""
    n = m.shape[0]
    out = np.zeros((2 * n, 2 * n))
    re, im = m.real, m.imag
    out[0::2, 0::2] = re
    out[0::2, 1::2] = -im
    out[1::2, 0::2] = im
    out[1::2, 1::2] = re
    return out


def complex_from_real(states: np.ndarray) -> np.ndarray:
    """Reconstruct complex vectors from interleaved (re, im) components."""
    arr = np.asarray(states)
    return arr[..., 0::2] + 1j * arr[..., 1::2]


def build_real_embedding(sys: DelaySystem) -> DelaySystem:
    """2N-dimensional real system equivalent to the complex one.

    For any solution, the interleaved (re, im) pairs reconstruct the complex
    solution exactly; the embedding of the matrices is entrywise, so no
    structure of A(t) is assumed.
    """
    if sys.is_real:
        raise ValueError("system is already real")

    b_real = real_from_complex(sys.b)

    def a_real(t: float) -> np.ndarray:
        return real_from_complex(sys.a_of_t(t))

    def history_real(t: float) -> np.ndarray:
        h = sys.history(t)
        out = np.empty(2 * sys.dim)
        out[0::2] = h.real
        out[1::2] = h.imag
        return out

    return DelaySystem(dim=2 * sys.dim, a_of_t=a_real, b=b_real, tau=sys.tau,
                       history=history_real, is_real=True,
                       time_invariant=sys.time_invariant, config=sys.config)


# ---------------------------------------------------------------------------
# rotation blocks of the real form
# ---------------------------------------------------------------------------

_R = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation_block(delta: float, t: float) -> np.ndarray:
    """R_j(t) = [[sin(d t), -cos(d t)], [cos(d t), sin(d t)]]."""
    s, c = np.sin(delta * t), np.cos(delta * t)
    return np.array([[s, -c], [c, s]])


def feedback_rotation(cfg: SystemConfig) -> np.ndarray:
    """P(tau) = [[cos(delta0 tau), -sin], [sin, cos]];  B~ = kappa P(tau)
    on every 2x2 diagonal block except the first."""
    a = cfg.delta0 * cfg.tau
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


def resonant_real_matrices(cfg: SystemConfig):
    """(A0, B) of the real embedding with all detunings set to zero.

    A0 is block-tridiagonal with gamma_{N-j} R blocks (R the quarter-turn
    rotation) and -kappa I_2 diagonal blocks; it is the time-invariant part
    that the Lyapunov-Krasovskii tests operate on.
    """
    resonant = SystemConfig(cfg.n_levels, cfg.gamma, (0.0,) * (cfg.n_levels - 1),
                            cfg.g0, cfg.delta0, cfg.tau, cfg.field_speed)
    sys_c = build_cavity_delay_system(resonant)
    return real_from_complex(sys_c.a_of_t(0.0)), real_from_complex(sys_c.b)


# ---------------------------------------------------------------------------
# the detuning perturbation Upsilon and its induced 2-norm
# ---------------------------------------------------------------------------

def upsilon_matrix(cfg: SystemConfig, t: float) -> np.ndarray:
    """Assembled detuning perturbation Upsilon(t) of the real form.

    Block-tridiagonal with sqrt(j) gamma_{N-j} (R_{N-j}(t) - R) blocks; the
    super-diagonal blocks are the exact embedding counterparts (negative
    transposes) so that Upsilon embeds a complex matrix.
    """
    n = cfg.n_levels
    out = np.zeros((2 * n, 2 * n))
    for j in range(1, n):
        g = math.sqrt(j) * cfg.gamma_for_transition(n - j)
        rt = rotation_block(cfg.delta_for_transition(n - j), t) - _R
        lo = g * rt
        r0, c0 = 2 * j, 2 * (j - 1)
        out[r0:r0 + 2, c0:c0 + 2] = lo
        out[c0:c0 + 2, r0:r0 + 2] = -lo.T
    return out


def upsilon_norm(cfg: SystemConfig, t: float) -> float:
    """Closed-form induced 2-norm of Upsilon(t):
    max_j sqrt(sum_{i=j}^{j+1} 2 (N-i) gamma_i^2 (1 - cos(delta_i t)))."""
    n = cfg.n_levels
    best = 0.0
    for j in range(1, n):
        acc = 0.0
        for i in (j, j + 1):
            if 1 <= i <= n - 1:
                acc += 2.0 * (n - i) * cfg.gamma[i - 1] ** 2 \
                    * (1.0 - np.cos(cfg.delta[i - 1] * t))
        best = max(best, acc)
    return math.sqrt(best)


def upsilon_norm_bruteforce(cfg: SystemConfig, t: float) -> float:
    """Largest singular value of the explicitly assembled Upsilon(t)."""
    return float(np.linalg.norm(upsilon_matrix(cfg, t), ord=2))


def upsilon_sup_norm(cfg: SystemConfig) -> float:
    """Time-uniform bound: the closed form at the worst case cos = -1,
    max_j sqrt(sum 2 (N-i) gamma_i^2 * 2)  (zero-detuning terms drop out)."""
    n = cfg.n_levels
    best = 0.0
    for j in range(1, n):
        acc = 0.0
        for i in (j, j + 1):
            if 1 <= i <= n - 1 and cfg.delta[i - 1] != 0.0:
                acc += 4.0 * (n - i) * cfg.gamma[i - 1] ** 2
        best = max(best, acc)
    return math.sqrt(best)


# ---------------------------------------------------------------------------
# waveguide array generator
# ---------------------------------------------------------------------------

def build_gw_matrix(wcfg: WaveguideArrayConfig) -> np.ndarray:
    """Real symmetric tridiagonal G_W: diagonal beta_w, off-diagonal
    K_{w,w+1}.  The single-excitation amplitudes obey C' = i G_W C."""
    w = wcfg.n_waveguides
    out = np.zeros((w, w))
    out[np.arange(w), np.arange(w)] = wcfg.propagation_constants
    for i, k in enumerate(wcfg.couplings):
        out[i, i + 1] = k
        out[i + 1, i] = k
    return out
