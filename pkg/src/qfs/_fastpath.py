"""Fused numba kernels for the hot simulation case: three levels, one
waveguide, zero detunings.  The two-photon block dominates the state, so the
Runge-Kutta stages evaluate it with combined read-modify-write loops instead
of separate stage-preparation passes.  Results are identical to the generic
numpy path (same arithmetic, same order within each row)."""

import numpy as np

try:
    import numba
    from numba import njit, prange

    AVAILABLE = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    AVAILABLE = False

if AVAILABLE:

    @njit(cache=True, parallel=True, fastmath=True)
    def pair_stage(y_s, k_s, coef, phi2c, out_s, sg, detun, g):
        """out_s = F_pair(y_s + coef * k_s, phi2c); sg = (y_s + coef*k_s) @ g.

        F_pair is the two-photon block of the right-hand side:
        -i (D_p + D_q) S + i (g_q phi2_p + g_p phi2_q).
        """
        m = g.shape[0]
        for p in prange(m):
            dp = detun[p]
            f2p = phi2c[p]
            acc = 0.0 + 0.0j
            base = p * m
            for q in range(m):
                s = y_s[base + q] + coef * k_s[base + q]
                out_s[base + q] = -1j * (dp + detun[q]) * s \
                    + 1j * (g[q] * f2p + g[p] * phi2c[q])
                acc += s * g[q]
            sg[p] = acc

    @njit(cache=True, parallel=True, fastmath=True)
    def pair_stage0(y_s, phi2c, out_s, sg, detun, g):
        """First stage: out_s = F_pair(y_s, phi2c); sg = y_s @ g."""
        m = g.shape[0]
        for p in prange(m):
            dp = detun[p]
            f2p = phi2c[p]
            acc = 0.0 + 0.0j
            base = p * m
            for q in range(m):
                s = y_s[base + q]
                out_s[base + q] = -1j * (dp + detun[q]) * s \
                    + 1j * (g[q] * f2p + g[p] * phi2c[q])
                acc += s * g[q]
            sg[p] = acc

    @njit(cache=True, parallel=True, fastmath=True)
    def pair_final(y_s, k1, k2, k3, coef, phi2c, sg, detun, g, h6):
        """Fourth stage fused with the Runge-Kutta combination:
        k4 = F_pair(y_s + coef k3, phi2c) evaluated in registers, then
        y_s += h/6 (k1 + 2 (k2 + k3) + k4).  sg gets (y_s + coef k3) @ g."""
        m = g.shape[0]
        for p in prange(m):
            dp = detun[p]
            f2p = phi2c[p]
            acc = 0.0 + 0.0j
            base = p * m
            for q in range(m):
                i = base + q
                s = y_s[i] + coef * k3[i]
                acc += s * g[q]
                k4 = -1j * (dp + detun[q]) * s \
                    + 1j * (g[q] * f2p + g[p] * phi2c[q])
                y_s[i] += h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4)
            sg[p] = acc

else:  # pragma: no cover
    pair_stage = None
    pair_stage0 = None
    pair_final = None
