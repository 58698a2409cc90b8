import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import solve_continuous_lyapunov

from qfs.dde import integrate_delay
from qfs.model import (build_cavity_delay_system, build_real_embedding,
                       zero_delay_variant)
from qfs.stability import (StabilityCertificate, assemble_lmi,
                           check_certificate, search_certificate,
                           verify_envelope)

from conftest import make_config, random_config


def _real_system(cfg, drop_delay=False):
    sys_c = build_cavity_delay_system(cfg)
    if drop_delay:
        sys_c = zero_delay_variant(sys_c)
    return build_real_embedding(sys_c)


def test_certificate_envelope_constants():
    p = np.diag([2.0, 2.0, 5.0, 5.0])
    q = np.eye(4)
    cert = StabilityCertificate(p=p, q=q, beta=0.1, tau=0.5)
    assert cert.alpha1 == pytest.approx(2.0)
    assert cert.alpha2 == pytest.approx(5.0 + 0.5 * 1.0)
    assert cert.envelope_factor == pytest.approx(math.sqrt(5.5 / 2.0))


def test_assembled_block_matrix_symmetric(rng):
    cfg = random_config(rng, resonant=True)
    sys = _real_system(cfg)
    a0 = sys.a_of_t(0.0)
    p = np.eye(a0.shape[0]) + 0.1 * np.diag(rng.uniform(size=a0.shape[0]))
    q = np.eye(a0.shape[0])
    m = assemble_lmi(a0, sys.b, p, q, 0.05, sys.tau)
    assert_allclose(m, m.T, atol=1e-14)


def test_check_rejects_indefinite_matrices():
    cfg = make_config(n_levels=2, gamma=(0.3,))
    sys = _real_system(cfg)
    bad = np.diag([1.0, -1.0, 1.0, 1.0])
    cert = StabilityCertificate(p=np.eye(4), q=np.eye(4), beta=0.1,
                                tau=sys.tau)
    with pytest.raises(ValueError):
        check_certificate(sys, StabilityCertificate(p=bad, q=np.eye(4),
                                                    beta=0.1, tau=sys.tau))
    with pytest.raises(ValueError):
        check_certificate(sys, StabilityCertificate(p=np.eye(4), q=bad,
                                                    beta=0.1, tau=sys.tau))
    assert isinstance(check_certificate(sys, cert).certified, bool)


def test_decoupled_waveguide_never_certified():
    # kappa = 0 leaves a purely oscillatory system; the assembled matrix has
    # a positive-definite top block for any admissible (P, Q, beta)
    cfg = make_config(n_levels=2, gamma=(0.5,), g0=0.0)
    sys = _real_system(cfg)
    res = check_certificate(sys, StabilityCertificate(
        p=np.eye(4), q=np.eye(4), beta=0.01, tau=sys.tau))
    assert not res.certified and res.margin < 0


def test_resonant_phase_never_certified(rng):
    # delta0*tau = 2 n pi: the system oscillates, so no (P, Q, beta) passes
    cfg = make_config(n_levels=2, gamma=(0.3,), g0=1.0, delta0=50.0,
                      phase_multiple_pi=2.0)
    sys = _real_system(cfg)
    for _ in range(100):
        w = rng.normal(size=(4, 4))
        p = w @ w.T + 0.1 * np.eye(4)
        w = rng.normal(size=(4, 4))
        q = w @ w.T + 0.1 * np.eye(4)
        beta = float(rng.uniform(1e-3, 1.0))
        cert = StabilityCertificate(p=p, q=q, beta=beta, tau=sys.tau)
        assert not check_certificate(sys, cert).certified
    assert search_certificate(sys) is None


def test_delay_free_lyapunov_baseline_certified():
    # B = 0 with a Hurwitz drift: P from the Lyapunov equation, Q small
    cfg = make_config(n_levels=2, gamma=(0.3,), g0=1.0, delta0=50.0,
                      phase_multiple_pi=1.0)
    sys = _real_system(cfg, drop_delay=True)
    a0 = sys.a_of_t(0.0)
    p = solve_continuous_lyapunov(a0.T, -np.eye(4))
    cert = StabilityCertificate(p=0.5 * (p + p.T), q=1e-3 * np.eye(4),
                                beta=0.0, tau=sys.tau)
    assert check_certificate(sys, cert).certified


def test_search_certifies_delay_free_variant():
    cfg = make_config(n_levels=2, gamma=(0.3,), g0=1.0, delta0=50.0,
                      phase_multiple_pi=1.0)
    sys = _real_system(cfg, drop_delay=True)
    cert = search_certificate(sys)
    assert cert is not None and cert.beta > 0
    traj = integrate_delay(sys, None, t_end=60 * cfg.tau, steps_per_delay=64)
    rep = verify_envelope(traj, cert)
    assert rep.passed


def test_certified_beta_monotone():
    cfg = make_config(n_levels=2, gamma=(0.3,), g0=1.0, delta0=50.0,
                      phase_multiple_pi=1.0)
    sys = _real_system(cfg, drop_delay=True)
    cert = search_certificate(sys)
    assert cert is not None
    for frac in (0.75, 0.5, 0.25, 0.05):
        smaller = StabilityCertificate(p=cert.p, q=cert.q,
                                       beta=frac * cert.beta, tau=sys.tau)
        assert check_certificate(sys, smaller).certified


def test_detuned_check_reduces_to_resonant_at_zero_detuning():
    cfg = make_config(n_levels=2, gamma=(0.3,), g0=1.0, delta0=50.0,
                      phase_multiple_pi=1.0)
    sys = _real_system(cfg)
    cert = StabilityCertificate(p=np.eye(4), q=0.1 * np.eye(4), beta=0.01,
                                tau=sys.tau)
    plain = check_certificate(sys, cert, detuned=False)
    inflated = check_certificate(sys, cert, detuned=True)
    assert inflated.margin == pytest.approx(plain.margin, abs=1e-12)


def test_detuning_shrinks_the_margin():
    cfg = make_config(n_levels=2, gamma=(1.0,), delta=(1.0,), g0=1.0,
                      delta0=50.0, phase_multiple_pi=1.0)
    sys = _real_system(cfg)
    cert = StabilityCertificate(p=np.eye(4), q=0.1 * np.eye(4), beta=0.01,
                                tau=sys.tau)
    plain = check_certificate(sys, cert, detuned=False)
    inflated = check_certificate(sys, cert, detuned=True)
    assert inflated.margin < plain.margin - 1.0  # 2 lmax(P) ||Y|| = 4


def test_search_and_envelope_random_sweep(rng):
    # certified => the trajectory envelope holds; delay-free variants give
    # the non-vacuous certified cases
    certified = 0
    for _ in range(50):
        cfg = random_config(rng, resonant=True)
        drop = bool(rng.integers(0, 2))
        sys = _real_system(cfg, drop_delay=drop)
        cert = search_certificate(sys)
        if cert is None:
            continue
        certified += 1
        traj = integrate_delay(sys, None, t_end=20 * cfg.tau,
                               steps_per_delay=32)
        assert verify_envelope(traj, cert).passed
    assert certified >= 5


def test_envelope_negative_control():
    # an oscillating resonant run must violate a fabricated decay envelope
    cfg = make_config(n_levels=2, gamma=(0.3,), g0=1.0, delta0=50.0,
                      phase_multiple_pi=2.0)
    sys = _real_system(cfg)
    traj = integrate_delay(sys, None, t_end=80 * cfg.tau, steps_per_delay=32)
    fake = StabilityCertificate(p=np.eye(4), q=np.eye(4), beta=0.3,
                                tau=sys.tau)
    assert not verify_envelope(traj, fake).passed


def test_envelope_beta_zero_on_nonincreasing_norm():
    cfg = make_config(n_levels=3, gamma=(0.3, 0.3), g0=0.2, delta0=50.0,
                      phase_multiple_pi=3.0)
    sys = _real_system(cfg)
    traj = integrate_delay(sys, None, t_end=40 * cfg.tau, steps_per_delay=32)
    cert = StabilityCertificate(p=np.eye(6), q=np.eye(6), beta=0.0,
                                tau=sys.tau)
    rep = verify_envelope(traj, cert)
    assert rep.max_ratio <= cert.envelope_factor + 1e-9
    assert rep.passed