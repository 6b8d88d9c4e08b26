import math

import numpy as np
import pytest

from conftest import near_uniform_joint
from ibadmm.admm import GRADIENT_PROFILE, AdmmConfig, admm_run
from ibadmm.certificate import (DEFAULT_ALPHA_GRID, compute_certificate, lyapunov_trace,
                                monotonicity_report, rho1, rho2)
from ibadmm.errors import PositivityError, TraceIncompleteError, ValidationError
from ibadmm.objective import ObjectiveParams
from ibadmm.prob_core import JointXY
from ibadmm.records import IterationTrace


def cfg(beta, omega, c, eps):
    return AdmmConfig(ObjectiveParams(beta, c, omega), eps_floor=eps)


def uniform_joint(n=3):
    return JointXY(np.full((n, n), 1.0 / n), np.full(n, 1.0 / n))


def trace_of(pz, mu):
    t = IterationTrace(1)
    for k, (p, m) in enumerate(zip(pz, mu)):
        t.append(k + 1, 0.0, 0.0, 0.0, 0.0, p, m)
    return t


def test_uniform_instance_feasible():
    cert = compute_certificate(uniform_joint(), cfg(2.0, 4.0, 10.0, 0.05))
    assert cert.kappa == 0.0 and cert.gamma_beta == -1.0
    assert cert.feasible
    assert np.all(cert.rho1 > 0) and np.all(cert.rho2 > 0)
    assert cert.feasible_alphas.size == DEFAULT_ALPHA_GRID.size


def test_reference_instance_infeasible(joint):
    cert = compute_certificate(joint, cfg(5.0, 4.0, 32.0, 1e-3))
    assert cert.kappa == pytest.approx(361.0, rel=1e-12)
    assert cert.gamma_beta == pytest.approx(1804999.0, rel=1e-12)
    assert not cert.feasible and cert.diagnostic
    assert cert.rho3 == pytest.approx(8.0 + 16.0)


def test_eta_and_threshold(joint):
    cert = compute_certificate(joint, cfg(2.0, 4.0, 32.0, 1e-3))
    assert cert.eta_z == 5.0
    assert cert.alpha_threshold == pytest.approx(0.9, abs=1e-15)


def test_nonpositive_eta_reported():
    cert = compute_certificate(uniform_joint(), cfg(0.5, 0.0, 10.0, 0.05))
    assert cert.eta_z == -0.5
    assert not cert.feasible and math.isnan(cert.alpha_threshold)
    assert "eta_z" in cert.diagnostic
    assert cert.to_json()["alpha_threshold"] is None


def test_zero_likelihood_rejected():
    with pytest.raises(PositivityError):
        compute_certificate(JointXY(np.array([[1.0, 0.5], [0.0, 0.5]]), [0.5, 0.5]), cfg(2.0, 4.0, 10.0, 0.05))


def test_bad_alpha_grid(joint):
    for grid in ([0.0, 0.5], [0.5, 1.0], []):
        with pytest.raises(ValidationError):
            compute_certificate(joint, cfg(2.0, 4.0, 10.0, 0.05), grid)


@pytest.mark.parametrize("gamma", [0.5, 3.0, 1e6])
def test_rho_monotone_in_alpha(gamma):
    a = np.linspace(0.001, 0.999, 999)
    for c in (1.0, 10.0, 98.0):
        assert np.all(np.diff(rho1(a, gamma, 5.0, c)) <= 0)
        assert np.all(np.diff(rho2(a, gamma, c)) >= 0)


@pytest.mark.parametrize("gamma", [-1.0, -0.3, 0.0])
def test_nonpositive_gamma_always_feasible(gamma):
    a = np.linspace(0.001, 0.999, 999)
    for c in (0.1, 1.0, 10.0, 1e3):
        assert np.all(rho1(a, gamma, 5.0, c) >= 0) and np.all(rho2(a, gamma, c) >= 0)


def test_permutation_invariant(joint):
    perm = JointXY(joint.p_y_given_x[[2, 0, 1]][:, [1, 2, 0]], joint.p_x[[1, 2, 0]])
    a = compute_certificate(joint, cfg(3.0, 4.0, 32.0, 1e-2))
    b = compute_certificate(perm, cfg(3.0, 4.0, 32.0, 1e-2))
    assert a.kappa == b.kappa and a.gamma_beta == b.gamma_beta
    assert np.array_equal(a.rho1, b.rho1) and np.array_equal(a.rho2, b.rho2)


def test_certificate_json(joint):
    doc = compute_certificate(uniform_joint(), cfg(2.0, 4.0, 10.0, 0.05)).to_json()
    assert doc["feasible"] is True
    assert doc["feasible_alpha_range"] == [0.005, 0.995]
    assert len(doc["rho_profile"]) == 101


def test_lyapunov_examples():
    p = np.array([0.2, 0.8])
    m = np.array([1.0, -1.0])
    star = {"p_z": p, "mu_z": m}
    v = lyapunov_trace(trace_of([p], [m]), star, 3.0)
    assert v.tolist() == [0.0]
    # |dp|^2 = 1, |dmu|^2 = 4, c = 2 -> 1 + 1
    v = lyapunov_trace(trace_of([p + [1.0, 0.0]], [m + [0.0, 2.0]]), star, 2.0)
    assert v[0] == pytest.approx(2.0, abs=1e-15)
    v = lyapunov_trace(trace_of([p + 0.1, p], [m, m + 0.1]), star, 5.0)
    assert np.all(v > 0)


def test_lyapunov_errors():
    p, m = np.array([0.5, 0.5]), np.zeros(2)
    with pytest.raises(TraceIncompleteError):
        lyapunov_trace(IterationTrace(1), {"p_z": p, "mu_z": m}, 1.0)
    with pytest.raises(TraceIncompleteError):
        lyapunov_trace(trace_of([p], [m]), {"p_z": p}, 1.0)
    with pytest.raises(ValidationError):
        lyapunov_trace(trace_of([p], [m]), {"p_z": p, "mu_z": m}, 0.0)
    with pytest.raises(ValidationError):
        lyapunov_trace(trace_of([p], [m]), {"p_z": np.ones(3) / 3, "mu_z": m}, 1.0)


def test_monotonicity_examples():
    rep = monotonicity_report([3.0, 2.0, 1.0, 0.5])
    assert rep.monotone and rep.first_violation is None and rep.max_increase < 0
    slack = 1e-10
    rep = monotonicity_report([1.0, 1.0 + 2 * slack], slack)
    assert not rep.monotone and rep.first_violation == 1
    assert monotonicity_report([1.0, 1.0 + 0.5 * slack], slack).monotone
    with pytest.raises(ValidationError):
        monotonicity_report([1.0])


def test_descent_on_feasible_instance():
    joint = near_uniform_joint(np.random.default_rng(0))
    c = AdmmConfig(ObjectiveParams(2.0, 10.0, 4.0), eps_floor=0.05, **GRADIENT_PROFILE)
    assert compute_certificate(joint, c).feasible
    ok = 0
    for seed in range(10):
        rec, trace = admm_run(joint, c, seed, trace_stride=1)
        v = lyapunov_trace(trace, rec.state, c.params.c)
        assert np.all(v >= 0)
        ok += len(v) < 3 or monotonicity_report(v[1:], 1e-10).monotone
    assert ok >= 9
