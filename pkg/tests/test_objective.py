import math

import numpy as np
import pytest

from conftest import random_encoder, random_simplex
from ibadmm import objective as ob
from ibadmm.errors import GradientSingularityError, ValidationError
from ibadmm.prob_core import mutual_information_xz, mutual_information_yz, mutual_information_xy

LN3 = math.log(3.0)
H = 1e-6
REL = 1e-5


def fd_grad(fun, x):
    """Central differences of a scalar function of an array (all coordinates)."""
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += H
        xm[idx] -= H
        g[idx] = (fun(xp) - fun(xm)) / (2 * H)
    return g


def rel_err(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-12)


def brute_h_x_given_y(joint):
    h = 0.0
    for l in range(joint.ny):
        for i in range(joint.nx):
            pxy = joint.p_xy[i, l]
            h -= pxy * math.log(pxy / joint.p_y[l])
    return h


def random_state(rng, joint, nz=3, eps=1e-3, feasible=False):
    enc = random_encoder(rng, nz, joint.nx, eps)
    pz = enc @ joint.p_x if feasible else random_simplex(rng, nz, eps)
    return ob.AdmmState(pz, enc, rng.normal(size=nz), random_simplex(rng, nz, eps))


def test_params_validation():
    with pytest.raises(ValidationError):
        ob.ObjectiveParams(beta=-1.0)
    with pytest.raises(ValidationError):
        ob.ObjectiveParams(beta=1.0, c=0.0)
    with pytest.raises(ValidationError):
        ob.ObjectiveParams(beta=1.0, omega=-0.1)


def test_state_validation(joint):
    with pytest.raises(ValidationError):
        ob.AdmmState([0.5, 0.5], np.eye(3), np.zeros(3), [0.5, 0.5])
    with pytest.raises(ValidationError):
        ob.AdmmState([0.5, 0.6, -0.1], np.eye(3), np.zeros(3), [1 / 3] * 3)
    with pytest.raises(ValidationError):
        ob.AdmmState([1 / 3] * 3, np.eye(3), [np.inf, 0, 0], [1 / 3] * 3)


def test_f_beta_examples():
    p = ob.ObjectiveParams(beta=1.0)
    assert ob.f_beta([0.2, 0.8], p) == 0.0
    p2 = ob.ObjectiveParams(beta=2.0)
    assert ob.f_beta([1 / 3] * 3, p2) == pytest.approx(-LN3, abs=1e-12)
    assert ob.f_beta([1.0, 0.0, 0.0], p2) == 0.0


def test_g_beta_examples(joint):
    p2 = ob.ObjectiveParams(beta=2.0)
    assert ob.g_beta(joint, np.ones((1, 3)), p2) == pytest.approx(0.0, abs=1e-15)
    assert ob.g_beta(joint, np.full((3, 3), 1 / 3), p2) == pytest.approx(LN3, abs=1e-12)
    hxy = brute_h_x_given_y(joint)
    # brute force gives H(X|Y) = 0.77372 on this joint
    assert hxy == pytest.approx(0.77372, abs=1e-5)
    assert ob.g_beta(joint, np.eye(3), p2) == pytest.approx(2.0 * hxy, abs=1e-12)


def test_grad_closed_forms(joint):
    p2 = ob.ObjectiveParams(beta=2.0)
    assert np.all(ob.grad_f([0.2, 0.3, 0.5], ob.ObjectiveParams(beta=1.0)) == 0.0)
    assert ob.grad_f([1 / 3] * 3, p2) == pytest.approx([1 - LN3] * 3, abs=1e-12)
    assert ob.grad_f([1 / 3] * 3, p2)[0] == pytest.approx(-0.098612, abs=1e-6)
    r = np.array([0.2, 0.5, 0.3])
    enc = np.tile(r[:, None], (1, 3))
    g0 = ob.grad_g(joint, enc, ob.ObjectiveParams(beta=0.0))
    assert g0 == pytest.approx(np.outer(np.log(r) + 1, joint.p_x), abs=1e-12)
    for beta in (0.5, 2.0, 7.0):
        g = ob.grad_g(joint, enc, ob.ObjectiveParams(beta=beta))
        assert g == pytest.approx((1 - beta) * np.outer(np.log(r) + 1, joint.p_x), abs=1e-12)


def test_gradient_singularities(joint):
    p = ob.ObjectiveParams(beta=2.0)
    with pytest.raises(GradientSingularityError):
        ob.grad_f([0.0, 1.0], p)
    with pytest.raises(GradientSingularityError):
        ob.grad_g(joint, np.eye(3), p)


def test_bregman_kl_examples():
    assert ob.bregman_kl([0.3, 0.7], [0.3, 0.7], 4.0) == 0.0
    assert ob.bregman_kl([0.5, 0.5], [0.25, 0.75], 0.0) == 0.0
    oracle = 4 * (0.5 * math.log(2.0) + 0.5 * math.log(0.5 / 0.75))
    assert ob.bregman_kl([0.5, 0.5], [0.25, 0.75], 4.0) == pytest.approx(oracle, abs=1e-14)
    assert ob.bregman_kl([0.5, 0.5], [0.25, 0.75], 4.0) == pytest.approx(0.575364, abs=1e-6)
    # the generalized divergence agrees on the simplex
    assert ob.bregman_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(oracle / 4, abs=1e-15)


@pytest.mark.parametrize("beta", [0.5, 2.0, 5.0, 10.0])
def test_gradients_match_finite_differences(joint, rng, beta):
    params = ob.ObjectiveParams(beta=beta, c=32.0, omega=4.0)
    for _ in range(5):
        s = random_state(rng, joint)
        g = ob.grad_f(s.p_z, params)
        assert rel_err(fd_grad(lambda v: ob.f_beta(v, params, check=False), s.p_z), g) <= REL
        g = ob.grad_g(joint, s.encoder, params)
        assert rel_err(fd_grad(lambda e: ob.g_beta(joint, e, params, check=False), s.encoder), g) <= REL

        def lz(v, s=s):
            t = s.copy()
            t.p_z = v
            return ob.z_subproblem(t, joint, params)

        def lzx(e, s=s):
            t = s.copy()
            t.encoder = e
            return ob.augmented_lagrangian(t, joint, params)

        assert rel_err(fd_grad(lz, s.p_z), ob.grad_augmented_z(s, joint, params)) <= REL
        assert rel_err(fd_grad(lzx, s.encoder), ob.grad_augmented_zx(s, joint, params)) <= REL


def test_augmented_gradients_reduce_at_feasible_point(joint, rng):
    params = ob.ObjectiveParams(beta=3.0, c=10.0, omega=0.0)
    enc = random_encoder(rng, 3, 3, 1e-3)
    s = ob.AdmmState.feasible(joint, enc)
    assert ob.grad_augmented_z(s, joint, params) == pytest.approx(ob.grad_f(s.p_z, params), abs=1e-14)
    assert ob.grad_augmented_zx(s, joint, params) == pytest.approx(ob.grad_g(joint, enc, params), abs=1e-14)


def test_decomposition_identity(joint, rng):
    for beta in (0.0, 0.9, 2.0, 5.0, 10.0):
        params = ob.ObjectiveParams(beta=beta)
        for _ in range(20):
            enc = random_encoder(rng, 3, 3)
            pz = enc @ joint.p_x
            lhs = ob.f_beta(pz, params) + ob.g_beta(joint, enc, params)
            rhs = mutual_information_xz(joint, enc) - beta * mutual_information_yz(joint, enc)
            assert abs(lhs - rhs) <= 1e-10
            s = ob.AdmmState.feasible(joint, enc)
            assert ob.augmented_lagrangian(s, joint, params) == pytest.approx(rhs, abs=1e-10)


def test_augmented_lagrangian_examples(joint):
    params = ob.ObjectiveParams(beta=1.0, c=8.0)
    s = ob.AdmmState.feasible(joint, np.eye(3))
    # I(X;Z) = ln 3 and I(Y;Z) = I(X;Y) for the identity encoder, so the value
    # is ln 3 - I(X;Y); the -I(X;Y) part is the relevance term alone
    ixy = mutual_information_xy(joint)
    assert ob.augmented_lagrangian(s, joint, params) == pytest.approx(LN3 - ixy, abs=1e-12)
    assert ob.augmented_lagrangian(s, joint, params) - mutual_information_xz(joint, np.eye(3)) == \
        pytest.approx(-0.3249, abs=5e-5)
    # quadratic penalty on an off-feasible p_z (mu = 0, beta = 1 so F vanishes)
    for delta in (1e-3, 1e-2, 0.1):
        t = s.copy()
        t.p_z = s.p_z + np.array([delta, 0.0, 0.0])
        diff = ob.augmented_lagrangian(t, joint, params) - ob.augmented_lagrangian(s, joint, params)
        assert diff == pytest.approx(0.5 * params.c * delta**2, rel=1e-9)


def test_f_beta_midpoint_convexity(rng):
    for beta in (1.0, 2.0, 6.0):
        params = ob.ObjectiveParams(beta=beta)
        for _ in range(50):
            a = random_simplex(rng, 4)
            b = random_simplex(rng, 4)
            mid = ob.f_beta(0.5 * (a + b), params, check=False)
            assert mid <= 0.5 * (ob.f_beta(a, params) + ob.f_beta(b, params)) + 1e-12


def test_permutation_invariance(joint, rng):
    params = ob.ObjectiveParams(beta=4.0, c=20.0, omega=2.0)
    s = random_state(rng, joint)
    perm = np.array([2, 0, 1])
    t = ob.AdmmState(s.p_z[perm], s.encoder[perm], s.mu_z[perm], s.p_z_prev[perm])
    assert ob.augmented_lagrangian(t, joint, params) == pytest.approx(
        ob.augmented_lagrangian(s, joint, params), abs=1e-13)
