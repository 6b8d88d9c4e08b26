import math

import numpy as np
import pytest

from conftest import random_encoder
from ibadmm.ba import BaConfig, ba_run, ba_solve, ba_step, self_consistency_residual
from ibadmm.errors import ValidationError
from ibadmm.prob_core import mutual_information_xz, mutual_information_yz


def scripted_ba(joint, enc, beta):
    """Plain-loop evaluation of the self-consistent update."""
    nz, nx = enc.shape
    ny = joint.ny
    pz = [sum(enc[j, i] * joint.p_x[i] for i in range(nx)) for j in range(nz)]
    out = np.zeros_like(enc)
    for i in range(nx):
        w = []
        for j in range(nz):
            kl = 0.0
            for l in range(ny):
                pzy = sum(enc[j, k] * joint.p_xy[k, l] / joint.p_y[l] for k in range(nx))
                pyz = pzy * joint.p_y[l] / pz[j]
                pyx = joint.p_y_given_x[l, i]
                kl += pyx * math.log(pyx / pyz)
            w.append(pz[j] * math.exp(-beta * kl))
        tot = sum(w)
        for j in range(nz):
            out[j, i] = w[j] / tot
    return out


def test_config_validation():
    with pytest.raises(ValidationError):
        BaConfig(beta=1.0, tol=0.0)
    with pytest.raises(ValidationError):
        BaConfig(beta=1.0, max_iters=0)
    with pytest.raises(ValidationError):
        BaConfig(beta=-1.0)


def test_constant_rows_fixed_point(joint):
    r = np.array([0.2, 0.5, 0.3])
    enc = np.tile(r[:, None], (1, 3))
    assert ba_step(joint, enc, 5.0) == pytest.approx(enc, abs=1e-14)


def test_beta_zero_returns_marginal(joint, rng):
    enc = random_encoder(rng, 3, 3)
    out = ba_step(joint, enc, 0.0)
    assert out == pytest.approx(np.tile((enc @ joint.p_x)[:, None], (1, 3)), abs=1e-14)


@pytest.mark.parametrize("beta", [0.5, 5.0, 12.0])
def test_matches_scripted_update(joint, rng, beta):
    for nz in (2, 3, 4):
        enc = random_encoder(rng, nz, 3)
        assert np.abs(ba_step(joint, enc, beta) - scripted_ba(joint, enc, beta)).max() <= 1e-12


def test_dead_cluster_stays_dead(joint):
    enc = np.array([[0.5, 0.2, 0.6], [0.5, 0.8, 0.4], [0.0, 0.0, 0.0]])
    out = ba_step(joint, enc, 4.0)
    assert np.all(out[2] == 0.0)
    assert np.allclose(out.sum(axis=0), 1.0)


def test_solve_from_fixed_point(joint):
    res = ba_solve(joint, np.full((3, 3), 1 / 3), BaConfig(beta=4.0))
    assert res.converged and res.iterations == 1
    assert res.I_xz == pytest.approx(0.0, abs=1e-15) and res.I_yz == pytest.approx(0.0, abs=1e-15)


def test_trivial_below_one(joint):
    for seed in range(10):
        rec = ba_run(joint, BaConfig(beta=0.9), seed)
        assert rec.converged
        assert rec.I_xz <= 1e-3


def test_large_beta_approaches_ixy(joint):
    best = max(ba_run(joint, BaConfig(beta=10.0), s).I_yz for s in range(20))
    assert best >= 0.95 * 0.3248961681655581


def test_row_stochastic_and_self_consistent(joint, rng):
    cfg = BaConfig(beta=5.0)
    for seed in range(5):
        enc = random_encoder(rng, 3, 3)
        out = ba_step(joint, enc, 5.0)
        assert np.allclose(out.sum(axis=0), 1.0, atol=1e-9)
        res = ba_solve(joint, enc, cfg)
        assert res.converged
        assert self_consistency_residual(joint, res.encoder, 5.0) <= 10 * cfg.tol


def test_lagrangian_non_increasing(joint, rng):
    for beta in (2.0, 5.0, 10.0):
        enc = random_encoder(rng, 3, 3)
        prev = math.inf
        for _ in range(300):
            val = mutual_information_xz(joint, enc) - beta * mutual_information_yz(joint, enc)
            assert val <= prev + 1e-9
            prev = val
            enc = ba_step(joint, enc, beta)


def test_run_record_fields(joint):
    rec = ba_run(joint, BaConfig(beta=3.0), seed=4)
    again = ba_run(joint, BaConfig(beta=3.0), seed=4)
    assert rec.method == "ba" and rec.iterations >= 1
    assert (rec.I_xz, rec.I_yz, rec.iterations) == (again.I_xz, again.I_yz, again.iterations)
    assert np.array_equal(rec.state["encoder"], again.state["encoder"])
    assert rec.I_yz <= rec.I_xz + 1e-9
