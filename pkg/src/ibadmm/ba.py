"""Blahut-Arimoto style self-consistent IB iteration (the benchmark solver).

    p^{k+1}(z|x) = p^k(z) exp(-beta D_KL[p(y|x) || p^k(y|z)]) / K(x, beta)

with ``p^k(z)`` and ``p^k(z|y)`` recomputed from ``p^k(z|x)`` and ``p^k(y|z)``
obtained from them by Bayes' rule, so the Markov chain Y - X - Z holds at
every step.  A cluster whose mass is exactly zero has no posterior; it gets
zero weight and stays dead.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClusterError, ValidationError
from .prob_core import JointXY, encoder as _encoder, mutual_information_xz, mutual_information_yz
from .records import RunRecord


@dataclass(frozen=True)
class BaConfig:
    beta: float
    max_iters: int = 100_000
    tol: float = 1e-10
    eps_floor: float = 0.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        if self.tol <= 0 or self.max_iters < 1:
            raise ValidationError("tol must be > 0 and max_iters >= 1")
        if self.eps_floor < 0:
            raise ValidationError("eps_floor must be >= 0")


@dataclass
class BaResult:
    encoder: np.ndarray
    converged: bool
    iterations: int
    I_xz: float
    I_yz: float
    change: float


def _ba_update(enc, beta, px, pxcy, py, log_pycx, neg_h_ycx):
    pz = enc @ px
    alive = pz > 0.0
    if not np.any(alive):
        raise DegenerateClusterError("all clusters have zero mass")
    pzy = enc[alive] @ pxcy                               # p(z|y), live clusters
    log_pycz = np.log(pzy * py[None, :]) - np.log(pz[alive])[:, None]   # ln p(y|z)
    # D_KL[p(y|x) || p(y|z)] = sum_y p(y|x) ln p(y|x) - sum_y p(y|x) ln p(y|z)
    kl = neg_h_ycx[None, :] - log_pycz @ np.exp(log_pycx)               # (live z, x)
    logw = np.log(pz[alive])[:, None] - beta * kl
    logw -= logw.max(axis=0, keepdims=True)
    w = np.exp(logw)
    new = np.zeros_like(enc)
    new[alive] = w / w.sum(axis=0, keepdims=True)
    return new


def _tables(joint: JointXY):
    log_pycx = np.log(joint.p_y_given_x)
    neg_h_ycx = (joint.p_y_given_x * log_pycx).sum(axis=0)
    return joint.p_x, joint.p_x_given_y, joint.p_y, log_pycx, neg_h_ycx


def ba_step(joint: JointXY, enc, beta: float) -> np.ndarray:
    """One self-consistent update; every output column is a distribution."""
    enc = _encoder(enc)
    if enc.shape[1] != joint.nx:
        raise ValidationError("encoder does not match N_x")
    return _ba_update(np.asarray(enc), beta, *_tables(joint))


def ba_solve(joint: JointXY, init, config: BaConfig) -> BaResult:
    """Iterate until the L1 change of the encoder drops below ``config.tol``."""
    enc = np.array(_encoder(init))
    if config.eps_floor > 0:
        nz = enc.shape[0]
        enc = config.eps_floor + (1.0 - nz * config.eps_floor) * enc
    tables = _tables(joint)
    change = np.inf
    converged = False
    it = 0
    while it < config.max_iters:
        it += 1
        new = _ba_update(enc, config.beta, *tables)
        change = float(np.abs(new - enc).sum())
        enc = new
        if change < config.tol:
            converged = True
            break
    return BaResult(enc, converged, it, mutual_information_xz(joint, enc),
                    mutual_information_yz(joint, enc), change)


def self_consistency_residual(joint: JointXY, enc, beta: float) -> float:
    """``max |p(z|x) - update(p(z|x))|``."""
    return float(np.abs(ba_step(joint, enc, beta) - np.asarray(enc)).max())


def ba_run(joint: JointXY, config: BaConfig, seed: int, nz: int | None = None) -> RunRecord:
    """Random simplex start drawn from ``seed``; returns a :class:`RunRecord`."""
    nz = joint.nx if nz is None else nz
    rng = np.random.default_rng(seed)
    cols = rng.exponential(size=(nz, joint.nx))
    init = cols / cols.sum(axis=0, keepdims=True)
    t0 = time.perf_counter()
    res = ba_solve(joint, init, config)
    cpu_ms = (time.perf_counter() - t0) * 1e3
    return RunRecord(method="ba", beta=float(config.beta), c=float("nan"), omega=float("nan"),
                     seed=int(seed), converged=res.converged, iterations=res.iterations,
                     I_xz=res.I_xz, I_yz=res.I_yz, residual=res.change, cpu_ms=cpu_ms,
                     state={"encoder": res.encoder})
