"""Three-block ADMM baseline with augmented marginal *and* decoder variables.

This is a reconstruction.  Variables are the encoder ``p(z|x)``, the marginal
``p_z`` and a free decoder ``Q = p(z|y)``; the objective is split as

    encoder block:  sum_x p(x) sum_z p(z|x) log p(z|x)        (-H(Z|X))
    marginal block: (beta - 1) sum_z p(z) log p(z)            (F_beta)
    decoder block:  -beta sum_y p(y) sum_z Q log Q            (beta H(Z|Y))

with consistency penalties for ``p_z = B p_{z|x}`` and for every column
``Q(., y) = sum_x p(x|y) p(.|x)``, one shared penalty coefficient ``c``, and
the blocks swept in fixed order followed by both dual ascents.  Only the
marginal block carries no Bregman term.

Stopping requires the shared marginal test ``||p_z - B p_{z|x}||_1^2 < tol``
and, for every (z, y),
``|Q(z,y) - sum_x p(z|x)p(x|y) / sum_{x,z} p(z|x)p(x|y)| < decoder_tol``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .admm import AdmmConfig, _arrays, random_init, to_interior
from .errors import ValidationError
from .prob_core import JointXY, column_stochastic, mutual_information_xz, mutual_information_yz, prob_vector
from .records import IterationTrace, RunRecord

DECODER_TOL = 2e-6


@dataclass
class BayatState:
    encoder: np.ndarray
    p_z: np.ndarray
    p_z_given_y: np.ndarray
    mu_z: np.ndarray
    mu_zy: np.ndarray

    def __post_init__(self):
        self.encoder = np.array(column_stochastic(self.encoder, name="encoder"))
        self.p_z = np.array(prob_vector(self.p_z))
        self.p_z_given_y = np.array(column_stochastic(self.p_z_given_y, name="p(z|y)"))
        self.mu_z = np.array(self.mu_z, dtype=float)
        self.mu_zy = np.array(self.mu_zy, dtype=float).reshape(self.p_z_given_y.shape)
        nz = self.p_z.size
        if self.encoder.shape[0] != nz or self.p_z_given_y.shape[0] != nz or self.mu_z.shape != (nz,):
            raise ValidationError("inconsistent N_z across Bayat state components")

    @classmethod
    def feasible(cls, joint: JointXY, enc) -> "BayatState":
        enc = np.asarray(enc, dtype=float)
        nz = enc.shape[0]
        return cls(enc, enc @ joint.p_x, enc @ joint.p_x_given_y, np.zeros(nz), np.zeros((nz, joint.ny)))

    def copy(self) -> "BayatState":
        return BayatState(self.encoder.copy(), self.p_z.copy(), self.p_z_given_y.copy(),
                          self.mu_z.copy(), self.mu_zy.copy())

    def marginal_residual(self, joint: JointXY) -> float:
        return float(np.abs(self.p_z - self.encoder @ joint.p_x).sum() ** 2)

    def decoder_gap(self, joint: JointXY) -> float:
        return float(K.decoder_gap(self.encoder, self.p_z_given_y, np.ascontiguousarray(joint.p_x_given_y)))


def bayat_value(state: BayatState, joint: JointXY, beta: float, c: float) -> float:
    """Three-block augmented Lagrangian (used by tests and traces)."""
    def xlogx(a):
        return np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)
    enc, pz, Q = state.encoder, state.p_z, state.p_z_given_y
    rz = pz - enc @ joint.p_x
    ry = Q - enc @ joint.p_x_given_y
    return float((xlogx(enc) * joint.p_x).sum() + (beta - 1.0) * xlogx(pz).sum()
                 - beta * (xlogx(Q) * joint.p_y).sum()
                 + state.mu_z @ rz + 0.5 * c * rz @ rz
                 + (state.mu_zy * ry).sum() + 0.5 * c * (ry * ry).sum())


def bayat_step(state: BayatState, joint: JointXY, config: AdmmConfig) -> BayatState:
    """One fixed-order sweep; returns a new state."""
    s = state.copy()
    _sweep(s, joint, config, 1, np.ones(3))
    return s


def _sweep(s: BayatState, joint: JointXY, config: AdmmConfig, n: int, mem: np.ndarray):
    p = config.params
    px, pxcy, pxy, py = _arrays(joint)
    return K.bayat_loop(s.encoder, s.p_z, s.p_z_given_y, s.mu_z, s.mu_zy, px, pxcy, pxy, py,
                        p.beta, p.c, config.eps_floor, config.base_step, config.inner_steps,
                        config.inner_tol, config.backtrack, config.armijo, config.residual_tol,
                        DECODER_TOL, n, mem)


def bayat_solve(joint: JointXY, init: BayatState, config: AdmmConfig, seed: int = 0,
                trace_stride: int = 0) -> tuple[RunRecord, IterationTrace | None]:
    config.check_alphabet(init.p_z.size)
    s = init.copy()
    if min(s.encoder.min(), s.p_z.min(), s.p_z_given_y.min()) < config.eps_floor - 1e-12:
        raise ValidationError("initial point must lie in the eps-floored simplex")
    trace = IterationTrace(trace_stride) if trace_stride > 0 else None
    t0 = time.perf_counter()
    done, converged, res = 0, False, s.marginal_residual(joint)
    chunk = trace_stride if trace is not None else config.max_outer_iters
    mem = np.ones(3)
    while done < config.max_outer_iters and not converged:
        n = min(chunk, config.max_outer_iters - done)
        it, converged, res, _gap = _sweep(s, joint, config, n, mem)
        done += it
        if trace is not None:
            trace.append(done, res, bayat_value(s, joint, config.params.beta, config.params.c),
                         mutual_information_xz(joint, s.encoder), mutual_information_yz(joint, s.encoder),
                         s.p_z, s.mu_z)
    cpu_ms = (time.perf_counter() - t0) * 1e3
    p = config.params
    record = RunRecord(
        method="bayat", beta=float(p.beta), c=float(p.c), omega=float(p.omega), seed=int(seed),
        converged=bool(converged), iterations=int(done),
        I_xz=mutual_information_xz(joint, s.encoder), I_yz=mutual_information_yz(joint, s.encoder),
        residual=float(res), cpu_ms=cpu_ms,
        state={"encoder": s.encoder, "p_z": s.p_z, "p_z_given_y": s.p_z_given_y,
               "mu_z": s.mu_z, "mu_zy": s.mu_zy})
    return record, trace


def bayat_run(joint: JointXY, config: AdmmConfig, seed: int, nz: int | None = None,
              trace_stride: int = 0) -> tuple[RunRecord, IterationTrace | None]:
    """Random encoder, marginal and decoder drawn from ``seed``; zero duals."""
    nz = joint.nx if nz is None else nz
    config.check_alphabet(nz)
    rng = np.random.default_rng(seed)
    enc, pz = random_init(rng, nz, joint.nx, config.eps_floor)
    cols = rng.exponential(size=(nz, joint.ny))
    Q = to_interior(cols / cols.sum(axis=0, keepdims=True), config.eps_floor)
    init = BayatState(enc, pz, Q, np.zeros(nz), np.zeros((nz, joint.ny)))
    return bayat_solve(joint, init, config, seed=seed, trace_stride=trace_stride)
