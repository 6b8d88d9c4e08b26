"""Two-block Bregman ADMM solver for the IB Lagrangian.

One outer iteration, in order:

    p_{z|x} <- approx argmin_{J p_{z|x} = 1} L_c(p_z, ., mu)
    p_z     <- approx argmin_{1^T p_z = 1}   L_c(., p_{z|x}, mu) + omega D_phi(p_z || p_z^k)
    mu      <- mu + c (p_z - B p_{z|x})

Each argmin is approximated by mean-subtracted (projected) gradient steps that
keep every entry above ``eps_floor``; see :mod:`ibadmm._kernels`.  A run is
*convergent* once ``||p_z - B p_{z|x}||_1^2 < residual_tol`` and *divergent*
if ``max_outer_iters`` is exhausted first.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ValidationError
from .objective import AdmmState, ObjectiveParams, augmented_lagrangian
from .prob_core import JointXY, mutual_information_xz, mutual_information_yz
from .records import IterationTrace, RunRecord


@dataclass(frozen=True)
class AdmmConfig:
    params: ObjectiveParams
    eps_floor: float = 1e-4
    base_step: float = 1.0
    inner_steps: int = 20
    inner_tol: float = 1e-7
    residual_tol: float = 2e-6
    max_outer_iters: int = 10_000
    backtrack: float = 0.5
    armijo: float = 1e-4

    def __post_init__(self):
        if not isinstance(self.params, ObjectiveParams):
            raise ValidationError("params must be an ObjectiveParams")
        if self.eps_floor <= 0:
            raise ValidationError("eps_floor must be > 0")
        if self.base_step <= 0 or self.inner_tol < 0 or self.residual_tol <= 0:
            raise ValidationError("base_step and residual_tol must be > 0, inner_tol >= 0")
        if self.inner_steps < 1 or self.max_outer_iters < 1:
            raise ValidationError("inner_steps and max_outer_iters must be >= 1")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo < 1:
            raise ValidationError("backtrack and armijo factors must lie in (0, 1)")

    def check_alphabet(self, nz: int) -> None:
        if self.eps_floor * nz >= 1:
            raise ValidationError(f"eps_floor * N_z = {self.eps_floor * nz} must be < 1")


# One fixed-size gradient step per block and outer iteration (no argmin
# approximation).  Pass as ``AdmmConfig(params, **GRADIENT_PROFILE)``.
GRADIENT_PROFILE = {"inner_steps": 1, "base_step": 0.05}


def mean_subtract(g, nz: int | None = None) -> np.ndarray:
    """Subtract the mean of every simplex block.

    A 1-D vector of length ``nz`` (or with ``nz`` omitted) is one block.  A 2-D
    encoder-layout array has one block per column.  A cascaded vector of length
    ``nz * N_x`` is reshaped to encoder layout first.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim == 2:
        return g - g.mean(axis=0, keepdims=True)
    if nz is None or g.size == nz:
        return g - g.mean()
    if g.size % nz:
        raise ValidationError(f"length {g.size} is not a multiple of N_z = {nz}")
    m = g.reshape(nz, -1)
    return (m - m.mean(axis=0, keepdims=True)).ravel()


def feasible_step(point, direction, base_step: float, eps_floor: float) -> float:
    """Largest safe step along a sum-zero ``direction`` (ratio test, factor 0.99).

    ``point + step * direction`` keeps every coordinate >= ``eps_floor``.
    """
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    down = direction < 0
    if not np.any(down):
        return float(base_step)
    t_max = np.min((point[down] - eps_floor) / -direction[down])
    return float(min(base_step, 0.99 * max(t_max, 0.0)))


def to_interior(p: np.ndarray, eps: float) -> np.ndarray:
    """Map a simplex point (or columns) into the eps-floored simplex.

    Uses ``eps + (1 - n eps) p``, which keeps sums exactly and moves nothing
    that is already uniform.
    """
    n = p.shape[0]
    return eps + (1.0 - n * eps) * p


def random_init(rng: np.random.Generator, nz: int, nx: int, eps: float):
    """Independent uniform draws on the simplex for every encoder column and p_z."""
    cols = rng.exponential(size=(nz, nx))
    enc = cols / cols.sum(axis=0, keepdims=True)
    pz = rng.exponential(size=nz)
    pz /= pz.sum()
    return to_interior(enc, eps), to_interior(pz, eps)


def _arrays(joint: JointXY):
    return (np.ascontiguousarray(joint.p_x), np.ascontiguousarray(joint.p_x_given_y),
            np.ascontiguousarray(joint.p_xy), np.ascontiguousarray(joint.p_y))


_E1 = np.empty(0)
_E2 = np.empty((0, 0))


def primal_zx_update(state: AdmmState, joint: JointXY, config: AdmmConfig) -> np.ndarray:
    """Encoder block: returns the new encoder; ``state`` is not modified."""
    p = config.params
    enc = np.array(state.encoder, dtype=float)
    px, pxcy, pxy, py = _arrays(joint)
    K.descend(K.ADMM_ZX, enc, px, pxcy, pxy, py, np.array(state.p_z), _E1, np.array(state.mu_z),
              _E1, _E2, _E2, _E2, p.beta, p.c, p.omega, config.eps_floor, config.base_step,
              config.inner_steps, config.inner_tol, config.backtrack, config.armijo, np.ones(1), 0)
    return enc


def primal_z_update(state: AdmmState, joint: JointXY, config: AdmmConfig) -> np.ndarray:
    """Marginal block with the Bregman term anchored at ``state.p_z_prev``."""
    p = config.params
    px, pxcy, pxy, py = _arrays(joint)
    col = np.array(state.p_z, dtype=float)[:, None].copy()
    b = state.encoder @ joint.p_x
    K.descend(K.Z, col, px, pxcy, pxy, py, np.array(state.p_z), b, np.array(state.mu_z),
              np.array(state.p_z_prev), _E2, _E2, _E2, p.beta, p.c, p.omega, config.eps_floor,
              config.base_step, config.inner_steps, config.inner_tol, config.backtrack, config.armijo,
              np.ones(1), 0)
    return col[:, 0]


def dual_update(state: AdmmState, joint: JointXY, config: AdmmConfig) -> np.ndarray:
    return state.mu_z + config.params.c * state.residual(joint)


def admm_step(state: AdmmState, joint: JointXY, config: AdmmConfig) -> AdmmState:
    """One outer iteration built from the block operations (reference path)."""
    s = state.copy()
    s.encoder = primal_zx_update(s, joint, config)
    s.p_z_prev = s.p_z.copy()
    s.p_z = primal_z_update(s, joint, config)
    s.mu_z = dual_update(s, joint, config)
    return s


def _snapshot(trace, it, enc, pz, mu, joint, params):
    st = AdmmState(pz, enc, mu, pz)
    r = pz - enc @ joint.p_x
    trace.append(it, np.abs(r).sum() ** 2, augmented_lagrangian(st, joint, params),
                 mutual_information_xz(joint, enc), mutual_information_yz(joint, enc), pz, mu)


def admm_solve(joint: JointXY, init_encoder, init_pz, config: AdmmConfig, seed: int = 0,
               trace_stride: int = 0, init_mu=None) -> tuple[RunRecord, IterationTrace | None]:
    """Run the solver from the given start.

    With ``trace_stride > 0`` an :class:`IterationTrace` is recorded every
    ``trace_stride`` iterations and at the final one; the iterates are identical
    with or without tracing.
    """
    enc = np.array(init_encoder, dtype=float)
    pz = np.array(init_pz, dtype=float)
    nz = pz.size
    config.check_alphabet(nz)
    start = AdmmState(pz, enc, np.zeros(nz) if init_mu is None else init_mu, pz)
    if enc.min() < config.eps_floor - 1e-12 or pz.min() < config.eps_floor - 1e-12:
        raise ValidationError("initial point must lie in the eps-floored simplex")
    mu = start.mu_z.copy()
    p = config.params
    px, pxcy, pxy, py = _arrays(joint)
    trace = IterationTrace(trace_stride) if trace_stride > 0 else None

    t0 = time.perf_counter()
    done, converged, res = 0, False, float(np.abs(pz - enc @ px).sum() ** 2)
    chunk = trace_stride if trace is not None else config.max_outer_iters
    mem = np.ones(2)
    while done < config.max_outer_iters and not converged:
        n = min(chunk, config.max_outer_iters - done)
        it, converged, res = K.admm_loop(enc, pz, mu, px, pxcy, pxy, py, p.beta, p.c, p.omega,
                                         config.eps_floor, config.base_step, config.inner_steps,
                                         config.inner_tol, config.backtrack, config.armijo,
                                         config.residual_tol, n, mem)
        done += it
        if trace is not None:
            _snapshot(trace, done, enc, pz, mu, joint, p)
    cpu_ms = (time.perf_counter() - t0) * 1e3

    record = RunRecord(
        method="admm", beta=float(p.beta), c=float(p.c), omega=float(p.omega), seed=int(seed),
        converged=bool(converged), iterations=int(done),
        I_xz=mutual_information_xz(joint, enc), I_yz=mutual_information_yz(joint, enc),
        residual=float(res), cpu_ms=cpu_ms,
        state={"encoder": enc, "p_z": pz, "mu_z": mu})
    return record, trace


def admm_run(joint: JointXY, config: AdmmConfig, seed: int, nz: int | None = None,
             trace_stride: int = 0) -> tuple[RunRecord, IterationTrace | None]:
    """Random start drawn from ``seed``, then :func:`admm_solve`."""
    nz = joint.nx if nz is None else nz
    config.check_alphabet(nz)
    rng = np.random.default_rng(seed)
    enc, pz = random_init(rng, nz, joint.nx, config.eps_floor)
    return admm_solve(joint, enc, pz, config, seed=seed, trace_stride=trace_stride)
