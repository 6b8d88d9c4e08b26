"""Split IB objective, augmented Lagrangian and analytic gradients.

The IB Lagrangian ``I(X;Z) - beta I(Y;Z)`` splits into

    F_beta(p_z)     = (beta - 1) sum_z p(z) log p(z)                = (1 - beta) H(Z)
    G_beta(p_{z|x}) = sum_x p(x) sum_z p(z|x) log p(z|x)
                      - beta sum_y p(y) sum_z p(z|y) log p(z|y)     = beta H(Z|Y) - H(Z|X)

and the two-block augmented Lagrangian couples them through ``p_z = B p_{z|x}``:

    L_c = F_beta(p_z) + G_beta(p_{z|x}) + mu^T (p_z - B p_{z|x}) + c/2 ||p_z - B p_{z|x}||^2

The simplex equality multipliers never appear: iterates stay feasible by
construction, so those terms are identically zero.

Gradients w.r.t. the encoder are returned in encoder layout ``(N_z, N_x)``;
``.ravel()`` gives the cascaded vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GradientSingularityError, ValidationError
from .prob_core import JointXY, _xlogx, encoder as _encoder, kl_divergence, prob_vector


@dataclass(frozen=True)
class ObjectiveParams:
    beta: float
    c: float = 32.0
    omega: float = 4.0

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if not np.isfinite(self.c) or self.c <= 0:
            raise ValidationError(f"penalty c must be > 0, got {self.c}")
        if not np.isfinite(self.omega) or self.omega < 0:
            raise ValidationError(f"omega must be >= 0, got {self.omega}")


@dataclass
class AdmmState:
    """Primal/dual triple plus the Bregman anchor ``p_z_prev``."""

    p_z: np.ndarray
    encoder: np.ndarray
    mu_z: np.ndarray
    p_z_prev: np.ndarray

    def __post_init__(self):
        self.p_z = np.array(prob_vector(self.p_z))
        self.p_z_prev = np.array(prob_vector(self.p_z_prev))
        self.encoder = np.array(_encoder(self.encoder))
        self.mu_z = np.array(self.mu_z, dtype=float)
        nz = self.p_z.size
        if self.encoder.shape[0] != nz or self.mu_z.shape != (nz,) or self.p_z_prev.size != nz:
            raise ValidationError("inconsistent N_z across state components")
        if not np.all(np.isfinite(self.mu_z)):
            raise ValidationError("dual multiplier must be finite")

    @classmethod
    def feasible(cls, joint: JointXY, enc, mu_z=None) -> "AdmmState":
        """State with ``p_z = B p_{z|x}`` (and anchor equal to it)."""
        enc = np.asarray(enc, dtype=float)
        pz = enc @ joint.p_x
        mu = np.zeros(enc.shape[0]) if mu_z is None else mu_z
        return cls(pz, enc, mu, pz.copy())

    def copy(self) -> "AdmmState":
        return AdmmState(self.p_z.copy(), self.encoder.copy(), self.mu_z.copy(), self.p_z_prev.copy())

    def residual(self, joint: JointXY) -> np.ndarray:
        return self.p_z - self.encoder @ joint.p_x


def _positive(arr: np.ndarray, what: str) -> None:
    if np.any(arr <= 0.0):
        raise GradientSingularityError(f"{what} has a zero entry; gradient is singular")


def f_beta(p_z, params: ObjectiveParams, check: bool = True) -> float:
    """``(beta - 1) sum p log p``.  ``check=False`` skips simplex validation."""
    p_z = prob_vector(p_z) if check else np.asarray(p_z, dtype=float)
    return float((params.beta - 1.0) * _xlogx(p_z).sum())


def g_beta(joint: JointXY, enc, params: ObjectiveParams, check: bool = True) -> float:
    enc = _encoder(enc) if check else np.asarray(enc, dtype=float)
    pzy = enc @ joint.p_x_given_y
    neg_hzx = (_xlogx(enc) * joint.p_x[None, :]).sum()
    neg_hzy = (_xlogx(pzy) * joint.p_y[None, :]).sum()
    return float(neg_hzx - params.beta * neg_hzy)


def grad_f(p_z, params: ObjectiveParams) -> np.ndarray:
    p_z = np.asarray(p_z, dtype=float)
    _positive(p_z, "p_z")
    return (params.beta - 1.0) * (np.log(p_z) + 1.0)


def grad_g(joint: JointXY, enc, params: ObjectiveParams) -> np.ndarray:
    """Entry ``(j, i)``: ``p(x_i)[ln p(z_j|x_i) + 1] - beta sum_y p(x_i, y)[ln p(z_j|y) + 1]``."""
    enc = np.asarray(enc, dtype=float)
    _positive(enc, "encoder")
    pzy = enc @ joint.p_x_given_y
    _positive(pzy, "decoder p(z|y)")
    # p(y) p(x|y) = p(x, y)
    return joint.p_x[None, :] * (np.log(enc) + 1.0) - params.beta * (np.log(pzy) + 1.0) @ joint.p_xy.T


def bregman_divergence(u, v) -> float:
    """Negative-entropy Bregman divergence, valid off the simplex too.

    ``sum u log(u/v) - sum u + sum v``; equals ``D_KL(u||v)`` on the simplex.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _positive(v, "Bregman anchor")
    return float(_xlogx(u).sum() - (u * np.log(v)).sum() - u.sum() + v.sum())


def bregman_kl(p, q, omega: float) -> float:
    """``omega * D_phi(p||q)`` with ``phi = sum u log u``, i.e. a scaled KL."""
    q = prob_vector(q)
    if np.any(q <= 0.0):
        raise ValidationError("Bregman anchor must be strictly positive")
    if omega == 0:
        return 0.0
    return float(omega * kl_divergence(p, q))


def augmented_lagrangian(state: AdmmState, joint: JointXY, params: ObjectiveParams) -> float:
    r = state.residual(joint)
    return (f_beta(state.p_z, params, check=False) + g_beta(joint, state.encoder, params, check=False)
            + float(state.mu_z @ r) + 0.5 * params.c * float(r @ r))


def z_subproblem(state: AdmmState, joint: JointXY, params: ObjectiveParams) -> float:
    """``L_c + omega D_phi(p_z || p_z_prev)``, the objective of the p_z block."""
    return (augmented_lagrangian(state, joint, params)
            + params.omega * bregman_divergence(state.p_z, state.p_z_prev))


def grad_augmented_z(state: AdmmState, joint: JointXY, params: ObjectiveParams) -> np.ndarray:
    """Gradient of the p_z subproblem, Bregman term included."""
    _positive(state.p_z_prev, "Bregman anchor")
    r = state.residual(joint)
    return (grad_f(state.p_z, params) + state.mu_z + params.c * r
            + params.omega * (np.log(state.p_z) - np.log(state.p_z_prev)))


def grad_augmented_zx(state: AdmmState, joint: JointXY, params: ObjectiveParams) -> np.ndarray:
    r = state.residual(joint)
    return grad_g(joint, state.encoder, params) - np.outer(state.mu_z + params.c * r, joint.p_x)
