"""Discrete distributions and the information functionals used by every solver.

Conventions
-----------
* Natural logarithms throughout, so every information quantity is in nats.
* ``0 * log 0 = 0``.
* An encoder ``p(z|x)`` is an ``(N_z, N_x)`` array whose *columns* are the
  conditionals ``p(.|x_i)``.  With this layout ``encoder.ravel()`` (C order)
  is the z-major cascade ``(p(z_1|x_1), ..., p(z_1|x_Nx), p(z_2|x_1), ...)``,
  so ``B = I_Nz (x) p_x^T`` acts on it literally.
* A decoder ``p(z|y)`` is an ``(N_z, N_y)`` array with the same layout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import InfiniteDivergenceError, PositivityError, ValidationError

SIMPLEX_TOL = 1e-9


def prob_vector(p, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate ``p`` as a point of the probability simplex.

    Returns a read-only float64 copy.  Inputs are rejected, never renormalized.
    """
    arr = np.array(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError(f"probability vector must be 1-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("probability vector has non-finite entries")
    if np.any(arr < 0.0):
        raise ValidationError(f"probability vector has negative entries: {arr}")
    if abs(arr.sum() - 1.0) > tol:
        raise ValidationError(f"probability vector sums to {arr.sum():.12g}, not 1")
    arr.setflags(write=False)
    return arr


def column_stochastic(m, tol: float = SIMPLEX_TOL, name: str = "matrix") -> np.ndarray:
    """Validate a matrix whose columns are probability vectors."""
    arr = np.array(m, dtype=np.float64)
    if arr.ndim != 2 or 0 in arr.shape:
        raise ValidationError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValidationError(f"{name} has negative or non-finite entries")
    sums = arr.sum(axis=0)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ValidationError(f"{name} columns sum to {sums}, not 1")
    arr.setflags(write=False)
    return arr


def encoder(m, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate an ``(N_z, N_x)`` encoder ``p(z|x)``."""
    return column_stochastic(m, tol, name="encoder")


def cascade(enc: np.ndarray) -> np.ndarray:
    """Encoder matrix -> z-major cascaded vector ``p_{z|x}``."""
    return np.ascontiguousarray(enc).ravel()


def uncascade(vec: np.ndarray, nz: int, nx: int) -> np.ndarray:
    """Inverse of :func:`cascade`."""
    return np.asarray(vec, dtype=np.float64).reshape(nz, nx)


@dataclass(frozen=True)
class JointXY:
    """Fixed joint distribution given as ``p(y|x)`` columns and the prior ``p(x)``.

    ``p_y_given_x`` has shape ``(N_y, N_x)``; every entry must be strictly
    positive (the convergence analysis assumes ``p(y|x) > 0``).
    """

    p_y_given_x: np.ndarray
    p_x: np.ndarray
    p_xy: np.ndarray = field(init=False, repr=False, compare=False)
    p_y: np.ndarray = field(init=False, repr=False, compare=False)
    p_x_given_y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        table = column_stochastic(self.p_y_given_x, name="p(y|x)")
        prior = prob_vector(self.p_x)
        if table.shape[1] != prior.size:
            raise ValidationError(
                f"p(y|x) has {table.shape[1]} columns but p(x) has {prior.size} entries")
        if np.any(table <= 0.0):
            raise PositivityError("p(y|x) must be strictly positive")
        p_xy = (table * prior[None, :]).T          # (N_x, N_y)
        p_y = p_xy.sum(axis=0)
        if np.any(p_y <= 0.0):
            raise ValidationError("p(y) has a zero entry")
        p_x_given_y = p_xy / p_y[None, :]
        for name, arr in (("p_y_given_x", table), ("p_x", prior), ("p_xy", p_xy),
                          ("p_y", p_y), ("p_x_given_y", p_x_given_y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nx(self) -> int:
        return self.p_x.size

    @property
    def ny(self) -> int:
        return self.p_y.size

    @classmethod
    def from_dict(cls, doc: dict) -> "JointXY":
        try:
            return cls(np.asarray(doc["p_y_given_x"], dtype=float),
                       np.asarray(doc["p_x"], dtype=float))
        except KeyError as exc:
            raise ValidationError(f"joint document missing key {exc}") from None

    @classmethod
    def from_json(cls, path) -> "JointXY":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {"p_y_given_x": self.p_y_given_x.tolist(), "p_x": self.p_x.tolist()}


def example_joint() -> JointXY:
    """The bundled 3x3 synthetic joint distribution."""
    text = resources.files("ibadmm").joinpath("data/example_joint.json").read_text(encoding="utf-8")
    return JointXY.from_dict(json.loads(text))


# -- linear operators ---------------------------------------------------------

def marginalization_matrix(p_x: np.ndarray, nz: int) -> np.ndarray:
    """Dense ``B = I_Nz (x) p_x^T`` of shape ``(N_z, N_x*N_z)``."""
    return np.kron(np.eye(nz), np.asarray(p_x, dtype=float)[None, :])


def row_sum_matrix(nx: int, nz: int) -> np.ndarray:
    """Dense ``J = 1_Nz^T (x) I_Nx`` of shape ``(N_x, N_x*N_z)``."""
    return np.kron(np.ones((1, nz)), np.eye(nx))


def apply_B(enc: np.ndarray, p_x: np.ndarray) -> np.ndarray:
    """``B p_{z|x}``, the marginal ``p(z)`` induced by the encoder."""
    return enc @ p_x


def apply_BT(v: np.ndarray, p_x: np.ndarray) -> np.ndarray:
    """``B^T v`` in encoder layout: entry ``(j, i)`` is ``p(x_i) v_j``."""
    return np.outer(v, p_x)


def apply_J(enc: np.ndarray) -> np.ndarray:
    """``J p_{z|x}``, the per-x sums of the encoder."""
    return enc.sum(axis=0)


# -- functionals ----------------------------------------------------------------

def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy(p) -> float:
    """Shannon entropy in nats."""
    p = prob_vector(p)
    return float(max(-_xlogx(p).sum(), 0.0))


def kl_divergence(p, q) -> float:
    """``D_KL(p || q)`` in nats; raises when p has mass where q has none."""
    p = prob_vector(p)
    q = prob_vector(q)
    if p.shape != q.shape:
        raise ValidationError(f"length mismatch: {p.size} vs {q.size}")
    support = p > 0
    if np.any(q[support] == 0.0):
        raise InfiniteDivergenceError("p has mass where q has none")
    val = float(np.sum(p[support] * np.log(p[support] / q[support])))
    return max(val, 0.0)


def _check_encoder(joint: JointXY, enc) -> np.ndarray:
    enc = encoder(enc)
    if enc.shape[1] != joint.nx:
        raise ValidationError(f"encoder has {enc.shape[1]} columns, joint has N_x = {joint.nx}")
    return enc


def _conditional_entropy(cond: np.ndarray, weights: np.ndarray) -> float:
    # sum_k w_k H(cond[:, k])
    return float(-(_xlogx(cond).sum(axis=0) * weights).sum())


def markov_decoder(joint: JointXY, enc) -> np.ndarray:
    """``p(z|y) = sum_x p(z|x) p(x|y)`` as an ``(N_z, N_y)`` array."""
    enc = _check_encoder(joint, enc)
    return enc @ joint.p_x_given_y


def mutual_information_xz(joint: JointXY, enc) -> float:
    """``I(X;Z)`` of the encoder, using the exact marginal ``B p_{z|x}``."""
    enc = _check_encoder(joint, enc)
    pz = enc @ joint.p_x
    val = -_xlogx(pz).sum() - _conditional_entropy(enc, joint.p_x)
    return float(max(val, 0.0))


def mutual_information_yz(joint: JointXY, enc) -> float:
    """``I(Y;Z)`` through the Markov decoder ``p(z|y)``."""
    enc = _check_encoder(joint, enc)
    pz = enc @ joint.p_x
    pzy = enc @ joint.p_x_given_y
    val = -_xlogx(pz).sum() - _conditional_entropy(pzy, joint.p_y)
    return float(max(val, 0.0))


def mutual_information_xy(joint: JointXY) -> float:
    """``I(X;Y)``, the ceiling for ``I(Y;Z)``."""
    val = -_xlogx(joint.p_y).sum() - _conditional_entropy(joint.p_y_given_x, joint.p_x)
    return float(max(val, 0.0))


class Kappa(NamedTuple):
    kappa: float
    kappa_y: np.ndarray


def kappa(joint_or_table) -> Kappa:
    """Conditioning constant ``max_y (max_x p(y|x) / min_x p(y|x) - 1)^2``.

    Accepts a :class:`JointXY` or a raw ``(N_y, N_x)`` table of ``p(y|x)``.
    """
    if isinstance(joint_or_table, JointXY):
        table = joint_or_table.p_y_given_x
    else:
        table = np.asarray(joint_or_table, dtype=float)
        if table.ndim != 2:
            raise ValidationError("p(y|x) table must be 2-D")
    if np.any(table <= 0.0):
        raise PositivityError("kappa needs p(y|x) > 0 everywhere")
    ratio = table.max(axis=1) / table.min(axis=1)
    kappa_y = (ratio - 1.0) ** 2
    return Kappa(float(kappa_y.max()), kappa_y)
