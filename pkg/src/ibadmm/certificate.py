"""Convergence-certificate quantities and Lyapunov checks on solver traces.

From the problem data alone:

    kappa   = max_y (max_x p(y|x) / min_x p(y|x) - 1)^2
    gamma   = beta kappa / eps - 1
    eta_z   = beta + omega - 1
    rho1(a) = eta_z - gamma (1 + 1 / (c (1 - a)))
    rho2(a) = 1 / (2c) - gamma (1 / c^2 + (1 - a) / (c a))
    rho3    = eta_z + c / 2

``feasible`` means some ``a`` on the grid has ``rho1 >= 0`` and ``rho2 >= 0``.
The Lyapunov function ``V^k = c/2 |p_z^k - p_z*|^2 + 1/(2c) |mu^k - mu*|^2``
is evaluated against a reference point supplied by the caller, usually the
final iterate of the same run (the true stationary point is not observable).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .admm import AdmmConfig
from .errors import TraceIncompleteError, ValidationError
from .prob_core import JointXY, kappa as _kappa

DEFAULT_ALPHA_GRID = np.linspace(0.005, 0.995, 101)


@dataclass(frozen=True)
class Certificate:
    kappa: float
    gamma_beta: float
    eta_z: float
    alpha_threshold: float
    alpha: np.ndarray = field(repr=False)
    rho1: np.ndarray = field(repr=False)
    rho2: np.ndarray = field(repr=False)
    rho3: float
    feasible: bool
    feasible_alphas: np.ndarray = field(repr=False)
    diagnostic: str = ""

    @property
    def rho_profile(self) -> list[tuple[float, float, float]]:
        """``(alpha, rho1, rho2)`` samples on the grid."""
        return list(zip(self.alpha.tolist(), self.rho1.tolist(), self.rho2.tolist()))

    def to_json(self) -> dict:
        def num(v):
            return None if not math.isfinite(v) else float(v)
        return {
            "kappa": num(self.kappa),
            "gamma_beta": num(self.gamma_beta),
            "eta_z": num(self.eta_z),
            "alpha_threshold": num(self.alpha_threshold),
            "rho3": num(self.rho3),
            "feasible": bool(self.feasible),
            "feasible_alpha_range": ([float(self.feasible_alphas.min()), float(self.feasible_alphas.max())]
                                     if self.feasible_alphas.size else None),
            "rho_profile": [{"alpha": a, "rho1": r1, "rho2": r2} for a, r1, r2 in self.rho_profile],
            "diagnostic": self.diagnostic,
        }


def rho1(alpha, gamma_beta: float, eta_z: float, c: float):
    alpha = np.asarray(alpha, dtype=float)
    return eta_z - gamma_beta * (1.0 + 1.0 / (c * (1.0 - alpha)))


def rho2(alpha, gamma_beta: float, c: float):
    alpha = np.asarray(alpha, dtype=float)
    return 1.0 / (2.0 * c) - gamma_beta * (1.0 / c**2 + (1.0 - alpha) / (c * alpha))


def compute_certificate(joint: JointXY, config: AdmmConfig, alpha_grid=None) -> Certificate:
    p = config.params
    alpha = DEFAULT_ALPHA_GRID if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    if alpha.ndim != 1 or alpha.size == 0 or np.any((alpha <= 0) | (alpha >= 1)):
        raise ValidationError("alpha grid must be a non-empty 1-D array inside (0, 1)")
    k = _kappa(joint).kappa
    eps = config.eps_floor
    gamma = p.beta * k / eps - 1.0
    eta = p.beta + p.omega - 1.0
    r1 = rho1(alpha, gamma, eta, p.c)
    r2 = rho2(alpha, gamma, p.c)
    ok = (r1 >= 0) & (r2 >= 0)
    diagnostic = ""
    if eta > 0:
        threshold = 1.0 - 1.0 / (2.0 * eta)
    else:
        threshold = math.nan
        diagnostic = f"eta_z = {eta:g} <= 0: the marginal block is not strongly convex"
        ok[:] = False
    feasible = bool(ok.any())
    if not feasible and not diagnostic:
        diagnostic = "no alpha on the grid makes rho1 and rho2 both non-negative"
    return Certificate(kappa=k, gamma_beta=gamma, eta_z=eta, alpha_threshold=threshold,
                       alpha=alpha.copy(), rho1=r1, rho2=r2, rho3=eta + p.c / 2.0,
                       feasible=feasible, feasible_alphas=alpha[ok], diagnostic=diagnostic)


def lyapunov_trace(trace, q_star, c: float) -> np.ndarray:
    """``V^k`` for every recorded iteration.

    ``q_star`` is a mapping with ``p_z`` and ``mu_z`` (a :class:`RunRecord`
    state dict works as is).
    """
    if c <= 0:
        raise ValidationError("c must be > 0")
    pz_list = getattr(trace, "p_z", None)
    mu_list = getattr(trace, "mu_z", None)
    if not pz_list or not mu_list or len(pz_list) != len(mu_list):
        raise TraceIncompleteError("trace has no (or mismatched) p_z / mu_z snapshots")
    try:
        pz_star = np.asarray(q_star["p_z"], dtype=float)
        mu_star = np.asarray(q_star["mu_z"], dtype=float)
    except KeyError as exc:
        raise TraceIncompleteError(f"q_star lacks {exc}") from None
    pz = np.asarray(pz_list, dtype=float)
    mu = np.asarray(mu_list, dtype=float)
    if pz.shape[1:] != pz_star.shape or mu.shape[1:] != mu_star.shape:
        raise ValidationError("q_star does not match the trace dimensions")
    dp = pz - pz_star
    dm = mu - mu_star
    return 0.5 * c * (dp * dp).sum(axis=1) + (dm * dm).sum(axis=1) / (2.0 * c)


class Monotonicity(NamedTuple):
    monotone: bool
    first_violation: int | None
    max_increase: float


def monotonicity_report(v, slack: float = 0.0) -> Monotonicity:
    """Check ``v[k+1] <= v[k] + slack``; ``first_violation`` is the index ``k+1``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValidationError("need a sequence of length >= 2")
    inc = np.diff(v)
    bad = np.flatnonzero(inc > slack)
    return Monotonicity(bad.size == 0, int(bad[0]) + 1 if bad.size else None, float(inc.max()))
