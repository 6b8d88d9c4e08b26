"""Compiled inner loops shared by the two ADMM solvers.

Every primal block is a smooth function of a matrix ``P`` whose columns live on
the eps-floored simplex.  One descent step is:

1. gradient of the block objective;
2. per column, the mean-subtracted gradient restricted to the free face
   (coordinates sitting on the floor that would be pushed further down are
   frozen and the mean is recomputed over the rest);
3. per column, a step ``min(base, 0.99 t_max)`` from the ratio test;
4. a common backtracking factor on all columns until the Armijo condition holds.

Block kinds (``kind`` argument):

    ADMM_ZX   encoder block of the two-block solver
    Z         marginal block, Bregman term anchored at ``anchor``
    BAYAT_ZX  encoder block of the three-block baseline
    BAYAT_ZY  decoder block of the three-block baseline

Unused context arrays are passed as empty placeholders.
"""
import numpy as np
from numba import njit

ADMM_ZX = 0
Z = 1
BAYAT_ZX = 2
BAYAT_ZY = 3

FREE_TOL = 1e-12
MAX_BACKTRACK = 60


@njit(cache=True)
def face_direction_into(P, G, k, eps, free, d):
    """Projected direction for column ``k`` of ``P`` written into ``d``."""
    n = P.shape[0]
    for i in range(n):
        free[i] = True
    cnt = n
    m = 0.0
    for _ in range(n):
        s = 0.0
        for i in range(n):
            if free[i]:
                s += G[i, k]
        m = s / cnt
        changed = False
        for i in range(n):
            if cnt > 1 and free[i] and P[i, k] - eps <= FREE_TOL and G[i, k] > m:
                free[i] = False
                cnt -= 1
                changed = True
        if not changed:
            break
    for i in range(n):
        d[i] = G[i, k] - m if free[i] else 0.0


@njit(cache=True)
def face_direction(p, g, eps):
    n = p.shape[0]
    d = np.empty(n)
    face_direction_into(p.reshape(n, 1), g.reshape(n, 1), 0, eps, np.empty(n, dtype=np.bool_), d)
    return d


@njit(cache=True)
def ratio_limit(p, d, eps):
    # largest t with p - t d >= eps
    t = np.inf
    for i in range(p.shape[0]):
        if d[i] > 0.0:
            r = (p[i] - eps) / d[i]
            if r < t:
                t = r
    if t < 0.0:
        t = 0.0
    return t


@njit(cache=True)
def _xlogx(v):
    return v * np.log(v) if v > 0.0 else 0.0


@njit(cache=True)
def block_value(kind, P, px, pxcy, py, pz, b, mu, anchor, Q, Qhat, mu_zy, beta, c, omega):
    if kind == Z:
        v = 0.0
        for j in range(P.shape[0]):
            p = P[j, 0]
            r = p - b[j]
            v += (beta - 1.0) * _xlogx(p) + mu[j] * p + 0.5 * c * r * r
            if omega != 0.0:
                v += omega * (p * (np.log(p) - np.log(anchor[j])) - p + anchor[j])
        return v
    if kind == BAYAT_ZY:
        v = 0.0
        nz, ny = P.shape
        for j in range(nz):
            for l in range(ny):
                r = P[j, l] - Qhat[j, l]
                v += -beta * py[l] * _xlogx(P[j, l]) + mu_zy[j, l] * P[j, l] + 0.5 * c * r * r
        return v
    # encoder blocks
    nz, nx = P.shape
    ny = pxcy.shape[1]
    v = 0.0
    for j in range(nz):
        bj = 0.0
        for i in range(nx):
            v += px[i] * _xlogx(P[j, i])
            bj += px[i] * P[j, i]
        r = pz[j] - bj
        v += -mu[j] * bj + 0.5 * c * r * r
        for l in range(ny):
            q = 0.0
            for i in range(nx):
                q += P[j, i] * pxcy[i, l]
            if kind == ADMM_ZX:
                v -= beta * py[l] * _xlogx(q)
            else:
                rq = Q[j, l] - q
                v += -mu_zy[j, l] * q + 0.5 * c * rq * rq
    return v


@njit(cache=True)
def block_grad(kind, P, px, pxcy, pxy, py, pz, b, mu, anchor, Q, Qhat, mu_zy, beta, c, omega):
    G = np.empty(P.shape)
    block_grad_into(G, kind, P, px, pxcy, pxy, py, pz, b, mu, anchor, Q, Qhat, mu_zy, beta, c, omega)
    return G


@njit(cache=True)
def block_grad_into(G, kind, P, px, pxcy, pxy, py, pz, b, mu, anchor, Q, Qhat, mu_zy, beta, c, omega):
    if kind == Z:
        for j in range(P.shape[0]):
            p = P[j, 0]
            G[j, 0] = (beta - 1.0) * (np.log(p) + 1.0) + mu[j] + c * (p - b[j])
            if omega != 0.0:
                G[j, 0] += omega * (np.log(p) - np.log(anchor[j]))
        return
    if kind == BAYAT_ZY:
        nz, ny = P.shape
        for j in range(nz):
            for l in range(ny):
                G[j, l] = -beta * py[l] * (np.log(P[j, l]) + 1.0) + mu_zy[j, l] + c * (P[j, l] - Qhat[j, l])
        return
    nz, nx = P.shape
    ny = pxcy.shape[1]
    w = np.empty(ny)  # tiny; reused across z
    for j in range(nz):
        bj = 0.0
        for i in range(nx):
            bj += px[i] * P[j, i]
        lam = mu[j] + c * (pz[j] - bj)
        for l in range(ny):
            q = 0.0
            for i in range(nx):
                q += P[j, i] * pxcy[i, l]
            if kind == ADMM_ZX:
                # p(y) p(x|y) (ln q + 1) is folded into p(x, y) below
                w[l] = np.log(q) + 1.0
            else:
                w[l] = mu_zy[j, l] + c * (Q[j, l] - q)
        for i in range(nx):
            s = 0.0
            if kind == ADMM_ZX:
                for l in range(ny):
                    s += pxy[i, l] * w[l]
                s *= beta
            else:
                for l in range(ny):
                    s += pxcy[i, l] * w[l]
            G[j, i] = px[i] * (np.log(P[j, i]) + 1.0) - px[i] * lam - s


@njit(cache=True)
def descend(kind, P, px, pxcy, pxy, py, pz, b, mu, anchor, Q, Qhat, mu_zy,
            beta, c, omega, eps, base, nsteps, tol, shrink, sigma, mem, slot):
    """Run up to ``nsteps`` projected-gradient steps on block ``kind`` in place.

    ``mem[slot]`` carries the last accepted backtracking factor between calls;
    each search starts from twice that value (capped at 1).  Returns the
    number of accepted steps.
    """
    nr, nc = P.shape
    used = 0
    G = np.empty((nr, nc))
    D = np.empty((nr, nc))
    S = np.empty(nc)
    d = np.empty(nr)
    free = np.empty(nr, dtype=np.bool_)
    trial = np.empty((nr, nc))
    for _ in range(nsteps):
        block_grad_into(G, kind, P, px, pxcy, pxy, py, pz, b, mu, anchor, Q, Qhat, mu_zy, beta, c, omega)
        dmax = 0.0
        for k in range(nc):
            face_direction_into(P, G, k, eps, free, d)
            t = np.inf
            for j in range(nr):
                D[j, k] = d[j]
                if abs(d[j]) > dmax:
                    dmax = abs(d[j])
                if d[j] > 0.0:
                    r = (P[j, k] - eps) / d[j]
                    if r < t:
                        t = r
            S[k] = min(base, 0.99 * max(t, 0.0))
        if dmax < tol:
            break
        dec = 0.0
        for k in range(nc):
            for j in range(nr):
                dec += S[k] * D[j, k] * D[j, k]
        if dec <= 0.0:
            break
        f0 = block_value(kind, P, px, pxcy, py, pz, b, mu, anchor, Q, Qhat, mu_zy, beta, c, omega)
        theta = min(1.0, 2.0 * mem[slot])
        accepted = False
        for _bt in range(MAX_BACKTRACK):
            for k in range(nc):
                for j in range(nr):
                    trial[j, k] = P[j, k] - theta * S[k] * D[j, k]
            f1 = block_value(kind, trial, px, pxcy, py, pz, b, mu, anchor, Q, Qhat, mu_zy, beta, c, omega)
            if f1 <= f0 - sigma * theta * dec:
                accepted = True
                break
            theta *= shrink
        if not accepted:
            break
        mem[slot] = theta
        P[:, :] = trial
        used += 1
    return used


@njit(cache=True)
def _marginal_residual(E, pz, px, r):
    nz, nx = E.shape
    l1 = 0.0
    for j in range(nz):
        bj = 0.0
        for i in range(nx):
            bj += px[i] * E[j, i]
        r[j] = pz[j] - bj
        l1 += abs(r[j])
    return l1 * l1


@njit(cache=True)
def admm_loop(E, pz, mu, px, pxcy, pxy, py, beta, c, omega, eps, base, nsteps, tol,
              shrink, sigma, residual_tol, max_iters, mem):
    """Outer two-block iterations: encoder block, p_z block, dual ascent.

    Runs at most ``max_iters`` iterations in place and returns
    ``(iterations, converged, residual)`` with residual ``||p_z - B p_{z|x}||_1^2``.
    """
    nz = pz.shape[0]
    empty1 = np.empty(0)
    empty2 = np.empty((0, 0))
    b = np.empty(nz)
    r = np.empty(nz)
    P = np.empty((nz, 1))
    anchor = np.empty(nz)
    res = np.inf
    for it in range(1, max_iters + 1):
        descend(ADMM_ZX, E, px, pxcy, pxy, py, pz, empty1, mu, empty1, empty2, empty2, empty2,
                beta, c, omega, eps, base, nsteps, tol, shrink, sigma, mem, 0)
        for j in range(nz):
            s = 0.0
            for i in range(E.shape[1]):
                s += px[i] * E[j, i]
            b[j] = s
        anchor[:] = pz
        P[:, 0] = pz
        descend(Z, P, px, pxcy, pxy, py, pz, b, mu, anchor, empty2, empty2, empty2,
                beta, c, omega, eps, base, nsteps, tol, shrink, sigma, mem, 1)
        pz[:] = P[:, 0]
        res = _marginal_residual(E, pz, px, r)
        for j in range(nz):
            mu[j] += c * r[j]
        if res < residual_tol:
            return it, True, res
    return max_iters, False, res


@njit(cache=True)
def decoder_gap(E, Q, pxcy):
    """``max_{z,y} |p(z|y) - sum_x p(z|x)p(x|y) / sum_{x,z} p(z|x)p(x|y)|``."""
    nz, ny = Q.shape
    nx = E.shape[1]
    gap = 0.0
    for l in range(ny):
        tot = 0.0
        col = np.empty(nz)
        for j in range(nz):
            q = 0.0
            for i in range(nx):
                q += E[j, i] * pxcy[i, l]
            col[j] = q
            tot += q
        for j in range(nz):
            g = abs(Q[j, l] - col[j] / tot)
            if g > gap:
                gap = g
    return gap


@njit(cache=True)
def bayat_loop(E, pz, Q, mu, mu_zy, px, pxcy, pxy, py, beta, c, eps, base, nsteps, tol,
               shrink, sigma, residual_tol, decoder_tol, max_iters, mem):
    """Fixed-order three-block sweeps: encoder, p_z, p_{z|y}, then both duals.

    Returns ``(iterations, converged, residual, decoder_gap)``.
    """
    nz, nx = E.shape
    ny = Q.shape[1]
    empty1 = np.empty(0)
    empty2 = np.empty((0, 0))
    b = np.empty(nz)
    r = np.empty(nz)
    P = np.empty((nz, 1))
    Qhat = np.empty((nz, ny))
    res = np.inf
    gap = np.inf
    for it in range(1, max_iters + 1):
        descend(BAYAT_ZX, E, px, pxcy, pxy, py, pz, empty1, mu, empty1, Q, empty2, mu_zy,
                beta, c, 0.0, eps, base, nsteps, tol, shrink, sigma, mem, 0)
        for j in range(nz):
            s = 0.0
            for i in range(nx):
                s += px[i] * E[j, i]
            b[j] = s
            for l in range(ny):
                q = 0.0
                for i in range(nx):
                    q += E[j, i] * pxcy[i, l]
                Qhat[j, l] = q
        P[:, 0] = pz
        descend(Z, P, px, pxcy, pxy, py, pz, b, mu, empty1, empty2, empty2, empty2,
                beta, c, 0.0, eps, base, nsteps, tol, shrink, sigma, mem, 1)
        pz[:] = P[:, 0]
        descend(BAYAT_ZY, Q, px, pxcy, pxy, py, pz, b, mu, empty1, Q, Qhat, mu_zy,
                beta, c, 0.0, eps, base, nsteps, tol, shrink, sigma, mem, 2)
        res = _marginal_residual(E, pz, px, r)
        for j in range(nz):
            mu[j] += c * r[j]
            for l in range(ny):
                mu_zy[j, l] += c * (Q[j, l] - Qhat[j, l])
        gap = decoder_gap(E, Q, pxcy)
        if res < residual_tol and gap < decoder_tol:
            return it, True, res, gap
    return max_iters, False, res, gap
