"""Pure-Python twin of the compiled coordinate-descent kernels.

Same algorithm, same update order and same return tuples as ``_cd.pyx``;
used when the extension is not built or ``BBSRC_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np


def _soft(v, t):
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


FIRST_POLISH = 10
POLISH_EVERY = 10


def _chol_solve(GA, rhs):
    try:
        L = np.linalg.cholesky(GA)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.diag(L) ** 2 <= 1e-14 * np.diag(GA)):
        return None
    return np.linalg.solve(L.T, np.linalg.solve(L, rhs))


def _ls_start(G, b, x, q):
    z = _chol_solve(G, b)
    if z is None:
        return False
    x[:] = z
    q[:] = b - G @ z
    return True


def _polish(G, x, q, lam, skip=-1):
    act = np.flatnonzero(x)
    if skip >= 0:
        act = act[act != skip]
    if act.size == 0:
        return False
    sg = np.where(x[act] > 0, 1.0, -1.0)
    b = q + G @ x
    z = _chol_solve(G[np.ix_(act, act)], b[act] - lam * sg)
    if z is None:
        return False
    if np.any((z > 0) != (sg > 0)) or np.any(z == 0):
        return False
    qn = b - G[:, act] @ z
    off = np.ones(x.shape[0], dtype=bool)
    off[act] = False
    if np.any(np.abs(qn[off]) > lam * (1.0 + 1e-9) + 1e-14):
        return False
    x[:] = 0.0
    x[act] = z
    q[:] = qn
    return True


def _cd_sweeps(G, x, q, lam, tol, max_sweeps):
    s = G.shape[0]
    diag = G.diagonal()
    sweep = 0
    next_polish = FIRST_POLISH
    while sweep < max_sweeps:
        sweep += 1
        maxd = 0.0
        for j in range(s):
            gjj = diag[j]
            old = x[j]
            new = _soft(q[j] + gjj * old, lam) / gjj
            delta = new - old
            if delta != 0.0:
                x[j] = new
                q -= G[:, j] * delta
                if abs(delta) > maxd:
                    maxd = abs(delta)
        if maxd < tol:
            return sweep, True
        if sweep % POLISH_EVERY == 0 and _polish(G, x, q, lam):
            return sweep, True
        if sweep == next_polish:
            next_polish *= 2
            if any(_polish(G, x, q, lam, j) for j in np.flatnonzero(x)):
                return sweep, True
    return sweep, False


def _residual(b, x, q, yy):
    acc = yy
    for j in range(x.shape[0]):
        acc -= x[j] * (b[j] + q[j])
    return math.sqrt(max(acc, 0.0))


def lasso_cd(G, b, lam, x0=None, tol=1e-8, max_sweeps=1000):
    G = np.ascontiguousarray(G, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    x = np.zeros(G.shape[0]) if x0 is None else np.array(x0, dtype=np.float64)
    q = b - G @ x
    sweeps, conv = _cd_sweeps(G, x, q, lam, tol, max_sweeps)
    return x, sweeps, conv


def bpdn_gram(G, b, yy, eps, res_tol, lam_floor_rel=1e-10, tol=1e-8,
              max_sweeps=1000, max_bisect=200):
    G = np.ascontiguousarray(G, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    s = G.shape[0]
    x = np.zeros(s)
    q = b.copy()
    lam_max = float(np.max(np.abs(b))) if s else 0.0
    ynorm = math.sqrt(yy)
    if eps >= ynorm or lam_max == 0.0:
        return x, lam_max, ynorm, 0, 0, 1, True

    nb = 0
    lam_lo = lam_max * lam_floor_rel
    if not _ls_start(G, b, x, q):
        x[:] = 0.0
        q[:] = b
    sweeps, floor_conv = _cd_sweeps(G, x, q, lam_lo, tol, max_sweeps)
    res_lo = _residual(b, x, q, yy)
    lam, res, final_conv = lam_lo, res_lo, floor_conv
    if eps == 0.0 or (res_lo > eps + res_tol and floor_conv):
        status = 2 if res_lo > eps + res_tol else 0
    elif abs(res_lo - eps) <= res_tol:
        status = 0
    else:
        xlo, qlo = x.copy(), q.copy()
        lo_conv = floor_conv
        found = res_lo <= eps
        lam_hi = lam_max
        status = 3
        while nb < max_bisect and lam_hi > lam_lo * (1.0 + 1e-12):
            nb += 1
            lam = math.exp(0.5 * (math.log(lam_lo) + math.log(lam_hi)))
            n, conv = _cd_sweeps(G, x, q, lam, tol, max_sweeps)
            sweeps += n
            final_conv = conv
            res = _residual(b, x, q, yy)
            if abs(res - eps) <= res_tol:
                status = 0
                break
            if res > eps:
                lam_hi = lam
            else:
                found = True
                lam_lo, res_lo, lo_conv = lam, res, conv
                xlo[:] = x
                qlo[:] = q
        if status == 3:
            x, q = xlo, qlo
            lam, res, final_conv = lam_lo, res_lo, lo_conv
            if not found:
                status = 2
    return x, lam, res, sweeps, nb, status, final_conv
