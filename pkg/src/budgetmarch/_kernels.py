"""Numba kernels for the semi-Lagrangian solvers.

Conventions shared by every kernel:
  - fields are float64 arrays indexed [ix, iy] on the unit square, spacing h;
  - +inf marks unreachable/infeasible values and is propagated conservatively
    by interpolation (corners with weight < WEPS do not participate);
  - directions are angles; the minimization runs golden-section searches
    restarted on `nrestarts` uniform brackets of [0, 2pi), ties broken toward
    the smaller angle, plus direct-jump candidates to nearby terminal points
    (the only boundary data finite on a measure-zero set);
  - speed pack: (skind, sgrid, sp): 0 = gridded isotropic, 1 = elliptic
    anisotropic with sp = (F1, F2, amplitude, frequency), 2 = sinusoid with
    sp = (base, amp, kx, ky);
  - cost pack (per cost index i): ckinds[i] 0 = gridded (cgrids[i]),
    1 = equals speed, 2 = rectangles crects[cro[i]:cro[i]+crn[i]] each row
    (x0, x1, y0, y1, rate) overriding the outside rate couts[i], later rows
    winning.
"""

import math

import numpy as np
from numba import njit, prange

INF = np.inf
GOLD = 0.6180339887498949
WEPS = 1e-12
REACH_CELLS = 8.0  # direct terminal-jump radius, in units of h
GOLDEN_ITMAX = 80


# ---------------------------------------------------------------------------
# evaluators


@njit(cache=True, inline="always")
def _bilin(F, h, x, y):
    """Plain bilinear lookup of a finite field (speeds)."""
    nx, ny = F.shape
    i = int(x / h)
    j = int(y / h)
    if i < 0:
        i = 0
    if j < 0:
        j = 0
    if i > nx - 2:
        i = nx - 2
    if j > ny - 2:
        j = ny - 2
    gx = x / h - i
    gy = y / h - j
    return (1 - gx) * ((1 - gy) * F[i, j] + gy * F[i, j + 1]) + gx * (
        (1 - gy) * F[i + 1, j] + gy * F[i + 1, j + 1]
    )


@njit(cache=True, inline="always")
def _speed(skind, sgrid, sp, h, x, y, ca, sa):
    if skind == 0:
        return _bilin(sgrid, h, x, y)
    if skind == 2:
        return sp[0] + sp[1] * math.sin(sp[2] * x) * math.sin(sp[3] * y)
    # elliptic anisotropic
    F1 = sp[0]
    F2 = sp[1]
    dc = sp[2] * sp[3] * math.cos(sp[3] * x)
    s = math.sqrt((F2 / F1) ** 2 - 1.0) / math.sqrt(1.0 + dc * dc)
    d = (s * dc) * ca + (-s) * sa
    return F2 / math.sqrt(1.0 + d * d)


@njit(cache=True, inline="always")
def _cost(i, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa):
    k = ckinds[i]
    if k == 0:
        return _bilin(cgrids[i], h, x, y)
    if k == 1:
        return _speed(skind, sgrid, sp, h, x, y, ca, sa)
    rate = couts[i]
    for r in range(crn[i]):
        row = crects[cro[i] + r]
        if row[0] <= x <= row[1] and row[2] <= y <= row[3]:
            rate = row[4]
    return rate


@njit(cache=True)
def _seg_blocked(x0, y0, x1, y1, obs, h):
    """Sampled test for a segment crossing any obstacle rectangle."""
    nob = obs.shape[0]
    if nob == 0:
        return False
    dx = x1 - x0
    dy = y1 - y0
    ds = math.hypot(dx, dy)
    n = int(ds / (0.5 * h)) + 2
    for k in range(1, n + 1):
        t = k / n
        px = x0 + t * dx
        py = y0 + t * dy
        for r in range(nob):
            if obs[r, 0] <= px <= obs[r, 1] and obs[r, 2] <= py <= obs[r, 3]:
                return True
    return False


# ---------------------------------------------------------------------------
# conservative interpolation


@njit(cache=True, inline="always")
def _interp2_inf(F, h, x, y):
    """Bilinear with conservative +inf propagation over participating corners."""
    nx, ny = F.shape
    i = int(x / h)
    j = int(y / h)
    if i < 0:
        i = 0
    if j < 0:
        j = 0
    if i > nx - 2:
        i = nx - 2
    if j > ny - 2:
        j = ny - 2
    gx = x / h - i
    gy = y / h - j
    total = 0.0
    for di in range(2):
        wx = gx if di == 1 else 1.0 - gx
        for dj in range(2):
            w = wx * (gy if dj == 1 else 1.0 - gy)
            if w <= WEPS:
                continue
            v = F[i + di, j + dj]
            if not math.isfinite(v):
                return INF
            total += w * v
    return total


@njit(cache=True, inline="always")
def _interp2_excl(F, h, x, y, si, sj):
    """Bilinear numerator excluding the (si, sj) corner.

    Returns (num, wself, poisoned): num is the weighted sum of participating
    corners other than self, wself the self weight; poisoned means another
    participating corner is +inf.
    """
    nx, ny = F.shape
    i = int(x / h)
    j = int(y / h)
    if i < 0:
        i = 0
    if j < 0:
        j = 0
    if i > nx - 2:
        i = nx - 2
    if j > ny - 2:
        j = ny - 2
    gx = x / h - i
    gy = y / h - j
    total = 0.0
    wself = 0.0
    for di in range(2):
        wx = gx if di == 1 else 1.0 - gx
        for dj in range(2):
            w = wx * (gy if dj == 1 else 1.0 - gy)
            if w <= WEPS:
                continue
            if i + di == si and j + dj == sj:
                wself += w
                continue
            v = F[i + di, j + dj]
            if not math.isfinite(v):
                return 0.0, 0.0, True
            total += w * v
    return total, wself, False


# ---------------------------------------------------------------------------
# static solver (semi-Lagrangian fixed point, Gauss-Seidel sweeps)


@njit(cache=True)
def _static_obj(
    U, h, six, sjy, x, y, ang, tau,
    skind, sgrid, sp, ci, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    ca = math.cos(ang)
    sa = math.sin(ang)
    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
    if f <= 0.0:
        return INF
    fx = x + tau * f * ca
    fy = y + tau * f * sa
    if fx < 0.0 or fx > 1.0 or fy < 0.0 or fy > 1.0:
        return INF
    if _seg_blocked(x, y, fx, fy, obs, h):
        return INF
    K = _cost(ci, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    num, wself, poisoned = _interp2_excl(U, h, fx, fy, six, sjy)
    if poisoned or wself >= 1.0 - 1e-12:
        return INF
    return (tau * K + num) / (1.0 - wself)


@njit(cache=True)
def _terminal_candidate(
    x, y, tx, ty, tq, h, reach,
    skind, sgrid, sp, ci, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    """Direct jump to a terminal point; INF when out of reach or blocked."""
    dx = tx - x
    dy = ty - y
    d = math.hypot(dx, dy)
    if d <= 0.0 or d > reach:
        return INF
    if not math.isfinite(tq):
        return INF
    ca = dx / d
    sa = dy / d
    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
    if f <= 0.0:
        return INF
    if _seg_blocked(x, y, tx, ty, obs, h):
        return INF
    K = _cost(ci, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    return (d / f) * K + tq


@njit(cache=True)
def _best_static(
    U, h, six, sjy, x, y, tau, nrestarts, gtol,
    skind, sgrid, sp, ci, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q,
):
    """Minimize the static update at (x, y); returns (value, angle, term_idx).

    term_idx >= 0 flags that the optimum is a direct terminal jump.
    """
    best = INF
    best_ang = 0.0
    two_pi = 2.0 * math.pi
    span = two_pi / nrestarts
    for k in range(nrestarts):
        lo = span * k
        hi = lo + span
        v = _static_obj(U, h, six, sjy, x, y, lo, tau, skind, sgrid, sp, ci,
                        ckinds, cgrids, crn, cro, crects, couts, obs)
        if v < best:
            best = v
            best_ang = lo
        c = hi - GOLD * (hi - lo)
        d = lo + GOLD * (hi - lo)
        fc = _static_obj(U, h, six, sjy, x, y, c, tau, skind, sgrid, sp, ci,
                         ckinds, cgrids, crn, cro, crects, couts, obs)
        fd = _static_obj(U, h, six, sjy, x, y, d, tau, skind, sgrid, sp, ci,
                         ckinds, cgrids, crn, cro, crects, couts, obs)
        if fc < best:
            best = fc
            best_ang = c
        if fd < best:
            best = fd
            best_ang = d
        for _ in range(GOLDEN_ITMAX):
            if hi - lo <= gtol:
                break
            if fc < fd:
                hi = d
                d = c
                fd = fc
                c = hi - GOLD * (hi - lo)
                fc = _static_obj(U, h, six, sjy, x, y, c, tau, skind, sgrid, sp, ci,
                                 ckinds, cgrids, crn, cro, crects, couts, obs)
                if fc < best:
                    best = fc
                    best_ang = c
            else:
                lo = c
                c = d
                fc = fd
                d = lo + GOLD * (hi - lo)
                fd = _static_obj(U, h, six, sjy, x, y, d, tau, skind, sgrid, sp, ci,
                                 ckinds, cgrids, crn, cro, crects, couts, obs)
                if fd < best:
                    best = fd
                    best_ang = d
    best_term = -1
    reach = REACH_CELLS * h
    f0 = _speed(skind, sgrid, sp, h, x, y, 1.0, 0.0)
    if tau * f0 * 2.0 + h > reach:
        reach = tau * f0 * 2.0 + h
    for t in range(term_x.shape[0]):
        v = _terminal_candidate(x, y, term_x[t], term_y[t], term_q[t], h, reach,
                                skind, sgrid, sp, ci, ckinds, cgrids, crn, cro,
                                crects, couts, obs)
        if v < best:
            best = v
            best_term = t
            best_ang = math.atan2(term_y[t] - y, term_x[t] - x)
    return best, best_ang, best_term


@njit(cache=True)
def static_sweep(
    U, fixed, h, tau, nrestarts, gtol, order,
    skind, sgrid, sp, ci, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q,
):
    """One Gauss-Seidel sweep over the interior; returns the max update."""
    nx, ny = U.shape
    istep = 1 if order % 2 == 0 else -1
    jstep = 1 if (order // 2) % 2 == 0 else -1
    i0 = 0 if istep == 1 else nx - 1
    j0 = 0 if jstep == 1 else ny - 1
    max_change = 0.0
    for ii in range(nx):
        i = i0 + istep * ii
        for jj in range(ny):
            j = j0 + jstep * jj
            if fixed[i, j]:
                continue
            x = i * h
            y = j * h
            v, _, _ = _best_static(
                U, h, i, j, x, y, tau, nrestarts, gtol,
                skind, sgrid, sp, ci, ckinds, cgrids, crn, cro, crects, couts,
                obs, term_x, term_y, term_q,
            )
            old = U[i, j]
            if math.isfinite(old) or math.isfinite(v):
                if math.isfinite(old) and math.isfinite(v):
                    ch = abs(v - old)
                elif old == v:
                    ch = 0.0
                else:
                    ch = INF
                if ch > max_change:
                    max_change = ch
            U[i, j] = v
    return max_change


# ---------------------------------------------------------------------------
# restricted value functions: candidate collection against a converged u,
# then sweeps selecting the candidate that minimizes each v_i update.

MAXC = 16  # candidate slots per gridpoint


@njit(cache=True)
def collect_candidates(
    u, fixed, h, tau, nrestarts, gtol, band,
    skind, sgrid, sp, ci, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q,
    cand_kind, cand_ang, cand_tau, cand_fx, cand_fy, cand_term, cand_n,
):
    """Per-point u-argmin candidates within `band` of the best objective.

    cand_kind: 0 = semi-Lagrangian foot, 1 = terminal jump.
    """
    nx, ny = u.shape
    two_pi = 2.0 * math.pi
    span = two_pi / nrestarts
    for i in range(nx):
        for j in range(ny):
            cand_n[i, j] = 0
            if fixed[i, j] or not math.isfinite(u[i, j]):
                continue
            x = i * h
            y = j * h
            # bracket-best angles
            angs = np.empty(MAXC)
            vals = np.empty(MAXC)
            nc = 0
            for k in range(nrestarts):
                lo = span * k
                hi = lo + span
                bb = _static_obj(u, h, i, j, x, y, lo, tau, skind, sgrid, sp,
                                 ci, ckinds, cgrids, crn, cro, crects, couts, obs)
                ba = lo
                c = hi - GOLD * (hi - lo)
                d = lo + GOLD * (hi - lo)
                fc = _static_obj(u, h, i, j, x, y, c, tau, skind, sgrid, sp,
                                 ci, ckinds, cgrids, crn, cro, crects, couts, obs)
                fd = _static_obj(u, h, i, j, x, y, d, tau, skind, sgrid, sp,
                                 ci, ckinds, cgrids, crn, cro, crects, couts, obs)
                if fc < bb:
                    bb = fc
                    ba = c
                if fd < bb:
                    bb = fd
                    ba = d
                for _ in range(GOLDEN_ITMAX):
                    if hi - lo <= gtol:
                        break
                    if fc < fd:
                        hi = d
                        d = c
                        fd = fc
                        c = hi - GOLD * (hi - lo)
                        fc = _static_obj(u, h, i, j, x, y, c, tau, skind, sgrid,
                                         sp, ci, ckinds, cgrids, crn, cro,
                                         crects, couts, obs)
                        if fc < bb:
                            bb = fc
                            ba = c
                    else:
                        lo = c
                        c = d
                        fc = fd
                        d = lo + GOLD * (hi - lo)
                        fd = _static_obj(u, h, i, j, x, y, d, tau, skind, sgrid,
                                         sp, ci, ckinds, cgrids, crn, cro,
                                         crects, couts, obs)
                        if fd < bb:
                            bb = fd
                            ba = d
                if nc < MAXC and math.isfinite(bb):
                    angs[nc] = ba
                    vals[nc] = bb
                    nc += 1
            gbest = INF
            for k in range(nc):
                if vals[k] < gbest:
                    gbest = vals[k]
            nt = term_x.shape[0]
            reach = REACH_CELLS * h
            f0 = _speed(skind, sgrid, sp, h, x, y, 1.0, 0.0)
            if tau * f0 * 2.0 + h > reach:
                reach = tau * f0 * 2.0 + h
            for t in range(nt):
                v = _terminal_candidate(x, y, term_x[t], term_y[t], term_q[t],
                                        h, reach, skind, sgrid, sp, ci, ckinds,
                                        cgrids, crn, cro, crects, couts, obs)
                if v < gbest:
                    gbest = v
            # semi-Lagrangian foot candidates from the bracket optima
            m = 0
            for k in range(nc):
                if vals[k] <= gbest + band and m < MAXC:
                    ang = angs[k]
                    cand_ang[i, j, m] = ang
                    cand_kind[i, j, m] = 0
                    cand_term[i, j, m] = -1
                    ca = math.cos(ang)
                    sa = math.sin(ang)
                    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
                    cand_tau[i, j, m] = tau
                    cand_fx[i, j, m] = x + tau * f * ca
                    cand_fy[i, j, m] = y + tau * f * sa
                    m += 1
            # terminal jumps get explicit slots
            for t in range(nt):
                v = _terminal_candidate(x, y, term_x[t], term_y[t], term_q[t],
                                        h, reach, skind, sgrid, sp, ci, ckinds,
                                        cgrids, crn, cro, crects, couts, obs)
                if math.isfinite(v) and v <= gbest + band and m < MAXC:
                    dx = term_x[t] - x
                    dy = term_y[t] - y
                    d = math.hypot(dx, dy)
                    ang = math.atan2(dy, dx)
                    ca = math.cos(ang)
                    sa = math.sin(ang)
                    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
                    cand_ang[i, j, m] = ang
                    cand_kind[i, j, m] = 1
                    cand_term[i, j, m] = t
                    cand_tau[i, j, m] = d / f
                    cand_fx[i, j, m] = term_x[t]
                    cand_fy[i, j, m] = term_y[t]
                    m += 1
            cand_n[i, j] = m


@njit(cache=True)
def restricted_sweep(
    V, u, fixed, h, order,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts,
    cost_idx,
    cand_kind, cand_ang, cand_tau, cand_fx, cand_fy, cand_term, cand_n,
    term_qi,
):
    """One sweep updating the restricted costs V[m] over cached candidates."""
    nx, ny = u.shape
    ncost = cost_idx.shape[0]
    istep = 1 if order % 2 == 0 else -1
    jstep = 1 if (order // 2) % 2 == 0 else -1
    i0 = 0 if istep == 1 else nx - 1
    j0 = 0 if jstep == 1 else ny - 1
    max_change = 0.0
    for ii in range(nx):
        i = i0 + istep * ii
        for jj in range(ny):
            j = j0 + jstep * jj
            if fixed[i, j] or cand_n[i, j] == 0:
                continue
            x = i * h
            y = j * h
            for m in range(ncost):
                ci = cost_idx[m]
                best = INF
                for c in range(cand_n[i, j]):
                    ang = cand_ang[i, j, c]
                    ca = math.cos(ang)
                    sa = math.sin(ang)
                    K = _cost(ci, ckinds, cgrids, crn, cro, crects, couts,
                              skind, sgrid, sp, h, x, y, ca, sa)
                    tc = cand_tau[i, j, c]
                    if cand_kind[i, j, c] == 1:
                        v = tc * K + term_qi[m, cand_term[i, j, c]]
                    else:
                        num, wself, poisoned = _interp2_excl(
                            V[m], h, cand_fx[i, j, c], cand_fy[i, j, c], i, j
                        )
                        if poisoned or wself >= 1.0 - 1e-12:
                            continue
                        v = (tc * K + num) / (1.0 - wself)
                    if v < best:
                        best = v
                old = V[m, i, j]
                if math.isfinite(old) and math.isfinite(best):
                    ch = abs(best - old)
                elif old == best:
                    ch = 0.0
                else:
                    ch = INF
                if ch > max_change:
                    max_change = ch
                V[m, i, j] = best
    return max_change


# ---------------------------------------------------------------------------
# budget marching, Algorithm 1 (tau_a = db1 / K_1, foot in the previous slice)


@njit(cache=True)
def _march_obj_r1(
    Wprev, h, x, y, ang, db1, b1,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    ca = math.cos(ang)
    sa = math.sin(ang)
    K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    if not (K1 > 0.0) or not math.isfinite(K1):
        return INF
    t = db1 / K1
    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
    fx = x + t * f * ca
    fy = y + t * f * sa
    if fx < 0.0 or fx > 1.0 or fy < 0.0 or fy > 1.0:
        return INF
    if _seg_blocked(x, y, fx, fy, obs, h):
        return INF
    K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    w = _interp2_inf(Wprev, h, fx, fy)
    if not math.isfinite(w):
        return INF
    return t * K0 + w


@njit(cache=True)
def _march_term_r1(
    x, y, b1, tx, ty, tq0, tq1, h,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    dx = tx - x
    dy = ty - y
    d = math.hypot(dx, dy)
    if d <= 0.0 or d > REACH_CELLS * h:
        return INF
    if not math.isfinite(tq0):
        return INF
    ca = dx / d
    sa = dy / d
    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
    if f <= 0.0:
        return INF
    t = d / f
    K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    if b1 - t * K1 < tq1 - 1e-9:
        return INF
    if _seg_blocked(x, y, tx, ty, obs, h):
        return INF
    K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    return t * K0 + tq0


@njit(cache=True)
def _best_march_r1(
    Wprev, h, x, y, b1, db1, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q,
):
    best = INF
    best_ang = 0.0
    best_term = -1
    span = 2.0 * math.pi / nrestarts
    for k in range(nrestarts):
        lo = span * k
        hi = lo + span
        v = _march_obj_r1(Wprev, h, x, y, lo, db1, b1, skind, sgrid, sp,
                          ckinds, cgrids, crn, cro, crects, couts, obs)
        if v < best:
            best = v
            best_ang = lo
        c = hi - GOLD * (hi - lo)
        d = lo + GOLD * (hi - lo)
        fc = _march_obj_r1(Wprev, h, x, y, c, db1, b1, skind, sgrid, sp,
                           ckinds, cgrids, crn, cro, crects, couts, obs)
        fd = _march_obj_r1(Wprev, h, x, y, d, db1, b1, skind, sgrid, sp,
                           ckinds, cgrids, crn, cro, crects, couts, obs)
        if fc < best:
            best = fc
            best_ang = c
        if fd < best:
            best = fd
            best_ang = d
        for _ in range(GOLDEN_ITMAX):
            if hi - lo <= gtol:
                break
            if fc < fd:
                hi = d
                d = c
                fd = fc
                c = hi - GOLD * (hi - lo)
                fc = _march_obj_r1(Wprev, h, x, y, c, db1, b1, skind, sgrid, sp,
                                   ckinds, cgrids, crn, cro, crects, couts, obs)
                if fc < best:
                    best = fc
                    best_ang = c
            else:
                lo = c
                c = d
                fc = fd
                d = lo + GOLD * (hi - lo)
                fd = _march_obj_r1(Wprev, h, x, y, d, db1, b1, skind, sgrid, sp,
                                   ckinds, cgrids, crn, cro, crects, couts, obs)
                if fd < best:
                    best = fd
                    best_ang = d
    for t in range(term_x.shape[0]):
        v = _march_term_r1(x, y, b1, term_x[t], term_y[t], term_q[t, 0],
                           term_q[t, 1], h, skind, sgrid, sp, ckinds, cgrids,
                           crn, cro, crects, couts, obs)
        if v < best:
            best = v
            best_term = t
            best_ang = math.atan2(term_y[t] - y, term_x[t] - x)
    return best, best_ang, best_term


@njit(cache=True)
def _passenger_update_r1(
    Pprev, h, x, y, ang, term, db1,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts,
    term_x, term_y, term_q, pci,
):
    ca = math.cos(ang)
    sa = math.sin(ang)
    Kp = _cost(pci, ckinds, cgrids, crn, cro, crects, couts,
               skind, sgrid, sp, h, x, y, ca, sa)
    if term >= 0:
        d = math.hypot(term_x[term] - x, term_y[term] - y)
        f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
        return (d / f) * Kp + term_q[term, 2]
    K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts,
               skind, sgrid, sp, h, x, y, ca, sa)
    t = db1 / K1
    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
    return t * Kp + _interp2_inf(Pprev, h, x + t * f * ca, y + t * f * sa)


@njit(cache=True, parallel=True)
def march_slice_alg1_r1(
    Wprev, Wcur, code, h, b1, db1, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q, monotone,
):
    """Fill one b1-slice from the previous one (code 0 points only)."""
    nx, ny = Wprev.shape
    for i in prange(nx):
        for j in range(ny):
            if code[i, j] != 0:
                continue
            v, _, _ = _best_march_r1(
                Wprev, h, i * h, j * h, b1, db1, nrestarts, gtol,
                skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
                term_x, term_y, term_q,
            )
            # feasible sets nest in b: the previous slice bounds W from above
            if monotone and Wprev[i, j] < v:
                v = Wprev[i, j]
            Wcur[i, j] = v


@njit(cache=True)
def march_slice_alg1_r1_passenger(
    Wprev, Wcur, code, h, b1, db1, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q,
    Pprev, Pcur, pci, band, monotone,
):
    """Slice fill that also advances a companion cost field P.

    Among directions whose W update lies within `band` of the optimum the one
    minimizing the passenger update is selected (lower-envelope choice).
    """
    nx, ny = Wprev.shape
    span = 2.0 * math.pi / nrestarts
    for i in range(nx):
        for j in range(ny):
            if code[i, j] != 0:
                continue
            x = i * h
            y = j * h
            v, ang, term = _best_march_r1(
                Wprev, h, x, y, b1, db1, nrestarts, gtol,
                skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
                term_x, term_y, term_q,
            )
            take_prev = monotone and Wprev[i, j] < v
            if take_prev:
                v = Wprev[i, j]
            Wcur[i, j] = v
            if not math.isfinite(v):
                Pcur[i, j] = INF
                continue
            if take_prev:
                Pcur[i, j] = Pprev[i, j]
                continue
            pbest = _passenger_update_r1(
                Pprev, h, x, y, ang, term, db1, skind, sgrid, sp, ckinds,
                cgrids, crn, cro, crects, couts, term_x, term_y, term_q, pci)
            # lower-envelope selection over near-optimal directions
            for k in range(nrestarts):
                lo = span * k
                hi = lo + span
                c = hi - GOLD * (hi - lo)
                d = lo + GOLD * (hi - lo)
                fc = _march_obj_r1(Wprev, h, x, y, c, db1, b1, skind, sgrid,
                                   sp, ckinds, cgrids, crn, cro, crects,
                                   couts, obs)
                fd = _march_obj_r1(Wprev, h, x, y, d, db1, b1, skind, sgrid,
                                   sp, ckinds, cgrids, crn, cro, crects,
                                   couts, obs)
                for _ in range(GOLDEN_ITMAX):
                    if hi - lo <= gtol:
                        break
                    if fc < fd:
                        hi = d
                        d = c
                        fd = fc
                        c = hi - GOLD * (hi - lo)
                        fc = _march_obj_r1(Wprev, h, x, y, c, db1, b1, skind,
                                           sgrid, sp, ckinds, cgrids, crn,
                                           cro, crects, couts, obs)
                    else:
                        lo = c
                        c = d
                        fc = fd
                        d = lo + GOLD * (hi - lo)
                        fd = _march_obj_r1(Wprev, h, x, y, d, db1, b1, skind,
                                           sgrid, sp, ckinds, cgrids, crn,
                                           cro, crects, couts, obs)
                ba = c if fc < fd else d
                bv = fc if fc < fd else fd
                if math.isfinite(bv) and bv <= v + band:
                    pc = _passenger_update_r1(
                        Pprev, h, x, y, ba, -1, db1, skind, sgrid, sp, ckinds,
                        cgrids, crn, cro, crects, couts, term_x, term_y,
                        term_q, pci)
                    if pc < pbest:
                        pbest = pc
            for t in range(term_x.shape[0]):
                tv = _march_term_r1(x, y, b1, term_x[t], term_y[t],
                                    term_q[t, 0], term_q[t, 1], h, skind,
                                    sgrid, sp, ckinds, cgrids, crn, cro,
                                    crects, couts, obs)
                if math.isfinite(tv) and tv <= v + band:
                    ta = math.atan2(term_y[t] - y, term_x[t] - x)
                    pc = _passenger_update_r1(
                        Pprev, h, x, y, ta, t, db1, skind, sgrid, sp, ckinds,
                        cgrids, crn, cro, crects, couts, term_x, term_y,
                        term_q, pci)
                    if pc < pbest:
                        pbest = pc
            Pcur[i, j] = pbest


# --- r = 2 variant: previous slice is (N2, nx, ny); trilinear interpolation


@njit(cache=True)
def _interp3_inf(W, h, db2, x, y, b2):
    """(b2, x, y) conservative multilinear interpolation in one b1-slice."""
    n2, nx, ny = W.shape
    k = int(b2 / db2)
    if k < 0:
        k = 0
    if k > n2 - 2:
        k = n2 - 2
    gb = b2 / db2 - k
    lo = _interp2_inf(W[k], h, x, y)
    hi_w = gb
    if hi_w <= WEPS:
        return lo
    hi = _interp2_inf(W[k + 1], h, x, y)
    if 1.0 - gb <= WEPS:
        return hi
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return INF
    return (1.0 - gb) * lo + gb * hi


@njit(cache=True)
def _march_obj_r2(
    Wprev, h, db2, x, y, b2, ang, db1,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    ca = math.cos(ang)
    sa = math.sin(ang)
    K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    if not (K1 > 0.0) or not math.isfinite(K1):
        return INF
    t = db1 / K1
    K2 = _cost(2, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    nb2 = b2 - t * K2
    if nb2 < -1e-12:
        return INF
    if nb2 < 0.0:
        nb2 = 0.0
    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
    fx = x + t * f * ca
    fy = y + t * f * sa
    if fx < 0.0 or fx > 1.0 or fy < 0.0 or fy > 1.0:
        return INF
    if _seg_blocked(x, y, fx, fy, obs, h):
        return INF
    K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    w = _interp3_inf(Wprev, h, db2, fx, fy, nb2)
    if not math.isfinite(w):
        return INF
    return t * K0 + w


@njit(cache=True)
def _best_march_r2(
    Wprev, h, db2, x, y, b1, b2, db1, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q,
):
    best = INF
    best_ang = 0.0
    best_term = -1
    span = 2.0 * math.pi / nrestarts
    for k in range(nrestarts):
        lo = span * k
        hi = lo + span
        v = _march_obj_r2(Wprev, h, db2, x, y, b2, lo, db1, skind, sgrid, sp,
                          ckinds, cgrids, crn, cro, crects, couts, obs)
        if v < best:
            best = v
            best_ang = lo
        c = hi - GOLD * (hi - lo)
        d = lo + GOLD * (hi - lo)
        fc = _march_obj_r2(Wprev, h, db2, x, y, b2, c, db1, skind, sgrid, sp,
                           ckinds, cgrids, crn, cro, crects, couts, obs)
        fd = _march_obj_r2(Wprev, h, db2, x, y, b2, d, db1, skind, sgrid, sp,
                           ckinds, cgrids, crn, cro, crects, couts, obs)
        if fc < best:
            best = fc
            best_ang = c
        if fd < best:
            best = fd
            best_ang = d
        for _ in range(GOLDEN_ITMAX):
            if hi - lo <= gtol:
                break
            if fc < fd:
                hi = d
                d = c
                fd = fc
                c = hi - GOLD * (hi - lo)
                fc = _march_obj_r2(Wprev, h, db2, x, y, b2, c, db1, skind,
                                   sgrid, sp, ckinds, cgrids, crn, cro, crects,
                                   couts, obs)
                if fc < best:
                    best = fc
                    best_ang = c
            else:
                lo = c
                c = d
                fc = fd
                d = lo + GOLD * (hi - lo)
                fd = _march_obj_r2(Wprev, h, db2, x, y, b2, d, db1, skind,
                                   sgrid, sp, ckinds, cgrids, crn, cro, crects,
                                   couts, obs)
                if fd < best:
                    best = fd
                    best_ang = d
    for t in range(term_x.shape[0]):
        tx = term_x[t]
        ty = term_y[t]
        dx = tx - x
        dy = ty - y
        dd = math.hypot(dx, dy)
        if dd <= 0.0 or dd > REACH_CELLS * h or not math.isfinite(term_q[t, 0]):
            continue
        ca = dx / dd
        sa = dy / dd
        f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
        if f <= 0.0:
            continue
        tt = dd / f
        K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
        K2 = _cost(2, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
        if b1 - tt * K1 < term_q[t, 1] - 1e-9 or b2 - tt * K2 < term_q[t, 2] - 1e-9:
            continue
        if _seg_blocked(x, y, tx, ty, obs, h):
            continue
        K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
        v = tt * K0 + term_q[t, 0]
        if v < best:
            best = v
            best_term = t
            best_ang = math.atan2(dy, dx)
    return best, best_ang, best_term


@njit(cache=True, parallel=True)
def march_slice_alg1_r2(
    Wprev, Wcur, code, h, b1, db1, db2, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q, monotone,
):
    n2, nx, ny = Wprev.shape
    for k in prange(n2):
        b2 = k * db2
        for i in range(nx):
            for j in range(ny):
                if code[k, i, j] != 0:
                    continue
                v, _, _ = _best_march_r2(
                    Wprev, h, db2, i * h, j * h, b1, b2, db1, nrestarts, gtol,
                    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts,
                    obs, term_x, term_y, term_q,
                )
                if monotone and Wprev[k, i, j] < v:
                    v = Wprev[k, i, j]
                Wcur[k, i, j] = v


# ---------------------------------------------------------------------------
# budget marching, Algorithms 2 and 3 (piecewise ray walks through the
# extended grid; Algorithm 3 stops at the first face whose corners are all
# finalized under the lexicographic within-slice ordering).

_NUDGE = 1e-12


@njit(cache=True, inline="always")
def _next_plane_t(p, v, h):
    """Time to the next grid plane of spacing h along velocity component v."""
    if v > 1e-300:
        k = math.floor(p / h + 1e-9)
        target = (k + 1) * h
        return (target - p) / v
    if v < -1e-300:
        k = math.ceil(p / h - 1e-9)
        target = (k - 1) * h
        return (target - p) / v
    return INF


@njit(cache=True)
def _walk_obj_r1(
    Fprev, Fcur, final, h, x, y, b_top, db1, ang, alg, max_cells, acc_ci,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    """Ray walk for Algorithms 2/3, one budget layer deep.

    Interpolates the (Fprev, Fcur) field pair at the stop and accumulates
    running cost index acc_ci along the segments (0 for the value walk, the
    passenger index when re-walking the chosen ray for a companion field).
    Returns (value, cells): value = -1.0 signals a traversal-cap error.
    """
    ca = math.cos(ang)
    sa = math.sin(ang)
    px = x
    py = y
    pb = b_top
    b_bot = b_top - db1
    J0 = 0.0
    cells = 0
    while True:
        cells += 1
        if cells > max_cells:
            return -1.0, cells
        f = _speed(skind, sgrid, sp, h, px, py, ca, sa)
        K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, px, py, ca, sa)
        if f <= 0.0 or not (K1 > 0.0) or not math.isfinite(K1):
            return INF, cells
        K0 = _cost(acc_ci, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, px, py, ca, sa)
        vx = f * ca
        vy = f * sa
        vb = -K1
        tx = _next_plane_t(px, vx, h)
        ty = _next_plane_t(py, vy, h)
        tb = (b_bot - pb) / vb
        # smallest-index tie break: x before y before b
        dim = 2
        tmin = tb
        if ty < tmin - 1e-300:
            tmin = ty
            dim = 1
        if tx < tmin - 1e-300:
            tmin = tx
            dim = 0
        if tmin < 0.0:
            tmin = 0.0
        cx = px + tmin * vx
        cy = py + tmin * vy
        cb = pb + tmin * vb
        if _seg_blocked(px, py, cx, cy, obs, h):
            return INF, cells
        if dim == 2 or cb <= b_bot + 1e-15:
            J0 += tmin * K0
            if cx < 0.0 or cx > 1.0 or cy < 0.0 or cy > 1.0:
                return INF, cells
            w = _interp2_inf(Fprev, h, cx, cy)
            if not math.isfinite(w):
                return INF, cells
            return J0 + w, cells
        if alg == 3:
            # face at a constant-x or constant-y plane; corners span the
            # crossed interval of the other spatial axis times [b_bot, b_top]
            if dim == 0:
                gi = int(round(cx / h))
                gj = int(cy / h)
                nxg, nyg = Fprev.shape
                if gj > nyg - 2:
                    gj = nyg - 2
                if 0 <= gi < nxg and gj >= 0:
                    if final[gi, gj] and final[gi, gj + 1]:
                        wy = cy / h - gj
                        wb = (cb - b_bot) / db1
                        tot = 0.0
                        ok = True
                        for dj in range(2):
                            ww = wy if dj == 1 else 1.0 - wy
                            for db in range(2):
                                w2 = ww * (wb if db == 1 else 1.0 - wb)
                                if w2 <= WEPS:
                                    continue
                                vv = Fcur[gi, gj + dj] if db == 1 else Fprev[gi, gj + dj]
                                if not math.isfinite(vv):
                                    ok = False
                                    break
                                tot += w2 * vv
                            if not ok:
                                break
                        if ok:
                            return J0 + tmin * K0 + tot, cells
                        return INF, cells
            else:
                gj = int(round(cy / h))
                gi = int(cx / h)
                nxg, nyg = Fprev.shape
                if gi > nxg - 2:
                    gi = nxg - 2
                if 0 <= gj < nyg and gi >= 0:
                    if final[gi, gj] and final[gi + 1, gj]:
                        wx = cx / h - gi
                        wb = (cb - b_bot) / db1
                        tot = 0.0
                        ok = True
                        for di in range(2):
                            ww = wx if di == 1 else 1.0 - wx
                            for db in range(2):
                                w2 = ww * (wb if db == 1 else 1.0 - wb)
                                if w2 <= WEPS:
                                    continue
                                vv = Fcur[gi + di, gj] if db == 1 else Fprev[gi + di, gj]
                                if not math.isfinite(vv):
                                    ok = False
                                    break
                                tot += w2 * vv
                            if not ok:
                                break
                        if ok:
                            return J0 + tmin * K0 + tot, cells
                        return INF, cells
        # keep walking: re-evaluate coefficients past the face
        J0 += tmin * K0
        vn = math.sqrt(vx * vx + vy * vy + vb * vb)
        px = cx + vx / vn * _NUDGE
        py = cy + vy / vn * _NUDGE
        pb = cb + vb / vn * _NUDGE
        if px < 0.0 or px > 1.0 or py < 0.0 or py > 1.0:
            return INF, cells


@njit(cache=True)
def march_slice_walk_r1(
    Wprev, Wcur, code, final, h, b1, db1, alg, max_cells, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q, err, monotone,
    Pprev, Pcur, pci, use_passenger,
):
    """Fill one slice with Algorithm 2 or 3 in lexicographic (x1, x2) order.

    Returns total cells traversed.  err[0] is set to 1 (with the offending
    gridpoint and angle in err[1:]) when a walk exceeds max_cells.  With
    use_passenger the chosen ray is re-walked accumulating cost pci over the
    (Pprev, Pcur) companion field (same stop rule, so the same face).
    """
    nx, ny = Wprev.shape
    total_cells = 0
    span = 2.0 * math.pi / nrestarts
    for i in range(nx):
        for j in range(ny):
            if code[i, j] != 0:
                final[i, j] = 1
                continue
            x = i * h
            y = j * h
            best = INF
            best_ang = 0.0
            best_term = -1
            for k in range(nrestarts):
                lo = span * k
                hi = lo + span
                v, cl = _walk_obj_r1(Wprev, Wcur, final, h, x, y, b1, db1, lo,
                                     alg, max_cells, 0, skind, sgrid, sp, ckinds,
                                     cgrids, crn, cro, crects, couts, obs)
                total_cells += cl
                if v < 0.0:
                    err[0] = 1.0
                    err[1] = i
                    err[2] = j
                    err[3] = lo
                    return total_cells
                if v < best:
                    best = v
                    best_ang = lo
                    best_term = -1
                c = hi - GOLD * (hi - lo)
                d = lo + GOLD * (hi - lo)
                fc, cl = _walk_obj_r1(Wprev, Wcur, final, h, x, y, b1, db1, c,
                                      alg, max_cells, 0, skind, sgrid, sp, ckinds,
                                      cgrids, crn, cro, crects, couts, obs)
                total_cells += cl
                if fc < 0.0:
                    err[0] = 1.0
                    err[1] = i
                    err[2] = j
                    err[3] = c
                    return total_cells
                fd, cl = _walk_obj_r1(Wprev, Wcur, final, h, x, y, b1, db1, d,
                                      alg, max_cells, 0, skind, sgrid, sp, ckinds,
                                      cgrids, crn, cro, crects, couts, obs)
                total_cells += cl
                if fd < 0.0:
                    err[0] = 1.0
                    err[1] = i
                    err[2] = j
                    err[3] = d
                    return total_cells
                if fc < best:
                    best = fc
                    best_ang = c
                    best_term = -1
                if fd < best:
                    best = fd
                    best_ang = d
                    best_term = -1
                for _ in range(GOLDEN_ITMAX):
                    if hi - lo <= gtol:
                        break
                    if fc < fd:
                        hi = d
                        d = c
                        fd = fc
                        c = hi - GOLD * (hi - lo)
                        fc, cl = _walk_obj_r1(Wprev, Wcur, final, h, x, y, b1,
                                              db1, c, alg, max_cells, 0, skind,
                                              sgrid, sp, ckinds, cgrids, crn,
                                              cro, crects, couts, obs)
                        total_cells += cl
                        if fc < 0.0:
                            err[0] = 1.0
                            err[1] = i
                            err[2] = j
                            err[3] = c
                            return total_cells
                        if fc < best:
                            best = fc
                            best_ang = c
                            best_term = -1
                    else:
                        lo = c
                        c = d
                        fc = fd
                        d = lo + GOLD * (hi - lo)
                        fd, cl = _walk_obj_r1(Wprev, Wcur, final, h, x, y, b1,
                                              db1, d, alg, max_cells, 0, skind,
                                              sgrid, sp, ckinds, cgrids, crn,
                                              cro, crects, couts, obs)
                        total_cells += cl
                        if fd < 0.0:
                            err[0] = 1.0
                            err[1] = i
                            err[2] = j
                            err[3] = d
                            return total_cells
                        if fd < best:
                            best = fd
                            best_ang = d
                            best_term = -1
            for t in range(term_x.shape[0]):
                v = _march_term_r1(x, y, b1, term_x[t], term_y[t], term_q[t, 0],
                                   term_q[t, 1], h, skind, sgrid, sp, ckinds,
                                   cgrids, crn, cro, crects, couts, obs)
                if v < best:
                    best = v
                    best_term = t
                    best_ang = math.atan2(term_y[t] - y, term_x[t] - x)
            take_prev = monotone and Wprev[i, j] < best
            if take_prev:
                best = Wprev[i, j]
            Wcur[i, j] = best
            if use_passenger:
                if not math.isfinite(best):
                    Pcur[i, j] = INF
                elif take_prev:
                    Pcur[i, j] = Pprev[i, j]
                elif best_term >= 0:
                    Pcur[i, j] = _passenger_update_r1(
                        Pprev, h, x, y, best_ang, best_term, db1, skind, sgrid,
                        sp, ckinds, cgrids, crn, cro, crects, couts,
                        term_x, term_y, term_q, pci)
                else:
                    pv, cl = _walk_obj_r1(Pprev, Pcur, final, h, x, y, b1, db1,
                                          best_ang, alg, max_cells, pci, skind,
                                          sgrid, sp, ckinds, cgrids, crn, cro,
                                          crects, couts, obs)
                    total_cells += cl
                    Pcur[i, j] = pv if pv >= 0.0 else INF
            final[i, j] = 1
    return total_cells


@njit(cache=True)
def _walk_obj_r2(
    Wprev, Wcur, final, h, db2, x, y, b2, b_top, db1, ang, alg, max_cells,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    """4D ray walk (x, y, b1, b2) for Algorithms 2/3 with r = 2."""
    ca = math.cos(ang)
    sa = math.sin(ang)
    px = x
    py = y
    pb = b_top
    p2 = b2
    b_bot = b_top - db1
    n2 = Wprev.shape[0]
    J0 = 0.0
    cells = 0
    while True:
        cells += 1
        if cells > max_cells:
            return -1.0, cells
        f = _speed(skind, sgrid, sp, h, px, py, ca, sa)
        K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, px, py, ca, sa)
        K2 = _cost(2, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, px, py, ca, sa)
        if f <= 0.0 or not (K1 > 0.0) or not math.isfinite(K1) or not math.isfinite(K2):
            return INF, cells
        K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, px, py, ca, sa)
        vx = f * ca
        vy = f * sa
        vb = -K1
        v2 = -K2
        tx = _next_plane_t(px, vx, h)
        ty = _next_plane_t(py, vy, h)
        tb = (b_bot - pb) / vb
        t2 = _next_plane_t(p2, v2, db2) if K2 > 0.0 else INF
        dim = 2
        tmin = tb
        if t2 < tmin - 1e-300:
            tmin = t2
            dim = 3
        if ty < tmin - 1e-300:
            tmin = ty
            dim = 1
        if tx < tmin - 1e-300:
            tmin = tx
            dim = 0
        if tmin < 0.0:
            tmin = 0.0
        cx = px + tmin * vx
        cy = py + tmin * vy
        cb = pb + tmin * vb
        c2 = p2 + tmin * v2
        if c2 < -1e-12:
            return INF, cells
        if _seg_blocked(px, py, cx, cy, obs, h):
            return INF, cells
        if dim == 2 or cb <= b_bot + 1e-15:
            J0 += tmin * K0
            if cx < 0.0 or cx > 1.0 or cy < 0.0 or cy > 1.0:
                return INF, cells
            w = _interp3_inf(Wprev, h, db2, cx, cy, max(c2, 0.0))
            if not math.isfinite(w):
                return INF, cells
            return J0 + w, cells
        if alg == 3:
            wb = (cb - b_bot) / db1
            if dim == 0 or dim == 1:
                gi = int(round(cx / h)) if dim == 0 else int(cx / h)
                gj = int(round(cy / h)) if dim == 1 else int(cy / h)
                nxg = Wprev.shape[1]
                nyg = Wprev.shape[2]
                if dim == 0 and gj > nyg - 2:
                    gj = nyg - 2
                if dim == 1 and gi > nxg - 2:
                    gi = nxg - 2
                k2 = int(c2 / db2)
                if k2 > n2 - 2:
                    k2 = n2 - 2
                if 0 <= gi < nxg and 0 <= gj < nyg and k2 >= 0:
                    all_final = True
                    for dk in range(2):
                        if dim == 0:
                            if not (final[k2 + dk, gi, gj] and final[k2 + dk, gi, gj + 1]):
                                all_final = False
                                break
                        else:
                            if not (final[k2 + dk, gi, gj] and final[k2 + dk, gi + 1, gj]):
                                all_final = False
                                break
                    if all_final:
                        wo = cy / h - gj if dim == 0 else cx / h - gi
                        w2c = c2 / db2 - k2
                        tot = 0.0
                        ok = True
                        for dk in range(2):
                            wk = w2c if dk == 1 else 1.0 - w2c
                            for do in range(2):
                                wwo = wo if do == 1 else 1.0 - wo
                                for dbn in range(2):
                                    w3 = wk * wwo * (wb if dbn == 1 else 1.0 - wb)
                                    if w3 <= WEPS:
                                        continue
                                    if dim == 0:
                                        vv = (Wcur[k2 + dk, gi, gj + do]
                                              if dbn == 1 else Wprev[k2 + dk, gi, gj + do])
                                    else:
                                        vv = (Wcur[k2 + dk, gi + do, gj]
                                              if dbn == 1 else Wprev[k2 + dk, gi + do, gj])
                                    if not math.isfinite(vv):
                                        ok = False
                                        break
                                    tot += w3 * vv
                                if not ok:
                                    break
                            if not ok:
                                break
                        if ok:
                            return J0 + tmin * K0 + tot, cells
                        return INF, cells
            elif dim == 3:
                k2c = int(round(c2 / db2))
                gi = int(cx / h)
                gj = int(cy / h)
                nxg = Wprev.shape[1]
                nyg = Wprev.shape[2]
                if gi > nxg - 2:
                    gi = nxg - 2
                if gj > nyg - 2:
                    gj = nyg - 2
                if 0 <= k2c < n2 and gi >= 0 and gj >= 0:
                    all_final = True
                    for di in range(2):
                        for dj in range(2):
                            if not final[k2c, gi + di, gj + dj]:
                                all_final = False
                                break
                        if not all_final:
                            break
                    if all_final:
                        wx = cx / h - gi
                        wy = cy / h - gj
                        tot = 0.0
                        ok = True
                        for di in range(2):
                            wwx = wx if di == 1 else 1.0 - wx
                            for dj in range(2):
                                wwy = wwx * (wy if dj == 1 else 1.0 - wy)
                                for dbn in range(2):
                                    w3 = wwy * (wb if dbn == 1 else 1.0 - wb)
                                    if w3 <= WEPS:
                                        continue
                                    vv = (Wcur[k2c, gi + di, gj + dj]
                                          if dbn == 1 else Wprev[k2c, gi + di, gj + dj])
                                    if not math.isfinite(vv):
                                        ok = False
                                        break
                                    tot += w3 * vv
                                if not ok:
                                    break
                            if not ok:
                                break
                        if ok:
                            return J0 + tmin * K0 + tot, cells
                        return INF, cells
        J0 += tmin * K0
        vn = math.sqrt(vx * vx + vy * vy + vb * vb + v2 * v2)
        px = cx + vx / vn * _NUDGE
        py = cy + vy / vn * _NUDGE
        pb = cb + vb / vn * _NUDGE
        p2 = c2 + v2 / vn * _NUDGE
        if px < 0.0 or px > 1.0 or py < 0.0 or py > 1.0 or p2 < 0.0:
            return INF, cells


@njit(cache=True)
def march_slice_walk_r2(
    Wprev, Wcur, code, final, h, b1, db1, db2, alg, max_cells, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q, err, monotone,
):
    """Algorithm 2/3 slice fill for r = 2, lexicographic (b2, x1, x2) order."""
    n2, nx, ny = Wprev.shape
    total_cells = 0
    span = 2.0 * math.pi / nrestarts
    for k in range(n2):
        b2 = k * db2
        for i in range(nx):
            for j in range(ny):
                if code[k, i, j] != 0:
                    final[k, i, j] = 1
                    continue
                x = i * h
                y = j * h
                best = INF
                for kk in range(nrestarts):
                    lo = span * kk
                    hi = lo + span
                    c = hi - GOLD * (hi - lo)
                    d = lo + GOLD * (hi - lo)
                    v, cl = _walk_obj_r2(Wprev, Wcur, final, h, db2, x, y, b2,
                                         b1, db1, lo, alg, max_cells, skind,
                                         sgrid, sp, ckinds, cgrids, crn, cro,
                                         crects, couts, obs)
                    total_cells += cl
                    if v < 0.0:
                        err[0] = 1.0
                        err[1] = i
                        err[2] = j
                        err[3] = lo
                        return total_cells
                    if v < best:
                        best = v
                    fc, cl = _walk_obj_r2(Wprev, Wcur, final, h, db2, x, y, b2,
                                          b1, db1, c, alg, max_cells, skind,
                                          sgrid, sp, ckinds, cgrids, crn, cro,
                                          crects, couts, obs)
                    total_cells += cl
                    fd, cl = _walk_obj_r2(Wprev, Wcur, final, h, db2, x, y, b2,
                                          b1, db1, d, alg, max_cells, skind,
                                          sgrid, sp, ckinds, cgrids, crn, cro,
                                          crects, couts, obs)
                    total_cells += cl
                    if fc < 0.0 or fd < 0.0:
                        err[0] = 1.0
                        err[1] = i
                        err[2] = j
                        return total_cells
                    if fc < best:
                        best = fc
                    if fd < best:
                        best = fd
                    for _ in range(GOLDEN_ITMAX):
                        if hi - lo <= gtol:
                            break
                        if fc < fd:
                            hi = d
                            d = c
                            fd = fc
                            c = hi - GOLD * (hi - lo)
                            fc, cl = _walk_obj_r2(Wprev, Wcur, final, h, db2, x,
                                                  y, b2, b1, db1, c, alg,
                                                  max_cells, skind, sgrid, sp,
                                                  ckinds, cgrids, crn, cro,
                                                  crects, couts, obs)
                            total_cells += cl
                            if fc < 0.0:
                                err[0] = 1.0
                                return total_cells
                            if fc < best:
                                best = fc
                        else:
                            lo = c
                            c = d
                            fc = fd
                            d = lo + GOLD * (hi - lo)
                            fd, cl = _walk_obj_r2(Wprev, Wcur, final, h, db2, x,
                                                  y, b2, b1, db1, d, alg,
                                                  max_cells, skind, sgrid, sp,
                                                  ckinds, cgrids, crn, cro,
                                                  crects, couts, obs)
                            total_cells += cl
                            if fd < 0.0:
                                err[0] = 1.0
                                return total_cells
                            if fd < best:
                                best = fd
                for t in range(term_x.shape[0]):
                    tx = term_x[t]
                    ty = term_y[t]
                    dd = math.hypot(tx - x, ty - y)
                    if dd <= 0.0 or dd > REACH_CELLS * h or not math.isfinite(term_q[t, 0]):
                        continue
                    ca = (tx - x) / dd
                    sa = (ty - y) / dd
                    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
                    if f <= 0.0:
                        continue
                    tt = dd / f
                    K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
                    K2 = _cost(2, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
                    if b1 - tt * K1 < term_q[t, 1] - 1e-9 or b2 - tt * K2 < term_q[t, 2] - 1e-9:
                        continue
                    if _seg_blocked(x, y, tx, ty, obs, h):
                        continue
                    K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
                    v = tt * K0 + term_q[t, 0]
                    if v < best:
                        best = v
                if monotone and Wprev[k, i, j] < best:
                    best = Wprev[k, i, j]
                Wcur[k, i, j] = best
                final[k, i, j] = 1
    return total_cells


# ---------------------------------------------------------------------------
# characteristic tracing helpers (read-only over solved fields)


@njit(cache=True)
def interp_w3(W3, h, db1, x, y, b1):
    """Conservative multilinear interpolation of a full (N1, nx, ny) field."""
    return _interp3_inf(W3, h, db1, x, y, b1)


@njit(cache=True)
def interp_w4(W4, h, db1, db2, x, y, b1, b2):
    n1 = W4.shape[0]
    k = int(b1 / db1)
    if k < 0:
        k = 0
    if k > n1 - 2:
        k = n1 - 2
    gb = b1 / db1 - k
    lo = _interp3_inf(W4[k], h, db2, x, y, b2)
    if gb <= WEPS:
        return lo
    hi = _interp3_inf(W4[k + 1], h, db2, x, y, b2)
    if 1.0 - gb <= WEPS:
        return hi
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return INF
    return (1.0 - gb) * lo + gb * hi


@njit(cache=True)
def best_trace_r1(
    W3, h, db1, x, y, b1, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q,
):
    """One constrained-characteristic step choice at an off-grid state."""
    best = INF
    best_ang = 0.0
    best_term = -1
    span = 2.0 * math.pi / nrestarts
    feasible_step = b1 - db1 >= -1e-12
    for k in range(nrestarts):
        lo = span * k
        hi = lo + span
        c = hi - GOLD * (hi - lo)
        d = lo + GOLD * (hi - lo)
        fs = (_trace_obj_r1(W3, h, db1, x, y, b1, lo, skind, sgrid, sp, ckinds,
                            cgrids, crn, cro, crects, couts, obs)
              if feasible_step else INF)
        if fs < best:
            best = fs
            best_ang = lo
        fc = (_trace_obj_r1(W3, h, db1, x, y, b1, c, skind, sgrid, sp, ckinds,
                            cgrids, crn, cro, crects, couts, obs)
              if feasible_step else INF)
        fd = (_trace_obj_r1(W3, h, db1, x, y, b1, d, skind, sgrid, sp, ckinds,
                            cgrids, crn, cro, crects, couts, obs)
              if feasible_step else INF)
        if fc < best:
            best = fc
            best_ang = c
        if fd < best:
            best = fd
            best_ang = d
        for _ in range(GOLDEN_ITMAX):
            if hi - lo <= gtol or not feasible_step:
                break
            if fc < fd:
                hi = d
                d = c
                fd = fc
                c = hi - GOLD * (hi - lo)
                fc = _trace_obj_r1(W3, h, db1, x, y, b1, c, skind, sgrid, sp,
                                   ckinds, cgrids, crn, cro, crects, couts, obs)
                if fc < best:
                    best = fc
                    best_ang = c
            else:
                lo = c
                c = d
                fc = fd
                d = lo + GOLD * (hi - lo)
                fd = _trace_obj_r1(W3, h, db1, x, y, b1, d, skind, sgrid, sp,
                                   ckinds, cgrids, crn, cro, crects, couts, obs)
                if fd < best:
                    best = fd
                    best_ang = d
    for t in range(term_x.shape[0]):
        v = _march_term_r1(x, y, b1, term_x[t], term_y[t], term_q[t, 0],
                           term_q[t, 1], h, skind, sgrid, sp, ckinds, cgrids,
                           crn, cro, crects, couts, obs)
        if v < best:
            best = v
            best_term = t
            best_ang = math.atan2(term_y[t] - y, term_x[t] - x)
    return best, best_ang, best_term


@njit(cache=True)
def _trace_obj_r1(
    W3, h, db1, x, y, b1, ang,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    ca = math.cos(ang)
    sa = math.sin(ang)
    K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    if not (K1 > 0.0) or not math.isfinite(K1):
        return INF
    t = db1 / K1
    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
    fx = x + t * f * ca
    fy = y + t * f * sa
    if fx < 0.0 or fx > 1.0 or fy < 0.0 or fy > 1.0:
        return INF
    if _seg_blocked(x, y, fx, fy, obs, h):
        return INF
    K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    w = _interp3_inf(W3, h, db1, fx, fy, b1 - db1)
    if not math.isfinite(w):
        return INF
    return t * K0 + w


@njit(cache=True)
def _trace_obj_r2(
    W4, h, db1, db2, x, y, b1, b2, ang,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
):
    ca = math.cos(ang)
    sa = math.sin(ang)
    K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    if not (K1 > 0.0) or not math.isfinite(K1):
        return INF
    t = db1 / K1
    K2 = _cost(2, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    nb2 = b2 - t * K2
    if nb2 < -1e-12:
        return INF
    f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
    fx = x + t * f * ca
    fy = y + t * f * sa
    if fx < 0.0 or fx > 1.0 or fy < 0.0 or fy > 1.0:
        return INF
    if _seg_blocked(x, y, fx, fy, obs, h):
        return INF
    K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
    w = interp_w4(W4, h, db1, db2, fx, fy, b1 - db1, max(nb2, 0.0))
    if not math.isfinite(w):
        return INF
    return t * K0 + w


@njit(cache=True)
def best_trace_r2(
    W4, h, db1, db2, x, y, b1, b2, nrestarts, gtol,
    skind, sgrid, sp, ckinds, cgrids, crn, cro, crects, couts, obs,
    term_x, term_y, term_q,
):
    best = INF
    best_ang = 0.0
    best_term = -1
    span = 2.0 * math.pi / nrestarts
    feasible_step = b1 - db1 >= -1e-12
    for k in range(nrestarts):
        lo = span * k
        hi = lo + span
        c = hi - GOLD * (hi - lo)
        d = lo + GOLD * (hi - lo)
        fs = (_trace_obj_r2(W4, h, db1, db2, x, y, b1, b2, lo, skind, sgrid,
                            sp, ckinds, cgrids, crn, cro, crects, couts, obs)
              if feasible_step else INF)
        if fs < best:
            best = fs
            best_ang = lo
        fc = (_trace_obj_r2(W4, h, db1, db2, x, y, b1, b2, c, skind, sgrid,
                            sp, ckinds, cgrids, crn, cro, crects, couts, obs)
              if feasible_step else INF)
        fd = (_trace_obj_r2(W4, h, db1, db2, x, y, b1, b2, d, skind, sgrid,
                            sp, ckinds, cgrids, crn, cro, crects, couts, obs)
              if feasible_step else INF)
        if fc < best:
            best = fc
            best_ang = c
        if fd < best:
            best = fd
            best_ang = d
        for _ in range(GOLDEN_ITMAX):
            if hi - lo <= gtol or not feasible_step:
                break
            if fc < fd:
                hi = d
                d = c
                fd = fc
                c = hi - GOLD * (hi - lo)
                fc = _trace_obj_r2(W4, h, db1, db2, x, y, b1, b2, c, skind,
                                   sgrid, sp, ckinds, cgrids, crn, cro, crects,
                                   couts, obs)
                if fc < best:
                    best = fc
                    best_ang = c
            else:
                lo = c
                c = d
                fc = fd
                d = lo + GOLD * (hi - lo)
                fd = _trace_obj_r2(W4, h, db1, db2, x, y, b1, b2, d, skind,
                                   sgrid, sp, ckinds, cgrids, crn, cro, crects,
                                   couts, obs)
                if fd < best:
                    best = fd
                    best_ang = d
    for t in range(term_x.shape[0]):
        tx = term_x[t]
        ty = term_y[t]
        dd = math.hypot(tx - x, ty - y)
        if dd <= 0.0 or dd > REACH_CELLS * h or not math.isfinite(term_q[t, 0]):
            continue
        ca = (tx - x) / dd
        sa = (ty - y) / dd
        f = _speed(skind, sgrid, sp, h, x, y, ca, sa)
        if f <= 0.0:
            continue
        tt = dd / f
        K1 = _cost(1, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
        K2 = _cost(2, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
        if b1 - tt * K1 < term_q[t, 1] - 1e-9 or b2 - tt * K2 < term_q[t, 2] - 1e-9:
            continue
        if _seg_blocked(x, y, tx, ty, obs, h):
            continue
        K0 = _cost(0, ckinds, cgrids, crn, cro, crects, couts, skind, sgrid, sp, h, x, y, ca, sa)
        v = tt * K0 + term_q[t, 0]
        if v < best:
            best = v
            best_term = t
            best_ang = math.atan2(ty - y, tx - x)
    return best, best_ang, best_term


# public aliases for the tracers
best_static = _best_static
