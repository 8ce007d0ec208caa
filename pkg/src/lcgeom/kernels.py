"""Hot inner loops, each in two flavours.

``*_nb`` functions are plain loops compiled by numba; ``*_np`` functions are
vectorized numpy. The public names at the bottom pick one according to
:data:`lcgeom._accel.USE_NUMBA`. Randomness is never drawn inside a kernel:
callers pass pre-drawn directions and uniforms, which keeps both paths on the
same stream.

Convex bodies reach the kernels as a constraint program::

    hA x <= hb                              (half-spaces, shape (k, n))
    || nL[j] (x - nc[j]) ||_{npow[j]} <= 1  (norm balls, shape (m, n, n))
    | x - center |_2 <= radius              (phase ball, radius <= 0 disables)
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# symmetric eigendecomposition (Jacobi)


@njit
def _jacobi_eigh_nb(a, tol, max_sweeps):
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    frob = 0.0
    for i in range(n):
        for j in range(n):
            frob += A[i, j] * A[i, j]
    frob = math.sqrt(frob)
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += A[i, j] * A[i, j]
        if math.sqrt(2.0 * off) <= tol * frob or off == 0.0:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    return w, V, sweeps


def _round_robin(m):
    """Brent-Luk tournament: m-1 rounds of m/2 disjoint pairs (m even)."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        top, bottom = players[:half], players[half:][::-1]
        p = np.array([min(a, b) for a, b in zip(top, bottom)])
        q = np.array([max(a, b) for a, b in zip(top, bottom)])
        rounds.append((p, q))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi_eigh_np(a, tol, max_sweeps):
    n = a.shape[0]
    m = n + (n % 2)
    A = np.zeros((m, m))
    A[:n, :n] = a
    V = np.eye(m)
    frob = np.sqrt(np.sum(a * a))
    rounds = _round_robin(m) if m > 1 else []
    iu = np.triu_indices(m, 1)
    sweeps = 0
    for _ in range(max_sweeps):
        off = np.sum(A[iu] ** 2)
        if np.sqrt(2.0 * off) <= tol * frob or off == 0.0:
            break
        sweeps += 1
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            safe = np.where(active, apq, 1.0)
            theta = (A[q, q] - A[p, p]) / (2.0 * safe)
            sgn = np.where(theta >= 0.0, 1.0, -1.0)
            t = sgn / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cp, cq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * cp - s * cq
            A[:, q] = s * cp + c * cq
            rp, rq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * rp - s[:, None] * rq
            A[q, :] = s[:, None] * rp + c[:, None] * rq
            A[p, q] = 0.0
            A[q, p] = 0.0
            vp, vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * vp - s * vq
            V[:, q] = s * vp + c * vq
    return np.diag(A)[:n].copy(), V[:n, :n].copy(), sweeps


# ---------------------------------------------------------------------------
# convex-body membership and hit-and-run


@njit
def _inside_nb(x, hA, hb, nL, nc, npow, center, radius):
    n = x.shape[0]
    for i in range(hA.shape[0]):
        s = 0.0
        for j in range(n):
            s += hA[i, j] * x[j]
        if s > hb[i]:
            return False
    for k in range(nL.shape[0]):
        p = npow[k]
        acc = 0.0
        for i in range(n):
            y = 0.0
            for j in range(n):
                y += nL[k, i, j] * (x[j] - nc[k, j])
            ay = abs(y)
            if math.isinf(p):
                if ay > acc:
                    acc = ay
            else:
                acc += ay**p
        if acc > 1.0:
            return False
    if radius > 0.0:
        r2 = 0.0
        for j in range(n):
            d = x[j] - center[j]
            r2 += d * d
        if r2 > radius * radius:
            return False
    return True


@njit
def _inside_many_nb(X, hA, hb, nL, nc, npow, center, radius):
    out = np.empty(X.shape[0], dtype=np.bool_)
    for i in range(X.shape[0]):
        out[i] = _inside_nb(X[i], hA, hb, nL, nc, npow, center, radius)
    return out


def _inside_many_np(X, hA, hb, nL, nc, npow, center, radius):
    ok = np.ones(X.shape[0], dtype=bool)
    if hA.shape[0]:
        ok &= np.all(X @ hA.T <= hb, axis=1)
    for k in range(nL.shape[0]):
        Y = np.abs((X - nc[k]) @ nL[k].T)
        if np.isinf(npow[k]):
            ok &= Y.max(axis=1) <= 1.0
        else:
            ok &= np.sum(Y ** npow[k], axis=1) <= 1.0
    if radius > 0.0:
        ok &= np.sum((X - center) ** 2, axis=1) <= radius * radius
    return ok


def _bisection_steps(reach, tol):
    steps = 0
    width = reach
    while width > tol:
        width *= 0.5
        steps += 1
    return steps


@njit
def _har_chains_nb(x0, dirs, us, hA, hb, nL, nc, npow, center, radius, reach, nsteps, burn, thin):
    C, n = x0.shape
    S = dirs.shape[0]
    nkeep = (S - burn) // thin if S > burn else 0
    out = np.empty((C, nkeep, n))
    last = np.empty((C, n))
    calls = 0
    ok = True
    d = np.empty(n)
    y = np.empty(n)
    for c in range(C):
        x = x0[c].copy()
        for s in range(S):
            nrm = 0.0
            for j in range(n):
                d[j] = dirs[s, c, j]
                nrm += d[j] * d[j]
            nrm = math.sqrt(nrm)
            for j in range(n):
                d[j] /= nrm
            ends = np.empty(2)
            for side in range(2):
                sg = 1.0 if side == 0 else -1.0
                for j in range(n):
                    y[j] = x[j] + sg * reach * d[j]
                calls += 1
                if _inside_nb(y, hA, hb, nL, nc, npow, center, radius):
                    ok = False
                lo = 0.0
                hi = reach
                for _ in range(nsteps):
                    mid = 0.5 * (lo + hi)
                    for j in range(n):
                        y[j] = x[j] + sg * mid * d[j]
                    calls += 1
                    if _inside_nb(y, hA, hb, nL, nc, npow, center, radius):
                        lo = mid
                    else:
                        hi = mid
                ends[side] = lo
            t = -ends[1] + us[s, c] * (ends[0] + ends[1])
            for j in range(n):
                x[j] += t * d[j]
            k = s - burn + 1
            if k > 0 and k % thin == 0 and k // thin <= nkeep:
                for j in range(n):
                    out[c, k // thin - 1, j] = x[j]
        for j in range(n):
            last[c, j] = x[j]
    return out, last, calls, ok


def _har_chains_np(x0, dirs, us, hA, hb, nL, nc, npow, center, radius, reach, nsteps, burn, thin,
                   inside=None):
    if inside is None:
        def inside(P):
            return _inside_many_np(P, hA, hb, nL, nc, npow, center, radius)
    C, n = x0.shape
    S = dirs.shape[0]
    nkeep = (S - burn) // thin if S > burn else 0
    out = np.empty((C, nkeep, n))
    x = np.array(x0, dtype=float, copy=True)
    calls = 0
    ok = True
    for s in range(S):
        d = dirs[s] / np.linalg.norm(dirs[s], axis=1, keepdims=True)
        ends = []
        for sg in (1.0, -1.0):
            calls += C
            if np.any(inside(x + sg * reach * d)):
                ok = False
            lo = np.zeros(C)
            hi = np.full(C, reach)
            for _ in range(nsteps):
                mid = 0.5 * (lo + hi)
                ins = inside(x + sg * mid[:, None] * d)
                calls += C
                lo = np.where(ins, mid, lo)
                hi = np.where(ins, hi, mid)
            ends.append(lo)
        t = -ends[1] + us[s] * (ends[0] + ends[1])
        x = x + t[:, None] * d
        k = s - burn + 1
        if k > 0 and k % thin == 0 and k // thin <= nkeep:
            out[:, k // thin - 1] = x
    return out, x, calls, ok


# ---------------------------------------------------------------------------
# point-in-hull by away-step conditional gradient


@njit
def _fw_hull_nb(V, X, tol, max_iter):
    n, M = V.shape
    K = X.shape[0]
    status = np.empty(K, dtype=np.int64)
    lam = np.empty(M)
    y = np.empty(n)
    for k in range(K):
        x = X[k]
        vx = np.zeros(M)
        for j in range(M):
            for i in range(n):
                vx[j] += V[i, j] * x[i]
        for j in range(M):
            lam[j] = 0.0
        best = 0
        for j in range(1, M):
            if vx[j] > vx[best]:
                best = j
        lam[best] = 1.0
        for i in range(n):
            y[i] = V[i, best]
        st = -1
        for it in range(max_iter):
            rr = 0.0
            rx = 0.0
            ry = 0.0
            for i in range(n):
                r = y[i] - x[i]
                rr += r * r
                rx += r * x[i]
                ry += r * y[i]
            if math.sqrt(rr) <= tol:
                st = 1
                break
            # grad_j = <r, v_j> = (V^T y)_j - vx_j
            gmin = 1e300
            s_idx = 0
            gmax = -1e300
            a_idx = -1
            for j in range(M):
                gj = -vx[j]
                for i in range(n):
                    gj += V[i, j] * y[i]
                if gj < gmin:
                    gmin = gj
                    s_idx = j
                if lam[j] > 0.0 and gj > gmax:
                    gmax = gj
                    a_idx = j
            if gmin > rx:
                st = 0
                break
            gfw = ry - gmin
            gaw = gmax - ry
            if gfw >= gaw or a_idx < 0:
                # d = v_s - y
                dd = 0.0
                rd = 0.0
                for i in range(n):
                    di = V[i, s_idx] - y[i]
                    dd += di * di
                    rd += (y[i] - x[i]) * di
                gmx = 1.0
                if dd <= 0.0:
                    break
                gam = min(max(-rd / dd, 0.0), gmx)
                for j in range(M):
                    lam[j] *= 1.0 - gam
                lam[s_idx] += gam
                for i in range(n):
                    y[i] += gam * (V[i, s_idx] - y[i])
            else:
                la = lam[a_idx]
                gmx = la / (1.0 - la) if la < 1.0 else 1e300
                dd = 0.0
                rd = 0.0
                for i in range(n):
                    di = y[i] - V[i, a_idx]
                    dd += di * di
                    rd += (y[i] - x[i]) * di
                if dd <= 0.0:
                    break
                gam = min(max(-rd / dd, 0.0), gmx)
                for j in range(M):
                    lam[j] *= 1.0 + gam
                lam[a_idx] -= gam
                if gam >= gmx:
                    lam[a_idx] = 0.0
                for i in range(n):
                    y[i] += gam * (y[i] - V[i, a_idx])
        status[k] = st
    return status


def _fw_hull_np(V, X, tol, max_iter):
    n, M = V.shape
    K = X.shape[0]
    VX = X @ V  # (K, M)
    lam = np.zeros((K, M))
    best = np.argmax(VX, axis=1)
    rows = np.arange(K)
    lam[rows, best] = 1.0
    Y = V[:, best].T.copy()
    status = np.full(K, -1, dtype=np.int64)
    live = np.ones(K, dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        y, x, vx, lm = Y[idx], X[idx], VX[idx], lam[idx]
        R = y - x
        rr = np.sum(R * R, axis=1)
        rx = np.sum(R * x, axis=1)
        ry = np.sum(R * y, axis=1)
        grad = y @ V - vx
        s_idx = np.argmin(grad, axis=1)
        gmin = grad[np.arange(idx.size), s_idx]
        inside = np.sqrt(rr) <= tol
        outside = ~inside & (gmin > rx)
        status[idx[inside]] = 1
        status[idx[outside]] = 0
        go = ~(inside | outside)
        live[idx[~go]] = False
        if not go.any():
            continue
        idx, y, x, lm, grad = idx[go], y[go], x[go], lm[go], grad[go]
        s_idx, gmin, ry = s_idx[go], gmin[go], ry[go]
        k = np.arange(idx.size)
        masked = np.where(lm > 0.0, grad, -np.inf)
        a_idx = np.argmax(masked, axis=1)
        gmax = masked[k, a_idx]
        fw = (ry - gmin) >= (gmax - ry)
        vs = V[:, s_idx].T
        va = V[:, a_idx].T
        D = np.where(fw[:, None], vs - y, y - va)
        la = lm[k, a_idx]
        gmx = np.where(fw, 1.0, np.where(la < 1.0, la / np.where(la < 1.0, 1.0 - la, 1.0), 1e300))
        dd = np.sum(D * D, axis=1)
        rd = np.sum((y - x) * D, axis=1)
        stuck = dd <= 0.0
        gam = np.minimum(np.maximum(-rd / np.where(stuck, 1.0, dd), 0.0), gmx)
        gam = np.where(stuck, 0.0, gam)
        lm = np.where(fw[:, None], lm * (1.0 - gam)[:, None], lm * (1.0 + gam)[:, None])
        lm[k[fw], s_idx[fw]] += gam[fw]
        aw = ~fw
        lm[k[aw], a_idx[aw]] -= gam[aw]
        drop = aw & (gam >= gmx)
        lm[k[drop], a_idx[drop]] = 0.0
        lam[idx] = lm
        Y[idx] = y + gam[:, None] * D
        live[idx[stuck]] = False
    return status


# ---------------------------------------------------------------------------
# directional absolute moments


@njit
def _ipow_nb(a, k):
    r = 1.0
    while k > 0:
        if k & 1:
            r *= a
        a *= a
        k >>= 1
    return r


@njit
def _dir_moments_nb(Y, Z, p):
    N, m = Y.shape
    K = Z.shape[0]
    out = np.zeros(K)
    # integer orders avoid the transcendental pow
    ip = int(p)
    exact = ip == p and 0 < ip <= 64
    for k in range(K):
        acc = 0.0
        for i in range(N):
            s = 0.0
            for j in range(m):
                s += Y[i, j] * Z[k, j]
            if exact:
                acc += _ipow_nb(abs(s), ip)
            else:
                acc += abs(s) ** p
        out[k] = acc / N
    return out


def _dir_moments_np(Y, Z, p, chunk=256):
    K = Z.shape[0]
    out = np.empty(K)
    for start in range(0, K, chunk):
        P = np.abs(Y @ Z[start:start + chunk].T)
        out[start:start + chunk] = np.mean(P ** p, axis=0)
    return out


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    _jacobi = _jacobi_eigh_nb
    _inside_many = _inside_many_nb
    _har = _har_chains_nb
    _fw = _fw_hull_nb
    _dirm = _dir_moments_nb
else:
    _jacobi = _jacobi_eigh_np
    _inside_many = _inside_many_np
    _har = _har_chains_np
    _fw = _fw_hull_np
    _dirm = _dir_moments_np


def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    """Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi.

    Returns ``(w, V, sweeps)`` with ``a @ V = V @ diag(w)``; ``w`` is unsorted.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    return _jacobi(a, float(tol), int(max_sweeps))


# above this many rows the BLAS-backed numpy test beats the per-point loop
_INSIDE_BATCH = 64


def inside_many(X, prog):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if len(X) >= _INSIDE_BATCH:
        return _inside_many_np(X, *prog)
    return _inside_many(X, *prog)


def har_chains(x0, dirs, us, prog, reach, tol, burn, thin):
    return _har(
        np.ascontiguousarray(x0, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64),
        np.ascontiguousarray(us, dtype=np.float64),
        *prog,
        float(reach),
        _bisection_steps(reach, tol),
        int(burn),
        int(thin),
    )


def fw_hull_status(V, X, tol=1e-8, max_iter=20000):
    """Classify rows of ``X`` against conv(columns of ``V``): 1 in, 0 out, -1 undecided."""
    return _fw(
        np.ascontiguousarray(V, dtype=np.float64),
        np.ascontiguousarray(X, dtype=np.float64),
        float(tol),
        int(max_iter),
    )


def directional_moments(Y, Z, p):
    """``mean_i |<Y_i, z_k>|^p`` for every row ``z_k`` of ``Z``."""
    return _dirm(
        np.ascontiguousarray(Y, dtype=np.float64),
        np.ascontiguousarray(Z, dtype=np.float64),
        float(p),
    )
