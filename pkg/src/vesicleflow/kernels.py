"""Compiled hot loops: residual, Jacobian, bordered solve, Newton step.

The kernels are plain-loop twins of the vectorized routines in
:mod:`vesicleflow.fv`, written so both paths evaluate the same formulas in
the same order.  When numba is importable (and not switched off via the
``VESICLEFLOW_NUMBA`` environment variable, values 0/off/false/disable),
they are jit-compiled at import with on-disk caching; otherwise the
package falls back to the numpy implementations and these functions are
only exercised by the cross-checking tests and the benchmark.

Layout conventions match ``fv``: packed vectors [u1 | u2 | Ln | Ls],
block-tridiagonal Jacobian in per-cell (u1_j, u2_j) pairs with a 2x2
reservoir border.  The scalar parameter pack is the tuple produced by
``ModelParameters.flat()``:

    (D1, D2, alpha1, alpha2, beta1, beta2, lambda_n_max, lambda_s_max)
"""

import os

import numpy as np

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    NUMBA_AVAILABLE = False

_flag = os.environ.get("VESICLEFLOW_NUMBA", "").strip().lower()
NUMBA_ENABLED = NUMBA_AVAILABLE and _flag not in ("0", "off", "false", "disable")


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"


def _maybe_jit(fn):
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(fn)
    return fn


@_maybe_jit
def residual_kernel(ynew, yold, out, h, tau,
                    D1, D2, a1, a2, b1, b2, lnM, lsM, g1f, g2f):
    """Implicit Euler step residual; writes into `out`, returns nothing."""
    m = (ynew.shape[0] - 2) // 2
    r = tau / h
    lam_n = ynew[2 * m]
    lam_s = ynew[2 * m + 1]
    occ_n = lam_n / lnM
    occ_s = lam_s / lsM
    u0l = 1.0 - ynew[0] - ynew[m]
    u0r = 1.0 - ynew[m - 1] - ynew[2 * m - 1]
    j1_0 = a1 * occ_s * u0l
    j2_0 = -b2 * (1.0 - occ_s) * u0l * ynew[m]
    j1_prev = j1_0
    j2_prev = j2_0
    j1_next = 0.0
    j2_next = 0.0
    for j in range(m):
        if j < m - 1:
            A1 = ynew[j]
            A2 = ynew[j + 1]
            B1 = ynew[m + j]
            B2 = ynew[m + j + 1]
            u0L = 1.0 - A1 - B1
            u0R = 1.0 - A2 - B2
            ub0 = 0.5 * (u0L + u0R)
            du0 = u0R - u0L
            ub1 = 0.5 * (A1 + A2)
            ub2 = 0.5 * (B1 + B2)
            j1_next = -(D1 / h) * (ub0 * (A2 - A1) - ub1 * du0) + D1 * ub0 * ub1 * g1f[j + 1]
            j2_next = -(D2 / h) * (ub0 * (B2 - B1) - ub2 * du0) + D2 * ub0 * ub2 * g2f[j + 1]
        else:
            j1_next = b1 * (1.0 - occ_n) * u0r * ynew[m - 1]
            j2_next = -a2 * occ_n * u0r
        out[j] = ynew[j] - yold[j] + r * (j1_next - j1_prev)
        out[m + j] = ynew[m + j] - yold[m + j] + r * (j2_next - j2_prev)
        j1_prev = j1_next
        j2_prev = j2_next
    out[2 * m] = ynew[2 * m] - yold[2 * m] - tau * (j1_next + j2_next)
    out[2 * m + 1] = ynew[2 * m + 1] - yold[2 * m + 1] + tau * (j1_0 + j2_0)


@_maybe_jit
def jacobian_kernel(ynew, h, tau, D1, D2, a1, a2, b1, b2, lnM, lsM,
                    g1f, g2f, sub, diag, sup, bcf, bcl, brf, brl, pool):
    """Analytic Jacobian of the step residual into block storage."""
    m = (ynew.shape[0] - 2) // 2
    r = tau / h
    for j in range(m):
        for bi in range(2):
            for bj in range(2):
                sub[j, bi, bj] = 0.0
                diag[j, bi, bj] = 0.0
                sup[j, bi, bj] = 0.0
    for f in range(1, m):
        L = f - 1
        R = f
        A1 = ynew[L]
        A2 = ynew[R]
        B1 = ynew[m + L]
        B2 = ynew[m + R]
        u0L = 1.0 - A1 - B1
        u0R = 1.0 - A2 - B2
        ub0 = 0.5 * (u0L + u0R)
        du0 = u0R - u0L
        ub1 = 0.5 * (A1 + A2)
        du1 = A2 - A1
        ub2 = 0.5 * (B1 + B2)
        du2 = B2 - B1
        G1 = g1f[f]
        G2 = g2f[f]
        dj1_aL = (D1 / h) * (0.5 * du1 + ub0 + 0.5 * du0 + ub1) + 0.5 * D1 * G1 * (ub0 - ub1)
        dj1_aR = (D1 / h) * (0.5 * du1 - ub0 + 0.5 * du0 - ub1) + 0.5 * D1 * G1 * (ub0 - ub1)
        dj1_bL = (D1 / h) * (0.5 * du1 + ub1) - 0.5 * D1 * G1 * ub1
        dj1_bR = (D1 / h) * (0.5 * du1 - ub1) - 0.5 * D1 * G1 * ub1
        dj2_bL = (D2 / h) * (0.5 * du2 + ub0 + 0.5 * du0 + ub2) + 0.5 * D2 * G2 * (ub0 - ub2)
        dj2_bR = (D2 / h) * (0.5 * du2 - ub0 + 0.5 * du0 - ub2) + 0.5 * D2 * G2 * (ub0 - ub2)
        dj2_aL = (D2 / h) * (0.5 * du2 + ub2) - 0.5 * D2 * G2 * ub2
        dj2_aR = (D2 / h) * (0.5 * du2 - ub2) - 0.5 * D2 * G2 * ub2
        # the face feeds row L with +(tau/h) J and row R with -(tau/h) J
        diag[L, 0, 0] += r * dj1_aL
        diag[L, 0, 1] += r * dj1_bL
        diag[L, 1, 0] += r * dj2_aL
        diag[L, 1, 1] += r * dj2_bL
        sup[L, 0, 0] = r * dj1_aR
        sup[L, 0, 1] = r * dj1_bR
        sup[L, 1, 0] = r * dj2_aR
        sup[L, 1, 1] = r * dj2_bR
        diag[R, 0, 0] -= r * dj1_aR
        diag[R, 0, 1] -= r * dj1_bR
        diag[R, 1, 0] -= r * dj2_aR
        diag[R, 1, 1] -= r * dj2_bR
        sub[R, 0, 0] = -r * dj1_aL
        sub[R, 0, 1] = -r * dj1_bL
        sub[R, 1, 0] = -r * dj2_aL
        sub[R, 1, 1] = -r * dj2_bL
    for j in range(m):
        diag[j, 0, 0] += 1.0
        diag[j, 1, 1] += 1.0

    lam_n = ynew[2 * m]
    lam_s = ynew[2 * m + 1]
    occ_n = lam_n / lnM
    occ_s = lam_s / lsM
    u0l = 1.0 - ynew[0] - ynew[m]
    u0r = 1.0 - ynew[m - 1] - ynew[2 * m - 1]
    dj10_a = -a1 * occ_s
    dj10_b = -a1 * occ_s
    dj10_ls = a1 * u0l / lsM
    dj20_a = b2 * (1.0 - occ_s) * ynew[m]
    dj20_b = -b2 * (1.0 - occ_s) * (u0l - ynew[m])
    dj20_ls = b2 * u0l * ynew[m] / lsM
    dj11_a = b1 * (1.0 - occ_n) * (u0r - ynew[m - 1])
    dj11_b = -b1 * (1.0 - occ_n) * ynew[m - 1]
    dj11_ln = -b1 * u0r * ynew[m - 1] / lnM
    dj21_a = a2 * occ_n
    dj21_b = a2 * occ_n
    dj21_ln = -a2 * u0r / lnM

    diag[0, 0, 0] -= r * dj10_a
    diag[0, 0, 1] -= r * dj10_b
    diag[0, 1, 0] -= r * dj20_a
    diag[0, 1, 1] -= r * dj20_b
    diag[m - 1, 0, 0] += r * dj11_a
    diag[m - 1, 0, 1] += r * dj11_b
    diag[m - 1, 1, 0] += r * dj21_a
    diag[m - 1, 1, 1] += r * dj21_b

    for bi in range(2):
        for bj in range(2):
            bcf[bi, bj] = 0.0
            bcl[bi, bj] = 0.0
            brf[bi, bj] = 0.0
            brl[bi, bj] = 0.0
    bcf[0, 1] = -r * dj10_ls
    bcf[1, 1] = -r * dj20_ls
    bcl[0, 0] = r * dj11_ln
    bcl[1, 0] = r * dj21_ln
    brf[1, 0] = tau * (dj10_a + dj20_a)
    brf[1, 1] = tau * (dj10_b + dj20_b)
    brl[0, 0] = -tau * (dj11_a + dj21_a)
    brl[0, 1] = -tau * (dj11_b + dj21_b)
    pool[0, 0] = 1.0 - tau * (dj11_ln + dj21_ln)
    pool[0, 1] = 0.0
    pool[1, 0] = 0.0
    pool[1, 1] = 1.0 + tau * (dj10_ls + dj20_ls)


@_maybe_jit
def bordered_solve_kernel(sub, diag, sup, bcf, bcl, brf, brl, pool, rhs, out):
    """Solve the bordered block-tridiagonal system; returns 0 on success.

    Block-Thomas elimination without pivoting on the field block, carried
    simultaneously for the right-hand side and the two reservoir border
    columns, then a 2x2 Schur complement for the reservoir unknowns.
    A vanishing or non-finite pivot returns 1.
    """
    m = diag.shape[0]
    W = np.empty((m, 2, 2))
    X = np.empty((m, 2, 3))
    R = np.empty((m, 2, 3))
    for j in range(m):
        R[j, 0, 0] = rhs[j]
        R[j, 1, 0] = rhs[m + j]
        R[j, 0, 1] = 0.0
        R[j, 1, 1] = 0.0
        R[j, 0, 2] = 0.0
        R[j, 1, 2] = 0.0
    R[0, 0, 1] += bcf[0, 0]
    R[0, 1, 1] += bcf[1, 0]
    R[0, 0, 2] += bcf[0, 1]
    R[0, 1, 2] += bcf[1, 1]
    R[m - 1, 0, 1] += bcl[0, 0]
    R[m - 1, 1, 1] += bcl[1, 0]
    R[m - 1, 0, 2] += bcl[0, 1]
    R[m - 1, 1, 2] += bcl[1, 1]

    for j in range(m):
        d00 = diag[j, 0, 0]
        d01 = diag[j, 0, 1]
        d10 = diag[j, 1, 0]
        d11 = diag[j, 1, 1]
        if j > 0:
            s00 = sub[j, 0, 0]
            s01 = sub[j, 0, 1]
            s10 = sub[j, 1, 0]
            s11 = sub[j, 1, 1]
            d00 -= s00 * W[j - 1, 0, 0] + s01 * W[j - 1, 1, 0]
            d01 -= s00 * W[j - 1, 0, 1] + s01 * W[j - 1, 1, 1]
            d10 -= s10 * W[j - 1, 0, 0] + s11 * W[j - 1, 1, 0]
            d11 -= s10 * W[j - 1, 0, 1] + s11 * W[j - 1, 1, 1]
            for c in range(3):
                R[j, 0, c] -= s00 * X[j - 1, 0, c] + s01 * X[j - 1, 1, c]
                R[j, 1, c] -= s10 * X[j - 1, 0, c] + s11 * X[j - 1, 1, c]
        det = d00 * d11 - d01 * d10
        if not np.isfinite(det) or det == 0.0:
            return 1
        i00 = d11 / det
        i01 = -d01 / det
        i10 = -d10 / det
        i11 = d00 / det
        for c in range(3):
            r0 = R[j, 0, c]
            r1 = R[j, 1, c]
            X[j, 0, c] = i00 * r0 + i01 * r1
            X[j, 1, c] = i10 * r0 + i11 * r1
        if j < m - 1:
            W[j, 0, 0] = i00 * sup[j, 0, 0] + i01 * sup[j, 1, 0]
            W[j, 0, 1] = i00 * sup[j, 0, 1] + i01 * sup[j, 1, 1]
            W[j, 1, 0] = i10 * sup[j, 0, 0] + i11 * sup[j, 1, 0]
            W[j, 1, 1] = i10 * sup[j, 0, 1] + i11 * sup[j, 1, 1]
    for j in range(m - 2, -1, -1):
        for c in range(3):
            X[j, 0, c] -= W[j, 0, 0] * X[j + 1, 0, c] + W[j, 0, 1] * X[j + 1, 1, c]
            X[j, 1, c] -= W[j, 1, 0] * X[j + 1, 0, c] + W[j, 1, 1] * X[j + 1, 1, c]

    c00 = brf[0, 0] * X[0, 0, 0] + brf[0, 1] * X[0, 1, 0] + brl[0, 0] * X[m - 1, 0, 0] + brl[0, 1] * X[m - 1, 1, 0]
    c01 = brf[0, 0] * X[0, 0, 1] + brf[0, 1] * X[0, 1, 1] + brl[0, 0] * X[m - 1, 0, 1] + brl[0, 1] * X[m - 1, 1, 1]
    c02 = brf[0, 0] * X[0, 0, 2] + brf[0, 1] * X[0, 1, 2] + brl[0, 0] * X[m - 1, 0, 2] + brl[0, 1] * X[m - 1, 1, 2]
    c10 = brf[1, 0] * X[0, 0, 0] + brf[1, 1] * X[0, 1, 0] + brl[1, 0] * X[m - 1, 0, 0] + brl[1, 1] * X[m - 1, 1, 0]
    c11 = brf[1, 0] * X[0, 0, 1] + brf[1, 1] * X[0, 1, 1] + brl[1, 0] * X[m - 1, 0, 1] + brl[1, 1] * X[m - 1, 1, 1]
    c12 = brf[1, 0] * X[0, 0, 2] + brf[1, 1] * X[0, 1, 2] + brl[1, 0] * X[m - 1, 0, 2] + brl[1, 1] * X[m - 1, 1, 2]
    s00 = pool[0, 0] - c01
    s01 = pool[0, 1] - c02
    s10 = pool[1, 0] - c11
    s11 = pool[1, 1] - c12
    det = s00 * s11 - s01 * s10
    if not np.isfinite(det) or det == 0.0:
        return 1
    g0 = rhs[2 * m] - c00
    g1 = rhs[2 * m + 1] - c10
    ln = (s11 * g0 - s01 * g1) / det
    ls = (s00 * g1 - s10 * g0) / det
    for j in range(m):
        out[j] = X[j, 0, 0] - X[j, 0, 1] * ln - X[j, 0, 2] * ls
        out[m + j] = X[j, 1, 0] - X[j, 1, 1] * ln - X[j, 1, 2] * ls
    out[2 * m] = ln
    out[2 * m + 1] = ls
    return 0


@_maybe_jit
def newton_step_kernel(y, yold, h, tau, D1, D2, a1, a2, b1, b2, lnM, lsM,
                       g1f, g2f, tol, max_iter, exponent, mode,
                       res_norms, upd_norms, lambdas):
    """Damped Newton solve of one implicit step, in place on `y`.

    mode 0 caps the increment at sup-norm one before scaling by
    (r+1)^(-exponent); mode 1 always normalizes the increment.  Returns
    (iterations, final residual norm, status) with status 0 converged,
    1 iteration budget exhausted, 2 singular linear system, 3 non-finite
    values encountered.
    """
    n = y.shape[0]
    m = (n - 2) // 2
    F = np.empty(n)
    delta = np.empty(n)
    sub = np.empty((m, 2, 2))
    diag = np.empty((m, 2, 2))
    sup = np.empty((m, 2, 2))
    bcf = np.empty((2, 2))
    bcl = np.empty((2, 2))
    brf = np.empty((2, 2))
    brl = np.empty((2, 2))
    pool = np.empty((2, 2))
    iters = 0
    for it in range(max_iter + 1):
        residual_kernel(y, yold, F, h, tau, D1, D2, a1, a2, b1, b2, lnM, lsM, g1f, g2f)
        nrm = 0.0
        for k in range(n):
            a = abs(F[k])
            if a > nrm:
                nrm = a
        res_norms[it] = nrm
        if not np.isfinite(nrm):
            return iters, nrm, 3
        if nrm < tol:
            return iters, nrm, 0
        if it == max_iter:
            return iters, nrm, 1
        jacobian_kernel(y, h, tau, D1, D2, a1, a2, b1, b2, lnM, lsM,
                        g1f, g2f, sub, diag, sup, bcf, bcl, brf, brl, pool)
        for k in range(n):
            F[k] = -F[k]
        st = bordered_solve_kernel(sub, diag, sup, bcf, bcl, brf, brl, pool, F, delta)
        if st != 0:
            return iters, nrm, 2
        nd = 0.0
        for k in range(n):
            a = abs(delta[k])
            if a > nd:
                nd = a
        if not np.isfinite(nd):
            return iters, nrm, 3
        base = (it + 1.0) ** (-exponent)
        if mode == 0:
            lam = base if nd <= 1.0 else base / nd
        else:
            lam = base if nd == 0.0 else base / nd
        upd_norms[it] = lam * nd
        lambdas[it] = lam
        for k in range(n):
            y[k] += lam * delta[k]
        iters += 1
    return iters, 0.0, 1  # unreachable


def warmup(force=False):
    """Trigger jit compilation on a tiny system so later timings are clean."""
    if not NUMBA_ENABLED and not force:
        return
    m = 4
    y = np.full(2 * m + 2, 0.1)
    y[-2] = 0.001
    y[-1] = 0.05
    g = np.zeros(m + 1)
    res_norms = np.empty(3)
    upd = np.empty(2)
    lams = np.empty(2)
    newton_step_kernel(y.copy(), y, 1.0 / m, 1e-3,
                       4e-4, 4e-3, 0.2666, 0.2666, 3.0, 3.0, 0.0029, 0.175,
                       g, g, 1e-12, 2, 0.75, 0, res_norms, upd, lams)
