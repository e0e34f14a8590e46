"""Hot numeric loops, each with a numba and a numpy implementation.

The public functions dispatch on :data:`blockgen._accel.USE_NUMBA`.  Both
variants are importable under ``<name>_numba`` / ``<name>_numpy`` so the
benchmark and the test-suite can compare them directly.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

NEG_INF = -1e30
EDGE_EPS = 1e-9  # bins are half-open; guards values sitting exactly on an edge


# --------------------------------------------------------------------------
# Needleman-Wunsch with affine gaps (Gotoh).  The DP is inherently serial, so
# the "numpy" variant is the same loop run by the interpreter.
# --------------------------------------------------------------------------
def _nw_affine_impl(a, b, sub, gap_open, gap_extend):
    n = a.shape[0]
    m = b.shape[0]
    M = np.full((n + 1, m + 1), NEG_INF)
    X = np.full((n + 1, m + 1), NEG_INF)  # a[i] against a gap
    Y = np.full((n + 1, m + 1), NEG_INF)  # b[j] against a gap
    # predecessor state of each cell; 0=M, 1=X, 2=Y, ties resolved in that order
    pM = np.zeros((n + 1, m + 1), dtype=np.int8)
    pX = np.zeros((n + 1, m + 1), dtype=np.int8)
    pY = np.zeros((n + 1, m + 1), dtype=np.int8)
    M[0, 0] = 0.0
    for i in range(1, n + 1):
        X[i, 0] = gap_open + (i - 1) * gap_extend
        pX[i, 0] = 1 if i > 1 else 0
    for j in range(1, m + 1):
        Y[0, j] = gap_open + (j - 1) * gap_extend
        pY[0, j] = 2 if j > 1 else 0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best, arg = M[i - 1, j - 1], 0
            if X[i - 1, j - 1] > best:
                best, arg = X[i - 1, j - 1], 1
            if Y[i - 1, j - 1] > best:
                best, arg = Y[i - 1, j - 1], 2
            M[i, j] = sub[a[i - 1], b[j - 1]] + best
            pM[i, j] = arg

            best, arg = M[i - 1, j] + gap_open, 0
            if X[i - 1, j] + gap_extend > best:
                best, arg = X[i - 1, j] + gap_extend, 1
            if Y[i - 1, j] + gap_open > best:
                best, arg = Y[i - 1, j] + gap_open, 2
            X[i, j] = best
            pX[i, j] = arg

            best, arg = M[i, j - 1] + gap_open, 0
            if X[i, j - 1] + gap_open > best:
                best, arg = X[i, j - 1] + gap_open, 1
            if Y[i, j - 1] + gap_extend > best:
                best, arg = Y[i, j - 1] + gap_extend, 2
            Y[i, j] = best
            pY[i, j] = arg

    i, j = n, m
    best = M[n, m]
    state = 0
    if X[n, m] > best:
        best = X[n, m]
        state = 1
    if Y[n, m] > best:
        best = Y[n, m]
        state = 2
    identities = 0
    while i > 0 or j > 0:
        if state == 0:
            if a[i - 1] == b[j - 1]:
                identities += 1
            state = pM[i, j]
            i -= 1
            j -= 1
        elif state == 1:
            state = pX[i, j]
            i -= 1
        else:
            state = pY[i, j]
            j -= 1
    return best, identities


nw_affine_numba = njit(_nw_affine_impl)
nw_affine_numpy = _nw_affine_impl


def nw_affine(a, b, sub, gap_open, gap_extend):
    """Global alignment score and identity count of integer-coded sequences."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    sub = np.ascontiguousarray(sub, dtype=np.float64)
    fn = nw_affine_numba if USE_NUMBA else nw_affine_numpy
    score, ident = fn(a, b, sub, float(gap_open), float(gap_extend))
    return float(score), int(ident)


# --------------------------------------------------------------------------
# Clash repulsion against fixed context atoms
# --------------------------------------------------------------------------
@njit
def repulsion_displacement_numba(xg, rg, xc, rc, delta):
    n = xg.shape[0]
    m = xc.shape[0]
    out = np.zeros((n, 3))
    for i in range(n):
        for j in range(m):
            dx = xg[i, 0] - xc[j, 0]
            dy = xg[i, 1] - xc[j, 1]
            dz = xg[i, 2] - xc[j, 2]
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            if d == 0.0:
                dx, dy, dz, d = 1e-6, 0.0, 0.0, 1e-6
            lim = rg[i] + rc[j] - delta
            if d < lim:
                f = lim - d
                out[i, 0] += dx / d * f
                out[i, 1] += dy / d * f
                out[i, 2] += dz / d * f
    return out


def repulsion_displacement_numpy(xg, rg, xc, rc, delta):
    diff = xg[:, None, :] - xc[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    coincident = d == 0.0
    if coincident.any():
        diff = diff.copy()
        diff[coincident] = (1e-6, 0.0, 0.0)
        d = np.where(coincident, 1e-6, d)
    lim = rg[:, None] + rc[None, :] - delta
    f = np.where(d < lim, lim - d, 0.0)
    return np.einsum("nm,nmk->nk", f / d, diff)


def repulsion_displacement(xg, rg, xc, rc, delta):
    """Sum over context atoms j of unit(x_i - x_j) * max(r_i + r_j - delta - d_ij, 0)."""
    xg = np.ascontiguousarray(xg, dtype=np.float64).reshape(-1, 3)
    xc = np.ascontiguousarray(xc, dtype=np.float64).reshape(-1, 3)
    rg = np.ascontiguousarray(rg, dtype=np.float64)
    rc = np.ascontiguousarray(rc, dtype=np.float64)
    if len(xg) == 0 or len(xc) == 0:
        return np.zeros_like(xg)
    fn = repulsion_displacement_numba if USE_NUMBA else repulsion_displacement_numpy
    return fn(xg, rg, xc, rc, float(delta))


# --------------------------------------------------------------------------
# Close-pair masks (clash detection)
# --------------------------------------------------------------------------
@njit
def close_pairs_numba(xa, xb, threshold):
    n = xa.shape[0]
    m = xb.shape[0]
    out = np.zeros((n, m), dtype=np.bool_)
    t2 = threshold * threshold
    for i in range(n):
        for j in range(m):
            dx = xa[i, 0] - xb[j, 0]
            dy = xa[i, 1] - xb[j, 1]
            dz = xa[i, 2] - xb[j, 2]
            out[i, j] = dx * dx + dy * dy + dz * dz < t2
    return out


def close_pairs_numpy(xa, xb, threshold):
    d2 = ((xa[:, None, :] - xb[None, :, :]) ** 2).sum(-1)
    return d2 < threshold * threshold


def close_pairs(xa, xb, threshold):
    """Boolean matrix of pairs strictly closer than ``threshold``."""
    xa = np.ascontiguousarray(xa, dtype=np.float64).reshape(-1, 3)
    xb = np.ascontiguousarray(xb, dtype=np.float64).reshape(-1, 3)
    fn = close_pairs_numba if USE_NUMBA else close_pairs_numpy
    return fn(xa, xb, float(threshold))


# --------------------------------------------------------------------------
# Fixed-grid binning: half-open bins [lo + k*w, lo + (k+1)*w); the upper edge
# clamps into the last bin; anything else outside the support maps to -1.
# --------------------------------------------------------------------------
@njit
def bin_indices_numba(values, lo, width, nbins):
    hi = lo + nbins * width
    out = np.empty(values.shape[0], dtype=np.int64)
    for k in range(values.shape[0]):
        v = values[k]
        if v < lo - EDGE_EPS * width or v > hi + EDGE_EPS * width:
            out[k] = -1
        else:
            idx = int(np.floor((v - lo) / width + EDGE_EPS))
            if idx >= nbins:
                idx = nbins - 1
            if idx < 0:
                idx = 0
            out[k] = idx
    return out


def bin_indices_numpy(values, lo, width, nbins):
    hi = lo + nbins * width
    idx = np.floor((values - lo) / width + EDGE_EPS).astype(np.int64)
    idx = np.clip(idx, 0, nbins - 1)
    outside = (values < lo - EDGE_EPS * width) | (values > hi + EDGE_EPS * width)
    idx[outside] = -1
    return idx


def bin_indices(values, lo, width, nbins):
    values = np.ascontiguousarray(values, dtype=np.float64).ravel()
    fn = bin_indices_numba if USE_NUMBA else bin_indices_numpy
    return fn(values, float(lo), float(width), int(nbins))


def histogram(values, lo, width, nbins):
    """Counts on the fixed grid; out-of-support values are ignored."""
    idx = bin_indices(values, lo, width, nbins)
    return np.bincount(idx[idx >= 0], minlength=nbins).astype(np.float64)


# --------------------------------------------------------------------------
# Dihedral angles (degrees, in (-180, 180])
# --------------------------------------------------------------------------
@njit
def dihedrals_numba(p0, p1, p2, p3):
    n = p0.shape[0]
    out = np.empty(n)
    for k in range(n):
        # scalar arithmetic only; small per-row arrays would dominate the runtime
        a0, a1, a2 = p0[k, 0] - p1[k, 0], p0[k, 1] - p1[k, 1], p0[k, 2] - p1[k, 2]
        u0, u1, u2 = p2[k, 0] - p1[k, 0], p2[k, 1] - p1[k, 1], p2[k, 2] - p1[k, 2]
        e0, e1, e2 = p3[k, 0] - p2[k, 0], p3[k, 1] - p2[k, 1], p3[k, 2] - p2[k, 2]
        nu = np.sqrt(u0 * u0 + u1 * u1 + u2 * u2)
        u0, u1, u2 = u0 / nu, u1 / nu, u2 / nu
        da = a0 * u0 + a1 * u1 + a2 * u2
        de = e0 * u0 + e1 * u1 + e2 * u2
        v0, v1, v2 = a0 - da * u0, a1 - da * u1, a2 - da * u2
        w0, w1, w2 = e0 - de * u0, e1 - de * u1, e2 - de * u2
        x = v0 * w0 + v1 * w1 + v2 * w2
        y = (u1 * v2 - u2 * v1) * w0 + (u2 * v0 - u0 * v2) * w1 + (u0 * v1 - u1 * v0) * w2
        out[k] = np.degrees(np.arctan2(y, x))
    return out


def dihedrals_numpy(p0, p1, p2, p3):
    b0 = p0 - p1
    b1 = p2 - p1
    b2 = p3 - p2
    b1 = b1 / np.linalg.norm(b1, axis=-1, keepdims=True)
    v = b0 - (b0 * b1).sum(-1, keepdims=True) * b1
    w = b2 - (b2 * b1).sum(-1, keepdims=True) * b1
    x = (v * w).sum(-1)
    y = (np.cross(b1, v) * w).sum(-1)
    return np.degrees(np.arctan2(y, x))


def dihedrals(p0, p1, p2, p3):
    arrs = [np.ascontiguousarray(p, dtype=np.float64).reshape(-1, 3) for p in (p0, p1, p2, p3)]
    if len(arrs[0]) == 0:
        return np.zeros(0)
    fn = dihedrals_numba if USE_NUMBA else dihedrals_numpy
    return fn(*arrs)
