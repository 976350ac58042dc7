"""Pure-numpy spectral-radius kernels (fallback backend).

Batched over the z0 axis with ``numpy.linalg`` gufuncs; ``stable_mask``
prunes the active set after every z1 sample so fully unstable grids cost
only a few passes.
"""

import numpy as np

_CHUNK = 16384


def rho_pairs(P, Q, Qhat, R, Rhat, z0s, z1s):
    """Spectral radius of M(z0_k, z1_k) for paired sample arrays.

    M(z0, z1) = (I - z0*Rhat - z1*R)^{-1} (P + z0*Qhat + z1*Q); singular
    systems yield +inf.
    """
    P, Q, Qhat, R, Rhat = (np.asarray(a, complex) for a in (P, Q, Qhat, R, Rhat))
    z0s = np.asarray(z0s, complex).ravel()
    z1s = np.asarray(z1s, complex).ravel()
    s = P.shape[0]
    eye = np.eye(s)
    out = np.empty(len(z0s))
    for lo in range(0, len(z0s), _CHUNK):
        z0 = z0s[lo:lo + _CHUNK, None, None]
        z1 = z1s[lo:lo + _CHUNK, None, None]
        A = eye - z0 * Rhat - z1 * R
        B = P + z0 * Qhat + z1 * Q
        with np.errstate(all="ignore"):
            try:
                X = np.linalg.solve(A, B)
                rho = np.abs(np.linalg.eigvals(X)).max(axis=1)
            except np.linalg.LinAlgError:
                rho = np.array([_rho_single(A[k], B[k]) for k in range(A.shape[0])])
        rho[~np.isfinite(rho)] = np.inf
        out[lo:lo + _CHUNK] = rho
    return out


def _rho_single(A, B):
    try:
        return np.abs(np.linalg.eigvals(np.linalg.solve(A, B))).max()
    except np.linalg.LinAlgError:
        return np.inf


def stable_mask(P, Q, Qhat, R, Rhat, z0s, z1s, bound):
    """uint8 mask over z0s: 1 where rho(M(z0, z1)) <= bound for every z1."""
    P, Q, Qhat, R, Rhat = (np.asarray(a, complex) for a in (P, Q, Qhat, R, Rhat))
    z0s = np.asarray(z0s, complex).ravel()
    z1s = np.asarray(z1s, complex).ravel()
    s = P.shape[0]
    eye = np.eye(s)
    alive = np.ones(len(z0s), bool)
    idx = np.arange(len(z0s))
    for z1 in z1s:
        if not alive.any():
            break
        sub = idx[alive]
        for lo in range(0, len(sub), _CHUNK):
            ix = sub[lo:lo + _CHUNK]
            z0 = z0s[ix][:, None, None]
            A = eye - z0 * Rhat - z1 * R
            B = P + z0 * Qhat + z1 * Q
            with np.errstate(all="ignore"):
                try:
                    X = np.linalg.solve(A, B)
                    rho = np.abs(np.linalg.eigvals(X)).max(axis=1)
                except np.linalg.LinAlgError:
                    rho = np.array([_rho_single(A[k], B[k]) for k in range(A.shape[0])])
            bad = ~(np.isfinite(rho) & (rho <= bound))
            alive[ix[bad]] = False
    return alive.astype(np.uint8)
