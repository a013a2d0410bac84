"""One-sided Jacobi SVD and the truncated pseudoinverse built on it."""

from __future__ import annotations

import numpy as np

__all__ = ["jacobi_svd", "pinv_from_svd"]


def _round_robin(n):
    """Rounds of disjoint column pairs covering every pair once per sweep."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    k = len(players)
    rounds = []
    for _ in range(k - 1):
        pairs = [(players[i], players[k - 1 - i]) for i in range(k // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        if pairs:
            rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_svd(a, *, tol=1e-15, max_sweeps=80):
    """Singular value decomposition by Hestenes' one-sided Jacobi method.

    Column pairs of a working copy of ``a`` are rotated until mutually
    orthogonal; the accumulated rotations form ``V``.  Disjoint pairs of a
    round-robin schedule are rotated together.

    Parameters
    ----------
    a : array_like, shape (m, n)
    tol : float
        Pair is considered orthogonal when ``|a_p . a_q| <= tol *
        ||a_p|| ||a_q||``.

    Returns
    -------
    u : ndarray, shape (m, k)
    s : ndarray, shape (k,)
        Non-negative, sorted descending; ``k = min(m, n)``.
    vt : ndarray, shape (k, n)
    """
    a = np.array(a, dtype=float)
    m, n = a.shape
    if m < n:
        u, s, vt = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return vt.T, s, u.T

    work = a.copy()
    v = np.eye(n)
    rounds = _round_robin(n)
    # columns this small relative to ||a||_F are numerically zero
    floor = (np.finfo(float).eps * np.linalg.norm(a)) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for P, Q in rounds:
            ap, aq = work[:, P], work[:, Q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            active = (np.abs(gamma) > tol * np.sqrt(alpha * beta)) & (alpha > floor) & (beta > floor)
            if not np.any(active):
                continue
            rotated = True
            P, Q = P[active], Q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            ap, aq = work[:, P], work[:, Q]
            work[:, P] = c * ap - s * aq
            work[:, Q] = s * ap + c * aq
            vp, vq = v[:, P], v[:, Q]
            v[:, P] = c * vp - s * vq
            v[:, Q] = s * vp + c * vq
        if not rotated:
            break

    sig = np.linalg.norm(work, axis=0)
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    work = work[:, order]
    v = v[:, order]
    u = np.zeros((m, n))
    nz = sig > 0
    u[:, nz] = work[:, nz] / sig[nz]
    return u, sig, v.T


def pinv_from_svd(u, s, vt, rtol):
    """Return ``V diag(s+) U^T`` with singular values below ``rtol * s_max`` dropped."""
    smax = s[0] if s.size else 0.0
    keep = s > rtol * smax if smax > 0 else np.zeros_like(s, dtype=bool)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T, int(keep.sum())
