"""Small dense linear algebra for the spectral hypotheses.

Everything here targets n <= 16. Symmetric parts use the unhalved
convention ``M + M.T`` throughout, so every epsilon threshold refers to the
eigenvalues of that sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadParamsError,
    DimensionMismatchError,
    NoConvergenceError,
    NotSymmetricError,
    ZeroVectorError,
)


@dataclass(frozen=True)
class Spectrum:
    general_eigs: np.ndarray  # complex, length n
    sym_eigs: np.ndarray  # ascending eigenvalues of M + M.T
    source_matrix_dim: int


@dataclass(frozen=True)
class RayleighBounds:
    mu0: float  # largest eigenvalue
    mu1: float  # smallest eigenvalue
    matrix: np.ndarray


def _square(M) -> np.ndarray:
    M = np.array(M, dtype=float, ndmin=2)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise BadParamsError("matrix has non-finite entries")
    return M


def sym_part(M) -> np.ndarray:
    """Return ``M + M.T`` (not halved)."""
    M = np.asarray(M, dtype=float)
    return M + M.T


def det(M) -> float:
    """Determinant by LU with partial pivoting; 0.0 for exactly singular input."""
    A = _square(M).copy()
    n = A.shape[0]
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if A[p, k] == 0.0:
            return 0.0
        if p != k:
            A[[k, p]] = A[[p, k]]
            sign = -sign
        A[k + 1 :, k] /= A[k, k]
        A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k, k + 1 :])
    return float(sign * np.prod(np.diag(A)))


def lu_solve(M, B) -> np.ndarray:
    """Solve ``M X = B`` with partial pivoting. Raises ``ZeroDivisionError`` if singular."""
    A = _square(M).copy()
    X = np.array(B, dtype=float)
    vector = X.ndim == 1
    if vector:
        X = X[:, None]
    n = A.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if A[p, k] == 0.0:
            raise ZeroDivisionError("singular matrix")
        if p != k:
            A[[k, p]] = A[[p, k]]
            X[[k, p]] = X[[p, k]]
        A[k + 1 :, k] /= A[k, k]
        A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k, k + 1 :])
        X[k + 1 :] -= np.outer(A[k + 1 :, k], X[k])
    for k in range(n - 1, -1, -1):
        X[k] = (X[k] - A[k, k + 1 :] @ X[k + 1 :]) / A[k, k]
    return X[:, 0] if vector else X


def sigma_min(M) -> float:
    """Smallest singular value."""
    return float(np.linalg.svd(np.atleast_2d(M), compute_uv=False)[-1])


# ---------------------------------------------------------------------------
# symmetric eigenvalues: cyclic Jacobi


def _check_symmetric(S) -> np.ndarray:
    S = _square(S)
    scale = 1.0 + np.max(np.abs(S))
    if np.max(np.abs(S - S.T)) > 1e-12 * scale:
        raise NotSymmetricError("matrix is not symmetric to 1e-12 relative")
    return 0.5 * (S + S.T)


def jacobi_eigh(S, *, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi rotations. Returns ``(eigenvalues, eigenvectors)`` sorted ascending.

    Stops once the off-diagonal Frobenius norm is at most ``tol * ||S||_F``.
    """
    A = _check_symmetric(S).copy()
    n = A.shape[0]
    V = np.eye(n)
    target = tol * np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = float(A[q, q] - A[p, p])
                if abs(apq) < 1e-150 * abs(diff):
                    # theta would overflow; t ~ 1/(2 theta)
                    t = float(apq) / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                # A <- R^T A R with R the (p, q) rotation
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s * V[:, q]
                V[:, q] = s * Vp + c * V[:, q]
    else:
        raise NoConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def eig_symmetric(S) -> np.ndarray:
    """Ascending real eigenvalues of a symmetric matrix."""
    S = _check_symmetric(S)
    n = S.shape[0]
    if n == 1:
        return np.array([S[0, 0]])
    if n == 2:
        a, b, d = S[0, 0], S[0, 1], S[1, 1]
        mid = 0.5 * (a + d)
        rad = math.hypot(0.5 * (a - d), b)
        return np.array([mid - rad, mid + rad])
    return jacobi_eigh(S)[0]


def rayleigh(A, Y) -> float:
    """``Y^T A Y / Y^T Y``."""
    Y = np.asarray(Y, dtype=float).reshape(-1)
    scale = float(np.max(np.abs(Y))) if Y.size else 0.0
    if scale == 0.0:
        raise ZeroVectorError("Rayleigh quotient of the zero vector")
    Y = Y / scale  # the quotient is scale-free; this avoids underflow in Y.Y
    yy = float(Y @ Y)
    return float(Y @ np.asarray(A, dtype=float) @ Y) / yy


def rayleigh_bounds(A) -> RayleighBounds:
    w = eig_symmetric(A)
    return RayleighBounds(mu0=float(w[-1]), mu1=float(w[0]), matrix=np.asarray(A, dtype=float))


# ---------------------------------------------------------------------------
# general eigenvalues: Hessenberg reduction + Francis double-shift QR


def hessenberg(M) -> np.ndarray:
    """Upper Hessenberg form by Gaussian elimination with pivoting (similarity)."""
    a = _square(M).copy()
    n = a.shape[0]
    for m in range(1, n - 1):
        i = m + int(np.argmax(np.abs(a[m:, m - 1])))
        x = a[i, m - 1]
        if i != m:
            a[[i, m], m - 1 :] = a[[m, i], m - 1 :]
            a[:, [i, m]] = a[:, [m, i]]
        if x != 0.0:
            for i in range(m + 1, n):
                y = a[i, m - 1]
                if y != 0.0:
                    y /= x
                    a[i, m - 1] = y
                    a[i, m:] -= y * a[m, m:]
                    a[:, m] += y * a[:, i]
    # clear the multipliers stored below the subdiagonal
    return np.triu(a, -1)


def _hqr(h: np.ndarray, max_iter: int) -> np.ndarray:
    n = h.shape[0]
    # 1-based indexing keeps the classic algorithm readable
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = h
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    anorm = np.sum(np.abs(np.triu(h, -1)))
    nn = n
    t = 0.0
    total = 0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) + s == s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + math.copysign(z, p)
                        wr[nn - 1] = wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = wi[nn] = 0.0
                    else:
                        wr[nn - 1] = wr[nn] = x + p
                        wi[nn - 1] = -z
                        wi[nn] = z
                    nn -= 2
                else:
                    if total >= max_iter:
                        raise NoConvergenceError(f"QR iteration exceeded {max_iter} steps")
                    if its and its % 10 == 0:
                        # exceptional shift
                        t += x
                        for i in range(1, nn + 1):
                            a[i, i] -= x
                        s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                        y = x = 0.75 * s
                        w = -0.4375 * s * s
                    its += 1
                    total += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                        if s == 0.0:
                            continue
                        if k == m:
                            if l != m:
                                a[k, k - 1] = -a[k, k - 1]
                        else:
                            a[k, k - 1] = -s * x
                        p += s
                        x = p / s
                        y = q / s
                        z = r / s
                        q /= p
                        r /= p
                        for j in range(k, nn + 1):
                            p = a[k, j] + q * a[k + 1, j]
                            if k != nn - 1:
                                p += r * a[k + 2, j]
                                a[k + 2, j] -= p * z
                            a[k + 1, j] -= p * y
                            a[k, j] -= p * x
                        mmin = min(nn, k + 3)
                        for i in range(l, mmin + 1):
                            p = x * a[i, k] + y * a[i, k + 1]
                            if k != nn - 1:
                                p += z * a[i, k + 2]
                                a[i, k + 2] -= p * r
                            a[i, k + 1] -= p * q
                            a[i, k] -= p
            if not l < nn - 1:
                break
    return wr[1:] + 1j * wi[1:]


def _eig2(M: np.ndarray) -> np.ndarray:
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    mid = 0.5 * (a + d)
    disc = (0.5 * (a - d)) ** 2 + b * c
    if disc >= 0.0:
        r = math.sqrt(disc)
        big = mid + math.copysign(r, mid) if mid != 0.0 else r
        # the small root via the product of roots avoids cancellation
        prod = a * d - b * c
        small = prod / big if big != 0.0 else mid - r
        return np.array([big, small], dtype=complex)
    r = math.sqrt(-disc)
    return np.array([complex(mid, r), complex(mid, -r)])


def eig_general(M) -> np.ndarray:
    """All eigenvalues of a real square matrix, with multiplicity.

    Raises :class:`NoConvergenceError` after ``100 * n**2`` QR steps.
    """
    M = _square(M)
    n = M.shape[0]
    if n == 1:
        return np.array([complex(M[0, 0])])
    if n == 2:
        return _eig2(M)
    return _hqr(hessenberg(M), 100 * n * n)


def spectrum(M) -> Spectrum:
    M = _square(M)
    return Spectrum(
        general_eigs=eig_general(M),
        sym_eigs=eig_symmetric(sym_part(M)),
        source_matrix_dim=M.shape[0],
    )
