"""Dense complex linear algebra for small matrices (n <= 64).

Matrices are plain ``complex128`` numpy arrays.  The factorizations here
(LU with partial pivoting, cyclic Jacobi for Hermitian matrices, Hessenberg
reduction followed by shifted QR for the general spectrum) are written out
so that every other module depends only on array arithmetic; numpy's own
``linalg`` is used by the test-suite as an independent reference.

``lu_factor``/``lu_solve``/``solve`` accept stacks of matrices of shape
``(..., n, n)`` and factor them all at once, which is what the frequency
and contour loops elsewhere need.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceError, DimensionError, NotHermitianError, SingularMatrixError

PIVOT_RTOL = 1e-13
HERMITIAN_RTOL = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None


def as_cmatrix(a, square=False) -> np.ndarray:
    """Validate and convert ``a`` into a finite 2-D complex array."""
    m = np.array(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def as_cvector(x) -> np.ndarray:
    v = np.array(x, dtype=np.complex128).reshape(-1)
    if v.size < 1:
        raise DimensionError("empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def adjoint(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    return np.conj(np.swapaxes(a, -1, -2))


def frob_norm(a) -> float:
    return float(np.sqrt(np.sum(np.abs(np.asarray(a)) ** 2)))


def is_hermitian(a, rtol=HERMITIAN_RTOL) -> bool:
    a = np.asarray(a, dtype=np.complex128)
    return frob_norm(a - adjoint(a)) <= rtol * frob_norm(a)


# ---------------------------------------------------------------------------
# LU with partial pivoting


def lu_factor(a):
    """Factor ``P a = L U`` for a matrix or a stack of matrices.

    Returns ``(lu, perm)`` where ``lu`` holds the unit lower factor below the
    diagonal and ``U`` on and above it, and ``perm[..., i]`` is the original
    row moved to position ``i``.

    Raises
    ------
    SingularMatrixError
        if a pivot falls below ``1e-13`` times the largest row norm.
    """
    a = np.array(a, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"lu_factor needs square matrices, got shape {a.shape}")
    shape = a.shape
    n = shape[-1]
    lu = a.reshape(-1, n, n)
    nb = lu.shape[0]
    rows = np.arange(nb)
    perm = np.tile(np.arange(n), (nb, 1))
    thresh = PIVOT_RTOL * np.max(np.sum(np.abs(lu), axis=2), axis=1)

    for k in range(n):
        p = k + np.argmax(np.abs(lu[:, k:, k]), axis=1)
        swap = p != k
        if np.any(swap):
            r, pk = rows[swap], p[swap]
            tmp = lu[r, k, :].copy()
            lu[r, k, :] = lu[r, pk, :]
            lu[r, pk, :] = tmp
            tmp = perm[r, k].copy()
            perm[r, k] = perm[r, pk]
            perm[r, pk] = tmp
        pivot = lu[:, k, k]
        if np.any(np.abs(pivot) <= thresh):
            raise SingularMatrixError(k)
        if k + 1 < n:
            lu[:, k + 1:, k] /= pivot[:, None]
            lu[:, k + 1:, k + 1:] -= lu[:, k + 1:, k, None] * lu[:, k, None, k + 1:]
    return lu.reshape(shape), perm.reshape(shape[:-1])


def lu_solve(lu, perm, rhs) -> np.ndarray:
    """Solve with factors from :func:`lu_factor`.

    ``rhs`` is either a vector stack ``(..., n)`` or a matrix stack
    ``(..., n, k)`` with the same leading dimensions as the factors.
    """
    n = lu.shape[-1]
    lead = lu.shape[:-2]
    rhs = np.asarray(rhs, dtype=np.complex128)
    vector = rhs.ndim == lu.ndim - 1
    if rhs.shape[: len(lead)] != lead or rhs.shape[len(lead)] != n:
        raise DimensionError(f"rhs of shape {rhs.shape} does not match factors {lu.shape}")
    b = rhs.reshape(-1, n, 1) if vector else rhs.reshape(-1, n, rhs.shape[-1])
    L = lu.reshape(-1, n, n)
    pm = perm.reshape(-1, n)
    x = np.take_along_axis(b, pm[:, :, None], axis=1).copy()
    for i in range(1, n):
        x[:, i, :] -= np.einsum("bj,bjk->bk", L[:, i, :i], x[:, :i, :])
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            x[:, i, :] -= np.einsum("bj,bjk->bk", L[:, i, i + 1:], x[:, i + 1:, :])
        x[:, i, :] /= L[:, i, i, None]
    return x.reshape(rhs.shape)


def solve(a, rhs) -> np.ndarray:
    """Solve ``a x = rhs`` by LU with partial pivoting.

    A single matrix may be paired with a vector ``(n,)`` or a matrix
    ``(n, k)`` right-hand side; stacks follow :func:`lu_solve`.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"solve needs a square matrix, got shape {a.shape}")
    lu, perm = lu_factor(a)
    return lu_solve(lu, perm, rhs)


def inv(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[-1]
    eye = np.broadcast_to(identity(n), a.shape)
    return solve(a, eye)


# ---------------------------------------------------------------------------
# Eigenvalues


def eig_hermitian(a, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi eigensolver for Hermitian matrices.

    Eigenvalues come back real and ascending; the columns of
    ``eigenvectors`` are orthonormal.
    """
    a = as_cmatrix(a, square=True)
    if not is_hermitian(a):
        raise NotHermitianError("matrix is not Hermitian (||A - A*||_F > 1e-12 ||A||_F)")
    n = a.shape[0]
    h = 0.5 * (a + adjoint(a))
    v = identity(n)
    scale = frob_norm(h)
    if n == 1 or scale == 0.0:
        return EigenDecomposition(np.real(np.diag(h)).copy(), v)

    tol = _EPS * scale
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(h[offdiag]) ** 2))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = h[p, q]
                mag = abs(apq)
                if mag <= 1e-3 * tol / n:
                    continue
                phase = apq / mag
                app, aqq = h[p, p].real, h[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = 1.0 / (abs(tau) + np.sqrt(1.0 + tau * tau))
                if tau < 0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # J = diag(1, conj(phase)) @ [[c, s], [-s, c]] acting on (p, q)
                j = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                h[:, idx] = h[:, idx] @ j
                h[idx, :] = adjoint(j) @ h[idx, :]
                h[p, q] = h[q, p] = 0.0
                h[p, p] = h[p, p].real
                h[q, q] = h[q, q].real
                v[:, idx] = v[:, idx] @ j
    else:
        raise ConvergenceError(max_sweeps, f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.real(np.diag(h))
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], v[:, order])


def hessenberg(a) -> np.ndarray:
    """Unitarily similar upper Hessenberg form via Householder reflections."""
    h = as_cmatrix(a, square=True).copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        nx = np.linalg.norm(x)
        if nx == 0.0 or np.linalg.norm(x[1:]) == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * nx
        v /= np.linalg.norm(v)
        h[k + 1:, :] -= 2.0 * np.outer(v, np.conj(v) @ h[k + 1:, :])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, np.conj(v))
        h[k + 2:, k] = 0.0
    return h


def _wilkinson_shift(a, b, c, d):
    tr2 = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    mu1, mu2 = tr2 + disc, tr2 - disc
    return mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2


def eig_general(a, iters_per_eigenvalue: int = 30) -> EigenDecomposition:
    """All eigenvalues of a square matrix (no eigenvectors).

    Hessenberg reduction followed by single-shift complex QR sweeps with a
    Wilkinson shift, deflating from the bottom.
    """
    h = hessenberg(a)
    n = h.shape[0]
    cap = iters_per_eigenvalue * n
    eig = np.zeros(n, dtype=np.complex128)
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = h[0, 0]
            break
        l = hi
        while l > 0:
            if abs(h[l, l - 1]) <= _EPS * (abs(h[l - 1, l - 1]) + abs(h[l, l])):
                h[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            its = 0
            continue
        if total >= cap:
            raise ConvergenceError(cap, f"shifted QR did not converge within {cap} iterations")
        its += 1
        total += 1
        if its % 11 == 0:
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1]) * (1 + 1j)
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        _qr_sweep(h, l, hi, mu)
    order = np.lexsort((eig.imag, eig.real))
    return EigenDecomposition(eig[order])


def _qr_sweep(h, l, hi, mu):
    """One explicit shifted QR step ``H - mu = QR, H <- RQ + mu`` on block l..hi."""
    blk = slice(l, hi + 1)
    h[blk, blk] -= mu * np.eye(hi - l + 1)
    rots = []
    for k in range(l, hi):
        x, y = h[k, k], h[k + 1, k]
        r = np.hypot(abs(x), abs(y))
        if r == 0.0:
            rots.append(None)
            continue
        c, s = x / r, y / r
        g = np.array([[np.conj(c), np.conj(s)], [-s, c]])
        h[k:k + 2, k:hi + 1] = g @ h[k:k + 2, k:hi + 1]
        h[k + 1, k] = 0.0
        rots.append(g)
    for k, g in zip(range(l, hi), rots):
        if g is None:
            continue
        top = min(k + 2, hi)
        h[l:top + 1, k:k + 2] = h[l:top + 1, k:k + 2] @ adjoint(g)
    h[blk, blk] += mu * np.eye(hi - l + 1)


def op_norm2(a) -> float:
    """Spectral norm, from the largest eigenvalue of ``a* a``."""
    a = as_cmatrix(a)
    w = eig_hermitian(adjoint(a) @ a).eigenvalues
    return float(np.sqrt(max(w[-1], 0.0)))


# ---------------------------------------------------------------------------
# Matrix files: {"n": int, "re": [[...]], "im": [[...]]}


def matrix_to_json(a) -> dict:
    a = as_cmatrix(a, square=True)
    return {"n": a.shape[0], "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(doc: dict) -> np.ndarray:
    n = int(doc["n"])
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc.get("im", np.zeros((n, n))), dtype=float)
    if re.shape != (n, n) or im.shape != (n, n):
        raise DimensionError(f"matrix file declares n={n} but arrays have shapes {re.shape}, {im.shape}")
    return as_cmatrix(re + 1j * im, square=True)


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return matrix_from_json(json.load(fh))


def save_matrix(path, a) -> None:
    with open(path, "w") as fh:
        json.dump(matrix_to_json(a), fh)
