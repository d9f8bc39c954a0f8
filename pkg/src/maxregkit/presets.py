"""Named generator families."""
from __future__ import annotations

import math

import numpy as np

from . import numlin as nl
from .semigroup import Generator, make_generator

GENERATOR_PRESETS = ("laplacian_1d", "random_sectorial", "random_hermitian", "jordan_like", "scalar")


def laplacian_1d(n: int) -> np.ndarray:
    """Dirichlet second difference on ``n`` interior points of the unit interval."""
    a = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return (n + 1) ** 2 * a.astype(np.complex128)


def random_sectorial(n: int, seed: int = 0, angle: float = math.pi / 4) -> np.ndarray:
    """``V diag(λ) V^{-1}`` with ``Re λ ∈ [0.5, 4]``, ``|arg λ| <= angle`` and ``cond(V) <= 20``."""
    if not 0 <= angle < math.pi / 2:
        raise ValueError(f"angle must lie in [0, pi/2), got {angle}")
    rng = np.random.default_rng(seed)
    re = rng.uniform(0.5, 4.0, n)
    lam = re + 1j * re * math.tan(angle) * rng.uniform(-1.0, 1.0, n)
    while True:
        v = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        s = np.linalg.svd(v, compute_uv=False)
        if s[-1] > 0 and s[0] / s[-1] <= 20.0:
            break
    return v @ np.diag(lam) @ nl.inv(v)


def random_hermitian(n: int, seed: int = 0, low: float = 0.5, high: float = 4.0) -> np.ndarray:
    """``Q diag(λ) Q*`` with ``λ`` uniform in ``[low, high]`` and ``Q`` unitary."""
    rng = np.random.default_rng(seed)
    lam = rng.uniform(low, high, n)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    a = q @ np.diag(lam) @ nl.adjoint(q)
    return 0.5 * (a + nl.adjoint(a))


def jordan_like(n: int, coupling: float) -> np.ndarray:
    """Identity plus ``coupling`` on the superdiagonal."""
    return (np.eye(n) + coupling * np.eye(n, k=1)).astype(np.complex128)


def preset_matrix(name: str, params=None, seed: int = 0) -> np.ndarray:
    params = dict(params or {})
    if name == "laplacian_1d":
        return laplacian_1d(int(params.get("n", 8)))
    if name == "random_sectorial":
        return random_sectorial(int(params.get("n", 4)), int(params.get("seed", seed)),
                                float(params.get("angle", math.pi / 4)))
    if name == "random_hermitian":
        return random_hermitian(int(params.get("n", 4)), int(params.get("seed", seed)),
                                float(params.get("low", 0.5)), float(params.get("high", 4.0)))
    if name == "jordan_like":
        return jordan_like(int(params.get("n", 2)), float(params.get("coupling", 10.0)))
    if name == "scalar":
        lam = params.get("lambda", 1.0)
        if isinstance(lam, (list, tuple)):
            lam = complex(lam[0], lam[1])
        return np.array([[complex(lam)]])
    raise ValueError(f"unknown generator preset {name!r}; expected one of {GENERATOR_PRESETS}")


def preset_generator(name: str, params=None, seed: int = 0) -> Generator:
    return make_generator(preset_matrix(name, params, seed))
