"""Validated generators, the semigroup e^{-tA}, resolvents and multiplier symbols."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numlin as nl
from .errors import NotSectorial, NotStable, SingularMatrixError

SECTOR_MARGIN = 1e-9
PADE_THETA = 5.4
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring with the diagonal [13/13] Pade approximant."""
    a = nl.as_cmatrix(a, square=True)
    n = a.shape[0]
    norm1 = float(np.max(np.sum(np.abs(a), axis=0)))
    if norm1 == 0.0:
        return nl.identity(n)
    s = max(0, int(math.ceil(math.log2(norm1 / PADE_THETA))))
    x = a / 2.0**s
    b = _PADE13
    eye = nl.identity(n)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    u = x @ (x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * eye)
    v = x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * eye
    r = nl.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


@dataclass(frozen=True, eq=False)
class Generator:
    """A matrix ``A`` such that ``-A`` generates a bounded analytic semigroup.

    ``sector_angle`` is the largest ``|arg λ|`` over the spectrum, so the
    semigroup extends analytically to ``|arg z| < delta`` with
    ``delta = pi/2 - sector_angle``.  ``m_bound`` samples
    ``sup_t ||e^{-tA}||`` on ``[0, 10/alpha]`` and is what the truncation
    bounds are scaled by.
    """

    a: np.ndarray
    spectrum: np.ndarray
    alpha: float
    sector_angle: float
    is_selfadjoint: bool
    m_bound: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def delta(self) -> float:
        return math.pi / 2 - self.sector_angle

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.spectrum)))


def make_generator(a) -> Generator:
    """Validate ``a`` and attach its spectral metadata.

    Raises
    ------
    NotStable
        some eigenvalue has ``Re λ <= 0``.
    NotSectorial
        some eigenvalue has ``|arg λ| >= pi/2 - 1e-9``.
    """
    a = nl.as_cmatrix(a, square=True)
    spec = nl.eig_general(a).eigenvalues
    for lam in spec:
        if lam.real <= 0.0:
            raise NotStable(lam)
    angles = np.abs(np.angle(spec))
    worst = int(np.argmax(angles))
    if angles[worst] >= math.pi / 2 - SECTOR_MARGIN:
        raise NotSectorial(spec[worst], float(angles[worst]))
    alpha = float(np.min(spec.real))
    ts = np.concatenate([[0.0], np.geomspace(1e-3 * 10.0 / alpha, 10.0 / alpha, 32)])
    m_bound = max(nl.op_norm2(expm(-t * a)) for t in ts)
    return Generator(
        a=a,
        spectrum=spec,
        alpha=alpha,
        sector_angle=float(angles[worst]),
        is_selfadjoint=nl.is_hermitian(a),
        m_bound=float(m_bound),
    )


def semigroup_at(g: Generator, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"semigroup is only defined for t >= 0, got {t}")
    if t == 0:
        return nl.identity(g.n)
    return expm(-t * g.a)


def resolvent(g: Generator, z) -> np.ndarray:
    """``(zI + A)^{-1}``; ``z`` may be an array of points, giving a stack."""
    z = np.asarray(z, dtype=np.complex128)
    dist = np.min(np.abs(z.reshape(-1, 1) + g.spectrum.reshape(1, -1)))
    if dist < 1e-10:
        raise SingularMatrixError(-1, f"-z is within {dist:.3g} of the spectrum")
    shifted = z[..., None, None] * nl.identity(g.n) + g.a
    return nl.inv(shifted)


@dataclass(frozen=True)
class MultiplierSymbol:
    sign: int
    sigma: float
    value: np.ndarray


def _sign(sign) -> int:
    if sign in (1, "+", "plus", "forward"):
        return 1
    if sign in (-1, "-", "minus", "backward"):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def multiplier(g: Generator, sign, sigma: float) -> MultiplierSymbol:
    """``A(±iσ + A)^{-1}``, evaluated as ``I - (±iσ)(±iσ + A)^{-1}``."""
    s = _sign(sign)
    z = 1j * s * float(sigma)
    value = nl.identity(g.n) - z * resolvent(g, z)
    return MultiplierSymbol(s, float(sigma), value)


def multiplier_stack(g: Generator, sign, sigmas) -> np.ndarray:
    """Symbols at many frequencies at once, shape ``(len(sigmas), n, n)``."""
    s = _sign(sign)
    z = 1j * s * np.asarray(sigmas, dtype=float)
    return nl.identity(g.n) - z[:, None, None] * resolvent(g, z)


def kernel_eval(g: Generator, t: float) -> np.ndarray:
    """``A e^{-tA}`` for ``t > 0`` and the zero matrix for ``t <= 0``."""
    if t <= 0:
        return np.zeros((g.n, g.n), dtype=np.complex128)
    return g.a @ semigroup_at(g, t)


def semigroup_samples(g: Generator, h: float, count: int) -> np.ndarray:
    """``e^{-jhA}`` for ``j = 0..count-1``, shape ``(count, n, n)``.

    One Pade evaluation and a chain of products; cached on the generator.
    """
    key = ("samples", float(h), int(count))
    hit = g._cache.get(key)
    if hit is not None:
        return hit
    step = semigroup_at(g, h)
    out = np.empty((count, g.n, g.n), dtype=np.complex128)
    out[0] = nl.identity(g.n)
    for j in range(1, count):
        out[j] = out[j - 1] @ step
    out.setflags(write=False)
    g._cache[key] = out
    return out
