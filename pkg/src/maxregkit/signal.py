"""Uniform time grids, sampled H-valued signals, quadrature norms and the radix-2 DFT."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, GridMismatch

N_MIN, N_MAX = 64, 2**20


def is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Grid:
    """Nodes ``t_j = j h`` for ``j = 0..N-1`` with ``h = T / N``."""

    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0 or not math.isfinite(self.T):
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if not is_pow2(self.N) or not N_MIN <= self.N <= N_MAX:
            raise ValueError(f"N must be a power of two in [{N_MIN}, {N_MAX}], got {self.N}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N) * self.h

    def frequencies(self) -> "FrequencyGrid":
        return FrequencyGrid(self.N, self.h)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.T, self.N * factor)


@dataclass(frozen=True)
class FrequencyGrid:
    """Angular frequencies of the length ``2N`` padded DFT."""

    N: int
    h: float

    @property
    def L(self) -> int:
        return 2 * self.N

    @property
    def sigma(self) -> np.ndarray:
        k = np.arange(self.L)
        signed = np.where(k < self.L // 2, k, k - self.L)
        return 2.0 * math.pi * signed / (self.L * self.h)


@dataclass(frozen=True, eq=False)
class Signal:
    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] != self.grid.N or s.shape[1] < 1:
            raise DimensionError(f"samples of shape {s.shape} do not fit a grid with N={self.grid.N}")
        if not np.all(np.isfinite(s)):
            raise ValueError("signal has non-finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples) -> "Signal":
        return Signal(self.grid, samples)

    def __add__(self, other: "Signal") -> "Signal":
        _check_pair(self, other)
        return Signal(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Signal") -> "Signal":
        _check_pair(self, other)
        return Signal(self.grid, self.samples - other.samples)

    def __mul__(self, c) -> "Signal":
        return Signal(self.grid, self.samples * c)

    __rmul__ = __mul__

    def apply(self, m) -> "Signal":
        """Act with a constant matrix at every node."""
        m = np.asarray(m, dtype=np.complex128)
        if m.shape != (self.dim, self.dim):
            raise DimensionError(f"matrix {m.shape} does not act on dim {self.dim}")
        return Signal(self.grid, self.samples @ m.T)


def zeros(grid: Grid, dim: int) -> Signal:
    return Signal(grid, np.zeros((grid.N, dim), dtype=np.complex128))


def _check_pair(f: Signal, g: Signal) -> None:
    if f.grid != g.grid:
        raise GridMismatch(f"grids differ: {f.grid} vs {g.grid}")
    if f.dim != g.dim:
        raise DimensionError(f"signal dims differ: {f.dim} vs {g.dim}")


def inner(f: Signal, g: Signal) -> complex:
    """Trapezoid rule for ``∫_0^T <f(t), g(t)> dt`` with the value at ``T`` taken as 0.

    The inner product is linear in the first slot.
    """
    _check_pair(f, g)
    h = f.grid.h
    pointwise = np.sum(f.samples * np.conj(g.samples), axis=1)
    return complex(h * np.sum(pointwise) - 0.5 * h * pointwise[0])


def l2_norm(f: Signal) -> float:
    return math.sqrt(max(inner(f, f).real, 0.0))


def tail_energy_fraction(f: Signal, fraction: float = 0.1) -> float:
    """Share of ``||f||^2`` carried by the last ``fraction`` of the window."""
    total = inner(f, f).real
    if total == 0.0:
        return 0.0
    start = int(math.floor((1.0 - fraction) * f.grid.N))
    tail = np.sum(np.abs(f.samples[start:]) ** 2) * f.grid.h
    return float(tail / total)


# ---------------------------------------------------------------------------
# radix-2 DFT along axis 0


@lru_cache(maxsize=64)
def _bitrev(L: int) -> np.ndarray:
    bits = L.bit_length() - 1
    idx = np.arange(L)
    rev = np.zeros(L, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


def _fft(x, sign: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    L = x.shape[0]
    if not is_pow2(L):
        raise ValueError(f"DFT length must be a power of two, got {L}")
    tail = x.shape[1:]
    y = x[_bitrev(L)]
    size = 2
    while size <= L:
        half = size // 2
        w = np.exp(sign * 2j * math.pi * np.arange(half) / size)
        y = y.reshape((L // size, size) + tail)
        even = y[:, :half]
        odd = y[:, half:] * w.reshape((1, half) + (1,) * len(tail))
        y = np.concatenate([even + odd, even - odd], axis=1)
        size *= 2
    return y.reshape((L,) + tail)


def dft(x) -> np.ndarray:
    """Unnormalized forward transform ``X_k = Σ_j x_j exp(-2πi jk/L)`` along axis 0."""
    return _fft(x, -1)


def idft(x) -> np.ndarray:
    """Inverse of :func:`dft` (carries the ``1/L``)."""
    x = np.asarray(x)
    return _fft(x, +1) / x.shape[0]


# ---------------------------------------------------------------------------
# presets


def random_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vector in C^dim with a real positive first entry."""
    d = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    d /= np.linalg.norm(d)
    if d[0] != 0:
        d *= abs(d[0]) / d[0]
    return d


def _direction(params, dim, rng):
    if params.get("direction") is not None:
        d = np.asarray(params["direction"], dtype=np.complex128).reshape(-1)
        if d.shape != (dim,):
            raise DimensionError(f"direction has {d.size} entries, expected {dim}")
        return d
    return random_direction(dim, rng)


def smooth_step(x) -> np.ndarray:
    """C^∞ step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


PRESETS = ("gauss_bump", "exp_decay", "randsmooth")


def preset_signal(name: str, grid: Grid, dim: int, params=None, seed: int = 0) -> Signal:
    """Deterministic test signals.

    gauss_bump
        ``exp(-(t - t0)^2 / (2 w^2)) d``; defaults ``t0 = T/4``, ``w = T/40``.
    exp_decay
        ``exp(-beta t) d``; default ``beta = 1``.
    randsmooth
        random trigonometric polynomial with ``K`` (default 8) modes per side,
        tapered smoothly to zero on ``[taper, 0.9] T`` (default ``taper = 0.6``)
        and normalized to unit L2 norm.

    ``d`` is ``params["direction"]`` if given, else a random unit vector
    drawn from ``seed``.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    t = grid.nodes
    T = grid.T
    if name == "gauss_bump":
        d = _direction(params, dim, rng)
        t0 = float(params.get("t0", T / 4))
        w = float(params.get("w", T / 40))
        samples = np.exp(-((t - t0) ** 2) / (2 * w * w))[:, None] * d[None, :]
    elif name == "exp_decay":
        d = _direction(params, dim, rng)
        beta = float(params.get("beta", 1.0))
        samples = np.exp(-beta * t)[:, None] * d[None, :]
    elif name == "randsmooth":
        K = int(params.get("K", 8))
        taper = float(params.get("taper", 0.6))
        coeff = np.zeros((grid.N, dim), dtype=np.complex128)
        for k in range(-K, K + 1):
            coeff[k % grid.N] = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        samples = idft(coeff) * grid.N
        samples *= (1.0 - smooth_step((t / T - taper) / (0.9 - taper)))[:, None]
        f = Signal(grid, samples)
        nrm = l2_norm(f)
        return f if nrm == 0 else Signal(grid, samples / nrm)
    else:
        raise ValueError(f"unknown signal preset {name!r}; expected one of {PRESETS}")
    return Signal(grid, samples)


def nominal_support(name: str, params=None) -> float:
    """Right end of a preset's effective support, used for default horizons.

    Returns 0 for presets whose support is tied to the horizon itself.
    """
    params = params or {}
    if name == "gauss_bump" and "t0" in params:
        return float(params["t0"]) + 6.0 * float(params.get("w", 0.0))
    if name == "exp_decay":
        return 12.0 / float(params.get("beta", 1.0))
    return 0.0


# ---------------------------------------------------------------------------
# signal files: {"T", "N", "dim", "re": [[N x n]], "im": [[N x n]]}


def signal_to_json(f: Signal) -> dict:
    return {
        "T": f.grid.T,
        "N": f.grid.N,
        "dim": f.dim,
        "re": f.samples.real.tolist(),
        "im": f.samples.imag.tolist(),
    }


def signal_from_json(doc: dict) -> Signal:
    grid = Grid(float(doc["T"]), int(doc["N"]))
    dim = int(doc["dim"])
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != (grid.N, dim) or im.shape != (grid.N, dim):
        raise DimensionError(f"signal file declares {grid.N}x{dim} but arrays are {re.shape}, {im.shape}")
    return Signal(grid, re + 1j * im)


def load_signal(path) -> Signal:
    with open(path) as fh:
        return signal_from_json(json.load(fh))


def save_signal(path, f: Signal) -> None:
    with open(path, "w") as fh:
        json.dump(signal_to_json(f), fh)
