"""Forward and backward maximal regularity operators on L^2(0, T; C^n).

    M+ f(t) = ∫_0^t A e^{-(t-s)A} f(s) ds
    M- f(t) = ∫_t^T A e^{-(s-t)A} f(s) ds      (the half-line integral cut at T)

Two evaluation paths:

``direct``
    time-domain quadrature against kernel samples ``K_m = A e^{-mhA}``,
    either ``rect`` (left-endpoint, an exact discrete convolution) or
    ``trapezoid`` (second order).  The same weighted sum can be formed by an
    O(N^2) loop over lags (``engine="loop"``) or by a padded FFT of the
    kernel sequence (``engine="fft"``).
``fourier``
    zero-pad to 2N, transform, multiply by the symbols ``A(±iσ_k + A)^{-1}``,
    transform back, keep the first N samples.

On the half line the two operators do not commute exactly; their
commutator is the rank-n boundary term
``[M+, M-] f(t) = -1/2 e^{-tA} (M- f)(0)``.  Cutting the backward integral
at ``T`` adds ``+1/2 e^{-(T-t)A} (M+ f)(T)``.  Both terms are computed
independently of the operator compositions by :func:`boundary_commutator`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numlin as nl
from .errors import DimensionError
from .semigroup import Generator, make_generator, multiplier_stack, semigroup_samples
from .signal import Grid, Signal, dft, idft, inner, l2_norm, tail_energy_fraction

MODES = ("rect", "trapezoid")
ENGINES = ("fft", "loop")
REL_EPS = 1e-300


@dataclass(frozen=True, eq=False)
class MaxRegResult:
    output: Signal
    path: str
    truncation_tail_bound: float
    wall_time: float


@dataclass(frozen=True, eq=False)
class CommutatorReport:
    abs_residual: float
    rel_residual: float
    grid: Grid
    path: str
    boundary_norm: float
    rel_boundary_defect: float
    commutator: Optional[Signal] = None


@dataclass(frozen=True)
class NormEqualityReport:
    norm_plus: float
    norm_minus: float
    rel_gap: float
    is_selfadjoint: bool
    boundary_gap: Optional[float] = None


def _check(g: Generator, f: Signal) -> None:
    if f.dim != g.n:
        raise DimensionError(f"signal dim {f.dim} does not match generator size {g.n}")


def _check_mode(mode, engine=None):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if engine is not None and engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}, got {engine!r}")


def _kernel(g: Generator, grid: Grid, with_a: bool) -> np.ndarray:
    key = ("kernel", grid.T, grid.N, with_a)
    hit = g._cache.get(key)
    if hit is None:
        s = semigroup_samples(g, grid.h, grid.N)
        hit = np.matmul(g.a, s) if with_a else s
        hit.setflags(write=False)
        g._cache[key] = hit
    return hit


def _lag_weights(h: float, N: int, lag: int, forward: bool, mode: str) -> np.ndarray:
    """Weights at a fixed lag for target nodes in ascending order."""
    w = np.full(N - lag, h)
    if mode == "rect":
        if forward and lag == 0:
            w[:] = 0.0
        return w
    if lag == 0:
        w[:] = 0.5 * h
        if forward:
            w[0] = 0.0
    elif forward:
        # source node s = 0 is the left end of [0, t_j]
        w[0] = 0.5 * h
    return w


def _apply_loop(kern, f, h, forward, mode):
    N = f.shape[0]
    out = np.zeros_like(f)
    for m in range(N):
        w = _lag_weights(h, N, m, forward, mode)
        if forward:
            out[m:] += w[:, None] * (f[: N - m] @ kern[m].T)
        else:
            out[: N - m] += w[:, None] * (f[m:] @ kern[m].T)
    return out


def _kernel_spectrum(g: Generator, grid: Grid, with_a: bool, forward: bool, mode: str) -> np.ndarray:
    """DFT of the weighted kernel sequence on the padded length 2N."""
    key = ("kspec", grid.T, grid.N, with_a, forward, mode)
    hit = g._cache.get(key)
    if hit is not None:
        return hit
    N, h = grid.N, grid.h
    kern = _kernel(g, grid, with_a)
    seq = np.zeros((2 * N, g.n, g.n), dtype=np.complex128)
    c0 = 0.0 if (mode == "rect" and forward) else (h if mode == "rect" else 0.5 * h)
    if forward:
        seq[0] = c0 * kern[0]
        seq[1:N] = h * kern[1:]
    else:
        seq[0] = c0 * kern[0]
        seq[N + 1:] = h * kern[1:][::-1]
    hit = dft(seq)
    hit.setflags(write=False)
    g._cache[key] = hit
    return hit


def _pad_dft(f: np.ndarray) -> np.ndarray:
    N = f.shape[0]
    padded = np.zeros((2 * N,) + f.shape[1:], dtype=np.complex128)
    padded[:N] = f
    return dft(padded)


def _apply_fft(g, grid, f, with_a, forward, mode):
    spec = _kernel_spectrum(g, grid, with_a, forward, mode)
    out = idft(np.einsum("kab,kb->ka", spec, _pad_dft(f)))[: grid.N]
    if forward and mode == "trapezoid":
        # left-end weight h/2 instead of h
        out -= 0.5 * grid.h * (f[0] @ np.swapaxes(_kernel(g, grid, with_a), 1, 2))
    return out


def _quadrature(g, f, with_a, forward, mode, engine):
    _check(g, f)
    _check_mode(mode, engine)
    if engine == "loop":
        return _apply_loop(_kernel(g, f.grid, with_a), f.samples, f.grid.h, forward, mode)
    return _apply_fft(g, f.grid, f.samples, with_a, forward, mode)


def _tail_bound(g: Generator, f: Signal, forward: bool) -> float:
    T = f.grid.T
    factor = math.exp(-g.alpha * T) if forward else math.exp(-g.alpha * T / 2)
    return factor * g.m_bound * l2_norm(f)


def mreg_forward_direct(g: Generator, f: Signal, mode: str = "trapezoid", engine: str = "fft") -> MaxRegResult:
    t0 = time.perf_counter()
    out = _quadrature(g, f, True, True, mode, engine)
    return MaxRegResult(f.with_samples(out), "direct", _tail_bound(g, f, True), time.perf_counter() - t0)


def mreg_backward_direct(g: Generator, f: Signal, mode: str = "trapezoid", engine: str = "fft") -> MaxRegResult:
    t0 = time.perf_counter()
    out = _quadrature(g, f, True, False, mode, engine)
    return MaxRegResult(f.with_samples(out), "direct", _tail_bound(g, f, False), time.perf_counter() - t0)


def _symbols(g: Generator, grid: Grid, sign: int) -> np.ndarray:
    key = ("symbols", grid.T, grid.N, sign)
    hit = g._cache.get(key)
    if hit is None:
        hit = multiplier_stack(g, sign, grid.frequencies().sigma)
        hit.setflags(write=False)
        g._cache[key] = hit
    return hit


def _fourier_full(g, grid, samples, sign, symbol):
    """Apply the multiplier to the zero-padded signal; returns all 2N samples.

    The exact symbol multiplies a trapezoid-weighted transform: the jump of
    the zero extension at t = 0 gets half weight, which keeps the path
    second order for signals with f(0) != 0.  The sampled symbol works on the
    raw samples so that it reproduces the rect quadrature exactly.
    """
    if symbol == "exact":
        x = np.zeros((2 * grid.N,) + samples.shape[1:], dtype=np.complex128)
        x[: grid.N] = samples
        x[0] *= 0.5
        return line_apply(g, grid, x, sign)
    if symbol == "sampled":
        spec = _kernel_spectrum(g, grid, True, sign > 0, "rect")
        return idft(np.einsum("kab,kb->ka", spec, _pad_dft(samples)))
    raise ValueError(f"symbol must be 'exact' or 'sampled', got {symbol!r}")


def mreg_fourier(g: Generator, f: Signal, sign, symbol: str = "exact") -> MaxRegResult:
    """Multiplier path.

    ``symbol="exact"`` uses ``A(±iσ_k + A)^{-1}`` on the trapezoid-weighted
    transform of the zero extension.  ``symbol="sampled"``
    uses the DFT of the sampled kernel instead, which reproduces the
    ``rect`` direct quadrature up to rounding.
    """
    _check(g, f)
    s = 1 if sign in (1, "+") else -1 if sign in (-1, "-") else None
    if s is None:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    t0 = time.perf_counter()
    out = _fourier_full(g, f.grid, f.samples, s, symbol)[: f.grid.N]
    return MaxRegResult(f.with_samples(out), "fourier", _tail_bound(g, f, s > 0), time.perf_counter() - t0)


def pad_signal(f: Signal) -> np.ndarray:
    """Samples zero-padded to the 2N transform length, ``f(0)`` at trapezoid weight 1/2."""
    x = np.zeros((2 * f.grid.N, f.dim), dtype=np.complex128)
    x[: f.grid.N] = f.samples
    x[0] *= 0.5
    return x


def line_apply(g: Generator, grid: Grid, x: np.ndarray, sign: int) -> np.ndarray:
    """Exact-symbol multiplier on a full padded buffer, without truncating to the window."""
    return idft(np.einsum("kab,kb->ka", _symbols(g, grid, sign), dft(x)))


def apply_plus(g, f, path="direct", mode="trapezoid", engine="fft") -> Signal:
    if path == "direct":
        return mreg_forward_direct(g, f, mode, engine).output
    if path == "fourier":
        return mreg_fourier(g, f, "+").output
    raise ValueError(f"path must be 'direct' or 'fourier', got {path!r}")


def apply_minus(g, f, path="direct", mode="trapezoid", engine="fft") -> Signal:
    if path == "direct":
        return mreg_backward_direct(g, f, mode, engine).output
    if path == "fourier":
        return mreg_fourier(g, f, "-").output
    raise ValueError(f"path must be 'direct' or 'fourier', got {path!r}")


def solve_forward(g: Generator, f: Signal, mode: str = "trapezoid", engine: str = "fft") -> Signal:
    """Mild solution of ``u' + Au = f, u(0) = 0``."""
    out = _quadrature(g, f, False, True, mode, engine)
    out[0] = 0.0
    return f.with_samples(out)


def solve_backward(g: Generator, f: Signal, mode: str = "trapezoid", engine: str = "fft") -> Signal:
    """Mild solution of ``v' - Av = f`` with ``v = 0`` at the right end of the window."""
    return f.with_samples(-_quadrature(g, f, False, False, mode, engine))


def boundary_commutator(g: Generator, f: Signal) -> Signal:
    """Closed form of ``[M+, M-] f`` on the window ``[0, T]``.

        -1/2 e^{-tA} (M- f)(0) + 1/2 e^{-(T-t)A} (M+ f)(T)

    The first term is the half-line commutator; the second comes from
    cutting the backward integral at ``T`` and vanishes as ``T -> ∞``.
    Both endpoint values are trapezoid quadratures over the whole window.
    """
    _check(g, f)
    h, N = f.grid.h, f.grid.N
    kern = _kernel(g, f.grid, True)
    semi = _kernel(g, f.grid, False)
    terms = np.einsum("jab,jb->ja", kern, f.samples)
    left = h * terms.sum(axis=0) - 0.5 * h * terms[0]
    # (M+ f)(T): lags N - i for i = 0..N-1, i.e. K_N .. K_1
    s_end = semi[N - 1] @ semi[1]
    lagged = np.concatenate([(g.a @ s_end)[None], kern[:0:-1]])
    terms = np.einsum("jab,jb->ja", lagged, f.samples)
    right = h * terms.sum(axis=0) - 0.5 * h * terms[0]
    to_end = np.concatenate([s_end[None], semi[:0:-1]])
    out = -0.5 * (semi @ left) + 0.5 * (to_end @ right)
    return f.with_samples(out)


def commutator(g: Generator, f: Signal, path: str = "direct", mode: str = "trapezoid",
               engine: str = "fft", domain: str = "half_line") -> Signal:
    """``M+(M- f) - M-(M+ f)``.

    ``domain="line"`` (fourier path only) keeps the full padded buffer
    between the two applications, i.e. composes the whole-line
    convolutions instead of the half-line operators.
    """
    if domain == "line":
        if path != "fourier":
            raise ValueError("domain='line' is only available on the fourier path")
        _check(g, f)
        x = pad_signal(f)
        diff = line_apply(g, f.grid, line_apply(g, f.grid, x, -1), 1) \
            - line_apply(g, f.grid, line_apply(g, f.grid, x, 1), -1)
        return f.with_samples(diff[: f.grid.N])
    if domain != "half_line":
        raise ValueError(f"domain must be 'half_line' or 'line', got {domain!r}")
    pm = apply_plus(g, apply_minus(g, f, path, mode, engine), path, mode, engine)
    mp = apply_minus(g, apply_plus(g, f, path, mode, engine), path, mode, engine)
    return pm - mp


def commutator_residual(g: Generator, f: Signal, path: str = "direct", mode: str = "trapezoid",
                        engine: str = "fft", domain: str = "half_line") -> CommutatorReport:
    """L2 size of ``[M+, M-] f``, plus its distance from the boundary closed form."""
    c = commutator(g, f, path, mode, engine, domain)
    nf = l2_norm(f)
    abs_res = l2_norm(c)
    if domain == "line":
        bnorm, bdef = 0.0, abs_res / max(nf, REL_EPS)
    else:
        b = boundary_commutator(g, f)
        bnorm = l2_norm(b)
        bdef = l2_norm(c - b) / max(nf, REL_EPS)
    return CommutatorReport(
        abs_residual=abs_res,
        rel_residual=abs_res / max(nf, REL_EPS),
        grid=f.grid,
        path=path,
        boundary_norm=bnorm,
        rel_boundary_defect=bdef,
        commutator=c,
    )


def norm_equality_report(g: Generator, f: Signal, engine: str = "fft") -> NormEqualityReport:
    """Compare ``||M+ f||`` with ``||M- f||`` (trapezoid direct path).

    For self-adjoint ``A`` also returns ``boundary_gap``, the predicted
    value of ``||M+ f||^2 - ||M- f||^2 = 1/2 <A^{-1} x, x>`` with
    ``x = (M- f)(0)``.
    """
    minus = mreg_backward_direct(g, f, "trapezoid", engine).output
    plus = mreg_forward_direct(g, f, "trapezoid", engine).output
    np_, nm = l2_norm(plus), l2_norm(minus)
    gap = abs(np_ - nm) / max(np_, nm, REL_EPS)
    bgap = None
    if g.is_selfadjoint:
        x = minus.samples[0]
        bgap = float(0.5 * np.real(np.vdot(x, nl.solve(g.a, x))))
    return NormEqualityReport(np_, nm, gap, g.is_selfadjoint, bgap)


def desimon_grid(g: Generator, sigma_max: Optional[float] = None, n_sigma: int = 129) -> np.ndarray:
    if n_sigma < 64:
        raise ValueError(f"n_sigma must be at least 64, got {n_sigma}")
    rho = g.spectral_radius
    if sigma_max is None:
        sigma_max = 1e3 * rho
    m = (n_sigma - 1) // 2
    pos = np.geomspace(min(1e-4 * float(np.min(np.abs(g.spectrum))), sigma_max / 10), sigma_max, m)
    return np.concatenate([-pos[::-1], [0.0], pos])


def desimon_constant(g: Generator, sigma_max: Optional[float] = None, n_sigma: int = 129) -> float:
    """``max_σ ||A(iσ + A)^{-1}||_2`` over a log-symmetric frequency grid."""
    sig = desimon_grid(g, sigma_max, n_sigma)
    symbols = multiplier_stack(g, "+", sig)
    return max(nl.op_norm2(m) for m in symbols)


def adjoint_defect(g: Generator, f: Signal, phi: Signal, engine: str = "fft", swap: bool = False) -> float:
    """Relative defect of ``<M+^A f, φ> = <f, M-^{A*} φ>``.

    ``swap=True`` checks the mirrored relation ``<M-^A f, φ> = <f, M+^{A*} φ>``.
    """
    _check(g, f)
    _check(g, phi)
    nf, nphi = l2_norm(f), l2_norm(phi)
    if nf == 0.0 or nphi == 0.0:
        return 0.0
    gstar = make_generator(nl.adjoint(g.a))
    if swap:
        lhs = inner(mreg_backward_direct(g, f, "trapezoid", engine).output, phi)
        rhs = inner(f, mreg_forward_direct(gstar, phi, "trapezoid", engine).output)
    else:
        lhs = inner(mreg_forward_direct(g, f, "trapezoid", engine).output, phi)
        rhs = inner(f, mreg_backward_direct(gstar, phi, "trapezoid", engine).output)
    return abs(lhs - rhs) / (nf * nphi)


def ode_residuals(g: Generator, f: Signal, engine: str = "fft"):
    """Centered-difference residuals of both Cauchy problems on interior nodes.

    Returns ``(||u' + Au - f||, ||v' - Av - f||)`` as plain quadrature norms
    over nodes ``1..N-2``.
    """
    h = f.grid.h
    u = solve_forward(g, f, engine=engine).samples
    v = solve_backward(g, f, engine=engine).samples
    fs = f.samples
    du = (u[2:] - u[:-2]) / (2 * h)
    dv = (v[2:] - v[:-2]) / (2 * h)
    ru = du + u[1:-1] @ g.a.T - fs[1:-1]
    rv = dv - v[1:-1] @ g.a.T - fs[1:-1]
    norm = lambda r: math.sqrt(h * float(np.sum(np.abs(r) ** 2)))
    return norm(ru), norm(rv)


def tail_flag(f: Signal) -> bool:
    """True when the last tenth of the window holds more than 1e-6 of the energy."""
    return tail_energy_fraction(f) > 1e-6
