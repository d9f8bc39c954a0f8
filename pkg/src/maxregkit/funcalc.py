"""Holomorphic functional calculus by Cauchy integrals over circles.

    b(A) = 1/(2πi) ∮ b(z) (zI - A)^{-1} dz

The trapezoid rule on a circle converges geometrically for integrands
analytic in an annulus around it, so node counts are doubled from the
contour's starting value until two successive results agree to 1e-11
(cap 4096).  Spectra are compact here, which is why circles suffice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import numlin as nl
from .errors import NoValidContour, NotBisectorial
from .maxreg import REL_EPS, apply_minus, apply_plus, boundary_commutator, line_apply, pad_signal
from .semigroup import Generator, make_generator
from .signal import Signal, l2_norm

MARGIN = 0.1
NODE_CAP = 4096
REFINE_TOL = 1e-11
BISECTOR_MARGIN = 1e-6


@dataclass(frozen=True, eq=False)
class HoloFunction:
    """A scalar function together with the singularities a contour must avoid."""

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    poles: tuple = ()
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.evaluator(np.asarray(z, dtype=np.complex128))

    def __mul__(self, other: "HoloFunction") -> "HoloFunction":
        if self.kind == "halfplane_indicator" or other.kind == "halfplane_indicator":
            raise ValueError("half-plane indicators only enter through spectral_projection")
        f, g = self.evaluator, other.evaluator
        return HoloFunction(
            f"({self.name})*({other.name})",
            lambda z: f(z) * g(z),
            tuple(self.poles) + tuple(other.poles),
            "product",
            {"factors": (self, other)},
        )


def const_one() -> HoloFunction:
    return HoloFunction("const_one", lambda z: np.ones_like(z), (), "const_one")


def resolvent_frac(sigma: float, sign) -> HoloFunction:
    """``z (±iσ + z)^{-1}``, the scalar multiplier symbol."""
    s = 1 if sign in (1, "+") else -1
    shift = 1j * s * float(sigma)
    return HoloFunction(
        f"resolvent_frac({sigma:g},{'+' if s > 0 else '-'})",
        lambda z: z / (shift + z),
        (-shift,),
        "resolvent_frac",
        {"sigma": float(sigma), "sign": s},
    )


def exp_scale(t: float) -> HoloFunction:
    return HoloFunction(f"exp_scale({t:g})", lambda z: np.exp(-t * z), (), "exp_scale", {"t": float(t)})


def halfplane_indicator(side: str = "re_positive", shift: float = 0.0) -> HoloFunction:
    """``1`` on ``Re(z - shift) > 0`` (or ``< 0``), ``0`` on the other side."""
    if side not in ("re_positive", "re_negative"):
        raise ValueError(f"side must be 're_positive' or 're_negative', got {side!r}")
    sgn = 1.0 if side == "re_positive" else -1.0
    return HoloFunction(
        f"halfplane_indicator({side},{shift:g})",
        lambda z: (sgn * (z.real - shift) > 0).astype(np.complex128),
        (),
        "halfplane_indicator",
        {"side": side, "shift": float(shift)},
    )


def _polyval(coeffs, z):
    out = np.zeros_like(z)
    for c in coeffs[::-1]:
        out = out * z + c
    return out


def polynomial_roots(coeffs) -> np.ndarray:
    """Roots of ``Σ c_k z^k`` via the spectrum of the companion matrix."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=np.complex128), "b")
    deg = c.size - 1
    if deg < 1:
        return np.zeros(0, dtype=np.complex128)
    comp = np.zeros((deg, deg), dtype=np.complex128)
    comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    return nl.eig_general(comp).eigenvalues


def rational(num: Sequence, den: Sequence, name: Optional[str] = None) -> HoloFunction:
    """``p(z) / q(z)`` with ascending coefficient lists ``[c0, c1, ...]``."""
    num = np.asarray(num, dtype=np.complex128)
    den = np.asarray(den, dtype=np.complex128)
    if not np.any(den != 0):
        raise ValueError("denominator is identically zero")
    return HoloFunction(
        name or "rational",
        lambda z: _polyval(num, z) / _polyval(den, z),
        tuple(polynomial_roots(den)),
        "rational",
        {"num": num, "den": den},
    )


def parse_complex_list(items) -> list:
    """Coefficients from JSON: numbers or ``[re, im]`` pairs."""
    out = []
    for c in items:
        if isinstance(c, (list, tuple)):
            out.append(complex(float(c[0]), float(c[1])))
        else:
            out.append(complex(c))
    return out


def rational_from_config(doc: dict) -> HoloFunction:
    return rational(parse_complex_list(doc["num"]), parse_complex_list(doc["den"]), doc.get("name"))


@dataclass(frozen=True)
class Contour:
    center: complex
    radius: float
    n_nodes: int = 256

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.n_nodes < 4 or self.n_nodes & (self.n_nodes - 1):
            raise ValueError(f"n_nodes must be a power of two >= 4, got {self.n_nodes}")

    def nodes(self, count: Optional[int] = None) -> np.ndarray:
        m = count or self.n_nodes
        return self.center + self.radius * np.exp(2j * math.pi * np.arange(m) / m)


def contour_violations(spectrum, poles, center, radius):
    """Eigenvalues too close to or outside the circle, and poles too close or inside."""
    spectrum = np.asarray(spectrum)
    bad_eigs = [lam for lam in spectrum if abs(lam - center) > (1 - MARGIN) * radius]
    bad_poles = [p for p in poles if abs(p - center) < (1 + MARGIN) * radius]
    return bad_eigs, bad_poles


def _as_cycle(c) -> tuple:
    return (c,) if isinstance(c, Contour) else tuple(c)


def check_contour(g: Generator, b: HoloFunction, c) -> None:
    """Validate a circle, or a union of disjoint circles, for ``(g, b)``.

    Every eigenvalue must sit inside exactly one circle with a 10% margin and
    every pole outside all of them with a 10% margin.
    """
    cycle = _as_cycle(c)
    for lam in g.spectrum:
        inside = [abs(lam - k.center) <= (1 - MARGIN) * k.radius for k in cycle]
        if sum(inside) != 1:
            raise NoValidContour(None, f"eigenvalue {complex(lam):.6g} is not enclosed once with margin")
    for k in cycle:
        bad_poles = contour_violations([], b.poles, k.center, k.radius)[1]
        if bad_poles:
            raise NoValidContour(bad_poles[0])
        if not np.all(np.isfinite(b(k.nodes()))):
            raise NoValidContour(None, f"{b.name} is not finite on the contour")


def _single_circle(g: Generator, b: HoloFunction, n_nodes: int):
    spec = g.spectrum
    center0 = complex(np.mean(spec))
    dmax = float(np.max(np.abs(spec - center0)))
    radius = 1.5 * dmax + 0.5 * g.alpha
    if not contour_violations(spec, b.poles, center0, radius)[1]:
        return Contour(center0, radius, n_nodes), None

    poles = np.asarray(b.poles, dtype=np.complex128)
    blocking = poles[np.argmin(np.abs(poles - center0))]
    away = center0 - blocking
    away = away / abs(away) if abs(away) > 0 else 1.0
    for attempt in range(8):
        center = center0 + away * attempt * 0.25 * max(dmax, 0.5 * g.alpha)
        lo = float(np.max(np.abs(spec - center))) / (1 - MARGIN)
        hi = float(np.min(np.abs(poles - center))) / (1 + MARGIN)
        if lo < hi * (1 - 1e-12):
            r = min(radius, math.sqrt(lo * hi) if lo > 0 else 0.5 * hi)
            r = min(max(r, lo * (1 + 1e-9)), hi)
            return Contour(center, r, n_nodes), None
    return None, blocking


def _cluster_cycle(spec, poles, n_nodes, select=None):
    """One circle per eigenvalue cluster, halfway to the nearest foreign eigenvalue.

    Returns ``(cycle, None)`` or ``(None, blocking_pole)``.
    """
    spec = np.asarray(spec)
    poles = np.asarray(poles, dtype=np.complex128)
    scale = max(1.0, float(np.max(np.abs(spec))))
    cycle = []
    for idx in _clusters(spec, 1e-5 * scale):
        if select is not None and not select[idx[0]]:
            continue
        center = complex(np.mean(spec[idx]))
        inner_r = float(np.max(np.abs(spec[idx] - center)))
        others = np.delete(spec, idx)
        r = 0.5 * float(np.min(np.abs(others - center))) if others.size else max(2.0 * inner_r, 0.5 * scale)
        if poles.size:
            dp = np.abs(poles - center)
            r = min(r, float(np.min(dp)) / (1 + MARGIN) * (1 - 1e-9))
        if inner_r >= (1 - MARGIN) * r:
            blocking = poles[np.argmin(np.abs(poles - center))] if poles.size else spec[idx[0]]
            return None, blocking
        cycle.append(Contour(center, r, n_nodes))
    return tuple(cycle), None


def auto_contour(g: Generator, b: HoloFunction, n_nodes: int = 256):
    """Admissible contour for ``b(A)``.

    Tries one circle first: centered at the spectrum centroid with radius
    ``1.5 max|λ - c| + α/2``, then up to eight adjustments that shrink it
    and push the center away from the blocking pole.  If no single circle
    respects the margins, falls back to a tuple of disjoint circles, one
    per eigenvalue cluster.

    Raises
    ------
    NoValidContour
        when even the per-cluster circles cannot exclude a pole.
    """
    if b.kind == "halfplane_indicator":
        raise ValueError("half-plane indicators only enter through spectral_projection")
    single, blocking = _single_circle(g, b, n_nodes)
    if single is not None:
        return single
    cycle, blocking2 = _cluster_cycle(g.spectrum, b.poles, n_nodes)
    if cycle is None:
        raise NoValidContour(blocking2)
    return cycle


def _cauchy(a: np.ndarray, func, center: complex, radius: float, m: int) -> np.ndarray:
    theta = 2j * math.pi * np.arange(m) / m
    z = center + radius * np.exp(theta)
    n = a.shape[0]
    shifted = z[:, None, None] * nl.identity(n) - a
    res = nl.solve(shifted, np.broadcast_to(nl.identity(n), shifted.shape))
    w = func(z) * (z - center) / m
    return np.einsum("k,kab->ab", w, res)


def cauchy_integral(a, func, center: complex, radius: float, n_nodes: int = 256) -> np.ndarray:
    """Cauchy integral over one circle with node doubling until converged."""
    m = n_nodes
    prev = _cauchy(a, func, center, radius, m)
    while m < NODE_CAP:
        m *= 2
        cur = _cauchy(a, func, center, radius, m)
        if nl.frob_norm(cur - prev) <= REFINE_TOL * max(1.0, nl.frob_norm(cur)):
            return cur
        prev = cur
    return prev


def apply_calculus(g: Generator, b: HoloFunction, c=None) -> np.ndarray:
    """``b(A)`` by the Cauchy integral over an admissible circle (or union of circles)."""
    if b.kind == "halfplane_indicator":
        raise ValueError("half-plane indicators only enter through spectral_projection")
    if c is None:
        c = auto_contour(g, b)
    else:
        check_contour(g, b, c)
    return sum(cauchy_integral(g.a, b.evaluator, k.center, k.radius, k.n_nodes) for k in _as_cycle(c))


def homomorphism_defect(g: Generator, b1: HoloFunction, b2: HoloFunction) -> float:
    """``||b1(A) b2(A) - (b1 b2)(A)||_F / max(1, ||(b1 b2)(A)||_F)`` on one shared contour."""
    prod = b1 * b2
    c = auto_contour(g, prod)
    m1 = apply_calculus(g, b1, c)
    m2 = apply_calculus(g, b2, c)
    m12 = apply_calculus(g, prod, c)
    return nl.frob_norm(m1 @ m2 - m12) / max(1.0, nl.frob_norm(m12))


# ---------------------------------------------------------------------------
# Riesz projections


def _clusters(spec: np.ndarray, tol: float):
    """Single-linkage groups of eigenvalues closer than ``tol``."""
    n = spec.size
    label = list(range(n))

    def root(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(spec[i] - spec[j]) <= tol:
                label[root(i)] = root(j)
    groups = {}
    for i in range(n):
        groups.setdefault(root(i), []).append(i)
    return [np.array(ix) for ix in groups.values()]


def check_bisectorial(spec) -> None:
    for lam in spec:
        if abs(lam.real) <= BISECTOR_MARGIN:
            raise NotBisectorial(lam)
        w = lam if lam.real > 0 else -lam
        if abs(np.angle(w)) >= math.pi / 2 - 1e-9:
            raise NotBisectorial(lam)


def spectral_projection(m, side: str = "re_positive") -> np.ndarray:
    """Riesz projection onto the spectral subspace of ``Re λ > 0`` (or ``< 0``).

    The contour is a union of circles, one around each cluster of
    eigenvalues on the selected side, each reaching halfway to the nearest
    eigenvalue outside its cluster.
    """
    if side not in ("re_positive", "re_negative"):
        raise ValueError(f"side must be 're_positive' or 're_negative', got {side!r}")
    m = nl.as_cmatrix(m, square=True)
    n = m.shape[0]
    spec = nl.eig_general(m).eigenvalues
    check_bisectorial(spec)
    want = spec.real > 0 if side == "re_positive" else spec.real < 0
    scale = max(1.0, float(np.max(np.abs(spec))))
    for idx in _clusters(spec, 1e-5 * scale):
        if np.any(want[idx] != want[idx[0]]):
            raise NotBisectorial(spec[idx[0]], "an eigenvalue cluster straddles the imaginary axis")
    cycle, blocking = _cluster_cycle(spec, [], 64, select=want)
    if cycle is None:
        raise NotBisectorial(blocking, "eigenvalue clusters are too close to separate")
    out = np.zeros((n, n), dtype=np.complex128)
    for k in cycle:
        out += cauchy_integral(m, lambda z: np.ones_like(z), k.center, k.radius, k.n_nodes)
    return out


# ---------------------------------------------------------------------------
# extended commutator [M+ b1(A), M- b2(A)]


def operator_value(g: Generator, b) -> np.ndarray:
    """``b(A)`` for a HoloFunction or a ready matrix; indicators go through Riesz projections."""
    if isinstance(b, HoloFunction):
        if b.kind == "halfplane_indicator":
            shifted = g.a - b.params["shift"] * nl.identity(g.n)
            return spectral_projection(shifted, b.params["side"])
        return apply_calculus(g, b)
    return nl.as_cmatrix(b, square=True)


def extended_commutator(g: Generator, b1, b2, f: Signal, path: str = "direct", engine: str = "fft",
                        domain: str = "half_line") -> Signal:
    """``M+ B1 M- B2 f - M- B2 M+ B1 f`` with ``B_i = b_i(A)`` applied node-wise.

    ``domain="line"`` (fourier path only) composes the whole-line
    convolutions on the padded buffer, as :func:`maxreg.commutator` does.
    """
    B1, B2 = operator_value(g, b1), operator_value(g, b2)
    if domain == "line":
        if path != "fourier":
            raise ValueError("domain='line' is only available on the fourier path")
        x, grid = pad_signal(f), f.grid
        first = line_apply(g, grid, line_apply(g, grid, x @ B2.T, -1) @ B1.T, 1)
        second = line_apply(g, grid, line_apply(g, grid, x @ B1.T, 1) @ B2.T, -1)
        return f.with_samples((first - second)[: grid.N])
    if domain != "half_line":
        raise ValueError(f"domain must be 'half_line' or 'line', got {domain!r}")
    first = apply_plus(g, apply_minus(g, f.apply(B2), path, engine=engine).apply(B1), path, engine=engine)
    second = apply_minus(g, apply_plus(g, f.apply(B1), path, engine=engine).apply(B2), path, engine=engine)
    return first - second


def extended_commutator_residual(g: Generator, b1, b2, f: Signal, path: str = "direct",
                                 engine: str = "fft", domain: str = "half_line") -> float:
    """Relative L2 size of :func:`extended_commutator`."""
    c = extended_commutator(g, b1, b2, f, path, engine, domain)
    return l2_norm(c) / max(l2_norm(f), REL_EPS)


def extended_boundary_defect(g: Generator, b1, b2, f: Signal, path: str = "direct",
                             engine: str = "fft") -> float:
    """Distance of the extended commutator from ``B1 B2`` times the window closed form."""
    B1, B2 = operator_value(g, b1), operator_value(g, b2)
    c = extended_commutator(g, B1, B2, f, path, engine)
    expected = boundary_commutator(g, f).apply(B1 @ B2)
    return l2_norm(c - expected) / max(l2_norm(f), REL_EPS)


def adjoint_generator(g: Generator) -> Generator:
    return make_generator(nl.adjoint(g.a))
