import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from maxregkit import numlin as nl
from maxregkit.errors import GeneratorError, NotSectorial, NotStable, SingularMatrixError
from maxregkit.presets import random_hermitian, random_sectorial
from maxregkit.semigroup import (
    expm, kernel_eval, make_generator, multiplier, multiplier_stack, resolvent,
    semigroup_at, semigroup_samples,
)

from conftest import crandn

seeds = st.integers(0, 2**31)
sizes = st.sampled_from([1, 2, 4, 8])


def test_expm_matches_scipy(rng):
    for scale in (1e-3, 1.0, 30.0):
        a = scale * crandn(rng, 6, 6)
        want = scipy.linalg.expm(a)
        assert np.linalg.norm(expm(a) - want) <= 1e-12 * max(1.0, np.linalg.norm(want))


def test_make_generator_examples():
    g = make_generator(np.diag([1.0, 2.0]))
    assert g.alpha == pytest.approx(1.0) and g.sector_angle == pytest.approx(0.0, abs=1e-12)
    assert g.is_selfadjoint
    j = make_generator(np.array([[1, 10], [0, 1]]))
    assert j.alpha == pytest.approx(1.0) and j.sector_angle == pytest.approx(0.0, abs=1e-12)
    assert not j.is_selfadjoint
    with pytest.raises(GeneratorError):
        make_generator(np.array([[1j]]))


def test_generator_rejections():
    with pytest.raises(NotStable):
        make_generator(np.diag([1.0, -0.5]))
    with pytest.raises(NotSectorial):
        make_generator(np.diag([1.0, 1 + 1e12j]))


def test_spectrum_is_eig_general(rng):
    a = random_sectorial(5, seed=3)
    g = make_generator(a)
    assert np.allclose(g.spectrum, nl.eig_general(a).eigenvalues)
    assert g.sector_angle < math.pi / 2 - 1e-9


def test_m_bound_nonnormal_growth():
    g = make_generator(np.array([[1, 10], [0, 1]]))
    # ||e^{-t}(I - tN)|| with N = 10 e_12 peaks near t = 1 at about 10/e
    assert g.m_bound > 3.0
    assert make_generator(np.diag([1.0, 2.0])).m_bound == pytest.approx(1.0)


def test_semigroup_at_examples():
    g = make_generator(np.diag([1.0, 2.0]))
    assert np.allclose(semigroup_at(g, 0.0), np.eye(2))
    assert np.allclose(semigroup_at(g, 1.0), np.diag([math.exp(-1), math.exp(-2)]), atol=1e-15)
    # e^{-t(I+N)} = e^{-t}(I - tN) for nilpotent N
    j = make_generator(np.array([[1, 1], [0, 1]]))
    want = math.exp(-1) * np.array([[1, -1], [0, 1]])
    assert np.allclose(semigroup_at(j, 1.0), want, atol=1e-15)
    with pytest.raises(ValueError):
        semigroup_at(g, -1.0)


@given(seeds, st.floats(0, 5), st.floats(0, 5))
def test_semigroup_law(seed, t, s):
    g = make_generator(random_sectorial(4, seed))
    lhs = semigroup_at(g, t) @ semigroup_at(g, s)
    assert np.linalg.norm(lhs - semigroup_at(g, t + s)) <= 1e-9


@given(seeds, st.floats(1e-6, 1e-3))
def test_generator_consistency(seed, h):
    g = make_generator(random_sectorial(3, seed))
    d = (np.eye(3) - semigroup_at(g, h)) / h - g.a
    assert np.linalg.norm(d, 2) <= 0.5 * np.linalg.norm(g.a, 2) ** 2 * h


def test_resolvent_examples():
    g1 = make_generator(np.array([[1.0]]))
    assert np.allclose(resolvent(g1, 1j), [[(1 - 1j) / 2]])
    g2 = make_generator(np.diag([2.0, 4.0]))
    assert np.allclose(resolvent(g2, 0), np.diag([0.5, 0.25]))
    g = make_generator(random_sectorial(4, 7))
    z = 0.3 + 2.0j
    assert np.linalg.norm((z * np.eye(4) + g.a) @ resolvent(g, z) - np.eye(4)) <= 1e-10
    with pytest.raises(SingularMatrixError):
        resolvent(g1, -1.0)


@given(seeds, st.floats(0, 5), st.floats(-10, 10))
def test_resolvent_commutes_with_semigroup(seed, t, y):
    g = make_generator(random_sectorial(4, seed))
    r, s = resolvent(g, 1j * y), semigroup_at(g, t)
    assert np.linalg.norm(r @ s - s @ r) <= 1e-9


def test_multiplier_examples():
    g = make_generator(random_sectorial(4, 1))
    assert np.allclose(multiplier(g, "+", 0.0).value, np.eye(4), atol=1e-12)
    g1 = make_generator(np.array([[1.0]]))
    assert np.allclose(multiplier(g1, "+", 1.0).value, [[(1 - 1j) / 2]])


@given(seeds, st.floats(-100, 100))
def test_multiplier_norm_hermitian(seed, sigma):
    a = random_hermitian(4, seed)
    lam = np.linalg.eigvalsh(a)
    want = max(l / math.hypot(sigma, l) for l in lam)
    got = nl.op_norm2(multiplier(make_generator(a), "+", sigma).value)
    assert abs(got - want) <= 1e-10 and got <= 1 + 1e-12


@given(seeds, sizes, st.floats(-50, 50))
def test_multipliers_commute(seed, n, sigma):
    g = make_generator(random_sectorial(n, seed))
    p, m = multiplier(g, "+", sigma).value, multiplier(g, "-", sigma).value
    assert np.linalg.norm(p @ m - m @ p) <= 1e-10


def test_multipliers_commute_100_cases():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(100):
        g = make_generator(random_sectorial([1, 2, 4, 8][k % 4], seed=k))
        sigma = float(rng.uniform(-20, 20))
        p, m = multiplier(g, "+", sigma).value, multiplier(g, "-", sigma).value
        worst = max(worst, np.linalg.norm(p @ m - m @ p))
    assert worst <= 1e-10


@given(seeds, sizes, st.floats(-50, 50))
def test_product_of_multipliers(seed, n, sigma):
    a = random_sectorial(n, seed)
    g = make_generator(a)
    prod = multiplier(g, "+", sigma).value @ multiplier(g, "-", sigma).value
    # A^2 (σ^2 + A^2)^{-1}, via an independent solve
    a2 = a @ a
    want = np.linalg.solve((sigma**2 * np.eye(n) + a2).T, a2.T).T
    assert np.linalg.norm(prod - want) <= 1e-9


@given(seeds, st.floats(-30, 30))
def test_multiplier_adjoint_symmetry(seed, sigma):
    # (A(iσ+A)^{-1})* = A*(-iσ+A*)^{-1}
    a = random_sectorial(3, seed)
    m = multiplier(make_generator(a), "+", sigma).value
    mstar = multiplier(make_generator(nl.adjoint(a)), "-", sigma).value
    assert np.linalg.norm(m.conj().T - mstar) <= 1e-10
    assert abs(nl.op_norm2(m) - nl.op_norm2(mstar)) <= 1e-10


def test_multiplier_stack_matches_single():
    g = make_generator(random_sectorial(3, 2))
    sig = np.linspace(-5, 5, 11)
    stack = multiplier_stack(g, "-", sig)
    for s, m in zip(sig, stack):
        assert np.allclose(m, multiplier(g, "-", s).value, atol=1e-14)


def test_kernel_eval_examples():
    g1 = make_generator(np.array([[1.0]]))
    assert np.all(kernel_eval(g1, 0.0) == 0) and np.all(kernel_eval(g1, -1.0) == 0)
    assert np.allclose(kernel_eval(g1, 1.0), [[math.exp(-1)]])
    g2 = make_generator(np.diag([1.0, 2.0]))
    assert np.allclose(kernel_eval(g2, 0.5), np.diag([math.exp(-0.5), 2 * math.exp(-1)]))


def test_semigroup_samples_chain():
    g = make_generator(random_sectorial(4, 5))
    s = semigroup_samples(g, 0.01, 200)
    assert np.allclose(s[0], np.eye(4))
    assert np.linalg.norm(s[199] - semigroup_at(g, 1.99)) <= 1e-11
