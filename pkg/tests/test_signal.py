import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxregkit.errors import DimensionError, GridMismatch
from maxregkit.signal import (
    Grid, Signal, dft, idft, inner, l2_norm, load_signal, preset_signal, save_signal,
    smooth_step, tail_energy_fraction, zeros,
)

from conftest import crandn


def test_grid_validation():
    assert Grid(20, 2048).h == pytest.approx(20 / 2048)
    for bad in (1000, 32, 2**21):
        with pytest.raises(ValueError):
            Grid(1.0, bad)
    with pytest.raises(ValueError):
        Grid(0.0, 64)


def test_frequency_grid():
    fg = Grid(8.0, 64).frequencies()
    assert fg.L == 128
    assert fg.sigma[1] == pytest.approx(2 * math.pi / 16.0)
    assert fg.sigma[-1] == pytest.approx(-2 * math.pi / 16.0)


def test_signal_checks():
    g = Grid(1.0, 64)
    with pytest.raises(DimensionError):
        Signal(g, np.zeros((63, 1)))
    with pytest.raises(ValueError):
        Signal(g, np.full(64, np.inf))
    with pytest.raises(GridMismatch):
        zeros(g, 1) + zeros(Grid(2.0, 64), 1)
    with pytest.raises(DimensionError):
        zeros(g, 1) + zeros(g, 2)


def test_zero_norm():
    assert l2_norm(zeros(Grid(1.0, 64), 3)) == 0.0


def test_exp_norm():
    # ∫_0^∞ e^{-2t} dt = 1/2
    f = preset_signal("exp_decay", Grid(40.0, 4096), 1, {"direction": [1]})
    assert abs(l2_norm(f) ** 2 - 0.5) <= 1e-4 * 0.5


def test_inner_hermitian(rng):
    g = Grid(3.0, 128)
    f, k = Signal(g, crandn(rng, 128, 2)), Signal(g, crandn(rng, 128, 2))
    assert inner(f, k) == pytest.approx(np.conj(inner(k, f)))
    assert inner(2j * f, k) == pytest.approx(2j * inner(f, k))


def test_trapezoid_order():
    # ∫_0^∞ (t e^{-t})^2 dt = 1/4, smooth and vanishing at t = 0
    errs = []
    for N in (256, 512, 1024):
        t = Grid(40.0, N).nodes
        errs.append(abs(l2_norm(Signal(Grid(40.0, N), t * np.exp(-t))) ** 2 - 0.25))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_exp_decay_trapezoid_order():
    errs = []
    for N in (256, 512, 1024):
        f = preset_signal("exp_decay", Grid(40.0, N), 1, {"direction": [1]})
        errs.append(abs(l2_norm(f) ** 2 - 0.5))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_dft_examples():
    x = np.zeros((8, 2), complex)
    x[0] = [1, 0]
    assert np.allclose(dft(x), np.tile([1, 0], (8, 1)))
    c = np.tile([2 - 1j, 3], (8, 1))
    X = dft(c)
    assert np.allclose(X[0], 8 * c[0]) and np.allclose(X[1:], 0)


@given(st.integers(0, 10), st.integers(0, 2**31))
def test_dft_matches_numpy_and_roundtrips(log_l, seed):
    rng = np.random.default_rng(seed)
    x = crandn(rng, 2**log_l, 3)
    X = dft(x)
    assert np.allclose(X, np.fft.fft(x, axis=0), atol=1e-10 * max(1.0, np.abs(X).max()))
    assert np.max(np.abs(idft(X) - x)) <= 1e-12 * max(1.0, np.abs(x).max())
    # discrete Plancherel
    assert abs(np.sum(np.abs(X) ** 2) - x.shape[0] * np.sum(np.abs(x) ** 2)) <= 1e-10 * np.sum(np.abs(X) ** 2)


def test_dft_rejects_non_pow2():
    with pytest.raises(ValueError):
        dft(np.zeros(12))


def test_presets_deterministic():
    g = Grid(20.0, 256)
    for name in ("gauss_bump", "exp_decay", "randsmooth"):
        a, b = preset_signal(name, g, 3, seed=4), preset_signal(name, g, 3, seed=4)
        assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(preset_signal("randsmooth", g, 3, seed=4).samples,
                              preset_signal("randsmooth", g, 3, seed=5).samples)


def test_exp_decay_definition():
    g = Grid(10.0, 128)
    f = preset_signal("exp_decay", g, 1, {"beta": 1.0, "direction": [1.0]})
    assert np.allclose(f.samples[:, 0], np.exp(-g.nodes))


def test_gauss_bump_erf_norm():
    # ∫_0^∞ exp(-(t-t0)^2/w^2) dt = w√π/2 (1 + erf(t0/w))
    t0, w = 1.0, 0.8
    f = preset_signal("gauss_bump", Grid(20.0, 1024), 2, {"t0": t0, "w": w}, seed=1)
    want = w * math.sqrt(math.pi) / 2 * (1 + math.erf(t0 / w))
    assert abs(l2_norm(f) ** 2 - want) <= 1e-3 * want


def test_randsmooth_unit_norm_and_taper():
    g = Grid(20.0, 1024)
    f = preset_signal("randsmooth", g, 4, seed=9)
    assert l2_norm(f) == pytest.approx(1.0, rel=1e-12)
    assert np.all(f.samples[g.nodes >= 0.9 * g.T] == 0)
    assert tail_energy_fraction(f) == 0.0


def test_smooth_step():
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.allclose(smooth_step(x), [0, 0, 0.5, 1, 1])


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset_signal("square", Grid(1.0, 64), 1)


def test_signal_file_roundtrip(tmp_path, rng):
    f = Signal(Grid(5.0, 64), crandn(rng, 64, 2))
    save_signal(tmp_path / "f.json", f)
    back = load_signal(tmp_path / "f.json")
    assert back.grid == f.grid and np.array_equal(back.samples, f.samples)
