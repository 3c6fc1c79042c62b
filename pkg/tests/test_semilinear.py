import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_state
from waverate.semigroup import cfl_limit, propagate_exact, propagate_stepped
from waverate.semilinear import (NonlinearDecayConfig, Nonlinearity, PolynomialCase, StretchedCase,
                                 apply_nonlinearity, convolution_bound, convolution_integral,
                                 duhamel_residual, energy, higher_energy,
                                 integrate, nonlinear_decay_experiment, padded_size, smooth_datum,
                                 write_trajectory_csv)
from waverate.spectral import DampingProfile, Grid, SpectralField, WaveState, make_operator, sobolev_norm

SETTINGS = settings(max_examples=25, deadline=None)
CUBIC = Nonlinearity.odd_power(3)


def test_nonlinearity_validation():
    for bad in (dict(p=2), dict(p=1), dict(p=3, coefficient=0.0)):
        with pytest.raises(ValueError):
            Nonlinearity("odd_power", **bad)
    assert Nonlinearity.zero().growth_constant == 0
    assert CUBIC.growth_constant == 8


@SETTINGS
@given(st.floats(-1e3, 1e3), st.sampled_from([3, 5, 7]), st.floats(0.01, 10))
def test_sign_and_growth_conditions(u, p, c):
    nl = Nonlinearity.odd_power(p, c)
    assert nl.f(u) * u >= 0
    assert abs(nl.f(u)) <= nl.growth_constant * (1 + abs(u)) ** p
    assert nl.potential(u) >= 0
    h = 1e-6 * max(1, abs(u))
    assert nl.derivative(u) == pytest.approx((nl.f(u + h) - nl.f(u - h)) / (2 * h), rel=1e-5, abs=1e-6)


def test_padding_size_rule():
    for n in (8, 16, 64):
        for p in (3, 5):
            assert padded_size(n, p) >= n * (p + 1) / 2


def test_apply_nonlinearity_examples():
    g = Grid.circle(2 * np.pi, 16)
    x = g.axis_points(0)
    assert np.all(apply_nonlinearity(Nonlinearity.zero(), SpectralField(g, physical=np.cos(x))).modal == 0)
    out = apply_nonlinearity(CUBIC, SpectralField(g, physical=np.full(16, 2.0)))
    assert np.allclose(out.physical, 8.0, atol=1e-13)
    out = apply_nonlinearity(CUBIC, SpectralField(g, physical=np.cos(x))).modal
    ref = np.zeros(16, complex)
    ref[[1, -1]] = 3 / 8
    ref[[3, -3]] = 1 / 8
    assert np.abs(out - ref).max() < 1e-13


def test_dealiasing_drops_unresolved_modes():
    # cos(7x)^3 has content at 7 and 21; on N = 16 only k = +-7 survives the truncation
    g = Grid.circle(2 * np.pi, 16)
    out = apply_nonlinearity(CUBIC, SpectralField(g, physical=np.cos(7 * g.axis_points(0)))).modal
    ref = np.zeros(16, complex)
    ref[[7, -7]] = 3 / 8
    assert np.abs(out - ref).max() < 1e-13


def test_energy_examples():
    g = Grid.circle(2 * np.pi, 16)
    op = make_operator(g, 1.0, DampingProfile.undamped())
    assert energy(op, CUBIC, WaveState.zeros(g)) == 0
    s = random_state(g, 1)
    assert energy(op, Nonlinearity.zero(), s) == pytest.approx(0.5 * sobolev_norm(s, 0, op) ** 2)
    for a in (0.3, 1.0, 2.5):
        st_ = WaveState.from_physical(g, np.full(16, a), np.zeros(16))
        assert energy(op, CUBIC, st_) == pytest.approx(2 * np.pi * (a**2 / 2 + a**4 / 4), rel=1e-12)


@SETTINGS
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 10), st.sampled_from([3, 5]))
def test_energy_bounds_x_norm(seed, amp, p):
    op = make_operator(Grid.torus(2 * np.pi, 2 * np.pi, 8, 8), 1.0, DampingProfile.power_abs(2))
    s = random_state(op.grid, seed) * amp
    assert energy(op, Nonlinearity.odd_power(p), s) >= 0.5 * sobolev_norm(s, 0, op) ** 2 * (1 - 1e-12)


def test_integrate_zero_matches_linear_stepper(small_book):
    s = random_state(small_book.grid, 2)
    dt = cfl_limit(small_book) / 2
    traj, _ = integrate(small_book, Nonlinearity.zero(), s, dt, 3.0, [1.0, 3.0])
    _, lin = propagate_stepped(small_book, s, dt, 3.0, [1.0, 3.0])
    for a, b in zip(traj.states, lin):
        assert np.abs(a.u.modal - b.u.modal).max() < 1e-12
        assert np.abs(a.v.modal - b.v.modal).max() < 1e-12


def test_conservative_cubic_energy():
    op = make_operator(Grid.circle(2 * np.pi, 32), 1.0, DampingProfile.undamped())
    s = smooth_datum(op, 1.0, 1.0, seed=3)
    _, rep = integrate(op, CUBIC, s, cfl_limit(op) / 8, 10.0, np.linspace(0, 10, 21))
    assert np.ptp(rep.E_values) / rep.E_values[0] < 1e-8
    assert np.all(rep.dissipation_integral == 0)


def test_energy_identity_and_monotonicity():
    op = make_operator(Grid.torus(2 * np.pi, 2 * np.pi, 16, 16), 1.0, DampingProfile.power_abs(2))
    s = smooth_datum(op, 1.0, 1.0, seed=1)
    _, rep = integrate(op, CUBIC, s, cfl_limit(op) / 8, 10.0, np.linspace(0, 10, 41))
    assert np.abs(rep.residual).max() <= 1e-5 * rep.E_values[0]
    assert np.all(np.diff(rep.E_values) <= 1e-9)
    assert np.all(np.diff(rep.dissipation_integral) >= 0)


def test_cfl_and_blowup_guards(small_book):
    s = random_state(small_book.grid)
    with pytest.raises(ValueError, match="CFL"):
        integrate(small_book, CUBIC, s, 10.0, 1.0)
    with pytest.raises(RuntimeError, match="blow-up"):
        integrate(small_book, CUBIC, s, cfl_limit(small_book) / 2, 1.0, blowup=1e-3)


def test_parity_preserved():
    g = Grid.circle(2 * np.pi, 32)
    op = make_operator(g, 1.0, DampingProfile.power_abs(2))
    x = g.axis_points(0)
    s = WaveState.from_physical(g, np.sin(x) + 0.5 * np.sin(2 * x), 0.3 * np.sin(3 * x))
    traj, _ = integrate(op, CUBIC, s, cfl_limit(op) / 2, 5.0, [2.5, 5.0])
    mirror = (-np.arange(32)) % 32
    for st_ in traj.states:
        for fld in (st_.u.physical, st_.v.physical):
            assert np.abs(fld + fld[mirror]).max() < 1e-10


def test_duhamel_zero_and_initial_time(small_circle):
    s = random_state(small_circle.grid, 4)
    traj, _ = integrate(small_circle, Nonlinearity.zero(), s, 1e-3, 2.0, np.linspace(0, 2, 65))
    res = duhamel_residual(small_circle, Nonlinearity.zero(), traj)
    assert res[0] == 0 and res.max() <= 1e-8


def test_duhamel_refinement_order():
    op = make_operator(Grid.circle(2 * np.pi, 16), 1.0, DampingProfile.power_abs(2))
    s = smooth_datum(op, 1.0, 1.0)
    res = []
    for m in (64, 128):
        traj, _ = integrate(op, CUBIC, s, 2.0 / 1024, 2.0, np.linspace(0, 2, m + 1))
        res.append(duhamel_residual(op, CUBIC, traj).max())
    assert 12 < res[0] / res[1] < 32


def test_duhamel_needs_nodes(small_circle):
    traj, _ = integrate(small_circle, CUBIC, random_state(small_circle.grid), 0.01, 1.0,
                        np.linspace(0, 1, 11))
    with pytest.raises(ValueError, match="64"):
        duhamel_residual(small_circle, CUBIC, traj)


def test_higher_energy_examples():
    g = Grid.circle(2 * np.pi, 32)
    op = make_operator(g, 1.5, DampingProfile.undamped())
    assert higher_energy(op, CUBIC, WaveState.zeros(g)).value == 0
    cu, cv = np.zeros(32, complex), np.zeros(32, complex)
    cu[3], cv[3] = 0.7, 0.2j
    lam, vol = 9.0, 2 * np.pi
    he = higher_energy(op, Nonlinearity.zero(), WaveState.from_modal(g, cu, cv))
    ref = vol * (0.5 * (lam**2 + 1.5 * lam) * 0.49 + 0.5 * lam * 0.04)
    assert he.value == pytest.approx(ref, rel=1e-12) and he.resolved


def test_higher_energy_comparison_and_resolution():
    op = make_operator(Grid.circle(2 * np.pi, 32), 1.0, DampingProfile.power_abs(2))
    s = smooth_datum(op, 1.0, 2.0, seed=5)
    he = higher_energy(op, CUBIC, s)
    assert he.lower_ok and he.upper_ok and he.c2 > 0
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        rough = higher_energy(op, CUBIC, random_state(op.grid, 1))
    assert not rough.resolved and rec


def test_trajectory_csv(tmp_path, small_circle):
    traj, rep = integrate(small_circle, CUBIC, smooth_datum(small_circle, 1, 1), 0.05, 1.0, [0.5, 1.0])
    write_trajectory_csv(tmp_path / "t.csv", traj, rep)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,xnorm,xsigma_norm,energy,dissipation_cum,higher_energy" and len(lines) == 4


def test_zero_nonlinearity_experiment_is_linear():
    cfg = NonlinearDecayConfig(zero_nonlinearity=True, n1=16, n2=32, t_final=20, n_samples=81, dt_fraction=0.05)
    fit, manifest, curve = nonlinear_decay_experiment(cfg)
    assert manifest["nonlinearity"] == "zero"
    from waverate.semilinear import build_operator, trapped_mode_datum
    op = build_operator(cfg)
    s0 = trapped_mode_datum(op, 1.0, 1.0)[0]
    t = curve.times[10]
    ref = np.linalg.norm(op.to_coords(propagate_exact(op, s0, t)))
    assert curve.values[10] == pytest.approx(ref, rel=1e-6)


def test_uniform_regime_prefers_exponential():
    cfg = NonlinearDecayConfig(geometry="circle_half", n1=32, t_final=120, n_samples=481)
    fit, manifest, _ = nonlinear_decay_experiment(cfg)
    assert manifest["selected_model"] == "exponential"
    assert manifest["residuals"]["polynomial"] > 5 * manifest["residuals"]["exponential"]


def tanh_sinh_oracle(case, t):
    """Double-exponential quadrature; robust to the s^gamma endpoint behaviour."""
    mp.mp.dps = 30
    if isinstance(case, PolynomialCase):
        a, sg = case.alpha, case.sigma
        f = lambda s: ((1 + t) / (1 + s)) ** (sg * a) / (1 + (t - s)) ** a
    else:
        c, g, sg = case.c, case.gamma, case.sigma
        f = lambda s: mp.exp(sg * c * (t**g - s**g) - c * (t - s) ** g)
    return float(mp.quad(f, [0, t / 2, t]))


@pytest.mark.parametrize("case", [PolynomialCase(2.0, 1.0), PolynomialCase(1.5, 0.5),
                                  StretchedCase(1.0, 0.5, 1.0), StretchedCase(2.0, 0.3, 0.7)])
def test_convolution_integral_matches_simpson(case):
    for t in (0.5, 7.0, 40.0):
        assert convolution_integral(case, t) == pytest.approx(tanh_sinh_oracle(case, t), rel=1e-6)


def test_convolution_examples():
    assert convolution_integral(PolynomialCase(2.0), 0.0) == 0
    r = convolution_bound(PolynomialCase(2.0, 1.0))
    assert r.verdict == "bounded" and math.isfinite(r.sup)
    assert convolution_bound(StretchedCase(1.0, 0.5, 1.0)).verdict == "bounded"
    d = convolution_bound(PolynomialCase(0.5, 1.0))
    assert d.verdict == "divergent" and "alpha" in d.diagnostic
    # the forced-divergent integral grows like sqrt(t)
    assert d.values[-1] / d.values[-11] == pytest.approx(math.sqrt(10), rel=0.05)
    with pytest.raises(ValueError):
        convolution_bound(StretchedCase(1.0, 1.5))
