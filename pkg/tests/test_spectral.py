import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waverate.spectral import (DampingProfile, Grid, SpectralField, WaveState, apply_A, make_operator,
                               project_tail, sobolev_norm, to_modal, to_physical, transform)

SETTINGS = settings(max_examples=25, deadline=None)


def direct_dft(samples, grid):
    """Oracle: explicit double sum c_k = (1/N) sum_x u(x) exp(-i k.x 2pi/L)."""
    return grid._dft_matrix().conj().T @ samples.ravel() / grid.size


def dense_A(op):
    """Oracle: A assembled from its definition in modal coordinates (no X scaling)."""
    g = op.grid
    n = g.size
    lam = (g.laplacian_multipliers + op.alpha).ravel()
    G = g.multiplication_matrix(op.gamma)
    M = np.zeros((2 * n, 2 * n), complex)
    M[:n, n:] = np.eye(n)
    M[n:, :n] = -np.diag(lam)
    M[n:, n:] = -G
    return M


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid.circle(0.0, 16)
    with pytest.raises(ValueError):
        Grid.circle(1.0, 4)
    with pytest.raises(ValueError):
        Grid.torus(1.0, 1.0, 12, 16)
    g = Grid.torus(2.0, 3.0, 8, 16)
    assert g.size == 128
    assert np.allclose(np.diff(g.axis_points(0) % 2.0)[:3], 0.25)


def test_circle_multipliers_and_zero_damping():
    op = make_operator(Grid.circle(2 * np.pi, 64), 1.0, DampingProfile.undamped())
    k = np.fft.fftfreq(64, 1 / 64)
    assert np.allclose(op.laplacian_multipliers, k**2)
    assert not np.any(op.gamma)
    assert op.laplacian_multipliers[0] == 0


def test_power_abs_sample_value():
    op = make_operator(Grid.torus(2 * np.pi, 2 * np.pi, 64, 64), 1.0, DampingProfile.power_abs(2))
    x1 = op.grid.mesh()[0]
    i = np.argmin(np.abs(x1[:, 0] - 0.5))
    assert op.gamma[i, 0] == pytest.approx(x1[i, 0] ** 2)
    assert DampingProfile.power_abs(2).evaluate(0.5) == pytest.approx(0.25)
    assert np.all(op.gamma == op.gamma[:, :1])


def test_negative_damping_rejected():
    with pytest.raises(ValueError, match="negative damping"):
        DampingProfile.constant(-1)
    with pytest.raises(ValueError, match="negative damping"):
        make_operator(Grid.circle(), 1.0, DampingProfile.samples(-np.ones(64)))
    with pytest.raises(ValueError, match="alpha"):
        make_operator(Grid.circle(), 0.0, DampingProfile.constant(1))
    with pytest.raises(ValueError, match="undamped"):
        make_operator(Grid.circle(), 1.0, DampingProfile.samples(np.zeros(64)))


def test_transform_examples():
    g = Grid.circle(2 * np.pi, 32)
    c = to_modal(np.ones(32), g)
    assert c[0] == pytest.approx(1) and np.allclose(c[1:], 0)
    x = g.axis_points(0)
    c = to_modal(np.cos(3 * x), g)
    assert c[3] == pytest.approx(0.5) and c[-3] == pytest.approx(0.5)
    assert np.abs(np.delete(c, [3, 29])).max() < 1e-15
    f = SpectralField(g, physical=np.cos(3 * x))
    back = transform(transform(f, "to_modal"), "to_physical")
    assert np.allclose(back.physical, f.physical, atol=1e-14)
    with pytest.raises(ValueError):
        to_modal(np.ones(16), g)


def test_transform_matches_direct_sum():
    rng = np.random.default_rng(1)
    g = Grid.torus(2.0, 5.0, 8, 16)
    u = rng.standard_normal(g.shape)
    assert np.allclose(to_modal(u, g).ravel(), direct_dft(u, g), atol=1e-13)


def test_roundtrip_many_fields():
    rng = np.random.default_rng(0)
    g = Grid.torus(2 * np.pi, 2 * np.pi, 16, 16)
    worst = 0.0
    for _ in range(1000):
        u = rng.standard_normal(g.shape)
        back = to_physical(to_modal(u, g), g)
        worst = max(worst, np.abs(back - u).max() / np.abs(u).max())
    assert worst < 1e-12


@SETTINGS
@given(st.integers(0, 2**31 - 1))
def test_real_fields_have_hermitian_coefficients(seed):
    g = Grid.torus(2 * np.pi, 3.0, 8, 16)
    c = to_modal(np.random.default_rng(seed).standard_normal(g.shape), g)
    flipped = np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1))
    assert np.allclose(c, flipped.conj(), atol=1e-14)


def mode_state(grid, k):
    cu = np.zeros(grid.shape, complex)
    cu[k] = 1.0
    return WaveState.from_modal(grid, cu)


def test_sobolev_norm_examples():
    g = Grid.circle(2 * np.pi, 16)
    op = make_operator(g, 1.0, DampingProfile.undamped())
    s = mode_state(g, 1) * (1 / np.sqrt(g.volume))  # unit modal mass in the L^2 sense
    assert sobolev_norm(s, 0, op) == pytest.approx(np.sqrt(2))
    assert sobolev_norm(s, 1, op) == pytest.approx(2)
    assert sobolev_norm(WaveState.zeros(g), 0.5, op) == 0
    with pytest.raises(ValueError):
        sobolev_norm(s, 1.5, op)


@SETTINGS
@given(st.integers(0, 2**31 - 1), st.floats(0, 1), st.floats(0, 1))
def test_sobolev_norm_monotone_in_sigma(seed, s1, s2):
    g = Grid.circle(2 * np.pi, 16)
    op = make_operator(g, 1.0, DampingProfile.undamped())
    rng = np.random.default_rng(seed)
    st_ = WaveState.from_physical(g, rng.standard_normal(16), rng.standard_normal(16))
    lo, hi = sorted((s1, s2))
    assert sobolev_norm(st_, lo, op) <= sobolev_norm(st_, hi, op) * (1 + 1e-12)


def test_x_norm_equals_euclidean_coordinates():
    rng = np.random.default_rng(2)
    g = Grid.torus(2 * np.pi, 2 * np.pi, 8, 8)
    op = make_operator(g, 1.5, DampingProfile.power_abs(2))
    s = WaveState.from_physical(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
    assert np.linalg.norm(op.to_coords(s)) == pytest.approx(sobolev_norm(s, 0, op), rel=1e-12)
    back = op.from_coords(op.to_coords(s))
    assert np.allclose(back.u.physical, s.u.physical) and np.allclose(back.v.physical, s.v.physical)


def test_apply_A_examples():
    g = Grid.circle(2 * np.pi, 16)
    op = make_operator(g, 1.0, DampingProfile.undamped())
    s = mode_state(g, 1)
    out = apply_A(op, s)
    assert np.allclose(out.u.modal, 0) and np.allclose(out.v.modal, -2 * s.u.modal)
    opd = make_operator(g, 1.0, DampingProfile.indicator_strip(0, np.pi))
    w = np.sin(g.axis_points(0))
    out = apply_A(opd, WaveState.from_physical(g, np.zeros(16), w))
    assert np.allclose(out.u.physical, w)
    assert np.allclose(out.v.physical, -opd.gamma * w, atol=1e-13)
    with pytest.raises(ValueError):
        apply_A(op, WaveState.zeros(Grid.circle(2 * np.pi, 32)))


@pytest.mark.parametrize("shape", [(32,), (16, 16), (32, 32)])
def test_apply_A_matches_dense_oracle(shape):
    rng = np.random.default_rng(3)
    g = Grid(tuple([2 * np.pi] * len(shape)), shape)
    op = make_operator(g, 1.0, DampingProfile.power_abs(2))
    s = WaveState.from_physical(g, rng.standard_normal(shape), rng.standard_normal(shape))
    y = dense_A(op) @ np.concatenate([s.u.modal.ravel(), s.v.modal.ravel()])
    out = apply_A(op, s)
    got = np.concatenate([out.u.modal.ravel(), out.v.modal.ravel()])
    assert np.abs(got - y).max() < 1e-11


def test_undamped_matrix_is_skew():
    op = make_operator(Grid.torus(2 * np.pi, 2 * np.pi, 8, 8), 1.0, DampingProfile.undamped())
    M = op.matrix()
    assert np.abs(M + M.conj().T).max() < 1e-12
    R = op.real_matrix()
    assert np.abs(R + R.T).max() < 1e-12


def test_real_matrix_similar_to_modal_matrix():
    op = make_operator(Grid.circle(2 * np.pi, 16), 1.0, DampingProfile.power_abs(1.5))
    a = np.sort_complex(np.round(np.linalg.eigvals(op.matrix()), 9))
    b = np.sort_complex(np.round(np.linalg.eigvals(op.real_matrix()), 9))
    assert np.allclose(a, b, atol=1e-8)
    assert np.linalg.norm(op.matrix(), 2) == pytest.approx(np.linalg.norm(op.real_matrix(), 2), rel=1e-10)


def test_dissipativity_of_A():
    rng = np.random.default_rng(4)
    op = make_operator(Grid.torus(2 * np.pi, 2 * np.pi, 8, 8), 1.0, DampingProfile.power_abs(2))
    M = op.matrix()
    z = rng.standard_normal(M.shape[0]) + 1j * rng.standard_normal(M.shape[0])
    assert np.vdot(z, M @ z).real <= 1e-12


def test_block_decomposition_reproduces_spectrum():
    g = Grid.torus(2 * np.pi, 2 * np.pi, 16, 16)
    op = make_operator(g, 1.0, DampingProfile.power_abs(2))
    full = np.linalg.eigvals(op.matrix())
    dec = op.block_decomposition()
    parts = np.concatenate([np.linalg.eigvals(dec.block(k).matrix()) for k in dec.k2_values])
    d = np.abs(full[:, None] - parts[None, :])
    assert max(d.min(axis=1).max(), d.min(axis=0).max()) < 1e-10
    assert sum(dec.multiplicity(k) for k in dec.distinct_k2()) == 16


def test_block_decomposition_requires_separable_damping():
    g = Grid.torus(2 * np.pi, 2 * np.pi, 8, 8)
    data = np.random.default_rng(0).uniform(0.1, 1, g.shape)
    op = make_operator(g, 1.0, DampingProfile.samples(data))
    with pytest.raises(ValueError, match="first coordinate"):
        op.block_decomposition()


def test_project_tail_examples():
    rng = np.random.default_rng(5)
    g = Grid.torus(2 * np.pi, 2 * np.pi, 8, 8)
    s = WaveState.from_physical(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
    assert np.allclose(project_tail(s, 0).u.modal, s.u.modal)
    assert np.allclose(project_tail(s, g.size).v.modal, 0)
    with pytest.raises(ValueError):
        project_tail(s, g.size + 1)


@SETTINGS
@given(st.integers(0, 64), st.integers(0, 2**31 - 1))
def test_project_tail_partition_of_unity(n, seed):
    rng = np.random.default_rng(seed)
    g = Grid.torus(2 * np.pi, 2 * np.pi, 8, 8)
    s = WaveState.from_physical(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
    total = project_tail(s, n, "high") + project_tail(s, n, "low")
    assert np.abs(total.u.modal - s.u.modal).max() < 1e-14
    assert np.abs(total.v.modal - s.v.modal).max() < 1e-14


def test_mode_ranks_follow_eigenvalues():
    g = Grid.torus(2 * np.pi, 2 * np.pi, 8, 8)
    lam = g.laplacian_multipliers.ravel()
    order = np.argsort(g.mode_ranks.ravel())
    assert np.all(np.diff(lam[order]) >= -1e-12)
