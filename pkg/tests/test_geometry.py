import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waverate.geometry import (Disk, DiskWithHoles, FlatTorus, FoliationSpec, ObstacleConfig, Ray,
                               SurfaceOfRevolution, escape_profile, escape_time, gcc_diagnostic,
                               geodesic_steps, ikawa_check, metric_norm, pseudoconvexity_check,
                               trace_ray, write_rays_csv)

SETTINGS = settings(max_examples=30, deadline=None)
PEANUT = SurfaceOfRevolution.peanut()


def two_disk_table():
    return DiskWithHoles(2.0, ObstacleConfig.preset("two_disk"))


# ---------------------------------------------------------------- types

def test_geometry_validation():
    with pytest.raises(ValueError, match="overlap"):
        ObstacleConfig((Disk((0, 0), 0.5), Disk((0.9, 0), 0.5)))
    with pytest.raises(ValueError, match="inside"):
        DiskWithHoles(1.0, ObstacleConfig((Disk((0.8, 0), 0.3),)))
    with pytest.raises(ValueError):
        Disk((0, 0), 0.0)
    with pytest.raises(ValueError, match="positive"):
        SurfaceOfRevolution((np.linspace(-1, 1, 5), np.array([1, 1, -1, 1, 1.0])), (-1, 1))
    tab = SurfaceOfRevolution((np.linspace(-2, 2, 81), np.cosh(np.linspace(-2, 2, 81))), (-2, 2))
    assert float(tab.rho(0.7)) == pytest.approx(math.cosh(0.7), rel=1e-5)


def test_ray_validation():
    with pytest.raises(ValueError, match="unit"):
        trace_ray(FlatTorus(), Ray((0, 0), (1, 1)), 1.0)
    with pytest.raises(ValueError, match="interior"):
        trace_ray(two_disk_table(), Ray.planar(-0.5, 0.0, 0.3), 1.0)
    r = Ray.on_surface(PEANUT, 1.2, 0.0, 0.4)
    assert metric_norm(PEANUT, r) == pytest.approx(1, abs=1e-14)


# ---------------------------------------------------------------- torus

def test_torus_vertical_ray():
    path = trace_ray(FlatTorus(), Ray((0.3, 0.0), (0.0, 1.0)), 50.0)
    assert np.all(path.positions[:, 0] == 0.3)


def first_strip_time(c, eps, x0, angle, L=2 * math.pi):
    """Oracle: crossings of x2 = x0[1] advance x1 by L cot(angle); wait until the
    crossing set is 2 eps dense (gaps computed directly, at most three distinct
    lengths), then every strip of half-width eps has been met."""
    shift = (L * math.cos(angle) / math.sin(angle)) % L
    for n in range(2, 100_000):
        pts = np.sort((x0[0] + shift * np.arange(n)) % L)
        gaps = np.diff(np.concatenate([pts, [pts[0] + L]]))
        if gaps.max() < 2 * eps:
            assert len(np.unique(np.round(gaps, 9))) <= 3
            return n * L / abs(math.sin(angle))
    raise AssertionError("no bound found")


@pytest.mark.parametrize("k", range(10))
def test_torus_rays_meet_every_strip(k):
    angle = 0.3 + 0.1 * k * math.sqrt(2)
    x0 = (0.1 * k, 0.0)
    c, eps = 1.0, 0.2
    T = first_strip_time(c, eps, x0, angle)
    dt = 0.01
    path = trace_ray(FlatTorus(), Ray.planar(*x0, angle), T + 1, dt)
    d = np.abs((path.positions[:, 0] - c + math.pi) % (2 * math.pi) - math.pi)
    hit = np.flatnonzero(d <= eps + dt)
    assert len(hit) and path.times[hit[0]] <= T + 1


# ---------------------------------------------------------------- billiards

def test_period_two_orbit():
    table = two_disk_table()
    ray = Ray((0.0, 0.0), (1.0, 0.0))
    path = trace_ray(table, ray, 0.6 * 10_000, max_bounces=10_000)
    assert path.bounces == 10_000 and path.flag == "ok"
    assert np.abs(path.positions[:, 1]).max() == 0
    assert set(np.round(np.abs(path.positions[1:-1, 0]), 12)) == {0.3}


def test_grazing_terminates():
    table = two_disk_table()
    path = trace_ray(table, Ray((-1.0, 0.2), (1.0, 0.0)), 5.0)
    assert path.flag == "grazing"


@SETTINGS
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0, 2 * math.pi))
def test_billiard_reflection_law(x, y, angle):
    table = two_disk_table()
    if not table.contains(x, y):
        return
    path = trace_ray(table, Ray.planar(x, y, angle), 30.0)
    for k in range(1, path.bounces + 1):
        d_in, d_out, n = path.directions[k - 1], path.directions[k], path.normals[k]
        assert np.linalg.norm(d_out) == pytest.approx(1, abs=1e-15)
        assert abs(d_in @ n + d_out @ n) < 1e-12
        tang = np.array([-n[1], n[0]])
        assert abs(d_in @ tang - d_out @ tang) < 1e-12


# ---------------------------------------------------------------- peanut geodesics

def test_equator_is_invariant():
    path = trace_ray(PEANUT, Ray.on_surface(PEANUT, 0.0, 0.0, math.pi / 2), 100.0)
    assert np.abs(path.positions[:, 0]).max() == 0 and path.flag == "ok"


def test_clairaut_conserved_on_random_rays():
    rng = np.random.default_rng(0)
    n = 100
    y0 = rng.uniform(-1.5, 1.5, n)
    ang = rng.uniform(0, 2 * math.pi, n)
    rays = [Ray.on_surface(PEANUT, a, 0.0, b) for a, b in zip(y0, ang)]
    st_ = np.array([(*r.position, *r.direction) for r in rays]).T
    c0 = np.cosh(st_[0]) ** 2 * st_[3]
    drift = np.zeros(n)
    alive = np.ones(n, bool)

    def obs(k, y, th, yp, tp):
        alive[:] &= np.abs(y) <= 3
        drift[alive] = np.maximum(drift[alive], np.abs(np.cosh(y) ** 2 * tp - c0)[alive])
        return False

    geodesic_steps(PEANUT, *st_, 0.01, 10_000, obs)
    assert drift.max() < 1e-8
    single = trace_ray(PEANUT, rays[0], 100.0)
    assert np.abs(single.clairaut - single.clairaut[0]).max() < 1e-8


def test_geodesic_speed_is_unit():
    path = trace_ray(PEANUT, Ray.on_surface(PEANUT, 0.4, 1.0, 1.1), 20.0)
    speed = np.sqrt(path.directions[:, 0] ** 2 + np.cosh(path.positions[:, 0]) ** 2 * path.directions[:, 1] ** 2)
    assert np.abs(speed - 1).max() < 1e-8


def test_escape_examples():
    assert escape_time(PEANUT, 0.8, 0.8) == (0.0, "ok")
    t, flag = escape_time(PEANUT, 0.0, 0.8, t_cap=50)
    assert flag == "trapped" and math.isinf(t)
    prof = escape_profile(PEANUT, 0.8, 10.0 ** -np.arange(2, 9))
    assert np.all(np.diff(prof.times) > 0) and prof.r_squared >= 0.99
    # linearized flow at the equator: y'' = y, so the escape time grows like log(1/eps)
    assert prof.slope == pytest.approx(1.0, rel=0.05)


# ---------------------------------------------------------------- GCC

def test_gcc_open_book_trapped_family():
    res = gcc_diagnostic(FlatTorus(), lambda x1, x2: np.abs(x1), 1e-3, n_rays=2000, refine=True)
    assert res.fraction_controlled >= 0.999
    assert res.refined
    for r in res.refined:
        assert abs(r.position[0]) < 1e-3 and abs(r.direction[0]) < 1e-3


def test_gcc_fully_damped_strip():
    res = gcc_diagnostic(FlatTorus(), lambda x1, x2: np.ones_like(x1), 0.5, n_rays=256)
    assert res.fraction_controlled == 1.0 and not res.trapped


def test_gcc_detects_period_two_ray(tmp_path):
    table = two_disk_table()

    def annulus(x, y):
        return (np.hypot(x, y) >= 1.8).astype(float)

    trapped_ray = Ray((0.0, 0.0), (1.0, 0.0))
    res = gcc_diagnostic(table, annulus, 0.5, n_rays=200, extra_rays=[trapped_ray])
    assert trapped_ray in res.trapped
    assert not np.isfinite(res.hit_times[-1])
    write_rays_csv(tmp_path / "rays.csv", res)
    lines = (tmp_path / "rays.csv").read_text().splitlines()
    assert lines[0] == "ray_id,t_hit,trapped_flag" and len(lines) == res.n_rays + 1


def test_gcc_relaxed_mode():
    table = two_disk_table()

    def annulus(x, y):
        return (np.hypot(x, y) >= 1.8).astype(float)

    strict = gcc_diagnostic(table, annulus, 0.5, n_rays=300, seed=1)
    relaxed = gcc_diagnostic(table, annulus, 0.5, n_rays=300, seed=1, relaxed_margin=0.05)
    assert 0 < relaxed.fraction_controlled <= 1 and 0 < strict.fraction_controlled <= 1
    with pytest.raises(ValueError):
        gcc_diagnostic(FlatTorus(), annulus, 0.5, relaxed_margin=0.1)


def test_gcc_preconditions():
    with pytest.raises(ValueError):
        gcc_diagnostic(FlatTorus(), lambda a, b: a, 0.0)
    with pytest.raises(ValueError):
        gcc_diagnostic(FlatTorus(), lambda a, b: a, 0.1, n_rays=50)


# ---------------------------------------------------------------- Ikawa

def test_ikawa_equilateral():
    rep = ikawa_check(ObstacleConfig.preset("equilateral"), 2.0)
    assert all(r.passed for r in rep.values())
    d = rep["d"].details
    assert d["kappa"] == pytest.approx(10) and d["L"] == pytest.approx(0.8) and d["kappa_L"] == pytest.approx(8)


def test_ikawa_two_disks_not_applicable():
    rep = ikawa_check(ObstacleConfig.preset("two_disk"), 2.0)
    assert rep["d"].details["status"] == "not applicable"


def test_ikawa_collinear_fails_c():
    rep = ikawa_check(ObstacleConfig.preset("collinear"), 2.0)
    assert not rep["c"].passed and rep["c"].details["margin"] < 0
    assert rep["a"].passed and rep["b"].passed


def test_ikawa_hull_containment():
    cfg = ObstacleConfig((Disk((1.0, 0.0), 0.5), Disk((-1.0, 0.0), 0.5)))
    assert not ikawa_check(cfg, 1.4)["b"].passed
    assert ikawa_check(cfg, 1.6)["b"].details["margin"] == pytest.approx(0.1)


@SETTINGS
@given(st.floats(0.3, 1.5), st.floats(0.01, 0.2))
def test_ikawa_d_arithmetic(side, r):
    if side - 2 * r <= 0:
        return
    centers = [(side * math.cos(a) / math.sqrt(3), side * math.sin(a) / math.sqrt(3))
               for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
    rep = ikawa_check(ObstacleConfig(tuple(Disk(c, r) for c in centers)), 10.0)
    kL = (side - 2 * r) / r
    assert rep["d"].details["kappa_L"] == pytest.approx(kL, rel=1e-9)
    assert rep["d"].passed == (kL > 3)


# ---------------------------------------------------------------- pseudo-convexity

def test_peanut_closed_form():
    fol = FoliationSpec.peanut()
    val = float(fol._h2(0.5, 0.0, 0.0, 1.0, 0.5))
    assert val == pytest.approx(4 * math.sinh(0.5) / math.cosh(0.5) ** 3, rel=1e-12)
    assert val == pytest.approx(1.45358, abs=2e-4)
    assert float(fol._h1(0.5, 0.0, 0.7, 1.0, 0.5)) == pytest.approx(2 * 0.7)


@pytest.mark.parametrize("mirror", [False, True])
def test_peanut_foliation_is_pseudoconvex(mirror):
    rep = pseudoconvexity_check(FoliationSpec.peanut(mirror), 1000, seed=0)
    assert rep.strictly_pseudoconvex and rep.closed_form_error < 1e-12


def test_torus_planes_fail():
    rep = pseudoconvexity_check(FoliationSpec.torus_planes(), 200)
    assert rep.pass_fraction == 0 and not rep.strictly_pseudoconvex
    assert np.abs(rep.samples[:, -1]).max() == 0


def test_sphere_foliation_passes():
    rep = pseudoconvexity_check(FoliationSpec.sphere(), 1000, seed=2)
    assert rep.strictly_pseudoconvex and rep.min_value > 0 and rep.closed_form_error < 1e-10


def test_disk_foliation_boundary_angle():
    rep = pseudoconvexity_check(FoliationSpec.disk(), 500)
    assert rep.strictly_pseudoconvex and rep.boundary_ok and rep.closed_form_error < 1e-10


def test_characteristic_samples_are_characteristic():
    fol = FoliationSpec.sphere()
    rep = pseudoconvexity_check(fol, 100, seed=3)
    for lam, x1, x2, k1, k2, _ in rep.samples:
        xi = np.array([k1, k2])
        assert xi @ fol.cometric((x1, x2)) @ xi == pytest.approx(1, abs=1e-12)
        assert abs(float(fol._h1(x1, x2, k1, k2, lam))) < 1e-12
