"""Configuration-driven experiment runner.

    python -m waverate SUBCOMMAND [--config PATH] [--out DIR] [--seed N]
                                  [--threads N] [--set section.key=value ...]

Each run writes its CSV files and ``manifest.json`` (config echo, version,
timestamps, sha256 of every emitted file, fitted quantities, checks and
acceptance rows) into the output directory. ``report`` consolidates manifests
into one acceptance table.

Exit status: 0 ok, 1 report anomalies, 2 parse error, 3 validation error,
4 failed compute-stage check.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, Config, ConfigError, ValidationError, parse_config
from .presets import PRESETS
from .report import CheckReport, to_jsonable

EXIT_OK, EXIT_ANOMALY, EXIT_PARSE, EXIT_VALIDATION, EXIT_CHECK = 0, 1, 2, 3, 4

CRITERIA = {
    1: "conservative sanity",
    2: "dissipation identity",
    3: "Gearhart-Pruss regime",
    4: "open-book resolvent exponent",
    5: "operator decay vs resolvent exponent",
    6: "nonlinear decay rate",
    7: "resolvent bound suite",
    8: "invertibility witness",
    9: "peanut pseudo-convexity",
    10: "peanut trapped/hyperbolic geodesics",
    11: "Ikawa checker and billiard",
    12: "convolution integrals",
    13: "GCC diagnostic",
}


class CheckFailure(Exception):
    def __init__(self, name: str, message: str = ""):
        self.name = name
        super().__init__(f"check '{name}' failed" + (f": {message}" if message else ""))


@dataclass
class RunContext:
    cfg: Config
    out: Path
    seed: int
    threads: int
    files: list = field(default_factory=list)
    fitted: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    criteria: list = field(default_factory=list)

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(name)
        return p

    def map(self, func, items):
        """Order-preserving parallel map over independent items."""
        items = list(items)
        if self.threads <= 1 or len(items) < 2:
            return [func(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(func, items))

    def criterion(self, cid, measured, target, tolerance, passed):
        self.criteria.append({"id": cid, "name": CRITERIA[cid], "measured": measured,
                              "target": target, "tolerance": tolerance,
                              "verdict": "pass" if passed else "fail"})


# ----------------------------------------------------------- model builders

def build_operator(cfg: Config):
    from .spectral import DampingProfile, Grid, make_operator

    kind = cfg["geometry.kind"]
    if kind in ("circle", "circle_half"):
        grid = Grid.circle(cfg["geometry.l1"], cfg["geometry.n1"])
    elif kind in ("open_book", "torus"):
        grid = Grid.torus(cfg["geometry.l1"], cfg["geometry.l2"], cfg["geometry.n1"], cfg["geometry.n2"])
    else:
        raise ValidationError(f"geometry kind {kind!r} has no wave operator")
    dk = cfg["damping.kind"]
    if kind == "circle_half" and not cfg.is_set("damping.kind"):
        dk = "strip"
    if dk == "power_abs":
        damping = DampingProfile.power_abs(cfg["damping.beta"])
    elif dk == "constant":
        damping = DampingProfile.constant(cfg["damping.value"])
    elif dk == "undamped":
        damping = DampingProfile.undamped()
    elif dk == "strip":
        damping = DampingProfile.indicator_strip(cfg["damping.lo"], cfg["damping.hi"], cfg["damping.value"])
    else:
        raise ValidationError(f"damping kind {dk!r} is not defined on a periodic grid")
    return make_operator(grid, cfg["geometry.alpha"], damping)


def build_nonlinearity(cfg: Config):
    from .semilinear import Nonlinearity

    if cfg["nonlinearity.kind"] == "zero":
        return Nonlinearity.zero()
    return Nonlinearity.odd_power(cfg["nonlinearity.p"], cfg["nonlinearity.coefficient"])


def build_scene(cfg: Config):
    """(geometry, damping callable) for ray experiments."""
    from .geometry import DiskWithHoles, FlatTorus, SurfaceOfRevolution
    from .spectral import DampingProfile

    kind = cfg["geometry.kind"]
    if kind in ("flat_torus", "torus", "open_book"):
        geo = FlatTorus(cfg["geometry.l1"], cfg["geometry.l2"])
    elif kind == "disk_with_holes":
        geo = DiskWithHoles(cfg["geometry.outer_radius"], obstacle_config(cfg))
    elif kind == "peanut":
        geo = SurfaceOfRevolution.peanut(cfg["geometry.y_max"])
    else:
        raise ValidationError(f"geometry kind {kind!r} has no ray tracer")
    dk = cfg["damping.kind"]
    if dk == "power_abs":
        prof = DampingProfile.power_abs(cfg["damping.beta"])
        return geo, lambda x1, x2: prof.evaluate(x1)
    if dk == "strip":
        lo, hi, val = cfg["damping.lo"], cfg["damping.hi"], cfg["damping.value"]
        return geo, lambda x1, x2: np.where((x1 >= lo) & (x1 < hi), val, 0.0)
    if dk == "annulus":
        r = cfg["damping.inner_radius"]
        return geo, lambda x1, x2: (np.hypot(x1, x2) >= r).astype(float)
    if dk == "band":
        e = cfg["damping.edge"]
        return geo, lambda y, th: (np.abs(y) >= e).astype(float)
    if dk == "constant":
        val = cfg["damping.value"]
        return geo, lambda x1, x2: np.full(np.shape(x1), val)
    raise ValidationError(f"damping kind {dk!r} is not usable for rays")


def obstacle_config(cfg: Config):
    from .geometry import Disk, ObstacleConfig

    try:
        if cfg.obstacles:
            return ObstacleConfig(tuple(Disk(d[:2], d[2]) for d in cfg.obstacles))
        if cfg["geometry.preset"]:
            return ObstacleConfig.preset(cfg["geometry.preset"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    raise ValidationError("no obstacles given (add [obstacles] disk lines or geometry.preset)")


def _times(cfg: Config, geometric=False, start=0.5):
    if cfg["numeric.times"]:
        return np.array(cfg["numeric.times"])
    if geometric:
        return np.geomspace(start, cfg["numeric.t_final"], cfg["numeric.n_samples"])
    return np.linspace(0.0, cfg["numeric.t_final"], cfg["numeric.n_samples"])


# ------------------------------------------------------------- experiments

def run_simulate(ctx: RunContext):
    from .semigroup import cfl_limit, propagate_exact, xnorm
    from .semilinear import integrate, smooth_datum, write_trajectory_csv

    cfg = ctx.cfg
    op = build_operator(cfg)
    nl = build_nonlinearity(cfg)
    dt = cfg["numeric.dt_fraction"] * cfl_limit(op)
    times = _times(cfg)
    state0 = smooth_datum(op, cfg["numeric.sigma"], cfg["numeric.amplitude"], ctx.seed)
    traj, rep = integrate(op, nl, state0, dt, float(times[-1]), times)
    write_trajectory_csv(ctx.path("trajectory.csv"), traj, rep, cfg["numeric.sigma"], with_higher=False)
    E0 = float(rep.E_values[0])
    resid = float(np.max(np.abs(rep.residual)))
    ctx.fitted.update(dt=dt, energy0=E0, energy_residual_max=resid, energy_residual_rel=resid / E0)
    if op.is_undamped and nl.is_zero:
        xs = traj.xnorms()
        stepped = float(np.max(np.abs(xs / xs[0] - 1)))
        exact = [xnorm(op, propagate_exact(op, state0, float(t))) for t in traj.times]
        eig = float(np.max(np.abs(np.array(exact) / exact[0] - 1)))
        ctx.fitted.update(norm_drift_eig=eig, norm_drift_stepped=stepped)
        ok = eig <= 1e-9 and stepped <= 1e-6
        ctx.checks.append(CheckReport("norm_conservation", ok, {"eig": eig, "stepped": stepped}))
        ctx.criterion(1, {"eig": eig, "stepped": stepped}, "constant X-norm", {"eig": 1e-9, "stepped": 1e-6}, ok)
        if not ok:
            raise CheckFailure("norm_conservation", f"drift eig={eig:.3g}, stepped={stepped:.3g}")
        return traj.times, xs
    tol = cfg["numeric.energy_tol"]
    ok = resid <= tol * E0
    ctx.checks.append(CheckReport("energy_identity", ok, {"residual": resid, "limit": tol * E0}))
    ctx.criterion(2, resid / E0, 0.0, tol, ok)
    if not ok:
        raise CheckFailure("energy_identity", f"residual {resid:.3g} > {tol:g} E(0)")
    return traj.times, rep.E_values


def _mu_grid(cfg, op):
    from .resolvent import resonance_mu_grid

    lo, hi, n = cfg["numeric.mu_min"], cfg["numeric.mu_max"], cfg["numeric.mu_count"]
    kind = cfg["numeric.mu_grid"]
    if kind == "resonance":
        if op.grid.ndim != 2:
            raise ValidationError("the resonance mu grid needs a two-dimensional grid")
        return resonance_mu_grid(op, lo, hi, k2_max=cfg["numeric.k2_max"] or None, count=n)
    if kind == "geometric":
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def run_resolvent(ctx: RunContext):
    mode = ctx.cfg["numeric.mode"] or "sweep"
    if mode == "certify":
        return _run_certify(ctx)
    if mode == "witness":
        return _run_witness(ctx)
    if mode != "sweep":
        raise ValidationError("numeric.mode must be sweep, certify or witness for resolvent runs")
    from .resolvent import fit_resolvent_growth, sweep, write_sweep_csv

    cfg = ctx.cfg
    op = build_operator(cfg)
    blocks = cfg["numeric.use_blocks"] and op.grid.ndim == 2 and op.damping.first_coordinate_only
    mus = _mu_grid(cfg, op)
    sw = sweep(op, mus, use_blocks=blocks, k2_max=cfg["numeric.k2_max"] or None)
    write_sweep_csv(ctx.path("resolvent.csv"), sw)
    sup = float(np.max(sw.norms))
    ctx.fitted.update(sup_norm=sup, n_mu=len(mus))
    if len(mus) >= 8:
        fit = fit_resolvent_growth(sw)
        ctx.fitted.update(fitted_exponent=fit.rate, fit_window=fit.fit_window, fit_residual=fit.residual)
        if cfg["geometry.kind"] == "open_book" and op.damping.kind == "power_abs":
            beta = op.damping.beta
            target = beta / (beta + 2)
            rel = abs(fit.rate - target) / target
            ctx.fitted["target_exponent"] = target
            ctx.criterion(4, fit.rate, target, 0.2, rel <= 0.2)
    return sw.mu_grid, sw.norms


def _run_certify(ctx: RunContext):
    from .resolvent import (appendix_bound_check, bound_constant, certify,
                            high_frequency_constant_check, random_instance)

    cfg = ctx.cfg
    n_inst, n_modes = cfg["numeric.instances"], cfg["numeric.n_modes"]

    def one(i):
        sys_, mu = random_instance(ctx.seed + i, n_modes)
        cert = certify(sys_, mu, seed=ctx.seed + i)
        bound = appendix_bound_check(sys_, cert) if cert.certified else CheckReport("appendix_bound", False)
        n_values = list(range(0, sys_.n + 1, max(1, sys_.n // 6)))
        hf = high_frequency_constant_check(sys_, [cert], n_values) if cert.certified else None
        return i, sys_, cert, bound, hf

    rows = ctx.map(one, range(n_inst))
    with open(ctx.path("certificates.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "mu", "f", "g", "M", "worst_violation", "bound_ok", "projected_ok"])
        for i, sys_, cert, bound, hf in rows:
            M = bound_constant(cert.f_const, cert.g_const, sys_.sqrt_b_norm)
            w.writerow([i, repr(cert.mu), repr(cert.f_const), repr(cert.g_const), repr(M),
                        repr(cert.worst_violation), int(bound.passed), int(bool(hf and hf.passed))])
    certified = sum(r[2].certified for r in rows)
    bounds = sum(bool(r[3].passed) for r in rows)
    hfs = sum(bool(r[4] and r[4].passed) for r in rows)
    Ks = [r[4].details["K"] for r in rows if r[4]]
    # stability of K in n: worst tail norm relative to K * M(mu) fitted at n = 0
    drift = [max(x["norm"] / (x["limit"] / r[4].details["safety"]) for x in r[4].details["rows"])
             for r in rows if r[4]]
    ctx.fitted.update(instances=n_inst, certified=certified, bound_ok=bounds, projected_ok=hfs,
                      K_min=min(Ks, default=None), K_max=max(Ks, default=None),
                      K_tail_ratio_max=max(drift, default=None))
    ok = certified == bounds == hfs == n_inst
    ctx.checks.append(CheckReport("certified_bounds", ok, dict(ctx.fitted)))
    ctx.criterion(7, f"{bounds}/{n_inst} bounds, {hfs}/{n_inst} projected", "100%", 0, ok)
    return np.arange(n_inst), np.array([r[2].worst_violation for r in rows])


def witness_cases(seed: int, n_random: int = 20):
    """Constructed 2-mode systems: (name, system, mu, expected singular)."""
    from .resolvent import SecondOrderSystem

    mu = 3.0
    cases = [("kernel", SecondOrderSystem.diagonal([mu * mu, mu * mu + 5.0], [0.0, 1.0]), mu, True),
             ("observed", SecondOrderSystem.diagonal([mu * mu, mu * mu + 5.0], [0.5, 1.0]), mu, False)]
    rng = np.random.default_rng(seed)
    for j in range(n_random):
        ell = np.sort(rng.uniform(1.0, 50.0, 2))
        m = math.sqrt(ell[rng.integers(0, 2)])
        C = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        B = C @ C.conj().T + 0.1 * np.eye(2)
        cases.append((f"random_{j}", SecondOrderSystem(np.diag(ell), B), m, False))
    return cases


def _run_witness(ctx: RunContext):
    import scipy.linalg as sla

    from .resolvent import invertibility_witness

    rows = []
    ok = True
    for name, sys_, mu, singular in witness_cases(ctx.seed):
        M = sys_.first_order_matrix()
        smin = float(sla.svdvals(M - 1j * mu * np.eye(len(M)))[-1])
        wit = invertibility_witness(sys_, mu)
        agree = (smin < 1e-10) == singular == (wit.verdict == "not invertible")
        ok &= agree
        rows.append((name, mu, smin, wit.minimum, wit.verdict, int(agree)))
    with open(ctx.path("witness.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "mu", "sigma_min", "eigenspace_min_B", "verdict", "consistent"])
        for r in rows:
            w.writerow([r[0], repr(r[1]), repr(r[2]), "" if r[3] is None else repr(r[3]), r[4], r[5]])
    ctx.fitted["cases"] = len(rows)
    ctx.checks.append(CheckReport("witness", ok, {"cases": len(rows)}))
    ctx.criterion(8, f"{sum(r[5] for r in rows)}/{len(rows)} consistent", "all", 1e-10, ok)
    return np.arange(len(rows)), np.array([r[2] for r in rows])


def run_decay(ctx: RunContext):
    cfg = ctx.cfg
    if cfg["numeric.decay"] == "nonlinear":
        return _run_nonlinear(ctx)
    from .resolvent import sweep
    from .semigroup import fit_decay, operator_decay_curve, preasymptotic_window, write_curve_csv

    op = build_operator(cfg)
    shift = cfg["numeric.shift"]
    blocks = op.grid.ndim == 2 and op.damping.first_coordinate_only
    if blocks:
        times = _times(cfg, geometric=True)
        curve = operator_decay_curve(op, times, c=shift, blocks=True, k2_max=cfg["numeric.k2_max"] or None)
        write_curve_csv(ctx.path("decay.csv"), curve)
        window = preasymptotic_window(curve)
        fit = fit_decay(curve, "polynomial", window)
        ctx.fitted.update(fitted_exponent=fit.rate, fit_window=window, fit_residual=fit.residual,
                          window_rule="dominant block k2 > 0, before the truncation edge, departure rule")
        if cfg["geometry.kind"] == "open_book" and op.damping.kind == "power_abs":
            target = 1 + 2 / op.damping.beta
            ctx.fitted["target_exponent"] = target
            ctx.criterion(5, fit.rate, target, 0.25, abs(fit.rate - target) / target <= 0.25)
        return curve.times, curve.values
    times = _times(cfg)
    curve = operator_decay_curve(op, times, c=shift)
    write_curve_csv(ctx.path("decay.csv"), curve)
    t_final = float(times[-1])
    fit = fit_decay(curve, "exponential", (t_final / 2, t_final))
    abscissa = float(np.max(np.linalg.eigvals(op.real_matrix()).real))
    mus = _mu_grid(cfg, op)
    sw = sweep(op, mus)
    sup = float(np.max(sw.norms))
    rel = abs(fit.rate + abscissa) / abs(abscissa)
    ctx.fitted.update(fitted_rate=fit.rate, spectral_abscissa=abscissa, fit_window=fit.fit_window,
                      resolvent_sup=sup, relative_gap=rel)
    if cfg["geometry.kind"] == "circle_half":
        ok = math.isfinite(sup) and rel <= 0.1
        ctx.criterion(3, {"rate": fit.rate, "resolvent_sup": sup}, -abscissa, 0.1, ok)
    return curve.times, curve.values


def _run_nonlinear(ctx: RunContext):
    from .semigroup import write_curve_csv
    from .semilinear import NonlinearDecayConfig, nonlinear_decay_experiment

    cfg = ctx.cfg
    geo = cfg["geometry.kind"]
    if geo not in ("open_book", "circle_half"):
        raise ValidationError("nonlinear decay runs use the open_book or circle_half geometry")
    ncfg = NonlinearDecayConfig(
        geometry=geo, beta=cfg["damping.beta"], sigma=cfg["numeric.sigma"], p=cfg["nonlinearity.p"],
        coefficient=cfg["nonlinearity.coefficient"],
        zero_nonlinearity=cfg["nonlinearity.kind"] == "zero", n1=cfg["geometry.n1"], n2=cfg["geometry.n2"],
        alpha=cfg["geometry.alpha"], amplitude=cfg["numeric.amplitude"], t_final=cfg["numeric.t_final"],
        dt_fraction=cfg["numeric.dt_fraction"], n_samples=cfg["numeric.n_samples"], seed=ctx.seed,
        low_block=cfg["numeric.low_block"], edge_fraction=cfg["numeric.edge_fraction"])
    fit, manifest, curve = nonlinear_decay_experiment(ncfg)
    write_curve_csv(ctx.path("decay.csv"), curve)
    ctx.fitted.update(manifest)
    ctx.fitted.update(fitted_model=fit.model, fitted_rate=fit.rate)
    if geo == "open_book":
        target = manifest["target_exponent"]
        ctx.criterion(6, fit.rate, target, 0.3, abs(fit.rate - target) / target <= 0.3)
    return curve.times, curve.values


def run_rays(ctx: RunContext):
    from .geometry import (DiskWithHoles, FlatTorus, Ray, SurfaceOfRevolution, escape_profile,
                           gcc_diagnostic, trace_ray, write_rays_csv)

    cfg = ctx.cfg
    geo, damping = build_scene(cfg)
    extra = []
    if isinstance(geo, DiskWithHoles):
        extra = [period_two_ray(a, b) for i, a in enumerate(geo.obstacles.disks)
                 for b in geo.obstacles.disks[i + 1:]]
    T = cfg["numeric.T"] or None
    res = gcc_diagnostic(geo, damping, cfg["numeric.epsilon"], T, cfg["numeric.n_rays"], ctx.seed,
                         refine=cfg["numeric.refine"], extra_rays=extra)
    write_rays_csv(ctx.path("rays.csv"), res)
    ctx.fitted.update(fraction_controlled=res.fraction_controlled, n_trapped=len(res.trapped), T=res.T,
                      trapped=[[*r.position, *r.direction] for r in res.trapped[:50]])
    if isinstance(geo, FlatTorus) and cfg["damping.kind"] == "power_abs":
        dev = max((max(abs(r.position[0]), abs(r.direction[0])) for r in res.trapped), default=math.inf)
        ok = bool(res.trapped) and dev <= 1e-3
        ctx.fitted["trapped_max_deviation"] = dev
        ctx.criterion(13, dev, "trapped rays at x1=0, vertical", 1e-3, ok)
    if isinstance(geo, DiskWithHoles) and len(geo.obstacles.disks) == 2:
        path = trace_ray(geo, extra[0], math.inf, max_bounces=10_000)
        dev = float(np.max(np.abs(_line_offset(path.positions[1:], geo.obstacles.disks))))
        ok = path.bounces == 10_000 and path.flag == "ok" and dev <= 1e-9
        ctx.fitted.update(period_two_bounces=path.bounces, period_two_deviation=dev)
        ctx.checks.append(CheckReport("period_two_orbit", ok, {"bounces": path.bounces, "deviation": dev}))
        ctx.criterion(11, f"{path.bounces} bounces, deviation {dev:.1e}", "10^4 bounces", 1e-9, ok)
    if isinstance(geo, SurfaceOfRevolution) and cfg["numeric.escape"]:
        eq = trace_ray(geo, Ray((0.0, 0.0), (0.0, 1.0)), 100.0, 0.01)
        drift = float(np.max(np.abs(eq.positions[:, 0])))
        prof = escape_profile(geo, cfg["damping.edge"], cfg["numeric.escape_eps"])
        with open(ctx.path("escape.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "escape_time", "flag"])
            for e, t, f in zip(prof.epsilons, prof.times, prof.flags):
                w.writerow([repr(float(e)), "inf" if not np.isfinite(t) else repr(float(t)), f])
        increasing = bool(np.all(np.diff(prof.times) > 0))
        ok = drift <= 1e-8 and prof.r_squared >= 0.99 and increasing
        ctx.fitted.update(equator_drift=drift, escape_slope=prof.slope, escape_r2=prof.r_squared)
        ctx.criterion(10, {"equator_drift": drift, "r_squared": prof.r_squared},
                      {"equator_drift": 1e-8, "r_squared": 0.99}, 0, ok)
        return np.log(1 / prof.epsilons), prof.times
    order = np.sort(res.hit_times[np.isfinite(res.hit_times)])
    return order, np.arange(1, len(order) + 1) / res.n_rays


def period_two_ray(a, b):
    """Ray from the middle of the gap between two disks along the line of centres."""
    from .geometry import Ray

    ca, cb = np.array(a.center), np.array(b.center)
    u = (cb - ca) / np.linalg.norm(cb - ca)
    pa, pb = ca + a.radius * u, cb - b.radius * u
    return Ray(tuple(0.5 * (pa + pb)), tuple(u))


def _line_offset(points, disks):
    ca, cb = np.array(disks[0].center), np.array(disks[1].center)
    u = (cb - ca) / np.linalg.norm(cb - ca)
    d = points - ca
    return d[:, 0] * u[1] - d[:, 1] * u[0]


def run_foliation(ctx: RunContext):
    from .geometry import FoliationSpec, pseudoconvexity_check

    cfg = ctx.cfg
    name = cfg["numeric.foliation"]
    fol = {"peanut": FoliationSpec.peanut, "peanut_mirror": lambda: FoliationSpec.peanut(True),
           "torus_planes": FoliationSpec.torus_planes, "sphere": FoliationSpec.sphere,
           "disk": FoliationSpec.disk}[name]()
    rep = pseudoconvexity_check(fol, cfg["numeric.sample_count"], ctx.seed)
    with open(ctx.path("foliation.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "x1", "x2", "xi1", "xi2", "hp2_psi"])
        for row in rep.samples:
            w.writerow([repr(float(v)) for v in row])
    ctx.fitted.update(pass_fraction=rep.pass_fraction, min_value=rep.min_value, vacuous=rep.n_vacuous,
                      noncharacteristic=rep.noncharacteristic_ok, closed_form_error=rep.closed_form_error,
                      boundary_ok=rep.boundary_ok, strictly_pseudoconvex=rep.strictly_pseudoconvex)
    if rep.closed_form_error is not None and rep.closed_form_error > 1e-12:
        raise CheckFailure("closed_form", f"bracket differs from the closed form by {rep.closed_form_error:.3g}")
    if name == "peanut":
        ok = rep.pass_fraction == 1.0 and rep.closed_form_error <= 1e-12
        ctx.criterion(9, {"pass_fraction": rep.pass_fraction, "closed_form_error": rep.closed_form_error},
                      1.0, 1e-12, ok)
    elif name == "torus_planes":
        ctx.criterion(9, {"strictly_pseudoconvex": rep.strictly_pseudoconvex}, "reported failing", 0,
                      not rep.strictly_pseudoconvex)
    return rep.samples[:, 0], rep.samples[:, -1]


def run_ikawa(ctx: RunContext):
    from .geometry import ikawa_check

    cfg = ctx.cfg
    obs = obstacle_config(cfg)
    reps = ikawa_check(obs, cfg["geometry.outer_radius"])
    with open(ctx.path("ikawa.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "pass", "margin", "status"])
        for key, r in reps.items():
            m = r.details.get("margin")
            w.writerow([key, int(r.passed), "" if m is None else repr(float(m)), r.details.get("status", "")])
    ctx.checks.extend(reps.values())
    ctx.fitted.update({k: r.to_dict() for k, r in reps.items()})
    preset = cfg["geometry.preset"] if not cfg.obstacles else ""
    if preset == "equilateral":
        kl = reps["d"].details["kappa_L"]
        ctx.criterion(11, {"all_pass": all(r.passed for r in reps.values()), "kappa_L": kl}, 8.0, 1e-12,
                      all(r.passed for r in reps.values()) and abs(kl - 8.0) <= 1e-12)
    elif preset == "collinear":
        ctx.criterion(11, {"c": bool(reps["c"].passed)}, "condition (c) fails", 0, not reps["c"].passed)
    elif preset == "two_disk":
        st = reps["d"].details.get("status", "")
        ctx.criterion(11, {"d": st}, "not applicable", 0, st == "not applicable")
    return None


def run_convolution(ctx: RunContext):
    from .semilinear import PolynomialCase, StretchedCase, convolution_bound

    cfg = ctx.cfg
    if cfg["numeric.case"] == "polynomial":
        case = PolynomialCase(cfg["numeric.rate"], cfg["numeric.sigma"])
    else:
        case = StretchedCase(cfg["numeric.c"], cfg["numeric.gamma"], cfg["numeric.sigma"])
    try:
        res = convolution_bound(case, stability=cfg["numeric.stability"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    with open(ctx.path("convolution.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "integral", "running_sup"])
        for t, v, r in zip(res.t_grid, res.values, res.running_sup):
            w.writerow([repr(float(t)), repr(float(v)), repr(float(r))])
    ctx.fitted.update(sup=res.sup, verdict=res.verdict, diagnostic=res.diagnostic)
    expected = "divergent" if isinstance(case, PolynomialCase) and case.alpha <= 1 else "bounded"
    ctx.criterion(12, res.verdict, expected, cfg["numeric.stability"], res.verdict == expected)
    return res.t_grid, res.values


RUNNERS = {"simulate": run_simulate, "resolvent": run_resolvent, "decay": run_decay, "rays": run_rays,
           "foliation": run_foliation, "ikawa": run_ikawa, "convolution": run_convolution}


# ------------------------------------------------------------ run / report

def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_config(spec: str | None, overrides=()) -> Config:
    if spec is None:
        text = ""
    elif spec.startswith("preset:"):
        name = spec.split(":", 1)[1]
        if name not in PRESETS:
            raise ConfigError(0, f"unknown preset {name!r}")
        text = PRESETS[name]
    else:
        text = Path(spec).read_text()
    return parse_config(text, overrides)


def run(kind: str, config_path: str | None, out_dir, overrides=(), seed: int | None = None,
        threads: int | None = None) -> tuple[int, dict]:
    """Run one experiment; returns (exit status, manifest)."""
    try:
        cfg = load_config(config_path, overrides)
    except ConfigError as exc:
        return EXIT_PARSE, {"error": str(exc)}
    except ValidationError as exc:
        return EXIT_VALIDATION, {"error": str(exc)}
    except OSError as exc:
        return EXIT_PARSE, {"error": f"cannot read config: {exc}"}
    declared = cfg["experiment.kind"]
    if declared and declared != kind:
        return EXIT_VALIDATION, {"error": f"config declares experiment '{declared}', not '{kind}'"}
    seed = cfg["experiment.seed"] if seed is None else seed
    threads = cfg["experiment.threads"] if threads is None else threads
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(cfg, out, seed, threads)
    started = datetime.now(timezone.utc).isoformat()
    status, error = EXIT_OK, None
    curve = None
    try:
        curve = RUNNERS[kind](ctx)
    except ValidationError as exc:
        status, error = EXIT_VALIDATION, str(exc)
    except CheckFailure as exc:
        status, error = EXIT_CHECK, str(exc)
    except ValueError as exc:
        status, error = EXIT_VALIDATION, str(exc)
    if curve is not None and cfg["output.plot"]:
        write_svg(ctx.path("plot.svg"), *curve, title=kind)
    manifest = {
        "tool": "waverate", "version": __version__, "experiment": kind,
        "config": cfg.echo(), "config_text": cfg.text, "seed": seed, "threads": threads,
        "started": started, "finished": datetime.now(timezone.utc).isoformat(),
        "files": {name: sha256(out / name) for name in ctx.files if (out / name).exists()},
        "fitted": ctx.fitted, "checks": [c.to_dict() for c in ctx.checks],
        "criteria": ctx.criteria, "status": status, "error": error,
        "summary": {"passed": status == EXIT_OK and all(c["verdict"] == "pass" for c in ctx.criteria)},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(to_jsonable(manifest), fh, indent=2)
    return status, manifest


def write_svg(path, x, y, title=""):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "waverate"
    x, y = np.asarray(x, float), np.asarray(y, float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, y, lw=1.2)
    if np.all(x > 0) and np.all(y > 0):
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def report(manifest_paths) -> tuple[int, list[dict]]:
    """One row per acceptance criterion; missing ones are "not run"."""
    found: dict[int, list] = {cid: [] for cid in CRITERIA}
    rows_extra = []
    status = EXIT_OK
    for p in manifest_paths:
        try:
            data = json.loads(Path(p).read_text())
            crits = data["criteria"]
        except (OSError, ValueError, KeyError, TypeError):
            rows_extra.append({"id": "-", "name": str(p), "measured": "", "target": "", "tolerance": "",
                               "verdict": "unreadable"})
            status = EXIT_ANOMALY
            continue
        for c in crits:
            found.setdefault(int(c["id"]), []).append(c)
    rows = []
    for cid, name in CRITERIA.items():
        got = found[cid]
        if not got:
            rows.append({"id": cid, "name": name, "measured": "", "target": "", "tolerance": "",
                         "verdict": "not run"})
            continue
        verdict = "pass" if all(c["verdict"] == "pass" for c in got) else "fail"
        if verdict == "fail":
            status = EXIT_ANOMALY
        rows.append({"id": cid, "name": name,
                     "measured": "; ".join(json.dumps(c["measured"]) for c in got),
                     "target": "; ".join(json.dumps(c["target"]) for c in got),
                     "tolerance": "; ".join(json.dumps(c["tolerance"]) for c in got),
                     "verdict": verdict})
    return status, rows + rows_extra


def format_table(rows) -> str:
    lines = [f"{'id':>3}  {'criterion':<38} {'verdict':<10} measured"]
    for r in rows:
        lines.append(f"{r['id']!s:>3}  {r['name'][:38]:<38} {r['verdict']:<10} {r['measured']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="waverate", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=EXPERIMENTS)
    parser.add_argument("paths", nargs="*", help="config and out dir (or manifests for report)")
    parser.add_argument("--config", help="config file or preset:NAME")
    parser.add_argument("--out", help="output directory (default $WAVERATE_OUT or ./waverate_out)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    out = args.out or os.environ.get("WAVERATE_OUT") or "waverate_out"
    if args.command == "report":
        status, rows = report(args.paths)
        print(format_table(rows))
        Path(out).mkdir(parents=True, exist_ok=True)
        with open(Path(out) / "acceptance.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, ["id", "name", "measured", "target", "tolerance", "verdict"])
            w.writeheader()
            w.writerows(rows)
        return status
    config = args.config
    paths = list(args.paths)
    if config is None and paths:
        config = paths.pop(0)
    if paths and not args.out:
        out = paths.pop(0)
    if paths:
        print(f"unexpected arguments: {paths}", file=sys.stderr)
        return EXIT_PARSE
    if args.threads is not None and args.threads < 1:
        print("threads must be positive", file=sys.stderr)
        return EXIT_VALIDATION
    status, manifest = run(args.command, config, out, args.set, args.seed, args.threads)
    if manifest.get("error"):
        print(manifest["error"], file=sys.stderr)
    for c in manifest.get("criteria", []):
        print(f"criterion {c['id']} ({c['name']}): {c['verdict']}  measured={to_jsonable(c['measured'])}")
    for k, v in manifest.get("fitted", {}).items():
        if isinstance(v, (int, float, str)):
            print(f"{k} = {v}")
    return status


if __name__ == "__main__":
    sys.exit(main())
