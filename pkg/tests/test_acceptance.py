"""The thirteen acceptance criteria, each run through the CLI runner at its stated tolerance.

Every test prints one ``criterion N (name): PASS|FAIL`` line. The verdict is
recomputed here from the written artefacts and fitted values rather than
taken from the runner's own verdict, and both must agree.
"""

import csv
import math
import time

import pytest

from waverate.cli import CRITERIA, run

pytestmark = pytest.mark.acceptance


def _run(kind, preset, out, overrides=()):
    t0 = time.perf_counter()
    status, man = run(kind, f"preset:{preset}", out, list(overrides))
    return status, man, time.perf_counter() - t0


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _verdicts(man, cid):
    return [c["verdict"] for c in man["criteria"] if c["id"] == cid]


@pytest.fixture
def announce(capsys):
    def emit(cid, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {cid} ({CRITERIA[cid]}): {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_criterion_01_conservative(tmp_path, announce):
    status, man, dt = _run("simulate", "conservative", tmp_path)
    f = man["fitted"]
    ok = status == 0 and f["norm_drift_eig"] <= 1e-9 and f["norm_drift_stepped"] <= 1e-6 and dt < 10
    ok &= _verdicts(man, 1) == ["pass"]
    announce(1, ok, f"eig drift {f['norm_drift_eig']:.2e}, stepped drift {f['norm_drift_stepped']:.2e}, {dt:.1f}s")


def test_criterion_02_dissipation_identity(tmp_path, announce):
    status, man, dt = _run("simulate", "energy_identity", tmp_path)
    f = man["fitted"]
    rows = _rows(tmp_path / "trajectory.csv")
    ok = status == 0 and f["energy_residual_rel"] <= 1e-5 and float(rows[-1]["t"]) == pytest.approx(50)
    ok &= dt < 300 and _verdicts(man, 2) == ["pass"]
    announce(2, ok, f"max |residual|/E(0) = {f['energy_residual_rel']:.2e}, {dt:.1f}s")


def test_criterion_03_gearhart_pruss(tmp_path, announce):
    status, man, dt = _run("decay", "gearhart_pruss", tmp_path)
    f = man["fitted"]
    gap = abs(f["fitted_rate"] + f["spectral_abscissa"]) / abs(f["spectral_abscissa"])
    ok = status == 0 and math.isfinite(f["resolvent_sup"]) and gap <= 0.1 and dt < 60
    ok &= _verdicts(man, 3) == ["pass"]
    announce(3, ok, f"rate {f['fitted_rate']:.5f} vs {-f['spectral_abscissa']:.5f} (gap {gap:.1e}), "
                    f"sup {f['resolvent_sup']:.3g}, {dt:.1f}s")


@pytest.mark.parametrize("beta", [2, 1])
def test_criterion_04_open_book_resolvent(tmp_path, announce, beta):
    status, man, dt = _run("resolvent", f"resolvent_beta{beta}", tmp_path)
    f = man["fitted"]
    target = beta / (beta + 2)
    mus = [float(r["mu"]) for r in _rows(tmp_path / "resolvent.csv")]
    rel = abs(f["fitted_exponent"] - target) / target
    ok = status == 0 and rel <= 0.2 and min(mus) >= 4 and max(mus) <= 64 and dt < 900
    ok &= _verdicts(man, 4) == ["pass"]
    announce(4, ok, f"beta={beta}: exponent {f['fitted_exponent']:.4f} vs {target:.4f} ({rel:.1%}), {dt:.1f}s")


def test_criterion_05_operator_decay(tmp_path, announce):
    status, man, dt = _run("decay", "operator_decay", tmp_path)
    f = man["fitted"]
    rel = abs(f["fitted_exponent"] - 2) / 2
    ok = status == 0 and rel <= 0.25 and f["window_rule"] and len(f["fit_window"]) == 2 and dt < 1200
    ok &= _verdicts(man, 5) == ["pass"]
    announce(5, ok, f"exponent {f['fitted_exponent']:.4f} vs 2 on window "
                    f"[{f['fit_window'][0]:.3g}, {f['fit_window'][1]:.3g}], {dt:.1f}s")


def test_criterion_06_nonlinear_rate(tmp_path, announce):
    status, man, dt = _run("decay", "nonlinear_decay", tmp_path)
    f = man["fitted"]
    rel = abs(f["fitted_rate"] - 2) / 2
    ok = status == 0 and f["target_exponent"] == 2 and rel <= 0.3 and dt < 1800
    ok &= _verdicts(man, 6) == ["pass"]
    announce(6, ok, f"exponent {f['fitted_rate']:.4f} vs 2 ({rel:.1%}), {dt:.1f}s")


def test_criterion_07_certified_bounds(tmp_path, announce):
    status, man, dt = _run("resolvent", "certified_bounds", tmp_path)
    rows = _rows(tmp_path / "certificates.csv")
    bounds = sum(r["bound_ok"] == "1" for r in rows)
    proj = sum(r["projected_ok"] == "1" for r in rows)
    M_ok = all(float(r["M"]) >= 3 * float(r["g"]) ** 2 for r in rows)
    ok = status == 0 and len(rows) == 50 and bounds == proj == 50 and M_ok and dt < 600
    ok &= _verdicts(man, 7) == ["pass"]
    announce(7, ok, f"{bounds}/50 bounds, {proj}/50 projected, {dt:.1f}s")


def test_criterion_08_witness(tmp_path, announce):
    status, man, dt = _run("resolvent", "witness", tmp_path)
    rows = {r["case"]: r for r in _rows(tmp_path / "witness.csv")}
    randoms = [r for k, r in rows.items() if k.startswith("random_")]
    ok = (status == 0 and float(rows["kernel"]["sigma_min"]) < 1e-10
          and float(rows["observed"]["sigma_min"]) >= 1e-10 and len(randoms) == 20
          and all(float(r["sigma_min"]) >= 1e-10 for r in randoms) and dt < 1)
    ok &= _verdicts(man, 8) == ["pass"]
    announce(8, ok, f"kernel sigma_min {float(rows['kernel']['sigma_min']):.1e}, "
                    f"20 random cases invertible, {dt:.2f}s")


def test_criterion_09_pseudoconvexity(tmp_path, announce):
    s1, peanut, dt1 = _run("foliation", "peanut_foliation", tmp_path / "p")
    s2, torus, dt2 = _run("foliation", "torus_foliation", tmp_path / "t")
    f = peanut["fitted"]
    ok = (s1 == 0 and s2 == 0 and f["pass_fraction"] == 1.0 and f["closed_form_error"] <= 1e-12
          and torus["fitted"]["strictly_pseudoconvex"] is False and max(dt1, dt2) < 1)
    ok &= _verdicts(peanut, 9) == ["pass"] and _verdicts(torus, 9) == ["pass"]
    announce(9, ok, f"peanut {f['pass_fraction']:.0%} positive, closed-form error "
                    f"{f['closed_form_error']:.1e}; torus planes reported failing, {dt1 + dt2:.2f}s")


def test_criterion_10_peanut_geodesics(tmp_path, announce):
    status, man, dt = _run("rays", "peanut_rays", tmp_path)
    f = man["fitted"]
    rows = _rows(tmp_path / "escape.csv")
    eps = sorted(float(r["epsilon"]) for r in rows)
    ok = (status == 0 and f["equator_drift"] <= 1e-8 and f["escape_r2"] >= 0.99
          and eps[0] == pytest.approx(1e-8) and eps[-1] == pytest.approx(1e-2) and dt < 30)
    ok &= _verdicts(man, 10) == ["pass"]
    announce(10, ok, f"equator drift {f['equator_drift']:.1e}, R^2 {f['escape_r2']:.5f}, {dt:.1f}s")


def test_criterion_11_ikawa_and_billiard(tmp_path, announce):
    total = 0.0
    results = {}
    for preset in ("ikawa_equilateral", "ikawa_collinear", "ikawa_two_disk"):
        status, man, dt = _run("ikawa", preset, tmp_path / preset)
        total += dt
        results[preset] = (status, {r["condition"]: r for r in _rows(tmp_path / preset / "ikawa.csv")}, man)
    status, bil, dt = _run("rays", "billiard_two_disk", tmp_path / "billiard")
    total += dt
    eq, col, two = (results[p][1] for p in ("ikawa_equilateral", "ikawa_collinear", "ikawa_two_disk"))
    kl = results["ikawa_equilateral"][2]["fitted"]["d"]["details"]["kappa_L"]
    ok = (all(r[0] == 0 for r in results.values()) and status == 0
          and all(r["pass"] == "1" for r in eq.values()) and kl == pytest.approx(8.0, abs=1e-12) and kl > 3
          and col["c"]["pass"] == "0" and two["d"]["status"] == "not applicable"
          and bil["fitted"]["period_two_bounces"] == 10_000 and total < 5)
    ok &= all(_verdicts(r[2], 11) == ["pass"] for r in results.values()) and _verdicts(bil, 11) == ["pass"]
    announce(11, ok, f"kappa*L = {kl:.12g}, collinear fails (c), two-disk (d) not applicable, "
                     f"period-2 ray {bil['fitted']['period_two_bounces']} bounces, {total:.1f}s")


def test_criterion_12_convolution(tmp_path, announce):
    out = {}
    total = 0.0
    for preset in ("convolution_polynomial", "convolution_stretched", "convolution_divergent"):
        status, man, dt = _run("convolution", preset, tmp_path / preset)
        total += dt
        rows = _rows(tmp_path / preset / "convolution.csv")
        late = [(float(r["t"]), float(r["running_sup"])) for r in rows]
        lo = next(s for t, s in late if t >= 1e3)
        hi = max(s for t, s in late if t <= 1e4)
        out[preset] = (status, man["fitted"]["verdict"], (hi - lo) / hi, man)
    ok = all(v[0] == 0 for v in out.values()) and total < 10
    ok &= out["convolution_polynomial"][1] == "bounded" and out["convolution_polynomial"][2] <= 1e-3
    ok &= out["convolution_stretched"][1] == "bounded" and out["convolution_stretched"][2] <= 1e-3
    ok &= out["convolution_divergent"][1] == "divergent"
    ok &= all(_verdicts(v[3], 12) == ["pass"] for v in out.values())
    announce(12, ok, f"sup drift on [1e3, 1e4]: polynomial {out['convolution_polynomial'][2]:.1e}, "
                     f"stretched {out['convolution_stretched'][2]:.1e}; alpha=0.5 divergent, {total:.1f}s")


def test_criterion_13_gcc(tmp_path, announce):
    status, man, dt = _run("rays", "gcc_open_book", tmp_path)
    trapped = man["fitted"]["trapped"]
    dev = max((max(abs(r[0]), abs(r[2])) for r in trapped), default=math.inf)
    ok = status == 0 and man["config"]["numeric"]["n_rays"] == 10_000 and dev <= 1e-3 and dt < 30
    ok &= man["fitted"]["trapped_max_deviation"] <= 1e-3 and _verdicts(man, 13) == ["pass"]
    announce(13, ok, f"{man['fitted']['n_trapped']} trapped rays, max deviation {dev:.1e}, {dt:.1f}s")
