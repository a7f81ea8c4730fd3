"""Acceptance criteria at full scale.

Every test prints one ``PASS``/``FAIL`` line (uncaptured) and then asserts.
Tolerances are fixed; a failing criterion stays failing.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from kexclusion.clocks import RateSpec
from kexclusion.experiments import (
    batch_flux_check,
    estimate_flux_current,
    estimate_g,
    flux_bounds_check,
    restart_lln,
    rarefaction_fan,
    second_class_lln,
)
from kexclusion.lattice import INF, ProfileSpec
from kexclusion.macroflux import (
    FluxFunction,
    HopfLaxField,
    conjugate,
    corner_flux,
    current_compare,
    flux_from_g,
    riemann_solution,
    standing_shock,
)
from kexclusion.verify import VerifyConfig, run_suite

pytestmark = pytest.mark.acceptance

K1 = FluxFunction.k1()


@pytest.fixture
def report(capsys):
    def emit(tag: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {tag}: {detail}")
        return ok
    return emit


def _suite(name, Ks, instances=200, seed=20240):
    return run_suite(name, VerifyConfig(instances=instances, Ks=Ks, seed=seed))


def test_ac01_envelope_identity(report):
    t0 = time.perf_counter()
    r = _suite("envelope", (1, 2, 3, INF))
    dt = time.perf_counter() - t0
    ok = r.instances == 800 and not r.failures and dt < 60
    assert report("AC1 envelope identity", ok,
                  f"{r.instances} instances, {len(r.failures)} failures, {dt:.1f}s"), \
        r.failures[:3]


def test_ac02_three_way_second_class(report):
    r = _suite("second_class", (1, 2, 3))
    ok = r.instances == 600 and not r.failures
    assert report("AC2 second-class three-way agreement", ok,
                  f"{r.instances} instances, {len(r.failures)} discrepancies"), r.failures[:3]


def test_ac03_height_occupancy_and_conservation(report):
    r = _suite("conservation", (1, 2, 3, INF))
    ok = r.instances == 800 and not r.failures
    assert report("AC3 eta/z equivalence and conservation", ok,
                  f"{r.instances} instances, {len(r.failures)} failures"), r.failures[:3]


def test_ac04_flux_closed_forms(report):
    a = estimate_flux_current(0.5, 1, 10_000, 1000.0, 10, seed=401, expected=0.25, tol=0.01)
    b = estimate_flux_current(1.0, INF, 10_000, 1000.0, 10, seed=402, expected=0.5, tol=0.01)
    ok = a.passed and b.passed
    assert report("AC4 flux closed forms", ok,
                  f"f1(0.5)={a.estimates['f_hat']:.4f}+-{a.stderr['f_hat']:.4f}, "
                  f"finf(1)={b.estimates['f_hat']:.4f}+-{b.stderr['f_hat']:.4f}")


def test_ac05_k2_bounds_and_symmetry(report):
    rhos = np.linspace(0.0, 1.0, 9)
    rep = flux_bounds_check(2, rhos, 1000, 2000.0, 10, seed=501, sigmas=3.0)
    bad = [k for k, v in rep.checks.items() if not v]
    ok = rep.passed
    assert report("AC5 K=2 bounds, symmetry and monotonicity", ok,
                  f"{len(rep.checks)} checks, failing: {bad or 'none'}"), bad


def test_ac06_g_estimation(report):
    a = estimate_g(1, [0.0], 1000, 1.0, 20, seed=601)
    b = estimate_g(INF, [0.25], 1000, 1.0, 20, seed=602)
    ga, gb = a.estimates["g(0)"], b.estimates["g(0.25)"]
    ok = abs(ga - 0.25) <= 0.02 and abs(gb - 0.25) <= 0.02
    assert report("AC6 g-hat estimation", ok, f"g1(0)={ga:.4f}, ginf(0.25)={gb:.4f}")


def _field(profile, f):
    return HopfLaxField.from_profile(profile, conjugate(f), dy=1e-4)


def test_ac07_hopf_lax_identities(report):
    errs = {}
    const = []
    for f, rho in [(K1, 0.3), (FluxFunction.kinf(), 1.0), (corner_flux(), 0.7)]:
        fl = _field(ProfileSpec.constant(rho), f)
        for x in (-0.6, 0.0, 0.5):
            for t in (0.5, 1.0):
                const.append(abs(fl.u(x, t) - (rho * x - t * float(f(rho)))))
    errs["constant"] = max(const)
    wedge = []
    for f in (K1, corner_flux()):
        g = conjugate(f)
        fl = _field(ProfileSpec(((-INF, 0.0, float(f.K)), (0.0, INF, 0.0))), f)
        for x in np.linspace(-1.5, 1.5, 13):
            wedge.append(abs(fl.u(x, 1.0) + float(g(x))))
    errs["wedge"] = max(wedge)
    semi = []
    prof = ProfileSpec(((-INF, -0.3, 0.1), (-0.3, 0.2, 0.9), (0.2, INF, 0.4)))
    fl = _field(prof, K1)
    later = fl.restarted(0.5, (-3.0, 3.0))
    for x in np.linspace(-0.8, 0.8, 9):
        semi.append(abs(later.u(x, 1.0) - fl.u(x, 1.0)))
    errs["semigroup"] = max(semi)
    rt = []
    for rho, vals, K in [([0, 1, 2], [0, 0.5, 0], 2), ([0, 0.5, 2, 3], [0, 0.6, 0.9, 0], 3),
                         ([0, 1], [0, 0.3], 1)]:
        f = FluxFunction.tabulated(rho, vals, K)
        back = flux_from_g(conjugate(f))
        rt.append(float(np.max(np.abs(back(np.asarray(rho, float)) - vals))))
    errs["round_trip"] = max(rt)
    ok = (errs["constant"] <= 1e-3 and errs["wedge"] <= 1e-3 and errs["semigroup"] <= 2e-3
          and errs["round_trip"] < 1e-9)
    assert report("AC7 Hopf-Lax identities", ok,
                  ", ".join(f"{k}={v:.2e}" for k, v in errs.items())), errs


def test_ac08_corner_flux(report):
    worst, undefined, num = 0.0, True, 0.0
    for s in (0.0, 0.4):
        t = 1.0
        fl = _field(ProfileSpec.constant(1.0), corner_flux())
        if s > 0:
            fl = fl.restarted(s, (-4.0, 4.0))
        for x in (-0.5, 0.0, 0.3):
            ym, yp = fl.minimizers(x, t)
            worst = max(worst, abs(ym - (x - (t - s))), abs(yp - (x + (t - s))))
            d = fl.density(x, t)
            undefined &= d.rho_minus is None and d.rho_plus is None
            num = max(num, abs(d.rho_numeric - 1.0))
        for b in (-0.2, 0.0, 0.5):
            xm, xp = fl.characteristics(b, t)
            worst = max(worst, abs(xm - (b - (t - s))), abs(xp - (b + (t - s))))
    ok = worst <= 1e-4 and undefined and num <= 1e-3
    assert report("AC8 corner flux", ok,
                  f"max y/x error {worst:.1e}, rho+- undefined={undefined}, "
                  f"|rho_numeric-1|={num:.1e}")


def test_ac09_current_comparator(report):
    fl = _field(ProfileSpec.riemann(0.8, 0.2), K1)
    res = [current_compare(fl, K1, standing_shock(0.8, 0.2), 0.0, t) for t in (1.0, 2.0)]
    ok = all(abs(r.lambda_current - 0.16 * t) <= 0.01 * 0.16 * t
             and abs(r.rho_current - 0.25 * t) <= 0.01 * 0.25 * t
             and r.verdict == "maximal current holds" for r, t in zip(res, (1.0, 2.0)))
    eq = current_compare(fl, K1, riemann_solution(K1, 0.8, 0.2), 0.0, 1.0)
    ok &= eq.verdict == "equal"
    assert report("AC9 current comparator", ok,
                  f"lambda={res[0].lambda_current:.4f}, rho={res[0].rho_current:.4f}, "
                  f"verdict '{res[0].verdict}', lambda=rho verdict '{eq.verdict}'")


@pytest.mark.slow
def test_ac10_riemann_shock(report):
    a = second_class_lln(ProfileSpec.riemann(0.2, 0.8), 1, 0.0, 2000, 1.0, 100, seed=1001)
    b = second_class_lln(ProfileSpec.riemann(0.1, 0.5), 1, 0.0, 2000, 1.0, 100, seed=1002)
    speed = b.estimates["mean"]
    ok = (a.passed and abs(a.estimates["x_bt"]) < 1e-9 and abs(speed - 0.4) <= 0.05
          and b.passed)
    assert report("AC10 Riemann shock tracking", ok,
                  f"standing: {a.estimates['fraction_inside']:.2f} within 0.05; "
                  f"moving: speed {speed:.4f}, {b.estimates['fraction_inside']:.2f} "
                  "within 0.05 of 0.4")


@pytest.mark.slow
def test_ac11_rarefaction_fan(report):
    rep = rarefaction_fan(0.8, 0.2, 1000, 1.0, 500, seed=1101)
    ok = rep.passed
    assert report("AC11 rarefaction fan", ok,
                  f"KS={rep.estimates['ks']:.3f}, outside={rep.estimates['outside_count']}"
                  f"/500, max overshoot {rep.estimates['max_overshoot']:.3f}"), rep.checks


@pytest.mark.slow
def test_ac12_restart_tracking(report):
    rep = restart_lln(ProfileSpec.riemann(0.8, 0.2), 1, 0.0, 2000, 0.5, 1.0, 100, seed=1201,
                      tol=0.07, min_fraction=0.9)
    ok = rep.passed
    assert report("AC12 restart tracking", ok,
                  f"{rep.estimates['fraction_within']:.2f} within 0.07, "
                  f"max characteristic gap {rep.estimates['max_char_gap']:.1e}")


@pytest.mark.slow
def test_ac13_batch_flux(report):
    rep = batch_flux_check(RateSpec.batch({2: 1.0}), 1.0, 10_000, 1000.0, 10, seed=1301,
                           tol=0.015)
    ok = rep.passed
    assert report("AC13 batch flux", ok,
                  f"f_hat={rep.estimates['f_hat']:.4f}+-{rep.stderr['f_hat']:.4f} vs "
                  f"{rep.estimates['expected']:.4f}")


def test_ac14_k1_monitor(report):
    r = _suite("k1", (1, 2, 3))
    ok = r.instances >= 200 and not r.failures
    assert report("AC14 k1 monotone", ok,
                  f"{r.instances} instances, {len(r.failures)} violations"), r.failures[:3]
