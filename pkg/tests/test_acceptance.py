"""Acceptance criteria, one test and one PASS/FAIL line each.

Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``. The criteria with long runtimes carry
the ``slow`` marker; deselect them with ``-m "not slow"``.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from bosekin import bounds, verify
from bosekin.collide import CutoffParams, get_operator
from bosekin.grid import AngularQuadrature, VelocityGrid, gaussian, moments, temperature_ratio
from bosekin.kernel import KernelSpec
from bosekin.march import DUHAMEL, PICARD, SolverConfig, picard_step, simulate

HARD = KernelSpec.hard_sphere()
K3 = bounds.k_star(3.0)
SEED = 20240607


def report(capsys, number, title, ok, detail):
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_01_c0_quadrature(capsys):
    t0 = time.perf_counter()
    value = bounds.c0_quadrature()
    elapsed = time.perf_counter() - t0
    err = abs(value - (22 * math.sqrt(2) - 31) * math.pi / 5)
    report(capsys, 1, "C0 quadrature", err <= 1e-8 and elapsed < 1.0,
           f"C0={value:.15f} |err|={err:.1e} (tol 1e-8) time={elapsed:.3f}s (limit 1s)")


def test_02_inequality_suites(capsys):
    t0 = time.perf_counter()
    cases = [verify.SUITES[name](trials=10**6, seed=SEED)
             for name in ("lemma_minmax", "povzner", "truncation", "radial_power_mean")]
    elapsed = time.perf_counter() - t0
    worst = {c.name: c.worst_margin for c in cases}
    ok = all(m >= -1e-12 for m in worst.values()) and elapsed < 120
    detail = ", ".join(f"{k}={v:.2e}" for k, v in worst.items())
    report(capsys, 2, "inequality suites (10^6 trials each)", ok,
           f"worst margins {detail} (tol -1e-12), time={elapsed:.1f}s (limit 120s)")


def test_03_operator_identities(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    grid = VelocityGrid(4.5, 12)
    op = get_operator(grid, HARD)
    f = verify.random_state(rng, grid).values
    g = verify.random_state(rng, grid).values
    a, b = op.q_plus_bilinear(f, g), op.q_plus_bilinear(g, f)
    sym = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    samples = 10**6
    mc = verify.check_change_of_variables(samples=samples, seed=SEED)
    mc["exchange_prime"] = verify.suite_exchange_prime(samples=samples, seed=SEED)
    mc["gaussian_closed_form"] = verify.suite_change_of_variables_gaussian(samples=samples, seed=SEED)
    elapsed = time.perf_counter() - t0
    ok = sym <= 1e-12 and all(c.passed for c in mc.values()) and elapsed < 300
    detail = ", ".join(f"{k}: |diff|/3se={1 - c.worst_margin:.2f}" for k, c in mc.items())
    report(capsys, 3, "operator identities", ok,
           f"bilinear asymmetry {sym:.1e} (tol 1e-12); {samples} samples: {detail}; time={elapsed:.0f}s")


@pytest.mark.slow
def test_04_gain_bounds(capsys):
    rng = np.random.default_rng(SEED)
    grid = VelocityGrid(4.5, 12)
    worst = {}
    for _ in range(20):
        f, g, h = (verify.random_state(rng, grid) for _ in range(3))
        margins = verify.check_gain_bounds(f, slack=1.05)
        margins.update(verify.check_iterated_gain_bounds(f, g, h, slack=1.05))
        for k, v in margins.items():
            worst[k] = min(worst.get(k, math.inf), v)
    ok = all(v >= 0 for v in worst.values())
    report(capsys, 4, "gain bounds on N=12, 20 random states, slack 1.05", ok,
           "worst relative margins " + ", ".join(f"{k}={v:.3f}" for k, v in worst.items()))


@pytest.fixture(scope="module")
def duhamel_run():
    """Unit-mass centered anisotropic Gaussian, N=16, 32 directions, dt=1/64 to t=1."""
    grid = VelocityGrid(4.5, 16)
    quad = AngularQuadrature.gauss_legendre(4, 8)
    f0 = gaussian(grid, 1.0, (1.0, 0.8, 0.6))
    cfg = SolverConfig(DUHAMEL, dt_output=1 / 16, t_end=1.0, dt=1 / 64,
                       monitors=("moment_envelope", "l13_uniform"))
    op = get_operator(grid, HARD, quad)
    return f0, simulate(f0, HARD, CutoffParams(math.inf, K3), cfg, op)


def _max_drift(rec):
    mass, mom, energy = rec.conservation_drift
    return max(abs(mass), abs(energy)), abs(mom)


@pytest.mark.slow
def test_05_conservation(capsys, duhamel_run):
    f0, res = duhamel_run
    m0 = moments(f0)
    end = res.records[-1]
    mass, mom, energy = end.conservation_drift
    # same datum, step and time on the refined grid; drift is compared at the first output time
    fine_grid = VelocityGrid(4.5, 24)
    fine0 = gaussian(fine_grid, 1.0, (1.0, 0.8, 0.6))
    cfg = SolverConfig(DUHAMEL, dt_output=1 / 16, t_end=1 / 16, dt=1 / 64, monitors=())
    fine = simulate(fine0, HARD, CutoffParams(math.inf, K3), cfg,
                    get_operator(fine_grid, HARD, AngularQuadrature.gauss_legendre(4, 8)))
    coarse_drift = _max_drift(res.records[1])[0]
    fine_drift = _max_drift(fine.records[-1])[0]
    ratio = coarse_drift / fine_drift if fine_drift > 0 else math.inf
    ok = abs(mass) <= 1e-3 and abs(energy) <= 1e-3 and mom <= 1e-3 and ratio >= 1.5
    report(capsys, 5, "conservation, N=16, dt=1/64, t=1", ok,
           f"M0={m0.m0:.4g}: drift mass={mass:.3e} energy={energy:.3e} momentum/sqrt(M0 M2)={mom:.1e} "
           f"(tol 1e-3); per unit mass and time: mass={mass / m0.m0:.3f} energy={energy / m0.m0:.3f}; "
           f"refinement N=16->24 at t=1/16: {coarse_drift:.3e} -> {fine_drift:.3e}, ratio {ratio:.2f} (need 1.5)")


def test_06_picard_contraction(capsys):
    rng = np.random.default_rng(SEED)
    grid = VelocityGrid(4.5, 8)
    op = get_operator(grid, HARD)
    params = CutoffParams(1.0, K3)
    worst = 0.0
    iterations = []
    for _ in range(10):
        f = gaussian(grid, 10.0 ** rng.uniform(-2, -1), rng.uniform(0.5, 1.5, 3), rng.uniform(-0.3, 0.3, 3))
        _, rep = picard_step(f, params, SolverConfig(PICARD), op)
        worst = max([worst] + rep.ratios)
        iterations.append(rep.iterations)
    report(capsys, 6, "Picard contraction on [0, T_n], 10 random small data", worst <= 0.55,
           f"largest successive residual ratio {worst:.3e} (limit 0.55), iterations {iterations}")


@pytest.mark.slow
def test_07_moment_envelope(capsys, duhamel_run):
    _, res = duhamel_run
    env = min(r.bound_flags["moment_envelope"].margin for r in res.records)
    uni = min(r.bound_flags["l13_uniform"].margin for r in res.records)
    ok = all(r.bound_flags["moment_envelope"].passed and r.bound_flags["l13_uniform"].passed for r in res.records)
    report(capsys, 7, "moment envelope and uniform L^1_3 bound (x1.05)", ok,
           f"{len(res.records)} output times; smallest headroom envelope={env:.3e}, uniform={uni:.3e}")


def test_08_coercivity(capsys):
    rng = np.random.default_rng(SEED)
    grid = VelocityGrid(4.5, 16)
    worst = math.inf
    for _ in range(4):
        f = gaussian(grid, 10.0 ** rng.uniform(-2, 0.5), rng.uniform(0.4, 1.5, 3))
        K = float(10.0 ** rng.uniform(-2, 0))
        worst = min(worst, float(np.min(verify.check_coercivity(f, K, HARD, slack=0.05))))
    report(capsys, 8, "coercivity L_K >= 0.95 x floor, centered Gaussians N=16", worst >= 0,
           f"min over nodes of L_K/(floor<v>) - 0.95 = {worst:.3e}")


@pytest.mark.slow
def test_09_theorem_end_to_end(capsys):
    grid = VelocityGrid(4.5, 12)
    g0 = gaussian(grid, 1.0, (1.0, 0.8, 0.6))
    lam = bounds.bisect_scale(moments(g0), HARD)
    f0 = g0.scaled(lam)
    m0 = moments(f0)
    cond = bounds.evaluate_condition(m0, HARD)
    cfg = SolverConfig(DUHAMEL, dt_output=0.5, t_end=5.0, dt=1 / 8,
                       monitors=("linf_ceiling", "predicted_sup", "temperature_floor"))
    res = simulate(f0, HARD, CutoffParams(math.inf, K3), cfg)
    sup = max(r.linf for r in res.records)
    tmin = min(temperature_ratio(r.moments) for r in res.records)
    floor = bounds.temperature_floor(HARD)
    pred = bounds.predicted_sup(m0, HARD)
    ok = cond.condition_holds and sup <= K3 and sup <= pred and tmin >= floor and res.all_passed
    report(capsys, 9, "theorem end to end, beta=3 hard sphere, K*=1/14, t=5", ok,
           f"lambda={lam:.3e} (LHS/RHS={cond.condition_lhs / cond.condition_rhs:.6f}); "
           f"sup f={sup:.3e} <= K*={K3:.4f} and <= predicted {pred:.3e}; "
           f"min temperature ratio {tmin:.3e} >= floor {floor:.3e}")


def test_10_k_star(capsys):
    errs = {beta: abs(bounds.k_star_search(beta) - 1 / (4 * beta + 2)) for beta in (3, 4, 6, 10)}
    report(capsys, 10, "K* optimality grid search", all(e <= 1e-10 for e in errs.values()),
           ", ".join(f"beta={b}: |err|={e:.1e}" for b, e in errs.items()) + " (tol 1e-10)")


@pytest.mark.slow
def test_11_performance(capsys):
    env = dict(os.environ, NUMBA_NUM_THREADS="8")
    proc = subprocess.run([sys.executable, "-m", "bosekin.cli", "bench", "--N", "16", "--compare", "8"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(proc.stdout)
    seconds = doc["runs"]["8"]["seconds"]
    speedup = doc["speedup"]
    report(capsys, 11, "Q_K on N=16^3 with 32 directions, 8 threads", seconds < 60 and speedup >= 4,
           f"time={seconds:.2f}s (limit 60s), speedup over 1 thread={speedup:.2f} (need 4), "
           f"cores available={doc['cpu_count']}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
