import math

import numpy as np
import pytest

from bosekin.collide import (CollisionOperator, CutoffParams, collide, contraction_bound, contraction_integral,
                             get_operator, l_k, q_gain, q_loss, q_plus_bilinear, weak_form_pairing)
from bosekin.errors import GridMismatchError, InputError
from bosekin.grid import DistributionState, VelocityGrid, gaussian, moments
from bosekin.kernel import KernelSpec, post_collision_velocities

INF = math.inf
GRID = VelocityGrid(4.0, 8)


def random_state(rng, grid=GRID, scale=1.0):
    cov = rng.uniform(0.4, 1.2, 3)
    mean = rng.uniform(-0.4, 0.4, 3)
    base = gaussian(grid, scale * rng.uniform(0.2, 2.0), cov, mean).values
    return DistributionState(grid, base * (1.0 + 0.3 * rng.random(grid.shape)))


def test_cutoff_params():
    assert CutoffParams().label == "original"
    assert CutoffParams(INF, 1.0).label == "intermediate"
    assert CutoffParams(2.0, 1.0).label == "cutoff"
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(InputError):
            CutoffParams(bad, 1.0)


def test_zero_state():
    z = DistributionState(GRID, np.zeros(GRID.shape))
    assert np.all(q_plus_bilinear(z, z) == 0)
    r = collide(z)
    assert np.all(r.gain == 0) and np.all(r.loss == 0)
    assert np.all(l_k(z, 1.0) == 0)


def test_result_invariants(rng):
    f = random_state(rng)
    for p in (CutoffParams(), CutoffParams(INF, 0.05), CutoffParams(0.02, 0.05)):
        r = collide(f, p)
        assert np.array_equal(r.net, r.gain - r.loss)
        assert np.all(r.gain >= 0) and np.all(r.loss >= 0)
        assert r.quadrature_meta["nodes"] == 512


def test_bilinear_symmetry(rng):
    f, g = random_state(rng), random_state(rng)
    a, b = q_plus_bilinear(f, g), q_plus_bilinear(g, f)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(a)


def test_self_product_uses_half_sphere_consistently(rng):
    f = random_state(rng)
    op = get_operator(GRID)
    half = op.q_plus_bilinear(f, f)
    full = op.q_plus_bilinear(f, DistributionState(GRID, f.values * (1 + 1e-300)))
    assert np.allclose(half, full, rtol=1e-12)


def test_grid_mismatch():
    f = DistributionState(GRID, np.ones(GRID.shape))
    g = DistributionState(VelocityGrid(4.0, 10), np.ones((10, 10, 10)))
    with pytest.raises(GridMismatchError):
        q_plus_bilinear(f, g)


def test_negative_input_rejected():
    op = get_operator(GRID)
    with pytest.raises(InputError):
        op.collide(-np.ones(GRID.shape))


def test_truncation_inactive_for_small_states(rng):
    f = random_state(rng, scale=1e-3)
    fmax = float(f.values.max())
    a, b = collide(f, CutoffParams()), collide(f, CutoffParams(INF, 2 * fmax))
    assert np.array_equal(a.gain, b.gain) and np.array_equal(a.loss, b.loss)
    assert np.array_equal(l_k(f, 1e6), l_k(f, fmax))


def test_q_k_close_to_q_for_small_states(rng):
    f = random_state(rng, scale=1e-2)
    fmax = float(f.values.max())
    K = fmax / 4
    a, b = collide(f, CutoffParams()), collide(f, CutoffParams(INF, K))
    # the bracket changes by at most 2 (max f - K) relative to 1
    rel = 2 * (fmax - K)
    assert np.all(np.abs(a.gain - b.gain) <= rel * a.gain + 1e-300)
    assert np.all(np.abs(a.loss - b.loss) <= rel * a.loss + 1e-300)


def test_truncation_monotonicity(rng):
    f = random_state(rng)
    fmax = float(f.values.max())
    g0 = q_gain(f, CutoffParams())
    g1 = q_gain(f, CutoffParams(INF, fmax / 3))
    g2 = q_gain(f, CutoffParams(fmax / 2, fmax / 3))
    assert np.all(g2 <= g1 * (1 + 1e-13)) and np.all(g1 <= g0 * (1 + 1e-13))


def test_loss_equals_f_times_frequency(rng):
    f = random_state(rng)
    K = 0.05
    assert np.array_equal(q_loss(f, CutoffParams(INF, K)), f.values * l_k(f, K))


def test_single_occupied_cell_has_no_gain():
    grid = VelocityGrid(4.5, 16)
    vals = np.zeros(grid.shape)
    vals[8, 8, 8] = 1.0
    gain = q_gain(DistributionState(grid, vals))
    assert gain.max() <= 1e-14, f"peak gain {gain.max():.3e}"


def test_single_occupied_cell_gain_is_local():
    grid = VelocityGrid(4.0, 12)
    vals = np.zeros(grid.shape)
    vals[6, 6, 6] = 1.0
    gain = q_gain(DistributionState(grid, vals))
    dist = np.linalg.norm(grid.coords - grid.coords[6, 6, 6], axis=-1)
    assert np.all(gain[dist > 2 * math.sqrt(3) * grid.spacing] == 0.0)


def mc_gain_at(v, samples, rng):
    """Monte-Carlo estimate of int int |v - v*| G(v') G(v*') with G the unit Gaussian."""
    vs = rng.normal(size=(samples, 3))
    pdf = np.exp(-0.5 * np.sum(vs * vs, axis=1)) / (2 * math.pi) ** 1.5
    s = rng.normal(size=(samples, 3))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    vp, vsp = post_collision_velocities(np.broadcast_to(v, vs.shape), vs, s)
    G = lambda x: np.exp(-0.5 * np.sum(x * x, axis=-1)) / (2 * math.pi) ** 1.5
    x = 4 * math.pi * np.linalg.norm(v - vs, axis=1) * G(vp) * G(vsp) / pdf
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(samples))


def closed_form_gain(v):
    from scipy.special import erf
    r = float(np.linalg.norm(v))
    mean_speed = math.sqrt(2 / math.pi) * math.exp(-r * r / 2) + (r + 1 / r) * erf(r / math.sqrt(2))
    return 4 * math.pi * math.exp(-r * r / 2) / (2 * math.pi) ** 1.5 * mean_speed


def test_monte_carlo_oracle_matches_closed_form(rng):
    v = np.array([0.28125] * 3)
    est, se = mc_gain_at(v, 10**6, rng)
    assert abs(est - closed_form_gain(v)) <= 3 * se


@pytest.mark.slow
def test_grid_gain_matches_monte_carlo(rng):
    grid = VelocityGrid(4.5, 16)
    f = gaussian(grid, 1.0, (1.0, 1.0, 1.0))
    q = q_plus_bilinear(f, f)
    v = grid.coords[8, 8, 8]
    est, se = mc_gain_at(v, 10**6, rng)
    assert abs(q[8, 8, 8] - est) <= 3 * se, f"grid {q[8, 8, 8]:.6f} vs MC {est:.6f} +- {se:.1e}"


def test_weak_form_conserved_quantities(rng):
    f = random_state(rng)
    for p in (CutoffParams(), CutoffParams(INF, 0.05), CutoffParams(0.05, 0.05)):
        assert weak_form_pairing(f, "one", p) == 0.0
    m = moments(f)
    # the discrete collision conserves momentum and energy pair by pair
    assert abs(weak_form_pairing(f, "energy")) <= 1e-12 * m.m0 * m.l1s[2] * 4 * math.pi
    for i in range(3):
        assert abs(weak_form_pairing(f, ("component", i))) <= 1e-12 * m.m0 * m.l1s[1] * 4 * math.pi


def reference_sums(f, grid, quad, n_cut, k_cut, phi):
    """Brute-force full-sphere evaluation of the discrete gain, loss frequency and weak form."""
    from bosekin.grid import interpolate
    v = grid.coords.reshape(-1, 1, 1, 3)
    vs = grid.coords.reshape(1, -1, 1, 3)
    sig = quad.nodes.reshape(1, 1, -1, 3)
    vp, vsp = post_collision_velocities(v, vs, sig)
    g = (v - vs)[..., 0, :]
    B = np.minimum(np.linalg.norm(g, axis=-1), n_cut)[..., None] * quad.weights * grid.cell_volume
    fv = f.reshape(-1, 1, 1)
    fs = f.reshape(1, -1, 1)
    fp, fsp = interpolate(f, grid, vp), interpolate(f, grid, vsp)
    gain = np.sum(B * np.minimum(fp, n_cut) * np.minimum(fsp, n_cut) * (1 + np.minimum(fv, k_cut)
                                                                       + np.minimum(fs, k_cut)), axis=(1, 2))
    rate = np.sum(B * np.minimum(fs, n_cut) * (1 + np.minimum(fp, k_cut) + np.minimum(fsp, k_cut)), axis=(1, 2))
    ph = phi.reshape(-1)
    dphi = interpolate(phi, grid, vp) + interpolate(phi, grid, vsp) - ph[:, None, None] - ph[None, :, None]
    weak = 0.5 * np.sum(B * np.minimum(fv, n_cut) * np.minimum(fs, n_cut)
                        * (1 + np.minimum(fp, k_cut) + np.minimum(fsp, k_cut)) * dphi) * grid.cell_volume
    shape = grid.shape
    return gain.reshape(shape), rate.reshape(shape), weak


@pytest.mark.parametrize("params", [CutoffParams(), CutoffParams(INF, 0.03), CutoffParams(0.04, 0.03)],
                         ids=["original", "intermediate", "cutoff"])
def test_compiled_loops_match_reference(rng, params):
    grid = VelocityGrid(3.0, 6)
    f = random_state(rng, grid)
    phi = rng.random(grid.shape)
    op = CollisionOperator(grid, KernelSpec.hard_sphere())
    gain, rate, weak = reference_sums(f.values, grid, op.quadrature, params.n, params.K, phi)
    r = op.collide(f, params)
    assert np.allclose(r.gain, gain, rtol=1e-12, atol=0)
    assert np.allclose(r.loss_rate, rate, rtol=1e-12, atol=0)
    assert op.weak_form_pairing(f, phi, params) == pytest.approx(weak, rel=1e-11)


def test_weak_form_rejects_unknown_phi(rng):
    with pytest.raises(InputError):
        weak_form_pairing(random_state(rng), "entropy")


def test_weak_form_third_moment_obeys_envelope_rate(rng):
    f = gaussian(GRID, 1.0, (0.8, 0.8, 0.8))
    K = 1 / 14
    m = moments(f)
    rate = weak_form_pairing(f, ("bracket", 3.0), CutoffParams(INF, K))
    bound = (1 + 2 * K) * 2**3.5 * 4 * math.pi * m.l1s[2] ** 2
    assert 0 < rate <= bound


def test_contraction_estimate(rng):
    params = CutoffParams(0.05, 1 / 14)
    for _ in range(3):
        f, g = random_state(rng), random_state(rng)
        assert contraction_integral(f, g, params) <= 1.05 * contraction_bound(f, g, params)
    f = random_state(rng)
    assert contraction_integral(f, f, params) == 0.0
    with pytest.raises(InputError):
        contraction_bound(f, f, CutoffParams(INF, 1.0))


def test_kernel_override_and_yukawa(rng):
    f = random_state(rng)
    hard = CollisionOperator(GRID, KernelSpec.hard_sphere())
    custom = CollisionOperator(GRID, KernelSpec.hard_sphere(), kernel_fn=lambda g, s: 2.0 * np.linalg.norm(g, axis=-1)
                               + 0.0 * s[..., 0])
    assert np.allclose(custom.q_gain(f), 2.0 * hard.q_gain(f), rtol=1e-13)
    yk = CollisionOperator(GRID, KernelSpec.yukawa())
    gy, gh = yk.q_gain(f), hard.q_gain(f)
    assert np.all(gy <= 4.0 * gh * (1 + 1e-12))
