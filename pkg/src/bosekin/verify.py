"""Randomized property suites for the elementary inequalities and identities.

Every suite draws from a fixed-seed generator, reduces its trials to a worst
relative margin and reports a :class:`PropertyCase`. A margin is
``(bound side - bounded side) / scale`` with a scale chosen per check, so
``status = pass`` iff ``worst_margin >= -tolerance``.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from . import bounds
from .collide import CollisionOperator, CutoffParams
from .errors import InputError
from .grid import AngularQuadrature, DistributionState, VelocityGrid, check_same_grid, gaussian, moments
from .kernel import KernelSpec, kappa, kernel_from_relative, post_collision_velocities

logger = logging.getLogger(__name__)

CHUNK = 200_000
DEFAULT_SEED = 20240607


@dataclass
class PropertyCase:
    name: str
    sampler: str
    trials: int
    tolerance: float
    worst_margin: float
    status: str = "pass"
    seed: Optional[int] = None
    details: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.status = "pass" if self.worst_margin >= -self.tolerance else "fail"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# scalar checks


def _minmax_parts(x, y, k, lam):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    r = np.divide(lo, hi, out=np.zeros_like(hi), where=hi > 0)
    # (x+y)^k - x^k - y^k = hi^k ((1+r)^k - 1 - r^k), cancellation-free
    middle = hi**k * (np.expm1(k * np.log1p(r)) - r**k)
    lower = (k - 1.0) * lo**k
    upper = (2.0**k - 2.0) * np.maximum(x ** (k - lam) * y**lam, y ** (k - lam) * x**lam)
    return middle, lower, upper


def _check_minmax_domain(x, y, k, lam):
    if not np.all(np.asarray(k) > 1):
        raise InputError("k must exceed 1")
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(y) < 0):
        raise InputError("x and y must be nonnegative")
    lam = np.asarray(lam)
    if np.any(lam < 0) or np.any(lam > np.minimum(1.0, np.asarray(k) / 2.0)):
        raise InputError("lambda must lie in [0, min(1, k/2)]")


def check_lemma_minmax(x: float, y: float, k: float, lam: float) -> Tuple[float, float]:
    """Margins ``(middle - lower, upper - middle)`` of the two-sided power inequality."""
    _check_minmax_domain(x, y, k, lam)
    middle, lower, upper = _minmax_parts(x, y, k, lam)
    return float(middle - lower), float(upper - middle)


def _bracket(v, s):
    return (1.0 + np.sum(v * v, axis=-1)) ** (0.5 * s)


def _norm_pow(v, s):
    return np.sum(v * v, axis=-1) ** (0.5 * s)


def _povzner_sides(v, vs, sigma, s, gamma, weight):
    vp, vsp = post_collision_velocities(v, vs, sigma)
    g = v - vs
    gn = np.linalg.norm(g, axis=-1)
    n = np.where(gn[..., None] > 0, g / np.where(gn > 0, gn, 1.0)[..., None], np.array([1.0, 0.0, 0.0]))
    theta = np.arccos(np.clip(np.sum(n * sigma, axis=-1), -1.0, 1.0))
    kap = np.asarray(kappa(theta))
    terms = [weight(vp, s), weight(vsp, s), weight(v, s), weight(vs, s)]
    lhs = terms[0] + terms[1] - terms[2] - terms[3]
    cross = weight(v, s - gamma) * weight(vs, gamma) + weight(v, gamma) * weight(vs, s - gamma)
    rhs = 2.0 * (2.0 ** (s / 2.0) - 2.0) * cross - 2.0 ** (-s) * (s / 2.0 - 1.0) * kap ** (s / 2.0) * terms[2]
    scale = terms[0] + terms[1] + terms[2] + terms[3] + 2.0 * (2.0 ** (s / 2.0)) * cross
    return lhs, rhs, scale


def check_povzner(v, v_star, sigma, s: float, gamma: float) -> Tuple[float, float]:
    """Margins ``RHS - LHS`` of the bracket and the plain-norm Povzner inequalities."""
    if not s > 2:
        raise InputError("Povzner inequality needs s > 2")
    if not 0 <= gamma <= min(2.0, s / 2.0):
        raise InputError("gamma must lie in [0, min(2, s/2)]")
    v = np.asarray(v, dtype=float)
    vs = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if abs(np.linalg.norm(sigma) - 1.0) > 1e-12:
        raise InputError("sigma must be a unit vector")
    out = []
    for weight in (_bracket, _norm_pow):
        lhs, rhs, _ = _povzner_sides(v, vs, sigma, s, gamma, weight)
        out.append(float(rhs - lhs))
    return out[0], out[1]


def check_truncation_lemma(x: float, y: float, z: float) -> Tuple[float, float, float]:
    """Margins of the Lipschitz, monotonicity and subadditivity properties of ``min(., z)``."""
    if min(x, y, z) < 0:
        raise InputError("x, y, z must be nonnegative")
    return tuple(float(m) for m in _truncation_margins(np.float64(x), np.float64(y), np.float64(z)))


def _truncation_margins(x, y, z):
    xz = np.minimum(x, z)
    yz = np.minimum(y, z)
    lip = np.abs(x - y) - np.abs(xz - yz)
    lo_x = np.minimum(x, y)
    hi_x = np.maximum(x, y)
    mono = np.minimum(hi_x, z) - np.minimum(lo_x, z)
    sub = xz + yz - np.minimum(x + y, z)
    return lip, mono, sub


def radial_power_mean_sides(p: float, q: float, radii, values):
    """Both sides of the radial power-mean inequality for a piecewise-constant profile.

    ``values[k]`` is the profile on ``[radii[k], radii[k+1])`` with ``radii[0] = 0``;
    the integrals ``p int r^(p-1) phi`` are exact telescoping sums.
    """
    r = np.asarray(radii, dtype=float)
    phi = np.asarray(values, dtype=float)
    out = []
    for e in (np.asarray(p, dtype=float), np.asarray(q, dtype=float)):
        ee = e[..., None]
        out.append(np.sum(phi * (r[..., 1:] ** ee - r[..., :-1] ** ee), axis=-1) ** (1.0 / e))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# randomized sweeps


def _rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def _chunks(trials: int):
    done = 0
    while done < trials:
        m = min(CHUNK, trials - done)
        yield m
        done += m


def _unit_vectors(rng, m):
    v = rng.normal(size=(m, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _velocities(rng, m):
    """Isotropic Gaussian samples with a log-uniform scale in ``[1e-2, 1e2]``."""
    scale = 10.0 ** rng.uniform(-2.0, 2.0, size=(m, 1))
    return scale * rng.normal(size=(m, 3))


def suite_lemma_minmax(trials: int = 10**6, seed: Optional[int] = None, tolerance: float = 1e-12) -> PropertyCase:
    rng = _rng(seed)
    worst = math.inf
    for m in _chunks(trials):
        x = 10.0 ** rng.uniform(-6, 6, m)
        y = 10.0 ** rng.uniform(-6, 6, m)
        k = rng.uniform(1.0, 8.0, m)
        k = np.where(k <= 1.0, 1.0 + 1e-9, k)
        lam = rng.uniform(0.0, 1.0, m) * np.minimum(1.0, k / 2.0)
        middle, lower, upper = _minmax_parts(x, y, k, lam)
        scale = np.maximum.reduce([middle, lower, upper])
        worst = min(worst, float(np.min((middle - lower) / scale)), float(np.min((upper - middle) / scale)))
    return PropertyCase("lemma_minmax", "log-uniform x,y in [1e-6,1e6], k in (1,8], lambda uniform",
                        trials, tolerance, worst if trials else 0.0, seed=seed)


def suite_povzner(trials: int = 10**6, seed: Optional[int] = None, tolerance: float = 1e-12) -> PropertyCase:
    rng = _rng(seed)
    worst = math.inf
    worst_plain = math.inf
    for m in _chunks(trials):
        v = _velocities(rng, m)
        vs = _velocities(rng, m)
        sigma = _unit_vectors(rng, m)
        s = rng.uniform(2.0, 8.0, m)
        s = np.where(s <= 2.0, 2.0 + 1e-9, s)
        gamma = rng.uniform(0.0, 1.0, m) * np.minimum(2.0, s / 2.0)
        for weight, label in ((_bracket, "bracket"), (_norm_pow, "plain")):
            lhs, rhs, scale = _povzner_sides(v, vs, sigma, s, gamma, weight)
            ok = scale > 0
            val = float(np.min((rhs - lhs)[ok] / scale[ok])) if np.any(ok) else math.inf
            if label == "bracket":
                worst = min(worst, val)
            else:
                worst_plain = min(worst_plain, val)
    return PropertyCase("povzner", "Gaussian v, v* with log-uniform scale, uniform sigma, s in (2,8]",
                        trials, tolerance, min(worst, worst_plain) if trials else 0.0, seed=seed,
                        details={"bracket": worst, "plain": worst_plain})


def suite_truncation(trials: int = 10**6, seed: Optional[int] = None, tolerance: float = 0.0) -> PropertyCase:
    rng = _rng(seed)
    worst = math.inf
    for m in _chunks(trials):
        x, y, z = (10.0 ** rng.uniform(-6, 6, (3, m)))
        # exact zeros and ties exercise the corners
        x[rng.random(m) < 0.05] = 0.0
        z[rng.random(m) < 0.05] = 0.0
        tie = rng.random(m) < 0.05
        y[tie] = x[tie]
        for marg in _truncation_margins(x, y, z):
            worst = min(worst, float(np.min(marg)))
    return PropertyCase("truncation", "log-uniform triples with injected zeros and ties",
                        trials, tolerance, worst if trials else 0.0, seed=seed)


def suite_radial_power_mean(trials: int = 10**6, seed: Optional[int] = None, tolerance: float = 1e-12,
                 pieces: int = 6) -> PropertyCase:
    rng = _rng(seed)
    worst_ineq = math.inf
    worst_eq = math.inf
    for m in _chunks(trials):
        p = rng.uniform(0.1, 6.0, m)
        q = p + rng.uniform(1e-3, 6.0, m)
        steps = rng.uniform(0.01, 2.0, (m, pieces))
        radii = np.concatenate([np.zeros((m, 1)), np.cumsum(steps, axis=1)], axis=1)
        values = rng.uniform(0.0, 1.0, (m, pieces))
        values[:, 0] = np.maximum(values[:, 0], 1e-3)
        lp, lq = radial_power_mean_sides(p, q, radii, values)
        worst_ineq = min(worst_ineq, float(np.min((lq - lp) / np.maximum(lp, lq))))
        # indicator profile: both sides equal R
        R = radii[:, -1]
        ip, iq = radial_power_mean_sides(p, q, np.stack([np.zeros(m), R], axis=1), np.ones((m, 1)))
        worst_eq = min(worst_eq, float(-np.max(np.abs(ip - iq) / R)))
    return PropertyCase("radial_power_mean", "piecewise-constant radial profiles, random 0<p<q; indicator equality",
                        trials, tolerance, min(worst_ineq, worst_eq) if trials else 0.0, seed=seed,
                        details={"inequality": worst_ineq, "indicator_equality": worst_eq})


# ---------------------------------------------------------------------------
# Monte-Carlo identities


def _mc_compare(name: str, samples: int, x: np.ndarray, y: np.ndarray, seed, sigmas: float = 3.0,
                extra: Optional[Dict[str, float]] = None) -> PropertyCase:
    d = x - y
    mean = float(np.mean(d))
    se = float(np.std(d, ddof=1) / math.sqrt(samples))
    details = {"lhs": float(np.mean(x)), "rhs": float(np.mean(y)), "diff": mean, "stderr": se,
               "lhs_stderr": float(np.std(x, ddof=1) / math.sqrt(samples)),
               "rhs_stderr": float(np.std(y, ddof=1) / math.sqrt(samples))}
    if extra:
        details.update(extra)
    # margin in units of the combined standard error
    margin = (sigmas * se - abs(mean)) / max(sigmas * se, 1e-300)
    return PropertyCase(name, "Monte Carlo, Gaussian importance sampling", samples, 0.0, margin,
                        seed=seed, details=details)


def _gauss_samples(rng, m, scale=1.0):
    v = scale * rng.normal(size=(m, 3))
    pdf = np.exp(-0.5 * np.sum(v * v, axis=1) / scale**2) / (2.0 * math.pi * scale**2) ** 1.5
    return v, pdf


def cov_test_integrand(z, sigma, u):
    """``W(z, sigma, u) = e^{-|z|^2} (1 + <z/|z|, sigma>/2) e^{-|u - e|^2}`` with ``e = (1/2, 0, 0)``."""
    zn = np.linalg.norm(z, axis=-1)
    c = np.sum(z * sigma, axis=-1) / np.where(zn > 0, zn, 1.0)
    e = np.array([0.5, 0.0, 0.0])
    return np.exp(-zn**2) * (1.0 + 0.5 * c) * np.exp(-np.sum((u - e) ** 2, axis=-1))


def gaussian_product_integrand(z, sigma, u):
    """``W = e^{-|z|^2} e^{-|u|^2}``; both sides at ``v = 0`` have a closed form."""
    return np.exp(-np.sum(z * z, axis=-1) - np.sum(u * u, axis=-1))


GAUSSIAN_PRODUCT_VALUE = 8.0 * math.pi**2.5 * (1.0 - 1.0 / math.sqrt(2.0))


def _cov_sides(rng, samples, W, v, which):
    # Left side sampled in z = v - v*. On the right, w = z / s(theta) at fixed
    # direction gives dv* = s^3 dw, which cancels the s^-3 weight exactly.
    z = rng.normal(size=(samples, 3))
    pdf = np.exp(-0.5 * np.sum(z * z, axis=1)) / (2.0 * math.pi) ** 1.5
    sigma = _unit_vectors(rng, samples)
    vv = np.broadcast_to(v, z.shape)
    vp, vsp = post_collision_velocities(vv, vv - z, sigma)
    zn = np.linalg.norm(z, axis=1)
    cos_t = np.clip(np.sum(z * sigma, axis=1) / zn, -1.0, 1.0)
    if which == "sin":
        s = np.sqrt((1.0 - cos_t) / 2.0)
        target = vp
    else:
        s = np.sqrt((1.0 + cos_t) / 2.0)
        target = vsp
    weight = 4.0 * math.pi / pdf
    lhs = W(z, sigma, target) * weight
    rhs = W(z, sigma, vv - s[:, None] * z) * weight
    return lhs, rhs


def check_change_of_variables(W: Optional[Callable] = None, samples: int = 10**5, seed: Optional[int] = None,
                              v=(0.3, -0.2, 0.1), min_samples: int = 1000) -> Dict[str, PropertyCase]:
    """Monte-Carlo comparison of both sides of the sine and cosine change of variables.

    ``W(z, sigma, u)`` must depend on ``z`` only through ``|z|`` and ``<z/|z|, sigma>``.
    Fewer than ``min_samples`` samples gives an inconclusive (failing) status.
    """
    W = cov_test_integrand if W is None else W
    v = np.asarray(v, dtype=float)
    out = {}
    for which in ("sin", "cos"):
        name = f"change_of_variables_{which}"
        if samples < min_samples:
            out[name] = PropertyCase(name, "inconclusive: too few samples", samples, 0.0, -math.inf, seed=seed)
            continue
        lhs, rhs = _cov_sides(_rng(seed), samples, W, v, which)
        out[name] = _mc_compare(name, samples, lhs, rhs, seed)
    return out


def suite_change_of_variables(samples: int = 10**5, seed: Optional[int] = None, which: str = "sin") -> PropertyCase:
    return check_change_of_variables(samples=samples, seed=seed)[f"change_of_variables_{which}"]


def suite_change_of_variables_gaussian(samples: int = 10**5, seed: Optional[int] = None) -> PropertyCase:
    """Sine form at ``v = 0`` for the Gaussian product, both sides also checked against the closed form."""
    lhs, rhs = _cov_sides(_rng(seed), samples, gaussian_product_integrand, np.zeros(3), "sin")
    exact = GAUSSIAN_PRODUCT_VALUE
    case = _mc_compare("change_of_variables_gaussian", samples, lhs, rhs, seed, extra={"closed_form": exact})
    dev = max(abs(case.details["lhs"] - exact) / (3.0 * case.details["lhs_stderr"]),
              abs(case.details["rhs"] - exact) / (3.0 * case.details["rhs_stderr"]))
    case.worst_margin = min(case.worst_margin, 1.0 - dev)
    case.__post_init__()
    return case


def exchange_prime_integrand(a, b, c, d):
    """Non-symmetric test function ``F(a, b, c, d)`` decaying in the last two slots' energy."""
    e = np.array([0.4, -0.3, 0.2])
    return ((1.0 + np.sum((a - e) ** 2, axis=-1)) * (1.0 + 0.5 * np.tanh(b[..., 1]))
            * np.exp(-0.5 * np.sum(c * c, axis=-1) - np.sum(d * d, axis=-1)))


def suite_exchange_prime(samples: int = 10**5, seed: Optional[int] = None,
                         spec: Optional[KernelSpec] = None) -> PropertyCase:
    """``iiint B F(v', v*', v, v*) = iiint B F(v, v*, v', v*')`` by paired Monte Carlo."""
    rng = _rng(seed)
    spec = KernelSpec.yukawa() if spec is None else spec
    v, pv = _gauss_samples(rng, samples, 1.0)
    vs, pvs = _gauss_samples(rng, samples, 1.0)
    sigma = _unit_vectors(rng, samples)
    vp, vsp = post_collision_velocities(v, vs, sigma)
    B = kernel_from_relative(spec, v - vs, sigma)
    w = B * 4.0 * math.pi / (pv * pvs)
    lhs = w * exchange_prime_integrand(vp, vsp, v, vs)
    rhs = w * exchange_prime_integrand(v, vs, vp, vsp)
    return _mc_compare("exchange_prime", samples, lhs, rhs, seed)


# ---------------------------------------------------------------------------
# grid checks


def _power_kernel(gamma: float):
    def fn(g, sigma):
        r = np.linalg.norm(g, axis=-1)
        return np.broadcast_to(r**gamma, np.broadcast_shapes(r.shape, sigma.shape[:-1]))
    return fn


def check_weighted_gain_bound(f: DistributionState, g: DistributionState, p: float, q: float, gamma: float,
                              slack: float = 1.05, quadrature: Optional[AngularQuadrature] = None) -> float:
    """Minimum over nodes of ``(slack * RHS - LHS) / (slack * RHS)`` for the weighted gain bound."""
    if min(p, q, gamma) < 0:
        raise InputError("p, q, gamma must be nonnegative")
    grid = f.grid
    op = CollisionOperator(grid, KernelSpec.hard_sphere(), quadrature, kernel_fn=_power_kernel(gamma))
    gw = grid.bracket(p) * g.values
    fw = grid.bracket(q) * f.values
    lhs = op.q_plus_bilinear(gw, fw)
    dv = grid.cell_volume
    f_inf_q = float(np.max(fw))
    g_inf_p = float(np.max(gw))
    g_l1 = float(np.sum(grid.bracket(p + gamma) * g.values) * dv)
    f_l1 = float(np.sum(grid.bracket(q + gamma) * f.values) * dv)
    rhs = 2.0 ** ((3.0 + gamma) / 2.0) * 4.0 * math.pi * (f_inf_q * g_l1 + g_inf_p * f_l1) * grid.bracket(gamma)
    bound = slack * rhs
    if not np.any(bound > 0):
        return math.inf
    return float(np.min((bound - lhs)[bound > 0] / bound[bound > 0]))


def check_coercivity(f: DistributionState, K: float, spec: KernelSpec, slack: float = 0.05,
                     quadrature: Optional[AngularQuadrature] = None) -> np.ndarray:
    """Nodewise ``L_K(f)(v) / (floor <v>) - (1 - slack)``; nonnegative means the floor holds."""
    m = moments(f)
    if not (m.m0 > 0 and m.m2 > 0):
        raise InputError("coercivity check needs positive M0 and M2")
    if np.linalg.norm(m.m1) / m.m0 > f.grid.spacing:
        raise InputError("coercivity check needs a centered state (|M1|/M0 within one cell)")
    op = CollisionOperator(f.grid, spec, quadrature)
    lk = op.l_k(f, K)
    floor = bounds.coercivity_floor(m, spec) * f.grid.bracket(1.0)
    return lk / floor - (1.0 - slack)


def _norm(grid: VelocityGrid, values: np.ndarray, s: float = 0.0, p: float = 1.0) -> float:
    """``(int <v>^s |f|^p)^(1/p)`` by the midpoint rule."""
    return float((np.sum(grid.bracket(s) * np.abs(values) ** p) * grid.cell_volume) ** (1.0 / p))


def _relative_margin(lhs, rhs, slack: float) -> float:
    lhs, bound = np.broadcast_arrays(np.asarray(lhs, dtype=float), slack * np.asarray(rhs, dtype=float))
    pos = bound > 0
    if not np.any(pos):
        return math.inf if np.all(lhs <= 0) else -math.inf
    if np.any(lhs[~pos] > 0):
        return -math.inf
    return float(np.min((bound[pos] - lhs[pos]) / bound[pos]))


def check_gain_bounds(f: DistributionState, spec: Optional[KernelSpec] = None, slack: float = 1.05,
                      quadrature: Optional[AngularQuadrature] = None) -> Dict[str, float]:
    """Relative margins of the pointwise, L1 and L2 bounds on ``Q+(f, f)``."""
    spec = spec or KernelSpec.hard_sphere()
    grid = f.grid
    op = CollisionOperator(grid, spec, quadrature)
    q = op.q_plus_bilinear(f.values, f.values)
    b = spec.b
    finf = float(np.max(f.values))
    l1, l11, l12 = (_norm(grid, f.values, s) for s in (0.0, 1.0, 2.0))
    return {
        "pointwise": _relative_margin(q, 2.0**5 * math.pi * b * finf * l11 * grid.bracket(1.0), slack),
        "l1": _relative_margin(_norm(grid, q), 4.0 * math.pi * b * l11**2, slack),
        "l2": _relative_margin(_norm(grid, q, p=2.0),
                               2.0**3.25 * math.pi * b * math.sqrt(finf * l1) * l12, slack),
    }


def check_iterated_gain_bounds(f: DistributionState, g: DistributionState, h: DistributionState,
                               spec: Optional[KernelSpec] = None, slack: float = 1.05,
                               quadrature: Optional[AngularQuadrature] = None) -> Dict[str, float]:
    """Relative margins of the iterated gain bounds, evaluated by nested operator calls."""
    spec = spec or KernelSpec.hard_sphere()
    grid = check_same_grid(f, g, h)
    op = CollisionOperator(grid, spec, quadrature)
    b = spec.b
    fv, gv, hv = f.values, g.values, h.values
    inner = op.q_plus_bilinear(gv, hv)
    nested = op.q_plus_bilinear(fv, inner)
    out = {"nested_pointwise": _relative_margin(
        nested, 2.0 ** (5 + 2 / 3) * math.pi ** (4 / 3) * b**2 * _norm(grid, fv) ** (1 / 3)
        * _norm(grid, fv, p=2.0) ** (2 / 3) * _norm(grid, gv) * _norm(grid, hv), slack)}
    for p in (1.0, 2.0):
        w_f, w_gh = (2.0 - p) / p, (3.0 - p) / p
        rhs = (2.0 ** (4 + 2 / p) * math.pi ** (1 + 1 / p) * b**2 * _norm(grid, fv, w_f)
               * _norm(grid, gv, w_gh) * _norm(grid, hv, w_gh))
        out[f"nested_l{int(p)}"] = _relative_margin(_norm(grid, nested, p=p), rhs, slack)
    gg = op.q_plus_bilinear(gv, gv)
    hh = op.q_plus_bilinear(hv, hv)
    fourth = op.q_plus_bilinear(op.q_plus_bilinear(fv, gg), hh)
    rhs = (2.0**11 * math.pi**3 * b**4 * _norm(grid, fv) ** (2 / 3) * _norm(grid, fv, 1.0) ** (1 / 3)
           * _norm(grid, gv, 0.5) ** (4 / 3) * _norm(grid, gv, 2.0) ** (2 / 3) * _norm(grid, hv) ** 2)
    out["fourth_order"] = _relative_margin(fourth, rhs, slack)
    return out


def random_state(rng, grid: VelocityGrid) -> DistributionState:
    """Two-component Maxwellian mixture with random masses, temperatures and offsets."""
    values = np.zeros(grid.shape)
    for _ in range(2):
        mean = rng.uniform(-1.0, 1.0, 3)
        cov = rng.uniform(0.3, 1.5, 3)
        values += gaussian(grid, 10.0 ** rng.uniform(-2, 0.5), cov, mean).values
    return DistributionState(grid, values)


def suite_gain_bounds(trials: int = 2, seed: Optional[int] = None, slack: float = 1.05,
                      grid: Optional[VelocityGrid] = None) -> PropertyCase:
    rng = _rng(seed)
    grid = grid or VelocityGrid(4.0, 8)
    worst: Dict[str, float] = {}
    for _ in range(trials):
        f, g, h = (random_state(rng, grid) for _ in range(3))
        margins = check_gain_bounds(f, slack=slack)
        margins.update(check_iterated_gain_bounds(f, g, h, slack=slack))
        for k, v in margins.items():
            worst[k] = min(worst.get(k, math.inf), v)
    return PropertyCase("gain_bounds", "random two-Maxwellian mixtures", trials, 0.0,
                        min(worst.values()) if worst else 0.0, seed=seed, details=worst)


def _random_gaussian_state(rng, grid: VelocityGrid) -> DistributionState:
    cov = rng.uniform(0.4, 1.2, 3)
    mass = 10.0 ** rng.uniform(-3, 0)
    return gaussian(grid, mass, cov)


def suite_weighted_gain(trials: int = 3, seed: Optional[int] = None, slack: float = 1.05,
                        grid: Optional[VelocityGrid] = None) -> PropertyCase:
    rng = _rng(seed)
    grid = grid or VelocityGrid(4.0, 10)
    worst = math.inf
    configs = [(0.0, 0.0, 1.0), (2.0, 0.0, 1.0)]
    for _ in range(trials):
        f = _random_gaussian_state(rng, grid)
        g = _random_gaussian_state(rng, grid)
        for p, q, gamma in configs:
            worst = min(worst, check_weighted_gain_bound(f, g, p, q, gamma, slack))
    return PropertyCase("weighted_gain", "random centered Gaussians, (p,q,gamma) in {(0,0,1),(2,0,1)}",
                        trials, 0.0, worst if trials else 0.0, seed=seed)


def suite_coercivity(trials: int = 3, seed: Optional[int] = None, slack: float = 0.05,
                     grid: Optional[VelocityGrid] = None, spec: Optional[KernelSpec] = None) -> PropertyCase:
    rng = _rng(seed)
    grid = grid or VelocityGrid(4.0, 10)
    spec = spec or KernelSpec.hard_sphere()
    worst = math.inf
    for _ in range(trials):
        f = _random_gaussian_state(rng, grid)
        K = float(10.0 ** rng.uniform(-2, 1))
        worst = min(worst, float(np.min(check_coercivity(f, K, spec, slack))))
    return PropertyCase("coercivity", "random centered Gaussians, log-uniform K", trials, 0.0,
                        worst if trials else 0.0, seed=seed)


SUITES: Dict[str, Callable[..., PropertyCase]] = {
    "lemma_minmax": suite_lemma_minmax,
    "povzner": suite_povzner,
    "truncation": suite_truncation,
    "radial_power_mean": suite_radial_power_mean,
    "change_of_variables_sin": lambda trials, seed=None: suite_change_of_variables(trials, seed, "sin"),
    "change_of_variables_cos": lambda trials, seed=None: suite_change_of_variables(trials, seed, "cos"),
    "change_of_variables_gaussian": suite_change_of_variables_gaussian,
    "exchange_prime": suite_exchange_prime,
    "weighted_gain": suite_weighted_gain,
    "gain_bounds": suite_gain_bounds,
    "coercivity": suite_coercivity,
}


def run_suites(selector: str = "all", trials: Optional[int] = None, seed: Optional[int] = None) -> Dict[str, PropertyCase]:
    """Run the named suites (comma separated, or ``all``)."""
    names = list(SUITES) if selector == "all" else [s.strip() for s in selector.split(",") if s.strip()]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InputError(f"unknown suites {unknown}; known: {sorted(SUITES)}")
    if trials == 0:
        warnings.warn("trials = 0: every suite passes vacuously", UserWarning, stacklevel=2)
    out = {}
    for name in names:
        fn = SUITES[name]
        if trials is None:
            out[name] = fn(seed=seed) if name not in ("change_of_variables_sin", "change_of_variables_cos") \
                else fn(10**5, seed)
        elif trials == 0:
            out[name] = PropertyCase(name, "vacuous", 0, 0.0, 0.0, seed=seed)
        else:
            out[name] = fn(trials, seed=seed)
    return out


def report_json(cases: Dict[str, PropertyCase]) -> str:
    payload = {"schema": 1, "suites": [
        {"name": c.name, "trials": c.trials, "tolerance": c.tolerance, "worst_margin": c.worst_margin,
         "status": c.status, "seed": c.seed, "details": c.details} for c in cases.values()]}
    return json.dumps(payload, indent=2, sort_keys=True, default=float)
