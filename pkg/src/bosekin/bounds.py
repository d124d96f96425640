"""Explicit constants and sufficient conditions for global bounded solutions.

Products of powers are accumulated as logarithms and exponentiated once, so
constants such as ``2^(35 beta)`` stay finite in the log fields even when the
plain value overflows (it is then reported as ``inf``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import integrate

from .errors import InputError
from .grid import MomentVector, temperature_ratio
from .kernel import KernelSpec, kappa

LN2 = math.log(2.0)
SPHERE_1 = 2.0 * math.pi  # |S^1|
SPHERE_2 = 4.0 * math.pi  # |S^2|
ANGULAR_C = 22.0 * math.sqrt(2.0) / 5.0 - 31.0 / 5.0
C0_CLOSED_FORM = ANGULAR_C * math.pi

CASES = ("Case1", "Case2", "Case3", "Case4")


def safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def c0_quadrature() -> float:
    """``int_{S^2} kappa(theta)^(3/2) dsigma`` by adaptive quadrature in the polar angle."""

    def integrand(theta):
        return kappa(theta) ** 1.5 * math.sin(theta)

    # kappa switches branch at pi/2
    left, _ = integrate.quad(integrand, 0.0, math.pi / 2, epsabs=1e-14, epsrel=1e-13)
    right, _ = integrate.quad(integrand, math.pi / 2, math.pi, epsabs=1e-14, epsrel=1e-13)
    return 2.0 * math.pi * (left + right)


def k_star(beta: float) -> float:
    """Bracket ceiling that maximizes ``K / (1 + 2K)^(2(beta+1))``."""
    return 1.0 / (4.0 * beta + 2.0)


def k_objective_log(K, beta: float):
    K = np.asarray(K, dtype=float)
    return np.log(K) - 2.0 * (beta + 1.0) * np.log1p(2.0 * K)


def k_star_search(beta: float, hi: float = 1.0, tol: float = 1e-13, points: int = 2001) -> float:
    """Zooming grid search for the maximizer of ``K / (1 + 2K)^(2(beta+1))`` on ``(0, hi]``.

    After a coarse pass, each refinement compares objective values relative to
    the current center ``c`` through ``log1p`` of the offsets, which resolves
    the flat top far below the square root of machine epsilon.
    """
    ks = np.linspace(hi / points, hi, points)
    i = int(np.argmax(k_objective_log(ks, beta)))
    center = float(ks[i])
    width = float(ks[1] - ks[0])
    p = 2.0 * (beta + 1.0)
    while width > tol:
        d = np.linspace(-width, width, points)
        d = d[center + d > 0]
        delta = np.log1p(d / center) - p * np.log1p(2.0 * d / (1.0 + 2.0 * center))
        j = int(np.argmax(delta))
        center = center + float(d[j])
        width = 2.0 * width / (points - 1)
    return center


def contraction_interval(K: float, n: float, f0_mass: float) -> float:
    """Length of the interval on which the cutoff Picard map contracts."""
    for name, val in (("K", K), ("n", n), ("f0_mass", f0_mass)):
        if not (val > 0 and math.isfinite(val)):
            raise InputError(f"{name} must be positive and finite, got {val}")
    return 1.0 / (16.0 * (1.0 + 2.0 * K + 2.0**1.5) * SPHERE_2 * n * f0_mass)


def _check(m: MomentVector, spec: KernelSpec) -> None:
    if not m.m0 > 0:
        raise InputError("initial mass M0 must be positive")
    if not m.m2 > 0:
        raise InputError("initial energy M2 must be positive (the condition needs M2(f0) > 0)")
    if not m.l13 > 0:
        raise InputError("L^1_3 norm must be positive")


def _log_ratio(m: MomentVector) -> float:
    return math.log(m.l13) - math.log(min(m.l1, m.m2))


def log_condition_lhs(m: MomentVector, beta: float) -> float:
    return math.log(m.l1 + m.linf) + 4.0 * beta * _log_ratio(m)


def log_condition_rhs(spec: KernelSpec) -> float:
    beta = spec.beta
    return (-(35.0 * beta - 11.0) * LN2 + (2 * beta + 1) * math.log(4 * beta + 2)
            - (2 * beta + 2) * math.log(4 * beta + 4) + 2.0 * (beta + 1) * math.log(spec.a_eff / spec.b_eff))


def log_predicted_sup(m: MomentVector, spec: KernelSpec) -> float:
    beta = spec.beta
    return (35.0 * beta * LN2 + 2.0 * (beta + 1) * math.log(spec.b_eff / spec.a_eff)
            + (2 * beta - 2) * math.log((2 * beta + 2) / (2 * beta + 3))
            + 4.0 * beta * _log_ratio(m) + math.log(m.l1 + m.linf))


def log_temperature_floor(spec: KernelSpec) -> float:
    beta = spec.beta
    return ((70.0 * beta / 3.0 - 19.0 / 3.0) * LN2 + (4 * beta + 4) / 3.0 * math.log(4 * beta + 4)
            - (4 * beta + 2) / 3.0 * math.log(4 * beta + 2)
            + (4 * beta + 4) / 3.0 * math.log(spec.b_eff / spec.a_eff))


def predicted_sup(m: MomentVector, spec: KernelSpec) -> float:
    _check(m, spec)
    return safe_exp(log_predicted_sup(m, spec))


def temperature_floor(spec: KernelSpec) -> float:
    return safe_exp(log_temperature_floor(spec))


def coercivity_floor(m: MomentVector, spec: KernelSpec) -> float:
    """Coefficient ``c`` in the lower bound ``L_K(f)(v) >= c <v>``."""
    beta = spec.beta
    return (spec.a_eff * min(m.m0, m.m2) ** ((beta + 1) / 2.0)
            / (2.0**beta * m.l13 ** ((beta - 1) / 2.0)))


def c1_constant(m: MomentVector, spec: KernelSpec, K: float) -> float:
    a, b = spec.a_eff, spec.b_eff
    l12 = m.l1s[2]
    return ((128.0 * (math.sqrt(2.0) - 1.0) * (1.0 + 2.0 * K) * b + 2.0 * ANGULAR_C * a) * l12**2
            / (a * ANGULAR_C * m.l1 * m.l13))


def l13_uniform_bound(m: MomentVector, spec: KernelSpec, K: float) -> float:
    return max(1.0, c1_constant(m, spec, K)) * m.l13


def moment_envelope(m: MomentVector, spec: KernelSpec, K: float, t: float, s: float = 3.0) -> float:
    """Upper envelope for ``||f(t)||_{L^1_s}`` along the bracket-truncated flow, ``s > 2``."""
    if s <= 2:
        raise InputError("moment envelope needs s > 2")
    if s not in m.l1s:
        raise InputError(f"moment vector carries no L^1_{s} norm")
    p = s - 2.0
    rate = (1.0 + 2.0 * K) * 2.0 ** (s / 2.0 + 2.0) * SPHERE_2 * spec.b_eff * m.l1s[2] ** ((s - 1.0) / p)
    return (m.l1s[s] ** (1.0 / p) + rate * t / p) ** p


@dataclass
class TheoremReport:
    beta: float
    a: float
    b: float
    K_star: float
    K: float
    condition_lhs: float
    condition_rhs: float
    condition_holds: bool
    log_condition_lhs: float
    log_condition_rhs: float
    predicted_sup: float
    log_predicted_sup: float
    temp_ratio: float
    temp_ratio_floor: float
    C0: Optional[float] = None
    C1: Optional[float] = None
    C2: Optional[float] = None
    C3: Optional[float] = None
    C4: Optional[float] = None
    Tn: Optional[float] = None
    case_id: Optional[str] = None
    rho0: Optional[float] = None
    case_lhs: Optional[float] = None
    case_rhs: Optional[float] = None
    case_holds: Optional[bool] = None
    c4_target: Optional[float] = None
    c4_holds: Optional[bool] = None
    raw_condition_rhs: Optional[float] = None
    raw_condition_holds: Optional[bool] = None
    extras: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_condition(f0: MomentVector, spec: KernelSpec) -> TheoremReport:
    """Smallness condition, predicted sup bound and temperature diagnostics."""
    _check(f0, spec)
    beta = spec.beta
    llhs = log_condition_lhs(f0, beta)
    lrhs = log_condition_rhs(spec)
    lsup = log_predicted_sup(f0, spec)
    return TheoremReport(
        beta=beta, a=spec.a_eff, b=spec.b_eff, K_star=k_star(beta), K=k_star(beta),
        condition_lhs=safe_exp(llhs), condition_rhs=safe_exp(lrhs), condition_holds=bool(llhs <= lrhs),
        log_condition_lhs=llhs, log_condition_rhs=lrhs,
        predicted_sup=safe_exp(lsup), log_predicted_sup=lsup,
        temp_ratio=temperature_ratio(f0), temp_ratio_floor=temperature_floor(spec),
    )


def select_case(c1: float, rho0: float) -> str:
    """Case label; the tie ``rho0 = 1`` goes to the ``rho0 >= 1`` branch."""
    if c1 >= 1.0:
        return "Case1" if rho0 >= 1.0 else "Case2"
    return "Case3" if rho0 >= 1.0 else "Case4"


def _log_case_rhs(case: str, spec: KernelSpec, K: float) -> float:
    beta = spec.beta
    lab = math.log(spec.a_eff / spec.b_eff)
    if case in ("Case1", "Case2"):
        return (2.0 * (beta - 1.0) * math.log(C0_CLOSED_FORM) + math.log(K)
                - (20.0 * beta - 6.0) * LN2 - 2.0 * math.log(SPHERE_1)
                - (2.0 * beta - 1.0) * math.log(SPHERE_2)
                - 2.0 * (beta + 1.0) * math.log1p(2.0 * K) + (2.0 * beta + 2.0) * lab)
    return (math.log(K) - (4.0 * beta + 10.0) * LN2 - 2.0 * math.log(SPHERE_1) - math.log(SPHERE_2)
            - 4.0 * math.log1p(2.0 * K) + 4.0 * lab)


def _log_case_lhs(case: str, m: MomentVector, beta: float) -> float:
    rho0 = m.m2 / m.m0
    base = math.log(m.m0 + m.linf)
    if case == "Case1":
        return base + (4.0 * beta - 3.0) * math.log(rho0)
    if case == "Case2":
        return base - 4.0 * beta * math.log(rho0)
    if case == "Case3":
        return base + (2.0 * beta - 1.0) * math.log(m.l13 / m.m0)
    return base + 2.0 * (beta + 1.0) * math.log(m.l13 / m.m2)


def constants_chain(f0: MomentVector, spec: KernelSpec, K: Optional[float] = None, n: float = 1.0) -> TheoremReport:
    """Full constant chain at bracket ceiling ``K`` (default ``K*``)."""
    rep = evaluate_condition(f0, spec)
    K = rep.K_star if K is None else float(K)
    if not (K > 0 and math.isfinite(K)):
        raise InputError("K must be positive and finite")
    beta, a, b = spec.beta, spec.a_eff, spec.b_eff
    m0, m2, linf = f0.m0, f0.m2, f0.linf
    c1 = c1_constant(f0, spec, K)
    c2 = max(1.0, c1) * f0.l13
    log_c3 = beta * LN2 + (beta - 1) / 2.0 * math.log(c2) - math.log(a) - (beta + 1) / 2.0 * math.log(min(m0, m2))
    c3 = safe_exp(log_c3)
    log_bc3 = math.log(b) + log_c3
    s = m0 + m2
    terms = [
        log_bc3 + math.log(s) + math.log(linf) if linf > 0 else -math.inf,
        2 * log_bc3 + 8.0 / 3.0 * math.log(m0) + math.log(linf) / 3.0 if linf > 0 else -math.inf,
        3 * log_bc3 + 7.0 / 3.0 * math.log(m0) + 4.0 / 3.0 * math.log(s) + math.log(linf) / 3.0 if linf > 0 else -math.inf,
        4 * log_bc3 + 23.0 / 6.0 * math.log(m0) + 7.0 / 6.0 * math.log(s),
    ]
    log_c4 = float(np.logaddexp.reduce(terms))
    denom = 2.0**8 * SPHERE_1**2 * SPHERE_2 * (1.0 + 2.0 * K) ** 4
    c4_target = (K - linf) / denom
    rho0 = m2 / m0
    case = select_case(c1, rho0)
    lc_lhs = _log_case_lhs(case, f0, beta)
    lc_rhs = _log_case_rhs(case, spec, K)
    # unified sufficient inequality before the K* substitution (raw sphere factors)
    raw_rhs = _log_case_rhs("Case1", spec, K)
    raw_lhs = math.log(f0.l1 + linf) + 4.0 * beta * (math.log(f0.l13) - math.log(min(m0, m2)))
    rep.K = K
    rep.C0 = C0_CLOSED_FORM
    rep.C1 = c1
    rep.C2 = c2
    rep.C3 = c3
    rep.C4 = safe_exp(log_c4)
    rep.Tn = contraction_interval(K, n, f0.l1)
    rep.case_id = case
    rep.rho0 = rho0
    rep.case_lhs = safe_exp(lc_lhs)
    rep.case_rhs = safe_exp(lc_rhs)
    rep.case_holds = bool(lc_lhs <= lc_rhs)
    rep.c4_target = c4_target
    rep.c4_holds = bool(c4_target > 0 and log_c4 <= math.log(c4_target))
    rep.raw_condition_rhs = safe_exp(raw_rhs)
    rep.raw_condition_holds = bool(raw_lhs <= raw_rhs)
    rep.extras = {"log_C3": log_c3, "log_C4": log_c4, "log_case_lhs": lc_lhs, "log_case_rhs": lc_rhs,
                  "log_raw_condition_rhs": raw_rhs, "coercivity_floor": coercivity_floor(f0, spec)}
    return rep


def scale_to_condition(m: MomentVector, spec: KernelSpec, margin: float = 0.5) -> float:
    """Scale ``lam`` such that ``lam * f`` satisfies the condition with ``lhs = margin * rhs``.

    The condition is homogeneous of degree one in ``lam``, so this is exact.
    """
    _check(m, spec)
    if not 0 < margin <= 1:
        raise InputError("margin must lie in (0, 1]")
    return safe_exp(log_condition_rhs(spec) + math.log(margin) - log_condition_lhs(m, spec.beta))


def bisect_scale(m: MomentVector, spec: KernelSpec, lo: float = 1e-300, hi: float = 1.0,
                 iters: int = 200) -> float:
    """Largest ``lam`` in ``[lo, hi]`` with ``lam * f`` passing the condition, by log-bisection."""
    _check(m, spec)
    if evaluate_condition(m.scaled(hi), spec).condition_holds:
        return hi
    if not evaluate_condition(m.scaled(lo), spec).condition_holds:
        raise InputError("condition fails even at the smallest scale")
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = 0.5 * (llo + lhi)
        if evaluate_condition(m.scaled(math.exp(mid)), spec).condition_holds:
            llo = mid
        else:
            lhi = mid
    return math.exp(llo)
