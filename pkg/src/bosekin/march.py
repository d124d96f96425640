"""Time marching: Picard iteration of the cutoff map and exponential Euler for the truncated equation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import bounds
from .collide import CollisionOperator, CutoffParams, get_operator
from .errors import ContractionViolationError, InputError, NaNDetectedError, NonConvergenceError
from .grid import AngularQuadrature, DistributionState, MomentVector, moments
from .kernel import KernelSpec

logger = logging.getLogger(__name__)

PICARD = "PicardCutoff"
DUHAMEL = "DuhamelIntermediate"
EULER = "ExplicitEuler"
SCHEMES = (PICARD, DUHAMEL, EULER)

MONITORS = ("moment_envelope", "l13_uniform", "linf_ceiling", "predicted_sup", "temperature_floor")
DEFAULT_MONITORS = ("moment_envelope", "l13_uniform")

# below this the exponential factor (1 - e^{-L dt}) / L is replaced by dt
SMALL_RATE = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = DUHAMEL
    dt_output: float = 0.1
    t_end: float = 1.0
    dt: Optional[float] = None
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    substeps_per_interval: int = 8
    renormalize_conservation: bool = False
    monitors: Tuple[str, ...] = DEFAULT_MONITORS
    slack: float = 1.05

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InputError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.picard_tol > 0:
            raise InputError("picard_tol must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise InputError("t_end must be finite and nonnegative")
        if not self.dt_output > 0:
            raise InputError("dt_output must be positive")
        if self.dt is not None and not self.dt > 0:
            raise InputError("dt must be positive")
        if self.picard_max_iter < 1 or self.substeps_per_interval < 1:
            raise InputError("picard_max_iter and substeps_per_interval must be at least 1")
        if not self.slack >= 1.0:
            raise InputError("slack must be at least 1")
        unknown = set(self.monitors) - set(MONITORS)
        if unknown:
            raise InputError(f"unknown monitors {sorted(unknown)}")
        object.__setattr__(self, "monitors", tuple(self.monitors))

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else self.dt_output


@dataclass
class BoundCheck:
    value: float
    bound: float
    passed: bool

    @property
    def margin(self) -> float:
        """Relative headroom ``(bound - value) / bound``."""
        if math.isinf(self.bound):
            return math.inf
        return (self.bound - self.value) / abs(self.bound) if self.bound != 0 else -math.inf


@dataclass
class TrajectoryRecord:
    time: float
    moments: MomentVector
    conservation_drift: Tuple[float, float, float]
    linf: float
    bound_flags: Dict[str, BoundCheck] = field(default_factory=dict)
    clamped_mass: float = 0.0

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.bound_flags.values())


@dataclass
class PicardReport:
    interval: float
    iterations: int
    residuals: List[float]
    clamped_mass: float

    @property
    def ratios(self) -> List[float]:
        r = self.residuals
        return [r[i] / r[i - 1] for i in range(1, len(r)) if r[i - 1] > 0]


@dataclass
class RunResult:
    records: List[TrajectoryRecord]
    final: DistributionState
    picard_reports: List[PicardReport] = field(default_factory=list)
    clamped_mass: float = 0.0
    renormalizations: int = 0

    @property
    def all_passed(self) -> bool:
        return all(r.all_passed for r in self.records)


def contraction_interval(K: float, n: float, f0_mass: float) -> float:
    return bounds.contraction_interval(K, n, f0_mass)


def _l1(values: np.ndarray, dv: float) -> float:
    return float(np.sum(np.abs(values)) * dv)


def picard_step(f_start: DistributionState, params: CutoffParams, cfg: SolverConfig,
                operator: CollisionOperator, interval: Optional[float] = None) -> Tuple[DistributionState, PicardReport]:
    """Iterate ``f <- f_start + int_0^t Q_{n,K}(f)`` on one contraction interval.

    Time integrals use the composite trapezoid on ``substeps_per_interval``
    equal substeps. Negative values at iterate boundaries are clamped to zero
    and their L1 mass is reported.
    """
    if math.isinf(params.n):
        raise InputError("Picard iteration needs a finite cutoff n")
    grid = f_start.grid
    dv = grid.cell_volume
    f0 = np.asarray(f_start.values)
    mass = _l1(f0, dv)
    if interval is None:
        if mass == 0.0:
            return f_start, PicardReport(0.0, 1, [0.0], 0.0)
        interval = contraction_interval(params.K, params.n, mass)
    if not interval > 0:
        raise InputError("Picard interval must be positive")
    S = cfg.substeps_per_interval
    tau = interval / S
    F = np.broadcast_to(f0, (S + 1,) + f0.shape).copy()
    Q = np.empty_like(F)
    Q[0] = operator.collide(f0, params).net
    floor = 1e3 * np.finfo(float).eps * max(mass, 1e-300)
    residuals: List[float] = []
    clamped = 0.0
    for it in range(1, cfg.picard_max_iter + 1):
        for j in range(1, S + 1):
            Q[j] = operator.collide(F[j], params).net
        new = np.empty_like(F)
        new[0] = f0
        acc = np.zeros_like(f0)
        for j in range(1, S + 1):
            acc += 0.5 * tau * (Q[j - 1] + Q[j])
            new[j] = f0 + acc
        neg = np.minimum(new, 0.0)
        clamped = abs(float(np.sum(neg[S]) * dv))
        new = np.maximum(new, 0.0)
        res = max(_l1(new[j] - F[j], dv) for j in range(1, S + 1))
        F = new
        residuals.append(res)
        if res <= max(cfg.picard_tol, floor):
            break
        if len(residuals) >= 2 and residuals[-2] > floor and res > residuals[-2]:
            raise ContractionViolationError(
                f"Picard residual grew from {residuals[-2]:.3e} to {res:.3e}", res / residuals[-2])
    else:
        raise NonConvergenceError(
            f"Picard iteration did not reach tol {cfg.picard_tol:g} in {cfg.picard_max_iter} sweeps", residuals[-1])
    if clamped > 0:
        logger.info("picard clamp removed mass %.3e at t=%.6g", clamped, f_start.time + interval)
    report = PicardReport(interval, len(residuals), residuals, clamped)
    return DistributionState(grid, F[S], f_start.time + interval), report


def exponential_euler_update(f: np.ndarray, gain: np.ndarray, rate: np.ndarray, dt: float) -> np.ndarray:
    """``f e^{-L dt} + (1 - e^{-L dt}) / L * Q+`` with the ``L -> 0`` limit ``Q+ dt``."""
    x = rate * dt
    decay = np.exp(-x)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(rate < SMALL_RATE, dt, -np.expm1(-x) / np.where(rate < SMALL_RATE, 1.0, rate))
    return f * decay + coef * gain


def duhamel_step(f: DistributionState, K: float, dt: float, operator) -> DistributionState:
    """One frozen-coefficient exponential Euler step of the bracket-truncated equation."""
    if not dt > 0:
        raise InputError("dt must be positive")
    res = operator.collide(f, CutoffParams(math.inf, K))
    new = exponential_euler_update(np.asarray(f.values), res.gain, res.loss_rate, dt)
    if not np.all(np.isfinite(new)):
        raise NaNDetectedError(f"non-finite values after Duhamel step at t={f.time + dt:g}", np.asarray(f.values))
    return DistributionState(f.grid, new, f.time + dt)


def euler_step(f: DistributionState, params: CutoffParams, dt: float, operator) -> Tuple[DistributionState, float]:
    """Forward Euler reference step; returns the state and the clamped mass."""
    if not dt > 0:
        raise InputError("dt must be positive")
    net = operator.collide(f, params).net
    new = np.asarray(f.values) + dt * net
    if not np.all(np.isfinite(new)):
        raise NaNDetectedError(f"non-finite values after Euler step at t={f.time + dt:g}", np.asarray(f.values))
    clamped = abs(float(np.sum(np.minimum(new, 0.0)) * f.grid.cell_volume))
    return DistributionState(f.grid, np.maximum(new, 0.0), f.time + dt), clamped


def renormalize(f: DistributionState, target: MomentVector) -> DistributionState:
    """Rescale by ``c0 + c2 |v|^2`` so that mass and energy match ``target``."""
    g = f.grid
    w = f.values * g.cell_volume
    v2 = g.speed2
    a = np.array([[w.sum(), (w * v2).sum()], [(w * v2).sum(), (w * v2 * v2).sum()]])
    rhs = np.array([target.m0, target.m2])
    try:
        c0, c2 = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        c0, c2 = target.m0 / a[0, 0], 0.0
    factor = c0 + c2 * v2
    if np.any(factor < 0):
        factor = np.full_like(v2, target.m0 / a[0, 0])
    return f.with_values(f.values * factor)


def _drift(m: MomentVector, m_init: MomentVector) -> Tuple[float, float, float]:
    scale = math.sqrt(m_init.m0 * m_init.m2) if m_init.m2 > 0 else max(m_init.m0, 1e-300)
    mass = (m.m0 - m_init.m0) / m_init.m0 if m_init.m0 > 0 else 0.0
    mom = float(np.linalg.norm(np.asarray(m.m1) - np.asarray(m_init.m1))) / scale
    energy = (m.m2 - m_init.m2) / m_init.m2 if m_init.m2 > 0 else 0.0
    return mass, mom, energy


def evaluate_monitors(names: Sequence[str], m: MomentVector, m_init: MomentVector, t: float,
                      spec: KernelSpec, params: CutoffParams, cfg: SolverConfig) -> Dict[str, BoundCheck]:
    flags: Dict[str, BoundCheck] = {}
    K = params.K
    slack = cfg.slack
    finite_k = math.isfinite(K)
    for name in names:
        if name == "moment_envelope" and finite_k:
            bound = bounds.moment_envelope(m_init, spec, K, t, 3.0) * slack
            flags[name] = BoundCheck(m.l13, bound, m.l13 <= bound)
        elif name == "l13_uniform" and finite_k and cfg.scheme == DUHAMEL:
            bound = bounds.l13_uniform_bound(m_init, spec, K) * slack
            flags[name] = BoundCheck(m.l13, bound, m.l13 <= bound)
        elif name == "linf_ceiling" and finite_k:
            flags[name] = BoundCheck(m.linf, K, m.linf <= K)
        elif name == "predicted_sup" and m_init.m2 > 0:
            bound = bounds.predicted_sup(m_init, spec)
            flags[name] = BoundCheck(m.linf, bound, m.linf <= bound)
        elif name == "temperature_floor" and m.m0 > 0:
            ratio = bounds.temperature_ratio(m)
            floor = bounds.temperature_floor(spec)
            # value/bound swapped so that a positive margin means headroom
            flags[name] = BoundCheck(floor, ratio, ratio >= floor)
    return flags


def _output_times(t_end: float, dt_output: float) -> List[float]:
    count = int(math.floor(t_end / dt_output + 1e-9))
    times = [k * dt_output for k in range(1, count + 1)]
    if t_end > 0 and (not times or t_end - times[-1] > 1e-12 * max(1.0, t_end)):
        times.append(t_end)
    return times


def simulate(f0: DistributionState, spec: KernelSpec, params: CutoffParams, cfg: SolverConfig,
             operator: Optional[CollisionOperator] = None, quadrature: Optional[AngularQuadrature] = None,
             on_record: Optional[Callable[[TrajectoryRecord, DistributionState], None]] = None) -> RunResult:
    """Advance ``f0`` to ``cfg.t_end`` and collect a record at every output time."""
    m_init = moments(f0)
    if not m_init.m0 > 0:
        raise InputError("initial datum must have positive mass")
    if cfg.scheme == PICARD and math.isinf(params.n):
        raise InputError("PicardCutoff needs a finite cutoff n")
    op = operator if operator is not None else get_operator(f0.grid, spec, quadrature)

    def record(state: DistributionState, clamped: float) -> TrajectoryRecord:
        m = moments(state)
        rec = TrajectoryRecord(state.time, m, _drift(m, m_init), m.linf,
                               evaluate_monitors(cfg.monitors, m, m_init, state.time, spec, params, cfg), clamped)
        if on_record is not None:
            on_record(rec, state)
        return rec

    f = f0
    result = RunResult([record(f, 0.0)], f)
    for t_next in _output_times(cfg.t_end, cfg.dt_output):
        clamped = 0.0
        if cfg.scheme == PICARD:
            while t_next - f.time > 1e-12 * max(1.0, t_next):
                mass = float(np.sum(f.values) * f.grid.cell_volume)
                tn = contraction_interval(params.K, params.n, mass) if mass > 0 else t_next - f.time
                f, rep = picard_step(f, params, cfg, op, min(tn, t_next - f.time))
                clamped += rep.clamped_mass
                result.picard_reports.append(rep)
                f = _renorm(f, m_init, cfg, result)
        else:
            span = t_next - f.time
            nsteps = max(1, int(math.ceil(span / cfg.step - 1e-9)))
            dt = span / nsteps
            for _ in range(nsteps):
                if cfg.scheme == DUHAMEL:
                    f = duhamel_step(f, params.K, dt, op)
                else:
                    f, c = euler_step(f, params, dt, op)
                    clamped += c
                f = _renorm(f, m_init, cfg, result)
        f = DistributionState(f.grid, f.values, t_next)
        result.clamped_mass += clamped
        result.records.append(record(f, clamped))
    result.final = f
    return result


def _renorm(f: DistributionState, m_init: MomentVector, cfg: SolverConfig, result: RunResult) -> DistributionState:
    if not cfg.renormalize_conservation:
        return f
    before = moments(f)
    g = renormalize(f, m_init)
    result.renormalizations += 1
    logger.info("renormalized at t=%.6g: mass factor %.6g, energy factor %.6g",
                f.time, m_init.m0 / before.m0, m_init.m2 / before.m2 if before.m2 > 0 else 1.0)
    return g


def run(f0: DistributionState, spec: KernelSpec, params: CutoffParams, cfg: SolverConfig,
        operator: Optional[CollisionOperator] = None) -> List[TrajectoryRecord]:
    return simulate(f0, spec, params, cfg, operator).records
