"""TOML run configuration: parsing, validation and object construction."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import bounds
from .collide import CutoffParams
from .errors import InputError
from .grid import (AngularQuadrature, DistributionState, VelocityGrid, ball_indicator, gaussian,
                   isotropic_gaussian, maxwellian_mixture, moments, read_state)
from .kernel import FAMILIES, HARD_SPHERE, SCREENED_DELTA, KernelSpec, TableProfile
from .march import DEFAULT_MONITORS, SolverConfig

SECTIONS = ("kernel", "grid", "initial", "solver", "checks", "output")
INITIAL_KINDS = ("gaussian", "isotropic_gaussian", "ball", "mixture", "file")
FORMATS = ("csv", "json", "snapshots")


@dataclass
class RunConfig:
    kernel: KernelSpec
    grid: VelocityGrid
    quadrature: AngularQuadrature
    initial: Dict[str, Any]
    solver: SolverConfig
    cutoff: CutoffParams
    output_dir: Path
    formats: Tuple[str, ...] = ("csv", "json")
    base_dir: Path = field(default_factory=Path.cwd)

    def build_initial(self) -> DistributionState:
        return build_initial(self.initial, self.grid, self.kernel, self.base_dir)


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise InputError(f"[{name}] must be a table")
    return sec


def _unknown(sec: dict, name: str, allowed) -> None:
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise InputError(f"unknown keys in [{name}]: {extra}")


def _num(sec: dict, key: str, default=None, name: str = "") -> Optional[float]:
    val = sec.get(key, default)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise InputError(f"[{name}] {key} must be a number")
    return float(val)


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def parse_kernel(sec: dict, base: Path) -> KernelSpec:
    _unknown(sec, "kernel", ("family", "a", "b", "beta", "hbar", "psi_table_path"))
    family = sec.get("family", HARD_SPHERE)
    if family == "yukawa":
        family = SCREENED_DELTA
    if family not in FAMILIES:
        raise InputError(f"[kernel] family must be one of {FAMILIES + ('yukawa',)}")
    defaults = KernelSpec.hard_sphere() if family == HARD_SPHERE else KernelSpec.yukawa()
    profile = None
    if "psi_table_path" in sec:
        path = _resolve(base, sec["psi_table_path"])
        if not path.is_file():
            raise InputError(f"[kernel] psi_table_path {path} does not exist")
        profile = TableProfile.from_csv(path)
    elif family == SCREENED_DELTA:
        profile = defaults.profile
    return KernelSpec(family, a=_num(sec, "a", defaults.a, "kernel"), b=_num(sec, "b", defaults.b, "kernel"),
                      beta=_num(sec, "beta", defaults.beta, "kernel"),
                      hbar=_num(sec, "hbar", 1.0, "kernel"), profile=profile)


def parse_grid(sec: dict) -> Tuple[VelocityGrid, AngularQuadrature]:
    _unknown(sec, "grid", ("L", "N", "n_theta", "n_phi"))
    N = sec.get("N", 16)
    if not isinstance(N, int) or isinstance(N, bool):
        raise InputError("[grid] N must be an integer")
    n_theta = sec.get("n_theta", 4)
    n_phi = sec.get("n_phi", 8)
    if not all(isinstance(x, int) and x >= 1 for x in (n_theta, n_phi)):
        raise InputError("[grid] n_theta and n_phi must be positive integers")
    return VelocityGrid(_num(sec, "L", 4.5, "grid"), N), AngularQuadrature.gauss_legendre(n_theta, n_phi)


def parse_cutoff(sec: dict, beta: float) -> CutoffParams:
    n = sec.get("n", "inf")
    K = sec.get("K", "kstar")
    n = math.inf if n == "inf" else _num(sec, "n", name="solver")
    K = bounds.k_star(beta) if K == "kstar" else (math.inf if K == "inf" else _num(sec, "K", name="solver"))
    return CutoffParams(n, K)


def parse_solver(sec: dict, checks: dict) -> SolverConfig:
    allowed = ("scheme", "dt_output", "t_end", "dt", "picard_tol", "picard_max_iter", "substeps_per_interval",
               "renormalize_conservation", "n", "K")
    _unknown(sec, "solver", allowed)
    _unknown(checks, "checks", ("monitors", "slack"))
    kw = {k: sec[k] for k in allowed[:8] if k in sec}
    monitors = checks.get("monitors", list(DEFAULT_MONITORS))
    if not isinstance(monitors, list) or not all(isinstance(m, str) for m in monitors):
        raise InputError("[checks] monitors must be a list of names")
    kw["monitors"] = tuple(monitors)
    if "slack" in checks:
        kw["slack"] = _num(checks, "slack", name="checks")
    try:
        return SolverConfig(**kw)
    except TypeError as exc:
        raise InputError(f"[solver] {exc}") from exc


def build_initial(sec: dict, grid: VelocityGrid, spec: KernelSpec, base: Path) -> DistributionState:
    """Initial datum from an ``[initial]`` table, optionally rescaled to meet the theorem condition."""
    kind = sec.get("kind", "gaussian")
    if kind not in INITIAL_KINDS:
        raise InputError(f"[initial] kind must be one of {INITIAL_KINDS}")
    if kind == "gaussian":
        f = gaussian(grid, _num(sec, "mass", 1.0, "initial"), sec.get("covariance", [1.0, 1.0, 1.0]),
                     sec.get("mean", [0.0, 0.0, 0.0]))
    elif kind == "isotropic_gaussian":
        f = isotropic_gaussian(grid, _num(sec, "mass", 1.0, "initial"), _num(sec, "temperature", 1.0, "initial"))
    elif kind == "ball":
        f = ball_indicator(grid, _num(sec, "radius", 1.0, "initial"), _num(sec, "height", 1.0, "initial"))
    elif kind == "mixture":
        f = maxwellian_mixture(grid, sec.get("components", []))
    else:
        path = _resolve(base, sec.get("path", ""))
        if not path.is_file():
            raise InputError(f"[initial] path {path} does not exist")
        f = read_state(path)
        if f.grid != grid:
            raise InputError("[initial] state file grid differs from [grid]")
    lam = _num(sec, "scale", 1.0, "initial")
    if not lam > 0:
        raise InputError("[initial] scale must be positive")
    if lam != 1.0:
        f = f.scaled(lam)
    m = moments(f)
    if not m.m2 > 0:
        raise InputError(f"initial datum violates precondition M2 > 0 (M0 = {m.m0:g}, M2 = {m.m2:g})")
    if not m.m0 > 0:
        raise InputError("initial datum violates precondition M0 > 0")
    margin = sec.get("scale_to_condition")
    if margin is not None:
        f = f.scaled(bounds.scale_to_condition(m, spec, _num(sec, "scale_to_condition", name="initial")))
    return f


def load_config(path, out_override: Optional[str] = None, slack_override: Optional[float] = None,
                k_override: Optional[float] = None) -> RunConfig:
    """Parse and validate a TOML run configuration; every failure raises :class:`InputError`."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"cannot parse {path}: {exc}") from exc
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise InputError(f"unknown sections {unknown}")
    base = path.parent
    try:
        spec = parse_kernel(_section(doc, "kernel"), base)
        grid, quad = parse_grid(_section(doc, "grid"))
        solver_sec = dict(_section(doc, "solver"))
        checks = dict(_section(doc, "checks"))
        if slack_override is not None:
            checks["slack"] = slack_override
        if k_override is not None:
            solver_sec["K"] = k_override
        cutoff = parse_cutoff(solver_sec, spec.beta)
        solver = parse_solver(solver_sec, checks)
        out = _section(doc, "output")
        _unknown(out, "output", ("directory", "formats"))
        formats = tuple(out.get("formats", ["csv", "json"]))
        bad = sorted(set(formats) - set(FORMATS))
        if bad:
            raise InputError(f"[output] unknown formats {bad}")
        out_dir = Path(out_override) if out_override else _resolve(base, out.get("directory", "out"))
        initial = _section(doc, "initial")
        _unknown(initial, "initial", ("kind", "mass", "covariance", "mean", "temperature", "radius", "height",
                                      "components", "path", "scale", "scale_to_condition"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(str(exc)) from exc
    return RunConfig(spec, grid, quad, dict(initial), solver, cutoff, out_dir, formats, base)

