"""Collision kernels and the binary-collision geometry they act on.

Velocities are float arrays whose last axis has length 3; every function
broadcasts over leading axes so the same code serves single collisions,
Monte-Carlo batches and the precomputed collision stencils.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DegenerateDirectionError, InputError

HARD_SPHERE = "hard_sphere"
SCREENED_DELTA = "screened_delta"
FAMILIES = (HARD_SPHERE, SCREENED_DELTA)

# Largest value of kappa, attained at theta = pi/2.
KAPPA_MAX = (1.0 - math.sqrt(2.0) / 2.0) ** 2

_UNIT_TOL = 1e-12


def yukawa_profile(xi):
    """Fourier profile of a delta potential screened by a Yukawa attraction."""
    xi = np.asarray(xi, dtype=float)
    return 1.0 - 1.0 / (1.0 + xi * xi)


def _half_profile(xi):
    return np.full(np.shape(xi), 0.5)


class TableProfile:
    """Monotone cubic interpolant of a sampled radial profile.

    Beyond the last sample the profile is held at its final value.
    """

    def __init__(self, xi, values):
        xi = np.asarray(xi, dtype=float)
        values = np.asarray(values, dtype=float)
        if xi.ndim != 1 or xi.shape != values.shape or xi.size < 2:
            raise InputError("profile table needs two equal-length columns with >= 2 rows")
        if xi[0] != 0.0:
            raise InputError("profile table must start at xi = 0")
        if np.any(np.diff(xi) <= 0):
            raise InputError("profile table xi column must be strictly increasing")
        if np.any(values < 0):
            raise InputError("profile table values must be nonnegative")
        self.xi = xi
        self.values = values
        self._interp = PchipInterpolator(xi, values, extrapolate=False)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = self._interp(np.clip(xi, 0.0, self.xi[-1]))
        return np.asarray(out, dtype=float)

    @classmethod
    def from_csv(cls, path) -> "TableProfile":
        rows = []
        with open(Path(path), newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    # tolerate a single header line
                    if rows:
                        raise InputError(f"malformed profile row {row!r} in {path}")
        if not rows:
            raise InputError(f"no profile samples in {path}")
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1])


class _ScaledProfile:
    """xi -> hbar**-2 * base(xi / hbar), the profile of the scale-normalized kernel."""

    def __init__(self, base: Callable, hbar: float):
        self.base = base
        self.hbar = hbar

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.base(xi / self.hbar) / self.hbar**2


@dataclass(frozen=True)
class KernelSpec:
    """A collision kernel ``B = |g| (P(|v-v'|) + P(|v-v*'|))**2``.

    ``profile`` is the radial Fourier profile of the interaction potential
    (ignored for hard spheres, which use the constant 1/2 so that ``B = |g|``
    when ``hbar = 1``). ``a``, ``b`` and ``beta`` are the constants of the
    lower/upper bound ``a |g|^(beta+1) / (1 + |g|^beta) <= B <= b |g|``,
    stated for the scale-normalized equation once divided by ``hbar**4``.
    """

    family: str = HARD_SPHERE
    a: float = 1.0
    b: float = 1.0
    beta: float = 3.0
    hbar: float = 1.0
    profile: Optional[Callable] = field(default=None, compare=False)
    source_hbar: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if not (self.a > 0 and self.b > 0 and self.a <= self.b):
            raise InputError(f"kernel constants need 0 < a <= b, got a={self.a}, b={self.b}")
        if not self.beta >= 3:
            raise InputError(f"beta must be >= 3, got {self.beta}")
        if not (0 < self.hbar <= 1):
            raise InputError(f"hbar must lie in (0, 1], got {self.hbar}")
        if self.family == SCREENED_DELTA and self.profile is None:
            object.__setattr__(self, "profile", yukawa_profile)

    @classmethod
    def hard_sphere(cls) -> "KernelSpec":
        return cls(HARD_SPHERE, a=1.0, b=1.0, beta=3.0)

    @classmethod
    def yukawa(cls, hbar: float = 1.0) -> "KernelSpec":
        return cls(SCREENED_DELTA, a=1.0 / 8.0, b=4.0, beta=4.0, hbar=hbar, profile=yukawa_profile)

    @property
    def a_eff(self) -> float:
        return self.a / self.hbar**4

    @property
    def b_eff(self) -> float:
        return self.b / self.hbar**4

    def radial_profile(self, xi):
        """Profile of the scale-normalized kernel, ``hbar**-2 P(xi / hbar)``."""
        base = _half_profile if self.family == HARD_SPHERE and self.profile is None else self.profile
        xi = np.asarray(xi, dtype=float)
        if self.hbar == 1.0:
            return np.asarray(base(xi), dtype=float)
        return np.asarray(base(xi / self.hbar), dtype=float) / self.hbar**2


@dataclass(frozen=True)
class CollisionPair:
    v: np.ndarray
    v_star: np.ndarray
    sigma: np.ndarray
    v_prime: np.ndarray
    v_star_prime: np.ndarray
    theta: float


def _as_vec(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (3,):
        raise InputError(f"expected 3-vectors, got shape {x.shape}")
    return x


def _check_unit(sigma: np.ndarray) -> None:
    norms = np.linalg.norm(sigma, axis=-1)
    if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        raise InputError("sigma must be a unit vector (|sigma| = 1 within 1e-12)")


def post_collision_velocities(v, v_star, sigma):
    """Vectorized sigma-representation ``(v', v*')``; no unit check."""
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    center = 0.5 * (v + v_star)
    half = 0.5 * np.linalg.norm(v - v_star, axis=-1)[..., None] * np.asarray(sigma, dtype=float)
    return center + half, center - half


def relative_direction(v, v_star):
    """Unit vector along ``v - v*``, or ``e1`` where the two coincide."""
    g = np.asarray(v, dtype=float) - np.asarray(v_star, dtype=float)
    r = np.linalg.norm(g, axis=-1, keepdims=True)
    e1 = np.zeros_like(g)
    e1[..., 0] = 1.0
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, g / safe, e1)


def collision_angle(v, v_star, sigma):
    """Deviation angle between ``n`` and ``sigma`` in ``[0, pi]``.

    Uses atan2 of the cross and dot products, which stays accurate near
    grazing and head-on collisions where arccos loses digits.
    """
    n = relative_direction(v, v_star)
    sigma = np.asarray(sigma, dtype=float)
    cross = np.linalg.norm(np.cross(n, sigma), axis=-1)
    dot = np.sum(n * sigma, axis=-1)
    return np.arctan2(cross, dot)


def post_collision(v, v_star, sigma) -> CollisionPair:
    v, v_star, sigma = _as_vec(v), _as_vec(v_star), _as_vec(sigma)
    _check_unit(sigma)
    vp, vsp = post_collision_velocities(v, v_star, sigma)
    theta = collision_angle(v, v_star, sigma)
    return CollisionPair(v, v_star, sigma, vp, vsp, float(theta) if np.ndim(theta) == 0 else theta)


def _perpendicular(n: np.ndarray) -> np.ndarray:
    # Deterministic unit vector orthogonal to n: cross with the axis least aligned with n.
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    w = np.cross(n, axis)
    return w / np.linalg.norm(w)


def sigma_to_omega(v, v_star, sigma) -> np.ndarray:
    """Impact direction ``omega`` with ``sigma = n - 2 <n, omega> omega``."""
    v, v_star, sigma = _as_vec(v), _as_vec(v_star), _as_vec(sigma)
    _check_unit(sigma)
    g = v - v_star
    r = np.linalg.norm(g)
    if r == 0.0:
        raise DegenerateDirectionError("omega is undefined when v == v_star")
    n = g / r
    d = n - sigma
    dn = np.linalg.norm(d)
    if dn <= 1e-14:
        return _perpendicular(n)
    return d / dn


def omega_post_collision(v, v_star, omega):
    """Omega-representation ``(v - <g, w> w, v* + <g, w> w)``."""
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    omega = np.asarray(omega, dtype=float)
    proj = np.sum((v - v_star) * omega, axis=-1)[..., None] * omega
    return v - proj, v_star + proj


def kappa(theta):
    """Angular coercivity weight ``min((1 - sin(t/2))^2, (1 - cos(t/2))^2)``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < -1e-12) or np.any(theta > math.pi + 1e-12):
        raise InputError("theta must lie in [0, pi]")
    theta = np.clip(theta, 0.0, math.pi)
    s = np.sin(0.5 * theta)
    c = np.cos(0.5 * theta)
    out = np.minimum((1.0 - s) ** 2, (1.0 - c) ** 2)
    return float(out) if out.ndim == 0 else out


def kernel_from_relative(spec: KernelSpec, g, sigma):
    """Kernel as a function of the relative velocity ``g = v - v*`` and ``sigma``."""
    g = np.asarray(g, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    r = np.linalg.norm(g, axis=-1)
    if spec.family == HARD_SPHERE and spec.profile is None and spec.hbar == 1.0:
        return r
    rs = r[..., None] * sigma
    dist_prime = 0.5 * np.linalg.norm(g - rs, axis=-1)       # |v - v'|
    dist_star_prime = 0.5 * np.linalg.norm(g + rs, axis=-1)  # |v - v*'|
    bracket = spec.radial_profile(dist_prime) + spec.radial_profile(dist_star_prime)
    return r * bracket * bracket


def evaluate_kernel(spec: KernelSpec, v, v_star, sigma):
    """``B(v - v*, sigma)``; zero when ``v == v*``."""
    v, v_star, sigma = _as_vec(v), _as_vec(v_star), _as_vec(sigma)
    _check_unit(sigma)
    out = kernel_from_relative(spec, v - v_star, sigma)
    return float(out) if np.ndim(out) == 0 else out


def kernel_bounds(spec: KernelSpec, r):
    """Lower and upper envelopes of ``B`` at relative speed ``r``."""
    r = np.asarray(r, dtype=float)
    rb = r**spec.beta
    lower = spec.a_eff * rb * r / (1.0 + rb)
    upper = spec.b_eff * r
    return lower, upper


NORMALIZE = "normalize"
DENORMALIZE = "denormalize"


def hbar_rescale(spec: KernelSpec, f, direction: str):
    """Map a kernel and state between physical and scale-normalized units.

    Normalizing sends ``f(t, v)`` to ``hbar**3 f(hbar**3 t~, v)``, i.e. values
    are multiplied by ``hbar**3`` and the clock is divided by it, and swaps
    the profile for ``hbar**-2 P(xi / hbar)`` with ``a, b`` divided by
    ``hbar**4``. Denormalizing undoes a previous normalization.
    """
    from .grid import DistributionState

    if not (0 < spec.hbar <= 1):
        raise InputError(f"hbar must lie in (0, 1], got {spec.hbar}")
    if direction == NORMALIZE:
        h = spec.hbar
        if h == 1.0:
            return spec, f
        base = spec.profile if spec.profile is not None else _half_profile
        new_spec = replace(
            spec, a=spec.a / h**4, b=spec.b / h**4, hbar=1.0,
            profile=_ScaledProfile(base, h), source_hbar=h,
        )
        new_f = DistributionState(f.grid, f.values * h**3, f.time / h**3)
        return new_spec, new_f
    if direction == DENORMALIZE:
        h = spec.source_hbar
        if h is None:
            return spec, f
        if not (0 < h <= 1):
            raise InputError(f"stored hbar must lie in (0, 1], got {h}")
        profile = spec.profile.base if isinstance(spec.profile, _ScaledProfile) else spec.profile
        if profile is _half_profile:
            profile = None
        new_spec = replace(
            spec, a=spec.a * h**4, b=spec.b * h**4, hbar=h, profile=profile, source_hbar=None,
        )
        new_f = DistributionState(f.grid, f.values / h**3, f.time * h**3)
        return new_spec, new_f
    raise InputError(f"unknown direction {direction!r}")
