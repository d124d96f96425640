"""Velocity lattice, sphere quadrature and grid-sampled distributions."""

from __future__ import annotations

import logging
import math
import struct
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
from scipy.special import zeta

from .errors import GridMismatchError, InputError, TruncationWarning

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi

# Kinetic-to-critical temperature prefactor 2 pi zeta(3/2)^(5/3) / (3 zeta(5/2)).
TEMPERATURE_COEFF = 2.0 * math.pi * zeta(1.5) ** (5.0 / 3.0) / (3.0 * zeta(2.5))

L1_WEIGHTS = (0, 1, 2, 3)


@dataclass(frozen=True)
class VelocityGrid:
    """Cell-centered uniform lattice on ``[-L, L]^3`` with ``N`` cells per axis."""

    extent: float
    points_per_axis: int

    def __post_init__(self):
        if not self.extent > 0:
            raise InputError(f"grid extent must be positive, got {self.extent}")
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < 4:
            raise InputError(f"points_per_axis must be an integer >= 4, got {self.points_per_axis}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def shape(self):
        n = self.points_per_axis
        return (n, n, n)

    @cached_property
    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        return -self.extent + (np.arange(n) + 0.5) * self.spacing

    @cached_property
    def coords(self) -> np.ndarray:
        """Node velocities, shape ``(N, N, N, 3)``; index ``[i, j, k]`` is ``(x_i, y_j, z_k)``."""
        x = self.axis
        return np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)

    @cached_property
    def speed2(self) -> np.ndarray:
        return np.sum(self.coords**2, axis=-1)

    def bracket(self, s: float) -> np.ndarray:
        """Japanese bracket ``<v>^s = (1 + |v|^2)^(s/2)`` at every node."""
        return (1.0 + self.speed2) ** (0.5 * s)

    def index_of(self, v) -> tuple:
        """Index of the node whose cell contains ``v``."""
        v = np.asarray(v, dtype=float)
        idx = np.floor((v + self.extent) / self.spacing).astype(int)
        idx = np.clip(idx, 0, self.points_per_axis - 1)
        return tuple(int(i) for i in idx)


@dataclass(frozen=True, eq=False)
class AngularQuadrature:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or weights.shape != (nodes.shape[0],):
            raise InputError("angular quadrature needs (M, 3) nodes and (M,) weights")
        if np.any(weights <= 0):
            raise InputError("angular weights must be positive")
        if np.any(np.abs(np.linalg.norm(nodes, axis=1) - 1.0) > 1e-12):
            raise InputError("angular nodes must be unit vectors")
        if abs(weights.sum() - FOUR_PI) > 1e-10:
            raise InputError(f"angular weights sum to {weights.sum()!r}, expected 4*pi")
        first = weights @ nodes
        second = np.einsum("k,ki,kj->ij", weights, nodes, nodes)
        if np.max(np.abs(first)) > 1e-8 or np.max(np.abs(second - FOUR_PI / 3.0 * np.eye(3))) > 1e-8:
            raise InputError("angular quadrature must integrate first and second moments exactly")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def gauss_legendre(cls, n_theta: int = 4, n_phi: int = 8) -> "AngularQuadrature":
        """Gauss-Legendre in ``cos(theta)`` times the midpoint rule in ``phi``."""
        if n_theta < 1 or n_phi < 1:
            raise InputError("angular orders must be positive")
        mu, wmu = np.polynomial.legendre.leggauss(n_theta)
        phi = (np.arange(n_phi) + 0.5) * 2.0 * math.pi / n_phi
        mu_g, phi_g = np.meshgrid(mu, phi, indexing="ij")
        st = np.sqrt(1.0 - mu_g**2)
        nodes = np.stack([st * np.cos(phi_g), st * np.sin(phi_g), mu_g], axis=-1).reshape(-1, 3)
        weights = np.repeat(wmu, n_phi) * (2.0 * math.pi / n_phi)
        if n_phi % 2 == 0:
            # mirror so that antipodal partners are exact negations
            grid_nodes = nodes.reshape(n_theta, n_phi, 3)
            half = n_phi // 2
            for a in range((n_theta + 1) // 2):
                b = n_theta - 1 - a
                for p in range(n_phi):
                    if a == b and p >= half:
                        continue
                    grid_nodes[b, (p + half) % n_phi] = -grid_nodes[a, p]
            wt = weights.reshape(n_theta, n_phi)
            for a in range(n_theta // 2):
                wt[n_theta - 1 - a] = wt[a]
            nodes = grid_nodes.reshape(-1, 3)
            weights = wt.reshape(-1)
        return cls(nodes, weights)

    def antipodal_partner(self) -> Optional[np.ndarray]:
        """Index of ``-sigma`` for every node, or None if the set is not antipodal."""
        m = len(self)
        partner = np.empty(m, dtype=int)
        for k in range(m):
            d = np.linalg.norm(self.nodes + self.nodes[k], axis=1)
            j = int(np.argmin(d))
            if d[j] > 1e-12 or abs(self.weights[j] - self.weights[k]) > 1e-14 * self.weights[k]:
                return None
            partner[k] = j
        return partner

    def hemisphere(self):
        """Nodes and doubled weights of one half of an antipodal rule.

        Summing an integrand that is even under ``sigma -> -sigma`` over the
        half rule gives the same value as the full rule. Returns None when the
        rule is not antipodal.
        """
        partner = self.antipodal_partner()
        if partner is None:
            return None
        keep = np.arange(len(self)) < partner
        return self.nodes[keep], 2.0 * self.weights[keep]


@dataclass(frozen=True, eq=False)
class DistributionState:
    """Nonnegative node values of ``f(t, .)`` on a grid."""

    grid: VelocityGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != self.grid.shape:
            raise InputError(f"state shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise InputError("state values must be finite")
        if np.any(vals < 0):
            raise InputError("state values must be nonnegative")
        if self.time < 0:
            raise InputError("state time must be nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values, time: Optional[float] = None) -> "DistributionState":
        return DistributionState(self.grid, values, self.time if time is None else time)

    def scaled(self, lam: float) -> "DistributionState":
        return DistributionState(self.grid, lam * self.values, self.time)

    @cached_property
    def moments(self) -> "MomentVector":
        return moments(self)


def check_same_grid(*states: DistributionState) -> VelocityGrid:
    grid = states[0].grid
    for s in states[1:]:
        if s.grid != grid:
            raise GridMismatchError("states live on different grids")
    return grid


@dataclass(frozen=True)
class MomentVector:
    m0: float
    m1: np.ndarray
    m2: float
    l1s: Dict[float, float] = field(default_factory=dict)
    linf: float = 0.0
    l2: float = 0.0

    @property
    def l1(self) -> float:
        return self.l1s[0]

    @property
    def l13(self) -> float:
        return self.l1s[3]

    def scaled(self, lam: float) -> "MomentVector":
        """Moments of ``lam * f``; every entry is homogeneous of degree one."""
        return MomentVector(
            lam * self.m0, lam * np.asarray(self.m1), lam * self.m2,
            {s: lam * v for s, v in self.l1s.items()}, lam * self.linf, lam * self.l2,
        )

    @classmethod
    def from_values(cls, m0, m2, l13, linf, l11=None, l12=None, l2=0.0, m1=(0.0, 0.0, 0.0)):
        """Build a moment vector from scalar data (for bound evaluation without a grid)."""
        l12 = m0 + m2 if l12 is None else l12
        l11 = l12 if l11 is None else l11
        return cls(float(m0), np.asarray(m1, dtype=float), float(m2),
                   {0: float(m0), 1: float(l11), 2: float(l12), 3: float(l13)}, float(linf), float(l2))


def weighted_l1(f: DistributionState, s: float) -> float:
    """``||f||_{L^1_s}`` by the midpoint rule."""
    return float(np.sum(f.grid.bracket(s) * np.abs(f.values)) * f.grid.cell_volume)


def lp_norm(f: DistributionState, p: float) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(f.values)))
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell_volume) ** (1.0 / p))


def moments(f: DistributionState) -> MomentVector:
    grid = f.grid
    vals = f.values
    dv = grid.cell_volume
    m0 = float(np.sum(vals) * dv)
    m1 = np.einsum("ijk,ijkd->d", vals, grid.coords) * dv
    m2 = float(np.sum(vals * grid.speed2) * dv)
    l1s = {s: weighted_l1(f, s) for s in L1_WEIGHTS}
    return MomentVector(m0, m1, m2, l1s, float(np.max(vals)) if vals.size else 0.0, lp_norm(f, 2))


def temperature_ratio(m: MomentVector) -> float:
    """Kinetic temperature over the Bose-Einstein critical temperature."""
    if not m.m0 > 0:
        raise InputError("temperature ratio needs positive mass")
    # split the power so tiny masses do not underflow
    return float(TEMPERATURE_COEFF * (m.m2 / m.m0) / m.m0 ** (2.0 / 3.0))


def interpolate(values: np.ndarray, grid: VelocityGrid, points) -> np.ndarray:
    """Trilinear interpolation of node values with zero extension off the lattice."""
    points = np.asarray(points, dtype=float)
    n = grid.points_per_axis
    u = (points + grid.extent) / grid.spacing - 0.5
    base = np.floor(u).astype(np.int64)
    frac = u - base
    out = np.zeros(points.shape[:-1])
    for cx in (0, 1):
        wx = frac[..., 0] if cx else 1.0 - frac[..., 0]
        ix = base[..., 0] + cx
        for cy in (0, 1):
            wy = frac[..., 1] if cy else 1.0 - frac[..., 1]
            iy = base[..., 1] + cy
            for cz in (0, 1):
                wz = frac[..., 2] if cz else 1.0 - frac[..., 2]
                iz = base[..., 2] + cz
                ok = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n) & (iz >= 0) & (iz < n)
                vals = np.where(ok, values[np.clip(ix, 0, n - 1), np.clip(iy, 0, n - 1), np.clip(iz, 0, n - 1)], 0.0)
                out += wx * wy * wz * vals
    return out


def zero_mean_shift(f: DistributionState) -> DistributionState:
    """Translate ``f`` so its mean velocity vanishes.

    The translated state is ``f(v + v0)`` with ``v0 = M1 / M0``, evaluated by
    trilinear interpolation. Trilinear weights reproduce linear functions, so
    away from the box edges the new first moment is zero up to round-off.
    """
    m = moments(f)
    if not m.m0 > 0:
        raise InputError("zero_mean_shift needs positive mass")
    v0 = m.m1 / m.m0
    # a shift below round-off of one cell is a no-op
    if np.linalg.norm(v0) <= 1e-12 * f.grid.spacing:
        return f
    shifted = np.maximum(interpolate(f.values, f.grid, f.grid.coords + v0), 0.0)
    lost = m.m0 - float(np.sum(shifted) * f.grid.cell_volume)
    if lost > 1e-12 * m.m0:
        warnings.warn(
            f"mean-velocity shift pushed mass {lost:.3e} ({lost / m.m0:.3e} relative) outside the grid",
            TruncationWarning, stacklevel=2,
        )
    return f.with_values(shifted)


# ---------------------------------------------------------------------------
# initial data


def gaussian(grid: VelocityGrid, mass: float, covariance_diag: Sequence[float],
             mean: Sequence[float] = (0.0, 0.0, 0.0)) -> DistributionState:
    """Node samples of an axis-aligned Gaussian with the given continuum mass."""
    cov = np.asarray(covariance_diag, dtype=float)
    if cov.shape != (3,) or np.any(cov <= 0):
        raise InputError("covariance diagonal must be three positive numbers")
    if mass < 0:
        raise InputError("mass must be nonnegative")
    d = grid.coords - np.asarray(mean, dtype=float)
    expo = -0.5 * np.sum(d * d / cov, axis=-1)
    norm = mass / ((2.0 * math.pi) ** 1.5 * math.sqrt(float(np.prod(cov))))
    return DistributionState(grid, norm * np.exp(expo))


def isotropic_gaussian(grid: VelocityGrid, mass: float, temperature: float,
                       mean: Sequence[float] = (0.0, 0.0, 0.0)) -> DistributionState:
    return gaussian(grid, mass, (temperature,) * 3, mean)


def ball_indicator(grid: VelocityGrid, radius: float, height: float = 1.0) -> DistributionState:
    if radius <= 0 or height < 0:
        raise InputError("ball needs positive radius and nonnegative height")
    return DistributionState(grid, np.where(grid.speed2 <= radius * radius, height, 0.0))


def maxwellian_mixture(grid: VelocityGrid, components: Iterable[dict]) -> DistributionState:
    """Sum of isotropic Gaussians given as dicts with ``mass``, ``temperature``, ``mean``."""
    total = np.zeros(grid.shape)
    for c in components:
        total += isotropic_gaussian(grid, c["mass"], c["temperature"], c.get("mean", (0.0, 0.0, 0.0))).values
    return DistributionState(grid, total)


_HEADER = struct.Struct("<IdI")


def write_state(path, f: DistributionState) -> None:
    """Little-endian binary snapshot: ``u32 N, f64 L, u32 pad`` then N^3 f64 in C order."""
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(f.grid.points_per_axis, f.grid.extent, 0))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_state(path) -> DistributionState:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InputError(f"{path}: file too short for header")
    n, extent, _ = _HEADER.unpack_from(data)
    expected = _HEADER.size + 8 * n**3
    if len(data) != expected:
        raise InputError(f"{path}: expected {expected} bytes for N={n}, found {len(data)}")
    vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n, n, n)
    return DistributionState(VelocityGrid(extent, n), vals.astype(float))
