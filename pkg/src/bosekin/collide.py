"""Collision operators on grid states.

Every operator is a discrete ``(v*, sigma)`` sum at each output node with
post-collision values taken by trilinear interpolation (zero outside the box).
Quadratic operators use the half sphere with doubled weights, which is exact
for an antipodal rule because their integrands are even in ``sigma``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, Optional, Tuple

import numba
import numpy as np

from . import _numba_kernels as nk
from .errors import GridMismatchError, InputError
from .grid import AngularQuadrature, DistributionState, VelocityGrid
from .kernel import KernelSpec, kernel_from_relative

logger = logging.getLogger(__name__)

INF = math.inf


@dataclass(frozen=True)
class CutoffParams:
    """Ceilings ``n`` on the kernel and density factors and ``K`` on the quantum bracket."""

    n: float = INF
    K: float = INF

    def __post_init__(self):
        for name in ("n", "K"):
            val = float(getattr(self, name))
            if math.isnan(val) or val <= 0:
                raise InputError(f"cutoff {name} must be positive or inf, got {val}")
            object.__setattr__(self, name, val)

    @property
    def label(self) -> str:
        if math.isinf(self.n):
            return "original" if math.isinf(self.K) else "intermediate"
        return "cutoff"


@dataclass
class CollisionResult:
    gain: np.ndarray
    loss: np.ndarray
    net: np.ndarray
    loss_rate: np.ndarray
    quadrature_meta: Dict[str, int] = field(default_factory=dict)


def set_threads(count: Optional[int]) -> int:
    """Cap the worker pool used by the compiled loops; returns the active count."""
    if count is not None:
        if count < 1:
            raise InputError("thread count must be at least 1")
        numba.set_num_threads(min(int(count), numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()


def _values(f, grid: VelocityGrid) -> np.ndarray:
    if isinstance(f, DistributionState):
        if f.grid != grid:
            raise GridMismatchError("state grid differs from operator grid")
        return np.ascontiguousarray(f.values)
    arr = np.ascontiguousarray(f, dtype=float)
    if arr.shape != grid.shape:
        raise GridMismatchError(f"field shape {arr.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("collision input must be finite")
    if np.any(arr < 0):
        raise InputError("collision input must be nonnegative")
    return arr


class CollisionOperator:
    """Discrete collision sums for one grid, kernel and sphere rule."""

    def __init__(self, grid: VelocityGrid, spec: KernelSpec, quadrature: Optional[AngularQuadrature] = None,
                 kernel_fn: Optional[Callable] = None):
        """``kernel_fn(g, sigma)`` overrides the kernel of ``spec`` (used by the verification suites)."""
        self.grid = grid
        self.spec = spec
        self.kernel_fn = kernel_fn
        self.quadrature = quadrature if quadrature is not None else AngularQuadrature.gauss_legendre()
        self._half = self.quadrature.hemisphere()
        self.pad = nk.pad_width(grid.points_per_axis)
        self._tables: Dict[Tuple[float, bool], Tuple[np.ndarray, np.ndarray]] = {}

    def table(self, n_cut: float, half: bool) -> Tuple[np.ndarray, np.ndarray]:
        """Weighted kernel table ``min(B, n) w h^3`` over lattice differences and directions."""
        key = (n_cut, half and self._half is not None)
        if key not in self._tables:
            if key[1]:
                sig, w = self._half
            else:
                sig, w = self.quadrature.nodes, self.quadrature.weights
            npts = self.grid.points_per_axis
            ax = np.arange(-(npts - 1), npts, dtype=float)
            m = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
            g = m * self.grid.spacing
            kfn = self.kernel_fn if self.kernel_fn is not None else partial(kernel_from_relative, self.spec)
            b = kfn(g[:, None, :], sig[None, :, :])
            b = np.broadcast_to(b, (g.shape[0], sig.shape[0]))
            bt = np.minimum(b, n_cut) * w[None, :] * self.grid.cell_volume
            self._tables[key] = (np.ascontiguousarray(bt), np.ascontiguousarray(sig))
        return self._tables[key]

    def _meta(self, sig) -> Dict[str, int]:
        return {"nodes": int(np.prod(self.grid.shape)), "angles": int(sig.shape[0]),
                "angles_full": len(self.quadrature)}

    def collide(self, f, params: CutoffParams = CutoffParams()) -> CollisionResult:
        vals = _values(f, self.grid)
        bt, sig = self.table(params.n, half=True)
        gain, rate = nk.collide_quadratic(vals, nk.padded(vals), self.pad, bt, sig, params.n, params.K)
        loss = np.minimum(vals, params.n) * rate
        return CollisionResult(gain, loss, gain - loss, rate, self._meta(sig))

    def q_gain(self, f, params: CutoffParams = CutoffParams()) -> np.ndarray:
        return self.collide(f, params).gain

    def q_loss(self, f, params: CutoffParams = CutoffParams()) -> np.ndarray:
        return self.collide(f, params).loss

    def l_k(self, f, K: float) -> np.ndarray:
        """Loss frequency ``L_K(f)``; the loss field of ``Q_K`` is ``f * L_K(f)``."""
        return self.collide(f, CutoffParams(INF, K)).loss_rate

    def q_plus_bilinear(self, f, g, params: CutoffParams = CutoffParams()) -> np.ndarray:
        fv = _values(f, self.grid)
        gv = _values(g, self.grid)
        # Q+(f, f) is even in sigma, so the self product can use the half sphere
        bt, sig = self.table(params.n, half=fv is gv or np.array_equal(fv, gv))
        return nk.gain_bilinear(nk.padded(fv), nk.padded(gv), fv.shape[0], self.pad, bt, sig, params.n)

    def weak_form_pairing(self, f, phi, params: CutoffParams = CutoffParams()) -> float:
        """Symmetrized weak form ``int phi Q_{n,K}(f) dv``.

        ``phi`` is a node array (interpolated off-grid) or one of ``"one"``,
        ``"energy"``, ``("component", i)``, ``("bracket", s)`` evaluated exactly.
        """
        vals = _values(f, self.grid)
        code, param, arr = _phi_code(phi, self.grid)
        bt, sig = self.table(params.n, half=True)
        h = self.grid.spacing
        origin = -self.grid.extent + (0.5 - self.pad) * h
        out = nk.pairing_sum(vals, nk.padded(vals), self.pad, bt, sig, params.n, params.K,
                             code, param, arr, origin, h)
        return float(np.sum(out) * self.grid.cell_volume)

    def contraction_integral(self, f, g, params: CutoffParams) -> float:
        """``int int int B_n |F(f) - F(g)|`` with ``F(f) = (f'^n)(f*'^n)(1 + f^K + f*^K)``."""
        fv = _values(f, self.grid)
        gv = _values(g, self.grid)
        bt, sig = self.table(params.n, half=True)
        out = nk.contraction_sum(fv, gv, nk.padded(fv), nk.padded(gv), self.pad, bt, sig, params.n, params.K)
        return float(np.sum(out) * self.grid.cell_volume)


def _phi_code(phi, grid: VelocityGrid):
    dummy = np.zeros((1, 1, 1))
    if isinstance(phi, str):
        if phi == "one":
            return nk.PHI_ONE, 0.0, dummy
        if phi == "energy":
            return nk.PHI_ENERGY, 0.0, dummy
        raise InputError(f"unknown test function {phi!r}")
    if isinstance(phi, tuple) and len(phi) == 2 and isinstance(phi[0], str):
        kind, p = phi
        if kind == "component" and int(p) in (0, 1, 2):
            return nk.PHI_COMPONENT, float(int(p)), dummy
        if kind == "bracket":
            return nk.PHI_BRACKET, float(p), dummy
        raise InputError(f"unknown test function {phi!r}")
    arr = np.ascontiguousarray(phi, dtype=float)
    if arr.shape != grid.shape or not np.all(np.isfinite(arr)):
        raise InputError("test function array must be finite and match the grid")
    return nk.PHI_ARRAY, 0.0, nk.padded(arr)


_OPERATORS: Dict[tuple, CollisionOperator] = {}


def get_operator(grid: VelocityGrid, spec: Optional[KernelSpec] = None,
                 quadrature: Optional[AngularQuadrature] = None) -> CollisionOperator:
    """Cached operator for a grid, kernel and sphere rule."""
    spec = spec if spec is not None else KernelSpec.hard_sphere()
    key = (grid, spec, id(spec.profile), id(quadrature))
    op = _OPERATORS.get(key)
    if op is None:
        if len(_OPERATORS) > 16:
            _OPERATORS.clear()
        op = CollisionOperator(grid, spec, quadrature)
        _OPERATORS[key] = op
    return op


def _grid_of(*states) -> VelocityGrid:
    grids = [s.grid for s in states if isinstance(s, DistributionState)]
    if not grids:
        raise InputError("at least one argument must be a DistributionState")
    for g in grids[1:]:
        if g != grids[0]:
            raise GridMismatchError("states live on different grids")
    return grids[0]


def q_plus_bilinear(f, g, params: CutoffParams = CutoffParams(), spec=None, quadrature=None) -> np.ndarray:
    return get_operator(_grid_of(f, g), spec, quadrature).q_plus_bilinear(f, g, params)


def collide(f, params: CutoffParams = CutoffParams(), spec=None, quadrature=None) -> CollisionResult:
    return get_operator(_grid_of(f), spec, quadrature).collide(f, params)


def q_gain(f, params: CutoffParams = CutoffParams(), spec=None, quadrature=None) -> np.ndarray:
    return collide(f, params, spec, quadrature).gain


def q_loss(f, params: CutoffParams = CutoffParams(), spec=None, quadrature=None) -> np.ndarray:
    return collide(f, params, spec, quadrature).loss


def l_k(f, K: float, spec=None, quadrature=None) -> np.ndarray:
    return get_operator(_grid_of(f), spec, quadrature).l_k(f, K)


def weak_form_pairing(f, phi, params: CutoffParams = CutoffParams(), spec=None, quadrature=None) -> float:
    return get_operator(_grid_of(f), spec, quadrature).weak_form_pairing(f, phi, params)


def contraction_integral(f, g, params: CutoffParams, spec=None, quadrature=None) -> float:
    return get_operator(_grid_of(f, g), spec, quadrature).contraction_integral(f, g, params)


def contraction_bound(f: DistributionState, g: DistributionState, params: CutoffParams) -> float:
    """Right-hand side of the contraction estimate for the cutoff operator."""
    if math.isinf(params.n) or math.isinf(params.K):
        raise InputError("contraction bound needs finite n and K")
    df = float(np.sum(np.abs(f.values - g.values)) * f.grid.cell_volume)
    l1f = float(np.sum(f.values) * f.grid.cell_volume)
    l1g = float(np.sum(g.values) * g.grid.cell_volume)
    gmax = float(np.max(np.minimum(g.values, params.n)))
    four_pi = 4.0 * math.pi
    return ((1.0 + 2.0 * params.K) * four_pi * params.n * (l1f + l1g) * df
            + 2.0**3.5 * four_pi * params.n * gmax * l1g * df)


def benchmark(grid: VelocityGrid, spec=None, quadrature=None, params: CutoffParams = CutoffParams(INF, 1.0),
              repeats: int = 1) -> Dict[str, float]:
    """Wall time of one quadratic evaluation on a Gaussian state (compilation excluded)."""
    from .grid import isotropic_gaussian

    op = get_operator(grid, spec, quadrature)
    f = isotropic_gaussian(grid, 1.0, 1.0)
    op.collide(f, params)
    times = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        op.collide(f, params)
        times.append(time.perf_counter() - t0)
    best = min(times)
    pairs = float(np.prod(grid.shape)) ** 2 * op.table(params.n, True)[1].shape[0]
    return {"seconds": best, "threads": float(numba.get_num_threads()), "pair_angle_evals": pairs,
            "throughput": pairs / best}
