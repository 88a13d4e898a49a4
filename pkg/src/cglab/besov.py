"""Dyadic Littlewood-Paley blocks and Besov norms on the lattice.

The partition of unity follows the classical shape: rho_{-1} = chi(|xi|) with
chi a smooth radial cutoff equal to 1 on [0, 6/7] and 0 beyond 4/3, and
rho_j(xi) = chi(|xi|/2^(j+1)) - chi(|xi|/2^j) for 0 <= j < jmax.  On a finite
lattice only finitely many annuli carry modes; the residual tail of chi is
assigned to the last block so the partition sums to one exactly on the
lattice, which keeps the Bony resummation of products exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._fft import fftn as _fftn, ifftn as _ifftn

from .errors import ConfigError
from .fields import Field, Grid, SPECTRAL


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity transition from 0 (x<=0) to 1 (x>=1) via exp(-1/x) bumps."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
        b = np.where(1 - x > 0, np.exp(-1.0 / np.maximum(1 - x, 1e-300)), 0.0)
    return a / (a + b)


_CHI_ONE = 6.0 / 7.0     # chi == 1 up to here
_CHI_ZERO = 4.0 / 3.0    # chi == 0 beyond here


def smooth_cutoff(r: np.ndarray) -> np.ndarray:
    """Radial cutoff chi: 1 on [0, 6/7], 0 on [4/3, inf), smooth between."""
    return _smooth_step((_CHI_ZERO - np.asarray(r, dtype=float)) / (_CHI_ZERO - _CHI_ONE))


@dataclass(frozen=True)
class BesovIndex:
    """The triple (alpha, p, q); p or q may be math.inf."""

    alpha: float
    p: float = math.inf
    q: float = math.inf

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError(f"p must be >= 1 or inf, got {self.p}")
        if not (self.q >= 1):
            raise ValueError(f"q must be >= 1 or inf, got {self.q}")


class DyadicPartition:
    """Sampled dyadic partition of unity on a grid's frequency lattice."""

    def __init__(self, grid: Grid):
        if grid.n < 8:
            raise ConfigError("grid too small to host two dyadic blocks")
        self.grid = grid
        self.jmax = int(math.ceil(math.log2(grid.kmax)))
        r = grid.kmag
        rows = [smooth_cutoff(r)]
        for j in range(0, self.jmax):
            rows.append(smooth_cutoff(r / 2.0 ** (j + 1)) - smooth_cutoff(r / 2.0**j))
        # Residual tail: keeps sum-to-one exact on the lattice.
        rows.append(1.0 - smooth_cutoff(r / 2.0**self.jmax))
        self.rho = np.stack(rows)            # index 0 is the j=-1 block
        self.prefix = np.cumsum(self.rho, axis=0)
        self.js = list(range(-1, self.jmax + 1))
        self.nblocks = len(self.js)
        # Pair weight sum_{|i-j|<=1} rho_i rho_j, used for resonant means.
        w = np.zeros(grid.shape)
        for a in range(self.nblocks):
            for b in range(self.nblocks):
                if abs(a - b) <= 1:
                    w += self.rho[a] * self.rho[b]
        self.resonant_weight = w

    def row(self, j: int) -> np.ndarray:
        if not (-1 <= j <= self.jmax):
            raise ValueError(f"block index {j} outside [-1, {self.jmax}]")
        return self.rho[j + 1]

    def low_mask(self, j: int) -> np.ndarray:
        """sum of rho_i for i <= j (zero array when j < -1)."""
        if j < -1:
            return np.zeros(self.grid.shape)
        return self.prefix[min(j, self.jmax) + 1]


def build_partition(grid: Grid) -> DyadicPartition:
    return DyadicPartition(grid)


def block(j: int, f: Field, part: DyadicPartition) -> Field:
    """Littlewood-Paley block: spectrum multiplied by rho_j."""
    if f.grid != part.grid:
        raise ValueError("field and partition grids differ")
    return Field(f.grid, SPECTRAL, f.spectral_values * part.row(j))


def block_stack(f: Field, part: DyadicPartition, physical: bool = True) -> np.ndarray:
    """All blocks at once, shape (nblocks,) + grid shape.

    Batched over blocks; physical=True returns values at lattice points.
    Results are cached on the field (keyed by partition) since the block
    decomposition of one field is reused by many downstream products.
    """
    key = ("blocks" if physical else "blocks_hat", id(part))
    if key in f._cache:
        return f._cache[key]
    hats = part.rho * f.spectral_values[None]
    if physical:
        axes = tuple(range(1, f.grid.dim + 1))
        out = _ifftn(hats, axes=axes) * f.grid.npoints
    else:
        out = hats
    f._cache[key] = out
    return out


def prefix_stack(f: Field, part: DyadicPartition) -> np.ndarray:
    """Cumulative block sums S_j f in physical space, cached like blocks."""
    key = ("prefix", id(part))
    if key in f._cache:
        return f._cache[key]
    out = np.cumsum(block_stack(f, part), axis=0)
    f._cache[key] = out
    return out


def lp_norm(f: Field, p: float) -> float:
    """Lattice-quadrature L^p norm (cell weight h^d, torus volume 1)."""
    vals = np.abs(f.physical_values)
    if p == math.inf:
        return float(np.max(vals))
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return float(np.mean(vals**p) ** (1.0 / p))


def _lq_over_blocks(weighted: np.ndarray, q: float) -> float:
    if q == math.inf:
        return float(np.max(weighted))
    return float(np.sum(weighted**q) ** (1.0 / q))


def besov_norm(f: Field, idx: BesovIndex, part: DyadicPartition) -> float:
    """l^q over j of 2^(j alpha) ||block_j f||_{L^p}."""
    if f.grid != part.grid:
        raise ValueError("field and partition grids differ")
    phys = block_stack(f, part)
    mags = np.abs(phys).reshape(part.nblocks, -1)
    if idx.p == math.inf:
        lp = mags.max(axis=1)
    else:
        lp = (mags**idx.p).mean(axis=1) ** (1.0 / idx.p)
    weights = 2.0 ** (np.array(part.js, dtype=float) * idx.alpha)
    return _lq_over_blocks(weights * lp, idx.q)


def besov_norms_stacked(
    hats: np.ndarray, idx: BesovIndex, part: DyadicPartition
) -> np.ndarray:
    """Besov norms of many spectral arrays at once, shape (m,) result."""
    m = hats.shape[0]
    dim = part.grid.dim
    axes = tuple(range(2, dim + 2))
    blocks = _ifftn(
        part.rho[None] * hats[:, None], axes=axes
    ) * part.grid.npoints
    mags = np.abs(blocks).reshape(m, part.nblocks, -1)
    if idx.p == math.inf:
        lp = mags.max(axis=2)
    else:
        lp = (mags**idx.p).mean(axis=2) ** (1.0 / idx.p)
    weighted = 2.0 ** (np.array(part.js) * idx.alpha)[None, :] * lp
    if idx.q == math.inf:
        return weighted.max(axis=1)
    return (weighted**idx.q).sum(axis=1) ** (1.0 / idx.q)


def fitted_regularity(f: Field, part: DyadicPartition, jmin: int = 1) -> float:
    """Least-squares regularity exponent from log2 block sup-norms.

    Fits ||block_j f||_inf ~ 2^(-j alpha) over the active blocks j >= jmin
    and returns alpha.  Crude but monotone enough to compare smoothness of
    two fields on the same grid.
    """
    phys = block_stack(f, part)
    sup = np.abs(phys).reshape(part.nblocks, -1).max(axis=1)
    js, vals = [], []
    for j, s in zip(part.js, sup):
        if j >= jmin and s > 0:
            js.append(j)
            vals.append(math.log2(s))
    if len(js) < 2:
        raise ValueError("not enough active blocks to fit a regularity exponent")
    slope = np.polyfit(js, vals, 1)[0]
    return float(-slope)


# -- trajectories and space-time norms ---------------------------------


class Trajectory:
    """Time-indexed family of spectral fields on a common grid."""

    def __init__(self, grid: Grid, times: np.ndarray, values: np.ndarray):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a nonempty 1-d array")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        values = np.asarray(values, dtype=complex)
        if values.shape != (times.size,) + grid.shape:
            raise ValueError("trajectory values shape mismatch")
        self.grid = grid
        self.times = times
        self.values = values

    @classmethod
    def from_fields(cls, times, fields) -> "Trajectory":
        fields = list(fields)
        grid = fields[0].grid
        vals = np.stack([f.spectral_values for f in fields])
        return cls(grid, np.asarray(times, float), vals)

    def __len__(self):
        return self.times.size

    def field(self, i: int) -> Field:
        return Field(self.grid, SPECTRAL, self.values[i])

    def node_norms(self, idx: BesovIndex, part: DyadicPartition) -> np.ndarray:
        return besov_norms_stacked(self.values, idx, part)


def _pair_indices(nt: int, max_nodes: int) -> np.ndarray:
    """Node subset used for pairwise sups; strided when nt > max_nodes.

    Subsampling can only lower the reported sup.
    """
    if nt <= max_nodes:
        return np.arange(nt)
    stride = int(math.ceil(nt / max_nodes))
    idx = np.arange(0, nt, stride)
    if idx[-1] != nt - 1:
        idx = np.append(idx, nt - 1)
    return idx


def sup_norm(traj: Trajectory, idx: BesovIndex, part: DyadicPartition) -> float:
    """sup_t of the spatial Besov norm over the stored grid."""
    return float(traj.node_norms(idx, part).max())


def holder_seminorm(
    traj: Trajectory,
    delta: float,
    idx: BesovIndex,
    part: DyadicPartition,
    max_nodes: int = 2000,
    weight_eta: float = 0.0,
) -> float:
    """Discrete Hoelder seminorm sup_{s<t} s^eta ||u(t)-u(s)|| / (t-s)^delta.

    With weight_eta > 0 the s=0 node is excluded from the sup (the weighted
    families allow a singularity there).
    """
    if len(traj) < 2:
        raise ValueError("need at least two samples for a Hoelder seminorm")
    sel = _pair_indices(len(traj), max_nodes)
    best = 0.0
    for a_pos, a in enumerate(sel[:-1]):
        if weight_eta > 0.0 and traj.times[a] == 0.0:
            continue
        rest = sel[a_pos + 1 :]
        diffs = traj.values[rest] - traj.values[a][None]
        norms = besov_norms_stacked(diffs, idx, part)
        dts = traj.times[rest] - traj.times[a]
        quot = norms / dts**delta
        if weight_eta > 0.0:
            quot = quot * traj.times[a] ** weight_eta
        best = max(best, float(quot.max()))
    return best


def lspace_norm(
    traj: Trajectory,
    alpha: float,
    delta: float,
    part: DyadicPartition,
    p: float = math.inf,
    max_nodes: int = 2000,
) -> float:
    """Norm of C_T B^alpha intersected with C^delta_T B^(alpha-2delta)."""
    a = sup_norm(traj, BesovIndex(alpha, p), part)
    b = holder_seminorm(traj, delta, BesovIndex(alpha - 2 * delta, p), part, max_nodes)
    return a + b


def weighted_sup_norm(
    traj: Trajectory, eta: float, idx: BesovIndex, part: DyadicPartition
) -> float:
    """sup over t>0 of t^eta ||u(t)||; the t=0 sample is excluded."""
    keep = traj.times > 0
    if not np.any(keep):
        raise ValueError("weighted sup needs at least one t > 0 sample")
    norms = besov_norms_stacked(traj.values[keep], idx, part)
    return float((traj.times[keep] ** eta * norms).max())


def singular_lspace_norm(
    traj: Trajectory,
    eta: float,
    alpha: float,
    delta: float,
    part: DyadicPartition,
    p: float = math.inf,
    max_nodes: int = 2000,
) -> float:
    """E^eta B^alpha + C_T B^(alpha-2eta) + E^(eta,delta) B^(alpha-2delta)."""
    a = weighted_sup_norm(traj, eta, BesovIndex(alpha, p), part)
    b = sup_norm(traj, BesovIndex(alpha - 2 * eta, p), part)
    c = holder_seminorm(
        traj, delta, BesovIndex(alpha - 2 * delta, p), part, max_nodes, weight_eta=eta
    )
    return a + b + c
