"""Bony paraproduct, resonant product and the associated commutators.

All block products are formed in physical space and dealiased exactly like
:func:`cglab.fields.multiply`, so that

    para_lt(u,v) + para_gt(u,v) + resonant(u,v) == multiply(u,v)

holds to rounding on the lattice (the partition sums to one there).
"""

from __future__ import annotations

import numpy as np

from ._fft import fftn as _fftn, ifftn as _ifftn

from .besov import DyadicPartition, block_stack, prefix_stack
from .fields import (
    Field,
    Propagator,
    SPECTRAL,
    apply_heat,
    multiply,
    reflect_spectrum,
)


def _check(u: Field, v: Field, part: DyadicPartition):
    if u.grid != v.grid or u.grid != part.grid:
        raise ValueError("paraproduct arguments must share one grid/partition")


def _finish(grid, phys_sum: np.ndarray) -> Field:
    hat = _fftn(phys_sum) / grid.npoints
    return Field(grid, SPECTRAL, hat * grid.dealias_mask)


def para_lt(u: Field, v: Field, part: DyadicPartition) -> Field:
    """Low-high paraproduct  u < v = sum_{i <= j-2} block_i(u) block_j(v)."""
    _check(u, v, part)
    prefix = prefix_stack(u, part)
    vblocks = block_stack(v, part)
    out = np.zeros(u.grid.shape, dtype=complex)
    for row in range(part.nblocks):
        if part.js[row] < 1:
            continue  # no i <= j-2 exists below j=1
        out += prefix[row - 2] * vblocks[row]
    return _finish(u.grid, out)


def para_gt(u: Field, v: Field, part: DyadicPartition) -> Field:
    """High-low paraproduct, the mirror  u > v = v < u."""
    return para_lt(v, u, part)


def resonant(u: Field, v: Field, part: DyadicPartition) -> Field:
    """Resonant product  u o v = sum_{|i-j| <= 1} block_i(u) block_j(v)."""
    _check(u, v, part)
    ub = block_stack(u, part)
    vb = block_stack(v, part)
    out = np.zeros(u.grid.shape, dtype=complex)
    nb = part.nblocks
    for a in range(nb):
        lo, hi = max(a - 1, 0), min(a + 1, nb - 1)
        out += ub[a] * vb[lo : hi + 1].sum(axis=0)
    return _finish(u.grid, out)


def resonant_mean(u: Field, v: Field, part: DyadicPartition) -> complex:
    """Spatial mean of resonant(u, v) without forming the product.

    The mean is the zero mode, which dealiasing never touches, so it equals
    sum_k W(k) u_hat(k) v_hat(-k) with W the pair weight sum_{|i-j|<=1}
    rho_i rho_j.
    """
    _check(u, v, part)
    uhat = u.spectral_values
    vrev = reflect_spectrum(v.spectral_values)
    return complex(np.sum(part.resonant_weight * uhat * vrev))


def decompose_product(u: Field, v: Field, part: DyadicPartition):
    """Return (u<v, u>v, u o v); their sum re-creates multiply(u, v)."""
    return para_lt(u, v, part), para_gt(u, v, part), resonant(u, v, part)


def commutator_r(u: Field, v: Field, w: Field, part: DyadicPartition) -> Field:
    """Trilinear commutator  R(u,v,w) = (u<v) o w - u (v o w)."""
    first = resonant(para_lt(u, v, part), w, part)
    second = multiply(u, resonant(v, w, part))
    return first - second


def heat_commutator(
    t: float, u: Field, v: Field, prop: Propagator, part: DyadicPartition
) -> Field:
    """[exp(t(i+mu)Lap), u<] v, with the pure heat flow (no mass term)."""
    if t < 0:
        raise ValueError(f"heat commutator requires t >= 0, got {t}")
    flow_of_para = apply_heat(t, para_lt(u, v, part), prop, mass=False)
    para_of_flow = para_lt(u, apply_heat(t, v, prop, mass=False), part)
    return flow_of_para - para_of_flow
