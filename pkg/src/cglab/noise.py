"""Complex space-time white noise, OU objects and renormalization constants.

The noise is complex: E[xi xi] = 0 and E[xi conj(xi)] = delta delta, so every
Fourier mode carries an independent circularly-symmetric Gaussian with no
Hermitian pairing across k and -k.  The smeared noise multiplies mode k by
eta_hat(eps k).

The stationary response X of ((i+mu)Lap - 1) X' = xi_eps is advanced by the
exact per-mode exponential scheme, so its law is exact at every step size;
only products of trees carry time-discretization bias.

Renormalization constants for the discrete model:

* c1 is the exact lattice sum  sum_k |eta_hat(eps k)|^2 / (2 Re lam_k), the
  stationary mean of X conj(X).
* c2, c3 are stationary space-time means of second-order resonants.  They can
  be estimated by Monte-Carlo (:func:`renorm_c2_c3`) or computed exactly for
  the discrete Gaussian model by a Wick pairing sum over the lattice
  (:func:`renorm_c2_c3_lattice`); the two routes are independent and are
  tested against each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ._fft import fftn as _fftn, ifftn as _ifftn

from .besov import DyadicPartition
from .errors import EstimationError
from .fields import FOUR_PI_SQ, Field, Grid, Mollifier, SPECTRAL, multiply, reflect_spectrum
from .paraproducts import resonant_mean


class NoiseGen:
    """Seeded source of per-mode complex Gaussians on a grid.

    The stream is consumed one field-shaped draw per call; identical seeds
    give identical streams, and ``spawn`` yields independent child streams
    for parallel replicas.  ``dt`` is the finest step at which the noise is
    sampled; coarser consumers advance by several substeps.
    """

    def __init__(self, seed: int, grid: Grid, dt: float, eps: float,
                 mollifier: Mollifier | None = None):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        self.seed = seed
        self.grid = grid
        self.dt = dt
        self.eps = eps
        self.mollifier = mollifier or Mollifier("gaussian")
        self.rng = np.random.default_rng(seed)

    def complex_normals(self) -> np.ndarray:
        """One CN(0,1) draw per mode (independent real and imaginary parts)."""
        shape = self.grid.shape
        re = self.rng.standard_normal(shape)
        im = self.rng.standard_normal(shape)
        return (re + 1j * im) / np.sqrt(2.0)

    def spawn(self, n: int) -> list["NoiseGen"]:
        children = []
        for rng in self.rng.spawn(n):
            child = NoiseGen(self.seed, self.grid, self.dt, self.eps, self.mollifier)
            child.rng = rng
            children.append(child)
        return children

    def state(self) -> dict:
        return self.rng.bit_generator.state

    def set_state(self, state: dict) -> None:
        self.rng.bit_generator.state = state


def noise_increment(gen: NoiseGen) -> Field:
    """White-in-time increment: mode k ~ CN(0, dt), modes independent."""
    return Field(gen.grid, SPECTRAL, np.sqrt(gen.dt) * gen.complex_normals())


def decay_rates(grid: Grid, mu: float) -> np.ndarray:
    """Re lam_k = 4 pi^2 mu |k|^2 + 1."""
    return FOUR_PI_SQ * mu * grid.k2 + 1.0


def stationary_variance(grid: Grid, mu: float, eps: float, mollifier: Mollifier) -> np.ndarray:
    """Per-mode stationary variance |eta_hat(eps k)|^2 / (2 Re lam_k)."""
    sym = mollifier.lattice_symbol(eps, grid)
    return sym**2 / (2.0 * decay_rates(grid, mu))


def ou_init_stationary(gen: NoiseGen, mu: float) -> Field:
    """Draw X(0) from the exact stationary per-mode Gaussian law."""
    sig2 = stationary_variance(gen.grid, mu, gen.eps, gen.mollifier)
    return Field(gen.grid, SPECTRAL, np.sqrt(sig2) * gen.complex_normals())


class OUStepper:
    """Exact exponential update of the stationary noise response.

    X_hat <- exp(-lam dt) X_hat + sigma Z with sigma^2 the exact variance of
    the stochastic convolution over one step; preserves the stationary law
    for any dt.
    """

    def __init__(self, gen: NoiseGen, mu: float):
        self.gen = gen
        self.mu = mu
        rates = decay_rates(gen.grid, mu)
        lam = (1j + mu) * FOUR_PI_SQ * gen.grid.k2 + 1.0
        self.decay = np.exp(-gen.dt * lam)
        sym = gen.mollifier.lattice_symbol(gen.eps, gen.grid)
        self.sigma = np.sqrt(sym**2 * -np.expm1(-2.0 * rates * gen.dt) / (2.0 * rates))

    def step(self, xhat: np.ndarray) -> np.ndarray:
        return self.decay * xhat + self.sigma * self.gen.complex_normals()


def ou_step(x: Field, gen: NoiseGen, mu: float) -> Field:
    return Field(x.grid, SPECTRAL, OUStepper(gen, mu).step(x.spectral_values))


@dataclass
class RenormConstants:
    """Centerings for the quadratic and second-order tree products."""

    c1: float
    c2: complex = 0.0
    c3: complex = 0.0
    eps: float = 0.0
    c2_stderr: float = 0.0
    c3_stderr: float = 0.0
    method: str = "lattice"

    def as_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2_re": self.c2.real, "c2_im": self.c2.imag,
            "c3_re": self.c3.real, "c3_im": self.c3.imag,
            "eps": self.eps,
            "c2_stderr": self.c2_stderr, "c3_stderr": self.c3_stderr,
            "method": self.method,
        }


def renorm_c1(eps: float, grid: Grid, mu: float, mollifier: Mollifier) -> float:
    """Exact stationary mean of X conj(X) for the discrete model."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return float(np.sum(stationary_variance(grid, mu, eps, mollifier)))


def _rolled(arr: np.ndarray, m_index: tuple[int, ...]) -> np.ndarray:
    """arr evaluated at (k - m) with circular lattice indices."""
    return np.roll(arr, shift=m_index, axis=tuple(range(arr.ndim)))


def _stationary_second_order(
    sig2: np.ndarray,
    lam: np.ndarray,
    lam_m: complex,
    m_index: tuple[int, ...],
    dt: float | None,
    conj_pair: bool,
) -> complex:
    """Wick sum for E[I_hat(m) S_hat'] with exponential source covariance.

    For the c3 diagram (conj_pair=False) the source is S = x xbar and the
    per-k covariance decays at rate conj(lam_k) + lam_{k-m}; for the c2
    diagram (conj_pair=True) the source is x^2 and both rates conjugate,
    with the Wick factor 2 included by the caller.  ``dt=None`` integrates
    the continuum convolution; a finite dt reproduces the exponential-Euler
    quadrature exactly, which is the right centering for simulated trees.
    """
    sig2_shift = _rolled(sig2, m_index)
    lam_shift = _rolled(lam, m_index)
    if conj_pair:
        rho = np.conj(lam) + np.conj(lam_shift)
    else:
        rho = np.conj(lam) + lam_shift
    amp = sig2 * sig2_shift
    if dt is None:
        return complex(np.sum(amp / (lam_m + rho)))
    phi1 = -np.expm1(-dt * lam_m) / lam_m
    weights = np.exp(-dt * rho) / -np.expm1(-dt * (lam_m + rho))
    return complex(phi1 * np.sum(amp * weights))


def renorm_c2_c3_lattice(
    grid: Grid,
    part: DyadicPartition,
    mu: float,
    eps: float,
    mollifier: Mollifier,
    dt: float | None = None,
) -> tuple[complex, complex]:
    """Exact stationary means of the second-order resonant diagrams.

    Returns (c2, c3) with c2 = mean(conj(I[x^2]) o x^2)/2 and
    c3 = mean(I[x conj x] o (x conj x)), both for the discrete lattice model
    (circular mode sums, dealiased quadratic trees).  With ``dt`` given, the
    exponential-Euler quadrature of the tree integrals is reproduced exactly
    instead of the continuum convolution.
    """
    sig2 = stationary_variance(grid, mu, eps, mollifier)
    lam = (1j + mu) * FOUR_PI_SQ * grid.k2 + 1.0
    weight = part.resonant_weight * grid.dealias_mask
    flat = np.argwhere(weight > 1e-300)
    c2 = 0.0 + 0.0j
    c3 = 0.0 + 0.0j
    for idx in flat:
        m_index = tuple(int(i) for i in idx)
        w = weight[m_index]
        lam_m = complex(lam[m_index])
        # c3: E[ I[x xbar]_hat(m) * (x xbar)_hat(-m) ], connected part
        e3 = _stationary_second_order(sig2, lam, lam_m, m_index, dt, conj_pair=False)
        c3 += w * e3
        # c2: E[ conj(I[x^2])_hat(m) * (x^2)_hat(-m) ]
        #    = conj( E[ I[x^2]_hat(-m) conj((x^2)_hat(-m)) ] ), Wick factor 2
        neg_m = tuple((-i) % grid.n for i in m_index)
        lam_negm = complex(lam[neg_m])
        e2 = _stationary_second_order(sig2, lam, lam_negm, neg_m, dt, conj_pair=True)
        c2 += w * np.conj(2.0 * e2)
    return complex(c2) / 2.0, complex(c3)


def renorm_c2_c3(
    gen: NoiseGen,
    mu: float,
    part: DyadicPartition,
    burn: float = 6.0,
    samples: int = 2000,
    replicas: int = 16,
    batches: int = 20,
    max_rel_stderr: float = 0.10,
) -> RenormConstants:
    """Monte-Carlo estimate of (c2, c3) from a stationary run.

    Advances ``replicas`` independent X paths with the exact OU scheme
    (vectorized in one array), builds the quadratic trees and their
    exponential-Euler integrals, and averages the spatial means of the two
    second-order resonants over space, time and replicas.  Standard errors
    come from batch means over (replica, time-block) cells; if either
    relative standard error exceeds ``max_rel_stderr`` the estimate is
    rejected.  The estimator is independent of nu: the trees are built from
    X alone.
    """
    grid = gen.grid
    # Slowest retained mode is k=0 with unit decay rate, so five of its
    # relaxation times means burn >= 5.
    if burn < 5.0:
        raise ValueError("burn-in must cover 5 relaxation times of the k=0 mode")
    lam = (1j + mu) * FOUR_PI_SQ * grid.k2 + 1.0
    decay = np.exp(-gen.dt * lam)[None]
    phi1 = (-np.expm1(-gen.dt * lam) / lam)[None]
    rates = decay_rates(grid, mu)
    sym = gen.mollifier.lattice_symbol(gen.eps, grid)
    step_sigma = np.sqrt(sym**2 * -np.expm1(-2.0 * rates * gen.dt) / (2.0 * rates))
    init_sigma = np.sqrt(stationary_variance(grid, mu, gen.eps, gen.mollifier))
    c1 = renorm_c1(gen.eps, grid, mu, gen.mollifier)

    rshape = (replicas,) + grid.shape
    axes = tuple(range(1, grid.dim + 1))
    zero_idx = (slice(None),) + (0,) * grid.dim

    def draws():
        re = gen.rng.standard_normal(rshape)
        im = gen.rng.standard_normal(rshape)
        return (re + 1j * im) / np.sqrt(2.0)

    xhat = init_sigma[None] * draws()
    ixx = np.zeros(rshape, dtype=complex)
    ixxb = np.zeros(rshape, dtype=complex)
    mask = grid.dealias_mask[None]
    npts = grid.npoints

    def trees(xh):
        xp = _ifftn(xh, axes=axes) * npts
        xx = (_fftn(xp * xp, axes=axes) / npts) * mask
        xxb = (_fftn(xp * np.conj(xp), axes=axes) / npts) * mask
        xxb[zero_idx] -= c1
        return xx, xxb

    def reflect(batch):
        out = batch[(slice(None),) + (slice(None, None, -1),) * grid.dim]
        return np.roll(out, 1, axis=axes)

    def ou_advance(xh):
        return decay * xh + step_sigma[None] * draws()

    nburn = int(np.ceil(burn / gen.dt))
    xx, xxb = trees(xhat)
    for _ in range(nburn):
        ixx = decay * ixx + phi1 * xx
        ixxb = decay * ixxb + phi1 * xxb
        xhat = ou_advance(xhat)
        xx, xxb = trees(xhat)

    w = part.resonant_weight[None]
    sum_axes = axes
    vals2 = np.empty((samples, replicas), dtype=complex)
    vals3 = np.empty((samples, replicas), dtype=complex)
    for s in range(samples):
        ixx = decay * ixx + phi1 * xx
        ixxb = decay * ixxb + phi1 * xxb
        xhat = ou_advance(xhat)
        xx, xxb = trees(xhat)
        # mean(u o v) = sum_k W(k) u_hat(k) v_hat(-k)
        jxx = reflect(np.conj(ixx))        # spectrum of conj(I[x^2])
        vals2[s] = np.sum(w * jxx * reflect(xx), axis=sum_axes) / 2.0
        vals3[s] = np.sum(w * ixxb * reflect(xxb), axis=sum_axes)

    def batch_stats(vals):
        cut = (samples // batches) * batches
        means = vals[:cut].reshape(batches, -1).mean(axis=1)
        est = means.mean()
        se = np.sqrt(
            np.sum(np.abs(means - est) ** 2) / (batches - 1) / batches
        )
        return complex(est), float(se)

    c2, se2 = batch_stats(vals2)
    c3, se3 = batch_stats(vals3)
    for name, est, se in (("c2", c2, se2), ("c3", c3, se3)):
        if abs(est) > 0 and se > max_rel_stderr * abs(est):
            raise EstimationError(
                f"{name} estimate {est:.4g} has stderr {se:.3g} above "
                f"{max_rel_stderr:.0%} of its value; increase samples"
            )
    return RenormConstants(
        c1=c1, c2=c2, c3=c3, eps=gen.eps,
        c2_stderr=se2, c3_stderr=se3, method="monte-carlo",
    )


def lattice_constants(
    grid: Grid,
    part: DyadicPartition,
    mu: float,
    eps: float,
    mollifier: Mollifier,
    dt: float | None = None,
) -> RenormConstants:
    """All three constants from exact lattice sums (no sampling error)."""
    c1 = renorm_c1(eps, grid, mu, mollifier)
    c2, c3 = renorm_c2_c3_lattice(grid, part, mu, eps, mollifier, dt=dt)
    return RenormConstants(c1=c1, c2=c2, c3=c3, eps=eps, method="lattice")
