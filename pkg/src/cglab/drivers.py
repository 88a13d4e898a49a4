"""Assembly of the stochastic driving vector and its space-time norm.

The fourteen components, named by their tree structure (``b`` marks a
conjugated leaf, ``i`` the stationary integral against the dissipative flow,
``j`` the conjugate of such an integral, ``r_u_v`` the resonant u o v):

====================  =========================================  regularity
x                     stationary noise response                  -1/2-
ixxxb                 I[x x conj(x)]                              1/2-
r_ixxxb_x             ixxxb o x                                     0-
r_ixxxb_xb            ixxxb o conj(x)                               0-
xxb                   x conj(x) - c1                               -1-
xx                    x^2                                          -1-
ixxb                  I[xxb]                                        1-
ixx                   I[xx]                                         1-
r_ixxb_xxb            ixxb o xxb - c3                               0-
r_ixx_xxb             ixx o xxb                                     0-
r_jxxb_xx             conj(ixxb) o xx                               0-
r_jxx_xx              conj(ixx) o xx - 2 c2                         0-
r_ixxxb_xxb           ixxxb o xxb - 2 c3 x                       -1/2-
r_jxxxb_xx            conj(ixxxb) o xx - 2 c2 x                  -1/2-
====================  =========================================  regularity

The cubic tree x^2 conj(x) is centered as x^2 conj(x) - 2 c1 x before being
integrated into ixxxb.  Conjugate partners (xb, jxx, jxxb, jxxxb) are exact
conjugates, exposed as properties.  Integrals are advanced by the
exponential-Euler rule I <- exp(-lam dt) I + phi1(dt) S, which satisfies the
discrete mild relation exactly; a burn-in run brings them close to their
stationary law before t=0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .besov import BesovIndex, DyadicPartition, Trajectory, lspace_norm, sup_norm
from .fields import FOUR_PI_SQ, Field, Grid, SPECTRAL, dealias, multiply
from .noise import NoiseGen, OUStepper, RenormConstants, ou_init_stationary
from .paraproducts import resonant

TREE_NAMES = (
    "x", "ixxxb", "r_ixxxb_x", "r_ixxxb_xb",
    "xxb", "xx", "ixxb", "ixx",
    "r_ixxb_xxb", "r_ixx_xxb", "r_jxxb_xx", "r_jxx_xx",
    "r_ixxxb_xxb", "r_jxxxb_xx",
)


@dataclass
class DrivingSample:
    """The driving vector at one time node (all fields spectral)."""

    t: float
    x: Field
    ixxxb: Field
    r_ixxxb_x: Field
    r_ixxxb_xb: Field
    xxb: Field
    xx: Field
    ixxb: Field
    ixx: Field
    r_ixxb_xxb: Field
    r_ixx_xxb: Field
    r_jxxb_xx: Field
    r_jxx_xx: Field
    r_ixxxb_xxb: Field
    r_jxxxb_xx: Field

    @cached_property
    def xb(self) -> Field:
        return self.x.conj()

    @cached_property
    def jxxxb(self) -> Field:
        return self.ixxxb.conj()

    @cached_property
    def jxxb(self) -> Field:
        return self.ixxb.conj()

    @cached_property
    def jxx(self) -> Field:
        return self.ixx.conj()

    def component(self, name: str) -> Field:
        return getattr(self, name)

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "DrivingSample":
        z = {name: Field.zeros(grid) for name in TREE_NAMES}
        return cls(t=t, **z)

    def conjugated(self) -> "DrivingSample":
        """Componentwise conjugate (a driving sample for the conjugate flow)."""
        vals = {name: self.component(name).conj() for name in TREE_NAMES}
        return DrivingSample(t=self.t, **vals)


class DriverStream:
    """Iterator producing DrivingSamples on a uniform node grid.

    The noise path advances at ``gen.dt``; nodes are ``substeps`` noise steps
    apart, so two streams built from identically seeded generators with
    different ``substeps`` share one noise path (refinement coupling).  With
    ``subtract=False`` the renormalization centerings are skipped, for
    ablation experiments.
    """

    def __init__(
        self,
        gen: NoiseGen,
        mu: float,
        part: DyadicPartition,
        consts: RenormConstants,
        substeps: int = 1,
        burn: float = 6.0,
        subtract: bool = True,
        burn_dt: float = 0.005,
    ):
        self.gen = gen
        self.mu = mu
        self.part = part
        self.consts = consts
        self.substeps = int(substeps)
        self.subtract = subtract
        self.node_dt = gen.dt * self.substeps
        grid = gen.grid
        self.grid = grid
        self._stepper = OUStepper(gen, mu)
        lam = (1j + mu) * FOUR_PI_SQ * grid.k2 + 1.0
        self._lam = lam
        self._decay = np.exp(-self.node_dt * lam)
        self._phi1 = -np.expm1(-self.node_dt * lam) / lam

        self._xhat = ou_init_stationary(gen, mu).values
        zero = np.zeros(grid.shape, dtype=complex)
        self._ixxxb = zero.copy()
        self._ixxb = zero.copy()
        self._ixx = zero.copy()
        self._trees_cache = None
        self.t = 0.0
        self._burn(burn, max(burn_dt, self.node_dt))

    # -- internals -----------------------------------------------------

    def _field(self, arr: np.ndarray) -> Field:
        return Field(self.grid, SPECTRAL, arr)

    def _quadratic_trees(self):
        """(xx, xxb, xxxb) at the current node, with centerings."""
        c1 = self.consts.c1 if self.subtract else 0.0
        x = self._field(self._xhat)
        xb = x.conj()
        xx = multiply(x, x)
        xxb = multiply(x, xb)
        xxb_c = xxb - Field.constant(self.grid, c1, rep=SPECTRAL)
        xxxb = multiply(xx, xb) - 2.0 * c1 * x
        return xx, xxb_c, xxxb

    def _trees(self):
        if self._trees_cache is None:
            self._trees_cache = self._quadratic_trees()
        return self._trees_cache

    def _advance_node(self):
        """One node step: integrals first (frozen sources), then the path."""
        xx, xxb, xxxb = self._trees()
        self._ixxxb = self._decay * self._ixxxb + self._phi1 * xxxb.values
        self._ixxb = self._decay * self._ixxb + self._phi1 * xxb.values
        self._ixx = self._decay * self._ixx + self._phi1 * xx.values
        for _ in range(self.substeps):
            self._xhat = self._stepper.step(self._xhat)
        self._trees_cache = None
        self.t += self.node_dt

    def _burn(self, burn: float, burn_dt: float):
        """Relax the tree integrals toward stationarity before t=0.

        The OU composition is exact at any step size, so the burn advances
        on its own coarser spacing with one draw per node; runs that share a
        seed and burn_dt leave the burn with identical states regardless of
        their node substeps, which keeps refinement-coupled pairs aligned.
        """
        if burn <= 0:
            return
        gen_dt = self.gen.dt
        self.gen.dt = burn_dt
        coarse = OUStepper(self.gen, self.mu)
        self.gen.dt = gen_dt
        decay = np.exp(-burn_dt * self._lam)
        phi1 = -np.expm1(-burn_dt * self._lam) / self._lam
        for _ in range(int(np.ceil(burn / burn_dt))):
            xx, xxb, xxxb = self._trees()
            self._ixxxb = decay * self._ixxxb + phi1 * xxxb.values
            self._ixxb = decay * self._ixxb + phi1 * xxb.values
            self._ixx = decay * self._ixx + phi1 * xx.values
            self._xhat = coarse.step(self._xhat)
            self._trees_cache = None
        self.t = 0.0

    # -- checkpoint support ---------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {
            "x": self._xhat,
            "ixxxb": self._ixxxb,
            "ixxb": self._ixxb,
            "ixx": self._ixx,
        }

    def restore(self, arrays: dict[str, np.ndarray], t: float) -> None:
        self._xhat = np.asarray(arrays["x"], dtype=complex)
        self._ixxxb = np.asarray(arrays["ixxxb"], dtype=complex)
        self._ixxb = np.asarray(arrays["ixxb"], dtype=complex)
        self._ixx = np.asarray(arrays["ixx"], dtype=complex)
        self._trees_cache = None
        self.t = t

    # -- public --------------------------------------------------------

    def sample(self) -> DrivingSample:
        """The driving vector at the current node."""
        c2 = self.consts.c2 if self.subtract else 0.0
        c3 = self.consts.c3 if self.subtract else 0.0
        grid, part = self.grid, self.part
        x = self._field(self._xhat)
        xx, xxb, _ = self._trees()
        ixxxb = self._field(self._ixxxb)
        ixxb = self._field(self._ixxb)
        ixx = self._field(self._ixx)
        jxxb, jxx, jxxxb = ixxb.conj(), ixx.conj(), ixxxb.conj()

        r_ixxb_xxb = resonant(ixxb, xxb, part) - Field.constant(grid, c3, rep=SPECTRAL)
        r_jxx_xx = resonant(jxx, xx, part) - Field.constant(grid, 2.0 * c2, rep=SPECTRAL)
        sample = DrivingSample(
            t=self.t,
            x=x,
            ixxxb=ixxxb,
            r_ixxxb_x=resonant(ixxxb, x, part),
            r_ixxxb_xb=resonant(ixxxb, x.conj(), part),
            xxb=xxb,
            xx=xx,
            ixxb=ixxb,
            ixx=ixx,
            r_ixxb_xxb=r_ixxb_xxb,
            r_ixx_xxb=resonant(ixx, xxb, part),
            r_jxxb_xx=resonant(jxxb, xx, part),
            r_jxx_xx=r_jxx_xx,
            r_ixxxb_xxb=resonant(ixxxb, xxb, part) - 2.0 * c3 * x,
            r_jxxxb_xx=resonant(jxxxb, xx, part) - 2.0 * c2 * x,
        )
        return sample

    def step(self) -> DrivingSample:
        """Return the current sample, then advance one node."""
        out = self.sample()
        self._advance_node()
        return out

class DrivingVector:
    """Materialized driving vector on a node grid, plus its constants."""

    def __init__(self, grid: Grid, times: np.ndarray, trees: dict[str, Trajectory],
                 consts: RenormConstants, kappa: float = 0.1):
        self.grid = grid
        self.times = times
        self.trees = trees
        self.consts = consts
        self.kappa = kappa

    def __len__(self):
        return self.times.size

    def sample(self, i: int) -> DrivingSample:
        vals = {name: self.trees[name].field(i) for name in TREE_NAMES}
        return DrivingSample(t=float(self.times[i]), **vals)

    def component(self, name: str) -> Trajectory:
        return self.trees[name]


def build_driving_vector(
    gen: NoiseGen,
    mu: float,
    part: DyadicPartition,
    consts: RenormConstants,
    T: float,
    substeps: int = 1,
    burn: float = 6.0,
    subtract: bool = True,
    kappa: float = 0.1,
) -> DrivingVector:
    """Sample the full driving vector on the node grid covering [0, T]."""
    stream = DriverStream(gen, mu, part, consts, substeps=substeps, burn=burn,
                          subtract=subtract)
    nsteps = int(round(T / stream.node_dt))
    times = np.arange(nsteps + 1) * stream.node_dt
    store = {name: [] for name in TREE_NAMES}
    for _ in range(nsteps + 1):
        s = stream.step()
        for name in TREE_NAMES:
            store[name].append(s.component(name).spectral_values)
    trees = {
        name: Trajectory(gen.grid, times, np.stack(vals))
        for name, vals in store.items()
    }
    return DrivingVector(gen.grid, times, trees, consts, kappa=kappa)


def mild_residual(dv: DrivingVector, mu: float) -> float:
    """Max defect of the discrete mild relations I[S] <- E I[S] + phi1 S.

    Certifies that the stored integral components ixxb and ixx solve their
    defining equations against xxb and xx on the node grid; zero up to
    rounding by construction of the stream.
    """
    if len(dv) < 2:
        raise ValueError("need at least two nodes to check the mild relation")
    dt = float(dv.times[1] - dv.times[0])
    lam = (1j + mu) * FOUR_PI_SQ * dv.grid.k2 + 1.0
    decay = np.exp(-dt * lam)
    phi1 = -np.expm1(-dt * lam) / lam
    worst = 0.0
    for integral, source in (("ixxb", "xxb"), ("ixx", "xx")):
        ivals = dv.trees[integral].values
        svals = dv.trees[source].values
        # The subtracted constant in xxb shifts only the zero mode, which the
        # stream also integrates, so the relation holds for the stored pair.
        defect = ivals[1:] - (decay[None] * ivals[:-1] + phi1[None] * svals[:-1])
        scale = max(1.0, float(np.max(np.abs(ivals))))
        worst = max(worst, float(np.max(np.abs(defect))) / scale)
    return worst


# Norm exponents per component: (kind, parameters), kappa-dependent.
def driving_norm(dv: DrivingVector, kappa: float, part: DyadicPartition,
                 max_nodes: int = 400) -> float:
    """The fourteen-term space-time norm of the driving vector.

    Sup norms in B_infty at the component's regularity index, plus the mixed
    sup/Hoelder norm for the cubic integral.
    """
    k = kappa
    total = sup_norm(dv.trees["x"], BesovIndex(-0.5 - k), part)
    total += lspace_norm(
        dv.trees["ixxxb"], alpha=0.5 - k, delta=0.25 - 0.5 * k, part=part,
        max_nodes=max_nodes,
    )
    for name in ("r_ixxxb_x", "r_ixxxb_xb"):
        total += sup_norm(dv.trees[name], BesovIndex(-k), part)
    for name in ("xxb", "xx"):
        total += sup_norm(dv.trees[name], BesovIndex(-1.0 - k), part)
    for name in ("ixxb", "ixx"):
        total += sup_norm(dv.trees[name], BesovIndex(1.0 - k), part)
    for name in ("r_ixxb_xxb", "r_ixx_xxb", "r_jxxb_xx", "r_jxx_xx"):
        total += sup_norm(dv.trees[name], BesovIndex(-k), part)
    for name in ("r_ixxxb_xxb", "r_jxxxb_xx"):
        total += sup_norm(dv.trees[name], BesovIndex(-0.5 - k), part)
    return float(total)


def surrogate_sample(
    grid: Grid,
    part: DyadicPartition,
    rng: np.random.Generator,
    band: int = 3,
    t: float = 0.0,
    amplitude: float = 1.0,
) -> DrivingSample:
    """Band-limited smooth stand-in for the driving vector.

    The primary components are independent random trigonometric polynomials
    with modes inside |k_j| <= band; every resonant component is computed as
    the actual resonant product of its factors (no centerings), so all the
    paraproduct expansions downstream must reproduce classical products.
    """

    def smooth() -> Field:
        hat = np.zeros(grid.shape, dtype=complex)
        mask = np.ones(grid.shape, dtype=bool)
        for j in range(grid.dim):
            mask &= np.abs(grid.k[j]) <= band
        m = int(mask.sum())
        hat[mask] = amplitude * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
        hat[(0,) * grid.dim] = amplitude * 0.1 * (rng.standard_normal() + 1j * rng.standard_normal())
        return dealias(Field(grid, SPECTRAL, hat))

    x = smooth()
    ixxxb = smooth()
    xxb = smooth()
    xx = smooth()
    ixxb = smooth()
    ixx = smooth()
    jxxb, jxx, jxxxb = ixxb.conj(), ixx.conj(), ixxxb.conj()
    return DrivingSample(
        t=t,
        x=x,
        ixxxb=ixxxb,
        r_ixxxb_x=resonant(ixxxb, x, part),
        r_ixxxb_xb=resonant(ixxxb, x.conj(), part),
        xxb=xxb,
        xx=xx,
        ixxb=ixxb,
        ixx=ixx,
        r_ixxb_xxb=resonant(ixxb, xxb, part),
        r_ixx_xxb=resonant(ixx, xxb, part),
        r_jxxb_xx=resonant(jxxb, xx, part),
        r_jxx_xx=resonant(jxx, xx, part),
        r_ixxxb_xxb=resonant(ixxxb, xxb, part),
        r_jxxxb_xx=resonant(jxxxb, xx, part),
    )
