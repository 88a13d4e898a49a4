"""The acceptance battery: every shipping gate as an executable check.

Each criterion runs at a fixed desk scale with a pinned seed and returns a
:class:`CriterionResult`; the test suite and the ``selftest`` CLI both
drive this module, so there is exactly one definition of "passing".
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .besov import BesovIndex, DyadicPartition, Trajectory, besov_norm, build_partition, lp_norm, sup_norm
from .drivers import DriverStream
from .fields import Field, Grid, Mollifier, Propagator, SPECTRAL, apply_heat, multiply
from .monitors import (
    DissipativityQuery,
    dissipativity_boundary_p,
    dissipativity_form,
    dissipativity_matrix,
    growth_rate,
    lp_inequality_residual,
)
from .noise import (
    NoiseGen,
    OUStepper,
    RenormConstants,
    lattice_constants,
    ou_init_stationary,
    renorm_c1,
    stationary_variance,
)
from .paraproducts import decompose_product
from .randomfields import band_limited_field, besov_flat_field, fit_loglog_slope
from .system import CGLParams, run_coupled, run_direct, run_paracontrolled


@dataclass
class CriterionResult:
    name: str
    passed: bool
    statistic: float
    threshold: float
    detail: str = ""
    runtime: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.name}: stat={self.statistic:.4g} "
                f"vs {self.threshold:.4g} ({self.detail}) [{self.runtime:.1f}s]")


def criterion_bony_exactness(pairs: int = 100) -> CriterionResult:
    """Product decomposition re-sums the dealiased product to rounding."""
    grid = Grid(3, 32)
    part = build_partition(grid)
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(pairs):
        u = Field(grid, SPECTRAL,
                  (rng.standard_normal(grid.shape)
                   + 1j * rng.standard_normal(grid.shape)) * grid.dealias_mask)
        v = Field(grid, SPECTRAL,
                  (rng.standard_normal(grid.shape)
                   + 1j * rng.standard_normal(grid.shape)) * grid.dealias_mask)
        lt, gt, res = decompose_product(u, v, part)
        gap = lt + gt + res - multiply(u, v)
        rel = lp_norm(gap, math.inf) / (lp_norm(u, math.inf) * lp_norm(v, math.inf))
        worst = max(worst, rel)
    return CriterionResult("bony_exactness", worst <= 1e-10, worst, 1e-10,
                           f"{pairs} random dealiased pairs, d=3 n=32")


def criterion_ou_spectrum(samples: int = 20000, tol: float = 0.05,
                          c1_scale: float = 1.0) -> CriterionResult:
    """Empirical per-mode stationary variance against the exact law.

    ``c1_scale`` rescales the reference law; anything but 1 must fail (used
    by the sabotage self-check).
    """
    grid = Grid(3, 16)
    mol = Mollifier("gaussian")
    mu, eps = 1.0, 0.2
    gen = NoiseGen(202, grid, dt=0.5, eps=eps, mollifier=mol)
    stepper = OUStepper(gen, mu)
    xhat = ou_init_stationary(gen, mu).values
    acc = np.zeros(grid.shape)
    for _ in range(samples):
        xhat = stepper.step(xhat)
        acc += np.abs(xhat) ** 2
    acc /= samples
    theory = stationary_variance(grid, mu, eps, mol) * c1_scale
    # 20 sampled modes spread over shells, k=0 included
    modes = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0),
             (1, 0, 1), (1, 1, 1), (2, 0, 0), (0, 2, 0), (2, 1, 0),
             (2, 1, 1), (2, 2, 0), (3, 0, 0), (3, 1, 0), (2, 2, 2),
             (3, 2, 1), (4, 0, 0), (3, 3, 0), (4, 2, 1), (4, 3, 2)]
    worst = max(abs(acc[m] / theory[m] - 1.0) for m in modes)
    return CriterionResult("ou_spectrum", worst <= tol, worst, tol,
                           f"{len(modes)} modes, {samples} samples, d=3 n=16")


def criterion_renorm_constant(c1_scale: float = 1.0) -> CriterionResult:
    """Monte-Carlo mean of |X|^2 vs the lattice sum, and the O(1/eps) law."""
    grid = Grid(3, 16)
    mol = Mollifier("gaussian")
    mu, eps = 1.0, 0.05
    c1 = renorm_c1(eps, grid, mu, mol) * c1_scale
    gen = NoiseGen(303, grid, dt=0.5, eps=eps, mollifier=mol)
    stepper = OUStepper(gen, mu)
    xhat = ou_init_stationary(gen, mu).values
    total = 0.0
    nsteps = 30000
    for _ in range(nsteps):
        xhat = stepper.step(xhat)
        total += float(np.sum(np.abs(xhat) ** 2))
    mc = total / nsteps
    rel = abs(mc - c1) / c1
    mc_ok = rel <= 0.02

    # Mollifier-limited divergence: sharp cutoff well inside a larger lattice.
    big = Grid(3, 64)
    sharp = Mollifier("sharp")
    ratio = renorm_c1(0.05, big, mu, sharp) / renorm_c1(0.1, big, mu, sharp)
    ratio_ok = 1.7 <= ratio <= 2.3
    return CriterionResult(
        "renorm_constant", mc_ok and ratio_ok, rel if not ratio_ok else rel, 0.02,
        f"mc rel err {rel:.4f}; C1(eps/2)/C1(eps)={ratio:.3f} (sharp, n=64)")


def criterion_dissipativity_boundary() -> CriterionResult:
    """Determinant vanishes on the critical curve; verdict matches sampling."""
    worst_det = 0.0
    for mu in (0.5, 1.0, 2.0):
        for delta in (0.0, 0.3):
            p = dissipativity_boundary_p(mu, delta)
            det = abs(np.linalg.det(dissipativity_form(p, mu, delta)))
            worst_det = max(worst_det, det)
    det_ok = worst_det <= 1e-10

    rng = np.random.default_rng(404)
    angles = np.linspace(0.0, np.pi, 1000, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)])
    agree = True
    for _ in range(100):
        q = DissipativityQuery(p=1.0 + rng.uniform(0.01, 6.0),
                               mu=rng.uniform(0.2, 3.0),
                               delta=rng.uniform(0.01, 1.0))
        m, verdict = dissipativity_matrix(q)
        sampled = float(np.min(np.einsum("ik,ij,jk->k", dirs, m, dirs)))
        agree &= (sampled >= -1e-12) == verdict
    return CriterionResult(
        "dissipativity_boundary", det_ok and agree, worst_det, 1e-10,
        f"6 boundary points; sampling agreement={agree}")


def criterion_threshold_identity() -> CriterionResult:
    """1 + mu(mu + sqrt(1+mu^2)) = 3/2 exactly at mu = 1/(2 sqrt 2)."""
    gap = abs(1.0 + growth_rate(1.0 / (2.0 * math.sqrt(2.0))) - 1.5)
    return CriterionResult("threshold_identity", gap <= 1e-12, gap, 1e-12)


def criterion_lp_inequality(T: float = 0.25, dt: float = 2e-4) -> CriterionResult:
    """Energy-inequality residual stays above -tol on a stochastic run.

    Tolerance comes from a dt/4 reference run on the same noise path; the
    continuum inequality is exact, so all violation budget is
    discretization.
    """
    grid = Grid(3, 16)
    part = build_partition(grid)
    mol = Mollifier("gaussian")
    mu, eps, p, delta = 1.0, 0.3, 2.0, 0.2
    params = CGLParams(mu=mu, nu=1.0, lam=0.0, c=0.0)

    def run_at(substeps):
        gen = NoiseGen(606, grid, dt=dt / 4.0, eps=eps, mollifier=mol)
        consts = lattice_constants(grid, part, mu, eps, mol,
                                   dt=dt / 4.0 * substeps)
        stream = DriverStream(gen, mu, part, consts, substeps=substeps, burn=6.0)
        return run_paracontrolled(stream, params, T, Field.zeros(grid),
                                  Field.zeros(grid), record_every=10**9,
                                  energy_p=p)

    coarse = run_at(4)
    fine = run_at(1)
    res_c = lp_inequality_residual(coarse.ledger, delta, params)
    res_f = lp_inequality_residual(fine.ledger, delta, params)
    tol = 10.0 * float(np.max(np.abs(res_c - res_f[::4][: len(res_c)])))
    worst = float(res_c.min())
    return CriterionResult(
        "lp_inequality", worst >= -tol, worst, -tol,
        f"p=2, delta=0.2, T={T}, dt={dt}; tol from dt/4 reference")


def criterion_reconstruction(T: float = 0.5, dt: float = 1e-4) -> CriterionResult:
    """Coupled direct vs paracontrolled run agrees in relative L^2."""
    grid = Grid(1, 64)
    part = build_partition(grid)
    mol = Mollifier("gaussian")
    mu, eps = 1.0, 0.2
    params = CGLParams(mu=mu, nu=1.0, lam=0.0, c=0.0)
    consts = lattice_constants(grid, part, mu, eps, mol, dt=dt)
    gen = NoiseGen(707, grid, dt=dt, eps=eps, mollifier=mol)
    stream = DriverStream(gen, mu, part, consts, burn=6.0)
    run = run_coupled(stream, params, T, Field.zeros(grid), record_every=100)
    worst = float(run.rel_l2.max())
    return CriterionResult("reconstruction", worst <= 1e-2, worst, 1e-2,
                           f"d=1 n=64, eps={eps}, T={T}, dt={dt}")


def criterion_smoothing_exponents() -> CriterionResult:
    """Fitted semigroup decay exponents sit within 0.1 of -delta."""
    grid = Grid(3, 64)
    part = build_partition(grid)
    prop = Propagator(grid, 1.0)
    rng = np.random.default_rng(808)
    alpha = 0.0
    f = besov_flat_field(grid, part, alpha, rng)
    ts = np.geomspace(1e-4, 2e-3, 7)
    worst = 0.0
    details = []
    for delta in (0.25, 0.5):
        idx = BesovIndex(alpha + 2 * delta)
        vals = [besov_norm(apply_heat(t, f, prop, mass=False), idx, part)
                for t in ts]
        slope = fit_loglog_slope(ts, vals)
        worst = max(worst, abs(slope + delta))
        details.append(f"delta={delta}: slope={slope:.3f}")
    return CriterionResult("smoothing_exponents", worst <= 0.1, worst, 0.1,
                           "; ".join(details))


def criterion_renorm_ablation() -> CriterionResult:
    """Dropping the counterterm makes the solution swell with 1/eps.

    The divergent object is quadratic in the solution (the second moment
    inherits the O(1/eps) of the quadratic-tree centering), so the measured
    statistic is sup_t of the squared L^2 norm of the counterterm-free run.
    On a finite lattice C1(eps) = a/eps + b with b > 0, so any single
    halving gives a ratio strictly below 2; the criterion therefore runs
    the ladder eps, eps/2, eps/4 in the mollifier-limited window and
    requires the ablated second moment to at least double over the two
    halvings, while the centered quadratic tree stays flat (each halving
    ratio <= 1.5).  Per-halving values are reported alongside.
    """
    grid = Grid(3, 48)
    part = build_partition(grid)
    sharp = Mollifier("sharp")
    mu = 1.0
    kappa = 0.02
    params = CGLParams(mu=mu, nu=1.0, lam=0.0, c=0.0)
    dt, T = 1e-3, 0.25
    idx_tree = BesovIndex(-1.0 - kappa)
    eps_ladder = (0.2, 0.1, 0.05)

    sup_u2, sup_tree = [], []
    for eps in eps_ladder:
        gen = NoiseGen(909, grid, dt=dt, eps=eps, mollifier=sharp)
        # the ablated run ignores the counterterm, so only c1 is needed
        # (the full second-order diagram sums are O(N^2) and pointless here)
        consts = RenormConstants(c1=renorm_c1(eps, grid, mu, sharp), eps=eps)
        run = run_direct(gen, params, consts, T, Field.zeros(grid),
                         renormalize=False, record_every=10)
        l2sq = [lp_norm(run.u.field(i), 2.0) ** 2 for i in range(len(run.times))]
        sup_u2.append(max(l2sq))
        # centered quadratic tree along a fresh stationary path
        gen2 = NoiseGen(909, grid, dt=0.01, eps=eps, mollifier=sharp)
        stepper = OUStepper(gen2, mu)
        xhat = ou_init_stationary(gen2, mu).values
        c1 = consts.c1
        worst_tree = 0.0
        for _ in range(40):
            xhat = stepper.step(xhat)
            x = Field(grid, SPECTRAL, xhat)
            tree = multiply(x, x.conj()) - Field.constant(grid, c1, rep=SPECTRAL)
            worst_tree = max(worst_tree, besov_norm(tree, idx_tree, part))
        sup_tree.append(worst_tree)

    growth_total = sup_u2[2] / sup_u2[0]
    tree_ratios = (sup_tree[1] / sup_tree[0], sup_tree[2] / sup_tree[1])
    passed = growth_total >= 2.0 and all(r <= 1.5 for r in tree_ratios)
    return CriterionResult(
        "renorm_ablation", passed, growth_total, 2.0,
        f"ablated |u|_L2^2 growth over eps {eps_ladder[0]}->{eps_ladder[2]}: "
        f"{growth_total:.2f} (per halving {sup_u2[1]/sup_u2[0]:.2f}, "
        f"{sup_u2[2]/sup_u2[1]:.2f}); centered tree ratios "
        f"{tree_ratios[0]:.2f}, {tree_ratios[1]:.2f}")


def criterion_besov_suite(nfields: int = 50) -> CriterionResult:
    """Monotonicity, interpolation, duality and embedding on random fields."""
    from .randomfields import spectral_slope_field
    from .fields import inner

    grid = Grid(3, 16)
    part = build_partition(grid)
    rng = np.random.default_rng(1010)
    failures = []

    # (1) monotonicity in alpha on rough fields (indices above the field's
    # own regularity, where the top blocks carry the norm), in p and in q
    for i in range(nfields):
        field_alpha = rng.uniform(-1.0, 0.5)
        f = spectral_slope_field(grid, rng, alpha=field_alpha)
        alphas = sorted(field_alpha + rng.uniform(0.3, 2.5, size=2))
        p = rng.choice([1.0, 2.0, 4.0, math.inf])
        q = rng.choice([1.0, 2.0, math.inf])
        lo = besov_norm(f, BesovIndex(alphas[0], p, q), part)
        hi = besov_norm(f, BesovIndex(alphas[1], p, q), part)
        if lo > hi * (1 + 1e-12):
            failures.append(f"alpha-monotonicity field {i}")
        n1 = besov_norm(f, BesovIndex(0.5, 2.0, q), part)
        n2 = besov_norm(f, BesovIndex(0.5, 4.0, q), part)
        if n1 > n2 * (1 + 1e-12):
            failures.append(f"p-monotonicity field {i}")
        m1 = besov_norm(f, BesovIndex(0.5, p, math.inf), part)
        m2 = besov_norm(f, BesovIndex(0.5, p, 1.0), part)
        if m1 > m2 * (1 + 1e-12):
            failures.append(f"q-monotonicity field {i}")

    # (2) L^p sandwich with fitted constant <= 3
    worst_sandwich = 0.0
    for _ in range(nfields):
        f = spectral_slope_field(grid, rng, alpha=0.0)
        for p in (1.0, 2.0, math.inf):
            lp = lp_norm(f, p)
            low = besov_norm(f, BesovIndex(0.0, p, math.inf), part)
            high = besov_norm(f, BesovIndex(0.0, p, 1.0), part)
            worst_sandwich = max(worst_sandwich, low / lp, lp / high)
    if worst_sandwich > 3.0:
        failures.append(f"lp sandwich C={worst_sandwich:.2f}")

    # (3) interpolation (exact inequality for these discrete norms)
    for _ in range(nfields):
        f = spectral_slope_field(grid, rng, alpha=rng.uniform(-0.5, 0.5))
        a0, a1 = -0.5, 1.5
        p0, p1, q0, q1 = 1.0, 4.0, 1.0, 2.0
        for t in (0.25, 0.5, 0.75):
            alpha = (1 - t) * a0 + t * a1
            p = 1.0 / ((1 - t) / p0 + t / p1)
            q = 1.0 / ((1 - t) / q0 + t / q1)
            lhs = besov_norm(f, BesovIndex(alpha, p, q), part)
            rhs = (besov_norm(f, BesovIndex(a0, p0, q0), part) ** (1 - t)
                   * besov_norm(f, BesovIndex(a1, p1, q1), part) ** t)
            if lhs > rhs * (1 + 1e-10):
                failures.append(f"interpolation nu={t}")

    # (4) duality and (5) embedding: fitted constants stable across bands.
    # Probed with near-extremal families; independent random pairs cancel
    # and their implied constant drifts with the mode count.
    def fitted(callable_pair, bands=(3, 5, 7)):
        consts = []
        for band in bands:
            worst = 0.0
            for _ in range(nfields // 3):
                worst = max(worst, callable_pair(band))
            consts.append(worst)
        return consts

    alpha = 0.75
    from .fields import reflect_spectrum

    def duality_ratio(band):
        f = band_limited_field(grid, rng, band)
        # pair f with its metric dual, which makes the pairing coherent
        ghat = reflect_spectrum(np.conj(f.spectral_values)) \
            * (1.0 + grid.k2) ** (-alpha)
        g = Field(grid, SPECTRAL, ghat)
        val = abs(inner(f, g))
        den = (besov_norm(f, BesovIndex(alpha, 2.0, 2.0), part)
               * besov_norm(g, BesovIndex(-alpha, 2.0, 2.0), part))
        return val / den

    def embedding_ratio(band):
        # Fejer-type nonnegative spike: extremal for Bernstein-type gains
        mask = np.ones(grid.shape, dtype=bool)
        for j in range(grid.dim):
            mask &= np.abs(grid.k[j]) <= band // 2
        ball = Field(grid, SPECTRAL, mask.astype(complex)
                     * np.exp(1j * rng.uniform(0, 0.2, size=grid.shape)))
        f = multiply(ball, ball.conj())
        shift = 3.0 * (1.0 / 1.0 - 1.0 / 2.0)
        lhs = besov_norm(f, BesovIndex(0.25, 2.0, math.inf), part)
        rhs = besov_norm(f, BesovIndex(0.25 + shift, 1.0, math.inf), part)
        return lhs / rhs

    from .randomfields import no_systematic_growth

    for name, consts in (("duality", fitted(duality_ratio, bands=(4, 6, 10))),
                         ("embedding", fitted(embedding_ratio, bands=(4, 6, 10)))):
        if not no_systematic_growth(consts, 2.0):
            failures.append(f"{name} constant grows: {[f'{c:.3g}' for c in consts]}")

    return CriterionResult(
        "besov_suite", not failures, float(len(failures)), 0.0,
        "; ".join(failures) if failures else f"{nfields} fields per check")


CRITERIA = {
    "bony_exactness": criterion_bony_exactness,
    "ou_spectrum": criterion_ou_spectrum,
    "renorm_constant": criterion_renorm_constant,
    "dissipativity_boundary": criterion_dissipativity_boundary,
    "threshold_identity": criterion_threshold_identity,
    "lp_inequality": criterion_lp_inequality,
    "reconstruction": criterion_reconstruction,
    "smoothing_exponents": criterion_smoothing_exponents,
    "renorm_ablation": criterion_renorm_ablation,
    "besov_suite": criterion_besov_suite,
}


def run_acceptance(verbose: bool = False, names=None) -> list[CriterionResult]:
    results = []
    for name, func in CRITERIA.items():
        if names and name not in names:
            continue
        t0 = time.time()
        result = func()
        result.runtime = time.time() - t0
        results.append(result)
        if verbose:
            print(result.line())
    return results
