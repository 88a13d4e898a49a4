"""Quantitative monitors: energy inequality, ledgers, regime checks.

Everything here is a pure functional of stored trajectories or of recorded
per-node scalars; nothing feeds back into the dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._fft import ifftn as _ifftn
from .besov import BesovIndex, DyadicPartition, Trajectory, _pair_indices, besov_norms_stacked
from .errors import ExplosionError
from .fields import FOUR_PI_SQ, Field, Grid
from .system import CGLParams, EnergyLedger, SystemState


def growth_rate(mu: float) -> float:
    """mu (mu + sqrt(1 + mu^2)), the dissipativity budget of the rotation."""
    return mu * (mu + math.sqrt(1.0 + mu * mu))


@dataclass(frozen=True)
class DissipativityQuery:
    p: float
    mu: float
    delta: float

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not (0 < self.delta <= 1):
            raise ValueError(f"delta must lie in (0,1], got {self.delta}")


def dissipativity_form(p: float, mu: float, delta: float) -> np.ndarray:
    """The raw 2x2 matrix of the gradient quadratic form (no validation)."""
    return np.array([
        [(p - 0.5 - 0.5 * delta) * mu, -0.5 * (p - 1.0)],
        [-0.5 * (p - 1.0), (0.5 - 0.5 * delta) * mu],
    ])


def dissipativity_matrix(q: DissipativityQuery) -> tuple[np.ndarray, bool]:
    """The 2x2 form controlling the gradient terms of the L^2p estimate.

    Nonnegative definiteness (trace and determinant both nonnegative) is
    equivalent to (p-1)/(mu(mu+sqrt(1+mu^2))) <= 1 - delta.
    """
    m = dissipativity_form(q.p, q.mu, q.delta)
    verdict = bool(np.trace(m) >= 0 and np.linalg.det(m) >= 0)
    return m, verdict


def dissipativity_boundary_p(mu: float, delta: float) -> float:
    """The critical p where the dissipativity determinant vanishes."""
    return 1.0 + (1.0 - delta) * growth_rate(mu)


@dataclass
class RegimeReport:
    checks: dict[str, bool]
    margins: dict[str, float]

    @property
    def global_ok(self) -> bool:
        return all(self.checks.values())


def regime_check(params: CGLParams, p: float) -> RegimeReport:
    """Global-regime gates: p > 3/2, p < 5, p below the mu budget, and the
    kappa' window kappa' < 1/3 - 1/(2p)."""
    gr = growth_rate(params.mu)
    checks = {
        "p_above_3_2": p > 1.5,
        "p_below_5": p < 5.0,
        "p_below_mu_budget": p < 1.0 + gr,
        "mu_above_1_over_2sqrt2": params.mu > 1.0 / (2.0 * math.sqrt(2.0)),
        "kappa_prime_window": params.kappa_prime < 1.0 / 3.0 - 1.0 / (2.0 * p),
    }
    margins = {
        "p_above_3_2": p - 1.5,
        "p_below_5": 5.0 - p,
        "p_below_mu_budget": 1.0 + gr - p,
        "mu_above_1_over_2sqrt2": params.mu - 1.0 / (2.0 * math.sqrt(2.0)),
        "kappa_prime_window": (1.0 / 3.0 - 1.0 / (2.0 * p)) - params.kappa_prime,
    }
    return RegimeReport(checks, margins)


def _cumtrapz(times: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid with fixed left-to-right accumulation."""
    out = np.zeros_like(vals)
    for j in range(1, len(vals)):
        out[j] = out[j - 1] + 0.5 * (vals[j - 1] + vals[j]) * (times[j] - times[j - 1])
    return out


def lp_inequality_residual(ledger: EnergyLedger, delta: float,
                           params: CGLParams) -> np.ndarray:
    """Per-node residual (right minus left side) of the L^2p energy estimate.

    Refuses to evaluate when the dissipativity verdict fails, since the
    estimate is not asserted there.  Nonnegative up to time-discretization
    error for a faithful run.
    """
    _, ok = dissipativity_matrix(DissipativityQuery(ledger.p, params.mu, delta))
    if not ok:
        raise ValueError(
            f"dissipativity condition fails for p={ledger.p}, mu={params.mu}, "
            f"delta={delta}; the inequality is not asserted"
        )
    times, m2p, m2p2, gradw, forcing = ledger.arrays()
    p = ledger.p
    lhs = (
        (m2p - m2p[0]) / (2.0 * p)
        + delta * params.mu * _cumtrapz(times, gradw)
        + params.nu.real * _cumtrapz(times, m2p2)
    )
    rhs = _cumtrapz(times, forcing)
    return rhs - lhs


@dataclass
class AprioriLedger:
    """Running integrals A, B, C of the three a priori integrands."""

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def abc_ledger(w_traj: Trajectory, p: float, kappa_prime: float,
               part: DyadicPartition) -> AprioriLedger:
    """a = 1 + ||w||^{2p+2}_{L^{2p+2}},  b = 1 + || |grad w|^2 |w|^{2p-2} ||_{L^1},
    c = ||w||^{q}_{B^{1+2k'}_{q}} with q = (2p+2)/3, integrated by trapezoid."""
    q = (2.0 * p + 2.0) / 3.0
    grid = w_traj.grid
    axes = tuple(range(1, grid.dim + 1))
    nt = len(w_traj)
    a = np.empty(nt)
    b = np.empty(nt)
    for i in range(nt):
        what = w_traj.values[i]
        wp = _ifftn(what) * grid.npoints
        mod = np.abs(wp)
        a[i] = 1.0 + float(np.mean(mod ** (2 * p + 2)))
        grad_hats = (2j * np.pi) * grid.k * what[None]
        grad_phys = _ifftn(grad_hats, axes=axes) * grid.npoints
        grad_sq = np.sum(np.abs(grad_phys) ** 2, axis=0)
        b[i] = 1.0 + float(np.mean(grad_sq * mod ** (2 * p - 2)))
    c = w_traj.node_norms(BesovIndex(1.0 + 2.0 * kappa_prime, q), part) ** q
    times = w_traj.times
    return AprioriLedger(times, a, b, c,
                         _cumtrapz(times, a), _cumtrapz(times, b),
                         _cumtrapz(times, c))


def holder_quotient_w(w_traj: Trajectory, q: float, kappa_prime: float,
                      mu: float, max_nodes: int = 300) -> float:
    """Drift-corrected Hoelder quotient of w in L^q with exponent 2 kappa'.

    sup over stored pairs u < r of ||w(r) - exp((r-u)L) w(u)||_{L^q}
    / (r-u)^{2 kappa'}; the semigroup subtraction removes the pure-decay
    motion of the earlier snapshot.  Subsampling (beyond ``max_nodes``) only
    lowers the sup.
    """
    if len(w_traj) < 2:
        raise ValueError("need at least two samples for the Hoelder quotient")
    grid = w_traj.grid
    lam = (1j + mu) * FOUR_PI_SQ * grid.k2 + 1.0
    sel = _pair_indices(len(w_traj), max_nodes)
    axes = tuple(range(1, grid.dim + 1))
    best = 0.0
    for pos, iu in enumerate(sel[:-1]):
        rest = sel[pos + 1:]
        gaps = w_traj.times[rest] - w_traj.times[iu]
        flow = np.exp(-np.multiply.outer(gaps, lam))
        diff_hat = w_traj.values[rest] - flow * w_traj.values[iu][None]
        diff_phys = _ifftn(diff_hat, axes=axes) * grid.npoints
        if q == math.inf:
            norms = np.abs(diff_phys).reshape(len(rest), -1).max(axis=1)
        else:
            norms = (np.abs(diff_phys).reshape(len(rest), -1) ** q).mean(axis=1) ** (1.0 / q)
        best = max(best, float(np.max(norms / gaps ** (2.0 * kappa_prime))))
    return best


@dataclass
class GuardThresholds:
    v_cap: float = 1e6
    w_cap: float = 1e6
    kappa: float = 0.02
    kappa_prime: float = 0.04


def explosion_guard(state: SystemState, thresholds: GuardThresholds,
                    part: DyadicPartition) -> bool:
    """True when the state trips the blow-up criterion (closed thresholds).

    Monitors ||v|| in B^(-2/3+kappa') and ||w|| in B^(-1/2-2kappa), the
    norms whose divergence characterizes the survival time; nonfinite
    values trip unconditionally.
    """
    if not (state.v.is_finite() and state.w.is_finite()):
        return True
    from .besov import besov_norm

    nv = besov_norm(state.v, BesovIndex(-2.0 / 3.0 + thresholds.kappa_prime), part)
    nw = besov_norm(state.w, BesovIndex(-0.5 - 2.0 * thresholds.kappa), part)
    return bool(nv >= thresholds.v_cap or nw >= thresholds.w_cap)


def make_guard(thresholds: GuardThresholds, part: DyadicPartition):
    """Wrap :func:`explosion_guard` as a runner callback that raises."""

    def guard(state: SystemState):
        if explosion_guard(state, thresholds, part):
            raise ExplosionError(state.t, float("nan"),
                                 f"explosion guard tripped at t={state.t:.6g}")

    return guard


class WTermTracker:
    """Optional diagnostic: per-group contributions to the w increment.

    Integrates each forcing group (and the exchange term c*v) against the
    semigroup separately with the same exponential-Euler rule as the run,
    so the nine accumulators sum to w(t) - e^{tL} w(0) exactly.  Per-term
    norms are reported; no per-term inequality is asserted.
    """

    GROUPS = ("g1", "g2", "g3", "g4", "g5", "g6", "g7", "g8", "cv")

    def __init__(self, grid: Grid, params: CGLParams, dt: float,
                 index: BesovIndex, part: DyadicPartition):
        self.grid = grid
        self.part = part
        self.index = index
        lam = (1j + params.mu) * FOUR_PI_SQ * grid.k2 + 1.0
        self.decay = np.exp(-dt * lam)
        self.phi1 = -np.expm1(-dt * lam) / lam
        self.c = params.c
        self.acc = {name: np.zeros(grid.shape, dtype=complex) for name in self.GROUPS}
        self.norm_history: dict[str, list[float]] = {name: [] for name in self.GROUPS}

    def update(self, state: SystemState, parts: dict[str, Field]):
        for name in self.GROUPS[:-1]:
            self.acc[name] = self.decay * self.acc[name] \
                + self.phi1 * parts[name].spectral_values
        self.acc["cv"] = self.decay * self.acc["cv"] \
            + self.phi1 * (self.c * state.v.spectral_values)
        stacked = np.stack([self.acc[name] for name in self.GROUPS])
        norms = besov_norms_stacked(stacked, self.index, self.part)
        for name, val in zip(self.GROUPS, norms):
            self.norm_history[name].append(float(val))

    def totals(self) -> dict[str, float]:
        return {name: (hist[-1] if hist else 0.0)
                for name, hist in self.norm_history.items()}
