"""Realized-regret accounting, the six-term decomposition, and evaluators
for each term's closed-form upper bound.

The decomposition terms are computed literally from stored trajectory data
(value-difference telescope, noise cross terms, the weighted V^{-1} quadratic
sum, and the perturbation terms); the indicator of the estimation good event
is treated as always-on, with ellipsoid losses flagged separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, IncompleteTrajectoryError

R_NAMES = ("R1", "R2", "R3", "R4", "R5", "R6")


@dataclass
class RegretLedger:
    """Online accumulators for the decomposition plus epoch bookkeeping."""

    nu: float
    sigma_w: float
    J_star: float = math.nan
    R: np.ndarray = field(default_factory=lambda: np.zeros(6))
    epoch_marks: list = field(default_factory=list)
    steps: int = 0
    bound_report: dict = field(default_factory=dict)

    def accumulate(self, x_t, x_next, omega, eta, z, q_t, pol, model, params):
        P = pol.P_dual
        K = pol.K
        M = model.A + model.B @ K
        self.R[0] += float(x_t @ P @ x_t - x_next @ P @ x_next)
        self.R[1] += float(omega @ P @ (M @ x_t))
        self.R[2] += float(omega @ P @ omega) - model.sigma_w**2 * float(np.trace(P))
        factor = 2.0 * self.nu / self.sigma_w**2 if self.sigma_w > 0 else 0.0
        if params.criterion == "adaptive_beta":
            self.R[3] += factor * pol.mu * q_t
            self.R[3] += factor * pol.beta * pol.r * q_t
            self.R[3] += 2.0 * factor * params.theta_bound * pol.beta \
                * math.sqrt(pol.r * pol.normV_tau) * q_t
        else:
            self.R[3] += factor * (1.0 + pol.beta) * pol.mu * q_t
        self.R[4] += 2.0 * float(eta @ model.R @ (K @ x_t))
        self.R[5] += float(eta @ model.R @ eta)
        self.steps += 1

    def finalize(self, epoch_marks):
        self.epoch_marks = list(epoch_marks)

    def n_updates(self, t=None):
        """Criterion-fired updates by time t (the initial solve is not a switch)."""
        marks = self.epoch_marks if t is None else [m for m in self.epoch_marks if m <= t]
        return max(0, len(marks) - 1)

    def terms(self):
        return dict(zip(R_NAMES, self.R.tolist()))


def realized_regret(traj, J_star: float) -> np.ndarray:
    """Partial sums of (c_t - J*)."""
    return np.cumsum(np.asarray(traj.cost, dtype=float) - J_star)


def decompose(traj, policy_history, params, model) -> np.ndarray:
    """Recompute R1..R6 from the stored trajectory, independently of the
    runner's online accumulators (V_t is rebuilt from the raw regressors)."""
    for name in ("omega", "eta"):
        arr = getattr(traj, name, None)
        if arr is None or np.any(~np.isfinite(arr)):
            raise IncompleteTrajectoryError(f"trajectory is missing {name} records")
    T = traj.T
    n, m = model.n, model.m
    by_epoch = {p.epoch_index: p for p in policy_history}
    R = np.zeros(6)
    gram = np.zeros((n + m, n + m))
    for s in range(T):
        pol = by_epoch[int(traj.policy_id[s])]
        P, K = pol.P_dual, pol.K
        x_t, x_next = traj.x[s], traj.x[s + 1]
        omega, eta = traj.omega[s], traj.eta[s]
        z = np.concatenate([x_t, traj.u[s]])
        V = traj.lambda_t[s] * np.eye(n + m) + gram
        q_t = float(z @ np.linalg.solve(V, z))
        M = model.A + model.B @ K
        R[0] += float(x_t @ P @ x_t - x_next @ P @ x_next)
        R[1] += float(omega @ P @ (M @ x_t))
        R[2] += float(omega @ P @ omega) - model.sigma_w**2 * float(np.trace(P))
        factor = 2.0 * params.nu / model.sigma_w**2 if model.sigma_w > 0 else 0.0
        if params.criterion == "adaptive_beta":
            R[3] += factor * pol.mu * q_t
            R[3] += factor * pol.beta * pol.r * q_t
            R[3] += 2.0 * factor * params.theta_bound * pol.beta \
                * math.sqrt(pol.r * pol.normV_tau) * q_t
        else:
            R[3] += factor * (1.0 + pol.beta) * pol.mu * q_t
        R[4] += 2.0 * float(eta @ model.R @ (K @ x_t))
        R[5] += float(eta @ model.R @ eta)
        gram += np.outer(z, z)
    return R


def term_bounds(T: int, params, traj_stats: dict) -> dict:
    """Closed-form per-term bounds evaluated with the run's measured statistics.

    traj_stats carries X_T (max state norm), Z_T (max |z_t|^2), r_T, lambda_T,
    lambda_1; beta defaults to the criterion's value.
    """
    from .schedules import p_bar

    nu, sig = params.nu, params.sigma_w
    tb, kap = params.theta_bound, params.kappa
    n, m, delta = params.n, params.m, params.delta
    X = traj_stats["X_T"]
    Z2 = traj_stats["Z_T"]
    r_T = traj_stats["r_T"]
    lam_T = traj_stats["lambda_T"]
    lam_1 = traj_stats["lambda_1"]
    beta = traj_stats.get("beta", params.beta)
    G = params.G_phi
    pbT = p_bar(T, delta, params.phi)

    n_switch = (n + m) * math.log2(max((lam_T + Z2 * T) / lam_1, 2.0))
    b1 = nu / sig**2 * X**2 + nu / sig**2 * n_switch * X**2
    b2 = nu * tb / sig * math.sqrt(3.0 * T * math.log(4.0 / delta))
    b3 = 8.0 * nu * math.sqrt(T * math.log(4.0 * T / delta) ** 3)
    if math.isfinite(G):
        b4 = (4.0 * nu * (1.0 + beta) / sig**2) * (n + m) \
            * math.log((T + params.alpha_bar * T**2 / G) / delta) \
            * (r_T + 2.0 * tb * math.sqrt(r_T) * math.log(T / delta)
               * (math.sqrt(G) + math.sqrt(T)))
    else:
        b4 = math.inf
    b5 = 2.0 * sig * params.alpha1 * kap * X \
        * math.sqrt(8.0 * pbT * math.log(2.0 / delta)) * T**0.25
    b6 = 10.0 * params.alpha1 * m * sig**2 * kap**2 \
        * (math.log(T / delta) / math.log(1.0 / delta)) ** (params.phi + 1) \
        * math.sqrt(T)
    return dict(zip(R_NAMES, (b1, b2, b3, b4, b5, b6)))


def warmup_regret_bound(T0: int, params, x0_norm: float = 0.0,
                        kappa0: float | None = None,
                        gamma0: float | None = None) -> float:
    """alpha1 T0 Z_{T0}^2 with Z^2 = 2 (1+kappa0^2) X^2 + 2 Y^2 from the
    warm-up state-norm and perturbation-norm bounds."""
    if T0 < 1:
        raise ConfigurationError("T0 must be >= 1", field="T0")
    k0 = params.kappa0 if kappa0 is None else kappa0
    g0 = params.gamma0 if gamma0 is None else gamma0
    if not (math.isfinite(k0) and math.isfinite(g0)):
        raise ConfigurationError("warm-up bound needs (kappa0, gamma0)", field="kappa0")
    sig, tb = params.sigma_w, params.theta_bound
    n, m, delta = params.n, params.m, params.delta
    lT = math.log(max(T0, 2) / delta)
    X = k0 * x0_norm + sig * math.sqrt(10.0 * (n + m * k0**2 * tb**2) * lT)
    Y = 10.0 * sig * math.sqrt(2.0 * m * k0**2 * lT)
    Z2 = 2.0 * (1.0 + k0**2) * X**2 + 2.0 * Y**2
    return params.alpha1 * T0 * Z2


def slope(series, window) -> float:
    """Least-squares slope of log(series) against log(t) over [t_lo, t_hi].

    ``series[i]`` is the value at t = i+1.
    """
    series = np.asarray(series, dtype=float)
    t_lo, t_hi = window
    t = np.arange(1, series.shape[0] + 1)
    mask = (t >= t_lo) & (t <= t_hi)
    if not np.any(mask):
        raise ConfigurationError("window contains no samples", field="window")
    y = series[mask]
    if np.any(y <= 0) or np.any(~np.isfinite(y)):
        raise ConfigurationError("series must be positive on the window", field="series")
    A = np.vstack([np.log(t[mask]), np.ones(mask.sum())]).T
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return float(coef[0])
