"""Algorithm runners: warm-up identification, the adaptive SDP-based control
loop (ASLO), and the doubling-trick baseline.

Each runner owns one RNG seeded per trajectory and split into independent
streams for process noise, control perturbation, and warm-up perturbation,
so matched seeds share noise realizations across criterion variants.  Step
arrays are indexed s = 0..T-1 for algorithm times t = s+1 (warm-up: t = s).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import estimation, regret, schedules, synthesis
from .exceptions import (
    BlowUpError,
    ConfigurationError,
    SynthesisError,
)
from .linalg import logdet_pd, min_eig, nuclear_norm, spectral_norm, spectral_radius
from .lqr import SystemModel, step, stability_certificate

log = logging.getLogger(__name__)

BLOWUP_NORM = 1e6


@dataclass
class TrajectoryRecord:
    """Per-step arrays of one trajectory plus run metadata."""

    mode: str
    seed: int
    x: np.ndarray            # (T+1, n), states
    u: np.ndarray            # (T, m), applied inputs
    eta: np.ndarray          # (T, m), injected perturbation (nu during warm-up)
    omega: np.ndarray        # (T, n), noise entering x[s+1]
    cost: np.ndarray         # (T,)
    policy_id: np.ndarray    # (T,) int
    epoch: np.ndarray        # (T,) int
    lambda_t: np.ndarray     # (T,)
    r_t: np.ndarray          # (T,), radius of the policy in force
    logdet_V: np.ndarray     # (T,)
    beta_used: np.ndarray    # (T,)
    est_error: np.ndarray    # (T,), nuclear-norm error of the epoch estimate
    diagnostics: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.cost.shape[0]

    def max_state_norm(self):
        return float(np.max(np.linalg.norm(self.x, axis=1)))


@dataclass
class PolicyEpoch:
    """Synthesis artifacts frozen at one policy update."""

    epoch_index: int
    tau: int
    K: np.ndarray
    Sigma_star: np.ndarray
    P_dual: np.ndarray
    mu: float
    r: float
    beta: float
    lambda_tau: float
    logdet_V_tau: float
    normV_tau: float
    theta_hat: np.ndarray
    est_error: float


def _streams(seed: int):
    children = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(children[0]),   # process noise omega
            np.random.default_rng(children[1]),   # ASLO perturbation eta
            np.random.default_rng(children[2]))   # warm-up perturbation nu


def sample_perturbation(t: int, params: schedules.ScheduleParams, rng) -> np.ndarray:
    """eta_t ~ N(0, 2 sigma^2 kappa^2 p_bar_t / sqrt(t) * noise_scale * I)."""
    if t < 1:
        raise ConfigurationError("t must be >= 1", field="t")
    var = (2.0 * params.sigma_w**2 * params.kappa**2
           * schedules.p_bar(t, params.delta, params.phi) / math.sqrt(t)
           * params.noise_scale)
    return math.sqrt(var) * rng.standard_normal(params.m)


def perturbation_variance(t: int, params: schedules.ScheduleParams) -> float:
    return (2.0 * params.sigma_w**2 * params.kappa**2
            * schedules.p_bar(t, params.delta, params.phi) / math.sqrt(t)
            * params.noise_scale)


def replay_states(record: TrajectoryRecord, model: SystemModel) -> np.ndarray:
    """Re-simulate the state sequence from the stored inputs and noise."""
    x = np.empty_like(record.x)
    x[0] = record.x[0]
    for s in range(record.T):
        x[s + 1] = step(model, x[s], record.u[s], record.omega[s])
    return x


def run_warmup(model: SystemModel, K0, T0: int, seed: int, x0=None,
               rho: float | None = None):
    """Warm-up identification under u = K0 x + nu, nu ~ N(0, 2 sigma^2 kappa0^2 I).

    Returns (Theta_0, record) where Theta_0 is the ridge estimate with
    regularizer rho = sigma^2 / theta_bound^2 pulled toward zero.
    """
    if T0 < 1:
        raise ConfigurationError("T0 must be >= 1", field="T0")
    K0 = np.atleast_2d(np.asarray(K0, dtype=float))
    cert0 = stability_certificate(model, K0)  # raises if K0 is not stabilizing
    n, m = model.n, model.m
    omega_rng, _, nu_rng = _streams(seed)
    if rho is None:
        rho = model.sigma_w**2 / model.theta_bound**2
    nu_std = math.sqrt(2.0) * model.sigma_w * cert0.kappa

    est = estimation.EstimatorState(dim_z=n + m, dim_x=n)
    x = np.zeros((T0 + 1, n))
    if x0 is not None:
        x[0] = np.asarray(x0, dtype=float)
    u = np.zeros((T0, m))
    nu = np.zeros((T0, m))
    omega = np.zeros((T0, n))
    cost = np.zeros(T0)
    logdets = np.zeros(T0)
    for s in range(T0):
        nu[s] = nu_std * nu_rng.standard_normal(m)
        u[s] = K0 @ x[s] + nu[s]
        omega[s] = model.sigma_w * omega_rng.standard_normal(n)
        x[s + 1] = step(model, x[s], u[s], omega[s])
        cost[s] = float(x[s] @ model.Q @ x[s] + u[s] @ model.R @ u[s])
        estimation.ingest(est, np.concatenate([x[s], u[s]]), x[s + 1])
        logdets[s] = logdet_pd(est.covariance(max(rho, 1e-300)))
        if np.linalg.norm(x[s + 1]) > BLOWUP_NORM:
            raise BlowUpError(
                "warm-up state blow-up",
                diagnostics={"t": s + 1, "x_norm": float(np.linalg.norm(x[s + 1]))},
            )
    if rho > 0:
        Theta_0 = estimation.estimate(est, rho)
    else:  # degenerate sigma_w = 0: minimum-norm solution of S Theta = C
        Theta_0, *_ = np.linalg.lstsq(est.gram, est.cross, rcond=None)
    nan = np.full(T0, np.nan)
    record = TrajectoryRecord(
        mode="warmup", seed=seed, x=x, u=u, eta=nu, omega=omega, cost=cost,
        policy_id=np.zeros(T0, dtype=int), epoch=np.zeros(T0, dtype=int),
        lambda_t=np.full(T0, rho), r_t=nan.copy(), logdet_V=logdets,
        beta_used=nan.copy(),
        est_error=nan.copy(),
        diagnostics={
            "kappa0": cert0.kappa, "gamma0": cert0.gamma,
            "theta0_error": nuclear_norm(Theta_0 - model.theta_star),
        },
    )
    return Theta_0, record


def _mu_cap(params: schedules.ScheduleParams, V) -> float:
    # the stability precondition mu |P|_* |V^{-1}| <= alpha0/4 with |P|_* <= nu/sigma^2
    return params.alpha0 * params.sigma_w**2 * min_eig(V) / (4.0 * params.nu)


def run_aslo(model: SystemModel, Theta_0, anchor_eps: float, T: int,
             params: schedules.ScheduleParams, seed: int, x0=None,
             checkpoints=(), mu_override: float | None = None,
             lambda_override: float | None = None, solver_tol: float = 1e-9):
    """Adaptive SDP-based control for T steps from an anchored estimate.

    Policy updates fire on the determinant criterion in force; synthesis
    failures fall back to the previous policy and are counted.  Returns
    (record, policy_history, ledger).
    """
    if T < 1:
        raise ConfigurationError("T must be >= 1", field="T")
    if not math.isfinite(params.G_phi):
        raise ConfigurationError(
            "theory-mode constants are not simulatable; use practical mode",
            field="constants_mode")
    n, m = model.n, model.m
    Theta_0 = np.asarray(Theta_0, dtype=float)
    omega_rng, eta_rng, _ = _streams(seed)
    est = estimation.EstimatorState(dim_z=n + m, dim_x=n, anchor=Theta_0,
                                    anchor_error=anchor_eps)
    synth_model = model
    if model.sigma_w == 0:
        # K is invariant to rescaling W; keep the SDP well posed
        import dataclasses
        synth_model = dataclasses.replace(model, sigma_w=1.0, name=model.name)

    x = np.zeros((T + 1, n))
    if x0 is not None:
        x[0] = np.asarray(x0, dtype=float)
    if np.linalg.norm(x[0]) > BLOWUP_NORM:
        raise BlowUpError("initial state beyond the runaway threshold",
                          diagnostics={"t": 0, "x_norm": float(np.linalg.norm(x[0]))})
    u = np.zeros((T, m))
    eta = np.zeros((T, m))
    omega = np.zeros((T, n))
    cost = np.zeros(T)
    policy_id = np.zeros(T, dtype=int)
    epoch_arr = np.zeros(T, dtype=int)
    lam_arr = np.zeros(T)
    r_arr = np.zeros(T)
    logdet_arr = np.zeros(T)
    beta_arr = np.zeros(T)
    err_arr = np.zeros(T)

    history: list[PolicyEpoch] = []
    ledger = regret.RegretLedger(nu=params.nu, sigma_w=model.sigma_w)
    checkpoints = sorted(set(int(c) for c in checkpoints))
    containment = []
    failures = 0
    anynum_all = []
    current: PolicyEpoch | None = None
    beta_in_force = params.beta
    logdet_tau = -math.inf

    for s in range(T):
        t = s + 1
        lam = schedules.lambda_t(t, params) if lambda_override is None else lambda_override
        V = est.covariance(lam)
        logdetV = logdet_pd(V)
        fire = (current is None) or schedules.should_update(logdetV, logdet_tau, beta_in_force)
        if fire:
            theta_hat = estimation.estimate(est, lam)
            if params.radius_variant == "anchored":
                r = estimation.confidence_radius(est, params.delta, lam, model.sigma_w,
                                                 "anchored", eps=anchor_eps)
            else:
                r = estimation.confidence_radius(est, params.delta, lam, model.sigma_w,
                                                 "unanchored",
                                                 theta_bound=model.theta_bound)
            mu_t = synthesis.mu(r, model.theta_bound, V, params.mu_mode)
            if mu_override is not None:
                mu_t = mu_override
            elif params.mu_clamp and params.constants_mode == "practical":
                mu_t = min(mu_t, _mu_cap(params, V))
            try:
                policy = synthesis.synthesize_policy(
                    theta_hat, synth_model, mu_t, V, tol=solver_tol,
                    epoch_index=(0 if current is None else current.epoch_index + 1),
                    tau=t)
                A_hat = theta_hat[:n, :].T
                B_hat = theta_hat[n:, :].T
                if spectral_radius(A_hat + B_hat @ policy.K) >= 1.0:
                    raise SynthesisError("extracted gain does not stabilize its own model")
                if params.criterion == "adaptive_beta":
                    beta_in_force = schedules.adaptive_beta(t, r, params)
                current = PolicyEpoch(
                    epoch_index=policy.epoch_index, tau=t, K=policy.K,
                    Sigma_star=policy.Sigma_star, P_dual=policy.P_dual,
                    mu=mu_t, r=r, beta=beta_in_force, lambda_tau=lam,
                    logdet_V_tau=logdetV, normV_tau=spectral_norm(V),
                    theta_hat=theta_hat,
                    est_error=nuclear_norm(theta_hat - model.theta_star),
                )
                history.append(current)
                logdet_tau = logdetV
            except SynthesisError as exc:
                failures += 1
                log.warning("synthesis failed at t=%d: %s", t, exc)
                if current is None:
                    raise
                logdet_tau = logdetV  # restart the epoch clock on the old policy
        pol = current
        eta[s] = sample_perturbation(t, params, eta_rng)
        u[s] = pol.K @ x[s] + eta[s]
        omega[s] = model.sigma_w * omega_rng.standard_normal(n)
        x[s + 1] = step(model, x[s], u[s], omega[s])
        cost[s] = float(x[s] @ model.Q @ x[s] + u[s] @ model.R @ u[s])
        z = np.concatenate([x[s], u[s]])
        q_t = float(z @ np.linalg.solve(V, z))
        ledger.accumulate(
            x_t=x[s], x_next=x[s + 1], omega=omega[s], eta=eta[s], z=z, q_t=q_t,
            pol=pol, model=model, params=params)
        anynum_all.append(schedules.anynum_condition(pol.mu, V, params.kappa))

        policy_id[s] = pol.epoch_index
        epoch_arr[s] = pol.epoch_index
        lam_arr[s] = lam
        r_arr[s] = pol.r
        logdet_arr[s] = logdetV
        beta_arr[s] = pol.beta
        err_arr[s] = pol.est_error

        estimation.ingest(est, z, x[s + 1])
        if np.linalg.norm(x[s + 1]) > BLOWUP_NORM:
            raise BlowUpError(
                "ASLO state blow-up",
                diagnostics={"t": t, "x_norm": float(np.linalg.norm(x[s + 1])),
                             "epoch": int(pol.epoch_index)},
            )
        if t in checkpoints:
            ell = estimation.ellipsoid(
                est, params.delta, schedules.lambda_t(t, params)
                if lambda_override is None else lambda_override,
                model.sigma_w, params.radius_variant,
                eps=anchor_eps, theta_bound=model.theta_bound)
            containment.append(
                (t, bool(estimation.ellipsoid_contains(ell, model.theta_star))))

    ledger.finalize(epoch_marks=[p.tau for p in history])
    record = TrajectoryRecord(
        mode="aslo", seed=seed, x=x, u=u, eta=eta, omega=omega, cost=cost,
        policy_id=policy_id, epoch=epoch_arr, lambda_t=lam_arr, r_t=r_arr,
        logdet_V=logdet_arr, beta_used=beta_arr, est_error=err_arr,
        diagnostics={
            "synthesis_failures": failures,
            "containment": containment,
            "anynum_condition": anynum_all,
            "anchor_eps": float(anchor_eps),
        },
    )
    return record, history, ledger


def run_fixed_policy(model: SystemModel, K, T: int, seed: int,
                     params: schedules.ScheduleParams | None = None,
                     x0=None, anchor=None, checkpoints=()):
    """Lean rollout of a fixed gain with the ASLO input perturbation.

    Ingests every transition; used for coverage and excitation experiments
    where no policy synthesis is wanted.  ``anchor`` is an optional
    (Theta_0, eps) pair switching the ellipsoid to the anchored variant.
    Returns (cost, est, containment).
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    n, m = model.n, model.m
    omega_rng, eta_rng, _ = _streams(seed)
    if anchor is not None:
        est = estimation.EstimatorState(dim_z=n + m, dim_x=n,
                                        anchor=anchor[0], anchor_error=anchor[1])
    else:
        est = estimation.EstimatorState(dim_z=n + m, dim_x=n)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    cost = np.zeros(T)
    containment = []
    checkpoints = set(int(c) for c in checkpoints)
    sigma = model.sigma_w
    for s in range(T):
        t = s + 1
        eta_t = (sample_perturbation(t, params, eta_rng)
                 if params is not None else np.zeros(m))
        u_t = K @ x + eta_t
        w_t = sigma * omega_rng.standard_normal(n)
        x_next = model.A @ x + model.B @ u_t + w_t
        cost[s] = float(x @ model.Q @ x + u_t @ model.R @ u_t)
        estimation.ingest(est, np.concatenate([x, u_t]), x_next)
        x = x_next
        if np.linalg.norm(x) > BLOWUP_NORM:
            raise BlowUpError("fixed-policy state blow-up",
                              diagnostics={"t": t, "x_norm": float(np.linalg.norm(x))})
        if t in checkpoints and params is not None:
            lam = schedules.lambda_t(t, params)
            variant = "anchored" if anchor is not None else "unanchored"
            ell = estimation.ellipsoid(
                est, params.delta, lam, sigma, variant,
                eps=None if anchor is None else anchor[1],
                theta_bound=model.theta_bound)
            containment.append(
                (t, bool(estimation.ellipsoid_contains(ell, model.theta_star))))
    return cost, est, containment


def _concat_records(parts: list[TrajectoryRecord], seed: int) -> TrajectoryRecord:
    xs = [parts[0].x] + [p.x[1:] for p in parts[1:]]
    offsets = np.cumsum([0] + [int(p.policy_id.max()) + 1 for p in parts[:-1]])
    pid = np.concatenate([p.policy_id + off for p, off in zip(parts, offsets)])
    epoch = np.concatenate([p.epoch + off for p, off in zip(parts, offsets)])
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
    bounds = np.cumsum([p.T for p in parts]).tolist()
    return TrajectoryRecord(
        mode="doubling", seed=seed, x=np.concatenate(xs, axis=0),
        u=cat("u"), eta=cat("eta"), omega=cat("omega"), cost=cat("cost"),
        policy_id=pid, epoch=epoch, lambda_t=cat("lambda_t"), r_t=cat("r_t"),
        logdet_V=cat("logdet_V"), beta_used=cat("beta_used"),
        est_error=cat("est_error"),
        diagnostics={"segment_bounds": bounds,
                     "segments": [p.diagnostics for p in parts]},
    )


def run_doubling(model: SystemModel, K0, base_horizon: int, total_T: int,
                 params: schedules.ScheduleParams, seed: int) -> TrajectoryRecord:
    """Doubling-trick baseline: restart a horizon-aware variant on segments
    T_i = base 2^i until total_T steps have elapsed.

    Each segment spends ceil(sqrt(T_i)) steps on warm-up and the remainder on
    the SDP loop with the regularizer frozen at its horizon value
    lambda = G log(T_i/delta).  The plant state carries across restarts.
    """
    if base_horizon < 1:
        raise ConfigurationError("base_horizon must be >= 1", field="base_horizon")
    parts = []
    done = 0
    i = 0
    x_cur = None
    seeds = np.random.SeedSequence(seed).spawn(64)
    while done < total_T:
        Ti = min(base_horizon * 2**i, total_T - done)
        w_i = min(Ti, max(1, math.ceil(math.sqrt(Ti))))
        seg_seed = seeds[2 * i].entropy if hasattr(seeds[2 * i], "entropy") else seed + i
        Theta_0, wrec = run_warmup(model, K0, w_i, seed=int(seg_seed) % 2**32, x0=x_cur)
        parts.append(wrec)
        x_cur = wrec.x[-1]
        rest = Ti - w_i
        if rest > 0:
            lam_fix = params.G_phi * math.log(max(Ti, 2) / params.delta)
            arec, _, _ = run_aslo(
                model, Theta_0,
                anchor_eps=2.0 * model.theta_bound, T=rest, params=params,
                seed=int(seeds[2 * i + 1].entropy) % 2**32, x0=x_cur,
                lambda_override=lam_fix)
            parts.append(arec)
            x_cur = arec.x[-1]
        done += Ti
        i += 1
    return _concat_records(parts, seed)
