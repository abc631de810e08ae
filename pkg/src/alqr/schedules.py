"""Scalar schedules and constants: lambda_t, p_bar_t, phi_bar(delta), G(phi),
epsilon targets, warm-up duration, update criteria, and the adaptive beta rule.

Theory-mode constants involve kappa^10 factors and tau_* towers that overflow
doubles, so everything on that path is carried in log10; practical mode swaps
in user scale factors with the same schedule shapes.  All logs are natural
unless a name says log10.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigurationError, ScheduleError
log = logging.getLogger(__name__)

CRITERIA = ("det_double", "fixed_beta", "adaptive_beta", "relaxed_sequential")

LN10 = math.log(10.0)


def _log10_ln1p_pow10(e: float) -> float:
    """log10(ln(1 + 10^e)), stable across the whole exponent range."""
    if e < -12.0:
        return e  # ln(1+x) ~ x
    if e > 300.0:
        return math.log10(e * LN10)
    return math.log10(math.log1p(10.0**e))


def phi_bar(delta: float) -> float:
    """Largest phi with (log(1/delta)/log(t/delta))^phi sqrt(t) > 1 for t >= 1.

    Equals the minimum over t > 1 of h(t) = (ln t / 2) / ln(ln(t/delta)/ln(1/delta)),
    located numerically on a log grid over [1+1e-6, 1e12] with local
    refinement, then backed off by a 1e-6 margin.
    """
    if not 0 < delta < 1:
        raise ConfigurationError("delta must lie in (0, 1)", field="delta")
    L = math.log(1.0 / delta)

    def h(t):
        denom = math.log(math.log(t / delta) / L)
        return 0.5 * math.log(t) / denom

    lo, hi = 1.0 + 1e-6, 1e12
    grid = np.exp(np.linspace(np.log(lo), np.log(hi), 4001))
    vals = np.array([h(t) for t in grid])
    k = int(np.argmin(vals))
    for _ in range(3):
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, len(grid) - 1)]
        grid = np.exp(np.linspace(np.log(a), np.log(b), 2001))
        vals = np.array([h(t) for t in grid])
        k = int(np.argmin(vals))
    return float(vals[k]) - 1e-6


def p_bar(t: float, delta: float, phi: float) -> float:
    """(log(t/delta)/log(1/delta))^phi, the perturbation-growth factor."""
    if t < 1:
        raise ConfigurationError("t must be >= 1", field="t")
    return float((math.log(t / delta) / math.log(1.0 / delta)) ** phi)


@dataclass
class GFixedPoint:
    log10_G: float
    log10_branch1: float
    log10_branch2: float
    log10_tau_star: float
    log10_ln_tau_star_over_delta: float
    residual: float            # |G - RHS(G)| / G, via the log-space gap
    iterations: int


@dataclass
class GSpec:
    """The self-referential inequality G >= max(branch1(tau_*(G)), branch2(G)).

    branch1 = (sigma^2/40) sqrt(tau_*) (ln(tau_*/delta))^{phi-1} / (ln(1/delta))^phi
    branch2 = coef * 8 n^2 (n+m) ln(1 + alpha_bar/G)

    tau_star_form="proof" uses tau_* = delta (1+alpha_bar/G)^{l_*} with
    l_* = a1 ln(1/delta) sqrt(8 alpha_bar n^2 (n+m)) / (2 sigma (phi-1));
    "statement" uses tau_* = delta 10^{l_*^{1/(phi-1)}} with
    l_* = a1 sqrt(4 alpha_bar n^2 (n+m)) (ln(1/delta))^phi / sigma.
    """

    delta: float
    phi: float
    sigma_w: float
    n: int
    m: int
    alpha_bar: float
    log10_a1: float
    log10_coef: float
    tau_star_form: str = "proof"

    def branches(self, L):
        lnd = math.log(1.0 / self.delta)
        d_tot = self.n * self.n * (self.n + self.m)
        ll = _log10_ln1p_pow10(math.log10(self.alpha_bar) - L)
        if self.tau_star_form == "proof":
            log10_lstar = (self.log10_a1 + math.log10(lnd)
                           + 0.5 * math.log10(8 * self.alpha_bar * d_tot)
                           - math.log10(2 * self.sigma_w * (self.phi - 1)))
            log10_ln_ts = log10_lstar + ll
            # l_* log10(1+abar/G), itself handled in logs
            t1 = log10_lstar + ll - math.log10(LN10)
            log10_tau = math.log10(self.delta) + (10.0**t1 if t1 < 300 else math.inf)
        else:
            log10_ls = (self.log10_a1 + 0.5 * math.log10(4 * self.alpha_bar * d_tot)
                        + self.phi * math.log10(lnd) - math.log10(self.sigma_w))
            expo = 10.0 ** (log10_ls / (self.phi - 1))
            log10_tau = math.log10(self.delta) + expo
            log10_ln_ts = math.log10(LN10) + math.log10(expo)
        b1 = (math.log10(self.sigma_w**2 / 40.0) + 0.5 * log10_tau
              + (self.phi - 1) * log10_ln_ts - self.phi * math.log10(lnd))
        b2 = self.log10_coef + math.log10(8 * d_tot) + ll
        return b1, b2, log10_tau, log10_ln_ts

    def rhs_log10(self, L):
        b1, b2, _, _ = self.branches(L)
        return max(b1, b2)


def _g_fixed_point(spec: GSpec) -> GFixedPoint:
    """Minimal G with G >= RHS(G), i.e. the root of the strictly decreasing
    map RHS(G) - G, found by bracketing bisection in log10 space.

    Near the root the map's slope can be far below -1 (the tau_* tower), so
    plain or damped fixed-point iteration diverges; bisection on the
    monotone gap is the robust resolution.
    """
    if spec.phi <= 1:
        raise ScheduleError("G(phi) requires phi > 1")
    iters = 0
    lo = math.log10(spec.alpha_bar)
    while spec.rhs_log10(lo) <= lo:
        lo -= 50.0
        iters += 1
        if lo < -5000:
            raise ScheduleError("G(phi) bracketing failed from below")
    hi = max(lo + 1.0, 1.0)
    while spec.rhs_log10(hi) > hi:
        hi = hi * 2.0 if hi > 1 else hi + 10.0
        iters += 1
        if hi > 1e301:
            raise ScheduleError("G(phi) bracketing failed from above")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        iters += 1
        if spec.rhs_log10(mid) > mid:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, abs(hi)):
            break
    L = hi  # the minimal valid G lies at the crossing; hi satisfies G >= RHS
    b1, b2, log10_tau, log10_ln_ts = spec.branches(L)
    dL = max(b1, b2) - L
    residual = abs(10.0**dL - 1.0) if abs(dL) < 1.0 else math.inf
    return GFixedPoint(
        log10_G=L,
        log10_branch1=b1,
        log10_branch2=b2,
        log10_tau_star=log10_tau,
        log10_ln_tau_star_over_delta=log10_ln_ts,
        residual=residual,
        iterations=iters,
    )


def g_spec(params: "ScheduleParams", star: bool = False) -> GSpec:
    """GSpec for the base constants, or the relaxed-sequential ones (star)."""
    tb, kap = params.theta_bound, params.kappa
    if star:
        return GSpec(
            delta=params.delta, phi=params.phi, sigma_w=params.sigma_w,
            n=params.n, m=params.m, alpha_bar=params.alpha_under,
            log10_a1=math.log10(1280.0) + 2 * math.log10(kap) + math.log10(tb),
            log10_coef=2 * (math.log10(32.0) + 2 * math.log10(kap)
                            + math.log10(tb) + math.log10(params.sigma_w)),
            tau_star_form=params.tau_star_form,
        )
    return GSpec(
        delta=params.delta, phi=params.phi, sigma_w=params.sigma_w,
        n=params.n, m=params.m, alpha_bar=params.alpha_bar,
        log10_a1=math.log10(10240.0) + 10 * math.log10(kap) + math.log10(tb),
        log10_coef=2 * (math.log10(256.0) + 10 * math.log10(kap)
                        + math.log10(tb) + math.log10(params.sigma_w)),
        tau_star_form=params.tau_star_form,
    )


@dataclass
class ScheduleParams:
    """All scalar schedule inputs of one run; immutable after construction."""

    delta: float
    phi: float
    phi_bar: float
    n: int
    m: int
    sigma_w: float
    theta_bound: float
    alpha0: float
    alpha1: float
    nu: float
    kappa: float
    gamma: float
    alpha_bar: float
    criterion: str = "det_double"
    constants_mode: str = "practical"
    lambda_scale: float = 1.0
    noise_scale: float = 1.0
    beta: float = 1.0
    chi: float = 0.0
    zeta: float = 0.0
    alpha_under: float = math.nan
    G_phi: float = math.nan
    G_star: float = math.nan
    log10_G: float = math.nan
    log10_G_star: float = math.nan
    log10_tau_star: float = math.nan
    eps_bar: float = math.nan
    eps_under: float = math.nan
    log10_eps_bar: float = math.nan
    log10_eps_under: float = math.nan
    mu_mode: str = "lemma"
    radius_variant: str = "anchored"
    mu_clamp: bool = True
    tau_star_form: str = "proof"
    kappa0: float = math.nan
    gamma0: float = math.nan

    def with_criterion(self, criterion, beta=None):
        out = replace(self, criterion=criterion)
        if beta is not None:
            out = replace(out, beta=beta)
        return out


def _alpha_bar(kappa, gamma, sigma_w, n, m, theta_bound):
    # state-norm parameter alpha set to kappa (its minimal admissible value)
    a2 = kappa**2
    return (40.0 * (1 + a2) / gamma**2) * a2 * sigma_w**2 * (n + m * a2 * theta_bound**2) \
        + 20.0 * sigma_w**2 * a2 * m


def _alpha_under(kappa, gamma, sigma_w, n, m, theta_bound, chi, lambda1):
    """t-free constant bounding |z_t|^2 / (log(t/delta))^{1/(1-chi)}.

    The published form carries a stray log(t/delta) inside; the derivation's
    t-free constant is used here.
    """
    if not 0 <= chi < 1:
        raise ScheduleError("chi must lie in [0, 1)")
    e_chi = 1.0 / (1.0 - chi)
    kap_star = ((2 * kappa**2 * math.e * chi) / (lambda1 * gamma)) ** chi \
        * math.exp(gamma * (1.0 - math.e * chi / gamma)) if chi > 0 else math.exp(gamma)
    alpha2 = max(kappa, kap_star)
    lead = (alpha2 / gamma + 2 * alpha2 * kappa**2 * (1 - gamma) / (gamma**2 * lambda1))
    base = 10.0 * sigma_w**2 * (n + m * kappa**2 * theta_bound**2)
    return lead ** (2.0 * e_chi) * base**e_chi + 10.0 * sigma_w**2 * kappa**2 * m


def build_schedule(model, nu=None, cert0=None, delta=0.1, phi=1.5,
                   criterion="det_double", constants_mode="practical",
                   lambda_scale=1.0, noise_scale=None, beta=1.0, chi=0.0,
                   mu_mode="lemma", radius_variant="anchored", mu_clamp=True,
                   tau_star_form="proof") -> ScheduleParams:
    """Assemble ScheduleParams from a model plus either nu or an initial cert."""
    from .lqr import kappa_gamma, nu_bound

    if criterion not in CRITERIA:
        raise ConfigurationError(f"unknown criterion {criterion!r}", field="criterion")
    if not 0 < delta < 1:
        raise ConfigurationError("delta must lie in (0, 1)", field="delta")
    if nu is None:
        if cert0 is None:
            raise ConfigurationError("need nu or an initial certificate", field="nu")
        nu = nu_bound(model, cert0)
    kappa, gamma = kappa_gamma(nu, model.alpha0, model.sigma_w)
    pb = phi_bar(delta)
    if phi > pb:
        log.warning("phi=%.4g clipped to phi_bar(delta)=%.6g", phi, pb)
        phi = pb
    lo = 1.0 / (1.0 - chi) if criterion == "relaxed_sequential" else 1.0
    if not lo < phi <= pb:
        raise ConfigurationError(
            f"phi must satisfy {lo:.4g} < phi <= phi_bar={pb:.4g}", field="phi")
    ab = _alpha_bar(kappa, gamma, model.sigma_w, model.n, model.m, model.theta_bound)
    params = ScheduleParams(
        delta=delta, phi=phi, phi_bar=pb, n=model.n, m=model.m,
        sigma_w=model.sigma_w, theta_bound=model.theta_bound,
        alpha0=model.alpha0, alpha1=model.alpha1, nu=nu, kappa=kappa,
        gamma=gamma, alpha_bar=ab, criterion=criterion,
        constants_mode=constants_mode, lambda_scale=lambda_scale,
        beta=1.0 if criterion == "det_double" else beta, chi=chi,
        zeta=kappa**2 / (4.0 * gamma), mu_mode=mu_mode,
        radius_variant=radius_variant, mu_clamp=mu_clamp,
        tau_star_form=tau_star_form,
        kappa0=cert0.kappa if cert0 is not None else math.nan,
        gamma0=cert0.gamma if cert0 is not None else math.nan,
    )
    sig, tb, n, m = model.sigma_w, model.theta_bound, model.n, model.m
    if constants_mode == "theory":
        fp = _g_fixed_point(g_spec(params, star=False))
        log10_G = fp.log10_G
        G = 10.0**log10_G if log10_G < 300 else math.inf
        # eps targets in log10: branch1 and branch2 of each min
        a2_log = math.log10(256.0) + math.log10(tb) + 10 * math.log10(kappa)
        e1 = math.log10(sig) + 0.5 * math.log10(ab * 4 * n * n * (n + m)) - 0.5 * log10_G
        e2 = -a2_log  # the (1 + sigma^2/(40 G ln(1/delta))) factor -> 1 for huge G
        log10_eps_bar = min(e1, e2, math.log10(2 * tb))
        # relaxed-sequential constants: joint fixed point of G_* and alpha_under
        au = ab
        log10_Gs = log10_G
        for _ in range(60):
            lam1 = 10.0**log10_Gs * math.log(1 / delta) ** (1.0 / (1.0 - chi)) \
                if log10_Gs < 300 else math.inf
            au_new = _alpha_under(kappa, gamma, sig, n, m, tb, chi, lam1)
            fps = _g_fixed_point(g_spec(replace(params, alpha_under=au_new), star=True))
            moved = abs(fps.log10_G - log10_Gs)
            log10_Gs = fps.log10_G
            au = au_new
            if moved <= 1e-9 * max(1.0, abs(log10_Gs)):
                break
        a2s_log = math.log10(32.0) + math.log10(tb) + 2 * math.log10(kappa)
        es1 = math.log10(sig) + 0.5 * math.log10(au * 4 * n * n * (n + m)) - 0.5 * log10_Gs
        log10_eps_under = min(es1, -a2s_log, math.log10(2 * tb))
        params = replace(
            params, log10_G=log10_G, G_phi=G,
            log10_G_star=log10_Gs,
            G_star=10.0**log10_Gs if log10_Gs < 300 else math.inf,
            log10_tau_star=fp.log10_tau_star, alpha_under=au,
            log10_eps_bar=log10_eps_bar, log10_eps_under=log10_eps_under,
            eps_bar=10.0**log10_eps_bar if log10_eps_bar > -300 else 0.0,
            eps_under=10.0**log10_eps_under if log10_eps_under > -300 else 0.0,
            noise_scale=1.0 if noise_scale is None else noise_scale,
        )
    else:
        G = lambda_scale
        lam1 = G * math.log(1 / delta) ** (1.0 / (1.0 - chi))
        au = _alpha_under(kappa, gamma, sig, n, m, tb, chi, lam1)
        params = replace(
            params, G_phi=G, G_star=G, log10_G=math.log10(G),
            log10_G_star=math.log10(G), alpha_under=au,
            noise_scale=(1.0 / kappa**2) if noise_scale is None else noise_scale,
        )
        eb, eu = eps_targets(params)
        params = replace(params, eps_bar=eb, eps_under=eu,
                         log10_eps_bar=math.log10(eb), log10_eps_under=math.log10(eu))
    return params


def g_of_phi(params: ScheduleParams) -> float:
    """Regularization constant G(phi): the theory fixed point, or the
    practical lambda_scale."""
    if params.constants_mode == "theory":
        return params.G_phi
    return params.lambda_scale


def lambda_t(t: float, params: ScheduleParams) -> float:
    """Regularizer at time t; relaxed_sequential raises the log power to 1/(1-chi)."""
    if t < 1:
        raise ConfigurationError("t must be >= 1", field="t")
    if params.criterion == "relaxed_sequential":
        return params.G_star * math.log(t / params.delta) ** (1.0 / (1.0 - params.chi))
    return params.G_phi * math.log(t / params.delta)


def eps_targets(params: ScheduleParams):
    """(eps_bar, eps_under): anchor-quality targets, clamped at 2 theta_bound."""
    sig, tb, n, m = params.sigma_w, params.theta_bound, params.n, params.m
    lnd = math.log(1.0 / params.delta)

    def target(alpha, G, a2):
        b1 = sig * math.sqrt(alpha * 4 * n * n * (n + m)) / math.sqrt(G)
        b2 = (1.0 / a2) * (1.0 + sig**2 / (40.0 * G * lnd))
        return min(b1, b2, 2.0 * tb)

    eb = target(params.alpha_bar, params.G_phi, 256.0 * tb * params.kappa**10)
    eu = target(params.alpha_under, params.G_star, 32.0 * tb * params.kappa**2)
    return eb, eu


def warmup_duration(eps_target: float, params: ScheduleParams,
                    kappa0: float | None = None, gamma0: float | None = None) -> int:
    """Smallest t whose warm-up estimation-error bound drops below eps_target."""
    if eps_target <= 0:
        raise ConfigurationError("eps_target must be > 0", field="eps_target")
    k0 = params.kappa0 if kappa0 is None else kappa0
    g0 = params.gamma0 if gamma0 is None else gamma0
    if not (math.isfinite(k0) and math.isfinite(g0)):
        raise ConfigurationError("warm-up duration needs (kappa0, gamma0)", field="kappa0")
    sig, tb, n, delta = params.sigma_w, params.theta_bound, params.n, params.delta
    coef = 300.0 * sig**2 * k0**4 / g0**2 * (n + tb**2 * k0**2)

    def bound(t):
        inner = math.log(n / delta) + math.log1p(coef * math.log(t / delta))
        return (80.0 / (sig**2 * t)) * (sig * math.sqrt(2 * n * inner) + sig) ** 2

    target = eps_target**2
    hi = 1
    while bound(hi) > target:
        hi *= 2
        if hi > 10**15:
            raise ScheduleError("warm-up bound never reached the target")
    lo = max(1, hi // 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if bound(mid) <= target:
            hi = mid
        else:
            lo = mid + 1
    t0 = hi
    while t0 > 1 and bound(t0 - 1) <= target:
        t0 -= 1  # guard against non-monotone pockets
    return t0


def should_update(logdet_t: float, logdet_tau: float, beta: float) -> bool:
    """det(V_t) > (1+beta) det(V_tau), compared in log space, strictly."""
    if not (math.isfinite(logdet_t) and math.isfinite(logdet_tau)):
        raise ConfigurationError("log-determinants must be finite", field="logdet_t")
    return logdet_t > math.log1p(beta) + logdet_tau


def adaptive_beta(tau: float, r_tau: float, params: ScheduleParams) -> float:
    """Exploration-exploitation trade-off beta at an update time tau."""
    if tau < 1:
        raise ConfigurationError("tau must be >= 1", field="tau")
    if r_tau <= 0:
        raise ConfigurationError("r_tau must be > 0", field="r_tau")
    delta = params.delta
    if params.constants_mode == "theory" and params.log10_G > 300:
        ratio = 0.0
        g_plus = math.inf
    else:
        ratio = params.alpha_bar / params.G_phi
        g_plus = params.G_phi + params.alpha_bar * tau
    inner = (1.0 + ratio * tau) * math.log(1.0 / delta) * math.log(tau / delta)
    if inner <= 1.0:
        raise ScheduleError("adaptive beta log argument <= 1")
    denom = 4.0 * params.nu * (params.n + params.m) * (1.0 + ratio) * (
        r_tau + 2.0 * params.theta_bound * math.sqrt(g_plus)
        * math.sqrt(r_tau * math.log(tau / delta))
    )
    return float(math.sqrt(2.0 * math.log(inner) / denom))


def beta_floor(kappa: float, gamma: float, n: int, m: int) -> float:
    """(1+zeta)^{n+m} - 1 with zeta = kappa^2/(4 gamma)."""
    zeta = kappa**2 / (4.0 * gamma)
    log_term = (n + m) * math.log1p(zeta)
    if log_term > 700:
        return math.inf
    return math.expm1(log_term)


def anynum_condition(mu_t: float, V_t, kappa: float) -> bool:
    """mu_t |V_t^{-1}| <= 1/(16 kappa^10), evaluated in logs to dodge overflow."""
    V_t = np.atleast_2d(np.asarray(V_t, dtype=float))
    w = np.linalg.eigvalsh(0.5 * (V_t + V_t.T))
    if w[0] <= 0:
        raise ConfigurationError("V_t must be PD", field="V_t")
    if mu_t <= 0:
        return True
    lhs = math.log(mu_t) - math.log(w[0])
    rhs = -math.log(16.0) - 10.0 * math.log(kappa)
    return lhs <= rhs


def constants_report(params: ScheduleParams) -> dict:
    """Structured key-value dump of the schedule constants (log10 where needed)."""
    return {
        "delta": params.delta,
        "phi": params.phi,
        "phi_bar": params.phi_bar,
        "constants_mode": params.constants_mode,
        "criterion": params.criterion,
        "nu": params.nu,
        "kappa": params.kappa,
        "gamma": params.gamma,
        "zeta": params.zeta,
        "chi": params.chi,
        "beta": params.beta,
        "alpha_bar": params.alpha_bar,
        "alpha_under": params.alpha_under,
        "log10_G": params.log10_G,
        "log10_G_star": params.log10_G_star,
        "log10_tau_star": params.log10_tau_star,
        "log10_eps_bar": params.log10_eps_bar,
        "log10_eps_under": params.log10_eps_under,
        "eps_bar": params.eps_bar,
        "eps_under": params.eps_under,
        "lambda_scale": params.lambda_scale,
        "noise_scale": params.noise_scale,
        "log10_beta_floor": (params.n + params.m) * math.log10(1.0 + params.zeta),
    }
