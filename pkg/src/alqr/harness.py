"""Experiment orchestration: config loading, per-seed dispatch, Monte Carlo
aggregation, and CSV/JSON emission.

Per-seed runs are isolated (failures are recorded, never abort the batch) and
merged in seed order, so a config maps to byte-identical output files.  All
floats are written with 17 significant digits.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import loops, regret, schedules
from .benchmarks import get_benchmark, perturbed_gain, perturbed_theta
from .exceptions import AlqrError, ConfigurationError
from .linalg import spectral_radius
from .lqr import SystemModel, solve_dare, stability_certificate
from .synthesis import sequential_gap

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

MODES = ("warmup", "aslo", "doubling", "full")

CRITERION_ALIASES = {
    "det2": "det_double",
    "det_double": "det_double",
    "fixed-beta": "fixed_beta",
    "fixed_beta": "fixed_beta",
    "adaptive": "adaptive_beta",
    "adaptive_beta": "adaptive_beta",
    "relaxed-seq": "relaxed_sequential",
    "relaxed_sequential": "relaxed_sequential",
}

CSV_COLUMNS = ("t", "x_norm", "cost", "cum_regret", "lambda_t", "logdet_V",
               "epoch", "policy_id", "beta", "r_t", "est_error")


@dataclass
class ExperimentConfig:
    """Validated experiment description; defaults are desk-scale."""

    benchmark: str | None = "bench-2x2"
    model: dict | None = None
    mode: str = "aslo"
    criterion: str = "det_double"
    constants: str = "practical"
    delta: float = 0.1
    phi: float = 1.5
    lambda_scale: float = 1.0
    noise_scale: float | None = None
    beta: float = 1.0
    chi: float = 0.0
    mu_mode: str = "lemma"
    radius_variant: str = "anchored"
    mu_clamp: bool = True
    tau_star_form: str = "proof"
    T: int = 1000
    T0: int | None = None
    eps_target: float | None = None
    seeds: list = field(default_factory=lambda: [0])
    checkpoints: list = field(default_factory=list)
    out_dir: str | None = None
    workers: int = 1
    x0: list | None = None
    base_horizon: int = 64
    anchor_rel_error: float = 0.1
    anchor_seed: int = 3
    k0_rel_error: float = 0.2
    k0_seed: int = 0
    solver_tol: float = 1e-9
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported schema_version {self.schema_version}", field="schema_version")
        if self.mode == "full-pipeline":
            self.mode = "full"
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}", field="mode")
        if self.criterion not in CRITERION_ALIASES:
            raise ConfigurationError(
                f"unknown criterion {self.criterion!r}", field="criterion")
        self.criterion = CRITERION_ALIASES[self.criterion]
        if self.constants not in ("theory", "practical"):
            raise ConfigurationError(
                f"constants must be theory|practical, got {self.constants!r}",
                field="constants")
        if not 0 < self.delta < 1:
            raise ConfigurationError("delta must lie in (0, 1)", field="delta")
        if self.T < 1:
            raise ConfigurationError("T must be >= 1", field="T")
        if self.T0 is not None and self.T0 < 1:
            raise ConfigurationError("T0 must be >= 1 when given", field="T0")
        if isinstance(self.seeds, str):
            self.seeds = parse_seed_range(self.seeds)
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigurationError("at least one seed is required", field="seeds")
        self.checkpoints = sorted(int(c) for c in self.checkpoints)
        if self.benchmark is None and self.model is None:
            raise ConfigurationError("need a benchmark name or model matrices",
                                     field="benchmark")
        self.build_model()  # validates dimensions eagerly

    def build_model(self) -> SystemModel:
        if self.model is not None:
            spec = dict(self.model)
            return SystemModel(
                A=np.asarray(spec["A"], dtype=float),
                B=np.asarray(spec["B"], dtype=float),
                Q=np.asarray(spec["Q"], dtype=float),
                R=np.asarray(spec["R"], dtype=float),
                sigma_w=float(spec.get("sigma_w", 1.0)),
                theta_bound=spec.get("theta_bound"),
                name=spec.get("name", "custom"),
            )
        return get_benchmark(self.benchmark)

    def to_dict(self) -> dict:
        out = asdict(self)
        return out


def parse_seed_range(text: str) -> list:
    """Parse "a..b" (inclusive) or a comma list into seed integers."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", maxsplit=1)
        return list(range(int(a), int(b) + 1))
    return [int(p) for p in text.split(",") if p.strip()]


def load_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment config."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}", field="path") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config parse error: {exc}", field="path") from exc
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config fields {sorted(unknown)}",
                                 field=sorted(unknown)[0])
    try:
        return ExperimentConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid config: {exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def json_dumps(obj, indent=0) -> str:
    """Deterministic JSON with 17-significant-digit floats and sorted keys."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  "{k}": {json_dumps(obj[k], indent + 2)}' for k in sorted(obj)
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(json_dumps(v, indent) for v in obj) + "]"
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return json_dumps(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def trajectory_rows(record: loops.TrajectoryRecord, J_star: float) -> list:
    """The 11 CSV columns, one row per step."""
    cum = np.cumsum(record.cost - J_star)
    xn = np.linalg.norm(record.x[:-1], axis=1)
    rows = []
    for s in range(record.T):
        rows.append((s + 1, xn[s], record.cost[s], cum[s], record.lambda_t[s],
                     record.logdet_V[s], int(record.epoch[s]),
                     int(record.policy_id[s]), record.beta_used[s],
                     record.r_t[s], record.est_error[s]))
    return rows


def emit(obj, format: str, path, J_star: float | None = None):
    """Write a trajectory as CSV or a report dict as JSON."""
    path = os.fspath(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if format == "csv":
        if isinstance(obj, loops.TrajectoryRecord):
            if J_star is None:
                J_star = float(obj.diagnostics.get("J_star", 0.0))
            rows = trajectory_rows(obj, J_star)
        else:
            rows = obj
        lines = [",".join(CSV_COLUMNS)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    elif format == "json":
        if isinstance(obj, loops.TrajectoryRecord):
            if J_star is None:
                J_star = float(obj.diagnostics.get("J_star", 0.0))
            obj = {
                "schema_version": SCHEMA_VERSION,
                "columns": list(CSV_COLUMNS),
                "rows": [list(r) for r in trajectory_rows(obj, J_star)],
            }
        with open(path, "w") as fh:
            fh.write(json_dumps(obj) + "\n")
    else:
        raise ConfigurationError(f"unknown format {format!r}", field="format")
    return path


def read_trajectory_csv(path) -> dict:
    """Parse an emitted CSV back into column arrays (floats round-trip exactly)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = [line.strip().split(",") for line in fh if line.strip()]
    if header != list(CSV_COLUMNS):
        raise ConfigurationError("unexpected CSV header", field="path")
    cols = {name: np.array([float(row[i]) for row in data])
            for i, name in enumerate(header)}
    return cols


def coverage_check(reports, delta: float) -> float:
    """Fraction of (seed, checkpoint) pairs whose ellipsoid held the truth."""
    flags = []
    for rep in reports:
        for _, ok in rep.get("containment", []):
            flags.append(bool(ok))
    if not flags:
        return float("nan")
    return float(np.mean(flags))


def _build_params(config: ExperimentConfig, model: SystemModel, cert0):
    return schedules.build_schedule(
        model, cert0=cert0, delta=config.delta, phi=config.phi,
        criterion=config.criterion, constants_mode=config.constants,
        lambda_scale=config.lambda_scale, noise_scale=config.noise_scale,
        beta=config.beta, chi=config.chi, mu_mode=config.mu_mode,
        radius_variant=config.radius_variant, mu_clamp=config.mu_clamp,
        tau_star_form=config.tau_star_form,
    )


def _epoch_diagnostics(model, params, history):
    rhos = [float(spectral_radius(model.A + model.B @ p.K)) for p in history]
    gaps = [float(sequential_gap(history[i - 1].P_dual, history[i].P_dual))
            for i in range(1, len(history))]
    gap_limit = 1.0 + params.gamma / 2.0
    return {
        "epoch_rho": rhos,
        "sequential_gaps": gaps,
        "gap_limit": gap_limit,
        "gap_violations": int(sum(g > gap_limit for g in gaps)),
    }


def run_seed(config: ExperimentConfig, seed: int) -> dict:
    """One isolated per-seed run; returns the summary plus CSV rows."""
    model = config.build_model()
    J_star = solve_dare(model).J_star
    K0 = perturbed_gain(model, config.k0_rel_error, seed=config.k0_seed)
    cert0 = stability_certificate(model, K0)
    params = _build_params(config, model, cert0)
    summary = {"seed": seed, "mode": config.mode, "J_star": J_star}
    records = []

    if config.mode in ("warmup", "full"):
        eps_target = config.eps_target if config.eps_target is not None else 0.5
        T0 = config.T0 if config.T0 is not None else schedules.warmup_duration(
            eps_target, params, kappa0=cert0.kappa, gamma0=cert0.gamma)
        Theta_0, wrec = loops.run_warmup(model, K0, T0, seed=seed, x0=config.x0)
        summary["T0"] = int(T0)
        summary["theta0_error"] = wrec.diagnostics["theta0_error"]
        records.append(wrec)
        anchor_eps = eps_target
        x_start = wrec.x[-1]
    else:
        Theta_0 = perturbed_theta(model, config.anchor_rel_error,
                                  seed=config.anchor_seed)
        anchor_eps = float(np.linalg.norm(Theta_0 - model.theta_star)) * 1.05
        x_start = config.x0

    if config.mode in ("aslo", "full"):
        rec, history, ledger = loops.run_aslo(
            model, Theta_0, anchor_eps, config.T, params, seed=seed,
            x0=x_start, checkpoints=config.checkpoints,
            solver_tol=config.solver_tol)
        records.append(rec)
        rr = regret.realized_regret(rec, J_star)
        stats = {
            "X_T": rec.max_state_norm(),
            "Z_T": float(np.max(np.sum(np.hstack([rec.x[:-1], rec.u]) ** 2, axis=1))),
            "r_T": float(rec.r_t[-1]),
            "lambda_T": float(rec.lambda_t[-1]),
            "lambda_1": float(rec.lambda_t[0]),
            "beta": float(rec.beta_used[-1]),
        }
        bounds = regret.term_bounds(config.T, params, stats)
        terms = ledger.terms()
        summary.update({
            "final_cum_regret": float(rr[-1]),
            "checkpoint_regret": {str(c): float(rr[c - 1])
                                  for c in config.checkpoints if c <= config.T},
            "max_x_norm": rec.max_state_norm(),
            "epochs": len(history),
            "n_updates": ledger.n_updates(),
            "synthesis_failures": rec.diagnostics["synthesis_failures"],
            "containment": [[int(t), bool(ok)]
                            for t, ok in rec.diagnostics["containment"]],
            "epoch_starts": [[int(p.tau), float(p.est_error)] for p in history],
            "R_terms": terms,
            "R_bounds": bounds,
            "bound_violations": int(sum(terms[k] > bounds[k] for k in regret.R_NAMES)),
            "realized_vs_sum": {"realized": float(rr[-1]),
                                "sum_R": float(sum(terms.values()))},
            "anynum_holds_ever": bool(any(rec.diagnostics["anynum_condition"])),
        })
        summary.update(_epoch_diagnostics(model, params, history))
    elif config.mode == "doubling":
        rec = loops.run_doubling(model, K0, config.base_horizon, config.T,
                                 params, seed=seed)
        records.append(rec)
        rr = regret.realized_regret(rec, J_star)
        summary.update({
            "final_cum_regret": float(rr[-1]),
            "max_x_norm": rec.max_state_norm(),
            "segment_bounds": rec.diagnostics["segment_bounds"],
        })

    rows = []
    for rec in records:
        rows.extend(trajectory_rows(rec, J_star))
    summary["rows"] = rows
    return summary


def _worker(args):
    config_dict, seed = args
    config = ExperimentConfig(**config_dict)
    try:
        return seed, run_seed(config, seed), None
    except AlqrError as exc:
        return seed, None, f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # per-seed isolation: never kill the batch
        return seed, None, f"{type(exc).__name__}: {exc}"


@dataclass
class AggregateReport:
    config: dict
    constants: dict
    per_seed: list
    errors: list
    aggregate: dict
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "constants": self.constants,
            "per_seed": self.per_seed,
            "errors": self.errors,
            "aggregate": self.aggregate,
        }


def _aggregate(config: ExperimentConfig, params, summaries: list) -> dict:
    agg = {"seed_count": len(summaries)}
    regrets = [s["final_cum_regret"] for s in summaries if "final_cum_regret" in s]
    if regrets:
        agg["final_regret_mean"] = float(np.mean(regrets))
        agg["final_regret_std"] = float(np.std(regrets))
    for c in config.checkpoints:
        vals = [s["checkpoint_regret"][str(c)] for s in summaries
                if str(c) in s.get("checkpoint_regret", {})]
        if vals:
            agg[f"regret_mean_t{c}"] = float(np.mean(vals))
            agg[f"regret_std_t{c}"] = float(np.std(vals))
    cov = coverage_check(summaries, config.delta)
    if not math.isnan(cov):
        agg["coverage_frequency"] = cov
    epochs = [s["epochs"] for s in summaries if "epochs" in s]
    if epochs:
        agg["epochs_mean"] = float(np.mean(epochs))
        agg["epochs_max"] = int(np.max(epochs))
    viol = [s["bound_violations"] for s in summaries if "bound_violations" in s]
    if viol:
        agg["bound_violations_total"] = int(np.sum(viol))
    # pooled slopes from the emitted rows
    if summaries and "rows" in summaries[0] and config.mode in ("aslo", "full"):
        T = config.T
        series = []
        for s in summaries:
            cum = np.array([row[3] for row in s["rows"][-T:]])
            series.append(cum)
        mean_curve = np.mean(series, axis=0)
        lo = max(10, T // 10)
        if np.all(mean_curve[lo - 1: T] > 0):
            agg["regret_slope"] = regret.slope(mean_curve, (lo, T))
        pts = [(tau, err) for s in summaries
               for tau, err in s.get("epoch_starts", [])
               if tau >= max(10, T // 100) and err > 0]
        if len(pts) >= 4:
            taus = np.array([p[0] for p in pts], dtype=float)
            errs = np.array([p[1] for p in pts])
            A = np.vstack([np.log(taus), np.ones(len(pts))]).T
            coef, *_ = np.linalg.lstsq(A, np.log(errs), rcond=None)
            agg["est_error_slope"] = float(coef[0])
    return agg


def run_experiment(config: ExperimentConfig) -> AggregateReport:
    """Execute the configured mode for every seed and aggregate the results.

    Per-seed trajectory CSVs and the aggregate JSON land in ``out_dir`` when
    set.  Identical configs produce byte-identical outputs.
    """
    model = config.build_model()
    K0 = perturbed_gain(model, config.k0_rel_error, seed=config.k0_seed)
    cert0 = stability_certificate(model, K0)
    params = _build_params(config, model, cert0)

    tasks = [(config.to_dict(), seed) for seed in sorted(config.seeds)]
    results = {}
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for seed, summary, err in pool.map(_worker, tasks):
                results[seed] = (summary, err)
    else:
        for task in tasks:
            seed, summary, err = _worker(task)
            results[seed] = (summary, err)

    summaries, errors = [], []
    for seed in sorted(results):
        summary, err = results[seed]
        if err is not None:
            errors.append({"seed": seed, "error": err})
        else:
            summaries.append(summary)

    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        for s in summaries:
            emit(s["rows"], "csv",
                 os.path.join(config.out_dir, f"seed_{s['seed']:04d}.csv"))

    agg = _aggregate(config, params, summaries)
    per_seed = []
    for s in summaries:
        slim = {k: v for k, v in s.items() if k != "rows"}
        per_seed.append(slim)
    report = AggregateReport(
        config=config.to_dict(),
        constants=schedules.constants_report(params),
        per_seed=per_seed,
        errors=errors,
        aggregate=agg,
    )
    if config.out_dir:
        emit(report.to_dict(), "json", os.path.join(config.out_dir, "aggregate.json"))
    return report
