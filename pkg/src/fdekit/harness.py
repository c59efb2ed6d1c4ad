"""Experiment harness: JSON configs, trajectory ensembles, tail statistics,
and verification of certified bounds against simulated tails.

Asymptotic statements can only be probed on a finite window, so every
verdict carries a margin and a drift-based stationarity gate; "inconclusive"
is a first-class outcome, distinct from "fail".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .certificates import Certificate, certificate_for
from .errors import BlowUpError, ConfigError
from .fading_memory import DelayKernel, InitialHistory, WeightFunction
from .integrator import IntegratorConfig, Trajectory, integrate, write_trajectory_csv
from .models import (
    CooperativeLVSpec,
    DelayFunction,
    LogisticNetSpec,
    NonautLVSpec,
    StageStructuredSpec,
    TimeCoefficient,
    quasimonotone_probe,
)
from .monotone_bounds import iterate_bounds, write_iterates_csv

EXIT_OK = 0
EXIT_VERDICT_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_BLOW_UP = 3


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _parse_kernel(obj) -> DelayKernel:
    if isinstance(obj, dict) and "type" in obj:
        kind = obj["type"]
        if kind == "exponential":
            return DelayKernel.exponential(
                decay=obj.get("decay", 1.0),
                coeff=obj.get("coeff", 1.0),
                damping=obj.get("damping", 0.0),
            )
        if kind == "atom":
            return DelayKernel.atom(weight=obj.get("weight", 1.0), delay=obj.get("delay", 0.0))
        if kind == "uniform":
            return DelayKernel.uniform(
                obj["a"], obj["b"], coeff=obj.get("coeff", 1.0), damping=obj.get("damping", 0.0)
            )
        raise ConfigError(f"unknown kernel type {kind!r}")
    if isinstance(obj, dict):
        return DelayKernel(
            atoms=tuple(tuple(p) for p in obj.get("atoms", ())),
            exp_densities=tuple(tuple(p) for p in obj.get("exp_densities", ())),
            uniform_densities=tuple(tuple(p) for p in obj.get("uniform_densities", ())),
            normalized=obj.get("normalized", True),
        )
    raise ConfigError("kernel must be an object")


def _parse_kernel_grid(obj, n):
    if isinstance(obj, dict):
        k = _parse_kernel(obj)
        return tuple(tuple(k for _ in range(n)) for _ in range(n))
    if isinstance(obj, list):
        return tuple(tuple(_parse_kernel(e) for e in row) for row in obj)
    raise ConfigError("kernel grid must be a kernel object or an n x n list")


def _parse_coeff(obj) -> TimeCoefficient:
    if isinstance(obj, (int, float)):
        return TimeCoefficient.constant(obj)
    if isinstance(obj, dict):
        return TimeCoefficient(
            c0=float(obj["c0"]),
            c1=float(obj.get("c1", 0.0)),
            omega=float(obj.get("omega", 0.0)),
            theta=float(obj.get("theta", 0.0)),
        )
    raise ConfigError("coefficient must be a number or an object with c0/c1/omega/theta")


def _parse_delay(obj) -> DelayFunction:
    if isinstance(obj, (int, float)):
        return DelayFunction.constant(obj)
    if isinstance(obj, dict):
        kind = obj.get("type", "constant")
        if kind == "constant":
            return DelayFunction.constant(obj["tau"])
        if kind == "sinusoid":
            return DelayFunction.sinusoid(obj["tau0"], obj.get("tau1", 0.0), obj.get("omega", 1.0))
        if kind == "proportional":
            return DelayFunction.proportional(obj["rho"])
        raise ConfigError(f"unknown delay type {kind!r}")
    raise ConfigError("delay must be a number or an object")


def parse_model(obj):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigError("model must be an object with a 'type' tag")
    kind = obj["type"]
    try:
        if kind == "cooperative_lv":
            n = len(obj["beta"])
            return CooperativeLVSpec(
                beta=obj["beta"],
                mu=obj["mu"],
                a=obj["a"],
                d=obj["d"],
                eta=_parse_kernel_grid(obj["eta"], n),
                nu=_parse_kernel_grid(obj["nu"], n),
            )
        if kind == "nonautonomous_lv":
            n = len(obj["beta"])
            return NonautLVSpec(
                beta=tuple(_parse_coeff(c) for c in obj["beta"]),
                mu=tuple(_parse_coeff(c) for c in obj["mu"]),
                a=tuple(tuple(_parse_coeff(c) for c in row) for row in obj["a"]),
                d=tuple(tuple(_parse_coeff(c) for c in row) for row in obj["d"]),
                eta=_parse_kernel_grid(obj["eta"], n),
                nu=_parse_kernel_grid(obj["nu"], n),
            )
        if kind == "logistic_network":
            return LogisticNetSpec(
                alpha=tuple(tuple(_parse_coeff(c) for c in row) for row in obj["alpha"]),
                beta=tuple(tuple(_parse_coeff(c) for c in row) for row in obj["beta"]),
                tau=tuple(tuple(_parse_delay(v) for v in row) for row in obj["tau"]),
                d=tuple(tuple(_parse_coeff(c) for c in row) for row in obj["d"]),
                sigma=tuple(tuple(_parse_delay(v) for v in row) for row in obj["sigma"]),
                mu=tuple(_parse_coeff(c) for c in obj["mu"]),
                kappa=tuple(_parse_coeff(c) for c in obj["kappa"]),
            )
        if kind == "stage_structured":
            return StageStructuredSpec(
                alpha=obj["alpha"],
                beta=obj["beta"],
                gamma=obj["gamma"],
                c=obj["c"],
                kernels=tuple(_parse_kernel(k) for k in obj["kernels"]),
            )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} model: {exc}") from exc
    raise ConfigError(f"unknown model type {kind!r}")


def _parse_initial(obj, n) -> InitialHistory:
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigError("initial condition must be an object with a 'type' tag")
    kind = obj["type"]
    try:
        if kind == "constant":
            value = obj["value"]
            if isinstance(value, (int, float)):
                value = [value] * n
            hist = InitialHistory.constant(value)
        elif kind == "sine":
            hist = InitialHistory.sine(obj["base"], obj["amplitude"], obj["omega"])
        elif kind == "exp_approach":
            hist = InitialHistory.exp_approach(obj["limit"], obj["start"], obj["rate"])
        else:
            raise ConfigError(f"unknown initial condition type {kind!r}")
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid initial condition: {exc}") from exc
    if hist.n != n:
        raise ConfigError(f"initial condition has {hist.n} components, model has {n}")
    if not hist.is_strictly_positive():
        raise ConfigError("initial conditions must be strictly positive")
    return hist


def default_ensemble(n):
    """Constants spanning two decades plus one oscillating history."""
    members = [InitialHistory.constant([c] * n) for c in (0.1, 0.5, 1.0, 2.0)]
    members.append(InitialHistory.sine([1.0] * n, [0.5] * n, 1.0))
    return members


@dataclass
class AnalysisConfig:
    tail_window: float = 0.2
    bound_tol: float = 1e-2
    eq_tol: float = 1e-2
    drift_tol: float = 1e-2
    seed: int = 0
    weight_rate: float = 0.1
    allow_inconclusive: bool = False
    probe_pairs: int = 500
    delta0: float = 0.05
    schedule: str = "halving"
    max_n: int = 200
    iterate_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.tail_window < 1.0:
            raise ConfigError("tail_window must lie strictly between 0 and 1")
        if self.bound_tol < 0 or self.eq_tol < 0 or self.drift_tol < 0:
            raise ConfigError("tolerances must be nonnegative")
        if not self.weight_rate > 0:
            raise ConfigError("weight_rate must be positive")


@dataclass
class ExperimentConfig:
    model: object
    initial: list
    integrator: IntegratorConfig
    analysis: AnalysisConfig
    path: str | None = None

    @property
    def n(self):
        return self.model.n


def load_config(path_or_dict, overrides=None) -> ExperimentConfig:
    """Parse and validate an experiment config from a JSON file or dict."""
    if isinstance(path_or_dict, (str, Path)):
        path = str(path_or_dict)
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    else:
        path = None
        raw = path_or_dict
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")

    model = parse_model(raw.get("model"))
    n = model.n

    integ = dict(raw.get("integrator", {}))
    analysis = dict(raw.get("analysis", {}))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("step", "horizon"):
            integ[key] = value
        elif key in ("seed", "allow_inconclusive"):
            analysis[key] = value
    try:
        integrator = IntegratorConfig(**integ)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid integrator config: {exc}") from exc
    try:
        analysis_cfg = AnalysisConfig(**analysis)
    except TypeError as exc:
        raise ConfigError(f"invalid analysis config: {exc}") from exc

    if isinstance(model, StageStructuredSpec):
        # the memory weight must fade slower than the maturation damping
        if analysis_cfg.weight_rate >= float(np.min(model.gamma)):
            raise ConfigError(
                "weight_rate must be below the smallest maturation damping rate"
            )

    raw_initial = raw.get("initial_conditions")
    if raw_initial is None:
        initial = default_ensemble(n)
    else:
        if not isinstance(raw_initial, list) or not raw_initial:
            raise ConfigError("initial_conditions must be a non-empty list")
        initial = [_parse_initial(o, n) for o in raw_initial]

    return ExperimentConfig(
        model=model, initial=initial, integrator=integrator, analysis=analysis_cfg, path=path
    )


# ---------------------------------------------------------------------------
# Tail statistics
# ---------------------------------------------------------------------------


@dataclass
class TailStats:
    window_start: float
    window_end: float
    tail_min: np.ndarray
    tail_max: np.ndarray
    drift: np.ndarray

    def to_json(self):
        return {
            "window": [self.window_start, self.window_end],
            "tail_min": [float(x) for x in self.tail_min],
            "tail_max": [float(x) for x in self.tail_max],
            "drift": [float(x) for x in self.drift],
        }


def tail_stats(traj: Trajectory, window_fraction) -> TailStats:
    """Componentwise extrema over the trailing window plus the change of
    those extrema between the window's two halves (a stationarity proxy)."""
    if not 0.0 < window_fraction < 1.0:
        raise ConfigError("tail window fraction must lie strictly between 0 and 1")
    horizon = traj.horizon
    start = (1.0 - window_fraction) * horizon
    sel = traj.times >= start
    if int(sel.sum()) < 4:
        raise ConfigError("tail window holds fewer than 4 samples")
    times = traj.times[sel]
    vals = traj.values[sel]
    mid = start + 0.5 * (horizon - start)
    first = vals[times < mid]
    second = vals[times >= mid]
    drift = np.maximum(
        np.abs(second.min(axis=0) - first.min(axis=0)),
        np.abs(second.max(axis=0) - first.max(axis=0)),
    )
    return TailStats(
        window_start=float(start),
        window_end=float(horizon),
        tail_min=vals.min(axis=0),
        tail_max=vals.max(axis=0),
        drift=drift,
    )


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    claim: str
    trajectory: int
    expected: str
    observed: str
    margin: float
    status: str  # "pass" | "fail" | "inconclusive"

    def to_json(self):
        return {
            "claim": self.claim,
            "trajectory": self.trajectory,
            "expected": self.expected,
            "observed": self.observed,
            "margin": self.margin,
            "status": self.status,
        }


def _status(margin, bound_tol, stationary):
    if margin >= -bound_tol:
        return "pass" if stationary else "inconclusive"
    return "fail"


def verify(cert: Certificate, stats, bound_tol=1e-2, eq_tol=1e-2, drift_tol=1e-2):
    """One verdict per certified claim and trajectory.

    Claims are emitted only for properties the certificate actually asserts;
    an uncertified model yields an empty list.  A verdict is inconclusive
    when its margin is acceptable but the tail window has not stabilised.
    """
    verdicts = []
    for k, st in enumerate(stats):
        if st.tail_min.shape[0] != cert.bundle.n and cert.bundle.n > 0:
            raise ConfigError(
                f"tail statistics have {st.tail_min.shape[0]} components, "
                f"certificate expects {cert.bundle.n}"
            )
        stationary = bool(np.max(st.drift) <= drift_tol)
        if cert.persistent:
            margin = float(st.tail_min.min())
            verdicts.append(
                Verdict(
                    claim="persistence",
                    trajectory=k,
                    expected="tail_min > 0",
                    observed=f"tail_min = {margin:.6g}",
                    margin=margin,
                    status=_status(margin, bound_tol, stationary),
                )
            )
        if cert.bounds is not None and cert.permanent and not cert.bounds.vacuous:
            v = cert.bounds.scaling
            lo = float((st.tail_min / v).min())
            hi = float((st.tail_max / v).max())
            margin = min(lo - cert.bounds.lower, cert.bounds.upper - hi)
            verdicts.append(
                Verdict(
                    claim="permanence_bounds",
                    trajectory=k,
                    expected=f"scaled tails within [{cert.bounds.lower:.6g}, {cert.bounds.upper:.6g}]",
                    observed=f"scaled tails within [{lo:.6g}, {hi:.6g}]",
                    margin=float(margin),
                    status=_status(margin, bound_tol, stationary),
                )
            )
        if cert.attractor and cert.equilibrium is not None:
            dev = max(
                float(np.max(np.abs(st.tail_min - cert.equilibrium))),
                float(np.max(np.abs(st.tail_max - cert.equilibrium))),
            )
            margin = eq_tol - dev
            verdicts.append(
                Verdict(
                    claim="attractivity",
                    trajectory=k,
                    expected=f"tail within {eq_tol:.3g} of the equilibrium",
                    observed=f"max deviation {dev:.6g}",
                    margin=float(margin),
                    status=_status(margin, 0.0, stationary),
                )
            )
        if cert.first_level_lower is not None and cert.permanent:
            margin = min(
                float(np.min(st.tail_min - cert.first_level_lower)),
                float(np.min(cert.first_level_upper - st.tail_max)),
            )
            verdicts.append(
                Verdict(
                    claim="sandwich_first_level",
                    trajectory=k,
                    expected="tails between the level-1 lower and upper bounds",
                    observed=f"margin {margin:.6g}",
                    margin=float(margin),
                    status=_status(margin, bound_tol, stationary),
                )
            )
    return verdicts


def ordered_pair_check(model, low: InitialHistory, high: InitialHistory, cfg: IntegratorConfig):
    """Largest componentwise ordering violation max(x_low - x_high) over all
    output times, for an ordered pair of initial histories."""
    t_low = integrate(model, low, cfg)
    t_high = integrate(model, high, cfg)
    return float(np.max(t_low.values - t_high.values)), t_low, t_high


# ---------------------------------------------------------------------------
# Report writing and the full pipeline
# ---------------------------------------------------------------------------


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _phase_space_record(analysis: AnalysisConfig):
    return {"weight_family": "exponential", "weight_rate": analysis.weight_rate}


def write_certificate(cert: Certificate, analysis: AnalysisConfig, path):
    record = cert.to_json()
    record["phase_space"] = _phase_space_record(analysis)
    _write_json(path, record)


@dataclass
class RunResult:
    exit_code: int
    certificate: Certificate
    trajectories: list = field(default_factory=list)
    stats: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    files: list = field(default_factory=list)
    failure: str | None = None


def run(config: ExperimentConfig, out_dir) -> RunResult:
    """Certificate, ensemble integration, tail statistics, verification, and
    report files; the exit code contract is meant for CI use."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cert = certificate_for(config.model)
    cert_path = out / "certificate.json"
    write_certificate(cert, config.analysis, cert_path)
    files = [str(cert_path)]

    trajectories = []
    stats = []
    for k, hist in enumerate(config.initial):
        try:
            traj = integrate(config.model, hist, config.integrator)
        except BlowUpError as exc:
            _write_json(
                out / "verdicts.json",
                {
                    "status": "blow_up",
                    "trajectory": k,
                    "time": exc.time,
                    "phase_space": _phase_space_record(config.analysis),
                },
            )
            return RunResult(
                exit_code=EXIT_BLOW_UP,
                certificate=cert,
                trajectories=trajectories,
                files=files,
                failure=f"trajectory {k} blew up near t = {exc.time:.6g}",
            )
        csv_path = out / f"trajectory_{k:03d}.csv"
        write_trajectory_csv(traj, csv_path, stride=config.integrator.output_stride)
        files.append(str(csv_path))
        trajectories.append(traj)
        stats.append(tail_stats(traj, config.analysis.tail_window))

    verdicts = verify(
        cert,
        stats,
        bound_tol=config.analysis.bound_tol,
        eq_tol=config.analysis.eq_tol,
        drift_tol=config.analysis.drift_tol,
    )
    n_fail = sum(v.status == "fail" for v in verdicts)
    n_inconclusive = sum(v.status == "inconclusive" for v in verdicts)
    report = {
        "phase_space": _phase_space_record(config.analysis),
        "certificate": "certificate.json",
        "claims": [v.to_json() for v in verdicts],
        "tail_stats": [s.to_json() for s in stats],
        "summary": {
            "passed": sum(v.status == "pass" for v in verdicts),
            "failed": n_fail,
            "inconclusive": n_inconclusive,
            "certified": cert.persistent or cert.permanent or bool(cert.attractor),
        },
    }
    if not report["summary"]["certified"]:
        report["note"] = "model not certified; nothing to verify"
    verdict_path = out / "verdicts.json"
    _write_json(verdict_path, report)
    files.append(str(verdict_path))

    ok = n_fail == 0 and (n_inconclusive == 0 or config.analysis.allow_inconclusive)
    return RunResult(
        exit_code=EXIT_OK if ok else EXIT_VERDICT_FAILED,
        certificate=cert,
        trajectories=trajectories,
        stats=stats,
        verdicts=verdicts,
        files=files,
    )


def run_iteration(config: ExperimentConfig, out_dir):
    """The level-by-level bounding scheme (stage-structured models only)."""
    if not isinstance(config.model, StageStructuredSpec):
        raise ConfigError("the iteration scheme applies to stage_structured models only")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    iterates, verdict = iterate_bounds(
        config.model,
        config.analysis.delta0,
        schedule=config.analysis.schedule,
        max_n=config.analysis.max_n,
        tol=config.analysis.iterate_tol,
    )
    csv_path = out / "iterates.csv"
    write_iterates_csv(iterates, csv_path)
    record = {
        "schedule": config.analysis.schedule,
        "delta0": config.analysis.delta0,
        "levels": verdict.levels,
        "converged": verdict.converged,
        "gap": verdict.gap,
        "limit_lower": [float(x) for x in verdict.limit_lower],
        "limit_upper": [float(x) for x in verdict.limit_upper],
        "equilibrium": [float(x) for x in verdict.equilibrium],
        "equilibrium_gap": verdict.equilibrium_gap,
        "monotonicity_violations": verdict.monotonicity_violations,
        "phase_space": _phase_space_record(config.analysis),
    }
    json_path = out / "iteration.json"
    _write_json(json_path, record)
    return iterates, verdict, [str(csv_path), str(json_path)]


def run_probe(config: ExperimentConfig, out_dir):
    """Random order-preservation sampling for the configured model."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = quasimonotone_probe(
        config.model, n_pairs=config.analysis.probe_pairs, seed=config.analysis.seed
    )
    record = {
        "passed": report.passed,
        "n_pairs": report.n_pairs,
        "seed": config.analysis.seed,
        "witness": report.witness,
        "phase_space": _phase_space_record(config.analysis),
    }
    path = out / "probe.json"
    _write_json(path, record)
    return report, [str(path)]
