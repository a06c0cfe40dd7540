from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .dc_core import ConfigurationError, DcBoostError, as_point, eval_phi
from .problems import ProblemCard, get_card, sigma_family
from .solvers import SolverConfig, Trace, descent_violations, solve
from .utils import median, trial_start

log = logging.getLogger("bench")

TRACE_HEADER = ["k", "phi", "phi_gap", "step_norm", "d_norm", "lambda", "j", "nu", "evals", "time_s"]
SUMMARY_HEADER = ["problem", "n", "solver", "min_k", "max_k", "med_k", "min_time", "max_time", "med_time",
                  "best_phi", "pct_optimal"]
SWEEP_HEADER = ["sigma", "solver", "med_k", "med_time_s"]
SWEEP_SOLVERS = ("dca", "nmbdca", "ppmdc")


@dataclass(frozen=True)
class BenchSpec:
    problem_id: str
    solver: str
    config: SolverConfig
    trials: int = 100
    seed: int = 0
    out_dir: Optional[str] = "out"
    opt_tol: float = 1e-4
    workers: int = 1
    x0: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")


@dataclass(frozen=True)
class TrialResult:
    trial: int
    iterations: int
    time_s: float
    final_phi: float
    termination: str
    violations: int
    final_x: Tuple[float, ...]


@dataclass
class RunStats:
    problem: str
    solver: str
    n: int
    trials: int
    min_k: float
    max_k: float
    med_k: float
    min_time: float
    max_time: float
    med_time: float
    best_phi: float
    pct_optimal: Optional[float]
    terminations: Dict[str, int] = field(default_factory=dict)
    violations: int = 0

    def row(self) -> List[Any]:
        pct = "n/a" if self.pct_optimal is None else self.pct_optimal
        return [self.problem, self.n, self.solver, self.min_k, self.max_k, self.med_k,
                self.min_time, self.max_time, self.med_time, repr(self.best_phi), pct]


def resolve_card(problem_id: str) -> ProblemCard:
    try:
        return get_card(problem_id)
    except KeyError:
        raise ConfigurationError(f"unknown problem id {problem_id!r}") from None


def _run_trial(task: Tuple[str, str, SolverConfig, int, int, Optional[Tuple[float, ...]]]) -> TrialResult:
    # module level so it pickles for the process pool
    problem_id, solver, config, seed, t, x0 = task
    card = resolve_card(problem_id)
    p = card.problem
    start = as_point(x0, p.dim) if x0 is not None else trial_start(seed, t, p.dim, p.init_box)
    t0 = time.monotonic()
    try:
        trace = solve(solver, p, start, config)
    except DcBoostError:
        log.error("trial %d of %s/%s failed from x0=%s", t, problem_id, solver, start.tolist(), exc_info=True)
        raise
    elapsed = time.monotonic() - t0
    return TrialResult(
        trial=t,
        iterations=trace.iterations,
        time_s=elapsed,
        final_phi=trace.final_phi,
        termination=trace.termination,
        violations=descent_violations(trace, p.sigma),
        final_x=tuple(float(v) for v in trace.final_x),
    )


def run_trials(spec: BenchSpec) -> List[TrialResult]:
    tasks = [(spec.problem_id, spec.solver, spec.config, spec.seed, t, spec.x0) for t in range(spec.trials)]
    if spec.workers == 1:
        results = [_run_trial(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_trial, tasks))
    return sorted(results, key=lambda r: r.trial)


def aggregate(card: ProblemCard, solver: str, results: Sequence[TrialResult], opt_tol: float = 1e-4) -> RunStats:
    if not results:
        raise ConfigurationError("no trial results to aggregate")
    ks = [float(r.iterations) for r in results]
    ts = [r.time_s for r in results]
    phis = [r.final_phi for r in results]
    phi_star = card.problem.phi_star
    pct = None
    if phi_star is not None:
        hits = sum(1 for v in phis if abs(v - phi_star) <= opt_tol)
        pct = 100.0 * hits / len(results)
    terms: Dict[str, int] = {}
    for r in results:
        terms[r.termination] = terms.get(r.termination, 0) + 1
    return RunStats(
        problem=card.id, solver=solver, n=card.problem.dim, trials=len(results),
        min_k=min(ks), max_k=max(ks), med_k=median(ks),
        min_time=min(ts), max_time=max(ts), med_time=median(ts),
        best_phi=min(phis), pct_optimal=pct, terminations=terms,
        violations=sum(r.violations for r in results),
    )


# ---------- writers ----------

def _fmt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def write_trace(trace: Trace, phi_star: Optional[float], path_csv: str, path_json: str) -> None:
    with open(path_csv, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in trace.records:
            gap = None if phi_star is None else abs(r.phi_x - phi_star)
            w.writerow([r.k, _fmt(r.phi_x), _fmt(gap), _fmt(r.step_norm), _fmt(r.d_norm), _fmt(r.lambda_k),
                        r.j_k, _fmt(r.nu_k), r.evals["phi_evals"], _fmt(r.wall_time)])
    sidecar = {
        "solver": trace.solver,
        "problem": trace.problem,
        "termination": trace.termination,
        "x0": None if trace.x0 is None else trace.x0.tolist(),
        "final_x": trace.final_x.tolist(),
        "iterations": [
            {"k": r.k, "x": r.x_k.tolist(), "y": r.y_k.tolist(), "d": r.d_k.tolist(),
             "phi": r.phi_x, "lambda": r.lambda_k, "j": r.j_k, "nu": r.nu_k,
             "fallback": r.fallback, "inner_converged": r.inner_converged}
            for r in trace.records
        ],
    }
    with open(path_json, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=1)


def write_summary(stats: RunStats, path_csv: str, path_json: str, results: Iterable[TrialResult] = ()) -> None:
    with open(path_csv, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerow(stats.row())
    payload = asdict(stats)
    payload["trials_detail"] = [asdict(r) for r in results]
    with open(path_json, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1)


def _paths(out_dir: str, stem: str, kind: str) -> Tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, f"{stem}_{kind}")
    return base + ".csv", base + ".json"


def _stem(problem_id: str, solver: str) -> str:
    return f"{problem_id.replace('@', '_s')}_{solver}"


# ---------- entry points ----------

def run_single(spec: BenchSpec) -> Trace:
    """One run from spec.x0 (or trial 0 of the seed) with the per-iteration trace written out."""
    card = resolve_card(spec.problem_id)
    p = card.problem
    x0 = as_point(spec.x0, p.dim) if spec.x0 is not None else trial_start(spec.seed, 0, p.dim, p.init_box)
    trace = solve(spec.solver, p, x0, spec.config)
    log.info("run %s/%s: %d iterations, phi=%.12g, termination=%s",
             card.id, spec.solver, trace.iterations, trace.final_phi, trace.termination)
    if spec.out_dir:
        path_csv, path_json = _paths(spec.out_dir, _stem(card.id, spec.solver), "trace")
        write_trace(trace, p.phi_star, path_csv, path_json)
        log.info("trace written to %s", path_csv)
    return trace


def run_bench(spec: BenchSpec) -> RunStats:
    card = resolve_card(spec.problem_id)
    log.info("bench %s/%s: %d trials seed=%d workers=%d", card.id, spec.solver, spec.trials, spec.seed, spec.workers)
    results = run_trials(spec)
    stats = aggregate(card, spec.solver, results, spec.opt_tol)
    if stats.violations:
        log.warning("bench %s/%s: %d descent violations", card.id, spec.solver, stats.violations)
    log.info("bench %s/%s: med_k=%g best_phi=%.12g pct_optimal=%s",
             card.id, spec.solver, stats.med_k, stats.best_phi, stats.pct_optimal)
    if spec.out_dir:
        path_csv, path_json = _paths(spec.out_dir, _stem(card.id, spec.solver), "summary")
        write_summary(stats, path_csv, path_json, results)
    return stats


def run_sigma_sweep(
    family: str,
    sigmas: Sequence[float],
    trials: int,
    seed: int,
    config: SolverConfig,
    *,
    solvers: Sequence[str] = SWEEP_SOLVERS,
    out_dir: Optional[str] = "out",
    workers: int = 1,
) -> List[Dict[str, Any]]:
    """Median iterations/time per (sigma, solver) on the re-decomposed family."""
    base = resolve_card(family)
    rows: List[Dict[str, Any]] = []
    for sigma in sigmas:
        member = sigma_family(base, sigma)
        member_id = f"{base.family or base.id}@{float(sigma):g}"
        for solver in solvers:
            spec = BenchSpec(problem_id=member_id, solver=solver, config=config, trials=trials,
                             seed=seed, out_dir=None, workers=workers)
            stats = aggregate(member, solver, run_trials(spec))
            rows.append({"sigma": float(sigma), "solver": solver, "med_k": stats.med_k, "med_time_s": stats.med_time})
            log.info("sweep %s sigma=%g %s: med_k=%g", family, sigma, solver, stats.med_k)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{base.family or base.id}_sigma_sweep.csv")
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.DictWriter(f, fieldnames=SWEEP_HEADER, lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({**row, "med_k": repr(row["med_k"]), "med_time_s": repr(row["med_time_s"])})
    return rows


def total_violations(stats: Iterable[RunStats]) -> int:
    return sum(s.violations for s in stats)


def read_trace_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def read_sidecar(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def replay_phi(problem_id: str, sidecar: Dict[str, Any]) -> List[float]:
    """phi recomputed at each stored x^k."""
    p = resolve_card(problem_id).problem
    return [eval_phi(p, np.asarray(it["x"], dtype=float)) for it in sidecar["iterations"]]
