from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import yaml

from .dc_core import ConfigurationError
from .inner_solver import INNER_METHODS, InnerConfig
from .nu_strategies import NU_STRATEGIES, NuSpec, make_nu_strategy
from .solvers import SOLVERS, STEP_RESTARTS, SolverConfig
from .utils import env_seed


@dataclass(frozen=True)
class Settings:
    # bench
    problem: str = "p6_2"
    solver: str = "nmbdca"
    trials: int = 100
    seed: int = 0
    opt_tol: float = 1e-4
    workers: int = 1

    # outer solver; lambda_init None -> the card's value
    lambda_init: Optional[float] = None
    rho: float = 0.5
    zeta: float = 0.5
    stop_tol: float = 1e-7
    max_outer_iters: int = 5000
    max_backtracks: int = 60
    step_restart: str = "previous"
    alpha: float = 0.01

    nu_strategy: str = "power_decay"
    nu_params: Dict[str, Any] = field(default_factory=lambda: {"omega": 0.01})

    inner_method: str = "simplex"
    inner_tol_x: float = 1e-7
    inner_tol_f: float = 1e-7
    inner_max_iters_per_dim: int = 400

    out_dir: str = "out"
    log_level: str = "INFO"
    log_file: Optional[str] = None

    server_host: str = "0.0.0.0"
    server_port: int = 9689

    def __post_init__(self) -> None:
        _validate(self)

    def nu_spec(self) -> NuSpec:
        return NuSpec(self.nu_strategy, dict(self.nu_params))

    def inner_config(self, dim: int) -> InnerConfig:
        return InnerConfig(
            tol_x=self.inner_tol_x,
            tol_f=self.inner_tol_f,
            max_inner_iters=self.inner_max_iters_per_dim * dim,
            method=self.inner_method,
        )

    def solver_config(self, lambda_init_default: float, dim: int) -> SolverConfig:
        return SolverConfig(
            lambda_init=self.lambda_init if self.lambda_init is not None else lambda_init_default,
            rho=self.rho,
            zeta=self.zeta,
            stop_tol=self.stop_tol,
            max_outer_iters=self.max_outer_iters,
            max_backtracks=self.max_backtracks,
            nu_strategy=self.nu_spec(),
            inner=self.inner_config(dim),
            alpha=self.alpha,
            step_restart=self.step_restart,
        )

    def with_overrides(self, **overrides: Any) -> "Settings":
        """Replace fields whose override is not None; ``omega`` lands in nu_params."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        omega = changes.pop("omega", None)
        if "nu_strategy" in changes and changes["nu_strategy"] != self.nu_strategy and "nu_params" not in changes:
            changes["nu_params"] = {}
        if omega is not None:
            params = dict(changes.get("nu_params", self.nu_params))
            params["omega"] = float(omega)
            changes["nu_params"] = params
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigurationError(f"Config error: unknown settings {sorted(unknown)}")
        return dataclasses.replace(self, **changes)


def _validate(st: Settings) -> None:
    if st.solver not in SOLVERS:
        raise ConfigurationError(f"Config error: bench.solver must be one of {SOLVERS}, got {st.solver!r}")
    if st.trials < 1:
        raise ConfigurationError("Config error: bench.trials must be >= 1")
    if st.workers < 1:
        raise ConfigurationError("Config error: bench.workers must be >= 1")
    if not st.opt_tol > 0:
        raise ConfigurationError("Config error: bench.opt_tol must be > 0")
    if st.lambda_init is not None and not st.lambda_init > 0:
        raise ConfigurationError("Config error: solver.lambda_init must be > 0 (or null)")
    if not st.rho > 0:
        raise ConfigurationError("Config error: solver.rho must be > 0")
    if not 0 < st.zeta < 1:
        raise ConfigurationError("Config error: solver.zeta must lie in (0, 1)")
    if not st.alpha > 0:
        raise ConfigurationError("Config error: solver.alpha must be > 0")
    if st.step_restart not in STEP_RESTARTS:
        raise ConfigurationError(f"Config error: solver.step_restart must be one of {STEP_RESTARTS}")
    if st.nu_strategy not in NU_STRATEGIES:
        raise ConfigurationError(f"Config error: nu.strategy must be one of {NU_STRATEGIES}")
    if st.inner_method not in INNER_METHODS:
        raise ConfigurationError(f"Config error: inner.method must be one of {INNER_METHODS}")
    if st.inner_max_iters_per_dim < 1:
        raise ConfigurationError("Config error: inner.max_iters_per_dim must be >= 1")
    try:
        make_nu_strategy(st.nu_strategy, **st.nu_params)
    except ConfigurationError as e:
        raise ConfigurationError(f"Config error: nu: {e}") from e


def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigurationError(f"Config error: `{name}` must be a mapping")
    return sec


def load_settings(path: Optional[str] = "config.yaml") -> Settings:
    """Read config.yaml; a missing file is only accepted when ``path`` is None."""
    raw: Dict[str, Any] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigurationError(f"Config error: {path} not found")
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
        if not isinstance(raw, dict):
            raise ConfigurationError(f"Config error: {path} must hold a mapping")

    d = Settings()
    bench = _section(raw, "bench")
    solver = _section(raw, "solver")
    nu = dict(_section(raw, "nu"))
    inner = _section(raw, "inner")
    output = _section(raw, "output")
    runtime = _section(raw, "runtime")
    server = _section(raw, "server")

    seed = bench.get("seed")
    strategy = str(nu.pop("strategy", d.nu_strategy))
    nu_params = nu if nu else ({"omega": 0.01} if strategy == d.nu_strategy else {})

    try:
        return Settings(
            problem=str(bench.get("problem", d.problem)),
            solver=str(bench.get("solver", d.solver)),
            trials=int(bench.get("trials", d.trials)),
            seed=int(seed) if seed is not None else env_seed(d.seed),
            opt_tol=float(bench.get("opt_tol", d.opt_tol)),
            workers=int(bench.get("workers", d.workers)),

            lambda_init=None if solver.get("lambda_init") is None else float(solver["lambda_init"]),
            rho=float(solver.get("rho", d.rho)),
            zeta=float(solver.get("zeta", d.zeta)),
            stop_tol=float(solver.get("stop_tol", d.stop_tol)),
            max_outer_iters=int(solver.get("max_outer_iters", d.max_outer_iters)),
            max_backtracks=int(solver.get("max_backtracks", d.max_backtracks)),
            step_restart=str(solver.get("step_restart", d.step_restart)),
            alpha=float(solver.get("alpha", d.alpha)),

            nu_strategy=strategy,
            nu_params=nu_params,

            inner_method=str(inner.get("method", d.inner_method)),
            inner_tol_x=float(inner.get("tol_x", d.inner_tol_x)),
            inner_tol_f=float(inner.get("tol_f", d.inner_tol_f)),
            inner_max_iters_per_dim=int(inner.get("max_iters_per_dim", d.inner_max_iters_per_dim)),

            out_dir=str(output.get("dir", d.out_dir)),
            log_level=str(runtime.get("log_level", d.log_level)),
            log_file=runtime.get("log_file"),

            server_host=str(server.get("host", d.server_host)),
            server_port=int(server.get("port", d.server_port)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"Config error: {e}") from e
