"""Config-driven experiment harness.

One JSON document describes an experiment: the topology, the per-agent
objectives, the penalty parameter (single value, sweep grid, or search
range), and the run controls. The harness reproduces the stock studies:
rate-versus-penalty sweeps, simulated runs with an empirical-rate fit
against the theoretical value, and penalty optimization.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import ConfigError
from .objectives import (
    ProblemInstance,
    instance_from_json,
    sample_experiment_objectives,
    solve_consensus_minimizer,
)
from .rate import (
    RateReport,
    centralized_rate,
    convergence_rate,
    curvature_matrix,
    optimize_rho,
    rate_report,
    ring_optimal_rate,
    ring_optimal_rho,
    ring_rate,
)
from . import topology as topo

# errors below this are treated as numerical noise, not signal to fit
ERROR_FLOOR = 1e-13


@dataclass
class EmpiricalRateEstimate:
    """Least-squares slope of the log-error curve over a late window."""

    slope: float
    k_min: int
    k_max: int
    residual: float
    alpha_empirical: float
    degenerate: bool

    def to_json(self) -> dict:
        return {
            "slope": self.slope,
            "window": [self.k_min, self.k_max],
            "residual": self.residual,
            "alpha_empirical": self.alpha_empirical,
            "degenerate": self.degenerate,
        }


def fit_empirical_rate(errors, window=(0.5, 0.9)) -> EmpiricalRateEstimate:
    """Fit log(err_k) ~ slope * k over the given fraction of the run.

    The window skips the transient at the start and the floating point
    floor at the end. Runs whose windowed errors sit at the floor (for
    example when the iterates start at the solution) are reported as
    degenerate instead of producing a meaningless slope.
    """
    errors = np.asarray(errors, dtype=float)
    n = len(errors)
    lo, hi = window
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError("window must satisfy 0 <= lo < hi <= 1")
    k_min = max(1, math.ceil(lo * n))
    k_max = max(k_min, math.floor(hi * n))
    ks = np.arange(k_min, k_max + 1)
    window_errors = errors[ks - 1]
    if len(ks) < 2 or np.max(window_errors) < ERROR_FLOOR or np.any(window_errors <= 0.0):
        return EmpiricalRateEstimate(
            slope=float("nan"),
            k_min=int(k_min),
            k_max=int(k_max),
            residual=float("nan"),
            alpha_empirical=float("nan"),
            degenerate=True,
        )
    logs = np.log(window_errors)
    slope, intercept = np.polyfit(ks, logs, 1)
    fitted = slope * ks + intercept
    residual = float(np.sqrt(np.mean((logs - fitted) ** 2)))
    return EmpiricalRateEstimate(
        slope=float(slope),
        k_min=int(k_min),
        k_max=int(k_max),
        residual=residual,
        alpha_empirical=float(math.exp(slope)),
        degenerate=False,
    )


@dataclass
class ExperimentConfig:
    """Parsed experiment description."""

    topology: dict
    objective: dict
    dim: int = 1
    rho: float | None = None
    rho_values: list | None = None
    rho_range: tuple | None = None
    algorithm: str = "general"
    max_iters: int = 2000
    stop_tol: float = 1e-12
    init_seed: int | None = None
    fit_window: tuple = (0.5, 0.9)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "topology" not in data or "objective" not in data:
            raise ConfigError("config needs 'topology' and 'objective' sections")
        rho = data.get("rho")
        if rho is not None and float(rho) <= 0.0:
            raise ConfigError("rho must be positive")
        rho_values = _parse_rho_grid(data)
        rho_range = data.get("rho_range")
        if rho_range is not None:
            rho_range = (float(rho_range[0]), float(rho_range[1]))
            if not 0.0 < rho_range[0] < rho_range[1]:
                raise ConfigError("rho_range must satisfy 0 < lo < hi")
        algorithm = data.get("algorithm", "general")
        if algorithm not in engine.FORMS:
            raise ConfigError(f"algorithm must be one of {engine.FORMS}")
        window = tuple(data.get("fit_window", (0.5, 0.9)))
        cfg = cls(
            topology=dict(data["topology"]),
            objective=dict(data["objective"]),
            dim=int(data.get("dim", 1)),
            rho=float(rho) if rho is not None else None,
            rho_values=rho_values,
            rho_range=rho_range,
            algorithm=algorithm,
            max_iters=int(data.get("max_iters", 2000)),
            stop_tol=float(data.get("stop_tol", 1e-12)),
            init_seed=data.get("init_seed"),
            fit_window=window,
        )
        if cfg.dim < 1:
            raise ConfigError("dim must be positive")
        if cfg.max_iters < 1:
            raise ConfigError("max_iters must be positive")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    # builders ---------------------------------------------------------

    def build_structure(self) -> topo.ComponentStructure:
        spec = self.topology
        kind = spec.get("kind")
        try:
            if kind == "centralized":
                return topo.centralized(int(spec["n_agents"]), self.dim)
            if kind == "ring":
                return topo.ring(int(spec["n_agents"]), self.dim)
            if kind == "edges":
                return topo.from_edges(spec["edges"], int(spec["n_agents"]), self.dim)
            if kind == "rgg":
                sample = topo.random_geometric_graph(
                    int(spec["n_agents"]), float(spec["radius"]), int(spec["seed"])
                )
                return sample.to_structure(self.dim)
            if kind == "components":
                return topo.ComponentStructure(
                    int(spec["n_agents"]),
                    self.dim,
                    tuple(tuple(int(n) for n in comp) for comp in spec["components"]),
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad topology spec: {exc}") from exc
        raise ConfigError(f"unknown topology kind {kind!r}")

    def build_instance(self, n_agents: int) -> ProblemInstance:
        spec = self.objective
        kind = spec.get("kind")
        try:
            if kind in ("quadratic", "exponential"):
                instance = sample_experiment_objectives(
                    kind, n_agents, int(spec.get("seed", 0))
                )
            elif kind == "custom":
                if "path" in spec:
                    with open(spec["path"]) as fh:
                        payload = json.load(fh)
                else:
                    payload = spec["oracles"]
                instance = instance_from_json(payload)
            else:
                raise ConfigError(f"unknown objective kind {kind!r}")
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, OSError) as exc:
            raise ConfigError(f"bad objective spec: {exc}") from exc
        if instance.n_agents != n_agents:
            raise ConfigError(
                f"objective provides {instance.n_agents} oracles for {n_agents} agents"
            )
        if instance.dim != self.dim:
            raise ConfigError("objective dimension does not match config dim")
        return instance


def _parse_rho_grid(data: dict):
    if "rho_values" in data:
        values = [float(v) for v in data["rho_values"]]
        if not values or any(v <= 0.0 for v in values):
            raise ConfigError("rho_values must be a nonempty list of positive reals")
        return values
    if "rho_grid" in data:
        grid = data["rho_grid"]
        try:
            lo, hi = float(grid["lo"]), float(grid["hi"])
            points = int(grid["points"])
            spacing = grid.get("spacing", "log")
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad rho_grid: {exc}") from exc
        if not 0.0 < lo <= hi or points < 1:
            raise ConfigError("rho_grid needs 0 < lo <= hi and points >= 1")
        if spacing == "log":
            return [float(v) for v in np.geomspace(lo, hi, points)]
        if spacing == "linear":
            return [float(v) for v in np.linspace(lo, hi, points)]
        raise ConfigError("rho_grid spacing must be 'log' or 'linear'")
    return None


def _require_valid(cs: topo.ComponentStructure) -> None:
    report = topo.validate(cs)
    if not report.valid:
        raise ConfigError(
            "topology fails validation: "
            f"covers_all_agents={report.covers_all_agents} "
            f"(missing {list(report.missing_agents)}), "
            f"component_graph_connected={report.component_graph_connected}"
        )


def _equal_scalar_curvature(cs, hessians):
    """sigma^2 when K = 1 and all curvatures coincide, else None."""
    if cs.dim != 1:
        return None
    values = [float(h[0, 0]) for h in hessians]
    first = values[0]
    if all(abs(v - first) <= 1e-12 * max(1.0, abs(first)) for v in values):
        return first
    return None


def _closed_form_alpha(cs, config, sigma2, rho):
    if sigma2 is None:
        return None
    kind = config.topology.get("kind")
    if kind == "centralized":
        return centralized_rate(rho, sigma2)
    if kind == "ring":
        return ring_rate(rho, sigma2, cs.n_agents).closed_form
    return None


def compute_rate(config: ExperimentConfig) -> RateReport:
    """Rate report for a single-penalty config."""
    if config.rho is None:
        raise ConfigError("'rho' is required for the rate command")
    cs = config.build_structure()
    _require_valid(cs)
    instance = config.build_instance(cs.n_agents)
    return rate_report(cs, instance, config.rho, with_fixed_point=False)


def sweep_rates(config: ExperimentConfig):
    """Rows (rho, alpha_general, alpha_closed_form_or_None) over the grid."""
    if not config.rho_values:
        raise ConfigError("sweep needs 'rho_values' or 'rho_grid'")
    cs = config.build_structure()
    _require_valid(cs)
    instance = config.build_instance(cs.n_agents)
    _, hessians = solve_consensus_minimizer(instance)
    sigma2 = _equal_scalar_curvature(cs, hessians)
    rows = []
    for rho in config.rho_values:
        report = convergence_rate(cs, curvature_matrix(cs, hessians, rho), rho=rho)
        rows.append((rho, report.alpha, _closed_form_alpha(cs, config, sigma2, rho)))
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rho", "alpha_general", "alpha_closed_form"])
        for rho, alpha, closed in rows:
            writer.writerow([repr(float(rho)), repr(float(alpha)),
                             "" if closed is None else repr(float(closed))])


def read_sweep_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for record in reader:
            closed = record["alpha_closed_form"]
            rows.append((
                float(record["rho"]),
                float(record["alpha_general"]),
                float(closed) if closed else None,
            ))
    return rows


def run_experiment(config: ExperimentConfig):
    """Simulate ADMM per the config; return (trajectory, fit, rate report)."""
    if config.rho is None:
        raise ConfigError("'rho' is required for the run command")
    cs = config.build_structure()
    _require_valid(cs)
    instance = config.build_instance(cs.n_agents)
    minimizer = solve_consensus_minimizer(instance)
    report = convergence_rate(
        cs, curvature_matrix(cs, minimizer[1], config.rho), rho=config.rho
    )
    trajectory = engine.run(
        cs,
        instance,
        config.rho,
        form=config.algorithm,
        max_iters=config.max_iters,
        stop_tol=config.stop_tol,
        init_seed=config.init_seed,
        x_star=minimizer[0],
    )
    fit = fit_empirical_rate(trajectory.errors, window=config.fit_window)
    return trajectory, fit, report


def optimal_rho_experiment(config: ExperimentConfig) -> dict:
    """Search the penalty range; include closed-form references when the
    topology is centralized or a ring with equal scalar curvatures."""
    if config.rho_range is None:
        raise ConfigError("'rho_range' is required for the optimal-rho command")
    cs = config.build_structure()
    _require_valid(cs)
    instance = config.build_instance(cs.n_agents)
    _, hessians = solve_consensus_minimizer(instance)
    rho_star, alpha_star = optimize_rho(cs, hessians, config.rho_range)
    result = {"rho_star": rho_star, "alpha_star": alpha_star}
    sigma2 = _equal_scalar_curvature(cs, hessians)
    kind = config.topology.get("kind")
    if sigma2 is not None and kind == "centralized":
        result["closed_form_rho"] = sigma2
        result["closed_form_alpha"] = 0.5
    elif sigma2 is not None and kind == "ring":
        result["closed_form_rho"] = ring_optimal_rho(sigma2, cs.n_agents)
        result["closed_form_alpha"] = ring_optimal_rate(cs.n_agents)
    return result


def generate_topology(config: ExperimentConfig) -> dict:
    """Materialize the topology section as a serializable document."""
    spec = config.topology
    if spec.get("kind") == "rgg":
        try:
            sample = topo.random_geometric_graph(
                int(spec["n_agents"]), float(spec["radius"]), int(spec["seed"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad topology spec: {exc}") from exc
        payload = topo.rgg_to_json(sample)
        payload["structure"] = topo.structure_to_json(sample.to_structure(config.dim))
        return payload
    return topo.structure_to_json(config.build_structure())
