"""ADMM execution in two equivalent forms.

The matrix form is the reference: it advances the stacked state
(x, z, lambda) with the lifted operators and maintains the driver vector
zeta = lambda + rho z. The message-passing form simulates synchronous
rounds in which each agent holds only its estimate, its averaged cluster
target chi, and its aggregated multiplier delta; cluster heads compute
in-cluster averages. A specialization for two-agent clusters exchanges
estimates directly between neighbors. All three produce identical
trajectories up to floating point roundoff.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidTopologyError
from .linalg import block_diag
from .objectives import ProblemInstance, solve_consensus_minimizer
from .topology import ComponentStructure, mixing_matrices, validate

FORMS = ("matrix", "general", "edges")


@dataclass
class AdmmState:
    """Stacked matrix-form iterate. zeta = lam + rho * z at all times."""

    x: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    zeta: np.ndarray
    iteration: int = 0


@dataclass
class DistributedState:
    """Per-agent memory of the message-passing form.

    ``x``, ``chi`` and ``delta`` have shape (N, K); ``zbar`` holds the
    cluster heads' averages with shape (L, K).
    """

    x: np.ndarray
    chi: np.ndarray
    delta: np.ndarray
    zbar: np.ndarray
    iteration: int = 0


@dataclass
class Trajectory:
    """Recorded run. Index i holds iteration i+1; the length equals the
    number of executed iterations."""

    errors: np.ndarray
    xs: np.ndarray
    zetas: np.ndarray | None
    x_star: np.ndarray
    rho: float
    form: str
    stop_tol: float
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.errors)

    def to_csv(self, path):
        """Write columns (k, err, log_err, rate_est) with rate_est = -log(err)/k."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "err", "log_err", "rate_est"])
            for i, err in enumerate(self.errors):
                k = i + 1
                log_err = math.log(err) if err > 0.0 else float("-inf")
                writer.writerow([k, repr(float(err)), repr(log_err), repr(-log_err / k)])


class _Workspace:
    """Operators precomputed for one (structure, instance, rho) triple."""

    def __init__(self, cs: ComponentStructure, instance: ProblemInstance, rho: float):
        if rho <= 0.0:
            raise ValueError("rho must be positive")
        if instance.dim != cs.dim:
            raise ValueError("instance dimension does not match the topology")
        if instance.n_agents != cs.n_agents:
            raise ValueError("instance size does not match the topology")
        self.cs = cs
        self.instance = instance
        self.rho = float(rho)
        self.k = cs.dim
        self.m, _, self.p = mixing_matrices(cs)
        terms = instance.quadratic_terms()
        if terms is None:
            self.h = None
            self.c = None
        else:
            self.h = block_diag([t[0] for t in terms]) + rho * (self.m.T @ self.m)
            self.c = np.concatenate([t[1] for t in terms])
        # per-agent prox weights 1 / (rho * |sigma(n)|)
        self.weights = [1.0 / (rho * len(rows)) for rows in cs.agent_rows]

    # matrix form -----------------------------------------------------

    def step_matrix(self, state: AdmmState) -> AdmmState:
        cs, rho, k = self.cs, self.rho, self.k
        u = state.z - state.lam / rho
        if self.h is not None:
            x = np.linalg.solve(self.h, rho * (self.m.T @ u) - self.c)
        else:
            # block-separable objective: one prox per agent against the
            # average of its cluster anchors
            u_rows = u.reshape(cs.total_rows, k)
            parts = []
            for a, oracle in enumerate(self.instance.oracles):
                anchor = u_rows[list(cs.agent_rows[a])].mean(axis=0)
                parts.append(oracle.prox(self.weights[a], anchor))
            x = np.concatenate(parts)
        zeta = rho * (self.m @ x) + state.lam
        z = self.p @ zeta / rho
        lam = zeta - rho * z
        return AdmmState(x=x, z=z, lam=lam, zeta=zeta, iteration=state.iteration + 1)

    # message-passing forms -------------------------------------------

    def step_general(self, state: DistributedState) -> DistributedState:
        cs = self.cs
        # 1) every agent updates its estimate
        x = np.vstack([
            oracle.prox(self.weights[a], state.chi[a] - state.delta[a])
            for a, oracle in enumerate(self.instance.oracles)
        ])
        # 2) cluster heads average and broadcast
        zbar = np.vstack([
            x[[n - 1 for n in comp]].mean(axis=0) for comp in cs.components
        ])
        # 3) agents refresh their aggregates
        chi = np.vstack([
            zbar[list(comps)].mean(axis=0) for comps in cs.memberships
        ])
        delta = state.delta + x - chi
        return DistributedState(
            x=x, chi=chi, delta=delta, zbar=zbar, iteration=state.iteration + 1
        )

    def step_edges(self, state: DistributedState) -> DistributedState:
        cs = self.cs
        if not cs.is_edge_clustering():
            raise InvalidTopologyError("edge-exchange form needs two-agent clusters")
        neighbors = _neighbor_lists(cs)
        x = np.vstack([
            oracle.prox(self.weights[a], state.chi[a] - state.delta[a])
            for a, oracle in enumerate(self.instance.oracles)
        ])
        # neighbor exchange replaces the cluster head
        xbar = np.vstack([x[nbrs].mean(axis=0) for nbrs in neighbors])
        chi = 0.5 * (x + xbar)
        delta = state.delta + 0.5 * (x - xbar)
        zbar = np.vstack([
            0.5 * (x[comp[0] - 1] + x[comp[1] - 1]) for comp in cs.components
        ])
        return DistributedState(
            x=x, chi=chi, delta=delta, zbar=zbar, iteration=state.iteration + 1
        )


def _neighbor_lists(cs: ComponentStructure):
    neighbors = [[] for _ in range(cs.n_agents)]
    for i, j in cs.components:
        neighbors[i - 1].append(j - 1)
        neighbors[j - 1].append(i - 1)
    return [sorted(n) for n in neighbors]


def initial_state(cs: ComponentStructure, rho: float, seed=None) -> AdmmState:
    """Zero or seeded-Gaussian initialization of the matrix-form state.

    The random option draws the driver vector zeta from a standard normal
    and splits it canonically: rho z is the consensus component, lambda the
    complement. That parametrization spans all initializations reachable
    after one ADMM step and keeps the two algorithm forms exactly
    equivalent from the first iteration on.
    """
    _, _, p = mixing_matrices(cs)
    tk = p.shape[0]
    if seed is None:
        zeta = np.zeros(tk)
        z = np.zeros(tk)
    else:
        zeta = np.random.default_rng(seed).standard_normal(tk)
        z = p @ zeta / rho
    lam = zeta - rho * z
    return AdmmState(
        x=np.zeros(cs.n_agents * cs.dim), z=z, lam=lam, zeta=zeta, iteration=0
    )


def to_distributed(cs: ComponentStructure, rho: float, state: AdmmState) -> DistributedState:
    """Scatter a matrix-form state into per-agent memories."""
    k = cs.dim
    z_rows = state.z.reshape(cs.total_rows, k)
    lam_rows = state.lam.reshape(cs.total_rows, k)
    zbar = np.vstack([
        z_rows[start:stop].mean(axis=0) for start, stop in cs.component_slices
    ])
    chi = np.vstack([zbar[list(comps)].mean(axis=0) for comps in cs.memberships])
    delta = np.vstack([
        lam_rows[list(rows)].mean(axis=0) / rho for rows in cs.agent_rows
    ])
    return DistributedState(
        x=state.x.reshape(cs.n_agents, k).copy(),
        chi=chi,
        delta=delta,
        zbar=zbar,
        iteration=state.iteration,
    )


def step_matrix_form(state: AdmmState, rho: float, instance: ProblemInstance,
                     cs: ComponentStructure) -> AdmmState:
    """One ADMM iteration on the stacked state.

    The estimate update minimizes the objective plus the quadratic coupling
    penalty: explicit quadratics use one linear solve with the penalized
    curvature matrix, everything else falls back to the per-agent proximal
    updates, which solve the same minimization block by block.
    """
    return _Workspace(cs, instance, rho).step_matrix(state)


def step_distributed_general(state: DistributedState, rho: float,
                             instance: ProblemInstance,
                             cs: ComponentStructure) -> DistributedState:
    """One synchronous round of the cluster-head algorithm."""
    return _Workspace(cs, instance, rho).step_general(state)


def step_distributed_edges(state: DistributedState, rho: float,
                           instance: ProblemInstance,
                           cs: ComponentStructure) -> DistributedState:
    """One synchronous round of the pairwise-exchange algorithm.

    Only valid when every cluster is a pair of agents; then neighbor
    averages replace the cluster heads and the round reduces to the
    general form specialized to two-agent clusters.
    """
    return _Workspace(cs, instance, rho).step_edges(state)


def state_to_json(state) -> dict:
    """Serialize a matrix-form or per-agent state for resume and debugging."""
    if isinstance(state, AdmmState):
        return {
            "form": "matrix",
            "iteration": state.iteration,
            "x": state.x.tolist(),
            "z": state.z.tolist(),
            "lam": state.lam.tolist(),
            "zeta": state.zeta.tolist(),
        }
    if isinstance(state, DistributedState):
        return {
            "form": "distributed",
            "iteration": state.iteration,
            "x": state.x.tolist(),
            "chi": state.chi.tolist(),
            "delta": state.delta.tolist(),
            "zbar": state.zbar.tolist(),
        }
    raise TypeError(f"not a solver state: {type(state).__name__}")


def state_from_json(data: dict):
    form = data.get("form")
    if form == "matrix":
        return AdmmState(
            x=np.asarray(data["x"], dtype=float),
            z=np.asarray(data["z"], dtype=float),
            lam=np.asarray(data["lam"], dtype=float),
            zeta=np.asarray(data["zeta"], dtype=float),
            iteration=int(data["iteration"]),
        )
    if form == "distributed":
        return DistributedState(
            x=np.asarray(data["x"], dtype=float),
            chi=np.asarray(data["chi"], dtype=float),
            delta=np.asarray(data["delta"], dtype=float),
            zbar=np.asarray(data["zbar"], dtype=float),
            iteration=int(data["iteration"]),
        )
    raise ValueError(f"unknown state form {form!r}")


def state_invariant_residuals(state: AdmmState, cs: ComponentStructure, rho: float) -> dict:
    """Residuals of the structural identities the iterates must satisfy."""
    _, _, p = mixing_matrices(cs)
    k = cs.dim
    lam_rows = state.lam.reshape(cs.total_rows, k)
    block_sums = max(
        (float(np.abs(lam_rows[start:stop].sum(axis=0)).max())
         for start, stop in cs.component_slices),
        default=0.0,
    )
    return {
        "consensus_component": float(np.linalg.norm(rho * state.z - p @ state.zeta)),
        "multiplier_component": float(
            np.linalg.norm(state.lam - (state.zeta - p @ state.zeta))
        ),
        "multiplier_block_sums": block_sums,
    }


def run(cs: ComponentStructure, instance: ProblemInstance, rho: float, *,
        form: str = "general", max_iters: int = 2000, stop_tol: float = 1e-12,
        init_seed=None, x_star=None) -> Trajectory:
    """Iterate ADMM and record the consensus error per iteration.

    Stops once ||x_k - x_star replicated|| falls below ``stop_tol`` or after
    ``max_iters`` rounds. The reference minimizer is computed from the
    instance unless supplied.
    """
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}, expected one of {FORMS}")
    report = validate(cs)
    if not report.valid:
        raise InvalidTopologyError(
            f"structure fails validation: covers_all_agents="
            f"{report.covers_all_agents}, connected={report.component_graph_connected}"
        )
    ws = _Workspace(cs, instance, rho)
    if x_star is None:
        x_star, _ = solve_consensus_minimizer(instance)
    x_star = np.asarray(x_star, dtype=float)
    target = np.tile(x_star, cs.n_agents)

    state = initial_state(cs, rho, seed=init_seed)
    dstate = to_distributed(cs, rho, state) if form != "matrix" else None

    def current_x():
        return state.x if form == "matrix" else dstate.x.reshape(-1)

    xs = []
    zetas = [] if form == "matrix" else None
    errors = []
    converged = False
    for _ in range(max_iters):
        if form == "matrix":
            state = ws.step_matrix(state)
        elif form == "general":
            dstate = ws.step_general(dstate)
        else:
            dstate = ws.step_edges(dstate)
        xs.append(current_x().copy())
        if zetas is not None:
            zetas.append(state.zeta.copy())
        errors.append(float(np.linalg.norm(current_x() - target)))
        if errors[-1] <= stop_tol:
            converged = True
            break

    return Trajectory(
        errors=np.array(errors),
        xs=np.array(xs),
        zetas=np.array(zetas) if zetas is not None else None,
        x_star=x_star,
        rho=float(rho),
        form=form,
        stop_tol=float(stop_tol),
        converged=converged,
    )
