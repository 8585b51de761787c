"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute. Tolerances are pinned here and nowhere else.
"""

import math
import time

import numpy as np

from admmrate import engine, topology as topo
from admmrate.linalg import real_eig
from admmrate.objectives import (
    prox,
    sample_experiment_objectives,
    solve_consensus_minimizer,
)
from admmrate.rate import (
    affine_offset,
    centralized_rate,
    convergence_rate,
    curvature_matrix,
    fixed_point,
    iteration_matrix,
    optimize_rho,
    primal_from_driver,
    ring_rate,
)
from admmrate.experiments import fit_empirical_rate

from conftest import (
    multiset_max_distance,
    random_quadratic_instance,
    random_scalar_instance,
    random_structure,
)

SIGMA2 = 16.0
RGG_SEED = 1413  # recorded seed of the connected 20-agent, radius-0.2 graph
OBJECTIVE_SEED = 1
INIT_SEED = 7


def _report(number, label, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"criterion {number} [{label}]: {status}{suffix}")
    assert ok, f"criterion {number} [{label}] failed{suffix}"


def test_criterion_1_centralized_closed_form():
    start = time.monotonic()
    cs = topo.centralized(5)
    hessians = [np.array([[SIGMA2]])] * 5
    worst = 0.0
    alphas = {}
    for rho in [4.0, 8.0, 16.0, 32.0, 64.0]:
        report = convergence_rate(cs, curvature_matrix(cs, hessians, rho), rho=rho)
        closed = centralized_rate(rho, SIGMA2)
        worst = max(worst, abs(report.alpha - closed))
        alphas[rho] = report.alpha
    elapsed = time.monotonic() - start
    ok = (
        worst <= 1e-10
        and centralized_rate(16.0, SIGMA2) == 0.5
        and min(alphas, key=alphas.get) == 16.0
        and abs(alphas[16.0] - 0.5) <= 1e-10
        and elapsed < 1.0
    )
    _report(1, "centralized closed form", ok,
            f"max gap {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_ring_spectrum_equivalence():
    start = time.monotonic()
    worst_spec = 0.0
    worst_alpha = 0.0
    for n in range(3, 41):
        cs = topo.ring(n)
        hessians = [np.array([[SIGMA2]])] * n
        for rho in np.geomspace(1.0, 256.0, 20):
            breakdown = ring_rate(float(rho), SIGMA2, n)
            roots = [r for entry in breakdown.per_k for r in entry.roots]
            q = curvature_matrix(cs, hessians, float(rho))
            spectrum = real_eig(iteration_matrix(cs, q))
            worst_spec = max(worst_spec, multiset_max_distance(roots, spectrum))
            report = convergence_rate(cs, q, rho=float(rho))
            worst_alpha = max(worst_alpha, abs(report.alpha - breakdown.alpha))
    elapsed = time.monotonic() - start
    ok = worst_spec <= 1e-8 and worst_alpha <= 1e-8 and elapsed < 30.0
    _report(2, "ring spectrum equivalence", ok,
            f"spectrum gap {worst_spec:.2e}, rate gap {worst_alpha:.2e}, {elapsed:.1f}s")


def test_criterion_3_ring_optimum():
    ok = True
    details = []
    for n in [10, 20, 50]:
        cs = topo.ring(n)
        hessians = [np.array([[SIGMA2]])] * n
        rho_star, alpha_star = optimize_rho(cs, hessians, (1.0, 400.0))
        want_rho = SIGMA2 / (2.0 * math.sin(2.0 * math.pi / n))
        c1 = math.cos(2.0 * math.pi / n)
        s1 = math.sin(2.0 * math.pi / n)
        want_alpha = math.sqrt((1.0 + c1) / (1.0 + s1)) / math.sqrt(2.0)
        rho_ok = abs(rho_star - want_rho) <= 1e-3 * want_rho
        alpha_ok = abs(alpha_star - want_alpha) <= 1e-6
        ok = ok and rho_ok and alpha_ok
        details.append(f"N={n}: drho {abs(rho_star - want_rho) / want_rho:.1e}, "
                       f"dalpha {abs(alpha_star - want_alpha):.1e}")
    _report(3, "ring optimum (N=10,20,50)", ok, "; ".join(details))


def test_criterion_3_ring_optimum_large_n_asymptote():
    n = 200
    cs = topo.ring(n)
    hessians = [np.array([[SIGMA2]])] * n
    want_rho = SIGMA2 / (2.0 * math.sin(2.0 * math.pi / n))
    _, alpha_star = optimize_rho(cs, hessians, (0.5 * want_rho, 2.0 * want_rho))
    gap = abs(alpha_star - (1.0 - math.pi / n))
    ok = gap <= 5.0 / n**2
    _report(3, "ring optimum asymptote (N=200)", ok,
            f"|alpha*-(1-pi/N)| = {gap:.3e} vs 5/N^2 = {5.0 / n**2:.3e}")


def test_criterion_4_quadratic_affine_recursion():
    rng = np.random.default_rng(404)
    worst_res = 0.0
    worst_rec = 0.0
    for trial in range(20):
        cs = random_structure(rng, max_agents=15, dim=int(rng.integers(1, 3)))
        instance = random_quadratic_instance(rng, cs.n_agents, cs.dim)
        rho = float(rng.uniform(0.5, 10.0))
        minimizer = solve_consensus_minimizer(instance)
        q = curvature_matrix(cs, minimizer[1], rho)
        r = iteration_matrix(cs, q)
        d = affine_offset(cs, instance, rho, minimizer=minimizer)
        state = engine.initial_state(cs, rho, seed=trial)
        ok_steps = True
        for _ in range(40):
            nxt = engine.step_matrix_form(state, rho, instance, cs)
            residual = float(np.linalg.norm(nxt.zeta - (r @ state.zeta + d)))
            bound = 1e-9 * (1.0 + float(np.linalg.norm(state.zeta)))
            worst_res = max(worst_res, residual / bound)
            ok_steps = ok_steps and residual <= bound
            state = nxt
        zeta = fixed_point(cs, q, instance, rho, minimizer=minimizer)
        x = primal_from_driver(cs, instance, rho, zeta, minimizer=minimizer)
        gap = float(np.linalg.norm(x - np.tile(minimizer[0], cs.n_agents)))
        worst_rec = max(worst_rec, gap)
        assert ok_steps
    ok = worst_res <= 1.0 and worst_rec <= 1e-8
    _report(4, "quadratic affine recursion", ok,
            f"residual/bound {worst_res:.2e}, reconstruction {worst_rec:.2e}")


def _tightness_run(kind, rho):
    sample = topo.random_geometric_graph(20, 0.2, seed=RGG_SEED)
    cs = sample.to_structure()
    instance = sample_experiment_objectives(kind, 20, seed=OBJECTIVE_SEED)
    minimizer = solve_consensus_minimizer(instance)
    report = convergence_rate(cs, curvature_matrix(cs, minimizer[1], rho), rho=rho)
    trajectory = engine.run(
        cs, instance, rho, form="edges", max_iters=2000, stop_tol=1e-10,
        init_seed=INIT_SEED, x_star=minimizer[0],
    )
    fit = fit_empirical_rate(trajectory.errors, window=(0.5, 0.9))
    return report, fit


def test_criterion_5_quadratic_rate_tightness():
    start = time.monotonic()
    report, fit = _tightness_run("quadratic", 100.0)
    elapsed = time.monotonic() - start
    rel = abs(fit.alpha_empirical - report.alpha) / report.alpha
    ok = not fit.degenerate and rel <= 0.02 and elapsed < 10.0
    _report(5, "quadratic empirical tightness", ok,
            f"alpha {report.alpha:.6f}, empirical {fit.alpha_empirical:.6f}, "
            f"rel {rel:.2%}, {elapsed:.1f}s")


def test_criterion_6_exponential_rate_tightness():
    start = time.monotonic()
    report, fit = _tightness_run("exponential", 20.0)
    elapsed = time.monotonic() - start
    rel = abs(fit.alpha_empirical - report.alpha) / report.alpha
    ok = not fit.degenerate and rel <= 0.05 and elapsed < 30.0
    _report(6, "exponential empirical tightness", ok,
            f"alpha {report.alpha:.6f}, empirical {fit.alpha_empirical:.6f}, "
            f"rel {rel:.2%}, {elapsed:.1f}s")


def test_criterion_7_path_equivalence():
    rng = np.random.default_rng(707)
    worst = 0.0
    # the three-component overlap example plus randomized layouts
    cases = [topo.ComponentStructure(5, 1, ((1, 2), (4, 5), (2, 3, 4)))]
    cases += [random_structure(rng, max_agents=9) for _ in range(9)]
    for idx, cs in enumerate(cases):
        if idx % 3 == 2:
            instance = random_scalar_instance(rng, cs.n_agents)
        else:
            instance = random_quadratic_instance(rng, cs.n_agents, cs.dim)
        rho = float(rng.uniform(0.5, 8.0))
        state = engine.initial_state(cs, rho, seed=idx + 1)
        dgen = engine.to_distributed(cs, rho, state)
        dedge = engine.to_distributed(cs, rho, state) if cs.is_edge_clustering() else None
        for _ in range(50):
            state = engine.step_matrix_form(state, rho, instance, cs)
            dgen = engine.step_distributed_general(dgen, rho, instance, cs)
            worst = max(worst, float(np.abs(state.x - dgen.x.reshape(-1)).max()))
            if dedge is not None:
                dedge = engine.step_distributed_edges(dedge, rho, instance, cs)
                worst = max(worst, float(np.abs(dgen.x - dedge.x).max()))
    ok = worst <= 1e-10
    _report(7, "path equivalence", ok, f"max componentwise gap {worst:.2e}")


def test_criterion_8_lemma_suite():
    rng = np.random.default_rng(808)
    start = time.monotonic()
    worst = {
        "sprad": 0.0,
        "circle_margin": math.inf,
        "alpha": 0.0,
        "averaging_residual": 0.0,
        "prox_slack": 0.0,
    }
    for trial in range(200):
        dim = int(rng.integers(1, 3))
        cs = random_structure(rng, max_agents=9, dim=dim)
        if trial % 3 == 0 and dim == 1:
            instance = random_scalar_instance(rng, cs.n_agents)
        else:
            instance = random_quadratic_instance(rng, cs.n_agents, cs.dim)
        rho = float(rng.uniform(0.5, 10.0))
        minimizer = solve_consensus_minimizer(instance)

        # selection and averaging identities
        s = topo.selection_matrix(cs)
        _, pi, _ = topo.mixing_matrices(cs)
        ones = np.ones(cs.n_agents)
        assert np.array_equal(s @ ones, np.ones(cs.total_rows))
        residual = np.abs((np.eye(cs.total_rows) - pi) @ (s @ ones)).max()
        dyadic = all(len(c) & (len(c) - 1) == 0 for c in cs.components)
        if dyadic:
            assert residual == 0.0
        else:
            # 1/l is not a binary fraction: machine-epsilon bound instead
            assert residual <= 8 * np.finfo(float).eps
        worst["averaging_residual"] = max(worst["averaging_residual"], residual)

        # full column rank and one-dimensional subspace intersection
        assert np.linalg.matrix_rank(s) == cs.n_agents
        inter = (
            np.linalg.matrix_rank(s)
            + np.linalg.matrix_rank(pi)
            - np.linalg.matrix_rank(np.hstack([s, pi]))
        )
        assert inter == 1

        # transition spectrum
        q = curvature_matrix(cs, minimizer[1], rho)
        report = convergence_rate(cs, q, rho=rho)
        spectrum = report.spectrum
        sprad_r = float(np.abs(spectrum).max())
        worst["sprad"] = max(worst["sprad"], sprad_r)
        assert sprad_r <= 1.0 + 1e-10
        assert report.alpha < 1.0
        worst["alpha"] = max(worst["alpha"], report.alpha)
        for lam in spectrum:
            if abs(lam - 1.0) >= 1e-7:
                margin = abs(abs(lam) - 1.0)
                worst["circle_margin"] = min(worst["circle_margin"], margin)
                assert margin > 1e-6

        # neutral dimensions agree with the kernel intersection
        _, _, p = topo.mixing_matrices(cs)
        inter_dim = q.shape[0] - np.linalg.matrix_rank(np.vstack([q, p]), tol=1e-10)
        assert report.kernel_dim == inter_dim

        # prox non-expansiveness on this instance's oracles
        oracle = instance.oracles[int(rng.integers(cs.n_agents))]
        t = float(rng.uniform(0.05, 2.0))
        v = rng.standard_normal(oracle.dim) * 2.0
        v2 = rng.standard_normal(oracle.dim) * 2.0
        gap = float(
            np.linalg.norm(prox(oracle, t, v) - prox(oracle, t, v2))
            - np.linalg.norm(v - v2)
        )
        worst["prox_slack"] = max(worst["prox_slack"], gap)
        assert gap <= 1e-10
    elapsed = time.monotonic() - start
    _report(8, "lemma suite (200 instances)", True,
            f"sprad max {worst['sprad']:.10f}, circle margin {worst['circle_margin']:.2e}, "
            f"alpha max {worst['alpha']:.6f}, prox slack {worst['prox_slack']:.1e}, "
            f"{elapsed:.1f}s")
