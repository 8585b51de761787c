"""Exact linear convergence-rate analysis of the ADMM driver recursion.

For explicit quadratics (and, near the optimum, for any twice-differentiable
objective) one ADMM iteration acts on the driver vector zeta = lambda + rho z
as an affine map zeta -> R zeta + d. The asymptotic contraction factor of the
consensus error is the spectral radius of R after removing its eigenvalue-1
eigenspace, which this module computes two independent ways and cross-checks:

* projector form: sprad((proj_colsp(P+Q) - (P+Q)) (I - 2P)), and
* eigenvalue filtering: the largest modulus among R's eigenvalues after
  discarding as many unit eigenvalues as ker(P+Q) has dimensions.

Closed forms for the single-cluster and ring layouts with equal curvatures
are provided alongside, plus a penalty-parameter optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentRateError, SingularSystemError
from .linalg import (
    RANK_RTOL,
    block_diag,
    colspace_projector,
    pinv,
    real_eig,
    sprad,
    sym_eig,
)
from .objectives import ProblemInstance, solve_consensus_minimizer
from .topology import ComponentStructure, mixing_matrices

# eigenvalues of R this close to 1 count as the neutral (unit) eigenspace
UNIT_EIG_TOL = 1e-7
# the two independent rate computations must agree this tightly
CROSS_CHECK_TOL = 1e-8
# threshold on the invariant-subspace overlap that certifies tightness
TIGHTNESS_TOL = 1e-8


@dataclass
class RateReport:
    """Everything the rate analysis produces for one (topology, rho) pair."""

    alpha: float
    rho: float | None
    curvature: np.ndarray
    transition: np.ndarray
    spectrum: np.ndarray
    kernel_dim: int
    tight: bool
    zeta_star: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "rho": self.rho,
            "dim_kernel": self.kernel_dim,
            "tight": self.tight,
            "spectrum": [[float(v.real), float(v.imag)] for v in self.spectrum],
        }


@dataclass(frozen=True)
class SymbolRoots:
    """Eigenvalues of one 2x2 circulant symbol: trace, determinant, roots."""

    k: int
    trace: float
    determinant: float
    roots: tuple[complex, complex]


@dataclass
class RingRateBreakdown:
    """Ring-network rate: authoritative per-symbol roots plus the piecewise
    closed form where its branch structure is valid."""

    regime: str
    alpha: float
    per_k: tuple[SymbolRoots, ...]
    closed_form: float | None
    rho: float
    sigma2: float
    n_agents: int


def curvature_matrix(cs: ComponentStructure, hessians, rho: float) -> np.ndarray:
    """The penalized-curvature operator rho M (H0 + rho M'M)^-1 M'.

    ``hessians`` are the per-agent curvature blocks at the consensus
    minimizer. The result is symmetric positive semidefinite with the same
    column space as the lifting matrix.
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    m, _, _ = mixing_matrices(cs)
    h = block_diag(hessians) + rho * (m.T @ m)
    try:
        np.linalg.cholesky(h)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "penalized curvature matrix is not positive definite"
        ) from exc
    q = rho * (m @ np.linalg.solve(h, m.T))
    return 0.5 * (q + q.T)


def iteration_matrix(cs: ComponentStructure, curvature: np.ndarray) -> np.ndarray:
    """The driver transition matrix (I - P - Q)(I - 2P)."""
    _, _, p = mixing_matrices(cs)
    eye = np.eye(p.shape[0])
    return (eye - p - curvature) @ (eye - 2.0 * p)


def unit_eigenspace(cs: ComponentStructure, curvature: np.ndarray):
    """Dimension and orthonormal basis of ker(P + Q), the eigenspace on
    which the driver recursion is neutral."""
    _, _, p = mixing_matrices(cs)
    w, v = sym_eig(p + curvature)
    cut = RANK_RTOL * np.max(np.abs(w), initial=0.0)
    sel = w <= cut
    return int(np.count_nonzero(sel)), v[:, sel]


def _alpha_value(cs: ComponentStructure, curvature: np.ndarray) -> float:
    _, _, p = mixing_matrices(cs)
    pq = p + curvature
    proj = colspace_projector(pq)
    return sprad((proj - pq) @ (np.eye(p.shape[0]) - 2.0 * p))


def convergence_rate(cs: ComponentStructure, curvature: np.ndarray,
                     rho: float | None = None) -> RateReport:
    """Exact asymptotic contraction factor, with a built-in cross-check.

    The projector form is the authoritative value; it must agree with the
    unit-eigenvalue-filtered spectral radius of the transition matrix, and
    the number of near-unit eigenvalues must match dim ker(P+Q).

    Raises
    ------
    InconsistentRateError
        If the two computations disagree or the unit-eigenvalue count is
        off, which would indicate a broken input.
    """
    alpha = _alpha_value(cs, curvature)
    r = iteration_matrix(cs, curvature)
    spectrum = real_eig(r)
    kernel_dim, _ = unit_eigenspace(cs, curvature)

    near_unit = np.abs(spectrum - 1.0) < UNIT_EIG_TOL
    if int(np.count_nonzero(near_unit)) != kernel_dim:
        raise InconsistentRateError(
            f"{int(np.count_nonzero(near_unit))} near-unit eigenvalues but "
            f"ker(P+Q) has dimension {kernel_dim}"
        )
    rest = np.abs(spectrum[~near_unit])
    alpha_filtered = float(rest.max()) if rest.size else 0.0
    if abs(alpha - alpha_filtered) > CROSS_CHECK_TOL:
        raise InconsistentRateError(
            f"projector rate {alpha:.12g} and filtered spectral radius "
            f"{alpha_filtered:.12g} disagree"
        )

    mu, vecs = np.linalg.eig(r)
    tight = _tight_from_eig(cs, curvature, alpha, mu, vecs)
    return RateReport(
        alpha=float(alpha),
        rho=rho,
        curvature=curvature,
        transition=r,
        spectrum=spectrum,
        kernel_dim=kernel_dim,
        tight=tight,
    )


def _tight_from_eig(cs, curvature, alpha, mu, vecs) -> bool:
    size = curvature.shape[0]
    if np.linalg.norm(curvature) <= 1e-14 * size:
        # no objective curvature: the analysis degenerates, nothing to certify
        return False
    sel = np.abs(np.abs(mu) - alpha) <= UNIT_EIG_TOL
    if not np.any(sel):
        return False
    vinv = np.linalg.inv(vecs)
    proj = (vecs[:, sel] @ vinv[sel, :]).real
    m, _, p = mixing_matrices(cs)
    overlap = proj @ (np.eye(size) - 2.0 * p) @ m
    return bool(np.linalg.norm(overlap) > TIGHTNESS_TOL)


def rate_is_tight(cs: ComponentStructure, curvature: np.ndarray,
                  alpha: float | None = None) -> bool:
    """Whether the asymptotic rate is attained for generic initializations.

    True iff the column space of (I - 2P) M is not orthogonal to the
    invariant subspace of the transition matrix for the eigenvalues of
    modulus alpha.
    """
    if alpha is None:
        alpha = _alpha_value(cs, curvature)
    r = iteration_matrix(cs, curvature)
    mu, vecs = np.linalg.eig(r)
    return _tight_from_eig(cs, curvature, alpha, mu, vecs)


def _phi_and_linear(instance: ProblemInstance, x_star, hessians):
    """Stacked curvature blocks and the linear coefficient of the gradient
    model grad f(x) = Phi x + c at the replicated minimizer."""
    terms = instance.quadratic_terms()
    if terms is not None:
        phi = block_diag([t[0] for t in terms])
        c = np.concatenate([t[1] for t in terms])
        return phi, c
    phi = block_diag(hessians)
    grads = np.concatenate([f.gradient(x_star) for f in instance.oracles])
    replicated = np.tile(np.asarray(x_star, dtype=float), instance.n_agents)
    return phi, grads - phi @ replicated


def affine_offset(cs: ComponentStructure, instance: ProblemInstance, rho: float,
                  minimizer=None) -> np.ndarray:
    """Constant term d = -rho M H^-1 c of the driver recursion."""
    x_star, hessians = minimizer if minimizer is not None else solve_consensus_minimizer(instance)
    phi, c = _phi_and_linear(instance, x_star, hessians)
    m, _, _ = mixing_matrices(cs)
    h = phi + rho * (m.T @ m)
    return -rho * (m @ np.linalg.solve(h, c))


def fixed_point(cs: ComponentStructure, curvature: np.ndarray,
                instance: ProblemInstance, rho: float, minimizer=None) -> np.ndarray:
    """A fixed point of the driver recursion zeta -> R zeta + d.

    Computed as rho (I - 2P) pinv(P - Q) M H^-1 c. The residual against the
    recursion and the reconstruction of the replicated minimizer are both
    verified before returning.
    """
    x_star, hessians = minimizer if minimizer is not None else solve_consensus_minimizer(instance)
    phi, c = _phi_and_linear(instance, x_star, hessians)
    m, _, p = mixing_matrices(cs)
    eye = np.eye(p.shape[0])
    h = phi + rho * (m.T @ m)
    mhc = m @ np.linalg.solve(h, c)
    zeta = rho * ((eye - 2.0 * p) @ (pinv(p - curvature) @ mhc))

    r = iteration_matrix(cs, curvature)
    residual = float(np.linalg.norm(zeta - r @ zeta + rho * mhc))
    if residual > 1e-8 * (1.0 + float(np.linalg.norm(zeta))):
        raise InconsistentRateError(f"fixed-point residual {residual:g} too large")

    reconstructed = -np.linalg.solve(h, m.T @ ((eye - 2.0 * p) @ zeta) + c)
    target = np.tile(np.asarray(x_star, dtype=float), instance.n_agents)
    gap = float(np.linalg.norm(reconstructed - target))
    if gap > 1e-8 * (1.0 + float(np.linalg.norm(target))):
        raise InconsistentRateError(
            f"fixed point reconstructs the minimizer only to {gap:g}"
        )
    return zeta


def primal_from_driver(cs: ComponentStructure, instance: ProblemInstance,
                       rho: float, zeta: np.ndarray, minimizer=None) -> np.ndarray:
    """Stacked estimates induced by a driver vector: -H^-1 (M'(I-2P) zeta + c)."""
    x_star, hessians = minimizer if minimizer is not None else solve_consensus_minimizer(instance)
    phi, c = _phi_and_linear(instance, x_star, hessians)
    m, _, p = mixing_matrices(cs)
    h = phi + rho * (m.T @ m)
    eye = np.eye(p.shape[0])
    return -np.linalg.solve(h, m.T @ ((eye - 2.0 * p) @ zeta) + c)


def rate_report(cs: ComponentStructure, instance: ProblemInstance, rho: float,
                with_fixed_point: bool = True) -> RateReport:
    """Full pipeline: minimizer, curvatures, rate, and (optionally) the
    driver fixed point."""
    minimizer = solve_consensus_minimizer(instance)
    q = curvature_matrix(cs, minimizer[1], rho)
    report = convergence_rate(cs, q, rho=rho)
    if with_fixed_point:
        report.zeta_star = fixed_point(cs, q, instance, rho, minimizer=minimizer)
    return report


def centralized_rate(rho: float, sigma2: float) -> float:
    """Single-cluster rate with equal curvatures: max(rho, s2) / (rho + s2).

    Minimized at rho = sigma2 where it equals one half.
    """
    if rho <= 0.0 or sigma2 <= 0.0:
        raise ValueError("rho and sigma2 must be positive")
    return max(rho, sigma2) / (rho + sigma2)


def _stable_quadratic_roots(s: float, d: float) -> tuple[complex, complex]:
    """Roots of x^2 - s x + d with s >= 0, avoiding cancellation."""
    disc = s * s - 4.0 * d
    if disc >= 0.0:
        big = 0.5 * (s + math.sqrt(disc))
        if big == 0.0:
            return (0.0 + 0.0j, 0.0 + 0.0j)
        return (complex(big), complex(d / big))
    half = 0.5 * math.sqrt(-disc)
    return (complex(0.5 * s, half), complex(0.5 * s, -half))


def ring_rate(rho: float, sigma2: float, n_agents: int) -> RingRateBreakdown:
    """Ring-network rate with equal curvatures.

    The authoritative value comes from the 2x2 circulant symbols: for each
    k the roots of x^2 - s_k x + d_k with

        s_k = (sigma2 + 2 rho (1 + cos(2 pi k / N))) / (sigma2 + 2 rho)
        d_k = rho (1 + cos(2 pi k / N)) / (sigma2 + 2 rho)

    form the transition spectrum; alpha is the largest modulus after
    removing the single unit root contributed by k = 0.

    The piecewise closed form switches between the k = 1 branch (real
    roots below rho = sigma2 / (2 sin(2 pi / N)), complex above) and the
    wrap-around k = 0 branch 2 rho / (sigma2 + 2 rho); the two cross at
    rho = sigma2 / (2 tan(pi / N)^2). For N = 3 the crossing happens while
    the k = 1 roots are still real and the three-piece form breaks down,
    so no closed-form value is reported there.
    """
    if n_agents < 3:
        raise ValueError("ring needs at least three agents")
    if rho <= 0.0 or sigma2 <= 0.0:
        raise ValueError("rho and sigma2 must be positive")
    denom = sigma2 + 2.0 * rho
    per_k = []
    for k in range(n_agents):
        bump = 1.0 + math.cos(2.0 * math.pi * k / n_agents)
        s = (sigma2 + 2.0 * rho * bump) / denom
        d = rho * bump / denom
        if k == 0:
            # known factorization: product d, sum 1 + d
            roots = (complex(1.0), complex(2.0 * rho / denom))
        else:
            roots = _stable_quadratic_roots(s, d)
        per_k.append(SymbolRoots(k=k, trace=s, determinant=d, roots=roots))

    moduli = [abs(r) for entry in per_k for r in entry.roots]
    moduli.remove(abs(per_k[0].roots[0]))  # the unit root
    alpha = max(moduli)

    regime, closed = _ring_piecewise(rho, sigma2, n_agents)
    return RingRateBreakdown(
        regime=regime,
        alpha=float(alpha),
        per_k=tuple(per_k),
        closed_form=closed,
        rho=float(rho),
        sigma2=float(sigma2),
        n_agents=n_agents,
    )


def _ring_piecewise(rho: float, sigma2: float, n_agents: int):
    if n_agents == 3:
        return "fallback", None
    c1 = math.cos(2.0 * math.pi / n_agents)
    s1 = math.sin(2.0 * math.pi / n_agents)
    denom = sigma2 + 2.0 * rho
    if rho <= sigma2 / (2.0 * s1):
        value = (
            sigma2
            + 2.0 * rho * (1.0 + c1)
            + math.sqrt(max(sigma2 * sigma2 - 4.0 * rho * rho * s1 * s1, 0.0))
        ) / (2.0 * denom)
        return "low", value
    tan_half = math.tan(math.pi / n_agents)
    if rho <= sigma2 / (2.0 * tan_half * tan_half):
        return "mid", math.sqrt(rho * (1.0 + c1) / denom)
    return "high", 2.0 * rho / denom


def ring_optimal_rho(sigma2: float, n_agents: int) -> float:
    """Penalty value minimizing the ring rate: sigma2 / (2 sin(2 pi / N))."""
    return sigma2 / (2.0 * math.sin(2.0 * math.pi / n_agents))


def ring_optimal_rate(n_agents: int) -> float:
    """Minimum ring rate: sqrt((1 + cos(2 pi/N)) / (1 + sin(2 pi/N))) / sqrt(2)."""
    c1 = math.cos(2.0 * math.pi / n_agents)
    s1 = math.sin(2.0 * math.pi / n_agents)
    return math.sqrt((1.0 + c1) / (1.0 + s1)) / math.sqrt(2.0)


def optimize_rho(cs: ComponentStructure, hessians, rho_range) -> tuple[float, float]:
    """Minimize the rate over the penalty parameter.

    A 64-point log-spaced scan localizes the basin (the rate need not be
    unimodal in general), then golden-section search refines to a relative
    width of 1e-6. Returns the best (rho, alpha) pair found, with alpha
    recomputed through the cross-checked path at the end.
    """
    lo, hi = float(rho_range[0]), float(rho_range[1])
    if not 0.0 < lo < hi:
        raise ValueError("rho_range must satisfy 0 < lo < hi")

    cache: dict[float, float] = {}

    def f(r: float) -> float:
        if r not in cache:
            cache[r] = _alpha_value(cs, curvature_matrix(cs, hessians, r))
        return cache[r]

    grid = np.geomspace(lo, hi, 64)
    values = [f(float(r)) for r in grid]
    i = int(np.argmin(values))
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > 1e-6 * 0.5 * (a + b):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)

    rho_star = min(cache, key=cache.get)
    report = convergence_rate(cs, curvature_matrix(cs, hessians, rho_star), rho=rho_star)
    return float(rho_star), report.alpha
