"""Per-agent convex objective oracles: values, derivatives, proximal maps.

Two oracle families are supported. ``Quadratic`` holds a K-dimensional
quadratic with a symmetric PSD curvature matrix and has a closed-form
proximal map. ``ScalarSmooth`` wraps arbitrary twice-differentiable convex
scalar functions (K = 1); its proximal map runs a bracketed Newton solve
on the optimality equation. ``Exponential`` and ``ScaledSquare`` are the
built-in scalar families used by the stock experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolatedError, NoConvergenceError, NonConvexError

# required bound on |t f'(w) + w - v| at the returned prox point
PROX_RESIDUAL_TOL = 1e-12
# aggregate-minimizer stopping: target on ||sum of gradients||, and the
# looser bound still accepted when floating point stalls the Newton steps
MINIMIZER_TOL = 1e-12
MINIMIZER_TOL_FLOOR = 1e-10


class Quadratic:
    """0.5 x'Ax + c'x + d with a symmetric PSD curvature block A."""

    kind = "quadratic"

    def __init__(self, phi, c=None, d: float = 0.0):
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        if phi.shape[0] != phi.shape[1]:
            raise ValueError("curvature matrix must be square")
        if not np.allclose(phi, phi.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(phi).max())):
            raise ValueError("curvature matrix must be symmetric")
        w = np.linalg.eigvalsh(0.5 * (phi + phi.T))
        if w.min() < -1e-10 * max(1.0, w.max(initial=0.0)):
            raise ValueError("curvature matrix must be positive semidefinite")
        self.phi = 0.5 * (phi + phi.T)
        self.c = np.zeros(phi.shape[0]) if c is None else np.asarray(c, dtype=float)
        if self.c.shape != (phi.shape[0],):
            raise ValueError("linear term has wrong length")
        self.d = float(d)

    @property
    def dim(self) -> int:
        return self.phi.shape[0]

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.phi @ x + self.c @ x + self.d)

    def gradient(self, x) -> np.ndarray:
        return self.phi @ np.asarray(x, dtype=float) + self.c

    def hessian(self, x) -> np.ndarray:
        return self.phi

    def prox(self, t: float, v) -> np.ndarray:
        """argmin_w t f(w) + 0.5 ||w - v||^2, solved in closed form."""
        if t <= 0.0:
            raise ValueError("prox weight must be positive")
        v = np.asarray(v, dtype=float)
        return np.linalg.solve(t * self.phi + np.eye(self.dim), v - t * self.c)

    def quadratic_terms(self):
        return self.phi, self.c, self.d

    def to_json(self) -> dict:
        return {
            "kind": "quadratic",
            "phi": self.phi.tolist(),
            "c": self.c.tolist(),
            "d": self.d,
        }


class ScalarSmooth:
    """Twice-differentiable convex function of one variable.

    Parameters are plain callables ``fun``, ``deriv``, ``deriv2`` mapping
    float to float. Convexity is enforced at runtime: any queried point
    with a negative second derivative raises :class:`NonConvexError`.
    """

    kind = "scalar"

    def __init__(self, fun, deriv, deriv2):
        self._fun = fun
        self._deriv = deriv
        self._deriv2 = deriv2

    dim = 1

    def value(self, x) -> float:
        return float(self._fun(float(np.asarray(x).reshape(()))))

    def gradient(self, x) -> np.ndarray:
        return np.array([self._deriv(float(np.asarray(x).reshape(())))])

    def hessian(self, x) -> np.ndarray:
        h = self._deriv2(float(np.asarray(x).reshape(())))
        if h < 0.0:
            raise NonConvexError(f"second derivative {h:g} < 0 at x={x}")
        return np.array([[h]])

    def prox(self, t: float, v) -> np.ndarray:
        if t <= 0.0:
            raise ValueError("prox weight must be positive")
        v = float(np.asarray(v).reshape(()))
        return np.array([_scalar_prox(self._deriv, self._deriv2, t, v)])

    def quadratic_terms(self):
        return None

    def to_json(self) -> dict:
        raise TypeError("generic scalar oracles are not serializable")


class Exponential(ScalarSmooth):
    """f(x) = exp(beta x)."""

    kind = "exponential"

    def __init__(self, beta: float):
        self.beta = float(beta)
        b = self.beta
        super().__init__(
            lambda x: math.exp(b * x),
            lambda x: b * math.exp(b * x),
            lambda x: b * b * math.exp(b * x),
        )

    def to_json(self) -> dict:
        return {"kind": "exponential", "beta": self.beta}


class ScaledSquare(ScalarSmooth):
    """f(x) = a (x - b)^2 with a >= 0."""

    kind = "scaled_square"

    def __init__(self, a: float, b: float):
        if a < 0.0:
            raise ValueError("scale must be nonnegative")
        self.a = float(a)
        self.b = float(b)
        aa, bb = self.a, self.b
        super().__init__(
            lambda x: aa * (x - bb) ** 2,
            lambda x: 2.0 * aa * (x - bb),
            lambda x: 2.0 * aa,
        )

    def prox(self, t: float, v) -> np.ndarray:
        if t <= 0.0:
            raise ValueError("prox weight must be positive")
        v = float(np.asarray(v).reshape(()))
        return np.array([(v + 2.0 * t * self.a * self.b) / (1.0 + 2.0 * t * self.a)])

    def quadratic_terms(self):
        return (
            np.array([[2.0 * self.a]]),
            np.array([-2.0 * self.a * self.b]),
            self.a * self.b**2,
        )

    def to_json(self) -> dict:
        return {"kind": "scaled_square", "a": self.a, "b": self.b}


def prox(oracle, t: float, v) -> np.ndarray:
    """Proximal map of ``oracle`` with weight ``t`` at point ``v``."""
    return oracle.prox(t, v)


def _scalar_prox(deriv, deriv2, t: float, v: float) -> float:
    """Root of g(w) = t f'(w) + w - v by bracketed Newton.

    g is strictly increasing (g' = t f'' + 1 >= 1), so the root is unique.
    A sign-change bracket is grown geometrically from v, Newton steps that
    leave the bracket fall back to bisection, and iteration continues until
    the bracket collapses at floating-point resolution.
    """

    def probe(w):
        """Residual and slope of g at w, enforcing convexity pointwise."""
        h = deriv2(w)
        if h < 0.0:
            raise NonConvexError(f"second derivative {h:g} < 0 at w={w:g}")
        r = t * deriv(w) + w - v
        if math.isnan(r):
            raise NoConvergenceError(f"objective derivative is NaN at w={w:g}")
        return r, t * h + 1.0

    r0, _ = probe(v)
    if r0 == 0.0:
        return v

    # grow a bracket on the side of the root
    step = 1.0
    if r0 > 0.0:
        hi, lo = v, v - step
        for _ in range(120):
            if probe(lo)[0] <= 0.0:
                break
            step *= 2.0
            lo = v - step
        else:
            raise NoConvergenceError("could not bracket the prox root")
    else:
        lo, hi = v, v + step
        for _ in range(120):
            if probe(hi)[0] >= 0.0:
                break
            step *= 2.0
            hi = v + step
        else:
            raise NoConvergenceError("could not bracket the prox root")

    w = 0.5 * (lo + hi)
    best_w, best_r = w, math.inf
    for _ in range(200):
        r, slope = probe(w)
        if abs(r) < best_r:
            best_w, best_r = w, abs(r)
        if r == 0.0:
            break
        if r > 0.0:
            hi = w
        else:
            lo = w
        w_next = w - r / slope
        if not lo < w_next < hi:
            w_next = 0.5 * (lo + hi)
        if w_next == w:
            break
        w = w_next
    if best_r > PROX_RESIDUAL_TOL * max(1.0, abs(v)):
        raise NoConvergenceError(
            f"prox solve stalled with residual {best_r:g} (weight {t:g}, anchor {v:g})"
        )
    return best_w


@dataclass(frozen=True)
class ProblemInstance:
    """A list of per-agent oracles sharing one parameter dimension."""

    oracles: tuple
    dim: int

    def __post_init__(self):
        if not self.oracles:
            raise ValueError("need at least one oracle")
        for f in self.oracles:
            if f.dim != self.dim:
                raise ValueError("all oracles must share the instance dimension")

    @property
    def n_agents(self) -> int:
        return len(self.oracles)

    def quadratic_terms(self):
        """Per-agent (curvature, linear, offset) triples, or None if any
        oracle is not an explicit quadratic."""
        terms = [f.quadratic_terms() for f in self.oracles]
        if any(t is None for t in terms):
            return None
        return terms


def make_instance(oracles) -> ProblemInstance:
    oracles = tuple(oracles)
    return ProblemInstance(oracles=oracles, dim=oracles[0].dim)


def solve_consensus_minimizer(instance: ProblemInstance, x0=None):
    """Minimize the aggregate objective and collect curvatures at the optimum.

    Runs a damped Newton iteration on the aggregate gradient. Returns the
    minimizer ``x_star`` and the list of per-agent Hessians evaluated there,
    after checking that their sum is positive definite.

    Raises
    ------
    NoConvergenceError
        If the gradient norm cannot be driven to tolerance.
    AssumptionViolatedError
        If the summed Hessian at the minimizer is not positive definite.
    """
    k = instance.dim
    x = np.zeros(k) if x0 is None else np.asarray(x0, dtype=float).copy()

    def grad_norm(pt):
        return float(np.linalg.norm(sum(f.gradient(pt) for f in instance.oracles)))

    for _ in range(200):
        grad = sum(f.gradient(x) for f in instance.oracles)
        ngrad = float(np.linalg.norm(grad))
        if ngrad <= MINIMIZER_TOL:
            break
        hess = sum(f.hessian(x) for f in instance.oracles)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError(f"singular aggregate Hessian: {exc}") from exc
        scale = 1.0
        while scale > 1e-14 and grad_norm(x + scale * step) >= ngrad:
            scale *= 0.5
        if scale <= 1e-14:
            # no decrease possible: accept only at the floating point floor
            if ngrad <= MINIMIZER_TOL_FLOOR:
                break
            raise NoConvergenceError(
                f"damped Newton stalled at gradient norm {ngrad:g}"
            )
        x = x + scale * step
        if np.linalg.norm(x) > 1e12:
            raise NoConvergenceError("aggregate minimization diverged")
    else:
        if grad_norm(x) > MINIMIZER_TOL_FLOOR:
            raise NoConvergenceError("aggregate Newton exhausted its iteration budget")

    hessians = [f.hessian(x) for f in instance.oracles]
    total = np.zeros((k, k))
    for h in hessians:
        total += h
    if np.linalg.eigvalsh(0.5 * (total + total.T)).min() <= 1e-10:
        raise AssumptionViolatedError(
            "summed Hessian at the minimizer is not positive definite"
        )
    return x, hessians


def _box_muller(rng) -> float:
    """One standard normal from two uniforms."""
    u1 = 1.0 - rng.random()
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


# dyadic grid so centered draws sum to zero exactly under any summation order
_CENTER_GRID = 2.0**32


def _centered_uniform(rng, n: int, lo: float, hi: float) -> np.ndarray:
    """Uniform draws on [lo, hi], quantized and recentered so the sample sums
    to exactly 0.0 in floating point."""
    u = lo + (hi - lo) * rng.random(n)
    units = np.rint(u * _CENTER_GRID).astype(np.int64)
    base, rem = divmod(int(units.sum()), n)
    units -= base
    units[: int(rem)] -= 1
    return units / _CENTER_GRID


def sample_experiment_objectives(kind: str, n_agents: int, seed: int) -> ProblemInstance:
    """Draw the stock experiment objectives.

    ``"exponential"`` gives f_n(x) = exp(beta_n x) with beta_n uniform on
    [-10, 10] and recentered to an exactly-zero sum, so the aggregate
    minimizer is x = 0. ``"quadratic"`` gives f_n(x) = a_n (x - b_n)^2 with
    a_n uniform on [1, 100] and b_n Gaussian with mean 5 and variance 100.
    """
    rng = np.random.default_rng(seed)
    if kind == "exponential":
        betas = _centered_uniform(rng, n_agents, -10.0, 10.0)
        return make_instance(Exponential(b) for b in betas)
    if kind == "quadratic":
        oracles = []
        for _ in range(n_agents):
            a = 1.0 + 99.0 * rng.random()
            b = 5.0 + 10.0 * _box_muller(rng)
            oracles.append(ScaledSquare(a, b))
        return make_instance(oracles)
    raise ValueError(f"unknown objective kind {kind!r}")


def oracle_to_json(oracle) -> dict:
    return oracle.to_json()


def oracle_from_json(data: dict):
    kind = data["kind"]
    if kind == "quadratic":
        return Quadratic(data["phi"], data.get("c"), data.get("d", 0.0))
    if kind == "exponential":
        return Exponential(data["beta"])
    if kind == "scaled_square":
        return ScaledSquare(data["a"], data["b"])
    raise ValueError(f"unknown oracle kind {kind!r}")


def instance_to_json(instance: ProblemInstance) -> list:
    return [oracle_to_json(f) for f in instance.oracles]


def instance_from_json(data) -> ProblemInstance:
    return make_instance(oracle_from_json(item) for item in data)
