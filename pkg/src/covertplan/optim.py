"""Self-contained solvers for the occupation-measure polytope.

Three pieces, all deterministic and dependency-free beyond numpy:

* a two-phase revised simplex with Bland's anti-cycling rule
  (:func:`lp_solve`), which returns exact basic optimal solutions;
* an exact active-set Euclidean projector onto sets of the form
  ``{x : A x = b, x >= l}`` (:class:`AffinePolytope`,
  :func:`project_to_affine_nonneg`);
* a projected-gradient minimizer with Barzilai-Borwein trial steps and
  monotone Armijo backtracking (:func:`nlp_minimize`), used for the
  nonconvex masking subproblems.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import Infeasible, InfeasibleStart, SolverStall, Unbounded

ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
DEFAULT_MAX_ITERS = 10_000

_RC_TOL = 1e-10     # reduced-cost tolerance (simplex optimality)
_PIV_TOL = 1e-11    # smallest acceptable pivot magnitude
_EQ_TOL = 1e-10     # feasibility tolerance on equality constraints


# ---------------------------------------------------------------------------
# Linear programming
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LpProblem:
    """min objective @ x  s.t.  eq_matrix @ x = eq_rhs, x >= lower_bounds."""

    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    lower_bounds: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        a = np.atleast_2d(np.asarray(self.eq_matrix, dtype=float))
        b = np.asarray(self.eq_rhs, dtype=float).ravel()
        lo = np.asarray(self.lower_bounds, dtype=float).ravel()
        if a.shape != (b.size, c.size) or lo.size != c.size:
            raise ValueError(
                f"inconsistent LP dimensions: A{a.shape}, b({b.size},), "
                f"c({c.size},), l({lo.size},)")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "eq_matrix", a)
        object.__setattr__(self, "eq_rhs", b)
        object.__setattr__(self, "lower_bounds", lo)


def _bland_core(a, b, c, basis, max_iters):
    """Revised simplex iterations on min c@x, a@x=b, x>=0 from a feasible basis.

    Entering variable: lowest index with reduced cost < -tol. Leaving: min
    ratio, ties broken by lowest variable index. Returns (basis, x_basic).
    """
    m, n = a.shape
    basis = list(basis)
    in_basis = np.zeros(n, dtype=bool)
    in_basis[basis] = True
    for _ in range(max_iters):
        bmat = a[:, basis]
        try:
            x_b = np.linalg.solve(bmat, b)
            y = np.linalg.solve(bmat.T, c[basis])
        except np.linalg.LinAlgError as exc:
            raise SolverStall(f"singular simplex basis: {exc}") from exc
        reduced = c - a.T @ y
        candidates = np.nonzero(~in_basis & (reduced < -_RC_TOL))[0]
        if candidates.size == 0:
            return basis, x_b
        enter = int(candidates[0])
        d = np.linalg.solve(bmat, a[:, enter])
        theta = np.inf
        leave_pos = -1
        leave_var = n + 1
        for i in range(m):
            if d[i] > _PIV_TOL:
                ratio = max(x_b[i], 0.0) / d[i]
                if ratio < theta - 1e-12 or (
                    ratio < theta + 1e-12 and basis[i] < leave_var
                ):
                    theta, leave_pos, leave_var = ratio, i, basis[i]
        if leave_pos < 0:
            raise Unbounded("objective decreases without bound")
        in_basis[basis[leave_pos]] = False
        in_basis[enter] = True
        basis[leave_pos] = enter
    raise SolverStall("simplex iteration cap reached")


def lp_solve(problem: LpProblem, max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    """Solve an :class:`LpProblem` to a basic optimal solution.

    Two-phase revised simplex with Bland's rule throughout; redundant
    equality rows surviving in phase one are dropped before phase two.
    Raises :class:`Infeasible` / :class:`Unbounded` / :class:`SolverStall`.
    """
    c = problem.objective
    lo = problem.lower_bounds
    a = problem.eq_matrix.copy()
    b = problem.eq_rhs - a @ lo  # shift to y = x - l >= 0
    m, n = a.shape

    flip = b < 0
    a[flip] *= -1.0
    b = np.where(flip, -b, b)

    # phase one: artificial basis
    a1 = np.hstack([a, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis, x_b = _bland_core(a1, b, c1, list(range(n, n + m)), max_iters)
    if float(c1[basis] @ x_b) > 1e-9:
        raise Infeasible("phase-one optimum is positive: empty feasible set")

    # drive artificials out of the basis; drop rows that prove redundant
    keep_rows = np.ones(m, dtype=bool)
    for pos in range(m):
        if basis[pos] < n:
            continue
        bmat = a1[:, basis]
        drove_out = False
        for j in range(n):
            if j in basis:
                continue
            dj = np.linalg.solve(bmat, a1[:, j])
            if abs(dj[pos]) > 1e-9:
                basis[pos] = j
                drove_out = True
                break
        if not drove_out:
            keep_rows[pos] = False  # redundant constraint

    if not keep_rows.all():
        row_of_pos = np.arange(m)
        rows = row_of_pos[keep_rows]
        a = a[rows]
        b = b[rows]
        basis = [basis[p] for p in range(m) if keep_rows[p]]
        m = a.shape[0]
    basis, x_b = _bland_core(a, b, c, basis, max_iters)

    y = np.zeros(n)
    y[basis] = np.maximum(x_b, 0.0)
    return y + lo


# ---------------------------------------------------------------------------
# Euclidean projection onto {x : A x = b, x >= l}
# ---------------------------------------------------------------------------

class AffinePolytope:
    """Linear equalities plus elementwise lower bounds, with exact projection.

    Matches the LpProblem shape (eq_matrix, eq_rhs, lower_bounds) minus the
    objective. Gram-matrix inverses are cached per active set, and the last
    active set warm-starts the next projection, so repeated projections from
    a projected-gradient loop are cheap.
    """

    def __init__(self, eq_matrix, eq_rhs, lower_bounds):
        self.eq_matrix = np.atleast_2d(np.asarray(eq_matrix, dtype=float))
        self.eq_rhs = np.asarray(eq_rhs, dtype=float).ravel()
        self.lower_bounds = np.asarray(lower_bounds, dtype=float).ravel()
        m, n = self.eq_matrix.shape
        if self.eq_rhs.size != m or self.lower_bounds.size != n:
            raise ValueError("inconsistent polytope dimensions")
        self.n = n
        self._gram_cache: dict[bytes, np.ndarray] = {}
        self._feasible: np.ndarray | None = None

    def residual(self, x) -> float:
        """Max violation of equalities and lower bounds at x."""
        eq = np.abs(self.eq_matrix @ x - self.eq_rhs).max() if self.eq_rhs.size else 0.0
        lb = float(np.maximum(self.lower_bounds - x, 0.0).max()) if self.n else 0.0
        return max(float(eq), lb)

    def _gram_inv(self, free: np.ndarray) -> np.ndarray:
        key = free.tobytes()
        ginv = self._gram_cache.get(key)
        if ginv is None:
            a_f = self.eq_matrix[:, free]
            gram = a_f @ a_f.T
            try:
                ginv = np.linalg.inv(gram)
            except np.linalg.LinAlgError:
                ginv = np.linalg.pinv(gram)
            self._gram_cache[key] = ginv
        return ginv

    def _restricted(self, free: np.ndarray, y: np.ndarray):
        """Projection onto the equalities with the non-free entries clamped."""
        a = self.eq_matrix
        lo = self.lower_bounds
        fixed = ~free
        rhs_eq = self.eq_rhs - a[:, fixed] @ lo[fixed]
        a_f = a[:, free]
        nu = self._gram_inv(free) @ (a_f @ y[free] - rhs_eq)
        x = lo.copy()
        x[free] = y[free] - a_f.T @ nu
        return x, nu

    def feasible_point(self) -> np.ndarray:
        """Some feasible point (a phase-one simplex vertex), cached.

        Raises :class:`Infeasible` when the polytope is empty.
        """
        if self._feasible is None:
            lp = LpProblem(
                objective=np.zeros(self.n),
                eq_matrix=self.eq_matrix,
                eq_rhs=self.eq_rhs,
                lower_bounds=self.lower_bounds,
            )
            self._feasible = lp_solve(lp)
        return self._feasible.copy()

    def project(self, y, start: np.ndarray | None = None) -> np.ndarray:
        """Euclidean projection of y onto the polytope.

        Primal active-set iteration from a feasible point (``start`` if
        supplied, else a cached phase-one vertex): move toward the
        equality-restricted minimizer, clamping at blocking bounds, and
        release clamped coordinates with negative multipliers (lowest index
        first). Finitely terminating; bounds hold exactly and equalities to
        solver precision. Raises :class:`Infeasible` for an empty polytope.
        """
        y = np.asarray(y, dtype=float).ravel()
        if y.size != self.n:
            raise ValueError("projection point has wrong dimension")
        lo = self.lower_bounds
        a = self.eq_matrix
        if start is not None and self.residual(start) < 1e-9:
            x = np.maximum(np.asarray(start, dtype=float).ravel(), lo)
        else:
            x = np.maximum(self.feasible_point(), lo)
        working = x <= lo + 1e-14

        for _ in range(20 * (self.n + 2)):
            x_star, nu = self._restricted(~working, y)
            p = x_star - x
            if float(np.abs(p).max(initial=0.0)) <= 1e-13 * (1.0 + np.abs(x).max()):
                idx = np.nonzero(working)[0]
                if idx.size == 0:
                    return x_star
                lam = lo[idx] - y[idx] + a[:, idx].T @ nu
                neg = np.nonzero(lam < -1e-11)[0]
                if neg.size == 0:
                    out = x_star.copy()
                    out[idx] = lo[idx]
                    return np.maximum(out, lo)
                working[idx[neg[0]]] = False  # lowest index: anti-cycling
                continue
            # longest feasible move toward the restricted minimizer
            shrink = ~working & (p < -1e-15)
            alpha = 1.0
            block = -1
            if shrink.any():
                cand = np.nonzero(shrink)[0]
                ratios = (lo[cand] - x[cand]) / p[cand]
                k = int(np.argmin(ratios))
                if ratios[k] < 1.0:
                    alpha = max(float(ratios[k]), 0.0)
                    block = int(cand[k])
            x = x + alpha * p
            if block >= 0:
                x[block] = lo[block]
                working[block] = True
            else:
                x = x_star
        raise Infeasible("projection active set did not settle")


def project_to_affine_nonneg(x, feasible_set) -> np.ndarray:
    """Project x onto ``{z : A z = b, z >= l}`` given by an
    :class:`AffinePolytope` or anything LpProblem-shaped."""
    if not isinstance(feasible_set, AffinePolytope):
        feasible_set = AffinePolytope(
            feasible_set.eq_matrix, feasible_set.eq_rhs, feasible_set.lower_bounds)
    return feasible_set.project(x)


# ---------------------------------------------------------------------------
# Projected gradient descent
# ---------------------------------------------------------------------------

@dataclass
class NlpProblem:
    """Smooth objective over an :class:`AffinePolytope`.

    ``objective`` maps a point to ``(value, gradient)``. ``x0`` must satisfy
    the constraints (equalities within 1e-8, bounds within 1e-12).
    """

    objective: Callable[[np.ndarray], tuple[float, np.ndarray]]
    feasible_set: AffinePolytope
    x0: np.ndarray
    tol: float = 1e-7
    max_iters: int = DEFAULT_MAX_ITERS


@dataclass
class SolveTrace:
    """Objective history plus the final projected-gradient residual."""

    iterates_objective: list[float] = field(default_factory=list)
    final_kkt_residual: float = float("inf")
    status: str = "IterationCap"  # Converged | IterationCap | LineSearchFail

    def to_dict(self) -> dict:
        return {
            "iterates_objective": [float(v) for v in self.iterates_objective],
            "final_kkt_residual": float(self.final_kkt_residual),
            "status": self.status,
        }


def _gradient_mapping_norm(pset: AffinePolytope, x: np.ndarray, g: np.ndarray) -> float:
    """Scaled projected-gradient residual |P(x - s g) - x| / s.

    The probe step s = 1/(1 + |g|_inf) keeps the projected point at moderate
    magnitude (steep barrier-like gradients would otherwise demand projecting
    points that float64 cannot resolve); by the monotonicity of the gradient
    mapping, the scaled residual upper-bounds the unit-step one, so testing
    it against ``tol`` is conservative.
    """
    s = 1.0 / (1.0 + float(np.abs(g).max(initial=0.0)))
    return float(np.linalg.norm(pset.project(x - s * g, start=x) - x)) / s


def nlp_minimize(problem: NlpProblem) -> tuple[np.ndarray, SolveTrace]:
    """Monotone projected-gradient descent with BB trial steps.

    Stops when the projected-gradient residual drops to ``tol`` (status
    Converged) or no floating-point-representable descent step remains
    (LineSearchFail; the iterate is then stationary to machine precision).
    The returned iterate is always feasible and the recorded objective
    sequence is non-increasing.
    """
    pset = problem.feasible_set
    x = np.asarray(problem.x0, dtype=float).ravel()
    if (pset.residual(x) > 1e-8
            or (x < pset.lower_bounds - 1e-12).any()):
        raise InfeasibleStart(f"x0 violates the feasible set by {pset.residual(x):.3e}")
    x = pset.project(x)

    f, g = problem.objective(x)
    trace = SolveTrace(iterates_objective=[float(f)])
    step = 1.0 / max(1.0, float(np.linalg.norm(g)))
    x_prev = g_prev = None

    for _ in range(problem.max_iters):
        kkt = _gradient_mapping_norm(pset, x, g)
        if kkt <= problem.tol:
            trace.final_kkt_residual = kkt
            trace.status = "Converged"
            return x, trace

        if x_prev is not None:
            sx = x - x_prev
            sg = g - g_prev
            denom = float(sx @ sg)
            step = float(sx @ sx) / denom if denom > 1e-300 else step * 2.0
            step = min(max(step, 1e-12), 1e12)

        # keep the trial point at a magnitude the projection can resolve
        g_inf = float(np.abs(g).max(initial=0.0))
        t_cap = 1e2 * (1.0 + float(np.abs(x).max())) / max(g_inf, 1e-300)
        accepted = False
        t = min(step, t_cap)
        for _ in range(80):
            xt = pset.project(x - t * g, start=x)
            d = xt - x
            gd = float(g @ d)
            if float(np.linalg.norm(d)) <= 1e-16:
                break
            ft, gt = problem.objective(xt)
            if gd < 0.0 and ft <= f + ARMIJO_C * gd:
                accepted = True
                break
            t *= ARMIJO_SHRINK
        if not accepted:
            trace.final_kkt_residual = kkt
            trace.status = "Converged" if kkt <= problem.tol else "LineSearchFail"
            return x, trace

        x_prev, g_prev = x, g
        x, f, g = xt, ft, gt
        trace.iterates_objective.append(float(f))

    trace.final_kkt_residual = _gradient_mapping_norm(pset, x, g)
    if trace.final_kkt_residual <= problem.tol:
        trace.status = "Converged"
    return x, trace


def nlp_minimize_multistart(
    problem: NlpProblem, starts: list[np.ndarray] | None = None,
) -> tuple[np.ndarray, SolveTrace, int]:
    """Run :func:`nlp_minimize` from several starts, keep the best objective.

    ``starts`` defaults to the single ``problem.x0``; callers wanting the
    conventional 8-start sweep pass the starts explicitly. Ties are broken
    by lowest start index so the reduction is order-independent.
    """
    if not starts:
        starts = [problem.x0]
    best = None
    for idx, x0 in enumerate(starts):
        x, tr = nlp_minimize(replace(problem, x0=x0))
        fx = tr.iterates_objective[-1]
        if best is None or fx < best[3] - 1e-15:
            best = (x, tr, idx, fx)
    return best[0], best[1], best[2]
