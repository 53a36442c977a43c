"""Finite average-cost MDPs over occupation measures.

The controller model is a strictly positive transition tensor ``P[i, u, j]``
with nonnegative state-action costs ``c[i, u]``. Planning solves the
occupation-measure linear program

    min sum_iu c(i,u) pi(i,u)
    s.t. pi >= 0,  sum_u pi(j,u) = sum_iu P_ij(u) pi(i,u),  sum pi = 1,

whose optimizer is the long-run joint state-action frequency of an optimal
stationary policy. ``relative_value_iteration`` provides an independent
average-cost oracle used by the tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InfeasibleLp,
    NoConvergence,
    ZeroStateMass,
)
from .errors import Infeasible as _Infeasible
from .optim import LpProblem, lp_solve

ROW_SUM_TOL = 1e-12
FEASIBILITY_TOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MdpModel:
    """States, actions, transition tensor P[i, u, j] and costs c[i, u]."""

    n_states: int
    n_actions: int
    transition: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        p = _frozen(self.transition)
        c = _frozen(self.cost)
        nx, nu = int(self.n_states), int(self.n_actions)
        if nx < 1 or nu < 1:
            raise ValueError("n_states and n_actions must be positive")
        if p.shape != (nx, nu, nx):
            raise DimensionMismatch(f"transition shape {p.shape} != {(nx, nu, nx)}")
        if c.shape != (nx, nu):
            raise DimensionMismatch(f"cost shape {c.shape} != {(nx, nu)}")
        rows = p.sum(axis=2)
        if np.abs(rows - 1.0).max() > ROW_SUM_TOL:
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if not (p > 0.0).all():
            raise ValueError("every transition probability must be strictly positive")
        if not np.isfinite(c).all() or (c < 0.0).any():
            raise ValueError("costs must be finite and nonnegative")
        object.__setattr__(self, "n_states", nx)
        object.__setattr__(self, "n_actions", nu)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "cost", c)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_states": self.n_states,
                "n_actions": self.n_actions,
                "transition": self.transition.tolist(),
                "cost": self.cost.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "MdpModel":
        doc = json.loads(text)
        return cls(
            n_states=doc["n_states"],
            n_actions=doc["n_actions"],
            transition=np.array(doc["transition"], dtype=float),
            cost=np.array(doc["cost"], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    """Joint state-action distribution pi[i, u] satisfying the flow constraints
    of ``model``."""

    pi: np.ndarray
    model: MdpModel

    def __post_init__(self):
        pi = _frozen(self.pi)
        m = self.model
        if pi.shape != (m.n_states, m.n_actions):
            raise DimensionMismatch(f"pi shape {pi.shape} != {(m.n_states, m.n_actions)}")
        if (pi < -1e-15).any():
            raise ValueError("occupation measure entries must be nonnegative")
        if abs(pi.sum() - 1.0) > FEASIBILITY_TOL:
            raise ValueError("occupation measure must sum to 1 within 1e-9")
        if np.abs(self.flow_residual(pi, m)).max() > FEASIBILITY_TOL:
            raise ValueError("occupation measure violates flow balance beyond 1e-9")
        object.__setattr__(self, "pi", pi)

    @staticmethod
    def flow_residual(pi: np.ndarray, model: MdpModel) -> np.ndarray:
        """Per-state defect sum_u pi(j,u) - sum_iu P_ij(u) pi(i,u)."""
        inflow = np.einsum("iuj,iu->j", model.transition, pi)
        return pi.sum(axis=1) - inflow

    @property
    def state_marginals(self) -> np.ndarray:
        return self.pi.sum(axis=1)


@dataclass(frozen=True, eq=False)
class Policy:
    """Conditional action distribution mu[i, u] per state."""

    mu: np.ndarray

    def __post_init__(self):
        mu = _frozen(self.mu)
        if mu.ndim != 2:
            raise DimensionMismatch("policy must be a states-by-actions matrix")
        if (mu < 0.0).any():
            raise ValueError("policy entries must be nonnegative")
        if np.abs(mu.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ValueError("policy rows must sum to 1 within 1e-12")
        object.__setattr__(self, "mu", mu)


def flow_lp_constraints(transition: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Equality system of the occupation-measure polytope for a transition
    tensor, with the redundant last flow row dropped (the flow rows sum to
    zero, so one is implied by the others plus normalization)."""
    nx, nu, _ = transition.shape
    n = nx * nu
    rows = np.zeros((nx, n))
    for j in range(nx):
        coeff = -transition[:, :, j].copy()
        coeff[j, :] += 1.0
        rows[j] = coeff.reshape(n)
    a = np.vstack([rows[: nx - 1], np.ones((1, n))])
    b = np.concatenate([np.zeros(nx - 1), [1.0]])
    return a, b


def solve_average_cost_lp(model: MdpModel) -> OccupationMeasure:
    """Minimize the long-run average cost over the occupation polytope.

    Returns a basic optimal solution; for strictly positive models the
    extracted policy is deterministic. Raises :class:`InfeasibleLp` if the
    solver reports infeasibility (impossible for a valid model).
    """
    a, b = flow_lp_constraints(model.transition)
    problem = LpProblem(
        objective=model.cost.reshape(-1),
        eq_matrix=a,
        eq_rhs=b,
        lower_bounds=np.zeros(model.n_states * model.n_actions),
    )
    try:
        x = lp_solve(problem)
    except _Infeasible as exc:
        raise InfeasibleLp(f"occupation LP reported infeasible: {exc}") from exc
    return OccupationMeasure(x.reshape(model.n_states, model.n_actions), model)


def average_cost(pi: OccupationMeasure, model: MdpModel) -> float:
    """sum_iu c(i,u) pi(i,u)."""
    if pi.pi.shape != model.cost.shape:
        raise DimensionMismatch(
            f"pi shape {pi.pi.shape} incompatible with cost {model.cost.shape}")
    return float(np.sum(model.cost * pi.pi))


def extract_policy(pi: OccupationMeasure) -> Policy:
    """mu(u|i) = pi(i,u) / sum_u pi(i,u)."""
    marginals = pi.state_marginals
    if (marginals <= 0.0).any():
        raise ZeroStateMass("a state marginal is zero; cannot condition on it")
    return Policy(pi.pi / marginals[:, None])


def occupation_from_policy(model: MdpModel, policy: Policy) -> OccupationMeasure:
    """Long-run state-action frequency induced by a stationary policy.

    Solves the stationary equations of the policy's state chain directly; the
    chain is irreducible because the model is strictly positive.
    """
    if policy.mu.shape != (model.n_states, model.n_actions):
        raise DimensionMismatch("policy shape does not match the model")
    p_mu = np.einsum("iu,iuj->ij", policy.mu, model.transition)
    nx = model.n_states
    sys_a = p_mu.T - np.eye(nx)
    sys_a[0, :] = 1.0
    rhs = np.zeros(nx)
    rhs[0] = 1.0
    nu_state = np.linalg.solve(sys_a, rhs)
    pi = nu_state[:, None] * policy.mu
    return OccupationMeasure(pi, model)


def relative_value_iteration(
    model: MdpModel, tol: float = 1e-10, max_iters: int = 500_000
) -> float:
    """Optimal average cost via relative value iteration (test oracle).

    Iterates ``h <- T h - (T h)[0]`` with the Bellman operator
    ``(T h)(i) = min_u [c(i,u) + sum_j P_ij(u) h(j)]`` until the span of
    ``T h - h`` drops below ``tol``; the average cost is the midpoint of the
    span bounds. Converges for strictly positive (hence aperiodic unichain)
    models; raises :class:`NoConvergence` at the iteration cap.
    """
    h = np.zeros(model.n_states)
    for _ in range(max_iters):
        q = model.cost + np.einsum("iuj,j->iu", model.transition, h)
        th = q.min(axis=1)
        diff = th - h
        span = float(diff.max() - diff.min())
        if span <= tol:
            return float(0.5 * (diff.max() + diff.min()))
        h = th - th[0]
    raise NoConvergence(f"value iteration span did not reach {tol}")
