"""MLE adversary: trajectory sampling, chain estimation, error statistics.

The adversary watches the state-action pairs ``y_k = (x_k, u_k)`` of a plan,
estimates the pair-chain by empirical conditional frequencies (the MLE), and
inverts it back into transition-tensor and policy estimates. ``crb_check``
compares Monte Carlo estimator covariance against the inverse Fisher
information of the true chain.

Randomness is threaded through numpy ``SeedSequence([master_seed, run])``
streams, one per trajectory, so runs are reproducible and order-independent.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, EmptySample, UnvisitedRow
from .fim import AugmentedChain, assemble_fim
from .mdp import MdpModel, Policy, _frozen, occupation_from_policy


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    """A state-action path: y_k = (states[k], actions[k]), k = 0..n_steps."""

    states: np.ndarray
    actions: np.ndarray
    n_steps: int
    seed: int

    def __post_init__(self):
        s = _frozen(self.states, dtype=np.int64)
        a = _frozen(self.actions, dtype=np.int64)
        if s.shape != (self.n_steps + 1,) or a.shape != (self.n_steps + 1,):
            raise DimensionMismatch("states and actions must both have length n_steps+1")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "actions", a)


@dataclass(frozen=True, eq=False)
class AdversaryEstimate:
    """MLE of the pair chain; rows never visited are left all-zero."""

    a_hat: np.ndarray
    visit_counts: np.ndarray
    n_states: int
    n_actions: int
    sample_size: int

    def __post_init__(self):
        object.__setattr__(self, "a_hat", _frozen(self.a_hat))
        object.__setattr__(self, "visit_counts", _frozen(self.visit_counts))

    @property
    def visited_rows(self) -> np.ndarray:
        return self.visit_counts.sum(axis=1) > 0


def _pair_chain_cumrows(model: MdpModel, policy: Policy) -> list[list[float]]:
    """Cumulative rows of the joint (state, action) chain, as python lists so
    the sampling loop can use bisect without per-step numpy overhead."""
    p = model.transition
    mu = policy.mu
    a = np.einsum("iuj,jv->iujv", p, mu)
    s = model.n_states * model.n_actions
    a = a.reshape(s, s)
    return [row.cumsum().tolist() for row in a]


def sample_trajectory(
    model: MdpModel,
    policy: Policy,
    n_steps: int,
    seed: int | tuple[int, ...],
    x0: int = 0,
) -> TrajectorySample:
    """Sample u_k ~ mu(.|x_k), x_{k+1} ~ P(.|x_k, u_k) for n_steps transitions.

    Implemented on the joint state-action chain (one uniform draw per
    transition, plus one for the initial action), which induces exactly the
    same law. Reproducible given the seed.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if not 0 <= x0 < model.n_states:
        raise ValueError("x0 out of range")
    rng = np.random.default_rng(seed)
    nu_actions = model.n_actions
    mu_row = policy.mu[x0].cumsum().tolist()
    draws = rng.random(n_steps + 1).tolist()
    u0 = bisect_right(mu_row, draws[0])
    u0 = min(u0, nu_actions - 1)
    cum = _pair_chain_cumrows(model, policy)
    s_max = len(cum) - 1
    pairs = np.empty(n_steps + 1, dtype=np.int64)
    m = x0 * nu_actions + u0
    pairs[0] = m
    for k in range(1, n_steps + 1):
        m = min(bisect_right(cum[m], draws[k]), s_max)
        pairs[k] = m
    seed_scalar = seed if isinstance(seed, int) else hash(tuple(seed)) & 0x7FFFFFFF
    return TrajectorySample(
        states=pairs // nu_actions,
        actions=pairs % nu_actions,
        n_steps=n_steps,
        seed=seed_scalar,
    )


def mle_estimate(
    sample: TrajectorySample, n_states: int, n_actions: int
) -> AdversaryEstimate:
    """Empirical conditional frequencies of the pair chain (the closed-form
    maximizer of the trajectory log-likelihood)."""
    if sample.n_steps < 1:
        raise EmptySample("need at least one transition")
    s = n_states * n_actions
    pairs = sample.states * n_actions + sample.actions
    counts = np.zeros((s, s))
    np.add.at(counts, (pairs[:-1], pairs[1:]), 1.0)
    row_tot = counts.sum(axis=1)
    a_hat = np.zeros((s, s))
    visited = row_tot > 0
    a_hat[visited] = counts[visited] / row_tot[visited, None]
    return AdversaryEstimate(
        a_hat=a_hat,
        visit_counts=counts,
        n_states=n_states,
        n_actions=n_actions,
        sample_size=sample.n_steps,
    )


def extract_estimates(
    est: AdversaryEstimate, require_all: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Invert the pair-chain estimate into (P_hat, policy_hat).

    ``P_hat[i,u,j] = sum_u' a_hat[(i,u),(j,u')]``; the policy estimate pools
    destination counts over source rows (count-weighted), i.e.
    ``mu_hat(u'|j) = visits to (j,u') / visits to j``. With ``require_all``
    a row without visits raises :class:`UnvisitedRow`; otherwise unvisited
    rows of P_hat (and unentered states of policy_hat) are returned as NaN.
    """
    nx, nu = est.n_states, est.n_actions
    visited = est.visited_rows
    if require_all and not visited.all():
        missing = int(np.nonzero(~visited)[0][0])
        raise UnvisitedRow(
            f"state-action row {missing} = ({missing // nu}, {missing % nu}) unvisited")
    p_hat = est.a_hat.reshape(nx, nu, nx, nu).sum(axis=3)
    p_hat[~visited.reshape(nx, nu)] = np.nan

    dest_counts = est.visit_counts.sum(axis=0).reshape(nx, nu)
    state_tot = dest_counts.sum(axis=1)
    policy_hat = np.full((nx, nu), np.nan)
    entered = state_tot > 0
    if require_all and not entered.all():
        raise UnvisitedRow("a state was never entered; policy row undefined")
    policy_hat[entered] = dest_counts[entered] / state_tot[entered, None]
    return p_hat, policy_hat


class TvError(NamedTuple):
    tv: float
    l1: float


def tv_error(
    p_hat: np.ndarray, p_true: np.ndarray, row_mask: np.ndarray | None = None
) -> TvError:
    """Row-wise total-variation error summed over states and actions.

    ``tv = sum_u sum_i 0.5 sum_j |p_hat - p_true|`` and ``l1 = 2 tv``. A
    boolean ``row_mask`` of shape (n_states, n_actions) restricts the sum to
    visited rows (missing rows carry NaN and must be masked out).
    """
    p_hat = np.asarray(p_hat, dtype=float)
    p_true = np.asarray(p_true, dtype=float)
    if p_hat.shape != p_true.shape:
        raise DimensionMismatch(f"shape {p_hat.shape} != {p_true.shape}")
    diff = np.abs(p_hat - p_true).sum(axis=-1)
    if row_mask is not None:
        diff = diff[np.asarray(row_mask, dtype=bool)]
    if np.isnan(diff).any():
        raise DimensionMismatch("NaN rows present; pass row_mask to exclude them")
    tv = 0.5 * float(diff.sum())
    return TvError(tv=tv, l1=2.0 * tv)


# ---------------------------------------------------------------------------
# Cramer-Rao comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CrbReport:
    """Monte Carlo covariance of the chain MLE against the CRB."""

    n_states: int
    n_actions: int
    n_steps: int
    n_runs: int
    min_eig_scaled_cov_minus_crb: float
    mc_3sigma_bound: float
    variance_ratios: np.ndarray
    max_abs_bias: float
    mean_tv_error: float

    def __post_init__(self):
        object.__setattr__(self, "variance_ratios", _frozen(self.variance_ratios))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_states": self.n_states,
                "n_actions": self.n_actions,
                "n_steps": self.n_steps,
                "n_runs": self.n_runs,
                "min_eig_scaled_cov_minus_crb": self.min_eig_scaled_cov_minus_crb,
                "mc_3sigma_bound": self.mc_3sigma_bound,
                "variance_ratios": self.variance_ratios.tolist(),
                "max_abs_bias": self.max_abs_bias,
                "mean_tv_error": self.mean_tv_error,
            },
            indent=2,
        )


def _batch_pair_paths(
    model: MdpModel, policy: Policy, n_steps: int, seeds: list, x0: int, chunk: int = 20_000
):
    """Yield pair-index paths for many runs, lockstepped for speed.

    Each run consumes its own uniform stream in the same order as
    :func:`sample_trajectory`, so the paths match the one-at-a-time sampler.
    """
    rngs = [np.random.default_rng(s) for s in seeds]
    nu = model.n_actions
    a = np.einsum("iuj,jv->iujv", model.transition, policy.mu)
    s = model.n_states * nu
    cum = a.reshape(s, s).cumsum(axis=1)
    cum[:, -1] = 1.0 + 1e-12
    mu0 = policy.mu[x0].cumsum()
    mu0[-1] = 1.0 + 1e-12

    n_runs = len(seeds)
    first = np.array([rng.random() for rng in rngs])
    state = x0 * nu + np.searchsorted(mu0, first, side="right").clip(max=nu - 1)
    paths = np.empty((n_runs, n_steps + 1), dtype=np.int64)
    paths[:, 0] = state
    done = 0
    while done < n_steps:
        span = min(chunk, n_steps - done)
        u = np.stack([rng.random(span) for rng in rngs], axis=0)
        for k in range(span):
            rows = cum[state]
            state = (rows < u[:, k][:, None]).sum(axis=1).clip(max=s - 1)
            paths[:, done + k + 1] = state
        done += span
    return paths


def crb_check(
    model: MdpModel,
    policy: Policy,
    n_steps: int,
    n_runs: int,
    seed: int = 0,
    x0: int = 0,
) -> CrbReport:
    """Compare scaled MLE covariance with the inverse Fisher information.

    Over ``n_runs`` independent trajectories, forms the empirical covariance
    of the free chain parameters (first S-1 columns per row), scales by the
    number of transitions, and reports the smallest eigenvalue of
    ``N Cov - F^{-1}`` plus per-parameter variance ratios ``N Var / CRB``.
    The 3-sigma bound reflects the sampling noise of the variance estimates.
    Requires a strictly positive policy so the chain FIM exists.
    """
    if not (policy.mu > 0.0).all():
        raise ValueError("crb_check needs a strictly positive policy")
    pi = occupation_from_policy(model, policy)
    a = np.einsum("iuj,jv->iujv", model.transition, policy.mu)
    s = model.n_states * model.n_actions
    chain = AugmentedChain(a.reshape(s, s) / a.reshape(s, s).sum(axis=1, keepdims=True))
    fim = assemble_fim(chain)
    crb = np.linalg.inv(fim) if fim.size else np.zeros((0, 0))

    seeds = [np.random.SeedSequence([seed, r]) for r in range(n_runs)]
    paths = _batch_pair_paths(model, policy, n_steps, seeds, x0)
    r = s * (s - 1)
    thetas = np.empty((n_runs, r))
    tv_sum = 0.0
    p_true = model.transition
    for run in range(n_runs):
        pairs = paths[run]
        counts = np.zeros((s, s))
        np.add.at(counts, (pairs[:-1], pairs[1:]), 1.0)
        row_tot = counts.sum(axis=1)
        a_hat = np.zeros((s, s))
        visited = row_tot > 0
        a_hat[visited] = counts[visited] / row_tot[visited, None]
        thetas[run] = a_hat[:, : s - 1].reshape(-1)
        p_hat = a_hat.reshape(model.n_states, model.n_actions, model.n_states,
                              model.n_actions).sum(axis=3)
        mask = visited.reshape(model.n_states, model.n_actions)
        tv_sum += tv_error(p_hat[mask], p_true[mask]).tv

    theta_true = chain.a[:, : s - 1].reshape(-1)
    bias = thetas.mean(axis=0) - theta_true
    cov_scaled = n_steps * np.cov(thetas, rowvar=False, ddof=1).reshape(r, r)
    gap = cov_scaled - crb
    min_eig = float(np.linalg.eigvalsh(0.5 * (gap + gap.T)).min()) if r else 0.0
    crb_diag = np.diag(crb) if r else np.zeros(0)
    var_ratio = np.diag(cov_scaled) / crb_diag if r else np.zeros(0)
    bound = 3.0 * float(crb_diag.max(initial=0.0)) * np.sqrt(2.0 / max(n_runs - 1, 1))
    return CrbReport(
        n_states=model.n_states,
        n_actions=model.n_actions,
        n_steps=n_steps,
        n_runs=n_runs,
        min_eig_scaled_cov_minus_crb=min_eig,
        mc_3sigma_bound=float(bound),
        variance_ratios=var_ratio,
        max_abs_bias=float(np.abs(bias).max(initial=0.0)),
        mean_tv_error=tv_sum / n_runs,
    )
