"""Fisher information of the state-action chain an adversary observes.

A stationary plan turns the MDP into a Markov chain over state-action pairs
(index convention ``m = i * n_actions + u``):

    A[(i,u), (j,u')] = mu(u'|j) P_ij(u),   mu(u'|j) = pi(j,u') / sum_u pi(j,u).

Treating the first S-1 entries of each row of A as free parameters (the last
column is dependent), the per-row Fisher information block is

    F_m = a_m * (diag(1/a_mn) + (1/a_mS) 11^T),   n = 1..S-1,

with ``a`` the stationary distribution of A. Two determinant trackers are
kept side by side: ``log_det_fim_paper`` evaluates the closed form

    |U|^2 |X| sum_i log(sum_u pi(i,u)) - |U| sum_{i,j,u} log P_ij(u)

used by the masking optimizers, and ``log_det_fim_oracle`` takes the log
determinant of the assembled block matrix (the two differ by a factor of
``prod_m a_m``; each is verified against its own definition). A
finite-difference Hessian of the expected per-step log-likelihood provides
an independent check of the assembled matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveEntry, NotIrreducible, StepTooLarge, ZeroStateMass
from .mdp import MdpModel, OccupationMeasure, _frozen

LOG_FLOOR = 1e-300
ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AugmentedChain:
    """Row-stochastic matrix over state-action pairs, m = i * n_actions + u."""

    a: np.ndarray

    def __post_init__(self):
        a = _frozen(self.a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("augmented chain must be square")
        if (a < 0.0).any():
            raise ValueError("augmented chain entries must be nonnegative")
        if np.abs(a.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ValueError("augmented chain rows must sum to 1 within 1e-12")
        object.__setattr__(self, "a", a)

    @property
    def size(self) -> int:
        return self.a.shape[0]


def augment(model: MdpModel, pi: OccupationMeasure) -> AugmentedChain:
    """Build the state-action chain A[(i,u),(j,u')] = mu(u'|j) P_ij(u)."""
    marginals = pi.state_marginals
    if (marginals <= 0.0).any():
        raise ZeroStateMass("occupation measure has a zero state marginal")
    mu = pi.pi / marginals[:, None]
    a = np.einsum("iuj,jv->iujv", model.transition, mu)
    s = model.n_states * model.n_actions
    a = a.reshape(s, s)
    return AugmentedChain(a / a.sum(axis=1, keepdims=True))


def stationary_distribution(chain: AugmentedChain) -> np.ndarray:
    """Unique stationary vector of a strictly positive chain.

    Solves (A^T - I) a = 0 with the normalization sum(a) = 1 substituted for
    the first equation. Raises :class:`NotIrreducible` when positivity (the
    runtime-checkable sufficient condition) fails.
    """
    a = chain.a
    if (a <= 0.0).any():
        raise NotIrreducible("chain has non-positive entries")
    s = chain.size
    sys_a = a.T - np.eye(s)
    sys_a[0, :] = 1.0
    rhs = np.zeros(s)
    rhs[0] = 1.0
    try:
        stat = np.linalg.solve(sys_a, rhs)
    except np.linalg.LinAlgError as exc:
        raise NotIrreducible(f"stationary system is singular: {exc}") from exc
    if (stat <= 0.0).any():
        raise NotIrreducible("stationary solve produced non-positive mass")
    return stat / stat.sum()


def _checked_log(values: np.ndarray, what: str) -> np.ndarray:
    if (values <= LOG_FLOOR).any():
        raise NonPositiveEntry(f"{what} contains entries at or below 1e-300")
    return np.log(values)


def log_det_fim_paper(pi: OccupationMeasure, model: MdpModel) -> float:
    """Closed-form log-determinant tracker (marginal term minus transition
    term); the quantity the masking optimizers regularize."""
    return _paper_terms(pi, model)[0]


def _paper_terms(pi: OccupationMeasure, model: MdpModel) -> tuple[float, float, float]:
    nx, nu = model.n_states, model.n_actions
    marginal = nx * nu**2 * float(_checked_log(pi.state_marginals, "state marginals").sum())
    transition = nu * float(_checked_log(model.transition, "transition tensor").sum())
    return marginal - transition, marginal, transition


def assemble_fim(chain: AugmentedChain) -> np.ndarray:
    """Block-diagonal FIM, one (S-1)x(S-1) block per row of the chain.

    Parameter ordering is alpha = m * (S-1) + n for row m and free column
    n < S-1; the dependent column is the last one of each row.
    """
    a = chain.a
    if (a <= LOG_FLOOR).any():
        raise NonPositiveEntry("chain entries at or below 1e-300")
    s = chain.size
    if s == 1:
        return np.zeros((0, 0))
    stat = stationary_distribution(chain)
    blocks = np.zeros((s * (s - 1), s * (s - 1)))
    for m in range(s):
        block = np.diag(1.0 / a[m, : s - 1]) + 1.0 / a[m, s - 1]
        blocks[m * (s - 1): (m + 1) * (s - 1), m * (s - 1): (m + 1) * (s - 1)] = (
            stat[m] * block
        )
    return blocks


def log_det_fim_oracle(chain: AugmentedChain) -> float:
    """log det of the assembled FIM: sum_m [(S-1) log a_m - sum_n log a_mn].

    Each (S-1)x(S-1) block is diagonal plus rank one, so its determinant is
    ``a_m^(S-1) / prod_n a_mn`` by the matrix determinant lemma; evaluating
    the blocks in log space stays finite for chains with entries many orders
    of magnitude apart, where a direct ``slogdet`` of the assembled matrix
    would be swamped by the rank-one term. The tests compare this value
    against ``slogdet`` of :func:`assemble_fim` blocks and against the
    finite-difference Hessian on well-conditioned chains.
    """
    a = chain.a
    if (a <= LOG_FLOOR).any():
        raise NonPositiveEntry("chain entries at or below 1e-300")
    s = chain.size
    if s == 1:
        return 0.0
    stat = stationary_distribution(chain)
    return float((s - 1) * np.log(stat).sum() - np.log(a).sum())


def fim_finite_difference_oracle(chain: AugmentedChain, h: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of the expected per-step log-likelihood.

    The expectation weights (stationary distribution and true transition
    probabilities) are held at the evaluation point; only the parameters
    inside the logarithms move. Requires ``h`` in [1e-6, 1e-3] and every
    chain entry at least ``10 h`` so perturbed rows stay positive.
    """
    if not 1e-6 <= h <= 1e-3:
        raise StepTooLarge(f"h={h} outside [1e-6, 1e-3]")
    a = chain.a
    if (a < 10.0 * h).any():
        raise StepTooLarge("chain entries below 10*h; decrease h")
    s = chain.size
    if s == 1:
        return np.zeros((0, 0))
    stat = stationary_distribution(chain)
    weights = stat[:, None] * a  # true joint law of (y_k, y_{k+1})
    theta0 = a[:, : s - 1].copy()

    def ell(theta: np.ndarray) -> float:
        rows = np.concatenate([theta, 1.0 - theta.sum(axis=1, keepdims=True)], axis=1)
        return float(np.sum(weights * np.log(rows)))

    r = s * (s - 1)
    hess = np.zeros((r, r))
    f0 = ell(theta0)

    def bump(alpha: int, amount: float) -> np.ndarray:
        t = theta0.copy()
        t[alpha // (s - 1), alpha % (s - 1)] += amount
        return t

    for al in range(r):
        hess[al, al] = (ell(bump(al, h)) - 2.0 * f0 + ell(bump(al, -h))) / h**2
        for be in range(al + 1, r):
            tpp = bump(al, h)
            tpp[be // (s - 1), be % (s - 1)] += h
            tpm = bump(al, h)
            tpm[be // (s - 1), be % (s - 1)] -= h
            tmp = bump(al, -h)
            tmp[be // (s - 1), be % (s - 1)] += h
            tmm = bump(al, -h)
            tmm[be // (s - 1), be % (s - 1)] -= h
            val = (ell(tpp) - ell(tpm) - ell(tmp) + ell(tmm)) / (4.0 * h**2)
            hess[al, be] = hess[be, al] = val
    return -hess


@dataclass(frozen=True, eq=False)
class FisherReport:
    """Both determinant trackers plus their decomposition terms."""

    log_det_paper: float
    log_det_oracle: float
    stationary: np.ndarray
    marginal_term: float
    transition_term: float

    def __post_init__(self):
        object.__setattr__(self, "stationary", _frozen(self.stationary))

    def to_json(self) -> str:
        return json.dumps(
            {
                "log_det_paper": self.log_det_paper,
                "log_det_oracle": self.log_det_oracle,
                "stationary": self.stationary.tolist(),
                "marginal_term": self.marginal_term,
                "transition_term": self.transition_term,
            },
            indent=2,
        )


def fisher_report(pi: OccupationMeasure, model: MdpModel) -> FisherReport:
    """Evaluate both log-determinant routes for a strictly interior plan."""
    paper, marginal, transition = _paper_terms(pi, model)
    chain = augment(model, pi)
    return FisherReport(
        log_det_paper=paper,
        log_det_oracle=log_det_fim_oracle(chain),
        stationary=stationary_distribution(chain),
        marginal_term=marginal,
        transition_term=transition,
    )
