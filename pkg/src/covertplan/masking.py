"""Masked sensing plans: trade operation cost against adversary information.

Each masker starts from the unmasked LP plan ``pi0`` and minimizes a squared
total-cost perturbation plus a regularizer over the occupation polytope:

* ``mask_total_cost``      - gamma * sum_i log(sum_u pi(i,u));
* ``mask_state_action_cost`` - block coordinate descent alternating a
  closed-form regularized least-squares step in the costs with an occupation
  step (both cost and plan are perturbed);
* ``mask_transition``      - block coordinate descent alternating a
  transition-tensor step (smoothed L1 pull toward the original tensor minus
  a log term) with an occupation step, flow balance linking the two blocks;
* ``mask_max_entropy``     - the entropy-promoting baseline, with
  gamma * sum pi log pi replacing the information regularizer.

Every masker runs ``monte_carlo_runs`` independent solves from random
interior starts (stream ``[master_seed, run]``), averages the optimized
occupation measures entrywise, renormalizes, and re-projects onto the flow
polytope of whatever transition tensor is in force before extracting the
reported plan. Occupation entries are kept at or above ``EPS_FLOOR`` so the
logarithmic terms stay finite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import BcdNoProgress, CalibrationError, NonPositiveEntry, SolverStall
from .fim import augment, log_det_fim_oracle, log_det_fim_paper
from .mdp import MdpModel, OccupationMeasure, Policy, extract_policy, occupation_from_policy
from .mdp import flow_lp_constraints
from .optim import AffinePolytope, NlpProblem, SolveTrace, nlp_minimize

EPS_FLOOR = 1e-9
L1_SMOOTHING_DELTA = 1e-8
NLP_TOL = 1e-8
DESCENT_SLACK = 1e-10


@dataclass(frozen=True)
class MaskingConfig:
    """Multipliers and Monte Carlo controls shared by all maskers."""

    gamma: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    chi: float = 10.0
    bcd_threshold: float = 1e-8
    bcd_max_rounds: int = 60
    monte_carlo_runs: int = 200
    master_seed: int = 0

    def __post_init__(self):
        for name in ("gamma", "gamma1", "gamma2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")
        if not self.chi > 0:
            raise ValueError("chi must be positive")
        if not self.bcd_threshold > 0:
            raise ValueError("bcd_threshold must be positive")
        if self.bcd_max_rounds < 1 or self.monte_carlo_runs < 1:
            raise ValueError("bcd_max_rounds and monte_carlo_runs must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit nonnegative integer")

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "gamma1": self.gamma1, "gamma2": self.gamma2,
            "chi": self.chi, "bcd_threshold": self.bcd_threshold,
            "bcd_max_rounds": self.bcd_max_rounds,
            "monte_carlo_runs": self.monte_carlo_runs,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MaskingConfig":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__ if k in doc})


@dataclass(frozen=True, eq=False)
class MaskingResult:
    """Masked plan plus the achieved perturbations and both log-det trackers.

    ``total_cost_perturbation`` is the squared-difference objective term at
    the final averaged plan; ``cost_perturbation_pct`` is the relative form
    ``100 |c0.pi - c0.pi0| / (c0.pi0)``. ``trace`` records run 0 (solve trace
    for single-block maskers, per-round log for the BCD maskers) and ``runs``
    carries one summary dict per Monte Carlo run.
    """

    masked_pi: OccupationMeasure
    masked_policy: Policy
    perturbed_cost: np.ndarray | None
    perturbed_transition: np.ndarray | None
    total_cost_perturbation: float
    cost_perturbation_pct: float
    param_perturbation: float
    log_det_paper: float
    log_det_oracle: float
    trace: SolveTrace | list
    runs: list[dict]

    def to_json(self) -> str:
        trace = self.trace.to_dict() if isinstance(self.trace, SolveTrace) else self.trace
        return json.dumps(
            {
                "masked_pi": self.masked_pi.pi.tolist(),
                "masked_policy": self.masked_policy.mu.tolist(),
                "perturbed_cost": None if self.perturbed_cost is None
                else self.perturbed_cost.tolist(),
                "perturbed_transition": None if self.perturbed_transition is None
                else self.perturbed_transition.tolist(),
                "total_cost_perturbation": self.total_cost_perturbation,
                "cost_perturbation_pct": self.cost_perturbation_pct,
                "param_perturbation": self.param_perturbation,
                "log_det_paper": self.log_det_paper,
                "log_det_oracle": self.log_det_oracle,
                "trace": trace,
                "runs": self.runs,
            },
            indent=2,
        )


# ---------------------------------------------------------------------------
# Objective builders (shared with the gradient-check tests)
# ---------------------------------------------------------------------------

def make_total_cost_objective(c0_flat: np.ndarray, t0: float, gamma: float,
                              n_states: int, n_actions: int):
    """(c0.pi - t0)^2 + gamma * sum_i log(sum_u pi(i,u))."""

    def objective(x: np.ndarray):
        d = float(c0_flat @ x - t0)
        marg = x.reshape(n_states, n_actions).sum(axis=1)
        f = d * d + gamma * float(np.log(marg).sum())
        grad = 2.0 * d * c0_flat
        if gamma != 0.0:
            grad = grad + np.repeat(gamma / marg, n_actions)
        return f, grad

    return objective


def make_marginal_exponent_objective(c0_flat: np.ndarray, t0: float, gamma2: float,
                                     n_states: int, n_actions: int):
    """(c0.pi - t0)^2 + gamma2 * |X||U| * sum_i log(sum_u pi(i,u)), the
    occupation step of the transition masker (marginal exponent as printed
    in the transition-perturbation objective)."""
    return make_total_cost_objective(
        c0_flat, t0, gamma2 * n_states * n_actions, n_states, n_actions)


def make_entropy_objective(c0_flat: np.ndarray, t0: float, gamma: float):
    """(c0.pi - t0)^2 + gamma * sum pi log pi (entropy-promoting baseline)."""

    def objective(x: np.ndarray):
        d = float(c0_flat @ x - t0)
        f = d * d + gamma * float(np.sum(x * np.log(x)))
        grad = 2.0 * d * c0_flat + gamma * (1.0 + np.log(x))
        return f, grad

    return objective


def make_cost_step_pi_objective(c_flat: np.ndarray, t0: float, gamma2: float,
                                n_states: int, n_actions: int):
    """(c.pi - t0)^2 + gamma2 * sum_i log(sum_u pi(i,u)) with perturbed c."""
    return make_total_cost_objective(c_flat, t0, gamma2, n_states, n_actions)


def make_transition_p_objective(p0_flat: np.ndarray, gamma1: float, gamma2: float,
                                delta: float = L1_SMOOTHING_DELTA):
    """gamma1 * smoothed |P - P0|_1 - gamma2 * sum log P (pi terms frozen)."""

    def objective(x: np.ndarray):
        dv = x - p0_flat
        root = np.sqrt(dv * dv + delta * delta)
        f = gamma1 * float(root.sum()) - gamma2 * float(np.log(x).sum())
        grad = gamma1 * dv / root - gamma2 / x
        return f, grad

    return objective


# ---------------------------------------------------------------------------
# Feasible sets and random starts
# ---------------------------------------------------------------------------

def flow_polytope(transition: np.ndarray, floor: float = EPS_FLOOR) -> AffinePolytope:
    """Occupation polytope of a transition tensor with an interior floor."""
    a, b = flow_lp_constraints(transition)
    n = transition.shape[0] * transition.shape[1]
    return AffinePolytope(a, b, np.full(n, floor))


def transition_polytope(pi_flat: np.ndarray, n_states: int, n_actions: int,
                        floor: float) -> AffinePolytope:
    """Row-stochastic tensors satisfying flow balance with a frozen plan.

    Variables are vec(P) in (i, u, j) order. Rows: one sum-to-one row per
    (i, u), plus per-state flow rows (last one dropped as redundant).
    """
    n = n_states * n_actions * n_states
    pi = pi_flat.reshape(n_states, n_actions)
    marginals = pi.sum(axis=1)
    rows = []
    rhs = []
    for i in range(n_states):
        for u in range(n_actions):
            r = np.zeros(n)
            base = (i * n_actions + u) * n_states
            r[base: base + n_states] = 1.0
            rows.append(r)
            rhs.append(1.0)
    for j in range(n_states - 1):
        r = np.zeros(n)
        for i in range(n_states):
            for u in range(n_actions):
                r[(i * n_actions + u) * n_states + j] = pi[i, u]
        rows.append(r)
        rhs.append(marginals[j])
    return AffinePolytope(np.array(rows), np.array(rhs), np.full(n, floor))


def random_interior_occupation(model: MdpModel, rng: np.random.Generator,
                               transition: np.ndarray | None = None) -> np.ndarray:
    """Occupation measure of a random strictly positive policy (a strictly
    interior point of the flow polytope), flattened."""
    p = model.transition if transition is None else transition
    mu = rng.dirichlet(np.ones(model.n_actions), size=model.n_states)
    mu = np.maximum(mu, 0.01)
    mu /= mu.sum(axis=1, keepdims=True)
    work = model if transition is None else MdpModel(
        model.n_states, model.n_actions, p, model.cost)
    occ = occupation_from_policy(work, Policy(mu))
    return occ.pi.reshape(-1)


def _run_nlp(polytope: AffinePolytope, objective, x0: np.ndarray) -> tuple[np.ndarray, SolveTrace]:
    problem = NlpProblem(objective=objective, feasible_set=polytope, x0=x0, tol=NLP_TOL)
    x, tr = nlp_minimize(problem)
    if tr.status == "IterationCap" and tr.final_kkt_residual > 1e-3:
        raise SolverStall(
            f"occupation solve stalled (kkt residual {tr.final_kkt_residual:.2e})")
    return x, tr


def _finalize_pi(avg: np.ndarray, transition: np.ndarray, model: MdpModel,
                 cost: np.ndarray | None = None) -> tuple[OccupationMeasure, MdpModel]:
    """Renormalize an averaged plan and re-project it onto the flow polytope
    of the in-force transition tensor."""
    in_force = model if transition is model.transition else MdpModel(
        model.n_states, model.n_actions, transition,
        model.cost if cost is None else cost)
    poly = flow_polytope(in_force.transition)
    pi_flat = poly.project(avg / avg.sum())
    return OccupationMeasure(pi_flat.reshape(model.n_states, model.n_actions), in_force), in_force


def _first_term_sq(c_flat: np.ndarray, pi_flat: np.ndarray, t0: float) -> float:
    d = float(c_flat @ pi_flat - t0)
    return d * d


def _run_logdets(x: np.ndarray, in_force: MdpModel) -> tuple[float, float]:
    """Both determinant trackers at a single run's interior solution."""
    pi = OccupationMeasure(x.reshape(in_force.cost.shape), in_force)
    return (log_det_fim_paper(pi, in_force),
            log_det_fim_oracle(augment(in_force, pi)))


def _pct(c0_flat: np.ndarray, pi_flat: np.ndarray, t0: float) -> float:
    return 100.0 * abs(float(c0_flat @ pi_flat) - t0) / t0


# ---------------------------------------------------------------------------
# Single-block maskers (plan only)
# ---------------------------------------------------------------------------

def _mask_pi_only(model: MdpModel, pi0: OccupationMeasure, cfg: MaskingConfig,
                  objective_factory) -> MaskingResult:
    c0 = model.cost.reshape(-1)
    t0 = float(c0 @ pi0.pi.reshape(-1))
    objective = objective_factory(c0, t0)
    solutions = []
    runs = []
    trace0: SolveTrace | None = None
    for run in range(cfg.monte_carlo_runs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, run]))
        poly = flow_polytope(model.transition)
        x0 = poly.project(np.maximum(random_interior_occupation(model, rng), 2 * EPS_FLOOR))
        x, tr = _run_nlp(poly, objective, x0)
        if run == 0:
            trace0 = tr
        solutions.append(x)
        ld_paper, ld_oracle = _run_logdets(x, model)
        runs.append({
            "run": run,
            "objective": tr.iterates_objective[-1],
            "pert_pct": _pct(c0, x, t0),
            "param_perturbation": 0.0,
            "logdet_paper": ld_paper,
            "logdet_oracle": ld_oracle,
            "status": tr.status,
        })
    avg = np.mean(solutions, axis=0)
    masked_pi, in_force = _finalize_pi(avg, model.transition, model)
    pi_flat = masked_pi.pi.reshape(-1)
    return MaskingResult(
        masked_pi=masked_pi,
        masked_policy=extract_policy(masked_pi),
        perturbed_cost=None,
        perturbed_transition=None,
        total_cost_perturbation=_first_term_sq(c0, pi_flat, t0),
        cost_perturbation_pct=_pct(c0, pi_flat, t0),
        param_perturbation=0.0,
        log_det_paper=log_det_fim_paper(masked_pi, in_force),
        log_det_oracle=log_det_fim_oracle(augment(in_force, masked_pi)),
        trace=trace0,
        runs=runs,
    )


def mask_total_cost(model: MdpModel, pi0: OccupationMeasure,
                    cfg: MaskingConfig) -> MaskingResult:
    """Randomize the plan against the information tracker at the price of a
    total-operation-cost perturbation (multiplier ``cfg.gamma``)."""
    nx, nu = model.n_states, model.n_actions
    return _mask_pi_only(
        model, pi0, cfg,
        lambda c0, t0: make_total_cost_objective(c0, t0, cfg.gamma, nx, nu))


def mask_max_entropy(model: MdpModel, pi0: OccupationMeasure,
                     cfg: MaskingConfig) -> MaskingResult:
    """Entropy-promoting baseline: same cost term, entropy regularizer."""
    return _mask_pi_only(
        model, pi0, cfg,
        lambda c0, t0: make_entropy_objective(c0, t0, cfg.gamma))


# ---------------------------------------------------------------------------
# Block coordinate descent: state-action costs
# ---------------------------------------------------------------------------

def _cost_step(z: np.ndarray, c0: np.ndarray, t0: float, gamma1: float) -> np.ndarray:
    """argmin_c (z.c - t0)^2 + gamma1 |c - c0|^2, in closed form.

    The stationarity condition forces c - c0 onto span(z); for gamma1 = 0
    this is the minimum-norm-change solution.
    """
    znorm = float(z @ z)
    alpha = (t0 - float(z @ c0)) / (gamma1 + znorm)
    return c0 + alpha * z


def mask_state_action_cost(model: MdpModel, pi0: OccupationMeasure,
                           cfg: MaskingConfig) -> MaskingResult:
    """Alternate closed-form cost updates with occupation solves.

    Stops a round loop when the squared l2 displacement of the stacked
    ``[c; pi]`` iterate drops below ``cfg.bcd_threshold`` (or at
    ``bcd_max_rounds``). Raises :class:`BcdNoProgress` if the full objective
    ever increases across a round beyond 1e-10.
    """
    nx, nu = model.n_states, model.n_actions
    c0 = model.cost.reshape(-1)
    t0 = float(c0 @ pi0.pi.reshape(-1))
    g1, g2 = cfg.gamma1, cfg.gamma2

    def full_objective(c, x):
        marg = x.reshape(nx, nu).sum(axis=1)
        d = float(c @ x - t0)
        return d * d + g1 * float(np.sum((c - c0) ** 2)) + g2 * float(np.log(marg).sum())

    c_solutions, pi_solutions, runs = [], [], []
    round_log0: list[dict] = []
    for run in range(cfg.monte_carlo_runs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, run]))
        poly = flow_polytope(model.transition)
        x = poly.project(np.maximum(random_interior_occupation(model, rng), 2 * EPS_FLOOR))
        scale = float(np.abs(c0).mean())
        c = c0 + 0.1 * scale * rng.standard_normal(c0.shape)
        phi_prev = full_objective(c, x)
        rounds = []
        for rnd in range(cfg.bcd_max_rounds):
            c_new = _cost_step(x, c0, t0, g1)
            objective = make_cost_step_pi_objective(c_new, t0, g2, nx, nu)
            x_new, _ = _run_nlp(poly, objective, x)
            phi = full_objective(c_new, x_new)
            eps = float(np.sum((c_new - c) ** 2) + np.sum((x_new - x) ** 2))
            rounds.append({"round": rnd, "objective": phi, "displacement": eps})
            if phi > phi_prev + DESCENT_SLACK:
                raise BcdNoProgress(
                    f"cost-masking objective rose by {phi - phi_prev:.3e} in round {rnd}")
            c, x, phi_prev = c_new, x_new, phi
            if eps <= cfg.bcd_threshold:
                break
        if run == 0:
            round_log0 = rounds
        c_solutions.append(c)
        pi_solutions.append(x)
        ld_paper, ld_oracle = _run_logdets(x, model)
        runs.append({
            "run": run,
            "objective": phi_prev,
            "pert_pct": _pct(c0, x, t0),
            "param_perturbation": float(np.sum((c - c0) ** 2)),
            "logdet_paper": ld_paper,
            "logdet_oracle": ld_oracle,
            "rounds": len(rounds),
        })
    c_bar = np.mean(c_solutions, axis=0)
    avg = np.mean(pi_solutions, axis=0)
    masked_pi, in_force = _finalize_pi(avg, model.transition, model)
    pi_flat = masked_pi.pi.reshape(-1)
    return MaskingResult(
        masked_pi=masked_pi,
        masked_policy=extract_policy(masked_pi),
        perturbed_cost=c_bar.reshape(nx, nu),
        perturbed_transition=None,
        total_cost_perturbation=_first_term_sq(c_bar, pi_flat, t0),
        cost_perturbation_pct=_pct(c0, pi_flat, t0),
        param_perturbation=float(np.sum((c_bar - c0) ** 2)),
        log_det_paper=log_det_fim_paper(masked_pi, in_force),
        log_det_oracle=log_det_fim_oracle(augment(in_force, masked_pi)),
        trace=round_log0,
        runs=runs,
    )


# ---------------------------------------------------------------------------
# Block coordinate descent: conditional transition tensor
# ---------------------------------------------------------------------------

def _transition_floor(p0: np.ndarray) -> float:
    """Interior floor for the tensor step; the default occupation floor can
    exceed legitimate tensor entries, so stay one decade below their minimum."""
    return min(EPS_FLOOR, 0.1 * float(p0.min()))


def mask_transition(model: MdpModel, pi0: OccupationMeasure,
                    cfg: MaskingConfig) -> MaskingResult:
    """Alternate tensor updates with occupation solves (joint flow balance).

    The tensor step minimizes a smoothed L1 pull toward the original tensor
    minus ``gamma2 sum log P`` over row-stochastic positive tensors that keep
    flow balance with the frozen plan; the plan step then re-optimizes over
    the flow polytope of the updated tensor. Stops on the l1 displacement of
    the stacked ``[vec(P); pi]`` iterate. Raises :class:`NonPositiveEntry`
    when the tensor step lands on its positivity floor.
    """
    nx, nu = model.n_states, model.n_actions
    c0 = model.cost.reshape(-1)
    t0 = float(c0 @ pi0.pi.reshape(-1))
    g1, g2 = cfg.gamma1, cfg.gamma2
    p0_flat = model.transition.reshape(-1)
    p_floor = _transition_floor(model.transition)
    su = nx * nu

    def full_objective(p_flat, x):
        d = float(c0 @ x - t0)
        marg = x.reshape(nx, nu).sum(axis=1)
        dv = p_flat - p0_flat
        smooth_l1 = float(np.sqrt(dv * dv + L1_SMOOTHING_DELTA**2).sum())
        return (d * d + g1 * smooth_l1
                + g2 * (su * float(np.log(marg).sum()) - float(np.log(p_flat).sum())))

    p_objective = make_transition_p_objective(p0_flat, g1, g2)
    p_solutions, pi_solutions, runs = [], [], []
    round_log0: list[dict] = []
    for run in range(cfg.monte_carlo_runs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, run]))
        p_init = model.transition * np.exp(0.1 * rng.standard_normal(model.transition.shape))
        p_init /= p_init.sum(axis=2, keepdims=True)
        p = p_init.reshape(-1)
        x = random_interior_occupation(model, rng, transition=p_init)
        x = np.maximum(x, 2 * EPS_FLOOR)
        phi_prev = full_objective(p, x)
        rounds = []
        for rnd in range(cfg.bcd_max_rounds):
            p_poly = transition_polytope(x, nx, nu, p_floor)
            p_new, _ = _run_nlp(p_poly, p_objective, p)
            if float(p_new.min()) <= 1.5 * p_floor:
                raise NonPositiveEntry(
                    "transition step hit the positivity floor "
                    f"(min entry {p_new.min():.3e})")
            pi_poly = flow_polytope(p_new.reshape(nx, nu, nx))
            objective = make_marginal_exponent_objective(c0, t0, g2, nx, nu)
            x_new, _ = _run_nlp(pi_poly, objective, pi_poly.project(x))
            phi = full_objective(p_new, x_new)
            eps = float(np.abs(p_new - p).sum() + np.abs(x_new - x).sum())
            rounds.append({"round": rnd, "objective": phi, "displacement": eps})
            if phi > phi_prev + DESCENT_SLACK:
                raise BcdNoProgress(
                    f"transition-masking objective rose by {phi - phi_prev:.3e} "
                    f"in round {rnd}")
            p, x, phi_prev = p_new, x_new, phi
            if eps <= cfg.bcd_threshold:
                break
        if run == 0:
            round_log0 = rounds
        p_solutions.append(p)
        pi_solutions.append(x)
        p_run = p.reshape(nx, nu, nx)
        in_force_run = MdpModel(nx, nu, p_run / p_run.sum(axis=2, keepdims=True),
                                model.cost)
        ld_paper, ld_oracle = _run_logdets(x, in_force_run)
        runs.append({
            "run": run,
            "objective": phi_prev,
            "pert_pct": _pct(c0, x, t0),
            "param_perturbation": float(np.abs(p - p0_flat).sum()),
            "logdet_paper": ld_paper,
            "logdet_oracle": ld_oracle,
            "rounds": len(rounds),
        })
    p_bar = np.mean(p_solutions, axis=0).reshape(nx, nu, nx)
    p_bar /= p_bar.sum(axis=2, keepdims=True)
    avg = np.mean(pi_solutions, axis=0)
    masked_pi, in_force = _finalize_pi(avg, p_bar, model)
    pi_flat = masked_pi.pi.reshape(-1)
    return MaskingResult(
        masked_pi=masked_pi,
        masked_policy=extract_policy(masked_pi),
        perturbed_cost=None,
        perturbed_transition=p_bar,
        total_cost_perturbation=_first_term_sq(c0, pi_flat, t0),
        cost_perturbation_pct=_pct(c0, pi_flat, t0),
        param_perturbation=float(np.abs(p_bar.reshape(-1) - p0_flat).sum()),
        log_det_paper=log_det_fim_paper(masked_pi, in_force),
        log_det_oracle=log_det_fim_oracle(augment(in_force, masked_pi)),
        trace=round_log0,
        runs=runs,
    )


# ---------------------------------------------------------------------------
# Multiplier calibration
# ---------------------------------------------------------------------------

def match_cost_perturbation(
    mask_fn,
    model: MdpModel,
    pi0: OccupationMeasure,
    cfg: MaskingConfig,
    target_pct: float,
    tol_pct: float = 1.0,
    param: str = "gamma",
    bracket: tuple[float, float] = (1e-7, 1e1),
    max_bisect: int = 40,
) -> tuple[float, MaskingResult]:
    """Bisect a multiplier until the relative cost perturbation hits a target.

    Uses geometric midpoints (the multipliers live on a log scale) and the
    same ``master_seed`` at every probe, so the perturbation is a smooth
    deterministic function of the multiplier. Raises
    :class:`CalibrationError` if the target cannot be bracketed or hit
    within ``tol_pct`` percentage points.
    """

    def probe(value: float) -> tuple[float, MaskingResult]:
        res = mask_fn(model, pi0, replace(cfg, **{param: value}))
        return res.cost_perturbation_pct, res

    lo, hi = bracket
    pct_lo, res_lo = probe(lo)
    for _ in range(8):
        if pct_lo <= target_pct:
            break
        lo /= 10.0
        pct_lo, res_lo = probe(lo)
    pct_hi, res_hi = probe(hi)
    for _ in range(8):
        if pct_hi >= target_pct:
            break
        hi *= 10.0
        pct_hi, res_hi = probe(hi)
    if not (pct_lo <= target_pct <= pct_hi):
        raise CalibrationError(
            f"cannot bracket {target_pct}% (lo {pct_lo:.3f}%, hi {pct_hi:.3f}%)")

    best = min(((abs(pct_lo - target_pct), lo, res_lo),
                (abs(pct_hi - target_pct), hi, res_hi)))
    for _ in range(max_bisect):
        if best[0] <= tol_pct:
            return best[1], best[2]
        mid = float(np.sqrt(lo * hi))
        pct_mid, res_mid = probe(mid)
        if abs(pct_mid - target_pct) < best[0]:
            best = (abs(pct_mid - target_pct), mid, res_mid)
        if pct_mid < target_pct:
            lo = mid
        else:
            hi = mid
    if best[0] <= tol_pct:
        return best[1], best[2]
    raise CalibrationError(
        f"bisection did not reach {target_pct}% within {tol_pct} points "
        f"(best {best[0]:.3f} away)")
