"""Configuration-driven experiment runner.

``covertplan <solve|sweep|adversary|compare> --config PATH [--seed U64]
[--out DIR]`` reads a single JSON config and writes CSV/JSON/SVG artifacts.
Exit codes: 0 ok, 2 invalid config, 3 solver/runtime failure. All outputs
are reproducible byte for byte from (config, seed).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import adversary as adv
from .charts import line_chart_svg
from .errors import ConfigError, CovertPlanError
from .masking import (
    MaskingConfig,
    mask_max_entropy,
    mask_state_action_cost,
    mask_total_cost,
    mask_transition,
    match_cost_perturbation,
)
from .mdp import MdpModel, Policy, average_cost, extract_policy, solve_average_cost_lp
from .scenario import ScenarioParams, build_model

_MASKERS = {
    "total": mask_total_cost,
    "cost": mask_state_action_cost,
    "transition": mask_transition,
    "entropy": mask_max_entropy,
}
_SWEEP_PARAMS = ("gamma", "gamma1", "gamma2")


@dataclass
class ExperimentConfig:
    model: MdpModel
    scenario: ScenarioParams | None
    masking: MaskingConfig
    sweep: dict
    adversary: dict
    compare: dict
    output_dir: Path


def load_config(path: str, seed_override: int | None = None,
                out_override: str | None = None) -> ExperimentConfig:
    """Parse and validate the experiment config; raises ConfigError."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    scen_doc = doc.get("scenario")
    if scen_doc is None:
        raise ConfigError("config requires a 'scenario' section")
    try:
        if "model_path" in scen_doc:
            model_text = (Path(path).parent / scen_doc["model_path"]).read_text()
            model = MdpModel.from_json(model_text)
            params = None
        else:
            params = ScenarioParams.from_dict(scen_doc)
            model = build_model(params)
    except (KeyError, TypeError, ValueError, OSError, CovertPlanError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc

    mask_doc = dict(doc.get("masking", {}))
    if params is not None:
        chi = mask_doc.setdefault("chi", params.chi)
        if abs(chi - params.chi) > 0:
            raise ConfigError(
                f"masking.chi={chi} disagrees with scenario.chi={params.chi}")
    if seed_override is not None:
        mask_doc["master_seed"] = seed_override
    try:
        masking = MaskingConfig.from_dict(mask_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid masking section: {exc}") from exc

    sweep = dict(doc.get("sweep", {}))
    if sweep:
        if sweep.get("parameter", "gamma") not in _SWEEP_PARAMS:
            raise ConfigError(f"sweep.parameter must be one of {_SWEEP_PARAMS}")
        if int(sweep.get("points", 0)) < 2 and sweep.get("points") != 1:
            raise ConfigError("sweep.points must be >= 2 (or exactly 1)")
        if sweep.get("masker", "total") not in _MASKERS:
            raise ConfigError(f"sweep.masker must be one of {tuple(_MASKERS)}")

    out_dir = Path(out_override or doc.get("output_dir", "out"))
    return ExperimentConfig(
        model=model,
        scenario=params,
        masking=masking,
        sweep=sweep,
        adversary=dict(doc.get("adversary", {})),
        compare=dict(doc.get("compare", {})),
        output_dir=out_dir,
    )


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_solve(config: ExperimentConfig) -> list[Path]:
    """Solve the unmasked LP; write plan.json and model.json."""
    out = config.output_dir
    pi0 = solve_average_cost_lp(config.model)
    policy = extract_policy(pi0)
    plan = {
        "pi": pi0.pi.tolist(),
        "mu": policy.mu.tolist(),
        "average_cost": average_cost(pi0, config.model),
    }
    _write_json(out / "plan.json", plan)
    _write_text(out / "model.json", config.model.to_json())
    return [out / "plan.json", out / "model.json"]


def _sweep_grid(sweep: dict) -> np.ndarray:
    points = int(sweep.get("points", 10))
    start = float(sweep.get("start_exponent", -3))
    end = float(sweep.get("end_exponent", -1))
    if points == 1:
        return np.array([10.0 ** start]) if "value" not in sweep \
            else np.array([float(sweep["value"])])
    return np.logspace(start, end, points)


def cmd_sweep(config: ExperimentConfig, which: str | None = None) -> list[Path]:
    """Run a masker across a log-spaced multiplier grid; write sweep.csv and
    SVG companions. Rows are flushed per grid point."""
    sweep = config.sweep
    if not sweep:
        raise ConfigError("config has no 'sweep' section")
    which = which or sweep.get("masker", "total")
    masker = _MASKERS[which]
    param = sweep.get("parameter", "gamma")
    grid = _sweep_grid(sweep)
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    pi0 = solve_average_cost_lp(config.model)

    rows = []
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "gamma", "gamma1", "gamma2", "mean_logdet_paper", "mean_logdet_oracle",
            "mean_cost_perturbation_pct", "mean_param_perturbation", "n_runs", "seed",
        ])
        fh.flush()
        for value in grid:
            cfg = replace(config.masking, **{param: float(value)})
            res = masker(config.model, pi0, cfg)
            row = [
                cfg.gamma, cfg.gamma1, cfg.gamma2,
                float(np.mean([r["logdet_paper"] for r in res.runs])),
                float(np.mean([r["logdet_oracle"] for r in res.runs])),
                float(np.mean([r["pert_pct"] for r in res.runs])),
                float(np.mean([r["param_perturbation"] for r in res.runs])),
                cfg.monte_carlo_runs, cfg.master_seed,
            ]
            writer.writerow(row)
            fh.flush()
            rows.append(row)

    logdet = [r[3] for r in rows]
    pert = [r[5] for r in rows]
    param_pert = [r[6] for r in rows]
    values = list(map(float, grid))
    files = [csv_path]
    charts = [
        ("sweep_logdet_vs_pert.svg",
         [("log det tracker", pert, logdet)],
         "cost perturbation (%)", "mean log det", False),
        ("sweep_logdet_vs_param.svg",
         [("log det tracker", values, logdet)], param, "mean log det", True),
        ("sweep_pert_vs_param.svg",
         [("cost perturbation", values, pert),
          ("parameter perturbation", values, param_pert)],
         param, "perturbation", True),
    ]
    for name, series, xl, yl, logx in charts:
        p = out / name
        line_chart_svg(p, series, xl, yl, title=f"{which} masking sweep", log_x=logx)
        files.append(p)
    return files


def _load_plan(plan_path: Path) -> tuple[np.ndarray, Policy]:
    doc = json.loads(plan_path.read_text())
    return np.array(doc["pi"], dtype=float), Policy(np.array(doc["mu"], dtype=float))


def cmd_adversary(config: ExperimentConfig, plan_path: str | None = None) -> list[Path]:
    """Sample trajectories from a plan, estimate the model, report errors
    and the Cramer-Rao comparison."""
    section = config.adversary
    if not section and plan_path is None:
        raise ConfigError("config has no 'adversary' section")
    plan_file = Path(plan_path or section.get("plan", ""))
    if not plan_file.is_file():
        raise ConfigError(f"adversary plan file not found: {plan_file}")
    _, policy = _load_plan(plan_file)
    if policy.mu.shape != (config.model.n_states, config.model.n_actions):
        raise ConfigError("plan shape does not match the configured model")
    sample_sizes = [int(v) for v in section.get("sample_sizes", [10_000])]
    n_runs = int(section.get("n_runs", 100))
    seed = config.masking.master_seed
    model = config.model
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)

    unvisited_any = False
    csv_path = out / "adversary.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "N", "tv_error", "l1_error", "seed"])
        for n_idx, n_steps in enumerate(sample_sizes):
            for run in range(n_runs):
                sample = adv.sample_trajectory(
                    model, policy, n_steps, seed=(seed, n_idx, run))
                est = adv.mle_estimate(sample, model.n_states, model.n_actions)
                mask = est.visited_rows.reshape(model.n_states, model.n_actions)
                unvisited_any |= not mask.all()
                p_hat, _ = adv.extract_estimates(est, require_all=False)
                err = adv.tv_error(p_hat, model.transition, row_mask=mask)
                writer.writerow([run, n_steps, err.tv, err.l1, seed])

    crb_doc: dict
    if (policy.mu > 0.0).all():
        crb_cfg = section.get("crb", {})
        report = adv.crb_check(
            model, policy,
            n_steps=int(crb_cfg.get("n_steps", max(sample_sizes))),
            n_runs=int(crb_cfg.get("n_runs", n_runs)),
            seed=seed,
        )
        crb_doc = json.loads(report.to_json())
    else:
        crb_doc = {
            "skipped": "plan policy has zero entries; chain information "
                       "matrix undefined",
        }
    crb_doc["unvisited_rows_observed"] = bool(unvisited_any)
    _write_json(out / "crb_report.json", crb_doc)
    return [csv_path, out / "crb_report.json"]


def run_masking_comparison(
    model: MdpModel,
    cfg: MaskingConfig,
    target_pct: float,
    match_tol_pct: float,
    n_seeds: int,
    n_steps: int,
) -> dict:
    """Calibrate information and entropy maskers to one cost perturbation,
    then compare the adversary's transition-estimate errors."""
    pi0 = solve_average_cost_lp(model)
    half_tol = 0.5 * match_tol_pct
    gamma_f, res_f = match_cost_perturbation(
        mask_total_cost, model, pi0, cfg, target_pct, tol_pct=half_tol)
    gamma_e, res_e = match_cost_perturbation(
        mask_max_entropy, model, pi0, cfg, target_pct, tol_pct=half_tol)

    def errors(policy: Policy, tag: int) -> np.ndarray:
        vals = np.empty(n_seeds)
        for run in range(n_seeds):
            sample = adv.sample_trajectory(
                model, policy, n_steps, seed=(cfg.master_seed, tag, run))
            est = adv.mle_estimate(sample, model.n_states, model.n_actions)
            mask = est.visited_rows.reshape(model.n_states, model.n_actions)
            p_hat, _ = adv.extract_estimates(est, require_all=False)
            vals[run] = adv.tv_error(p_hat, model.transition, row_mask=mask).l1
        return vals

    err_f = errors(res_f.masked_policy, 0)
    err_e = errors(res_e.masked_policy, 1)
    se = lambda v: float(v.std(ddof=1) / np.sqrt(v.size))  # noqa: E731

    return {
        "target_pct": target_pct,
        "n_seeds": n_seeds,
        "sample_size": n_steps,
        "fisher": {
            "gamma": gamma_f,
            "achieved_pct": res_f.cost_perturbation_pct,
            "log_det_paper": res_f.log_det_paper,
            "mean_l1_error": float(err_f.mean()),
            "se_l1_error": se(err_f),
            "per_seed_l1": err_f.tolist(),
        },
        "entropy": {
            "gamma": gamma_e,
            "achieved_pct": res_e.cost_perturbation_pct,
            "log_det_paper": res_e.log_det_paper,
            "mean_l1_error": float(err_e.mean()),
            "se_l1_error": se(err_e),
            "per_seed_l1": err_e.tolist(),
        },
        "l1_difference": float(err_f.mean() - err_e.mean()),
        "se_difference": float(np.sqrt(se(err_f) ** 2 + se(err_e) ** 2)),
    }


def cmd_compare(config: ExperimentConfig) -> list[Path]:
    """Matched-perturbation information-vs-entropy comparison."""
    section = config.compare
    if not section:
        raise ConfigError("config has no 'compare' section")
    report = run_masking_comparison(
        config.model,
        config.masking,
        target_pct=float(section.get("target_pct", 20.0)),
        match_tol_pct=float(section.get("match_tol_pct", 1.0)),
        n_seeds=int(section.get("n_seeds", 100)),
        n_steps=int(section.get("sample_size", 10_000)),
    )
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "compare.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "run", "N", "l1_error", "seed"])
        for method in ("fisher", "entropy"):
            for run, val in enumerate(report[method]["per_seed_l1"]):
                writer.writerow([method, run, report["sample_size"], val,
                                 config.masking.master_seed])
    summary = {k: v for k, v in report.items()}
    for method in ("fisher", "entropy"):
        summary[method] = {k: v for k, v in report[method].items()
                           if k != "per_seed_l1"}
    _write_json(out / "comparison.json", summary)
    return [csv_path, out / "comparison.json"]


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="covertplan",
        description="Masked sensing plans for finite MDP controllers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "adversary", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")
        if name == "sweep":
            p.add_argument("--which", choices=tuple(_MASKERS), default=None)
        if name == "adversary":
            p.add_argument("--plan", default=None, help="plan.json to attack")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config, seed_override=args.seed,
                             out_override=args.out)
        if args.command == "sweep" and not config.sweep:
            raise ConfigError("config has no 'sweep' section")
    except ConfigError as exc:
        print(f"covertplan: config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "solve":
            files = cmd_solve(config)
        elif args.command == "sweep":
            files = cmd_sweep(config, which=args.which)
        elif args.command == "adversary":
            files = cmd_adversary(config, plan_path=args.plan)
        else:
            files = cmd_compare(config)
    except ConfigError as exc:
        print(f"covertplan: config error: {exc}", file=sys.stderr)
        return 2
    except (CovertPlanError, np.linalg.LinAlgError) as exc:
        print(f"covertplan: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
