"""Command-line interface.

Subcommands:
    boundaries   stopping-boundary tables for any design family
    calibrate    solve a design parameter for a type I error target
    oc-sim       Monte Carlo operating characteristics (FDR / FPR / coverage)
    decide       optimal stop/continue decision and risk curves
    report       end-of-trial posterior summary

A TOML config (``--config``) may supply any defaults; command-line flags
override it. Unknown config fields are hard errors. Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 infeasible calibration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .bayes import GaussianPrior, posterior
from .calibrate import (
    InfeasibleTargetError,
    calibrate_loss,
    calibrate_ppos,
    calibrate_prior_sd,
    calibrate_threshold,
    pp_boundaries,
    ppos_boundaries,
)
from .decision import LossSpec, backward_induction, subjective_threshold
from .engine import (
    BoundarySet,
    DesignSchedule,
    InfeasibleSpendError,
    crossing_prob,
)
from .frequentist import SpendingFunction, obrien_fleming, pocock, spending_boundaries
from .numerics import NoSignChangeError, RootConvergenceError
from .simulate import OCReport, Scenario, estimate_oc, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

CONFIG_SCHEMA_VERSION = 1

# section -> field -> expected python type(s); the config mirrors the flags
CONFIG_SCHEMA: dict[str, dict[str, tuple[type, ...]]] = {
    "schedule": {
        "analyses": (int,),
        "n_max": (int,),
        "n": (list,),
        "sigma": (int, float),
    },
    "prior": {"mean": (int, float), "sd": (int, float), "flat": (bool,)},
    "design": {
        "family": (str,),
        "alpha": (int, float),
        "gamma": (int, float),
        "eta": (int, float),
        "spending": (str,),
        "power_b": (int, float),
    },
    "loss": {
        "type1": (int, float),
        "type2": (int, float),
        "patient_cost": (int, float),
    },
    "sim": {
        "trials": (int,),
        "seed": (int,),
        "workers": (int,),
        "nu0": (int, float),
        "nu": (int, float),
        "theta": (int, float),
        "gamma": (int, float),
    },
    "report": {"ybar": (int, float), "n": (int,), "alpha": (int, float)},
    "decide": {"z": (int, float), "analysis": (int,)},
}

FAMILIES = ("pocock", "obf", "spending", "pp", "ppos", "decision")
SPENDING_NAMES = {"log": "log", "obf-like": "obf-like", "power": "power"}


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    version = raw.pop("schema", None)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(
            f"config must declare schema = {CONFIG_SCHEMA_VERSION}, got {version!r}"
        )
    for section, fields in raw.items():
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(fields, dict):
            raise ConfigError(f"[{section}] must be a table of key-value pairs")
        for key, value in fields.items():
            if key not in CONFIG_SCHEMA[section]:
                raise ConfigError(f"unknown config field {section}.{key}")
            expected = CONFIG_SCHEMA[section][key]
            if expected == (bool,):
                valid = isinstance(value, bool)
            else:
                valid = isinstance(value, expected) and not isinstance(value, bool)
            if not valid:
                want = " or ".join(t.__name__ for t in expected)
                raise ConfigError(
                    f"config field {section}.{key} must be {want}, "
                    f"got {type(value).__name__}"
                )
    return raw


def _setting(args: argparse.Namespace, config: dict, section: str, key: str, flag: str, default=None):
    """Flag value if given, else config value, else default."""
    value = getattr(args, flag, None)
    if value is not None:
        return value
    return config.get(section, {}).get(key, default)


def sig6(x: float) -> str:
    if x is None:
        return ""
    if x == math.inf:
        return "inf"
    return f"{x:.6g}"


def emit_table(header: list[str], rows: list[list], fmt: str, out: str | None) -> None:
    if fmt == "json":
        payload = [dict(zip(header, row)) for row in rows]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        lines = [",".join(header)]
        for row in rows:
            lines.append(
                ",".join(sig6(v) if isinstance(v, (int, float)) or v is None else str(v) for v in row)
            )
        text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_schedule(args, config) -> DesignSchedule:
    sigma = float(_setting(args, config, "schedule", "sigma", "sigma", 1.0))
    n_list = _setting(args, config, "schedule", "n", "n")
    if n_list:
        if isinstance(n_list, str):
            n_list = [int(v) for v in n_list.split(",")]
        return DesignSchedule(n=tuple(int(v) for v in n_list), sigma=sigma)
    K = int(_setting(args, config, "schedule", "analyses", "K", 5))
    n_max = int(_setting(args, config, "schedule", "n_max", "nmax", 1000))
    return DesignSchedule.equal(K, n_max, sigma)


def build_prior(args, config) -> GaussianPrior:
    flat = bool(_setting(args, config, "prior", "flat", "flat", False))
    if flat:
        return GaussianPrior(flat=True)
    mean = float(_setting(args, config, "prior", "mean", "prior_mean", 0.0))
    sd = float(_setting(args, config, "prior", "sd", "prior_sd", 1.0))
    return GaussianPrior(mu=mean, nu=sd)


def _boundary_row(label: str, b: BoundarySet, schedule: DesignSchedule) -> list:
    alpha = crossing_prob(schedule, b, 0.0)
    return [label, *[round(v, 6) for v in b.c], round(alpha, 6)]


def cmd_boundaries(args, config) -> int:
    schedule = build_schedule(args, config)
    alpha = float(_setting(args, config, "design", "alpha", "alpha", 0.05))
    header = ["family", *[f"c{j + 1}" for j in range(schedule.K)], "alpha"]
    rows: list[list] = []

    if args.all:
        rows.append(_boundary_row("pocock", pocock(schedule, alpha), schedule))
        rows.append(
            _boundary_row("obrien-fleming", obrien_fleming(schedule, alpha), schedule)
        )
        sf = SpendingFunction(kind="power", alpha=alpha, b=1.0)
        rows.append(
            _boundary_row("linear-spending", spending_boundaries(schedule, sf), schedule)
        )
        nu1 = calibrate_prior_sd(schedule, gamma=0.95, target_alpha=alpha)
        prior1 = GaussianPrior(mu=0.0, nu=nu1) if nu1 != math.inf else GaussianPrior(flat=True)
        rows.append(
            _boundary_row(
                "posterior-prob-calibrated-prior",
                pp_boundaries(schedule, prior1, 0.95),
                schedule,
            )
        )
        gamma2 = calibrate_threshold(schedule, GaussianPrior(mu=0.0, nu=1.0), alpha)
        rows.append(
            _boundary_row(
                "posterior-prob-calibrated-threshold",
                pp_boundaries(schedule, GaussianPrior(mu=0.0, nu=1.0), gamma2),
                schedule,
            )
        )
        nu3 = calibrate_ppos(schedule, gamma=0.8, eta=0.05, target_alpha=alpha)
        prior3 = GaussianPrior(mu=0.0, nu=nu3) if nu3 != math.inf else GaussianPrior(flat=True)
        rows.append(
            _boundary_row(
                "predictive-prob",
                ppos_boundaries(schedule, prior3, 0.8, 0.05),
                schedule,
            )
        )
        xi0 = float(_setting(args, config, "loss", "type2", "xi0", 1000.0))
        xi1 = calibrate_loss(schedule, GaussianPrior(mu=0.0, nu=1.0), xi0, alpha)
        table = backward_induction(
            schedule, GaussianPrior(mu=0.0, nu=1.0), LossSpec.constant(xi1, xi0, schedule.K)
        )
        rows.append(_boundary_row("decision-theoretic", table.boundaries, schedule))
        emit_table(header, rows, args.format, args.out)
        return EXIT_OK

    family = _setting(args, config, "design", "family", "family")
    if family not in FAMILIES:
        raise ConfigError(f"--family must be one of {FAMILIES}, got {family!r}")
    if family == "pocock":
        b = pocock(schedule, alpha)
    elif family == "obf":
        b = obrien_fleming(schedule, alpha)
    elif family == "spending":
        kind = _setting(args, config, "design", "spending", "spending", "power")
        if kind not in SPENDING_NAMES:
            raise ConfigError(f"--spending must be one of {tuple(SPENDING_NAMES)}")
        bpow = float(_setting(args, config, "design", "power_b", "power_b", 1.0))
        b = spending_boundaries(
            schedule, SpendingFunction(kind=kind, alpha=alpha, b=bpow)
        )
    elif family == "pp":
        gamma = float(_setting(args, config, "design", "gamma", "gamma", 0.95))
        b = pp_boundaries(schedule, build_prior(args, config), gamma)
    elif family == "ppos":
        gamma = float(_setting(args, config, "design", "gamma", "gamma", 0.8))
        eta = float(_setting(args, config, "design", "eta", "eta", 0.05))
        b = ppos_boundaries(schedule, build_prior(args, config), gamma, eta)
    else:
        xi0 = float(_setting(args, config, "loss", "type2", "xi0", 1000.0))
        xi1 = float(_setting(args, config, "loss", "type1", "xi1", 19.0 * xi0))
        cost = float(_setting(args, config, "loss", "patient_cost", "patient_cost", 1.0))
        table = backward_induction(
            schedule,
            build_prior(args, config),
            LossSpec.constant(xi1, xi0, schedule.K, cost),
        )
        b = table.boundaries
    rows.append(_boundary_row(family, b, schedule))
    emit_table(header, rows, args.format, args.out)
    return EXIT_OK


def cmd_calibrate(args, config) -> int:
    schedule = build_schedule(args, config)
    target = float(_setting(args, config, "design", "alpha", "alpha", 0.05))
    goal = args.target

    if goal == "pp-prior":
        gamma = float(_setting(args, config, "design", "gamma", "gamma", 0.95))
        nu = calibrate_prior_sd(schedule, gamma, target)
        prior = GaussianPrior(mu=0.0, nu=nu) if nu != math.inf else GaussianPrior(flat=True)
        achieved = crossing_prob(schedule, pp_boundaries(schedule, prior, gamma), 0.0)
        payload = {"parameter": "prior_sd", "value": nu, "gamma": gamma}
    elif goal == "threshold":
        prior = build_prior(args, config)
        gamma = calibrate_threshold(schedule, prior, target)
        achieved = crossing_prob(schedule, pp_boundaries(schedule, prior, gamma), 0.0)
        payload = {"parameter": "gamma", "value": gamma}
    elif goal == "ppos-prior":
        gamma = float(_setting(args, config, "design", "gamma", "gamma", 0.8))
        eta = float(_setting(args, config, "design", "eta", "eta", 0.05))
        nu = calibrate_ppos(schedule, gamma, eta, target)
        prior = GaussianPrior(mu=0.0, nu=nu) if nu != math.inf else GaussianPrior(flat=True)
        achieved = crossing_prob(
            schedule, ppos_boundaries(schedule, prior, gamma, eta), 0.0
        )
        payload = {"parameter": "prior_sd", "value": nu, "gamma": gamma, "eta": eta}
    else:  # loss
        prior = build_prior(args, config)
        xi0 = float(_setting(args, config, "loss", "type2", "xi0", 1000.0))
        xi1 = calibrate_loss(schedule, prior, xi0, target)
        table = backward_induction(
            schedule, prior, LossSpec.constant(xi1, xi0, schedule.K)
        )
        achieved = crossing_prob(schedule, table.boundaries, 0.0)
        payload = {
            "parameter": "false_rejection_loss",
            "value": xi1,
            "type2_loss": xi0,
            "implied_threshold": subjective_threshold(xi1, xi0),
        }
    payload.update(
        {
            "target_alpha": target,
            "achieved_alpha": achieved,
            "analyses": schedule.K,
            "n_max": schedule.n[-1],
        }
    )
    emit_json(payload, args.out)
    return EXIT_OK


def _oc_row(nu0, nu, K, oc: OCReport) -> list:
    pct = lambda v: None if v is None else 100.0 * v
    return [
        nu0,
        nu,
        K,
        pct(oc.fdr),
        pct(oc.fpr),
        pct(oc.coverage),
        oc.rejection_count,
        oc.null_count,
        oc.n_trials,
    ]


OC_HEADER = [
    "nu0",
    "nu",
    "K",
    "fdr_pct",
    "fpr_pct",
    "coverage_pct",
    "rejections",
    "null_trials",
    "trials",
]

FULL_GRID_NU0 = (0.1, 0.5, 1.0)
FULL_GRID_NU = (0.1, 0.5, 1.0, 10.0)
FULL_GRID_K = (1, 2, 5, 10, 100, 1000)


def cmd_oc_sim(args, config) -> int:
    if args.seed is None and "seed" not in config.get("sim", {}):
        raise ConfigError("oc-sim requires --seed (or sim.seed in the config)")
    seed = int(_setting(args, config, "sim", "seed", "seed"))
    trials = int(_setting(args, config, "sim", "trials", "trials", 10_000))
    workers = int(_setting(args, config, "sim", "workers", "workers", 1))
    gamma = float(_setting(args, config, "sim", "gamma", "gamma", 0.95))
    sigma = float(_setting(args, config, "schedule", "sigma", "sigma", 1.0))
    n_max = int(_setting(args, config, "schedule", "n_max", "nmax", 1000))

    def cell(nu0: float | None, nu: float, K: int, theta: float | None) -> OCReport:
        gen = (
            GaussianPrior(mu=theta, nu=0.0)
            if theta is not None
            else GaussianPrior(mu=0.0, nu=nu0)
        )
        sc = Scenario(
            gen_prior=gen,
            analysis_prior=GaussianPrior(mu=0.0, nu=nu),
            schedule=DesignSchedule.equal(K, n_max, sigma),
            gamma=gamma,
            n_trials=trials,
            seed=seed,
        )
        return estimate_oc(run_scenario(sc, workers))

    rows = []
    if args.grid == "full":
        for nu0 in FULL_GRID_NU0:
            for nu in FULL_GRID_NU:
                for K in FULL_GRID_K:
                    rows.append(_oc_row(nu0, nu, K, cell(nu0, nu, K, None)))
    else:
        nu = float(_setting(args, config, "sim", "nu", "nu", 1.0))
        K = int(_setting(args, config, "schedule", "analyses", "K", 5))
        theta = _setting(args, config, "sim", "theta", "theta")
        theta = float(theta) if theta is not None else None
        nu0 = _setting(args, config, "sim", "nu0", "nu0")
        if theta is None and nu0 is None:
            raise ConfigError("oc-sim needs --nu0 (population sd) or --theta (fixed effect)")
        nu0 = float(nu0) if nu0 is not None else None
        rows.append(_oc_row(nu0, nu, K, cell(nu0, nu, K, theta)))
    emit_table(OC_HEADER, rows, args.format, args.out)
    return EXIT_OK


def cmd_decide(args, config) -> int:
    schedule = build_schedule(args, config)
    prior = build_prior(args, config)
    xi0 = float(_setting(args, config, "loss", "type2", "xi0", 1000.0))
    xi1 = float(_setting(args, config, "loss", "type1", "xi1", 19.0 * xi0))
    cost = float(_setting(args, config, "loss", "patient_cost", "patient_cost", 1.0))
    loss = LossSpec.constant(xi1, xi0, schedule.K, cost)
    j = int(_setting(args, config, "decide", "analysis", "analysis", 1))
    if not 1 <= j <= schedule.K:
        raise ConfigError(f"--analysis must be in 1..{schedule.K}, got {j}")
    z = _setting(args, config, "decide", "z", "z")
    if z is None:
        raise ConfigError("decide requires --z (observed z-statistic)")
    z = float(z)

    table = backward_induction(schedule, prior, loss)
    risk = table.analyses[j - 1]
    boundary = risk.boundary
    if j == schedule.K:
        decision = "reject" if z > boundary else "accept"
    else:
        decision = "stop-and-reject" if z > boundary else "continue"

    if args.curves:
        rows = [
            [float(zv), float(s), float(cont)]
            for zv, s, cont in zip(risk.z, risk.stop_risk, risk.continue_risk)
        ]
        emit_table(["z", "stop_risk", "continue_risk"], rows, "csv", args.curves)

    payload = {
        "analysis": j,
        "z": z,
        "boundary": boundary,
        "decision": decision,
        "implied_threshold": subjective_threshold(loss.xi1[j - 1], loss.xi0),
        "analyses": schedule.K,
        "n": list(schedule.n),
    }
    emit_json(payload, args.out)
    return EXIT_OK


def cmd_report(args, config) -> int:
    prior = build_prior(args, config)
    sigma = float(_setting(args, config, "schedule", "sigma", "sigma", 1.0))
    ybar = float(_setting(args, config, "report", "ybar", "ybar", 0.0))
    n = int(_setting(args, config, "report", "n", "n", 0))
    alpha = float(_setting(args, config, "report", "alpha", "alpha", 0.05))
    summary = posterior(prior, ybar, n, sigma, ci_level=1.0 - alpha)
    payload = {
        "mean": summary.mean,
        "sd": summary.sd,
        "prob_positive": summary.prob_positive,
        "ci_lower": summary.ci[0],
        "ci_upper": summary.ci[1],
        "ci_level": summary.ci_level,
        "n": n,
        "ybar": ybar,
    }
    emit_json(payload, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqtrial",
        description="Group-sequential trial design: boundaries, calibration, "
        "operating characteristics, and optimal stopping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, fmt: bool = True, schedule: bool = True):
        p.add_argument("--config", help="TOML config file supplying defaults")
        p.add_argument("--out", help="write output to this path instead of stdout")
        if fmt:
            p.add_argument(
                "--format", choices=("csv", "json"), default="csv", help="output format"
            )
        if schedule:
            p.add_argument("--K", type=int, help="number of analyses (equal groups)")
            p.add_argument("--nmax", type=int, help="maximum sample size")
            p.add_argument("--n", help="comma-separated cumulative sample sizes")
        p.add_argument("--sigma", type=float, help="outcome standard deviation")
        p.add_argument("--prior-mean", dest="prior_mean", type=float)
        p.add_argument("--prior-sd", dest="prior_sd", type=float)
        p.add_argument("--flat", action="store_const", const=True, default=None,
                       help="use the flat (improper) prior")

    b = sub.add_parser("boundaries", help="compute stopping-boundary tables")
    common(b)
    b.add_argument("--family", choices=FAMILIES)
    b.add_argument("--all", action="store_true", help="all design families at once")
    b.add_argument("--alpha", type=float, help="type I error target")
    b.add_argument("--gamma", type=float, help="posterior / predictive threshold")
    b.add_argument("--eta", type=float, help="final-analysis error level")
    b.add_argument("--spending", choices=tuple(SPENDING_NAMES))
    b.add_argument("--power-b", dest="power_b", type=float)
    b.add_argument("--xi0", type=float, help="type II loss")
    b.add_argument("--xi1", type=float, help="false-rejection loss")
    b.add_argument("--patient-cost", dest="patient_cost", type=float)
    b.set_defaults(func=cmd_boundaries)

    c = sub.add_parser("calibrate", help="tune a parameter to a type I error target")
    common(c, fmt=False)
    c.add_argument(
        "--target",
        required=True,
        choices=("pp-prior", "threshold", "ppos-prior", "loss"),
        help="which parameter to solve for",
    )
    c.add_argument("--alpha", type=float, help="type I error target")
    c.add_argument("--gamma", type=float)
    c.add_argument("--eta", type=float)
    c.add_argument("--xi0", type=float)
    c.set_defaults(func=cmd_calibrate)

    o = sub.add_parser("oc-sim", help="Monte Carlo operating characteristics")
    common(o)
    o.add_argument("--seed", type=int, help="simulation seed (required)")
    o.add_argument("-S", "--trials", type=int, help="trials per scenario")
    o.add_argument("--workers", type=int, help="parallel workers")
    o.add_argument("--grid", choices=("full",), help="run the full scenario grid")
    o.add_argument("--nu0", type=float, help="population effect sd")
    o.add_argument("--nu", type=float, help="analysis prior sd")
    o.add_argument("--theta", type=float, help="fixed true effect (overrides --nu0)")
    o.add_argument("--gamma", type=float, help="posterior threshold")
    o.set_defaults(func=cmd_oc_sim)

    d = sub.add_parser("decide", help="optimal decision at an interim analysis")
    common(d, fmt=False)
    d.add_argument("--z", type=float, help="observed z-statistic")
    d.add_argument("--analysis", type=int, help="analysis index (1-based)")
    d.add_argument("--xi0", type=float)
    d.add_argument("--xi1", type=float)
    d.add_argument("--patient-cost", dest="patient_cost", type=float)
    d.add_argument("--curves", help="write (z, stop risk, continue risk) CSV here")
    d.set_defaults(func=cmd_decide)

    r = sub.add_parser("report", help="posterior summary for observed data")
    common(r, fmt=False, schedule=False)
    r.add_argument("--ybar", type=float, help="observed sample mean")
    r.add_argument("--n", dest="n_obs", type=int, help="observed sample size")
    r.add_argument("--alpha", type=float, help="1 - credible level")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config: dict[str, Any] = {}
    try:
        if args.config:
            config = load_config(args.config)
        return args.func(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleTargetError, InfeasibleSpendError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (RootConvergenceError, NoSignChangeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
