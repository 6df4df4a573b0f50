"""Command-line interface: run / sweep / check.

Exit codes are a stable contract: 0 success, 1 audit failure, 2 config
or usage error, 3 runtime numeric failure.
"""
from __future__ import annotations

import argparse
import os
import statistics
import sys
from typing import List, Optional, Sequence

from . import audit, harness, report, theory
from .config import AppConfig, build_run_config, load_config
from .errors import AuditError, ConfigError, DomainError, NumericError
from .federation import FixedInterval, RunConfig
from .harness import SweepEntry, run_experiment
from .objectives import global_loss, quadratic_minimizer, smoothness_constant

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _out_dir(app: AppConfig, cli_out: Optional[str]) -> str:
    path = cli_out or os.environ.get("LOCALAMS_OUT_DIR") or app.run["out_dir"]
    os.makedirs(path, exist_ok=True)
    return path


def _should_plot(app: AppConfig, args) -> bool:
    return bool(app.run["plot"]) and not args.no_plot


def _write_run_outputs(outcome, seed: int, out_dir: str, stem: str,
                       plot: bool) -> str:
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    harness.write_csv(outcome.metrics, seed, csv_path)
    if plot:
        report.plot_run(outcome.metrics, os.path.join(out_dir, f"{stem}.png"),
                        title=stem)
    return csv_path


def cmd_run(args) -> int:
    app = load_config(args.config, args.set or [])
    cfg = build_run_config(app, seed=args.seed)
    outcome = run_experiment(
        cfg,
        parallel=app.run["parallel"],
        record_history=app.run["record_history"],
        per_step_metrics=app.run["per_step_metrics"],
    )
    out_dir = _out_dir(app, args.out)
    csv_path = _write_run_outputs(outcome, cfg.seed, out_dir,
                                  f"run_seed{cfg.seed}", _should_plot(app, args))
    final = outcome.final
    print(f"wrote {csv_path}")
    print(f"rounds={cfg.rounds} iters={final.iters} "
          f"loss={final.loss:.6g} grad_norm_sq={final.grad_norm_sq:.6g} "
          f"avg_grad_norm_sq={final.avg_grad_norm_sq:.6g}")
    return EXIT_OK


def _parse_vary(raw: Optional[str]) -> List[int]:
    if not raw or "=" not in raw:
        raise ConfigError("--vary must look like N=2,8,32")
    name, values = raw.split("=", 1)
    if name.strip() != "N":
        raise ConfigError(f"only N can be varied, got {name.strip()!r}")
    try:
        parsed = [int(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--vary values must be integers, got {values!r}")
    if not parsed:
        raise ConfigError("--vary list is empty")
    return parsed


def cmd_sweep(args) -> int:
    app = load_config(args.config, args.set or [])
    n_values = _parse_vary(args.vary)
    seeds = list(range(args.seeds)) if args.seeds is not None else app.seeds()
    out_dir = _out_dir(app, args.out)
    plot = _should_plot(app, args)

    entries: List[SweepEntry] = []
    for n in n_values:
        alphas: List[float] = []
        iters: List[float] = []
        finals: List[float] = []
        for seed in seeds:
            cfg = build_run_config(app, seed=seed, n_clients=n)
            outcome = run_experiment(cfg, parallel=app.run["parallel"])
            _write_run_outputs(outcome, seed, out_dir,
                               f"sweep_N{n}_seed{seed}", plot=False)
            alphas.append(cfg.hp.alpha)
            finals.append(outcome.final.avg_grad_norm_sq)
            iters.append(_iters_to_target(outcome))
        entries.append(SweepEntry(n_clients=n, alphas=alphas,
                                  iters_to_target=iters, final_avg_gns=finals))

    summary_path = os.path.join(out_dir, "sweep_summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("N,median_alpha,median_final_avg_grad_norm_sq,"
                 "median_iters_to_target,seeds\n")
        for e in entries:
            fh.write(f"{e.n_clients},{statistics.median(e.alphas)!r},"
                     f"{e.median_final_avg_gns!r},"
                     f"{e.median_iters_to_target!r},{len(seeds)}\n")
    if plot:
        report.plot_sweep(entries, os.path.join(out_dir, "sweep_summary.png"))
    print(f"wrote {len(n_values) * len(seeds)} run files and {summary_path}")
    return EXIT_OK


def _iters_to_target(outcome) -> float:
    """Iterations to the 99.9%-gap-closed loss (inf when not applicable)."""
    if outcome.config.objective.kind != "het_quadratic":
        return float("inf")
    _, target = harness.quadratic_threshold(outcome.training.oracles,
                                            outcome.training.x0)
    return harness.iters_to_loss(outcome.metrics, target)


def _print_bound(cfg: RunConfig, outcome) -> None:
    """Informational bound evaluation for quadratic, clipped runs."""
    g_inf = audit.clip_bound(outcome.training)
    if cfg.objective.kind != "het_quadratic" or g_inf is None:
        print("bound evaluation: skipped (needs quadratic objective and a clip bound)")
        return
    oracles = outcome.training.oracles
    x_star = quadratic_minimizer(oracles)
    f_gap = max(0.0, global_loss(oracles, outcome.training.x0)
                - global_loss(oracles, x_star))
    base = dict(
        L=smoothness_constant(oracles), sigma=cfg.objective.sigma,
        G_inf=g_inf, epsilon=cfg.hp.epsilon, d=oracles[0].dim,
        beta1=cfg.hp.beta1, N=cfg.n_clients, T=max(1, cfg.rounds),
        alpha=cfg.hp.alpha, f_gap=f_gap,
    )
    try:
        if isinstance(cfg.schedule, FixedInterval):
            inp = theory.TheoryInputs(K=cfg.schedule.k, **base)
            bound = theory.theorem1_bound(inp)
            parts = ", ".join(f"{k}={v:.4g}" for k, v in bound.terms.items())
            print(f"bound (fixed interval): total={bound.total:.6g} [{parts}]")
        else:
            inp = theory.TheoryInputs(K=cfg.schedule.k_init, **base)
            value = theory.theorem2_bound(inp, cfg.schedule)
            print(f"bound (adaptive interval): total={value:.6g}")
    except DomainError as exc:
        print(f"bound evaluation: {exc}")


def cmd_check(args) -> int:
    app = load_config(args.config, args.set or [])
    cfg = build_run_config(app, seed=args.seed)
    outcome = run_experiment(cfg, parallel=app.run["parallel"],
                             record_history=True)
    result = outcome.training

    if args.inject_fault == "v_hat":
        # Self-test hook: damage one recorded v̂ entry so the audits
        # demonstrably catch regressions.
        last = result.history[-1]
        first_client = sorted(last.steps)[0]
        last.steps[first_client][-1].v_hat_after[0] *= 0.5

    findings = list(audit.run_audits(result))
    all_ok = all(f.ok for f in findings)

    z_line: str
    can_check_z = (cfg.full_participation and not cfg.mode.restart_momentum
                   and cfg.lr_decay == 1.0
                   and cfg.mode.variant.value == "average")
    if can_check_z:
        residual = theory.check_z_identity(result)
        z_tol = 1e-12 if cfg.hp.beta1 == 0.0 else 1e-8
        z_ok = residual <= z_tol
        all_ok = all_ok and z_ok
        status = "PASS" if z_ok else "FAIL"
        z_line = (f"[{status}] z-identity residual: {residual:.3e} "
                  f"(limit {z_tol:.1e})")
    else:
        z_line = ("[SKIP] z-identity: needs full participation, average "
                  "aggregation, no restart, constant learning rate")

    print(z_line)
    for f in findings:
        print(f.line())
    _print_bound(cfg, outcome)

    if not all_ok:
        failed = [f.name for f in findings if not f.ok]
        if can_check_z and not z_ok:
            failed.insert(0, "z-identity")
        print(f"audit failure: {', '.join(failed)}")
        return EXIT_AUDIT
    print("all audits passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="localams",
        description=("Federated local AMSGrad trainer with client-adaptive "
                     "learning rates: run experiments, sweep client counts, "
                     "and audit trajectories."),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", help="path to a TOML config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("--out", help="output directory (overrides config and "
                                     "the LOCALAMS_OUT_DIR environment variable)")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
        p.add_argument("--no-plot", action="store_true",
                       help="skip figure rendering")

    p_run = sub.add_parser("run", help="execute one training run, write CSV")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep",
                             help="run a client-count sweep over seeds")
    common(p_sweep)
    p_sweep.add_argument("--vary", required=True, metavar="N=2,8,32",
                         help="client counts to sweep")
    p_sweep.add_argument("--seeds", type=int, default=None,
                         help="number of seeds (0..n-1); defaults to the "
                              "config's sweep section")
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check",
                             help="run audits: identity residual, state "
                                  "invariants, bound evaluation")
    common(p_check)
    p_check.add_argument("--inject-fault", choices=["v_hat"], default=None,
                         help="deliberately corrupt the trajectory to "
                              "exercise the audits (self-test)")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AuditError as exc:
        print(f"audit error: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
