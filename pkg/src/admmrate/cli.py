"""Command-line front end.

Subcommands: ``rate`` (exact rate for one penalty value), ``sweep``
(rate versus penalty grid, CSV), ``run`` (simulate ADMM and fit the
empirical rate), ``optimal-rho`` (penalty search), and ``gen-topology``
(materialize a topology as JSON). Every command reads a single JSON
config; all randomness is seeded through it.

Exit codes: 0 on success, 2 on configuration or validation failures,
3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import AdmmRateError, ConfigError, InvalidTopologyError
from . import experiments as exp

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="admmrate",
        description="Distributed consensus ADMM: simulation and exact rate analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("rate", "compute the exact convergence rate for one penalty value"),
        ("sweep", "tabulate the rate over a penalty grid (CSV)"),
        ("run", "simulate ADMM and fit the empirical rate"),
        ("optimal-rho", "search the penalty value minimizing the rate"),
        ("gen-topology", "materialize the configured topology as JSON"),
    ]
    for name, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", help="output path (JSON or CSV depending on command)")
        p.add_argument("--seed", type=int, help="override the config's init_seed")
    return parser


def _cmd_rate(config, out):
    report = exp.compute_rate(config)
    print(f"alpha={report.alpha:.12g}")
    print(f"rho={report.rho:.12g}")
    print(f"dim_kernel={report.kernel_dim}")
    print(f"tight={str(report.tight).lower()}")
    if out:
        with open(out, "w") as fh:
            json.dump(report.to_json(), fh, indent=2)
            fh.write("\n")


def _cmd_sweep(config, out):
    rows = exp.sweep_rates(config)
    if out:
        exp.write_sweep_csv(rows, out)
        print(f"wrote {len(rows)} rows to {out}")
    else:
        print("rho,alpha_general,alpha_closed_form")
        for rho, alpha, closed in rows:
            closed_txt = "" if closed is None else repr(float(closed))
            print(f"{rho!r},{alpha!r},{closed_txt}")


def _cmd_run(config, out):
    trajectory, fit, report = exp.run_experiment(config)
    print(f"iterations={trajectory.iterations}")
    print(f"converged={str(trajectory.converged).lower()}")
    print(f"alpha_theory={report.alpha:.12g}")
    if fit.degenerate:
        print("alpha_empirical=degenerate (error at numerical floor)")
    else:
        print(f"alpha_empirical={fit.alpha_empirical:.12g}")
        print(f"fit_window=[{fit.k_min},{fit.k_max}]")
        print(f"fit_residual={fit.residual:.6g}")
    if out:
        trajectory.to_csv(out)
        print(f"wrote trajectory to {out}")


def _cmd_optimal_rho(config, out):
    result = exp.optimal_rho_experiment(config)
    print(f"rho_star={result['rho_star']:.12g}")
    print(f"alpha_star={result['alpha_star']:.12g}")
    if "closed_form_rho" in result:
        print(f"closed_form_rho={result['closed_form_rho']:.12g}")
        print(f"closed_form_alpha={result['closed_form_alpha']:.12g}")
    if out:
        with open(out, "w") as fh:
            json.dump(result, fh, indent=2)
            fh.write("\n")


def _cmd_gen_topology(config, out):
    payload = exp.generate_topology(config)
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote topology to {out}")
    else:
        print(text)


_COMMANDS = {
    "rate": _cmd_rate,
    "sweep": _cmd_sweep,
    "run": _cmd_run,
    "optimal-rho": _cmd_optimal_rho,
    "gen-topology": _cmd_gen_topology,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = exp.ExperimentConfig.load(args.config)
        if args.seed is not None:
            config.init_seed = args.seed
        _COMMANDS[args.command](config, args.out)
    except (ConfigError, InvalidTopologyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AdmmRateError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
