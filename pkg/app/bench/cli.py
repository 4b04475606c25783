"""Command-line entry point: solve, compare, sweep, verify and serve."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from app.bench.runner import compare_variants, run_scenario, sweep, verify_run
from app.bench.scenario import load_scenario
from app.core.config import configure_logging, get_output_dir
from app.core.ddp import VARIANT_NAMES
from app.core.errors import ScenarioError

logger = logging.getLogger(__name__)

EXIT_CONVERGED = 0
EXIT_USAGE = 1
EXIT_DNC = 2


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajopt",
        description="Low-thrust trajectory optimization with Taylor-polynomial DDP.",
    )
    parser.add_argument("--log-level", default=None, help="Overrides TRAJOPT_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="Solve one scenario and write its artifacts")
    solve.add_argument("scenario", type=Path)
    solve.add_argument("--variant", choices=VARIANT_NAMES)
    solve.add_argument("--order", type=int, choices=(2, 3, 4))
    solve.add_argument("--eps-aul", type=float)
    solve.add_argument("--eps-da", type=float)
    solve.add_argument("--out", type=Path, help="Artifact directory (default: <output dir>/<scenario>)")

    compare = commands.add_parser("compare", help="Run several solver variants on one scenario")
    compare.add_argument("scenario", type=Path)
    compare.add_argument("--variants", type=_name_list, default=list(VARIANT_NAMES))
    compare.add_argument("--out", type=Path)

    sweep_cmd = commands.add_parser("sweep", help="Tolerance or expansion-order sweep")
    sweep_cmd.add_argument("scenario", type=Path)
    group = sweep_cmd.add_mutually_exclusive_group(required=True)
    group.add_argument("--eps-aul", type=_float_list)
    group.add_argument("--orders", type=_int_list)
    sweep_cmd.add_argument("--out", type=Path)

    verify = commands.add_parser("verify", help="Re-propagate the controls stored in a run directory")
    verify.add_argument("report_dir", type=Path)

    serve = commands.add_parser("serve", help="Start the HTTP run service")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _default_out(config, suffix: str = "") -> Path:
    return get_output_dir() / f"{config.name}{suffix}"


def _solve(args) -> int:
    config = load_scenario(args.scenario).with_overrides(
        variant=args.variant, order=args.order, eps_aul=args.eps_aul, eps_da=args.eps_da
    )
    out_dir = args.out or _default_out(config)
    report = run_scenario(config, out_dir).report
    print(f"{report.scenario} [{report.variant}, order {report.order}]: {report.outcome}")
    if report.fuel_kg is not None:
        print(f"  fuel      {report.fuel_kg:.4f} kg")
    print(f"  J         {report.cost:.8g}")
    print(f"  g_max     {report.g_max:.3e}")
    print(f"  n_ddp={report.n_ddp} n_aul={report.n_aul} n_newton={report.n_newton}")
    print(f"  wall time {report.wall_time_s:.2f} s, artifacts in {out_dir}")
    if report.reason:
        print(f"  reason    {report.reason}")
    return EXIT_CONVERGED if report.converged else EXIT_DNC


def _compare(args) -> int:
    config = load_scenario(args.scenario)
    rows = compare_variants(config, args.variants, args.out or _default_out(config, "_compare"))
    for row in rows:
        j_norm = row["J_normalized"]
        t_norm = row["time_normalized"]
        print(
            f"{row['variant']:>8}  {row['outcome']:<9}  "
            f"J/J_ref={'-' if j_norm is None else f'{j_norm:.5f}'}  "
            f"t/t_ref={'-' if t_norm is None else f'{t_norm:.3f}'}"
        )
    return EXIT_CONVERGED if all(row["outcome"] == "Converged" for row in rows) else EXIT_DNC


def _sweep(args) -> int:
    config = load_scenario(args.scenario)
    rows = sweep(config, eps_values=args.eps_aul, orders=args.orders, out_dir=args.out or _default_out(config, "_sweep"))
    for row in rows:
        print(f"{row['parameter']}={row['value']}: {row['outcome']} J={row['J_kg']:.6g} g_max={row['g_max']:.3e}")
    return EXIT_CONVERGED if all(row["outcome"] == "Converged" for row in rows) else EXIT_DNC


def _verify(args) -> int:
    result = verify_run(args.report_dir)
    status = "ok" if result.ok else "FAILED"
    print(f"verification {status}: drift {result.terminal_drift:.3e}, g_max {result.g_max:.3e} (tolerance {result.tolerance:.1e})")
    return EXIT_CONVERGED if result.ok else EXIT_DNC


def _serve(args) -> int:
    import uvicorn

    uvicorn.run("app.api.server:app", host=args.host, port=args.port)
    return EXIT_CONVERGED


_COMMANDS = {
    "solve": _solve,
    "compare": _compare,
    "sweep": _sweep,
    "verify": _verify,
    "serve": _serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging(args.log_level)
        return _COMMANDS[args.command](args)
    except (ScenarioError, ValueError, OSError) as e:
        logger.debug("usage error", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
