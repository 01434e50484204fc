"""Batch command-line front end.

    vaccine-game <subcommand> [--config FILE] [--out DIR] [--alpha 18 ...]

Subcommands: validate, steady, simulate, compare, sweep, verify, props.
Exit codes: 0 success, 1 usage error, 2 infeasible parameters,
3 oracle non-convergence (or oracle disagreement beyond tolerance).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    SIGN_COLUMNS,
    compare_policies,
    proposition_suite,
    sweep,
    eta_arrow_check,
)
from .dynamics import trajectory
from .equilibrium import SERIES_FIELDS, steady_state
from .oracle import ConvergenceError, OracleConfig, oracle_check, solve_bvp
from .params import (
    DYNAMIC_POLICIES,
    PARAM_NAMES,
    InfeasibleError,
    ModelParams,
    Policy,
    validate,
)

log = logging.getLogger("vaccine_game")

SCHEMA = "vaccine-game-csv/1"
EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_ORACLE = 0, 1, 2, 3
ORACLE_TOLERANCE = 1e-6

CSV_NAMES = {"lam": "lambda"}

# run-setting keys accepted in a config file, with their parsers
RUN_KEYS = {
    "policy": str,
    "t_end": float,
    "points": int,
    "out_dir": str,
    "horizon": float,
    "steps": int,
    "relaxation": float,
    "max_iters": int,
    "tol": float,
    "window": float,
    "psi": float,
    "tau": float,
    "sweep_param": str,
    "sweep_start": float,
    "sweep_stop": float,
    "sweep_num": int,
    "workers": int,
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    params: ModelParams
    policy: str = "all"
    t_end: float = 100.0
    points: int = 1000
    out_dir: Path = Path("out")
    oracle: OracleConfig = field(default_factory=OracleConfig)
    window: float = 100.0
    psi: float = 0.0
    tau: float | None = None
    sweep_param: str = "eta"
    sweep_start: float = 4.0
    sweep_stop: float = 10.0
    sweep_num: int = 13
    workers: int = 1

    def policies(self, allow_customer: bool = False) -> list[Policy]:
        if self.policy == "all":
            return list(DYNAMIC_POLICIES)
        pol = Policy.parse(self.policy)
        if pol is Policy.CUSTOMER_P and not allow_customer:
            raise UsageError("customer-p has no dynamics of its own for this subcommand")
        return [pol]

    def grid(self) -> np.ndarray:
        if self.points < 2 or not self.t_end > 0:
            raise UsageError("time grid needs t_end > 0 and at least 2 points")
        return np.linspace(0.0, self.t_end, self.points)


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------

def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_NAMES and key not in RUN_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def resolve_config(file_values: dict[str, str], overrides: dict[str, object]) -> RunConfig:
    """Merge file values with command-line overrides; fill missing parameters from the baseline."""
    merged: dict[str, object] = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})

    def parse(key, conv):
        value = merged[key]
        try:
            return conv(value)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for {key}: {value!r}") from None

    defaults = ModelParams()
    pvals = {}
    missing = []
    for name in PARAM_NAMES:
        if name in merged:
            pvals[name] = parse(name, float)
        else:
            pvals[name] = getattr(defaults, name)
            missing.append(name)
    if missing:
        log.info("using baseline values for %s", ", ".join(missing))
    params = ModelParams(**pvals)

    run = {key: parse(key, conv) for key, conv in RUN_KEYS.items() if key in merged}
    oracle_kw = {}
    for key, target in (("horizon", "horizon"), ("steps", "steps"), ("relaxation", "relaxation"),
                        ("max_iters", "max_iters"), ("tol", "convergence_tol")):
        if key in run:
            oracle_kw[target] = run.pop(key)
    try:
        oracle = OracleConfig(**oracle_kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if "out_dir" in run:
        run["out_dir"] = Path(run["out_dir"])
    if "policy" in run and run["policy"] != "all":
        try:
            Policy.parse(run["policy"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return RunConfig(params=params, oracle=oracle, **run)


# ----------------------------------------------------------------------------
# CSV output
# ----------------------------------------------------------------------------

def fmt(x) -> str:
    """12 significant digits; plain notation for |x| in [1e-3, 1e6)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    if 1e-3 <= abs(x) < 1e6:
        digits = 11 - math.floor(math.log10(abs(x)))
        s = f"{x:.{max(digits, 0)}f}"
        return s.rstrip("0").rstrip(".") if "." in s else s
    return f"{x:.11e}"


def header_line(command: str, cfg: RunConfig, extra: dict | None = None) -> str:
    items = [f"schema={SCHEMA}", f"command={command}"]
    items += [f"{k}={fmt(v)}" for k, v in cfg.params.as_dict().items()]
    for k, v in (extra or {}).items():
        items.append(f"{k}={fmt(v) if not isinstance(v, str) else v}")
    return "# " + " ".join(items)


def write_csv(out_dir: Path, filename: str, header: str, columns: list[str], rows) -> Path:
    # filenames are generated here, never taken from user input
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / filename
    buf = io.StringIO()
    buf.write(header + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue())
    print(f"wrote {path}")
    return path


def series_columns() -> list[str]:
    return [CSV_NAMES.get(k, k) for k in SERIES_FIELDS]


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    code = EXIT_OK
    for pol in cfg.policies(allow_customer=True):
        report = validate(cfg.params, pol)
        print(f"[{pol.value}]")
        print(report.to_text())
        if not report.ok:
            for msg in report.messages:
                print(f"error: {pol.value}: {msg}", file=sys.stderr)
            code = EXIT_INFEASIBLE
    return code


def cmd_steady(cfg: RunConfig) -> int:
    for pol in cfg.policies(allow_customer=True):
        ss = steady_state(pol, cfg.params, psi=cfg.psi)
        extra = {"policy": pol.value} | ({"psi": cfg.psi} if pol is Policy.CUSTOMER_P else {})
        write_csv(cfg.out_dir, f"steady_{pol.value}.csv", header_line("steady", cfg, extra),
                  ["policy"] + series_columns(),
                  [[pol.value] + [getattr(ss, k) for k in SERIES_FIELDS]])
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    grid = cfg.grid()
    for pol in cfg.policies(allow_customer=True):
        ts = trajectory(pol, cfg.params, grid, psi=cfg.psi if pol is Policy.CUSTOMER_P else None)
        cols = ts.columns()
        extra = {"policy": pol.value, "t_end": cfg.t_end, "points": cfg.points}
        if pol is Policy.CUSTOMER_P:
            extra["psi"] = cfg.psi
        write_csv(cfg.out_dir, f"simulate_{pol.value}.csv", header_line("simulate", cfg, extra),
                  series_columns(), zip(*(cols[k] for k in SERIES_FIELDS)))
    return EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    table = compare_policies(cfg.params, tau=cfg.tau, grid=cfg.grid())
    header = header_line("compare", cfg, {"tau": table.tau})
    rows = []
    for pol in (Policy.MANUFACTURER_Q, Policy.MANUFACTURER_D):
        row = table.sign_row(pol)
        rows.append([pol.value] + [row[c] for c in SIGN_COLUMNS])
    write_csv(cfg.out_dir, "compare.csv", header, ["policy"] + list(SIGN_COLUMNS), rows)
    write_csv(cfg.out_dir, "compare_values.csv", header, ["policy", "quantity", "time", "value"],
              [[pol, qty, when, v] for (pol, qty, when), v in table.values.items()])
    write_csv(cfg.out_dir, "compare_orderings.csv", header, ["relation", "holds"],
              list(table.orderings.items()))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    name = cfg.sweep_param
    if name not in PARAM_NAMES:
        raise UsageError(f"unknown sweep parameter {name!r}")
    if cfg.sweep_num < 2 or not cfg.sweep_stop > cfg.sweep_start:
        raise UsageError("sweep needs sweep_stop > sweep_start and sweep_num >= 2")
    grid = np.linspace(cfg.sweep_start, cfg.sweep_stop, cfg.sweep_num)
    pols = cfg.policies()
    result = sweep(cfg.params, name, grid, pols, workers=cfg.workers)
    header = header_line("sweep", cfg, {"sweep_param": name, "policy": cfg.policy})
    fields = [k for k in SERIES_FIELDS if k != "t"]
    rows = []
    for i, value in enumerate(grid):
        for pol in pols:
            ss, init = result.steady[pol][i], result.initial[pol][i]
            if ss is None:
                rows.append([value, pol.value, "skipped"] + [math.nan] * (2 * len(fields)))
                continue
            rows.append([value, pol.value, "ok"] + [getattr(ss, k) for k in fields]
                        + [getattr(init, k) for k in fields])
    columns = ([name, "policy", "status"] + [f"{CSV_NAMES.get(k, k)}_inf" for k in fields]
               + [f"{CSV_NAMES.get(k, k)}_0" for k in fields])
    write_csv(cfg.out_dir, f"sweep_{name}.csv", header, columns, rows)

    expected = {}
    if name == "eta":
        expected = {(c.policy, c.quantity): c for c in eta_arrow_check(result, cfg.params)}
    vrows = []
    for (pol, qty), direction in result.verdicts().items():
        check = expected.get((pol, qty))
        vrows.append([pol.value, CSV_NAMES.get(qty, qty), direction,
                      check.expected if check else "", check.precondition if check else "",
                      check.precondition_holds if check else "",
                      check.ok if check else ""])
    write_csv(cfg.out_dir, f"sweep_{name}_verdicts.csv", header,
              ["policy", "quantity", "direction", "expected", "precondition", "precondition_holds", "matches"],
              vrows)
    for value, pol, reason in result.skipped:
        print(f"warning: skipped {name}={fmt(value)} for {pol}: {reason}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    code = EXIT_OK
    for pol in cfg.policies():
        report = oracle_check(pol, cfg.params, cfg.oracle, window=cfg.window)
        ss = steady_state(pol, cfg.params)
        bvp = solve_bvp(pol, cfg.params, cfg.oracle)
        rows = report.rows() + [
            ("A_inf_closed_form", ss.A), ("A_inf_oracle", bvp.A_inf), ("A_T_oracle", float(bvp.A_path[-1])),
            ("lambda_inf_closed_form", ss.lam), ("lambda_inf_oracle", bvp.lambda_inf),
            ("tolerance", ORACLE_TOLERANCE),
            ("pass", report.path_discrepancy < ORACLE_TOLERANCE),
        ]
        extra = {"policy": pol.value, "horizon": cfg.oracle.horizon, "steps": cfg.oracle.steps,
                 "relaxation": cfg.oracle.relaxation, "tol": cfg.oracle.convergence_tol}
        write_csv(cfg.out_dir, f"verify_{pol.value}.csv", header_line("verify", cfg, extra),
                  ["quantity", "value"], rows)
        verdict = "ok" if report.path_discrepancy < ORACLE_TOLERANCE else "MISMATCH"
        print(f"{pol.value}: path discrepancy {report.path_discrepancy:.3e} "
              f"(tolerance {ORACLE_TOLERANCE:g}) {verdict}; fitted rate {report.fitted_rate:.6g} "
              f"vs analytic {report.analytic_rate:.6g}")
        if verdict != "ok":
            print(f"error: oracle disagrees with closed form for {pol.value}", file=sys.stderr)
            code = EXIT_ORACLE
    return code


def cmd_props(cfg: RunConfig) -> int:
    checks = proposition_suite(cfg.params, tau=cfg.tau)
    for c in checks:
        print(f"{c.prop:6s} {c.status:7s} precondition[{'yes' if c.precondition_holds else 'no'}]: "
              f"{c.precondition} | {c.statement} | {c.detail}")
    write_csv(cfg.out_dir, "props.csv", header_line("props", cfg),
              ["proposition", "statement", "precondition", "precondition_holds", "holds", "status", "detail"],
              [[c.prop, c.statement, c.precondition, c.precondition_holds, c.holds, c.status, c.detail]
               for c in checks])
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "steady": cmd_steady,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "props": cmd_props,
}

DEFAULT_POLICY = {"simulate": "none"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--out", dest="out_dir", help="output directory (default: out)")
    common.add_argument("--policy", help="none, manu-q, manu-d, customer-p or all")
    for name in PARAM_NAMES:
        common.add_argument(f"--{name}", type=float)
    common.add_argument("--t-end", dest="t_end", type=float)
    common.add_argument("--points", type=int)
    common.add_argument("--psi", type=float, help="constant reimbursement share for customer-p")
    common.add_argument("--tau", type=float, help="early comparison time")
    common.add_argument("--horizon", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--relaxation", type=float)
    common.add_argument("--max-iters", dest="max_iters", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--window", type=float, help="comparison window for verify")
    common.add_argument("--param", dest="sweep_param")
    common.add_argument("--start", dest="sweep_start", type=float)
    common.add_argument("--stop", dest="sweep_stop", type=float)
    common.add_argument("--num", dest="sweep_num", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="vaccine-game", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        if "policy" not in file_values and overrides.get("policy") is None:
            overrides["policy"] = DEFAULT_POLICY.get(args.command, "all")
        cfg = resolve_config(file_values, overrides)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        tag = f" [{exc.condition}]" if exc.condition else ""
        print(f"infeasible{tag}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        tail = ", ".join(f"{h:.3g}" for h in exc.history[-5:])
        print(f"oracle did not converge: {exc} (last changes: {tail})", file=sys.stderr)
        return EXIT_ORACLE
    except ValueError as exc:
        # out-of-range parameter values (negative beta, psi >= 1, ...)
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
