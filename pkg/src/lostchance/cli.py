"""Command-line front end.

Verbs:
  evaluate  run one policy combination (or the full grid) on a case file
  table     reproduce a published compensation table and report PASS/FLAG
  sweep     write a parameter-sweep CSV for a built-in scenario
  verify    run the randomized oracle audit
  schema    print the case-file grammar

Exit codes: 0 success; 1 a computation flag was raised under --strict,
a table cell failed, or verification failed; 2 bad input.
Human-readable numbers use 6 significant digits; CSV output keeps full
precision.  The LOSTCHANCE_OUT_DIR environment variable sets the default
output directory for sweeps.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .casefile import SCHEMA_TEXT, atomic_write_text, load_case
from .choice import ChoiceCaseModel, evaluate_choice_case
from .outcome import CaseValidationError
from .scenarios import matos_sweep, medical_sweep
from .tables import reproduce_table
from .valuation import (
    CompensationSchedule,
    ConfigurationError,
    PolicyCombo,
    evaluate_policy,
)
from .verify import run_verification

OUT_DIR_ENV = "LOSTCHANCE_OUT_DIR"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _parse_custom_blocks(spec: Optional[str]) -> Optional[list[list[str]]]:
    if spec is None:
        return None
    blocks = [
        [label.strip() for label in part.split(",") if label.strip()]
        for part in spec.split("|")
    ]
    blocks = [b for b in blocks if b]
    if not blocks:
        raise ConfigurationError(f"could not parse custom blocks from {spec!r}")
    return blocks


def _schedule_rows(schedule: CompensationSchedule) -> list[tuple[str, str, float, float]]:
    return schedule.to_csv_rows()


def _emit_csv(rows: list[tuple], header: tuple[str, ...], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [repr(float(x)) if isinstance(x, (int, float, np.floating)) and not isinstance(x, bool) else str(x) for x in row]
        )


def _evaluate_one(
    loaded, combo: PolicyCombo, presumption: Optional[str], custom_blocks
) -> CompensationSchedule:
    if loaded.kind == "choice":
        blocks = None
        if custom_blocks is not None:
            case_model, _ = _flatten_for_blocks(loaded.case, presumption)
            blocks = _labels_to_indices(case_model, custom_blocks)
        return evaluate_choice_case(
            loaded.case, combo, presumption=presumption, custom_blocks=blocks
        )
    blocks = None
    if custom_blocks is not None:
        blocks = _labels_to_indices(loaded.case, custom_blocks)
    return evaluate_policy(
        loaded.case,
        combo,
        evidence_joint=loaded.evidence_joint,
        custom_blocks=blocks,
    )


def _flatten_for_blocks(model: ChoiceCaseModel, presumption: Optional[str]):
    from .choice import (
        flatten_choice_case,
        presume_choice_ii_cp,
        presume_choice_it_cp,
    )

    if presumption == "ii-cp":
        resolved = presume_choice_ii_cp(model)
    elif presumption == "it-cp":
        resolved = presume_choice_it_cp(model)
    else:
        resolved = model
    return flatten_choice_case(resolved)


def _labels_to_indices(case_model, blocks: list[list[str]]) -> list[list[int]]:
    return [[case_model.space.index(lab) for lab in block] for block in blocks]


def cmd_evaluate(args) -> int:
    loaded = load_case(args.case)
    custom_blocks = _parse_custom_blocks(args.custom_blocks)
    combos: list[PolicyCombo]
    skipped: list[str] = []
    if args.all_policies:
        combos = []
        has_evidence = loaded.kind == "choice" or loaded.evidence_joint is not None
        for info in ("l-fi", "m-fi", "h-fi"):
            for conn in ("e-c", "ld-c", "i-c"):
                if conn == "e-c" and not has_evidence:
                    skipped.append(f"{info}/{conn}: no evidence coupling in file")
                    continue
                for indem in ("cc-i", "fm-i"):
                    combos.append(PolicyCombo(info, conn, indem))
    else:
        combos = [PolicyCombo(args.info, args.connection, args.indemnity)]
    schedules = [
        _evaluate_one(loaded, combo, args.presumption, custom_blocks)
        for combo in combos
    ]
    rows = [row for s in schedules for row in _schedule_rows(s)]
    if args.csv:
        _emit_csv(rows, ("policy", "outcome", "compensation", "award"), sys.stdout)
    else:
        width = max(len(r[0]) for r in rows)
        owidth = max(len(r[1]) for r in rows)
        for policy, outcome, comp, award in rows:
            print(
                f"{policy:<{width}}  {outcome:<{owidth}}  "
                f"compensation={_fmt(comp)}  award={_fmt(award)}"
            )
    notes = sorted({n for s in schedules for n in s.notes})
    for note in notes:
        print(f"# {note}")
    for s in skipped:
        print(f"# skipped {s}")
    flagged = any(n.startswith("FLAG") for n in notes)
    if flagged and args.strict:
        return 1
    return 0


def cmd_table(args) -> int:
    params = {}
    if args.table in ("2",):
        params = {"p0": args.p0, "p1": args.p1, "delta_v": args.delta_v}
    elif args.table in ("5", "6"):
        params = {
            "p0": args.p0,
            "p1": args.p1,
            "v_red": args.v_red,
            "v_blue": args.v_blue,
        }
    cells = reproduce_table(args.table, **params)
    failed = False
    flagged = False
    for cell in cells:
        line = (
            f"table {cell.table} | {cell.row} | {cell.outcome}: "
            f"computed={_fmt(cell.computed)} printed={_fmt(cell.printed)} "
            f"{cell.status}"
        )
        if cell.note:
            line += f"  ({cell.note})"
        print(line)
        failed = failed or cell.status == "FAIL"
        flagged = flagged or cell.status == "FLAG"
    n_ok = sum(1 for c in cells if c.ok)
    print(f"{n_ok}/{len(cells)} cells match")
    if failed:
        return 1
    if flagged and args.strict:
        return 1
    return 0


def _default_out(name: str, out: Optional[str]) -> Path:
    if out is not None:
        return Path(out)
    base = os.environ.get(OUT_DIR_ENV, ".")
    return Path(base) / f"{name}_sweep.csv"


def _grid(lo: float, hi: float, steps: int) -> np.ndarray:
    if steps < 0:
        raise ConfigurationError(f"steps must be >= 0, got {steps}")
    if steps == 0:
        return np.empty(0)
    if steps == 1:
        return np.array([lo])
    return np.linspace(lo, hi, steps)


def cmd_sweep(args) -> int:
    if args.scenario == "matos":
        thetas = _grid(args.theta_min, args.theta_max, args.theta_steps)
        ps = _grid(args.p_min, args.p_max, args.p_steps)
        rows = list(matos_sweep(thetas, ps))
        header = ("theta", "p", "award", "band")
    else:
        p1s = _grid(args.p1_min, args.p1_max, args.p1_steps)
        rows = list(medical_sweep(args.p0, args.delta_v, p1s))
        header = (
            "p0",
            "p1",
            "delta_v",
            "award_l_fi",
            "award_e_c",
            "award_i_c_cc_i",
            "award_i_c_fm_i",
            "rejected_formula_comparison",
        )
    buf = io.StringIO()
    _emit_csv([tuple(r[h] for h in header) for r in rows], header, buf)
    path = _default_out(args.scenario, args.out)
    atomic_write_text(path, buf.getvalue())
    print(f"wrote {len(rows)} rows to {path}")
    if args.scenario == "medical":
        print(
            "# rejected_formula_comparison: comparison only; no policy "
            "combination produces this value"
        )
    return 0


def cmd_verify(args) -> int:
    report = run_verification(
        seed=args.seed,
        instances=args.instances,
        lambda_offset=args.inject_lambda_offset,
    )
    print(report.render())
    return 0 if report.passed else 1


def cmd_schema(args) -> int:
    print(SCHEMA_TEXT, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lostchance",
        description="Lost-chance compensation engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="evaluate a case file")
    p_eval.add_argument("case", help="path to a JSON case file")
    p_eval.add_argument("--info", default="h-fi", help="information policy (l-fi, m-fi, h-fi, custom)")
    p_eval.add_argument(
        "--connection",
        default="e-c",
        help="connection policy (e-c, ld-c, i-c, paper-table)",
    )
    p_eval.add_argument("--indemnity", default="cc-i", help="indemnity policy (cc-i, fm-i)")
    p_eval.add_argument(
        "--all-policies",
        action="store_true",
        help="evaluate the full info x connection x indemnity grid",
    )
    p_eval.add_argument(
        "--presumption",
        choices=["it-cp", "ii-cp", "none"],
        default="it-cp",
        help="counterfactual-choice presumption for lost-choice cases",
    )
    p_eval.add_argument(
        "--custom-blocks",
        default=None,
        help="custom information blocks as 'a,b|c' (outcome labels)",
    )
    p_eval.add_argument("--csv", action="store_true", help="machine-readable output")
    p_eval.add_argument("--strict", action="store_true", help="exit 1 on flags")
    p_eval.set_defaults(fn=cmd_evaluate)

    p_table = sub.add_parser("table", help="reproduce a published table")
    p_table.add_argument("table", choices=["2", "4", "5", "6"])
    p_table.add_argument("--p0", type=float, default=0.95)
    p_table.add_argument("--p1", type=float, default=0.90)
    p_table.add_argument("--delta-v", type=float, default=100_000.0)
    p_table.add_argument("--v-red", type=float, default=0.0)
    p_table.add_argument("--v-blue", type=float, default=100_000.0)
    p_table.add_argument("--strict", action="store_true", help="exit 1 on flags")
    p_table.set_defaults(fn=cmd_table)

    p_sweep = sub.add_parser("sweep", help="write a scenario sweep CSV")
    p_sweep.add_argument("scenario", choices=["matos", "medical"])
    p_sweep.add_argument("--out", default=None, help="output CSV path")
    p_sweep.add_argument("--theta-min", type=float, default=0.0)
    p_sweep.add_argument("--theta-max", type=float, default=1.0)
    p_sweep.add_argument("--theta-steps", type=int, default=11)
    p_sweep.add_argument("--p-min", type=float, default=0.0)
    p_sweep.add_argument("--p-max", type=float, default=1.0)
    p_sweep.add_argument("--p-steps", type=int, default=21)
    p_sweep.add_argument("--p0", type=float, default=0.95)
    p_sweep.add_argument("--delta-v", type=float, default=100_000.0)
    p_sweep.add_argument("--p1-min", type=float, default=0.0)
    p_sweep.add_argument("--p1-max", type=float, default=0.90)
    p_sweep.add_argument("--p1-steps", type=int, default=19)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the randomized oracle audit")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--instances", type=int, default=200)
    p_verify.add_argument(
        "--inject-lambda-offset",
        type=float,
        default=0.0,
        help=argparse.SUPPRESS,
    )
    p_verify.set_defaults(fn=cmd_verify)

    p_schema = sub.add_parser("schema", help="print the case-file grammar")
    p_schema.set_defaults(fn=cmd_schema)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "presumption", None) == "none":
        args.presumption = None
    try:
        return args.fn(args)
    except CaseValidationError as exc:
        print("error: case file is invalid", file=sys.stderr)
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
        return 2
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
