"""Command-line interface: ``relimp simulate | analyze | winloss``.

Exit status is 0 on success, 2 for invalid input or configuration, 3 for a
numerical failure and 4 for file errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .config import REALLOC_ALL, ORTH_ALL, SimulationConfig, load_toml, normalize
from .corrmat import (
    AugmentedProblem,
    classify_scenario,
    ingest_dataset,
    read_data_csv,
    read_matrix_csv,
    vif,
)
from .dominance import MAX_PREDICTORS
from .errors import ConfigError, NumericalError, ResponseColumnNotFound, SchemaMismatch, ValidationError
from .metrics import (
    SimulationRecord,
    aggregate_table1,
    binned_tally,
    kendall_tau,
    rmse,
    tally,
    threshold_split,
    win_loss,
)
from .ortho import johnson
from .realloc import regpa
from .simgen import run_simulation, units

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

SIM_COLUMNS = [
    "p",
    "ev_index",
    "seed_index",
    "orth",
    "realloc",
    "lambda1",
    "lambda1_over_sqrt_p",
    "vif_max",
    "vif_max_over_p",
    "scenario",
    "mean_rmse",
    "mean_tau",
    "n_responses",
]
DETAIL_COLUMNS = ["p", "ev_index", "seed_index", "orth", "realloc", "response_index", "rmse", "tau"]

RECOMMENDATIONS = {
    "1.1": "RW suitable",
    "1.2": "prefer GCD (RW at risk of leveling)",
    "2.1": "prefer RW (GCD at risk of a priori bias)",
    "2.2": "use RW with caution",
}


def fmt(x) -> str:
    """CSV number format: integers verbatim, floats to 12 significant digits."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


# ---------------------------------------------------------------------------
# simulation CSV files


def _record_row(r: SimulationRecord) -> list:
    return [
        r.p,
        r.ev_index,
        r.seed_index,
        r.orth,
        r.realloc,
        r.lambda1,
        r.lambda1_ratio,
        r.vif_max,
        r.vif_ratio,
        r.scenario,
        r.mean_rmse,
        r.mean_tau,
        r.n_responses,
    ]


def _csv_line(values) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([fmt(v) for v in values])
    return buf.getvalue()


def read_simulation_csv(path) -> list:
    """Parse a file written by ``simulate`` back into :class:`SimulationRecord` objects."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SIM_COLUMNS:
            raise SchemaMismatch(f"{path}: expected columns {SIM_COLUMNS}, found {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(SIM_COLUMNS):
                raise SchemaMismatch(f"{path}:{lineno}: expected {len(SIM_COLUMNS)} fields, got {len(row)}")
            try:
                out.append(
                    SimulationRecord(
                        p=int(row[0]),
                        ev_index=int(row[1]),
                        seed_index=int(row[2]),
                        orth=row[3],
                        realloc=row[4],
                        lambda1=float(row[5]),
                        lambda1_ratio=float(row[6]),
                        vif_max=float(row[7]),
                        vif_ratio=float(row[8]),
                        scenario=row[9],
                        mean_rmse=float(row[10]),
                        mean_tau=float(row[11]),
                        n_responses=int(row[12]),
                    )
                )
            except ValueError as exc:
                raise SchemaMismatch(f"{path}:{lineno}: {exc}") from None
    return out


def detail_path(out_path: str) -> str:
    root, ext = os.path.splitext(out_path)
    return f"{root}.responses{ext or '.csv'}"


def marker_path(out_path: str) -> str:
    return out_path + ".progress"


def _read_marker(config: SimulationConfig) -> Optional[dict]:
    """The resume marker for ``config.out_path`` if it was left by a run with the same settings."""
    path = marker_path(config.out_path)
    try:
        with open(path) as fh:
            marker = json.load(fh)
    except (OSError, ValueError):
        return None
    if marker.get("fingerprint") != config.fingerprint():
        return None
    return marker


def _write_marker(config: SimulationConfig, done: int, size: int, detail_size: int) -> None:
    tmp = marker_path(config.out_path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump({"fingerprint": config.fingerprint(), "done": done, "bytes": size, "detail_bytes": detail_size}, fh)
    os.replace(tmp, marker_path(config.out_path))


def write_simulation(config: SimulationConfig, workers: Optional[int] = None, quiet: bool = False) -> int:
    """Run the simulation into ``config.out_path``; returns the number of units computed.

    Rows are appended one eigenvalue set at a time, in key order.  A progress marker
    beside the output records how many sets are complete and the byte length of the
    files at that point, so an interrupted run with identical settings picks up
    where it stopped and still produces the same bytes as an uninterrupted one.
    """
    config.validate()
    all_units = units(config)
    marker = _read_marker(config)
    dpath = detail_path(config.out_path)
    done = 0
    resumable = marker is not None and os.path.exists(config.out_path)
    if resumable and config.per_response:
        resumable = os.path.exists(dpath)
    mode = "r+" if resumable else "w"
    if resumable:
        done = int(marker["done"])
    with open(config.out_path, mode, newline="") as out:
        detail = open(dpath, mode, newline="") if config.per_response else None
        try:
            if mode == "r+":
                out.truncate(marker["bytes"])
                out.seek(marker["bytes"])
                if detail is not None:
                    detail.truncate(marker["detail_bytes"])
                    detail.seek(marker["detail_bytes"])
                if not quiet:
                    print(f"resuming after {done} of {len(all_units)} eigenvalue sets", file=sys.stderr)
            else:
                out.write(_csv_line(SIM_COLUMNS))
                if detail is not None:
                    detail.write(_csv_line(DETAIL_COLUMNS))
            computed = 0
            for k, (_, recs, rows) in enumerate(run_simulation(config, workers, skip=all_units[:done]), start=done + 1):
                out.write("".join(_csv_line(_record_row(r)) for r in recs))
                out.flush()
                if detail is not None:
                    detail.write("".join(_csv_line(row) for row in rows))
                    detail.flush()
                _write_marker(config, k, out.tell(), detail.tell() if detail is not None else 0)
                computed += 1
        finally:
            if detail is not None:
                detail.close()
    os.remove(marker_path(config.out_path))
    return computed


def format_table1(table: dict) -> str:
    orths = [o for o in ORTH_ALL if any(k[1] == o for k in table)]
    reallocs = [a for a in REALLOC_ALL if any(k[0] == a for k in table)]
    ps = sorted({k[2] for k in table})
    lines = ["mean RMSE / mean Kendall tau against GD", ""]
    head = f"{'realloc':<8}{'orth':<9}" + "".join(f"{'p=' + str(p):>18}" for p in ps)
    lines.append(head)
    lines.append("-" * len(head))
    for a in reallocs:
        for o in orths:
            cells = []
            for p in ps:
                v = table.get((a, o, p))
                cells.append(f"{v[0]:.4f} / {v[1]:+.3f}".rjust(18) if v else " " * 18)
            lines.append(f"{a:<8}{o:<9}" + "".join(cells))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# analysis report


@dataclass
class AnalysisReport:
    labels: list
    r_squared: float
    measures: dict  # name -> ImportanceVector
    normalized: dict  # name -> percent shares
    vif: np.ndarray
    regpa_row_sums: np.ndarray
    lambda1_ratio: float
    vif_ratio: float
    scenario: str
    recommendation: str
    differences: dict = field(default_factory=dict)  # "GCD-GD" etc.
    agreement: dict = field(default_factory=dict)  # name -> (rmse, tau) vs GD
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "r_squared": self.r_squared,
            "measures": {k: v.values.tolist() for k, v in self.measures.items()},
            "normalized": {k: v.tolist() for k, v in self.normalized.items()},
            "vif": self.vif.tolist(),
            "regpa_row_sums": self.regpa_row_sums.tolist(),
            "lambda1_over_sqrt_p": self.lambda1_ratio,
            "vif_max_over_p": self.vif_ratio,
            "scenario": self.scenario,
            "recommendation": self.recommendation,
            "differences": {k: v.tolist() for k, v in self.differences.items()},
            "agreement": {k: {"rmse": r, "tau": t} for k, (r, t) in self.agreement.items()},
            "warnings": list(self.warnings),
        }


MEASURE_ORDER = ("GD", "GCD", "RW", "CAR", "GDA_ORM")


def analyze_problem(problem: AugmentedProblem) -> AnalysisReport:
    from .realloc import named_measures

    p = problem.p
    notes = []
    with_gd = p <= MAX_PREDICTORS
    if not with_gd:
        notes.append(f"GD and GDA_ORM skipped: exact dominance is limited to p <= {MAX_PREDICTORS}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        found = named_measures(problem, include_dominance=with_gd)
    notes.extend(str(w.message) for w in caught)
    measures = {k: found[k] for k in MEASURE_ORDER if k in found}
    normalized = {k: v.normalized() for k, v in measures.items()}
    scen = classify_scenario(problem.corr)
    labels = list(problem.labels) if problem.labels else [f"x{i + 1}" for i in range(p)]
    diffs, agree = {}, {}
    if "GD" in measures:
        gd = measures["GD"].values
        for name in ("GCD", "RW"):
            diffs[f"{name}-GD"] = normalized[name] - normalized["GD"]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                agree[name] = (rmse(gd, measures[name].values), kendall_tau(gd, measures[name].values))
    return AnalysisReport(
        labels=labels,
        r_squared=problem.r_squared,
        measures=measures,
        normalized=normalized,
        vif=vif(problem.corr),
        regpa_row_sums=regpa(johnson(problem.corr)).row_sums(),
        lambda1_ratio=scen.lambda1_ratio,
        vif_ratio=scen.vif_ratio,
        scenario=scen.label,
        recommendation=RECOMMENDATIONS[scen.label],
        differences=diffs,
        agreement=agree,
        warnings=notes,
    )


def _report_rows(report: AnalysisReport) -> list:
    """(row name, values) pairs in display order; shares are percentages."""
    rows = [(f"{k} (%)", v) for k, v in report.normalized.items()]
    rows += [(f"{k} (%)", v) for k, v in report.differences.items()]
    rows.append(("RegPA row sum", report.regpa_row_sums))
    rows.append(("VIF", report.vif))
    return rows


def format_report(report: AnalysisReport) -> str:
    width = max(8, max(len(s) for s in report.labels) + 2)
    lines = [f"R^2 = {report.r_squared:.4f}", ""]
    head = f"{'':<16}" + "".join(f"{s:>{width}}" for s in report.labels)
    lines.append(head)
    lines.append("-" * len(head))
    for name, vals in _report_rows(report):
        lines.append(f"{name:<16}" + "".join(f"{round(float(v), 2) + 0.0:>{width}.2f}" for v in vals))
    lines.append("")
    for name, (r, t) in report.agreement.items():
        lines.append(f"{name} vs GD: RMSE {r:.4f}, Kendall tau {t:.3f}")
    lines.append(f"lambda1/sqrt(p) = {report.lambda1_ratio:.3f}, VIF_max/p = {report.vif_ratio:.3f}")
    lines.append(f"scenario {report.scenario}: {report.recommendation}")
    for w in report.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines)


def report_csv(report: AnalysisReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row"] + list(report.labels))
    for name, vals in report.measures.items():
        w.writerow([name] + [fmt(float(v)) for v in vals.values])
    for name, vals in _report_rows(report):
        w.writerow([name] + [fmt(float(v)) for v in vals])
    return buf.getvalue()


def load_problem(args) -> AugmentedProblem:
    if bool(args.corr) == bool(args.data):
        raise ValidationError("give exactly one of --corr or --data")
    if args.data:
        header, values = read_data_csv(args.data)
        if not args.response:
            raise ValidationError("--data needs --response <column name>")
        return ingest_dataset(values, header, args.response)
    labels, matrix = read_matrix_csv(args.corr)
    if args.response:
        if labels is None:
            raise ValidationError("--response needs a labelled correlation matrix")
        if args.response not in labels:
            raise ResponseColumnNotFound(f"response {args.response!r} not in {labels}")
        j = labels.index(args.response)
        order = [k for k in range(len(labels)) if k != j] + [j]
        matrix = matrix[np.ix_(order, order)]
        labels = [labels[k] for k in order]
    return AugmentedProblem.from_augmented(matrix, labels[:-1] if labels else None)


# ---------------------------------------------------------------------------
# commands


def build_config(args) -> SimulationConfig:
    entries = load_toml(args.config) if args.config else {}
    flags = {
        "p_min": args.p_min,
        "p_max": args.p_max,
        "n_ev": args.n_ev,
        "n_seeds": args.n_seeds,
        "n_responses": args.n_responses,
        "r_squared": args.r2,
        "master_seed": args.seed,
        "out_path": args.out,
        "orth_set": args.orth,
        "realloc_set": args.realloc,
        "per_response": True if args.per_response else None,
    }
    entries.update(normalize({k: v for k, v in flags.items() if v is not None}))
    try:
        return SimulationConfig(**entries).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(args) -> int:
    config = build_config(args)
    write_simulation(config, quiet=args.quiet)
    table = aggregate_table1(read_simulation_csv(config.out_path))
    if not args.quiet:
        print(format_table1(table))
    return EXIT_OK


def cmd_analyze(args) -> int:
    report = analyze_problem(load_problem(args))
    if args.format == "json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    elif args.format == "csv":
        text = report_csv(report)
    else:
        text = format_report(report) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


WINLOSS_COLUMNS = ["class", "p", "ev_index", "lambda1_over_sqrt_p", "winner", "statistic", "p_value", "n_pairs"]


def cmd_winloss(args) -> int:
    records = read_simulation_csv(args.input)
    classes = {"all": None, "mild": "mild", "severe": "severe"}
    results = {c: win_loss(records, args.metric, args.alpha, m) for c, m in classes.items()}
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(_csv_line(WINLOSS_COLUMNS))
            for c, outcomes in results.items():
                for o in outcomes:
                    fh.write(
                        _csv_line([c, o.p, o.ev_index, o.lambda1_ratio, o.winner, o.statistic, o.p_value, o.n_pairs])
                    )
    lines = [f"RW vs GCD on mean {args.metric}, Wilcoxon signed-rank at alpha={args.alpha}"]
    for c, outcomes in results.items():
        t = tally(outcomes, c, args.alpha)
        lines.append("")
        lines.append(f"[{c}] {t.total} sets: RW {t.wins_rw}, GCD {t.wins_gcd}, tie {t.ties}")
        if not outcomes:
            continue
        split = threshold_split(outcomes, args.alpha, label=f"{c}:")
        for side in ("below", "above"):
            s = split[side]
            frac = f"{s.rw_fraction:.3f}" if s.total else "n/a"
            lines.append(f"  {s.comparison}: n={s.total} RW win fraction {frac}")
        if not math.isnan(split["z"]):
            lines.append(f"  two-proportion z = {split['z']:.3f}, p = {split['p_value']:.4g}")
        for lo, hi, b in binned_tally(outcomes, args.alpha):
            lines.append(f"  [{lo:.2f}, {hi:.2f}): n={b.total:<5d} RW {b.wins_rw:<5d} GCD {b.wins_gcd:<5d} tie {b.ties}")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relimp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the Monte Carlo comparison and write per-cell records")
    sim.add_argument("--config", help="TOML file with simulation settings")
    sim.add_argument("--p-min", type=int)
    sim.add_argument("--p-max", type=int)
    sim.add_argument("--n-ev", type=int, help="eigenvalue sets per p (default: 1000 up to p=6, 2500 beyond)")
    sim.add_argument("--n-seeds", type=int)
    sim.add_argument("--n-responses", type=int)
    sim.add_argument("--r2", type=float)
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--out", help="output CSV (default simulation.csv)")
    sim.add_argument("--orth", help=f"comma-separated subset of {','.join(ORTH_ALL)}")
    sim.add_argument("--realloc", help=f"comma-separated subset of {','.join(REALLOC_ALL)}")
    sim.add_argument("--per-response", action="store_true", help="also write per-response rmse/tau rows")
    sim.add_argument("--quiet", action="store_true", help="do not print the summary table")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="importance measures for one dataset or correlation matrix")
    ana.add_argument("--corr", help="CSV augmented correlation matrix (response last unless --response)")
    ana.add_argument("--data", help="CSV of raw observations with a header row")
    ana.add_argument("--response", help="name of the response variable")
    ana.add_argument("--format", choices=("text", "csv", "json"), default="text")
    ana.add_argument("--out", help="write the report here instead of standard output")
    ana.set_defaults(func=cmd_analyze)

    wl = sub.add_parser("winloss", help="RW versus GCD per eigenvalue set from a simulation CSV")
    wl.add_argument("input", help="CSV written by simulate")
    wl.add_argument("--alpha", type=float, default=0.05)
    wl.add_argument("--metric", choices=("rmse", "tau"), default="rmse")
    wl.add_argument("--out", help="write per-set outcomes to this CSV")
    wl.set_defaults(func=cmd_winloss)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"relimp: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"relimp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"relimp: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
