"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/split error, 3 contaminated
clean cell.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .audit import audit
from .errors import ContaminationError, LeakbenchError
from .metrics import GainRecord
from .runner import (
    GAIN_CSV_HEADER,
    ExperimentConfig,
    emit_plot_data,
    emit_report,
    load_report,
    recompute_gains,
    run_experiment,
)
from .series import describe, load_csv, seasonal_decompose
from .splitting import SplitSpec, split
from .synthetic import write_reference_csv
from .windowing import WindowConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONTAMINATED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="leakbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="descriptive stats + seasonal decomposition summary")
    p_stats.add_argument("csv", help="input CSV file")
    p_stats.add_argument("--value-column", default="meantemp")
    p_stats.add_argument("--date-column", default="date")
    p_stats.add_argument("--period", type=int, default=365, help="decomposition period in days")

    p_run = sub.add_parser("run", help="execute a full experiment grid")
    p_run.add_argument("config", help="experiment config (JSON)")
    p_run.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--keep-going", action="store_true")
    p_run.add_argument("--out", default=None, help="output directory (default ./runs/<name>)")

    p_audit = sub.add_parser("audit", help="split + contamination audit only, no training")
    p_audit.add_argument("config", help="experiment config (JSON)")
    p_audit.add_argument("--seed", type=int, default=None)
    p_audit.add_argument("--out", default=None, help="write audits.csv here")

    p_gain = sub.add_parser("gain", help="recompute gains from two prior cells.csv reports")
    p_gain.add_argument("clean_csv")
    p_gain.add_argument("leaky_csv")
    p_gain.add_argument("--out", default=None, help="write gains.csv here (default stdout)")

    p_report = sub.add_parser("report", help="re-emit a saved run as csv or json")
    p_report.add_argument("run_dir", help="directory containing report.json")
    p_report.add_argument("--format", choices=("csv", "json"), default="csv")
    p_report.add_argument("--out", default=None, help="output directory (default run dir)")

    p_synth = sub.add_parser("synth", help="write the bundled reference dataset as CSV")
    p_synth.add_argument("out_csv")

    return parser


def _cmd_stats(args) -> int:
    series = load_csv(args.csv, args.value_column, args.date_column)
    st = describe(series)
    print(f"series: {series.name}  ({series.timestamps[0]} .. {series.timestamps[-1]})")
    print(f"count   {st.count}")
    print(f"mean    {st.mean:.4f}")
    print(f"std     {st.std:.4f}")
    print(f"min     {st.min:.4f}")
    print(f"median  {st.median:.4f}")
    print(f"max     {st.max:.4f}")
    if len(series) >= 2 * args.period:
        dec = seasonal_decompose(series, args.period)
        profile = dec.seasonal[: args.period]
        print(f"decomposition (period {args.period}):")
        print(f"  trend range      {np.nanmin(dec.trend):.4f} .. {np.nanmax(dec.trend):.4f}")
        print(f"  seasonal span    {profile.min():.4f} .. {profile.max():.4f}")
        print(f"  residual std     {np.nanstd(dec.residual):.4f}")
    else:
        print(f"decomposition skipped: need >= {2 * args.period} points for period {args.period}")
    return EXIT_OK


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json_file(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "base_seed": args.seed})
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.out) if args.out else Path("runs") / cfg.name
    report = run_experiment(cfg, workers=args.workers, keep_going=args.keep_going)
    written = emit_report(report, out_dir, fmt="json")
    written += emit_report(report, out_dir, fmt="csv")
    written += emit_plot_data(report, out_dir)
    for path in written:
        print(path)
    if report.errors:
        print(f"{len(report.errors)} cell(s) failed (kept going):", file=sys.stderr)
        for msg in report.errors:
            print(f"  {msg}", file=sys.stderr)
    return EXIT_OK


def _cmd_audit(args) -> int:
    cfg = _load_config(args)
    series = load_csv(cfg.dataset, cfg.value_column, cfg.date_column)
    lines = ["window,lag,plan,mode,fold,train_pairs,test_pairs,overlap,contaminated_test_pairs"]
    contaminated_clean = False
    for w in cfg.windows:
        for lag in cfg.lags:
            for plan in cfg.plans:
                for mode in cfg.modes:
                    spec = SplitSpec(
                        plan=plan,
                        mode=mode,
                        window=WindowConfig(w, lag),
                        order=cfg.order,
                        seed=cfg.base_seed,
                    )
                    for res in split(series, spec):
                        rep = audit(res)
                        if mode == "clean" and rep.is_contaminated:
                            contaminated_clean = True
                        lines.append(
                            f"{w},{lag},{plan.label},{mode},{res.fold_index},"
                            f"{len(res.train)},{len(res.test)},"
                            f"{rep.overlap_count},{rep.contaminated_test_pairs}"
                        )
    body = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "audits.csv").write_text(body, encoding="utf-8")
        print(out / "audits.csv")
    else:
        print(body, end="")
    if contaminated_clean:
        print("error: clean cell audited contaminated", file=sys.stderr)
        return EXIT_CONTAMINATED
    return EXIT_OK


def _gain_csv(records: list[GainRecord]) -> str:
    lines = [GAIN_CSV_HEADER]
    for g in records:
        lines.append(
            f"{g.window},{g.lag},{g.plan},{g.rmse_clean!r},{g.rmse_leaky!r},"
            f"{g.gain_percent!r},{g.direction},{g.leakage_rank}"
        )
    return "\n".join(lines) + "\n"


def _cmd_gain(args) -> int:
    records = recompute_gains(args.clean_csv, args.leaky_csv)
    body = _gain_csv(records)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gains.csv").write_text(body, encoding="utf-8")
        print(out / "gains.csv")
    else:
        print(body, end="")
    return EXIT_OK


def _cmd_report(args) -> int:
    report = load_report(args.run_dir)
    out_dir = Path(args.out) if args.out else Path(args.run_dir)
    for path in emit_report(report, out_dir, fmt=args.format):
        print(path)
    return EXIT_OK


def _cmd_synth(args) -> int:
    print(write_reference_csv(args.out_csv))
    return EXIT_OK


_COMMANDS = {
    "stats": _cmd_stats,
    "run": _cmd_run,
    "audit": _cmd_audit,
    "gain": _cmd_gain,
    "report": _cmd_report,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ContaminationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTAMINATED
    except LeakbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
