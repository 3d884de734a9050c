"""Command-line front end: one simulation or a (distance x rng-run) sweep.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ScenarioConfig, apply_overrides, load_config_file
from .channel import CHANNEL_TRACE_HEADER
from .engine import (
    MAC_TRACE_HEADER,
    PHY_TRACE_HEADER,
    RESULTS_HEADER,
    AggregateRow,
    Simulation,
    StatsRecord,
    SweepResult,
    sweep,
)

OUT_DIR_ENV = "NRMIMO_OUT_DIR"
DEFAULT_DISTANCE_M = 10.0


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _run_list(text: str) -> list[int]:
    """Comma-separated run indices; ``a-b`` expands to an inclusive range."""
    runs: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                if hi < lo:
                    raise ValueError
                runs.extend(range(lo, hi + 1))
            else:
                runs.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid run list {text!r}") from None
    return runs


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nrmimo",
        description="Slot-level downlink simulation of 2-stream MIMO over dual-polarized subarrays.",
    )
    p.add_argument("--config", metavar="FILE", help="key = value scenario file, applied before flags (default: none)")
    p.add_argument("--distance-m", type=float, help=f"gNB-UE 2D distance in meters (default: {DEFAULT_DISTANCE_M:g})")
    p.add_argument("--ri-scheme", choices=("fixed", "adaptive"), help="rank indicator scheme (default: adaptive)")
    p.add_argument("--fixed-ri", type=int, choices=(1, 2), help="RI used by the fixed scheme (default: 1)")
    p.add_argument("--threshold1-db", type=float, help="adaptive RI threshold for 1 -> 2 streams (default: 7)")
    p.add_argument("--threshold2-db", type=float, help="adaptive RI threshold for staying at 2 streams (default: 12)")
    p.add_argument("--rng-run", type=int, help="random run index (default: 1)")
    p.add_argument("--scenario", choices=("UMi",), help="3GPP propagation scenario (default: UMi)")
    p.add_argument("--mcs-table", type=int, choices=(2,), help="NR MCS table (default: 2)")
    p.add_argument("--rho", type=float, help="inter-stream interference ratio in [0, 1] (default: 0)")
    p.add_argument("--duration-s", type=float, help="simulated time in seconds (default: 2)")
    p.add_argument(
        "--out-dir",
        default=os.environ.get(OUT_DIR_ENV, "results"),
        help=f"output directory (default: ${OUT_DIR_ENV} or ./results)",
    )
    p.add_argument("--distances", type=_float_list, help="sweep: comma-separated distances in meters (default: none, single run)")
    p.add_argument("--rng-runs", type=_run_list, help="sweep: run indices, e.g. 1-20 or 1,3,5 (default: the --rng-run value)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps (default: 1)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any scenario field, e.g. traffic.offered_rate_bps=1e8; repeatable (default: none)")
    p.add_argument("--traces", action="store_true",
                   help="single run only: also write phy/mac/channel trace CSVs (default: off)")
    return p


def parse_and_validate(argv: Optional[Sequence[str]] = None):
    """Parse ``argv`` into (args, ScenarioConfig). Usage problems exit with status 2."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _build_config(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, KeyError, TypeError) as exc:
        parser.error(f"invalid configuration: {exc}")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    if args.traces and (args.distances or args.rng_runs):
        parser.error("--traces cannot be combined with --distances/--rng-runs")
    return args, config


def _build_config(args) -> ScenarioConfig:
    overrides: dict[str, object] = {}
    if args.config:
        try:
            overrides.update(load_config_file(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read --config {args.config}: {exc}") from None
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()

    scheme = args.ri_scheme or overrides.get("ri.mode")
    if args.fixed_ri is not None and scheme is not None and str(scheme).lower() == "adaptive":
        raise UsageError("--fixed-ri cannot be used with --ri-scheme adaptive")
    flag_map = {
        "distance_m": args.distance_m,
        "ri.mode": args.ri_scheme,
        "ri.fixed_ri": args.fixed_ri,
        "ri.threshold1_db": args.threshold1_db,
        "ri.threshold2_db": args.threshold2_db,
        "rng_run": args.rng_run,
        "scenario": args.scenario,
        "mcs_table": args.mcs_table,
        "rho": args.rho,
        "sim_duration_s": args.duration_s,
    }
    for key, value in flag_map.items():
        if value is not None:
            overrides[key] = value
    if args.fixed_ri is not None and scheme is None:
        overrides["ri.mode"] = "fixed"
    return apply_overrides(ScenarioConfig(), overrides)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _record_row(r: StatsRecord) -> list[str]:
    return [f"{r.distance_m:g}", str(r.rng_run), _fmt(r.throughput_mbps), _fmt(r.mean_delay_ms),
            _fmt(r.mean_jitter_ms), str(r.tx_bytes), str(r.rx_bytes), _fmt(r.mean_ri)]


def _aggregate_row(a: AggregateRow) -> list[str]:
    return [f"{a.distance_m:g}", "mean", _fmt(a.throughput_mbps), _fmt(a.mean_delay_ms),
            _fmt(a.mean_jitter_ms), _fmt(a.tx_bytes), _fmt(a.rx_bytes), _fmt(a.mean_ri)]


def results_csv(result: StatsRecord | SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    if isinstance(result, StatsRecord):
        w.writerow(_record_row(result))
    else:
        for agg in result.aggregates:
            for r in result.records:
                if r.distance_m == agg.distance_m:
                    w.writerow(_record_row(r))
            w.writerow(_aggregate_row(agg))
    return buf.getvalue()


def summary_text(result: StatsRecord | SweepResult, config: ScenarioConfig) -> str:
    ri = config.ri
    scheme = f"fixed RI={ri.fixed_ri}" if ri.mode.value == "fixed" else (
        f"adaptive RI (T1={ri.threshold1_db:g} dB, T2={ri.threshold2_db:g} dB)")
    lines = [f"Scenario: {config.scenario}, {config.fc_ghz:g} GHz, {config.bandwidth_mhz:g} MHz, {scheme}, rho={config.rho:g}"]
    if isinstance(result, StatsRecord):
        lines += [
            f"Distance: {result.distance_m:g} m, rng run {result.rng_run}",
            f"  Tx Bytes:   {result.tx_bytes}",
            f"  Rx Bytes:   {result.rx_bytes}",
            f"  Throughput: {result.throughput_mbps:.6f} Mbps",
            f"  Mean delay:  {result.mean_delay_ms:.6f} ms",
            f"  Mean jitter:  {result.mean_jitter_ms:.6f} ms",
            f"  Mean RI:    {result.mean_ri:.4f}",
        ]
    else:
        lines.append(f"Sweep over {len(result.aggregates)} distances x {result.aggregates[0].n_runs} runs")
        for a in result.aggregates:
            lines.append(
                f"  {a.distance_m:>8g} m: throughput {a.throughput_mbps:.6f} Mbps (std {a.throughput_std_mbps:.6f}), "
                f"delay {a.mean_delay_ms:.6f} ms, jitter {a.mean_jitter_ms:.6f} ms, "
                f"tx {a.tx_bytes:.1f} B, rx {a.rx_bytes:.1f} B, mean RI {a.mean_ri:.4f}"
            )
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(_fmt(v) if isinstance(v, float) else v for v in row)


def emit_outputs(result: StatsRecord | SweepResult, config: ScenarioConfig, out_dir, traces=None, stream=None) -> str:
    """Write summary.txt and results.csv (plus optional traces) and echo the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summary_text(result, config)
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    (out / "results.csv").write_text(results_csv(result), encoding="utf-8")
    if traces is not None:
        _write_csv(out / "phy_trace.csv", PHY_TRACE_HEADER, traces.phy)
        _write_csv(out / "mac_trace.csv", MAC_TRACE_HEADER, traces.mac)
        _write_csv(out / "channel_trace.csv", CHANNEL_TRACE_HEADER, traces.channel)
    print(summary, end="", file=stream or sys.stdout)
    return summary


def main(argv: Optional[Sequence[str]] = None) -> int:
    args, config = parse_and_validate(argv)
    try:
        if args.distances or args.rng_runs:
            distances = args.distances or [config.distance_m]
            runs = args.rng_runs or [config.rng_run]
            result = sweep(config, distances, runs, jobs=args.jobs)
            emit_outputs(result, config, args.out_dir)
        else:
            sim = Simulation(config, trace=args.traces)
            result = sim.run()
            emit_outputs(result, config, args.out_dir, traces=sim.traces)
    except OSError as exc:
        print(f"nrmimo: error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"nrmimo: simulation failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
