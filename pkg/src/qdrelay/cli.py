"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 analysis error. ``report-diff``
exits 1 when the reports differ.
"""

import argparse
import json
import sys
import time

from ._validation import ConfigurationError, ValidationError
from .config import (
    load_config, parse_quantity, preset_names, preset_text, validate_config, with_overrides,
)
from .correlator import (
    AnalysisError, Window, clock_phase_gate, clocked_g2_grid, g2_histogram, g3_grid, teleport_fidelity,
    window_sweep, windowed_g2_zero,
)
from .pipeline import entanglement_streams, run_pipeline
from .report import build_report, diff_reports, load_report, mean_fidelity, to_json_value, write_report
from .source import ClockConfig
from .tags import channel_times, read_tags
from .tomography import TomoCounts, assemble_counts, bootstrap_sigma, mle_reconstruct

EXIT_OK, EXIT_DIFFERENT, EXIT_CONFIG, EXIT_ANALYSIS = 0, 1, 2, 3


def _config_source(args):
    if args.config and args.preset:
        raise ConfigurationError("give either --config or --preset, not both")
    if args.config:
        source = args.config
    elif args.preset:
        source = preset_text(args.preset)
    else:
        raise ConfigurationError("one of --config or --preset is required")
    if not args.set:
        return source
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set {item!r}: expected section.key=value")
        overrides[key.strip()] = value.strip()
    return with_overrides(source, overrides)


def _emit(obj):
    print(json.dumps(to_json_value(obj), sort_keys=True, indent=1))


def cmd_run(args):
    cfg = load_config(_config_source(args), seed=args.seed)
    start = time.perf_counter()
    output = run_pipeline(cfg, threads=args.threads)
    report = build_report(cfg, output, wall_clock=time.perf_counter() - start)
    tags = output.tags if cfg.output.write_tags else None
    path = write_report(report, args.out, tags, output.duration)
    failed = [name for name, sec in report.sections.items() if sec["status"] == "error"]
    for name in failed:
        print(f"{name}: {report.sections[name]['error']}", file=sys.stderr)
    print(path)
    return EXIT_ANALYSIS if failed else EXIT_OK


def cmd_validate(args):
    diagnostics = validate_config(_config_source(args))
    for line in diagnostics:
        print(line)
    return EXIT_CONFIG if diagnostics else EXIT_OK


def _clock(args, duration):
    rate = parse_quantity(args.rate, "frequency", "--rate")
    period = 1e3 / rate
    n_cycles = max(int(round(duration / period)), 1)
    return ClockConfig(repetition_rate=rate, pulse_fwhm=min(160.0, period / 2), n_cycles=n_cycles,
                       epoch=parse_quantity(args.epoch, "time", "--epoch"))


def cmd_g2(args):
    tags, duration = read_tags(args.tags)
    a, b = channel_times(tags, args.a), channel_times(tags, args.b)
    hist = g2_histogram(a, b, parse_quantity(args.bin, "time", "--bin"),
                        parse_quantity(args.range, "time", "--range"), duration=duration)
    out = {"singles_a": a.size, "singles_b": b.size, "normalization_defined": hist.normalization_defined}
    if args.rate:
        period = 1e3 / parse_quantity(args.rate, "frequency", "--rate")
        out["g2_zero"] = windowed_g2_zero(hist, period, period / 2)
    if args.csv:
        hist.to_csv(args.csv)
    _emit(out)
    return EXIT_OK


def cmd_grid(args):
    tags, duration = read_tags(args.tags)
    clock = _clock(args, duration)
    grid = clocked_g2_grid(channel_times(tags, args.a), channel_times(tags, args.b), clock,
                           parse_quantity(args.bin, "time", "--bin"))
    if args.csv:
        grid.to_csv(args.csv)
    _emit({"g2_block_zero": grid.extra["g2_block_zero"], "g2_block_sigma": grid.extra["g2_block_sigma"],
           "detected_period": grid.extra["detected_period"], "period_warning": grid.extra["period_warning"]})
    return EXIT_OK


def cmd_tomo(args):
    if bool(args.counts) == bool(args.tags):
        raise ConfigurationError("give exactly one of --counts or --tags")
    if args.counts:
        counts = TomoCounts.from_csv(args.counts)
    else:
        tags, duration = read_tags(args.tags)
        clock = _clock(args, duration)
        xx_tags, x_tags = entanglement_streams({ch: channel_times(tags, ch) for ch in range(4)}, clock)
        window = Window(parse_quantity(args.center, "time", "--center"),
                        parse_quantity(args.window, "time", "--window"))
        counts = assemble_counts(xx_tags, x_tags, window)
    if counts.total == 0:
        raise AnalysisError("no coincidences to reconstruct")
    res = mle_reconstruct(counts)
    out = res.to_dict()
    if args.bootstrap:
        out["fidelity_sigma"], out["concurrence_sigma"] = bootstrap_sigma(counts, n_boot=args.bootstrap)
    _emit(out)
    return EXIT_OK


def cmd_teleport(args):
    tags, duration = read_tags(args.tags)
    clock = _clock(args, duration)
    h, v = channel_times(tags, args.h), channel_times(tags, args.v)
    if args.gate:
        gate = parse_quantity(args.gate, "time", "--gate")
        centre = parse_quantity(args.gate_center, "time", "--gate-center")
        h = h[clock_phase_gate(h, clock, centre, gate)]
        v = v[clock_phase_gate(v, clock, centre, gate)]
    kw = dict(bin_width=4, clock_period=clock.period)
    pass_grid = g3_grid(h, v, channel_times(tags, args.pass_channel),
                        bob_offset=parse_quantity(args.pass_offset, "time", "--pass-offset"), **kw)
    fail_grid = g3_grid(h, v, channel_times(tags, args.fail_channel),
                        bob_offset=parse_quantity(args.fail_offset, "time", "--fail-offset"), **kw)
    window = Window(0.0, parse_quantity(args.window, "time", "--window"))
    f, s = teleport_fidelity(pass_grid, fail_grid, window)
    _emit({"fidelity": f, "sigma": s, "window": window.width, "heralds": pass_grid.extra["n_heralds"],
           "pass_window_counts": pass_grid.window_sum(window.width),
           "fail_window_counts": fail_grid.window_sum(window.width),
           "sweep": window_sweep(pass_grid, fail_grid, (85.0, 96.0, 228.0))})
    return EXIT_OK


def cmd_report_diff(args):
    diffs = diff_reports(load_report(args.first), load_report(args.second), rtol=args.rtol, atol=args.atol)
    for line in diffs:
        print(line)
    return EXIT_DIFFERENT if diffs else EXIT_OK


def cmd_mean_fidelity(args):
    mean, sigma, excess = mean_fidelity([load_report(p) for p in args.reports])
    _emit({"mean_fidelity": mean, "sigma": sigma, "classical_excess_sigmas": excess})
    return EXIT_OK


def cmd_presets(args):
    for name in preset_names():
        print(name)
    return EXIT_OK


def _config_flags(p):
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--preset", help="name of a shipped preset")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one config entry, e.g. 'clock.n_cycles=100000'")


def _clock_flags(p, rate_required=True):
    p.add_argument("--rate", required=rate_required, help="clock repetition rate, e.g. '1.07 GHz'")
    p.add_argument("--epoch", default="0 ps", help="time of the first pulse centre")


def build_parser():
    parser = argparse.ArgumentParser(prog="qdrelay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="simulate and analyse one experiment")
    _config_flags(p)
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a configuration without simulating")
    _config_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("g2", help="g2 histogram of two channels of a tag file")
    p.add_argument("tags")
    p.add_argument("--a", type=int, default=4)
    p.add_argument("--b", type=int, default=5)
    p.add_argument("--bin", default="40 ps")
    p.add_argument("--range", default="50 ns")
    p.add_argument("--rate", help="clock rate for the windowed g2(0)")
    p.add_argument("--csv", help="write the histogram to this CSV file")
    p.set_defaults(func=cmd_g2)

    p = sub.add_parser("grid", help="clocked two-time grid and block g2")
    p.add_argument("tags")
    p.add_argument("--a", type=int, default=4)
    p.add_argument("--b", type=int, default=5)
    p.add_argument("--bin", default="40 ps")
    _clock_flags(p)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("tomo", help="maximum-likelihood tomography")
    p.add_argument("--counts", help="TomoCounts CSV (setting, outcome, count)")
    p.add_argument("--tags", help="tag file with the entanglement channel layout")
    _clock_flags(p, rate_required=False)
    p.add_argument("--window", default="96 ps")
    p.add_argument("--center", default="0 ps")
    p.add_argument("--bootstrap", type=int, default=0)
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("teleport", help="triple-coincidence fidelity from a tag file")
    p.add_argument("tags")
    _clock_flags(p)
    p.add_argument("--h", type=int, default=0)
    p.add_argument("--v", type=int, default=1)
    p.add_argument("--pass-channel", type=int, default=2)
    p.add_argument("--fail-channel", type=int, default=3)
    p.add_argument("--pass-offset", default="0 ps")
    p.add_argument("--fail-offset", default="0 ps")
    p.add_argument("--window", default="228 ps")
    p.add_argument("--gate", help="clock-phase gate width on Charlie clicks")
    p.add_argument("--gate-center", default="0 ps")
    p.set_defaults(func=cmd_teleport)

    p = sub.add_parser("report-diff", help="compare two reports value by value")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--rtol", type=float, default=0.0)
    p.add_argument("--atol", type=float, default=0.0)
    p.set_defaults(func=cmd_report_diff)

    p = sub.add_parser("mean-fidelity", help="three-basis mean teleportation fidelity")
    p.add_argument("reports", nargs=3)
    p.set_defaults(func=cmd_mean_fidelity)

    p = sub.add_parser("presets", help="list shipped presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "tomo" and args.tags and not args.rate:
            raise ConfigurationError("--rate is required with --tags")
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AnalysisError, ValidationError, OSError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
