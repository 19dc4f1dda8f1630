"""
Main module for the ipcwk command line application.
"""

import argparse
import json
import math
import sys

import numpy as np
import pandas as pd

from .bands import FixedBandwidth, box_grid, confidence_band
from .common import Common
from .dataio import read_points, read_truth, render_csv, render_dataset, write_outputs
from .errors import (
    AllPointsMissingError,
    ConfigError,
    DataIOError,
    DegenerateDenominatorError,
    EmptyWindowError,
    IpcwkError,
)
from .estimators import conditional_cdf, conditional_density, conditional_hazard, regression_curve
from .figures import band_figure, epsilon1_figure
from .run_config import OPTIONS, RunConfig, resolve_options
from .simulation import coverage_study, deviation_study, epsilon1_study, generate_sample
from .survival import km_censoring
from .version import VERSION


def _coordinates(point):
    return {f"x{j + 1}": float(value) for j, value in enumerate(point)}


def _points(run):
    if run.options.get("points"):
        points = read_points(run.options["points"])
        dim = run.data.d if run.data is not None else 1
        if points.shape[1] != dim:
            raise DataIOError(f"Evaluation points have dimension {points.shape[1]}, expected {dim}.")
        return points
    return box_grid(run.region(), run.number("grid", int))


def _emit(run, frame):
    """
    Routes the main table to --out, or to stdout.
    """
    text = render_csv(frame, run.provenance(), run.options["float_format"])
    if "out" in run.outputs:
        return {run.outputs["out"]: text}, ""
    return {}, text


def _summary(run, summary, outputs, stdout):
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if "summary" in run.outputs:
        outputs[run.outputs["summary"]] = text
        return outputs, stdout
    return outputs, stdout + text


def _check_missing(run, frame):
    missing = int((frame["flag"].str.contains("empty_window")).sum())
    if missing == len(frame):
        raise AllPointsMissingError("Every evaluation point has an empty window; the bandwidth is too small.")
    if missing:
        Common.warning(
            f"{missing} of {len(frame)} evaluations skipped, empty kernel window.",
            "Missing points",
            "Estimators",
            subcategory=run.subcommand,
            resource=str(run.dataset),
        )


def _km(run):
    g = km_censoring(run.data)
    frame = pd.DataFrame(g.table(), columns=["u", "G"])
    return _emit(run, frame)


def _fit(run):
    points = _points(run)
    rows = []
    for h in run.bandwidths():
        estimates = regression_curve(run.data, run.psi, points, h, run.kernel, run.g, _n_jobs(run))
        for point, estimate in zip(points, estimates):
            flag = "" if np.isfinite(estimate) else "empty_window"
            rows.append({**_coordinates(point), "h": float(h), "estimate": float(estimate), "flag": flag})
    frame = pd.DataFrame(rows)
    _check_missing(run, frame)
    return _emit(run, frame)


def _pointwise(run, evaluate, columns):
    t = run.number("t")
    if t is None:
        raise ConfigError("The response level --t is required.")
    cutoff = run.number("tau0")
    points = _points(run)
    rows = []
    for h in run.bandwidths():
        for point in points:
            row = {**_coordinates(point), "h": float(h), "t": t}
            flags = []
            try:
                row.update(evaluate(t, point, float(h)))
            except EmptyWindowError:
                row.update({column: math.nan for column in columns})
                flags.append("empty_window")
            except DegenerateDenominatorError:
                row.update({column: math.nan for column in columns})
                flags.append("degenerate_denominator")
            if cutoff is not None and t > cutoff:
                flags.append("beyond_tau0")
            row["flag"] = ";".join(flags)
            rows.append(row)
    frame = pd.DataFrame(rows)
    _check_missing(run, frame)
    return _emit(run, frame)


def _cdf(run):
    def evaluate(t, point, h):
        value = conditional_cdf(run.data, t, point, h, run.kernel, run.g)
        return {"estimate": value.value, "raw": value.raw}

    return _pointwise(run, evaluate, ("estimate", "raw"))


def _density(run):
    ell = run.number("ell")

    def evaluate(t, point, h):
        return {"estimate": conditional_density(run.data, t, point, h, ell, run.kernel, run.g)}

    return _pointwise(run, evaluate, ("estimate",))


def _hazard(run):
    ell = run.number("ell")
    guard = run.number("guard")

    def evaluate(t, point, h):
        return {"estimate": conditional_hazard(run.data, t, point, h, ell, run.kernel, run.g, guard)}

    return _pointwise(run, evaluate, ("estimate",))


def _truth_on(run, xs):
    if not run.options.get("truth"):
        return None
    x, values = read_truth(run.options["truth"])
    return np.interp(xs, x, values)


def _bands(run):
    points = _points(run)
    run.band.bandwidth.check(points, run.data.n)
    curve = confidence_band(run.data, run.psi, points, run.kernel, run.g, run.band, _n_jobs(run))
    frame = curve.to_frame()
    truth = _truth_on(run, points[:, 0]) if points.shape[1] == 1 else None
    if truth is not None:
        frame["truth"] = truth
    missing = int((~curve.valid).sum())
    if missing:
        Common.warning(
            f"{missing} of {len(points)} grid points missing.",
            "Missing points",
            "Bands",
            resource=str(run.dataset),
        )
    outputs, stdout = _emit(run, frame)
    if "svg" in run.outputs:
        outputs[run.outputs["svg"]] = band_figure(curve, Common.Configuration.scheme, truth, provenance=run.provenance())
    return outputs, stdout


def _generate(run):
    data = generate_sample(run.sim)
    text = render_dataset(data, run.provenance(), run.options["float_format"])
    outputs, stdout = ({run.outputs["out"]: text}, "") if "out" in run.outputs else ({}, text)
    summary = {
        "n": data.n,
        "censoring_rate": data.censoring_rate,
        "uncensored_fraction": 1.0 - data.censoring_rate,
        "provenance": run.provenance(),
    }
    if stdout:
        return outputs, stdout
    return _summary(run, summary, outputs, stdout)


def _sim_grid(run):
    region = run.band.region if run.band is not None else run.region()
    return box_grid(region, run.number("grid", int))


def _n_jobs(run):
    threads = run.number("threads", int)
    return threads if threads is not None else Common.threads()


def _figure1(run, h, grid):
    """
    Estimate, truth and band over the grid for the sample of replication 0.
    """
    data = generate_sample(run.sim.for_replication(0))
    band = run.band.with_bandwidth(FixedBandwidth(float(h))) if h is not None else run.band
    curve = confidence_band(data, run.sim.psi, grid, run.sim.kernel, run.sim.gspec, band)
    truth = run.sim.design.true_regression(grid[:, 0])
    frame = curve.to_frame()
    frame["truth"] = truth
    label = band.bandwidth.describe().replace(":", "_")
    directory = run.outputs["figures"]
    return {
        directory / f"figure1_{label}.csv": render_csv(frame, run.provenance(), run.options["float_format"]),
        directory / f"figure1_{label}.svg": band_figure(
            curve, Common.Configuration.scheme, truth, f"n={run.sim.n}, {band.bandwidth.describe()}", run.provenance()
        ),
    }


def _epsilon1(run):
    grid = _sim_grid(run)
    reps = run.number("reps", int, 100)
    h_values = run.bandwidths() if run.options.get("h") is not None or run.options.get("h_grid") else [0.15]
    reports = [
        (f"h={float(h):g}", epsilon1_study(run.sim, float(h), reps, grid, run.band, _n_jobs(run))) for h in h_values
    ]
    frames = []
    for (_, report), h in zip(reports, h_values):
        frame = report.to_frame()
        frame.insert(0, "h", float(h))
        frames.append(frame)
    outputs, stdout = ({}, "")
    if "out" in run.outputs:
        outputs, stdout = _emit(run, pd.concat(frames, ignore_index=True))
    if "figures" in run.outputs:
        rows = [
            {"h": float(h), **report.quantiles("epsilon1"), "median_abs": float(np.median(np.abs(report.values("epsilon1"))))}
            for (_, report), h in zip(reports, h_values)
        ]
        directory = run.outputs["figures"]
        outputs[directory / "figure2.csv"] = render_csv(pd.DataFrame(rows), run.provenance(), run.options["float_format"])
        outputs[directory / "figure2.svg"] = epsilon1_figure(
            reports, Common.Configuration.scheme, f"n={run.sim.n}, {reps} replications", run.provenance()
        )
        for h in h_values:
            outputs.update(_figure1(run, h, grid))
    summary = {"studies": [report.summary() for _, report in reports]}
    return _summary(run, summary, outputs, stdout)


def _coverage(run):
    grid = _sim_grid(run)
    reps = run.number("reps", int, 100)
    report = coverage_study(run.sim, run.band, reps, grid, run.number("inflation", float, 1.0), _n_jobs(run))
    outputs, stdout = ({}, "")
    if "out" in run.outputs:
        outputs, stdout = _emit(run, report.to_frame())
    if "figures" in run.outputs:
        outputs.update(_figure1(run, None, grid))
    return _summary(run, report.summary(), outputs, stdout)


def _deviation(run):
    grid = box_grid(run.region(), run.number("grid", int))
    h_values = run.bandwidths() if run.options.get("h") is not None or run.options.get("h_grid") else [0.1, 0.15, 0.2, 0.25]
    reps = run.number("reps", int, 100)
    report = deviation_study(run.sim, h_values, grid, reps, _n_jobs(run))
    outputs, stdout = ({}, "")
    if "out" in run.outputs:
        outputs, stdout = _emit(run, report.to_frame())
    return _summary(run, report.summary(), outputs, stdout)


def _logs(run):
    entries = Common.entries(run.number("limit", int), run.options.get("category"))
    return {}, "".join(json.dumps(entry, sort_keys=True, default=str) + "\n" for entry in entries)


HANDLERS = {
    "km": _km,
    "fit": _fit,
    "cdf": _cdf,
    "density": _density,
    "hazard": _hazard,
    "bands": _bands,
    "simulate generate": _generate,
    "simulate epsilon1": _epsilon1,
    "simulate coverage": _coverage,
    "simulate deviation": _deviation,
    "logs": _logs,
}


def run(cfg):
    """
    Executes a run. All outputs are rendered before the first one is written.

    Parameters
    ----------
    cfg : ipcwk.run_config.RunConfig
        The run configuration.

    Returns
    -------
    int
        The exit code, 0 on success.
    """
    outputs, stdout = HANDLERS[cfg.subcommand](cfg)
    write_outputs(outputs)
    if stdout:
        sys.stdout.write(stdout)
    if cfg.subcommand != "logs":
        Common.success(
            f"{cfg.subcommand} finished, {len(outputs)} files written.",
            "Run finished",
            "CLI",
            subcategory=cfg.subcommand,
            resource=str(cfg.dataset) if cfg.dataset is not None else None,
            echo=False,
            outputs=[str(path) for path in outputs],
            seed=cfg.seed,
        )
    return 0


def _common_parser():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="JSON file of options. Flags win over it on conflict.")
    parser.add_argument("--kernel", help='Kernel name: epanechnikov, box, triangular or "product:<p1>,<p2>,...".')
    parser.add_argument("--seed", type=int, help="Master seed.")
    parser.add_argument("--float-format", dest="float_format", help="printf format of floating point output.")
    parser.add_argument("--out", help="Main CSV output. Defaults to stdout.")
    return parser


def _estimation_parser():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("dataset", help="Dataset CSV with the header z,delta,x1..xd.")
    parser.add_argument("--h", type=float, nargs="+", help="Bandwidth(s).")
    parser.add_argument("--h-grid", dest="h_grid", help="Bandwidth grid lo:hi:steps.")
    parser.add_argument("--tau0", type=float, help="Working cutoff of the response.")
    parser.add_argument("--known-g", dest="known_g", help="CSV with the columns u,G of a known censoring distribution.")
    parser.add_argument("--points", help="CSV of evaluation points with the columns x1..xd.")
    parser.add_argument("--region", help="Evaluation box lo:hi[,lo:hi...]. Defaults to the covariate range.")
    parser.add_argument("--grid", type=int, help="Grid points per coordinate.")
    return parser


def _band_arguments(parser):
    parser.add_argument("--theta", type=float, help="Floor constant of the band logarithm, above 1.")
    parser.add_argument("--bandwidth", help="Band bandwidth rule fixed:h, power:A:delta0 or table:file.csv.")
    parser.add_argument("--c1", type=float, help="Lower constant of the tabulated bandwidth bound.")
    parser.add_argument("--c2", type=float, help="Upper constant of the tabulated bandwidth bound.")
    parser.add_argument("--reference-h", dest="reference_h", type=float, help="Reference bandwidth of the bound.")


def build_parser():
    """
    Builds the argument parser.

    Returns
    -------
    argparse.ArgumentParser
        The parser of the ipcwk command line.
    """
    parser = argparse.ArgumentParser(
        prog="ipcwk",
        description="Inverse-probability-of-censoring-weighted kernel estimators with simultaneous confidence bands.",
    )
    parser.add_argument("--version", action="version", version=f"ipcwk {VERSION}")
    parser.add_argument("--config-dir", dest="config_dir", help="Configuration directory. Defaults to IPCWK_CONFIG_DIR or ~/.config/ipcwk.")
    parser.add_argument("--quiet", action="store_true", help="Do not echo log messages to stderr.")
    parser.add_argument("--threads", type=int, help="Parallel workers. Defaults to IPCWK_THREADS or the configuration.")
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    estimation = _estimation_parser()

    commands.add_parser("km", parents=[common], help="Kaplan-Meier estimate of the censoring distribution.").add_argument(
        "dataset", help="Dataset CSV with the header z,delta,x1..xd."
    )
    fit = commands.add_parser("fit", parents=[common, estimation], help="Regression function estimate.")
    fit.add_argument("--psi", help="Response transform: identity or indicator:<t>.")
    for name, text in (
        ("cdf", "Conditional distribution function estimate."),
        ("density", "Conditional density estimate."),
        ("hazard", "Conditional hazard rate estimate."),
    ):
        sub = commands.add_parser(name, parents=[common, estimation], help=text)
        sub.add_argument("--t", type=float, required=True, help="Response level.")
        if name != "cdf":
            sub.add_argument("--ell", type=float, help="Response bandwidth.")
        if name == "hazard":
            sub.add_argument("--guard", type=float, help="Minimal distance of the distribution estimate from 1.")
    bands = commands.add_parser("bands", parents=[common, estimation], help="Simultaneous confidence bands.")
    bands.add_argument("--psi", help="Response transform: identity or indicator:<t>.")
    _band_arguments(bands)
    bands.add_argument("--svg", help="SVG figure of the estimate, band and truth.")
    bands.add_argument("--truth", help="CSV with the columns x,truth.")

    simulate = commands.add_parser("simulate", help="Simulation studies.")
    studies = simulate.add_subparsers(dest="study", required=True)
    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--n", type=int, help="Sample size.")
    sim.add_argument("--psi-threshold", dest="psi_threshold", type=float, help="Level t of psi(y) = 1{y <= t}.")
    sim.add_argument("--g-mode", dest="g_mode", choices=["kaplan-meier", "known"], help="Censoring weights.")
    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("--reps", type=int, help="Replications.")
    runs.add_argument("--grid", type=int, help="Grid points on the region.")
    runs.add_argument("--summary", help="JSON summary output. Defaults to stdout.")
    studies.add_parser("generate", parents=[common, sim], help="Draw one sample.")
    epsilon1 = studies.add_parser("epsilon1", parents=[common, sim, runs], help="Worst-point coverage gap study.")
    epsilon1.add_argument("--h", type=float, nargs="+", help="Bandwidth(s).")
    epsilon1.add_argument("--region", help="Region lo:hi, [-1, 1] by default.")
    _band_arguments(epsilon1)
    epsilon1.add_argument("--figures", help="Directory for figure CSV and SVG files.")
    epsilon1.add_argument("--truth", help="CSV with the columns x,truth replacing the regression function of the design.")
    coverage = studies.add_parser("coverage", parents=[common, sim, runs], help="Simultaneous coverage study.")
    coverage.add_argument("--region", help="Region lo:hi, [-1, 1] by default.")
    coverage.add_argument("--inflation", type=float, help="Half-width inflation factor.")
    _band_arguments(coverage)
    coverage.add_argument("--figures", help="Directory for figure CSV and SVG files.")
    coverage.add_argument("--truth", help="CSV with the columns x,truth replacing the regression function of the design.")
    deviation = studies.add_parser("deviation", parents=[common, sim, runs], help="Uniform-in-bandwidth deviation study.")
    deviation.add_argument("--h", type=float, nargs="+", help="Bandwidth(s).")
    deviation.add_argument("--h-grid", dest="h_grid", help="Bandwidth grid lo:hi:steps.")
    deviation.add_argument("--region", help="Region lo:hi, [-1, 1] by default.")

    logs = commands.add_parser("logs", help="Print stored log entries, newest first.")
    logs.add_argument("--limit", type=int, help="Maximal number of entries.")
    logs.add_argument("--category", help="Only entries of this category.")
    return parser


def main(argv=None):
    """
    Entrypoint for ipcwk.

    Parameters
    ----------
    argv : list(str), optional
        The arguments, sys.argv[1:] by default.

    Returns
    -------
    int
        The exit code: 0 on success, 2 for configuration errors, 3 for I/O errors, 4 for numeric errors.
    """
    args = build_parser().parse_args(argv)
    Common.quiet = args.quiet
    subcommand = f"simulate {args.study}" if args.command == "simulate" else args.command
    try:
        try:
            Common.initialize(args.config_dir)
        except OSError as error:
            raise DataIOError(f"Cannot open the configuration directory: {error.strerror or error}.") from error
        flags = {key: value for key, value in vars(args).items() if key in OPTIONS}
        options = resolve_options(flags, Common.Configuration, getattr(args, "config", None))
        return run(RunConfig.build(subcommand, options))
    except IpcwkError as error:
        print(json.dumps(error.as_dict(), sort_keys=True), file=sys.stderr)
        if Common.initialized:
            Common.log_exception(error, "CLI", subcategory=subcommand)
        return error.exit_code
