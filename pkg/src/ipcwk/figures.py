"""
Module for the static SVG figures: estimate, truth and band curves, and boxplots of the worst-point coverage gap.
"""

import io
import json

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .errors import DimensionMismatchError

SVG_SALT = "ipcwk"


def _render(figure, provenance=None):
    metadata = {"Date": None}
    if provenance:
        metadata["Description"] = json.dumps(provenance, sort_keys=True, default=str)
    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        figure.savefig(buffer, format="svg", metadata=metadata)
    return buffer.getvalue().decode("utf-8")


def _figure(style):
    return Figure(figsize=(style["figure"]["width"], style["figure"]["height"]))


def band_figure(curve, style, truth=None, title=None, provenance=None):
    """
    Plots an estimated curve with its band, and the true curve if known.

    Parameters
    ----------
    curve : ipcwk.bands.EstimateCurve
        A curve over a one dimensional grid. Missing points leave gaps.
    style : ipcwk.config.scheme.Scheme
        The figure style.
    truth : array-like, optional
        The true regression function on the grid.
    title : str, optional
        The figure title.
    provenance : dict, optional
        Written as JSON into the SVG description.

    Returns
    -------
    str
        The SVG document.
    """
    xs = curve.x
    if xs.shape[1] != 1:
        raise DimensionMismatchError("Band figures are only drawn for d = 1.")
    xs = xs[:, 0]
    figure = _figure(style)
    axes = figure.add_subplot()
    axes.plot(xs, curve.estimates, label="estimate", **style.line("estimate"))
    band = style.line("band")
    axes.plot(xs, curve.estimates - curve.halfwidths, label="band", **band)
    axes.plot(xs, curve.estimates + curve.halfwidths, **band)
    if truth is not None:
        axes.plot(xs, np.asarray(truth, dtype=float), label="truth", **style.line("truth"))
    axes.set_xlabel("x")
    if title:
        axes.set_title(title)
    axes.legend()
    return _render(figure, provenance)


def epsilon1_figure(reports, style, title=None, provenance=None):
    """
    Boxplots of the worst-point coverage gap, whiskers at the 5% and 95% quantiles.

    Parameters
    ----------
    reports : list(tuple(str, ipcwk.simulation.SimReport))
        Labelled epsilon1 study reports, one box each.
    style : ipcwk.config.scheme.Scheme
        The figure style.
    title : str, optional
        The figure title.
    provenance : dict, optional
        Written as JSON into the SVG description.

    Returns
    -------
    str
        The SVG document.
    """
    stats = []
    for label, report in reports:
        quantiles = report.quantiles("epsilon1")
        stats.append(
            {
                "label": label,
                "whislo": quantiles["q5"],
                "q1": quantiles["q25"],
                "med": quantiles["q50"],
                "q3": quantiles["q75"],
                "whishi": quantiles["q95"],
                "fliers": [],
            }
        )
    figure = _figure(style)
    axes = figure.add_subplot()
    box = style["boxplot"]
    axes.bxp(
        stats,
        showfliers=False,
        patch_artist=True,
        boxprops={"facecolor": box["facecolor"], "edgecolor": box["edgecolor"]},
        medianprops={"color": box["edgecolor"]},
    )
    axes.axhline(0.0, color="#808080", linewidth=0.8)
    axes.set_ylabel("epsilon1")
    if title:
        axes.set_title(title)
    return _render(figure, provenance)
