"""
Module for reading and writing CSV datasets, tables and reports.

Every CSV written by ipcwk starts with "# " prefixed provenance lines, which all readers skip.
"""

import io
import json
import os
import tempfile
from pathlib import Path

import chardet
import numpy as np
import pandas as pd

from .errors import DataIOError, DatasetFormatError
from .survival import Dataset, StepFunction


def read_text(path):
    """
    Reads a text file, guessing the encoding if it is not UTF-8.

    Parameters
    ----------
    path : str or pathlib.Path
        The file to read.

    Returns
    -------
    str
        The decoded contents.

    Raises
    ------
    ipcwk.errors.DataIOError
        If the file cannot be read or decoded.
    """
    try:
        with open(path, "rb") as file:
            data = file.read()
    except OSError as error:
        raise DataIOError(f"Cannot read {path}: {error.strerror or error}.") from error
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError:
        pass
    result = chardet.detect(data)
    # Arbitrary lower limit for confidence.
    if result["encoding"] is None or result["confidence"] < 0.7:
        raise DataIOError(f"Cannot determine the text encoding of {path}.")
    return data.decode(result["encoding"])


def _content_lines(text):
    lines = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            lines.append((number, stripped))
    return lines


def parse_dataset(path):
    """
    Parses a dataset CSV with the header z,delta,x1[,x2,...].

    Parameters
    ----------
    path : str or pathlib.Path
        The dataset file.

    Returns
    -------
    ipcwk.survival.Dataset
        The dataset, with d inferred from the header.

    Raises
    ------
    ipcwk.errors.DatasetFormatError
        On a bad header, a malformed row or a censoring indicator other than 0 or 1. The offending line number is reported.
    """
    lines = _content_lines(read_text(path))
    if not lines:
        raise DatasetFormatError(f"{path} is empty.")
    header_line, header = lines[0]
    columns = [column.strip() for column in header.split(",")]
    dim = len(columns) - 2
    expected = ["z", "delta"] + [f"x{j + 1}" for j in range(dim)]
    if dim < 1 or columns != expected:
        raise DatasetFormatError(
            f"Expected header {','.join(expected if dim >= 1 else ['z', 'delta', 'x1'])}, got {header!r}.",
            line=header_line,
        )
    rows = lines[1:]
    if not rows:
        raise DatasetFormatError(f"{path} has no observations.")
    for number, row in rows:
        fields = row.split(",")
        if len(fields) != len(columns):
            raise DatasetFormatError(
                f"Expected {len(columns)} fields, got {len(fields)}.", line=number
            )
    frame = pd.read_csv(
        io.StringIO("\n".join(row for _, row in rows)),
        header=None,
        names=columns,
        dtype=str,
        skipinitialspace=True,
    )
    numbers = [number for number, _ in rows]
    values = frame.apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1).to_numpy()
    if bad.any():
        idx = int(np.argmax(bad))
        raise DatasetFormatError(f"Malformed row {rows[idx][1]!r}.", line=numbers[idx])
    delta = values["delta"].to_numpy()
    wrong = ~np.isin(delta, (0, 1))
    if wrong.any():
        idx = int(np.argmax(wrong))
        raise DatasetFormatError(
            f"Censoring indicator must be 0 or 1, got {frame['delta'].iloc[idx]}.", line=numbers[idx]
        )
    return Dataset(
        values["z"].to_numpy(dtype=float),
        delta.astype(np.int8),
        values[expected[2:]].to_numpy(dtype=float),
    )


def dataset_frame(data):
    """
    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The dataset.

    Returns
    -------
    pandas.DataFrame
        Columns z, delta, x1..xd.
    """
    columns = {"z": data.z, "delta": data.delta.astype(int)}
    for j in range(data.d):
        columns[f"x{j + 1}"] = data.x[:, j]
    return pd.DataFrame(columns)


def render_csv(frame, meta=None, float_format="%.17g"):
    """
    Renders a table as CSV text, preceded by provenance lines.

    Parameters
    ----------
    frame : pandas.DataFrame
        The table.
    meta : dict, optional
        Provenance entries, each written as "# key: <json>".
    float_format : str
        The printf format of floating point cells. The default round-trips every double exactly.

    Returns
    -------
    str
        The CSV text.
    """
    header = "".join(
        f"# {key}: {json.dumps(value, sort_keys=True, default=str)}\n" for key, value in (meta or {}).items()
    )
    return header + frame.to_csv(index=False, float_format=float_format, lineterminator="\n", na_rep="nan")


def render_dataset(data, meta=None, float_format="%.17g"):
    """
    Renders a dataset as CSV text.

    See documentation of render_csv() for parameter descriptions.
    """
    return render_csv(dataset_frame(data), meta, float_format)


def write_outputs(outputs):
    """
    Commits rendered outputs. Every file is first written next to its target and then moved into place, so that a failure leaves no
    partially written file.

    Parameters
    ----------
    outputs : dict
        Maps target paths to their text (str) or binary (bytes) contents.

    Raises
    ------
    ipcwk.errors.DataIOError
        If a file cannot be written.
    """
    staged = []
    try:
        for target, content in outputs.items():
            target = Path(target)
            mode = "wb" if isinstance(content, bytes) else "w"
            handle, temp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
            staged.append((temp, target))
            if mode == "wb":
                with os.fdopen(handle, mode) as file:
                    file.write(content)
            else:
                with os.fdopen(handle, mode, encoding="utf-8", newline="") as file:
                    file.write(content)
        for temp, target in staged:
            os.replace(temp, target)
    except OSError as error:
        for temp, _ in staged:
            if os.path.exists(temp):
                os.unlink(temp)
        raise DataIOError(f"Cannot write {error.filename or 'output'}: {error.strerror or error}.") from error


def write_dataset(data, path, meta=None, float_format="%.17g"):
    """
    Writes a dataset CSV which parse_dataset() reads back unchanged.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The dataset.
    path : str or pathlib.Path
        The target file.
    meta : dict, optional
        Provenance entries.
    float_format : str
        The printf format of floating point cells.
    """
    write_outputs({path: render_dataset(data, meta, float_format)})


def read_table(path, required):
    """
    Reads a numeric CSV table.

    Parameters
    ----------
    path : str or pathlib.Path
        The table file.
    required : list(str)
        Columns which must be present.

    Returns
    -------
    pandas.DataFrame
        The table, with float columns.
    """
    text = read_text(path)
    try:
        frame = pd.read_csv(io.StringIO(text), comment="#", skip_blank_lines=True, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise DataIOError(f"Malformed table {path}: {error}.") from error
    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise DataIOError(f"Table {path} lacks the columns {', '.join(missing)}.")
    if frame.empty:
        raise DataIOError(f"Table {path} has no rows.")
    values = frame.apply(pd.to_numeric, errors="coerce")
    _require_numeric(values, required, path)
    return values


def _require_numeric(frame, columns, path):
    if frame[list(columns)].isna().to_numpy().any():
        raise DataIOError(f"Table {path} has missing or non-numeric entries.")


def _coordinate_columns(frame):
    columns = []
    while f"x{len(columns) + 1}" in frame.columns:
        columns.append(f"x{len(columns) + 1}")
    if not columns and "x" in frame.columns:
        columns = ["x"]
    if not columns:
        raise DataIOError("A point table needs the columns x1..xd (or x).")
    return columns


def read_points(path):
    """
    Reads evaluation points.

    Parameters
    ----------
    path : str or pathlib.Path
        A CSV with the columns x1..xd (or x for d = 1).

    Returns
    -------
    numpy.ndarray
        The points, shape (m, d).
    """
    frame = read_table(path, [])
    columns = _coordinate_columns(frame)
    _require_numeric(frame, columns, path)
    return frame[columns].to_numpy(dtype=float)


def read_known_g(path):
    """
    Reads a known censoring distribution.

    Parameters
    ----------
    path : str or pathlib.Path
        A CSV with the columns u and G, the value of G from u onwards.

    Returns
    -------
    ipcwk.survival.StepFunction
        G, equal to 0 left of the first tabulated point.
    """
    frame = read_table(path, ["u", "G"])
    values = frame["G"].to_numpy(dtype=float)
    if np.any((values < 0) | (values > 1)):
        raise DataIOError(f"Censoring distribution values in {path} must lie in [0, 1].")
    g = StepFunction.from_table(frame["u"].to_numpy(dtype=float), values)
    if not g.is_nondecreasing():
        raise DataIOError(f"The censoring distribution in {path} is not nondecreasing.")
    return g


def read_truth(path):
    """
    Reads a tabulated regression function.

    Parameters
    ----------
    path : str or pathlib.Path
        A CSV with the columns x and truth.

    Returns
    -------
    tuple(numpy.ndarray, numpy.ndarray)
        The points and the values.
    """
    frame = read_table(path, ["x", "truth"])
    return frame["x"].to_numpy(dtype=float), frame["truth"].to_numpy(dtype=float)


def read_bandwidth_table(path):
    """
    Reads per-point bandwidths H_n(x).

    Parameters
    ----------
    path : str or pathlib.Path
        A CSV with the columns x1..xd (or x) and h.

    Returns
    -------
    tuple(numpy.ndarray, numpy.ndarray)
        The points of shape (k, d) and the bandwidths of shape (k,).
    """
    frame = read_table(path, ["h"])
    columns = _coordinate_columns(frame)
    _require_numeric(frame, columns, path)
    return frame[columns].to_numpy(dtype=float), frame["h"].to_numpy(dtype=float)


def read_json(path):
    """
    Reads a JSON object, such as a --config file.

    Parameters
    ----------
    path : str or pathlib.Path
        The file.

    Returns
    -------
    dict
        The object.
    """
    try:
        content = json.loads(read_text(path))
    except json.JSONDecodeError as error:
        raise DataIOError(f"Malformed JSON in {path}, line {error.lineno}: {error.msg}.") from error
    if not isinstance(content, dict):
        raise DataIOError(f"{path} must hold a JSON object.")
    return content
