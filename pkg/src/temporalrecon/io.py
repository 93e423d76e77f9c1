"""CSV input and output.

Floats are written with ``repr`` so a file read back reproduces the exact
in-memory values. Missing values are written as ``NA``. An optional first
line starting with ``#`` carries run metadata.
"""

import csv
import hashlib
import io
import math

import numpy as np

from .errors import InsufficientData, ParseError

NA = "NA"


def format_value(v):
    if v is None:
        return NA
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return NA if math.isnan(v) else repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def parse_value(text):
    """Inverse of :func:`format_value` for numbers, booleans and ``NA``."""
    if text == NA:
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def render_csv(rows, columns, header=None):
    """Render dict rows as CSV text (``\\n`` line endings)."""
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns, header=None):
    text = render_csv(rows, columns, header)
    if path is None or path == "-":
        print(text, end="")
        return text
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text


def read_csv(path):
    """Read a file produced by :func:`write_csv`; returns ``(header, rows)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    header = None
    if lines and lines[0].startswith("#"):
        header = lines[0][1:].strip()
        lines = lines[1:]
    reader = csv.DictReader(lines)
    rows = [{k: parse_value(v) for k, v in r.items()} for r in reader]
    return header, rows


def run_header(seed, config_text):
    digest = hashlib.sha256(config_text.encode("utf-8")).hexdigest()
    return f"seed={seed}, config_sha256={digest}"


def read_series_csv(path, column="value"):
    """Read one numeric column from a headed CSV, with no gaps allowed.

    Raises :class:`ParseError` naming the 1-based line and column of the
    first offending cell.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not valid UTF-8") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path} is empty", line=1) from None
    header = [h.strip() for h in header]
    if column not in header:
        raise ParseError(f"no column {column!r} in header {header}", line=1)
    col = header.index(column)
    values = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=line)
        cell = row[col].strip()
        try:
            v = float(cell)
        except ValueError:
            raise ParseError(f"cannot parse {cell!r} as a number", line=line, column=col + 1) from None
        if not math.isfinite(v):
            raise ParseError(f"missing or non-finite value {cell!r}", line=line, column=col + 1)
        values.append(v)
    if not values:
        raise InsufficientData(f"{path} holds no observations")
    return np.array(values)


def read_error_table(path):
    """Long CSV with columns ``series, method, error`` as a series x method matrix."""
    _, rows = read_csv(path)
    if not rows:
        raise InsufficientData(f"{path} holds no rows")
    missing = {"series", "method", "error"} - set(rows[0])
    if missing:
        raise ParseError(f"missing columns {sorted(missing)}", line=1)
    series, methods, cells = [], [], {}
    for i, r in enumerate(rows, start=2):
        s, m, e = str(r["series"]), str(r["method"]), r["error"]
        if not isinstance(e, (int, float)) or isinstance(e, bool):
            raise ParseError(f"error value {e!r} is not numeric", line=i, column=3)
        if s not in series:
            series.append(s)
        if m not in methods:
            methods.append(m)
        cells[s, m] = float(e)
    E = np.full((len(series), len(methods)), np.nan)
    for (s, m), e in cells.items():
        E[series.index(s), methods.index(m)] = e
    if np.isnan(E).any():
        raise InsufficientData("every series needs an error for every method")
    return series, methods, E
