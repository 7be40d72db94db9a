"""CSV readers and writers for measurements, truth, track output and reports.

Floats are written with 17 significant digits so every value re-parses to
the identical double.
"""

import csv
import io

import numpy as np

MEASUREMENT_COLUMNS = ("k", "z11", "z12", "z21", "z22")
TRUTH_COLUMNS = ("k", "x", "y")
TRACK_COLUMNS = ("k", "x", "y", "b1", "b2", "iterations", "converged")
REPORT_COLUMNS = ("k", "pos_rmse", "pos_crlb_root", "bias1_rmse", "bias1_crlb_root",
                  "bias2_rmse", "bias2_crlb_root")
CRLB_COLUMNS = ("k", "pos_crlb_root", "bias1_crlb_root", "bias2_crlb_root")


class CsvFormatError(ValueError):
    pass


def fmt(value):
    return format(float(value), ".17g")


def _write(path_or_file, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    text = buf.getvalue()
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", newline="") as fh:
            fh.write(text)


def _read(path_or_file, columns, name):
    """Rows of floats keyed by the expected columns; checks header and step indices."""
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file, newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise CsvFormatError(f"{name}: empty file")
    header = [h.strip() for h in header]
    for col in columns:
        if col not in header:
            raise CsvFormatError(f"{name}: line 1: missing column '{col}'")
    pos = [header.index(col) for col in columns]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"{name}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            values = [float(row[p]) for p in pos]
        except ValueError:
            raise CsvFormatError(f"{name}: line {lineno}: malformed number in {row!r}") from None
        if not all(np.isfinite(values)):
            raise CsvFormatError(f"{name}: line {lineno}: non-finite value")
        expected = len(rows) + 1
        if values[0] != expected:
            raise CsvFormatError(
                f"{name}: line {lineno}: step k={row[pos[0]].strip()} breaks the sequence "
                f"(expected k={expected}; k must increase by 1 from 1)")
        rows.append(values)
    if not rows:
        raise CsvFormatError(f"{name}: no data rows")
    return np.array(rows)


def write_measurements(path, z):
    _write(path, MEASUREMENT_COLUMNS,
           ([k, *map(fmt, row)] for k, row in enumerate(np.asarray(z), start=1)))


def read_measurements(path):
    """``(N, 4)`` ranges from a ``k,z11,z12,z21,z22`` file."""
    return _read(path, MEASUREMENT_COLUMNS, "measurements")[:, 1:]


def write_truth(path, trajectory):
    _write(path, TRUTH_COLUMNS,
           ([k, fmt(x), fmt(y)] for k, (x, y) in enumerate(np.asarray(trajectory), start=1)))


def read_truth(path):
    return _read(path, TRUTH_COLUMNS, "truth")[:, 1:]


def write_track(path, results):
    rows = []
    for res in results:
        x, y = res.position
        b1, b2 = res.bias
        rows.append([res.k, fmt(x), fmt(y), fmt(b1), fmt(b2), int(res.iterations), int(bool(res.converged))])
    _write(path, TRACK_COLUMNS, rows)


def read_track(path):
    """``(N, 7)`` array in :data:`TRACK_COLUMNS` order."""
    return _read(path, TRACK_COLUMNS, "track")


def write_report(path, report):
    rows = []
    for k in range(len(report)):
        rows.append([k + 1, fmt(report.pos_rmse[k]), fmt(report.pos_crlb_root[k]),
                     fmt(report.bias_rmse[k, 0]), fmt(report.bias_crlb_root[k, 0]),
                     fmt(report.bias_rmse[k, 1]), fmt(report.bias_crlb_root[k, 1])])
    _write(path, REPORT_COLUMNS, rows)


def read_report(path):
    return _read(path, REPORT_COLUMNS, "report")


def write_crlb(path, bounds):
    pos, b1, b2 = (np.sqrt(v) for v in (bounds.pos, bounds.bias1, bounds.bias2))
    _write(path, CRLB_COLUMNS,
           ([k + 1, fmt(pos[k]), fmt(b1[k]), fmt(b2[k])] for k in range(len(pos))))


def read_crlb(path):
    return _read(path, CRLB_COLUMNS, "crlb")
