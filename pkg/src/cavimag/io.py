"""Readers and writers for spectra, field-sweep maps and fit results.

Formats
-------
Touchstone v1 ``.s2p``
    Read only.  The S21 pair of every row is kept.
Spectrum CSV
    Optional ``#`` comment lines (the emitter writes one with a JSON
    provenance block), a header row, then one row per frequency.  Columns
    ``freq_hz`` plus either ``re_s21, im_s21`` or ``mag_s21`` or
    ``mag_db_s21``.
Grid file
    First line ``# {json}`` with axes, parameters and schema version, then a
    CSV matrix of |S21| in dB with one row per field and one column per
    frequency.

Numbers are written with ``%.17g`` so that reading a file back reproduces
the binary values exactly.  All writes go to a temporary file in the target
directory that is then renamed into place.
"""

from __future__ import annotations

import csv
import json
import math
import os
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fit.data import Spectrum
from .hybrid import FieldSweepMap

SCHEMA_VERSION = "1.0"

FORMATS = ("touchstone-s2p", "csv-complex", "csv-magnitude")
CSV_ROLES = ("freq_hz", "re_s21", "im_s21", "mag_s21", "mag_db_s21")
# Accepted alternative spellings of CSV column names.
CSV_ALIASES = {"mag_db": "mag_db_s21"}

_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


class ParseError(ValueError):
    """A data file could not be parsed.  ``line`` is 1-based when known."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.path = None if path is None else str(path)
        self.line = line


@dataclass
class DataFileDescriptor:
    """Where a spectrum lives and how to read it.

    ``columns`` maps the roles in :data:`CSV_ROLES` to header names when a
    CSV file does not use the default names.
    """

    path: str | os.PathLike
    format: str
    z0: float = 50.0
    columns: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.format not in FORMATS:
            raise ValueError(f"unknown data format {self.format!r}; expected one of {FORMATS}")
        if not self.z0 > 0:
            raise ValueError("reference impedance must be > 0")
        unknown = set(self.columns) - set(CSV_ROLES)
        if unknown:
            raise ValueError(f"unknown CSV column roles {sorted(unknown)}")

    @classmethod
    def guess(cls, path) -> "DataFileDescriptor":
        """Infer the format from the file extension and CSV header."""
        p = Path(path)
        if p.suffix.lower() == ".s2p":
            return cls(p, "touchstone-s2p")
        header = _csv_header(p)
        fmt = "csv-complex" if {"re_s21", "im_s21"} <= set(header) else "csv-magnitude"
        return cls(p, fmt)


# ---------------------------------------------------------------------------
# Touchstone
# ---------------------------------------------------------------------------

def _parse_option_line(text: str, path, lineno: int) -> tuple[float, str, float]:
    tokens = text[1:].split()
    unit, fmt, z0 = 1e9, "ma", 50.0
    i = 0
    while i < len(tokens):
        tok = tokens[i].lower()
        if tok in _FREQ_UNITS:
            unit = _FREQ_UNITS[tok]
        elif tok in ("ri", "ma", "db"):
            fmt = tok
        elif tok == "s":
            pass
        elif tok in ("y", "z", "h", "g"):
            raise ParseError(f"only S-parameter files are supported, got {tokens[i]!r}",
                             path=path, line=lineno)
        elif tok == "r":
            if i + 1 >= len(tokens):
                raise ParseError("option line: 'R' must be followed by the reference impedance",
                                 path=path, line=lineno)
            try:
                z0 = float(tokens[i + 1])
            except ValueError:
                raise ParseError(f"option line: bad reference impedance {tokens[i + 1]!r}",
                                 path=path, line=lineno) from None
            if not z0 > 0:
                raise ParseError("option line: reference impedance must be > 0", path=path, line=lineno)
            i += 1
        else:
            raise ParseError(f"option line: unexpected token {tokens[i]!r}", path=path, line=lineno)
        i += 1
    return unit, fmt, z0


def _pair_to_complex(a: float, b: float, fmt: str) -> complex:
    if fmt == "ri":
        return complex(a, b)
    mag = a if fmt == "ma" else 10.0 ** (a / 20.0)
    ang = math.radians(b)
    return complex(mag * math.cos(ang), mag * math.sin(ang))


def load_touchstone(path) -> Spectrum:
    """Read the S21 channel of a Touchstone v1 two-port file.

    Without an option line the v1 defaults ``# GHz S MA R 50`` apply.  Only
    the first option line counts.  Touchstone v2 keywords are rejected.
    """
    path = Path(path)
    unit, fmt, z0 = 1e9, "ma", 50.0
    seen_option = False
    freqs: list[float] = []
    s21: list[complex] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("!", 1)[0].strip()
            if not text:
                continue
            if text.startswith("["):
                raise ParseError(f"Touchstone v2 keyword {text.split()[0]!r} found; only v1 files are supported",
                                 path=path, line=lineno)
            if text.startswith("#"):
                if not seen_option:
                    unit, fmt, z0 = _parse_option_line(text, path, lineno)
                    seen_option = True
                continue
            cells = text.split()
            if len(cells) != 9:
                raise ParseError(f"expected 9 values (frequency and 4 S-parameter pairs), got {len(cells)}",
                                 path=path, line=lineno)
            try:
                vals = [float(c) for c in cells]
            except ValueError as exc:
                raise ParseError(f"non-numeric value: {exc}", path=path, line=lineno) from None
            f = vals[0] * unit
            if freqs and not f > freqs[-1]:
                raise ParseError(f"frequency {f:g} Hz is not above the previous row ({freqs[-1]:g} Hz)",
                                 path=path, line=lineno)
            freqs.append(f)
            s21.append(_pair_to_complex(vals[3], vals[4], fmt))
    if not freqs:
        raise ParseError("no data rows", path=path)
    return Spectrum(np.array(freqs), np.array(s21), metadata={"source": str(path), "z0": z0,
                                                              "format": "touchstone-s2p"})


# ---------------------------------------------------------------------------
# Spectrum CSV
# ---------------------------------------------------------------------------

def _data_lines(fh):
    """Yield (line number, line) for non-comment lines."""
    for lineno, line in enumerate(fh, start=1):
        if line.lstrip().startswith("#") or not line.strip():
            continue
        yield lineno, line


def _csv_header(path) -> list[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        for _, line in _data_lines(fh):
            return [CSV_ALIASES.get(c.strip(), c.strip()) for c in next(csv.reader([line]))]
    raise ParseError("file is empty", path=path)


def _read_comment_metadata(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#"):
        try:
            meta = json.loads(first[1:])
        except json.JSONDecodeError:
            return {}
        return meta if isinstance(meta, dict) else {}
    return {}


def load_csv_spectrum(desc: DataFileDescriptor) -> Spectrum:
    """Read a comma-separated spectrum described by ``desc``."""
    path = Path(desc.path)
    if desc.format == "touchstone-s2p":
        raise ValueError("use load_touchstone for Touchstone files")
    with open(path, encoding="utf-8", newline="") as fh:
        lines = _data_lines(fh)
        try:
            head_no, head_line = next(lines)
        except StopIteration:
            raise ParseError("file is empty", path=path) from None
        header = [CSV_ALIASES.get(c.strip(), c.strip()) for c in next(csv.reader([head_line]))]
        names = {role: desc.columns.get(role, role) for role in CSV_ROLES}
        index = {role: header.index(name) for role, name in names.items() if name in header}

        if "freq_hz" not in index:
            raise ParseError(f"missing column {names['freq_hz']!r}", path=path, line=head_no)
        if desc.format == "csv-complex":
            missing = [names[r] for r in ("re_s21", "im_s21") if r not in index]
            if missing:
                raise ParseError(f"missing column(s) {missing} for complex data", path=path, line=head_no)
            roles = ("re_s21", "im_s21")
        elif "mag_s21" in index:
            roles = ("mag_s21",)
        elif "mag_db_s21" in index:
            roles = ("mag_db_s21",)
        else:
            raise ParseError(f"missing magnitude column ({names['mag_s21']!r} or {names['mag_db_s21']!r})",
                             path=path, line=head_no)

        freqs, a, b = [], [], []
        for lineno, line in lines:
            row = next(csv.reader([line]))
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} cells, got {len(row)}", path=path, line=lineno)
            try:
                f = float(row[index["freq_hz"]])
                vals = [float(row[index[r]]) for r in roles]
            except ValueError as exc:
                raise ParseError(f"non-numeric cell: {exc}", path=path, line=lineno) from None
            if freqs and not f > freqs[-1]:
                raise ParseError(f"frequency {f:g} Hz is not above the previous row", path=path, line=lineno)
            freqs.append(f)
            a.append(vals[0])
            if len(vals) > 1:
                b.append(vals[1])
    if not freqs:
        raise ParseError("no data rows", path=path)

    meta = {"source": str(path), "z0": desc.z0, "format": desc.format}
    file_meta = _read_comment_metadata(path)
    if file_meta:
        meta["header"] = file_meta
    if roles == ("re_s21", "im_s21"):
        s21 = np.empty(len(a), dtype=complex)
        s21.real, s21.imag = a, b  # keeps signed zeros, unlike a + 1j * b
        return Spectrum(np.array(freqs), s21, metadata=meta)
    mag = np.array(a) if roles == ("mag_s21",) else 10.0 ** (np.array(a) / 20.0)
    return Spectrum(np.array(freqs), mag, magnitude_only=True, metadata=meta)


def load_spectrum(path) -> Spectrum:
    """Load a Touchstone or CSV spectrum, choosing the reader from the file."""
    desc = DataFileDescriptor.guess(path)
    if desc.format == "touchstone-s2p":
        return load_touchstone(desc.path)
    return load_csv_spectrum(desc)


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def _num(x: float) -> str:
    return "%.17g" % x


def atomic_write_text(path, text: str) -> None:
    """Write to a sibling temporary file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{uuid.uuid4().hex}.tmp")
    try:
        with open(tmp, "x", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _header_line(meta: dict) -> str:
    return "# " + json.dumps({"schema_version": SCHEMA_VERSION, **meta}, separators=(",", ":"),
                             sort_keys=True, default=_json_default) + "\n"


def write_spectrum_csv(path, f_grid, s21, metadata: dict | None = None) -> None:
    """Write a complex spectrum with columns freq_hz, re_s21, im_s21, mag_db."""
    f_grid = np.asarray(f_grid, dtype=float)
    s21 = np.asarray(s21, dtype=complex)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(np.abs(s21))
    out = [_header_line(metadata or {}), "freq_hz,re_s21,im_s21,mag_db\n"]
    out.extend(f"{_num(f)},{_num(s.real)},{_num(s.imag)},{_num(d)}\n" for f, s, d in zip(f_grid, s21, db))
    atomic_write_text(path, "".join(out))


def write_table_csv(path, columns: dict[str, np.ndarray], metadata: dict | None = None) -> None:
    """Write named equal-length numeric columns, e.g. a model/data overlay."""
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float) for n in names]
    out = [_header_line(metadata or {}), ",".join(names) + "\n"]
    out.extend(",".join(_num(v) for v in row) + "\n" for row in zip(*data))
    atomic_write_text(path, "".join(out))


def write_matrix(path, header: dict, matrix) -> None:
    """Write ``# {json}`` followed by a CSV matrix."""
    out = [_header_line(header)]
    out.extend(",".join(_num(v) for v in row) + "\n" for row in np.atleast_2d(matrix))
    atomic_write_text(path, "".join(out))


def write_grid(path, sweep: FieldSweepMap, metadata: dict | None = None) -> None:
    """Write a field-sweep map as JSON header plus a dB matrix."""
    meta = {**sweep.metadata, **(metadata or {})}
    head = {
        "h_grid_oe": sweep.h_grid.tolist(),
        "f_grid_hz": sweep.f_grid.tolist(),
        "rows": "field (Oe), ascending",
        "columns": "frequency (Hz), ascending",
        "values": "|S21| in dB",
        **meta,
    }
    write_matrix(path, head, sweep.db)


def read_grid(path) -> FieldSweepMap:
    """Inverse of :func:`write_grid`."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ParseError("grid file must start with a '# {json}' header line", path=path, line=1)
        try:
            head = json.loads(first[1:])
            h = np.asarray(head.pop("h_grid_oe"), dtype=float)
            f = np.asarray(head.pop("f_grid_hz"), dtype=float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad grid header: {exc}", path=path, line=1) from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = [float(c) for c in line.split(",")]
            except ValueError as exc:
                raise ParseError(f"non-numeric cell: {exc}", path=path, line=lineno) from None
            if len(row) != f.size:
                raise ParseError(f"expected {f.size} columns, got {len(row)}", path=path, line=lineno)
            rows.append(row)
    if len(rows) != h.size:
        raise ParseError(f"expected {h.size} matrix rows, got {len(rows)}", path=path)
    for key in ("rows", "columns", "values"):
        head.pop(key, None)
    try:
        return FieldSweepMap.from_db(h, f, np.array(rows).reshape(h.size, f.size), metadata=head)
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _finite_or_none(obj):
    """JSON has no inf/nan; map them to null."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def write_json(path, payload: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **payload}
    doc = _finite_or_none(json.loads(json.dumps(doc, default=_json_default)))
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n")
