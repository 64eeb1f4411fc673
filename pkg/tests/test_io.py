import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavimag import presets
from cavimag.hybrid import field_sweep
from cavimag.io import (
    SCHEMA_VERSION,
    DataFileDescriptor,
    ParseError,
    atomic_write_text,
    load_csv_spectrum,
    load_spectrum,
    load_touchstone,
    read_grid,
    write_grid,
    write_json,
    write_spectrum_csv,
    write_table_csv,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# -- Touchstone ---------------------------------------------------------------

def test_touchstone_minimal_ri(tmp_path):
    p = _write(tmp_path / "a.s2p", "! comment\n# Hz S RI R 50\n1e9 0 0 1 0 0 0 0 0\n")
    s = load_touchstone(p)
    assert s.f_grid.tolist() == [1e9]
    assert s.s21[0] == 1 + 0j
    assert s.metadata["z0"] == 50.0


def test_touchstone_ma_and_db(tmp_path):
    s = load_touchstone(_write(tmp_path / "a.s2p", "# GHz S MA R 50\n1.0 0 0 0.5 90 0 0 0 0\n"))
    assert s.f_grid[0] == 1e9
    assert s.s21[0] == pytest.approx(0.5j, abs=1e-16)
    s = load_touchstone(_write(tmp_path / "b.s2p", "# MHz S DB R 75\n1000 0 0 -6.0206 0 0 0 0 0\n"))
    assert s.s21[0] == pytest.approx(0.5, abs=1e-5)
    assert s.metadata["z0"] == 75.0


def test_touchstone_defaults_and_units(tmp_path):
    s = load_touchstone(_write(tmp_path / "a.s2p", "2 0 0 1 180 0 0 0 0\n"))
    assert s.f_grid[0] == 2e9
    assert s.s21[0] == pytest.approx(-1.0)
    s = load_touchstone(_write(tmp_path / "b.s2p", "# kHz RI\n5 0 0 1 0 0 0 0 0\n6 0 0 1 0 0 0 0 0 ! tail\n"))
    assert s.f_grid.tolist() == [5e3, 6e3]


@pytest.mark.parametrize("text,line,match", [
    ("# Hz S RI R 50\n1e9 0 0 1 0 0 0 0\n", 2, "9 values"),
    ("# Hz S RI R 50\n2e9 0 0 1 0 0 0 0 0\n1e9 0 0 1 0 0 0 0 0\n", 3, "not above"),
    ("# Hz S RI R 50\n1e9 0 0 x 0 0 0 0 0\n", 2, "non-numeric"),
    ("! hdr\n# Hz S XY R 50\n", 2, "unexpected token"),
    ("# Hz Z RI R 50\n", 1, "S-parameter"),
    ("# Hz S RI R\n", 1, "reference impedance"),
    ("[Version] 2.0\n", 1, "v2"),
])
def test_touchstone_errors_carry_line_numbers(tmp_path, text, line, match):
    with pytest.raises(ParseError, match=match) as exc:
        load_touchstone(_write(tmp_path / "bad.s2p", text))
    assert exc.value.line == line
    assert f"bad.s2p:{line}:" in str(exc.value)


def test_touchstone_empty_file(tmp_path):
    with pytest.raises(ParseError, match="no data rows"):
        load_touchstone(_write(tmp_path / "e.s2p", "! nothing\n"))


# -- CSV ----------------------------------------------------------------------

def test_csv_complex_two_rows(tmp_path):
    p = _write(tmp_path / "c.csv", "freq_hz,re_s21,im_s21\n1e9,0.1,-0.2\n2e9,0.30000000000000004,5e-300\n")
    s = load_csv_spectrum(DataFileDescriptor(p, "csv-complex"))
    assert s.f_grid.tolist() == [1e9, 2e9]
    assert s.s21.tolist() == [0.1 - 0.2j, 0.30000000000000004 + 5e-300j]
    assert not s.magnitude_only


def test_csv_magnitude_and_db(tmp_path):
    s = load_spectrum(_write(tmp_path / "m.csv", "freq_hz,mag_s21\n1e9,0.5\n2e9,0.25\n"))
    assert s.magnitude_only and s.s21.tolist() == [0.5, 0.25]
    s = load_spectrum(_write(tmp_path / "d.csv", "freq_hz,mag_db\n1e9,-6.0205999132796239043\n"))
    assert s.s21[0] == pytest.approx(0.5, rel=1e-15)


def test_csv_custom_columns(tmp_path):
    p = _write(tmp_path / "x.csv", "f,a,b\n1e9,1,2\n")
    s = load_csv_spectrum(DataFileDescriptor(p, "csv-complex", columns={"freq_hz": "f", "re_s21": "a",
                                                                        "im_s21": "b"}))
    assert s.s21[0] == 1 + 2j


@pytest.mark.parametrize("text,fmt,line,match", [
    ("freq_hz,re_s21\n1e9,1\n", "csv-complex", 1, "missing column"),
    ("f,mag_s21\n1e9,1\n", "csv-magnitude", 1, "freq_hz"),
    ("freq_hz,mag_s21\n1e9,1\n2e9,abc\n", "csv-magnitude", 3, "non-numeric"),
    ("freq_hz,mag_s21\n1e9,1\n1e9,1\n", "csv-magnitude", 3, "not above"),
    ("# meta\nfreq_hz,mag_s21\n1e9,1,3\n", "csv-magnitude", 3, "cells"),
])
def test_csv_errors_carry_row_numbers(tmp_path, text, fmt, line, match):
    with pytest.raises(ParseError, match=match) as exc:
        load_csv_spectrum(DataFileDescriptor(_write(tmp_path / "bad.csv", text), fmt))
    assert exc.value.line == line


def test_csv_empty_and_header_only(tmp_path):
    with pytest.raises(ParseError, match="empty"):
        load_spectrum(_write(tmp_path / "e.csv", ""))
    with pytest.raises(ParseError, match="no data rows"):
        load_spectrum(_write(tmp_path / "h.csv", "freq_hz,mag_s21\n"))


def test_descriptor_validation():
    with pytest.raises(ValueError):
        DataFileDescriptor("x", "xlsx")
    with pytest.raises(ValueError):
        DataFileDescriptor("x", "csv-complex", z0=0.0)
    with pytest.raises(ValueError):
        DataFileDescriptor("x", "csv-complex", columns={"phase": "p"})


# -- writers ------------------------------------------------------------------

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_spectrum_round_trip_is_bitwise(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    f = np.arange(1, len(values) + 1) * 1e9 + 0.1
    s21 = np.array([complex(a, b) for a, b in values])
    write_spectrum_csv(path, f, s21, {"theta_deg": 30})
    back = load_spectrum(path)
    assert back.f_grid.tobytes() == f.tobytes()
    assert back.s21.tobytes() == s21.tobytes()
    assert back.metadata["header"]["schema_version"] == SCHEMA_VERSION
    assert back.metadata["header"]["theta_deg"] == 30


def test_spectrum_writer_columns(tmp_path):
    write_spectrum_csv(tmp_path / "s.csv", [1e9], [0.5 + 0j])
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# {")
    assert lines[1] == "freq_hz,re_s21,im_s21,mag_db"
    assert float(lines[2].split(",")[3]) == pytest.approx(-6.0205999132796239043, rel=1e-15)


def test_table_writer(tmp_path):
    write_table_csv(tmp_path / "t.csv", {"a": [1.0, 2.0], "b": [3.0, 4.0]}, {"k": 1})
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert json.loads(lines[0][2:]) == {"k": 1, "schema_version": SCHEMA_VERSION}
    assert lines[1:] == ["a,b", "1,3", "2,4"]


def test_grid_round_trip(tmp_path):
    m = field_sweep(presets.hybrid(60), np.linspace(700, 1400, 8), np.linspace(3.6e9, 5.9e9, 13),
                    metadata={"theta_deg": 60})
    write_grid(tmp_path / "g.csv", m, {"note": "x"})
    back = read_grid(tmp_path / "g.csv")
    assert back.h_grid.tobytes() == m.h_grid.tobytes()
    assert back.f_grid.tobytes() == m.f_grid.tobytes()
    # The file stores dB; the map stores linear magnitude.
    np.testing.assert_allclose(back.db, m.db, rtol=1e-12)
    np.testing.assert_allclose(back.values, m.values, rtol=1e-12)
    assert back.metadata["theta_deg"] == 60 and back.metadata["schema_version"] == SCHEMA_VERSION
    text = (tmp_path / "g.csv").read_text().splitlines()
    assert len(text) == 1 + 8 and all(len(r.split(",")) == 13 for r in text[1:])


def test_grid_reader_errors(tmp_path):
    with pytest.raises(ParseError, match="header"):
        read_grid(_write(tmp_path / "a.csv", "1,2\n"))
    head = json.dumps({"h_grid_oe": [1.0, 2.0], "f_grid_hz": [1.0]})
    with pytest.raises(ParseError, match="rows"):
        read_grid(_write(tmp_path / "b.csv", f"# {head}\n0\n"))
    with pytest.raises(ParseError) as exc:
        read_grid(_write(tmp_path / "c.csv", f"# {head}\n0\n0,1\n"))
    assert exc.value.line == 3


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "f.txt"
    atomic_write_text(target, "one")
    atomic_write_text(target, "two")
    assert target.read_text() == "two"
    assert os.listdir(target.parent) == ["f.txt"]
    assert oct(target.stat().st_mode & 0o777) != oct(0o600)


def test_json_writer_maps_non_finite_to_null(tmp_path):
    write_json(tmp_path / "r.json", {"a": math.inf, "b": [1.0, math.nan], "c": np.float64(2.5),
                                     "d": np.arange(2), "z": 1 + 2j})
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc == {"schema_version": SCHEMA_VERSION, "a": None, "b": [1.0, None], "c": 2.5, "d": [0, 1],
                   "z": {"re": 1.0, "im": 2.0}}
