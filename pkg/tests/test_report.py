import json
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, strategies as st

from dram3d import report
from dram3d.svg import line_plot


@pytest.mark.parametrize("x,s", [(None, ""), (True, "true"), (1.23456789, "1.23457"), (3, "3"),
                                 (1e-20, "1e-20"), ("a", "a")])
def test_fmt(x, s):
    assert report.fmt(x) == s


def test_fmt_rejects_non_finite():
    with pytest.raises(ValueError):
        report.fmt(float("nan"))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_json_and_csv_carry_same_value(x):
    row = {"v": x}
    csv_val = report.to_csv(["v"], [row]).splitlines()[1]
    json_val = json.loads(report.to_json(row))["v"]
    assert float(csv_val) == json_val


def test_csv_column_order_and_missing():
    text = report.to_csv(["b", "a"], [{"a": 1.0, "b": None}])
    assert text == "b,a\n,1\n"


def test_text_table_alignment():
    t = report.text_table(["name", "x"], [{"name": "si3d", "x": 1.5}, {"name": "a", "x": None}])
    lines = t.splitlines()
    assert lines[0].startswith("name") and set(lines[1]) <= {"-", " "}
    assert lines[2].startswith("si3d") and lines[3].endswith("-")
    assert len({len(ln) for ln in lines[:3]}) == 1


def test_transpose():
    cols, rows = report.transpose(["p", "x"], [{"p": "a", "x": 1}, {"p": "b", "x": 2}], "p")
    assert cols == ["metric", "a", "b"] and rows == [{"metric": "x", "a": 1, "b": 2}]


def test_line_plot_is_valid_svg():
    svg = line_plot([("one", [1, 2, 3], [3.0, 1.0, 2.0]), ("two <b>", [1, 3], [0.5, 0.7])],
                    "title & more", "x", "y")
    root = ET.fromstring(svg)
    assert root.get("viewBox") == "0 0 800 600"
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}polyline")) == 2
    assert svg == line_plot([("one", [1, 2, 3], [3.0, 1.0, 2.0]), ("two <b>", [1, 3], [0.5, 0.7])],
                            "title & more", "x", "y")


def test_line_plot_degenerate_and_empty():
    ET.fromstring(line_plot([("flat", [5, 5], [1.0, 1.0])], "t", "x", "y"))
    with pytest.raises(ValueError):
        line_plot([], "t", "x", "y")
