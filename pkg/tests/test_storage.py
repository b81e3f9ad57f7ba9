import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pytest

from app.exceptions import ReportWriteError
from app.storage import emit_report, render, to_plain


@dataclass
class _Sample:
    value: float
    hidden: list = field(default_factory=list, repr=False)


def test_empty_csv_keeps_header():
    assert render([], "csv", columns=["x0", "radius"]) == "x0,radius\n"


def test_csv_non_finite_cells_are_empty():
    text = render([{"a": math.nan, "b": 1.5, "c": None}], "csv", columns=["a", "b", "c"])
    assert text.splitlines()[1] == ",1.5,"


def test_json_keys_are_sorted_and_finite():
    text = render({"b": 1.0, "a": [math.inf, 0.1]}, "json")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [None, 0.1], "b": 1.0}
    assert text.endswith("\n")


def test_jsonl_one_row_per_line():
    text = render([{"i": 0}, {"i": 1}], "jsonl")
    assert [json.loads(line)["i"] for line in text.splitlines()] == [0, 1]


def test_to_plain_conversions():
    plain = to_plain({"arr": np.array([1.0, np.nan]), "frac": Fraction(10, 11), "flag": np.bool_(True), "obj": _Sample(2.0)})
    assert plain == {"arr": [1.0, None], "frac": "10/11", "flag": True, "obj": {"value": 2.0}}


def test_unknown_format():
    with pytest.raises(ValueError):
        render([], "xml")


def test_emit_report_replaces_atomically(tmp_path):
    path = tmp_path / "out" / "report.json"
    emit_report({"x": 1}, "json", path)
    emit_report({"x": 2}, "json", path)
    assert json.loads(path.read_text(encoding="utf-8")) == {"x": 2}
    assert [p.name for p in path.parent.iterdir()] == ["report.json"]


def test_emit_report_failure_is_report_write_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    with pytest.raises(ReportWriteError) as info:
        emit_report({"x": 1}, "json", blocker / "report.json")
    assert info.value.key == "output"
