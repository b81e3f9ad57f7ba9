"""
보고서 저장

결과를 CSV 또는 JSON 으로 씁니다. 같은 입력이면 바이트 단위로 같은 파일이 나옵니다.

- float 는 유효숫자 17자리 ('.17g'), 비유한 값은 JSON null / CSV 빈 칸
- JSON 키는 정렬, 끝에 줄바꿈
- CSV 는 행이 없어도 머리행을 씁니다
- 대상 디렉터리의 임시 파일에 쓴 뒤 os.replace 로 교체합니다
"""
import csv
import dataclasses
import io
import json
import logging
import math
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from app.exceptions import ReportWriteError

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "jsonl")


def to_plain(value):
    """dataclass / numpy / Fraction 을 JSON 으로 쓸 수 있는 값으로 바꿉니다. 비유한 float → None"""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_plain(getattr(value, f.name)) for f in dataclasses.fields(value) if f.repr}
    if hasattr(value, "model_dump"):
        return to_plain(value.model_dump())
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if value is None or isinstance(value, str):
        return value
    return str(value)


def _float(x: float) -> str:
    return format(x, ".17g")


def _json_text(value) -> str:
    """정렬된 키, '.17g' float 의 JSON 텍스트"""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _float(value) if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        items = ", ".join(f"{json.dumps(k, ensure_ascii=False)}: {_json_text(value[k])}" for k in sorted(value))
        return "{" + items + "}"
    if isinstance(value, list):
        return "[" + ", ".join(_json_text(v) for v in value) + "]"
    raise TypeError(f"JSON으로 쓸 수 없는 값: {type(value).__name__}")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _float(value) if math.isfinite(value) else ""
    if isinstance(value, (list, dict)):
        return _json_text(value)
    return str(value)


def render(results, fmt: str, columns: list[str] | None = None) -> str:
    """
    결과를 문자열로 직렬화합니다.

    Args:
        results: json 은 임의의 값, csv/jsonl 은 행(dict) 리스트
        fmt: "csv" | "json" | "jsonl"
        columns: CSV 열 순서 (없으면 행 키의 정렬 합집합)
    """
    plain = to_plain(results)
    if fmt == "json":
        return _json_text(plain) + "\n"
    if fmt == "jsonl":
        return "".join(_json_text(row) + "\n" for row in plain)
    if fmt == "csv":
        header = list(columns or [])
        extra = sorted({k for row in plain for k in row} - set(header))
        header += extra
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in plain:
            writer.writerow([_csv_cell(row.get(k)) for k in header])
        return buf.getvalue()
    raise ValueError(f"알 수 없는 보고서 형식: {fmt} (가능: {', '.join(FORMATS)})")


def emit_report(results, fmt: str, path: str | Path, columns: list[str] | None = None) -> Path:
    """
    보고서를 원자적으로 씁니다.

    Returns:
        쓴 파일 경로

    Raises:
        ReportWriteError: 디렉터리를 만들 수 없거나 쓸 수 없음
    """
    path = Path(path)
    text = render(results, fmt, columns)
    tmp_name = None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile("w", encoding="utf-8", newline="", dir=path.parent,
                                         prefix=f".{path.name}.", suffix=".tmp", delete=False) as tmp:
            tmp_name = tmp.name
            tmp.write(text)
        os.replace(tmp_name, path)
    except OSError as exc:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise ReportWriteError(f"보고서를 쓸 수 없습니다: {path} ({exc})", module="cli", key="output") from exc
    logger.info("보고서 저장: %s (%s, %d bytes)", path, fmt, len(text.encode("utf-8")))
    return path
