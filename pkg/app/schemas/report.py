"""
보고서 스키마

작업 파이프라인이 돌려주는 결과와 파일로 나가는 보고서 문서의 형태입니다.
값은 storage.to_plain 으로 평범한 파이썬 값(유한 float, 리스트, 문자열)으로 바꾼 뒤 담습니다.
"""
from typing import Any

from pydantic import BaseModel, Field


class TaskResult(BaseModel):
    """작업 한 번의 결과: 요약 한 개 + 행 목록 (CSV/JSON lines 용)"""
    summary: dict[str, Any] = Field(default_factory=dict)
    rows: list[dict[str, Any]] = Field(default_factory=list)
    # 행이 비어 있어도 CSV 머리행을 쓰기 위한 열 이름
    columns: list[str] = Field(default_factory=list)


class ReportOut(BaseModel):
    """JSON 보고서 문서"""
    scenario: str
    task: str
    model: str
    seed: int
    summary: dict[str, Any] = Field(default_factory=dict)
    rows: list[dict[str, Any]] = Field(default_factory=list)
