"""
시나리오 파일 파서

JSON 시나리오 문서를 읽어 Scenario 스키마로 검증합니다.
확장자가 .yaml/.yml 이면 yaml.safe_load 로 읽습니다.

검증 실패는 첫 오류의 키 경로(예: task.k)를 담은 ScenarioError 로 바꿉니다.
"""
import json
from pathlib import Path

import yaml
from pydantic import ValidationError

from app.exceptions import ScenarioError
from app.schemas.scenario import Scenario


def _키_경로(loc: tuple) -> str:
    """('task', 'cover', 'k') → 'task.cover.k'"""
    return ".".join(str(part) for part in loc)


def load_document(filepath: str | Path) -> dict:
    """
    시나리오 파일을 딕셔너리로 읽습니다.

    Args:
        filepath: 시나리오 파일 경로

    Returns:
        최상위 매핑
    """
    filepath = Path(filepath)
    try:
        text = filepath.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"시나리오 파일을 읽을 수 없습니다: {filepath} ({exc})", module="cli") from exc

    try:
        if filepath.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ScenarioError(f"시나리오 문서 구문 오류: {filepath.name} ({exc})", module="cli") from exc

    if not isinstance(data, dict):
        raise ScenarioError("시나리오 문서의 최상위는 매핑이어야 합니다.", module="cli")
    return data


def parse_scenario(filepath: str | Path) -> Scenario:
    """시나리오 파일을 읽고 스키마를 검증합니다."""
    data = load_document(filepath)
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = _키_경로(first["loc"])
        raise ScenarioError(f"스키마 위반: {first['msg']}", module="cli", key=key or None) from exc
