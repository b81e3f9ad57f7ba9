"""
시나리오 입력 스키마

시나리오 문서(JSON, YAML 허용)의 구조를 검증하는 Pydantic 모델입니다.
모든 단계에서 정의되지 않은 키는 거부하고, task 필드로 작업 종류를 구분합니다.

    name:    시나리오 이름 (출력 파일 이름 접두사)
    seed:    필수 난수 시드
    model:   카탈로그 모델 이름 + 매개변수
    domain:  표본 영역 + 해상도
    task:    작업 명세 (decompose, radius-field, cover, integration-check,
             transgression-check, iterate, epsreg-scan, gauss-bonnet)
    output:  보고서 형식
"""
import math
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

Coords = list[float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ── 모델 / 영역 ──

class ModelSpec(_Strict):
    """카탈로그 모델"""
    name: str
    params: dict[str, Any] = Field(default_factory=dict)


class RegionSpec(_Strict):
    """full / box / point 영역"""
    kind: Literal["full", "box", "point"] = "full"
    lower: Coords | None = None
    upper: Coords | None = None
    point: Coords | None = None
    cell_volume: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _필수_좌표(self):
        if self.kind == "box" and (self.lower is None or self.upper is None):
            raise ValueError("box 영역에는 lower, upper가 필요합니다.")
        if self.kind == "point" and self.point is None:
            raise ValueError("point 영역에는 point가 필요합니다.")
        for coords in (self.lower, self.upper, self.point):
            if coords is not None and len(coords) != 4:
                raise ValueError(f"좌표는 4개 성분이어야 합니다: {coords}")
        if self.kind == "box" and any(u <= lo for lo, u in zip(self.lower, self.upper)):
            raise ValueError("box 영역의 upper는 lower보다 커야 합니다.")
        return self


class DomainSpec(_Strict):
    region: RegionSpec = Field(default_factory=RegionSpec)
    resolution: float = Field(gt=0)
    jitter: float = Field(default=0.0, ge=0, lt=1)


class OutputSpec(_Strict):
    """csv/jsonl 은 행 파일과 요약 JSON, json 은 한 문서"""
    format: Literal["csv", "json", "jsonl"] = "json"


# ── 작업 ──

class DecomposeTask(_Strict):
    """random > 0 이면 무작위 대수적 곡률 텐서 표본, 아니면 영역 표본점의 모델 곡률"""
    task: Literal["decompose"]
    random: int = Field(default=0, ge=0)
    orientation: Literal[1, -1] = 1


class RadiusFieldTask(_Strict):
    task: Literal["radius-field"]
    # None 은 s = ∞
    s: float | None = Field(default=None, gt=0)
    lipschitz: bool = True


class CoverTask(_Strict):
    task: Literal["cover"]
    k: float = Field(gt=1)
    l: float = Field(gt=1)
    s: float | None = Field(default=None, gt=0)
    construction: Literal["greedy", "cutoff"] = "greedy"
    multiplicity_ks: list[float] | None = None


class IntegrationTask(_Strict):
    """omega 는 영역 표본 중 Ω 에 속하는 점을 고르는 상자"""
    task: Literal["integration-check"]
    omega: RegionSpec
    exponent: float = Field(gt=0)
    s: float = Field(gt=0)
    mu: float = Field(default=1.0, gt=0, le=1)
    m: float | None = Field(default=None, gt=0)
    candidates: list[float] = Field(default_factory=lambda: [1.0])
    cover_decomposition: bool = False
    full_radius: bool = False


class TransgressionTask(_Strict):
    """points 의 점별 검사와, stokes 상자가 주어지면 세분 수렴 검사"""
    task: Literal["transgression-check"]
    fields: list[str] | None = None
    points: list[Coords] = Field(default_factory=list)
    stokes: RegionSpec | None = None
    counts: list[int] = Field(default_factory=lambda: [4, 4, 1, 1])
    levels: int = Field(default=3, ge=2)
    h: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _격자(self):
        if len(self.counts) != 4 or min(self.counts) < 1:
            raise ValueError(f"counts는 양의 정수 4개여야 합니다: {self.counts}")
        return self


class IterateTask(_Strict):
    task: Literal["iterate"]
    case: Literal["i", "ii"] = "i"
    # case "i": Λ (None 이면 모델의 Λ), case "ii": r
    value: float | None = Field(default=None, gt=0)
    T: int = Field(default=200, ge=1)
    point: Coords | None = None
    tail_tol: float = Field(default=1e-6, gt=0)


class EpsregScanTask(_Strict):
    task: Literal["epsreg-scan"]
    radii: list[float] = Field(min_length=1)
    points: list[Coords] | None = None
    lam: float | None = Field(default=None, ge=0)
    K: float | None = Field(default=None, gt=0)
    harnack: bool = False
    tau: float | None = Field(default=None, gt=0)
    # [ρ, β] 또는 [ρ, β, γ]
    volume_grid: list[list[float]] | None = None


class GaussBonnetTask(_Strict):
    task: Literal["gauss-bonnet"]


TaskSpec = Annotated[
    Union[
        DecomposeTask,
        RadiusFieldTask,
        CoverTask,
        IntegrationTask,
        TransgressionTask,
        IterateTask,
        EpsregScanTask,
        GaussBonnetTask,
    ],
    Field(discriminator="task"),
]


class Scenario(_Strict):
    """시나리오 문서 최상위"""
    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    seed: int
    model: ModelSpec
    domain: DomainSpec
    task: TaskSpec
    output: OutputSpec = Field(default_factory=OutputSpec)


def cutoff(s: float | None) -> float:
    return math.inf if s is None else s
