"""
도메인 예외 계층

모든 예외는 EpsregError를 상속하며 발생 모듈 이름(module)과
시나리오 키 경로(key)를 함께 보관합니다. CLI는 이 계층으로 종료 코드를 정합니다.

    ScenarioError        → 종료 코드 2 (설정/스키마 오류)
    NumericalDomainError → 종료 코드 3 (수치 영역 오류, 출력 경로 오류)
"""


class EpsregError(Exception):
    """epsreg4 공통 예외"""

    def __init__(self, message: str, *, module: str = "", key: str | None = None):
        super().__init__(message)
        self.module = module
        self.key = key

    def __str__(self) -> str:
        base = super().__str__()
        tags = []
        if self.module:
            tags.append(f"module={self.module}")
        if self.key:
            tags.append(f"key={self.key}")
        return f"[{', '.join(tags)}] {base}" if tags else base


# ── 설정 오류 (exit 2) ──

class ScenarioError(EpsregError):
    """시나리오 문서가 스키마를 위반함"""


class ParameterError(ScenarioError, ValueError):
    """매개변수가 허용 범위를 벗어남 (k ≤ 1, 매개변수 창 위반 등)"""


# ── 수치 영역 오류 (exit 3) ──

class NumericalDomainError(EpsregError):
    """수치 계산이 정의역을 벗어났거나 수렴하지 않음"""


class SymmetryError(NumericalDomainError):
    """곡률 텐서가 리만 대칭성을 위반함. symmetry 속성에 위반된 대칭 이름"""

    def __init__(self, message: str, *, symmetry: str, residual: float, module: str = "tensor4"):
        super().__init__(message, module=module)
        self.symmetry = symmetry
        self.residual = residual


class ChartCoverageError(NumericalDomainError):
    """스텐실·공·두께화가 차트 범위를 벗어남. margin 속성에 남은 여유"""

    def __init__(self, message: str, *, margin: float, module: str = "models", key: str | None = None):
        super().__init__(message, module=module, key=key)
        self.margin = margin


class ShootingError(NumericalDomainError):
    """측지선 슈팅이 수렴하지 않음. bracket = (하한, 상한)"""

    def __init__(self, message: str, *, bracket: tuple[float, float], module: str = "models"):
        super().__init__(message, module=module)
        self.bracket = bracket


class PolarizationError(NumericalDomainError):
    """Killing 장의 크기가 임계값 아래 (편극 실패)"""


class OrientationError(NumericalDomainError):
    """경계 적분에 필요한 방향이 주어지지 않음"""


class ReportWriteError(NumericalDomainError):
    """보고서 파일을 쓸 수 없음"""
