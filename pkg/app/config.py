"""
epsreg4 환경 설정

환경변수(EPSREG_ 접두사) 또는 .env 파일에서 수치 허용오차와 실행 옵션을 로드합니다.
- 허용오차: 대칭성 검사, 항등식 잔차, 측지선 슈팅, Killing 방정식
- 해상도: 유한차분 간격, 공 샘플링 해상도, RK4 단계 수
- 스캐너 작업 상수: ε₀, K
- 실행 옵션: 스레드 수, 로그 레벨

각 서비스 함수는 키워드 인자로 값을 덮어쓸 수 있고, settings는 기본값만 제공합니다.
"""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # ── 곡률 텐서 대수 ──
    # 리만 대칭성 검사 허용오차 (최대 성분 대비 상대값)
    SYMMETRY_TOL: float = 1e-12
    # 분해/에너지 항등식 잔차 허용오차 (상대값)
    IDENTITY_TOL: float = 1e-10

    # ── 유한차분 / 측지선 ──
    # 곡률·접속 형식 유한차분 간격 (차트 좌표)
    FD_STEP: float = 1e-3
    # 측지선 슈팅 수렴 허용오차 (차트 좌표)
    SHOOTING_TOL: float = 1e-8
    SHOOTING_MAX_ITER: int = 40
    # 지수사상 적분 RK4 단계 수
    RK4_STEPS: int = 64

    # ── 곡률 반경 ──
    # 이분법 상대 허용오차
    BISECTION_RTOL: float = 1e-4
    # 공 sup 샘플링 해상도 = r × 이 비율
    BALL_RESOLUTION_FRACTION: float = 1.0 / 20.0
    # Lipschitz 보고 허용오차
    LIPSCHITZ_TOL: float = 0.05

    # ── Killing 장 ──
    KILLING_TOL: float = 1e-8
    # |v| 가 이 값보다 작으면 편극(polarization) 실패
    POLARIZATION_THRESHOLD: float = 1e-6

    # ── ε-정칙성 스캐너 작업 상수 ──
    EPS0: float = 1e-2
    SCANNER_K: float = 1e3

    # ── 실행 옵션 ──
    THREADS: int = 1
    LOG_LEVEL: str = "WARNING"

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        env_prefix = "EPSREG_"


settings = Settings()
