"""
평탄 토러스 모델

R^n / (L₁Z × … × L_nZ), 계량 λ²δ. 주기를 비등방으로 잡으면 ε-붕괴 영역을 만듭니다.
- 차트: [0, L_i) 주기 좌표
- 거리: 최소 이미지 (직사각 격자에서는 인접 3개 기본영역 열거와 같은 값)
- 공 부피: 유클리드 공 ∩ 기본영역 상자 [−L/2, L/2]^n 의 부피
- Killing 장: 좌표 평행이동 ∂_i
"""
import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma

from app.exceptions import ParameterError
from app.models.base import KillingField, ModelManifold, as_coords


def _disk_in_rectangle(r: float, a: float, b: float) -> float:
    """원판 반경 r ∩ 직사각형 [−a, a]×[−b, b] 의 넓이 (닫힌 형식)"""
    if r <= 0.0:
        return 0.0

    def antiderivative(x: float) -> float:
        x = min(x, r)
        return 0.5 * (x * math.sqrt(max(r * r - x * x, 0.0)) + r * r * math.asin(x / r))

    x0 = min(r, a)
    x1 = math.sqrt(r * r - b * b) if r > b else 0.0
    xm = min(x1, x0)
    return 4.0 * (b * xm + antiderivative(x0) - antiderivative(xm))


def clipped_ball_volume(r: float, half_widths: tuple[float, ...]) -> float:
    """
    유클리드 공 B(0, r) ∩ Π[−a_i, a_i] 의 n차원 부피.

    2차원은 닫힌 형식, 그 이상은 마지막 축에 대한 scipy quad 재귀입니다.
    """
    n = len(half_widths)
    if r <= 0.0:
        return 0.0
    if r <= min(half_widths):
        return math.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0) * r**n
    if n == 1:
        return 2.0 * min(r, half_widths[0])
    if n == 2:
        return _disk_in_rectangle(r, half_widths[0], half_widths[1])
    head, last = half_widths[:-1], half_widths[-1]
    upper = min(r, last)
    value, _ = quad(lambda x: clipped_ball_volume(math.sqrt(max(r * r - x * x, 0.0)), head), 0.0, upper, limit=200)
    return 2.0 * value


class FlatTorus(ModelManifold):
    """평탄 토러스 T^n. 곡률 작업은 n = 4, 덮개 검증은 n = 2 도 허용합니다."""
    name = "flat_torus"
    chart = "torus"
    homogeneous = True
    compact = True

    def __init__(self, periods=(1.0, 1.0, 1.0, 1.0), scale: float = 1.0):
        periods = tuple(float(L) for L in periods)
        if not periods or any(L <= 0.0 for L in periods):
            raise ParameterError(f"토러스 주기는 양수여야 합니다: {periods}", module="models")
        if scale <= 0.0:
            raise ParameterError(f"scale은 양수여야 합니다: {scale}", module="models")
        self.dimension = len(periods)
        super().__init__({"periods": list(periods), "scale": scale})
        self.periods = np.asarray(periods)
        self.scale = float(scale)
        self.lower = np.zeros(self.dimension)
        self.upper = self.periods.copy()
        self.periodic = np.ones(self.dimension, dtype=bool)

    def metric(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.broadcast_to(self.scale**2 * np.eye(self.dimension), (len(X), self.dimension, self.dimension)).copy()

    def curvature_batch(self, X: np.ndarray) -> np.ndarray:
        return np.zeros((len(np.atleast_2d(X)), 4, 4, 4, 4))

    @property
    def lambda_ricci(self) -> float:
        return 0.0

    @property
    def diameter(self) -> float:
        return 0.5 * self.scale * float(np.linalg.norm(self.periods))

    def wrap(self, D: np.ndarray) -> np.ndarray:
        """좌표 차이를 최소 이미지로 접습니다."""
        return D - self.periods * np.round(D / self.periods)

    def pairwise_distance(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        D = self.wrap(np.atleast_2d(Q) - np.atleast_2d(P))
        return self.scale * np.linalg.norm(D, axis=1)

    def ball_volume(self, p, r: float) -> float:
        if r <= 0.0:
            return 0.0
        half = tuple(0.5 * self.periods)
        return self.scale**self.dimension * clipped_ball_volume(r / self.scale, half)

    def ball_sup_rm(self, p, r: float, resolution: float | None = None) -> float:
        return 0.0

    def killing_fields(self) -> list[KillingField]:
        fields = []
        for i in range(self.dimension):
            unit = np.eye(self.dimension)[i]
            fields.append(KillingField(
                name=f"translation_{i}",
                vector=lambda X, unit=unit: np.broadcast_to(unit, np.atleast_2d(X).shape).copy(),
                domain_note="전역 (평행 벡터장)",
            ))
        return fields
