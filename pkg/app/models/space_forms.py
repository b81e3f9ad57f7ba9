"""
상수곡률 공간형: 구면 S⁴(ρ), 쌍곡공간 H⁴(ρ)

둘 다 균질 모델이므로 곡률·공 부피·공 위 sup 은 닫힌 형식이고,
점별 불변량은 한 점에서만 계산합니다.
"""
import math

import numpy as np

from app.exceptions import ChartCoverageError, ParameterError
from app.models.base import ModelManifold
from app.services import tensor4

VOLUME_S3 = 2.0 * math.pi**2


def _check_radius(radius: float) -> float:
    if radius <= 0.0:
        raise ParameterError(f"radius는 양수여야 합니다: {radius}", module="models")
    return float(radius)


class Sphere4(ModelManifold):
    """
    둥근 구면 S⁴(ρ)

    차트 (χ₁, χ₂, χ₃, φ): 초구면 좌표, χ ∈ [0, π], φ ∈ [0, 2π) 주기.
    계량 ρ² diag(1, s₁², s₁²s₂², s₁²s₂²s₃²)
    """
    name = "sphere4"
    chart = "hyperspherical"
    homogeneous = True
    compact = True

    def __init__(self, radius: float = 1.0):
        super().__init__({"radius": radius})
        self.radius = _check_radius(radius)
        self.lower = np.zeros(4)
        self.upper = np.array([math.pi, math.pi, math.pi, 2.0 * math.pi])
        self.periodic = np.array([False, False, False, True])

    def embed(self, X: np.ndarray) -> np.ndarray:
        """차트 → R⁵ 단위구면"""
        X = np.atleast_2d(X)
        c1, c2, c3, ph = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
        s1, s2, s3 = np.sin(c1), np.sin(c2), np.sin(c3)
        return np.stack([
            np.cos(c1),
            s1 * np.cos(c2),
            s1 * s2 * np.cos(c3),
            s1 * s2 * s3 * np.cos(ph),
            s1 * s2 * s3 * np.sin(ph),
        ], axis=1)

    def metric(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        s1, s2, s3 = np.sin(X[:, 0]), np.sin(X[:, 1]), np.sin(X[:, 2])
        diag = np.stack([np.ones(len(X)), s1**2, (s1 * s2) ** 2, (s1 * s2 * s3) ** 2], axis=1)
        return self.radius**2 * np.einsum("zi,ij->zij", diag, np.eye(4))

    def curvature_batch(self, X: np.ndarray) -> np.ndarray:
        comps = tensor4.CurvatureTensor.constant_curvature(1.0 / self.radius**2).components
        return np.broadcast_to(comps, (len(np.atleast_2d(X)), 4, 4, 4, 4)).copy()

    @property
    def lambda_ricci(self) -> float:
        return 0.0

    @property
    def diameter(self) -> float:
        return math.pi * self.radius

    def pairwise_distance(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        x, y = self.embed(P), self.embed(Q)
        return self.radius * 2.0 * np.arctan2(np.linalg.norm(x - y, axis=1), np.linalg.norm(x + y, axis=1))

    def ball_volume(self, p, r: float) -> float:
        if r <= 0.0:
            return 0.0
        t = min(r / self.radius, math.pi)
        # ∫₀ᵗ sin³ = (1 − cos t)²(2 + cos t)/3, 1 − cos t = 2 sin²(t/2)
        one_minus = 2.0 * math.sin(0.5 * t) ** 2
        return VOLUME_S3 * self.radius**4 * one_minus**2 * (2.0 + math.cos(t)) / 3.0

    def ball_sup_rm(self, p, r: float, resolution: float | None = None) -> float:
        return math.sqrt(24.0) / self.radius**2


class Hyperbolic4(ModelManifold):
    """
    쌍곡공간 H⁴(ρ), 푸앵카레 공 차트 |x| < 1

    계량 ρ² · 4/(1 − |x|²)² δ. 비콤팩트이므로 전체 영역 샘플링은 허용하지 않습니다.
    """
    name = "hyperbolic4"
    chart = "poincare_ball"
    homogeneous = True
    compact = False

    def __init__(self, radius: float = 1.0):
        super().__init__({"radius": radius})
        self.radius = _check_radius(radius)
        self.lower = -np.ones(4)
        self.upper = np.ones(4)

    def check_chart(self, X: np.ndarray, reach: float = 0.0, what: str = "점", key: str | None = None) -> None:
        X = np.atleast_2d(X)
        margin = float(1.0 - np.max(np.linalg.norm(X, axis=1) + reach))
        if margin <= 0.0:
            raise ChartCoverageError(
                f"{self.name}: {what}이(가) 푸앵카레 공을 벗어납니다 (여유 {margin:.3e})",
                margin=margin,
                key=key,
            )

    def check_box(self, lower: np.ndarray, upper: np.ndarray) -> None:
        corner = np.maximum(np.abs(lower), np.abs(upper))
        self.check_chart(corner[None, :], 0.0, "샘플링 영역", key="domain.region")

    def metric(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        conf = 4.0 * self.radius**2 / (1.0 - np.sum(X**2, axis=1)) ** 2
        return conf[:, None, None] * np.eye(4)[None]

    def curvature_batch(self, X: np.ndarray) -> np.ndarray:
        comps = tensor4.CurvatureTensor.constant_curvature(-1.0 / self.radius**2).components
        return np.broadcast_to(comps, (len(np.atleast_2d(X)), 4, 4, 4, 4)).copy()

    @property
    def lambda_ricci(self) -> float:
        return math.sqrt(3.0) / self.radius

    @property
    def diameter(self) -> float:
        return math.inf

    def pairwise_distance(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        P, Q = np.atleast_2d(P), np.atleast_2d(Q)
        num = 2.0 * np.sum((P - Q) ** 2, axis=1)
        den = (1.0 - np.sum(P**2, axis=1)) * (1.0 - np.sum(Q**2, axis=1))
        return self.radius * np.arccosh(1.0 + num / den)

    def ball_volume(self, p, r: float) -> float:
        if r <= 0.0:
            return 0.0
        t = r / self.radius
        # ∫₀ᵗ sinh³ = (cosh t − 1)²(cosh t + 2)/3
        minus_one = 2.0 * math.sinh(0.5 * t) ** 2
        return VOLUME_S3 * self.radius**4 * minus_one**2 * (math.cosh(t) + 2.0) / 3.0

    def ball_sup_rm(self, p, r: float, resolution: float | None = None) -> float:
        return math.sqrt(24.0) / self.radius**2
