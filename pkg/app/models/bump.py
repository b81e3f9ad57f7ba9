"""
범프 계량 모델

평탄 R⁴ 의 콤팩트 지지 등각 섭동 g = λ² e^{2u} δ,
u(x) = A · exp(1 − 1/(1 − t²)), t = |x − c| / w  (t < 1, 밖에서는 0).

곡률은 유한차분 오라클로만 얻습니다. 계량이 c 중심 회전대칭이므로
|Rm| 과 리치 고윳값은 중심 거리 ℓ(x) = λ∫₀^|x−c| e^u 만의 함수이고,
한 반직선 위의 표로 sup 오라클과 Λ 를 만듭니다.
"""
import logging
import math
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid

from app.config import settings
from app.exceptions import ParameterError
from app.models import geometry
from app.models.base import LevelProfileMixin, ShootingModel, as_coords

logger = logging.getLogger(__name__)

# 프로파일 표 크기 (지지 반경 [0, w] 구간)
_PROFILE_POINTS = 401
# 표에서 얻은 리치 하한에 곱하는 여유
_LAMBDA_MARGIN = 1.05


class BumpMetric(LevelProfileMixin, ShootingModel):
    """g = λ² e^{2u} δ (A ≥ 0 이면 e^u ≥ 1 이므로 λ|x − y| 가 거리 하한)"""
    name = "bump"
    chart = "euclidean"
    homogeneous = False
    compact = False

    def __init__(self, amplitude: float = 0.3, width: float = 1.0, center=(0.0, 0.0, 0.0, 0.0), scale: float = 1.0):
        if amplitude < 0.0:
            raise ParameterError(f"amplitude는 0 이상이어야 합니다: {amplitude}", module="models")
        if width <= 0.0 or scale <= 0.0:
            raise ParameterError(f"width, scale은 양수여야 합니다: width={width}, scale={scale}", module="models")
        center = tuple(float(c) for c in center)
        if len(center) != 4:
            raise ParameterError(f"center는 4차원이어야 합니다: {center}", module="models")
        super().__init__({"amplitude": amplitude, "width": width, "center": list(center), "scale": scale})
        self.amplitude = float(amplitude)
        self.width = float(width)
        self.center = np.asarray(center)
        self.scale = float(scale)
        self.lower = np.full(4, -np.inf)
        self.upper = np.full(4, np.inf)

    # ── 등각 인자 ──

    def conformal(self, X: np.ndarray) -> np.ndarray:
        """u(x)"""
        X = np.atleast_2d(X)
        t2 = np.sum((X - self.center) ** 2, axis=1) / self.width**2
        inside = t2 < 1.0
        out = np.zeros(len(X))
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
        return out

    def conformal_gradient(self, X: np.ndarray) -> np.ndarray:
        """∇u = −2u(x − c) / (w²(1 − t²)²)"""
        X = np.atleast_2d(X)
        D = X - self.center
        t2 = np.sum(D**2, axis=1) / self.width**2
        u = self.conformal(X)
        denom = np.where(t2 < 1.0, self.width**2 * (1.0 - t2) ** 2, 1.0)
        return (-2.0 * u / denom)[:, None] * D

    def metric(self, X: np.ndarray) -> np.ndarray:
        conf = self.scale**2 * np.exp(2.0 * self.conformal(X))
        return conf[:, None, None] * np.eye(4)[None]

    # ── 회전대칭 프로파일 ──

    @cached_property
    def _profile(self) -> dict[str, np.ndarray]:
        t = np.linspace(0.0, 1.0, _PROFILE_POINTS)
        ray = self.center[None, :] + self.width * t[:, None] * np.eye(4)[0][None, :]
        levels = self.scale * self.width * cumulative_trapezoid(np.exp(self.conformal(ray)), t, initial=0.0)
        comps = geometry.riemann_fd(self.metric, ray, settings.FD_STEP * self.width)
        rm = np.sqrt(np.einsum("zabcd,zabcd->z", comps, comps))
        ric = np.einsum("zabad->zbd", comps)
        min_eig = np.linalg.eigvalsh(0.5 * (ric + np.swapaxes(ric, 1, 2)))[:, 0]
        rm[-1] = 0.0
        return {"levels": levels, "rm": rm, "min_ricci": min_eig}

    def level(self, X: np.ndarray) -> np.ndarray:
        """중심으로부터의 거리 ℓ(x). 지지 밖에서는 선형 연장"""
        X = np.atleast_2d(X)
        t = np.linalg.norm(X - self.center, axis=1) / self.width
        table = self._profile["levels"]
        grid = np.linspace(0.0, 1.0, _PROFILE_POINTS)
        inside = np.interp(np.minimum(t, 1.0), grid, table)
        return inside + self.scale * self.width * np.maximum(t - 1.0, 0.0)

    @property
    def support_level(self) -> float:
        return float(self._profile["levels"][-1])

    @property
    def profile_knots(self) -> np.ndarray:
        return self._profile["levels"]

    def rm_profile(self, levels: np.ndarray) -> np.ndarray:
        table = self._profile
        return np.interp(levels, table["levels"], table["rm"], right=0.0)

    def curvature_sup(self) -> float:
        return float(np.max(self._profile["rm"]))

    @cached_property
    def lambda_ricci(self) -> float:
        worst = float(np.min(self._profile["min_ricci"]))
        lam = _LAMBDA_MARGIN * math.sqrt(max(0.0, -worst))
        logger.debug("%s: 리치 최소 고윳값 %.6g → Λ = %.6g", self.name, worst, lam)
        return lam

    @property
    def diameter(self) -> float:
        return math.inf

    @property
    def coverage_radius(self) -> float:
        """켤레점이 없는 반경 π/√(sup|Rm|) (평탄이면 ∞)"""
        sup = self.curvature_sup()
        return math.pi / math.sqrt(sup) if sup > 0.0 else math.inf

    def check_ball(self, p, r: float) -> None:
        # 지지를 만나지 않는 공은 평탄 공
        if self.scale * (np.linalg.norm(as_coords(p) - self.center) - self.width) >= r:
            return
        super().check_ball(p, r)

    # ── 거리 ──

    def distance_lower_bound(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        return self.scale * np.linalg.norm(np.atleast_2d(Q) - np.atleast_2d(P), axis=1)

    def _exact_mask(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """선분 PQ 가 지지 공을 만나지 않으면 직선이 최단 측지선"""
        D = Q - P
        length2 = np.sum(D**2, axis=1)
        s = np.where(length2 > 0.0, np.sum((self.center - P) * D, axis=1) / np.where(length2 > 0.0, length2, 1.0), 0.0)
        closest = P + np.clip(s, 0.0, 1.0)[:, None] * D
        return np.linalg.norm(closest - self.center, axis=1) >= self.width

    # ── 측지선 상태: [x(4), ẋ(4)] ──

    def _initial_state(self, P: np.ndarray, V: np.ndarray) -> np.ndarray:
        xdot = np.exp(-self.conformal(P))[:, None] * V / self.scale
        return np.concatenate([P, xdot], axis=1)

    def _rhs(self, y: np.ndarray) -> np.ndarray:
        x, xdot = y[:, 0:4], y[:, 4:8]
        grad = self.conformal_gradient(x)
        xddot = (
            -2.0 * np.sum(grad * xdot, axis=1, keepdims=True) * xdot
            + np.sum(xdot**2, axis=1, keepdims=True) * grad
        )
        return np.concatenate([xdot, xddot], axis=1)

    def _position(self, y: np.ndarray) -> np.ndarray:
        return y[:, 0:4]

    def _ambient(self, Q: np.ndarray) -> np.ndarray:
        return np.atleast_2d(Q)

    def _residual(self, pos: np.ndarray, target: np.ndarray) -> np.ndarray:
        return pos - target

    def _ambient_gram(self, pos: np.ndarray) -> np.ndarray:
        return self.metric(pos)

    def _to_chart(self, pos: np.ndarray) -> np.ndarray:
        return pos

    def _initial_guess(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        return self.scale * np.exp(self.conformal(P))[:, None] * (Q - P)
