"""
곱·휘어진 곱 모델

ProductS2S2   → S²(a) × S²(b), 균질, 닫힌 형식 거리
WarpedS1S3    → λ²(g_S³ + f² dθ²), f = 1 + a·cos χ. 수치 측지선 거리,
                 Killing 장 ∂_θ (S¹ 회전), ∂_φ (S³ 회전)
"""
import math

import numpy as np
from scipy.integrate import quad

from app.exceptions import ParameterError
from app.models.base import KillingField, LevelProfileMixin, ModelManifold, ShootingModel
from app.services import tensor4

TWO_PI = 2.0 * math.pi


def _sphere_angle(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """단위벡터 사이 각 (안정한 atan2 형식)"""
    return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=1), np.linalg.norm(x + y, axis=1))


def _wrap_angle(d: np.ndarray) -> np.ndarray:
    return d - TWO_PI * np.round(d / TWO_PI)


def _s2(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1)


class ProductS2S2(ModelManifold):
    """S²(a) × S²(b), 차트 (θ₁, φ₁, θ₂, φ₂)"""
    name = "s2xs2"
    chart = "spherical_pair"
    homogeneous = True
    compact = True

    def __init__(self, a: float = 1.0, b: float = 1.0):
        if a <= 0.0 or b <= 0.0:
            raise ParameterError(f"반지름 a, b는 양수여야 합니다: a={a}, b={b}", module="models")
        super().__init__({"a": a, "b": b})
        self.a = float(a)
        self.b = float(b)
        self.lower = np.zeros(4)
        self.upper = np.array([math.pi, TWO_PI, math.pi, TWO_PI])
        self.periodic = np.array([False, True, False, True])

    def metric(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        ones = np.ones(len(X))
        diag = np.stack([
            self.a**2 * ones,
            (self.a * np.sin(X[:, 0])) ** 2,
            self.b**2 * ones,
            (self.b * np.sin(X[:, 2])) ** 2,
        ], axis=1)
        return np.einsum("zi,ij->zij", diag, np.eye(4))

    def curvature_batch(self, X: np.ndarray) -> np.ndarray:
        op = np.zeros((6, 6))
        op[0, 0] = 1.0 / self.a**2  # (01)
        op[3, 3] = 1.0 / self.b**2  # (23)
        comps = tensor4.from_bivector(op)
        return np.broadcast_to(comps, (len(np.atleast_2d(X)), 4, 4, 4, 4)).copy()

    @property
    def lambda_ricci(self) -> float:
        return 0.0

    @property
    def diameter(self) -> float:
        return math.pi * math.hypot(self.a, self.b)

    def factor_distances(self, P: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        P, Q = np.atleast_2d(P), np.atleast_2d(Q)
        d1 = self.a * _sphere_angle(_s2(P[:, 0], P[:, 1]), _s2(Q[:, 0], Q[:, 1]))
        d2 = self.b * _sphere_angle(_s2(P[:, 2], P[:, 3]), _s2(Q[:, 2], Q[:, 3]))
        return d1, d2

    def pairwise_distance(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        d1, d2 = self.factor_distances(P, Q)
        return np.hypot(d1, d2)

    def _cap_area(self, rho: float) -> float:
        t = min(max(rho, 0.0), math.pi * self.b) / self.b
        return TWO_PI * self.b**2 * 2.0 * math.sin(0.5 * t) ** 2

    def ball_volume(self, p, r: float) -> float:
        """∫₀^{min(r, πa)} 2πa sin(t/a) · |cap_b(√(r² − t²))| dt"""
        if r <= 0.0:
            return 0.0
        upper = min(r, math.pi * self.a)
        value, _ = quad(
            lambda t: TWO_PI * self.a * math.sin(t / self.a) * self._cap_area(math.sqrt(max(r * r - t * t, 0.0))),
            0.0, upper, limit=200, epsabs=0.0, epsrel=1e-12,
        )
        return value

    def ball_sup_rm(self, p, r: float, resolution: float | None = None) -> float:
        return math.sqrt(4.0 / self.a**4 + 4.0 / self.b**4)


class WarpedS1S3(LevelProfileMixin, ShootingModel):
    """
    휘어진 곱 S¹ ×_f S³

    차트 (χ, ψ, φ, θ), χ, ψ ∈ [0, π], φ, θ ∈ [0, 2π) 주기.
    계량 λ²(dχ² + sin²χ dψ² + sin²χ sin²ψ dφ² + f(χ)² dθ²), f = 1 + a cos χ, 0 ≤ a < 1.

    곡률은 2-형식 기저에서 대각: 밑공간 쌍 1/λ², θ 를 포함한 쌍 κ/λ², κ = a cos χ / f.
    측지선은 S³ ⊂ R⁴ 매장 좌표와 θ 로 적분합니다.
    """
    name = "warped_s1s3"
    chart = "hopf_polar"
    homogeneous = False
    compact = True

    def __init__(self, warp: float = 0.3, scale: float = 1.0):
        if not 0.0 <= warp < 1.0:
            raise ParameterError(f"warp는 [0, 1) 범위여야 합니다: {warp}", module="models")
        if scale <= 0.0:
            raise ParameterError(f"scale은 양수여야 합니다: {scale}", module="models")
        super().__init__({"warp": warp, "scale": scale})
        self.warp = float(warp)
        self.scale = float(scale)
        self.lower = np.zeros(4)
        self.upper = np.array([math.pi, math.pi, TWO_PI, TWO_PI])
        self.periodic = np.array([False, False, True, True])
        self.max_level = self.scale * math.pi

    # ── 계량 / 곡률 ──

    def warping(self, chi: np.ndarray) -> np.ndarray:
        return 1.0 + self.warp * np.cos(chi)

    def metric(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        sc, sp = np.sin(X[:, 0]), np.sin(X[:, 1])
        diag = np.stack([np.ones(len(X)), sc**2, (sc * sp) ** 2, self.warping(X[:, 0]) ** 2], axis=1)
        return self.scale**2 * np.einsum("zi,ij->zij", diag, np.eye(4))

    def mixed_curvature(self, chi: np.ndarray) -> np.ndarray:
        """θ 방향을 포함한 단면곡률 × λ²: κ = −f''/f = a cos χ / f"""
        return self.warp * np.cos(chi) / self.warping(chi)

    def curvature_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        kappa = self.mixed_curvature(X[:, 0])
        base = tensor4.from_bivector(np.diag([1.0, 1.0, 0.0, 0.0, 0.0, 1.0]))
        mixed = tensor4.from_bivector(np.diag([0.0, 0.0, 1.0, 1.0, 1.0, 0.0]))
        return (base[None] + kappa[:, None, None, None, None] * mixed[None]) / self.scale**2

    @property
    def lambda_ricci(self) -> float:
        # 최소 리치 고윳값 3κ(π) = −3a/(1 − a)
        return math.sqrt(3.0 * self.warp / (1.0 - self.warp)) / self.scale

    @property
    def diameter(self) -> float:
        """지름의 상한: 밑공간 πλ + 섬유 πλ(1 + a)"""
        return self.scale * math.hypot(math.pi, math.pi * (1.0 + self.warp))

    @property
    def coverage_radius(self) -> float:
        return 0.5 * math.pi * self.scale * (1.0 - self.warp)

    # ── 준위 프로파일 (ℓ = λχ) ──

    def level(self, X: np.ndarray) -> np.ndarray:
        return self.scale * np.atleast_2d(X)[:, 0]

    def rm_profile(self, levels: np.ndarray) -> np.ndarray:
        kappa = self.mixed_curvature(np.clip(levels / self.scale, 0.0, math.pi))
        return np.sqrt(12.0 * (1.0 + kappa**2)) / self.scale**2

    # ── Killing 장 ──

    def killing_fields(self) -> list[KillingField]:
        def theta_field(X):
            out = np.zeros_like(np.atleast_2d(X), dtype=float)
            out[:, 3] = 1.0
            return out

        def phi_field(X):
            out = np.zeros_like(np.atleast_2d(X), dtype=float)
            out[:, 2] = 1.0
            return out

        return [
            KillingField("rotation_theta", theta_field, "전역 (|∂θ| = λf ≥ λ(1 − a))"),
            KillingField("rotation_phi", phi_field, "축 sin χ sin ψ = 0 밖"),
        ]

    # ── S³ 매장 ──

    @staticmethod
    def embed_s3(X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        chi, psi, phi = X[:, 0], X[:, 1], X[:, 2]
        sc, sp = np.sin(chi), np.sin(psi)
        return np.stack([np.cos(chi), sc * np.cos(psi), sc * sp * np.cos(phi), sc * sp * np.sin(phi)], axis=1)

    @staticmethod
    def _unit_tangents(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        chi, psi, phi = X[:, 0], X[:, 1], X[:, 2]
        cc, sc, cp, sp = np.cos(chi), np.sin(chi), np.cos(psi), np.sin(psi)
        zero = np.zeros(len(X))
        u_chi = np.stack([-sc, cc * cp, cc * sp * np.cos(phi), cc * sp * np.sin(phi)], axis=1)
        u_psi = np.stack([zero, -sp, cp * np.cos(phi), cp * np.sin(phi)], axis=1)
        u_phi = np.stack([zero, zero, -np.sin(phi), np.cos(phi)], axis=1)
        return u_chi, u_psi, u_phi

    def s3_distance(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        return _sphere_angle(self.embed_s3(P), self.embed_s3(Q))

    def distance_lower_bound(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """λ √(d_S³² + ((1 − a)Δθ)²), a = 0 이면 정확한 곱 거리"""
        P, Q = np.atleast_2d(P), np.atleast_2d(Q)
        dtheta = _wrap_angle(Q[:, 3] - P[:, 3])
        return self.scale * np.hypot(self.s3_distance(P, Q), (1.0 - self.warp) * dtheta)

    def _exact_mask(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        if self.warp == 0.0:
            return np.ones(len(P), dtype=bool)
        # θ 가 같으면 밑공간 단면의 대원이 최단
        return np.abs(_wrap_angle(Q[:, 3] - P[:, 3])) < 1e-15

    # ── 측지선 상태: [x(4), θ, ẋ(4), θ̇] ──

    def _initial_state(self, P: np.ndarray, V: np.ndarray) -> np.ndarray:
        x = self.embed_s3(P)
        u_chi, u_psi, u_phi = self._unit_tangents(P)
        xdot = (V[:, 0:1] * u_chi + V[:, 1:2] * u_psi + V[:, 2:3] * u_phi) / self.scale
        thetadot = V[:, 3] / (self.scale * self.warping(P[:, 0]))
        return np.concatenate([x, P[:, 3:4], xdot, thetadot[:, None]], axis=1)

    def _rhs(self, y: np.ndarray) -> np.ndarray:
        x, xdot, thetadot = y[:, 0:4], y[:, 5:9], y[:, 9]
        f = 1.0 + self.warp * x[:, 0]
        speed2 = np.sum(xdot**2, axis=1)
        e0 = np.zeros_like(x)
        e0[:, 0] = 1.0
        force = (f * self.warp * thetadot**2)[:, None] * (e0 - x[:, 0:1] * x)
        xddot = -speed2[:, None] * x + force
        thetaddot = -2.0 * self.warp * xdot[:, 0] * thetadot / f
        return np.concatenate([xdot, thetadot[:, None], xddot, thetaddot[:, None]], axis=1)

    def _project(self, y: np.ndarray) -> np.ndarray:
        y = y.copy()
        x = y[:, 0:4] / np.linalg.norm(y[:, 0:4], axis=1, keepdims=True)
        y[:, 0:4] = x
        y[:, 5:9] -= np.sum(x * y[:, 5:9], axis=1, keepdims=True) * x
        return y

    def _position(self, y: np.ndarray) -> np.ndarray:
        return y[:, 0:5]

    def _ambient(self, Q: np.ndarray) -> np.ndarray:
        return np.concatenate([self.embed_s3(Q), Q[:, 3:4]], axis=1)

    def _residual(self, pos: np.ndarray, target: np.ndarray) -> np.ndarray:
        return np.concatenate([pos[:, 0:4] - target[:, 0:4], _wrap_angle(pos[:, 4:5] - target[:, 4:5])], axis=1)

    def _ambient_gram(self, pos: np.ndarray) -> np.ndarray:
        f = 1.0 + self.warp * pos[:, 0]
        diag = np.stack([np.ones(len(pos))] * 4 + [f**2], axis=1)
        return self.scale**2 * np.einsum("zi,ij->zij", diag, np.eye(5))

    def _to_chart(self, pos: np.ndarray) -> np.ndarray:
        x = pos[:, 0:4] / np.linalg.norm(pos[:, 0:4], axis=1, keepdims=True)
        chi = np.arccos(np.clip(x[:, 0], -1.0, 1.0))
        psi = np.arctan2(np.hypot(x[:, 2], x[:, 3]), x[:, 1])
        phi = np.mod(np.arctan2(x[:, 3], x[:, 2]), TWO_PI)
        theta = np.mod(pos[:, 4], TWO_PI)
        return np.stack([chi, psi, phi, theta], axis=1)

    def _initial_guess(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        xp, xq = self.embed_s3(P), self.embed_s3(Q)
        cos_a = np.sum(xp * xq, axis=1)
        w = xq - cos_a[:, None] * xp
        wn = np.linalg.norm(w, axis=1)
        angle = np.arctan2(wn, cos_a)
        safe = np.where(wn > 1e-300, wn, 1.0)
        T = (angle / safe)[:, None] * w
        u_chi, u_psi, u_phi = self._unit_tangents(P)
        dtheta = _wrap_angle(Q[:, 3] - P[:, 3])
        f_mid = 1.0 + self.warp * 0.5 * (xp[:, 0] + xq[:, 0])
        return self.scale * np.stack([
            np.sum(T * u_chi, axis=1),
            np.sum(T * u_psi, axis=1),
            np.sum(T * u_phi, axis=1),
            f_mid * dtheta,
        ], axis=1)
