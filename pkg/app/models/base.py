"""
모델 다양체 기본 타입

카탈로그의 모든 해석적 모델이 공유하는 인터페이스와 공통 구현입니다.

타입:
    ChartPoint     → 차트 이름 + 좌표
    Region         → 샘플링 영역 명세 (full / box / point)
    SampledDomain  → 구적 가중치가 붙은 표본점 집합
    KillingField   → 좌표 벡터장 + ∇v (정규직교 틀 성분)
    ModelManifold  → 계량, 곡률, 거리, 공 부피, 샘플링 오라클

수치 모델(측지선 슈팅이 필요한 모델)은 ShootingModel을 상속하여
상태 벡터 형태의 측지선 방정식만 정의하면 거리·공 구적을 얻습니다.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from app.config import settings
from app.exceptions import ChartCoverageError, ShootingError
from app.models import geometry
from app.services import tensor4

logger = logging.getLogger(__name__)


# ══════════════════════════════════════════════
# 값 타입
# ══════════════════════════════════════════════

@dataclass(frozen=True)
class ChartPoint:
    """차트 좌표점"""
    chart: str
    coords: tuple[float, ...]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class Region:
    """
    샘플링 영역 명세

    kind:
        "full"  → 차트 전체 (콤팩트 모델만)
        "box"   → lower ≤ x ≤ upper 좌표 상자
        "point" → 단일점, 가중치 = cell_volume
    """
    kind: str = "full"
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    point: tuple[float, ...] | None = None
    cell_volume: float | None = None


@dataclass
class SampledDomain:
    """구적 가중치(길이⁴ 측도)가 붙은 표본점 집합. 점 순서는 결정적입니다."""
    points: np.ndarray
    weights: np.ndarray
    model_name: str
    chart: str
    resolution: float
    seed: int | None = None
    region: Region | None = None
    # 상위 표본(ambient)에서의 인덱스. restrict()로 만든 부분집합에만 존재
    parent_indices: np.ndarray | None = None
    # 차트 전체가 아닌 상자 영역의 바깥 셀 층 (두께화 범위 검사용)
    boundary_mask: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def total_volume(self) -> float:
        return float(np.sum(self.weights))

    def chart_point(self, i: int) -> ChartPoint:
        return ChartPoint(self.chart, tuple(float(c) for c in self.points[i]))

    def restrict(self, mask: np.ndarray) -> "SampledDomain":
        """mask가 참인 점만 남긴 부분 영역. parent_indices는 이 표본 기준 인덱스"""
        idx = np.flatnonzero(mask)
        return SampledDomain(
            points=self.points[idx],
            weights=self.weights[idx],
            model_name=self.model_name,
            chart=self.chart,
            resolution=self.resolution,
            seed=self.seed,
            region=self.region,
            parent_indices=idx,
            boundary_mask=None if self.boundary_mask is None else self.boundary_mask[idx],
        )


@dataclass
class KillingField:
    """
    Killing 벡터장

    vector: (B, n) 좌표 → (B, n) 좌표 성분 v^i
    domain_note: 편극(|v| > 0) 이 성립하는 영역 설명
    """
    name: str
    vector: object
    domain_note: str = ""


@dataclass
class KillingValue:
    """한 점에서의 Killing 장 값: 틀 성분 v[a], ∇v (N[a,b] = ⟨∇_{e_b}v, e_a⟩), |v|"""
    v: np.ndarray
    nabla: np.ndarray
    norm: float

    @property
    def killing_residual(self) -> float:
        return float(np.max(np.abs(self.nabla + self.nabla.T)))


# ══════════════════════════════════════════════
# 모델 다양체
# ══════════════════════════════════════════════

class ModelManifold:
    """
    해석적 모델 다양체 공통 구현

    서브클래스가 채우는 항목:
        name, dimension, chart, lower, upper, periodic, params
        metric(X), lambda_ricci, diameter, compact
        pairwise_distance(P, Q), ball_volume(p, r), ball_sup_rm(p, r)
    """
    name: str = "model"
    chart: str = "chart"
    dimension: int = 4
    homogeneous: bool = False
    compact: bool = True
    # 하한 거리가 정확한 거리와 같은 모델 (해석적 거리)
    closed_form_distance: bool = True

    def __init__(self, params: dict):
        self.params = dict(params)
        self.lower = np.zeros(self.dimension)
        self.upper = np.ones(self.dimension)
        self.periodic = np.zeros(self.dimension, dtype=bool)

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({args})"

    # ── 계량 / 곡률 ──

    def metric(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def frame(self, X: np.ndarray) -> np.ndarray:
        return geometry.orthonormal_frame(self.metric(np.atleast_2d(X)))

    def volume_density(self, X: np.ndarray) -> np.ndarray:
        """√det g"""
        return np.sqrt(np.linalg.det(self.metric(np.atleast_2d(X))))

    def check_chart(self, X: np.ndarray, reach: float = 0.0, what: str = "점", key: str | None = None) -> None:
        """비주기 축에서 X ± reach 가 차트 범위 안에 있는지 검사합니다."""
        X = np.atleast_2d(X)
        open_axes = ~self.periodic
        if not np.any(open_axes):
            return
        margin_lo = X[:, open_axes] - reach - self.lower[open_axes]
        margin_hi = self.upper[open_axes] - (X[:, open_axes] + reach)
        margin = float(min(margin_lo.min(), margin_hi.min()))
        if margin < 0.0:
            raise ChartCoverageError(
                f"{self.name}: {what}이(가) 차트 범위를 벗어납니다 (여유 {margin:.3e})",
                margin=margin,
                key=key,
            )

    def check_box(self, lower: np.ndarray, upper: np.ndarray) -> None:
        self.check_chart(np.stack([lower, upper]), 0.0, "샘플링 영역", key="domain.region")

    def curvature_fd(self, X: np.ndarray, h: float | None = None) -> np.ndarray:
        """독립 유한차분 오라클 (B, 4, 4, 4, 4)"""
        h = settings.FD_STEP if h is None else h
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.check_chart(X, geometry.RIEMANN_REACH * h, "유한차분 스텐실")
        return geometry.riemann_fd(self.metric, X, h)

    def curvature_batch(self, X: np.ndarray) -> np.ndarray:
        """정규직교 틀 곡률 성분 (B, 4, 4, 4, 4). 기본은 유한차분 오라클"""
        return self.curvature_fd(X)

    def curvature_at(self, p) -> tensor4.CurvatureTensor:
        X = as_coords(p)[None, :]
        self.check_chart(X, 0.0)
        comps = self.curvature_batch(X)[0]
        return tensor4.CurvatureTensor(tensor4.project_curvature(comps))

    def invariants(self, X: np.ndarray) -> dict[str, np.ndarray]:
        """점별 곡률 불변량 (|Rm|², R, |R̊ic|², |W±|², P_χ, P_τ)"""
        X = np.atleast_2d(X)
        if self.homogeneous:
            one = tensor4.batch_invariants(self.curvature_batch(X[:1]))
            return {k: np.full(len(X), v[0]) for k, v in one.items()}
        return tensor4.batch_invariants(self.curvature_batch(X))

    def rm_norm(self, X: np.ndarray) -> np.ndarray:
        return np.sqrt(self.invariants(X)["rm_sq"])

    def ricci_lower_bound_check(self, X: np.ndarray) -> dict:
        """표본점에서 Ric ≥ −Λ² 를 고윳값으로 확인합니다."""
        comps = self.curvature_batch(np.atleast_2d(X))
        ric = np.einsum("zabad->zbd", comps)
        min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (ric + np.swapaxes(ric, 1, 2)))))
        lam = self.lambda_ricci
        return {
            "min_ricci_eigenvalue": min_eig,
            "lambda": lam,
            "holds": bool(min_eig >= -(lam**2) * (1.0 + 1e-9) - 1e-9),
        }

    @property
    def lambda_ricci(self) -> float:
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def coverage_radius(self) -> float:
        """공 구적이 유효한 최대 반경"""
        return math.inf

    def killing_fields(self) -> list[KillingField]:
        return []

    def killing_value(self, kf: KillingField, p, h: float | None = None) -> KillingValue:
        """
        Killing 장의 틀 성분과 공변미분을 유한차분 크리스토펠로 계산합니다.

        N[a, b] = E⁻¹[a, i] E[j, b] (∂_j v^i + Γ^i_jk v^k)
        """
        h = settings.FD_STEP if h is None else h
        X = as_coords(p)[None, :]
        self.check_chart(X, 2.0 * h, "Killing 장 스텐실")
        g = self.metric(X)
        E = geometry.orthonormal_frame(g)
        Einv = np.linalg.inv(E)
        v = kf.vector(X)
        dv = geometry.fd_partials(kf.vector, X, h)  # [z, j, i]
        gamma = geometry.christoffel(self.metric, X, h)
        cov = dv + np.einsum("zijk,zk->zji", gamma, v)  # [z, j, i] = ∇_j v^i
        nabla = np.einsum("zai,zjb,zji->zab", Einv, E, cov)[0]
        v_frame = Einv[0] @ v[0]
        norm = float(np.sqrt(v[0] @ g[0] @ v[0]))
        return KillingValue(v=v_frame, nabla=nabla, norm=norm)

    # ── 거리 ──

    def pairwise_distance(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """쌍별 측지 거리 (B,)"""
        raise NotImplementedError

    def distance_lower_bound(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        return self.pairwise_distance(P, Q)

    def distance(self, p, q) -> float:
        return float(self.pairwise_distance(as_coords(p)[None, :], as_coords(q)[None, :])[0])

    def distance_matrix(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(P)
        Q = np.atleast_2d(Q)
        pp = np.repeat(P, len(Q), axis=0)
        qq = np.tile(Q, (len(P), 1))
        return self.pairwise_distance(pp, qq).reshape(len(P), len(Q))

    # ── 공 ──

    def ball_volume(self, p, r: float) -> float:
        nodes, weights = self.ball_nodes(p, r)
        return float(np.sum(weights))

    def ball_nodes(self, p, r: float) -> tuple[np.ndarray, np.ndarray]:
        """공 B(p, r) 구적 노드(차트 좌표)와 가중치. 균질 모델은 중심 한 점 + 전체 부피"""
        if self.homogeneous:
            return as_coords(p)[None, :], np.array([self.ball_volume(p, r)])
        raise NotImplementedError

    def ball_integral(self, p, r: float, integrand) -> tuple[float, float]:
        """(∫_B f, Vol B). integrand: (B, n) 좌표 → (B,) 값"""
        if r <= 0.0:
            return 0.0, 0.0
        nodes, weights = self.ball_nodes(p, r)
        vals = np.asarray(integrand(nodes), dtype=float)
        return float(np.sum(weights * vals)), float(np.sum(weights))

    def ball_sup_rm(self, p, r: float, resolution: float | None = None) -> float:
        """sup_{B(p, r)} |Rm|"""
        raise NotImplementedError

    # ── 샘플링 ──

    def full_region(self) -> Region:
        if not self.compact:
            raise ChartCoverageError(
                f"{self.name}: 비콤팩트 모델은 전체 영역을 샘플링할 수 없습니다.", margin=-math.inf, key="domain.region"
            )
        return Region(kind="box", lower=tuple(self.lower), upper=tuple(self.upper))

    def axis_scales(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """상자 중심에서 좌표축 방향 계량 길이 척도 √g_ii"""
        center = 0.5 * (lower + upper)
        return np.sqrt(np.diag(self.metric(center[None, :])[0]))

    def sample_domain(self, region: Region | None, resolution: float, seed: int | None = None, jitter: float = 0.0) -> SampledDomain:
        """
        영역을 중점 격자로 샘플링하고 √det g × 셀 부피 가중치를 붙입니다.

        Args:
            region: 영역 명세 (None이면 전체)
            resolution: 목표 셀 길이 (계량 길이)
            seed: 흔들기(jitter) 난수 시드
            jitter: 셀 크기 대비 흔들기 비율 (0이면 결정적 격자)

        Returns:
            SampledDomain (해상도가 영역보다 거칠면 전체 가중치를 가진 단일점)
        """
        if resolution <= 0.0:
            raise ValueError(f"resolution은 양수여야 합니다: {resolution}")
        region = region or Region(kind="full")
        if region.kind == "point":
            X = np.asarray(region.point, dtype=float)[None, :]
            self.check_chart(X)
            vol = region.cell_volume if region.cell_volume is not None else resolution**self.dimension
            return SampledDomain(X, np.array([float(vol)]), self.name, self.chart, resolution, seed, region)

        full = region.kind == "full"
        box = self.full_region() if full else region
        lower = np.asarray(box.lower, dtype=float)
        upper = np.asarray(box.upper, dtype=float)
        self.check_box(lower, upper)
        if np.any(upper <= lower):
            raise ValueError("영역 상자의 upper는 lower보다 커야 합니다.")

        extent = upper - lower
        counts = np.maximum(1, np.ceil(extent * self.axis_scales(lower, upper) / resolution).astype(int))
        if np.all(counts == 1):
            center = 0.5 * (lower + upper)
            vol = self._box_volume(lower, upper)
            logger.warning("%s: 해상도 %.3g 가 영역보다 거칠어 단일점 표본을 사용합니다.", self.name, resolution)
            return SampledDomain(center[None, :], np.array([vol]), self.name, self.chart, resolution, seed, region)

        cell = extent / counts
        axes = [lower[i] + (np.arange(counts[i]) + 0.5) * cell[i] for i in range(self.dimension)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dimension)
        if jitter > 0.0:
            rng = np.random.default_rng(seed)
            grid = grid + rng.uniform(-0.5, 0.5, size=grid.shape) * jitter * cell
        weights = self.volume_density(grid) * float(np.prod(cell))

        boundary = None
        if not full:
            idx = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1).reshape(-1, self.dimension)
            chart_wide = np.isclose(lower, self.lower) & np.isclose(upper, self.upper)
            open_faces = ~chart_wide
            boundary = np.any(((idx == 0) | (idx == counts - 1)) & open_faces[None, :], axis=1)
        return SampledDomain(grid, weights, self.name, self.chart, resolution, seed, region, boundary_mask=boundary)

    def _box_volume(self, lower: np.ndarray, upper: np.ndarray, order: int = 8) -> float:
        """상자의 리만 부피 (축별 가우스 곱 규칙)"""
        nodes = [geometry.gauss_legendre(lower[i], upper[i], order) for i in range(self.dimension)]
        xs = np.stack(np.meshgrid(*[n[0] for n in nodes], indexing="ij"), axis=-1).reshape(-1, self.dimension)
        ws = np.prod(np.stack(np.meshgrid(*[n[1] for n in nodes], indexing="ij"), axis=-1).reshape(-1, self.dimension), axis=1)
        return float(np.sum(ws * self.volume_density(xs)))


def as_coords(p) -> np.ndarray:
    if isinstance(p, ChartPoint):
        return p.array
    return np.asarray(p, dtype=float).reshape(-1)


# ══════════════════════════════════════════════
# 측지선 슈팅 모델
# ══════════════════════════════════════════════

class ShootingModel(ModelManifold):
    """
    수치 측지선으로 거리와 공 구적을 계산하는 모델

    서브클래스가 정의하는 상태 표현:
        _initial_state(P, V)      → 측지선 초기 상태 (V는 정규직교 틀 성분)
        _rhs(state)               → 상태 미분
        _project(state)           → 매 단계 보정 (없으면 None 반환 함수)
        _position(state)          → 주변(ambient) 위치
        _ambient(Q)               → 차트 좌표 → 주변 위치
        _residual(pos, target)    → 끝점 잔차 벡터
        _ambient_gram(pos)        → 주변 좌표에서의 계량 행렬
        _to_chart(pos)            → 주변 위치 → 차트 좌표
        _initial_guess(P, Q)      → 초기 속도 추정 (틀 성분)
        _exact_mask(P, Q)         → 하한이 곧 정확한 거리인 쌍
    """
    closed_form_distance = False

    def _project(self, state):
        return state

    def exp_map(self, P: np.ndarray, V: np.ndarray, steps: int | None = None) -> np.ndarray:
        """지수사상 exp_P(V) 의 주변 위치 (B, m)"""
        steps = settings.RK4_STEPS if steps is None else steps
        state = self._initial_state(np.atleast_2d(P), np.atleast_2d(V))
        return self._position(geometry.rk4(self._rhs, state, steps, self._project))

    def shoot(self, P: np.ndarray, Q: np.ndarray, tol: float | None = None, max_iter: int | None = None) -> np.ndarray:
        """
        배치 가우스-뉴턴 슈팅으로 exp_P(V) = Q 인 초기 속도 V 를 찾습니다.

        Returns:
            V (B, n) 틀 성분. 측지선 길이 = |V|
        Raises:
            ShootingError: 수렴하지 않은 쌍이 있을 때 (하한, 현재 길이) 구간 포함
        """
        tol = settings.SHOOTING_TOL if tol is None else tol
        max_iter = settings.SHOOTING_MAX_ITER if max_iter is None else max_iter
        P = np.atleast_2d(P)
        Q = np.atleast_2d(Q)
        target = self._ambient(Q)
        V = self._initial_guess(P, Q)
        n = V.shape[1]

        def resid(Pb, Vb, Tb):
            return self._residual(self.exp_map(Pb, Vb), Tb)

        res = resid(P, V, target)
        err = np.linalg.norm(res, axis=1)
        for _ in range(max_iter):
            active = np.flatnonzero(err > tol)
            if len(active) == 0:
                break
            Pa, Va, Ta, ra = P[active], V[active], target[active], res[active]
            delta = 1e-7 * np.maximum(1.0, np.linalg.norm(Va, axis=1))
            Pj = np.repeat(Pa, n, axis=0)
            Tj = np.repeat(Ta, n, axis=0)
            Vj = np.repeat(Va, n, axis=0) + (np.tile(np.eye(n), (len(active), 1)) * np.repeat(delta, n)[:, None])
            rj = resid(Pj, Vj, Tj).reshape(len(active), n, -1)
            jac = np.swapaxes((rj - ra[:, None, :]) / delta[:, None, None], 1, 2)  # (A, m, n)
            jtj = np.einsum("amn,amk->ank", jac, jac) + 1e-14 * np.eye(n)[None]
            step = -np.linalg.solve(jtj, np.einsum("amn,am->an", jac, ra)[..., None])[..., 0]

            alpha = np.ones(len(active))
            accepted = np.zeros(len(active), dtype=bool)
            new_v = Va.copy()
            new_r = ra.copy()
            for _ in range(10):
                todo = ~accepted
                if not np.any(todo):
                    break
                trial = Va[todo] + alpha[todo, None] * step[todo]
                tr = resid(Pa[todo], trial, Ta[todo])
                better = np.linalg.norm(tr, axis=1) < np.linalg.norm(ra[todo], axis=1)
                sel = np.flatnonzero(todo)[better]
                new_v[sel] = trial[better]
                new_r[sel] = tr[better]
                accepted[sel] = True
                alpha[todo] *= 0.5
            V[active] = new_v
            res[active] = new_r
            err[active] = np.linalg.norm(new_r, axis=1)

        failed = np.flatnonzero(err > tol)
        if len(failed):
            i = failed[0]
            lb = float(self.distance_lower_bound(P[i:i + 1], Q[i:i + 1])[0])
            raise ShootingError(
                f"{self.name}: 측지선 슈팅이 수렴하지 않았습니다 (잔차 {err[i]:.2e}, 쌍 {len(failed)}개 실패)",
                bracket=(lb, float(np.linalg.norm(V[i]))),
            )
        return V

    def pairwise_distance(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        lb = self.distance_lower_bound(P, Q)
        out = lb.copy()
        same = np.all(np.isclose(P, Q, rtol=0.0, atol=1e-15), axis=1)
        out[same] = 0.0
        todo = np.flatnonzero(~same & ~self._exact_mask(P, Q))
        if len(todo):
            V = self.shoot(P[todo], Q[todo])
            out[todo] = np.maximum(np.linalg.norm(V, axis=1), lb[todo])
        return out

    def check_ball(self, p, r: float) -> None:
        if r > self.coverage_radius:
            raise ChartCoverageError(
                f"{self.name}: 공 반경 {r:.4g} 가 구적 범위 {self.coverage_radius:.4g} 를 넘습니다.",
                margin=self.coverage_radius - r,
            )

    def ball_nodes(self, p, r: float, radial: int = 8, angular: int = 6) -> tuple[np.ndarray, np.ndarray]:
        """
        극좌표 지수사상 구적: 노드 exp_p(t u), 가중치 w_t t^{n−1} w_u √det(Jᵀ G J)

        J 는 지수사상을 접벡터 성분으로 중심차분한 야코비안입니다.
        """
        self.check_ball(p, r)
        n = self.dimension
        P0 = as_coords(p)[None, :]
        ts, wt = geometry.gauss_legendre(0.0, r, radial)
        dirs, wu = geometry.sphere_rule(n, angular)
        V = (ts[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        weights = (wt[:, None] * ts[:, None] ** (n - 1) * wu[None, :]).reshape(-1)
        Pb = np.repeat(P0, len(V), axis=0)

        h = settings.FD_STEP * max(r, 1e-12)
        shifted = np.concatenate([V + s * h * np.eye(n)[k] for k in range(n) for s in (1.0, -1.0)], axis=0)
        pos = self.exp_map(np.concatenate([Pb, np.tile(Pb, (2 * n, 1))]), np.concatenate([V, shifted]))
        centre = pos[: len(V)]
        plus_minus = pos[len(V):].reshape(n, 2, len(V), -1)
        jac = np.stack([(plus_minus[k, 0] - plus_minus[k, 1]) / (2.0 * h) for k in range(n)], axis=-1)  # (B, m, n)
        gram = np.einsum("bmi,bmk,bkj->bij", jac, self._ambient_gram(centre), jac)
        density = np.sqrt(np.maximum(np.linalg.det(gram), 0.0))
        return self._to_chart(centre), weights * density

    def ball_volume(self, p, r: float) -> float:
        if r <= 0.0:
            return 0.0
        return float(np.sum(self.ball_nodes(p, r)[1]))


# ══════════════════════════════════════════════
# 준위 프로파일 sup 오라클
# ══════════════════════════════════════════════

class LevelProfileMixin:
    """
    |Rm| 이 1-Lipschitz 준위함수 ℓ 만의 함수이고, 공 B(p, r) 이 준위 구간
    [max(0, ℓ(p) − r), ℓ(p) + r] 전체를 지나는 모델의 sup 오라클.

    서브클래스: level(X), rm_profile(levels), max_level, profile_knots
    """
    max_level: float = math.inf

    @property
    def profile_knots(self) -> np.ndarray:
        return np.empty(0)

    def ball_sup_rm(self, p, r: float, resolution: float | None = None) -> float:
        lp = float(self.level(as_coords(p)[None, :])[0])
        lo = max(0.0, lp - r)
        hi = min(self.max_level, lp + r)
        step = resolution if resolution is not None else r * settings.BALL_RESOLUTION_FRACTION
        count = max(2, int(math.ceil((hi - lo) / max(step, 1e-300))) + 1)
        knots = self.profile_knots
        levels = np.concatenate([np.linspace(lo, hi, count), knots[(knots >= lo) & (knots <= hi)]])
        return float(np.max(self.rm_profile(levels)))
