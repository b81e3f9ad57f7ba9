"""
s-국소 곡률 반경 서비스

r_R^s(p) = sup{ r ∈ (0, s) | B(p, r) 위에서 |Rm| < r⁻² }

- sup_{B(p,r)}|Rm| 은 모델의 공 sup 오라클(해상도 ≤ r/20)로 평가합니다.
- 조건 M(r)·r² < 1 은 r 에 대해 단조이므로 이분법(상대 허용오차 1e-4)으로 경계를 찾고,
  조건이 성립하는 쪽 끝값을 돌려줍니다.
- 균질 모델은 |Rm| 이 상수 M 이므로 min(s, M^{-1/2}) 를 그대로 씁니다.
- s = ∞ 는 콤팩트 모델에서 지름으로, 비콤팩트 모델에서는 반경을 두 배씩 늘려 대체합니다.

경계값에서 엄격한 부등호(<)와 ≤ 는 표본으로 구별되지 않으므로
반환값은 이분법 허용오차 안에서만 정확합니다.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from app.config import settings
from app.exceptions import ParameterError
from app.models.base import ModelManifold, SampledDomain, as_coords
from app.models.oracle import DistanceOracle
from app.services.pool import parallel_map

logger = logging.getLogger(__name__)

# s = ∞ 비콤팩트 모델에서 반경을 두 배로 늘리는 최대 횟수
_MAX_DOUBLINGS = 60


@dataclass
class RadiusField:
    """표본점별 r_R^s 값. s 는 요청값(∞ 가능), cutoff 는 실제 사용한 값 (콤팩트 모델의 ∞ 는 지름)"""
    domain: SampledDomain
    s: float
    cutoff: float
    values: np.ndarray
    model_name: str = ""
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def cutoff_mask(self) -> np.ndarray:
        """r_R^s = s 인 점 (P^s)"""
        return self.values >= self.cutoff

    def restrict(self, mask: np.ndarray) -> "RadiusField":
        return RadiusField(
            domain=self.domain.restrict(mask),
            s=self.s,
            cutoff=self.cutoff,
            values=self.values[np.asarray(mask, dtype=bool)],
            model_name=self.model_name,
            warnings=list(self.warnings),
        )

    def rows(self) -> list[dict]:
        """CSV 행: 좌표 x0..x{n−1}, r_R^s"""
        out = []
        for point, value in zip(self.domain.points, self.values):
            row = {f"x{i}": float(c) for i, c in enumerate(point)}
            row["radius"] = float(value)
            out.append(row)
        return out


@dataclass
class LipschitzReport:
    constant: float
    tolerance: float
    pairs_checked: int
    worst_pair: tuple[int, int] | None = None

    @property
    def violates(self) -> bool:
        return self.constant > 1.0 + self.tolerance


# ══════════════════════════════════════════════
# 단일점 곡률 반경
# ══════════════════════════════════════════════

def resolve_cutoff(model: ModelManifold, s: float) -> float:
    """s 를 검사하고 s = ∞ 를 콤팩트 모델의 지름으로 바꿉니다. 비콤팩트면 ∞ 그대로"""
    if not s > 0.0:
        raise ParameterError(f"cutoff s는 양수여야 합니다: {s}", module="radius", key="task.s")
    if math.isinf(s) and model.compact:
        return float(model.diameter)
    return float(s)


def _공_조건(model: ModelManifold, p, r: float, resolution: float | None) -> bool:
    """M(r) r² < 1"""
    step = None if resolution is None else min(resolution, r * settings.BALL_RESOLUTION_FRACTION)
    return model.ball_sup_rm(p, r, step) * r * r < 1.0


def _radius_with_flag(
    model: ModelManifold,
    p,
    s: float,
    resolution: float | None = None,
    rtol: float | None = None,
) -> tuple[float, str | None]:
    rtol = settings.BISECTION_RTOL if rtol is None else rtol
    s = resolve_cutoff(model, s)

    if resolution is not None and s <= resolution:
        return s, f"s={s:.6g} 가 표본 해상도 {resolution:.6g} 이하입니다 (s 반환)"

    if model.homogeneous:
        sup = model.ball_sup_rm(p, min(s, 1.0))
        return (s if sup == 0.0 else min(s, 1.0 / math.sqrt(sup))), None

    if math.isinf(s):
        hi = 1.0
        for _ in range(_MAX_DOUBLINGS):
            if not _공_조건(model, p, hi, None):
                break
            hi *= 2.0
        else:
            return math.inf, "곡률이 관측되지 않아 s = ∞ 반경이 발산합니다"
    else:
        if _공_조건(model, p, s, resolution):
            return s, None
        hi = s

    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _공_조건(model, p, mid, resolution):
            lo = mid
        else:
            hi = mid
    return lo, None


def curvature_radius(
    model: ModelManifold,
    p,
    s: float,
    resolution: float | None = None,
    rtol: float | None = None,
) -> float:
    """
    한 점의 s-국소 곡률 반경

    Args:
        model: 모델 다양체
        p: ChartPoint 또는 좌표
        s: cutoff (math.inf 허용)
        resolution: 표본 해상도. s ≤ resolution 이면 경고와 함께 s 반환
        rtol: 이분법 상대 허용오차

    Returns:
        r_R^s(p) ∈ (0, s]
    """
    value, flag = _radius_with_flag(model, as_coords(p), s, resolution, rtol)
    if flag:
        logger.warning("  ⚠ %s", flag)
    return value


def radius_field(
    model: ModelManifold,
    domain: SampledDomain,
    s: float,
    threads: int | None = None,
    rtol: float | None = None,
) -> RadiusField:
    """표본점마다 curvature_radius 를 계산합니다 (점별 독립, 병렬 맵)."""
    cutoff = resolve_cutoff(model, s)
    resolution = domain.resolution if len(domain) > 1 else None

    if model.homogeneous:
        value, flag = _radius_with_flag(model, domain.points[0], s, resolution, rtol)
        results = [(value, flag)] * len(domain)
    else:
        results = parallel_map(lambda x: _radius_with_flag(model, x, s, resolution, rtol), domain.points, threads)

    values = np.array([v for v, _ in results], dtype=float)
    warnings = sorted({flag for _, flag in results if flag})
    for message in warnings:
        logger.warning("  ⚠ %s", message)
    return RadiusField(domain=domain, s=s, cutoff=cutoff, values=values, model_name=model.name, warnings=warnings)


# ══════════════════════════════════════════════
# 진단
# ══════════════════════════════════════════════

def lipschitz_report(
    model: ModelManifold,
    radius: RadiusField,
    tolerance: float | None = None,
    oracle: DistanceOracle | None = None,
) -> LipschitzReport:
    """
    모든 표본점 쌍에 대한 max |r(p) − r(q)| / d(p, q).

    거리 하한으로 만든 비율 상한이 큰 쌍부터 정확한 거리를 계산하고,
    남은 쌍의 상한이 현재 최댓값 이하가 되면 멈춥니다.
    """
    tolerance = settings.LIPSCHITZ_TOL if tolerance is None else tolerance
    n = len(radius)
    if n < 2:
        return LipschitzReport(constant=0.0, tolerance=tolerance, pairs_checked=0)

    oracle = oracle or DistanceOracle(model, radius.domain.points)
    i, j = np.triu_indices(n, k=1)
    diff = np.abs(radius.values[i] - radius.values[j])
    if not np.any(diff > 0.0):
        return LipschitzReport(constant=0.0, tolerance=tolerance, pairs_checked=len(i))

    live = diff > 0.0
    i, j, diff = i[live], j[live], diff[live]
    lb = model.distance_lower_bound(radius.domain.points[i], radius.domain.points[j])
    with np.errstate(divide="ignore"):
        upper = np.where(lb > 0.0, diff / np.where(lb > 0.0, lb, 1.0), np.inf)
    order = np.argsort(-upper, kind="stable")

    best, worst = 0.0, None
    chunk = 256 if model.closed_form_distance else 32
    for start in range(0, len(order), chunk):
        idx = order[start:start + chunk]
        if upper[idx[0]] <= best:
            break
        d = oracle.pairs(i[idx], j[idx])
        ratios = np.where(d > 0.0, diff[idx] / np.where(d > 0.0, d, 1.0), 0.0)
        k = int(np.argmax(ratios))
        if ratios[k] > best:
            best, worst = float(ratios[k]), (int(i[idx[k]]), int(j[idx[k]]))

    report = LipschitzReport(constant=best, tolerance=tolerance, pairs_checked=len(order), worst_pair=worst)
    if report.violates:
        logger.warning("  ⚠ Lipschitz 상수 %.4f > 1 + %.2g (쌍 %s)", best, tolerance, worst)
    return report


def radius_diagnostics(
    model: ModelManifold,
    radius: RadiusField,
    tol: float = 1e-3,
    enlarge: float = 1.1,
    oracle: DistanceOracle | None = None,
) -> dict:
    """
    일관성·최대성 진단

    - consistency: d(p, q) ≤ r(p)(1 − tol) 인 표본 q 에서 |Rm|(q) ≤ (1 + tol) r(p)⁻²
    - maximality: r(p) < s 이면 반경 1.1 r(p) 공에서 |Rm| < r⁻² 가 깨짐
    """
    points = radius.domain.points
    oracle = oracle or DistanceOracle(model, points)
    rm = model.rm_norm(points)
    consistency_failures = []
    for idx in range(len(points)):
        r = float(radius.values[idx])
        near = oracle.within(idx, r * (1.0 - tol))
        if len(near) and np.max(rm[near]) > (1.0 + tol) / r**2:
            consistency_failures.append(idx)

    maximality_failures = []
    for idx in np.flatnonzero(radius.values < radius.cutoff * (1.0 - tol)):
        big = enlarge * float(radius.values[idx])
        if model.ball_sup_rm(points[idx], big) * big * big < 1.0 - tol:
            maximality_failures.append(int(idx))

    return {
        "consistency_failures": consistency_failures,
        "maximality_failures": maximality_failures,
        "points": len(points),
    }


def monotonicity_check(model: ModelManifold, domain: SampledDomain, cutoffs: list[float], threads: int | None = None) -> dict:
    """s₁ ≤ s₂ 이면 r_R^{s₁} ≤ r_R^{s₂} (표본점 전체)"""
    cutoffs = sorted(cutoffs)
    fields = [radius_field(model, domain, s, threads=threads) for s in cutoffs]
    violations = 0
    for lower, upper in zip(fields, fields[1:]):
        violations += int(np.sum(lower.values > upper.values * (1.0 + settings.BISECTION_RTOL)))
    return {"cutoffs": cutoffs, "violations": violations}


def scaling_check(build_model, p, s: float, factors: list[float]) -> dict:
    """
    계량 λ² 배 모델에서 r_R^{λs} / λ 가 원래 r_R^s 와 같은지 확인합니다.

    Args:
        build_model: λ → 모델
        p: 점 좌표 (차트는 λ 와 무관)
    """
    base = curvature_radius(build_model(1.0), p, s)
    ratios = {}
    for lam in factors:
        scaled = curvature_radius(build_model(lam), p, lam * s)
        ratios[lam] = scaled / (lam * base)
    return {"base": base, "ratios": ratios}
