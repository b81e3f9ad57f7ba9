"""
Gromov식 덮개 서비스

곡률 반경장 r 에 대해 최대 (1/k)r-분리 부분집합을 탐욕적으로 만들고,
공 B(p_i, (l/k) r(p_i)) 덮개의 피복률·중복도·샌드위치 부등식을 검증합니다.

- 분리: d(p_i, p_j) ≥ (1/k) max{r(p_i), r(p_j)}
- 최대성: 모든 표본점 p 에 d(p, p_j) < (1/k) max{r(p), r(p_j)} 인 중심이 있음
- 탐욕 순서: r 내림차순, 같으면 점 인덱스 오름차순
- 피복 보장: l > k/(k−1), 중복도 보장: l ≤ k/7 (둘 다 경고만)

cutoff 덮개는 P^R = {r < s} 중심의 공으로 Ω′ 을 덮고,
남은 Ω∖Ω′ 을 균일 반경 (6/7)(l/k)s 로 다시 덮습니다 (P^s).
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from app.exceptions import ParameterError
from app.models.base import ModelManifold, SampledDomain
from app.models.oracle import DistanceOracle
from app.services.pool import parallel_map
from app.services.radius import RadiusField

logger = logging.getLogger(__name__)

LABEL_R = "R"
LABEL_S = "s"


@dataclass
class SeparatedCover:
    """덮개 중심(표본 인덱스), 반경, 분할 라벨, 점별 중복도"""
    centers: np.ndarray
    k: float
    l: float
    center_values: np.ndarray
    radii: np.ndarray
    partition: np.ndarray
    multiplicity: np.ndarray
    members: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def covered(self) -> np.ndarray:
        return self.multiplicity > 0

    def rows(self, domain: SampledDomain) -> list[dict]:
        """CSV 행: 중심 좌표, r_R^s, 덮개 반경, 분할 라벨"""
        out = []
        for c, value, radius, label in zip(self.centers, self.center_values, self.radii, self.partition):
            row = {f"x{i}": float(x) for i, x in enumerate(domain.points[c])}
            row.update({"index": int(c), "radius_field": float(value), "cover_radius": float(radius), "partition": str(label)})
            out.append(row)
        return out


@dataclass
class CoverReport:
    k: float
    l: float
    points: int
    centers: int
    coverage_fraction: float
    max_multiplicity: int
    multiplicity_constant: float
    separation_violations: int
    maximality_violations: int
    disjointness_violations: int
    sandwich_violations: int
    clusters_checked: int
    coverage_guaranteed: bool
    multiplicity_guaranteed: bool
    containment_violations: int = 0
    stage2_curvature_ok: bool | None = None
    stage2_curvature_sup: float | None = None
    warnings: list[str] = field(default_factory=list)


# ══════════════════════════════════════════════
# 탐욕 분리 부분집합
# ══════════════════════════════════════════════

def _check_k(k: float) -> None:
    if not k > 1.0:
        raise ParameterError(f"분리 매개변수 k는 1보다 커야 합니다: k={k}", module="cover", key="task.k")


def _near(oracle: DistanceOracle, a: np.ndarray, b: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """
    d(a, b) < threshold 일 수 있는 쌍 마스크.

    수치 거리 모델은 하한이 threshold 이상이면 정확한 거리가 필요 없습니다.
    멀리 떨어진 쌍은 켤레점 때문에 슈팅이 수렴하지 않을 수 있습니다.
    """
    if oracle.model.closed_form_distance:
        return np.ones(len(thresholds), dtype=bool)
    lb = oracle.model.distance_lower_bound(oracle.rows[a], oracle.rows[b])
    return lb < thresholds


def _greedy(oracle: DistanceOracle, indices: np.ndarray, values: np.ndarray, k: float) -> tuple[np.ndarray, dict]:
    """
    indices 중에서 (1/k)·max 분리 조건으로 중심을 고릅니다.

    Returns:
        (중심 인덱스 배열, {탈락점: (증인 중심, 거리)})
    """
    order = indices[np.lexsort((indices, -values[indices]))]
    accepted: list[int] = []
    witness: dict[int, tuple[int, float]] = {}
    for c in order:
        if accepted:
            acc = np.asarray(accepted)
            thresholds = np.maximum(values[c], values[acc]) / k
            near = _near(oracle, np.full(len(acc), c), acc, thresholds)
            acc, thresholds = acc[near], thresholds[near]
            if len(acc):
                d = oracle.row(int(c), acc)
                hit = np.flatnonzero(d < thresholds)
                if len(hit):
                    witness[int(c)] = (int(acc[hit[0]]), float(d[hit[0]]))
                    continue
        accepted.append(int(c))
    return np.asarray(accepted, dtype=int), witness


def build_separated_subset(
    model: ModelManifold,
    domain: SampledDomain,
    radius: RadiusField,
    k: float,
    oracle: DistanceOracle | None = None,
) -> np.ndarray:
    """
    최대 (1/k)r-분리 부분집합 (탐욕 선택, 결정적 순서)

    Returns:
        표본 인덱스 배열 (선택 순서)
    """
    _check_k(k)
    oracle = oracle or DistanceOracle(model, domain.points)
    centers, _ = _greedy(oracle, np.arange(len(domain)), radius.values, k)
    logger.debug("분리 부분집합: k=%g, 표본 %d → 중심 %d", k, len(domain), len(centers))
    return centers


def separation_report(oracle: DistanceOracle, centers: np.ndarray, values: np.ndarray, k: float) -> dict:
    """
    분리·최대성 정의를 모든 쌍에서 확인합니다 (전수 검사).
    하한이 임계값 이상인 쌍은 위반이 될 수 없으므로 정확한 거리를 계산하지 않습니다.
    """
    centers = np.asarray(centers, dtype=int)
    separation = 0
    if len(centers) > 1:
        i, j = np.triu_indices(len(centers), k=1)
        a, b = centers[i], centers[j]
        thresholds = np.maximum(values[a], values[b]) / k
        near = _near(oracle, a, b, thresholds)
        d = oracle.pairs(a[near], b[near])
        separation = int(np.sum(d < thresholds[near]))
    maximality = 0
    is_center = np.zeros(len(values), dtype=bool)
    is_center[centers] = True
    for p in np.flatnonzero(~is_center):
        thresholds = np.maximum(values[p], values[centers]) / k
        near = _near(oracle, np.full(len(centers), p), centers, thresholds)
        d = oracle.row(int(p), centers[near])
        if not np.any(d < thresholds[near]):
            maximality += 1
    return {"separation_violations": separation, "maximality_violations": maximality}


# ══════════════════════════════════════════════
# 덮개 검증
# ══════════════════════════════════════════════

def _members(oracle: DistanceOracle, centers: np.ndarray, radii: np.ndarray, threads: int | None) -> list[np.ndarray]:
    """각 중심의 열린 공 안 표본 인덱스"""
    return parallel_map(lambda pair: oracle.within(int(pair[0]), float(pair[1]), closed=False), list(zip(centers, radii)), threads)


def _sandwich(members: list[np.ndarray], center_values: np.ndarray, n_points: int, k: float, l: float) -> tuple[int, int]:
    """점 p′ 를 덮는 중심들 중 r 최대인 p″ 에 대해 ((k−l)/(k+l)) r(p″) < r(p′_j) ≤ r(p″)"""
    owners: list[list[int]] = [[] for _ in range(n_points)]
    for ci, pts in enumerate(members):
        for p in pts:
            owners[int(p)].append(ci)
    factor = (k - l) / (k + l)
    violations = 0
    clusters = 0
    for own in owners:
        if len(own) < 2:
            continue
        clusters += 1
        vals = center_values[own]
        top = float(np.max(vals))
        if np.any(vals <= factor * top):
            violations += 1
    return violations, clusters


def _disjointness(oracle: DistanceOracle, centers: np.ndarray, values: np.ndarray, k: float) -> int:
    """B(p_i, r_i/2k) 쌍별 서로소: d(p_i, p_j) ≥ (r_i + r_j)/2k"""
    if len(centers) < 2:
        return 0
    i, j = np.triu_indices(len(centers), k=1)
    a, b = centers[i], centers[j]
    thresholds = (values[a] + values[b]) / (2.0 * k)
    near = _near(oracle, a, b, thresholds)
    d = oracle.pairs(a[near], b[near])
    return int(np.sum(d < thresholds[near]))


def _window_flags(k: float, l: float) -> tuple[bool, bool, list[str]]:
    coverage_ok = l > k / (k - 1.0)
    multiplicity_ok = l <= k / 7.0
    warnings = []
    if not coverage_ok:
        warnings.append(f"l={l:.6g} ≤ k/(k−1)={k / (k - 1.0):.6g}: 피복 보장 없음")
    if not multiplicity_ok:
        warnings.append(f"l={l:.6g} > k/7={k / 7.0:.6g}: 중복도 보장 없음")
    for message in warnings:
        logger.warning("  ⚠ %s", message)
    return coverage_ok, multiplicity_ok, warnings


def build_cover_and_verify(
    model: ModelManifold,
    domain: SampledDomain,
    radius: RadiusField,
    centers: np.ndarray,
    k: float,
    l: float,
    oracle: DistanceOracle | None = None,
    threads: int | None = None,
) -> tuple[SeparatedCover, CoverReport]:
    """
    공 B(p_i, (l/k) r(p_i)) 덮개를 만들고 검증 보고서를 돌려줍니다.
    위반은 예외가 아니라 보고서 항목입니다.
    """
    _check_k(k)
    oracle = oracle or DistanceOracle(model, domain.points)
    centers = np.asarray(centers, dtype=int)
    values = radius.values
    coverage_ok, multiplicity_ok, warnings = _window_flags(k, l)

    radii = (l / k) * values[centers]
    members = _members(oracle, centers, radii, threads)
    multiplicity = np.zeros(len(domain), dtype=int)
    for pts in members:
        multiplicity[pts] += 1

    sep = separation_report(oracle, centers, values, k)
    sandwich, clusters = _sandwich(members, values[centers], len(domain), k, l)
    labels = np.where(values[centers] < radius.cutoff, LABEL_R, LABEL_S)
    cover = SeparatedCover(
        centers=centers, k=k, l=l, center_values=values[centers], radii=radii,
        partition=labels, multiplicity=multiplicity, members=members,
    )
    max_mult = int(np.max(multiplicity)) if len(multiplicity) else 0
    report = CoverReport(
        k=k, l=l,
        points=len(domain),
        centers=len(centers),
        coverage_fraction=float(np.mean(multiplicity > 0)) if len(domain) else 1.0,
        max_multiplicity=max_mult,
        multiplicity_constant=max_mult / k**model.dimension,
        separation_violations=sep["separation_violations"],
        maximality_violations=sep["maximality_violations"],
        disjointness_violations=_disjointness(oracle, centers, values, k),
        sandwich_violations=sandwich,
        clusters_checked=clusters,
        coverage_guaranteed=coverage_ok,
        multiplicity_guaranteed=multiplicity_ok,
        warnings=warnings,
    )
    if coverage_ok and report.coverage_fraction < 1.0:
        logger.warning("  ⚠ 피복률 %.6f < 1 (l > k/(k−1) 인데도 덮이지 않은 점 존재)", report.coverage_fraction)
    return cover, report


# ══════════════════════════════════════════════
# cutoff 덮개
# ══════════════════════════════════════════════

def check_cutoff_window(k: float, l: float) -> None:
    """k/(k−1) < l ≤ k/7 (경계에 놓인 쌍은 기록 후 거부)"""
    _check_k(k)
    lower = k / (k - 1.0)
    if math.isclose(l, lower, rel_tol=1e-12):
        logger.warning("  ⚠ (k, l) = (%g, %g) 가 피복 조건 l > k/(k−1) 의 경계에 있습니다.", k, l)
    if not l > lower:
        raise ParameterError(f"l > k/(k−1) 위반: l={l:.6g}, k/(k−1)={lower:.6g}", module="cover", key="task.l")
    if not l <= k / 7.0:
        raise ParameterError(f"l ≤ k/7 위반: l={l:.6g}, k/7={k / 7.0:.6g}", module="cover", key="task.l")


def build_cutoff_cover(
    model: ModelManifold,
    domain: SampledDomain,
    radius: RadiusField,
    k: float,
    l: float,
    oracle: DistanceOracle | None = None,
    threads: int | None = None,
) -> tuple[SeparatedCover, CoverReport]:
    """
    cutoff 덮개

    1단계: 분리 부분집합 P, P^R = {r < s}, Ω′ = ∪_{P^R} B(p_i, (l/k) r_i)
    2단계: U = Ω∖Ω′ 에서 |Rm| ≤ (49/36) s⁻² 를 U^{(6s/7)} 위에서 확인하고
           U 를 균일 반경 (6/7)(l/k)s 분리 부분집합으로 다시 덮음 (P^s)
    최종 덮개 반경은 (l/k) r(q) 이고 모두 Ω^{R,(l/k)s} 에 포함되어야 합니다.
    """
    check_cutoff_window(k, l)
    oracle = oracle or DistanceOracle(model, domain.points)
    values = radius.values
    s = radius.cutoff

    stage1, _ = _greedy(oracle, np.arange(len(domain)), values, k)
    p_r = stage1[values[stage1] < s]
    members_r = _members(oracle, p_r, (l / k) * values[p_r], threads)
    in_omega_prime = np.zeros(len(domain), dtype=bool)
    for pts in members_r:
        in_omega_prime[pts] = True
    uncovered = np.flatnonzero(~in_omega_prime)

    # (Ω∖Ω′)^{(6s/7)} 위 곡률 확인
    thick = 6.0 * s / 7.0
    stage2_sup = 0.0
    if len(uncovered):
        sups = parallel_map(lambda idx: model.ball_sup_rm(domain.points[idx], thick), uncovered, threads)
        stage2_sup = float(np.max(sups))
    bound = 49.0 / 36.0 / s**2
    stage2_ok = stage2_sup <= bound * (1.0 + 1e-9)
    warnings = []
    if not stage2_ok:
        warnings.append(f"(Ω∖Ω′)^(6s/7) 에서 sup|Rm|={stage2_sup:.6g} > 49/36·s⁻²={bound:.6g}")
        logger.warning("  ⚠ %s", warnings[-1])

    uniform = np.full(len(domain), thick)
    stage2, _ = _greedy(oracle, uncovered, uniform, k) if len(uncovered) else (np.empty(0, dtype=int), {})
    members_s = _members(oracle, stage2, (l / k) * uniform[stage2], threads)
    stage2_cover = np.zeros(len(domain), dtype=bool)
    for pts in members_s:
        stage2_cover[pts] = True
    if len(uncovered) and not np.all(stage2_cover[uncovered]):
        warnings.append(f"균일 반경 2단계 덮개가 Ω∖Ω′ 의 {int(np.sum(~stage2_cover[uncovered]))} 점을 놓침")
        logger.warning("  ⚠ %s", warnings[-1])

    centers = np.concatenate([p_r, stage2]).astype(int)
    labels = np.array([LABEL_R] * len(p_r) + [LABEL_S] * len(stage2))
    radii = (l / k) * values[centers]
    members = members_r + _members(oracle, stage2, radii[len(p_r):], threads)
    multiplicity = np.zeros(len(domain), dtype=int)
    for pts in members:
        multiplicity[pts] += 1

    # 포함: 덮개 반경 ≤ r^{(l/k)s}(p_i) = min(r^s(p_i), (l/k)s)
    containment = int(np.sum(radii > np.minimum(values[centers], (l / k) * s) * (1.0 + 1e-12)))
    sandwich, clusters = _sandwich(members, values[centers], len(domain), k, l)
    sep = separation_report(oracle, stage1, values, k)
    coverage_ok, multiplicity_ok, window_warnings = _window_flags(k, l)
    max_mult = int(np.max(multiplicity)) if len(multiplicity) else 0

    cover = SeparatedCover(
        centers=centers, k=k, l=l, center_values=values[centers], radii=radii,
        partition=labels, multiplicity=multiplicity, members=members,
    )
    report = CoverReport(
        k=k, l=l,
        points=len(domain),
        centers=len(centers),
        coverage_fraction=float(np.mean(multiplicity > 0)) if len(domain) else 1.0,
        max_multiplicity=max_mult,
        multiplicity_constant=max_mult / k**model.dimension,
        separation_violations=sep["separation_violations"],
        maximality_violations=sep["maximality_violations"],
        disjointness_violations=_disjointness(oracle, stage1, values, k),
        sandwich_violations=sandwich,
        clusters_checked=clusters,
        coverage_guaranteed=coverage_ok,
        multiplicity_guaranteed=multiplicity_ok,
        containment_violations=containment,
        stage2_curvature_ok=stage2_ok,
        stage2_curvature_sup=stage2_sup,
        warnings=window_warnings + warnings,
    )
    logger.info("cutoff 덮개: P^R %d, P^s %d, 피복률 %.6f", len(p_r), len(stage2), report.coverage_fraction)
    return cover, report


def multiplicity_scaling(
    model: ModelManifold,
    domain: SampledDomain,
    radius: RadiusField,
    ks=(8.0, 16.0, 32.0),
    l: float = 1.2,
    oracle: DistanceOracle | None = None,
    threads: int | None = None,
) -> dict:
    """
    k 별 최대 중복도 / kⁿ 을 측정합니다.

    Returns:
        per_k: {k: {"max_multiplicity", "ratio"}}, constant: max ratio,
        stable: max ratio ≤ 2 × (첫 k 의 ratio)
    """
    oracle = oracle or DistanceOracle(model, domain.points)
    per_k = {}
    for k in ks:
        centers = build_separated_subset(model, domain, radius, k, oracle)
        _, report = build_cover_and_verify(model, domain, radius, centers, k, l, oracle, threads)
        per_k[float(k)] = {"max_multiplicity": report.max_multiplicity, "ratio": report.multiplicity_constant}
    ratios = [v["ratio"] for v in per_k.values()]
    constant = max(ratios)
    return {
        "per_k": per_k,
        "constant": constant,
        "stable": bool(constant <= 2.0 * ratios[0]),
        "l": l,
        "dimension": model.dimension,
    }
