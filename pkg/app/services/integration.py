"""
적분 보조정리 서비스

표본 영역 Ω 와 그 두께화 집합을 만들고, 다음 부등식의 세 항을 구적으로 계산합니다.

    ∫_Ω (r_R^s)^{−k} ≤ m s^{−k} Vol Ω^{(μs)} + C ∫_{Ω^{μR,s}} |Rm|^{k/2}

- Ω^{(t)}    = {x : d(x, Ω) < t}
- Ω^{R,s}   = ∪_{p∈Ω} B(p, r_R^s(p))
- Ω^{μR,s}  = ∪_{p∈Ω} B(p, μ r_R^s(p))

두께화 집합의 소속은 상위 표본(ambient)의 점마다 거리 오라클로 판정합니다.
m 을 생략하면 (k = 8/μ, l = 8/7) 덮개에서 측정한 최대 중복도를 씁니다.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from app.exceptions import ChartCoverageError, ParameterError
from app.models.base import ModelManifold, SampledDomain
from app.models.oracle import DistanceOracle
from app.services import cover as cover_service
from app.services.pool import parallel_map
from app.services.radius import RadiusField, radius_field

logger = logging.getLogger(__name__)


@dataclass
class ThickenedSets:
    """
    상위 표본 위의 소속 마스크

    distance_to_omega 는 reach 안쪽에서만 정확하고 바깥은 inf 입니다.
    """
    ambient: SampledDomain
    omega_mask: np.ndarray
    distance_to_omega: np.ndarray
    omega_R_s_mask: np.ndarray
    omega_muR_s_mask: np.ndarray
    omega_R_mus_mask: np.ndarray
    s: float
    mu: float
    reach: float

    def thickening_mask(self, t: float) -> np.ndarray:
        """Ω^{(t)}, t ≤ reach"""
        if t > self.reach * (1.0 + 1e-12):
            raise ParameterError(f"두께 {t:.6g} 가 계산 범위 {self.reach:.6g} 를 넘습니다.", module="integration")
        return self.distance_to_omega < t

    @property
    def omega(self) -> SampledDomain:
        return self.ambient.restrict(self.omega_mask)

    @property
    def omega_s(self) -> SampledDomain:
        return self.ambient.restrict(self.thickening_mask(self.s))

    @property
    def omega_R_s(self) -> SampledDomain:
        return self.ambient.restrict(self.omega_R_s_mask)

    @property
    def omega_muR_s(self) -> SampledDomain:
        return self.ambient.restrict(self.omega_muR_s_mask)

    def volume(self, mask: np.ndarray) -> float:
        return float(np.sum(self.ambient.weights[mask]))

    def containment_violations(self) -> dict[str, int]:
        """Ω ⊆ Ω^{R,s} ⊆ Ω^(s), Ω^{μR,s} ⊆ Ω^{R,μs} 를 점별로 셉니다."""
        omega_s = self.thickening_mask(self.s)
        return {
            "omega_in_R_s": int(np.sum(self.omega_mask & ~self.omega_R_s_mask)),
            "R_s_in_s": int(np.sum(self.omega_R_s_mask & ~omega_s)),
            "muR_s_in_R_mus": int(np.sum(self.omega_muR_s_mask & ~self.omega_R_mus_mask)),
        }


@dataclass
class IntegrationReport:
    k: float
    s: float
    mu: float
    m: float
    m_source: str
    lhs: float
    volume_omega: float
    volume_thickened: float
    volume_term: float
    energy_term: float
    c_measured: float | None
    holds_with_c1: bool
    ratios: dict[str, float]
    energy_2s: float
    cover_decomposition: float | None = None
    cover_decomposition_rel_diff: float | None = None
    warnings: list[str] = field(default_factory=list)


def _check_parameters(s: float, mu: float) -> None:
    if not s > 0.0:
        raise ParameterError(f"s는 양수여야 합니다: {s}", module="integration", key="task.s")
    if not 0.0 < mu <= 1.0:
        raise ParameterError(f"μ는 (0, 1] 범위여야 합니다: {mu}", module="integration", key="task.mu")


# ══════════════════════════════════════════════
# 두께화 집합
# ══════════════════════════════════════════════

def thickened_sets(
    model: ModelManifold,
    ambient: SampledDomain,
    omega_mask: np.ndarray,
    radius: RadiusField,
    s: float,
    mu: float,
    reach: float | None = None,
    threads: int | None = None,
) -> ThickenedSets:
    """
    Ω^{(t)} (t ≤ reach), Ω^{R,s}, Ω^{μR,s}, Ω^{R,μs} 의 상위 표본 소속을 계산합니다.

    Args:
        ambient: Ω 를 포함하는 상위 표본
        omega_mask: ambient 위 Ω 의 마스크
        radius: Ω 위의 곡률 반경장 (점 순서는 ambient.restrict(omega_mask) 와 같음)
        reach: 거리 계산 범위 (기본 s)

    Raises:
        ChartCoverageError: 두께화가 상위 표본의 경계 셀 층에 닿을 때
    """
    _check_parameters(s, mu)
    omega_mask = np.asarray(omega_mask, dtype=bool)
    omega_idx = np.flatnonzero(omega_mask)
    if len(omega_idx) == 0:
        raise ParameterError("Ω 가 비어 있습니다.", module="integration", key="domain")
    if len(radius) != len(omega_idx):
        raise ParameterError("반경장의 점 수가 Ω 와 다릅니다.", module="integration")
    reach = s if reach is None else max(reach, s)

    values = radius.values
    mu_cut = np.minimum(values, mu * s)
    oracle = DistanceOracle(model, ambient.points[omega_idx], ambient.points)

    def row(i: int):
        cols = oracle.within(i, reach, closed=False)
        return cols, oracle.row(i, cols)

    rows = parallel_map(row, range(len(omega_idx)), threads)

    n = len(ambient)
    dist = np.full(n, math.inf)
    in_r = np.zeros(n, dtype=bool)
    in_mu = np.zeros(n, dtype=bool)
    in_r_mus = np.zeros(n, dtype=bool)
    for i, (cols, d) in enumerate(rows):
        np.minimum.at(dist, cols, d)
        in_r[cols[d < values[i]]] = True
        in_mu[cols[d < mu * values[i]]] = True
        in_r_mus[cols[d < mu_cut[i]]] = True

    if ambient.boundary_mask is not None:
        touched = np.isfinite(dist) & ambient.boundary_mask & ~omega_mask
        if np.any(touched):
            raise ChartCoverageError(
                f"{model.name}: 두께 {reach:.4g} 의 두께화가 상위 표본 경계에 닿습니다 ({int(np.sum(touched))} 점)",
                margin=-reach,
                module="integration",
                key="domain.region",
            )

    return ThickenedSets(
        ambient=ambient,
        omega_mask=omega_mask,
        distance_to_omega=dist,
        omega_R_s_mask=in_r,
        omega_muR_s_mask=in_mu,
        omega_R_mus_mask=in_r_mus,
        s=s,
        mu=mu,
        reach=reach,
    )


# ══════════════════════════════════════════════
# 적분 보고서
# ══════════════════════════════════════════════

def default_multiplicity(
    model: ModelManifold,
    omega: SampledDomain,
    radius: RadiusField,
    mu: float,
    threads: int | None = None,
) -> int:
    """(k, l) = (8/μ, 8/7) 덮개의 측정 최대 중복도"""
    k = 8.0 / mu
    l = 8.0 / 7.0
    if math.isclose(l, k / (k - 1.0), rel_tol=1e-12):
        logger.warning("  ⚠ (k, l) = (%g, 8/7) 는 피복 조건 l > k/(k−1) 의 경계입니다.", k)
    oracle = DistanceOracle(model, omega.points)
    centers = cover_service.build_separated_subset(model, omega, radius, k, oracle)
    _, report = cover_service.build_cover_and_verify(model, omega, radius, centers, k, l, oracle, threads)
    return max(1, report.max_multiplicity)


def _cover_decomposition(model: ModelManifold, omega: SampledDomain, radius: RadiusField, k: float, mu: float) -> float:
    """
    ∫_Ω r^{−k} 를 덮개 공마다 중심값 r_i^{−k} 로 대신한 값.
    점마다 덮는 공들의 평균을 씁니다.
    """
    cover_k = 8.0 / mu
    l = 8.0 / 7.0
    oracle = DistanceOracle(model, omega.points)
    centers = cover_service.build_separated_subset(model, omega, radius, cover_k, oracle)
    cov, _ = cover_service.build_cover_and_verify(model, omega, radius, centers, cover_k, l, oracle)
    acc = np.zeros(len(omega))
    for value, pts in zip(cov.center_values, cov.members):
        acc[pts] += value ** (-k)
    mult = np.maximum(cov.multiplicity, 1)
    return float(np.sum(omega.weights * acc / mult))


def integration_report(
    model: ModelManifold,
    ambient: SampledDomain,
    omega_mask: np.ndarray,
    radius: RadiusField,
    k: float,
    s: float,
    mu: float,
    m: float | None = None,
    candidates=(1.0,),
    with_cover_decomposition: bool = False,
    threads: int | None = None,
) -> IntegrationReport:
    """
    적분 보조정리의 양변을 계산합니다.

    Args:
        k: 지수 (> 0)
        s: cutoff (반경장의 cutoff 와 같아야 함)
        m: 중복도 상수. None 이면 측정값
        candidates: 비율 lhs / (volume_term + C·energy_term) 를 보고할 C 후보

    Returns:
        IntegrationReport. energy_term = 0 이면 c_measured = None 과 경고
    """
    if not k > 0.0:
        raise ParameterError(f"지수 k는 양수여야 합니다: {k}", module="integration", key="task.exponent")
    _check_parameters(s, mu)
    if not math.isclose(radius.cutoff, s, rel_tol=1e-12) and not math.isclose(radius.s, s, rel_tol=1e-12):
        raise ParameterError(f"반경장 cutoff {radius.cutoff:.6g} 와 s={s:.6g} 가 다릅니다.", module="integration", key="task.s")
    s_eff = radius.cutoff
    sets = thickened_sets(model, ambient, omega_mask, radius, s_eff, mu, reach=2.0 * s_eff, threads=threads)
    omega = sets.omega
    warnings: list[str] = []

    m_source = "given"
    if m is None:
        m = float(default_multiplicity(model, omega, radius, mu, threads))
        m_source = "measured_cover_multiplicity"

    lhs = float(np.sum(omega.weights * radius.values ** (-k)))
    volume_omega = omega.total_volume
    volume_thickened = sets.volume(sets.thickening_mask(mu * s_eff))
    volume_term = m * s_eff ** (-k) * volume_thickened

    rm_sq = model.invariants(ambient.points)["rm_sq"]
    energy_density = rm_sq ** (k / 4.0)
    energy_term = float(np.sum(ambient.weights[sets.omega_muR_s_mask] * energy_density[sets.omega_muR_s_mask]))
    energy_2s = float(np.sum(ambient.weights * rm_sq * sets.thickening_mask(2.0 * s_eff)))

    c_measured = None
    if energy_term > 0.0:
        c_measured = (lhs - volume_term) / energy_term
    else:
        warnings.append("에너지 항이 0 이라 C 를 측정할 수 없습니다.")
        logger.warning("  ⚠ %s", warnings[-1])

    ratios = {}
    for c in candidates:
        denom = volume_term + c * energy_term
        ratios[f"{c:g}"] = lhs / denom if denom > 0.0 else math.inf

    report = IntegrationReport(
        k=k, s=s_eff, mu=mu, m=m, m_source=m_source,
        lhs=lhs,
        volume_omega=volume_omega,
        volume_thickened=volume_thickened,
        volume_term=volume_term,
        energy_term=energy_term,
        c_measured=c_measured,
        holds_with_c1=lhs <= (volume_term + energy_term) * (1.0 + 1e-12),
        ratios=ratios,
        energy_2s=energy_2s,
        warnings=warnings,
    )
    if with_cover_decomposition:
        value = _cover_decomposition(model, omega, radius, k, mu)
        report.cover_decomposition = value
        report.cover_decomposition_rel_diff = abs(value - lhs) / lhs if lhs > 0.0 else 0.0
    return report


def full_radius_report(
    model: ModelManifold,
    ambient: SampledDomain,
    omega_mask: np.ndarray,
    k: float,
    mu: float = 1.0,
    threads: int | None = None,
) -> dict:
    """
    s = 지름(전체 반경) 변형: 부피 항 없이 ∫_Ω r^{−k} ≤ C ∫_{Ω^{μR}} |Rm|^{k/2} 의 C 를 측정합니다.
    """
    if not model.compact:
        raise ParameterError(f"{model.name}: 전체 반경 변형은 콤팩트 모델에서만 정의됩니다.", module="integration")
    omega = ambient.restrict(omega_mask)
    radius = radius_field(model, omega, math.inf, threads=threads)
    sets = thickened_sets(model, ambient, omega_mask, radius, radius.cutoff, mu, threads=threads)
    lhs = float(np.sum(omega.weights * radius.values ** (-k)))
    rm_sq = model.invariants(ambient.points)["rm_sq"]
    energy = float(np.sum(ambient.weights[sets.omega_muR_s_mask] * rm_sq[sets.omega_muR_s_mask] ** (k / 4.0)))
    return {
        "k": k,
        "mu": mu,
        "s": radius.cutoff,
        "lhs": lhs,
        "energy_term": energy,
        "c_measured": lhs / energy if energy > 0.0 else None,
    }


def refinement_study(evaluate, resolutions) -> dict:
    """
    해상도마다 evaluate(resolution) → float 을 계산하고 연속 상대 변화를 보고합니다.
    """
    values = [float(evaluate(h)) for h in resolutions]
    changes = [abs(b - a) / abs(a) if a != 0.0 else math.inf for a, b in zip(values, values[1:])]
    return {"resolutions": list(resolutions), "values": values, "relative_changes": changes}


# ══════════════════════════════════════════════
# 특성류 적분
# ══════════════════════════════════════════════

def gauss_bonnet(model: ModelManifold, resolution: float, seed: int | None = None, jitter: float = 0.0) -> dict:
    """
    닫힌 모델 위에서 ∫P_χ (오일러 지표) 와 ∫P_τ 를 적분합니다.

    Args:
        model: 콤팩트 카탈로그 모델
        resolution: 표본 셀 길이

    Returns:
        euler_integral, signature_integral, volume, points
    """
    domain = model.sample_domain(None, resolution, seed=seed, jitter=jitter)
    inv = model.invariants(domain.points)
    euler = float(np.sum(domain.weights * inv["pchi"]))
    signature = float(np.sum(domain.weights * inv["ptau"]))
    logger.info("%s: ∫P_χ=%.6g, ∫P_τ=%.3g (%d점)", model.name, euler, signature, len(domain))
    return {
        "model": model.name,
        "resolution": resolution,
        "points": len(domain),
        "volume": domain.total_volume,
        "euler_integral": euler,
        "signature_integral": signature,
        "euler_rounded": int(round(euler)),
    }
