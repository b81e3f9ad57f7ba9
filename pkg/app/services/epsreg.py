"""
ε-정칙성 스캐너

모델 위의 개별 인스턴스 (p, r) 에서 정리의 선택지(disjunct)들을 평가하고,
각 선택지가 성립하는 최소 상수를 측정해 보고합니다. 보편 상수는 증명하지 않습니다.

- classify: r ≥ K/Λ 이면 (i), 아니면 (ii) 와 (iii)
- harnack_probe: sup_{B(p,r/2)} r_R⁻⁴ / ⨍_{B(p,r)} r_R⁻⁴ 와 min/max r_R
- collapse_check: Vol B(p, r_R)/r_R⁴ 와 ∫_{B(p, 2r_R)} |Rm|²
- volume_comparison_check: 환형 부피 비와 C(1 + β/ρ)⁴ cosh³(Λβ), C = 9/8

작업용 ε₀ (settings.EPS0) 는 어떤 인스턴스가 소에너지 검사군에 들어가는지만 정합니다.
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from app.config import settings
from app.exceptions import ParameterError
from app.models.base import ModelManifold, SampledDomain, as_coords
from app.services.pool import parallel_map
from app.services.radius import curvature_radius

logger = logging.getLogger(__name__)

VOLUME_COMPARISON_C = 9.0 / 8.0
# 스캐너가 허용하는 Λβ 상한
MAX_LAMBDA_BETA = 8.0

BRANCH_LARGE = "i"
BRANCH_SMALL = "ii"


@dataclass
class RegularityReport:
    model: str
    point: list[float]
    r: float
    lam: float
    K: float
    energy: float
    average_energy: float
    average_csc_weyl: float
    sup_half: float
    branch: str
    disjunct: str
    satisfied: bool
    constants: dict[str, float | None]
    small_energy: bool
    standard_chain: float | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


# ══════════════════════════════════════════════
# 공 평균
# ══════════════════════════════════════════════

def _csc_weyl(inv: dict) -> np.ndarray:
    """R²/3 + 4|W⁺|²"""
    return inv["scalar"] ** 2 / 3.0 + 4.0 * inv["wplus_sq"]


def ball_energies(model: ModelManifold, p, r: float) -> dict:
    """∫_{B(p,r)} |Rm|², Vol, ⨍|Rm|², ⨍(R²/3 + 4|W⁺|²)"""
    nodes, weights = model.ball_nodes(p, r)
    inv = model.invariants(nodes)
    volume = float(np.sum(weights))
    energy = float(np.sum(weights * inv["rm_sq"]))
    csc = float(np.sum(weights * _csc_weyl(inv)))
    return {
        "energy": energy,
        "volume": volume,
        "average_energy": energy / volume if volume > 0.0 else 0.0,
        "average_csc_weyl": csc / volume if volume > 0.0 else 0.0,
    }


def _ratio(num: float, den: float) -> float | None:
    if den > 0.0:
        return num / den
    return 0.0 if num == 0.0 else None


def _defaults(model: ModelManifold, lam: float | None, K: float | None) -> tuple[float, float]:
    return (model.lambda_ricci if lam is None else lam), (settings.SCANNER_K if K is None else K)


def _small_radius(r: float, lam: float, K: float) -> bool:
    return lam <= 0.0 or r < K / lam


# ══════════════════════════════════════════════
# 분류
# ══════════════════════════════════════════════

def classify(
    model: ModelManifold,
    p,
    r: float,
    lam: float | None = None,
    K: float | None = None,
    resolution: float | None = None,
) -> RegularityReport:
    """
    한 인스턴스의 선택지를 평가합니다.

    (i)  sup_{B(p,r/2)} |Rm| < C Λ²  또는  ⨍_{B(p,Λ⁻¹)} Q > Λ⁴ 이고 |Rm(q)|² < C ⨍_{B(q,Λ⁻¹)} Q
    (ii) sup_{B(p,r/2)} |Rm| < C r⁻² 또는  ⨍_{B(p,r)} Q > C' r⁻⁴ 이고 sup |Rm|² < C ⨍ Q
    (iii) sup_{B(p,r/2)} |Rm|² < C ⨍_{B(p,r)} |Rm|²

    Q = R²/3 + 4|W⁺|². 성립하는 선택지 중 측정 상수가 가장 작은 것을 기록합니다.
    (ii) 의 문턱 상수 C' 와 결론 상수 C 는 서로 독립적으로 측정합니다.
    """
    if not r > 0.0:
        raise ParameterError(f"r은 양수여야 합니다: {r}", module="epsreg", key="task.radii")
    lam, K = _defaults(model, lam, K)
    p = as_coords(p)
    ball = ball_energies(model, p, r)
    sup_half = model.ball_sup_rm(p, 0.5 * r, resolution)
    constants: dict[str, float | None] = {
        "sup_r2": sup_half * r * r,
        "sup_sq_over_average": _ratio(sup_half**2, ball["average_energy"]),
        "csc_weyl_r4": ball["average_csc_weyl"] * r**4,
    }
    warnings: list[str] = []

    if _small_radius(r, lam, K):
        branch = BRANCH_SMALL
        candidates = {"sup_bound": constants["sup_r2"]}
        conclusion = _ratio(sup_half**2, ball["average_csc_weyl"])
        constants["csc_threshold"] = constants["csc_weyl_r4"]
        constants["csc_conclusion"] = conclusion
        if ball["average_csc_weyl"] > 0.0 and conclusion is not None:
            candidates["csc_alternative"] = conclusion
        constants["iii"] = constants["sup_sq_over_average"]
    else:
        branch = BRANCH_LARGE
        rho = 1.0 / lam
        local = ball_energies(model, p, rho)
        constants["sup_lambda2"] = sup_half / lam**2
        constants["csc_lambda_average"] = local["average_csc_weyl"]
        rm_p = float(model.rm_norm(p[None, :])[0])
        pointwise = _ratio(rm_p**2, local["average_csc_weyl"])
        constants["pointwise_csc"] = pointwise
        candidates = {"sup_bound": constants["sup_lambda2"]}
        if local["average_csc_weyl"] > lam**4 and pointwise is not None:
            candidates["csc_alternative"] = pointwise

    finite = {name: c for name, c in candidates.items() if c is not None and math.isfinite(c)}
    disjunct = min(finite, key=lambda name: (finite[name], name)) if finite else "none"
    if not finite:
        warnings.append("어떤 선택지도 유한 상수로 성립하지 않습니다.")
        logger.warning("  ⚠ %s: p=%s, r=%.4g", warnings[-1], p.tolist(), r)

    small = ball["energy"] <= settings.EPS0
    chain = None
    if branch == BRANCH_SMALL and ball["average_energy"] <= settings.EPS0 * r**-4:
        chain = constants["sup_sq_over_average"]
        if chain is None:
            warnings.append("소에너지 조건에서 sup/평균 비가 유한하지 않습니다.")
            logger.warning("  ⚠ %s", warnings[-1])

    return RegularityReport(
        model=model.name,
        point=[float(x) for x in p],
        r=r, lam=lam, K=K,
        energy=ball["energy"],
        average_energy=ball["average_energy"],
        average_csc_weyl=ball["average_csc_weyl"],
        sup_half=sup_half,
        branch=branch,
        disjunct=disjunct,
        satisfied=bool(finite),
        constants=constants,
        small_energy=small,
        standard_chain=chain,
        warnings=warnings,
    )


# ══════════════════════════════════════════════
# Harnack / 붕괴 / 부피 비교
# ══════════════════════════════════════════════

def harnack_probe(
    model: ModelManifold,
    p,
    r: float,
    lam: float | None = None,
    K: float | None = None,
    s: float = math.inf,
    threads: int | None = None,
    rtol: float | None = None,
) -> dict:
    """
    공 구적 노드에서 r_R 을 계산하여 측정 상수를 보고합니다.
    rtol 은 노드별 r_R 이분법 허용오차입니다.

    Returns:
        c_measured = sup_{B(p,r/2)} r_R⁻⁴ / ⨍_{B(p,r)} r_R⁻⁴, delta0 = min r_R / max r_R
    """
    lam, K = _defaults(model, lam, K)
    if not _small_radius(r, lam, K):
        raise ParameterError(f"harnack_probe 는 r < K/Λ 에서만 정의됩니다: r={r:.6g}, K/Λ={K / lam:.6g}", module="epsreg", key="task.radii")
    p = as_coords(p)
    nodes, weights = model.ball_nodes(p, r)
    half_nodes, _ = model.ball_nodes(p, 0.5 * r)
    points = np.concatenate([p[None, :], half_nodes, nodes])
    if model.homogeneous:
        radii = np.full(len(points), curvature_radius(model, p, s, rtol=rtol))
    else:
        radii = np.asarray(parallel_map(lambda x: curvature_radius(model, x, s, rtol=rtol), points, threads))
    r_half = radii[: 1 + len(half_nodes)]
    r_ball = radii[1 + len(half_nodes):]
    average = float(np.sum(weights * r_ball**-4.0) / np.sum(weights))
    sup_half = float(np.max(r_half**-4.0))
    everything = np.concatenate([r_half, r_ball])
    return {
        "model": model.name,
        "point": [float(x) for x in p],
        "r": r,
        "c_measured": sup_half / average,
        "delta0": float(np.min(everything) / np.max(everything)),
        "nodes": int(len(points)),
    }


def collapse_check(
    model: ModelManifold,
    p,
    tau: float,
    lam: float | None = None,
    K: float | None = None,
    s: float = math.inf,
    domain: SampledDomain | None = None,
) -> dict:
    """
    Vol B(p, r_R)/r_R⁴ ≤ τ 와 ∫_{B(p, 2r_R)} |Rm|² 를 함께 보고합니다.

    증명의 사슬 r_R⁻² = sup_{B(p, r_R)} |Rm| ≤ C (⨍_{B(p, 2r_R)} |Rm|²)^{1/2} 의 C 도 측정합니다.
    """
    if not tau > 0.0:
        raise ParameterError(f"τ는 양수여야 합니다: {tau}", module="epsreg", key="task.tau")
    lam, K = _defaults(model, lam, K)
    p = as_coords(p)
    r_curv = curvature_radius(model, p, s)
    if not _small_radius(r_curv, lam, K) and not math.isclose(r_curv, K / lam):
        raise ParameterError(f"r_R(p)={r_curv:.6g} 가 K/Λ={K / lam:.6g} 보다 큽니다.", module="epsreg")

    volume = model.ball_volume(p, r_curv)
    ratio = volume / r_curv**4
    big = ball_energies(model, p, 2.0 * r_curv)
    sup = model.ball_sup_rm(p, r_curv)
    chain = None
    if big["average_energy"] > 0.0:
        chain = r_curv**-2 / math.sqrt(big["average_energy"])
    collapsed = ratio <= tau
    small = big["energy"] <= settings.EPS0
    warnings = []
    insufficient = domain is not None and len(domain) < 2
    if insufficient:
        warnings.append("표본점이 하나뿐이라 붕괴 판정의 표본이 부족합니다.")
        logger.warning("  ⚠ %s", warnings[-1])
    return {
        "model": model.name,
        "point": [float(x) for x in p],
        "tau": tau,
        "curvature_radius": r_curv,
        "volume": volume,
        "volume_ratio": ratio,
        "energy_2r": big["energy"],
        "sup_rm": sup,
        "chain_constant": chain,
        "collapsed": collapsed,
        "small_energy": small,
        # 소에너지인데 붕괴하지 않은 인스턴스만 함의와 어긋납니다.
        "consistent": not (small and not collapsed),
        "insufficient_sampling": insufficient,
        "warnings": warnings,
    }


def volume_comparison_check(
    model: ModelManifold,
    p,
    rho: float,
    beta: float,
    gamma: float = 0.0,
    lam: float | None = None,
    C: float = VOLUME_COMPARISON_C,
    rtol: float = 1e-8,
) -> dict:
    """
    |A(ρ−γ, ρ+β)| / |B(ρ)| ≤ |B(ρ+β)| / |B(ρ)| ≤ C (1 + β/ρ)⁴ cosh³(Λβ)
    """
    if not (rho > 0.0 and beta > 0.0):
        raise ParameterError(f"ρ, β는 양수여야 합니다: ρ={rho}, β={beta}", module="epsreg", key="task.rho")
    if not 0.0 <= gamma < rho:
        raise ParameterError(f"γ는 [0, ρ) 범위여야 합니다: γ={gamma}, ρ={rho}", module="epsreg", key="task.gamma")
    lam = model.lambda_ricci if lam is None else lam
    if lam * beta > MAX_LAMBDA_BETA:
        raise ParameterError(f"Λβ={lam * beta:.6g} 가 {MAX_LAMBDA_BETA:g} 를 넘습니다.", module="epsreg", key="task.beta")
    p = as_coords(p)
    v_rho = model.ball_volume(p, rho)
    v_big = model.ball_volume(p, rho + beta)
    v_inner = model.ball_volume(p, rho - gamma)
    annulus = (v_big - v_inner) / v_rho
    ball_ratio = v_big / v_rho
    bound = C * (1.0 + beta / rho) ** 4 * math.cosh(lam * beta) ** 3
    euclidean = ((rho + beta) / rho) ** 4
    return {
        "model": model.name,
        "rho": rho,
        "beta": beta,
        "gamma": gamma,
        "lambda": lam,
        "annulus_ratio": annulus,
        "ball_ratio": ball_ratio,
        "euclidean_ratio": euclidean,
        "bound": bound,
        "passes": bool(annulus <= ball_ratio * (1.0 + rtol) and ball_ratio <= bound * (1.0 + rtol)),
    }


# ══════════════════════════════════════════════
# 격자 스캔
# ══════════════════════════════════════════════

def scan(
    model: ModelManifold,
    points,
    radii,
    lam: float | None = None,
    K: float | None = None,
    with_harnack: bool = False,
    threads: int | None = None,
) -> list[dict]:
    """(p, r) 격자의 classify 보고서 (JSON lines 한 줄 = 한 인스턴스)"""
    grid = [(as_coords(p), float(r)) for p in points for r in radii]

    def one(item):
        p, r = item
        record = classify(model, p, r, lam, K).to_dict()
        if with_harnack and _small_radius(r, *_defaults(model, lam, K)):
            record["harnack"] = harnack_probe(model, p, r, lam, K)
        return record

    return parallel_map(one, grid, threads)
