"""
반복 스케줄 서비스

반경 수열 ρ_i 와 스텝 μ_i 의 두 가지 스케줄, 그 급수 산술, 그리고 모델 위에서의
평균 에너지 재귀 부등식 추적을 제공합니다.

    case "i" : ρ₀ = Λ⁻¹,  μ_i = (33/40)^{i/4},         ρ_{i+1} = ρ_i + μ_i Λ⁻¹
    case "ii": ρ₀ = r/100, μ_i = r (33/40)^{i/4} / 25,  ρ_{i+1} = ρ_i + μ_i

(3/4)^i μ_i^{−4} = (10/11)^i 은 Fraction 으로 정확히 계산합니다.
한 단계 부등식:

    ⨍_{B(ρ_i)} |Rm|² ≤ C (⨍_{B(ρ_{i+1})} (R²/3 + 4|W⁺|²) + s_i) + ¾ ⨍_{B(ρ_{i+1})} |Rm|²

s_i 는 case "i" 에서 Λ⁴ μ_i^{−4}, case "ii" 에서 μ_i^{−4} 입니다.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from app.exceptions import ChartCoverageError, ParameterError
from app.models.base import ModelManifold, as_coords

logger = logging.getLogger(__name__)

RATIO = Fraction(33, 40)
DECAY = Fraction(3, 4)
# 본문에 적힌 극한 근삿값 (Λ⁻¹ 단위). 계산값과의 차이만 보고합니다.
STATED_LIMIT = 20.3
STATED_MU_BOUND = 25.0

CASE_LAMBDA = "i"
CASE_RADIUS = "ii"


@dataclass
class IterationSchedule:
    case: str
    base: float
    rho0: float
    mu: list[float]
    rho: list[float]
    T: int
    # μ_i⁴ 의 무차원 부분 (33/40)^i (정확값)
    mu4_exact: list[Fraction] = field(default_factory=list, repr=False)

    @property
    def unit(self) -> float:
        """μ_i 를 길이로 바꾸는 배율 (case "i": Λ⁻¹, case "ii": 1)"""
        return 1.0 / self.base if self.case == CASE_LAMBDA else 1.0


@dataclass
class IterationStep:
    i: int
    rho: float
    mu: float
    energy: float
    csc_weyl: float
    constant: float | None = None
    residual: float | None = None


@dataclass
class IterationTrace:
    schedule: IterationSchedule
    steps: list[IterationStep]
    measured_constant: float
    tail_bound: float
    tail_negligible: bool
    telescoped_rhs: float
    truncated_at: int | None = None
    warnings: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        """CSV 행: i, ρ_i, μ_i, energy, csc_weyl, residual"""
        return [
            {"i": s.i, "rho": s.rho, "mu": s.mu, "energy": s.energy, "csc_weyl": s.csc_weyl,
             "residual": math.nan if s.residual is None else s.residual}
            for s in self.steps
        ]


# ══════════════════════════════════════════════
# 스케줄 / 급수
# ══════════════════════════════════════════════

def schedule(case: str, value: float, T: int) -> IterationSchedule:
    """
    Args:
        case: "i" (value = Λ) 또는 "ii" (value = r)
        value: Λ > 0 또는 r > 0
        T: 마지막 인덱스 (≥ 0). ρ 는 ρ₀..ρ_T, μ 는 μ₀..μ_{T−1}
    """
    if case not in (CASE_LAMBDA, CASE_RADIUS):
        raise ParameterError(f"알 수 없는 스케줄 '{case}' (가능: i, ii)", module="iteration", key="task.case")
    if not value > 0.0:
        name = "Λ" if case == CASE_LAMBDA else "r"
        raise ParameterError(f"{name}는 양수여야 합니다: {value}", module="iteration", key="task.scale")
    if T < 0:
        raise ParameterError(f"T는 0 이상이어야 합니다: {T}", module="iteration", key="task.T")

    mu4 = [RATIO**i for i in range(T)]
    steps = [math.pow(33.0 / 40.0, i / 4.0) for i in range(T)]
    if case == CASE_LAMBDA:
        rho0 = 1.0 / value
        mu = steps
        unit = 1.0 / value
    else:
        rho0 = value / 100.0
        mu = [value * m / 25.0 for m in steps]
        unit = 1.0
    rho = [rho0]
    for m in mu:
        rho.append(rho[-1] + m * unit)
    return IterationSchedule(case=case, base=value, rho0=rho0, mu=mu, rho=rho, T=T, mu4_exact=mu4)


def weighted_term(i: int) -> Fraction:
    """(3/4)^i μ_i^{−4} 의 무차원 부분 = (3/4)^i (40/33)^i"""
    return DECAY**i / RATIO**i


def identity_check(T: int) -> dict:
    """(3/4)^i μ_i^{−4} = (10/11)^i 을 Fraction 과 float 양쪽으로 확인합니다."""
    exact = all(weighted_term(i) == Fraction(10, 11) ** i for i in range(T + 1))
    deviation = max(
        abs(0.75**i * math.pow(33.0 / 40.0, i / 4.0) ** -4 - (10.0 / 11.0) ** i) / (10.0 / 11.0) ** i
        for i in range(T + 1)
    )
    return {"exact": exact, "max_relative_deviation": deviation, "T": T}


def mu_ratio() -> float:
    """q = (33/40)^{1/4}"""
    return math.pow(33.0 / 40.0, 0.25)


def series_sums(sched: IterationSchedule) -> dict:
    """
    부분합과 기하급수 닫힌 형식, 본문 값과의 차이

    Returns:
        weighted_partial  Σ_{i<T} (3/4)^i μ_i^{−4} (무차원, 정확값의 float)
        weighted_limit    11
        mu_partial        Σ_{i<T} μ_i (무차원, case "ii" 는 r/25 배를 뺀 값)
        mu_limit          1/(1 − q)
        rho_limit         ρ₀ + Λ⁻¹ Σμ_i  (case "i", Λ⁻¹ 단위로도 보고)
    """
    T = sched.T
    weighted = sum((weighted_term(i) for i in range(T)), Fraction(0))
    weighted_tail = 11 * Fraction(10, 11) ** T
    q = mu_ratio()
    mu_limit = 1.0 / (1.0 - q)
    mu_partial = math.fsum(math.pow(33.0 / 40.0, i / 4.0) for i in range(T))
    out = {
        "T": T,
        "weighted_partial": float(weighted),
        "weighted_partial_exact": f"{weighted.numerator}/{weighted.denominator}" if T <= 64 else None,
        "weighted_limit": 11.0,
        "weighted_tail": float(weighted_tail),
        "mu_partial": mu_partial,
        "mu_limit": mu_limit,
        "mu_tail": q**T / (1.0 - q),
        "mu_bound_holds": mu_limit < STATED_MU_BOUND,
    }
    if sched.case == CASE_LAMBDA:
        limit_units = 1.0 + mu_limit
        out.update({
            "rho_limit": limit_units / sched.base,
            "rho_limit_lambda_units": limit_units,
            "stated_limit_lambda_units": STATED_LIMIT,
            "stated_limit_difference": limit_units - STATED_LIMIT,
        })
    else:
        out.update({"rho_limit": sched.rho0 + sched.base * mu_limit / 25.0})
    return out


def direct_limit(tol: float = 1e-15, max_terms: int = 100_000) -> dict:
    """Σ μ_i 를 항이 tol 아래로 떨어질 때까지 직접 더합니다 (닫힌 형식과 독립)."""
    q = mu_ratio()
    terms = []
    i = 0
    while i < max_terms:
        term = q**i
        if term < tol:
            break
        terms.append(term)
        i += 1
    total = math.fsum(terms)
    return {"terms": i, "sum": total, "closed_form": 1.0 / (1.0 - q), "difference": total - 1.0 / (1.0 - q)}


def minimal_T(tol: float) -> dict:
    """꼬리 11(10/11)^T 와 q^T/(1−q) 가 tol 미만이 되는 최소 T"""
    if not tol > 0.0:
        raise ParameterError(f"tol은 양수여야 합니다: {tol}", module="iteration")
    q = mu_ratio()
    weighted = max(0, math.ceil(math.log(tol / 11.0) / math.log(10.0 / 11.0)))
    while 11.0 * (10.0 / 11.0) ** weighted >= tol:
        weighted += 1
    mu = max(0, math.ceil(math.log(tol * (1.0 - q)) / math.log(q)))
    while q**mu / (1.0 - q) >= tol:
        mu += 1
    return {"tol": tol, "weighted": weighted, "mu": mu}


# ══════════════════════════════════════════════
# 에너지 재귀 추적
# ══════════════════════════════════════════════

def averaged_energies(model: ModelManifold, p, rho: float) -> tuple[float, float]:
    """(⨍_{B(p,ρ)} |Rm|², ⨍_{B(p,ρ)} (R²/3 + 4|W⁺|²))"""
    def integrand(X):
        inv = model.invariants(X)
        return np.stack([inv["rm_sq"], inv["scalar"] ** 2 / 3.0 + 4.0 * inv["wplus_sq"]])

    nodes, weights = model.ball_nodes(p, rho)
    vals = integrand(nodes)
    volume = float(np.sum(weights))
    return float(np.sum(weights * vals[0]) / volume), float(np.sum(weights * vals[1]) / volume)


def run_iteration(model: ModelManifold, p, sched: IterationSchedule, tail_tol: float = 1e-6, lam: float | None = None) -> IterationTrace:
    """
    ρ_0..ρ_T 공의 평균 에너지를 계산하고 한 단계 부등식의 측정 상수를 보고합니다.

    공 구적 범위를 넘는 반경에서 T 를 줄이고 경고합니다.
    """
    p = as_coords(p)
    warnings: list[str] = []
    energies: list[tuple[float, float]] = []
    truncated = None
    for i, rho in enumerate(sched.rho):
        try:
            energies.append(averaged_energies(model, p, rho))
        except ChartCoverageError as exc:
            truncated = i - 1
            warnings.append(f"ρ_{i}={rho:.6g} 에서 공 구적 범위 초과: T 를 {max(truncated, 0)} 로 줄입니다 ({exc.margin:.3g})")
            logger.warning("  ⚠ %s", warnings[-1])
            break
    if not energies:
        raise ChartCoverageError(f"{model.name}: ρ₀={sched.rho0:.6g} 공이 구적 범위를 넘습니다.", margin=-sched.rho0, module="iteration", key="task")

    T = len(energies) - 1
    lam = sched.base if lam is None else lam
    steps = []
    constants = []
    for i in range(T + 1):
        e, q = energies[i]
        step = IterationStep(i=i, rho=sched.rho[i], mu=sched.mu[i] if i < len(sched.mu) else math.nan, energy=e, csc_weyl=q)
        if i < T:
            e_next, q_next = energies[i + 1]
            mu4_inv = float(1 / sched.mu4_exact[i])
            scale = lam**4 * mu4_inv if sched.case == CASE_LAMBDA else mu4_inv / (sched.base / 25.0) ** 4
            denom = q_next + scale
            c = max(0.0, e - 0.75 * e_next) / denom if denom > 0.0 else 0.0
            step.constant = c
            constants.append((c, q_next, scale, e_next))
        steps.append(step)

    measured = max((c for c, *_ in constants), default=0.0)
    for step, (c, q_next, scale, e_next) in zip(steps, constants):
        step.residual = step.energy - (measured * (q_next + scale) + 0.75 * e_next)

    final_energy = energies[T][0]
    tail = 0.75**T * final_energy
    telescoped = math.fsum(0.75**i * measured * (q_next + scale) for i, (_, q_next, scale, _) in enumerate(constants)) + tail
    return IterationTrace(
        schedule=sched,
        steps=steps,
        measured_constant=measured,
        tail_bound=tail,
        tail_negligible=tail < tail_tol,
        telescoped_rhs=telescoped,
        truncated_at=truncated,
        warnings=warnings,
    )


def constant_stability(model: ModelManifold, p, case: str, values, T: int) -> dict:
    """시작 반경(Λ 또는 r)을 바꿔 가며 측정 상수의 상대 변동을 보고합니다."""
    constants = [run_iteration(model, p, schedule(case, v, T)).measured_constant for v in values]
    positive = [c for c in constants if c > 0.0]
    spread = (max(positive) - min(positive)) / max(positive) if positive else 0.0
    return {"values": list(values), "constants": constants, "relative_spread": spread}
