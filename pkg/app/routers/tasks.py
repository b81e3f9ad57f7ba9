"""
작업 라우터

시나리오의 task 이름을 서비스 파이프라인에 연결합니다.
각 작업 함수는 (시나리오, 모델, 스레드 수) 를 받아 TaskResult 를 돌려줍니다.

작업:
    decompose            - 곡률 분해 항등식과 특성 밀도
    radius-field         - 표본 영역의 r_R^s 와 Lipschitz 검사
    cover                - 분리 부분집합 덮개와 검증 (greedy / cutoff)
    integration-check    - 적분 보조정리 양변
    transgression-check  - K, F̃, TP 점별 검사와 Stokes 세분 수렴
    iterate              - 에너지 재귀 스케줄과 급수
    epsreg-scan          - ε-정칙성 분류, Harnack, 붕괴, 부피 비교
    gauss-bonnet         - ∫P_χ, ∫P_τ
"""
import logging

import numpy as np

from app.exceptions import EpsregError, ParameterError, ScenarioError
from app.models.base import ModelManifold, Region, SampledDomain
from app.models.oracle import DistanceOracle
from app.schemas.report import TaskResult
from app.schemas.scenario import RegionSpec, Scenario, cutoff
from app.services import cover as cover_service
from app.services import epsreg, integration, iteration, tensor4, transgression
from app.services.radius import lipschitz_report, radius_field
from app.storage import to_plain

logger = logging.getLogger(__name__)

COORD_COLUMNS = ["x0", "x1", "x2", "x3"]


# ── 공통 ──

def _region(spec: RegionSpec) -> Region:
    return Region(
        kind=spec.kind,
        lower=None if spec.lower is None else tuple(spec.lower),
        upper=None if spec.upper is None else tuple(spec.upper),
        point=None if spec.point is None else tuple(spec.point),
        cell_volume=spec.cell_volume,
    )


def _domain(sc: Scenario, model: ModelManifold) -> SampledDomain:
    return model.sample_domain(_region(sc.domain.region), sc.domain.resolution, seed=sc.seed, jitter=sc.domain.jitter)


def _center(sc: Scenario, model: ModelManifold) -> np.ndarray:
    """영역의 대표점: point 영역은 그 점, 상자는 중심, full 은 차트 중심"""
    region = sc.domain.region
    if region.kind == "point":
        return np.asarray(region.point, dtype=float)
    if region.kind == "box":
        return 0.5 * (np.asarray(region.lower) + np.asarray(region.upper))
    return 0.5 * (model.lower + model.upper)


def _omega_mask(points: np.ndarray, spec: RegionSpec) -> np.ndarray:
    """상위 표본에서 Ω 상자 안의 점"""
    if spec.kind == "full":
        return np.ones(len(points), dtype=bool)
    if spec.kind == "point":
        mask = np.zeros(len(points), dtype=bool)
        mask[int(np.argmin(np.linalg.norm(points - np.asarray(spec.point), axis=1)))] = True
        return mask
    lower, upper = np.asarray(spec.lower), np.asarray(spec.upper)
    return np.all((points >= lower) & (points <= upper), axis=1)


# ══════════════════════════════════════════════
# 작업
# ══════════════════════════════════════════════

def run_decompose(sc: Scenario, model: ModelManifold, threads: int | None) -> TaskResult:
    spec = sc.task
    if spec.random:
        rng = np.random.default_rng(sc.seed)
        tensors = [tensor4.random_curvature(rng) for _ in range(spec.random)]
    else:
        tensors = [model.curvature_at(p) for p in _domain(sc, model).points]

    rows = []
    for idx, rm in enumerate(tensors):
        dec = tensor4.decompose(rm, orientation=spec.orientation)
        norms = tensor4.norms_and_identities(dec)
        dens = tensor4.characteristic_densities(dec)
        scale = norms.rm_sq if norms.rm_sq > 0.0 else 1.0
        rows.append({
            "index": idx,
            "rm_sq": norms.rm_sq,
            "scalar": dec.scalar,
            "ric0_sq": norms.ric0_sq,
            "wplus_sq": norms.wplus_sq,
            "wminus_sq": norms.wminus_sq,
            "pchi": dens.pchi,
            "ptau": dens.ptau,
            "decomposition_residual": abs(norms.residual) / scale,
            "energy_residual": abs(dens.energy_residual) / scale,
            "alternative_matches": dens.alternative_matches,
        })
    worst_dec = max((r["decomposition_residual"] for r in rows), default=0.0)
    worst_energy = max((r["energy_residual"] for r in rows), default=0.0)
    summary = {
        "tensors": len(rows),
        "source": "random" if spec.random else "model",
        "max_decomposition_residual": worst_dec,
        "max_energy_residual": worst_energy,
        "alternative_matches": sum(bool(r["alternative_matches"]) for r in rows),
    }
    return TaskResult(summary=summary, rows=rows, columns=["index", "rm_sq", "scalar", "ric0_sq", "wplus_sq", "wminus_sq", "pchi", "ptau"])


def run_radius_field(sc: Scenario, model: ModelManifold, threads: int | None) -> TaskResult:
    spec = sc.task
    domain = _domain(sc, model)
    field = radius_field(model, domain, cutoff(spec.s), threads=threads)
    summary = {
        "points": len(field),
        "s": cutoff(spec.s),
        "cutoff": field.cutoff,
        "min_radius": float(np.min(field.values)),
        "max_radius": float(np.max(field.values)),
        "cutoff_points": int(np.sum(field.cutoff_mask)),
        "warnings": field.warnings,
    }
    if spec.lipschitz:
        lip = lipschitz_report(model, field)
        summary["lipschitz"] = {**to_plain(lip), "violates": lip.violates}
    return TaskResult(summary=summary, rows=field.rows(), columns=COORD_COLUMNS + ["radius"])


def run_cover(sc: Scenario, model: ModelManifold, threads: int | None) -> TaskResult:
    spec = sc.task
    domain = _domain(sc, model)
    field = radius_field(model, domain, cutoff(spec.s), threads=threads)
    oracle = DistanceOracle(model, domain.points)
    if spec.construction == "cutoff":
        cov, report = cover_service.build_cutoff_cover(model, domain, field, spec.k, spec.l, oracle, threads)
    else:
        centers = cover_service.build_separated_subset(model, domain, field, spec.k, oracle)
        cov, report = cover_service.build_cover_and_verify(model, domain, field, centers, spec.k, spec.l, oracle, threads)
    summary = {"construction": spec.construction, "cover": to_plain(report)}
    if spec.multiplicity_ks:
        summary["multiplicity_scaling"] = cover_service.multiplicity_scaling(
            model, domain, field, ks=tuple(spec.multiplicity_ks), l=spec.l, oracle=oracle, threads=threads,
        )
    return TaskResult(
        summary=summary,
        rows=cov.rows(domain),
        columns=COORD_COLUMNS + ["index", "radius_field", "cover_radius", "partition"],
    )


def run_integration(sc: Scenario, model: ModelManifold, threads: int | None) -> TaskResult:
    spec = sc.task
    ambient = _domain(sc, model)
    mask = _omega_mask(ambient.points, spec.omega)
    if not np.any(mask):
        raise ParameterError("Ω 상자에 표본점이 없습니다.", module="integration", key="task.omega")
    omega = ambient.restrict(mask)
    field = radius_field(model, omega, spec.s, threads=threads)
    report = integration.integration_report(
        model, ambient, mask, field,
        k=spec.exponent, s=spec.s, mu=spec.mu, m=spec.m,
        candidates=tuple(spec.candidates),
        with_cover_decomposition=spec.cover_decomposition,
        threads=threads,
    )
    summary = {"integration": to_plain(report), "omega_points": int(np.sum(mask)), "ambient_points": len(ambient)}
    if spec.full_radius:
        summary["full_radius"] = integration.full_radius_report(model, ambient, mask, spec.exponent, spec.mu, threads)
    return TaskResult(summary=summary, rows=field.rows(), columns=COORD_COLUMNS + ["radius"])


def _killing_fields(model: ModelManifold, names: list[str] | None):
    fields = model.killing_fields()
    if names is None:
        return fields
    by_name = {f.name: f for f in fields}
    missing = [n for n in names if n not in by_name]
    if missing:
        raise ScenarioError(
            f"{model.name}: 알 수 없는 Killing 장 {missing} (가능: {sorted(by_name)})",
            module="transgression", key="task.fields",
        )
    return [by_name[n] for n in names]


def run_transgression(sc: Scenario, model: ModelManifold, threads: int | None) -> TaskResult:
    spec = sc.task
    fields = _killing_fields(model, spec.fields)
    if not fields:
        raise ScenarioError(f"{model.name}: Killing 장이 없습니다.", module="transgression", key="task.fields")

    rows = []
    for p in spec.points:
        kval = transgression.k_form(model, fields, p, spec.h)
        fval = transgression.modified_curvature(model, fields, p, spec.h)
        tval = transgression.transgression_density(model, fields, p, h=spec.h)
        rows.append({
            **{f"x{i}": float(c) for i, c in enumerate(p)},
            "k_skew_residual": kval.skew_residual,
            "k_contraction_residual": kval.contraction_residual,
            "curvature_radius": fval.curvature_radius,
            "iv_residual": fval.iv_residual,
            "iv_residual_scaled": fval.iv_residual_scaled,
            "pff_density": fval.pff_density,
            "pff_scaled": fval.pff_scaled,
            "tp_frame_norm": tval.frame_norm,
            "tp_bound_constant": tval.bound_constant,
            "tp_expansion_residual": tval.expansion_residual,
        })
    summary = {
        "fields": [f.name for f in fields],
        "points": len(rows),
        "max_iv_residual_scaled": max((r["iv_residual_scaled"] for r in rows), default=0.0),
        "max_pff_scaled": max((abs(r["pff_scaled"]) for r in rows), default=0.0),
    }
    if spec.stokes is not None:
        study = transgression.stokes_refinement(
            model, fields, _region(spec.stokes), tuple(spec.counts), levels=spec.levels, h=spec.h, threads=threads,
        )
        summary["stokes"] = to_plain(study)
    return TaskResult(summary=summary, rows=rows, columns=COORD_COLUMNS)


def run_iterate(sc: Scenario, model: ModelManifold, threads: int | None) -> TaskResult:
    spec = sc.task
    value = spec.value
    if value is None:
        if spec.case == iteration.CASE_RADIUS:
            raise ScenarioError("case 'ii' 에는 value(r)가 필요합니다.", module="iteration", key="task.value")
        value = model.lambda_ricci
    sched = iteration.schedule(spec.case, value, spec.T)
    p = np.asarray(spec.point, dtype=float) if spec.point is not None else _center(sc, model)
    trace = iteration.run_iteration(model, p, sched, tail_tol=spec.tail_tol)
    summary = {
        "case": spec.case,
        "value": value,
        "series": iteration.series_sums(sched),
        "identity": iteration.identity_check(spec.T),
        "minimal_T": iteration.minimal_T(1e-10),
        "measured_constant": trace.measured_constant,
        "tail_bound": trace.tail_bound,
        "tail_negligible": trace.tail_negligible,
        "telescoped_rhs": trace.telescoped_rhs,
        "truncated_at": trace.truncated_at,
        "warnings": trace.warnings,
    }
    return TaskResult(summary=summary, rows=trace.rows(), columns=["i", "rho", "mu", "energy", "csc_weyl", "residual"])


def run_epsreg_scan(sc: Scenario, model: ModelManifold, threads: int | None) -> TaskResult:
    spec = sc.task
    points = spec.points if spec.points is not None else list(_domain(sc, model).points)
    records = epsreg.scan(model, points, spec.radii, spec.lam, spec.K, with_harnack=spec.harnack, threads=threads)
    rows = []
    for rec in records:
        row = {k: v for k, v in rec.items() if k not in ("constants", "harnack", "point", "warnings")}
        row.update({f"x{i}": c for i, c in enumerate(rec["point"])})
        row.update({f"c_{k}": v for k, v in rec["constants"].items()})
        if "harnack" in rec:
            row["harnack_c"] = rec["harnack"]["c_measured"]
            row["harnack_delta0"] = rec["harnack"]["delta0"]
        rows.append(row)

    branches: dict[str, int] = {}
    for rec in records:
        key = f"{rec['branch']}:{rec['disjunct']}"
        branches[key] = branches.get(key, 0) + 1
    summary = {
        "instances": len(records),
        "all_satisfied": all(rec["satisfied"] for rec in records),
        "branches": branches,
        "chain_checked": sum(rec["standard_chain"] is not None for rec in records),
    }
    harnack = [rec["harnack"]["c_measured"] for rec in records if "harnack" in rec]
    if harnack:
        summary["harnack_min_c"] = min(harnack)
        summary["harnack_max_c"] = max(harnack)
    if spec.tau is not None:
        single = sc.domain.region.kind == "point"
        summary["collapse"] = [
            epsreg.collapse_check(model, p, spec.tau, spec.lam, spec.K,
                                  domain=_domain(sc, model) if single else None)
            for p in points
        ]
    if spec.volume_grid:
        p = points[0]
        checks = []
        for entry in spec.volume_grid:
            if len(entry) not in (2, 3):
                raise ScenarioError(f"volume_grid 항목은 [ρ, β] 또는 [ρ, β, γ] 입니다: {entry}", module="epsreg", key="task.volume_grid")
            rho, beta, gamma = (list(entry) + [0.0])[:3]
            checks.append(epsreg.volume_comparison_check(model, p, rho, beta, gamma, spec.lam))
        summary["volume_comparison"] = checks
        summary["volume_comparison_passes"] = all(c["passes"] for c in checks)
    return TaskResult(summary=summary, rows=rows, columns=COORD_COLUMNS + ["r", "branch", "disjunct", "satisfied", "energy"])


def run_gauss_bonnet(sc: Scenario, model: ModelManifold, threads: int | None) -> TaskResult:
    if sc.domain.region.kind != "full":
        raise ScenarioError("gauss-bonnet 은 full 영역에서만 정의됩니다.", module="integration", key="domain.region.kind")
    summary = integration.gauss_bonnet(model, sc.domain.resolution, seed=sc.seed, jitter=sc.domain.jitter)
    return TaskResult(summary=summary)


TASKS = {
    "decompose": run_decompose,
    "radius-field": run_radius_field,
    "cover": run_cover,
    "integration-check": run_integration,
    "transgression-check": run_transgression,
    "iterate": run_iterate,
    "epsreg-scan": run_epsreg_scan,
    "gauss-bonnet": run_gauss_bonnet,
}

# 공·두께화 반경을 정하는 키
_SCALE_KEYS = {
    "radius-field": "task.s",
    "cover": "task.s",
    "integration-check": "task.s",
    "iterate": "task.value",
    "epsreg-scan": "task.radii",
}


def _triggering_key(sc: Scenario) -> str:
    """키 없이 올라온 모델 오류를 일으킨 시나리오 키 (작업의 길이 척도)"""
    spec = sc.task
    if spec.task == "transgression-check":
        return "task.stokes" if spec.stokes is not None else "task.points"
    return _SCALE_KEYS.get(spec.task, "domain.region")


def dispatch(sc: Scenario, model: ModelManifold, threads: int | None = None) -> TaskResult:
    """task 이름으로 파이프라인을 실행합니다."""
    runner = TASKS[sc.task.task]
    logger.info("작업 시작: %s / %s (%s)", sc.name, sc.task.task, model)
    try:
        result = runner(sc, model, threads)
    except EpsregError as exc:
        if exc.key is None:
            exc.key = _triggering_key(sc)
        raise
    return TaskResult(summary=to_plain(result.summary), rows=to_plain(result.rows), columns=result.columns)
