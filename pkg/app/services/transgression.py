"""
Killing 장 변형 접속과 transgression 형식

정규직교 틀(계량의 Cholesky 틀)에서 so(4) 값 형식을 좌표 성분으로 다룹니다.

    A_j        레비-치비타 접속 1-형식 (geometry.connection_forms)
    K_j        = Σ_i |v_i|⁻² g_jl v_i^l ∇v_i
    Ã          = A − K
    F_t        = F(A − tK) = F − t D_A K + t² [K_j, K_k]
    TP         = −2 ∫₀¹ P(K ∧ F_t) dt      (P = P_χ + 3P_τ)

P(F, F) + d TP = P(F̃, F̃) 이므로 Killing 장이 null 벡터가 되는 모델에서는
P(F, F) + d TP = 0 이 성립합니다. stokes_check 는 이 항등식을 좌표 상자에서
부피 적분과 경계 적분으로 확인합니다.

좌표 4-형식 계수는 ¼ Σ ε^{jklm} P(F_jk, F_lm) 로 계산하며, 이는 틀 밀도 × √det g 와 같습니다.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from app.config import settings
from app.exceptions import OrientationError, ParameterError, PolarizationError
from app.models import geometry
from app.models.base import KillingField, ModelManifold, Region, as_coords
from app.services import tensor4
from app.services.pool import parallel_map
from app.services.radius import curvature_radius

logger = logging.getLogger(__name__)

# t-적분 가우스 노드 수 (피적분이 t 의 2차식이므로 3점이면 정확)
DEFAULT_T_NODES = 3


@dataclass
class KFormValue:
    """한 점에서의 K: 좌표 성분 K_j[a, b] 와 틀 성분 K(e_c)[a, b]"""
    point: np.ndarray
    coordinate: np.ndarray
    frame: np.ndarray
    skew_residual: float
    contraction_residual: float
    orthogonality: float
    norms: list[float]


@dataclass
class Curvature2FormValue:
    """F̃ 의 좌표·틀 성분과 null 벡터 진단 (곡률 반경 r 로 무차원화한 값 포함)"""
    point: np.ndarray
    coordinate: np.ndarray
    frame: np.ndarray
    curvature_radius: float
    iv_residual: float
    iv_residual_scaled: float
    pff_density: float
    pff_scaled: float
    iv_connection: float = 0.0


@dataclass
class TransgressionValue:
    point: np.ndarray
    coordinate: np.ndarray
    frame_norm: float
    curvature_radius: float
    bound_constant: float
    expansion_residual: float


@dataclass
class StokesReport:
    volume_integral: float
    boundary_integral: float
    residual: float
    counts: tuple[int, ...]
    faces: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


# ══════════════════════════════════════════════
# 배치 커널
# ══════════════════════════════════════════════

def _require_4d(model: ModelManifold) -> None:
    if model.dimension != 4:
        raise ParameterError(f"{model.name}: transgression 은 4차원 모델에서만 정의됩니다.", module="transgression")


def _step(h: float | None) -> float:
    return settings.FD_STEP if h is None else h


def k_batch(model: ModelManifold, fields: list[KillingField], X: np.ndarray, h: float | None = None) -> np.ndarray:
    """K 의 좌표 성분 (B, j, a, b). 행렬 축은 반대칭화합니다."""
    h = _step(h)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    K = np.zeros((len(X), model.dimension, 4, 4))
    if not fields:
        return K
    g = model.metric(X)
    E = geometry.orthonormal_frame(g)
    Einv = np.linalg.inv(E)
    gamma = geometry.christoffel(model.metric, X, h)
    for kf in fields:
        v = kf.vector(X)
        dv = geometry.fd_partials(kf.vector, X, h)
        cov = dv + np.einsum("zijk,zk->zji", gamma, v)
        nabla = np.einsum("zai,zjb,zji->zab", Einv, E, cov)
        flat = np.einsum("zjl,zl->zj", g, v)
        norm_sq = np.einsum("zj,zj->z", flat, v)
        K += (flat / norm_sq[:, None])[:, :, None, None] * nabla[:, None, :, :]
    return 0.5 * (K - np.swapaxes(K, -1, -2))


def _connection(model: ModelManifold, h: float):
    return lambda Y: geometry.connection_forms(model.metric, Y, h)


def _to_frame_2form(F: np.ndarray, E: np.ndarray) -> np.ndarray:
    """좌표 2-형식 성분 (B, j, k, a, b) → 틀 성분 (B, c, d, a, b)"""
    return np.einsum("zjc,zkd,zjkab->zcdab", E, E, F)


def pff_coordinate(F: np.ndarray, orientation: int = 1) -> np.ndarray:
    """배치 4-형식 계수 ¼ Σ ε^{jklm} P(F_jk, F_lm)"""
    x = F[:, :, :, None, None]
    y = F[:, None, None, :, :]
    pf = tensor4.combined_bilinear(x, y, orientation)
    return 0.25 * np.einsum("jklm,zjklm->z", tensor4.EPSILON, pf)


def wedge_one_two(K: np.ndarray, F: np.ndarray, orientation: int = 1) -> np.ndarray:
    """3-형식 성분 (P(K ∧ F))_ijk = P(K_i, F_jk) + P(K_j, F_ki) + P(K_k, F_ij). 반환 (B, 4, 4, 4)"""
    kf = tensor4.combined_bilinear(K[:, :, None, None], F[:, None, :, :], orientation)  # [z, i, j, k]
    return kf + np.einsum("zjki->zijk", kf) + np.einsum("zkij->zijk", kf)


def transgression_batch(
    model: ModelManifold,
    fields: list[KillingField],
    X: np.ndarray,
    h: float | None = None,
    t_nodes: int = DEFAULT_T_NODES,
) -> tuple[np.ndarray, np.ndarray]:
    """
    TP 좌표 성분과 D′K 전개식 값을 함께 계산합니다.

    Returns:
        (TP (B, 4, 4, 4), 전개식 −2[P(K∧F) − ½P(K∧DK) + ⅓P(K∧[K,K])])
    """
    h = _step(h)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    model.check_chart(X, 2.0 * geometry.CONNECTION_REACH * h, "transgression 스텐실")
    A_fn = _connection(model, h)
    K_fn = lambda Y: k_batch(model, fields, Y, h)  # noqa: E731
    F = geometry.curvature_forms(A_fn, X, h)
    K = K_fn(X)
    DK = geometry.exterior_covariant(A_fn, K_fn, X, h)
    KK = geometry.wedge_commutator(K, K)

    ts, ws = geometry.gauss_legendre(0.0, 1.0, t_nodes)
    tp = np.zeros((len(X), 4, 4, 4))
    for t, w in zip(ts, ws):
        tp += w * wedge_one_two(K, F - t * DK + t * t * KK)
    tp *= -2.0
    expansion = -2.0 * (wedge_one_two(K, F) - 0.5 * wedge_one_two(K, DK) + wedge_one_two(K, KK) / 3.0)
    return tp, expansion


def _three_form_norm(omega: np.ndarray) -> np.ndarray:
    """형식 노름 |ω|² = (1/3!) Σ ω_abc²"""
    return np.sqrt(np.einsum("zabc,zabc->z", omega, omega) / 6.0)


# ══════════════════════════════════════════════
# 점별 연산
# ══════════════════════════════════════════════

def k_form(model: ModelManifold, fields: list[KillingField], p, h: float | None = None) -> KFormValue:
    """
    K(p) 를 계산하고 직교성·편극·축약 성질 i_{v_j}K = ∇v_j 를 확인합니다.

    Raises:
        PolarizationError: |v_i| < POLARIZATION_THRESHOLD
    """
    _require_4d(model)
    h = _step(h)
    X = as_coords(p)[None, :]
    model.check_chart(X, geometry.CONNECTION_REACH * h, "Killing 장 스텐실")
    g = model.metric(X)[0]
    vecs = [kf.vector(X)[0] for kf in fields]
    norms = [float(np.sqrt(v @ g @ v)) for v in vecs]
    for kf, norm in zip(fields, norms):
        if norm < settings.POLARIZATION_THRESHOLD:
            raise PolarizationError(
                f"{model.name}: Killing 장 '{kf.name}' 의 크기 {norm:.3e} 가 임계값 {settings.POLARIZATION_THRESHOLD:.1e} 미만입니다.",
                module="transgression",
            )
    orth = 0.0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            orth = max(orth, abs(vecs[i] @ g @ vecs[j]) / (norms[i] * norms[j]))
    if orth > 1e-6:
        logger.warning("  ⚠ Killing 장들이 직교하지 않습니다 (코사인 %.3e)", orth)

    nablas = [model.killing_value(kf, X[0], h).nabla for kf in fields]
    raw = np.zeros((4, 4, 4))
    for v, nabla in zip(vecs, nablas):
        raw += np.einsum("j,ab->jab", g @ v, nabla) / float(v @ g @ v)
    skew = float(np.max(np.abs(raw + np.swapaxes(raw, -1, -2)))) if fields else 0.0
    K = 0.5 * (raw - np.swapaxes(raw, -1, -2))

    contraction = 0.0
    for v, nabla in zip(vecs, nablas):
        contraction = max(contraction, float(np.max(np.abs(np.einsum("j,jab->ab", v, K) - 0.5 * (nabla - nabla.T)))))

    E = geometry.orthonormal_frame(g[None])[0]
    frame = np.einsum("jc,jab->cab", E, K)
    return KFormValue(
        point=X[0], coordinate=K, frame=frame,
        skew_residual=skew, contraction_residual=contraction, orthogonality=orth, norms=norms,
    )


def modified_curvature(
    model: ModelManifold,
    fields: list[KillingField],
    p,
    h: float | None = None,
    s: float = math.inf,
) -> Curvature2FormValue:
    """
    F̃ = dÃ + ½[Ã, Ã] 를 유한차분으로 계산합니다.

    iv_residual 은 max_b |F̃(v̂, e_b)| (v̂ = v/|v|), scaled 값은 곡률 반경 r 로 r² · 와 r⁴ · 를 곱한 값입니다.
    """
    _require_4d(model)
    h = _step(h)
    X = as_coords(p)[None, :]
    model.check_chart(X, 2.0 * geometry.CONNECTION_REACH * h, "변형 곡률 스텐실")
    A_fn = _connection(model, h)
    tilde = lambda Y: A_fn(Y) - k_batch(model, fields, Y, h)  # noqa: E731
    F = geometry.curvature_forms(tilde, X, h)
    E = geometry.orthonormal_frame(model.metric(X))
    frame = _to_frame_2form(F, E)[0]
    g = model.metric(X)[0]

    iv = 0.0
    iv_conn = 0.0
    A_tilde = tilde(X)[0]
    for kf in fields:
        v = kf.vector(X)[0]
        unit = v / math.sqrt(float(v @ g @ v))
        contracted = np.einsum("j,jkab,kc->cab", unit, F[0], E[0])
        iv = max(iv, float(np.max(np.abs(contracted))))
        iv_conn = max(iv_conn, float(np.max(np.abs(np.einsum("j,jab->ab", unit, A_tilde)))))

    density = float(pff_coordinate(F)[0] / math.sqrt(np.linalg.det(g)))
    r = curvature_radius(model, X[0], s)
    return Curvature2FormValue(
        point=X[0], coordinate=F[0], frame=frame,
        curvature_radius=r,
        iv_residual=iv,
        iv_residual_scaled=iv * r * r,
        pff_density=density,
        pff_scaled=abs(density) * r**4,
        iv_connection=iv_conn,
    )


def curvature_form_residual(model: ModelManifold, p, h: float | None = None) -> float:
    """변형 전 F 의 틀 성분 F_cd[a, b] 와 곡률 텐서 R_cdab 의 최대 차이"""
    h = _step(h)
    X = as_coords(p)[None, :]
    model.check_chart(X, 2.0 * geometry.CONNECTION_REACH * h, "곡률 형식 스텐실")
    F = geometry.curvature_forms(_connection(model, h), X, h)
    frame = _to_frame_2form(F, geometry.orthonormal_frame(model.metric(X)))[0]
    return float(np.max(np.abs(frame - model.curvature_batch(X)[0])))


def transgression_density(
    model: ModelManifold,
    fields: list[KillingField],
    p,
    t_nodes: int = DEFAULT_T_NODES,
    h: float | None = None,
    s: float = math.inf,
) -> TransgressionValue:
    """TP(p) 와 |TP|·r³ (r = r_R^s(p))"""
    _require_4d(model)
    X = as_coords(p)[None, :]
    tp, expansion = transgression_batch(model, fields, X, h, t_nodes)
    E = geometry.orthonormal_frame(model.metric(X))
    frame = np.einsum("zia,zjb,zkc,zijk->zabc", E, E, E, tp)
    norm = float(_three_form_norm(frame)[0])
    r = curvature_radius(model, X[0], s)
    scale = max(float(np.max(np.abs(tp))), 1e-300)
    return TransgressionValue(
        point=X[0],
        coordinate=tp[0],
        frame_norm=norm,
        curvature_radius=r,
        bound_constant=norm * r**3,
        expansion_residual=float(np.max(np.abs(tp - expansion))) / scale if np.any(tp) else 0.0,
    )


def blended_k_form(
    model: ModelManifold,
    structures: list[tuple[object, list[KillingField]]],
    X: np.ndarray,
    h: float | None = None,
) -> dict:
    """
    여러 구조 차트의 K^(l) 을 분할 가중치 φ_l 로 섞은 K = Σ φ_l K^(l).

    Args:
        structures: [(φ_l: (B, n) → (B,), Killing 장 목록)]

    Returns:
        {"k": (B, j, a, b), "weight_sum": (B,), "max_gradient": max |∇φ_l| (계량 노름)}
    """
    h = _step(h)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ginv = np.linalg.inv(model.metric(X))
    total = np.zeros((len(X), model.dimension, 4, 4))
    weight_sum = np.zeros(len(X))
    max_grad = 0.0
    for weight_fn, fields in structures:
        w = np.asarray(weight_fn(X), dtype=float)
        dw = geometry.fd_partials(weight_fn, X, h)  # [z, j]
        max_grad = max(max_grad, float(np.max(np.sqrt(np.einsum("zj,zjk,zk->z", dw, ginv, dw)))))
        total += w[:, None, None, None] * k_batch(model, fields, X, h)
        weight_sum += w
    return {"k": total, "weight_sum": weight_sum, "max_gradient": max_grad}


# ══════════════════════════════════════════════
# Stokes 검사
# ══════════════════════════════════════════════

def _midpoints(lo: float, hi: float, count: int) -> tuple[np.ndarray, float]:
    step = (hi - lo) / count
    return lo + (np.arange(count) + 0.5) * step, step


def _grid(axes: list[np.ndarray]) -> np.ndarray:
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def stokes_check(
    model: ModelManifold,
    fields: list[KillingField],
    region: Region,
    counts,
    h: float | None = None,
    t_nodes: int = DEFAULT_T_NODES,
    threads: int | None = None,
) -> StokesReport:
    """
    좌표 상자 R 에서 |∫_R P(F, F) + ∮_∂R TP| 를 중점 규칙으로 계산합니다.

    경계면은 상자 경계가 차트 내부에 있는 비주기 축에만 생깁니다.
    차트 끝에 닿은 비주기 축(극좌표 축)과 주기 축의 면은 경계가 아닙니다.

    Args:
        counts: 축별 셀 수 (불변 방향은 1 로 충분)

    Raises:
        OrientationError: 상자가 아닌 영역 (방향이 있는 경계를 만들 수 없음)
    """
    _require_4d(model)
    if region.kind == "full":
        lower, upper = model.lower.copy(), model.upper.copy()
    elif region.kind == "box" and region.lower is not None and region.upper is not None:
        lower, upper = np.asarray(region.lower, dtype=float), np.asarray(region.upper, dtype=float)
    else:
        raise OrientationError(f"{model.name}: '{region.kind}' 영역에는 방향이 있는 경계가 없습니다.", module="transgression")
    counts = tuple(int(c) for c in counts)
    if len(counts) != 4 or min(counts) < 1:
        raise ParameterError(f"counts 는 양의 정수 4개여야 합니다: {counts}", module="transgression", key="task.counts")
    h = _step(h)

    axes = []
    cells = []
    for i in range(4):
        mids, step = _midpoints(lower[i], upper[i], counts[i])
        axes.append(mids)
        cells.append(step)

    # 부피 적분: P(F, F) 좌표 계수
    A_fn = _connection(model, h)
    X = _grid(axes)
    model.check_chart(X, 2.0 * geometry.CONNECTION_REACH * h, "Stokes 부피 스텐실")
    chunks = np.array_split(X, max(1, len(X) // 64))
    pff = np.concatenate(parallel_map(lambda Y: pff_coordinate(geometry.curvature_forms(A_fn, Y, h)), chunks, threads))
    volume = float(np.sum(pff) * np.prod(cells))

    # 경계 적분
    boundary = 0.0
    faces = []
    for i in range(4):
        if model.periodic[i]:
            continue
        rest = [j for j in range(4) if j != i]
        face_cell = float(np.prod([cells[j] for j in rest]))
        sign = (-1.0) ** i
        for bound, orient in ((upper[i], 1.0), (lower[i], -1.0)):
            chart_end = model.upper[i] if orient > 0 else model.lower[i]
            if math.isclose(bound, chart_end, abs_tol=1e-12):
                continue
            face_axes = [axes[j] if j != i else np.array([bound]) for j in range(4)]
            Y = _grid(face_axes)
            tp = np.concatenate(parallel_map(
                lambda Z: transgression_batch(model, fields, Z, h, t_nodes)[0],
                np.array_split(Y, max(1, len(Y) // 64)),
                threads,
            ))
            component = tp[:, rest[0], rest[1], rest[2]]
            boundary += sign * orient * float(np.sum(component)) * face_cell
            faces.append(f"x{i}={'upper' if orient > 0 else 'lower'}")

    residual = abs(volume + boundary)
    logger.info("Stokes: ∫P(F,F)=%.6e, ∮TP=%.6e, 잔차 %.3e", volume, boundary, residual)
    return StokesReport(volume_integral=volume, boundary_integral=boundary, residual=residual, counts=counts, faces=faces)


def stokes_refinement(
    model: ModelManifold,
    fields: list[KillingField],
    region: Region,
    base_counts,
    levels: int = 3,
    h: float | None = None,
    threads: int | None = None,
) -> dict:
    """
    셀 수 2배 세분화 수준마다 Stokes 잔차를 계산합니다. 셀 수가 1인 축은 세분화하지 않습니다.
    """
    residuals = []
    reports = []
    for level in range(levels):
        counts = tuple(c if c == 1 else c * 2**level for c in base_counts)
        report = stokes_check(model, fields, region, counts, h=h, threads=threads)
        residuals.append(report.residual)
        reports.append(report)
    ratios = [b / a if a > 0.0 else 0.0 for a, b in zip(residuals, residuals[1:])]
    return {
        "residuals": residuals,
        "ratios": ratios,
        "halving": all(r <= 0.5 for r in ratios),
        "reports": reports,
    }


def scaling_check(build_model, fields_of, p, factors=(0.5, 2.0), s: float = math.inf) -> dict:
    """
    계량 λ² 배에서 틀 성분 |TP| 가 λ⁻³ 배가 되는지 확인합니다.

    Args:
        build_model: λ → 모델
        fields_of: 모델 → Killing 장 목록
    """
    base_model = build_model(1.0)
    base = transgression_density(base_model, fields_of(base_model), p, s=s).frame_norm
    ratios = {}
    for lam in factors:
        scaled_model = build_model(lam)
        value = transgression_density(scaled_model, fields_of(scaled_model), p, s=s).frame_norm
        ratios[float(lam)] = value * lam**3 / base if base > 0.0 else math.nan
    return {"base": base, "ratios": ratios}
