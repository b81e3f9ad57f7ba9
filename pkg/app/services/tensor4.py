"""
4차원 곡률 텐서 대수

정규직교 틀에서의 곡률 텐서를 기약 성분으로 분해하고, 노름과 특성 형식 밀도를 계산합니다.
- 규약: R_abcd = ⟨R(e_a, e_b) e_d, e_c⟩ (단위 구면에서 R_abab = +1)
- 노름은 모두 텐서 노름(성분 제곱합)입니다.
- 자기쌍대/반자기쌍대 분리는 2-형식 공간의 고정 기저와 Hodge 별 연산자로 계산합니다.

2-형식 기저 순서:
    (01), (02), (03), (23), (31), (12)
    → 표준 방향에서 Hodge 별 연산자가 [[0, I], [I, 0]] 이 됩니다.
"""
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from app.config import settings
from app.exceptions import SymmetryError

logger = logging.getLogger(__name__)

PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (0, 3), (2, 3), (3, 1), (1, 2))


def _levi_civita() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        inversions = sum(1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


EPSILON = _levi_civita()


def hodge_star(orientation: int = 1) -> np.ndarray:
    """2-형식 기저에서의 Hodge 별 연산자 (6×6). S[J, I] = ε_abcd, I=(a,b), J=(c,d)"""
    star = np.zeros((6, 6))
    for i, (a, b) in enumerate(PAIRS):
        for j, (c, d) in enumerate(PAIRS):
            star[j, i] = EPSILON[a, b, c, d]
    return orientation * star


def _self_dual_bases(orientation: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Λ⁺, Λ⁻ 정규직교 기저 (각 6×3). 열 = (e_I ± S e_I)/√2, I ∈ {(01),(02),(03)}"""
    star = hodge_star(orientation)
    eye = np.eye(6)
    plus = np.stack([(eye[:, i] + star @ eye[:, i]) / np.sqrt(2.0) for i in range(3)], axis=1)
    minus = np.stack([(eye[:, i] - star @ eye[:, i]) / np.sqrt(2.0) for i in range(3)], axis=1)
    return plus, minus


# ══════════════════════════════════════════════
# 텐서 ↔ 2-형식 연산자 변환
# ══════════════════════════════════════════════

def to_bivector(components: np.ndarray) -> np.ndarray:
    """R_abcd → 6×6 연산자 M[I, J] = R_{I J}. |Rm|² = 4|M|_F²"""
    op = np.empty((6, 6))
    for i, (a, b) in enumerate(PAIRS):
        for j, (c, d) in enumerate(PAIRS):
            op[i, j] = components[a, b, c, d]
    return op


def from_bivector(op: np.ndarray) -> np.ndarray:
    """6×6 연산자 → 반대칭 쌍을 채운 R_abcd"""
    rm = np.zeros((4, 4, 4, 4))
    for i, (a, b) in enumerate(PAIRS):
        for j, (c, d) in enumerate(PAIRS):
            v = op[i, j]
            rm[a, b, c, d] = v
            rm[b, a, c, d] = -v
            rm[a, b, d, c] = -v
            rm[b, a, d, c] = v
    return rm


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """(h ⊙ k)_abcd = h_ac k_bd + h_bd k_ac − h_ad k_bc − h_bc k_ad"""
    return (
        np.einsum("ac,bd->abcd", h, k)
        + np.einsum("bd,ac->abcd", h, k)
        - np.einsum("ad,bc->abcd", h, k)
        - np.einsum("bc,ad->abcd", h, k)
    )


# ══════════════════════════════════════════════
# 도메인 타입
# ══════════════════════════════════════════════

def symmetry_residuals(components: np.ndarray) -> dict[str, float]:
    """
    리만 대칭성별 잔차를 최대 성분 대비 상대값으로 반환합니다.

    Returns:
        {"first_pair": .., "last_pair": .., "pair_interchange": .., "bianchi": ..}
    """
    scale = max(float(np.max(np.abs(components))), 1e-300)
    bianchi = (
        components
        + np.transpose(components, (0, 2, 3, 1))
        + np.transpose(components, (0, 3, 1, 2))
    )
    return {
        "first_pair": float(np.max(np.abs(components + np.transpose(components, (1, 0, 2, 3))))) / scale,
        "last_pair": float(np.max(np.abs(components + np.transpose(components, (0, 1, 3, 2))))) / scale,
        "pair_interchange": float(np.max(np.abs(components - np.transpose(components, (2, 3, 0, 1))))) / scale,
        "bianchi": float(np.max(np.abs(bianchi))) / scale,
    }


def project_curvature(components: np.ndarray) -> np.ndarray:
    """임의의 4-텐서를 대수적 곡률 텐서 공간으로 직교 사영합니다 (유한차분 오라클 보정용)."""
    arr = np.asarray(components, dtype=float)
    arr = 0.5 * (arr - np.transpose(arr, (1, 0, 2, 3)))
    arr = 0.5 * (arr - np.transpose(arr, (0, 1, 3, 2)))
    op = to_bivector(arr)
    op = 0.5 * (op + op.T)
    star = hodge_star()
    op = op - (np.trace(star @ op) / 6.0) * star
    return from_bivector(op)


@dataclass(frozen=True)
class CurvatureTensor:
    """정규직교 틀에서의 리만 곡률 텐서 (단위: 길이⁻²)"""
    components: np.ndarray

    @classmethod
    def from_array(cls, components, tol: float | None = None) -> "CurvatureTensor":
        """
        대칭성을 검사하여 CurvatureTensor를 만듭니다.

        잔차가 허용오차 이하이면 사영으로 대칭화하고,
        초과하면 위반된 대칭 이름과 함께 SymmetryError를 발생시킵니다.
        """
        tol = settings.SYMMETRY_TOL if tol is None else tol
        arr = np.asarray(components, dtype=float)
        if arr.shape != (4, 4, 4, 4):
            raise SymmetryError(
                f"곡률 텐서의 형태가 (4,4,4,4)가 아닙니다: {arr.shape}",
                symmetry="shape", residual=float("inf"),
            )
        if not np.all(np.isfinite(arr)):
            raise SymmetryError("곡률 텐서에 유한하지 않은 성분이 있습니다.", symmetry="finite", residual=float("inf"))
        if np.max(np.abs(arr)) == 0.0:
            return cls(arr.copy())
        for name, residual in symmetry_residuals(arr).items():
            if residual > tol:
                raise SymmetryError(
                    f"리만 대칭성 '{name}' 위반: 상대 잔차 {residual:.3e} > {tol:.1e}",
                    symmetry=name, residual=residual,
                )
        return cls(project_curvature(arr))

    @classmethod
    def zero(cls) -> "CurvatureTensor":
        return cls(np.zeros((4, 4, 4, 4)))

    @classmethod
    def constant_curvature(cls, kappa: float) -> "CurvatureTensor":
        """단면곡률 κ 인 상수곡률 텐서 = (κ/2) g⊙g"""
        return cls(0.5 * kappa * kulkarni_nomizu(np.eye(4), np.eye(4)))

    def rotated(self, frame: np.ndarray) -> "CurvatureTensor":
        """틀 변환 e'_a = Σ_i O[i, a] e_i 를 적용한 성분"""
        o = np.asarray(frame, dtype=float)
        return CurvatureTensor(np.einsum("ia,jb,kc,ld,ijkl->abcd", o, o, o, o, self.components))

    def norm_squared(self) -> float:
        return float(np.sum(self.components**2))

    def ricci(self) -> np.ndarray:
        return np.einsum("abad->bd", self.components)


@dataclass(frozen=True)
class CurvatureDecomposition:
    """스칼라 곡률, 무대각 리치, 자기쌍대/반자기쌍대 바일 성분"""
    scalar: float
    ric0: np.ndarray
    wplus: np.ndarray
    wminus: np.ndarray
    orientation: int = 1
    # 재조립 검증용 원 텐서 노름 (없으면 성분으로부터 계산)
    rm_norm_squared: float | None = field(default=None, compare=False)


@dataclass(frozen=True)
class NormReport:
    rm_sq: float
    scalar_sq: float
    ric0_sq: float
    wplus_sq: float
    wminus_sq: float
    residual: float

    @property
    def weyl_sq(self) -> float:
        return self.wplus_sq + self.wminus_sq


@dataclass(frozen=True)
class CharacteristicDensities:
    """특성 형식 밀도 (단위: 길이⁻⁴). combined = 32π²(P_χ + 3P_τ)"""
    pchi: float
    ptau: float
    combined: float
    energy_residual: float
    alternative_residual: float

    @property
    def alternative_matches(self) -> bool:
        """(P_χ + P_τ) 변형이 오히려 맞는 경우 True (보고서 표시용)"""
        scale = max(abs(self.energy_residual), abs(self.alternative_residual), 1e-300)
        return abs(self.alternative_residual) < abs(self.energy_residual) and abs(self.alternative_residual) / scale < 1e-6


# ══════════════════════════════════════════════
# 연산
# ══════════════════════════════════════════════

def decompose(rm: CurvatureTensor | np.ndarray, orientation: int = 1) -> CurvatureDecomposition:
    """
    곡률 텐서를 기약 성분으로 분해합니다.

    Rm = (R/24) g⊙g + ½ R̊ic⊙g + W,  W = W⁺ + W⁻

    Args:
        rm: CurvatureTensor 또는 (4,4,4,4) 배열 (배열이면 대칭성 검사)
        orientation: +1 (표준 방향) 또는 −1

    Returns:
        CurvatureDecomposition (wplus, wminus는 Λ± 정규직교 기저에서의 3×3 연산자)
    """
    if orientation not in (1, -1):
        raise ValueError(f"orientation은 ±1이어야 합니다: {orientation}")
    if not isinstance(rm, CurvatureTensor):
        rm = CurvatureTensor.from_array(rm)

    g = np.eye(4)
    ric = rm.ricci()
    scalar = float(np.trace(ric))
    ric0 = ric - 0.25 * scalar * g
    ric0 = 0.5 * (ric0 + ric0.T)

    weyl = rm.components - (scalar / 24.0) * kulkarni_nomizu(g, g) - 0.5 * kulkarni_nomizu(ric0, g)
    weyl_op = to_bivector(weyl)
    weyl_op = 0.5 * (weyl_op + weyl_op.T)
    plus, minus = _self_dual_bases(orientation)
    wplus = plus.T @ weyl_op @ plus
    wminus = minus.T @ weyl_op @ minus

    return CurvatureDecomposition(
        scalar=scalar,
        ric0=ric0,
        wplus=0.5 * (wplus + wplus.T),
        wminus=0.5 * (wminus + wminus.T),
        orientation=orientation,
        rm_norm_squared=rm.norm_squared(),
    )


def reassemble(dec: CurvatureDecomposition) -> CurvatureTensor:
    """분해 성분으로부터 곡률 텐서를 다시 조립합니다."""
    g = np.eye(4)
    plus, minus = _self_dual_bases(dec.orientation)
    weyl_op = plus @ dec.wplus @ plus.T + minus @ dec.wminus @ minus.T
    comps = (
        (dec.scalar / 24.0) * kulkarni_nomizu(g, g)
        + 0.5 * kulkarni_nomizu(dec.ric0, g)
        + from_bivector(weyl_op)
    )
    return CurvatureTensor(comps)


def norms_and_identities(dec: CurvatureDecomposition) -> NormReport:
    """
    분해로부터 텐서 노름들과 |Rm|² 항등식 잔차를 계산합니다.

    W± 의 텐서 노름은 3×3 연산자 Frobenius 노름의 4배입니다.
    """
    scalar_sq = dec.scalar**2
    ric0_sq = float(np.sum(dec.ric0**2))
    wplus_sq = 4.0 * float(np.sum(dec.wplus**2))
    wminus_sq = 4.0 * float(np.sum(dec.wminus**2))
    rm_sq = dec.rm_norm_squared
    if rm_sq is None:
        rm_sq = reassemble(dec).norm_squared()
    residual = rm_sq - (scalar_sq / 6.0 + 2.0 * ric0_sq + wplus_sq + wminus_sq)
    return NormReport(
        rm_sq=rm_sq,
        scalar_sq=scalar_sq,
        ric0_sq=ric0_sq,
        wplus_sq=wplus_sq,
        wminus_sq=wminus_sq,
        residual=residual,
    )


def characteristic_densities(dec: CurvatureDecomposition) -> CharacteristicDensities:
    """
    오일러·부호수 형식 밀도와 에너지 항등식 잔차를 계산합니다.

    P_χ = (1/8π²)(R²/24 − |R̊ic|²/2 + |W⁺|²/4 + |W⁻|²/4)
    P_τ = (1/12π²)(|W⁺|²/4 − |W⁻|²/4)
    |Rm|² = R²/3 + 4|W⁺|² − 32π²(P_χ + 3P_τ)
    """
    norms = norms_and_identities(dec)
    pi2 = np.pi**2
    pchi = (norms.scalar_sq / 24.0 - norms.ric0_sq / 2.0 + norms.wplus_sq / 4.0 + norms.wminus_sq / 4.0) / (8.0 * pi2)
    ptau = (norms.wplus_sq / 4.0 - norms.wminus_sq / 4.0) / (12.0 * pi2)
    combined = 32.0 * pi2 * (pchi + 3.0 * ptau)
    base = norms.scalar_sq / 3.0 + 4.0 * norms.wplus_sq
    energy_residual = norms.rm_sq - (base - combined)
    alternative_residual = norms.rm_sq - (base - 32.0 * pi2 * (pchi + ptau))
    return CharacteristicDensities(
        pchi=pchi,
        ptau=ptau,
        combined=combined,
        energy_residual=energy_residual,
        alternative_residual=alternative_residual,
    )


# ── so(4) 값 형식용 불변 다항식 ──

def pchi_bilinear(x: np.ndarray, y: np.ndarray, orientation: int = 1) -> np.ndarray:
    """P_χ(X, Y) = (1/32π²) Σ ε_abcd X_ab Y_cd. 끝 두 축이 행렬 축"""
    return orientation * np.einsum("abcd,...ab,...cd->...", EPSILON, x, y) / (32.0 * np.pi**2)


def ptau_bilinear(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """P_τ(X, Y) = −(1/24π²) tr(XY)"""
    return -np.einsum("...ab,...ba->...", x, y) / (24.0 * np.pi**2)


def combined_bilinear(x: np.ndarray, y: np.ndarray, orientation: int = 1) -> np.ndarray:
    """32π²(P_χ + 3P_τ)(X, Y) 를 정규화한 다항식 P(X, Y) = P_χ + 3P_τ"""
    return pchi_bilinear(x, y, orientation) + 3.0 * ptau_bilinear(x, y)


def four_form_density(f: np.ndarray, poly=combined_bilinear, orientation: int = 1) -> float:
    """
    so(4) 값 2-형식 F_ab (형태 (4,4,4,4), 앞 두 축이 형식 축)에 대해
    P(F, F) 의 부피 형식 계수 = ¼ Σ ε^{abcd} P(F_ab, F_cd)
    """
    total = 0.0
    for a, b, c, d in itertools.permutations(range(4)):
        total += EPSILON[a, b, c, d] * float(poly(f[a, b], f[c, d]))
    return orientation * 0.25 * total


# ── 무작위 곡률 / 틀 ──

def random_curvature(rng: np.random.Generator, scale: float = 1.0) -> CurvatureTensor:
    """대칭 6×6 연산자를 Hodge 별 방향에서 사영하여 만든 무작위 대수적 곡률 텐서"""
    op = rng.normal(scale=scale, size=(6, 6))
    op = 0.5 * (op + op.T)
    star = hodge_star()
    op = op - (np.trace(star @ op) / 6.0) * star
    return CurvatureTensor(from_bivector(op))


def random_rotation(rng: np.random.Generator, orientation: int = 1) -> np.ndarray:
    """방향(det 부호)을 지정한 무작위 직교 행렬"""
    q, r = np.linalg.qr(rng.normal(size=(4, 4)))
    q = q * np.sign(np.diag(r))
    if np.sign(np.linalg.det(q)) != orientation:
        q[:, 0] = -q[:, 0]
    return q


def reflect(rm: CurvatureTensor, axis: int = 0) -> CurvatureTensor:
    """틀 축 하나를 뒤집는 방향 반전 변환"""
    o = np.eye(4)
    o[axis, axis] = -1.0
    return rm.rotated(o)


def brute_force_norm(components: np.ndarray) -> float:
    """이중 축약으로 직접 계산한 |Rm|² (독립 오라클)"""
    return float(np.einsum("abcd,abcd->", components, components))


# ── 배치 불변량 (표본점 적분용) ──

_PAIR_A = np.array([a for a, _ in PAIRS])
_PAIR_B = np.array([b for _, b in PAIRS])


def _kn_with_metric(h: np.ndarray) -> np.ndarray:
    """배치 h ⊙ g (g = δ). 반환 형태 (B, 4, 4, 4, 4)"""
    g = np.eye(4)
    return (
        np.einsum("zac,bd->zabcd", h, g)
        + np.einsum("zbd,ac->zabcd", h, g)
        - np.einsum("zad,bc->zabcd", h, g)
        - np.einsum("zbc,ad->zabcd", h, g)
    )


def batch_invariants(components: np.ndarray, orientation: int = 1) -> dict[str, np.ndarray]:
    """
    (B, 4, 4, 4, 4) 곡률 성분 배치의 점별 불변량을 한 번에 계산합니다.

    decompose → characteristic_densities 를 점마다 부르는 것과 같은 값이며,
    수만 개 표본점의 가우스-보네 적분에 사용합니다.

    Returns:
        rm_sq, scalar, ric0_sq, wplus_sq, wminus_sq, pchi, ptau 배열 딕셔너리
    """
    comps = np.asarray(components, dtype=float)
    if comps.ndim == 4:
        comps = comps[None]
    rm_sq = np.einsum("zabcd,zabcd->z", comps, comps)
    ric = np.einsum("zabad->zbd", comps)
    scalar = np.trace(ric, axis1=1, axis2=2)
    ric0 = ric - 0.25 * scalar[:, None, None] * np.eye(4)[None]
    ric0 = 0.5 * (ric0 + np.swapaxes(ric0, 1, 2))
    ric0_sq = np.einsum("zab,zab->z", ric0, ric0)

    gg = kulkarni_nomizu(np.eye(4), np.eye(4))
    weyl = comps - (scalar / 24.0)[:, None, None, None, None] * gg[None] - 0.5 * _kn_with_metric(ric0)
    op = weyl[:, _PAIR_A[:, None], _PAIR_B[:, None], _PAIR_A[None, :], _PAIR_B[None, :]]
    op = 0.5 * (op + np.swapaxes(op, 1, 2))
    plus, minus = _self_dual_bases(orientation)
    wplus = np.einsum("ia,zij,jb->zab", plus, op, plus)
    wminus = np.einsum("ia,zij,jb->zab", minus, op, minus)
    wplus_sq = 4.0 * np.einsum("zab,zab->z", wplus, wplus)
    wminus_sq = 4.0 * np.einsum("zab,zab->z", wminus, wminus)

    pi2 = np.pi**2
    scalar_sq = scalar**2
    pchi = (scalar_sq / 24.0 - ric0_sq / 2.0 + wplus_sq / 4.0 + wminus_sq / 4.0) / (8.0 * pi2)
    ptau = (wplus_sq / 4.0 - wminus_sq / 4.0) / (12.0 * pi2)
    return {
        "rm_sq": rm_sq,
        "scalar": scalar,
        "ric0_sq": ric0_sq,
        "wplus_sq": wplus_sq,
        "wminus_sq": wminus_sq,
        "pchi": pchi,
        "ptau": ptau,
    }
