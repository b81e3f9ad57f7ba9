"""
수치 기하 커널

모델 카탈로그가 공유하는 유한차분·측지선·구적 도구 모음입니다.
- 4차 중심 유한차분 (배치 벡터화)
- 계량 → 크리스토펠 기호 → 리만 텐서 (독립 유한차분 오라클)
- 정규직교 틀, 레비-치비타 접속 1-형식, 곡률 2-형식
- RK4 적분기, 구면/반경 가우스 구적 규칙

모든 함수는 (B, n) 형태의 좌표 배치를 받습니다.
"""
import numpy as np
from scipy.special import roots_legendre

# 4차 중심차분 계수: f'(x) ≈ [f(x−2h) − 8f(x−h) + 8f(x+h) − f(x+2h)] / 12h
_STENCIL_SHIFTS = np.array([-2.0, -1.0, 1.0, 2.0])
_STENCIL_COEFS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0

# 리만 텐서 오라클이 좌표 방향으로 도달하는 최대 거리 (h 단위): 크리스토펠 2h + 미분 2h
RIEMANN_REACH = 4.0
CONNECTION_REACH = 4.0


def fd_partials(fn, X: np.ndarray, h: float) -> np.ndarray:
    """
    배치 함수의 좌표 편미분을 4차 중심차분으로 계산합니다.

    Args:
        fn: (M, n) → (M, *shape) 함수
        X: (B, n) 좌표
        h: 차분 간격

    Returns:
        (B, n, *shape) 배열, [b, j] = ∂_j fn(X[b])
    """
    X = np.asarray(X, dtype=float)
    B, n = X.shape
    eye = np.eye(n)
    pts = X[:, None, None, :] + h * _STENCIL_SHIFTS[None, None, :, None] * eye[None, :, None, :]
    vals = np.asarray(fn(pts.reshape(-1, n)))
    vals = vals.reshape((B, n, len(_STENCIL_SHIFTS)) + vals.shape[1:])
    return np.tensordot(vals, _STENCIL_COEFS, axes=([2], [0])) / h


def christoffel(metric_fn, X: np.ndarray, h: float) -> np.ndarray:
    """Γ^i_jk = ½ g^{il}(∂_j g_lk + ∂_k g_lj − ∂_l g_jk). 반환 형태 (B, i, j, k)"""
    g = metric_fn(X)
    ginv = np.linalg.inv(g)
    dg = fd_partials(metric_fn, X, h)  # [b, m, i, j] = ∂_m g_ij
    s1 = dg.transpose(0, 2, 1, 3)      # ∂_j g_lk  → [b, l, j, k]
    s2 = dg.transpose(0, 2, 3, 1)      # ∂_k g_lj  → [b, l, j, k]
    return 0.5 * np.einsum("zil,zljk->zijk", ginv, s1 + s2 - dg)


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """E = inv(cholesky(g))ᵀ, E[i, a] = e_a 의 i번째 좌표 성분 (Eᵀ g E = I)"""
    lower = np.linalg.cholesky(g)
    return np.swapaxes(np.linalg.inv(lower), -1, -2)


def riemann_fd(metric_fn, X: np.ndarray, h: float) -> np.ndarray:
    """
    유한차분 곡률 오라클. 정규직교 틀 성분 R_abcd 를 반환합니다 (B, 4, 4, 4, 4).

    R^i_jkl = ∂_kΓ^i_lj − ∂_lΓ^i_kj + Γ^i_km Γ^m_lj − Γ^i_lm Γ^m_kj
    R_abcd  = ⟨R(e_a, e_b) e_d, e_c⟩
    """
    X = np.asarray(X, dtype=float)
    gamma = christoffel(metric_fn, X, h)
    dgamma = fd_partials(lambda Y: christoffel(metric_fn, Y, h), X, h)  # [z, m, i, j, k]
    riem = (
        np.einsum("zkilj->zijkl", dgamma)
        - np.einsum("zlikj->zijkl", dgamma)
        + np.einsum("zikm,zmlj->zijkl", gamma, gamma)
        - np.einsum("zilm,zmkj->zijkl", gamma, gamma)
    )
    g = metric_fn(X)
    lowered = np.einsum("zmi,zijkl->zmjkl", g, riem)
    E = orthonormal_frame(g)
    return np.einsum("zka,zlb,zmc,zjd,zmjkl->zabcd", E, E, E, E, lowered)


def connection_forms(metric_fn, X: np.ndarray, h: float, frame_fn=None) -> np.ndarray:
    """
    레비-치비타 접속 1-형식 A_j[a, b] = Σ_i E⁻¹[a, i](∂_j E[i, b] + Γ^i_jk E[k, b]).

    ∇_{∂j} e_b = Σ_a A_j[a, b] e_a. 반환 형태 (B, j, a, b)
    """
    if frame_fn is None:
        frame_fn = lambda Y: orthonormal_frame(metric_fn(Y))  # noqa: E731
    E = frame_fn(X)
    Einv = np.linalg.inv(E)
    dE = fd_partials(frame_fn, X, h)  # [z, j, i, b]
    gamma = christoffel(metric_fn, X, h)
    return np.einsum("zai,zjib->zjab", Einv, dE) + np.einsum("zai,zijk,zkb->zjab", Einv, gamma, E)


def exterior_covariant(A_fn, B_fn, X: np.ndarray, h: float) -> np.ndarray:
    """
    so(4) 값 1-형식 B 의 A-공변 외미분
    (D_A B)_jk = ∂_j B_k − ∂_k B_j + [A_j, B_k] − [A_k, B_j]. 반환 형태 (B, j, k, a, b)
    """
    dB = fd_partials(B_fn, X, h)
    A = A_fn(X)
    Bv = B_fn(X)
    comm = np.einsum("zjac,zkcb->zjkab", A, Bv) - np.einsum("zkac,zjcb->zjkab", Bv, A)
    return dB - np.swapaxes(dB, 1, 2) + comm - np.swapaxes(comm, 1, 2)


def wedge_commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """성분별 교환자 [A_j, B_k] (B, j, k, a, b). A = B 이면 (A∧A)_jk 와 같습니다."""
    return np.einsum("zjac,zkcb->zjkab", A, B) - np.einsum("zkac,zjcb->zjkab", B, A)


def curvature_forms(A_fn, X: np.ndarray, h: float) -> np.ndarray:
    """F_jk = ∂_j A_k − ∂_k A_j + [A_j, A_k]. 반환 형태 (B, j, k, a, b)"""
    dA = fd_partials(A_fn, X, h)
    A = A_fn(X)
    return dA - np.swapaxes(dA, 1, 2) + wedge_commutator(A, A)


# ══════════════════════════════════════════════
# 적분기 / 구적
# ══════════════════════════════════════════════

def rk4(rhs, state: np.ndarray, steps: int, project=None) -> np.ndarray:
    """t ∈ [0, 1] 을 고정 간격 RK4로 적분합니다. project가 주어지면 매 단계 후 적용합니다."""
    dt = 1.0 / steps
    y = np.array(state, dtype=float)
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if project is not None:
            y = project(y)
    return y


def gauss_legendre(a: float, b: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """[a, b] 위의 m점 가우스-르장드르 노드와 가중치"""
    x, w = roots_legendre(m)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def sphere_rule(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """
    단위구면 S^{n−1} ⊂ R^n 위의 곱 구적 규칙.

    n = 1 → {±1}, n = 2 → 2m 등간격 사다리꼴, n ≥ 3 → 극각 가우스 × S^{n−2} 재귀.
    가중치 합은 |S^{n−1}| 입니다.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        count = 2 * m
        ang = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1), np.full(count, 2.0 * np.pi / count)
    alpha, wa = gauss_legendre(0.0, np.pi, m)
    sub_dirs, sub_w = sphere_rule(n - 1, m)
    dirs = []
    weights = []
    for a, w in zip(alpha, wa):
        dirs.append(np.concatenate([np.full((len(sub_dirs), 1), np.cos(a)), np.sin(a) * sub_dirs], axis=1))
        weights.append(w * np.sin(a) ** (n - 2) * sub_w)
    return np.concatenate(dirs, axis=0), np.concatenate(weights)
