"""
표본점 거리 오라클

덮개·적분 모듈이 표본점 쌍의 거리를 반복해서 묻기 때문에
행 단위로 계산 결과를 캐시합니다.

- 닫힌 형식 거리 모델: 요청한 쌍을 한 번에 벡터화 계산
- 수치 모델: 거리 하한으로 먼저 걸러 cutoff 이하인 쌍만 측지선 슈팅
"""
import logging

import numpy as np

from app.models.base import ModelManifold

logger = logging.getLogger(__name__)

# 밀집 캐시를 허용하는 최대 원소 수
_DENSE_LIMIT = 20_000_000


class DistanceOracle:
    """rows × cols 표본점 사이 거리. cols 를 생략하면 rows 자신과의 거리"""

    def __init__(self, model: ModelManifold, rows: np.ndarray, cols: np.ndarray | None = None):
        self.model = model
        self.rows = np.atleast_2d(np.asarray(rows, dtype=float))
        self.cols = self.rows if cols is None else np.atleast_2d(np.asarray(cols, dtype=float))
        self.symmetric = cols is None
        shape = (len(self.rows), len(self.cols))
        if shape[0] * shape[1] <= _DENSE_LIMIT:
            self._cache = np.full(shape, np.nan)
        else:
            self._cache = None
            logger.debug("거리 캐시 비활성화: %d × %d", *shape)
        self.evaluations = 0

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    def _compute(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        if len(i) == 0:
            return np.empty(0)
        self.evaluations += len(i)
        return self.model.pairwise_distance(self.rows[i], self.cols[j])

    def pairs(self, i, j) -> np.ndarray:
        """(i, j) 쌍 거리 (브로드캐스트 가능한 인덱스 배열)"""
        i, j = np.broadcast_arrays(np.asarray(i, dtype=int), np.asarray(j, dtype=int))
        shape = i.shape
        i, j = i.reshape(-1), j.reshape(-1)
        if self._cache is None:
            return self._compute(i, j).reshape(shape)
        vals = self._cache[i, j]
        todo = np.flatnonzero(np.isnan(vals))
        if len(todo):
            # 중복 쌍은 한 번만 계산
            keys, inverse = np.unique(np.stack([i[todo], j[todo]], axis=1), axis=0, return_inverse=True)
            fresh = self._compute(keys[:, 0], keys[:, 1])
            self._cache[keys[:, 0], keys[:, 1]] = fresh
            if self.symmetric:
                self._cache[keys[:, 1], keys[:, 0]] = fresh
            vals[todo] = fresh[np.asarray(inverse).reshape(-1)]
        return vals.reshape(shape)

    def row(self, i: int, cols: np.ndarray | None = None) -> np.ndarray:
        cols = np.arange(len(self.cols)) if cols is None else np.asarray(cols, dtype=int)
        return self.pairs(np.full(len(cols), i), cols)

    def within(self, i: int, radius: float, cols: np.ndarray | None = None, closed: bool = True) -> np.ndarray:
        """d(i, j) ≤ radius (closed) 또는 < radius 인 열 인덱스. 하한으로 먼저 거릅니다."""
        cols = np.arange(len(self.cols)) if cols is None else np.asarray(cols, dtype=int)
        if len(cols) == 0:
            return cols
        if self.model.closed_form_distance:
            candidates = cols
        else:
            lb = self.model.distance_lower_bound(np.repeat(self.rows[i:i + 1], len(cols), axis=0), self.cols[cols])
            candidates = cols[lb <= radius]
        d = self.row(i, candidates)
        keep = d <= radius if closed else d < radius
        return candidates[keep]

    def within_radii(self, radii: np.ndarray, closed: bool = True) -> list[np.ndarray]:
        """각 행 i 에 대해 d(i, j) ≤ radii[i] 인 열 인덱스 목록"""
        return [self.within(i, float(radii[i]), closed=closed) for i in range(len(self.rows))]
