"""공용 픽스처: 카탈로그 모델 인스턴스, 시드 고정 난수, 시나리오 파일 작성기"""
import json

import numpy as np
import pytest

from app.models import BumpMetric, FlatTorus, Hyperbolic4, ProductS2S2, Region, Sphere4, WarpedS1S3


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def flat_torus():
    return FlatTorus()


@pytest.fixture
def flat_torus_2d():
    return FlatTorus(periods=(1.0, 1.0))


@pytest.fixture
def collapsed_torus():
    return FlatTorus(periods=(0.01, 1.0, 1.0, 1.0))


@pytest.fixture
def sphere():
    return Sphere4(1.0)


@pytest.fixture
def hyperbolic():
    return Hyperbolic4(1.0)


@pytest.fixture
def s2xs2():
    return ProductS2S2(1.0, 1.0)


@pytest.fixture
def warped():
    return WarpedS1S3(warp=0.3)


@pytest.fixture
def bump():
    return BumpMetric(amplitude=0.3, width=1.0)


@pytest.fixture
def write_scenario(tmp_path):
    """dict → JSON 시나리오 파일 경로"""
    def _write(document: dict, name: str = "scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return _write


# 모델별 작은 판(slab) 영역: (픽스처, 하한, 상한, 해상도, cutoff s)
CATALOG_SLABS = {
    "flat_torus": ("flat_torus", (0.1, 0.1, 0.1, 0.1), (0.4, 0.4, 0.11, 0.11), 0.02, 0.4),
    "sphere4": ("sphere", (1.2, 1.2, 1.0, 0.0), (1.5, 1.5, 1.01, 0.01), 0.02, 0.4),
    "hyperbolic4": ("hyperbolic", (0.0, 0.0, 0.0, 0.0), (0.15, 0.15, 0.005, 0.005), 0.02, 0.4),
    "s2xs2": ("s2xs2", (1.2, 1.0, 1.2, 1.0), (1.5, 1.01, 1.5, 1.01), 0.02, 0.3),
    "warped_s1s3": ("warped", (1.0, 1.0, 0.0, 0.0), (1.3, 1.3, 0.01, 0.01), 0.02, 0.3),
    "bump": ("bump", (0.6, 0.0, 0.0, 0.0), (0.9, 0.3, 0.01, 0.01), 0.02, 0.4),
}

# 측지선 슈팅이 필요한 모델
SHOOTING_MODELS = {"warped_s1s3", "bump"}


@pytest.fixture(
    params=[
        pytest.param(name, marks=pytest.mark.slow) if name in SHOOTING_MODELS else name
        for name in CATALOG_SLABS
    ]
)
def catalog_slab(request):
    """(모델, 표본 영역, s) — 카탈로그 전체에 대해 매개변수화"""
    fixture, lower, upper, resolution, s = CATALOG_SLABS[request.param]
    model = request.getfixturevalue(fixture)
    domain = model.sample_domain(Region(kind="box", lower=lower, upper=upper), resolution)
    return model, domain, s
