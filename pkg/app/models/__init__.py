"""모델 패키지 — 해석적 모델 다양체 카탈로그"""
from app.exceptions import ScenarioError
from app.models.base import ChartPoint, KillingField, ModelManifold, Region, SampledDomain
from app.models.bump import BumpMetric
from app.models.flat import FlatTorus
from app.models.oracle import DistanceOracle
from app.models.products import ProductS2S2, WarpedS1S3
from app.models.space_forms import Hyperbolic4, Sphere4

CATALOG: dict[str, type[ModelManifold]] = {
    "flat_torus": FlatTorus,
    "sphere4": Sphere4,
    "hyperbolic4": Hyperbolic4,
    "s2xs2": ProductS2S2,
    "warped_s1s3": WarpedS1S3,
    "bump": BumpMetric,
}


def build_model(name: str, **params) -> ModelManifold:
    """이름 + 매개변수 맵으로 카탈로그 모델을 만듭니다."""
    try:
        cls = CATALOG[name]
    except KeyError:
        raise ScenarioError(
            f"알 수 없는 모델 '{name}' (가능: {', '.join(sorted(CATALOG))})",
            module="models", key="model.name",
        ) from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ScenarioError(f"모델 '{name}' 매개변수 오류: {exc}", module="models", key="model.params") from exc
    except ScenarioError as exc:
        if exc.key is None:
            exc.key = "model.params"
        raise


__all__ = [
    "CATALOG",
    "BumpMetric",
    "ChartPoint",
    "DistanceOracle",
    "FlatTorus",
    "Hyperbolic4",
    "KillingField",
    "ModelManifold",
    "ProductS2S2",
    "Region",
    "SampledDomain",
    "Sphere4",
    "WarpedS1S3",
    "build_model",
]
