"""
epsreg4 명령줄 진입점

시나리오 문서 하나를 읽어 작업 파이프라인을 실행하고 보고서를 씁니다.

실행 방법:
    python -m app.main --config scenarios/s4_gauss_bonnet.json --out reports/

종료 코드:
    0  성공
    2  설정/스키마 오류 (키 경로 출력, 보고서 파일 없음)
    3  수치 영역 오류, 보고서 쓰기 오류 (발생 모듈 출력)

출력 파일 (<name> = 시나리오 이름):
    json   → <name>.json (요약 + 행)
    csv    → <name>.csv (행) + <name>.summary.json
    jsonl  → <name>.jsonl (행) + <name>.summary.json
"""
import argparse
import logging
import sys
from pathlib import Path

from app.config import settings
from app.exceptions import EpsregError, NumericalDomainError, ScenarioError
from app.models import build_model
from app.parser.scenario_parser import parse_scenario
from app.routers.tasks import dispatch
from app.schemas.report import ReportOut
from app.storage import emit_report

logger = logging.getLogger("app")

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_NUMERICAL = 3


def run_scenario(config: str | Path, out_dir: str | Path, threads: int | None = None) -> list[Path]:
    """
    시나리오를 실행하고 쓴 보고서 경로를 돌려줍니다.

    설정 검증과 계산이 모두 끝난 뒤에만 파일을 씁니다.

    Raises:
        ScenarioError: 설정 오류
        NumericalDomainError: 수치 영역 오류 또는 보고서 쓰기 실패
    """
    sc = parse_scenario(config)
    model = build_model(sc.model.name, **sc.model.params)
    result = dispatch(sc, model, threads)

    out_dir = Path(out_dir)
    fmt = sc.output.format
    document = ReportOut(
        scenario=sc.name,
        task=sc.task.task,
        model=repr(model),
        seed=sc.seed,
        summary=result.summary,
        rows=result.rows if fmt == "json" else [],
    )
    written = []
    if fmt == "json":
        written.append(emit_report(document, "json", out_dir / f"{sc.name}.json"))
    else:
        written.append(emit_report(result.rows, fmt, out_dir / f"{sc.name}.{fmt}", columns=result.columns))
        written.append(emit_report(document, "json", out_dir / f"{sc.name}.summary.json"))
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epsreg4", description="4차원 ε-정칙성 수치 검증 시나리오 실행기")
    parser.add_argument("--config", required=True, help="시나리오 문서 (JSON, YAML 허용)")
    parser.add_argument("--out", default="reports", help="보고서 디렉터리 (기본: reports)")
    parser.add_argument("--threads", type=int, default=None, help=f"스레드 수 (기본: {settings.THREADS})")
    parser.add_argument("--verbose", action="store_true", help="DEBUG 로그 출력")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.threads is not None and args.threads < 1:
        logger.error("--threads 는 1 이상이어야 합니다: %d", args.threads)
        return EXIT_SCENARIO

    try:
        paths = run_scenario(args.config, args.out, args.threads)
    except ScenarioError as exc:
        logger.error("설정 오류 %s", exc)
        return EXIT_SCENARIO
    except NumericalDomainError as exc:
        logger.error("수치 영역 오류 %s", exc)
        return EXIT_NUMERICAL
    except EpsregError as exc:
        logger.error("오류 %s", exc)
        return EXIT_NUMERICAL

    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
