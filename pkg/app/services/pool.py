"""
스레드 풀 병렬 맵

입력 순서를 보존하므로 결과를 모아 합산해도 스레드 수와 무관하게 같은 값이 나옵니다.
threads = 1 이면 풀 없이 순차 실행합니다.
"""
from concurrent.futures import ThreadPoolExecutor

from app.config import settings


def parallel_map(fn, items, threads: int | None = None) -> list:
    threads = settings.THREADS if threads is None else threads
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))
