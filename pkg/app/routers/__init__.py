"""라우터 패키지"""
from app.routers.tasks import TASKS, dispatch

__all__ = ["TASKS", "dispatch"]
