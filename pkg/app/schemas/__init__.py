"""스키마 패키지"""
from app.schemas.report import ReportOut, TaskResult
from app.schemas.scenario import Scenario

__all__ = ["ReportOut", "Scenario", "TaskResult"]
