"""파서 패키지"""
from app.parser.scenario_parser import load_document, parse_scenario

__all__ = ["load_document", "parse_scenario"]
