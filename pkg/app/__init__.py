"""epsreg4 — 4차원 ε-정칙성 수치 검증 패키지"""
