from .metrics import RunMetrics, compare_golden, GoldenReport
from .session import Session, SessionResult

__all__ = ["RunMetrics", "compare_golden", "GoldenReport", "Session", "SessionResult"]
