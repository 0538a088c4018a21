"""
Structured run logs and CSV report tables.
"""

from reporting.logger import RunLog, RunLogger, StepLog
from reporting.tables import read_frame, write_frame, write_record

__all__ = ["RunLog", "RunLogger", "StepLog", "read_frame", "write_frame", "write_record"]
