"""Structured JSON logs for search and calibration runs."""

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Optional


@dataclass
class StepLog:
    """One logged evaluation or milestone."""
    step: int
    event: str
    data: dict[str, Any] = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat())


@dataclass
class RunLog:
    """Complete log for one command run."""
    command: str
    start_time: str
    end_time: Optional[str] = None
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)
    result: dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    steps: list[StepLog] = field(default_factory=list)

    def add_step(self, step_log: StepLog):
        self.steps.append(step_log)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, filepath: str | Path):
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2, default=_jsonable)

    @classmethod
    def load(cls, filepath: str | Path) -> "RunLog":
        with open(filepath, "r") as f:
            data = json.load(f)
        if "steps" in data:
            data["steps"] = [StepLog(**step) for step in data["steps"]]
        return cls(**data)


def _jsonable(value):
    # numpy scalars and arrays
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


class RunLogger:
    """Collects steps of one run and writes them as JSON under ``log_dir``.

    Steps are buffered and the file is rewritten every ``flush_every`` steps
    and at the end of the run.
    """

    def __init__(self, log_dir: str | Path = "logs", flush_every: int = 100):
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.flush_every = flush_every
        self.current_log: Optional[RunLog] = None
        self.current_filepath: Optional[Path] = None

    def start_run(self, command: str, seed: int = 0, **params) -> RunLog:
        self.current_log = RunLog(
            command=command,
            start_time=datetime.now().isoformat(),
            seed=seed,
            params=params,
        )
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
        self.current_filepath = self.log_dir / f"{command}_{timestamp}.json"
        self.current_log.save(self.current_filepath)
        return self.current_log

    def log_step(self, event: str, **data):
        if not self.current_log:
            raise RuntimeError("No active log. Call start_run() first.")
        self.current_log.add_step(StepLog(step=len(self.current_log.steps) + 1, event=event, data=data))
        if self.current_filepath and len(self.current_log.steps) % self.flush_every == 0:
            self.current_log.save(self.current_filepath)

    def end_run(self, result: Optional[dict] = None, error: Optional[str] = None) -> str:
        if not self.current_log:
            raise RuntimeError("No active log. Call start_run() first.")
        self.current_log.end_time = datetime.now().isoformat()
        self.current_log.result = result or {}
        self.current_log.error = error
        filepath = self.current_filepath or self.log_dir / f"{self.current_log.command}_final.json"
        self.current_log.save(filepath)
        return str(filepath)
