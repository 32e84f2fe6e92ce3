"""Event logging for deltabench runs."""

from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional
import atexit
import json
import sys
import threading
import time

import numpy as np


@dataclass
class EventEntry:
    """Single event log entry."""
    timestamp: float
    level: str
    message: str
    context: Optional[Dict[str, Any]] = None

    def clock(self) -> str:
        return datetime.fromtimestamp(self.timestamp).strftime("%H:%M:%S.%f")[:-3]

    def to_record(self) -> Dict[str, Any]:
        record = {'timestamp': self.timestamp, 'level': self.level, 'message': self.message,
                  'formatted_time': self.clock()}
        if self.context:
            record.update(self.context)
        return record


def _json_default(value):
    """numpy scalars and arrays in DEBUG context."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


class LogManager:
    """Writes run events as JSON lines.

    INFO and above are echoed to stderr; DEBUG goes to the file only, and
    only in debug mode.
    """

    def __init__(self, log_file: Optional[str] = None, debug_mode: bool = False,
                 echo: bool = True, batch_size: int = 100):
        """Initialize log manager.

        Args:
            log_file: Path to the JSONL event file (default: logs/events.jsonl)
            debug_mode: Persist DEBUG events (default: False)
            echo: Print INFO and above to stderr
            batch_size: Buffered events before a write
        """
        self.debug_mode = debug_mode
        self.echo = echo
        self.batch_size = batch_size
        self.level_counts: Counter = Counter()
        self._pending: List[EventEntry] = []
        self._lock = threading.Lock()
        self.log_file = Path(log_file or "logs/events.jsonl")
        self.log_file.parent.mkdir(parents=True, exist_ok=True)
        atexit.register(self.flush)

    def log_event(self, level: str, message: str, **context) -> None:
        entry = EventEntry(time.time(), level.upper(), message, context or None)
        self.level_counts[entry.level] += 1
        if entry.level == "DEBUG":
            if not self.debug_mode:
                return
        elif self.echo:
            print(f"{entry.clock()} {entry.level:<8} {message}", file=sys.stderr)
        with self._lock:
            self._pending.append(entry)
            if len(self._pending) >= self.batch_size:
                self._write_pending()

    def info(self, message: str) -> None:
        self.log_event("INFO", message)

    def warning(self, message: str) -> None:
        self.log_event("WARNING", message)

    def error(self, message: str) -> None:
        self.log_event("ERROR", message)

    def debug(self, message: str, **context) -> None:
        """File only, never echoed."""
        self.log_event("DEBUG", message, **context)

    def debug_rule(self, rule_name: str, conditions: Dict[str, Any]) -> None:
        """Log DEBUG when a cleaning rule removed samples.

        Args:
            rule_name: Name of the rule
            conditions: Per-rule counts (flagged, removed, thresholds)
        """
        self.log_event("DEBUG", f"[Rule Applied] {rule_name}", rule=rule_name, conditions=conditions)

    @contextmanager
    def timed(self, stage: str):
        """Log '[TIMING] stage: N.Ns' when the block finishes."""
        started = time.time()
        try:
            yield
        finally:
            self.info(f"[TIMING] {stage}: {time.time() - started:.1f}s")

    def _write_pending(self) -> None:
        if not self._pending:
            return
        try:
            with open(self.log_file, 'a') as f:
                f.writelines(json.dumps(e.to_record(), default=_json_default) + '\n' for e in self._pending)
            self._pending.clear()
        except OSError as e:
            print(f"Warning: Could not write events to {self.log_file}: {e}", file=sys.stderr)

    def flush(self) -> None:
        """Write buffered events (also called at exit)."""
        with self._lock:
            self._write_pending()


def read_events(log_file) -> List[Dict[str, Any]]:
    """Parse a JSONL event file, skipping malformed lines."""
    path = Path(log_file)
    if not path.exists():
        return []
    events = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError:
            continue
    return events
