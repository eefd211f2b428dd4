"""Task records and end-to-end delay accounting."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

# delay categories
PROPAGATION = "p"
TRANSMISSION = "t"
QUEUEING = "q"
COMPUTING = "c"
CATEGORIES = (PROPAGATION, TRANSMISSION, QUEUEING, COMPUTING)


class TaskType(str, Enum):
    COMPRESSION = "compression"
    INFERENCE = "inference"


class AccountingError(RuntimeError):
    pass


@dataclass(eq=False)
class Task:
    id: int
    type: TaskType
    s: float
    d: float
    s_prime: float
    t_b: float
    source: int
    destination: int
    x_c: int = 0
    hop_trace: list = field(default_factory=list)
    t_last_decision: float | None = None
    hops: int = 0
    computed_at: int | None = None
    location: int | None = None
    outcome: str | None = None
    t_end: float | None = None
    # accounting
    mark: float = 0.0
    log: list = field(default_factory=list)
    T_p: float = 0.0
    T_t: float = 0.0
    T_q: float = 0.0
    T_c: float = 0.0
    # policy scratch space (pending transition, ICS plan, ...)
    pending: object = None
    plan: object = None
    wait_since: float | None = None

    def __post_init__(self):
        self.mark = self.t_b
        self.hop_trace.append((self.source, self.t_b))

    @property
    def size(self) -> float:
        return self.s_prime if self.x_c else self.s

    def close_segment(self, now: float, category: str):
        """Charge [mark, now) to one delay category."""
        dt = now - self.mark
        self.log.append((self.mark, now, category))
        if category == PROPAGATION:
            self.T_p += dt
        elif category == TRANSMISSION:
            self.T_t += dt
        elif category == QUEUEING:
            self.T_q += dt
        else:
            self.T_c += dt
        self.mark = now


@dataclass(frozen=True)
class DelayRecord:
    T_p: float
    T_t: float
    T_q: float
    T_c: float

    @property
    def total(self) -> float:
        return self.T_p + self.T_t + self.T_q + self.T_c


def account_delay(task: Task, event_log=None) -> DelayRecord:
    """Rebuild the four delay components from a task's segment log.

    The log must tile [t_b, t_end] without gaps or overlaps.
    """
    log = task.log if event_log is None else event_log
    if task.t_end is None or task.outcome != "delivered":
        raise AccountingError(f"task {task.id} has not been delivered")
    if not log:
        if task.t_end != task.t_b:
            raise AccountingError(f"task {task.id} has an empty log")
        return DelayRecord(0.0, 0.0, 0.0, 0.0)
    sums = dict.fromkeys(CATEGORIES, 0.0)
    cursor = task.t_b
    for start, end, cat in log:
        if start != cursor or end < start:
            raise AccountingError(f"task {task.id}: log gap at {cursor}")
        sums[cat] += end - start
        cursor = end
    if cursor != task.t_end:
        raise AccountingError(f"task {task.id}: log ends at {cursor}, task ended at {task.t_end}")
    return DelayRecord(sums[PROPAGATION], sums[TRANSMISSION], sums[QUEUEING], sums[COMPUTING])
