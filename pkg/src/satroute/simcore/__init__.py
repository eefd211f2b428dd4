from .engine import COMPUTE, DROP, WAIT, Policy, Simulation, spawn_streams
from .params import SimParams
from .tasks import DelayRecord, Task, TaskType, account_delay

__all__ = ["COMPUTE", "DROP", "WAIT", "Policy", "Simulation", "spawn_streams", "SimParams",
           "DelayRecord", "Task", "TaskType", "account_delay"]
