from __future__ import annotations

from dataclasses import dataclass, field

MB = 1e6
KB = 1e3

# Coarse continental boxes (lat_min, lat_max, lon_min, lon_max).
DEFAULT_LAND_BOXES = (
    (15.0, 72.0, -168.0, -52.0),   # North America
    (7.0, 33.0, -118.0, -77.0),    # Central America
    (-56.0, 13.0, -82.0, -34.0),   # South America
    (36.0, 71.0, -10.0, 40.0),     # Europe
    (-35.0, 37.0, -18.0, 52.0),    # Africa
    (12.0, 42.0, 34.0, 60.0),      # Arabia / Middle East
    (5.0, 77.0, 40.0, 180.0),      # Asia
    (-11.0, 6.0, 95.0, 141.0),     # Maritime south-east Asia
    (-44.0, -10.0, 113.0, 154.0),  # Australia
    (60.0, 84.0, -73.0, -12.0),    # Greenland
    (-90.0, -63.0, -180.0, 180.0), # Antarctica
)


@dataclass
class SimParams:
    # links and nodes
    isl_rate: float = 1.2e9
    downlink_rate: float = 3e9
    compute_capacity: float = 50e9
    storage: float = 1e9

    # task population
    task_size: tuple[float, float] = (25 * MB, 75 * MB)
    compression_ratio: tuple[float, float] = (9.0, 11.0)
    compression_demand: tuple[float, float] = (1200.0, 2000.0)
    inference_demand: tuple[float, float] = (2400.0, 4000.0)
    inference_output: float = 5 * KB
    compression_fraction: float = 0.5

    # traffic
    aggregate_rate: float = 70.0
    land_weight: float = 2.0
    land_boxes: tuple = DEFAULT_LAND_BOXES
    per_sat_rate: float = 1.0
    observation_on_mean: float = 40.0

    # timing
    rep_period: float | None = 0.1
    detection_period: float = 0.25

    # link failures
    failure_rate: float = 0.03
    mean_repair: float = 8.0
    drop_on_link_failure: bool = False

    # state scaling / reward
    q_c_cap: float = 10.0
    storage_reserve: float = 0.8  # fraction of M above which the storage penalty applies

    def __post_init__(self):
        for name in ("isl_rate", "downlink_rate", "compute_capacity", "storage", "aggregate_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 <= self.failure_rate < 1.0:
            raise ValueError("failure_rate must be in [0, 1)")
        if not 0.0 <= self.compression_fraction <= 1.0:
            raise ValueError("compression_fraction must be in [0, 1]")

    @property
    def demand_norm(self) -> float:
        return self.task_size[1] * self.inference_demand[1]
