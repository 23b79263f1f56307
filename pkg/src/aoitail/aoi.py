"""Per-sensor age-of-information tracking and peak-age extraction.

Ages are tracked in seconds. The age of a sensor grows by the update
interval at every transmission instant and is reset to zero exactly when
that sensor was scheduled, transmitted with positive power, and the decode
succeeded. The value immediately before a reset is the peak age.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence


@dataclass(frozen=True)
class PeakRecord:
    """Peak age emitted at the m-th successful delivery of one sensor."""

    value: float      # seconds; pre-reset age
    index: int        # m, 1-based success counter
    wall_time: float  # t_n of the delivering transmission, seconds

    def __post_init__(self):
        if self.value <= 0.0:
            raise ValueError("peak value must be positive")


def advance_age(
    age: float,
    interval: float,
    scheduled: bool,
    decode: int,
    power_positive: bool,
) -> tuple[float, Optional[float]]:
    """One step of the age recursion for a single sensor.

    Returns the new age and, when this step resets the sensor, the peak
    value (old age + interval). Non-scheduled sensors always age by the
    interval. Shared by the simulation engine and the replay checker so
    both produce bit-identical trajectories.
    """
    if interval < 0.0:
        raise ValueError("interval must be non-negative")
    grown = age + interval
    if scheduled and decode == 1 and power_positive:
        return 0.0, grown
    return grown, None


@dataclass
class AoiState:
    """Mutable AoI bookkeeping for one sensor."""

    age: float = 0.0
    success_count: int = 0
    peaks: list[PeakRecord] = field(default_factory=list)

    def advance(
        self,
        interval: float,
        scheduled: bool,
        decode: int = 0,
        power_positive: bool = True,
        wall_time: float = 0.0,
    ) -> Optional[PeakRecord]:
        """Apply one transmission step; returns the PeakRecord on a reset."""
        new_age, peak_value = advance_age(
            self.age, interval, scheduled, decode, power_positive
        )
        self.age = new_age
        if peak_value is None:
            return None
        self.success_count += 1
        record = PeakRecord(value=peak_value, index=self.success_count, wall_time=wall_time)
        self.peaks.append(record)
        return record


def instantaneous_age(state: AoiState, last_update_time: float, now: float) -> float:
    """Age at an arbitrary instant: linear growth since the last transmission."""
    if now < last_update_time:
        raise ValueError("query time precedes the last update instant")
    return state.age + (now - last_update_time)


def block_maxima(peaks: Sequence, block_size: int) -> list[float]:
    """Maxima of consecutive disjoint blocks of ``block_size`` peaks.

    Accepts PeakRecords or bare floats; a trailing partial block is
    discarded, matching standard block-maxima practice.
    """
    if block_size < 1:
        raise ValueError("block size must be >= 1")
    values = [p.value if isinstance(p, PeakRecord) else float(p) for p in peaks]
    n_blocks = len(values) // block_size
    return [
        max(values[i * block_size : (i + 1) * block_size]) for i in range(n_blocks)
    ]


def write_peaks_csv(path, peaks_by_sensor: Iterable[Sequence[PeakRecord]]) -> None:
    """Export peak series as CSV with columns (sensor, m, t_n, b_m)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sensor", "m", "t_n", "b_m"])
        for sensor, peaks in enumerate(peaks_by_sensor):
            for rec in peaks:
                writer.writerow([sensor, rec.index, repr(rec.wall_time), repr(rec.value)])
