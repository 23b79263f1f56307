"""Virtual queues that enforce the time-averaged age-cost constraint and
the two tail-moment constraints, plus the per-transmission weights used by
the update-interval subproblem.

Three regimes exist depending on the sign of the target tail shape. The
NEGATIVE regime (short-tailed target) uses clamped queues that push the
mean excess up and the second moment down; the POSITIVE regime reverses
both pushes; the ZERO regime enforces equalities with unclamped,
real-valued queues.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence


class TailMode(Enum):
    NEGATIVE = "negative"
    ZERO = "zero"
    POSITIVE = "positive"


def update_cost_queue(qf: float, age_at_tn: float, f_th: float) -> float:
    """Cost queue recursion: max{Qf + e^age - f_th, 0}.

    Applied to every sensor at every transmission, with the
    post-transmission age (a sensor that just delivered contributes e^0).
    """
    if qf < 0.0:
        raise ValueError("cost queue must be non-negative")
    return max(qf + math.exp(age_at_tn) - f_th, 0.0)


def update_tail_queues(
    mode: TailMode,
    qm: float,
    qv: float,
    peak: float,
    q: float,
    eta: float,
    delta: float,
) -> tuple[float, float]:
    """Tail-moment queue recursions, fired once per successful delivery.

    The excess terms are gated by the indicator {peak > q}; a peak at or
    below the threshold leaves both queues unchanged.
    """
    if peak <= 0.0:
        raise ValueError("peak must be positive")
    if peak <= q:
        return qm, qv
    y = peak - q
    if mode is TailMode.NEGATIVE:
        qm_next = max(qm - (y - eta - delta), 0.0)
        qv_next = max(qv + (y * y - 2.0 * eta * eta + delta), 0.0)
    elif mode is TailMode.ZERO:
        qm_next = qm + (y - eta)
        qv_next = qv + (y * y - 2.0 * eta * eta)
    else:
        qm_next = max(qm + (y - eta + delta), 0.0)
        qv_next = max(qv - (y * y - 2.0 * eta * eta - delta), 0.0)
    return qm_next, qv_next


def phi_weight(mode: TailMode, qm: float, qv: float, age_prev: float) -> float:
    """Linear-in-interval weight of the scheduled sensor.

    Uses the scheduled sensor's tail queues and its age at the previous
    transmission instant. May take either sign.
    """
    tau = age_prev
    tau3 = 2.0 * tau * tau * tau
    if mode is TailMode.NEGATIVE:
        return 2.0 * qv * tau + tau3 - qm * tau - qm
    if mode is TailMode.ZERO:
        return 2.0 * qv * tau + tau3 + 2.0 * tau + qm * tau + qm
    return -2.0 * qv * tau + tau3 + 2.0 * tau + qm * tau + qm


def psi_weight(
    qf: Sequence[float], ages_prev: Sequence[float], scheduled: int
) -> float:
    """Exponential-in-interval weight: sum of Qf * e^age over the sensors
    that are not scheduled this transmission. Always non-negative."""
    total = 0.0
    for k, (q, tau) in enumerate(zip(qf, ages_prev)):
        if k != scheduled:
            total += q * math.exp(tau)
    return total


@dataclass
class VirtualQueueSet:
    """All virtual queues of one simulation run, one slot per sensor.

    q_cost advances every transmission; q_mean and q_var advance only at
    successful deliveries of their sensor. ``pot_threshold`` is the frozen
    peak-age threshold per sensor (inf until the warm-up estimate exists,
    which keeps the excess indicator closed).
    """

    mode: TailMode
    sensors: int
    eta: float
    delta: float
    f_threshold: float
    q_cost: list[float] = field(default_factory=list)
    q_mean: list[float] = field(default_factory=list)
    q_var: list[float] = field(default_factory=list)
    pot_threshold: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.sensors < 1:
            raise ValueError("need at least one sensor")
        if not self.q_cost:
            self.q_cost = [0.0] * self.sensors
            self.q_mean = [0.0] * self.sensors
            self.q_var = [0.0] * self.sensors
            self.pot_threshold = [math.inf] * self.sensors

    def on_success(self, sensor: int, peak: float) -> None:
        """Advance the tail queues of ``sensor`` for a delivered peak."""
        self.q_mean[sensor], self.q_var[sensor] = update_tail_queues(
            self.mode,
            self.q_mean[sensor],
            self.q_var[sensor],
            peak,
            self.pot_threshold[sensor],
            self.eta,
            self.delta,
        )

    def on_transmission(self, ages_at_tn: Sequence[float]) -> None:
        """Advance every sensor's cost queue with post-transmission ages."""
        for k, age in enumerate(ages_at_tn):
            self.q_cost[k] = update_cost_queue(self.q_cost[k], age, self.f_threshold)

    def phi(self, sensor: int, age_prev: float) -> float:
        return phi_weight(self.mode, self.q_mean[sensor], self.q_var[sensor], age_prev)

    def psi(self, ages_prev: Sequence[float], scheduled: int) -> float:
        return psi_weight(self.q_cost, ages_prev, scheduled)


def write_queues_csv(path, trajectory) -> None:
    """Export queue trajectories as CSV (n, sensor, Qf, Qm, Qv).

    ``trajectory`` is an array of shape (steps, sensors, 3) ordered as
    (Qf, Qm, Qv), with rows logged after each transmission.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "sensor", "Qf", "Qm", "Qv"])
        for n in range(trajectory.shape[0]):
            for k in range(trajectory.shape[1]):
                qf, qm, qv = trajectory[n, k]
                writer.writerow([n + 1, k, repr(float(qf)), repr(float(qm)), repr(float(qv))])
