"""Simulation of the full reliability- and age-aware update mechanism.

One run executes N transmissions for K sensors: round-robin scheduling,
a block-fading channel draw, the per-transmission allocation (power,
blocklength, update interval), the Bernoulli decode outcome, age and
virtual-queue updates, and per-step logging. A warm-up phase estimates
each sensor's peak-age threshold, which is then frozen for the rest of
the run; statistics exclude the warm-up.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .aoi import PeakRecord, advance_age
from .optimizer import (
    DEFAULT_CCP_MAX_ITERS,
    CachedSp1Solver,
    solve_sp2,
)
from .phy import LinkParams, path_loss_db
from .queues import TailMode, phi_weight, psi_weight, update_cost_queue, update_tail_queues


def schedule(n: int, sensors: int) -> int:
    """Round-robin schedule: transmission n (1-based) goes to sensor
    ((n-1) mod K) + 1, also 1-based."""
    if n < 1:
        raise ValueError("transmission index starts at 1")
    if sensors < 1:
        raise ValueError("need at least one sensor")
    return (n - 1) % sensors + 1


def schedule_max_weight(q_cost: Sequence[float], ages: Sequence[float]) -> int:
    """Age-cost-pressure scheduler (1-based): picks the sensor with the
    largest Qf * e^age. Experimental alternative, off by default."""
    best, best_w = 0, -1.0
    for k, (q, tau) in enumerate(zip(q_cost, ages)):
        w = q * math.exp(tau)
        if w > best_w:
            best, best_w = k, w
    return best + 1


@dataclass(frozen=True)
class SimConfig:
    """Full experiment configuration (linear SI units)."""

    sensors: int = 2
    lifetime: int = 100_000          # total transmissions, warm-up included
    payloads: tuple[float, ...] = (160.0, 160.0)  # bits per sensor
    link: LinkParams = None
    tail_mode: TailMode = TailMode.NEGATIVE
    eta: float = 0.02                # target mean excess, seconds
    delta: float = 1e-9
    f_threshold: float = 1.03
    pot_quantile: float = 0.99
    lyapunov_v: float = 1.0
    s_min: float = 0.0
    s_max: float = 0.5
    warmup: int = 10_000             # transmissions used to estimate the thresholds
    seed: int = 0
    scheduler: str = "round_robin"   # or "max_weight"
    l_max: int = 4096
    sp1_method: str = "ccp"          # "ccp", "ccp-exact", or "oracle"
    cap_quant: float = 0.05
    ccp_max_iters: int = DEFAULT_CCP_MAX_ITERS

    def __post_init__(self):
        if self.link is None:
            object.__setattr__(self, "link", default_link())
        if self.sensors < 1:
            raise ValueError("sensors must be >= 1")
        if not 0 <= self.warmup < self.lifetime:
            raise ValueError("need 0 <= warmup < lifetime")
        payloads = self.payloads
        if isinstance(payloads, (int, float)):
            payloads = (float(payloads),) * self.sensors
        else:
            payloads = tuple(float(p) for p in payloads)
            if len(payloads) == 1:
                payloads = payloads * self.sensors
        if len(payloads) != self.sensors:
            raise ValueError("payloads must match the sensor count")
        if any(p <= 0 for p in payloads):
            raise ValueError("payloads must be positive")
        object.__setattr__(self, "payloads", payloads)
        if self.eta <= 0 or self.delta <= 0 or self.f_threshold <= 0:
            raise ValueError("eta, delta and f_threshold must be positive")
        if not 0.0 < self.pot_quantile < 1.0:
            raise ValueError("pot_quantile must lie in (0, 1)")
        if self.lyapunov_v <= 0:
            raise ValueError("lyapunov_v must be positive")
        if not 0.0 <= self.s_min < self.s_max:
            raise ValueError("need 0 <= s_min < s_max")
        if self.scheduler not in ("round_robin", "max_weight"):
            raise ValueError(f"unknown scheduler: {self.scheduler}")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")


def default_link(epsilon: float = 1e-9) -> LinkParams:
    """Baseline factory link: -174 dBm/Hz noise, 1 MHz, 15 m, 0 dBm cap."""
    return LinkParams(
        noise_psd=10.0 ** (-174.0 / 10.0) * 1e-3,
        bandwidth=1e6,
        distance=15.0,
        p_max=1e-3,
        epsilon=epsilon,
    )


class RunLog:
    """Columnar per-transmission log (preallocated numpy arrays)."""

    def __init__(self, steps: int, sensors: int):
        self.steps = steps
        self.sensors = sensors
        self.t = np.empty(steps)
        self.scheduled = np.empty(steps, dtype=np.int32)   # 0-based sensor
        self.gain = np.empty(steps)
        self.power = np.empty(steps)
        self.blocklength = np.empty(steps, dtype=np.int32)
        self.interval = np.empty(steps)
        self.decode = np.empty(steps, dtype=np.int8)
        self.feasible = np.empty(steps, dtype=bool)
        self.phi = np.empty(steps)
        self.psi = np.empty(steps)
        self.ages = np.empty((steps, sensors))             # post-transmission
        self.queues = np.empty((steps, sensors, 3))        # Qf, Qm, Qv

    def objective_increment(self, bandwidth: float) -> np.ndarray:
        """Per-step normalized power P*L/(S*W)."""
        return self.power * self.blocklength / (self.interval * bandwidth)


@dataclass(frozen=True)
class TransmissionRecord:
    """Row view over the log, mostly for tests and debugging."""

    n: int
    t: float
    scheduled: int
    gain: float
    power: float
    blocklength: int
    interval: float
    decode: int
    feasible: bool
    ages: np.ndarray
    queues: np.ndarray


def log_record(log: RunLog, i: int) -> TransmissionRecord:
    return TransmissionRecord(
        n=i + 1,
        t=float(log.t[i]),
        scheduled=int(log.scheduled[i]),
        gain=float(log.gain[i]),
        power=float(log.power[i]),
        blocklength=int(log.blocklength[i]),
        interval=float(log.interval[i]),
        decode=int(log.decode[i]),
        feasible=bool(log.feasible[i]),
        ages=log.ages[i].copy(),
        queues=log.queues[i].copy(),
    )


@dataclass
class RunMetrics:
    """Post-warm-up aggregates of one run."""

    sensors: int
    steps: int
    warmup: int
    avg_normalized_power: float
    avg_cost: list[float]            # per sensor, time-average of e^age
    avg_peak_aoi: float
    avg_peak_aoi_per_sensor: list[float]
    avg_interval: float
    p99_transmission_time: float
    mean_blocklength: float
    p99_blocklength: float
    avg_power: float
    avg_energy: float                # per-transmission P*L/W in J
    wall_time: float
    successes: list[int]
    infeasible_steps: int
    pot_threshold: list[float]
    final_queues: list[list[float]]  # per sensor [Qf, Qm, Qv]
    max_queues: list[list[float]]
    peak_series: list[list[PeakRecord]] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "peak_series"}
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class RunResult:
    config: SimConfig
    metrics: RunMetrics
    log: RunLog
    peaks: list[list[PeakRecord]]    # full series per sensor, warm-up included


def run(config: SimConfig, solvers: Optional[list[CachedSp1Solver]] = None) -> RunResult:
    """Execute one full simulation run; deterministic given (seed, config).

    ``solvers`` may inject prebuilt per-sensor SP1 solvers so sweeps can
    share solution caches; entries are pure functions of the
    configuration, so sharing never changes results.
    """
    k_count = config.sensors
    n_steps = config.lifetime
    link = config.link
    if solvers is None:
        solvers = build_solvers(config)
    if len(solvers) != k_count:
        raise ValueError("one SP1 solver per sensor required")

    rng = np.random.default_rng(config.seed)
    pl_db = path_loss_db(link.distance)
    path_gain = 10.0 ** (-pl_db / 10.0)
    eps = link.epsilon
    w_hz = link.bandwidth
    f_th = config.f_threshold
    mode = config.tail_mode
    eta, delta = config.eta, config.delta
    v = config.lyapunov_v
    s_min, s_max = config.s_min, config.s_max
    use_max_weight = config.scheduler == "max_weight"

    log = RunLog(n_steps, k_count)
    ages = [0.0] * k_count
    qf = [0.0] * k_count
    qm = [0.0] * k_count
    qv = [0.0] * k_count
    pot_q = [math.inf] * k_count
    peaks: list[list[PeakRecord]] = [[] for _ in range(k_count)]
    m_counts = [0] * k_count
    infeasible_steps = 0
    t_now = 0.0
    q_frozen = config.warmup == 0

    for i in range(n_steps):
        if use_max_weight and i >= k_count:  # one full round-robin pass first
            k = schedule_max_weight(qf, ages) - 1
        else:
            k = schedule(i + 1, k_count) - 1
        gain = path_gain * rng.exponential(1.0)

        phi = phi_weight(mode, qm[k], qv[k], ages[k])
        psi = psi_weight(qf, ages, k)

        power, blocklength, feasible = solvers[k].solve_tuple(gain)
        if not feasible:
            infeasible_steps += 1
        energy = power * blocklength / w_hz

        interval = solve_sp2(phi, psi, v, energy, s_min, s_max)
        t_now += interval
        decode = (1 if rng.random() >= eps else 0) if feasible else 0

        peak_value = None
        for j in range(k_count):
            new_age, pv = advance_age(ages[j], interval, j == k, decode, power > 0.0)
            ages[j] = new_age
            if pv is not None:
                peak_value = pv
        if peak_value is not None:
            m_counts[k] += 1
            peaks[k].append(PeakRecord(value=peak_value, index=m_counts[k], wall_time=t_now))
            qm[k], qv[k] = update_tail_queues(mode, qm[k], qv[k], peak_value,
                                              pot_q[k], eta, delta)
        for j in range(k_count):
            qf[j] = update_cost_queue(qf[j], ages[j], f_th)

        log.t[i] = t_now
        log.scheduled[i] = k
        log.gain[i] = gain
        log.power[i] = power
        log.blocklength[i] = blocklength
        log.interval[i] = interval
        log.decode[i] = decode
        log.feasible[i] = feasible
        log.phi[i] = phi
        log.psi[i] = psi
        for j in range(k_count):
            log.ages[i, j] = ages[j]
            log.queues[i, j, 0] = qf[j]
            log.queues[i, j, 1] = qm[j]
            log.queues[i, j, 2] = qv[j]

        if not q_frozen and i + 1 == config.warmup:
            pot_q = _freeze_thresholds(peaks, config.pot_quantile, k_count)
            q_frozen = True

    metrics = _compute_metrics(config, log, peaks, pot_q, infeasible_steps, m_counts)
    return RunResult(config=config, metrics=metrics, log=log, peaks=peaks)


def build_solvers(config: SimConfig) -> list[CachedSp1Solver]:
    """Per-sensor SP1 solvers; sensors with equal payload share one."""
    by_payload: dict[float, CachedSp1Solver] = {}
    out = []
    for p in config.payloads:
        solver = by_payload.get(p)
        if solver is None:
            solver = CachedSp1Solver(
                p, config.link, l_max=config.l_max, method=config.sp1_method,
                cap_quant=config.cap_quant, ccp_max_iters=config.ccp_max_iters,
            )
            by_payload[p] = solver
        out.append(solver)
    return out


def _freeze_thresholds(peaks, quantile: float, k_count: int) -> list[float]:
    out = []
    for k in range(k_count):
        values = [p.value for p in peaks[k]]
        if len(values) < 10:
            out.append(math.inf)
        else:
            out.append(float(np.quantile(np.asarray(values), quantile)))
    return out


def _compute_metrics(config: SimConfig, log: RunLog, peaks, pot_q,
                     infeasible_steps: int, m_counts) -> RunMetrics:
    w0 = config.warmup
    w_hz = config.link.bandwidth
    sl = slice(w0, None)
    intervals = log.interval[sl]
    powers = log.power[sl]
    lengths = log.blocklength[sl].astype(float)
    norm_power = powers * lengths / (intervals * w_hz)
    cost = np.exp(log.ages[sl])    # e^age at transmission instants

    warm_t = float(log.t[w0 - 1]) if w0 > 0 else 0.0
    post_peaks = [[p for p in peaks[k] if p.wall_time > warm_t] for k in range(config.sensors)]
    per_sensor_avg_peak = [
        float(np.mean([p.value for p in ps])) if ps else math.nan for ps in post_peaks
    ]
    all_peaks = [p.value for ps in post_peaks for p in ps]

    queue_max = np.max(log.queues, axis=0)
    return RunMetrics(
        sensors=config.sensors,
        steps=config.lifetime,
        warmup=w0,
        avg_normalized_power=float(np.mean(norm_power)),
        avg_cost=[float(c) for c in cost.mean(axis=0)],
        avg_peak_aoi=float(np.mean(all_peaks)) if all_peaks else math.nan,
        avg_peak_aoi_per_sensor=per_sensor_avg_peak,
        avg_interval=float(np.mean(intervals)),
        p99_transmission_time=float(np.percentile(lengths, 99)) / w_hz,
        mean_blocklength=float(np.mean(lengths)),
        p99_blocklength=float(np.percentile(lengths, 99)),
        avg_power=float(np.mean(powers)),
        avg_energy=float(np.mean(powers * lengths / w_hz)),
        wall_time=float(log.t[-1]),
        successes=list(m_counts),
        infeasible_steps=infeasible_steps,
        pot_threshold=[float(q) for q in pot_q],
        final_queues=[[float(log.queues[-1, k, j]) for j in range(3)]
                      for k in range(config.sensors)],
        max_queues=[[float(queue_max[k, j]) for j in range(3)]
                    for k in range(config.sensors)],
        peak_series=post_peaks,
    )


# ---------------------------------------------------------------------------
# offline replay: recompute the dynamics from the logged controls
# ---------------------------------------------------------------------------

@dataclass
class ReplayResult:
    ok: bool
    max_age_error: float
    max_queue_error: float
    peaks_match: bool
    wall_clock_match: bool


def replay(result: RunResult) -> ReplayResult:
    """Recompute ages, peaks and queues from the logged (S, B, k) series
    with the same recursions and compare exactly against the log."""
    config = result.config
    log = result.log
    k_count = config.sensors
    ages = [0.0] * k_count
    qf = [0.0] * k_count
    qm = [0.0] * k_count
    qv = [0.0] * k_count
    pot_q = [math.inf] * k_count
    peaks: list[list[PeakRecord]] = [[] for _ in range(k_count)]
    m_counts = [0] * k_count
    t_now = 0.0
    q_frozen = config.warmup == 0

    max_age_err = 0.0
    max_queue_err = 0.0
    wall_ok = True
    for i in range(log.steps):
        k = int(log.scheduled[i])
        interval = float(log.interval[i])
        decode = int(log.decode[i])
        power = float(log.power[i])
        t_now += interval
        if t_now != log.t[i]:
            wall_ok = False
        peak_value = None
        for j in range(k_count):
            new_age, pv = advance_age(ages[j], interval, j == k, decode, power > 0.0)
            ages[j] = new_age
            if pv is not None:
                peak_value = pv
        if peak_value is not None:
            m_counts[k] += 1
            peaks[k].append(PeakRecord(value=peak_value, index=m_counts[k], wall_time=t_now))
            qm[k], qv[k] = update_tail_queues(config.tail_mode, qm[k], qv[k],
                                              peak_value, pot_q[k],
                                              config.eta, config.delta)
        for j in range(k_count):
            qf[j] = update_cost_queue(qf[j], ages[j], config.f_threshold)
            max_age_err = max(max_age_err, abs(ages[j] - float(log.ages[i, j])))
            max_queue_err = max(
                max_queue_err,
                abs(qf[j] - float(log.queues[i, j, 0])),
                abs(qm[j] - float(log.queues[i, j, 1])),
                abs(qv[j] - float(log.queues[i, j, 2])),
            )
        if not q_frozen and i + 1 == config.warmup:
            pot_q = _freeze_thresholds(peaks, config.pot_quantile, k_count)
            q_frozen = True

    peaks_ok = all(
        len(peaks[k]) == len(result.peaks[k])
        and all(a.value == b.value and a.index == b.index and a.wall_time == b.wall_time
                for a, b in zip(peaks[k], result.peaks[k]))
        for k in range(k_count)
    )
    ok = peaks_ok and wall_ok and max_age_err == 0.0 and max_queue_err == 0.0
    return ReplayResult(ok=ok, max_age_error=max_age_err, max_queue_error=max_queue_err,
                        peaks_match=peaks_ok, wall_clock_match=wall_ok)


def write_log_csv(path, result: RunResult) -> None:
    """Full transmission log as CSV (large; one row per transmission)."""
    log = result.log
    k_count = log.sensors
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["n", "t", "sensor", "gain", "P", "L", "S", "B", "feasible", "phi", "psi"]
        header += [f"age_{k}" for k in range(k_count)]
        for k in range(k_count):
            header += [f"Qf_{k}", f"Qm_{k}", f"Qv_{k}"]
        writer.writerow(header)
        for i in range(log.steps):
            row = [i + 1, repr(float(log.t[i])), int(log.scheduled[i]),
                   repr(float(log.gain[i])), repr(float(log.power[i])),
                   int(log.blocklength[i]), repr(float(log.interval[i])),
                   int(log.decode[i]), int(log.feasible[i]),
                   repr(float(log.phi[i])), repr(float(log.psi[i]))]
            row += [repr(float(a)) for a in log.ages[i]]
            for k in range(k_count):
                row += [repr(float(q)) for q in log.queues[i, k]]
            writer.writerow(row)
