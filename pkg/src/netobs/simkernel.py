"""Deterministic packet-level simulation of CBR flows plus measurement overhead.

Flows emit fixed-size packets on a strict schedule (packet ``k`` of a flow
departs at ``k * packet_size / user_rate``). Periodic methods emit
standalone probe/export packets at ``k * period``; in-band methods enlarge
every ``s``-th data packet by their message size. The link is a token
bucket with rate equal to capacity and a burst of one maximum packet;
packets that do not fit are tail-dropped whole. Overprovisioned links
admit everything.

Runs are reproducible: the packet schedule is a deterministic function of
the scenario, and the seed parameter is reserved for callers that
randomize failure times. No queueing delay is modeled; the impact metrics
of interest are rate metrics only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import IntEnum

from .core import BitRate, Duration, FlowSpec, NoFlowsError, Scenario
from .methods import MeasurementMethod, MethodClass, effective_period

# Absorbs float rounding in token replenishment; orders of magnitude below
# any real packet size, so it can never flip a genuine drop decision.
_TOKEN_EPSILON_BITS = 1e-6


class PeriodExceedsHorizonError(ValueError):
    """A method's period does not fit in the simulation horizon."""


class NoCarrierPacketsError(ValueError):
    """An in-band method has no data traffic to ride on."""


class HorizonWarning(UserWarning):
    """The horizon covers fewer than ten effective periods of some method."""


class EventKind(IntEnum):
    # Numeric value doubles as the same-timestamp processing priority:
    # data before probe before export, markers last.
    DATA_PACKET = 0
    PROBE_PACKET = 1
    EXPORT_PACKET = 2
    FAILURE_START = 3
    SIM_END = 4


@dataclass(frozen=True, slots=True)
class Event:
    """One scheduled departure (or marker) on the link.

    Events are totally ordered by (time, kind, seq); ``seq`` increases in
    generation order, which makes replay deterministic. ``wire_bits`` is
    the full on-the-wire size; ``user_bits`` is the portion attributed to
    the flow (nonzero for data packets only), the remainder is overhead.
    """

    time: float
    kind: EventKind
    ref: str
    wire_bits: int
    user_bits: int
    seq: int

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError(f"event time must be non-negative, got {self.time}")

    @property
    def sort_key(self) -> tuple[float, int, int]:
        return (self.time, int(self.kind), self.seq)


@dataclass(frozen=True)
class TrafficCounts:
    """Bit accounting for one category; conservation holds by construction."""

    offered_bits: int
    delivered_bits: int
    dropped_bits: int

    def __post_init__(self) -> None:
        if min(self.offered_bits, self.delivered_bits, self.dropped_bits) < 0:
            raise ValueError("traffic counters must be non-negative")
        if self.offered_bits != self.delivered_bits + self.dropped_bits:
            raise ValueError(
                f"conservation violated: offered {self.offered_bits} != "
                f"delivered {self.delivered_bits} + dropped {self.dropped_bits}"
            )


@dataclass(frozen=True)
class SimReport:
    """Conservation-checked accounting of one run.

    ``per_flow`` holds user bits per flow; ``overhead`` holds all
    measurement bits (standalone probe/export packets plus in-band
    enlargements). Derived rates include overhead in the delivered and
    loss totals, matching the convention that the data rate counts every
    bit successfully carried for the flow, telemetry included.
    """

    per_flow: dict[str, TrafficCounts]
    overhead: TrafficCounts
    duration: Duration

    @property
    def offered_bits(self) -> int:
        return sum(c.offered_bits for c in self.per_flow.values()) + self.overhead.offered_bits

    @property
    def delivered_bits(self) -> int:
        return sum(c.delivered_bits for c in self.per_flow.values()) + self.overhead.delivered_bits

    @property
    def dropped_bits(self) -> int:
        return sum(c.dropped_bits for c in self.per_flow.values()) + self.overhead.dropped_bits

    @property
    def delivered_rate(self) -> BitRate:
        return BitRate(self.delivered_bits / self.duration.seconds)

    @property
    def loss_rate(self) -> BitRate:
        return BitRate(self.dropped_bits / self.duration.seconds)

    @property
    def overhead_rate(self) -> BitRate:
        return BitRate(self.overhead.offered_bits / self.duration.seconds)


@dataclass(frozen=True)
class DetectionReport:
    """Outcome of one failure-detection experiment."""

    failure_time: float
    detection_time: float

    def __post_init__(self) -> None:
        if self.detection_time < self.failure_time:
            raise ValueError("detection cannot precede the failure")

    @property
    def latency(self) -> float:
        return self.detection_time - self.failure_time


@dataclass(frozen=True)
class FluidRates:
    """Closed-form rate predictions; the analytic twin of run_sim."""

    user_rate: BitRate
    overhead_rate: BitRate
    delivered_rate: BitRate
    loss_rate: BitRate


def _emission_count(interval: float, horizon: float) -> int:
    """Number of k >= 0 with k * interval < horizon, robust to float rounding."""
    n = int(horizon / interval)
    while n * interval < horizon:
        n += 1
    while n > 0 and (n - 1) * interval >= horizon:
        n -= 1
    return n


def _in_band_extra_bits(flow_packet_index: int, in_band: list[MeasurementMethod]) -> int:
    extra = 0
    for m in in_band:
        assert m.sampling_ratio is not None
        if flow_packet_index % m.sampling_ratio == 0:
            extra += m.message_bits.bits
    return extra


def generate_events(scenario: Scenario, duration: Duration) -> list[Event]:
    """All packet departures within [0, duration), sorted for replay.

    Generation order (flows in scenario order, then methods) assigns the
    sequence numbers that break timestamp ties.
    """
    horizon = duration.seconds
    in_band = [m for m in scenario.methods if m.method_class is MethodClass.IN_BAND]
    events: list[Event] = []
    seq = 0
    for flow in scenario.flows:
        interval = flow.packet_size_bits / flow.user_rate.bps
        for k in range(_emission_count(interval, horizon)):
            extra = _in_band_extra_bits(k, in_band) if in_band else 0
            events.append(
                Event(k * interval, EventKind.DATA_PACKET, flow.id,
                      flow.packet_size_bits + extra, flow.packet_size_bits, seq)
            )
            seq += 1
    for m in scenario.methods:
        if not m.is_periodic:
            continue
        kind = (EventKind.PROBE_PACKET if m.method_class is MethodClass.ACTIVE_PROBE
                else EventKind.EXPORT_PACKET)
        assert m.period is not None
        interval = m.period.seconds
        for k in range(_emission_count(interval, horizon)):
            events.append(Event(k * interval, kind, m.method_id, m.message_bits.bits, 0, seq))
            seq += 1
    events.append(Event(horizon, EventKind.SIM_END, "", 0, 0, seq))
    events.sort(key=lambda e: e.sort_key)
    return events


def max_wire_packet_bits(scenario: Scenario) -> int:
    """Largest single packet the scenario can put on the wire.

    Packet index 0 of a flow is sampled by every in-band method, so the
    worst data packet carries all in-band enlargements at once.
    """
    in_band_total = sum(
        m.message_bits.bits for m in scenario.methods
        if m.method_class is MethodClass.IN_BAND
    )
    sizes = [f.packet_size_bits + in_band_total for f in scenario.flows]
    sizes += [m.message_bits.bits for m in scenario.methods if m.is_periodic]
    return max(sizes)


def packet_quantum(scenario: Scenario, duration: Duration) -> BitRate:
    """One packet worth of bits over the horizon: the rate-resolution limit."""
    return BitRate(max_wire_packet_bits(scenario) / duration.seconds)


def estimated_event_count(scenario: Scenario, duration: Duration) -> int:
    """Upper estimate of packet events in a run, for scale guards."""
    horizon = duration.seconds
    n = 0
    for f in scenario.flows:
        n += math.ceil(horizon * f.user_rate.bps / f.packet_size_bits) + 1
    for m in scenario.methods:
        if m.is_periodic:
            assert m.period is not None
            n += math.ceil(horizon / m.period.seconds) + 1
    return n


def _check_horizon(scenario: Scenario, duration: Duration) -> None:
    for m in scenario.methods:
        flows = scenario.flows if m.method_class is MethodClass.IN_BAND else (None,)
        for flow in flows:
            tau = effective_period(m, flow).seconds
            if duration.seconds < tau:
                raise PeriodExceedsHorizonError(
                    f"period exceeds horizon: method {m.method_id!r} has effective "
                    f"period {tau} s but the horizon is {duration.seconds} s"
                )
            if duration.seconds < 10 * tau:
                warnings.warn(
                    f"horizon {duration.seconds} s covers fewer than 10 effective "
                    f"periods of method {m.method_id!r} ({tau} s)",
                    HorizonWarning,
                    stacklevel=3,
                )


def run_sim(
    scenario: Scenario,
    duration: Duration,
    seed: int = 0,
    *,
    burst_bits: int | None = None,
) -> SimReport:
    """Simulate the scenario over [0, duration) and account every bit.

    Deterministic for a given (scenario, duration, seed): the CBR schedule
    does not consume randomness, so the same inputs give a bit-identical
    report. ``burst_bits`` overrides the token-bucket accounting window
    (default: one maximum packet).
    """
    del seed  # reserved: packet schedules are deterministic CBR
    _check_horizon(scenario, duration)
    events = generate_events(scenario, duration)

    flow_tally = {f.id: [0, 0, 0] for f in scenario.flows}  # offered, delivered, dropped
    ov_tally = [0, 0, 0]

    overprovisioned = scenario.link.overprovisioned
    capacity = scenario.link.capacity.bps
    burst = float(burst_bits if burst_bits is not None else max_wire_packet_bits(scenario))
    tokens = burst
    last_time = 0.0

    for ev in events:
        if ev.kind >= EventKind.FAILURE_START:
            continue
        if overprovisioned:
            admitted = True
        else:
            tokens = min(burst, tokens + capacity * (ev.time - last_time))
            last_time = ev.time
            admitted = tokens + _TOKEN_EPSILON_BITS >= ev.wire_bits
            if admitted:
                tokens -= ev.wire_bits
        overhead_bits = ev.wire_bits - ev.user_bits
        if ev.user_bits:
            tally = flow_tally[ev.ref]
            tally[0] += ev.user_bits
            tally[1 if admitted else 2] += ev.user_bits
        ov_tally[0] += overhead_bits
        ov_tally[1 if admitted else 2] += overhead_bits

    return SimReport(
        per_flow={fid: TrafficCounts(*t) for fid, t in flow_tally.items()},
        overhead=TrafficCounts(*ov_tally),
        duration=duration,
    )


def fluid_oracle(scenario: Scenario) -> FluidRates:
    """Closed-form steady-state rates for the scenario.

    Delivered is ``min(R + Ov, C)`` and loss is the excess ``R + Ov - C``
    (zero on overprovisioned links). Independent of run_sim by design: it
    never touches the event machinery, so tests can cross-validate the two.
    """
    user = sum(f.user_rate.bps for f in scenario.flows)
    overhead = 0.0
    for m in scenario.methods:
        if m.is_periodic:
            assert m.period is not None
            overhead += m.message_bits.bits / m.period.seconds
        else:
            assert m.sampling_ratio is not None
            for f in scenario.flows:
                overhead += m.message_bits.bits * f.user_rate.bps / (
                    m.sampling_ratio * f.packet_size_bits
                )
    offered = user + overhead
    if scenario.link.overprovisioned:
        delivered, lost = offered, 0.0
    else:
        delivered = min(offered, scenario.link.capacity.bps)
        lost = offered - delivered
    return FluidRates(
        user_rate=BitRate(user),
        overhead_rate=BitRate(overhead),
        delivered_rate=BitRate(delivered),
        loss_rate=BitRate(lost),
    )


def run_detection(
    scenario: Scenario,
    method_id: str,
    failure_time: float,
    duration: Duration,
    seed: int = 0,
    *,
    timeout_multiplier: float = 1.0,
) -> DetectionReport:
    """Inject a failure and report when the method detects it.

    Detection is arrival-based: the monitor expects a measurement event
    every effective period, and declares the failure at the first expected
    arrival strictly after ``failure_time`` (an event coinciding exactly
    with the failure still arrives). ``timeout_multiplier`` delays the
    declaration by additional whole periods; it defaults to 1, where the
    worst-case latency equals the period.
    """
    del seed  # reserved for callers that randomize failure times
    method = scenario.method_by_id(method_id)
    if method.method_class is MethodClass.IN_BAND:
        if not scenario.flows:
            raise NoCarrierPacketsError("no carrier packets")
        tau = effective_period(method, scenario.flows[0]).seconds
    else:
        assert method.period is not None
        tau = method.period.seconds
    if failure_time < 0:
        raise ValueError(f"failure time must be non-negative, got {failure_time}")
    if timeout_multiplier < 1:
        raise ValueError(f"timeout multiplier must be >= 1, got {timeout_multiplier}")

    # First expected arrival strictly after the failure, on the k*tau grid.
    k = int(failure_time / tau) + 1
    while (k - 1) * tau > failure_time:
        k -= 1
    while k * tau <= failure_time:
        k += 1
    detection = k * tau + (timeout_multiplier - 1.0) * tau
    if detection >= duration.seconds:
        raise PeriodExceedsHorizonError(
            f"period exceeds horizon: next expected arrival after failure at "
            f"{failure_time} s lands at {detection} s, beyond the {duration.seconds} s horizon"
        )
    return DetectionReport(failure_time=failure_time, detection_time=detection)
