"""Domain types and validation for measurement-overhead scenarios.

Unit discipline: rates are bits per second, sizes are bits, times are
seconds. Byte-denominated inputs are converted at the boundary (the
``from_bytes`` constructors) so internal arithmetic never mixes units.
All types are immutable after construction and safe to share across
concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from .methods import MeasurementMethod


class ScenarioError(ValueError):
    """Base class for scenario validation failures."""


class NoFlowsError(ScenarioError):
    """Scenario has no flows."""


class DuplicateFlowIdError(ScenarioError):
    """Two flows share an id."""


class DuplicateMethodIdError(ScenarioError):
    """Two measurement methods share an id."""


class ZeroRateError(ScenarioError):
    """A flow was declared with zero rate."""


class ZeroCapacityError(ScenarioError):
    """A link was declared with zero capacity."""


class NegativeRateError(ValueError):
    """An operation would produce a negative bit rate; clamping is never silent."""


class NegativeOverheadError(ValueError):
    """An operation would produce a negative overhead bit count."""


@dataclass(frozen=True, order=True)
class BitRate:
    """A non-negative rate in bits per second."""

    bps: float

    def __post_init__(self) -> None:
        if not isinstance(self.bps, (int, float)) or isinstance(self.bps, bool):
            raise TypeError(f"rate must be a real number, got {type(self.bps).__name__}")
        if not math.isfinite(self.bps):
            raise NegativeRateError(f"rate must be finite, got {self.bps!r}")
        if self.bps < 0:
            raise NegativeRateError(f"rate must be non-negative, got {self.bps!r}")

    @classmethod
    def from_kbps(cls, kbps: float) -> BitRate:
        return cls(kbps * 1e3)

    @classmethod
    def from_mbps(cls, mbps: float) -> BitRate:
        return cls(mbps * 1e6)

    @classmethod
    def from_gbps(cls, gbps: float) -> BitRate:
        return cls(gbps * 1e9)

    def __add__(self, other: BitRate) -> BitRate:
        return BitRate(self.bps + other.bps)

    def __sub__(self, other: BitRate) -> BitRate:
        if other.bps > self.bps:
            raise NegativeRateError(
                f"{self.bps} bps - {other.bps} bps would be negative"
            )
        return BitRate(self.bps - other.bps)

    def __mul__(self, factor: float) -> BitRate:
        return BitRate(self.bps * factor)

    __rmul__ = __mul__


@dataclass(frozen=True, order=True)
class Duration:
    """A strictly positive time span in seconds."""

    seconds: float

    def __post_init__(self) -> None:
        if not isinstance(self.seconds, (int, float)) or isinstance(self.seconds, bool):
            raise TypeError(f"duration must be a real number, got {type(self.seconds).__name__}")
        if not math.isfinite(self.seconds) or self.seconds <= 0:
            raise ValueError(f"duration must be finite and positive, got {self.seconds!r}")

    @classmethod
    def from_ms(cls, ms: float) -> Duration:
        return cls(ms * 1e-3)

    def __mul__(self, factor: float) -> Duration:
        return Duration(self.seconds * factor)

    __rmul__ = __mul__


@dataclass(frozen=True, order=True)
class OverheadBits:
    """A non-negative, integral number of overhead bits.

    Overhead travels in whole octets, so the byte-oriented constructor is
    the usual entry point: ``OverheadBits.from_bytes(101)`` is 808 bits.
    """

    bits: int

    def __post_init__(self) -> None:
        if not isinstance(self.bits, int) or isinstance(self.bits, bool):
            raise TypeError(f"overhead bits must be an integer, got {type(self.bits).__name__}")
        if self.bits < 0:
            raise NegativeOverheadError(f"overhead must be non-negative, got {self.bits}")

    @classmethod
    def from_bytes(cls, octets: int) -> OverheadBits:
        if not isinstance(octets, int) or isinstance(octets, bool):
            raise TypeError(f"octet count must be an integer, got {type(octets).__name__}")
        if octets < 0:
            raise NegativeOverheadError(f"octet count must be non-negative, got {octets}")
        return cls(octets * 8)

    def __add__(self, other: OverheadBits) -> OverheadBits:
        return OverheadBits(self.bits + other.bits)

    def __sub__(self, other: OverheadBits) -> OverheadBits:
        if other.bits > self.bits:
            raise NegativeOverheadError(
                f"{self.bits} bits - {other.bits} bits would be negative"
            )
        return OverheadBits(self.bits - other.bits)

    def __mul__(self, count: int) -> OverheadBits:
        if count < 0:
            raise NegativeOverheadError(f"cannot scale overhead by {count}")
        return OverheadBits(self.bits * count)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FlowSpec:
    """A constant-bit-rate traffic source.

    ``packet_size_bits`` is header-inclusive; the packet emission interval
    is ``packet_size_bits / user_rate``.
    """

    id: str
    user_rate: BitRate
    packet_size_bits: int

    def __post_init__(self) -> None:
        if not self.id:
            raise ScenarioError("flow id must be non-empty")
        if self.user_rate.bps <= 0:
            raise ZeroRateError(f"flow {self.id!r} has zero rate")
        if not isinstance(self.packet_size_bits, int) or self.packet_size_bits <= 0:
            raise ScenarioError(
                f"flow {self.id!r} packet size must be a positive bit count, "
                f"got {self.packet_size_bits!r}"
            )

    @classmethod
    def from_bytes(cls, id: str, user_rate: BitRate, packet_size_bytes: int) -> FlowSpec:
        return cls(id, user_rate, packet_size_bytes * 8)

    @property
    def emission_interval(self) -> Duration:
        return Duration(self.packet_size_bits / self.user_rate.bps)


@dataclass(frozen=True)
class LinkSpec:
    """A capacity-limited channel.

    An overprovisioned link admits everything; its declared capacity is
    retained for reporting only.
    """

    capacity: BitRate
    overprovisioned: bool = False

    def __post_init__(self) -> None:
        if self.capacity.bps <= 0:
            raise ZeroCapacityError("link capacity must be positive")


@dataclass(frozen=True)
class Uncertainty:
    """Uncertainty of a periodically measured sensitive metric.

    The defining law is ``value == slope * period``; ``value`` is computed
    rather than stored so the law holds by construction.
    """

    metric_name: str
    slope: float
    period: Duration

    def __post_init__(self) -> None:
        if not self.metric_name:
            raise ValueError("metric name must be non-empty")
        if not math.isfinite(self.slope) or self.slope < 0:
            raise ValueError(f"metric slope must be finite and non-negative, got {self.slope!r}")

    @property
    def value(self) -> float:
        return self.slope * self.period.seconds


class ImpactKind(str, Enum):
    DATA_RATE = "data_rate"
    LOSS_RATE = "loss_rate"


@dataclass(frozen=True)
class Impact:
    """Measured impact of a method on a rate metric (twin-run delta)."""

    kind: ImpactKind
    value: BitRate

    def __post_init__(self) -> None:
        if not isinstance(self.kind, ImpactKind):
            raise TypeError(f"impact kind must be an ImpactKind, got {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    """A validated (flows, link, methods) triple. Build via validate_scenario."""

    flows: tuple[FlowSpec, ...]
    link: LinkSpec
    methods: tuple[MeasurementMethod, ...]

    def without_methods(self) -> Scenario:
        """The method-free twin of this scenario."""
        return Scenario(self.flows, self.link, ())

    def method_by_id(self, method_id: str) -> MeasurementMethod:
        for m in self.methods:
            if m.method_id == method_id:
                return m
        raise KeyError(f"no method with id {method_id!r}")


def validate_scenario(
    flows: Iterable[FlowSpec],
    link: LinkSpec,
    methods: Iterable[MeasurementMethod] = (),
) -> Scenario:
    """Check cross-component invariants and freeze the scenario.

    Flows must be non-empty with unique ids; method ids must be unique.
    The methods list may be empty: the method-free twin of a scenario is
    itself a valid scenario. Validation is idempotent, so validating the
    components of a validated scenario reproduces it exactly.
    """
    flows = tuple(flows)
    methods = tuple(methods)
    if not flows:
        raise NoFlowsError("no flows")
    seen: set[str] = set()
    for f in flows:
        if f.id in seen:
            raise DuplicateFlowIdError(f"duplicate flow id {f.id!r}")
        seen.add(f.id)
    seen_m: set[str] = set()
    for m in methods:
        if m.method_id in seen_m:
            raise DuplicateMethodIdError(f"duplicate method id {m.method_id!r}")
        seen_m.add(m.method_id)
    return Scenario(flows, link, methods)
