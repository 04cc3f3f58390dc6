"""Measurement method models and their observer factors.

Three classes of measurement are modeled by a single parametric type:

* ``passive_export``: local observation with periodic export of telemetry
  (gNMI-style counter streaming). Overhead is one export message per period.
* ``active_probe``: synthetic periodic control traffic on the data path
  (CCM-style heartbeats). Overhead is one probe message per period.
* ``in_band``: telemetry piggybacked onto live user packets (IOAM-style),
  enlarging one of every ``sampling_ratio`` data packets. The effective
  period is set by the carrier flow: ``s * packet_size / user_rate``.

The observer factor of a method is the overhead it emits per effective
period; dividing by the period gives the overhead rate, so the product
``period * overhead_rate`` is a method constant.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

from .core import BitRate, Duration, FlowSpec, OverheadBits, Uncertainty


class UnknownPresetError(ValueError):
    """A method preset name is not in the registry."""


class MethodClass(str, Enum):
    PASSIVE_EXPORT = "passive_export"
    ACTIVE_PROBE = "active_probe"
    IN_BAND = "in_band"


_PERIODIC = (MethodClass.PASSIVE_EXPORT, MethodClass.ACTIVE_PROBE)


@dataclass(frozen=True)
class MeasurementMethod:
    """Parametric description of one measurement process.

    Exactly the fields of the declared class are set: periodic classes
    carry ``period``; ``in_band`` carries ``sampling_ratio``, ``hops``,
    ``encap_bits`` and ``per_hop_bits``, with ``message_bits`` derived as
    ``encap_bits + hops * per_hop_bits``. Use the class-specific
    constructors rather than the raw initializer.
    """

    method_id: str
    method_class: MethodClass
    message_bits: OverheadBits
    period: Duration | None = None
    sampling_ratio: int | None = None
    hops: int | None = None
    encap_bits: OverheadBits | None = None
    per_hop_bits: OverheadBits | None = None

    def __post_init__(self) -> None:
        if not self.method_id:
            raise ValueError("method id must be non-empty")
        if not isinstance(self.method_class, MethodClass):
            raise TypeError(f"method class must be a MethodClass, got {self.method_class!r}")
        if self.method_class in _PERIODIC:
            if self.period is None:
                raise ValueError(f"{self.method_class.value} method {self.method_id!r} requires a period")
            if any(v is not None for v in (self.sampling_ratio, self.hops, self.encap_bits, self.per_hop_bits)):
                raise ValueError(
                    f"{self.method_class.value} method {self.method_id!r} must not carry in-band fields"
                )
        else:
            if self.period is not None:
                raise ValueError(
                    f"in_band method {self.method_id!r} derives its period from the "
                    "sampling ratio and carrier flow; do not set one"
                )
            if not isinstance(self.sampling_ratio, int) or self.sampling_ratio < 1:
                raise ValueError(
                    f"in_band method {self.method_id!r} needs a sampling ratio >= 1, "
                    f"got {self.sampling_ratio!r}"
                )
            if not isinstance(self.hops, int) or self.hops < 1:
                raise ValueError(f"in_band method {self.method_id!r} needs hops >= 1, got {self.hops!r}")
            if self.encap_bits is None or self.per_hop_bits is None:
                raise ValueError(f"in_band method {self.method_id!r} needs encap and per-hop bits")
            composed = self.encap_bits + self.per_hop_bits * self.hops
            if composed != self.message_bits:
                raise ValueError(
                    f"in_band message bits must equal encap + hops * per-hop "
                    f"({composed.bits}), got {self.message_bits.bits}"
                )

    @classmethod
    def passive_export(cls, method_id: str, message_bits: OverheadBits, period: Duration) -> MeasurementMethod:
        return cls(method_id, MethodClass.PASSIVE_EXPORT, message_bits, period=period)

    @classmethod
    def active_probe(cls, method_id: str, message_bits: OverheadBits, period: Duration) -> MeasurementMethod:
        return cls(method_id, MethodClass.ACTIVE_PROBE, message_bits, period=period)

    @classmethod
    def in_band(
        cls,
        method_id: str,
        *,
        encap_bits: OverheadBits,
        per_hop_bits: OverheadBits,
        hops: int,
        sampling_ratio: int = 1,
    ) -> MeasurementMethod:
        message = encap_bits + per_hop_bits * hops
        return cls(
            method_id,
            MethodClass.IN_BAND,
            message,
            sampling_ratio=sampling_ratio,
            hops=hops,
            encap_bits=encap_bits,
            per_hop_bits=per_hop_bits,
        )

    @property
    def is_periodic(self) -> bool:
        return self.method_class in _PERIODIC

    def with_period(self, period: Duration) -> MeasurementMethod:
        """A copy with a new export/probe interval (periodic classes only)."""
        if not self.is_periodic:
            raise ValueError(f"in_band method {self.method_id!r} has no configurable period")
        return dataclasses.replace(self, period=period)

    def with_sampling(self, sampling_ratio: int) -> MeasurementMethod:
        """A copy with a new sampling ratio (in_band only)."""
        if self.is_periodic:
            raise ValueError(f"{self.method_class.value} method {self.method_id!r} has no sampling ratio")
        return dataclasses.replace(self, sampling_ratio=sampling_ratio)


def observer_factor(method: MeasurementMethod) -> OverheadBits:
    """The method's observer factor: overhead bits emitted per effective period."""
    return method.message_bits


def effective_period(method: MeasurementMethod, flow: FlowSpec | None = None) -> Duration:
    """The interval between consecutive measurement events.

    Periodic classes return their configured period; in-band methods
    sample one of every ``s`` packets of the carrier flow, so their
    period is ``s * packet_size / user_rate``.
    """
    if method.is_periodic:
        assert method.period is not None
        return method.period
    if flow is None:
        raise ValueError("effective period of an in_band method requires a carrier flow")
    assert method.sampling_ratio is not None
    return Duration(method.sampling_ratio * flow.packet_size_bits / flow.user_rate.bps)


def overhead_rate(method: MeasurementMethod, flow: FlowSpec | None = None) -> BitRate:
    """Overhead bits per second: observer factor over effective period."""
    return BitRate(observer_factor(method).bits / effective_period(method, flow).seconds)


def uncertainty_of(
    method: MeasurementMethod,
    metric_slope: float,
    flow: FlowSpec | None = None,
    metric_name: str = "detection_time",
) -> Uncertainty:
    """Uncertainty of a sensitive metric measured by this method.

    ``metric_slope`` is the metric's drift per second of staleness; the
    uncertainty is ``slope * effective_period``. Detection time has slope 1.
    """
    return Uncertainty(metric_name, metric_slope, effective_period(method, flow))


# Preset constants: message and header sizes of the three reference
# protocols, in bytes.
CCM_MESSAGE_BYTES = 101
GNMI_MESSAGE_BYTES = 204
IOAM_TUNNEL_BYTES = 44
IOAM_OPTION_BYTES = 4
IOAM_HEADER_BYTES = 8
IOAM_ENCAP_BYTES = IOAM_TUNNEL_BYTES + IOAM_OPTION_BYTES + IOAM_HEADER_BYTES
IOAM_PER_HOP_BYTES = 8
IOAM_HOPS = 3

PRESET_NAMES = ("ccm-101", "gnmi-204", "ioam-3hop")

_DEFAULT_PERIOD = Duration(1.0)


def preset(
    name: str,
    *,
    period: Duration | None = None,
    sampling_ratio: int | None = None,
) -> MeasurementMethod:
    """Build a method from the named preset.

    ``period`` applies to the periodic presets (default 1 s);
    ``sampling_ratio`` applies to the in-band preset (default 1).
    """
    if name == "ccm-101":
        if sampling_ratio is not None:
            raise ValueError("ccm-101 is periodic; it has no sampling ratio")
        return MeasurementMethod.active_probe(
            name, OverheadBits.from_bytes(CCM_MESSAGE_BYTES), period or _DEFAULT_PERIOD
        )
    if name == "gnmi-204":
        if sampling_ratio is not None:
            raise ValueError("gnmi-204 is periodic; it has no sampling ratio")
        return MeasurementMethod.passive_export(
            name, OverheadBits.from_bytes(GNMI_MESSAGE_BYTES), period or _DEFAULT_PERIOD
        )
    if name == "ioam-3hop":
        if period is not None:
            raise ValueError("ioam-3hop derives its period from the sampling ratio")
        return MeasurementMethod.in_band(
            name,
            encap_bits=OverheadBits.from_bytes(IOAM_ENCAP_BYTES),
            per_hop_bits=OverheadBits.from_bytes(IOAM_PER_HOP_BYTES),
            hops=IOAM_HOPS,
            sampling_ratio=sampling_ratio if sampling_ratio is not None else 1,
        )
    raise UnknownPresetError(f"unknown preset {name!r}; known presets: {', '.join(PRESET_NAMES)}")
