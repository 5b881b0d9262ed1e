"""The four communication regimes: none, radio, radio-with-ID, event-VLC.

A step's exchange is a pure function of the pre-step world state and the
outgoing messages. Radio is lossless broadcast; event-VLC delivers a
message exactly when the receiver can see the sender, and tags it with
the observation bin of the sender's bearing (the vision link).

Message payloads can be serialized to fixed-width bit vectors; that codec
is shared with the synthetic physical layer so that the ideal link and
the event-camera link carry identical bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .percept import link_bin
from .world import ADVERSARY, AGENT, TWO_PI, EntityId, WorldConfig, WorldState, visible

COMM_MODES = ("none", "radio", "radio_id", "evlc")

N_DIRECTION_LEVELS = 36

# Fixed-point ranges for continuous payload fields (meters / m-per-step).
VELOCITY_RANGE = 0.5
VECTOR_RANGE = 1.2
FIELD_BITS = 12


@dataclass(frozen=True)
class ViewTopoMessage:
    """View direction (quantized) plus the sender's visibility bits."""

    direction_level: int
    topo: np.ndarray  # (E,) uint8


@dataclass(frozen=True)
class VelocityMessage:
    velocity: np.ndarray  # (2,)


@dataclass(frozen=True)
class VelocityGoalMessage:
    velocity: np.ndarray     # (2,)
    goal_vector: np.ndarray  # (2,)


Message = ViewTopoMessage | VelocityMessage | VelocityGoalMessage


@dataclass(frozen=True)
class InboxEntry:
    message: Message
    sender: EntityId | None = None  # None = anonymous (plain radio)
    link: int | None = None         # observation bin of the sender bearing


def quantize_direction(theta: float, levels: int) -> int:
    """Nearest of `levels` evenly spaced angles; wraps at 2*pi."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    step = TWO_PI / levels
    return int(math.floor(theta / step + 0.5)) % levels


def dequantize_direction(level: int, levels: int) -> float:
    return (level % levels) * (TWO_PI / levels)


def _quantize_scalar(x: float, lo: float, hi: float, bits: int) -> int:
    span = hi - lo
    level = int(math.floor((x - lo) / span * ((1 << bits) - 1) + 0.5))
    return min(max(level, 0), (1 << bits) - 1)


def _dequantize_scalar(level: int, lo: float, hi: float, bits: int) -> float:
    return lo + (hi - lo) * level / ((1 << bits) - 1)


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)],
                    dtype=np.uint8)


def _bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def serialize_message(msg: Message) -> np.ndarray:
    """Message -> bit vector (uint8 of 0/1), MSB first per field, padded
    with zeros to a whole number of nibbles (the physical frame's unit)."""
    if isinstance(msg, ViewTopoMessage):
        parts = [_int_to_bits(msg.direction_level, 6),
                 np.asarray(msg.topo, dtype=np.uint8)]
    elif isinstance(msg, VelocityMessage):
        parts = [
            _int_to_bits(_quantize_scalar(float(v), -VELOCITY_RANGE,
                                          VELOCITY_RANGE, FIELD_BITS), FIELD_BITS)
            for v in msg.velocity
        ]
    elif isinstance(msg, VelocityGoalMessage):
        parts = [
            _int_to_bits(_quantize_scalar(float(v), -VELOCITY_RANGE,
                                          VELOCITY_RANGE, FIELD_BITS), FIELD_BITS)
            for v in msg.velocity
        ] + [
            _int_to_bits(_quantize_scalar(float(v), -VECTOR_RANGE,
                                          VECTOR_RANGE, FIELD_BITS), FIELD_BITS)
            for v in msg.goal_vector
        ]
    else:
        raise TypeError(f"unknown message type {type(msg)!r}")
    bits = np.concatenate(parts)
    if len(bits) % 4:
        bits = np.concatenate([bits, np.zeros(4 - len(bits) % 4, np.uint8)])
    return bits


def deserialize_message(bits: np.ndarray, variant: str, topo_len: int = 0) -> Message:
    """Inverse of serialize_message; `variant` names the payload kind."""
    bits = np.asarray(bits, dtype=np.uint8)
    if variant == "view_topo":
        level = _bits_to_int(bits[:6])
        return ViewTopoMessage(direction_level=level,
                               topo=bits[6:6 + topo_len].copy())
    if variant == "velocity":
        v = [_dequantize_scalar(_bits_to_int(bits[i * FIELD_BITS:(i + 1) * FIELD_BITS]),
                                -VELOCITY_RANGE, VELOCITY_RANGE, FIELD_BITS)
             for i in range(2)]
        return VelocityMessage(velocity=np.array(v))
    if variant == "velocity_goal":
        vals = [_bits_to_int(bits[i * FIELD_BITS:(i + 1) * FIELD_BITS])
                for i in range(4)]
        v = [_dequantize_scalar(q, -VELOCITY_RANGE, VELOCITY_RANGE, FIELD_BITS)
             for q in vals[:2]]
        g = [_dequantize_scalar(q, -VECTOR_RANGE, VECTOR_RANGE, FIELD_BITS)
             for q in vals[2:]]
        return VelocityGoalMessage(velocity=np.array(v), goal_vector=np.array(g))
    raise ValueError(f"unknown payload variant {variant!r}")


def _payload_sort_key(msg: Message) -> bytes:
    return serialize_message(msg).tobytes()


def communicators(state: WorldState, include_adversary: bool = False) -> list[EntityId]:
    out = [e for e in state.entities if e.cls == AGENT]
    if include_adversary:
        out += [e for e in state.entities if e.cls == ADVERSARY]
    return out


def exchange(
    state: WorldState,
    mode: str,
    messages: dict[EntityId, Message],
    config: WorldConfig,
    include_adversary: bool = False,
) -> dict[EntityId, list[InboxEntry]]:
    """Deliver one message per agent according to the channel mode.

    none: all inboxes empty. radio / radio_id: lossless broadcast to every
    other participant (radio strips the sender; entries are ordered by
    payload bytes so position leaks no identity). evlc: receiver i gets
    sender j's message iff j is visible to i, with the bearing-bin link.
    """
    if mode not in COMM_MODES:
        raise ValueError(f"unknown comm mode {mode!r}")
    participants = communicators(state, include_adversary)
    inboxes: dict[EntityId, list[InboxEntry]] = {p: [] for p in participants}
    if mode == "none":
        return inboxes
    for p in participants:
        if p not in messages:
            raise ValueError(f"missing outgoing message for {p}")

    for receiver in participants:
        if mode == "radio":
            entries = [InboxEntry(message=messages[s])
                       for s in participants if s != receiver]
            entries.sort(key=lambda e: _payload_sort_key(e.message))
        elif mode == "radio_id":
            entries = [InboxEntry(message=messages[s], sender=s)
                       for s in participants if s != receiver]
        else:  # evlc
            entries = []
            for s in participants:
                if s == receiver or not visible(state, receiver, s, config):
                    continue
                b = link_bin(state, receiver, s, config)
                entries.append(InboxEntry(message=messages[s], sender=s, link=b))
        inboxes[receiver] = entries
    return inboxes


# Image-plane geometry of the physical event-VLC link: bearings map onto
# a one-row strip of the receiver's sensor, one observation bin to
# PX_PER_BIN pixels. Co-visible senders are at least ~1.5 degrees apart
# (a nearer disc at the same bearing would occlude the farther one), so
# this scale keeps their pixel footprints beyond the association radius.
PX_PER_BIN = 8
BEACON_RADIUS_PX = 1.5
TRACK_RADIUS_PX = 3.0
SENSOR_ROWS = 9


def physical_exchange(
    state: WorldState,
    messages: dict[EntityId, Message],
    config: WorldConfig,
    payload_variant: str,
    topo_len: int = 0,
    include_adversary: bool = False,
) -> dict[EntityId, list[InboxEntry]]:
    """Deliver the step's messages through the synthetic event-VLC stack.

    Each receiver gets its own sensor scene: every sender inside the FOV
    becomes a blinking beacon at the pixel column of its bearing, fully
    occluded when the sight line is blocked. Whatever the tracker and
    demodulator recover is what gets delivered; senders are identified by
    the frame's id field and linked by decoded image position.
    """
    from math import floor

    from . import evlc
    from .percept import bin_count
    from .world import angle_diff, bearing, in_fov, line_of_sight

    participants = communicators(state, include_adversary)
    sender_ids = {p: i for i, p in enumerate(participants)}
    if len(participants) > 16:
        raise ValueError("the 4-bit sender id supports at most 16 senders")
    k = bin_count(config.fov)
    width = k * PX_PER_BIN
    sensor = evlc.PixelSensor(width=width, height=SENSOR_ROWS)
    waves = {
        p: evlc.modulate(serialize_message(messages[p]), sender_ids[p])
        for p in participants
    }
    duration_ms = (max(w.duration_us for w in waves.values())
                   + 2 * evlc.SLOT_US) / 1000.0

    inboxes: dict[EntityId, list[InboxEntry]] = {p: [] for p in participants}
    for receiver in participants:
        heading = float(state.headings[state.index_of(receiver)])
        beacons = []
        for s in participants:
            if s == receiver or not in_fov(state, receiver, s, config.fov):
                continue
            rel = angle_diff(bearing(state, receiver, s), heading)
            x = (rel + config.fov / 2.0) / config.fov * width
            occluded = 0.0 if line_of_sight(state, receiver, s, config) else 1.0
            beacons.append(evlc.Beacon(
                waveform=waves[s], position=(x, SENSOR_ROWS / 2.0),
                radius_px=BEACON_RADIUS_PX, occluded_fraction=occluded))
        if not beacons:
            continue
        events = evlc.simulate_events(beacons, sensor, duration_ms)
        tracks = evlc.track_sources(events, radius_px=TRACK_RADIUS_PX)
        entries = []
        for track in tracks:
            decoded = evlc.demodulate(track)
            if not isinstance(decoded, evlc.DecodeResult):
                continue
            if not 0 <= decoded.sender_id < len(participants):
                continue
            sender = participants[decoded.sender_id]
            msg = deserialize_message(decoded.payload_bits, payload_variant,
                                      topo_len)
            b = min(max(int(floor(decoded.position[0] / PX_PER_BIN)), 0), k - 1)
            entries.append(InboxEntry(message=msg, sender=sender, link=b))
        entries.sort(key=lambda e: (e.sender.cls, e.sender.index))
        inboxes[receiver] = entries
    return inboxes
