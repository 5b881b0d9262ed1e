import numpy as np
import pytest

from lumen.evlc import (
    HALF_SLOT_US,
    MAX_BODY_BITS,
    PREAMBLE_HALF,
    SLOT_US,
    Beacon,
    DecodeFailure,
    DecodeResult,
    ModulationError,
    PixelSensor,
    demodulate,
    manchester_encode,
    modulate,
    occlusion_trials,
    roundtrip_trials,
    separation_trials,
    simulate_events,
    speed_trials,
    track_sources,
    transmit,
    xor_checksum,
)


def test_empty_payload_frame_structure():
    w = modulate([], sender_id=5)
    # preamble + Manchester(sender 4 + length 4 + checksum 4)
    assert len(w.half_slots) == len(PREAMBLE_HALF) + 2 * 12
    assert np.array_equal(w.half_slots[:16], PREAMBLE_HALF)


def test_manchester_midpoint_transitions():
    # 1 -> on,off ; 0 -> off,on: payload 1010 alternates the edge direction
    half = manchester_encode(np.array([1, 0, 1, 0], dtype=np.uint8))
    assert half.tolist() == [1, 0, 0, 1, 1, 0, 0, 1]
    # every slot has a mid-slot transition
    assert all(half[2 * i] != half[2 * i + 1] for i in range(4))


def test_manchester_never_contains_preamble_runs():
    rng = np.random.default_rng(0)
    for _ in range(200):
        bits = rng.integers(0, 2, 16)
        half = manchester_encode(bits)
        s = "".join(map(str, half))
        assert "1111" not in s and "0000" not in s


def test_modulate_rejects_bad_payloads():
    with pytest.raises(ModulationError):
        modulate(np.zeros(52, dtype=np.uint8))  # > 48 bits
    with pytest.raises(ModulationError):
        modulate(np.zeros(6, dtype=np.uint8))   # not whole nibbles
    with pytest.raises(ModulationError):
        modulate([], sender_id=16)


def test_checksum_is_nibble_xor():
    bits = np.array([1, 0, 1, 0, 0, 1, 1, 0], dtype=np.uint8)
    assert xor_checksum(bits).tolist() == [1, 1, 0, 0]
    assert xor_checksum(np.concatenate([bits, [1, 1, 0, 0]])).tolist() == [0, 0, 0, 0]


def test_roundtrip_single_payload():
    rng = np.random.default_rng(1)
    payload = rng.integers(0, 2, 16).astype(np.uint8)
    tracks, results = transmit(payload, sender_id=9)
    assert len(tracks) == 1
    r = results[0]
    assert isinstance(r, DecodeResult)
    assert r.sender_id == 9
    assert np.array_equal(r.payload_bits, payload)
    # decoded position within one pixel of the beacon center
    assert np.linalg.norm(r.position - np.array([32.0, 32.0])) <= 1.0


def test_no_beacons_empty_stream():
    ev = simulate_events([], PixelSensor(), 40.0)
    assert len(ev) == 0


def test_steady_on_beacon_only_turn_on_transient():
    sensor = PixelSensor()
    wave = modulate([], 0)
    steady = Beacon(waveform=type(wave)(
        half_slots=np.ones(40, dtype=np.uint8)), position=(32, 32))
    ev = simulate_events([steady], sensor, 70.0)
    assert len(ev) > 0
    assert ev.t.max() == 0  # nothing after the initial turn-on


def test_blink_edge_fires_every_covered_pixel():
    sensor = PixelSensor()
    wave_cls = type(modulate([], 0))
    beacon = Beacon(waveform=wave_cls(
        half_slots=np.array([1, 1, 0, 0, 1, 1, 0, 0], dtype=np.uint8)),
        position=(32.0, 32.0), radius_px=2.5)
    ev = simulate_events([beacon], sensor, 16.0)
    # covered pixels: centers within 2.5 px of (32, 32)
    xs, ys = np.meshgrid(np.arange(64), np.arange(64))
    n_cov = int(((xs - 32.0) ** 2 + (ys - 32.0) ** 2 <= 2.5 ** 2).sum())
    # half-slots are 2 ms: level flips at 0 (on), 4 ms (off), 8 ms (on)...
    for t_edge, pol in [(0, 1), (4000, -1), (8000, 1), (12000, -1)]:
        batch = ev.polarity[ev.t == t_edge]
        assert len(batch) == n_cov
        assert (batch == pol).all()


def test_event_timestamps_monotone():
    rng = np.random.default_rng(2)
    w = modulate(rng.integers(0, 2, 24).astype(np.uint8), 3)
    b1 = Beacon(waveform=w, position=(20, 20))
    b2 = Beacon(waveform=w, position=(44, 44), start_us=6000)
    ev = simulate_events([b1, b2], PixelSensor(), (w.duration_us + 12000) / 1000,
                         rng=rng, noise_rate_hz=5.0)
    assert (np.diff(ev.t) >= 0).all()


def test_two_sources_two_tracks_both_decode():
    w1 = modulate([1, 0, 1, 1], 3)
    w2 = modulate([0, 1, 0, 0], 7)
    sensor = PixelSensor()
    ev = simulate_events(
        [Beacon(waveform=w1, position=(12, 32)),
         Beacon(waveform=w2, position=(52, 32))],
        sensor, (max(w1.duration_us, w2.duration_us) + 8000) / 1000)
    tracks = track_sources(ev, radius_px=8.0)
    assert len(tracks) == 2
    got = {r.sender_id: r.payload_bits.tolist()
           for r in map(demodulate, tracks) if isinstance(r, DecodeResult)}
    assert got == {3: [1, 0, 1, 1], 7: [0, 1, 0, 0]}


def test_moving_beacon_single_track():
    # dim off level keeps motion events flowing, recentring each sample
    w = modulate([1, 1, 0, 1, 0, 0, 1, 0], 2)
    sensor = PixelSensor(width=160, height=32)
    b = Beacon(waveform=w, position=(6, 16), velocity=(2.0, 0.0),
               off_intensity=0.25)
    ev = simulate_events([b], sensor, (w.duration_us + 8000) / 1000)
    tracks = track_sources(ev, radius_px=8.0)
    assert len(tracks) == 1
    r = demodulate(tracks[0])
    assert isinstance(r, DecodeResult) and r.sender_id == 2


def test_occlusion_90_percent_still_decodes():
    assert occlusion_trials(40, 0.9, seed=10) == 1.0


def test_full_occlusion_never_decodes():
    assert occlusion_trials(20, 1.0, seed=11) == 0.0


def test_single_pixel_sufficiency():
    """Decoding succeeds whenever at least one pixel stays visible."""
    rng = np.random.default_rng(12)
    sensor = PixelSensor()
    for _ in range(10):
        payload = rng.integers(0, 2, 16).astype(np.uint8)
        w = modulate(payload, 1)
        b = Beacon(waveform=w, position=(32.2, 31.7), radius_px=2.5)
        n_cov = 21  # disc footprint at radius 2.5
        b.occluded_fraction = (n_cov - 1) / n_cov  # exactly one pixel left
        ev = simulate_events([b], sensor, (w.duration_us + 8000) / 1000)
        tracks = track_sources(ev)
        results = [demodulate(t) for t in tracks]
        assert any(isinstance(r, DecodeResult)
                   and np.array_equal(r.payload_bits, payload)
                   for r in results)


def test_pure_noise_stream_no_sync():
    rng = np.random.default_rng(13)
    sensor = PixelSensor()
    ev = simulate_events([], sensor, 200.0, rng=rng, noise_rate_hz=40.0)
    assert len(ev) > 0
    tracks = track_sources(ev)
    for t in tracks:
        assert demodulate(t) == DecodeFailure("no_sync")


def test_motion_tolerance_up_to_association_bound():
    # association radius 8, disc radius 2.5: speeds to 5.5 px/slot decode
    for speed in (2.0, 4.0, 5.5):
        assert speed_trials(5, speed, seed=14) == 1.0


def test_separation_beyond_twice_radius():
    assert separation_trials(30, seed=15) == 1.0


def test_roundtrip_rate_small_sample():
    assert roundtrip_trials(100, seed=16) == 1.0


def test_refractory_blocks_fast_repeats():
    # with samples every 500 us and a 1 ms refractory, a 2 ms square wave
    # can only fire every other edge at most
    sensor = PixelSensor(width=8, height=8, samples_per_slot=8,
                         refractory_us=1000)
    wave_cls = type(modulate([], 0))
    # toggles every half-slot sample at 500 us: change every sample
    levels = np.tile([1, 0], 20).astype(np.uint8)
    b = Beacon(waveform=wave_cls(half_slots=levels), position=(4, 4),
               radius_px=0.6)
    ev = simulate_events([b], sensor, 60.0)
    per_pixel_gaps = []
    for x in range(8):
        for y in range(8):
            t = np.sort(ev.t[(ev.x == x) & (ev.y == y)])
            if len(t) > 1:
                per_pixel_gaps.append(np.diff(t).min())
    assert per_pixel_gaps and min(per_pixel_gaps) >= 1000


def test_max_body_bits_constant():
    assert MAX_BODY_BITS == 48
    assert SLOT_US == 4000 and HALF_SLOT_US == 2000
