import numpy as np
import pytest

from flightfix.services.anomaly.detectors import (
    AnomalyMonitor,
    AnomalyType,
    DetectorConfig,
    DetectorState,
    ProtocolError,
    advance_leg,
)
from flightfix.services.anomaly.geometry import point_to_leg_distance
from flightfix.services.telemetry.models import FlightSample, MissionPlan, StatusText, WaypointReached


LINE = MissionPlan(waypoints=[(0, 0, 10), (100, 0, 10)], cruise_speed=5.0)
THREE = MissionPlan(waypoints=[(0, 0, 10), (50, 0, 10), (50, 50, 10)], cruise_speed=5.0)
MOVING = (5.0, 0.0, 0.0)
STILL = (0.0, 0.0, 0.0)


def at(k):
    return round(k * 0.1, 9)


def sample(t, x=0.0, y=0.0, z=10.0, vel=MOVING):
    return FlightSample(t=t, pos=(x, y, z), vel=vel, alt=z)


def feed(monitor, events, hold=False):
    fired = []
    for event in events:
        anomaly = monitor.observe(event, hold=hold)
        if anomaly is not None:
            fired.append(anomaly)
    return fired


# geometry

def test_distance_to_leg_simple_cases():
    assert point_to_leg_distance((0, 5, 0), (0, 0, 0), (10, 0, 0)) == pytest.approx(5.0)
    # beyond the end of the segment the infinite line still applies
    assert point_to_leg_distance((20, 3, 0), (0, 0, 0), (10, 0, 0)) == pytest.approx(3.0)
    assert point_to_leg_distance((4, 0, 0), (0, 0, 0), (10, 0, 0)) == pytest.approx(0.0, abs=1e-6)


def test_distance_to_degenerate_leg_is_point_distance():
    assert point_to_leg_distance((3, 4, 0), (0, 0, 0), (0, 0, 0)) == pytest.approx(5.0)


def test_distance_matches_cross_product():
    rng = np.random.default_rng(42)
    for _ in range(200):
        p, a, b = rng.uniform(-100, 100, size=(3, 3))
        expected = np.linalg.norm(np.cross(b - a, p - a)) / np.linalg.norm(b - a)
        np.testing.assert_allclose(point_to_leg_distance(p, a, b), expected, rtol=1e-6, atol=1e-6)


# deviation

def test_deviation_fires_after_consecutive_run():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    fired = feed(monitor, [sample(at(k), x=k * 0.5, y=12.0) for k in range(11)])
    assert len(fired) == 1
    assert fired[0].kind is AnomalyType.DEVIATION
    assert fired[0].t == pytest.approx(1.0)


def test_deviation_inside_threshold_never_fires():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    assert feed(monitor, [sample(at(k), x=k * 0.5, y=9.9) for k in range(100)]) == []


def test_deviation_run_resets_on_track():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    events = [sample(at(k), x=k * 0.5, y=0.0 if k == 10 else 12.0) for k in range(21)]
    assert feed(monitor, events) == []


def test_cooldown_holds_detectors():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    fired = feed(monitor, [sample(at(k), x=k * 0.5, y=12.0) for k in range(80)])
    # fires at 1.0, silent until 6.0, then needs a fresh run of 11 samples
    assert [a.t for a in fired] == pytest.approx([1.0, 7.0])


def test_hold_defers_detection():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    held = feed(monitor, [sample(at(k), x=k * 0.5, y=12.0) for k in range(15)], hold=True)
    assert held == []
    fired = monitor.observe(sample(at(15), x=7.5, y=12.0))
    assert fired is not None and fired.kind is AnomalyType.DEVIATION


def test_waypoint_advances_leg():
    monitor = AnomalyMonitor(DetectorConfig(), THREE)
    monitor.observe(WaypointReached(t=0.0, index=1))
    assert monitor.state.active_leg == (1, 2)
    # far from the first leg's line, on the second leg
    assert monitor.cross_track(sample(0.1, x=50.0, y=25.0)) == pytest.approx(0.0, abs=1e-6)


def test_out_of_order_waypoint_is_protocol_error():
    monitor = AnomalyMonitor(DetectorConfig(), THREE)
    with pytest.raises(ProtocolError):
        monitor.observe(WaypointReached(t=0.0, index=2))


def test_final_waypoint_enters_landing():
    state = advance_leg(DetectorState(), 1, LINE)
    assert state.landing
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    monitor.observe(WaypointReached(t=0.0, index=1))
    # far off the line and perfectly still: neither Deviation nor Timeout while landing
    events = [sample(at(k), x=100.0, y=30.0, vel=STILL) for k in range(1, 120)]
    assert feed(monitor, events) == []


# timeout

def test_timeout_after_grace():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    fired = feed(monitor, [sample(at(k), vel=STILL) for k in range(57)])
    assert len(fired) == 1
    assert fired[0].kind is AnomalyType.TIMEOUT
    assert fired[0].t == pytest.approx(5.6)


def test_climbing_vehicle_is_not_stationary():
    monitor = AnomalyMonitor(DetectorConfig(takeoff_grace_s=0.0), LINE)
    events = [sample(at(k), z=1.0 + 0.3 * k, vel=STILL) for k in range(30)]
    assert feed(monitor, events) == []


def test_deviation_wins_over_timeout():
    config = DetectorConfig(takeoff_grace_s=0.0, deviation_consecutive=6, timeout_consecutive=6)
    monitor = AnomalyMonitor(config, LINE)
    fired = feed(monitor, [sample(at(k), y=20.0, vel=STILL) for k in range(7)])
    assert [a.kind for a in fired] == [AnomalyType.DEVIATION]


# status text

def test_thrust_loss_keyword():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    anomaly = monitor.observe(StatusText(t=0.3, text="Potential Thrust Loss: motors saturated"))
    assert anomaly.kind is AnomalyType.THRUST_LOSS
    assert AnomalyType.THRUST_LOSS.label == "Thrust Loss"
    # inside cooldown the same warning is ignored
    assert monitor.observe(StatusText(t=1.3, text="Potential Thrust Loss: motors saturated")) is None
    assert monitor.observe(StatusText(t=5.5, text="Potential Thrust Loss: motors saturated")) is not None


def test_status_ignored_under_hold():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    assert monitor.observe(StatusText(t=0.3, text="Potential Thrust Loss"), hold=True) is None


def test_crash_needs_impact_speed():
    slow = AnomalyMonitor(DetectorConfig(), LINE)
    slow.observe(sample(1.0, vel=(0.0, 0.0, -1.0)))
    assert slow.observe(StatusText(t=1.0, text="SIM Hit ground at 1.0 m/s")) is None

    fast = AnomalyMonitor(DetectorConfig(), LINE)
    fast.observe(sample(1.0, z=0.0, vel=(0.0, 0.0, -4.0)))
    anomaly = fast.observe(StatusText(t=1.0, text="SIM Hit ground at 4.0 m/s"))
    assert anomaly.kind is AnomalyType.CRASH
    assert fast.on_ground


def test_crash_keyword_without_sample_is_ignored():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    assert monitor.observe(StatusText(t=0.0, text="Crash: disarming")) is None


def test_detector_config_rejects_bad_values():
    with pytest.raises(ValueError):
        DetectorConfig(deviation_threshold_m=0.0)
    with pytest.raises(ValueError):
        DetectorConfig(timeout_consecutive=0)
    with pytest.raises(ValueError):
        DetectorConfig(unknown_knob=1)


def test_status_keywords_match_inside_longer_text():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    anomaly = monitor.observe(StatusText(t=0.3, text="EKF ok; Potential Thrust Loss (3); check props"))
    assert anomaly.kind is AnomalyType.THRUST_LOSS

    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    assert monitor.observe(StatusText(t=0.3, text="potential thrust loss")) is None


def test_crash_keyword_does_not_read_as_thrust_loss():
    monitor = AnomalyMonitor(DetectorConfig(), LINE)
    monitor.observe(sample(1.0, vel=(0.0, 0.0, -0.5)))
    assert monitor.observe(StatusText(t=1.0, text="Crash: disarming")) is None


@pytest.mark.parametrize("text", ["SIM Hit ground at 4.0 m/s", "Potential Thrust Loss: motors saturated"])
def test_status_decision_ignores_older_history(text):
    rng = np.random.default_rng(3)
    history = [(k * 0.5, float(rng.uniform(-5, 5)), float(rng.uniform(0, 6))) for k in range(40)]
    last = sample(at(40), x=20.0, z=0.5, vel=(0.0, 0.0, -4.5))

    outcomes = []
    for order in (history, history[::-1], [history[i] for i in rng.permutation(len(history))]):
        monitor = AnomalyMonitor(DetectorConfig(), LINE)
        events = [sample(at(k), x=x, y=y, vel=(0.0, 0.0, -vz)) for k, (x, y, vz) in enumerate(order)]
        assert feed(monitor, events) == []
        monitor.observe(last)
        outcomes.append(monitor.observe(StatusText(t=at(40), text=text)))
    assert len({(a.kind, a.detail) for a in outcomes}) == 1


def test_detectors_are_deterministic():
    rng = np.random.default_rng(11)
    events = []
    for k in range(300):
        events.append(sample(at(k), x=k * 0.3, y=float(rng.normal(0, 8)), vel=(float(rng.uniform(0, 3)), 0.0, 0.0)))
        if k % 50 == 25:
            events.append(StatusText(t=at(k), text="Potential Thrust Loss: motors saturated"))

    first = feed(AnomalyMonitor(DetectorConfig(), LINE), events)
    second = feed(AnomalyMonitor(DetectorConfig(), LINE), events)
    assert first
    assert first == second


# takeoff

HIGH = MissionPlan(waypoints=[(0, 0, 20), (60, 0, 20), (60, 60, 20), (0, 0, 20)], cruise_speed=5.0)


def test_vertical_climb_to_high_first_waypoint_is_not_deviation():
    monitor = AnomalyMonitor(DetectorConfig(), HIGH)
    climb = [sample(at(k), z=0.25 * k, vel=(0.0, 0.0, 2.5)) for k in range(81)]
    assert feed(monitor, climb) == []
    assert monitor.state.armed


def test_deviation_counts_once_first_waypoint_altitude_is_reached():
    monitor = AnomalyMonitor(DetectorConfig(), HIGH)
    assert feed(monitor, [sample(at(k), z=0.25 * k, vel=(0.0, 0.0, 2.5)) for k in range(81)]) == []
    fired = feed(monitor, [sample(at(81 + k), x=k * 0.5, y=12.0, z=20.0) for k in range(11)])
    assert [a.kind for a in fired] == [AnomalyType.DEVIATION]
