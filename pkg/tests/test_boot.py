"""Emergency boot trigger tests."""

from lifeline.boot import (
    EMERGENCY_SIGNATURE,
    BatteryObservation, EmergencyBeacon, JoinEmergency, WaitRetry,
    consumption_check, scan_cycle,
)


def test_positive_consumption_triggers():
    assert consumption_check(BatteryObservation(80.0, 79.0, 60.0)) is True


def test_flat_battery_does_not_trigger():
    assert consumption_check(BatteryObservation(80.0, 80.0, 60.0)) is False


def test_charging_does_not_trigger():
    assert consumption_check(BatteryObservation(79.0, 80.0, 60.0)) is False


def test_signature_value_is_stable():
    assert EMERGENCY_SIGNATURE == "LIFELINE-EMG-v1"
    assert EmergencyBeacon("R-1").signature == EMERGENCY_SIGNATURE


def test_scan_with_no_beacons_waits_one_interval():
    decision = scan_cycle([], now=120.0, scan_interval=30.0)
    assert decision == WaitRetry(150.0)


def test_scan_ignores_foreign_signatures():
    foreign = EmergencyBeacon("X-1", signature="SOMETHING-ELSE")
    decision = scan_cycle([foreign], now=0.0, scan_interval=30.0)
    assert isinstance(decision, WaitRetry)


def test_scan_prefers_stations():
    beacons = [
        EmergencyBeacon("R-2"),
        EmergencyBeacon("ST-9", is_station=True),
        EmergencyBeacon("R-1"),
    ]
    decision = scan_cycle(beacons, now=0.0, scan_interval=30.0)
    assert decision == JoinEmergency("ST-9")


def test_scan_tie_breaks_on_lowest_id():
    beacons = [EmergencyBeacon("R-9"), EmergencyBeacon("R-3")]
    assert scan_cycle(beacons, now=0.0, scan_interval=30.0) == JoinEmergency("R-3")
    stations = [EmergencyBeacon("ST-2", is_station=True),
                EmergencyBeacon("ST-1", is_station=True)]
    assert scan_cycle(beacons + stations, now=0.0,
                      scan_interval=30.0) == JoinEmergency("ST-1")
