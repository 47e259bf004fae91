"""Thermostat hysteresis, absence setback, and the savings arithmetic."""

import pytest

from sbsim.apps.energy import (COMFORT, SETBACK, ThermostatConfig, ThermostatState,
                               build_report, heater_on_ms, kwh, occupancy_setback,
                               span_in_mode, thermostat_step)

CFG = ThermostatConfig(comfort_c=22.0, setback_c=17.0, hysteresis_c=0.5,
                       setback_delay_ms=600_000)


def st(setpoint=22.0, on=False, mode=COMFORT):
    return ThermostatState("lab", setpoint, 0.5, on, mode)


def test_turns_on_below_band():
    new, cmd = thermostat_step(st(on=False), 21.4)
    assert new.heater_on and cmd is True


def test_turns_off_above_band():
    new, cmd = thermostat_step(st(on=True), 22.6)
    assert not new.heater_on and cmd is False


def test_inside_band_no_command():
    new, cmd = thermostat_step(st(on=True), 22.0)
    assert new.heater_on and cmd is None
    new, cmd = thermostat_step(st(on=False), 22.0)
    assert not new.heater_on and cmd is None


def test_boundary_is_inside_band():
    _, cmd = thermostat_step(st(on=False), 21.5)  # exactly setpoint - hysteresis
    assert cmd is None
    _, cmd = thermostat_step(st(on=True), 22.5)
    assert cmd is None


def test_no_consecutive_identical_commands_over_sweep():
    state = st()
    commands = []
    temp, direction = 20.0, +0.05
    for _ in range(4000):
        temp += direction
        if temp > 24:
            direction = -0.05
        if temp < 20:
            direction = +0.05
        state, cmd = thermostat_step(state, temp)
        if cmd is not None:
            commands.append(cmd)
    assert commands, "sweep must cross the band"
    assert all(a != b for a, b in zip(commands, commands[1:]))


def test_setback_after_delay():
    new = occupancy_setback(st(), count=0, absent_for_ms=15 * 60_000, cfg=CFG)
    assert new.mode == SETBACK and new.setpoint_c == 17.0


def test_no_setback_before_delay():
    new = occupancy_setback(st(), count=0, absent_for_ms=5 * 60_000, cfg=CFG)
    assert new.mode == COMFORT and new.setpoint_c == 22.0


def test_presence_restores_comfort_immediately():
    absent = ThermostatState("lab", 17.0, 0.5, False, SETBACK)
    new = occupancy_setback(absent, count=1, absent_for_ms=0, cfg=CFG)
    assert new.mode == COMFORT and new.setpoint_c == 22.0


def test_state_invariants():
    with pytest.raises(ValueError):
        ThermostatState("lab", 22.0, 0.0)
    with pytest.raises(ValueError):
        ThermostatState("lab", 40.0, 0.5)  # outside [5, 30] safe band


def test_heater_on_ms_overlaps_range():
    cmds = [(1000, True), (5000, False), (8000, True)]
    assert heater_on_ms(cmds, 0, 10_000) == 4000 + 2000  # trailing on-run clipped
    assert heater_on_ms(cmds, 2000, 6000) == 3000
    assert heater_on_ms([], 0, 10_000) == 0


def test_kwh_conversion():
    assert kwh(3_600_000, 1000.0) == 1.0  # 1 kW for 1 h


def test_span_in_mode():
    log = [(0, COMFORT), (600_000, SETBACK), (1_200_000, COMFORT)]
    assert span_in_mode(log, SETBACK, 0, 1_800_000) == 600_000
    assert span_in_mode(log, SETBACK, 900_000, 1_800_000) == 300_000


def test_build_report_saved_is_exact_difference():
    actual = [(0, True), (1_800_000, False)]
    baseline = [(0, True), (3_600_000, False)]
    rep = build_report("lab", 0, 3_600_000, 1000.0, actual, baseline,
                       [(0, COMFORT)])
    assert rep.actual_kwh == 0.5
    assert rep.baseline_kwh == 1.0
    assert rep.saved_kwh == rep.baseline_kwh - rep.actual_kwh
    assert rep.setback_hours == 0.0


def test_identical_traces_save_exactly_zero():
    cmds = [(0, True), (1_000_000, False), (2_000_000, True), (2_500_000, False)]
    rep = build_report("lab", 0, 3_600_000, 1500.0, cmds, list(cmds), [(0, COMFORT)])
    assert rep.saved_kwh == 0.0
