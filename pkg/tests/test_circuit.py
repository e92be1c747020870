import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memdc.circuit import (
    SourceBank,
    SwitchMatrixState,
    SwitchStateError,
    feedback_resistance,
    measure_output,
    measure_output_trace,
    output_voltage,
    power_draw,
    set_switch_state,
    tia_transfer,
)
from memdc.devices import AmplifierModel, MemristorState, TemperatureRegime

IDEAL = AmplifierModel(gain_factor_table={300.0: 1.0}, offset=0.0)


def device(r, **kw):
    params = dict(conductance=1.0 / r, g_min=1e-7, g_max=1e-2, write_gain=1e-6)
    params.update(kw)
    return MemristorState(**params)


def bank(resistances, amp=IDEAL, r_in=3e3, v_in=0.25, regime=None, **kw):
    return SourceBank(
        tuple(device(r, **kw) for r in resistances),
        r_in,
        amp,
        v_in,
        regime or TemperatureRegime.room(),
    )


def test_feedback_resistance_examples():
    assert feedback_resistance(bank([10e3])) == pytest.approx(10e3, rel=1e-15)
    assert feedback_resistance(bank([12e3, 12e3])) == pytest.approx(6e3, rel=1e-15)


@settings(max_examples=200)
@given(rs=st.lists(st.floats(1e3, 1e6), min_size=1, max_size=16))
def test_feedback_resistance_matches_brute_force(rs):
    b = bank(rs)
    # oracle: accumulate reciprocals with math.fsum on the device conductances
    expected = 1.0 / math.fsum(m.conductance for m in b.memristors)
    assert feedback_resistance(b) == pytest.approx(expected, rel=1e-12)


def test_output_voltage_example():
    assert output_voltage(bank([12e3, 12e3])).v_out == pytest.approx(0.5, rel=1e-12)


def test_cryo_targets_give_sweep_endpoints():
    for r, v in ((32e3, 0.4), (52e3, 0.65)):
        b = bank([r, r], v_in=0.075, regime=TemperatureRegime.cryo())
        assert output_voltage(b).v_out == pytest.approx(v, rel=1e-12)


def test_output_clamps_to_headroom():
    out = output_voltage(bank([1e6, 1e6])).v_out
    assert out == pytest.approx(IDEAL.v_dd - IDEAL.output_headroom)


@settings(max_examples=200)
@given(
    rs=st.lists(st.floats(100.0, 1e7), min_size=1, max_size=8),
    v_in=st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 1e-6),
)
def test_output_never_exceeds_usable_swing(rs, v_in):
    b = bank(rs, amp=AmplifierModel(), v_in=v_in)
    lo, hi = b.amplifier.output_range
    s = output_voltage(b)
    assert lo <= s.v_out <= hi
    assert b.amplifier.v_ss <= s.v_out <= b.amplifier.v_dd


@given(r1=st.floats(1e3, 5e4), r2=st.floats(1e3, 5e4))
def test_output_monotone_in_feedback_resistance(r1, r2):
    lo, hi = sorted((r1, r2))
    assert output_voltage(bank([lo])).v_out <= output_voltage(bank([hi])).v_out


@given(rs=st.lists(st.floats(1e3, 5e4), min_size=1, max_size=6), v_in=st.floats(0.01, 0.1))
def test_round_trip_identity(rs, v_in):
    b = bank(rs, v_in=v_in)
    r_mem = feedback_resistance(b)
    v_out = output_voltage(b).v_out
    assert v_out * b.r_in / v_in == pytest.approx(r_mem, rel=1e-12)


def test_supply_current_includes_load():
    b = bank([12e3, 12e3])
    s = output_voltage(b)
    assert s.supply_current == pytest.approx(1e-3 + 0.25 / 6e3, rel=1e-12)


# -- switch matrix -----------------------------------------------------------


def test_switch_round_trip_leaves_output_unchanged():
    b = bank([11e3, 13e3])
    before = output_voltage(b)
    b2 = set_switch_state(set_switch_state(b, SwitchMatrixState.program(0)),
                          SwitchMatrixState.feedback())
    assert output_voltage(b2) == before
    assert b2.memristors == b.memristors


def test_switch_bounds_and_mode_guard():
    b = bank([11e3, 13e3])
    with pytest.raises(IndexError):
        set_switch_state(b, SwitchMatrixState.program(2))
    with pytest.raises(IndexError):
        set_switch_state(b, SwitchMatrixState.program(-1))
    opened = set_switch_state(b, SwitchMatrixState.program(1))
    with pytest.raises(SwitchStateError):
        output_voltage(opened)
    with pytest.raises(SwitchStateError):
        feedback_resistance(opened)
    with pytest.raises(SwitchStateError):
        measure_output(opened, 1.0, 0.1)


def test_switch_state_invariants():
    with pytest.raises(ValueError):
        SwitchMatrixState("feedback", None, "apmu")
    with pytest.raises(ValueError):
        SwitchMatrixState("program", None, "apmu")
    assert SwitchMatrixState.program(3).top_electrode == "apmu"


def test_bank_validation():
    with pytest.raises(ValueError):
        SourceBank((), 3e3, IDEAL, 0.25, TemperatureRegime.room())
    with pytest.raises(ValueError):
        bank([1e4], r_in=0.0)
    with pytest.raises(ValueError):
        bank([1e4], v_in=5.0)


# -- time series -------------------------------------------------------------------


def test_noiseless_trace_is_constant():
    samples = measure_output(bank([12e3, 12e3]), 10.0, 0.5)
    assert len(samples) == 21
    assert {s.v_out for s in samples} == {samples[0].v_out}
    assert [s.timestamp for s in samples] == [k * 0.5 for k in range(21)]


def test_trace_rejects_bad_timing():
    with pytest.raises(ValueError):
        measure_output(bank([1e4]), 1.0, 0.0)
    with pytest.raises(ValueError):
        measure_output(bank([1e4]), 0.05, 0.1)


def test_drift_raises_output_over_time():
    b = bank([12e3, 12e3], drift_rate=1e-4)
    samples, drifted = measure_output_trace(b, 100.0, 1.0)
    assert samples[-1].v_out > samples[0].v_out
    assert drifted.memristors[0].conductance == pytest.approx(
        (1 / 12e3) * (1 - 1e-4) ** 100, rel=1e-9
    )


# -- power ---------------------------------------------------------------------------


def test_power_amplifier_term_cryo():
    amp = AmplifierModel(v_dd=3.0, v_ss=-3.0, idle_current_table={300.0: 1.66e-3})
    b = SourceBank((device(1e9, g_min=1e-10),), 3e3, amp, 1e-6, TemperatureRegime.cryo())
    assert power_draw(b).amplifier == pytest.approx(10e-3, rel=0.01)


def test_power_feedback_term():
    # v_out = 0.65 V requires R_mem = 26 kOhm at v_in = 75 mV, r_in = 3 kOhm
    b = bank([52e3, 52e3], v_in=0.075)
    p = power_draw(b)
    assert output_voltage(b).v_out == pytest.approx(0.65, rel=1e-12)
    assert p.feedback == pytest.approx((0.65 - 0.075) ** 2 / 26e3, rel=1e-12)
    assert p.feedback == pytest.approx(12.7e-6, rel=0.01)
    assert p.total == pytest.approx(p.amplifier + p.feedback)


def test_power_idle_room():
    b = SourceBank((device(1e9, g_min=1e-10),), 3e3, AmplifierModel(), 1e-6,
                   TemperatureRegime.room())
    assert power_draw(b).amplifier == pytest.approx(5.4e-3, rel=1e-3)


# -- bare TIA --------------------------------------------------------------------------


def test_tia_transfer_gain_plateau():
    amp = AmplifierModel(offset=0.0)
    assert tia_transfer(amp, 300.0, 2e3, 1e3, 0.5) == pytest.approx(1.0)
    assert tia_transfer(amp, 1.2, 2e3, 1e3, 0.5) == pytest.approx(0.84)
    assert tia_transfer(amp, 1.2, 2e3, 1e3, 5.0) == pytest.approx(amp.output_range[1])


def test_nonlinear_feedback_solves_fixed_point():
    b = bank([12e3, 12e3], iv_nonlinearity=0.5)
    v = output_voltage(b).v_out
    g = sum(m.apparent_conductance(v - b.v_in) for m in b.memristors)
    assert v == pytest.approx(b.v_in / (b.r_in * g), rel=1e-12)
    assert v < 0.5
