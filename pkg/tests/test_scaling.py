import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from memdc.scaling import (
    ENVM_TECHS,
    AmplifierScalingModel,
    EnvmTech,
    ScalingScenario,
    bias_current_for,
    circuit_settings,
    footprint_multiplier,
    max_sources,
    power_curve,
    power_per_source,
    resolution_for,
    scan_rmin,
    tech_rows,
)

AMP = AmplifierScalingModel()
VCM = ScalingScenario(ENVM_TECHS["VCM"])
FTJ = ScalingScenario(ENVM_TECHS["FTJ"])


def test_bias_current_examples():
    assert bias_current_for(AMP, 10e3) == pytest.approx(1e-6)
    assert bias_current_for(AMP, 1e6) == pytest.approx(20e-9)
    assert bias_current_for(AMP, 20e3) == pytest.approx(0.5e-6)
    with pytest.raises(ValueError):
        bias_current_for(AMP, 0.0)


def test_power_per_source_examples():
    assert power_per_source(AMP, 1e-6) == pytest.approx(100e-6, rel=0.05)
    assert power_per_source(AMP, 1e-6) < 100e-6
    assert power_per_source(AMP, 20e-9) == pytest.approx(5e-6, rel=0.05)
    assert power_per_source(AMP, 1e-6) / power_per_source(AMP, 20e-9) == pytest.approx(20.0)
    bare = AmplifierScalingModel(static_power=0.0)
    assert power_per_source(bare, 3e-7) == pytest.approx(bare.stage_current_multiplier * 3e-7 * 6.0)
    with pytest.raises(ValueError):
        power_per_source(AMP, 1e-9)


def test_alternative_floor_calibration():
    alt = AmplifierScalingModel.from_anchors(p_ref=96e-6, p_floor=10e-6)
    assert power_per_source(alt, 20e-9) == pytest.approx(10e-6, rel=1e-12)
    assert power_per_source(alt, 1e-6) == pytest.approx(96e-6, rel=1e-12)
    with pytest.raises(ValueError):
        AmplifierScalingModel.from_anchors(p_ref=96e-6, p_floor=200e-6)


def test_max_sources_examples():
    vcm = max_sources(VCM)
    assert 15_000 <= vcm.sources <= 16_000
    assert vcm.quantum_dots == vcm.sources // 2
    assert max_sources(FTJ).sources == pytest.approx(300_000, rel=0.10)
    micro = max_sources(ScalingScenario(ENVM_TECHS["VCM"], power_per_source_override=1e-6))
    assert micro.sources == 1_500_000
    assert micro.quantum_dots == 750_000


def test_anchors_hold_simultaneously():
    assert 80e-6 <= power_per_source(AMP, 1e-6) <= 100e-6
    assert 15_000 <= max_sources(VCM).sources <= 16_000


def test_max_sources_oracle():
    # exact rational arithmetic on the decimal power value
    p = Fraction(repr(power_per_source(AMP, bias_current_for(AMP, 10e3))))
    assert max_sources(VCM).sources == math.floor(Fraction("1.5") / p) == 15625


@given(k=st.integers(1, 50))
def test_max_sources_linear_in_cooling_power(k):
    base = max_sources(VCM).sources
    scaled = max_sources(ScalingScenario(ENVM_TECHS["VCM"], cooling_power=1.5 * k)).sources
    assert k * base <= scaled <= k * (base + 1)


@given(a=st.floats(1e3, 1e9), b=st.floats(1e3, 1e9))
def test_monotone_in_r_min(a, b):
    lo, hi = sorted((a, b))
    p_lo = power_per_source(AMP, bias_current_for(AMP, lo))
    p_hi = power_per_source(AMP, bias_current_for(AMP, hi))
    assert p_hi <= p_lo
    n_lo = max_sources(ScalingScenario(EnvmTech("x", lo, lo * 10))).sources
    n_hi = max_sources(ScalingScenario(EnvmTech("x", hi, hi * 10))).sources
    assert n_lo <= n_hi


def test_resolution_for():
    assert resolution_for(2) == pytest.approx(10e-3)
    assert resolution_for(3) == pytest.approx(5e-3)
    assert resolution_for(8) == pytest.approx(156.25e-6)
    values = [resolution_for(n) for n in range(1, 20)]
    assert all(b < a for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        resolution_for(0)


def test_scan_reproduces_tech_anchor_rows():
    rows = scan_rmin(VCM, [10e3, 1e6])
    assert rows[0].n_max == max_sources(VCM).sources
    assert rows[1].n_max == max_sources(FTJ).sources
    assert rows[0].i_b == pytest.approx(1e-6)
    assert rows[1].i_b == pytest.approx(20e-9)


def test_scan_single_point_matches_direct_calls():
    (row,) = scan_rmin(VCM, [33e3])
    i_b = bias_current_for(AMP, 33e3)
    assert row.i_b == i_b
    assert row.power == power_per_source(AMP, i_b)
    assert row.n_max == max_sources(ScalingScenario(EnvmTech("x", 33e3, 1e6))).sources


def test_dense_scan_monotone():
    rows = scan_rmin(VCM, np.geomspace(1e3, 1e8, 400))
    assert all(b.power <= a.power for a, b in zip(rows, rows[1:]))
    assert all(b.n_max >= a.n_max for a, b in zip(rows, rows[1:]))
    assert all(b.i_b <= a.i_b for a, b in zip(rows, rows[1:]))


def test_scan_grid_validation():
    with pytest.raises(ValueError):
        scan_rmin(VCM, [])
    with pytest.raises(ValueError):
        scan_rmin(VCM, [1e4, 1e4])
    with pytest.raises(ValueError):
        scan_rmin(VCM, [-1.0, 1e4])


def test_footprint_multiplier():
    assert footprint_multiplier(10e3) == 1.0
    assert footprint_multiplier(50e3) == 4.0
    assert [r.footprint for r in scan_rmin(VCM, [1e4, 1e5])] == [1.0, 4.0]


def test_circuit_settings_couple_r_in():
    settings = circuit_settings(VCM)
    assert settings["r_in"] == pytest.approx(2.5e3)
    assert (settings["r_low"], settings["r_high"]) == (10e3, 100e3)
    assert circuit_settings(FTJ)["r_in"] == pytest.approx(250e3)


def test_tech_rows_and_power_curve():
    rows = tech_rows(VCM, ["VCM", "FTJ"])
    assert [r.tech for r in rows] == ["VCM", "FTJ"]
    assert rows[0].n_max == max_sources(VCM).sources
    assert rows[1].n_max == max_sources(FTJ).sources
    curve = power_curve(VCM, [20e-9, 1e-6])
    assert curve[1].n_max == max_sources(VCM).sources
    assert curve[0].power == pytest.approx(4.8e-6)


def test_model_validation():
    with pytest.raises(ValueError):
        EnvmTech("bad", 1e5, 1e4)
    with pytest.raises(ValueError):
        AmplifierScalingModel(stage_current_multiplier=0.0)
    with pytest.raises(ValueError):
        AmplifierScalingModel(i_b_floor=0.0)
    with pytest.raises(ValueError):
        ScalingScenario(ENVM_TECHS["VCM"], cooling_power=0.0)
    with pytest.raises(ValueError):
        ScalingScenario(ENVM_TECHS["VCM"], gates_per_dot=0)
