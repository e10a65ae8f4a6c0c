import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randdd.errors import (
    PULSE_OVERLAP_POSSIBLE,
    STEP_ORDERING,
    THRESHOLD_OUT_OF_RANGE,
    UNKNOWN_KEY,
    WIDTH_CAN_VANISH,
    ValidationError,
)
from randdd.model import (
    InitialState,
    PulseParams,
    SimConfig,
    SystemParams,
    bath_correlation,
    validate,
    with_overrides,
)


def test_validate_accepts_figure_parameters():
    # tau=0.02, delta=0.4*tau, 20% deviations: 0.012 < 0.016
    pulses = PulseParams(tau=0.02, delta=0.008, phi=0.2, d_tau=0.004, d_delta=0.004)
    bundle = validate(SystemParams(), pulses, SimConfig())
    assert bundle.pulses == pulses


def test_validate_rejects_possible_overlap_at_boundary():
    pulses = PulseParams(tau=0.02, delta=0.008, phi=0.2, d_tau=0.012, d_delta=0.0)
    with pytest.raises(ValidationError) as err:
        validate(SystemParams(), pulses, SimConfig())
    assert err.value.code == PULSE_OVERLAP_POSSIBLE


def test_validate_zero_deviation_regular_case():
    pulses = PulseParams(tau=0.02, delta=0.008, phi=0.2)
    assert validate(SystemParams(), pulses, SimConfig()).pulses.d_tau == 0.0


def test_validate_allow_overlap_downgrades_to_warning():
    pulses = PulseParams(tau=0.02, delta=0.015, phi=0.2, d_tau=0.004, d_delta=0.004)
    with pytest.warns(UserWarning, match=PULSE_OVERLAP_POSSIBLE):
        validate(SystemParams(), pulses, SimConfig(), allow_overlap=True)


def test_validate_is_idempotent():
    pulses = PulseParams(tau=0.02, delta=0.008, phi=0.2, d_tau=0.004)
    bundle = validate(SystemParams(), pulses, SimConfig(), InitialState(0.6, 0.8))
    assert validate(bundle) == bundle


def test_width_can_vanish_guard():
    with pytest.raises(ValidationError) as err:
        validate(SystemParams(), PulseParams(tau=0.1, delta=0.01, phi=0.2, d_delta=0.01), SimConfig())
    assert err.value.code == WIDTH_CAN_VANISH


def test_negative_area_emits_warning():
    pulses = PulseParams(tau=0.02, delta=0.008, phi=0.1, d_phi=0.11)
    with pytest.warns(UserWarning, match="negative"):
        validate(SystemParams(), pulses, SimConfig())


@pytest.mark.parametrize(
    "sim,code",
    [
        (SimConfig(step=0.1, grid_dt=0.01), STEP_ORDERING),
        (SimConfig(threshold=1.0), THRESHOLD_OUT_OF_RANGE),
        (SimConfig(threshold=0.0), THRESHOLD_OUT_OF_RANGE),
    ],
)
def test_sim_config_invariants(sim, code, standard_pulses):
    with pytest.raises(ValidationError) as err:
        validate(SystemParams(), standard_pulses, sim)
    assert err.value.code == code


def test_initial_state_normalization():
    bundle = validate(
        SystemParams(), PulseParams(0.02, 0.008, 0.2), SimConfig(), InitialState(3.0, 4.0)
    )
    assert math.isclose(abs(bundle.init.mu) ** 2 + abs(bundle.init.nu) ** 2, 1.0, abs_tol=1e-12)
    assert math.isclose(bundle.init.mu2, 9.0 / 25.0, rel_tol=1e-12)


def test_from_population():
    s = InitialState.from_population(0.3, rel_phase=0.7)
    assert math.isclose(s.mu2, 0.3, rel_tol=1e-12)
    assert math.isclose(abs(s.nu) ** 2, 0.7, rel_tol=1e-12)


# --- bath correlation -------------------------------------------------------

def test_bath_correlation_equal_times():
    assert bath_correlation(SystemParams(gamma=0.2), 1.3, 1.3) == pytest.approx(0.1, abs=1e-15)


def test_bath_correlation_direct_value():
    # (Gamma=1, gamma=0.5, |t-s|=2) -> 0.25 * e^{-1}
    got = bath_correlation(SystemParams(gamma=0.5), 2.5, 0.5)
    assert got == pytest.approx(0.25 * math.exp(-1.0), rel=1e-14)


@pytest.mark.parametrize("gamma", [1.0, 10.0, 100.0])
def test_bath_correlation_markov_weight(gamma):
    # correlation sharpens as gamma grows but the integrated weight stays Gamma:
    # 2 * int_0^inf (Gamma*gamma/2) e^{-gamma u} du = Gamma
    sys_p = SystemParams(gamma=gamma)
    u = np.linspace(0.0, 60.0 / gamma, 400_001)
    weight = 2.0 * np.trapezoid(bath_correlation(sys_p, u, 0.0), u)
    assert weight == pytest.approx(sys_p.Gamma, rel=1e-6)
    # pointwise value at fixed separation dies off as the memory shrinks
    assert bath_correlation(sys_p, 1.0, 0.0) == pytest.approx(
        0.5 * gamma * math.exp(-gamma), rel=1e-12
    )


@given(
    t=st.floats(-50, 50),
    s=st.floats(-50, 50),
    gamma=st.floats(0.01, 50),
    Gamma=st.floats(0.01, 50),
)
def test_bath_correlation_symmetry(t, s, gamma, Gamma):
    sys_p = SystemParams(Gamma=Gamma, gamma=gamma)
    assert bath_correlation(sys_p, t, s) == bath_correlation(sys_p, s, t)


def test_with_overrides_rejects_unknown_key(standard_pulses):
    bundle = validate(SystemParams(), standard_pulses, SimConfig())
    with pytest.raises(ValidationError) as err:
        with_overrides(bundle, **{"system.bogus": 1.0})
    assert err.value.code == UNKNOWN_KEY


def test_with_overrides_revalidates(standard_pulses):
    bundle = validate(SystemParams(), standard_pulses, SimConfig())
    out = with_overrides(bundle, **{"system.gamma": 0.5, "sim.t_max": 4.0})
    assert out.system.gamma == 0.5 and out.sim.t_max == 4.0
    with pytest.raises(ValidationError):
        with_overrides(bundle, **{"pulses.d_tau": 0.019})
