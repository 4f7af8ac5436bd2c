import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonrecip.design import SCHEME_B_LOOP, SCHEME_C_LOOP, SchemeC, converter, scheme_b
from nonrecip.system import (
    COHERENT,
    Coupling,
    Mode,
    SystemSpec,
    ValidationError,
    cavity,
    cooperativity,
    gauge_shift,
    mechanics,
    rate_for_cooperativity,
    synthetic_flux,
    validate,
    wrap_phase,
)


def _converter_spec(**coupling_overrides):
    c2 = dict(first="a2", second="b", rate=0.5, phase=0.0, name="g2")
    c2.update(coupling_overrides)
    return SystemSpec(
        (cavity("a1", 1.0), cavity("a2", 1.0), mechanics("b", 1e-3)),
        (Coupling("a1", "b", 0.5, name="g1"), Coupling(**c2)),
    )


def _messages(spec):
    with pytest.raises(ValidationError) as info:
        validate(spec)
    return str(info.value)


def test_valid_converter():
    system = validate(_converter_spec())
    assert [m.id for m in system.modes] == ["a1", "a2", "b"]
    assert system.mode("b").is_mechanical
    assert [c.name for c in system.couplings] == ["g1", "g2"]


def test_dangling_endpoint_names_the_id():
    assert "'b2'" in _messages(_converter_spec(second="b2"))


def test_kind_mismatch_between_two_cavities():
    msg = _messages(_converter_spec(first="a1", second="a2"))
    assert "optomechanical coupling must join" in msg


def test_coherent_coupling_between_cavities_is_allowed():
    spec = _converter_spec()
    spec = SystemSpec(spec.modes, spec.couplings + (Coupling("a1", "a2", 0.1, kind=COHERENT),))
    assert validate(spec).couplings[-1].name == "a1-a2"


@pytest.mark.parametrize("mode, fragment", [
    (Mode("x", kappa_ex=-1.0), "negative value"),
    (Mode("x"), "zero total decay"),
    (Mode("x", kind="mechanical", kappa_ex=1.0, kappa_0=1.0), "cannot have an external port"),
    (Mode("x", kind="phonon", kappa_ex=1.0), "unknown mode kind"),
])
def test_mode_rules(mode, fragment):
    assert fragment in _messages(SystemSpec((mode,)))


def test_duplicate_ids_and_self_loop():
    spec = SystemSpec((cavity("a", 1.0), cavity("a", 1.0)), (Coupling("a", "a", 1.0, kind=COHERENT),))
    msg = _messages(spec)
    assert "duplicate mode id 'a'" in msg and "endpoints must differ" in msg


def test_negative_rate_and_missing_rate():
    assert "invalid rate" in _messages(_converter_spec(rate=-0.1))
    assert "missing coupling rate" in _messages(_converter_spec(rate=None))


def test_disconnected_graph():
    spec = SystemSpec((cavity("a1", 1.0), cavity("a2", 1.0)))
    assert "not connected" in _messages(spec)


def test_every_violation_is_reported():
    spec = SystemSpec((cavity("a", -1.0), cavity("a", 1.0)), (Coupling("a", "zz", -1.0),))
    with pytest.raises(ValidationError) as info:
        validate(spec)
    assert len(info.value.violations) >= 3


def test_g0_and_photon_number():
    system = validate(_converter_spec(rate=None, g0=0.01, n_c=2500.0))
    assert system.coupling("g2").rate == pytest.approx(0.5, rel=1e-12)
    validate(_converter_spec(rate=0.5 * (1 + 1e-13), g0=0.01, n_c=2500.0))
    assert "disagrees" in _messages(_converter_spec(rate=0.5 * (1 + 1e-9), g0=0.01, n_c=2500.0))
    assert "together" in _messages(_converter_spec(g0=0.01))


def test_phase_wrapped_into_half_open_interval():
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(math.pi) == pytest.approx(math.pi)
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    system = validate(_converter_spec(phase=7.0))
    assert system.coupling("g2").phase == pytest.approx(7.0 - 2 * math.pi)


def test_duplicate_coupling_names_are_made_unique():
    spec = _converter_spec(name="g1")
    assert [c.name for c in validate(spec).couplings] == ["g1", "g1#2"]


# --- cooperativity ---------------------------------------------------------

def test_cooperativity_unit_example():
    spec = SystemSpec((cavity("a", 4.0), mechanics("b", 1.0)), (Coupling("a", "b", 1.0),))
    assert cooperativity(0, spec) == pytest.approx(1.0, rel=1e-12)


def test_coherent_cooperativity_and_zero_link():
    spec = scheme_b(1.0, 1.0, 2.5, 0.3, kappa1=1.0, kappa2=2.0)
    assert cooperativity("J", spec) == pytest.approx(2.5, rel=1e-12)
    assert cooperativity("J", scheme_b(1.0, 1.0, 0.0, 0.0)) == 0.0


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.1, 10))
def test_cooperativity_scaling(g, kappa, gamma, s):
    def coop(rate, k, gm):
        return cooperativity(0, SystemSpec((cavity("a", k), mechanics("b", gm)),
                                           (Coupling("a", "b", rate),)))
    base = coop(g, kappa, gamma)
    assert base == pytest.approx(4 * g * g / (kappa * gamma), rel=1e-12)
    assert coop(s * g, kappa, gamma) == pytest.approx(s * s * base, rel=1e-12)
    assert coop(g, s * kappa, gamma) == pytest.approx(base / s, rel=1e-12)
    assert coop(g, kappa, s * gamma) == pytest.approx(base / s, rel=1e-12)


@given(st.floats(0, 100), st.floats(1e-3, 10), st.floats(1e-6, 10))
def test_rate_for_cooperativity_round_trip(c, k1, k2):
    spec = SystemSpec((cavity("a", k1), mechanics("b", k2)),
                      (Coupling("a", "b", rate_for_cooperativity(c, k1, k2)),))
    assert cooperativity(0, spec) == pytest.approx(c, rel=1e-12, abs=1e-300)


# --- synthetic flux ---------------------------------------------------------

def test_flux_examples():
    # phi1 = phi2 = 0 and coherent phase pi/2 give a quarter-turn loop phase
    spec = scheme_b(1, 1, 1, flux=0.0)
    spec = SystemSpec(spec.modes, spec.couplings[:2]
                      + (Coupling("a1", "a2", 0.5, math.pi / 2, kind=COHERENT, name="J"),))
    assert synthetic_flux(spec, ["J", "g2", "g1"]) == pytest.approx(math.pi / 2, abs=1e-12)
    assert synthetic_flux(spec, list(SCHEME_B_LOOP)) == pytest.approx(-math.pi / 2, abs=1e-12)


def test_flux_on_trivial_loop_is_zero():
    assert synthetic_flux(scheme_b(1, 1, 1, 0.0), SCHEME_B_LOOP) == 0.0


def test_open_path_is_rejected():
    with pytest.raises(ValueError, match="do not close|does not continue"):
        synthetic_flux(converter(1, 1), ["g1", "g2"])


def test_builders_place_the_requested_flux():
    assert synthetic_flux(scheme_b(1, 1, 1, 0.9), SCHEME_B_LOOP) == pytest.approx(0.9, abs=1e-12)
    assert synthetic_flux(SchemeC(flux=-2.1).system(), SCHEME_C_LOOP) == pytest.approx(-2.1, abs=1e-12)


def test_gauge_shift_example():
    spec = scheme_b(1, 1, 1, 1.1)
    shifted = gauge_shift(spec, "a2", 0.7)
    assert synthetic_flux(shifted, SCHEME_B_LOOP) == pytest.approx(1.1, abs=1e-12)
    assert shifted.coupling("J").phase != spec.couplings[2].phase


phases = st.floats(-math.pi, math.pi)


@given(phases, phases, phases, phases, st.sampled_from(["a1", "a2", "b1", "b2"]), st.floats(-10, 10))
def test_flux_gauge_invariance(p11, p21, p12, p22, mode, angle):
    spec = SchemeC(flux=p22).system()
    spec = SystemSpec(spec.modes, tuple(
        Coupling(c.first, c.second, c.rate, {"g11": p11, "g21": p21, "g12": p12, "g22": p22}[c.name],
                 name=c.name) for c in spec.couplings))
    before = synthetic_flux(spec, SCHEME_C_LOOP)
    after = synthetic_flux(gauge_shift(spec, mode, angle), SCHEME_C_LOOP)
    assert math.remainder(after - before, 2 * math.pi) == pytest.approx(0.0, abs=1e-12)


@given(st.lists(st.floats(-20, 20), min_size=2, max_size=2), st.floats(0, 5), st.floats(1e-3, 5))
def test_validate_is_idempotent(phs, rate, kappa):
    spec = SystemSpec((cavity("a1", kappa), cavity("a2", 1.0), mechanics("b", 1e-2)),
                      (Coupling("a1", "b", rate, phs[0]), Coupling("a2", "b", rate, phs[1])))
    once = validate(spec)
    twice = validate(once)
    assert once == twice
    assert [c.name for c in once.couplings] == [c.name for c in twice.couplings]
