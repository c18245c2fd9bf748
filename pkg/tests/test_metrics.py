import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmirror.channels import LossConfig, eta_from_distance
from qmirror.hybrid import StateError
from qmirror.metrics import (
    CLASSICAL_LIMIT,
    PAULI_EIGENSTATES,
    average_fidelity_2design,
    average_fidelity_mc,
    closed_form_delta,
    closed_form_eta,
    closed_form_ideal,
    closed_form_mirror,
    design_average,
    fidelity,
    haar_states,
    outcome_averaged_fidelity,
    success_probability_closed,
)
from qmirror.mirror import MirrorParams
from qmirror.protocols import NoiseConfig, ProtocolOutcome, ProtocolResult, teleport

A_GRID = (0.25, 1.0, 1.75, 4.0, 9.0)
unit = st.floats(0, 1)
mean_photons = st.floats(0, 30)
phase = st.floats(-2 * np.pi, 2 * np.pi)


def mirror_coeffs(eps, phi):
    p = MirrorParams(eps, phi)
    return p.r, p.t


# -- fidelity -------------------------------------------------------------------------

def test_fidelity_examples():
    psi = np.array([0.6, 0.8j])
    assert abs(fidelity(psi, np.outer(psi, psi.conj())) - 1) < 1e-15
    assert fidelity((1, 0), np.diag([0, 1])) == 0
    assert abs(fidelity(psi, np.eye(2) / 2) - 0.5) < 1e-15


def test_fidelity_rejects_bad_input():
    with pytest.raises(StateError):
        fidelity((1, 1), np.eye(2) / 2)
    with pytest.raises(StateError):
        fidelity((1, 0), np.eye(3))


def test_pauli_eigenstates_form_a_2design():
    # frame potential of a 2-design equals the Haar value 1/3
    overlaps = [abs(np.vdot(a, b)) ** 4 for a in PAULI_EIGENSTATES for b in PAULI_EIGENSTATES]
    assert abs(np.mean(overlaps) - 1 / 3) < 1e-15


def test_constant_output_averages_to_half():
    plus = np.full((2, 2), 0.5, dtype=complex)

    def constant(psi, alpha, noise):
        return ProtocolResult("constant", tuple(psi), (ProtocolOutcome((), 1.0, "I", plus, False),))

    assert abs(average_fidelity_2design(constant, 1.0) - 0.5) < 1e-15


def test_unknown_protocol():
    with pytest.raises(StateError):
        average_fidelity_2design("telepathy", 1.0)


# -- closed forms ----------------------------------------------------------------------

def test_ideal_values():
    assert closed_form_ideal(0) == 0.5
    assert abs(closed_form_ideal(np.log(1.5)) - CLASSICAL_LIMIT) < 1e-15
    assert abs(closed_form_ideal(4) - 0.990842) < 5e-7


def test_success_probability_values():
    assert success_probability_closed(0) == 0
    assert abs(success_probability_closed(4) - 0.981684) < 5e-7
    assert success_probability_closed(800) == 1


def test_negative_mean_photons():
    with pytest.raises(StateError):
        closed_form_ideal(-1)


@given(mean_photons)
def test_delta_zero_is_ideal(A):
    assert abs(closed_form_delta(A, 0) - closed_form_ideal(A)) < 1e-15


def test_delta_pi_limit():
    assert abs(closed_form_delta(60, np.pi) - (closed_form_ideal(60) - 1 / 3)) < 1e-15


@given(mean_photons)
def test_eta_one_is_ideal(A):
    assert abs(closed_form_eta(A, 1) - closed_form_ideal(A)) < 1e-15


def test_eta_limit():
    # A grows faster than 1/eta
    for eta in (1e-2, 1e-3, 1e-4):
        assert abs(closed_form_eta(1e3 / eta, eta) - 2 / 3) < 1e-12
    # exactly at eta = 0 nothing arrives and only the failure branch is left
    assert closed_form_eta(1e4, 0) == 0.5


def test_eta_distance_anchor():
    assert abs(closed_form_eta(4, eta_from_distance(1.6)) - 0.95) < 5e-3


def test_eta_out_of_range():
    with pytest.raises(StateError):
        closed_form_eta(1, 1.1)


@given(mean_photons)
def test_mirror_collapses_to_ideal(A):
    assert abs(closed_form_mirror(A, -1, 0, -1, 0) - closed_form_ideal(A)) < 1e-12


@given(phase, phase, phase, phase)
def test_mirror_at_zero_photons(e1, p1, e2, p2):
    assert abs(closed_form_mirror(0, *mirror_coeffs(e1, p1), *mirror_coeffs(e2, p2)) - 0.5) < 1e-15


@given(mean_photons)
def test_ideal_bounds(A):
    assert 0.5 - 1e-12 <= closed_form_ideal(A) <= 1


@given(mean_photons, unit)
def test_eta_bounds(A, eta):
    assert 0.5 - 1e-12 <= closed_form_eta(A, eta) <= 1


# The delta and mirror forms can dip below 1/2 (see the ledger); only [0, 1] holds.
@given(mean_photons, phase)
def test_delta_bounds(A, delta):
    assert 0 <= closed_form_delta(A, delta) <= 1


@given(mean_photons, phase, phase, phase, phase)
def test_mirror_bounds(A, e1, p1, e2, p2):
    assert 0 <= closed_form_mirror(A, *mirror_coeffs(e1, p1), *mirror_coeffs(e2, p2)) <= 1


def test_delta_form_dips_below_half():
    assert closed_form_delta(9, 0.356) < 0.48


# -- engine agreement ----------------------------------------------------------------------

@pytest.mark.parametrize("A", A_GRID)
@pytest.mark.parametrize("protocol", ["teleport", "state_transfer"])
def test_engine_matches_ideal_form(protocol, A):
    avg = design_average(protocol, np.sqrt(A))
    assert abs(avg.fidelity - closed_form_ideal(A)) < 1e-9
    assert abs(avg.success_probability - success_probability_closed(A)) < 1e-12


def test_engine_matches_delta_example():
    engine = average_fidelity_2design("teleport", 2.0, NoiseConfig(delta=0.2))
    assert abs(engine - closed_form_delta(4, 0.2)) < 1e-9


@pytest.mark.parametrize("A", [0.5, 3.0, 9.0])
@pytest.mark.parametrize("delta", [0.05, 1.0, np.pi])
def test_engine_matches_delta_form(A, delta):
    for protocol in ("teleport", "state_transfer"):
        engine = average_fidelity_2design(protocol, np.sqrt(A), NoiseConfig(delta=delta))
        assert abs(engine - closed_form_delta(A, delta)) < 1e-9


@pytest.mark.parametrize("A", [0.5, 3.0, 9.0])
@pytest.mark.parametrize("eta", [0.0, 0.3, 0.9])
def test_engine_matches_eta_form(A, eta):
    for protocol in ("teleport", "state_transfer"):
        engine = average_fidelity_2design(protocol, np.sqrt(A), NoiseConfig(loss=LossConfig(eta=eta)))
        assert abs(engine - closed_form_eta(A, eta)) < 1e-9


def test_engine_matches_mirror_form_small_error():
    bob = MirrorParams(0.05, 0.0)
    engine = average_fidelity_2design("teleport", np.sqrt(1.75), NoiseConfig(mirror_bob=bob))
    assert abs(engine - closed_form_mirror(1.75, bob.r, bob.t, -1, 0)) < 1e-6


# -- Monte Carlo ----------------------------------------------------------------------------

def test_haar_states_are_normalized_and_seeded():
    a, b = haar_states(50, 3), haar_states(50, 3)
    assert np.array_equal(a, b)
    assert np.allclose(np.linalg.norm(a, axis=1), 1)


def test_single_sample():
    est = average_fidelity_mc("teleport", 1.0, n_samples=1, seed=11)
    psi = tuple(haar_states(1, 11)[0])
    assert est.stderr == 0
    assert est.mean == outcome_averaged_fidelity(teleport(psi, 1.0))


def test_same_seed_same_estimate():
    noise = NoiseConfig(delta=0.4)
    a = average_fidelity_mc("state_transfer", 1.2, noise, 40, seed=5)
    b = average_fidelity_mc("state_transfer", 1.2, noise, 40, seed=5)
    assert a == b


def test_zero_samples():
    with pytest.raises(StateError):
        average_fidelity_mc("teleport", 1.0, n_samples=0)


@pytest.mark.parametrize("noise", [
    NoiseConfig(delta=0.8),
    NoiseConfig(loss=LossConfig(eta=0.4)),
    NoiseConfig(mirror_bob=MirrorParams(0.4, 0.3), mirror_alice=MirrorParams(0.2, 0.1)),
])
def test_2design_agrees_with_haar_sampling(noise):
    exact = average_fidelity_2design("teleport", 1.1, noise)
    est = average_fidelity_mc("teleport", 1.1, noise, 1000, seed=2024)
    assert abs(est.mean - exact) <= 5 * est.stderr
