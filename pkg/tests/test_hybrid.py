import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_pure
from qmirror import fock
from qmirror.hybrid import (
    HybridDensity,
    HybridPure,
    StateError,
    apply_mode_phase,
    apply_qubit_gate,
    check_density,
    check_qubit_density,
    coherent_overlap,
    dumps,
    inner_product,
    loads,
    merge,
    mix,
    normalize,
    reduce_to_qubit,
    reduce_to_qubits,
    to_density,
    trace,
)

X = np.array([[0, 1], [1, 0]])
Z = np.diag([1, -1])
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)

amplitude = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


def ket(key, modes, coeff=1.0):
    return HybridPure.from_branches(len(key), len(modes), [(key, modes, coeff)])


# -- coherent_overlap -----------------------------------------------------------

@given(amplitude)
def test_overlap_with_itself_is_one(a):
    assert abs(coherent_overlap(a, a) - 1) < 1e-12


@given(amplitude)
def test_overlap_with_vacuum(a):
    assert abs(coherent_overlap(a, 0) - np.exp(-abs(a) ** 2 / 2)) < 1e-12


@given(amplitude)
def test_cat_branch_overlap(a):
    assert abs(coherent_overlap(a, -a) - np.exp(-2 * abs(a) ** 2)) < 1e-12


def test_overlap_matches_fock_oracle():
    N = fock.default_truncation(9)
    for a, b in [(1 + 1j, 0.5), (-2, 2j), (3, 2.5 - 0.5j)]:
        ref = np.vdot(fock.coherent_fock(b, N), fock.coherent_fock(a, N))
        assert abs(coherent_overlap(a, b) - ref) < 1e-8


# -- inner products and normalization ---------------------------------------------

def test_inner_product_orthogonal_keys():
    assert inner_product(ket((0, 1), [1.0]), ket((1, 0), [1.0])) == 0


def test_inner_product_reduces_to_overlap():
    a = 1.3 - 0.4j
    assert abs(inner_product(ket((0,), [a]), ket((0,), [-a])) - np.exp(-2 * abs(a) ** 2)) < 1e-14


def test_inner_product_dimension_mismatch():
    with pytest.raises(StateError):
        inner_product(ket((0,), [1.0]), ket((0,), [1.0, 0.0]))


def test_normalize_scaled_branch():
    s = normalize(ket((0,), [0.7], 2.0))
    assert abs(s.coeffs[0] - 1) < 1e-15


def test_normalize_cat():
    a = 1.1
    cat = HybridPure.from_branches(0, 1, [((), [a], 1.0), ((), [-a], 1.0)])
    s = normalize(cat)
    expected = 1 / np.sqrt(2 + 2 * np.exp(-2 * a * a))
    assert np.allclose(s.coeffs, expected, atol=1e-14)
    assert abs(trace(s) - 1) < 1e-12


def test_normalize_zero_state_errors():
    with pytest.raises(StateError):
        normalize(ket((0,), [1.0], 0.0))


# -- merge -------------------------------------------------------------------------

def test_merge_sums_duplicates():
    s = HybridPure.from_branches(1, 1, [((0,), [1.0], 0.3), ((0,), [1.0], 0.2)])
    m = merge(s)
    assert m.num_branches == 1 and abs(m.coeffs[0] - 0.5) < 1e-15


def test_merge_drops_zero_coefficients():
    s = HybridPure.from_branches(1, 1, [((0,), [1.0], 0.0), ((1,), [1.0], 1.0)])
    assert merge(s).num_branches == 1


def test_merge_keeps_orthogonal_keys():
    s = HybridPure.from_branches(1, 1, [((0,), [1.0], 0.5), ((1,), [1.0], 0.5)])
    assert merge(s).num_branches == 2


def test_merge_negative_tolerance_errors():
    with pytest.raises(StateError):
        merge(ket((0,), [1.0]), tol=-1)


@given(st.integers(0, 2**31 - 1))
def test_merge_preserves_inner_products(seed):
    rng = np.random.default_rng(seed)
    s = random_pure(rng, 1, 2, 5)
    # duplicate half the branches with perturbations inside the tolerance
    keys = np.concatenate([s.keys, s.keys[:2]])
    amps = np.concatenate([s.amps, s.amps[:2] + 1e-14])
    coeffs = np.concatenate([s.coeffs, rng.standard_normal(2)])
    dup = HybridPure(1, 2, keys, amps, coeffs)
    other = random_pure(rng, 1, 2, 3)
    assert abs(inner_product(merge(dup), other) - inner_product(dup, other)) < 1e-12
    assert merge(dup).num_branches <= s.num_branches


# -- gates and phases ----------------------------------------------------------------

def test_sigma_x_flips_key():
    s = apply_qubit_gate(ket((0,), [0.8]), 0, X)
    assert s.branches[0].key == (1,)


def test_sigma_z_signs_excited_branch():
    s = HybridPure.product(qubits=[(0.6, 0.8)])
    out = apply_qubit_gate(s, 0, Z)
    assert np.allclose(reduce_to_qubit(out, 0), np.outer([0.6, -0.8], [0.6, -0.8]))


def test_hadamard_on_zero():
    out = apply_qubit_gate(HybridPure.product(qubits=[(1, 0)]), 0, H)
    assert np.allclose(reduce_to_qubit(out, 0), 0.5 * np.ones((2, 2)), atol=1e-15)


def test_non_unitary_gate_rejected():
    with pytest.raises(StateError):
        apply_qubit_gate(ket((0,), [1.0]), 0, np.diag([1, 0.5]))


def test_register_out_of_range():
    with pytest.raises(StateError):
        apply_qubit_gate(ket((0,), [1.0]), 1, X)


def test_mode_phase_identity_and_pi():
    s = ket((0,), [1.2 + 0.3j])
    assert apply_mode_phase(s, 0, 0.0).amps[0, 0] == s.amps[0, 0]
    assert abs(apply_mode_phase(s, 0, np.pi).amps[0, 0] + s.amps[0, 0]) < 1e-15


def test_mode_phase_out_of_range():
    with pytest.raises(StateError):
        apply_mode_phase(ket((0,), [1.0]), 1, 0.1)


@given(st.integers(0, 2**31 - 1), st.floats(-7, 7))
def test_unitaries_preserve_norm(seed, theta):
    rng = np.random.default_rng(seed)
    s = random_pure(rng, 2, 2, 6)
    q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    out = apply_mode_phase(apply_qubit_gate(s, 1, q), 1, theta)
    assert abs(trace(out) - 1) < 1e-12


# -- densities and reductions ---------------------------------------------------------

@given(st.lists(amplitude, min_size=1, max_size=8))
def test_gram_matrix_is_psd(amps):
    s = HybridPure(0, 1, np.zeros((len(amps), 0)), [[a] for a in amps], np.ones(len(amps)))
    assert np.linalg.eigvalsh(s.gram()).min() >= -1e-10


def test_reduce_product_state():
    psi = np.array([0.6, 0.8j])
    s = HybridPure.product(qubits=[psi], modes=[1.5])
    assert np.allclose(reduce_to_qubit(s, 0), np.outer(psi, psi.conj()), atol=1e-15)


def test_reduce_bell_pair_is_maximally_mixed():
    bell = HybridPure.from_branches(2, 0, [((0, 0), [], 1), ((1, 1), [], 1)])
    assert np.allclose(reduce_to_qubit(normalize(bell), 0), np.eye(2) / 2)


def test_reduce_channel_state_matches_fock():
    a = 1.4
    s = normalize(HybridPure.from_branches(1, 2, [((0,), [a, 0], 1), ((1,), [0, -a], 1)]))
    expected = np.array([[0.5, 0.5 * np.exp(-a * a)], [0.5 * np.exp(-a * a), 0.5]])
    assert np.allclose(reduce_to_qubit(s, 0), expected, atol=1e-14)
    N = fock.default_truncation(a * a)
    ref = fock.partial_trace(fock.embed(to_density(s), N), fock.dims_for(1, 2, N), [0])
    assert np.max(np.abs(reduce_to_qubit(s, 0) - ref)) < 1e-8


@given(st.integers(0, 2**31 - 1))
def test_reduction_is_a_qubit_density(seed):
    s = random_pure(np.random.default_rng(seed), 2, 2, 6)
    check_qubit_density(reduce_to_qubit(s, 1))
    assert abs(np.trace(reduce_to_qubits(s, [0, 1])) - 1) < 1e-10


@given(st.integers(0, 2**31 - 1))
def test_inner_products_and_reductions_match_fock(seed):
    rng = np.random.default_rng(seed)
    s1, s2 = random_pure(rng, 1, 2, 6), random_pure(rng, 1, 2, 6)
    N = fock.default_truncation(9)
    v1, v2 = fock.embed(s1, N), fock.embed(s2, N)
    assert abs(inner_product(s1, s2) - np.vdot(v1, v2)) < 1e-8
    m = v1.reshape(2, -1)
    ref = m @ m.conj().T
    assert np.max(np.abs(reduce_to_qubit(s1, 0) - ref)) < 1e-8


def test_mix_and_check_density():
    s1, s2 = ket((0,), [1.0]), ket((1,), [-1.0])
    rho = mix([(0.25, s1), (0.75, s2)])
    check_density(rho)
    assert np.allclose(reduce_to_qubit(rho, 0), np.diag([0.25, 0.75]))


def test_check_density_rejects_negative():
    rho = HybridDensity(1, 0, [[0], [1]], np.zeros((2, 0)), np.diag([1.5, -0.5]))
    with pytest.raises(StateError):
        check_density(rho)


# -- serialization ---------------------------------------------------------------------

@given(st.integers(0, 2**31 - 1))
def test_json_round_trip_is_bit_exact(seed):
    rng = np.random.default_rng(seed)
    s = random_pure(rng, 2, 2, 4)
    back = loads(dumps(s))
    assert np.array_equal(back.coeffs, s.coeffs) and np.array_equal(back.amps, s.amps)
    rho = to_density(s)
    back = loads(dumps(rho))
    assert np.array_equal(back.coeff_matrix, rho.coeff_matrix)


def test_json_layout():
    data = json.loads(dumps(ket((0, 1), [1 + 2j], 0.5)))
    assert data["branches"] == [{"key": "01", "modes": [[1.0, 2.0]], "coeff": [0.5, 0.0]}]
    assert data["num_qubits"] == 2 and data["num_modes"] == 1
