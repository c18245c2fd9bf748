"""Fidelities, Haar averages and closed-form reference curves."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .hybrid import StateError
from .protocols import IDEAL, NoiseConfig, ProtocolResult, state_transfer, teleport

CLASSICAL_LIMIT = 2.0 / 3.0

PROTOCOLS: dict[str, Callable[..., ProtocolResult]] = {
    "teleport": teleport,
    "state_transfer": state_transfer,
    "qst": state_transfer,
}

_S = 1 / np.sqrt(2)
# Eigenstates of X, Y, Z: a qubit 2-design.
PAULI_EIGENSTATES = (
    (1.0, 0.0),
    (0.0, 1.0),
    (_S, _S),
    (_S, -_S),
    (_S, 1j * _S),
    (_S, -1j * _S),
)


def fidelity(psi, rho) -> float:
    """<psi|rho|psi> for a normalized qubit and a 2x2 density matrix."""
    psi = np.asarray(psi, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if psi.shape != (2,) or rho.shape != (2, 2):
        raise StateError("fidelity needs a qubit vector and a 2x2 density")
    if abs(np.vdot(psi, psi) - 1) > 1e-10:
        raise StateError("psi must be normalized")
    return float(np.real(psi.conj() @ rho @ psi))


def outcome_averaged_fidelity(result: ProtocolResult) -> float:
    """Probability-weighted fidelity over every outcome, successful or not."""
    psi = np.asarray(result.input_state)
    return float(sum(o.probability * fidelity(psi, o.receiver_state) for o in result.outcomes))


def _resolve(protocol) -> Callable[..., ProtocolResult]:
    if callable(protocol):
        return protocol
    try:
        return PROTOCOLS[protocol]
    except KeyError:
        raise StateError(f"unknown protocol {protocol!r}") from None


class DesignAverage(NamedTuple):
    fidelity: float
    success_probability: float


def design_average(protocol, alpha: complex, noise: NoiseConfig = IDEAL) -> DesignAverage:
    """Haar averages of fidelity and heralded success over the Pauli eigenstates."""
    run = _resolve(protocol)
    results = [run(psi, alpha, noise) for psi in PAULI_EIGENSTATES]
    return DesignAverage(
        float(np.mean([outcome_averaged_fidelity(r) for r in results])),
        float(np.mean([r.success_probability for r in results])),
    )


def average_fidelity_2design(protocol, alpha: complex, noise: NoiseConfig = IDEAL) -> float:
    """Exact Haar-average fidelity from the six Pauli eigenstates."""
    return design_average(protocol, alpha, noise).fidelity


def haar_states(n_samples: int, seed: int) -> np.ndarray:
    """Haar-random qubits from normalized pairs of complex Gaussians."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, 2)) + 1j * rng.standard_normal((n_samples, 2))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


class MonteCarloEstimate(NamedTuple):
    mean: float
    stderr: float


def average_fidelity_mc(protocol, alpha: complex, noise: NoiseConfig = IDEAL,
                        n_samples: int = 1000, seed: int = 0) -> MonteCarloEstimate:
    """Haar-average fidelity by sampling input states."""
    if n_samples < 1:
        raise StateError("n_samples must be >= 1")
    run = _resolve(protocol)
    values = np.array([outcome_averaged_fidelity(run(tuple(psi), alpha, noise))
                       for psi in haar_states(n_samples, seed)])
    stderr = float(values.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return MonteCarloEstimate(float(values.mean()), stderr)


# -- closed forms ---------------------------------------------------------------

def _check_a(mean_photons: float) -> None:
    if mean_photons < 0:
        raise StateError("mean photon number must be non-negative")


def success_probability_closed(mean_photons: float) -> float:
    _check_a(mean_photons)
    return float(-np.expm1(-mean_photons))


def closed_form_ideal(mean_photons: float) -> float:
    _check_a(mean_photons)
    return float(1.0 - 0.5 * np.exp(-mean_photons))


def closed_form_delta(mean_photons: float, delta: float) -> float:
    A = mean_photons
    penalty = 1.0 - np.exp(-A * (1 - np.cos(delta))) * np.cos(A * np.sin(delta))
    return float(closed_form_ideal(A) - penalty / 3.0)


def closed_form_eta(mean_photons: float, eta: float) -> float:
    A = mean_photons
    if not 0.0 <= eta <= 1.0:
        raise StateError("eta must lie in [0, 1]")
    penalty = -np.expm1(-A * (1 - eta)) * (2 + np.exp(-A * eta))
    return float(closed_form_ideal(A) - penalty / 6.0)


def closed_form_mirror(mean_photons: float, r1: complex, t1: complex,
                       r2: complex, t2: complex) -> float:
    """Average teleportation fidelity with leaky mirrors (1 = Bob, 2 = Alice)."""
    A = mean_photons
    _check_a(A)
    cross = r1 * np.conj(r2)
    both = r1 * r2 + t1 * t2
    total = (
        6 - 5 * np.exp(-A)
        - np.exp(-A * abs(both) ** 2)
        + np.exp(-A * abs(t1) ** 2)
        + np.exp(-A * abs(t2) ** 2)
        + 2 * np.exp(-A * (1 - cross.real)) * np.cos(A * cross.imag)
        + 2 * np.exp(-A * (1 - both.real)) * np.cos(A * both.imag)
    )
    return float(total / 12.0)
