"""Propagation noise: relative optical-path phase and photon loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hybrid import HybridDensity, HybridState, StateError, apply_mode_phase, merge, to_density

HALF_LOSS_KM = 32.96
GAMMA_HZ = 6.3e3
LIGHT_SPEED_KM_S = 2.998e5


def eta_from_distance(length_km: float, half_loss_km: float = HALF_LOSS_KM) -> float:
    """Transmission efficiency of a fibre that halves the intensity every ``half_loss_km``."""
    if length_km < 0 or half_loss_km <= 0:
        raise StateError("distance must be >= 0 and half-loss length > 0")
    return float(2.0 ** (-length_km / half_loss_km))


def eta_from_gamma(gamma: float, length_km: float, speed_km_s: float = LIGHT_SPEED_KM_S) -> float:
    """``exp(-gamma t)`` for the time of flight over ``length_km``."""
    if gamma < 0 or length_km < 0 or speed_km_s <= 0:
        raise StateError("gamma and distance must be non-negative")
    return float(np.exp(-gamma * length_km / speed_km_s))


@dataclass(frozen=True)
class LossConfig:
    """Loss along one propagation leg.

    Give ``eta`` directly, or ``distance_km`` (mapped through the half-loss
    length, or through ``gamma`` when that is set).
    """

    eta: float | None = None
    gamma: float | None = None
    distance_km: float | None = None
    half_loss_km: float = HALF_LOSS_KM

    def __post_init__(self):
        if self.eta is None and self.distance_km is None:
            raise StateError("LossConfig needs eta or distance_km")
        if self.eta is not None and not 0.0 <= self.eta <= 1.0:
            raise StateError(f"eta must lie in [0, 1], got {self.eta}")
        if self.distance_km is not None and self.distance_km < 0:
            raise StateError("distance must be non-negative")
        if self.gamma is not None and self.gamma < 0:
            raise StateError("gamma must be non-negative")

    @property
    def efficiency(self) -> float:
        if self.eta is not None:
            return float(self.eta)
        if self.gamma is not None:
            return eta_from_gamma(self.gamma, self.distance_km)
        return eta_from_distance(self.distance_km, self.half_loss_km)


def apply_loss(state: HybridState, mode: int, eta: float) -> HybridDensity:
    """Amplitude damping of one mode with transmission ``eta``.

    On each branch pair ``|a><b|`` of the damped mode the channel gives
    ``<sqrt(1-eta) b|sqrt(1-eta) a> |sqrt(eta) a><sqrt(eta) b|``.
    """
    if not 0.0 <= eta <= 1.0:
        raise StateError(f"eta must lie in [0, 1], got {eta}")
    if not 0 <= mode < state.num_modes:
        raise StateError(f"mode {mode} out of range for {state.num_modes} modes")
    rho = to_density(state)
    a = rho.amps[:, mode]
    lost = 1.0 - eta
    env = np.exp(-0.5 * lost * (np.abs(a)[:, None] ** 2 + np.abs(a)[None, :] ** 2)
                 + lost * a[:, None] * np.conj(a)[None, :])
    amps = rho.amps.copy()
    amps[:, mode] *= np.sqrt(eta)
    return merge(HybridDensity(rho.num_qubits, rho.num_modes, rho.keys, amps,
                               rho.coeff_matrix * env))


def apply_phase_mismatch(state: HybridState, delta: float, mode: int = 0) -> HybridState:
    """Relative optical-path phase, put on the first mode by convention."""
    return apply_mode_phase(state, mode, delta)
