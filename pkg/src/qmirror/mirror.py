"""Quantum-mirror transformation: a two-mode scatterer controlled by a qubit.

With the control in |0> both modes are transmitted unchanged.  With the
control in |1> an ideal mirror reflects, swapping the modes with a pi phase:
``(a1, a2) -> (-a2, -a1)``.  An imperfect mirror leaks some light on
reflection and is modelled as the symmetric beam splitter
``(a1, a2) -> (t a1 + r a2, r a1 + t a2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hybrid import HybridState, StateError, apply_conditional_scatter


def mirror_coefficients(epsilon: float, phi: float) -> tuple[complex, complex]:
    """Reflection and transmission amplitudes ``(r, t)`` for angle and phase errors."""
    r = np.cos(np.pi + epsilon) * np.exp(1j * phi)
    t = np.sin(np.pi + epsilon) * np.exp(1j * (phi + np.pi / 2))
    return complex(r), complex(t)


@dataclass(frozen=True)
class MirrorParams:
    """Deviation of one mirror from ideal reflection.

    ``epsilon`` rotates reflection into transmission, ``phi`` adds a phase to
    the reflected (and leaked) light.  ``(0, 0)`` is the ideal mirror.
    """

    epsilon: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and np.isfinite(self.phi)):
            raise StateError("mirror parameters must be finite")

    @classmethod
    def from_transmission(cls, transmission: float, phi: float = 0.0) -> "MirrorParams":
        """Build from the leaked intensity ``1 - |r|^2`` in [0, 1]."""
        if not 0.0 <= transmission <= 1.0:
            raise StateError("mirror transmission must lie in [0, 1]")
        return cls(float(np.arcsin(np.sqrt(transmission))), phi)

    @property
    def r(self) -> complex:
        return mirror_coefficients(self.epsilon, self.phi)[0]

    @property
    def t(self) -> complex:
        return mirror_coefficients(self.epsilon, self.phi)[1]

    @property
    def transmission(self) -> float:
        return 1.0 - abs(self.r) ** 2

    @property
    def is_ideal(self) -> bool:
        return self.epsilon == 0.0 and self.phi == 0.0

    def scatter_matrix(self) -> np.ndarray:
        r, t = self.r, self.t
        return np.array([[t, r], [r, t]], dtype=complex)


IDEAL_MIRROR = MirrorParams()

_IDEAL_SCATTER = np.array([[0, -1], [-1, 0]], dtype=complex)


def _check_unitary(scatter: np.ndarray) -> None:
    if not np.allclose(scatter.conj().T @ scatter, np.eye(2), rtol=0, atol=1e-12):
        raise StateError("mirror scatter matrix is not unitary")


def apply_ideal_mirror(state: HybridState, control: int, mode1: int, mode2: int) -> HybridState:
    return apply_conditional_scatter(state, control, mode1, mode2, _IDEAL_SCATTER)


def apply_mirror(state: HybridState, control: int, mode1: int, mode2: int,
                 params: MirrorParams = IDEAL_MIRROR) -> HybridState:
    if params.is_ideal:
        return apply_ideal_mirror(state, control, mode1, mode2)
    scatter = params.scatter_matrix()
    _check_unitary(scatter)
    return apply_conditional_scatter(state, control, mode1, mode2, scatter)
