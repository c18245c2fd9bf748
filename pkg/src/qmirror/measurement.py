"""Projective qubit measurements and on/off photodetection.

Each measurement returns every outcome with its Born probability and the
normalized post-measurement state.  Outcomes with vanishing probability are
left out.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .hybrid import (
    HybridDensity,
    HybridPure,
    HybridState,
    StateError,
    _ket_map,
    _key_match,
    _mode_gram,
    apply_qubit_operator,
    merge,
    normalize,
    to_density,
    trace,
)

# Outcomes below this probability carry no usable post-state.
MIN_PROBABILITY = 1e-13

PLUS_MINUS = (np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2))
COMPUTATIONAL = (np.array([1, 0]), np.array([0, 1]))


@dataclass(frozen=True)
class QubitResult:
    register: int
    index: int
    symbol: str = ""

    def __str__(self) -> str:
        return f"q{self.register}={self.symbol or self.index}"


@dataclass(frozen=True)
class ClickResult:
    mode: int
    click: bool

    def __str__(self) -> str:
        return f"m{self.mode}={'click' if self.click else 'none'}"


Label = Union[QubitResult, ClickResult]


class Outcome(NamedTuple):
    label: Label
    probability: float
    post_state: HybridState


def _check_basis(basis) -> np.ndarray:
    b = np.asarray([np.asarray(v, dtype=complex) for v in basis])
    if b.shape != (2, 2) or not np.allclose(b.conj() @ b.T, np.eye(2), rtol=0, atol=1e-12):
        raise StateError("measurement basis must be two orthonormal qubit vectors")
    return b


def project_qubit(state: HybridState, register: int, vector) -> HybridState:
    """Unnormalized projection of one register onto ``vector``."""
    v = np.asarray(vector, dtype=complex)
    return apply_qubit_operator(state, register, np.outer(v, v.conj()))


def measure_qubit(state: HybridState, register: int, basis=PLUS_MINUS,
                  symbols: Sequence[str] = ("+", "-")) -> list[Outcome]:
    """Measure one register; the post-state keeps the register in the outcome vector."""
    vecs = _check_basis(basis)
    outcomes = []
    for index, v in enumerate(vecs):
        projected = project_qubit(state, register, v)
        p = trace(projected)
        if p > MIN_PROBABILITY:
            label = QubitResult(register, index, symbols[index] if symbols else "")
            outcomes.append(Outcome(label, p, normalize(projected)))
    return outcomes


def no_click(state: HybridState, mode: int) -> HybridState:
    """Unnormalized vacuum projection of one mode."""
    a = state.amps[:, mode]
    amps = state.amps.copy()
    amps[:, mode] = 0.0
    return _ket_map(state, state.keys, amps, np.diag(np.exp(-0.5 * np.abs(a) ** 2)))


def click(state: HybridState, mode: int) -> HybridDensity:
    """Unnormalized ``(1 - P0) rho (1 - P0)`` on one mode."""
    # expanded over the original and vacuum-projected branches
    rho = to_density(state)
    a = rho.amps[:, mode]
    d = np.exp(-0.5 * np.abs(a) ** 2)
    vac = rho.amps.copy()
    vac[:, mode] = 0.0
    c = rho.coeff_matrix
    n = len(d)
    cm = np.empty((2 * n, 2 * n), dtype=complex)
    cm[:n, :n] = c
    cm[:n, n:] = -c * d[None, :]
    cm[n:, :n] = -d[:, None] * c
    cm[n:, n:] = d[:, None] * c * d[None, :]
    return merge(HybridDensity(rho.num_qubits, rho.num_modes,
                               np.concatenate([rho.keys, rho.keys]),
                               np.concatenate([rho.amps, vac]), cm))


def detect_and_reduce(state: HybridState, modes: Sequence[int],
                      registers: Sequence[int]) -> dict[tuple[bool, ...], np.ndarray]:
    """On/off detection of ``modes`` followed by reduction onto ``registers``.

    Returns the unnormalized reduced density matrix for every click pattern;
    its trace is the pattern's probability.  Equivalent to chaining
    :func:`no_click`/:func:`click` and :func:`reduce_to_qubits`, but evaluates
    the click kernel ``<b|a> - <b|0><0|a>`` with ``expm1`` so that rare
    patterns keep full relative precision.
    """
    for m in modes:
        if not 0 <= m < state.num_modes:
            raise StateError(f"mode {m} out of range for {state.num_modes} modes")
    rho = to_density(state)
    rest = [q for q in range(state.num_qubits) if q not in registers]
    base = rho.coeff_matrix * _key_match(rho.keys[:, rest], rho.keys[:, rest])
    undetected = [m for m in range(state.num_modes) if m not in modes]
    if undetected:
        base = base * _mode_gram(rho.amps[:, undetected], rho.amps[:, undetected]).T
    vacuum, clicked = [], []
    for m in modes:
        a = rho.amps[:, m]
        ket, bra = a[:, None], np.conj(a)[None, :]
        v = np.exp(-0.5 * (np.abs(ket) ** 2 + np.abs(bra) ** 2))
        vacuum.append(v)
        clicked.append(v * np.expm1(bra * ket))
    index = np.zeros(rho.num_branches, dtype=int)
    for r in registers:
        index = 2 * index + rho.keys[:, r]
    onehot = np.zeros((2 ** len(registers), rho.num_branches))
    onehot[index, np.arange(rho.num_branches)] = 1.0
    out = {}
    for pattern in itertools.product((False, True), repeat=len(modes)):
        w = base
        for m, hit in enumerate(pattern):
            w = w * (clicked[m] if hit else vacuum[m])
        red = onehot @ w @ onehot.T
        out[pattern] = 0.5 * (red + red.conj().T)
    return out


def photodetect_onoff(state: HybridState, mode: int) -> list[Outcome]:
    """Ideal on/off detector on one mode: POVM {|0><0|, 1 - |0><0|}."""
    if not 0 <= mode < state.num_modes:
        raise StateError(f"mode {mode} out of range for {state.num_modes} modes")
    outcomes = []
    for clicked, branch in ((False, no_click(state, mode)), (True, click(state, mode))):
        p = trace(branch)
        if p > MIN_PROBABILITY:
            outcomes.append(Outcome(ClickResult(mode, clicked), p, normalize(branch)))
    return outcomes


def total_probability(outcomes: Sequence[Outcome]) -> float:
    return float(sum(o.probability for o in outcomes))
