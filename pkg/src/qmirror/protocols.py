"""Teleportation, state transfer and entanglement swapping between mirror nodes.

Every protocol enumerates its full outcome tree exactly.  Register layout:

* teleport:       0 = Bob (receiver), 1 = Alice (sender)
* state_transfer: 0 = Alice (sender), 1 = Bob (receiver)
* swap:           0 = Bob, 1 = Charlie

Modes 0 and 1 are the two optical ports of every mirror.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .channels import LossConfig, apply_loss, apply_phase_mismatch
from .hybrid import (
    HybridPure,
    HybridState,
    StateError,
    add_qubit,
    append_modes,
    apply_qubit_gate,
    check_qubit_density,
    expectation_pure,
    mix,
    normalize,
    reduce_to_qubit,
    reduce_to_qubits,
    trace,
    trace_modes,
)
from .measurement import (
    MIN_PROBABILITY,
    PLUS_MINUS,
    ClickResult,
    QubitResult,
    click,
    detect_and_reduce,
    measure_qubit,
    no_click,
    project_qubit,
)
from .mirror import IDEAL_MIRROR, MirrorParams, apply_mirror

SQRT_HALF = 1.0 / np.sqrt(2.0)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT_HALF


class ConflictRule(str, Enum):
    """How a click on both output ports is interpreted."""

    AS_PORT1 = "AsPort1"
    AS_PORT2 = "AsPort2"
    AS_FAILURE = "AsFailure"
    RANDOMIZED = "Randomized"


# Fixed by the calibration in qmirror.calibration; see docs/calibration.md.
DEFAULT_CONFLICT_RULE = ConflictRule.AS_FAILURE


@dataclass(frozen=True)
class NoiseConfig:
    delta: float = 0.0
    loss: LossConfig | None = None
    mirror_bob: MirrorParams = IDEAL_MIRROR
    mirror_alice: MirrorParams = IDEAL_MIRROR
    mirror_charlie: MirrorParams = IDEAL_MIRROR
    conflict_rule: ConflictRule = DEFAULT_CONFLICT_RULE

    def __post_init__(self):
        if not np.isfinite(self.delta):
            raise StateError("phase mismatch must be finite")
        object.__setattr__(self, "conflict_rule", ConflictRule(self.conflict_rule))

    @property
    def eta(self) -> float:
        return 1.0 if self.loss is None else self.loss.efficiency


IDEAL = NoiseConfig()


@dataclass(frozen=True)
class ConflictResolution:
    """Classical coin used by the randomized both-click rule."""

    port: int

    def __str__(self) -> str:
        return f"coin=port{self.port}"


@dataclass(frozen=True)
class ProtocolOutcome:
    record: tuple
    probability: float
    corrections: str
    receiver_state: np.ndarray
    success: bool

    def to_dict(self) -> dict:
        return {
            "record": [str(label) for label in self.record],
            "probability": self.probability,
            "corrections": self.corrections,
            "success": self.success,
            "receiver_state": [[[z.real, z.imag] for z in row] for row in self.receiver_state.tolist()],
        }


@dataclass(frozen=True)
class ProtocolResult:
    protocol: str
    input_state: tuple[complex, complex]
    outcomes: tuple[ProtocolOutcome, ...]

    @property
    def success_probability(self) -> float:
        return float(sum(o.probability for o in self.outcomes if o.success))

    @property
    def total_probability(self) -> float:
        return float(sum(o.probability for o in self.outcomes))

    def probability(self, predicate: Callable[[ProtocolOutcome], bool]) -> float:
        return float(sum(o.probability for o in self.outcomes if predicate(o)))

    def to_dict(self) -> dict:
        a, b = self.input_state
        return {
            "protocol": self.protocol,
            "input_state": [[a.real, a.imag], [b.real, b.imag]],
            "success_probability": self.success_probability,
            "outcomes": [o.to_dict() for o in self.outcomes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def pauli_frame(corrections: str) -> np.ndarray:
    """Unitary of a correction string applied left to right ("ZX": Z first)."""
    u = PAULI["I"]
    for ch in corrections:
        u = PAULI[ch] @ u
    return u


def _check_psi(psi) -> tuple[complex, complex]:
    a, b = (complex(x) for x in psi)
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-12:
        raise StateError("input qubit amplitudes must be normalized")
    return a, b


def _propagate(state: HybridState, noise: NoiseConfig) -> HybridState:
    if noise.delta:
        state = apply_phase_mismatch(state, noise.delta)
    if noise.loss is not None:
        eta = noise.eta
        state = apply_loss(state, 0, eta)
        state = apply_loss(state, 1, eta)
    return state


def prepare_channel(alpha: complex, beta: complex = 0.0,
                    mirror: MirrorParams = IDEAL_MIRROR) -> HybridPure:
    """Bob's atom in |+> scattered off his mirror with |alpha>|beta> at the ports."""
    state = HybridPure.product(qubits=[(1.0, 0.0)], modes=[alpha, beta])
    state = apply_qubit_gate(state, 0, HADAMARD)
    return apply_mirror(state, 0, 0, 1, mirror)


def _port_corrections(atom: str, port: int) -> str:
    base = "" if port == 1 else "X"
    return base if atom == "+" else "Z" + base


def _correction_cases(atom: str, click1: bool, click2: bool, rule: ConflictRule):
    """Yield (weight, extra labels, corrections, success) for one detector pattern."""
    if click1 and not click2:
        yield 1.0, (), _port_corrections(atom, 1), True
    elif click2 and not click1:
        yield 1.0, (), _port_corrections(atom, 2), True
    elif not click1:
        yield 1.0, (), "", False
    elif rule is ConflictRule.AS_PORT1:
        yield 1.0, (), _port_corrections(atom, 1), True
    elif rule is ConflictRule.AS_PORT2:
        yield 1.0, (), _port_corrections(atom, 2), True
    elif rule is ConflictRule.AS_FAILURE:
        yield 1.0, (), "", False
    else:
        yield 0.5, (ConflictResolution(1),), _port_corrections(atom, 1), True
        yield 0.5, (ConflictResolution(2),), _port_corrections(atom, 2), True


def _detect_both(state: HybridState):
    """Yield ((label1, label2), unnormalized post-state) for both ports."""
    for first, s1 in ((False, no_click(state, 0)), (True, click(state, 0))):
        for second, s2 in ((False, no_click(s1, 1)), (True, click(s1, 1))):
            yield (ClickResult(0, first), ClickResult(1, second)), s2


def _finish(state: HybridState, receiver: int, atom_label: QubitResult,
            rule: ConflictRule) -> list[ProtocolOutcome]:
    """Photodetect both ports, apply the Pauli frame, and extract the receiver qubit.

    ``state`` is unnormalized; its norm is the probability of the atom result.
    """
    outcomes = []
    for pattern, rho in detect_and_reduce(state, (0, 1), (receiver,)).items():
        p = float(np.trace(rho).real)
        if p <= MIN_PROBABILITY:
            continue
        rho = rho / p
        labels = (ClickResult(0, pattern[0]), ClickResult(1, pattern[1]))
        for weight, extra, corr, success in _correction_cases(atom_label.symbol, *pattern, rule):
            u = pauli_frame(corr)
            outcomes.append(ProtocolOutcome(
                record=(atom_label, *labels, *extra),
                probability=p * weight,
                corrections=corr or "I",
                receiver_state=u @ rho @ u.conj().T,
                success=success,
            ))
    return outcomes


def _atom_branches(state: HybridState, register: int):
    for index, (vec, symbol) in enumerate(zip(PLUS_MINUS, "+-")):
        yield QubitResult(register, index, symbol), project_qubit(state, register, vec)


def _check_outcomes(outcomes: Sequence[ProtocolOutcome]) -> None:
    total = sum(o.probability for o in outcomes)
    if abs(total - 1) > 1e-10:
        raise StateError(f"outcome probabilities sum to {total}")
    for o in outcomes:
        check_qubit_density(o.receiver_state, tol=max(1e-10, 1e-14 / o.probability))


@lru_cache(maxsize=256)
def _teleport_channel(alpha: complex, noise: NoiseConfig) -> HybridState:
    return _propagate(prepare_channel(alpha, 0.0, noise.mirror_bob), noise)


def teleport(psi, alpha: complex, noise: NoiseConfig = IDEAL) -> ProtocolResult:
    """Teleport Alice's atom state ``psi = (a, b)`` to Bob's atom."""
    psi = _check_psi(psi)
    state = add_qubit(_teleport_channel(complex(alpha), noise), psi)
    state = apply_mirror(state, 1, 0, 1, noise.mirror_alice)
    outcomes = []
    for label, branch in _atom_branches(state, 1):
        outcomes += _finish(branch, 0, label, noise.conflict_rule)
    _check_outcomes(outcomes)
    return ProtocolResult("teleport", psi, tuple(outcomes))


@lru_cache(maxsize=256)
def _qst_fields(alpha: complex) -> HybridPure:
    return HybridPure.product(modes=[alpha, 0.0])


def state_transfer(psi, alpha: complex, noise: NoiseConfig = IDEAL) -> ProtocolResult:
    """Send Alice's atom state to Bob's atom through the field modes alone."""
    psi = _check_psi(psi)
    state = add_qubit(_qst_fields(complex(alpha)), psi)
    state = apply_mirror(state, 0, 0, 1, noise.mirror_alice)
    outcomes = []
    for label, branch in _atom_branches(state, 0):
        sent = _propagate(branch, noise)
        received = add_qubit(sent, (SQRT_HALF, SQRT_HALF))
        received = apply_mirror(received, 1, 0, 1, noise.mirror_bob)
        outcomes += _finish(received, 1, label, noise.conflict_rule)
    _check_outcomes(outcomes)
    return ProtocolResult("state_transfer", psi, tuple(outcomes))


def atom_probabilities(result: ProtocolResult) -> tuple[float, float]:
    """Marginal probabilities (P+, P-) of the sender's atom measurement."""
    plus = result.probability(lambda o: o.record[0].symbol == "+")
    minus = result.probability(lambda o: o.record[0].symbol == "-")
    return plus, minus


BELL_PHI = np.array([1, 0, 0, 1], dtype=complex) * SQRT_HALF


@dataclass(frozen=True)
class SwapStage1Outcome:
    record: tuple
    probability: float
    corrections: str
    pair_state: np.ndarray  # Charlie (most significant) x Bob
    success: bool


@dataclass(frozen=True)
class RelayOutcome:
    record: tuple
    probability: float
    pending_correction: str
    state: HybridState  # Bob, Charlie, fresh modes toward Alice
    channel_fidelity: float


@dataclass(frozen=True)
class SwapResult:
    success_probability: float
    bell_fidelity: float | None
    stage1: tuple[SwapStage1Outcome, ...]
    relay_channel: tuple[RelayOutcome, ...] | None = field(default=None)


def entanglement_swap(alpha_prime: complex, alpha: complex,
                      noise: NoiseConfig = IDEAL) -> SwapResult:
    """Entangle Bob and Charlie with a field pulse, then re-emit toward Alice.

    Stage 1 heralds ``(|00> + |11>)/sqrt(2)`` between Charlie and Bob on a
    single click.  Stage 2 sends a fresh ``|alpha>|0>`` through Charlie's
    mirror and measures his atom in |+/->, leaving Bob entangled with the
    outgoing fields; a ``-`` result carries a pending Z on Bob.
    """
    state = _propagate(prepare_channel(alpha_prime, 0.0, noise.mirror_bob), noise)
    state = add_qubit(state, (SQRT_HALF, SQRT_HALF))
    state = apply_mirror(state, 1, 0, 1, noise.mirror_charlie)

    stage1, successes = [], []
    for labels, post in _detect_both(state):
        p_det = trace(post)
        if p_det <= MIN_PROBABILITY:
            continue
        post = normalize(post)
        for weight, extra, corr, success in _correction_cases(
                "+", labels[0].click, labels[1].click, noise.conflict_rule):
            fixed = apply_qubit_gate(post, 1, PAULI["X"]) if "X" in corr else post
            pair = reduce_to_qubits(fixed, [1, 0])
            p = p_det * weight
            stage1.append(SwapStage1Outcome((*labels, *extra), p, corr or "I", pair, success))
            if success:
                successes.append((p, fixed))

    p_success = float(sum(p for p, _ in successes))
    if not successes:
        return SwapResult(0.0, None, tuple(stage1), None)

    bell = float(sum(o.probability * np.real(BELL_PHI.conj() @ o.pair_state @ BELL_PHI)
                     for o in stage1 if o.success) / p_success)

    heralded = trace_modes(mix([(p / p_success, s) for p, s in successes]))
    relay = append_modes(heralded, [alpha, 0.0])
    relay = apply_mirror(relay, 1, 0, 1, noise.mirror_charlie)
    target_channel = prepare_channel(alpha, 0.0)
    relay_outcomes = []
    for atom in measure_qubit(relay, 1, PLUS_MINUS):
        pending = "Z" if atom.label.symbol == "-" else ""
        corrected = apply_qubit_gate(atom.post_state, 0, PAULI["Z"]) if pending else atom.post_state
        vec = PLUS_MINUS[atom.label.index]
        target = add_qubit(target_channel, vec)
        relay_outcomes.append(RelayOutcome(
            (atom.label,), atom.probability, pending or "I", atom.post_state,
            expectation_pure(corrected, target),
        ))
    return SwapResult(p_success, bell, tuple(stage1), tuple(relay_outcomes))


def repeater_chain_success(alpha_prime: complex, n_links: int) -> tuple[float, float]:
    """Exact and first-order success probability of ``n_links`` concatenated swaps."""
    if n_links < 1:
        raise StateError("a repeater chain needs at least one link")
    fail = np.exp(-abs(alpha_prime) ** 2)
    return float((1.0 - fail) ** n_links), float(1.0 - n_links * fail)
