"""Exact states of qubit registers entangled with optical modes.

A pure state is a finite superposition of *coherent branches*

    |s> = sum_i c_i |k_i> (x) |a_i1> (x) ... (x) |a_im>,

where ``k_i`` is a computational-basis bitstring over the qubit registers and
``a_ij`` are coherent amplitudes.  Mixed states use the same branch list as a
(generally nonorthogonal) operator basis, ``rho = sum_ij C_ij |b_i><b_j|``.

Every operation the protocols need (qubit gates, mode phases, conditional
mirrors, photon loss, on/off detection, projective qubit measurement) maps
coherent branches to coherent branches, so nothing is ever truncated.
"""

from __future__ import annotations

import json
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

MERGE_TOL = 1e-12
PRUNE_TOL = 1e-15
UNITARY_TOL = 1e-12


class StateError(ValueError):
    """Raised for malformed states or invalid operation arguments."""


class CoherentBranch(NamedTuple):
    key: tuple[int, ...]
    modes: tuple[complex, ...]
    coeff: complex


def coherent_overlap(a: complex, b: complex) -> complex:
    """Return <b|a> for coherent states |a>, |b>."""
    return complex(np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + np.conj(b) * a))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _mode_gram(bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    """Matrix of prod_m <bra_i,m | ket_j,m> over all modes."""
    if bra.shape[1] == 0:
        return np.ones((bra.shape[0], ket.shape[0]), dtype=complex)
    log = (
        -0.5 * (np.abs(bra) ** 2)[:, None, :]
        - 0.5 * (np.abs(ket) ** 2)[None, :, :]
        + np.conj(bra)[:, None, :] * ket[None, :, :]
    )
    return np.exp(log.sum(axis=-1))


def _key_match(keys1: np.ndarray, keys2: np.ndarray) -> np.ndarray:
    if keys1.shape[1] == 0:
        return np.ones((keys1.shape[0], keys2.shape[0]), dtype=bool)
    return (keys1[:, None, :] == keys2[None, :, :]).all(axis=-1)


def _as_table(values, dtype, width: int) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim == 2 and arr.shape[1] == width:
        return arr
    if width == 0:
        raise StateError("zero-width branch tables must be given as 2-D arrays")
    return arr.reshape(-1, width)


class _BranchBasis:
    """Shared storage for branch keys and mode amplitudes."""

    __slots__ = ("num_qubits", "num_modes", "keys", "amps")

    def __init__(self, num_qubits: int, num_modes: int, keys, amps):
        keys = _as_table(keys, np.int8, num_qubits)
        amps = _as_table(amps, complex, num_modes)
        if keys.shape[0] != amps.shape[0]:
            raise StateError("keys and mode amplitudes disagree on branch count")
        if keys.size and (keys.min() < 0 or keys.max() > 1):
            raise StateError("branch keys must be bits")
        if not np.isfinite(amps).all():
            raise StateError("mode amplitudes must be finite")
        object.__setattr__(self, "num_qubits", int(num_qubits))
        object.__setattr__(self, "num_modes", int(num_modes))
        object.__setattr__(self, "keys", _frozen(keys))
        object.__setattr__(self, "amps", _frozen(amps))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def num_branches(self) -> int:
        return self.keys.shape[0]

    def gram(self) -> np.ndarray:
        """Gram matrix G_ij = <b_i|b_j> of the (unit-coefficient) branches."""
        return _key_match(self.keys, self.keys) * _mode_gram(self.amps, self.amps)


class HybridPure(_BranchBasis):
    """Pure state as a coefficient vector over coherent branches."""

    __slots__ = ("coeffs",)

    def __init__(self, num_qubits: int, num_modes: int, keys, amps, coeffs):
        super().__init__(num_qubits, num_modes, keys, amps)
        coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        if coeffs.shape[0] != self.num_branches:
            raise StateError("coefficient count does not match branch count")
        if not np.isfinite(coeffs).all():
            raise StateError("branch coefficients must be finite")
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    @classmethod
    def from_branches(cls, num_qubits: int, num_modes: int,
                      branches: Iterable[CoherentBranch | tuple]) -> "HybridPure":
        branches = [CoherentBranch(*b) for b in branches]
        for b in branches:
            if len(b.key) != num_qubits or len(b.modes) != num_modes:
                raise StateError(f"branch {b} does not match ({num_qubits}, {num_modes})")
        return cls(
            num_qubits, num_modes,
            [b.key for b in branches], [b.modes for b in branches], [b.coeff for b in branches],
        )

    @classmethod
    def product(cls, qubits: Sequence[Sequence[complex]] = (),
                modes: Sequence[complex] = ()) -> "HybridPure":
        """Product state of qubits given as (a, b) amplitude pairs and coherent modes."""
        state = cls(0, len(modes), np.zeros((1, 0)), [list(modes)], [1.0])
        for amplitudes in qubits:
            state = add_qubit(state, amplitudes)
        return state

    @property
    def branches(self) -> list[CoherentBranch]:
        return [
            CoherentBranch(tuple(int(x) for x in k), tuple(complex(x) for x in m), complex(c))
            for k, m, c in zip(self.keys, self.amps, self.coeffs)
        ]

    def __repr__(self) -> str:
        return (f"HybridPure(num_qubits={self.num_qubits}, num_modes={self.num_modes}, "
                f"branches={self.num_branches})")


class HybridDensity(_BranchBasis):
    """Mixed state ``sum_ij C_ij |b_i><b_j|`` over a coherent-branch basis."""

    __slots__ = ("coeff_matrix",)

    def __init__(self, num_qubits: int, num_modes: int, keys, amps, coeff_matrix):
        super().__init__(num_qubits, num_modes, keys, amps)
        cm = np.asarray(coeff_matrix, dtype=complex)
        n = self.num_branches
        cm = cm.reshape(n, n)
        if not np.isfinite(cm).all():
            raise StateError("coefficient matrix must be finite")
        object.__setattr__(self, "coeff_matrix", _frozen(cm))

    @property
    def branches(self) -> list[CoherentBranch]:
        """Basis branches; ``coeff`` carries the diagonal weight C_ii."""
        return [
            CoherentBranch(tuple(int(x) for x in k), tuple(complex(x) for x in m), complex(c))
            for k, m, c in zip(self.keys, self.amps, np.diag(self.coeff_matrix))
        ]

    def __repr__(self) -> str:
        return (f"HybridDensity(num_qubits={self.num_qubits}, num_modes={self.num_modes}, "
                f"branches={self.num_branches})")


HybridState = Union[HybridPure, HybridDensity]


def _trusted(cls, num_qubits: int, num_modes: int, keys, amps, weights) -> HybridState:
    """Construct without validation; for outputs of internal operations only."""
    out = object.__new__(cls)
    setattr_ = object.__setattr__
    setattr_(out, "num_qubits", num_qubits)
    setattr_(out, "num_modes", num_modes)
    setattr_(out, "keys", _frozen(keys))
    setattr_(out, "amps", _frozen(amps))
    setattr_(out, "coeffs" if cls is HybridPure else "coeff_matrix", _frozen(weights))
    return out


def _like(state: HybridState, keys, amps, weights, num_qubits=None, num_modes=None) -> HybridState:
    nq = state.num_qubits if num_qubits is None else num_qubits
    nm = state.num_modes if num_modes is None else num_modes
    return _trusted(type(state), nq, nm, keys, amps, weights)


def _weights(state: HybridState) -> np.ndarray:
    return state.coeffs if isinstance(state, HybridPure) else state.coeff_matrix


def _ket_map(state: HybridState, keys, amps, transfer: np.ndarray, **dims) -> HybridState:
    """Apply a linear map given by its action on basis branches.

    ``transfer[j, i]`` is the weight of new branch ``j`` in the image of old
    branch ``i``.
    """
    if isinstance(state, HybridPure):
        weights = transfer @ state.coeffs
    else:
        weights = transfer @ state.coeff_matrix @ transfer.conj().T
    return merge(_like(state, keys, amps, weights, **dims))


def to_density(state: HybridState) -> HybridDensity:
    if isinstance(state, HybridDensity):
        return state
    c = state.coeffs
    return _trusted(HybridDensity, state.num_qubits, state.num_modes, state.keys, state.amps,
                    np.outer(c, c.conj()))


def _check_compatible(s1: HybridState, s2: HybridState) -> None:
    if (s1.num_qubits, s1.num_modes) != (s2.num_qubits, s2.num_modes):
        raise StateError(
            f"dimension mismatch: ({s1.num_qubits}, {s1.num_modes}) vs "
            f"({s2.num_qubits}, {s2.num_modes})"
        )


def inner_product(s1: HybridPure, s2: HybridPure) -> complex:
    """<s1|s2> using exact coherent-state overlaps."""
    _check_compatible(s1, s2)
    g = _key_match(s1.keys, s2.keys) * _mode_gram(s1.amps, s2.amps)
    return complex(s1.coeffs.conj() @ g @ s2.coeffs)


def _pair_kernel(state: HybridState) -> np.ndarray:
    """K_ij = <b_j|b_i>, so that Tr(rho) = sum_ij C_ij K_ij."""
    return state.gram().T


def trace(state: HybridState) -> float:
    """Norm squared (pure) or trace (density), as a real number."""
    if isinstance(state, HybridPure):
        return float(np.real(state.coeffs.conj() @ state.gram() @ state.coeffs))
    return float(np.real(np.sum(state.coeff_matrix * _pair_kernel(state))))


def normalize(state: HybridState) -> HybridState:
    total = trace(state)
    if not total > 0:
        raise StateError("cannot normalize a state of zero norm")
    scale = 1.0 / np.sqrt(total) if isinstance(state, HybridPure) else 1.0 / total
    return _like(state, state.keys, state.amps, _weights(state) * scale)


def merge(state: HybridState, tol: float = MERGE_TOL) -> HybridState:
    """Combine duplicate branches and drop negligible ones.

    Branches are duplicates when their keys agree and every mode amplitude
    agrees within ``tol`` in both real and imaginary parts.
    """
    if tol < 0:
        raise StateError("merge tolerance must be non-negative")
    n = state.num_branches
    if n == 0:
        return state
    same = _key_match(state.keys, state.keys)
    if state.num_modes:
        diff = state.amps[:, None, :] - state.amps[None, :, :]
        same &= ((np.abs(diff.real) <= tol) & (np.abs(diff.imag) <= tol)).all(axis=-1)
    if np.count_nonzero(same) == n:
        reps_count = n
        keys, amps, weights = state.keys, state.amps, _weights(state)
    else:
        # point every branch at its first duplicate, following chains to a fixed point
        first = same.argmax(axis=0)
        while True:
            nxt = first[first]
            if np.array_equal(nxt, first):
                break
            first = nxt
        reps, group = np.unique(first, return_inverse=True)
        reps_count = len(reps)
        agg = np.zeros((reps_count, n))
        agg[group, np.arange(n)] = 1.0
        keys, amps = state.keys[reps], state.amps[reps]
        weights = agg @ _weights(state)
        if isinstance(state, HybridDensity):
            weights = weights @ agg.T
    if isinstance(state, HybridPure):
        keep = np.abs(weights) >= PRUNE_TOL
    else:
        mag = np.abs(weights)
        keep = np.maximum(mag.max(axis=0), mag.max(axis=1)) >= PRUNE_TOL
    if reps_count == n and keep.all():
        return state
    if isinstance(state, HybridDensity):
        weights = weights[np.ix_(keep, keep)]
    else:
        weights = weights[keep]
    return _like(state, keys[keep], amps[keep], weights)


def _check_register(state: HybridState, register: int) -> None:
    if not 0 <= register < state.num_qubits:
        raise StateError(f"qubit register {register} out of range for {state.num_qubits} qubits")


def _check_mode(state: HybridState, mode: int) -> None:
    if not 0 <= mode < state.num_modes:
        raise StateError(f"mode {mode} out of range for {state.num_modes} modes")


def apply_qubit_operator(state: HybridState, register: int, op) -> HybridState:
    """Apply an arbitrary 2x2 operator to one register (no unitarity check)."""
    _check_register(state, register)
    op = np.asarray(op, dtype=complex)
    n = state.num_branches
    bits = state.keys[:, register].astype(int)
    keys = np.concatenate([state.keys, state.keys])
    keys[:n, register] = 0
    keys[n:, register] = 1
    amps = np.concatenate([state.amps, state.amps])
    transfer = np.zeros((2 * n, n), dtype=complex)
    idx = np.arange(n)
    transfer[idx, idx] = op[0, bits]
    transfer[n + idx, idx] = op[1, bits]
    return _ket_map(state, keys, amps, transfer)


def apply_qubit_gate(state: HybridState, register: int, unitary) -> HybridState:
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (2, 2) or not np.allclose(u.conj().T @ u, np.eye(2), rtol=0, atol=UNITARY_TOL):
        raise StateError("qubit gate must be a 2x2 unitary")
    return apply_qubit_operator(state, register, u)


def apply_mode_phase(state: HybridState, mode: int, theta: float) -> HybridState:
    _check_mode(state, mode)
    amps = state.amps.copy()
    amps[:, mode] *= np.exp(1j * theta)
    return _like(state, state.keys, amps, _weights(state))


def apply_conditional_scatter(state: HybridState, control: int, mode1: int, mode2: int,
                              scatter) -> HybridState:
    """Apply a 2x2 mode scatter matrix to ``(mode1, mode2)`` on branches whose
    ``control`` bit is 1; branches with control bit 0 are untouched."""
    _check_register(state, control)
    _check_mode(state, mode1)
    _check_mode(state, mode2)
    if mode1 == mode2:
        raise StateError("mirror modes must be distinct")
    s = np.asarray(scatter, dtype=complex)
    amps = state.amps.copy()
    on = state.keys[:, control] == 1
    pair = amps[on][:, [mode1, mode2]]
    out = pair @ s.T
    amps[np.ix_(on, [mode1, mode2])] = out
    return merge(_like(state, state.keys, amps, _weights(state)))


def add_qubit(state: HybridState, amplitudes: Sequence[complex]) -> HybridState:
    """Append a new qubit register (last index) in the state a|0> + b|1>."""
    a, b = (complex(x) for x in amplitudes)
    n = state.num_branches
    keys = np.zeros((2 * n, state.num_qubits + 1), dtype=np.int8)
    keys[:n, :-1] = state.keys
    keys[n:, :-1] = state.keys
    keys[n:, -1] = 1
    amps = np.concatenate([state.amps, state.amps])
    transfer = np.zeros((2 * n, n), dtype=complex)
    idx = np.arange(n)
    transfer[idx, idx] = a
    transfer[n + idx, idx] = b
    return _ket_map(state, keys, amps, transfer, num_qubits=state.num_qubits + 1)


def append_modes(state: HybridState, amplitudes: Sequence[complex]) -> HybridState:
    """Tensor fresh coherent modes (same amplitudes in every branch) onto the state."""
    extra = np.broadcast_to(np.asarray(amplitudes, dtype=complex), (state.num_branches, len(amplitudes)))
    amps = np.concatenate([state.amps, extra], axis=1)
    return _like(state, state.keys, amps, _weights(state), num_modes=state.num_modes + len(amplitudes))


def trace_modes(state: HybridState) -> HybridDensity:
    """Trace out every optical mode, leaving a qubit-only density."""
    rho = to_density(state)
    cm = rho.coeff_matrix * _mode_gram(rho.amps, rho.amps).T
    out = HybridDensity(rho.num_qubits, 0, rho.keys, np.zeros((rho.num_branches, 0)), cm)
    return merge(out)


def mix(weighted: Sequence[tuple[float, HybridState]]) -> HybridDensity:
    """Convex combination ``sum_k p_k rho_k`` of compatible states."""
    if not weighted:
        raise StateError("cannot mix an empty list of states")
    first = weighted[0][1]
    parts = [to_density(s) for _, s in weighted]
    for s in parts:
        _check_compatible(first, s)
    keys = np.concatenate([s.keys for s in parts])
    amps = np.concatenate([s.amps for s in parts])
    n = keys.shape[0]
    cm = np.zeros((n, n), dtype=complex)
    start = 0
    for (p, _), s in zip(weighted, parts):
        stop = start + s.num_branches
        cm[start:stop, start:stop] = p * s.coeff_matrix
        start = stop
    return merge(HybridDensity(first.num_qubits, first.num_modes, keys, amps, cm))


def reduce_to_qubits(state: HybridState, registers: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of the given registers (first register most significant).

    All modes and the remaining qubits are traced out.  The result carries the
    state's trace, so unnormalized inputs give unnormalized outputs.
    """
    registers = list(registers)
    for r in registers:
        _check_register(state, r)
    rest = [q for q in range(state.num_qubits) if q not in registers]
    rho = to_density(state)
    kernel = _key_match(rho.keys[:, rest], rho.keys[:, rest]) * _mode_gram(rho.amps, rho.amps).T
    w = rho.coeff_matrix * kernel
    dim = 2 ** len(registers)
    index = np.zeros(rho.num_branches, dtype=int)
    for r in registers:
        index = 2 * index + rho.keys[:, r]
    onehot = np.zeros((dim, rho.num_branches))
    onehot[index, np.arange(rho.num_branches)] = 1.0
    out = onehot @ w @ onehot.T
    return 0.5 * (out + out.conj().T)


def reduce_to_qubit(state: HybridState, register: int) -> np.ndarray:
    """2x2 reduced density matrix of one register."""
    return reduce_to_qubits(state, [register])


def expectation_pure(state: HybridState, target: HybridPure) -> float:
    """<t|rho|t> for a pure target over the same registers and modes."""
    _check_compatible(state, target)
    rho = to_density(state)
    ov = _key_match(target.keys, rho.keys) * _mode_gram(target.amps, rho.amps)
    v = target.coeffs.conj() @ ov  # v_i = <t|b_i>
    return float(np.real(v @ rho.coeff_matrix @ v.conj()))


def check_density(state: HybridDensity, tol: float = 1e-9) -> None:
    """Raise StateError unless C is Hermitian and G^1/2 C G^1/2 is PSD."""
    cm = state.coeff_matrix
    if not np.allclose(cm, cm.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(cm).max(initial=0))):
        raise StateError("coefficient matrix is not Hermitian")
    g = state.gram()
    w, v = np.linalg.eigh(0.5 * (g + g.conj().T))
    # nonzero spectrum of B C B^dagger equals that of G^1/2 C G^1/2
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    m = root @ cm @ root
    lowest = np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min(initial=0.0)
    if lowest < -tol:
        raise StateError(f"density is not positive semidefinite (min eigenvalue {lowest:.3e})")


def check_qubit_density(rho: np.ndarray, tol: float = 1e-10) -> None:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise StateError("qubit density must be 2x2")
    (a, b), (c, d) = rho.tolist()
    if max(abs(a.imag), abs(d.imag), abs(b - c.conjugate())) > 1e-12:
        raise StateError("qubit density is not Hermitian")
    tr = a.real + d.real
    if abs(tr - 1) > tol:
        raise StateError(f"qubit density has trace {tr}")
    lowest = 0.5 * tr - np.hypot(0.5 * (a.real - d.real), abs(b))
    if lowest < -tol:
        raise StateError(f"qubit density has a negative eigenvalue ({lowest:.3e})")


# -- serialization -----------------------------------------------------------

def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def state_to_dict(state: HybridState) -> dict:
    out = {
        "type": "pure" if isinstance(state, HybridPure) else "density",
        "num_qubits": state.num_qubits,
        "num_modes": state.num_modes,
        "branches": [],
    }
    coeffs = state.coeffs if isinstance(state, HybridPure) else np.zeros(state.num_branches)
    for k, m, c in zip(state.keys, state.amps, coeffs):
        entry = {"key": "".join(str(int(b)) for b in k), "modes": [_pair(a) for a in m]}
        if isinstance(state, HybridPure):
            entry["coeff"] = _pair(c)
        out["branches"].append(entry)
    if isinstance(state, HybridDensity):
        out["coeff_matrix"] = [[_pair(z) for z in row] for row in state.coeff_matrix]
    return out


def state_from_dict(data: dict) -> HybridState:
    nq, nm = int(data["num_qubits"]), int(data["num_modes"])
    branches = data["branches"]
    keys = [[int(ch) for ch in b["key"]] for b in branches]
    if any(len(k) != nq for k in keys):
        raise StateError("branch key length does not match num_qubits")
    amps = [[complex(re, im) for re, im in b["modes"]] for b in branches]
    if any(len(a) != nm for a in amps):
        raise StateError("branch mode count does not match num_modes")
    keys_arr = np.array(keys, dtype=np.int8).reshape(len(branches), nq)
    amps_arr = np.array(amps, dtype=complex).reshape(len(branches), nm)
    if "coeff_matrix" in data:
        cm = [[complex(re, im) for re, im in row] for row in data["coeff_matrix"]]
        return HybridDensity(nq, nm, keys_arr, amps_arr, np.array(cm, dtype=complex))
    return HybridPure(nq, nm, keys_arr, amps_arr, [complex(*b["coeff"]) for b in branches])


def dumps(state: HybridState) -> str:
    return json.dumps(state_to_dict(state))


def loads(text: str) -> HybridState:
    return state_from_dict(json.loads(text))
