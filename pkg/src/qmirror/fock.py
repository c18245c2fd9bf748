"""Truncated number-basis oracle for the coherent-branch engine.

Dense vectors and matrices over ``qubits (x) modes``, qubit registers first
(register 0 most significant), each mode truncated at ``N`` photons.  Only
primitive operations live here; protocols are never run in this basis.
"""

from __future__ import annotations

from math import comb, factorial
from typing import Sequence

import numpy as np
from scipy.stats import poisson

TAIL_BUDGET = 1e-12
HEADROOM = 5


def default_truncation(max_mean_photons: float) -> int:
    """Smallest N with Poisson tail mass below 1e-12, plus headroom."""
    n = 0
    while poisson.sf(n, max_mean_photons) >= TAIL_BUDGET:
        n += 1
    return n + HEADROOM


def coherent_fock(alpha: complex, N: int) -> np.ndarray:
    """Number-basis amplitudes e^{-|a|^2/2} a^n / sqrt(n!) for n <= N."""
    if N < 0:
        raise ValueError("truncation must be non-negative")
    out = np.empty(N + 1, dtype=complex)
    out[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, N + 1):
        out[n] = out[n - 1] * alpha / np.sqrt(n)
    return out


def kraus_op(k: int, eta: float, N: int) -> np.ndarray:
    """Loss of exactly ``k`` photons: sum_i sqrt(C(i,k)) eta^((i-k)/2) (1-eta)^(k/2) |i-k><i|."""
    if not 0 <= k <= N:
        raise ValueError(f"photon-loss order {k} outside [0, {N}]")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    op = np.zeros((N + 1, N + 1))
    for i in range(k, N + 1):
        op[i - k, i] = np.sqrt(comb(i, k)) * eta ** ((i - k) / 2) * (1 - eta) ** (k / 2)
    return op


def dims_for(num_qubits: int, num_modes: int, N: int) -> tuple[int, ...]:
    return (2,) * num_qubits + (N + 1,) * num_modes


def _apply_on_axis(rho: np.ndarray, dims: Sequence[int], axis: int,
                   left: np.ndarray, right: np.ndarray | None = None) -> np.ndarray:
    """left_axis . rho . right_axis^dagger for an operator acting on one tensor factor."""
    right = left if right is None else right
    d = len(dims)
    t = rho.reshape(tuple(dims) * 2)
    t = np.moveaxis(np.tensordot(left, t, axes=([1], [axis])), 0, axis)
    t = np.moveaxis(np.tensordot(right.conj(), t, axes=([1], [d + axis])), 0, d + axis)
    return t.reshape(rho.shape)


def apply_loss_fock(rho: np.ndarray, eta: float, dims: Sequence[int],
                    modes: Sequence[int]) -> np.ndarray:
    """Kraus sum over every photon-loss order on each listed tensor axis."""
    for axis in modes:
        N = dims[axis] - 1
        out = np.zeros_like(rho)
        for k in range(N + 1):
            a = kraus_op(k, eta, N)
            out += _apply_on_axis(rho, dims, axis, a)
        rho = out
    return rho


def beam_splitter_fock(r: complex, t: complex, N: int) -> np.ndarray:
    """Two-mode number-basis unitary of ``(a1, a2) -> (t a1 + r a2, r a1 + t a2)``.

    Built from ``|n, m> -> (t x + r y)^n (r x + t y)^m / sqrt(n! m!)`` with
    ``x, y`` the creation operators of the two output modes.  Output
    components beyond the truncation are dropped.
    """
    d = N + 1
    u = np.zeros((d * d, d * d), dtype=complex)
    fact = np.array([float(factorial(k)) for k in range(2 * N + 1)])
    for n in range(d):
        # coefficient of x^j y^(n-j) in (t x + r y)^n
        first = np.array([comb(n, j) * t ** j * r ** (n - j) for j in range(n + 1)], dtype=complex)
        for m in range(d):
            second = np.array([comb(m, l) * r ** l * t ** (m - l) for l in range(m + 1)],
                              dtype=complex)
            poly = np.convolve(first, second)  # index p = power of x
            total = n + m
            norm = np.sqrt(fact[n] * fact[m])
            for p, c in enumerate(poly):
                q = total - p
                if p <= N and q <= N and c != 0:
                    u[p * d + q, n * d + m] += c * np.sqrt(fact[p] * fact[q]) / norm
    return u


def conditional_mirror_unitary(num_qubits: int, control: int, N: int,
                               r: complex = -1.0, t: complex = 0.0) -> np.ndarray:
    """Mirror acting on modes 0, 1 of a ``num_qubits`` + 2-mode space."""
    if not 0 <= control < num_qubits:
        raise ValueError("control register out of range")
    nq_dim = 2 ** num_qubits
    bs = beam_splitter_fock(r, t, N)
    ident = np.eye(bs.shape[0], dtype=complex)
    blocks = []
    for index in range(nq_dim):
        bit = (index >> (num_qubits - 1 - control)) & 1
        blocks.append(bs if bit else ident)
    d = bs.shape[0]
    out = np.zeros((nq_dim * d, nq_dim * d), dtype=complex)
    for index, block in enumerate(blocks):
        out[index * d:(index + 1) * d, index * d:(index + 1) * d] = block
    return out


def apply_mirror_fock(state: np.ndarray, num_qubits: int, control: int, N: int,
                      r: complex = -1.0, t: complex = 0.0) -> np.ndarray:
    """Conditional mirror on a state vector or density matrix with exactly two modes."""
    u = conditional_mirror_unitary(num_qubits, control, N, r, t)
    if state.ndim == 1:
        return u @ state
    return u @ state @ u.conj().T


def vacuum_projector(dims: Sequence[int], axis: int) -> np.ndarray:
    p = np.zeros((dims[axis], dims[axis]))
    p[0, 0] = 1.0
    return p


def detect_fock(rho: np.ndarray, dims: Sequence[int], axis: int, click: bool) -> np.ndarray:
    """Unnormalized post-measurement density for an on/off detector on ``axis``."""
    p0 = vacuum_projector(dims, axis)
    op = np.eye(dims[axis]) - p0 if click else p0
    return _apply_on_axis(rho, dims, axis, op)


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    d = len(dims)
    t = rho.reshape(tuple(dims) * 2)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:d])
    col = [row[i] if i not in keep else letters[d + i].upper() for i in range(d)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    red = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), t)
    size = int(np.prod([dims[i] for i in keep]))
    return red.reshape(size, size)


def embed_vectors(keys: np.ndarray, amps: np.ndarray, N: int) -> np.ndarray:
    """Columns are the number-basis images of each coherent branch."""
    cols = []
    for key, modes in zip(keys, amps):
        v = np.ones(1, dtype=complex)
        for bit in key:
            v = np.kron(v, np.eye(2)[int(bit)])
        for a in modes:
            v = np.kron(v, coherent_fock(a, N))
        cols.append(v)
    return np.array(cols).T


def embed(state, N: int) -> np.ndarray:
    """Number-basis vector (pure) or matrix (density) of a hybrid state."""
    basis = embed_vectors(state.keys, state.amps, N)
    if hasattr(state, "coeffs"):
        return basis @ state.coeffs
    return basis @ state.coeff_matrix @ basis.conj().T


def compare(hybrid, fock: np.ndarray, N: int) -> float:
    """Max absolute deviation between a hybrid state and a number-basis array."""
    ref = embed(hybrid, N)
    if ref.ndim != fock.ndim:
        ref = np.outer(ref, ref.conj()) if ref.ndim == 1 else ref
        fock = np.outer(fock, fock.conj()) if fock.ndim == 1 else fock
    return float(np.max(np.abs(ref - fock)))
