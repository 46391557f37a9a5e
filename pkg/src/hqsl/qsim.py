"""Small statevector simulator for rotation/CZ circuits.

Qubit 0 is the most significant bit of the amplitude index. Every routine
has a batched form that works on arrays of shape ``(B, 2**Q)`` so that a
whole mini-batch (or a whole set of parameter-shift evaluations) can be
pushed through a circuit with one numpy call per gate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

MAX_QUBITS = 16
ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CZ",)


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: Optional[int] = None
    angle: Optional[float] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CZ":
            if self.control is None or self.control == self.target:
                raise ValueError("CZ needs two distinct qubits")
            if self.angle is not None:
                raise ValueError("CZ takes no angle")
        else:
            if self.control is not None:
                raise ValueError(f"{self.kind} acts on a single qubit")
            if self.angle is None:
                raise ValueError(f"{self.kind} needs an angle")

    @property
    def qubits(self) -> tuple:
        if self.kind == "CZ":
            return (self.control, self.target)
        return (self.target,)


@dataclass(frozen=True)
class NoiseChannel:
    """Depolarizing noise applied by Pauli-trajectory sampling.

    ``trajectories`` is the number of independent trajectories averaged by
    the quantum layer when it produces an expectation vector.
    """

    p1: float = 0.0
    p2: float = 0.0
    rng_seed: int = 0
    trajectories: int = 1

    def __post_init__(self):
        for p in (self.p1, self.p2):
            if not 0.0 <= p <= 1.0:
                raise ValueError("depolarizing probability must lie in [0, 1]")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")

    @property
    def is_null(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0


def _num_qubits(state: np.ndarray) -> int:
    n = state.shape[-1].bit_length() - 1
    if 1 << n != state.shape[-1]:
        raise ValueError("state length must be a power of two")
    return n


def _check_qubit(qubit: int, n: int):
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n}-qubit register")


def init_state(num_qubits: int) -> np.ndarray:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    state = np.zeros(2**num_qubits, dtype=np.complex128)
    state[0] = 1.0
    return state


def init_batch(num_qubits: int, batch: int) -> np.ndarray:
    state = np.zeros((batch, 2**num_qubits), dtype=np.complex128)
    if num_qubits < 1 or num_qubits > MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    state[:, 0] = 1.0
    return state


def rotation_matrices(kind: str, angles) -> np.ndarray:
    """Stack of 2x2 rotation matrices, shape ``angles.shape + (2, 2)``."""
    t = np.asarray(angles, dtype=np.float64) / 2.0
    c, s = np.cos(t), np.sin(t)
    out = np.empty(t.shape + (2, 2), dtype=np.complex128)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
        out[..., 1, 1] = c
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    elif kind == "RZ":
        out[..., 0, 0] = c - 1j * s
        out[..., 0, 1] = 0.0
        out[..., 1, 0] = 0.0
        out[..., 1, 1] = c + 1j * s
    else:
        raise ValueError(f"{kind} is not a rotation")
    return out


def apply_matrix_batch(states: np.ndarray, matrices: np.ndarray, qubit: int) -> np.ndarray:
    """Apply a per-row 2x2 matrix (``(B, 2, 2)`` or ``(2, 2)``) to ``qubit``."""
    batch, dim = states.shape
    n = _num_qubits(states)
    _check_qubit(qubit, n)
    left = 1 << qubit
    right = dim >> (qubit + 1)
    psi = states.reshape(batch, left, 2, right)
    if matrices.ndim == 2:
        out = np.einsum("ij,bljr->blir", matrices, psi)
    else:
        out = np.einsum("bij,bljr->blir", matrices, psi)
    return out.reshape(batch, dim)


def apply_rotation_batch(states: np.ndarray, kind: str, qubit: int, angles) -> np.ndarray:
    angles = np.broadcast_to(np.asarray(angles, dtype=np.float64), (states.shape[0],))
    return apply_matrix_batch(states, rotation_matrices(kind, angles), qubit)


def _cz_sign(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(2**n)
    both = ((idx >> (n - 1 - a)) & 1) & ((idx >> (n - 1 - b)) & 1)
    return np.where(both == 1, -1.0, 1.0)


def apply_cz_batch(states: np.ndarray, a: int, b: int) -> np.ndarray:
    n = _num_qubits(states)
    _check_qubit(a, n)
    _check_qubit(b, n)
    if a == b:
        raise ValueError("CZ needs two distinct qubits")
    return states * _cz_sign(n, a, b)


def apply_gate(state: np.ndarray, gate: Gate) -> np.ndarray:
    n = _num_qubits(state)
    for q in gate.qubits:
        _check_qubit(q, n)
    batch = state.reshape(1, -1)
    if gate.kind == "CZ":
        out = apply_cz_batch(batch, gate.control, gate.target)
    else:
        out = apply_rotation_batch(batch, gate.kind, gate.target, gate.angle)
    return out.reshape(state.shape)


# --- measurement -----------------------------------------------------------


def expectation_y_batch(states: np.ndarray, qubit: int) -> np.ndarray:
    """<sigma_y> on ``qubit`` for each row: 2 Im(sum conj(a0) a1)."""
    batch, dim = states.shape
    n = _num_qubits(states)
    _check_qubit(qubit, n)
    psi = states.reshape(batch, 1 << qubit, 2, dim >> (qubit + 1))
    a0 = psi[:, :, 0, :]
    a1 = psi[:, :, 1, :]
    return 2.0 * np.imag(np.sum(np.conj(a0) * a1, axis=(1, 2)))


def expectation_y(state: np.ndarray, qubit: int) -> float:
    return float(expectation_y_batch(state.reshape(1, -1), qubit)[0])


def expectations_batch(states: np.ndarray) -> np.ndarray:
    n = _num_qubits(states)
    return np.stack([expectation_y_batch(states, q) for q in range(n)], axis=1)


# S^dagger then H on every qubit maps the sigma_y eigenbasis onto the
# computational basis: |y+> -> |0>, |y-> -> |1>.
_TO_Y_BASIS = (np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)) @ np.diag(
    [1.0, -1j]
)


def sample_expectations_batch(states: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Shot estimate (M+ - M-)/M of every qubit's sigma_y, per row.

    Whole bitstrings are drawn in the rotated basis, so per-qubit outcomes
    keep their joint correlations, as on hardware.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = _num_qubits(states)
    rotated = states
    for q in range(n):
        rotated = apply_matrix_batch(rotated, _TO_Y_BASIS, q)
    probs = np.abs(rotated) ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    counts = rng.multinomial(shots, probs)
    idx = np.arange(2**n)
    out = np.empty((states.shape[0], n))
    for q in range(n):
        sign = 1.0 - 2.0 * ((idx >> (n - 1 - q)) & 1)
        out[:, q] = counts @ sign / shots
    return out


def sample_expectation_y(state: np.ndarray, qubit: int, shots: int, rng_seed: int) -> float:
    rng = np.random.default_rng(rng_seed)
    n = _num_qubits(state)
    _check_qubit(qubit, n)
    return float(sample_expectations_batch(state.reshape(1, -1), shots, rng)[0, qubit])


def expectation_vector(state: np.ndarray, mode: str = "analytic", shots: int = 1000, seed: int = 0) -> np.ndarray:
    """Per-qubit sigma_y expectations; ``mode`` is ``"analytic"`` or ``"shots"``."""
    batch = state.reshape(1, -1)
    if mode == "analytic":
        return expectations_batch(batch)[0]
    if mode == "shots":
        return sample_expectations_batch(batch, shots, np.random.default_rng(seed))[0]
    raise ValueError(f"unknown evaluation mode {mode!r}")


# --- depolarizing trajectories --------------------------------------------

_PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


def depolarize_batch(
    states: np.ndarray, qubits: Sequence[int], p: float, rng: np.random.Generator
) -> np.ndarray:
    """With probability ``p`` per row, hit one of ``qubits`` with a random Pauli."""
    if p == 0.0:
        return states
    batch = states.shape[0]
    hit = rng.random(batch) < p
    which_qubit = rng.integers(0, len(qubits), size=batch)
    which_pauli = rng.integers(0, 3, size=batch)
    if not hit.any():
        return states
    mats = np.broadcast_to(np.eye(2, dtype=np.complex128), (batch, 2, 2)).copy()
    out = states
    for qi, q in enumerate(qubits):
        sel = hit & (which_qubit == qi)
        if not sel.any():
            continue
        m = mats.copy()
        for k in range(3):
            m[sel & (which_pauli == k)] = _PAULIS[k]
        out = apply_matrix_batch(out, m, q)
    return out


def apply_depolarizing(
    state: np.ndarray, gate: Gate, channel: NoiseChannel, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """Apply ``gate`` then one sampled depolarizing event."""
    out = apply_gate(state, gate)
    if channel.is_null:
        return out
    if rng is None:
        rng = np.random.default_rng(channel.rng_seed)
    p = channel.p2 if gate.kind == "CZ" else channel.p1
    return depolarize_batch(out.reshape(1, -1), gate.qubits, p, rng).reshape(state.shape)
