"""Dense state-vector and density-matrix simulation for small qubit counts.

Used for non-stabilizer states and as an independent reference for the
stabilizer machinery. Qubit 0 is the most significant tensor factor, matching
the bitstring convention where the leftmost character is qubit 0.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .pauli import CNOT, CLIFFORD_IMAGE, CLIFFORD_SIGN, Clifford1Q, Gate, PauliString

MAX_DENSE_QUBITS = 12

_PAULI_2X2 = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def single_pauli_matrix(symbol: int) -> np.ndarray:
    return _PAULI_2X2[symbol]


def pauli_matrix(p: PauliString) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for s in p.symbols:
        out = np.kron(out, _PAULI_2X2[s])
    return out


def _identify(u: np.ndarray) -> int | None:
    """Table index of the single-qubit Clifford implemented by ``u``, if any."""
    found = []
    for s in (1, 3):
        m = u @ _PAULI_2X2[s] @ u.conj().T
        for t in (1, 2, 3):
            ov = np.trace(_PAULI_2X2[t] @ m).real / 2
            if abs(abs(ov) - 1) < 1e-9:
                found.append((t, ov < 0))
    hit = np.nonzero(
        (CLIFFORD_IMAGE[:, 1] == found[0][0])
        & (CLIFFORD_SIGN[:, 1] == found[0][1])
        & (CLIFFORD_IMAGE[:, 3] == found[1][0])
        & (CLIFFORD_SIGN[:, 3] == found[1][1])
    )[0]
    return int(hit[0]) if hit.size else None


@lru_cache(maxsize=1)
def clifford_unitaries() -> tuple[np.ndarray, ...]:
    """2x2 unitaries for the 24 single-qubit Cliffords, in table order.

    Found by breadth-first search over words in H and S; each unitary is
    matched to a table entry by its conjugation action.
    """
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    s = np.diag([1, 1j])
    table: dict[int, np.ndarray] = {0: np.eye(2, dtype=complex)}
    frontier = [np.eye(2, dtype=complex)]
    while len(table) < 24:
        nxt = []
        for u in frontier:
            for g in (h, s):
                v = g @ u
                idx = _identify(v)
                if idx is not None and idx not in table:
                    table[idx] = v
                    nxt.append(v)
        frontier = nxt
    return tuple(table[i] for i in range(24))


CNOT_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    t = np.moveaxis(np.tensordot(u, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def _apply_2q(psi: np.ndarray, u: np.ndarray, q1: int, q2: int, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    t = np.tensordot(u.reshape(2, 2, 2, 2), t, axes=([2, 3], [q1, q2]))
    t = np.moveaxis(t, [0, 1], [q1, q2])
    return t.reshape(-1)


def apply_gate(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """Apply a gate to a state vector (returns a new array)."""
    if isinstance(gate, Clifford1Q):
        return _apply_1q(psi, clifford_unitaries()[gate.index], gate.qubit, n)
    return _apply_2q(psi, CNOT_MATRIX, gate.control, gate.target, n)


def apply_gates(psi: np.ndarray, gates, n: int) -> np.ndarray:
    for g in gates:
        psi = apply_gate(psi, g, n)
    return psi


def zero_state(n: int) -> np.ndarray:
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense simulation limited to {MAX_DENSE_QUBITS} qubits")
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    return psi


def expectation(psi: np.ndarray, p: PauliString) -> float:
    n = p.n
    phi = psi
    for q, s in enumerate(p.symbols):
        if s:
            phi = _apply_1q(phi, _PAULI_2X2[s], q, n)
    return float(np.vdot(psi, phi).real)


def probabilities(psi: np.ndarray) -> np.ndarray:
    """Born probabilities indexed by the integer whose MSB is qubit 0."""
    p = np.abs(psi) ** 2
    return p / p.sum()


def bits_to_index(bits: np.ndarray) -> np.ndarray:
    """Integer index (qubit 0 most significant) for rows of a bit array."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int64))
    n = bits.shape[1]
    return bits @ (1 << np.arange(n - 1, -1, -1))


# density matrices ---------------------------------------------------------


def density_apply_gate(rho: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    if isinstance(gate, Clifford1Q):
        u = clifford_unitaries()[gate.index]
        qs = [gate.qubit]
    else:
        u = CNOT_MATRIX
        qs = [gate.control, gate.target]
    k = len(qs)
    t = rho.reshape((2,) * (2 * n))
    t = np.tensordot(u.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), qs))
    t = np.moveaxis(t, list(range(k)), qs)
    t = np.tensordot(t, u.conj().reshape((2,) * (2 * k)), axes=([n + q for q in qs], list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), [n + q for q in qs])
    return t.reshape(2**n, 2**n)


def density_apply_pauli(rho: np.ndarray, p: PauliString) -> np.ndarray:
    m = pauli_matrix(p)
    return m @ rho @ m.conj().T


def density_pauli_channel(rho: np.ndarray, paulis, probs) -> np.ndarray:
    """Compose independent channels rho -> (1-p) rho + p P rho P."""
    for p, pr in zip(paulis, probs):
        if pr > 0:
            rho = (1 - pr) * rho + pr * density_apply_pauli(rho, p)
    return rho


def density_expectation(rho: np.ndarray, p: PauliString) -> float:
    return float(np.trace(pauli_matrix(p) @ rho).real)
