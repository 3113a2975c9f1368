"""Pauli strings, single-qubit Cliffords, CNOT conjugation and a stabilizer tableau.

Paulis are stored in the binary symplectic form (x, z) with the Hermitian
convention: (1, 1) is Y, not XZ. Symbols are indexed I, X, Y, Z = 0, 1, 2, 3,
which is also the local basis order of every Pauli-basis tensor in this package.
Signs are stored as booleans (True means -1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

SYMBOLS = "IXYZ"
X_OF_SYMBOL = np.array([0, 1, 1, 0], dtype=bool)
Z_OF_SYMBOL = np.array([0, 0, 1, 1], dtype=bool)
# Indexed by 2*x + z.
SYMBOL_OF_BITS = np.array([0, 3, 1, 2], dtype=np.int8)


def symbols_from_bits(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Symbol indices (0..3) for boolean x/z arrays of any shape."""
    return SYMBOL_OF_BITS[2 * np.asarray(x, dtype=np.int8) + np.asarray(z, dtype=np.int8)]


@dataclass(frozen=True, eq=False)
class PauliString:
    """An unsigned Hermitian Pauli word on ``n`` qubits."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=bool).copy()
        z = np.asarray(self.z, dtype=bool).copy()
        if x.ndim != 1 or x.shape != z.shape or x.size == 0:
            raise ValueError("x and z must be equal-length non-empty 1-d arrays")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Build from a word such as ``"XIZY"`` (character ``i`` acts on qubit ``i``)."""
        try:
            sym = np.array([SYMBOLS.index(ch) for ch in label.upper()], dtype=np.int8)
        except ValueError as exc:
            raise ValueError(f"invalid Pauli label {label!r}") from exc
        return cls.from_symbols(sym)

    @classmethod
    def from_symbols(cls, symbols: Sequence[int]) -> "PauliString":
        sym = np.asarray(symbols, dtype=np.int8)
        if np.any((sym < 0) | (sym > 3)):
            raise ValueError("symbols must lie in 0..3")
        return cls(X_OF_SYMBOL[sym], Z_OF_SYMBOL[sym])

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(np.zeros(n, bool), np.zeros(n, bool))

    @classmethod
    def single(cls, n: int, qubit: int, symbol: str) -> "PauliString":
        sym = np.zeros(n, dtype=np.int8)
        sym[qubit] = SYMBOLS.index(symbol)
        return cls.from_symbols(sym)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def symbols(self) -> np.ndarray:
        return symbols_from_bits(self.x, self.z)

    @property
    def label(self) -> str:
        return "".join(SYMBOLS[s] for s in self.symbols)

    @property
    def occupation(self) -> np.ndarray:
        """Boolean mask of non-identity sites."""
        return self.x | self.z

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.occupation))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.nonzero(self.occupation)[0])

    def commutes_with(self, other: "PauliString") -> bool:
        return not (np.count_nonzero(self.x & other.z) + np.count_nonzero(self.z & other.x)) % 2

    def __eq__(self, other):
        if not isinstance(other, PauliString):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def __hash__(self):
        return hash((self.x.tobytes(), self.z.tobytes()))

    def __repr__(self):
        return f"PauliString({self.label!r})"


@dataclass(frozen=True)
class SignedPauli:
    """A Hermitian Pauli word with a sign of +1 or -1."""

    pauli: PauliString
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def from_label(cls, label: str) -> "SignedPauli":
        sign = 1
        if label[:1] in "+-":
            sign = -1 if label[0] == "-" else 1
            label = label[1:]
        return cls(PauliString.from_label(label), sign)

    @property
    def label(self) -> str:
        return ("+" if self.sign > 0 else "-") + self.pauli.label


# --------------------------------------------------------------------------
# Single-qubit Clifford group as signed permutations of (X, Y, Z)

_PAIR_ORDER = [(1, 3), (1, 2), (2, 3), (2, 1), (3, 1), (3, 2)]
_LEVI = {(1, 2): 1, (2, 3): 1, (3, 1): 1, (2, 1): -1, (3, 2): -1, (1, 3): -1}


def _build_clifford_tables() -> tuple[np.ndarray, np.ndarray]:
    image = np.zeros((24, 4), dtype=np.int8)
    sign = np.zeros((24, 4), dtype=bool)
    idx = 0
    for pa, pb in _PAIR_ORDER:
        pc = 6 - pa - pb
        for sx in (1, -1):
            for sz in (1, -1):
                # C Y C^dag = i (sx Pa)(sz Pb) = -sx sz eps(a, b) Pc.
                sy = -sx * sz * _LEVI[(pa, pb)]
                image[idx] = (0, pa, pc, pb)
                sign[idx] = (False, sx < 0, sy < 0, sz < 0)
                idx += 1
    return image, sign


CLIFFORD_IMAGE, CLIFFORD_SIGN = _build_clifford_tables()
CLIFFORD_IMAGE.setflags(write=False)
CLIFFORD_SIGN.setflags(write=False)
N_CLIFFORDS = 24


def _find_clifford(image_x: int, sign_x: bool, image_z: int, sign_z: bool) -> int:
    hit = np.nonzero(
        (CLIFFORD_IMAGE[:, 1] == image_x)
        & (CLIFFORD_SIGN[:, 1] == sign_x)
        & (CLIFFORD_IMAGE[:, 3] == image_z)
        & (CLIFFORD_SIGN[:, 3] == sign_z)
    )[0]
    return int(hit[0])


def _build_compose() -> np.ndarray:
    comp = np.zeros((24, 24), dtype=np.int8)
    for a in range(24):
        for b in range(24):
            # Apply b first, then a.
            imgs = []
            for s in (1, 3):
                mid, sg = CLIFFORD_IMAGE[b, s], CLIFFORD_SIGN[b, s]
                imgs.append((CLIFFORD_IMAGE[a, mid], sg ^ CLIFFORD_SIGN[a, mid]))
            comp[a, b] = _find_clifford(imgs[0][0], imgs[0][1], imgs[1][0], imgs[1][1])
    return comp


CLIFFORD_COMPOSE = _build_compose()
CLIFFORD_COMPOSE.setflags(write=False)
IDENTITY_CLIFFORD = 0
HADAMARD = _find_clifford(3, False, 1, False)
PHASE_S = _find_clifford(2, False, 3, False)
CLIFFORD_INVERSE = np.array(
    [int(np.nonzero(CLIFFORD_COMPOSE[a] == IDENTITY_CLIFFORD)[0][0]) for a in range(24)], dtype=np.int8
)


def compose_cliffords(a: int, b: int) -> int:
    """Index of the Clifford that applies ``b`` first and then ``a``."""
    return int(CLIFFORD_COMPOSE[a, b])


class Clifford1Q(NamedTuple):
    """Single-qubit Clifford ``index`` acting on ``qubit``."""

    qubit: int
    index: int


class CNOT(NamedTuple):
    control: int
    target: int


Gate = Union[Clifford1Q, CNOT]


def _check_gate(gate: Gate, n: int) -> None:
    sites = (gate.qubit,) if isinstance(gate, Clifford1Q) else (gate.control, gate.target)
    for q in sites:
        if not 0 <= q < n:
            raise IndexError(f"gate site {q} outside [0, {n})")
    if isinstance(gate, CNOT) and gate.control == gate.target:
        raise ValueError("CNOT control and target must differ")
    if isinstance(gate, Clifford1Q) and not 0 <= gate.index < N_CLIFFORDS:
        raise ValueError("Clifford index must lie in [0, 24)")


# --------------------------------------------------------------------------
# Vectorised conjugation of Pauli rows, in place.
# x, z: bool arrays (rows, n); s: bool array (rows,).


def conjugate_rows_single(x, z, s, qubit: int, index: int) -> None:
    sym = symbols_from_bits(x[:, qubit], z[:, qubit])
    s ^= CLIFFORD_SIGN[index, sym]
    new = CLIFFORD_IMAGE[index, sym]
    x[:, qubit] = X_OF_SYMBOL[new]
    z[:, qubit] = Z_OF_SYMBOL[new]


def conjugate_rows_layer(x, z, s, indices: np.ndarray) -> None:
    """Conjugate by one single-qubit Clifford per qubit (``indices`` has length n)."""
    sym = symbols_from_bits(x, z)
    idx = np.broadcast_to(np.asarray(indices, dtype=np.intp), sym.shape)
    s ^= np.logical_xor.reduce(CLIFFORD_SIGN[idx, sym], axis=1)
    new = CLIFFORD_IMAGE[idx, sym]
    x[...] = X_OF_SYMBOL[new]
    z[...] = Z_OF_SYMBOL[new]


def conjugate_rows_cnots(x, z, s, controls: np.ndarray, targets: np.ndarray) -> None:
    """Conjugate by a set of CNOTs acting on disjoint qubit pairs."""
    if len(controls) == 0:
        return
    xc, zc = x[:, controls], z[:, controls]
    xt, zt = x[:, targets], z[:, targets]
    s ^= np.logical_xor.reduce(xc & zt & ~(xt ^ zc), axis=1)
    x[:, targets] = xt ^ xc
    z[:, controls] = zc ^ zt


def conjugate_rows(x, z, s, gate: Gate) -> None:
    if isinstance(gate, Clifford1Q):
        conjugate_rows_single(x, z, s, gate.qubit, gate.index)
    else:
        conjugate_rows_cnots(x, z, s, np.array([gate.control]), np.array([gate.target]))


def conjugate_pauli(gate: Gate, p: SignedPauli) -> SignedPauli:
    """Return ``g p g^dag`` exactly, including the sign."""
    _check_gate(gate, p.pauli.n)
    x = p.pauli.x[None, :].copy()
    z = p.pauli.z[None, :].copy()
    s = np.array([p.sign < 0])
    conjugate_rows(x, z, s, gate)
    return SignedPauli(PauliString(x[0], z[0]), -1 if s[0] else 1)


def product_phase(x1, z1, x2, z2) -> np.ndarray:
    """Exponent ``e`` (mod 4) with ``P1 P2 = i^e P3`` for Hermitian Paulis.

    Works on the last axis and broadcasts over leading axes.
    """
    x1 = np.asarray(x1, dtype=np.int8)
    z1 = np.asarray(z1, dtype=np.int8)
    x2 = np.asarray(x2, dtype=np.int8)
    z2 = np.asarray(z2, dtype=np.int8)
    g = np.where(
        (x1 == 1) & (z1 == 1),
        z2 - x2,
        np.where(x1 == 1, z2 * (2 * x2 - 1), np.where(z1 == 1, x2 * (1 - 2 * z2), 0)),
    )
    return np.sum(g, axis=-1) % 4


def multiply_signed(x1, z1, s1, x2, z2, s2):
    """Product of commuting signed Paulis, returned as (x, z, sign).

    Raises:
        ValueError: if any pair anticommutes (the product is not Hermitian).
    """
    e = (product_phase(x1, z1, x2, z2) + 2 * np.asarray(s1, np.int8) + 2 * np.asarray(s2, np.int8)) % 4
    if np.any(e % 2):
        raise ValueError("product of anticommuting Paulis is not Hermitian")
    return np.logical_xor(x1, x2), np.logical_xor(z1, z2), e == 2


# --------------------------------------------------------------------------
# Stabilizer tableau


class CliffordTableau:
    """Stabilizer state in destabilizer/stabilizer tableau form.

    Rows ``0..n-1`` are destabilizers and rows ``n..2n-1`` stabilizers.
    """

    def __init__(self, x: np.ndarray, z: np.ndarray, r: np.ndarray):
        self.x = np.asarray(x, dtype=bool)
        self.z = np.asarray(z, dtype=bool)
        self.r = np.asarray(r, dtype=bool)
        self.n = self.x.shape[1]
        if self.x.shape != (2 * self.n, self.n) or self.z.shape != self.x.shape or self.r.shape != (2 * self.n,):
            raise ValueError("inconsistent tableau shapes")

    @classmethod
    def zero_state(cls, n: int) -> "CliffordTableau":
        if n < 1:
            raise ValueError("need at least one qubit")
        eye = np.eye(n, dtype=bool)
        zero = np.zeros((n, n), dtype=bool)
        return cls(np.vstack([eye, zero]), np.vstack([zero, eye]), np.zeros(2 * n, bool))

    def copy(self) -> "CliffordTableau":
        return CliffordTableau(self.x.copy(), self.z.copy(), self.r.copy())

    # gates ---------------------------------------------------------------
    def apply(self, gate: Gate) -> "CliffordTableau":
        """Apply one gate in place and return ``self``."""
        _check_gate(gate, self.n)
        conjugate_rows(self.x, self.z, self.r, gate)
        return self

    def apply_gates(self, gates) -> "CliffordTableau":
        for g in gates:
            self.apply(g)
        return self

    def apply_clifford_layer(self, indices: np.ndarray) -> "CliffordTableau":
        conjugate_rows_layer(self.x, self.z, self.r, indices)
        return self

    def apply_cnot_layer(self, controls, targets) -> "CliffordTableau":
        conjugate_rows_cnots(self.x, self.z, self.r, np.asarray(controls), np.asarray(targets))
        return self

    # queries -------------------------------------------------------------
    def stabilizers(self) -> list[SignedPauli]:
        n = self.n
        return [
            SignedPauli(PauliString(self.x[n + i], self.z[n + i]), -1 if self.r[n + i] else 1) for i in range(n)
        ]

    def stabilizer_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Copies of the stabilizer rows as (x, z, sign) arrays."""
        n = self.n
        return self.x[n:].copy(), self.z[n:].copy(), self.r[n:].copy()

    def expectation(self, p: PauliString) -> int:
        """Exact expectation value of ``p``: +1, -1 or 0."""
        if p.n != self.n:
            raise ValueError(f"Pauli on {p.n} qubits, tableau on {self.n}")
        n = self.n
        sx, sz = self.x[n:], self.z[n:]
        anti = (np.count_nonzero(sx & p.z[None, :], axis=1) + np.count_nonzero(sz & p.x[None, :], axis=1)) % 2
        if np.any(anti):
            return 0
        dx, dz = self.x[:n], self.z[:n]
        coeff = (np.count_nonzero(dx & p.z[None, :], axis=1) + np.count_nonzero(dz & p.x[None, :], axis=1)) % 2
        ax = np.zeros(n, bool)
        az = np.zeros(n, bool)
        phase = 0
        for i in np.nonzero(coeff)[0]:
            row = n + i
            phase += 2 * int(self.r[row]) + int(product_phase(ax, az, self.x[row], self.z[row]))
            ax ^= self.x[row]
            az ^= self.z[row]
        if not (np.array_equal(ax, p.x) and np.array_equal(az, p.z)):
            raise RuntimeError("tableau is inconsistent")
        return -1 if phase % 4 == 2 else 1

    # measurement ---------------------------------------------------------
    def _rowsum_many(self, rows: np.ndarray, p: int) -> None:
        """Replace every row h in ``rows`` by P_p * P_h (with sign)."""
        e = (
            2 * self.r[rows].astype(np.int8)
            + 2 * int(self.r[p])
            + product_phase(self.x[p][None, :], self.z[p][None, :], self.x[rows], self.z[rows])
        ) % 4
        self.r[rows] = e == 2
        self.x[rows] ^= self.x[p]
        self.z[rows] ^= self.z[p]

    def measure(self, qubit: int, rng: np.random.Generator) -> int:
        """Measure ``qubit`` in Z, collapse in place, and return the bit."""
        n = self.n
        hits = np.nonzero(self.x[n:, qubit])[0]
        if hits.size:
            p = n + int(hits[0])
            others = np.nonzero(self.x[:, qubit])[0]
            others = others[others != p]
            if others.size:
                self._rowsum_many(others, p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, qubit] = True
            outcome = int(rng.integers(2))
            self.r[p] = bool(outcome)
            return outcome
        # Deterministic outcome: accumulate the stabilizers flagged by destabilizers.
        ax = np.zeros(n, bool)
        az = np.zeros(n, bool)
        phase = 0
        for i in np.nonzero(self.x[:n, qubit])[0]:
            row = n + i
            phase += 2 * int(self.r[row]) + int(product_phase(self.x[row], self.z[row], ax, az))
            ax ^= self.x[row]
            az ^= self.z[row]
        return int(phase % 4 == 2)

    def measure_all(self, rng: np.random.Generator) -> np.ndarray:
        """Measure every qubit in Z (qubit 0 first); returns a uint8 bit array."""
        return np.array([self.measure(q, rng) for q in range(self.n)], dtype=np.uint8)

    def __repr__(self):
        return "CliffordTableau(" + ", ".join(sp.label for sp in self.stabilizers()) + ")"


def pauli_expectation_stabilizer(t: CliffordTableau, p: PauliString) -> int:
    return t.expectation(p)


def tableau_apply(t: CliffordTableau, gate: Gate) -> CliffordTableau:
    """Return a new tableau with ``gate`` applied."""
    return t.copy().apply(gate)


def tableau_measure_z_all(t: CliffordTableau, rng: np.random.Generator) -> tuple[np.ndarray, CliffordTableau]:
    """Sample all-qubit Z outcomes; returns the bits and the collapsed copy."""
    out = t.copy()
    bits = out.measure_all(rng)
    return bits, out


def group_elements(x: np.ndarray, z: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All 2^k signed products of k mutually commuting generators.

    Row ``j`` is the product of the generators selected by the bits of ``j``
    (least significant bit = generator 0), so row 0 is the identity.
    """
    x = np.asarray(x, dtype=bool)
    z = np.asarray(z, dtype=bool)
    s = np.asarray(s, dtype=bool)
    k, n = x.shape
    gx = np.zeros((1, n), bool)
    gz = np.zeros((1, n), bool)
    gs = np.zeros(1, bool)
    for i in range(k):
        phase = product_phase(gx, gz, x[i][None, :], z[i][None, :])
        if np.any(phase % 2):
            raise ValueError("generators do not commute")
        gx = np.concatenate([gx, gx ^ x[i]])
        gz = np.concatenate([gz, gz ^ z[i]])
        gs = np.concatenate([gs, gs ^ s[i] ^ (phase == 2)])
    return gx, gz, gs
