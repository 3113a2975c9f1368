"""Twirled-CNOT brickwork measurement circuits on an open chain.

A depth-``d`` circuit has ``2d`` CNOT sublayers (even edges first, then odd,
repeated ``d`` times). Each sublayer is preceded by a layer of independent
uniformly random single-qubit Cliffords and a final Clifford layer precedes the
Z measurement, so there are ``2d + 1`` Clifford layers in total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .pauli import CNOT, N_CLIFFORDS, Clifford1Q, Gate, conjugate_rows_cnots, conjugate_rows_layer


@dataclass(frozen=True)
class EnsembleSpec:
    """Qubit count ``n`` and twirled-CNOT depth ``depth`` of the brickwork ensemble."""

    n: int
    depth: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one qubit")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")

    @property
    def n_sublayers(self) -> int:
        return 2 * self.depth

    @property
    def n_clifford_layers(self) -> int:
        return 2 * self.depth + 1

    def edges(self, parity: int) -> list[tuple[int, int]]:
        """Nearest-neighbour pairs (i, i+1) with ``i % 2 == parity``."""
        return [(i, i + 1) for i in range(parity, self.n - 1, 2)]

    @property
    def even_edges(self) -> list[tuple[int, int]]:
        return self.edges(0)

    @property
    def odd_edges(self) -> list[tuple[int, int]]:
        return self.edges(1)

    def sublayer_parity(self, s: int) -> int:
        return s % 2

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.depth}

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleSpec":
        return cls(int(data["n"]), int(data["d"]))


@dataclass(frozen=True, eq=False)
class BrickworkCircuit:
    """One sampled circuit: Clifford indices per layer plus the fixed CNOT pattern."""

    spec: EnsembleSpec
    cliffords: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        c = np.asarray(self.cliffords, dtype=np.int8)
        if c.shape != (self.spec.n_clifford_layers, self.spec.n):
            raise ValueError(f"expected Clifford array of shape {(self.spec.n_clifford_layers, self.spec.n)}")
        if np.any((c < 0) | (c >= N_CLIFFORDS)):
            raise ValueError("Clifford indices must lie in [0, 24)")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "cliffords", c)

    def layers(self) -> Iterator[tuple[str, object]]:
        """Temporal layers: ``("clifford", indices)`` or ``("cnot", parity)``."""
        for s in range(self.spec.n_sublayers):
            yield "clifford", self.cliffords[s]
            yield "cnot", self.spec.sublayer_parity(s)
        yield "clifford", self.cliffords[-1]

    def gate_list(self) -> list[Gate]:
        """Gates in temporal order."""
        gates: list[Gate] = []
        for kind, arg in self.layers():
            if kind == "clifford":
                gates.extend(Clifford1Q(q, int(c)) for q, c in enumerate(arg))
            else:
                gates.extend(CNOT(a, b) for a, b in self.spec.edges(arg))
        return gates

    def conjugate_rows(self, x: np.ndarray, z: np.ndarray, s: np.ndarray) -> None:
        """Map rows P to U P U^dag in place (x, z of shape (rows, n); s of shape (rows,))."""
        for kind, arg in self.layers():
            if kind == "clifford":
                conjugate_rows_layer(x, z, s, arg)
            else:
                ctrl, tgt = edge_arrays(self.spec, arg)
                conjugate_rows_cnots(x, z, s, ctrl, tgt)

    def to_json(self, explicit: bool = False) -> dict:
        """Seed form when a seed is known, otherwise (or if asked) explicit Cliffords."""
        out = {"n": self.spec.n, "d": self.spec.depth}
        if self.seed is not None and not explicit:
            out["seed"] = int(self.seed)
        else:
            out["cliffords"] = self.cliffords.astype(int).tolist()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "BrickworkCircuit":
        spec = EnsembleSpec(int(data["n"]), int(data["d"]))
        if "cliffords" in data:
            return cls(spec, np.array(data["cliffords"], dtype=np.int8), data.get("seed"))
        return sample_circuit(spec, int(data["seed"]))


_EDGE_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def edge_arrays(spec: EnsembleSpec, parity: int) -> tuple[np.ndarray, np.ndarray]:
    """Control and target index arrays of one sublayer parity."""
    key = (spec.n, parity)
    if key not in _EDGE_CACHE:
        e = spec.edges(parity)
        _EDGE_CACHE[key] = (np.array([a for a, _ in e], dtype=np.intp), np.array([b for _, b in e], dtype=np.intp))
    return _EDGE_CACHE[key]


def sample_circuit(spec: EnsembleSpec, seed: int) -> BrickworkCircuit:
    """Draw every Clifford index i.i.d. uniformly from a PCG64 stream seeded by ``seed``."""
    rng = np.random.default_rng(np.uint64(seed))
    cliffords = rng.integers(0, N_CLIFFORDS, size=(spec.n_clifford_layers, spec.n), dtype=np.int8)
    return BrickworkCircuit(spec, cliffords, int(seed))


def circuit_to_gate_list(c: BrickworkCircuit) -> list[Gate]:
    return c.gate_list()


def expected_gate_counts(spec: EnsembleSpec) -> tuple[int, int]:
    """(single-qubit gates, CNOTs) in a depth-``d`` circuit."""
    n, d = spec.n, spec.depth
    return n * (2 * d + 1), d * (n // 2 + (n - 1) // 2)
