"""Monte-Carlo simulation of noisy randomized measurements.

Each circuit is run once without noise to obtain its outcome distribution,
which for a stabilizer state is uniform on an affine subspace. Noise is then
handled per shot with Pauli frames: errors injected after every CNOT sublayer
are pushed through the remaining gates and flip the measured bits by the
X-part of the propagated frame. Readout flips are applied last.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import dense, gf2
from .circuits import BrickworkCircuit, EnsembleSpec, edge_arrays, sample_circuit
from .noise import NoiseModel, SparsePauliLindblad, readout_flip
from .pauli import (
    CNOT,
    HADAMARD,
    Clifford1Q,
    CliffordTableau,
    PauliString,
    SignedPauli,
    conjugate_rows_cnots,
    conjugate_rows_layer,
    group_elements,
)

STATE_NAMES = ("zero", "plus", "cluster", "ghz")
# Stabilizer groups are enumerated explicitly up to this many qubits.
MAX_GROUP_QUBITS = 24


@dataclass
class PreparedState:
    """A state handed to the measurement ensemble.

    Attributes:
        kind: ``"stabilizer"`` (any n) or ``"dense"`` (n <= 12).
        n: Number of qubits.
        label: Name recorded in dataset headers.
        gates: Clifford preparation circuit from |0...0>, if known.
        tableau: Stabilizer tableau (stabilizer kind).
        statevector: Amplitudes with qubit 0 most significant (dense kind).
        prep_noise: Optional Pauli channel applied once after preparation.
    """

    kind: str
    n: int
    label: str
    gates: list = field(default_factory=list)
    tableau: CliffordTableau | None = None
    statevector: np.ndarray | None = None
    prep_noise: SparsePauliLindblad | None = None

    def __post_init__(self):
        if self.kind not in ("stabilizer", "dense"):
            raise ValueError(f"unknown state kind {self.kind!r}")
        if self.kind == "dense":
            if self.n > dense.MAX_DENSE_QUBITS:
                raise ValueError(f"dense states are limited to {dense.MAX_DENSE_QUBITS} qubits")
            if self.statevector is None:
                self.statevector = dense.apply_gates(dense.zero_state(self.n), self.gates, self.n)
        elif self.tableau is None:
            self.tableau = CliffordTableau.zero_state(self.n).apply_gates(self.gates)
        if self.prep_noise is not None and self.prep_noise.n != self.n:
            raise ValueError("preparation noise acts on a different number of qubits")

    def with_prep_noise(self, noise: SparsePauliLindblad | None) -> "PreparedState":
        return PreparedState(self.kind, self.n, self.label, list(self.gates), self.tableau, self.statevector, noise)

    def as_dense(self) -> "PreparedState":
        """Dense copy of a state built from a recorded preparation circuit."""
        if self.kind == "dense":
            return self
        zero = CliffordTableau.zero_state(self.n).apply_gates(self.gates)
        if not (np.array_equal(zero.x, self.tableau.x) and np.array_equal(zero.z, self.tableau.z)):
            raise ValueError("state was not built from its recorded preparation circuit")
        return PreparedState("dense", self.n, self.label, list(self.gates), prep_noise=self.prep_noise)


def _cz(a: int, b: int) -> list:
    return [Clifford1Q(b, HADAMARD), CNOT(a, b), Clifford1Q(b, HADAMARD)]


def prepare_named_state(
    name: str, n: int, kind: str = "stabilizer", prep_noise: SparsePauliLindblad | None = None
) -> PreparedState:
    """Build one of the named states: zero, plus, cluster (CZ chain on |+>) or ghz."""
    if n < 1:
        raise ValueError("need at least one qubit")
    if name == "zero":
        gates = []
    elif name == "plus":
        gates = [Clifford1Q(q, HADAMARD) for q in range(n)]
    elif name == "cluster":
        gates = [Clifford1Q(q, HADAMARD) for q in range(n)]
        for q in range(n - 1):
            gates += _cz(q, q + 1)
    elif name == "ghz":
        gates = [Clifford1Q(0, HADAMARD)] + [CNOT(q, q + 1) for q in range(n - 1)]
    else:
        raise ValueError(f"unknown state {name!r}; choose from {STATE_NAMES}")
    return PreparedState(kind, n, name, gates, prep_noise=prep_noise)


# --------------------------------------------------------------------------
# datasets


@dataclass
class ShadowDataset:
    """Circuits (by seed) with their measured bitstrings.

    ``shots[i, j]`` is the j-th outcome of circuit i as a uint8 bit array with
    qubit 0 first.
    """

    spec: EnsembleSpec
    seeds: np.ndarray
    shots: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.seeds = np.asarray(self.seeds, dtype=np.uint64)
        self.shots = np.asarray(self.shots, dtype=np.uint8)
        if self.shots.ndim != 3 or self.shots.shape[0] != self.seeds.size or self.shots.shape[2] != self.spec.n:
            raise ValueError("shots must have shape (n_circuits, n_shots, n)")

    @property
    def n_circuits(self) -> int:
        return int(self.seeds.size)

    @property
    def n_shots(self) -> int:
        return int(self.shots.shape[1])

    def circuit(self, i: int) -> BrickworkCircuit:
        return sample_circuit(self.spec, int(self.seeds[i]))

    def circuits(self) -> Iterator[BrickworkCircuit]:
        for i in range(self.n_circuits):
            yield self.circuit(i)

    def clifford_array(self) -> np.ndarray:
        """Single-qubit Clifford indices of every circuit, shape (K, 2d+1, n)."""
        return np.stack([c.cliffords for c in self.circuits()])

    def subset(self, circuits=None, shots=None) -> "ShadowDataset":
        circuits = slice(None) if circuits is None else circuits
        shots = slice(None) if shots is None else shots
        return ShadowDataset(self.spec, self.seeds[circuits], self.shots[circuits][:, shots], dict(self.metadata))

    def header(self) -> dict:
        head = {"type": "header", "spec": self.spec.to_dict()}
        head.update(self.metadata)
        head["n_circuits"] = self.n_circuits
        head["n_shots"] = self.n_shots
        return head

    def to_jsonl(self, path) -> None:
        """Write one header line, then one ``{"seed", "shots"}`` record per circuit."""
        chars = np.array(["0", "1"])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for seed, block in zip(self.seeds, self.shots):
                strings = ["".join(row) for row in chars[block]]
                fh.write(json.dumps({"seed": int(seed), "shots": strings}) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "ShadowDataset":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        head = json.loads(lines[0])
        if head.get("type") != "header":
            raise ValueError("missing dataset header")
        spec = EnsembleSpec.from_dict(head.pop("spec"))
        head.pop("type")
        head.pop("n_circuits", None)
        head.pop("n_shots", None)
        seeds, shots = [], []
        for line in lines[1:]:
            rec = json.loads(line)
            seeds.append(rec["seed"])
            shots.append([np.frombuffer(s.encode(), dtype=np.uint8) - ord("0") for s in rec["shots"]])
        shot_arr = np.array(shots, dtype=np.uint8).reshape(len(seeds), -1, spec.n)
        return cls(spec, np.array(seeds, dtype=np.uint64), shot_arr, head)


def circuit_seed(master: int, i: int) -> int:
    """Seed of circuit ``i`` derived from the master seed."""
    return int(np.random.SeedSequence(master, spawn_key=(i,)).generate_state(1, np.uint64)[0])


def shot_rng(master: int, i: int) -> np.random.Generator:
    """Independent stream for the outcomes and noise of circuit ``i``."""
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=(i, 1)))


def _ideal_samples(state: PreparedState, circuit: BrickworkCircuit, n_shots: int, rng) -> np.ndarray:
    n = state.n
    if state.kind == "dense":
        psi = dense.apply_gates(state.statevector, circuit.gate_list(), n)
        idx = rng.choice(2**n, size=n_shots, p=dense.probabilities(psi))
        return ((idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1).astype(np.uint8)
    t = state.tableau.copy()
    circuit.conjugate_rows(t.x, t.z, t.r)
    stab_x = t.x[n:].astype(np.uint8)
    b0 = t.measure_all(rng)
    coeff = rng.integers(0, 2, size=(n_shots, n), dtype=np.uint8)
    return (b0[None, :] ^ (coeff @ stab_x) & 1).astype(np.uint8)


def _frame_flips(
    spec: EnsembleSpec, circuit: BrickworkCircuit, truth: NoiseModel, prep: SparsePauliLindblad | None, n_shots, rng
) -> np.ndarray:
    """X-part of the propagated per-shot error frames."""
    n = spec.n
    if prep is not None:
        fx, fz = prep.sample_errors(rng, n_shots)
    else:
        fx = np.zeros((n_shots, n), bool)
        fz = np.zeros((n_shots, n), bool)
    sign = np.zeros(n_shots, bool)
    for layer in range(spec.n_sublayers):
        parity = layer % 2
        conjugate_rows_layer(fx, fz, sign, circuit.cliffords[layer])
        conjugate_rows_cnots(fx, fz, sign, *edge_arrays(spec, parity))
        ex, ez = truth.layer(parity).sample_errors(rng, n_shots)
        fx ^= ex
        fz ^= ez
    conjugate_rows_layer(fx, fz, sign, circuit.cliffords[-1])
    return fx.astype(np.uint8)


def simulate_circuit(
    state: PreparedState,
    circuit: BrickworkCircuit,
    truth: NoiseModel | None,
    n_shots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Outcomes (n_shots, n) of one circuit with per-shot noise."""
    spec = circuit.spec
    bits = _ideal_samples(state, circuit, n_shots, rng)
    if truth is not None or state.prep_noise is not None:
        model = truth if truth is not None else NoiseModel.noiseless(spec.n)
        bits ^= _frame_flips(spec, circuit, model, state.prep_noise, n_shots, rng)
    if truth is not None and np.any(truth.readout):
        bits = readout_flip(bits, truth.readout, rng)
    return bits


def acquire_dataset(
    state: PreparedState,
    spec: EnsembleSpec,
    truth: NoiseModel | None = None,
    n_circuits: int = 10000,
    n_shots: int = 100,
    seed: int | np.random.Generator = 0,
    timestamp: str | None = None,
) -> ShadowDataset:
    """Simulate ``n_circuits`` random circuits with ``n_shots`` shots each.

    Noise from ``truth`` is resampled independently for every shot. Circuit
    ``i`` is generated from :func:`circuit_seed` and its outcomes from
    :func:`shot_rng`, so results depend only on the master seed.
    """
    if state.n != spec.n:
        raise ValueError(f"state has {state.n} qubits, ensemble {spec.n}")
    if truth is not None and truth.n != spec.n:
        raise ValueError("noise model acts on a different number of qubits")
    if n_circuits < 1 or n_shots < 1:
        raise ValueError("need at least one circuit and one shot")
    master = int(seed.integers(2**63)) if isinstance(seed, np.random.Generator) else int(seed)
    seeds = np.empty(n_circuits, dtype=np.uint64)
    shots = np.empty((n_circuits, n_shots, spec.n), dtype=np.uint8)
    for i in range(n_circuits):
        seeds[i] = circuit_seed(master, i)
        circuit = sample_circuit(spec, int(seeds[i]))
        shots[i] = simulate_circuit(state, circuit, truth, n_shots, shot_rng(master, i))
    metadata = {
        "state": state.label,
        "noise": truth.fingerprint() if truth is not None else "noiseless",
        "prep_noise": None if state.prep_noise is None else state.prep_noise.to_json(),
        "master_seed": master,
        "timestamp": timestamp,
    }
    return ShadowDataset(spec, seeds, shots, metadata)


# --------------------------------------------------------------------------
# exact reference values


def stabilizer_group(state: PreparedState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All 2^n signed stabilizers of a stabilizer state (n <= 24)."""
    if state.kind != "stabilizer":
        raise ValueError("stabilizer group needs a stabilizer state")
    if state.n > MAX_GROUP_QUBITS:
        raise ValueError(f"group enumeration limited to {MAX_GROUP_QUBITS} qubits")
    return group_elements(*state.tableau.stabilizer_arrays())


def _prep_damping(state: PreparedState, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    if state.prep_noise is None:
        return np.ones(x.shape[0])
    return np.exp(-state.prep_noise.log_damping(x, z))


def exact_expectation(state: PreparedState, p: PauliString | SignedPauli) -> float:
    """Expectation value of a Pauli on the (possibly noisy) prepared state."""
    sign = 1
    if isinstance(p, SignedPauli):
        sign, p = p.sign, p.pauli
    if state.kind == "stabilizer":
        ideal = float(state.tableau.expectation(p))
    else:
        ideal = dense.expectation(state.statevector, p)
    return sign * ideal * float(_prep_damping(state, p.x[None, :], p.z[None, :])[0])


def exact_fidelity(state: PreparedState) -> float:
    """Overlap of the noisy prepared state with its ideal (pure) version."""
    if state.kind == "dense":
        rho = np.outer(state.statevector, state.statevector.conj())
        if state.prep_noise is not None:
            rho = _dense_channel(rho, state.prep_noise)
        return float(np.real(state.statevector.conj() @ rho @ state.statevector))
    x, z, _ = stabilizer_group(state)
    return float(_prep_damping(state, x, z).mean())


def exact_purity(state: PreparedState, region) -> float:
    """Tr(rho_A^2) of the reduced state on the qubits in ``region``."""
    region = np.asarray(sorted(set(int(q) for q in region)), dtype=np.intp)
    n = state.n
    outside = np.setdiff1d(np.arange(n), region)
    if state.kind == "dense":
        rho = np.outer(state.statevector, state.statevector.conj())
        if state.prep_noise is not None:
            rho = _dense_channel(rho, state.prep_noise)
        t = rho.reshape([2] * (2 * n))
        keep = list(region)
        perm = keep + list(outside) + [n + q for q in keep] + [n + q for q in outside]
        t = t.transpose(perm).reshape(2 ** len(keep), 2 ** len(outside), 2 ** len(keep), 2 ** len(outside))
        red = np.einsum("aibi->ab", t)
        return float(np.real(np.trace(red @ red)))
    sx, sz, _ = state.tableau.stabilizer_arrays()
    bits = np.concatenate([sx[:, outside], sz[:, outside]], axis=1)
    combos = gf2.left_nullspace(bits).astype(bool)
    gx = (combos.astype(np.uint8) @ sx.astype(np.uint8) & 1).astype(bool)
    gz = (combos.astype(np.uint8) @ sz.astype(np.uint8) & 1).astype(bool)
    x, z, _ = group_elements(gx, gz, np.zeros(len(gx), bool))
    damp = _prep_damping(state, x, z)
    return float(np.sum(damp**2) / 2 ** len(region))


def _dense_channel(rho: np.ndarray, channel: SparsePauliLindblad) -> np.ndarray:
    """Apply each generator's channel (1-p) rho + p P rho P exactly."""
    return dense.density_pauli_channel(rho, channel.paulis, channel.firing_probabilities)
