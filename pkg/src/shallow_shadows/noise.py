"""Sparse Pauli-Lindblad noise and its twirled node/edge reduction.

Conventions:
    * A generator ``P_k`` with rate ``lam_k`` damps every Pauli that anticommutes
      with it by ``exp(-2 lam_k)``; its stochastic unravelling applies ``P_k``
      with probability ``(1 - exp(-2 lam_k)) / 2``.
    * After single-qubit twirling only the occupation pattern of a Pauli
      matters. Per CNOT-sublayer parity the reduced model has one exponent
      ``a_i`` per qubit and one exponent ``b_e`` per edge of that parity; a
      Pauli with occupation ``n`` is damped by
      ``exp(-sum_i a_i n_i - sum_e b_e [n_i or n_j])``.
    * Readout bit flips with probability ``p_i`` damp Z on qubit ``i`` by
      ``1 - 2 p_i``, recorded as the exponent ``-log(1 - 2 p_i)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .pauli import SYMBOLS, PauliString

PARITIES = ("even", "odd")


def _parity_index(parity) -> int:
    if parity in (0, "even"):
        return 0
    if parity in (1, "odd"):
        return 1
    raise ValueError(f"unknown parity {parity!r}")


def chain_edges(n: int, parity: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(parity, n - 1, 2)]


class SparsePauliLindblad:
    """Pauli-Lindblad generator set with non-negative rates.

    Args:
        n: Number of qubits.
        generators: Iterable of ``(PauliString, rate)``; each generator acts on
            one site or on two neighbouring sites.
    """

    def __init__(self, n: int, generators=()):
        gens = list(generators)
        self.n = n
        self.paulis = [p for p, _ in gens]
        self.rates = np.array([float(r) for _, r in gens], dtype=float)
        for p in self.paulis:
            if p.n != n:
                raise ValueError("generator size does not match n")
            sup = p.support
            if len(sup) == 0 or len(sup) > 2 or (len(sup) == 2 and sup[1] - sup[0] != 1):
                raise ValueError(f"generator {p.label} is not a single site or a chain edge")
        if np.any(~np.isfinite(self.rates)) or np.any(self.rates < 0):
            raise ValueError("rates must be finite and non-negative")
        k = len(gens)
        self.gen_x = np.array([p.x for p in self.paulis], dtype=np.uint8).reshape(k, n)
        self.gen_z = np.array([p.z for p in self.paulis], dtype=np.uint8).reshape(k, n)

    @property
    def firing_probabilities(self) -> np.ndarray:
        return 0.5 * (1.0 - np.exp(-2.0 * self.rates))

    def anticommutation(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Boolean matrix (rows, generators) of anticommutation with Pauli rows."""
        x = np.atleast_2d(np.asarray(x, dtype=np.uint8))
        z = np.atleast_2d(np.asarray(z, dtype=np.uint8))
        return ((x @ self.gen_z.T + z @ self.gen_x.T) & 1).astype(bool)

    def log_damping(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """``-log`` of the damping factor for each Pauli row."""
        return 2.0 * self.anticommutation(x, z) @ self.rates

    def damping_factor(self, p: PauliString) -> float:
        if p.n != self.n:
            raise ValueError("Pauli size does not match the model")
        return float(np.exp(-self.log_damping(p.x, p.z)[0]))

    def sample_errors(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``size`` independent error Paulis as boolean (size, n) x/z arrays."""
        if len(self.paulis) == 0:
            return np.zeros((size, self.n), bool), np.zeros((size, self.n), bool)
        fire = (rng.random((size, len(self.paulis))) < self.firing_probabilities).astype(np.uint8)
        return ((fire @ self.gen_x) & 1).astype(bool), ((fire @ self.gen_z) & 1).astype(bool)

    def sample_pauli_error(self, rng: np.random.Generator) -> PauliString:
        x, z = self.sample_errors(rng, 1)
        return PauliString(x[0], z[0])

    def scaled(self, factor: float) -> "SparsePauliLindblad":
        return SparsePauliLindblad(self.n, [(p, r * factor) for p, r in zip(self.paulis, self.rates)])

    # serialisation --------------------------------------------------------
    def to_json(self) -> dict:
        nodes, edges = [], []
        for p, r in zip(self.paulis, self.rates):
            sup = p.support
            word = "".join(SYMBOLS[p.symbols[q]] for q in sup)
            if len(sup) == 1:
                nodes.append({"qubit": sup[0], "pauli": word, "rate": float(r)})
            else:
                edges.append({"qubits": list(sup), "pauli": word, "rate": float(r)})
        return {"nodes": nodes, "edges": edges}

    @classmethod
    def from_json(cls, n: int, data: dict) -> "SparsePauliLindblad":
        gens = []
        for item in data.get("nodes", []):
            sym = np.zeros(n, dtype=np.int8)
            sym[int(item["qubit"])] = SYMBOLS.index(item["pauli"])
            gens.append((PauliString.from_symbols(sym), float(item["rate"])))
        for item in data.get("edges", []):
            sym = np.zeros(n, dtype=np.int8)
            for q, ch in zip(item["qubits"], item["pauli"]):
                sym[int(q)] = SYMBOLS.index(ch)
            gens.append((PauliString.from_symbols(sym), float(item["rate"])))
        return cls(n, gens)


def depolarizing_generators(n: int, site_rates=None, edge_rates=None) -> list[tuple[PauliString, float]]:
    """Symbol-symmetric generators.

    ``site_rates[i]`` spreads ``lam / 4`` over X, Y, Z on qubit ``i``, which damps
    every non-identity symbol there by ``exp(-lam)``. ``edge_rates`` maps an
    edge ``(i, i+1)`` to ``b``, spread as ``b / 16`` over the 15 non-identity
    two-qubit Paulis, which damps every Pauli touching the edge by ``exp(-b)``.
    """
    gens = []
    if site_rates is not None:
        for q, lam in enumerate(site_rates):
            if lam > 0:
                for s in (1, 2, 3):
                    sym = np.zeros(n, dtype=np.int8)
                    sym[q] = s
                    gens.append((PauliString.from_symbols(sym), lam / 4))
    for (i, j), b in (edge_rates or {}).items():
        if b > 0:
            for s in range(1, 16):
                sym = np.zeros(n, dtype=np.int8)
                sym[i], sym[j] = s // 4, s % 4
                gens.append((PauliString.from_symbols(sym), b / 16))
    return gens


@dataclass
class NoiseModel:
    """Ground-truth device noise: one generator set per CNOT-sublayer parity plus readout flips."""

    n: int
    even: SparsePauliLindblad
    odd: SparsePauliLindblad
    readout: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.readout is None:
            self.readout = np.zeros(self.n)
        self.readout = np.asarray(self.readout, dtype=float)
        if self.readout.shape != (self.n,):
            raise ValueError("need one readout probability per qubit")
        if np.any(self.readout < 0) or np.any(self.readout >= 0.5):
            raise ValueError("readout flip probabilities must lie in [0, 1/2)")
        for parity, layer in enumerate((self.even, self.odd)):
            if layer.n != self.n:
                raise ValueError("layer size does not match n")
            allowed = set(chain_edges(self.n, parity))
            for p in layer.paulis:
                if len(p.support) == 2 and tuple(p.support) not in allowed:
                    raise ValueError(f"two-qubit generator {p.label} is off the {PARITIES[parity]} edges")

    @classmethod
    def noiseless(cls, n: int) -> "NoiseModel":
        return cls(n, SparsePauliLindblad(n), SparsePauliLindblad(n), np.zeros(n))

    def layer(self, parity) -> SparsePauliLindblad:
        return (self.even, self.odd)[_parity_index(parity)]

    @property
    def readout_exponents(self) -> np.ndarray:
        return -np.log1p(-2.0 * self.readout)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "even": self.even.to_json(),
            "odd": self.odd.to_json(),
            "readout": [float(r) for r in self.readout],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NoiseModel":
        n = int(data["n"]) if "n" in data else len(data["readout"])
        return cls(
            n,
            SparsePauliLindblad.from_json(n, data.get("even", {})),
            SparsePauliLindblad.from_json(n, data.get("odd", {})),
            np.array(data.get("readout", [0.0] * n), dtype=float),
        )

    def fingerprint(self) -> str:
        """Short content hash of the canonical JSON form."""
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def random_noise_model(
    n: int,
    rng: np.random.Generator,
    node_range=(1e-3, 3e-2),
    edge_range=(1e-3, 1e-2),
    readout_range=(0.005, 0.02),
) -> NoiseModel:
    """Symbol-symmetric truth model with log-uniform node/edge exponents and uniform readout flips."""

    def loguniform(lo, hi, size):
        return np.exp(rng.uniform(np.log(lo), np.log(hi), size))

    layers = []
    for parity in (0, 1):
        nodes = loguniform(*node_range, n)
        edges = chain_edges(n, parity)
        edge_rates = dict(zip(edges, loguniform(*edge_range, len(edges))))
        layers.append(SparsePauliLindblad(n, depolarizing_generators(n, nodes, edge_rates)))
    readout = rng.uniform(*readout_range, n)
    return NoiseModel(n, layers[0], layers[1], readout)


# --------------------------------------------------------------------------
# twirled parameters


@dataclass
class TwirledNoiseParams:
    """Occupation-pattern damping exponents per sublayer parity plus readout.

    Attributes:
        nodes: array (2, n) of node exponents for the even and odd sublayers.
        edges: tuple of two arrays with one exponent per edge of that parity.
        readout: array (n,) of readout exponents.
    """

    n: int
    nodes: np.ndarray
    edges: tuple
    readout: np.ndarray

    def __post_init__(self):
        self.nodes = np.array(self.nodes, dtype=float).reshape(2, self.n)
        self.edges = tuple(np.array(e, dtype=float).reshape(-1) for e in self.edges)
        self.readout = np.array(self.readout, dtype=float).reshape(self.n)
        for parity in (0, 1):
            if self.edges[parity].size != len(chain_edges(self.n, parity)):
                raise ValueError("wrong number of edge exponents")
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError("exponents must be finite")

    @classmethod
    def zeros(cls, n: int) -> "TwirledNoiseParams":
        return cls(n, np.zeros((2, n)), (np.zeros(len(chain_edges(n, 0))), np.zeros(len(chain_edges(n, 1)))), np.zeros(n))

    @classmethod
    def uniform(cls, n: int, node: float = 0.0, edge: float = 0.0, readout: float = 0.0) -> "TwirledNoiseParams":
        z = cls.zeros(n)
        return cls(n, z.nodes + node, tuple(e + edge for e in z.edges), z.readout + readout)

    # vector form -----------------------------------------------------------
    @property
    def size(self) -> int:
        return 2 * self.n + self.edges[0].size + self.edges[1].size + self.n

    def to_vector(self) -> np.ndarray:
        """Flatten as [even nodes, even edges, odd nodes, odd edges, readout]."""
        return np.concatenate([self.nodes[0], self.edges[0], self.nodes[1], self.edges[1], self.readout])

    @classmethod
    def from_vector(cls, n: int, vec) -> "TwirledNoiseParams":
        vec = np.asarray(vec, dtype=float)
        ne, no = len(chain_edges(n, 0)), len(chain_edges(n, 1))
        if vec.size != 3 * n + ne + no:
            raise ValueError("parameter vector has the wrong length")
        parts = np.split(vec, np.cumsum([n, ne, n, no]))
        return cls(n, np.stack([parts[0], parts[2]]), (parts[1], parts[3]), parts[4])

    def vector_labels(self) -> list[str]:
        labels = [f"even.node[{i}]" for i in range(self.n)]
        labels += [f"even.edge[{i},{j}]" for i, j in chain_edges(self.n, 0)]
        labels += [f"odd.node[{i}]" for i in range(self.n)]
        labels += [f"odd.edge[{i},{j}]" for i, j in chain_edges(self.n, 1)]
        labels += [f"readout[{i}]" for i in range(self.n)]
        return labels

    def scaled(self, factor: float) -> "TwirledNoiseParams":
        return TwirledNoiseParams.from_vector(self.n, self.to_vector() * factor)

    # damping -----------------------------------------------------------
    def pattern_exponent(self, parity, occupation: np.ndarray) -> np.ndarray:
        """Total exponent of one sublayer for occupation rows (..., n)."""
        p = _parity_index(parity)
        occ = np.asarray(occupation, dtype=bool)
        out = occ @ self.nodes[p]
        for (i, j), b in zip(chain_edges(self.n, p), self.edges[p]):
            out = out + b * (occ[..., i] | occ[..., j])
        return out

    def edge_pattern_table(self, parity, edge_index: int) -> np.ndarray:
        """2x2 exponent table over (n_i, n_j) for one edge, node terms included."""
        p = _parity_index(parity)
        i, j = chain_edges(self.n, p)[edge_index]
        ai, aj, b = self.nodes[p, i], self.nodes[p, j], self.edges[p][edge_index]
        return np.array([[0.0, aj + b], [ai + b, ai + aj + b]])

    def min_pattern_exponent(self, parity) -> float:
        """Smallest exponent over non-empty occupation patterns (negative means amplification)."""
        p = _parity_index(parity)
        vals = []
        paired = set()
        for k, (i, j) in enumerate(chain_edges(self.n, p)):
            t = self.edge_pattern_table(p, k)
            vals.extend([t[0, 1], t[1, 0], t[1, 1]])
            paired.update((i, j))
        vals.extend(self.nodes[p, q] for q in range(self.n) if q not in paired)
        return float(min(vals))

    # serialisation -------------------------------------------------------
    def to_json(self) -> dict:
        out = {"n": self.n}
        for p, name in enumerate(PARITIES):
            out[name] = {
                "nodes": [{"qubit": q, "exponent": float(a)} for q, a in enumerate(self.nodes[p])],
                "edges": [
                    {"qubits": [i, j], "exponent": float(b)} for (i, j), b in zip(chain_edges(self.n, p), self.edges[p])
                ],
            }
        out["readout"] = [float(r) for r in self.readout]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "TwirledNoiseParams":
        n = int(data["n"])
        nodes = np.zeros((2, n))
        edges = []
        for p, name in enumerate(PARITIES):
            for item in data[name]["nodes"]:
                nodes[p, int(item["qubit"])] = float(item["exponent"])
            lookup = {tuple(item["qubits"]): float(item["exponent"]) for item in data[name]["edges"]}
            edges.append(np.array([lookup.get(e, 0.0) for e in chain_edges(n, p)]))
        return cls(n, nodes, tuple(edges), np.array(data["readout"], dtype=float))


def _twirled_anticommute(sym_a: int, sym_b: int, occ_a: int, occ_b: int) -> float:
    """Probability that a generator anticommutes with a twirled Pauli.

    The generator has symbols ``sym_a, sym_b`` on two sites and the twirled
    Pauli has independent uniform non-identity symbols on occupied sites.
    """
    prod = 1.0
    for sym, occ in ((sym_a, occ_a), (sym_b, occ_b)):
        if sym and occ:
            prod *= -1.0 / 3.0
    return 0.5 * (1.0 - prod)


def twirl_reduce(model: NoiseModel) -> TwirledNoiseParams:
    """Average the log-damping of each layer over twirled symbols and reparametrise.

    For each edge ``(i, j)`` of a parity the averaged exponents of the patterns
    (1,0), (0,1), (1,1) are ``alpha, beta, gamma``; they map exactly onto
    ``a_i = gamma - beta``, ``a_j = gamma - alpha`` and ``b = alpha + beta - gamma``.
    Qubits outside the parity's edges only carry a node exponent.
    """
    n = model.n
    nodes = np.zeros((2, n))
    edges = []
    for p in (0, 1):
        layer = model.layer(p)
        edge_list = chain_edges(n, p)
        partner = {}
        for i, j in edge_list:
            partner[i] = (i, j)
            partner[j] = (i, j)
        # pattern exponents keyed by edge (or by the lone site)
        table: dict[tuple, np.ndarray] = {}
        for pauli, rate in zip(layer.paulis, layer.rates):
            sup = pauli.support
            sym = pauli.symbols
            key = partner.get(sup[0], (sup[0],))
            if len(key) == 1:
                table.setdefault(key, np.zeros(1))[0] += 2 * rate * _twirled_anticommute(sym[sup[0]], 0, 1, 0)
                continue
            i, j = key
            t = table.setdefault(key, np.zeros(3))
            for k, (oi, oj) in enumerate(((1, 0), (0, 1), (1, 1))):
                t[k] += 2 * rate * _twirled_anticommute(sym[i], sym[j], oi, oj)
        for key, vals in table.items():
            if len(key) == 1:
                nodes[p, key[0]] = vals[0]
        e_vals = np.zeros(len(edge_list))
        for k, (i, j) in enumerate(edge_list):
            alpha, beta, gamma = table.get((i, j), np.zeros(3))
            nodes[p, i] = gamma - beta
            nodes[p, j] = gamma - alpha
            e_vals[k] = alpha + beta - gamma
        edges.append(e_vals)
    return TwirledNoiseParams(n, nodes, tuple(edges), model.readout_exponents)


def readout_flip(bits: np.ndarray, probs, rng: np.random.Generator) -> np.ndarray:
    """Flip bit ``i`` of every row independently with probability ``probs[i]``."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or np.any(probs >= 0.5):
        raise ValueError("flip probabilities must lie in [0, 1/2)")
    bits = np.asarray(bits, dtype=np.uint8)
    return bits ^ (rng.random(bits.shape) < probs).astype(np.uint8)
