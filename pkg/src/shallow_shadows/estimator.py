"""Error-mitigated shadow estimates.

A snapshot of circuit U and outcome b has Pauli components
v(P) = <b| U P U^dag |b>, which is +-1 when U P U^dag is diagonal and 0
otherwise. A linear property Tr(O rho) is estimated by

    (1 / 2^n) sum_P inv_w(P) v(P) o(P),      o(P) = Tr(O P),

averaged over snapshots. Besides the generic tensor-network contraction,
three closed-form paths avoid building snapshot MPS:

* Pauli observables: propagate P through each circuit once.
* Stabilizer target states: o is supported on the stabilizer group, and only
  elements mapped to diagonal Paulis contribute. They form a subgroup whose
  character sum over outcomes is a Walsh-Hadamard transform.
* Subsystem purity: same idea restricted to Paulis supported on the subsystem,
  combined over pairs of snapshots from different circuits.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field

import numpy as np

from . import dense, gf2
from .circuits import BrickworkCircuit, EnsembleSpec, edge_arrays
from .mps import PauliBasisMps, contract_three
from .noise import TwirledNoiseParams
from .pauli import (
    CLIFFORD_IMAGE,
    CLIFFORD_INVERSE,
    CLIFFORD_SIGN,
    CNOT,
    Clifford1Q,
    PauliString,
    SignedPauli,
    conjugate_pauli,
    conjugate_rows_cnots,
    conjugate_rows_layer,
    product_phase,
)
from .simulate import PreparedState, ShadowDataset
from .weights import build_weights

# Dense lookup tables of support-only weights are used up to this many qubits.
MAX_TABLE_QUBITS = 22


# --------------------------------------------------------------------------
# conjugation as signed permutations of the Pauli basis


@functools.lru_cache(maxsize=None)
def _clifford_matrix(index: int) -> np.ndarray:
    """M[P, Q] = sign when C P C^dag = sign * Q."""
    m = np.zeros((4, 4))
    for p in range(4):
        m[p, CLIFFORD_IMAGE[index, p]] = -1.0 if CLIFFORD_SIGN[index, p] else 1.0
    return m


@functools.lru_cache(maxsize=None)
def _cnot_matrix() -> np.ndarray:
    m = np.zeros((16, 16))
    for a in range(4):
        for b in range(4):
            img = conjugate_pauli(CNOT(0, 1), SignedPauli(PauliString.from_symbols([a, b])))
            q = img.pauli.symbols
            m[4 * a + b, 4 * q[0] + q[1]] = img.sign
    return m


def _apply_conjugation(mps: PauliBasisMps, gate, inverse: bool = False) -> None:
    """Replace f by f o Ad_g (or f o Ad_{g^dag} when ``inverse``) in place."""
    if isinstance(gate, Clifford1Q):
        idx = int(CLIFFORD_INVERSE[gate.index]) if inverse else gate.index
        mps.apply_site(gate.qubit, _clifford_matrix(idx))
        return
    if abs(gate.control - gate.target) != 1:
        raise ValueError("only nearest-neighbour CNOTs have a chain MPO")
    m = _cnot_matrix()
    if gate.control > gate.target:
        perm = (4 * (np.arange(16) % 4) + np.arange(16) // 4)
        m = m[np.ix_(perm, perm)]
    mps.apply_pair(min(gate.control, gate.target), m, cutoff=1e-14)


def snapshot_vector(circuit: BrickworkCircuit, bits) -> PauliBasisMps:
    """Pauli components of the snapshot U^dag |b><b| U as an exact MPS."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (circuit.spec.n,):
        raise ValueError("bitstring length does not match the circuit")
    mps = PauliBasisMps.product([[1.0, 0.0, 0.0, -1.0 if b else 1.0] for b in bits])
    for gate in reversed(circuit.gate_list()):
        _apply_conjugation(mps, gate)
    return mps.compress(1e-14)


# --------------------------------------------------------------------------
# observables


@dataclass
class ObservableVector:
    """o(P) = Tr(O P) together with what is needed for the fast paths.

    Attributes:
        kind: ``"pauli"``, ``"projector"``, ``"stabilizer"`` or ``"mps"``.
        label: Human-readable descriptor.
        mps: The Pauli-basis vector (may be ``None`` until requested).
        pauli: Signed Pauli for the ``"pauli"`` kind.
        target: Prepared stabilizer state for the ``"stabilizer"`` kind.
    """

    kind: str
    n: int
    label: str
    mps: PauliBasisMps | None = None
    pauli: SignedPauli | None = None
    target: PreparedState | None = None

    def vector(self) -> PauliBasisMps:
        if self.mps is None:
            if self.kind == "pauli":
                self.mps = PauliBasisMps.basis_vector(self.pauli.pauli, float(self.pauli.sign) * 2.0**self.n)
            elif self.kind == "stabilizer":
                self.mps = _state_vector_mps(self.target)
            else:
                raise ValueError(f"observable {self.label!r} has no vector")
        return self.mps

    def descriptor(self) -> dict:
        return {"kind": self.kind, "label": self.label, "n": self.n}


def pauli_observable(p) -> ObservableVector:
    """Observable O = P (a signed Pauli or a label such as ``"-XZI"``)."""
    if isinstance(p, str):
        p = SignedPauli.from_label(p)
    elif isinstance(p, PauliString):
        p = SignedPauli(p)
    return ObservableVector("pauli", p.pauli.n, p.label, pauli=p)


def projector_observable(bits) -> ObservableVector:
    """O = |b><b|: per-site (1, 0, 0, (-1)^b_i)."""
    bits = np.asarray(bits, dtype=np.uint8)
    mps = PauliBasisMps.product([[1.0, 0.0, 0.0, -1.0 if b else 1.0] for b in bits])
    return ObservableVector("projector", bits.size, "|" + "".join(map(str, bits)) + ">", mps=mps)


def _state_vector_mps(state: PreparedState) -> PauliBasisMps:
    """<psi|P|psi> by conjugating the |0><0| vector through the inverse preparation circuit."""
    mps = PauliBasisMps.product([[1.0, 0.0, 0.0, 1.0]] * state.n)
    for gate in state.gates:
        _apply_conjugation(mps, gate, inverse=True)
    return mps.compress(1e-14)


def _dense_state_mps(psi: np.ndarray, n: int, cutoff: float = 1e-12) -> PauliBasisMps:
    """Tensor-train decomposition of <psi|P|psi> over all 4^n Paulis."""
    stack = np.array([dense.single_pauli_matrix(s) for s in range(4)])
    phi = np.asarray(psi, dtype=complex).reshape((1,) + (2,) * n)
    for q in range(n):
        t = np.tensordot(stack, phi, axes=([2], [1 + q]))
        t = np.moveaxis(t, 1, 2 + q)
        t = np.moveaxis(t, 0, 1)
        phi = t.reshape((-1,) + (2,) * n)
    vals = np.real(phi.reshape(4**n, 2**n) @ np.conj(psi))
    tensors = []
    left = 1
    rest = vals.reshape(1, -1)
    for _ in range(n - 1):
        u, s, vt = np.linalg.svd(rest.reshape(left * 4, -1), full_matrices=False)
        keep = max(1, int(np.count_nonzero(s > cutoff * s[0])))
        tensors.append(u[:, :keep].reshape(left, 4, keep))
        rest = s[:keep, None] * vt[:keep]
        left = keep
    tensors.append(rest.reshape(left, 4, 1))
    return PauliBasisMps(tensors)


def fidelity_observable(target: PreparedState) -> ObservableVector:
    """O = |psi><psi| for a stabilizer or small dense target state."""
    if target.kind == "stabilizer":
        return ObservableVector("stabilizer", target.n, f"fidelity[{target.label}]", target=target)
    if target.kind == "dense":
        if target.n > 8:
            raise ValueError("dense fidelity targets are limited to 8 qubits")
        mps = _dense_state_mps(target.statevector, target.n)
        return ObservableVector("mps", target.n, f"fidelity[{target.label}]", mps=mps)
    raise ValueError(f"unsupported target kind {target.kind!r}")


# --------------------------------------------------------------------------
# reports


@dataclass
class EstimateReport:
    """Point estimate with its uncertainties.

    ``contributions`` holds the per-circuit mean contribution (one value per
    circuit) for linear properties, which is all the bootstrap needs.
    """

    observable: dict
    estimate: float
    bootstrap_std: float
    predicted_std: float | None
    mitigated: bool
    n_circuits: int
    n_shots: int
    contributions: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "observable": self.observable,
            "estimate": float(self.estimate),
            "bootstrap_std": float(self.bootstrap_std),
            "predicted_std": None if self.predicted_std is None else float(self.predicted_std),
            "mitigated": bool(self.mitigated),
            "K": int(self.n_circuits),
            "shots": int(self.n_shots),
        }


def reports_to_csv(reports, path) -> None:
    """Write one row per report (observable label, estimate, uncertainties)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["observable", "kind", "estimate", "bootstrap_std", "predicted_std", "mitigated", "K", "shots"])
        for r in reports:
            writer.writerow(
                [
                    r.observable.get("label"),
                    r.observable.get("kind"),
                    repr(float(r.estimate)),
                    repr(float(r.bootstrap_std)),
                    "" if r.predicted_std is None else repr(float(r.predicted_std)),
                    int(r.mitigated),
                    r.n_circuits,
                    r.n_shots,
                ]
            )


def _bootstrap_counts(k: int, n_boot: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.multinomial(k, np.full(k, 1.0 / k), size=n_boot).astype(float)


def bootstrap_std(per_circuit: np.ndarray, n_boot: int = 200, seed=0) -> float:
    """Standard deviation of the mean under circuit-level resampling."""
    per_circuit = np.asarray(per_circuit, dtype=float)
    k = per_circuit.size
    if k < 2:
        return float("nan")
    counts = _bootstrap_counts(k, n_boot, seed)
    return float(np.std(counts @ per_circuit / k, ddof=1))


def median_of_means(values: np.ndarray, n_groups: int = 10) -> float:
    """Median over contiguous groups of the group means."""
    values = np.asarray(values, dtype=float)
    groups = np.array_split(values, min(n_groups, values.size))
    return float(np.median([g.mean() for g in groups]))


def _is_mitigated(inv_w: PauliBasisMps, mitigated) -> bool:
    return bool(inv_w.metadata.get("noisy", False)) if mitigated is None else bool(mitigated)


# --------------------------------------------------------------------------
# helpers shared by the fast paths


def _evolve_rows(ds: ShadowDataset, x: np.ndarray, z: np.ndarray, s: np.ndarray, rows_per_circuit: int) -> None:
    """Conjugate ``rows_per_circuit`` rows per circuit through that circuit, in place."""
    cl = np.repeat(ds.clifford_array(), rows_per_circuit, axis=0)
    spec = ds.spec
    for layer in range(spec.n_sublayers):
        conjugate_rows_layer(x, z, s, cl[:, layer])
        conjugate_rows_cnots(x, z, s, *edge_arrays(spec, layer % 2))
    conjugate_rows_layer(x, z, s, cl[:, -1])


class _WeightLookup:
    """Evaluates inverse weights at many Paulis given as (x, z) bit rows."""

    def __init__(self, inv_w: PauliBasisMps):
        self.inv_w = inv_w
        self.n = inv_w.n
        self.support_only = inv_w.basis == "EO" or all(
            np.array_equal(t[:, 1], t[:, 2]) and np.array_equal(t[:, 1], t[:, 3]) for t in inv_w.tensors
        )
        self.table = None
        if self.support_only and self.n <= MAX_TABLE_QUBITS:
            self.table = inv_w.to_occupation_basis().to_dense()
        self.place = 1 << np.arange(self.n - 1, -1, -1, dtype=np.int64)

    def __call__(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=bool)
        z = np.asarray(z, dtype=bool)
        if self.table is not None:
            return self.table[(x | z).astype(np.int64) @ self.place]
        if self.support_only:
            return self.inv_w.to_occupation_basis().evaluate_many((x | z).astype(np.intp))
        sym = 2 * x.astype(np.intp) + z.astype(np.intp)
        return self.inv_w.evaluate_many(np.array([0, 3, 1, 2])[sym])


def _walsh_hadamard(f: np.ndarray) -> np.ndarray:
    """Unnormalised transform F(beta) = sum_c f(c) (-1)^(beta . c) over the index bits."""
    f = np.array(f, dtype=float)
    r = int(np.log2(f.size))
    for k in range(r):
        v = f.reshape(-1, 2, 2**k)
        a, b = v[:, 0, :].copy(), v[:, 1, :].copy()
        v[:, 0, :] = a + b
        v[:, 1, :] = a - b
    return f


def _signed_product(x: np.ndarray, z: np.ndarray, s: np.ndarray, select: np.ndarray):
    """Product of the selected commuting signed rows: (x, z, sign bit)."""
    n = x.shape[1]
    ax = np.zeros(n, bool)
    az = np.zeros(n, bool)
    phase = 0
    for i in np.nonzero(select)[0]:
        phase += 2 * int(s[i]) + int(product_phase(ax, az, x[i], z[i]))
        ax ^= x[i]
        az ^= z[i]
    if phase % 2:
        raise RuntimeError("selected rows do not commute")
    return ax, az, phase % 4 == 2


# --------------------------------------------------------------------------
# linear properties


def _pauli_contributions(ds: ShadowDataset, inv_w: PauliBasisMps, obs: ObservableVector) -> np.ndarray:
    k = ds.n_circuits
    p = obs.pauli
    x = np.tile(p.pauli.x, (k, 1))
    z = np.tile(p.pauli.z, (k, 1))
    s = np.zeros(k, bool)
    _evolve_rows(ds, x, z, s, 1)
    diag = ~x.any(axis=1)
    weight = float(_WeightLookup(inv_w)(p.pauli.x[None], p.pauli.z[None])[0])
    parity = np.einsum("ksn,kn->ks", ds.shots.astype(np.int64), z.astype(np.int64)) & 1
    sign = np.where(s, -1.0, 1.0)[:, None] * (1 - 2 * parity)
    return p.sign * weight * sign * diag[:, None]


def _stabilizer_contributions(ds: ShadowDataset, inv_w: PauliBasisMps, obs: ObservableVector) -> np.ndarray:
    target = obs.target
    n, k = ds.spec.n, ds.n_circuits
    gx, gz, gs = target.tableau.stabilizer_arrays()
    x = np.tile(gx, (k, 1))
    z = np.tile(gz, (k, 1))
    s = np.tile(gs, k)
    _evolve_rows(ds, x, z, s, n)
    lookup = _WeightLookup(inv_w)
    g8x, g8z = gx.astype(np.uint8), gz.astype(np.uint8)
    out = np.empty((k, ds.n_shots))
    for c in range(k):
        ex, ez, es = x[c * n : (c + 1) * n], z[c * n : (c + 1) * n], s[c * n : (c + 1) * n]
        combos = gf2.left_nullspace(ex)
        r = combos.shape[0]
        neg = np.zeros(r, bool)
        tz = np.zeros((r, n), np.uint8)
        for j in range(r):
            px, pz, sg = _signed_product(ex, ez, es, combos[j])
            if px.any():
                raise RuntimeError("kernel element is not diagonal")
            neg[j], tz[j] = sg, pz
        # supports of all 2^r group elements, by doubling over the kernel basis
        ox = (combos @ g8x) & 1
        oz = (combos @ g8z) & 1
        allx = np.zeros((1, n), bool)
        allz = np.zeros((1, n), bool)
        for j in range(r):
            allx = np.concatenate([allx, allx ^ ox[j].astype(bool)])
            allz = np.concatenate([allz, allz ^ oz[j].astype(bool)])
        spectrum = _walsh_hadamard(lookup(allx, allz))
        beta = (ds.shots[c].astype(np.int64) @ tz.T.astype(np.int64) + neg) & 1
        out[c] = spectrum[beta @ (1 << np.arange(r))] / 2.0**n
    return out


def _generic_contributions(ds: ShadowDataset, inv_w: PauliBasisMps, obs: ObservableVector) -> np.ndarray:
    o = obs.vector()
    n = ds.spec.n
    out = np.empty((ds.n_circuits, ds.n_shots))
    for c, circuit in enumerate(ds.circuits()):
        for j in range(ds.n_shots):
            out[c, j] = contract_three(inv_w, snapshot_vector(circuit, ds.shots[c, j]), o) / 2.0**n
    return out


def linear_contributions(ds: ShadowDataset, inv_w: PauliBasisMps, obs: ObservableVector, method: str = "auto"):
    """Per-snapshot values, shape (n_circuits, n_shots)."""
    if inv_w.n != ds.spec.n or obs.n != ds.spec.n:
        raise ValueError("dataset, weights and observable disagree on the qubit count")
    if method == "auto":
        method = {"pauli": "pauli", "stabilizer": "stabilizer"}.get(obs.kind, "mps")
    if method == "pauli" and obs.kind == "pauli":
        return _pauli_contributions(ds, inv_w, obs)
    if method == "stabilizer" and obs.kind == "stabilizer":
        return _stabilizer_contributions(ds, inv_w, obs)
    if method == "mps":
        return _generic_contributions(ds, inv_w, obs)
    raise ValueError(f"method {method!r} does not apply to a {obs.kind} observable")


def estimate_linear(
    ds: ShadowDataset,
    inv_w: PauliBasisMps,
    obs: ObservableVector,
    method: str = "auto",
    n_boot: int = 200,
    seed=0,
    aggregate: str = "mean",
    mitigated: bool | None = None,
    predicted_std: float | None = None,
) -> EstimateReport:
    """Shadow estimate of Tr(O rho) with a circuit-level bootstrap.

    Args:
        ds: Measurement data.
        inv_w: Inverse weights of the ensemble (noisy for mitigation, noiseless otherwise).
        obs: Observable.
        method: ``"auto"``, ``"pauli"``, ``"stabilizer"`` or ``"mps"`` (generic contraction).
        n_boot: Number of bootstrap resamples.
        seed: Bootstrap seed.
        aggregate: ``"mean"`` or ``"median_of_means"``.
        mitigated: Overrides the flag read from ``inv_w.metadata["noisy"]``.
        predicted_std: Optional analytic prediction to carry in the report.
    """
    vals = linear_contributions(ds, inv_w, obs, method)
    per_circuit = vals.mean(axis=1)
    if aggregate == "mean":
        est = float(per_circuit.mean())
    elif aggregate == "median_of_means":
        est = median_of_means(per_circuit)
    else:
        raise ValueError("aggregate must be 'mean' or 'median_of_means'")
    return EstimateReport(
        obs.descriptor(),
        est,
        bootstrap_std(per_circuit, n_boot, seed),
        predicted_std,
        _is_mitigated(inv_w, mitigated),
        ds.n_circuits,
        ds.n_shots,
        per_circuit,
    )


# --------------------------------------------------------------------------
# purity


def _purity_terms(ds: ShadowDataset, inv_w: PauliBasisMps, region: np.ndarray):
    """Sparse per-circuit vectors g_c(P) = sum over shots of inv_w(P) v(P), P on the region."""
    n, k = ds.spec.n, ds.n_circuits
    a = region.size
    basis_x = np.zeros((2 * a, n), bool)
    basis_z = np.zeros((2 * a, n), bool)
    basis_x[np.arange(a), region] = True
    basis_z[a + np.arange(a), region] = True
    x = np.tile(basis_x, (k, 1))
    z = np.tile(basis_z, (k, 1))
    s = np.zeros(k * 2 * a, bool)
    _evolve_rows(ds, x, z, s, 2 * a)
    lookup = _WeightLookup(inv_w)
    keys, circ, vals = [], [], []
    place = 4 ** np.arange(a - 1, -1, -1)
    for c in range(k):
        ex = x[c * 2 * a : (c + 1) * 2 * a]
        combos = gf2.left_nullspace(ex).astype(bool)
        # Hermitian Paulis on the region whose image is diagonal, evolved directly
        hx = (combos.astype(np.uint8) @ basis_x.astype(np.uint8) & 1).astype(bool)
        hz = (combos.astype(np.uint8) @ basis_z.astype(np.uint8) & 1).astype(bool)
        m = hx.shape[0]
        tx, tz, ts = hx.copy(), hz.copy(), np.zeros(m, bool)
        circuit = ds.circuit(c)
        circuit.conjugate_rows(tx, tz, ts)
        if tx.any():
            raise RuntimeError("kernel element is not diagonal")
        ax, az = np.zeros((1, n), bool), np.zeros((1, n), bool)
        at, asg = np.zeros((1, n), bool), np.zeros(1, bool)
        for j in range(m):
            ph = product_phase(ax, az, hx[j][None, :], hz[j][None, :])
            ax, az = np.concatenate([ax, ax ^ hx[j]]), np.concatenate([az, az ^ hz[j]])
            at = np.concatenate([at, at ^ tz[j]])
            asg = np.concatenate([asg, asg ^ ts[j] ^ (ph == 2)])
        weights = lookup(ax, az)
        parity = (ds.shots[c].astype(np.int64) @ at.T.astype(np.int64)) & 1
        total = (1 - 2 * parity).sum(axis=0) * np.where(asg, -1.0, 1.0) * weights
        sym = 2 * ax[:, region].astype(np.int64) + az[:, region].astype(np.int64)
        keys.append(np.array([0, 3, 1, 2])[sym] @ place)
        circ.append(np.full(total.size, c))
        vals.append(total)
    return np.concatenate(keys), np.concatenate(circ), np.concatenate(vals)


def _purity_from_terms(keys, circ, vals, shots_per_circuit, counts, a: int) -> float:
    g = np.bincount(keys, weights=vals * counts[circ], minlength=4**a)
    self_terms = np.sum(counts[circ] * vals**2)
    n_snap = np.sum(counts) * shots_per_circuit
    pairs = n_snap**2 - np.sum(counts) * shots_per_circuit**2
    return float((g @ g - self_terms) / pairs / 2**a)


def estimate_purity(
    ds: ShadowDataset, inv_w: PauliBasisMps, region, n_boot: int = 200, seed=0, mitigated: bool | None = None
) -> EstimateReport:
    """Tr(rho_A^2) from pairs of snapshots taken with different circuits.

    Snapshots that share a circuit are correlated through U, so such pairs are
    left out of the pair average; the remaining pairs are independent and the
    estimate is unbiased.
    """
    region = np.asarray(sorted(set(int(q) for q in region)), dtype=np.intp)
    if region.size < 1:
        raise ValueError("the subsystem must contain at least one qubit")
    if ds.n_circuits < 2:
        raise ValueError("need snapshots from at least two circuits")
    if inv_w.n != ds.spec.n or region.max() >= ds.spec.n or region.min() < 0:
        raise ValueError("subsystem or weights do not match the dataset")
    keys, circ, vals = _purity_terms(ds, inv_w, region)
    a = region.size
    est = _purity_from_terms(keys, circ, vals, ds.n_shots, np.ones(ds.n_circuits), a)
    counts = _bootstrap_counts(ds.n_circuits, n_boot, seed)
    boot = [_purity_from_terms(keys, circ, vals, ds.n_shots, w, a) for w in counts]
    desc = {"kind": "purity", "label": "purity[" + ",".join(map(str, region)) + "]", "n": ds.spec.n}
    return EstimateReport(
        desc, est, float(np.std(boot, ddof=1)), None, _is_mitigated(inv_w, mitigated), ds.n_circuits, ds.n_shots
    )


# --------------------------------------------------------------------------
# variance prediction


def predict_std(
    spec: EnsembleSpec,
    params: TwirledNoiseParams | None,
    p: PauliString,
    truth_expectation: float,
    n_circuits: int,
    shots_per_circuit: int = 1,
) -> float:
    """Exact standard deviation of the mitigated Pauli estimate.

    With S shots per circuit the variance of the mean over K circuits is

        [t^2 (w_2 / w^2 - 1) + (w_0 - t^2 w_2) / (S w^2)] / K,

    where w is the noisy weight, w_0 the noiseless one, w_2 the weight with all
    noise exponents doubled and t the true expectation. For S = 1 it reduces to
    (w_0 / w^2 - t^2) / K. Exact for Pauli noise whose damping depends only on
    the support, as produced by the twirled model.
    """
    if p.weight == 0:
        return 0.0
    w0 = build_weights(spec).evaluate(p)
    if params is None:
        w, w2 = w0, w0
    else:
        w = build_weights(spec, params).evaluate(p)
        w2 = build_weights(spec, params.scaled(2.0)).evaluate(p)
    if w <= 0:
        raise ValueError("the Pauli has zero weight")
    t2 = float(truth_expectation) ** 2
    var = (t2 * (w2 / w**2 - 1) + (w0 - t2 * w2) / (shots_per_circuit * w**2)) / n_circuits
    return float(np.sqrt(max(var, 0.0)))
