import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from shallow_shadows import dense
from shallow_shadows.pauli import (
    CNOT,
    CLIFFORD_COMPOSE,
    CLIFFORD_IMAGE,
    CLIFFORD_INVERSE,
    CLIFFORD_SIGN,
    HADAMARD,
    Clifford1Q,
    CliffordTableau,
    PauliString,
    SignedPauli,
    conjugate_pauli,
    pauli_expectation_stabilizer,
    tableau_apply,
    tableau_measure_z_all,
)


def _matrix_conjugate(u, p: PauliString):
    """Brute-force U P U^dag, decomposed back onto a signed Pauli."""
    m = u @ dense.pauli_matrix(p) @ u.conj().T
    n = p.n
    for syms in itertools.product(range(4), repeat=n):
        q = PauliString.from_symbols(syms)
        ov = np.trace(dense.pauli_matrix(q) @ m).real / 2**n
        if abs(abs(ov) - 1) < 1e-9:
            return SignedPauli(q, 1 if ov > 0 else -1)
    raise AssertionError("not a Pauli")


def test_clifford_table_matches_unitaries():
    us = dense.clifford_unitaries()
    # The 24 unitaries are pairwise distinct up to a global phase.
    for a, b in itertools.combinations(range(24), 2):
        ov = abs(np.trace(us[a].conj().T @ us[b])) / 2
        assert ov < 1 - 1e-9
    for idx, u in enumerate(us):
        for s in range(1, 4):
            got = _matrix_conjugate(u, PauliString.from_symbols([s]))
            assert got.pauli.symbols[0] == CLIFFORD_IMAGE[idx, s]
            assert (got.sign < 0) == CLIFFORD_SIGN[idx, s]


def test_clifford_group_closure_and_inverse():
    assert set(np.unique(CLIFFORD_COMPOSE)) == set(range(24))
    for a in range(24):
        assert sorted(CLIFFORD_COMPOSE[a]) == list(range(24))
        assert CLIFFORD_COMPOSE[a, CLIFFORD_INVERSE[a]] == 0
    us = dense.clifford_unitaries()
    for a, b in [(3, 17), (HADAMARD, 5), (22, 22)]:
        c = CLIFFORD_COMPOSE[a, b]
        ov = abs(np.trace(us[c].conj().T @ us[a] @ us[b])) / 2
        assert ov == pytest.approx(1)


def test_hadamard_swaps_x_and_z():
    z = SignedPauli.from_label("Z")
    x = conjugate_pauli(Clifford1Q(0, HADAMARD), z)
    assert x.label == "+X"
    assert conjugate_pauli(Clifford1Q(0, HADAMARD), x).label == "+Z"


def test_cnot_examples():
    assert conjugate_pauli(CNOT(0, 1), SignedPauli.from_label("XI")).label == "+XX"
    assert conjugate_pauli(CNOT(0, 1), SignedPauli.from_label("II")).label == "+II"
    assert conjugate_pauli(Clifford1Q(1, 7), SignedPauli.from_label("II")).label == "+II"


@pytest.mark.parametrize("control,target", [(0, 1), (1, 0)])
def test_cnot_matches_matrix(control, target):
    u = dense.CNOT_MATRIX if control == 0 else dense.CNOT_MATRIX.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)
    for syms in itertools.product(range(4), repeat=2):
        p = PauliString.from_symbols(syms)
        for sign in (1, -1):
            got = conjugate_pauli(CNOT(control, target), SignedPauli(p, sign))
            want = _matrix_conjugate(u, p)
            assert got.pauli == want.pauli
            assert got.sign == sign * want.sign


def test_site_out_of_range():
    with pytest.raises(IndexError):
        conjugate_pauli(CNOT(0, 2), SignedPauli.from_label("XX"))
    with pytest.raises(IndexError):
        conjugate_pauli(Clifford1Q(3, 0), SignedPauli.from_label("XX"))


gates3 = st.one_of(
    st.builds(Clifford1Q, st.integers(0, 2), st.integers(0, 23)),
    st.tuples(st.integers(0, 2), st.integers(0, 2)).filter(lambda t: t[0] != t[1]).map(lambda t: CNOT(*t)),
)
paulis3 = st.tuples(st.lists(st.integers(0, 3), min_size=3, max_size=3), st.sampled_from([1, -1])).map(
    lambda t: SignedPauli(PauliString.from_symbols(t[0]), t[1])
)


@settings(max_examples=200, deadline=None)
@given(g1=gates3, g2=gates3, p=paulis3)
def test_composition_matches_dense(g1, g2, p):
    # Unitary of the sequence (g2 first) built column by column.
    m = np.eye(8, dtype=complex)
    cols = [dense.apply_gates(m[:, j], [g2, g1], 3) for j in range(8)]
    u = np.stack(cols, axis=1)
    want = _matrix_conjugate(u, p.pauli)
    got = conjugate_pauli(g1, conjugate_pauli(g2, p))
    assert got.pauli == want.pauli and got.sign == p.sign * want.sign


@settings(max_examples=100, deadline=None)
@given(g=gates3, p=paulis3, q=paulis3)
def test_conjugation_preserves_structure(g, p, q):
    gp, gq = conjugate_pauli(g, p), conjugate_pauli(g, q)
    assert gp.pauli.commutes_with(gq.pauli) == p.pauli.commutes_with(q.pauli)
    if isinstance(g, Clifford1Q):
        assert gp.pauli.weight == p.pauli.weight


def _cluster_tableau(n):
    t = CliffordTableau.zero_state(n)
    for q in range(n):
        t.apply(Clifford1Q(q, HADAMARD))
    for q in range(n - 1):
        t.apply(Clifford1Q(q + 1, HADAMARD)).apply(CNOT(q, q + 1)).apply(Clifford1Q(q + 1, HADAMARD))
    return t


def test_cluster_state_stabilizers():
    n = 6
    t = _cluster_tableau(n)
    for i in range(n):
        sym = [0] * n
        sym[i] = 1
        if i > 0:
            sym[i - 1] = 3
        if i < n - 1:
            sym[i + 1] = 3
        assert pauli_expectation_stabilizer(t, PauliString.from_symbols(sym)) == 1


def test_ghz_circuit_with_h_layer_matches_dense():
    n = 5
    t = CliffordTableau.zero_state(n)
    t.apply(Clifford1Q(0, HADAMARD))
    for q in range(n - 1):
        t.apply(CNOT(q, q + 1))
    for q in range(1, n):
        t.apply(Clifford1Q(q, HADAMARD))
    psi = dense.zero_state(n)
    gates = [Clifford1Q(0, HADAMARD)] + [CNOT(q, q + 1) for q in range(n - 1)]
    gates += [Clifford1Q(q, HADAMARD) for q in range(1, n)]
    psi = dense.apply_gates(psi, gates, n)
    for syms in itertools.product(range(4), repeat=n):
        p = PauliString.from_symbols(syms)
        assert t.expectation(p) == round(dense.expectation(psi, p))


def test_zero_state_expectations():
    t = CliffordTableau.zero_state(4)
    assert t.expectation(PauliString.single(4, 2, "Z")) == 1
    assert t.expectation(PauliString.single(4, 2, "X")) == 0
    with pytest.raises(ValueError):
        t.expectation(PauliString.identity(3))


def test_identity_gate_leaves_tableau():
    t = _cluster_tableau(4)
    t2 = tableau_apply(t, Clifford1Q(2, 0))
    assert np.array_equal(t.x, t2.x) and np.array_equal(t.z, t2.z) and np.array_equal(t.r, t2.r)


def test_random_clifford_sequence_matches_dense():
    n = 6
    rng = np.random.default_rng(11)
    gates = []
    for _ in range(60):
        if rng.random() < 0.5:
            gates.append(Clifford1Q(int(rng.integers(n)), int(rng.integers(24))))
        else:
            c, t_ = rng.choice(n, 2, replace=False)
            gates.append(CNOT(int(c), int(t_)))
    t = CliffordTableau.zero_state(n).apply_gates(gates)
    psi = dense.apply_gates(dense.zero_state(n), gates, n)
    for syms in itertools.product(range(4), repeat=n):
        p = PauliString.from_symbols(syms)
        assert t.expectation(p) == round(dense.expectation(psi, p))


def test_measure_zero_state():
    rng = np.random.default_rng(0)
    t = CliffordTableau.zero_state(5)
    for _ in range(20):
        bits, _ = tableau_measure_z_all(t, rng)
        assert not bits.any()


def test_measure_plus_state_uniform():
    rng = np.random.default_rng(1)
    n, shots = 3, 10_000
    t = CliffordTableau.zero_state(n).apply_gates([Clifford1Q(q, HADAMARD) for q in range(n)])
    bits = np.array([tableau_measure_z_all(t, rng)[0] for _ in range(shots)])
    mean = bits.mean(axis=0)
    assert np.all(np.abs(mean - 0.5) < 3 * np.sqrt(0.25 / shots))


def test_measure_cluster_matches_born_rule():
    n, shots = 4, 100_000
    rng = np.random.default_rng(2)
    gates = [Clifford1Q(q, HADAMARD) for q in range(n)]
    for q in range(n - 1):
        gates += [Clifford1Q(q + 1, HADAMARD), CNOT(q, q + 1), Clifford1Q(q + 1, HADAMARD)]
    gates += [Clifford1Q(q, int(rng.integers(24))) for q in range(n)]
    t = CliffordTableau.zero_state(n).apply_gates(gates)
    probs = dense.probabilities(dense.apply_gates(dense.zero_state(n), gates, n))
    idx = dense.bits_to_index(np.array([tableau_measure_z_all(t, rng)[0] for _ in range(shots)]))
    freq = np.bincount(idx, minlength=2**n) / shots
    assert 0.5 * np.abs(freq - probs).sum() < 0.02
    support = probs > 1e-12
    assert np.all(freq[~support] == 0)
    chi2 = stats.chisquare(freq[support] * shots, probs[support] * shots)
    assert chi2.pvalue > 1e-3


def test_measurement_collapses_state():
    rng = np.random.default_rng(3)
    t = CliffordTableau.zero_state(3).apply(Clifford1Q(0, HADAMARD)).apply(CNOT(0, 1))
    bits, post = tableau_measure_z_all(t, rng)
    assert bits[0] == bits[1]
    again, _ = tableau_measure_z_all(post, rng)
    assert np.array_equal(bits, again)
