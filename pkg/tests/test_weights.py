import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shallow_shadows.circuits import EnsembleSpec, edge_arrays
from shallow_shadows.mps import PauliBasisMps
from shallow_shadows.noise import NoiseModel, TwirledNoiseParams, random_noise_model, twirl_reduce
from shallow_shadows.pauli import PauliString, conjugate_rows_cnots, conjugate_rows_layer
from shallow_shadows.weights import (
    build_occupation_weights,
    build_weights,
    build_weights_pauli_basis,
    cnot_layer,
    cnot_transfer,
    invert_weights,
    noise_transfer,
    occupation_transfer,
    twirl_layer,
)


def _all_words(n):
    return np.array(list(itertools.product(range(4), repeat=n)))


def test_cnot_transfer_is_permutation():
    m = cnot_transfer()
    assert np.all(m.sum(axis=0) == 1) and np.all(m.sum(axis=1) == 1)
    assert set(np.unique(m)) == {0.0, 1.0}
    # X on the control spreads to the target, Z on the target spreads to the control
    assert m[4 * 1 + 0, 4 * 1 + 1] == 1 and m[4 * 0 + 3, 4 * 3 + 3] == 1


@pytest.mark.parametrize("kind", ["cnot", "haar"])
def test_occupation_transfer_is_stochastic(kind):
    g = occupation_transfer(kind)
    np.testing.assert_allclose(g.sum(axis=1), 1.0, rtol=1e-14)
    assert g[0, 0] == 1.0 and np.all(g[1:, 0] == 0)


def test_layer_apply_matches_dense_matrix():
    rng = np.random.default_rng(0)
    n = 3
    vec = PauliBasisMps([rng.normal(size=(1, 4, 2)), rng.normal(size=(2, 4, 2)), rng.normal(size=(2, 4, 1))])
    for layer in (twirl_layer(n), cnot_layer(n, 0), cnot_layer(n, 1, "haar")):
        np.testing.assert_allclose(layer.apply(vec).to_dense(), layer.to_dense() @ vec.to_dense(), atol=1e-12)


@pytest.mark.parametrize("n", [1, 3, 5])
def test_depth_zero_is_three_to_minus_weight(n):
    w = build_weights(EnsembleSpec(n, 0))
    words = _all_words(n) if n <= 3 else np.random.default_rng(n).integers(0, 4, (500, n))
    weight = (words > 0).sum(axis=1)
    np.testing.assert_allclose(w.evaluate_many(words), 3.0 ** -weight, rtol=1e-13)


def test_two_qubit_depth_one_value():
    w = build_weights(EnsembleSpec(2, 1))
    assert w.evaluate(PauliString.from_label("ZI")) == pytest.approx(5 / 27, rel=1e-13)
    assert w.evaluate(PauliString.from_label("IZ")) == pytest.approx(5 / 27, rel=1e-13)


@pytest.mark.parametrize("d", [0, 1, 2])
def test_identity_weight_is_one(d):
    n = 6
    params = twirl_reduce(random_noise_model(n, np.random.default_rng(d)))
    assert build_weights(EnsembleSpec(n, d), params).evaluate(np.zeros(n, int)) == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("n,d", [(4, 1), (5, 2), (3, 3)])
def test_occupation_build_matches_pauli_basis_reference(n, d):
    params = twirl_reduce(random_noise_model(n, np.random.default_rng(10 * n + d)))
    spec = EnsembleSpec(n, d)
    fast = build_weights(spec, params).to_dense()
    ref = build_weights_pauli_basis(spec, params).to_dense()
    np.testing.assert_allclose(fast, ref, rtol=1e-11, atol=1e-15)


def test_support_only_dependence():
    n = 5
    params = twirl_reduce(random_noise_model(n, np.random.default_rng(3)))
    w = build_weights_pauli_basis(EnsembleSpec(n, 2), params)
    rng = np.random.default_rng(4)
    for _ in range(50):
        a = rng.integers(0, 4, n)
        b = np.where(a > 0, rng.integers(1, 4, n), 0)
        assert w.evaluate(a) == pytest.approx(w.evaluate(b), rel=1e-12)


def test_bond_bound_and_cap():
    w = build_weights(EnsembleSpec(12, 2), TwirledNoiseParams.uniform(12, 0.01, 0.005, 0.01))
    assert w.max_bond <= 4**4
    with pytest.raises(ValueError):
        build_weights(EnsembleSpec(8, 4))


def test_noise_diagonal_matches_twirled_patterns():
    n = 4
    rng = np.random.default_rng(5)
    params = twirl_reduce(random_noise_model(n, rng))
    for parity in (0, 1):
        diag = np.diag(noise_transfer(params, parity).to_dense())
        assert np.all(diag <= 1.0)
        for word in _all_words(n)[::3]:
            want = np.exp(-params.pattern_exponent(parity, word > 0))
            assert diag[int(np.ravel_multi_index(word, (4,) * n))] == pytest.approx(want, rel=1e-12)


def _monte_carlo_weights(model: NoiseModel, d: int, words, samples, rng):
    """Average damped Z-visibility over sampled circuits, propagating each Pauli forward."""
    n = model.n
    spec = EnsembleSpec(n, d)
    out = []
    for word in words:
        cl = rng.integers(0, 24, size=(samples, 2 * d + 1, n))
        x = np.tile(PauliString.from_symbols(word).x, (samples, 1))
        z = np.tile(PauliString.from_symbols(word).z, (samples, 1))
        s = np.zeros(samples, dtype=bool)
        log_damp = np.zeros(samples)
        for layer in range(2 * d):
            conjugate_rows_layer(x, z, s, cl[:, layer])
            controls, targets = edge_arrays(spec, layer % 2)
            conjugate_rows_cnots(x, z, s, controls, targets)
            log_damp += model.layer(layer % 2).log_damping(x, z)
        conjugate_rows_layer(x, z, s, cl[:, 2 * d])
        log_damp += z.astype(float) @ model.readout_exponents
        vals = np.exp(-log_damp) * ~x.any(axis=1)
        out.append((vals.mean(), vals.std() / np.sqrt(samples)))
    return np.array(out)


@pytest.mark.parametrize("n,d", [(2, 1), (3, 1)])
def test_weights_match_monte_carlo_over_circuits(n, d):
    rng = np.random.default_rng(100 + n)
    model = random_noise_model(n, rng, node_range=(0.02, 0.1), edge_range=(0.01, 0.05), readout_range=(0.02, 0.05))
    w = build_weights(EnsembleSpec(n, d), twirl_reduce(model))
    words = _all_words(n)[1:]
    mc = _monte_carlo_weights(model, d, words, 1_000_000 // len(words) * 4, rng)
    exact = w.evaluate_many(words)
    z = np.abs(exact - mc[:, 0]) / mc[:, 1]
    assert np.all(z < 4), z.max()


def test_noiseless_two_qubit_monte_carlo():
    rng = np.random.default_rng(7)
    mc = _monte_carlo_weights(NoiseModel.noiseless(2), 1, [[3, 0]], 1_000_000, rng)[0]
    assert abs(mc[0] - 5 / 27) < 3 * mc[1]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), factor=st.floats(1.0, 4.0), d=st.integers(0, 2))
def test_monotone_damping(seed, factor, d):
    n = 4
    rng = np.random.default_rng(seed)
    params = twirl_reduce(random_noise_model(n, rng))
    bumped = params.to_vector()
    bumped[rng.integers(bumped.size)] *= factor
    spec = EnsembleSpec(n, d)
    base = build_weights(spec, params).to_dense()
    more = build_weights(spec, TwirledNoiseParams.from_vector(n, bumped)).to_dense()
    clean = build_weights(spec).to_dense()
    assert np.all(more <= base * (1 + 1e-12))
    assert np.all(base <= clean * (1 + 1e-12))


def test_inverse_depth_zero_closed_form():
    n = 6
    v = invert_weights(build_weights(EnsembleSpec(n, 0)))
    assert v.metadata["residual"] < 1e-10
    words = np.random.default_rng(0).integers(0, 4, (300, n))
    np.testing.assert_allclose(v.evaluate_many(words), 3.0 ** (words > 0).sum(axis=1), rtol=1e-9)


def test_inverse_of_ones_is_ones():
    v = invert_weights(PauliBasisMps.constant(5))
    np.testing.assert_allclose(v.to_dense(), 1.0, rtol=1e-12)


def test_inverse_pointwise_small_noisy():
    n = 4
    params = twirl_reduce(random_noise_model(n, np.random.default_rng(11)))
    w = build_weights(EnsembleSpec(n, 1), params)
    v = invert_weights(w)
    prod = w.to_dense() * v.to_dense()
    assert prod.size == 256
    assert np.all(np.abs(prod - 1) <= 1e-6)
    assert v.metadata["converged"]


def test_inverse_generic_pauli_basis_input():
    rng = np.random.default_rng(12)
    vals = rng.uniform(0.2, 1.0, size=(3, 4))
    w = PauliBasisMps.product(vals)
    v = invert_weights(w)
    np.testing.assert_allclose(w.to_dense() * v.to_dense(), 1.0, atol=1e-9)


def test_inverse_rejects_non_positive():
    w = PauliBasisMps.product([[1.0, 0.0, 0.0, 0.0]] * 3)
    with pytest.raises(ValueError):
        invert_weights(w)


def test_gauged_build_is_order_one():
    w = build_occupation_weights(EnsembleSpec(10, 0), gauged=True)
    np.testing.assert_allclose(w.evaluate_many(np.random.default_rng(1).integers(0, 2, (50, 10))), 1.0)
