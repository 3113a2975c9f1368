import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shallow_shadows.noise import (
    NoiseModel,
    SparsePauliLindblad,
    TwirledNoiseParams,
    depolarizing_generators,
    random_noise_model,
    readout_flip,
    twirl_reduce,
)
from shallow_shadows.pauli import PauliString


def _random_model(n, rng, k=10, scale=0.05):
    gens = []
    for _ in range(k):
        q = int(rng.integers(n))
        sym = np.zeros(n, dtype=np.int8)
        if rng.random() < 0.5 or q == n - 1:
            sym[q] = rng.integers(1, 4)
        else:
            sym[q], sym[q + 1] = rng.integers(0, 4, 2)
            if not sym.any():
                sym[q] = 1
        gens.append((PauliString.from_symbols(sym), float(rng.uniform(0, scale))))
    return SparsePauliLindblad(n, gens)


def _brute_damping(model, p):
    total = 0.0
    for g, r in zip(model.paulis, model.rates):
        if not g.commutes_with(p):
            total += 2 * r
    return np.exp(-total)


def test_identity_undamped():
    m = _random_model(3, np.random.default_rng(0))
    assert m.damping_factor(PauliString.identity(3)) == 1.0


def test_single_qubit_rates():
    lx, ly, lz = 0.01, 0.02, 0.04
    m = SparsePauliLindblad(1, [(PauliString.from_label(s), r) for s, r in zip("XYZ", (lx, ly, lz))])
    assert m.damping_factor(PauliString.from_label("X")) == pytest.approx(np.exp(-2 * (ly + lz)))
    assert m.damping_factor(PauliString.from_label("Z")) == pytest.approx(np.exp(-2 * (lx + ly)))


def test_damping_matches_anticommutation_scan():
    rng = np.random.default_rng(1)
    m = _random_model(3, rng, k=12)
    for syms in itertools.product(range(4), repeat=3):
        p = PauliString.from_symbols(syms)
        assert m.damping_factor(p) == pytest.approx(_brute_damping(m, p), rel=1e-12)


def test_invalid_generators_rejected():
    with pytest.raises(ValueError):
        SparsePauliLindblad(3, [(PauliString.from_label("XIX"), 0.1)])
    with pytest.raises(ValueError):
        SparsePauliLindblad(2, [(PauliString.from_label("XI"), -0.1)])


def test_zero_rates_give_identity_errors():
    m = SparsePauliLindblad(3, [(PauliString.from_label("XII"), 0.0)])
    x, z = m.sample_errors(np.random.default_rng(2), 1000)
    assert not x.any() and not z.any()


def test_firing_frequency():
    lam = 0.03
    m = SparsePauliLindblad(1, [(PauliString.from_label("Y"), lam)])
    x, z = m.sample_errors(np.random.default_rng(3), 1_000_000)
    freq = x[:, 0].mean()
    p = (1 - np.exp(-2 * lam)) / 2
    assert abs(freq - p) < 3 * np.sqrt(p * (1 - p) / 1e6)


def test_monte_carlo_sign_matches_damping():
    rng = np.random.default_rng(4)
    m = _random_model(4, rng, k=15, scale=0.2)
    x, z = m.sample_errors(rng, 1_000_000)
    for label in ("XYZI", "ZZZZ", "IXIY", "YIIX"):
        p = PauliString.from_label(label)
        anti = ((x.astype(int) @ p.z + z.astype(int) @ p.x) & 1).astype(float)
        signs = 1 - 2 * anti
        want = m.damping_factor(p)
        assert abs(signs.mean() - want) < 3 * signs.std() / 1e3 + 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), which=st.integers(0, 9), factor=st.floats(1.0, 3.0))
def test_monotone_in_rates(seed, which, factor):
    rng = np.random.default_rng(seed)
    m = _random_model(3, rng)
    rates = m.rates.copy()
    rates[which] *= factor
    m2 = SparsePauliLindblad(3, list(zip(m.paulis, rates)))
    for syms in itertools.product(range(4), repeat=3):
        p = PauliString.from_symbols(syms)
        assert m2.damping_factor(p) <= m.damping_factor(p) + 1e-15


def test_twirl_reduce_depolarizing():
    n, lam = 4, 0.013
    layer = SparsePauliLindblad(n, depolarizing_generators(n, [lam] * n))
    params = twirl_reduce(NoiseModel(n, layer, layer))
    np.testing.assert_allclose(params.nodes, lam, rtol=1e-12)
    for e in params.edges:
        np.testing.assert_allclose(e, 0, atol=1e-15)
    # every non-identity symbol is damped by exactly exp(-lam)
    for s in "XYZ":
        assert layer.damping_factor(PauliString.single(n, 1, s)) == pytest.approx(np.exp(-lam))


def test_twirl_reduce_two_qubit_depolarizing_is_edge_only():
    n, b = 2, 0.007
    layer = SparsePauliLindblad(n, depolarizing_generators(n, edge_rates={(0, 1): b}))
    params = twirl_reduce(NoiseModel(n, layer, SparsePauliLindblad(n)))
    np.testing.assert_allclose(params.edges[0], [b], rtol=1e-12)
    np.testing.assert_allclose(params.nodes[0], 0, atol=1e-15)
    for syms in itertools.product(range(4), repeat=2):
        if any(syms):
            assert layer.damping_factor(PauliString.from_symbols(syms)) == pytest.approx(np.exp(-b))


def test_zero_model_reduces_to_zero():
    params = twirl_reduce(NoiseModel.noiseless(5))
    assert not params.to_vector().any()


@pytest.mark.parametrize("seed", range(5))
def test_twirl_reduce_matches_symbol_average(seed):
    rng = np.random.default_rng(seed)
    n = 2
    layer = _random_model(n, rng, k=8, scale=0.05)
    model = NoiseModel(n, layer, SparsePauliLindblad(n))
    params = twirl_reduce(model)
    for occ in ((1, 0), (0, 1), (1, 1)):
        choices = [range(1, 4) if o else [0] for o in occ]
        vals = [-np.log(layer.damping_factor(PauliString.from_symbols(s))) for s in itertools.product(*choices)]
        assert len(vals) in (3, 9)
        got = params.pattern_exponent(0, np.array(occ, dtype=bool))
        assert got == pytest.approx(np.mean(vals), rel=1e-12, abs=1e-15)


def test_params_vector_and_json_round_trip():
    rng = np.random.default_rng(7)
    truth = random_noise_model(7, rng)
    params = twirl_reduce(truth)
    back = TwirledNoiseParams.from_vector(7, params.to_vector())
    np.testing.assert_array_equal(back.to_vector(), params.to_vector())
    again = TwirledNoiseParams.from_json(json.loads(json.dumps(params.to_json())))
    np.testing.assert_array_equal(again.to_vector(), params.to_vector())
    assert len(params.vector_labels()) == params.size
    assert params.min_pattern_exponent(0) > 0


def test_noise_model_json_and_fingerprint():
    rng = np.random.default_rng(8)
    truth = random_noise_model(5, rng)
    back = NoiseModel.from_json(json.loads(json.dumps(truth.to_json())))
    assert back.fingerprint() == truth.fingerprint()
    np.testing.assert_allclose(twirl_reduce(back).to_vector(), twirl_reduce(truth).to_vector())
    assert set(truth.to_json()) == {"n", "even", "odd", "readout"}


def test_random_model_exponent_ranges():
    truth = random_noise_model(10, np.random.default_rng(9))
    p = twirl_reduce(truth)
    assert np.all((p.nodes >= 1e-3 - 1e-12) & (p.nodes <= 3e-2 + 1e-12))
    for e in p.edges:
        assert np.all((e >= 1e-3 - 1e-12) & (e <= 1e-2 + 1e-12))
    assert np.all((truth.readout >= 0.005) & (truth.readout <= 0.02))


def test_readout_flip():
    rng = np.random.default_rng(10)
    bits = np.zeros((1_000_000, 2), dtype=np.uint8)
    assert not readout_flip(bits[:10], [0.0, 0.0], rng).any()
    out = readout_flip(bits, [0.01, 0.0], rng)
    assert not out[:, 1].any()
    rate = out[:, 0].mean()
    assert abs(rate - 0.01) < 3 * np.sqrt(0.01 * 0.99 / 1e6)
    z_mean = (1 - 2 * out[:, 0].astype(float)).mean()
    assert abs(z_mean - 0.98) < 3 * 2 * np.sqrt(0.01 * 0.99 / 1e6)
    with pytest.raises(ValueError):
        readout_flip(bits[:1], [0.5, 0.1], rng)
