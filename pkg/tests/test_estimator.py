import itertools
import json

import numpy as np
import pytest

from shallow_shadows import dense
from shallow_shadows.circuits import BrickworkCircuit, EnsembleSpec, sample_circuit
from shallow_shadows.estimator import (
    EstimateReport,
    estimate_linear,
    estimate_purity,
    fidelity_observable,
    linear_contributions,
    median_of_means,
    pauli_observable,
    predict_std,
    projector_observable,
    reports_to_csv,
    snapshot_vector,
)
from shallow_shadows.mps import PauliBasisMps
from shallow_shadows.noise import SparsePauliLindblad, depolarizing_generators, random_noise_model, twirl_reduce
from shallow_shadows.pauli import CliffordTableau, PauliString
from shallow_shadows.simulate import (
    acquire_dataset,
    exact_expectation,
    exact_fidelity,
    exact_purity,
    prepare_named_state,
    stabilizer_group,
)
from shallow_shadows.weights import build_weights, invert_weights


def _words(n):
    return [PauliString.from_symbols(s) for s in itertools.product(range(4), repeat=n)]


def _within(report, truth, k=3.0):
    return abs(report.estimate - truth) <= k * report.bootstrap_std


def test_snapshot_of_identity_circuit():
    spec = EnsembleSpec(3, 0)
    v = snapshot_vector(BrickworkCircuit(spec, np.zeros((1, 3), dtype=np.int8)), [0, 0, 0])
    for p in _words(3):
        want = 1.0 if all(s in (0, 3) for s in p.symbols) else 0.0
        assert v.evaluate(p) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("d", [0, 1])
def test_snapshot_matches_tableau(d):
    n = 3
    rng = np.random.default_rng(d)
    for _ in range(3):
        c = sample_circuit(EnsembleSpec(n, d), int(rng.integers(2**32)))
        bits = rng.integers(0, 2, n).astype(np.uint8)
        v = snapshot_vector(c, bits)
        for p in _words(n):
            x, z, s = p.x[None].copy(), p.z[None].copy(), np.zeros(1, bool)
            c.conjugate_rows(x, z, s)
            want = 0.0 if x.any() else (-1.0) ** (int(s[0]) + int(bits @ z[0]))
            assert v.evaluate(p) == pytest.approx(want, abs=1e-12)
        assert v.evaluate(PauliString.identity(n)) == pytest.approx(1.0)


def test_fidelity_observable_vectors():
    zero = fidelity_observable(prepare_named_state("zero", 3)).vector()
    np.testing.assert_allclose(zero.to_dense(), PauliBasisMps.product([[1, 0, 0, 1]] * 3).to_dense())
    state = prepare_named_state("cluster", 4)
    o = fidelity_observable(state).vector().to_dense()
    x, z, s = stabilizer_group(state)
    want = np.zeros(256)
    sym = np.array([0, 3, 1, 2])[2 * x.astype(int) + z.astype(int)]
    want[sym @ (4 ** np.arange(3, -1, -1))] = np.where(s, -1.0, 1.0)
    np.testing.assert_allclose(o, want, atol=1e-12)
    od = fidelity_observable(state.as_dense()).vector().to_dense()
    np.testing.assert_allclose(od, want, atol=1e-10)


def test_fast_paths_match_generic_contraction():
    n = 4
    truth = random_noise_model(n, np.random.default_rng(3))
    spec = EnsembleSpec(n, 1)
    state = prepare_named_state("ghz", n)
    ds = acquire_dataset(state, spec, truth, 12, 3, seed=4)
    inv = invert_weights(build_weights(spec, twirl_reduce(truth)))
    for obs in (fidelity_observable(state), pauli_observable("-XXXX"), pauli_observable("IZZI")):
        fast = linear_contributions(ds, inv, obs)
        slow = linear_contributions(ds, inv, obs, method="mps")
        np.testing.assert_allclose(fast, slow, atol=1e-12)
    # Pauli case reduces to v(P) / w(P)
    p = PauliString.from_label("IZZI")
    vals = linear_contributions(ds, inv, pauli_observable(p))
    direct = [snapshot_vector(c, ds.shots[i, j]).evaluate(p) * inv.evaluate(p) for i, c in enumerate(ds.circuits()) for j in range(3)]
    np.testing.assert_allclose(vals.ravel(), direct, atol=1e-12)


def test_identity_observable_gives_one():
    n = 5
    spec = EnsembleSpec(n, 0)
    ds = acquire_dataset(prepare_named_state("cluster", n), spec, None, 10, 4, seed=5)
    inv = invert_weights(build_weights(spec))
    vals = linear_contributions(ds, inv, pauli_observable("I" * n))
    np.testing.assert_allclose(vals, 1.0, rtol=1e-9)


def test_projector_observable_on_zero_state():
    n = 3
    spec = EnsembleSpec(n, 0)
    ds = acquire_dataset(prepare_named_state("zero", n), spec, None, 300, 5, seed=6)
    inv = invert_weights(build_weights(spec))
    r = estimate_linear(ds, inv, projector_observable([0, 0, 0]))
    assert _within(r, 1.0)
    r1 = estimate_linear(ds, inv, projector_observable([1, 0, 0]))
    assert _within(r1, 0.0)


def test_plus_state_depth_zero():
    n = 18
    spec = EnsembleSpec(n, 0)
    state = prepare_named_state("plus", n)
    ds = acquire_dataset(state, spec, None, 2000, 20, seed=7)
    inv = invert_weights(build_weights(spec))
    for q in (0, 9, 17):
        r = estimate_linear(ds, inv, pauli_observable(PauliString.single(n, q, "X")))
        assert _within(r, 1.0)
    assert _within(estimate_linear(ds, inv, fidelity_observable(state)), 1.0)


def test_mitigation_removes_bias_on_stabilizers():
    n = 10
    rng = np.random.default_rng(8)
    truth = random_noise_model(n, rng)
    spec = EnsembleSpec(n, 2)
    state = prepare_named_state("cluster", n)
    ds = acquire_dataset(state, spec, truth, 3000, 30, seed=9)
    inv = invert_weights(build_weights(spec, twirl_reduce(truth)))
    inv0 = invert_weights(build_weights(spec))
    p = PauliString.from_label("IIIZXZIIII")
    mit = estimate_linear(ds, inv, pauli_observable(p))
    raw = estimate_linear(ds, inv0, pauli_observable(p))
    assert mit.mitigated and not raw.mitigated
    assert _within(mit, exact_expectation(state, p))
    assert abs(raw.estimate - 1.0) > abs(mit.estimate - 1.0)


def test_purity_values():
    n = 8
    spec = EnsembleSpec(n, 1)
    cluster = prepare_named_state("cluster", n)
    ds = acquire_dataset(cluster, spec, None, 3000, 20, seed=10)
    inv = invert_weights(build_weights(spec))
    assert _within(estimate_purity(ds, inv, [0, 1]), 0.5)
    assert _within(estimate_purity(ds, inv, [3, 4]), 0.25)
    zero = acquire_dataset(prepare_named_state("zero", n), spec, None, 2000, 20, seed=11)
    assert _within(estimate_purity(zero, inv, [2, 3, 4]), 1.0)
    with pytest.raises(ValueError):
        estimate_purity(ds.subset(circuits=slice(0, 1)), inv, [0])


def test_noisy_purity_matches_density_matrix():
    n = 6
    prep = SparsePauliLindblad(n, depolarizing_generators(n, [0.1] * n))
    state = prepare_named_state("cluster", n, prep_noise=prep)
    truth = random_noise_model(n, np.random.default_rng(12))
    spec = EnsembleSpec(n, 1)
    ds = acquire_dataset(state, spec, truth, 4000, 25, seed=13)
    inv = invert_weights(build_weights(spec, twirl_reduce(truth)))
    for region in ([0, 1], [2, 3]):
        want = exact_purity(state.as_dense(), region)
        r = estimate_purity(ds, inv, region)
        assert _within(r, want), (region, r.estimate, want, r.bootstrap_std)
        assert 2.0 ** -len(region) - 5 * r.bootstrap_std <= r.estimate <= 1 + 5 * r.bootstrap_std


def test_predict_std_closed_forms():
    spec = EnsembleSpec(6, 0)
    for k in range(1, 5):
        p = PauliString.from_label("Z" * k + "I" * (6 - k))
        assert predict_std(spec, None, p, 0.0, 1) == pytest.approx(3 ** (k / 2))
    assert predict_std(spec, None, PauliString.identity(6), 1.0, 10) == 0.0


def test_predict_std_matches_bootstrap():
    n = 4
    truth = random_noise_model(n, np.random.default_rng(14))
    params = twirl_reduce(truth)
    spec = EnsembleSpec(n, 1)
    state = prepare_named_state("cluster", n)
    ds = acquire_dataset(state, spec, truth, 10000, 100, seed=15)
    inv = invert_weights(build_weights(spec, params))
    for label in ("ZXZI", "XZII", "IZXZ"):
        p = PauliString.from_label(label)
        r = estimate_linear(ds, inv, pauli_observable(p), n_boot=400)
        pred = predict_std(spec, params, p, exact_expectation(state, p), ds.n_circuits, ds.n_shots)
        assert abs(r.bootstrap_std / pred - 1) < 0.15


def test_shot_halves_agree():
    n = 6
    truth = random_noise_model(n, np.random.default_rng(16))
    spec = EnsembleSpec(n, 1)
    state = prepare_named_state("cluster", n)
    ds = acquire_dataset(state, spec, truth, 2000, 20, seed=17)
    inv = invert_weights(build_weights(spec, twirl_reduce(truth)))
    obs = fidelity_observable(state)
    a = estimate_linear(ds.subset(shots=slice(0, 10)), inv, obs)
    b = estimate_linear(ds.subset(shots=slice(10, 20)), inv, obs)
    assert abs(a.estimate - b.estimate) < 3 * np.hypot(a.bootstrap_std, b.bootstrap_std)


def test_fidelity_with_preparation_noise():
    n = 8
    prep = SparsePauliLindblad(n, depolarizing_generators(n, [0.04] * n))
    state = prepare_named_state("cluster", n, prep_noise=prep)
    truth = random_noise_model(n, np.random.default_rng(18))
    spec = EnsembleSpec(n, 1)
    ds = acquire_dataset(state, spec, truth, 3000, 30, seed=19)
    inv = invert_weights(build_weights(spec, twirl_reduce(truth)))
    r = estimate_linear(ds, inv, fidelity_observable(state))
    assert _within(r, exact_fidelity(state))


def test_reports_and_aggregation(tmp_path):
    vals = np.array([1.0, 2.0, 100.0, 2.0, 1.0, 2.0])
    assert median_of_means(vals, 3) == pytest.approx(1.5)
    rep = EstimateReport({"kind": "pauli", "label": "+ZZ", "n": 2}, 0.5, 0.1, 0.11, True, 10, 5)
    data = json.loads(json.dumps(rep.to_json()))
    assert set(data) == {"observable", "estimate", "bootstrap_std", "predicted_std", "mitigated", "K", "shots"}
    reports_to_csv([rep], tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("observable,") and lines[1].startswith("+ZZ,pauli,0.5")
    ds = acquire_dataset(prepare_named_state("zero", 2), EnsembleSpec(2, 0), None, 50, 2, seed=1)
    inv = invert_weights(build_weights(EnsembleSpec(2, 0)))
    r = estimate_linear(ds, inv, pauli_observable("ZI"), aggregate="median_of_means")
    assert np.isfinite(r.estimate) and r.bootstrap_std > 0
