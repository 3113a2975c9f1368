"""Noise calibration from randomized measurements of |0...0>.

For the zero state every Z-string has expectation 1, so the mean snapshot value
of a Z-string P is the noisy weight w(P) itself. Weights of contiguous
Z-strings are estimated from data and the twirled noise exponents are fitted
by maximising a Gaussian likelihood times a log-normal prior.

Parameters live in log space. At depth 1 the readout exponents and the
odd-sublayer node exponents damp the final occupation in the same way and only
their sum is identifiable, so by default readout is folded into those nodes.
Further combinations of node and edge exponents leave every Z-string weight
unchanged; ``identifiable_subspace`` exposes them, and the prior alone fixes
the MAP along those directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .circuits import EnsembleSpec, edge_arrays
from .noise import TwirledNoiseParams
from .pauli import conjugate_rows_cnots, conjugate_rows_layer
from .simulate import ShadowDataset
from .weights import build_occupation_weights

LOG_FLOOR = -30.0


def contiguous_patterns(n: int, max_weight: int = 6) -> list[tuple[int, int]]:
    """(start, length) of every contiguous block of length 1..max_weight."""
    return [(s, k) for k in range(1, min(max_weight, n) + 1) for s in range(n - k + 1)]


@dataclass
class EmpiricalWeights:
    """Estimated weights of contiguous Z-strings.

    Attributes:
        spec: Ensemble that produced the data.
        patterns: (start, length) per pattern.
        means: Estimated weights.
        stds: Bootstrap standard deviations (floored above zero).
        counts: Number of snapshots used per pattern.
        method: ``"ratio"`` or ``"mean"``.
    """

    spec: EnsembleSpec
    patterns: list
    means: np.ndarray
    stds: np.ndarray
    counts: np.ndarray
    method: str = "ratio"

    def masks(self) -> np.ndarray:
        m = np.zeros((len(self.patterns), self.spec.n), dtype=np.intp)
        for i, (s, k) in enumerate(self.patterns):
            m[i, s : s + k] = 1
        return m

    def labels(self) -> list[str]:
        return ["".join("Z" if b else "I" for b in row) for row in self.masks()]

    def to_json(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "method": self.method,
            "patterns": [list(p) for p in self.patterns],
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "EmpiricalWeights":
        return cls(
            EnsembleSpec.from_dict(data["spec"]),
            [tuple(p) for p in data["patterns"]],
            np.array(data["means"], dtype=float),
            np.array(data["stds"], dtype=float),
            np.array(data["counts"], dtype=np.int64),
            data.get("method", "ratio"),
        )


def _pattern_values(ds: ShadowDataset, patterns) -> tuple[np.ndarray, np.ndarray]:
    """Per-circuit sums of snapshot values and the indicator that the image is diagonal."""
    n, k = ds.spec.n, ds.n_circuits
    m = len(patterns)
    z0 = np.zeros((m, n), bool)
    for i, (s, length) in enumerate(patterns):
        z0[i, s : s + length] = True
    x = np.zeros((k * m, n), bool)
    z = np.tile(z0, (k, 1))
    sign = np.zeros(k * m, bool)
    cl = np.repeat(ds.clifford_array(), m, axis=0)
    for layer in range(ds.spec.n_sublayers):
        conjugate_rows_layer(x, z, sign, cl[:, layer])
        conjugate_rows_cnots(x, z, sign, *edge_arrays(ds.spec, layer % 2))
    conjugate_rows_layer(x, z, sign, cl[:, -1])
    x = x.reshape(k, m, n)
    z = z.reshape(k, m, n)
    diag = ~x.any(axis=2)
    parity = np.einsum("ksn,kmn->kms", ds.shots.astype(np.int64), z.astype(np.int64)) & 1
    sums = (1 - 2 * parity).sum(axis=2) * np.where(sign.reshape(k, m), -1.0, 1.0) * diag
    return sums, diag.astype(float)


def empirical_weights(
    ds: ShadowDataset,
    max_weight: int = 6,
    n_bootstrap: int = 200,
    seed=0,
    method: str = "ratio",
) -> EmpiricalWeights:
    """Estimate weights of contiguous Z-strings from a zero-state dataset.

    ``method="mean"`` averages snapshot values directly. ``method="ratio"``
    (default) uses that a circuit contributes only when it maps P to a diagonal
    Pauli, an event whose probability w_0(P) is known exactly. The estimate
    w_0(P) * sum(values) / sum(indicators) removes the binomial noise of that
    event count.
    """
    if ds.metadata.get("state", "zero") != "zero":
        raise ValueError("calibration data must be taken on the zero state")
    if method not in ("ratio", "mean"):
        raise ValueError("method must be 'ratio' or 'mean'")
    patterns = contiguous_patterns(ds.spec.n, max_weight)
    sums, diag = _pattern_values(ds, patterns)
    s = ds.n_shots
    k = ds.n_circuits
    masks = np.zeros((len(patterns), ds.spec.n), dtype=np.intp)
    for i, (st, length) in enumerate(patterns):
        masks[i, st : st + length] = 1
    w0 = build_occupation_weights(ds.spec).evaluate_many(masks)

    def estimate(weights: np.ndarray) -> np.ndarray:
        total = weights @ sums
        if method == "mean":
            return total / (weights.sum() * s)
        hits = weights @ diag
        return np.where(hits > 0, w0 * total / np.maximum(hits, 1) / s, 0.0)

    means = estimate(np.ones(k))
    rng = np.random.default_rng(seed)
    boot = np.array([estimate(c) for c in rng.multinomial(k, np.full(k, 1.0 / k), size=n_bootstrap).astype(float)])
    stds = boot.std(axis=0, ddof=1)
    # a single flipped shot among the contributing snapshots sets the resolution floor
    n_contrib = np.maximum(diag.sum(axis=0) * s, 1) if method == "ratio" else np.full(len(patterns), k * s)
    floor = (w0 if method == "ratio" else 1.0) / n_contrib
    stds = np.maximum(stds, floor)
    counts = np.full(len(patterns), k * s, dtype=np.int64)
    return EmpiricalWeights(ds.spec, patterns, np.clip(means, -1, 1), stds, counts, method)


# --------------------------------------------------------------------------
# posterior


def _free_mask(n: int, depth: int, fold_readout: bool) -> np.ndarray:
    size = TwirledNoiseParams.zeros(n).size
    free = np.ones(size, bool)
    if depth == 0:
        free[: size - n] = False
    elif fold_readout:
        free[size - n :] = False
    return free


def fold_readout(params: TwirledNoiseParams) -> TwirledNoiseParams:
    """Move readout exponents into the odd-sublayer node exponents (identical at depth 1)."""
    nodes = params.nodes.copy()
    nodes[1] += params.readout
    return TwirledNoiseParams(params.n, nodes, tuple(e.copy() for e in params.edges), np.zeros(params.n))


@dataclass
class PosteriorSpec:
    """Log-normal prior and Gaussian likelihood over twirled noise exponents.

    Attributes:
        data: Empirical weights entering the likelihood (may be ``None`` for prior only).
        center: Prior median per parameter.
        log_sigma: Prior standard deviation of each log-exponent.
        fold_readout: Fit readout jointly with the odd-sublayer nodes (default at depth 1).
    """

    data: EmpiricalWeights | None
    center: TwirledNoiseParams
    log_sigma: float = 2.0
    fold_readout: bool | None = None
    floor: float = 1e-8

    def __post_init__(self):
        if self.fold_readout is None:
            self.fold_readout = self.data is not None and self.data.spec.depth == 1
        if self.fold_readout:
            self.center = fold_readout(self.center)

    def free_mask(self, ensemble: EnsembleSpec) -> np.ndarray:
        return _free_mask(ensemble.n, ensemble.depth, bool(self.fold_readout))

    def center_theta(self, ensemble: EnsembleSpec) -> np.ndarray:
        vec = self.center.to_vector()[self.free_mask(ensemble)]
        return np.log(np.maximum(vec, self.floor))

    def params_from_theta(self, theta: np.ndarray, ensemble: EnsembleSpec) -> TwirledNoiseParams:
        vec = np.zeros(self.center.size)
        vec[self.free_mask(ensemble)] = np.exp(np.maximum(theta, LOG_FLOOR))
        return TwirledNoiseParams.from_vector(ensemble.n, vec)

    def theta_from_params(self, params: TwirledNoiseParams, ensemble: EnsembleSpec) -> np.ndarray:
        if self.fold_readout:
            params = fold_readout(params)
        return np.log(np.maximum(params.to_vector()[self.free_mask(ensemble)], self.floor))


def model_weights(params: TwirledNoiseParams, data: EmpiricalWeights) -> np.ndarray:
    return build_occupation_weights(data.spec, params).evaluate_many(data.masks())


def log_likelihood(params: TwirledNoiseParams, data: EmpiricalWeights | None) -> float:
    if data is None or len(data.patterns) == 0:
        return 0.0
    resid = (data.means - model_weights(params, data)) / data.stds
    return float(-0.5 * resid @ resid)


def _log_posterior_theta(theta: np.ndarray, post: PosteriorSpec, ensemble: EnsembleSpec) -> float:
    prior = -0.5 * np.sum((theta - post.center_theta(ensemble)) ** 2) / post.log_sigma**2
    return log_likelihood(post.params_from_theta(theta, ensemble), post.data) + float(prior)


def log_posterior(params: TwirledNoiseParams, post: PosteriorSpec, ensemble: EnsembleSpec) -> float:
    """Gaussian log-likelihood plus log-normal log-prior (additive constants dropped)."""
    if np.any(params.to_vector() < 0):
        raise ValueError("exponents must be non-negative")
    return _log_posterior_theta(post.theta_from_params(params, ensemble), post, ensemble)


def identifiable_subspace(
    params: TwirledNoiseParams, post: PosteriorSpec, ensemble: EnsembleSpec, rtol: float = 1e-6, step: float = 1e-6
) -> tuple[np.ndarray, np.ndarray]:
    """Directions of the free exponents that the likelihood can resolve.

    The Jacobian of the model weights with respect to the free exponents
    (central differences in linear space, rows scaled by 1/sigma) is
    decomposed by SVD.

    Returns:
        Singular values and the orthonormal rows spanning the resolved
        directions (singular value above ``rtol`` times the largest).
    """
    if post.data is None:
        raise ValueError("identifiability needs data")
    free = post.free_mask(ensemble)
    base = (fold_readout(params) if post.fold_readout else params).to_vector()
    cols = []
    for j in np.flatnonzero(free):
        d = np.zeros_like(base)
        d[j] = step
        hi = model_weights(TwirledNoiseParams.from_vector(ensemble.n, base + d), post.data)
        lo = model_weights(TwirledNoiseParams.from_vector(ensemble.n, np.maximum(base - d, 0)), post.data)
        cols.append((hi - lo) / (step + min(step, base[j])))
    jac = np.array(cols).T / post.data.stds[:, None]
    _, sv, vt = np.linalg.svd(jac, full_matrices=False)
    return sv, vt[sv > rtol * sv[0]]


@dataclass
class CalibrationResult:
    map_estimate: TwirledNoiseParams
    diagnostics: dict = field(default_factory=dict)
    posterior_samples: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "map_estimate": self.map_estimate.to_json(),
            "diagnostics": self.diagnostics,
            "posterior_samples": [p.to_vector().tolist() for p in self.posterior_samples],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CalibrationResult":
        est = TwirledNoiseParams.from_json(data["map_estimate"])
        samples = [TwirledNoiseParams.from_vector(est.n, v) for v in data.get("posterior_samples", [])]
        return cls(est, data.get("diagnostics", {}), samples)


def residual_table(params: TwirledNoiseParams, data: EmpiricalWeights) -> list[dict]:
    model = model_weights(params, data)
    return [
        {"pattern": lab, "empirical": float(m), "model": float(w), "sigma": float(s), "z": float((m - w) / s)}
        for lab, m, w, s in zip(data.labels(), data.means, model, data.stds)
    ]


def fit_map(
    post: PosteriorSpec,
    ensemble: EnsembleSpec,
    init: TwirledNoiseParams | None = None,
    max_iters: int = 500,
    tol: float = 1e-6,
) -> CalibrationResult:
    """Maximise the posterior with L-BFGS in log-exponent space (finite-difference gradients)."""
    theta0 = post.center_theta(ensemble) if init is None else post.theta_from_params(init, ensemble)
    if init is not None and np.any(init.to_vector()[post.free_mask(ensemble)] <= 0):
        raise ValueError("initial exponents must be strictly positive")

    def objective(theta):
        return -_log_posterior_theta(theta, post, ensemble)

    if theta0.size == 0:
        theta = theta0
        res = None
    else:
        res = scipy.optimize.minimize(
            objective, theta0, method="L-BFGS-B", options={"maxiter": max_iters, "gtol": tol, "ftol": 1e-15}
        )
        theta = res.x
    est = post.params_from_theta(theta, ensemble)
    diag = {
        "log_posterior": -float(objective(theta)),
        "converged": True if res is None else bool(res.success),
        "iterations": 0 if res is None else int(res.nit),
        "grad_norm": 0.0 if res is None else float(np.linalg.norm(res.jac)),
        "message": "" if res is None else str(res.message),
        "fold_readout": bool(post.fold_readout),
    }
    if post.data is not None:
        diag["residuals"] = residual_table(est, post.data)
    return CalibrationResult(est, diag)


def _laplace_covariance(theta: np.ndarray, post: PosteriorSpec, ensemble: EnsembleSpec, h: float = 1e-3) -> np.ndarray:
    """Inverse of the negative log-posterior Hessian (central differences), eigenvalues clipped."""
    dim = theta.size
    f0 = _log_posterior_theta(theta, post, ensemble)
    hess = np.zeros((dim, dim))
    eye = np.eye(dim) * h
    fp = [_log_posterior_theta(theta + eye[i], post, ensemble) for i in range(dim)]
    fm = [_log_posterior_theta(theta - eye[i], post, ensemble) for i in range(dim)]
    for i in range(dim):
        hess[i, i] = (fp[i] - 2 * f0 + fm[i]) / h**2
        for j in range(i):
            fpp = _log_posterior_theta(theta + eye[i] + eye[j], post, ensemble)
            fmm = _log_posterior_theta(theta - eye[i] - eye[j], post, ensemble)
            hess[i, j] = hess[j, i] = (fpp - fp[i] - fp[j] + 2 * f0 - fm[i] - fm[j] + fmm) / (2 * h**2)
    vals, vecs = np.linalg.eigh(-hess)
    # the prior bounds curvature from below; non-positive directions fall back to it
    vals = np.maximum(vals, 1.0 / post.log_sigma**2)
    return (vecs / vals) @ vecs.T


def sample_posterior(
    post: PosteriorSpec,
    ensemble: EnsembleSpec,
    n_samples: int,
    rng: np.random.Generator,
    init: TwirledNoiseParams | None = None,
    burn_in: int | None = None,
    thin: int = 5,
) -> tuple[list[TwirledNoiseParams], dict]:
    """Adaptive random-walk Metropolis in log-exponent space.

    The proposal covariance is 2.38^2/dim times the running sample covariance
    (plus a small ridge). It starts from the inverse Hessian at the initial
    point and is updated during burn-in only, so the retained chain is a plain
    Metropolis chain.

    Returns:
        Thinned samples and diagnostics (acceptance rate, ``"pathological"`` flag).
    """
    theta = post.center_theta(ensemble) if init is None else post.theta_from_params(init, ensemble)
    dim = theta.size
    if dim == 0:
        return [post.params_from_theta(theta, ensemble)] * n_samples, {"acceptance": 1.0, "pathological": False}
    burn_in = max(2000, 100 * dim) if burn_in is None else burn_in
    scale = 2.38**2 / dim
    cov = _laplace_covariance(theta, post, ensemble)
    logp = _log_posterior_theta(theta, post, ensemble)
    history = []
    samples = []
    accepted = 0
    total = burn_in + n_samples * thin
    for step in range(total):
        prop = rng.multivariate_normal(theta, scale * cov)
        lp = _log_posterior_theta(prop, post, ensemble)
        if np.log(rng.random()) < lp - logp:
            theta, logp = prop, lp
            if step >= burn_in:
                accepted += 1
        if step < burn_in:
            history.append(theta)
            if step >= 50 and step % 25 == 0:
                cov = np.cov(np.array(history).T).reshape(dim, dim) + 1e-6 * np.eye(dim)
        elif (step - burn_in) % thin == thin - 1:
            samples.append(theta.copy())
    rate = accepted / max(1, n_samples * thin)
    diag = {"acceptance": rate, "pathological": rate < 0.05, "burn_in": burn_in, "thin": thin}
    return [post.params_from_theta(t, ensemble) for t in samples], diag


def jittered_center(truth: TwirledNoiseParams, rng: np.random.Generator, factor: float = 2.0) -> TwirledNoiseParams:
    """Truth multiplied by independent log-normal factors of scale ``log(factor)``."""
    vec = truth.to_vector()
    return TwirledNoiseParams.from_vector(truth.n, vec * np.exp(rng.normal(0.0, np.log(factor), vec.size)))
