"""Pauli weights of the twirled brickwork ensemble as matrix product states.

The weight of a Pauli P is the average, over circuits and outcomes, of the
squared Z-basis visibility of U P U^dag, damped by the noise it meets. It is a
product of transfer matrices applied to the vector that indicates words in
{I, Z}^n:

    omega = T_1 C_1 L_1 T_2 C_2 L_2 ... T_final R |+)

with T the single-qubit twirl, C a CNOT sublayer, L the diagonal noise of that
sublayer and R the readout damping. Layers are applied to the vector in reverse
temporal order.

Because the twirl makes every non-identity symbol equivalent, the weights only
depend on the support of P. The production path therefore works in the
two-dimensional empty/occupied basis and expands to the Pauli basis at the end;
a four-dimensional Pauli-basis path is kept as a reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .circuits import EnsembleSpec
from .mps import PauliBasisMps
from .noise import TwirledNoiseParams, chain_edges
from .pauli import CNOT, SignedPauli, PauliString, conjugate_pauli

TWO_QUBIT_KINDS = ("cnot", "haar")
# Gauge that makes noiseless depth-0 weights identically 1 in the occupation basis.
_OCC_GAUGE = np.array([1.0, 3.0])
_PAULI_GAUGE = np.array([1.0, 3.0, 3.0, 3.0])


def twirl_transfer() -> np.ndarray:
    """Single-qubit twirl: identity stays, any other symbol goes uniformly to X, Y, Z."""
    t = np.zeros((4, 4))
    t[0, 0] = 1.0
    t[1:, 1:] = 1.0 / 3.0
    return t


def cnot_transfer() -> np.ndarray:
    """16x16 permutation: entry [P, Q] is 1 when CNOT maps P to +-Q (control is the first qubit)."""
    m = np.zeros((16, 16))
    for a in range(4):
        for b in range(4):
            p = SignedPauli(PauliString.from_symbols([a, b]))
            q = conjugate_pauli(CNOT(0, 1), p).pauli.symbols
            m[4 * a + b, 4 * q[0] + q[1]] = 1.0
    return m


def haar_transfer() -> np.ndarray:
    """Two-qubit Haar-random gate: any non-identity pair goes uniformly to the 15 others."""
    m = np.zeros((16, 16))
    m[0, 0] = 1.0
    m[1:, 1:] = 1.0 / 15.0
    return m


def _two_qubit_transfer(kind: str) -> np.ndarray:
    if kind == "cnot":
        return np.kron(twirl_transfer(), twirl_transfer()) @ cnot_transfer()
    if kind == "haar":
        return haar_transfer()
    raise ValueError(f"two_qubit must be one of {TWO_QUBIT_KINDS}")


def _occupation_of_pair() -> np.ndarray:
    sym = np.arange(16)
    return 2 * (sym // 4 > 0) + (sym % 4 > 0)


def occupation_transfer(kind: str = "cnot") -> np.ndarray:
    """4x4 occupation transfer of a twirled two-qubit gate over (00, 01, 10, 11).

    Index ``2 n_i + n_j``. Entry [n, n'] is the probability that a Pauli with
    uniformly random symbols on pattern ``n`` is mapped to pattern ``n'``.
    """
    return _occupation_transfer(kind).copy()


@lru_cache(maxsize=None)
def _occupation_transfer(kind: str) -> np.ndarray:
    full = np.kron(twirl_transfer(), twirl_transfer()) @ _two_qubit_transfer(kind)
    occ = _occupation_of_pair()
    out = np.zeros((4, 4))
    for n in range(4):
        members = np.nonzero(occ == n)[0]
        for np_ in range(4):
            out[n, np_] = full[members][:, occ == np_].sum(axis=1).mean()
    return out


@dataclass
class TransferLayerMpo:
    """One layer of the weight recursion as local operators on the chain.

    ``site_ops`` maps a site to a (d, d) matrix and ``pair_ops`` maps the left
    site of a neighbouring pair to a (d^2, d^2) matrix. Operators of one layer
    act on disjoint sites.
    """

    kind: str
    n: int
    site_ops: dict = field(default_factory=dict)
    pair_ops: dict = field(default_factory=dict)
    basis: str = "IXYZ"

    def apply(self, mps: PauliBasisMps, cutoff: float = 0.0, max_bond: int | None = None) -> PauliBasisMps:
        """Return ``layer @ mps`` (entry-wise exact up to the SVD cutoff)."""
        if mps.basis != self.basis:
            raise ValueError("layer and MPS bases differ")
        out = mps.copy()
        for k, op in self.site_ops.items():
            out.apply_site(k, op)
        for k, op in self.pair_ops.items():
            out.apply_pair(k, op, cutoff, max_bond)
        return out

    def to_mpo(self) -> list[np.ndarray]:
        """MPO tensors of shape (left, d_out, d_in, right)."""
        d = 4 if self.basis == "IXYZ" else 2
        tensors: list[np.ndarray] = []
        k = 0
        while k < self.n:
            if k in self.pair_ops:
                op = self.pair_ops[k].reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
                u, s, vt = np.linalg.svd(op)
                r = max(1, int(np.count_nonzero(s > 1e-14 * s[0])))
                tensors.append((u[:, :r] * s[:r]).reshape(1, d, d, r))
                tensors.append(vt[:r].reshape(r, d, d, 1))
                k += 2
            else:
                tensors.append(self.site_ops.get(k, np.eye(d)).reshape(1, d, d, 1))
                k += 1
        return tensors

    def to_dense(self) -> np.ndarray:
        """Full d^n x d^n matrix (small n only)."""
        out = np.ones((1, 1, 1))
        for t in self.to_mpo():
            out = np.einsum("pqa,astb->psqtb", out, t)
            out = out.reshape(out.shape[0] * out.shape[1], out.shape[2] * out.shape[3], -1)
        return out[:, :, 0]


def twirl_layer(n: int) -> TransferLayerMpo:
    t = twirl_transfer()
    return TransferLayerMpo("twirl", n, {k: t for k in range(n)})


def cnot_layer(n: int, parity: int, two_qubit: str = "cnot") -> TransferLayerMpo:
    op = cnot_transfer() if two_qubit == "cnot" else haar_transfer()
    return TransferLayerMpo("cnot", n, pair_ops={i: op for i, _ in chain_edges(n, parity)})


def _pattern_diag(params: TwirledNoiseParams, parity: int):
    """Per-site and per-edge damping in the occupation basis."""
    paired = {}
    pair_diag = {}
    for k, (i, j) in enumerate(chain_edges(params.n, parity)):
        pair_diag[i] = np.exp(-params.edge_pattern_table(parity, k).ravel())
        paired[i] = paired[j] = True
    site_diag = {q: np.exp(-np.array([0.0, params.nodes[parity, q]])) for q in range(params.n) if q not in paired}
    return site_diag, pair_diag


def noise_transfer(params: TwirledNoiseParams, parity) -> TransferLayerMpo:
    """Diagonal noise layer in the Pauli basis for one sublayer parity."""
    parity = 0 if parity in (0, "even") else 1
    site_diag, pair_diag = _pattern_diag(params, parity)
    occ1 = np.array([0, 1, 1, 1])
    occ2 = _occupation_of_pair()
    layer = TransferLayerMpo("noise", params.n)
    for q, dg in site_diag.items():
        layer.site_ops[q] = np.diag(dg[occ1])
    for i, dg in pair_diag.items():
        layer.pair_ops[i] = np.diag(dg[occ2])
    return layer


def readout_transfer(params: TwirledNoiseParams) -> TransferLayerMpo:
    """Bit flips before measurement damp Y and Z but not X."""
    return TransferLayerMpo(
        "readout", params.n, {q: np.diag([1.0, 1.0, np.exp(-r), np.exp(-r)]) for q, r in enumerate(params.readout)}
    )


def weight_layers(spec: EnsembleSpec, params: TwirledNoiseParams | None = None, two_qubit: str = "cnot"):
    """Pauli-basis layers in temporal order."""
    n = spec.n
    layers = []
    for s in range(spec.n_sublayers):
        parity = s % 2
        layers.append(twirl_layer(n))
        layers.append(cnot_layer(n, parity, two_qubit))
        if params is not None:
            layers.append(noise_transfer(params, parity))
    layers.append(twirl_layer(n))
    if params is not None:
        layers.append(readout_transfer(params))
    return layers


def _check_params(spec: EnsembleSpec, params: TwirledNoiseParams | None) -> None:
    if params is not None and params.n != spec.n:
        raise ValueError("noise parameters and ensemble disagree on the qubit count")


def build_weights_pauli_basis(
    spec: EnsembleSpec, params: TwirledNoiseParams | None = None, two_qubit: str = "cnot", cutoff: float = 1e-14
) -> PauliBasisMps:
    """Reference construction directly in the four-dimensional Pauli basis."""
    _check_params(spec, params)
    mps = PauliBasisMps.plus_vector(spec.n)
    for layer in reversed(weight_layers(spec, params, two_qubit)):
        mps = layer.apply(mps, cutoff)
    return mps


def build_occupation_weights(
    spec: EnsembleSpec,
    params: TwirledNoiseParams | None = None,
    two_qubit: str = "cnot",
    cutoff: float = 1e-14,
    max_bond: int | None = None,
    gauged: bool = False,
) -> PauliBasisMps:
    """Weights in the empty/occupied basis.

    With ``gauged=True`` the occupied component of every site is multiplied by
    3, which keeps all entries of order one; this is the form used internally
    for truncation and inversion.
    """
    _check_params(spec, params)
    n = spec.n
    if max_bond is not None and max_bond < 1:
        raise ValueError("max_bond must be positive")
    g2 = np.kron(_OCC_GAUGE, _OCC_GAUGE)
    base = occupation_transfer(two_qubit)
    readout = np.zeros(n) if params is None else params.readout
    mps = PauliBasisMps.product([[1.0, np.exp(-r)] for r in readout], "EO")
    for s in reversed(range(spec.n_sublayers)):
        parity = s % 2
        if params is None:
            site_diag, pair_diag = {}, {i: np.ones(4) for i, _ in chain_edges(n, parity)}
        else:
            site_diag, pair_diag = _pattern_diag(params, parity)
        for q, dg in site_diag.items():
            mps.apply_site(q, np.diag(dg))
        for i, dg in pair_diag.items():
            op = (g2[:, None] * (base * dg[None, :])) / g2[None, :]
            mps.apply_pair(i, op, cutoff)
    mps = mps.compress(cutoff, max_bond)
    if max_bond is None and spec.depth and mps.max_bond > 4**spec.n_sublayers:
        raise RuntimeError("bond dimension exceeded its exact bound")
    if not gauged:
        mps = mps.scale_sites(1.0 / _OCC_GAUGE)
    noisy = params is not None and bool(np.any(params.to_vector() > 0))
    mps.metadata.update({"kind": "weights", "n": n, "d": spec.depth, "two_qubit": two_qubit, "noisy": noisy})
    return mps


def build_weights(
    spec: EnsembleSpec,
    params: TwirledNoiseParams | None = None,
    two_qubit: str = "cnot",
    bond_cap: int = 4096,
    cutoff: float = 1e-14,
) -> PauliBasisMps:
    """Noisy (or, with ``params=None``, noiseless) Pauli weights in the Pauli basis.

    Only numerically zero singular values (below ``cutoff`` relative) are
    discarded, so the result is exact to floating-point accuracy.

    Raises:
        ValueError: if the exact bond bound ``4**(2d)`` exceeds ``bond_cap``.
    """
    if 4 ** (2 * spec.depth) > bond_cap and spec.depth > 0:
        raise ValueError(f"depth {spec.depth} exceeds the bond cap {bond_cap}")
    return build_occupation_weights(spec, params, two_qubit, cutoff).to_pauli_basis()


# --------------------------------------------------------------------------
# inverse weights


@dataclass
class _Sweeper:
    """Two-site alternating least squares for min sum_w mu(w) (a(w) v(w) - 1)^2."""

    a: list
    measure: np.ndarray
    chi: int
    cutoff: float

    def __post_init__(self):
        m = self.measure
        n = len(self.a)
        d = m.size
        w2 = []
        for t in self.a:
            q = np.einsum("asb,s,csd->acsbd", t, m, t)
            w2.append(q.reshape(t.shape[0] ** 2, d, t.shape[2] ** 2))
        self.w2 = PauliBasisMps(w2, "EO" if d == 2 else "IXYZ").compress(1e-15).tensors
        self.w1 = [np.einsum("asb,s->asb", t, m) for t in self.a]
        self.n = n
        self.d = d

    def _grow_left(self, k, lq, ll, b):
        lq = np.einsum("aCx,asb,CsD,xsy->bDy", lq, b, self.w2[k], b, optimize=True)
        ll = np.einsum("aC,asb,CsD->bD", ll, b, self.w1[k], optimize=True)
        return lq, ll

    def _grow_right(self, k, rq, rl, b):
        rq = np.einsum("bDy,asb,CsD,xsy->aCx", rq, b, self.w2[k], b, optimize=True)
        rl = np.einsum("bD,asb,CsD->aC", rl, b, self.w1[k], optimize=True)
        return rq, rl

    def _solve_block(self, k, lq, ll, rq, rl):
        w2a, w2b = self.w2[k], self.w2[k + 1]
        w1a, w1b = self.w1[k], self.w1[k + 1]
        chl, chr_ = lq.shape[0], rq.shape[0]
        theta = np.zeros((chl, self.d, self.d, chr_))
        gain = 0.0
        for s in range(self.d):
            x = np.einsum("aCb,CD->aDb", lq, w2a[:, s, :], optimize=True)
            lin_left = ll @ w1a[:, s, :]
            for t in range(self.d):
                y = np.einsum("aDb,DE->aEb", x, w2b[:, t, :], optimize=True)
                h = np.einsum("aEb,xEy->axby", y, rq, optimize=True).reshape(chl * chr_, chl * chr_)
                g = np.einsum("aD,DE,xE->ax", lin_left, w1b[:, t, :], rl, optimize=True).reshape(-1)
                h = 0.5 * (h + h.T)
                ridge = 1e-14 * max(np.trace(h) / h.shape[0], 1e-300)
                try:
                    sol = scipy.linalg.solve(h + ridge * np.eye(h.shape[0]), g, assume_a="pos")
                except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                    sol = np.linalg.lstsq(h, g, rcond=None)[0]
                theta[:, s, t, :] = sol.reshape(chl, chr_)
                gain += float(g @ sol)
        return theta, 1.0 - gain

    def residual(self, b: list) -> float:
        """Mean-square residual evaluated from the difference MPS (no cancellation)."""
        kind = "EO" if self.d == 2 else "IXYZ"
        diff = PauliBasisMps(self.a, kind).hadamard(PauliBasisMps(b, kind)).add(PauliBasisMps.constant(self.n, -1.0, kind))
        return diff.dot(diff, self.measure)

    def run(self, b: list, max_sweeps: int, tol: float):
        """Sweep until the residual drops below ``tol`` or stops improving."""
        n = self.n
        if n == 1:
            b = [(1.0 / self.a[0][0, :, 0]).reshape(1, -1, 1)]
            return b, [self.residual(b)]
        history = []
        # right-canonicalise the initial guess and build right environments
        for k in range(n - 1, 0, -1):
            t = b[k]
            q, r = np.linalg.qr(t.reshape(t.shape[0], -1).T)
            b[k] = q.T.reshape(-1, t.shape[1], t.shape[2])
            b[k - 1] = np.einsum("asb,cb->asc", b[k - 1], r)
        one = np.ones((1, 1, 1)), np.ones((1, 1))
        right = [None] * (n + 1)
        right[n] = one
        for k in range(n - 1, 1, -1):
            right[k] = self._grow_right(k, *right[k + 1], b[k])
        left = [None] * (n + 1)
        left[0] = one
        for _ in range(max_sweeps):
            for k in range(n - 1):
                theta, _ = self._solve_block(k, *left[k], *right[k + 2])
                b[k], b[k + 1] = self._split(theta, move_right=True)
                left[k + 1] = self._grow_left(k, *left[k], b[k])
            for k in range(n - 2, -1, -1):
                theta, _ = self._solve_block(k, *left[k], *right[k + 2])
                b[k], b[k + 1] = self._split(theta, move_right=False)
                right[k + 1] = self._grow_right(k + 1, *right[k + 2], b[k + 1])
            history.append(self.residual(b))
            if history[-1] <= tol:
                break
            if len(history) > 1 and history[-2] - history[-1] <= 1e-2 * history[-1]:
                break
        return b, history

    def _split(self, theta, move_right: bool):
        chl, d, _, chr_ = theta.shape
        u, s, vt = np.linalg.svd(theta.reshape(chl * d, d * chr_), full_matrices=False)
        keep = max(1, min(self.chi, int(np.count_nonzero(s > self.cutoff * s[0])))) if s[0] > 0 else 1
        u, s, vt = u[:, :keep], s[:keep], vt[:keep]
        if move_right:
            return u.reshape(chl, d, keep), (s[:, None] * vt).reshape(keep, d, chr_)
        return (u * s).reshape(chl, d, keep), vt.reshape(keep, d, chr_)


def _is_support_only(w: PauliBasisMps) -> bool:
    return all(np.array_equal(t[:, 1], t[:, 2]) and np.array_equal(t[:, 1], t[:, 3]) for t in w.tensors)


def invert_weights(
    w: PauliBasisMps,
    chi_target: int | None = None,
    tol: float = 1e-12,
    max_sweeps: int = 30,
    cutoff: float = 1e-14,
    chi_max: int = 64,
) -> PauliBasisMps:
    """Variational inverse: minimise the mean over uniform Paulis of (w v - 1)^2.

    Runs two-site alternating least-squares sweeps (each local step is the exact
    minimiser of the quadratic loss in the two updated tensors). The start point
    is the entrywise reciprocal of a product approximation built from the
    single-site weights. Support-only inputs are solved in the two-dimensional
    occupation basis.

    Returns:
        The inverse MPS in the input basis. ``metadata`` holds the final
        mean-squared residual (``"residual"``), the per-sweep history and a
        ``"converged"`` flag (residual at most ``tol``).
    """
    n = w.n
    occupation = w.basis == "EO" or _is_support_only(w)
    if occupation:
        base = w.to_occupation_basis()
        measure = np.array([0.25, 0.75])
        gauge = _OCC_GAUGE
    else:
        base = w
        measure = np.full(4, 0.25)
        gauge = _PAULI_GAUGE
    a = base.scale_sites(gauge)
    d = gauge.size
    singles = []
    for k in range(n):
        word = np.zeros(n, dtype=np.intp)
        vals = []
        for s in range(1, d):
            word[k] = s
            vals.append(a.evaluate(word))
        singles.append(vals)
    if np.any(np.array(singles) <= 0) or a.evaluate(np.zeros(n, dtype=np.intp)) <= 0:
        raise ValueError("weights must be strictly positive")
    adaptive = chi_target is None
    chi = max(base.max_bond, 1) if adaptive else int(chi_target)
    a0 = a.evaluate(np.zeros(n, dtype=np.intp))
    scale0 = a0 ** (1.0 / n)
    b = [np.array([1.0] + [a0 / sv for sv in vals]).reshape(1, d, 1) / scale0 for vals in singles]
    sweeper = _Sweeper([t.copy() for t in a.tensors], measure, chi, cutoff)
    history: list[float] = []
    best = (np.inf, b)
    while True:
        b, hist = sweeper.run([t.copy() for t in best[1]], max_sweeps, tol)
        history.extend(hist)
        if hist[-1] < best[0]:
            best = (hist[-1], b)
        if best[0] <= tol or not adaptive or sweeper.chi >= chi_max:
            break
        sweeper.chi = min(2 * sweeper.chi, chi_max)
    residual, b = best
    inv = PauliBasisMps(b, "EO" if occupation else "IXYZ").scale_sites(gauge)
    if occupation and w.basis == "IXYZ":
        inv = inv.to_pauli_basis()
    inv.metadata.update(
        {
            "kind": "inverse_weights",
            "residual": float(residual),
            "history": [float(h) for h in history],
            "converged": bool(residual <= tol),
            "chi_target": int(sweeper.chi),
        }
    )
    inv.metadata.update({k: w.metadata[k] for k in ("n", "d", "two_qubit", "noisy") if k in w.metadata})
    return inv
