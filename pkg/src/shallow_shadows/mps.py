"""Matrix product states over Pauli strings.

A :class:`PauliBasisMps` stores one tensor of shape (left, d, right) per site
and represents a real function on words over a local basis. Two bases are
used: ``"IXYZ"`` (d = 4, the Pauli basis) and ``"EO"`` (d = 2, empty/occupied),
the latter for functions that only depend on the support of a Pauli.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .pauli import PauliString

BASES = {"IXYZ": 4, "EO": 2}


class PauliBasisMps:
    """Tensor train with open boundaries and a named local basis."""

    def __init__(self, tensors: Sequence[np.ndarray], basis: str = "IXYZ", metadata: dict | None = None):
        if basis not in BASES:
            raise ValueError(f"unknown basis {basis!r}")
        self.basis = basis
        self.tensors = [np.asarray(t, dtype=float) for t in tensors]
        self.metadata = dict(metadata or {})
        d = BASES[basis]
        if not self.tensors:
            raise ValueError("empty MPS")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != d:
                raise ValueError(f"site {k}: expected (left, {d}, right) tensor, got {t.shape}")
            if k and t.shape[0] != self.tensors[k - 1].shape[2]:
                raise ValueError(f"bond mismatch at site {k}")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")

    # construction --------------------------------------------------------
    @classmethod
    def product(cls, vectors: Sequence[Sequence[float]], basis: str = "IXYZ") -> "PauliBasisMps":
        return cls([np.asarray(v, dtype=float).reshape(1, -1, 1) for v in vectors], basis)

    @classmethod
    def plus_vector(cls, n: int) -> "PauliBasisMps":
        """Indicator of words in {I, Z}^n."""
        return cls.product([[1.0, 0.0, 0.0, 1.0]] * n)

    @classmethod
    def basis_vector(cls, p: PauliString, scale: float = 1.0) -> "PauliBasisMps":
        vecs = []
        for s in p.symbols:
            v = np.zeros(4)
            v[s] = 1.0
            vecs.append(v)
        vecs[0] = vecs[0] * scale
        return cls.product(vecs)

    @classmethod
    def constant(cls, n: int, value: float = 1.0, basis: str = "IXYZ") -> "PauliBasisMps":
        vecs = [np.ones(BASES[basis])] * n
        out = cls.product(vecs, basis)
        out.tensors[0] = out.tensors[0] * value
        return out

    def copy(self) -> "PauliBasisMps":
        return PauliBasisMps([t.copy() for t in self.tensors], self.basis, self.metadata)

    # properties ----------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def local_dim(self) -> int:
        return BASES[self.basis]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max([1] + self.bond_dims)

    # evaluation ----------------------------------------------------------
    def _indices(self, p) -> np.ndarray:
        if isinstance(p, PauliString):
            return p.occupation.astype(np.intp) if self.basis == "EO" else p.symbols.astype(np.intp)
        return np.asarray(p, dtype=np.intp)

    def evaluate(self, p) -> float:
        """Value at one word (a PauliString or an index sequence in the local basis)."""
        idx = self._indices(p)
        if idx.shape != (self.n,):
            raise ValueError("word length does not match the MPS")
        env = np.ones(1)
        for t, s in zip(self.tensors, idx):
            env = env @ t[:, s, :]
        return float(env[0])

    def evaluate_many(self, words: np.ndarray) -> np.ndarray:
        """Values at many words given as an integer array (m, n) of local indices."""
        words = np.asarray(words, dtype=np.intp)
        if words.ndim != 2 or words.shape[1] != self.n:
            raise ValueError("words must have shape (m, n)")
        env = np.ones((words.shape[0], 1))
        for k, t in enumerate(self.tensors):
            mats = t.transpose(1, 0, 2)[words[:, k]]
            env = np.einsum("ma,mab->mb", env, mats)
        return env[:, 0]

    def to_dense(self) -> np.ndarray:
        """All d^n values; index order is the row-major word (site 0 most significant)."""
        out = self.tensors[0].reshape(-1, self.tensors[0].shape[2])
        for t in self.tensors[1:]:
            out = np.einsum("pa,asb->psb", out, t).reshape(-1, t.shape[2])
        return out[:, 0]

    # algebra -------------------------------------------------------------
    def hadamard(self, other: "PauliBasisMps", max_bond: int | None = None) -> "PauliBasisMps":
        """Elementwise product (bond dimensions multiply)."""
        self._check_compatible(other)
        out = []
        for a, b in zip(self.tensors, other.tensors):
            t = np.einsum("asb,csd->acsbd", a, b)
            out.append(t.reshape(a.shape[0] * b.shape[0], a.shape[1], a.shape[2] * b.shape[2]))
        res = PauliBasisMps(out, self.basis)
        if max_bond is not None and res.max_bond > max_bond:
            raise ValueError(f"product bond {res.max_bond} exceeds the cap {max_bond}")
        return res

    def dot(self, other: "PauliBasisMps", site_weights: np.ndarray | None = None) -> float:
        """Sum over words of ``self * other * prod_k site_weights[s_k]``."""
        self._check_compatible(other)
        w = np.ones(self.local_dim) if site_weights is None else np.asarray(site_weights, dtype=float)
        env = np.ones((1, 1))
        for a, b in zip(self.tensors, other.tensors):
            env = np.einsum("ac,asb,s,csd->bd", env, a, w, b, optimize=True)
        return float(env[0, 0])

    def total(self, site_weights: np.ndarray | None = None) -> float:
        """Sum of all values, optionally weighted per site."""
        w = np.ones(self.local_dim) if site_weights is None else np.asarray(site_weights, dtype=float)
        env = np.ones(1)
        for t in self.tensors:
            env = env @ np.einsum("asb,s->ab", t, w)
        return float(env[0])

    def add(self, other: "PauliBasisMps") -> "PauliBasisMps":
        """Elementwise sum (bond dimensions add)."""
        self._check_compatible(other)
        out = []
        for k, (a, b) in enumerate(zip(self.tensors, other.tensors)):
            if self.n == 1:
                out.append(a + b)
            elif k == 0:
                out.append(np.concatenate([a, b], axis=2))
            elif k == self.n - 1:
                out.append(np.concatenate([a, b], axis=0))
            else:
                t = np.zeros((a.shape[0] + b.shape[0], a.shape[1], a.shape[2] + b.shape[2]))
                t[: a.shape[0], :, : a.shape[2]] = a
                t[a.shape[0] :, :, a.shape[2] :] = b
                out.append(t)
        return PauliBasisMps(out, self.basis)

    def scale(self, factor: float) -> "PauliBasisMps":
        out = self.copy()
        out.tensors[0] = out.tensors[0] * factor
        return out

    def apply_site(self, k: int, op: np.ndarray) -> None:
        """In place: new[s] = sum_t op[s, t] old[t] on site ``k``."""
        self.tensors[k] = np.einsum("st,atb->asb", op, self.tensors[k])

    def scale_sites(self, weights: np.ndarray) -> "PauliBasisMps":
        """Multiply every site's local index ``s`` by ``weights[s]`` (a diagonal gauge)."""
        w = np.asarray(weights, dtype=float)
        return PauliBasisMps([t * w[None, :, None] for t in self.tensors], self.basis, self.metadata)

    def apply_pair(self, k: int, op: np.ndarray, cutoff: float = 0.0, max_bond: int | None = None) -> None:
        """In place two-site update on sites ``k, k+1`` with a (d^2, d^2) operator.

        The new block is split by SVD; singular values below ``cutoff`` times the
        largest are dropped, and at most ``max_bond`` are kept.
        """
        d = self.local_dim
        a, b = self.tensors[k], self.tensors[k + 1]
        theta = np.einsum("asb,btc->astc", a, b)
        theta = np.einsum("uv,avc->auc", op, theta.reshape(a.shape[0], d * d, b.shape[2]))
        self._split(k, theta.reshape(a.shape[0] * d, d * b.shape[2]), cutoff, max_bond)

    def _split(self, k: int, mat: np.ndarray, cutoff: float, max_bond: int | None) -> None:
        d = self.local_dim
        left = self.tensors[k].shape[0]
        right = self.tensors[k + 1].shape[2]
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        keep = max(1, int(np.count_nonzero(s > cutoff * s[0]))) if s[0] > 0 else 1
        if max_bond is not None:
            keep = min(keep, max_bond)
        self.tensors[k] = u[:, :keep].reshape(left, d, keep)
        self.tensors[k + 1] = (s[:keep, None] * vt[:keep]).reshape(keep, d, right)

    def compress(self, cutoff: float = 1e-14, max_bond: int | None = None) -> "PauliBasisMps":
        """Canonical SVD compression (left QR sweep, then truncating right-to-left sweep)."""
        ts = [t.copy() for t in self.tensors]
        for k in range(self.n - 1):
            a = ts[k]
            q, r = np.linalg.qr(a.reshape(-1, a.shape[2]))
            ts[k] = q.reshape(a.shape[0], a.shape[1], q.shape[1])
            ts[k + 1] = np.einsum("ab,bsc->asc", r, ts[k + 1])
        for k in range(self.n - 1, 0, -1):
            a = ts[k]
            u, s, vt = np.linalg.svd(a.reshape(a.shape[0], -1), full_matrices=False)
            keep = max(1, int(np.count_nonzero(s > cutoff * s[0]))) if s[0] > 0 else 1
            if max_bond is not None:
                keep = min(keep, max_bond)
            ts[k] = vt[:keep].reshape(keep, a.shape[1], a.shape[2])
            ts[k - 1] = np.einsum("asb,bc->asc", ts[k - 1], u[:, :keep] * s[:keep])
        return PauliBasisMps(ts, self.basis, self.metadata)

    # basis changes ---------------------------------------------------------
    def to_pauli_basis(self) -> "PauliBasisMps":
        """Expand an occupation-basis MPS: X, Y and Z all take the occupied value."""
        if self.basis == "IXYZ":
            return self.copy()
        ts = [t[:, [0, 1, 1, 1], :] for t in self.tensors]
        return PauliBasisMps(ts, "IXYZ", self.metadata)

    def to_occupation_basis(self) -> "PauliBasisMps":
        """Restrict to support-only information by reading the X slice as 'occupied'."""
        if self.basis == "EO":
            return self.copy()
        return PauliBasisMps([t[:, [0, 1], :] for t in self.tensors], "EO", self.metadata)

    # serialisation -----------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "basis": self.basis,
            "shapes": [list(t.shape) for t in self.tensors],
            "data": [t.ravel(order="C").tolist() for t in self.tensors],
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PauliBasisMps":
        ts = [np.array(v, dtype=float).reshape(s, order="C") for s, v in zip(data["shapes"], data["data"])]
        return cls(ts, data["basis"], data.get("metadata"))

    def _check_compatible(self, other: "PauliBasisMps") -> None:
        if other.n != self.n:
            raise ValueError(f"MPS lengths differ: {self.n} vs {other.n}")
        if other.basis != self.basis:
            raise ValueError("MPS bases differ")

    def __repr__(self):
        return f"PauliBasisMps(n={self.n}, basis={self.basis}, bonds={self.bond_dims})"


def contract_three(a: PauliBasisMps, b: PauliBasisMps, c: PauliBasisMps) -> float:
    """Sum over all words of a * b * c, in O(n chi_a chi_b chi_c) memory per step."""
    a._check_compatible(b)
    a._check_compatible(c)
    env = np.ones((1, 1, 1))
    for ta, tb, tc in zip(a.tensors, b.tensors, c.tensors):
        env = np.einsum("abc,asx,bsy,csz->xyz", env, ta, tb, tc, optimize=True)
    return float(env[0, 0, 0])
