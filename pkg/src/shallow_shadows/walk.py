"""Random-walk theory of Pauli weights in brickwork circuits.

A Pauli is reduced to its support, a set of particles on a chain. Each step
applies one sublayer of twirled two-qubit gates: an occupied pair is replaced
by one of the three non-empty pair patterns drawn from a column of the
particle-hole transfer matrix, and an empty pair stays empty. With depolarizing
noise of strength lambda each particle is damped by exp(-lambda) after every
step, and the final measurement keeps each surviving particle with
probability 1/3:

    omega_t(P_k) = E[3^(-l_t) exp(-lambda * sum_{i=1..t} l_i)]

with l_i the number of particles after step i. Time is counted in sublayers,
so an ensemble of depth d (d even/odd pairs) corresponds to t = 2d.

The module evolves the walk exactly for small windows, samples it by
Monte Carlo, fits the spreading/relaxation phenomenology to the sampled
traces, and evaluates the resulting log-normal estimate together with the
closed-form depth bound and its optimal depth.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.optimize

from .mps import PauliBasisMps

HAAR_A = 1.0 / 5.0
# exp(-gamma) = (4/5)^2
GAMMA = 2.0 * math.log(5.0 / 4.0)
LOG3 = math.log(3.0)
MAX_WINDOW = 24
ALIGNMENTS = (0, 1)


def particle_hole_transfer(a: float = HAAR_A) -> np.ndarray:
    """Column-stochastic two-site transfer over (empty-empty, occ-empty, empty-occ, occ-occ).

    Entry [new, old] is the probability of moving from pattern ``old`` to
    pattern ``new``; index is ``n_left + 2 n_right``.
    """
    t = np.zeros((4, 4))
    t[0, 0] = 1.0
    t[1, 1:] = a
    t[2, 1:] = a
    t[3, 1:] = 1.0 - 2.0 * a
    return t


def from_occupation_transfer(occ: np.ndarray) -> np.ndarray:
    """Convert a row-stochastic transfer indexed ``2 n_left + n_right`` to the walk convention."""
    perm = [0, 2, 1, 3]
    return np.asarray(occ, dtype=float)[np.ix_(perm, perm)].T


def _check_transfer(transfer: np.ndarray) -> np.ndarray:
    t = np.asarray(transfer, dtype=float)
    if t.shape != (4, 4) or np.any(t < 0) or not np.allclose(t.sum(axis=0), 1.0):
        raise ValueError("transfer must be a column-stochastic 4x4 matrix")
    if t[0, 0] != 1.0:
        raise ValueError("the empty pair must stay empty")
    return t


def step_parity(t: int, first_parity: int) -> int:
    """Parity of the left site of the gated pairs in step ``t`` (1-based)."""
    return (first_parity + t - 1) % 2


# --------------------------------------------------------------------------
# exact evolution


@dataclass
class ExactWalk:
    """Exact walk result.

    Attributes:
        omega: E[3^(-l_t) exp(-lambda sum l_i)].
        mean_l: E[l_i] for i = 0..t (undamped distribution).
        var_l: var(l_i) for i = 0..t (undamped distribution).
    """

    omega: float
    mean_l: np.ndarray
    var_l: np.ndarray


def _popcount_table(n: int) -> np.ndarray:
    grids = np.indices((2,) * n, dtype=np.int8)
    return grids.sum(axis=0)


def _apply_gate(p: np.ndarray, i: int, t: np.ndarray) -> np.ndarray:
    # axes i, i+1 hold the pair; stack patterns in walk order n_i + 2 n_{i+1}
    q = np.moveaxis(p, (i, i + 1), (0, 1))
    old = np.stack([q[0, 0], q[1, 0], q[0, 1], q[1, 1]])
    new = np.tensordot(t, old, axes=1)
    out = np.empty_like(q)
    out[0, 0], out[1, 0], out[0, 1], out[1, 1] = new
    return np.moveaxis(out, (0, 1), (i, i + 1))


def evolve_exact(
    initial: np.ndarray,
    n_steps: int,
    lam: float = 0.0,
    first_parity: int = 0,
    transfer: np.ndarray | None = None,
) -> ExactWalk:
    """Exact walk on an open chain from a given initial distribution or configuration.

    Args:
        initial: Boolean occupation of length n (a single configuration) or an
            array of shape (2,)*n holding a probability distribution.
        n_steps: Number of sublayer steps.
        lam: Damping exponent per particle per step.
        first_parity: Parity of the pairs gated in the first step.
        transfer: Two-site transfer; defaults to the Haar matrix.
    """
    t = _check_transfer(particle_hole_transfer() if transfer is None else transfer)
    initial = np.asarray(initial)
    if initial.ndim == 1:
        n = initial.size
        if n > MAX_WINDOW:
            raise ValueError(f"window of {n} sites exceeds {MAX_WINDOW}")
        p = np.zeros((2,) * n)
        p[tuple(initial.astype(int))] = 1.0
    else:
        n = initial.ndim
        if n > MAX_WINDOW:
            raise ValueError(f"window of {n} sites exceeds {MAX_WINDOW}")
        p = initial.astype(float).copy()
    count = _popcount_table(n)
    # the plain distribution gives occupancy statistics; the damped one gives omega
    damped = p.copy()
    decay = np.exp(-lam * count)
    means = [float((p * count).sum())]
    variances = [float((p * count**2).sum()) - means[0] ** 2]
    for step in range(1, n_steps + 1):
        for i in range(step_parity(step, first_parity), n - 1, 2):
            p = _apply_gate(p, i, t)
            damped = _apply_gate(damped, i, t)
        damped = damped * decay
        m = float((p * count).sum())
        means.append(m)
        variances.append(float((p * count**2).sum()) - m * m)
    omega = float((damped * 3.0 ** (-count.astype(float))).sum())
    return ExactWalk(omega, np.array(means), np.array(variances))


def _window(k: int, n_steps: int, n_window: int | None) -> tuple[int, int]:
    n = k + 2 * (n_steps + 1) if n_window is None else n_window
    if n < k:
        raise ValueError("window smaller than the operator")
    return n, (n - k) // 2


def walk_exact(
    k: int,
    d: int,
    lam: float = 0.0,
    n_window: int | None = None,
    alignment: int | str = "average",
    transfer: np.ndarray | None = None,
) -> float:
    """Exact weight of a contiguous k-site operator after d sublayer steps.

    The operator sits in the middle of a window padded by d + 1 empty sites per
    side, wide enough that the support never reaches the edge. ``alignment``
    selects whether the first step gates the operator's leftmost site with its
    right (0) or left (1) neighbour; ``"average"`` averages both, which is the
    weight of an operator at a uniformly random position on a long chain.
    """
    if alignment == "average":
        return 0.5 * sum(walk_exact(k, d, lam, n_window, a, transfer) for a in ALIGNMENTS)
    if d == 0:
        return 3.0**-k
    n, start = _window(k, d, n_window)
    occ = np.zeros(n, bool)
    occ[start : start + k] = True
    return evolve_exact(occ, d, lam, (start + int(alignment)) % 2, transfer).omega


def walk_weights_mps(
    n: int,
    n_steps: int,
    lam: float = 0.0,
    first_parity: int = 0,
    transfer: np.ndarray | None = None,
    cutoff: float = 1e-14,
) -> PauliBasisMps:
    """Weights of every initial configuration of an n-site chain as an MPS.

    The backward recursion w_{t-1} = T_t^T (D w_t), started from
    w_t(c) = 3^(-l(c)), gives omega for all initial occupations at once, so
    windows beyond the reach of ``evolve_exact`` stay tractable.
    """
    t = _check_transfer(particle_hole_transfer() if transfer is None else transfer)
    # walk order n_left + 2 n_right -> tensor order 2 n_left + n_right
    perm = [0, 2, 1, 3]
    back = t[np.ix_(perm, perm)].T
    decay = np.diag([1.0, math.exp(-lam)])
    w = PauliBasisMps.product([[1.0, 1.0 / 3.0]] * n, basis="EO")
    for step in range(n_steps, 0, -1):
        for i in range(n):
            w.apply_site(i, decay)
        for i in range(step_parity(step, first_parity), n - 1, 2):
            w.apply_pair(i, back, cutoff=cutoff)
    return w


def walk_exact_mps(
    k: int,
    d: int,
    lam: float = 0.0,
    alignment: int | str = "average",
    transfer: np.ndarray | None = None,
) -> float:
    """Same quantity as ``walk_exact`` computed by MPS contraction (no window limit)."""
    if alignment == "average":
        return 0.5 * sum(walk_exact_mps(k, d, lam, a, transfer) for a in ALIGNMENTS)
    n, start = _window(k, d, None)
    w = walk_weights_mps(n, d, lam, (start + int(alignment)) % 2, transfer)
    occ = np.zeros(n, dtype=np.intp)
    occ[start : start + k] = 1
    return float(w.evaluate_many(occ[None])[0])


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MonteCarloWalk:
    """Monte-Carlo walk result.

    Attributes:
        omega: Sample mean of 3^(-l_t) exp(-lambda sum l_i).
        omega_std: Standard error of ``omega``.
        mean_l: E[l_i], i = 0..t.
        var_l: var(l_i), i = 0..t.
        mean_sum_l: E[sum_{j<=i} l_j], i = 0..t.
        log_weights: Per-walker log of the weight, for log-normal diagnostics.
    """

    omega: float
    omega_std: float
    mean_l: np.ndarray
    var_l: np.ndarray
    mean_sum_l: np.ndarray
    log_weights: np.ndarray


def _sample_step(occ: np.ndarray, parity: int, cum: np.ndarray, rng: np.random.Generator) -> None:
    n = occ.shape[1]
    left = np.arange(parity, n - 1, 2)
    if left.size == 0:
        return
    pattern = occ[:, left].astype(np.intp) + 2 * occ[:, left + 1].astype(np.intp)
    u = rng.random(pattern.shape)
    # first outcome whose cumulative probability exceeds u; empty pairs stay empty
    new = (u[..., None] >= cum[:3, pattern].transpose(1, 2, 0)).sum(axis=-1)
    occ[:, left] = (new & 1).astype(bool)
    occ[:, left + 1] = (new >> 1).astype(bool)


def simulate_walkers(
    initial: np.ndarray,
    n_steps: int,
    rng: np.random.Generator,
    first_parity: int = 0,
    transfer: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance a batch of configurations (walkers, sites) by ``n_steps`` sublayer steps.

    Returns:
        Final configurations and the particle counts after every step, shape
        (n_steps + 1, walkers).
    """
    cum = np.cumsum(_check_transfer(particle_hole_transfer() if transfer is None else transfer), axis=0)
    occ = np.array(initial, dtype=bool, copy=True)
    counts = [occ.sum(axis=1)]
    for step in range(1, n_steps + 1):
        _sample_step(occ, step_parity(step, first_parity), cum, rng)
        counts.append(occ.sum(axis=1))
    return occ, np.array(counts)


def walk_monte_carlo(
    k: int,
    d: int,
    lam: float,
    n_walkers: int,
    rng: np.random.Generator,
    alignment: int | str = "average",
    transfer: np.ndarray | None = None,
    n_window: int | None = None,
) -> MonteCarloWalk:
    """Sample the walk of a contiguous k-site operator for d sublayer steps.

    With ``alignment="average"`` the walkers are split evenly between the two
    alignments and pooled.
    """
    if n_walkers < 1000:
        raise ValueError("use at least 1000 walkers")
    n, start = _window(k, d, n_window)
    occ = np.zeros((n_walkers, n), bool)
    occ[:, start : start + k] = True
    if alignment == "average":
        groups = [(a, n_walkers // 2 if a == 0 else n_walkers - n_walkers // 2) for a in ALIGNMENTS]
    else:
        groups = [(int(alignment), n_walkers)]
    counts = np.concatenate(
        [simulate_walkers(occ[:size], d, rng, (start + a) % 2, transfer)[1] for a, size in groups], axis=1
    )
    sums = np.cumsum(counts, axis=0) - counts[0]
    counts = counts.astype(float)
    sums = sums.astype(float)
    logw = -LOG3 * counts[-1] - lam * sums[-1]
    w = np.exp(logw)
    return MonteCarloWalk(
        float(w.mean()),
        float(w.std(ddof=1) / math.sqrt(n_walkers)),
        counts.mean(axis=1),
        counts.var(axis=1),
        sums.mean(axis=1),
        logw,
    )


# --------------------------------------------------------------------------
# phenomenology


@dataclass
class PhenomParams:
    """Fitted spreading, relaxation and variance parameters.

    Attributes:
        v_b: Butterfly velocity (sites per step).
        t0: Relaxation time (steps).
        m: Slope of the saturated variance in k.
        b: Intercept of the saturated variance.
        v_prime: Late-time variance growth rate.
        gamma: Asymptotic relaxation rate, exp(-gamma) = (4/5)^2.
        residuals: Maximum absolute and relative residuals of the two fits.
    """

    v_b: float
    t0: float
    m: float
    b: float
    v_prime: float
    gamma: float = GAMMA
    residuals: dict | None = None

    def mean_length(self, k, t):
        return (k + self.v_b * np.asarray(t, float)) * (0.75 + 0.25 * np.exp(-np.asarray(t, float) / self.t0))

    def var_length(self, k, t):
        t = np.asarray(t, float)
        return (self.m * k + self.b) * (1.0 - np.exp(-t)) + self.v_prime * t

    def mu(self, k: float, t: int, lam: float, bound: bool = False) -> float:
        """Mean of X = -l_t log 3 - lam sum l_i.

        ``bound=True`` returns the simplified lower bound that replaces the
        sum over steps by (k + v_b t) 3 lam t.
        """
        relax = 3.0 + math.exp(-t / self.t0)
        if bound:
            return -(k + self.v_b * t) * (LOG3 / 4.0 * relax + 3.0 * lam * t)
        steps = np.arange(1, t + 1)
        summed = np.sum((k + self.v_b * steps) * (3.0 + np.exp(-steps / self.t0))) / 4.0
        return -LOG3 * (k + self.v_b * t) * relax / 4.0 - lam * float(summed)

    def sigma2(self, k: float, t: int) -> float:
        return LOG3**2 * float(self.var_length(k, t))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "PhenomParams":
        return cls(**data)


def collect_traces(
    ks=range(2, 13),
    t_max: int = 12,
    n_walkers: int = 40000,
    seed: int = 0,
    transfer: np.ndarray | None = None,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Noiseless Monte-Carlo traces of (E[l_t], var(l_t)) for t = 0..t_max, keyed by k."""
    rng = np.random.default_rng(seed)
    out = {}
    for k in ks:
        mc = walk_monte_carlo(int(k), t_max, 0.0, n_walkers, rng, transfer=transfer)
        out[int(k)] = (mc.mean_l, mc.var_l)
    return out


def fit_phenomenology(traces: dict[int, tuple[np.ndarray, np.ndarray]]) -> PhenomParams:
    """Least-squares fit of the mean and variance models to walk traces.

    The mean E[l_t] = (k + v_b t)(3/4 + exp(-t/t0)/4) is fitted by nonlinear
    least squares; the variance (m k + b)(1 - exp(-t)) + v' t is linear in
    its parameters and fitted by non-negative least squares.
    """
    ks = sorted(traces)
    lengths = {len(traces[k][0]) for k in ks}
    if len(ks) < 2 or min(lengths) < 3:
        raise ValueError("need at least two operator sizes and three time points")
    rows = [(k, t, m, v) for k in ks for t, (m, v) in enumerate(zip(*traces[k]))]
    kk, tt, mm, vv = (np.array(c, dtype=float) for c in zip(*rows))

    def mean_model(x, v_b, t0):
        return (x[0] + v_b * x[1]) * (0.75 + 0.25 * np.exp(-x[1] / t0))

    (v_b, t0), _ = scipy.optimize.curve_fit(
        mean_model, np.vstack([kk, tt]), mm, p0=[1.0, 0.5], bounds=([0.0, 1e-3], [np.inf, np.inf])
    )
    design = np.column_stack([kk * (1 - np.exp(-tt)), 1 - np.exp(-tt), tt])
    (m, b, v_prime), _ = scipy.optimize.nnls(design, vv)
    mean_res = mm - mean_model(np.vstack([kk, tt]), v_b, t0)
    var_res = vv - design @ np.array([m, b, v_prime])
    residuals = {
        "mean_abs": float(np.abs(mean_res).max()),
        "mean_rel": float(np.abs(mean_res / mm).max()),
        "var_abs": float(np.abs(var_res).max()),
    }
    return PhenomParams(float(v_b), float(t0), float(m), float(b), float(v_prime), GAMMA, residuals)


def phenom_shadow_norm(k: int, d: int, lam: float, params: PhenomParams, bound: bool = False) -> float:
    """Log-normal estimate exp(mu + sigma^2 / 2) of the weight omega_d(P_k).

    Its inverse estimates the shadow norm. ``bound=True`` uses the simplified
    lower bound on mu.
    """
    return math.exp(params.mu(k, d, lam, bound) + params.sigma2(k, d) / 2.0)


# --------------------------------------------------------------------------
# closed-form bound and optimal depth


def shadow_norm_bound(k: float, d: float, lam: float) -> float:
    """Upper bound on log_3 of the shadow norm: (k + d)(3/4 + e^(-gamma d) / d^1.5 + d lam / log 3)."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 1) or k < 1:
        raise ValueError("k and d must be at least 1")
    out = (k + d) * (0.75 + np.exp(-GAMMA * d) / d**1.5 + d * lam / LOG3)
    return float(out) if out.ndim == 0 else out


@dataclass
class OptimalDepth:
    """Optimal depth from the leading-order formula and from a scan of the bound.

    Attributes:
        analytic: (1/gamma) log(k / (3 log 3 + 4 k lam)).
        rounded: ``analytic`` rounded to the nearest integer (at least 1).
        grid: Integer arg-min of ``shadow_norm_bound`` over d >= 1.
        grid_value: Bound at ``grid``.
    """

    analytic: float
    rounded: int
    grid: int
    grid_value: float


def optimal_depth(k: float, lam: float, d_max: int = 400) -> OptimalDepth:
    """Depth minimising the shadow-norm bound for a contiguous k-site Pauli."""
    if k < 1 or lam < 0:
        raise ValueError("need k >= 1 and lam >= 0")
    analytic = math.log(k / (3.0 * LOG3 + 4.0 * k * lam)) / GAMMA
    ds = np.arange(1, d_max + 1)
    values = shadow_norm_bound(k, ds, lam)
    i = int(np.argmin(values))
    return OptimalDepth(analytic, max(1, int(round(analytic))), int(ds[i]), float(values[i]))


# --------------------------------------------------------------------------
# tables


GRID_FIELDS = ("k", "d", "lam", "omega_mc", "omega_mc_std", "omega_phenom", "omega_phenom_bound", "log3_norm_bound")


def theory_grid(
    ks,
    ds,
    lams,
    params: PhenomParams,
    n_walkers: int = 20000,
    seed: int = 0,
) -> list[dict]:
    """Monte-Carlo weights, phenomenological estimates and bounds on a (k, d, lam) grid."""
    rng = np.random.default_rng(seed)
    rows = []
    for k in ks:
        for d in ds:
            for lam in lams:
                mc = walk_monte_carlo(int(k), int(d), float(lam), n_walkers, rng)
                rows.append(
                    {
                        "k": int(k),
                        "d": int(d),
                        "lam": float(lam),
                        "omega_mc": mc.omega,
                        "omega_mc_std": mc.omega_std,
                        "omega_phenom": phenom_shadow_norm(k, d, lam, params),
                        "omega_phenom_bound": phenom_shadow_norm(k, d, lam, params, bound=True),
                        "log3_norm_bound": shadow_norm_bound(k, d, lam) if d >= 1 else float("nan"),
                    }
                )
    return rows


OPTIMAL_FIELDS = ("k", "lam", "analytic", "rounded", "grid", "grid_value")


def optimal_depth_grid(ks, lams) -> list[dict]:
    return [{"k": int(k), "lam": float(lam), **asdict(optimal_depth(k, lam))} for k in ks for lam in lams]


def rows_to_csv(rows: list[dict], fields) -> str:
    """CSV text with a fixed column order and repr-exact floats."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({f: repr(row[f]) if isinstance(row[f], float) else row[f] for f in fields})
    return buf.getvalue()
