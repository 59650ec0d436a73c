"""Metropolis sampling of the Gibbs measure and exact random-matrix oracles.

The Gibbs measure on N points is proportional to
exp(-(beta/2) * N^e * H_N(x)) with e = min(2/d - 1, 0) and
H_N = sum_{i != j} g(x_i - x_j) + N sum_i V(x_i), V(x) = a|x|^2.

Randomness is counter based: chain ``k`` under seed ``s`` draws from
``Philox(SeedSequence(s, spawn_key=(k,)))``. Proposals and acceptance
uniforms are pre-drawn in fixed blocks of ``BLOCK`` sweeps aligned to the
absolute sweep index, so a run resumed from a checkpoint reproduces the
uninterrupted stream bit for bit.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy import linalg, stats

from . import _kernels
from ._accel import BACKEND
from .energy import Configuration, as_points, hamiltonian
from .equilibrium import PotentialSpec, equilibrium_measure
from .errors import CapabilityError, ConfigError, DomainError, NumericToleranceError
from .kernel import LOG1, LOG2, KernelSpec

BLOCK = 64
CHECKPOINT_VERSION = 1


def chain_rng(seed, chain=0):
    """Counter-based generator for task ``chain`` under a 64-bit ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chain),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GibbsParams:
    """Inverse temperature, particle number, interaction and confinement.

    Attributes
    ----------
    beta : float
    N : int
    kernel : KernelSpec
    potential : PotentialSpec
        Must be quadratic; the sweep kernels evaluate V = a|x|^2 directly.
    """

    beta: float
    N: int
    kernel: KernelSpec
    potential: PotentialSpec

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be positive, got {self.beta}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not self.potential.is_quadratic:
            raise CapabilityError("the sampler supports quadratic confinement only")

    @property
    def d(self):
        return self.kernel.d

    @property
    def norm_exponent(self):
        """Energy normalization exponent: 0 for d <= 2, 2/d - 1 above."""
        return min(2.0 / self.d - 1.0, 0.0)

    @property
    def beta_eff(self):
        """Coefficient multiplying H_N in the Gibbs exponent."""
        return 0.5 * self.beta * self.N ** self.norm_exponent

    def to_dict(self):
        return {"beta": self.beta, "N": self.N, "kernel": self.kernel.to_dict(),
                "potential": self.potential.to_dict()}

    @classmethod
    def from_dict(cls, data):
        k = data["kernel"]
        kernel = KernelSpec(k["case"], int(k["d"]), float(k.get("s", 0.0)))
        return cls(float(data["beta"]), int(data["N"]), kernel, PotentialSpec(float(data["potential"]["a"])))


@dataclass
class ChainState:
    """Resumable state of one Metropolis chain.

    ``rng_state`` is the generator state at the start of the block that
    contains sweep ``sweep``; resuming redraws that block and skips the
    sweeps already done.
    """

    points: np.ndarray
    log_scale: float
    rng_state: dict
    sweep: int = 0
    accepted: int = 0
    proposed: int = 0
    coincident: int = 0
    burn_accepted: int = 0
    burn_proposed: int = 0

    @property
    def acceptance(self):
        """Post burn-in acceptance ratio (NaN before any post burn-in move)."""
        return self.accepted / self.proposed if self.proposed else float("nan")

    def to_dict(self):
        return {"points": self.points.tolist(), "log_scale": self.log_scale,
                "rng_state": _jsonable(self.rng_state), "sweep": self.sweep,
                "accepted": self.accepted, "proposed": self.proposed,
                "coincident": self.coincident, "burn_accepted": self.burn_accepted,
                "burn_proposed": self.burn_proposed}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["points"] = np.array(data["points"], dtype=float)
        data["rng_state"] = _rng_state_from_json(data["rng_state"])
        return cls(**data)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _rng_state_from_json(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["__array__"], dtype=obj["dtype"])
        return {k: _rng_state_from_json(v) for k, v in obj.items()}
    return obj


@dataclass
class McmcResult:
    """Output of ``mcmc_run``.

    Attributes
    ----------
    samples : list
        Emitted configurations as (N, d) arrays, or the values returned by
        the ``observe`` callback when one was given.
    sweeps : ndarray
        Sweep index (1-based) at which each sample was emitted.
    state : ChainState
        Final state, usable to resume.
    params : GibbsParams
    """

    samples: list
    sweeps: np.ndarray
    state: ChainState
    params: GibbsParams
    seed: int
    chain: int
    settings: dict = field(default_factory=dict)

    @property
    def acceptance(self):
        return self.state.acceptance

    def array(self):
        return np.asarray(self.samples)


def initial_state(params, seed, chain=0, init=None):
    """Fresh chain state: i.i.d. draws from the equilibrium measure.

    For kernels without a closed-form equilibrium measure the start is
    Gaussian with the variance of the confinement alone.
    """
    rng = chain_rng(seed, chain)
    a = params.potential.a
    if init is not None:
        pts = as_points(init, params.d).copy()
        if pts.shape[0] != params.N:
            raise DomainError(f"initial configuration has {pts.shape[0]} points, expected {params.N}")
        radius = float(np.max(np.sqrt(np.sum(pts * pts, axis=1)))) or 1.0
    else:
        try:
            eqm = equilibrium_measure(params.potential, params.kernel)
            pts = eqm.sample(params.N, rng)
            radius = eqm.radius
        except CapabilityError:
            radius = 1.0 / math.sqrt(a)
            pts = rng.standard_normal((params.N, params.d)) * radius / math.sqrt(2.0 * params.d)
    spacing = radius * params.N ** (-1.0 / params.d)
    return ChainState(points=np.ascontiguousarray(pts, dtype=float), log_scale=math.log(0.5 * spacing),
                      rng_state=rng.bit_generator.state)


def _draw_block(rng, n, d):
    normals = rng.standard_normal((BLOCK, n, d))
    uniforms = rng.random((BLOCK, n))
    return normals, uniforms


def mcmc_run(params, sweeps, seed, thinning=1, burn_in=0.2, chain=0, state=None,
             init=None, observe=None, target=0.3, checkpoint=None, checkpoint_every=None, until=None):
    """Run a single-particle Metropolis chain.

    Parameters
    ----------
    params : GibbsParams
    sweeps : int
        Total number of sweeps (N proposed moves each), counted from sweep 0
        of the chain, including burn-in.
    seed : int
    thinning : int
        Sweeps between emitted samples after burn-in.
    burn_in : float
        Fraction of ``sweeps`` spent adapting the proposal scale (Robbins-Monro
        towards acceptance ``target``); the scale is frozen afterwards and no
        samples are emitted during burn-in.
    chain : int
        Stream index; chains with different indices are independent.
    state : ChainState, optional
        Resume from this state instead of starting fresh.
    init : array, optional
        Initial configuration for a fresh chain.
    observe : callable, optional
        Map applied to each emitted configuration; its results are stored
        instead of the configurations.
    checkpoint : path, optional
        Written at the end, and every ``checkpoint_every`` sweeps if given.
    until : int, optional
        Stop after this many sweeps without changing the schedule (burn-in
        length is still set by ``sweeps``); resume later with ``state``.

    Returns
    -------
    McmcResult
    """
    if sweeps < 1 or int(sweeps) != sweeps:
        raise DomainError("sweeps must be a positive integer")
    if thinning < 1 or int(thinning) != thinning:
        raise DomainError("thinning must be a positive integer")
    if not 0.0 <= burn_in < 1.0:
        raise DomainError("burn-in fraction must lie in [0, 1)")
    sweeps, thinning = int(sweeps), int(thinning)
    stop_at = sweeps if until is None else min(int(until), sweeps)
    if state is None:
        state = initial_state(params, seed, chain, init)
    else:
        state = ChainState.from_dict(state.to_dict())
    n, d = params.N, params.d
    burn = int(burn_in * sweeps)
    kcode = params.kernel.code
    s = float(params.kernel.s)
    a = float(params.potential.a)
    nfac = float(n)
    beff = params.beta_eff
    x = np.ascontiguousarray(state.points, dtype=float).copy()
    log_scale = np.array([state.log_scale])
    coincident = np.zeros(1, dtype=np.int64)
    rng = np.random.Generator(np.random.Philox())
    rng.bit_generator.state = state.rng_state
    samples, emitted = [], []

    while state.sweep < stop_at:
        block_start = (state.sweep // BLOCK) * BLOCK
        block_state = rng.bit_generator.state
        normals, uniforms = _draw_block(rng, n, d)
        lo = state.sweep - block_start
        hi_block = min(BLOCK, stop_at - block_start)
        while lo < hi_block:
            k = block_start + lo  # sweeps completed so far
            # run to the next event: end of block, end of burn-in, or emission
            stop = hi_block
            if k < burn:
                stop = min(stop, burn - block_start)
            else:
                nxt = burn + ((k - burn) // thinning + 1) * thinning
                stop = min(stop, nxt - block_start)
            if checkpoint is not None and checkpoint_every:
                nxt_cp = (k // checkpoint_every + 1) * checkpoint_every
                stop = min(stop, nxt_cp - block_start)
            adapt = k < burn
            acc = np.zeros(stop - lo, dtype=np.int64)
            _kernels.sweeps(x, kcode, s, a, nfac, beff, log_scale, normals[lo:stop], uniforms[lo:stop],
                            adapt, float(k), target, acc, coincident)
            moves = (stop - lo) * n
            if adapt:
                state.burn_accepted += int(acc.sum())
                state.burn_proposed += moves
            else:
                state.accepted += int(acc.sum())
                state.proposed += moves
            lo = stop
            state.sweep = block_start + lo
            if state.sweep > burn and (state.sweep - burn) % thinning == 0:
                cfg = x.copy()
                samples.append(observe(cfg) if observe is not None else cfg)
                emitted.append(state.sweep)
            if lo < BLOCK:
                state.rng_state = block_state
            else:
                state.rng_state = rng.bit_generator.state
            state.points = x.copy()
            state.log_scale = float(log_scale[0])
            state.coincident += int(coincident[0])
            coincident[0] = 0
            if checkpoint is not None and checkpoint_every and state.sweep % checkpoint_every == 0:
                save_checkpoint(checkpoint, params, state, seed, chain, sweeps, thinning, burn_in)

    if checkpoint is not None:
        save_checkpoint(checkpoint, params, state, seed, chain, sweeps, thinning, burn_in)
    settings = {"sweeps": sweeps, "thinning": thinning, "burn_in": burn_in, "target": target,
                "block": BLOCK, "backend": BACKEND}
    return McmcResult(samples, np.asarray(emitted, dtype=np.int64), state, params, int(seed), int(chain), settings)


def save_checkpoint(path, params, state, seed, chain, sweeps, thinning, burn_in):
    """Write a versioned JSON checkpoint sufficient for exact resume."""
    doc = {"format": "coulombgas-checkpoint", "version": CHECKPOINT_VERSION,
           "params": params.to_dict(), "seed": int(seed), "chain": int(chain),
           "schedule": {"sweeps": sweeps, "thinning": thinning, "burn_in": burn_in},
           "state": state.to_dict()}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    """Read a checkpoint; returns (params, state, seed, chain, schedule)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "coulombgas-checkpoint":
        raise ConfigError("not a checkpoint file", key_path="format")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')}", key_path="version")
    params = GibbsParams.from_dict(doc["params"])
    state = ChainState.from_dict(doc["state"])
    return params, state, doc["seed"], doc["chain"], doc["schedule"]


def accept_probability(params, config, i, y):
    """Metropolis acceptance probability for moving particle ``i`` to ``y``.

    Computed from two full Hamiltonian evaluations, independently of the
    O(N) update used in the sweep kernels.
    """
    x = as_points(config, params.d)
    new = x.copy()
    new[i] = np.asarray(y, dtype=float).reshape(params.d)
    dh = hamiltonian(new, params.potential, params.kernel) - hamiltonian(x, params.potential, params.kernel)
    return min(1.0, math.exp(-params.beta_eff * dh))


# ---------------------------------------------------------------------------
# exact oracles
def sample_ginibre(N, seed, chain=0):
    """Eigenvalues of an N x N complex Ginibre matrix with entry variance 1/N.

    Their law is the Gibbs measure at beta = 2 with V = |x|^2 in the plane.
    Returns an (N, 2) array.
    """
    if N < 1:
        raise DomainError("N must be at least 1")
    rng = chain_rng(seed, chain)
    g = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / math.sqrt(2.0 * N)
    try:
        ev = np.linalg.eigvals(g)
    except np.linalg.LinAlgError as exc:
        raise NumericToleranceError(f"eigenvalue computation failed: {exc}") from exc
    return np.column_stack([ev.real, ev.imag])


def sample_ginibre_moduli(N, seed, chain=0):
    """Moduli of Ginibre eigenvalues (entry variance 1/N) without diagonalizing.

    By Kostlan's theorem the set of squared moduli has the law of independent
    Gamma(k, 1)/N variables, k = 1..N. Only radial statistics may use this.
    Returns a sorted array of N radii.
    """
    if N < 1:
        raise DomainError("N must be at least 1")
    rng = chain_rng(seed, chain)
    return np.sort(np.sqrt(rng.standard_gamma(np.arange(1.0, N + 1.0)) / N))


def sample_beta_tridiag(N, beta, seed, chain=0):
    """Eigenvalues of the tridiagonal beta-ensemble, rescaled by 1/sqrt(N).

    The matrix has N(0, 2) diagonal and chi_{beta (N - k)} off-diagonal
    entries (k = 1..N-1), divided by sqrt(beta). After the rescale the joint
    law is the Gibbs measure with V = x^2/2 on the line. Returns (N, 1).
    """
    if not beta > 0:
        raise DomainError("beta must be positive")
    if N < 1:
        raise DomainError("N must be at least 1")
    rng = chain_rng(seed, chain)
    diag = rng.normal(0.0, math.sqrt(2.0), N)
    off = np.sqrt(rng.chisquare(beta * np.arange(N - 1, 0, -1.0))) if N > 1 else np.zeros(0)
    scale = 1.0 / math.sqrt(beta * N)
    try:
        ev = linalg.eigvalsh_tridiagonal(diag * scale, off * scale)
    except linalg.LinAlgError as exc:
        raise NumericToleranceError(f"eigenvalue computation failed: {exc}") from exc
    return np.sort(ev).reshape(N, 1)


def oracle_samples(params, n_samples, seed, first_stream=0):
    """Independent exact samples for the two beta = 2 / beta-ensemble cases.

    Sample k uses stream ``first_stream + k``.
    """
    k = params.kernel
    a = params.potential.a
    streams = range(first_stream, first_stream + n_samples)
    if k.case == LOG2 and params.beta == 2.0 and a == 1.0:
        return [sample_ginibre(params.N, seed, c) for c in streams]
    if k.case == LOG1 and a == 0.5:
        return [sample_beta_tridiag(params.N, params.beta, seed, c) for c in streams]
    raise CapabilityError("exact oracles exist for (log2, beta=2, a=1) and (log1, any beta, a=1/2) only")


# ---------------------------------------------------------------------------
# statistics for oracle comparison
def one_point_values(samples, rng):
    """One randomly chosen particle per configuration (radius in d >= 2)."""
    out = []
    for cfg in samples:
        p = np.asarray(cfg)
        q = p[rng.integers(p.shape[0])]
        out.append(q[0] if p.shape[1] == 1 else float(np.sqrt(q @ q)))
    return np.asarray(out, dtype=float)


def gap_values(samples, rng, bulk=0.5):
    """One bulk spacing per configuration.

    In 1D: a random consecutive gap among the central ``bulk`` fraction of
    ordered points. In higher dimension: the nearest-neighbour distance of a
    random point with |x| < bulk * max|x|.
    """
    out = []
    for cfg in samples:
        p = np.asarray(cfg)
        n = p.shape[0]
        if p.shape[1] == 1:
            x = np.sort(p[:, 0])
            lo = int(n * (1 - bulk) / 2)
            hi = max(lo + 2, n - lo)
            gaps = np.diff(x[lo:hi])
            out.append(gaps[rng.integers(gaps.size)])
        else:
            r = np.sqrt(np.sum(p * p, axis=1))
            idx = np.flatnonzero(r < bulk * r.max())
            i = idx[rng.integers(idx.size)] if idx.size else rng.integers(n)
            dist = np.sqrt(np.sum((p - p[i]) ** 2, axis=1))
            dist[i] = np.inf
            out.append(dist.min())
    return np.asarray(out, dtype=float)


def ks_compare(a, b):
    """Two-sample Kolmogorov-Smirnov test; returns (statistic, p-value)."""
    res = stats.ks_2samp(a, b)
    return float(res.statistic), float(res.pvalue)


def radial_cdf_distance(samples, radius=1.0, d=2):
    """Sup distance between the pooled radial CDF and the uniform-ball law (r/R)^d."""
    r = np.sort(np.concatenate([np.sqrt(np.sum(np.asarray(c) ** 2, axis=1)) for c in samples]))
    n = r.size
    F = np.clip(r / radius, 0.0, 1.0) ** d
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(hi - F), np.max(F - lo)))


def radial_cdf_two_sample(a, b):
    """Sup distance between the pooled radial CDFs of two sample sets."""
    ra = np.concatenate([np.sqrt(np.sum(np.asarray(c) ** 2, axis=1)) for c in a])
    rb = np.concatenate([np.sqrt(np.sum(np.asarray(c) ** 2, axis=1)) for c in b])
    return float(stats.ks_2samp(ra, rb).statistic)


def line_cdf_distance(samples, eqm):
    """Sup distance between the pooled 1D empirical CDF and the measure's CDF."""
    x = np.sort(np.concatenate([np.asarray(c)[:, 0] for c in samples]))
    n = x.size
    F = eqm.cdf(x)
    return float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))
