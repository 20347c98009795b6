"""Border-connectivity recursion, its fixed points, and Monte Carlo checks.

For a span of ``2**k`` edges on the hierarchical network the two border
nodes are joined either by the direct level-k link or through both halves::

    P[0] = p,    P[k+1] = p + (1 - p) * P[k]**2

The iteration converges to ``min(1, p / (1 - p))``, which changes branch
at ``p = 1/2``.

Monte Carlo trials are independent; trial ``t`` draws its link states from
the counter stream ``(master_seed, t)`` (see :mod:`percq.rng`), visiting the
links in ``(level, u)`` order.  Trials are grouped into fixed-size blocks so
every accumulated quantity is identical for any thread count.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import NamedTuple

import numba as nb
import numpy as np

from . import rng
from .errors import DomainError
from .topology import HierNet

BLOCK = 1024
CRITICAL_P = 0.5


def _check_p(p: float, name: str = "p") -> None:
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")


def _step(p: float, prev: float) -> float:
    return p + (1.0 - p) * prev * prev


@dataclass(frozen=True)
class RecursionTrace:
    p: float
    values: tuple[float, ...]

    @property
    def final(self) -> float:
        return self.values[-1]


def recursion_iterate(p: float, k_max: int) -> RecursionTrace:
    _check_p(p)
    if k_max < 0:
        raise DomainError(f"k_max must be >= 0, got {k_max}")
    values = [p]
    for _ in range(k_max):
        values.append(_step(p, values[-1]))
    return RecursionTrace(p, tuple(values))


def recursion_iterate_levels(level_p) -> tuple[float, ...]:
    """Border connectivity when level-k links open with probability ``level_p[k]``."""
    values = [level_p[0]]
    for q in level_p[1:]:
        values.append(q + (1.0 - q) * values[-1] ** 2)
    return tuple(values)


@dataclass(frozen=True)
class FixedPointResult:
    p: float
    p_infinity: float
    regime: str
    iterated: float
    iterations: int


def fixed_point(p: float, tol: float = 1e-12, max_iter: int = 1_000_000) -> FixedPointResult:
    """Limit of the recursion, in closed form and by direct iteration.

    Iteration stops once successive values differ by less than ``tol``.  At
    ``p = 1/2`` the limit is a double root and convergence is only algebraic,
    so ``max_iter`` may be hit first; ``iterations`` then equals ``max_iter``.
    """
    _check_p(p)
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    if p < CRITICAL_P:
        regime, limit = "subcritical", p / (1.0 - p)
    elif p == CRITICAL_P:
        regime, limit = "critical", 1.0
    else:
        regime, limit = "supercritical", 1.0

    cur, n = p, 0
    while n < max_iter:
        nxt = _step(p, cur)
        n += 1
        if abs(nxt - cur) < tol:
            cur = nxt
            break
        cur = nxt
    return FixedPointResult(p, limit, regime, cur, n)


def limit_below(p: float, threshold: float) -> bool:
    """Whether the recursion started at ``P[0] = p`` stays below ``threshold`` for ever.

    The update map is increasing in ``P``, so iterates starting under the
    threshold can never reach it exactly when the map sends the threshold
    itself below the threshold.  Otherwise a fixed point lies at or above the
    threshold and the monotone iterates converge to it.
    """
    if p >= threshold:
        return False
    return _step(p, threshold) < threshold


def transition_point(tol: float = 1e-6) -> float:
    """Bisect for the smallest ``p`` whose limit reaches ``1 - tol``."""
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    threshold = 1.0 - tol
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if limit_below(mid, threshold):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ConcurrenceTrace:
    c: float
    alpha: float
    values: tuple[float, ...]


def concurrence_iterate(c: float, alpha: float, k_max: int) -> ConcurrenceTrace:
    """Recursion with level-dependent open probability ``alpha**(k+1) * c``.

    Each swap scales the concurrence by ``alpha``, so the additive term dies
    out and the recursion degenerates to repeated squaring.
    """
    _check_p(c, "c")
    if not (0.0 < alpha <= 0.5):
        raise DomainError(f"alpha must lie in (0, 1/2], got {alpha!r}")
    if k_max < 0:
        raise DomainError(f"k_max must be >= 0, got {k_max}")
    values = [c]
    for k in range(k_max):
        q = alpha ** (k + 1) * c
        values.append(q + (1.0 - q) * values[-1] ** 2)
    return ConcurrenceTrace(c, alpha, tuple(values))


class ClassicalChain(NamedTuple):
    exact: float
    paper_variant: float


def classical_chain_prob(p: float, k_pairs: int, n_nodes: int) -> ClassicalChain:
    """End-to-end probability on a bare chain with ``k_pairs`` parallel pairs per edge.

    ``exact`` applies the parallel rule ``1 - (1-p)**K`` per edge and the series
    rule over ``N - 1`` edges.  ``paper_variant`` uses the per-edge value
    ``p + p (1-p)**K`` instead; the two agree only at ``p`` in {0, 1}.
    """
    _check_p(p)
    if k_pairs < 1 or n_nodes < 2:
        raise DomainError(f"need k_pairs >= 1 and n_nodes >= 2, got {k_pairs}, {n_nodes}")
    edges = n_nodes - 1
    exact = (1.0 - (1.0 - p) ** k_pairs) ** edges
    variant = (p + p * (1.0 - p) ** k_pairs) ** edges
    return ClassicalChain(exact, variant)


@dataclass(frozen=True)
class PercConfig:
    p: float
    trials: int
    master_seed: int = 0

    def __post_init__(self):
        _check_p(self.p)
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class MCEstimate:
    trials: int
    successes: int
    estimate: float
    std_error: float

    @classmethod
    def from_counts(cls, trials: int, successes: int) -> MCEstimate:
        est = successes / trials
        return cls(trials, successes, est, math.sqrt(est * (1.0 - est) / trials))


@contextlib.contextmanager
def numba_threads(threads: int | None):
    """Temporarily cap numba's worker count (clamped to what numba was started with)."""
    if threads is None:
        yield
        return
    if threads < 1:
        raise DomainError(f"threads must be >= 1, got {threads}")
    old = nb.get_num_threads()
    nb.set_num_threads(min(threads, nb.config.NUMBA_NUM_THREADS))
    try:
        yield
    finally:
        nb.set_num_threads(old)


def link_arrays(net: HierNet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Link levels and endpoints sorted by ``(level, u)``; index = draw index."""
    links = sorted(net.links)
    lv = np.array([l.level for l in links], dtype=np.int64)
    us = np.array([l.u for l in links], dtype=np.int64)
    vs = np.array([l.v for l in links], dtype=np.int64)
    return lv, us, vs


@nb.njit(cache=True, inline="always")
def uf_find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@nb.njit(cache=True, inline="always")
def uf_union(parent, size, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@nb.njit(cache=True, inline="always")
def uf_reset(parent, size):
    for i in range(parent.shape[0]):
        parent[i] = i
        size[i] = 1


@nb.njit(cache=True, parallel=True)
def _border_blocks(us, vs, n_nodes, p, seed, trials, block):
    n_blocks = (trials + block - 1) // block
    out = np.zeros(n_blocks, dtype=np.int64)
    for b in nb.prange(n_blocks):
        parent = np.empty(n_nodes, dtype=np.int64)
        size = np.empty(n_nodes, dtype=np.int64)
        hits = 0
        for t in range(b * block, min(trials, (b + 1) * block)):
            key = rng.nb_trial_key(seed, t, 0)
            uf_reset(parent, size)
            for j in range(us.shape[0]):
                if rng.nb_uniform(key, j) < p:
                    uf_union(parent, size, us[j], vs[j])
            if uf_find(parent, 0) == uf_find(parent, n_nodes - 1):
                hits += 1
        out[b] = hits
    return out


def border_successes(net: HierNet, p: float, trials: int, master_seed: int,
                     threads: int | None = None) -> int:
    _, us, vs = link_arrays(net)
    with numba_threads(threads):
        blocks = _border_blocks(us, vs, net.n_nodes, float(p), rng.seed_u64(master_seed),
                                trials, BLOCK)
    return int(blocks.sum())


def mc_border_connectivity(net: HierNet, cfg: PercConfig,
                           threads: int | None = None) -> MCEstimate:
    """Fraction of trials in which nodes 0 and N-1 share a cluster of open links."""
    hits = border_successes(net, cfg.p, cfg.trials, cfg.master_seed, threads)
    return MCEstimate.from_counts(cfg.trials, hits)


@nb.njit(cache=True, parallel=True)
def _pair_blocks(us, vs, n_nodes, p, seed, trials, sample_pairs, block):
    n_blocks = (trials + block - 1) // block
    hits = np.zeros(n_blocks, dtype=np.int64)
    giant = np.zeros(n_blocks, dtype=np.int64)
    for b in nb.prange(n_blocks):
        parent = np.empty(n_nodes, dtype=np.int64)
        size = np.empty(n_nodes, dtype=np.int64)
        h = 0
        g = 0
        for t in range(b * block, min(trials, (b + 1) * block)):
            key = rng.nb_trial_key(seed, t, 0)
            uf_reset(parent, size)
            for j in range(us.shape[0]):
                if rng.nb_uniform(key, j) < p:
                    uf_union(parent, size, us[j], vs[j])
            biggest = 0
            for i in range(n_nodes):
                if parent[i] == i and size[i] > biggest:
                    biggest = size[i]
            g += biggest
            pkey = rng.nb_trial_key(seed, t, 2)
            for s in range(sample_pairs):
                a = int(rng.nb_uniform(pkey, 2 * s) * n_nodes)
                c = int(rng.nb_uniform(pkey, 2 * s + 1) * (n_nodes - 1))
                if c >= a:
                    c += 1
                if uf_find(parent, a) == uf_find(parent, c):
                    h += 1
        hits[b] = h
        giant[b] = g
    return hits, giant


@dataclass(frozen=True)
class PairConnectivity:
    """Connectivity of uniformly sampled distinct node pairs.

    ``estimate`` counts every sampled pair as one Bernoulli trial, so its
    ``std_error`` ignores the correlation between pairs of the same trial.
    """

    estimate: MCEstimate
    giant_fraction: float
    network_trials: int
    sample_pairs: int


def mc_pair_connectivity(net: HierNet, cfg: PercConfig, sample_pairs: int = 64,
                         threads: int | None = None) -> PairConnectivity:
    if sample_pairs < 1:
        raise DomainError(f"sample_pairs must be >= 1, got {sample_pairs}")
    _, us, vs = link_arrays(net)
    with numba_threads(threads):
        hits, giant = _pair_blocks(us, vs, net.n_nodes, float(cfg.p),
                                   rng.seed_u64(cfg.master_seed), cfg.trials,
                                   sample_pairs, BLOCK)
    total = cfg.trials * sample_pairs
    return PairConnectivity(
        MCEstimate.from_counts(total, int(hits.sum())),
        int(giant.sum()) / (cfg.trials * net.n_nodes),
        cfg.trials,
        sample_pairs,
    )
