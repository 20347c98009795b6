"""State-level simulation of the hierarchical construction.

A level-l link is the end product of ``2**l - 1`` nested swaps over ``2**l``
copies of the base pair, each swap landing on a random Bell outcome.  Its
final Schmidt state is therefore random; this module enumerates or samples
that distribution, runs the percolation experiment with links filtered
according to their actual state, and prices the distillation needed to undo
the damage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import rng
from .errors import DomainError, ResourceBudgetError
from .percolation import (BLOCK, MCEstimate, PercConfig, border_successes, link_arrays,
                          numba_threads, uf_find, uf_reset, uf_union)
from .qstate import (PurePair, RandomStream, concurrence, distill_trace, sample_swap, scp,
                     swap, werner_fidelity)
from .topology import build_hiernet, required_pairs_for_full_hierarchy

MAX_ENUM_LEVEL = 12
MAX_ENUM_PAIRS = 50_000_000
MERGE_TOL = 1e-12
SUCCESS_PROBABILITY_MODEL = 0.25

MODES = ("ideal-scp", "state-tracked")


@dataclass(frozen=True)
class Branch:
    probability: float
    state: PurePair


@dataclass(frozen=True)
class BranchDistribution:
    branches: tuple[Branch, ...]

    def __iter__(self):
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)

    def total(self) -> float:
        return math.fsum(b.probability for b in self.branches)

    def mean_scp(self) -> float:
        return math.fsum(b.probability * scp(b.state) for b in self.branches)

    def mean_concurrence(self) -> float:
        return math.fsum(b.probability * concurrence(b.state) for b in self.branches)


def _normalize_weights(x, y):
    # Vector form of PurePair.from_weights: returns lambda2.
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.minimum(x, y) / (x + y)
    return np.where(x == y, 0.5, out)


def _merge(lam2, prob):
    keep = prob > 0.0
    lam2, prob = lam2[keep], prob[keep]
    keys = np.rint(lam2 / MERGE_TOL).astype(np.int64)
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    merged = np.zeros(uniq.shape[0])
    np.add.at(merged, inverse, prob)
    return lam2[first], merged


def _combine(lam2, prob, chunk=512):
    a2_all = lam2
    out_l, out_p = [], []
    b2 = lam2[None, :]
    b1 = 1.0 - b2
    pb = prob[None, :]
    for start in range(0, lam2.shape[0], chunk):
        a2 = a2_all[start:start + chunk, None]
        a1 = 1.0 - a2
        pa = prob[start:start + chunk, None]
        w1, w2 = a1 * b1, a2 * b2
        x, y = a1 * b2, a2 * b1
        joint = pa * pb
        l_psi = _normalize_weights(w1, w2)
        l_phi = _normalize_weights(x, y)
        l, p = _merge(np.concatenate([l_psi.ravel(), l_phi.ravel()]),
                      np.concatenate([(joint * (w1 + w2)).ravel(), (joint * (x + y)).ravel()]))
        out_l.append(l)
        out_p.append(p)
    return _merge(np.concatenate(out_l), np.concatenate(out_p))


def enumerate_level_distribution(base: PurePair, level: int) -> BranchDistribution:
    """Exact distribution of a level-``level`` link's final state.

    Both halves of a level-l link are independent level-(l-1) links, so the
    distribution is built level by level, summing the probabilities of
    branches whose ``lambda2`` agree within ``MERGE_TOL``.
    """
    if level < 0:
        raise DomainError(f"level must be >= 0, got {level}")
    if level > MAX_ENUM_LEVEL:
        raise ResourceBudgetError(
            f"exact enumeration is capped at level {MAX_ENUM_LEVEL}; "
            "use sample_level_state / sample_level_states instead"
        )
    lam2 = np.array([base.lambda2])
    prob = np.array([1.0])
    for _ in range(level):
        if lam2.shape[0] ** 2 > MAX_ENUM_PAIRS:
            raise ResourceBudgetError(
                f"{lam2.shape[0]} distinct states would need {lam2.shape[0] ** 2} "
                "pairings; use sampling instead"
            )
        lam2, prob = _combine(lam2, prob)
    order = np.argsort(lam2)[::-1]
    return BranchDistribution(tuple(
        Branch(float(prob[i]), PurePair(1.0 - float(lam2[i]), float(lam2[i]))) for i in order
    ))


def sample_level_state(base: PurePair, level: int, stream: RandomStream) -> PurePair:
    """Draw one level-``level`` link state, one variate per swap.

    Swaps are resolved bottom-up, left to right; :func:`sample_level_states`
    consumes a :class:`percq.rng.TrialStream` in exactly this order.
    """
    if level < 0:
        raise DomainError(f"level must be >= 0, got {level}")
    states = [base] * 2**level
    while len(states) > 1:
        states = [sample_swap(states[i], states[i + 1], stream.random())[1]
                  for i in range(0, len(states), 2)]
    return states[0]


@nb.njit(cache=True, inline="always")
def _nb_swap_lam2(a2, b2, u):
    a1 = 1.0 - a2
    b1 = 1.0 - b2
    w1 = a1 * b1
    w2 = a2 * b2
    if u < w1 + w2:
        x, y = w1, w2
    else:
        x, y = a1 * b2, a2 * b1
    if x == y:
        return 0.5
    return min(x, y) / (x + y)


@nb.njit(cache=True)
def _nb_level_lam2(base2, level, key, index, buf):
    width = 1 << level
    for i in range(width):
        buf[i] = base2
    while width > 1:
        half = width >> 1
        for i in range(half):
            buf[i] = _nb_swap_lam2(buf[2 * i], buf[2 * i + 1], rng.nb_uniform(key, index))
            index += 1
        width = half
    return buf[0], index


@nb.njit(cache=True, parallel=True)
def _sample_blocks(base2, level, seed, draws, block, out):
    n_blocks = (draws + block - 1) // block
    for b in nb.prange(n_blocks):
        buf = np.empty(1 << level)
        for t in range(b * block, min(draws, (b + 1) * block)):
            key = rng.nb_trial_key(seed, t, 1)
            out[t] = _nb_level_lam2(base2, level, key, 0, buf)[0]


def sample_level_states(base: PurePair, level: int, draws: int, master_seed: int = 0,
                        threads: int | None = None) -> np.ndarray:
    """``lambda2`` of ``draws`` independent level-``level`` link states.

    Draw ``t`` uses the swap stream of trial ``t`` and matches
    ``sample_level_state(base, level, TrialStream(master_seed, t, STREAM_SWAPS))``.
    """
    if level < 0 or draws < 1:
        raise DomainError(f"need level >= 0 and draws >= 1, got {level}, {draws}")
    out = np.empty(draws)
    with numba_threads(threads):
        _sample_blocks(base.lambda2, level, rng.seed_u64(master_seed), draws, BLOCK, out)
    return out


@nb.njit(cache=True, parallel=True)
def _tracked_blocks(lv, us, vs, n_nodes, n_levels, base2, seed, trials, block):
    n_blocks = (trials + block - 1) // block
    hits = np.zeros(n_blocks, dtype=np.int64)
    scp_sum = np.zeros((n_blocks, n_levels))
    conc_sum = np.zeros((n_blocks, n_levels))
    for b in nb.prange(n_blocks):
        parent = np.empty(n_nodes, dtype=np.int64)
        size = np.empty(n_nodes, dtype=np.int64)
        buf = np.empty(1 << (n_levels - 1))
        h = 0
        for t in range(b * block, min(trials, (b + 1) * block)):
            open_key = rng.nb_trial_key(seed, t, 0)
            swap_key = rng.nb_trial_key(seed, t, 1)
            index = 0
            uf_reset(parent, size)
            for j in range(us.shape[0]):
                lam2, index = _nb_level_lam2(base2, lv[j], swap_key, index, buf)
                s = 2.0 * lam2
                scp_sum[b, lv[j]] += s
                conc_sum[b, lv[j]] += 2.0 * np.sqrt((1.0 - lam2) * lam2)
                if rng.nb_uniform(open_key, j) < s:
                    uf_union(parent, size, us[j], vs[j])
            if uf_find(parent, 0) == uf_find(parent, n_nodes - 1):
                h += 1
        hits[b] = h
    return hits, scp_sum, conc_sum


@dataclass(frozen=True)
class ProtocolStats:
    mode: str
    n_nodes: int
    k_pairs: int
    base: PurePair
    trials: int
    master_seed: int
    border: MCEstimate
    mean_scp: float
    mean_concurrence: float
    level_links: tuple[int, ...] = field(default=())
    level_mean_scp: tuple[float, ...] = field(default=())
    level_mean_concurrence: tuple[float, ...] = field(default=())

    @property
    def border_connected_fraction(self) -> float:
        return self.border.estimate


def run_chain_protocol(n_nodes: int, k_pairs: int, base: PurePair, mode: str,
                       cfg: PercConfig, threads: int | None = None) -> ProtocolStats:
    """Border connectivity of the hierarchical network built from ``base`` pairs.

    ``ideal-scp`` opens every link with probability ``scp(base)``, as if swaps
    preserved the state; it consumes the same draws as
    :func:`percq.percolation.mc_border_connectivity` and so gives the same
    counts.  ``state-tracked`` samples each link's actual post-swap state and
    filters that.  Only ``cfg.trials`` and ``cfg.master_seed`` are used; the
    open probability follows from ``base``.
    """
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    net = build_hiernet(n_nodes, k_pairs)
    counts = net.level_counts()
    seed = cfg.master_seed
    if mode == "ideal-scp":
        hits = border_successes(net, scp(base), cfg.trials, seed, threads)
        lscp = tuple(scp(base) for _ in counts)
        lconc = tuple(concurrence(base) for _ in counts)
    else:
        lv, us, vs = link_arrays(net)
        with numba_threads(threads):
            h, ssum, csum = _tracked_blocks(lv, us, vs, net.n_nodes, len(counts),
                                            base.lambda2, rng.seed_u64(seed), cfg.trials, BLOCK)
        hits = int(h.sum())
        ssum, csum = ssum.sum(axis=0), csum.sum(axis=0)
        lscp = tuple(float(s / (c * cfg.trials)) if c else math.nan for s, c in zip(ssum, counts))
        lconc = tuple(float(s / (c * cfg.trials)) if c else math.nan for s, c in zip(csum, counts))
    n_links = sum(counts)
    mean_scp = math.fsum(s * c for s, c in zip(lscp, counts) if c) / n_links
    mean_conc = math.fsum(s * c for s, c in zip(lconc, counts) if c) / n_links
    return ProtocolStats(
        mode, n_nodes, k_pairs, base, cfg.trials, seed,
        MCEstimate.from_counts(cfg.trials, hits),
        mean_scp, mean_conc, tuple(counts), lscp, lconc,
    )


@dataclass(frozen=True)
class DistillationPlan:
    n_nodes: int
    k_pairs: int
    initial_fidelity: float
    target_fidelity: float
    fidelity_trace: tuple[float, ...]
    iterations: int
    success_probability_model: float
    pairs_per_distilled_link: int
    total_initial_pairs: int
    n_pow6: int


def post_swap_fidelity(base: PurePair) -> float:
    """Werner fidelity of the PSI-branch state after swapping two copies of ``base``."""
    return werner_fidelity(swap(base, base).branches[0].state)


def pairs_per_distilled_link(iterations: int, success_probability: float = SUCCESS_PROBABILITY_MODEL) -> int:
    if iterations == 0:
        return 1
    return math.ceil(iterations / success_probability - 1e-9)


def distillation_plan(n_nodes: int, base: PurePair, max_iter: int = 64) -> DistillationPlan:
    """Pair budget for restoring the pre-swap fidelity after every swap.

    Only PSI-branch links need distilling (PHI branches of equal pairs are
    perfect).  The total follows the scaling ``2**(K-2) * m**(K-1)`` with
    ``m`` pairs per distilled link and ``K`` the pairs per edge of the full
    hierarchy; its combinatorial origin is not derived here.
    """
    if concurrence(base) < 0.5 - 1e-12:
        raise DomainError(
            f"distillation plan needs concurrence >= 1/2, got {concurrence(base)!r}"
        )
    k_pairs = required_pairs_for_full_hierarchy(n_nodes)
    if k_pairs < 2:
        raise DomainError(f"need at least one swap level (n_nodes >= 3), got {n_nodes}")
    f0 = post_swap_fidelity(base)
    target = werner_fidelity(base)
    trace = (f0,) if f0 >= target else tuple(distill_trace(f0, target, max_iter))
    iterations = len(trace) - 1
    m = pairs_per_distilled_link(iterations)
    return DistillationPlan(
        n_nodes, k_pairs, f0, target, trace, iterations, SUCCESS_PROBABILITY_MODEL, m,
        2 ** (k_pairs - 2) * m ** (k_pairs - 1), n_nodes**6,
    )
